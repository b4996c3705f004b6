"""Experiment driver: trajectories over data passes with per-pass evaluation."""

import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import optimizers as opt
from ..data_io import (
    gen_australian_like,
    gen_conjugate_quadratic,
    gen_logreg_synthetic,
    gen_mlp_synthetic,
    load_libsvm_dataset,
    train_test_split,
    MaxAbsScaler,
)
from ..errors import CapabilityError, ConfigError, VpropError
from ..evaluation import elbo_mc, elbo_quadrature, test_log_loss, vi_exact_baseline
from ..models import BatchSpec, LogisticRegression, Mlp, MlpArchitecture
from ..numkit import RngStream
from ..states import BbviState, AdaptiveBbviState, FullCovState, MeanFieldState, RmsState

log = logging.getLogger(__name__)

DATA_DIR_ENV = "VPROPKIT_DATA_DIR"


@dataclass
class TraceRecord:
    run_id: str
    algorithm: str
    seed: int
    pass_index: int
    elbo: float
    elbo_se: float
    test_logloss: float
    wall_ms: float
    note: str = ""


@dataclass
class Problem:
    objective: object
    test: object
    lam: float
    conjugate: object = None


def _resolve_data_path(path, base_dir):
    p = Path(path)
    candidates = [p] if p.is_absolute() else [Path(base_dir) / p, Path.cwd() / p]
    if not p.is_absolute() and os.environ.get(DATA_DIR_ENV):
        candidates.append(Path(os.environ[DATA_DIR_ENV]) / p.name)
    for c in candidates:
        if c.is_file():
            return c
    raise ConfigError(f"dataset file {path!r} not found (set {DATA_DIR_ENV} to its directory)", key="data.path")


def build_problem(cfg):
    ds, ms = cfg.data, cfg.model
    conjugate = None
    if ds.synthetic == "quadratic":
        conjugate = gen_conjugate_quadratic(ds.d, ds.seed, cfg.lam, diagonal=True)
        return Problem(conjugate.objective, None, cfg.lam, conjugate)
    if ds.path is not None:
        path = _resolve_data_path(ds.path, cfg.base_dir)
        scale = None if ds.scale == "auto" else bool(ds.scale)
        train, test = load_libsvm_dataset(path, ds.split, ds.split_seed, scale)
    else:
        if ds.synthetic == "logreg":
            data = gen_logreg_synthetic(ds.n, ds.d, ds.seed)
        elif ds.synthetic == "australian-like":
            data = gen_australian_like(ds.n, ds.seed)
        else:
            data = gen_mlp_synthetic(ds.n, ds.seed, noise=ds.noise, d_in=ds.d)
        if ds.split is None:
            train, test = data, None
        else:
            train, test = train_test_split(data, ds.split, ds.split_seed)
        if ds.scale is True:
            scaler = MaxAbsScaler.fit(train)
            train = scaler.transform(train)
            test = scaler.transform(test) if test is not None else None
    if ms.kind == "mlp":
        arch = MlpArchitecture(train.d, ms.hidden, ms.activation)
        obj = Mlp(arch, train)
    else:
        obj = LogisticRegression(train)
    return Problem(obj, test, cfg.lam, conjugate)


def _initial_mean(cfg, obj, seed):
    mode = cfg.model.init_mu or ("random" if isinstance(obj, Mlp) else "zero")
    if mode == "zero":
        return np.zeros(obj.dim)
    rng = RngStream(seed).fork(4)
    if isinstance(obj, Mlp):
        return obj.arch.init_params(rng, cfg.model.init_scale)
    return (cfg.model.init_scale or 0.1) * rng.standard_normal(obj.dim)


def initial_state(method, cfg, obj, seed):
    d, lam, s0 = obj.dim, cfg.lam, cfg.init_s
    mu = _initial_mean(cfg, obj, seed)
    if method in ("rmsprop", "newton"):
        return RmsState(mu, np.zeros(d))
    if method in ("vprop", "cvi"):
        return MeanFieldState(mu, np.full(d, s0), lam)
    if method in ("von", "vong"):
        return FullCovState(mu, s0 * np.eye(d), lam)
    sigma = np.full(d, (s0 + lam) ** -0.5)
    if method == "bbvi":
        return BbviState(mu, sigma)
    if method == "bbvi-rmsprop":
        return AdaptiveBbviState(mu, sigma, np.zeros(d), np.zeros(d))
    raise ValueError(method)


def apply_step(method, state, obj, step, batch, rng):
    if method == "rmsprop":
        return opt.rmsprop_step(state, obj, step, batch)
    if method == "vprop":
        return opt.vprop_step(state, obj, step, batch, rng)
    if method == "cvi":
        return opt.cvi_meanfield_step(state, obj, step, batch, rng)
    if method == "bbvi":
        return opt.bbvi_step(state, obj, step, batch, rng)
    if method == "bbvi-rmsprop":
        return opt.bbvi_rmsprop_step(state, obj, step, batch, rng)
    if method == "von":
        return opt.von_step(state, obj, step, batch, rng)
    if method == "vong":
        return opt.vong_step(state, obj, step, batch, rng)
    if method == "newton":
        return RmsState(opt.newton_step(state.mu, obj, step.rho, batch), state.s)
    raise ValueError(method)


def _elbo_mode(cfg, obj):
    if cfg.evaluation.elbo is not None:
        return cfg.evaluation.elbo
    return "quadrature" if isinstance(obj, LogisticRegression) or cfg.data.synthetic == "quadratic" else "mc"


def evaluate_state(cfg, problem, state, rng):
    """(elbo, elbo_se, test_logloss) for one state; uses only ``rng``."""
    obj, lam = problem.objective, problem.lam
    mode = _elbo_mode(cfg, obj)
    elbo = se = math.nan
    if not isinstance(state, RmsState) and mode != "none":
        if mode == "quadrature" and not isinstance(state, FullCovState):
            try:
                elbo = elbo_quadrature(obj, state, lam=lam).value
                se = 0.0
            except CapabilityError:
                mode = "mc"
        if mode == "mc" or (mode == "quadrature" and isinstance(state, FullCovState)):
            est = elbo_mc(obj, state, cfg.evaluation.elbo_samples, rng.fork(0), lam=lam)
            elbo, se = est.value, est.std_error
    loss = math.nan
    if problem.test is not None:
        loss = test_log_loss(
            obj,
            state,
            problem.test,
            cfg.evaluation.test_samples,
            rng=rng.fork(1),
            deterministic=isinstance(state, RmsState),
        )
    return elbo, se, loss


def run_algorithm(cfg, problem, alg, seed):
    """Records for one (algorithm, seed) trajectory; errors truncate the trace."""
    obj = problem.objective
    root = RngStream(seed)
    step_rng = root.fork(1)
    batch_rng = root.fork(2)
    size = cfg.batch_size if alg.batch_size is None else alg.batch_size
    batches = BatchSpec(None if size == "full" else size, seed)
    run_id = f"{alg.name}/seed{seed}"
    records = []
    try:
        state = initial_state(alg.method, cfg, obj, seed)
    except VpropError as err:
        log.warning("%s: initialization failed: %s", run_id, err)
        return records
    t = 0
    elapsed = 0.0
    for p in range(cfg.passes):
        start = time.perf_counter()
        try:
            for batch in batches.batches(obj.n, batch_rng):
                state = apply_step(alg.method, state, obj, alg.step.at(t), batch, step_rng)
                t += 1
        except (VpropError, np.linalg.LinAlgError, FloatingPointError) as err:
            note = f"aborted at step {t} (pass {p}): {err}"
            log.warning("%s: %s", run_id, note)
            if records:
                records[-1].note = note
            else:
                records.append(TraceRecord(run_id, alg.name, seed, p, math.nan, math.nan, math.nan, 0.0, note))
            return records
        elapsed += time.perf_counter() - start
        elbo, se, loss = evaluate_state(cfg, problem, state, root.fork(3, p))
        wall = 1000.0 * elapsed if cfg.record_timing else 0.0
        records.append(TraceRecord(run_id, alg.name, seed, p, elbo, se, loss, wall))
    return records


def run_vi_exact(cfg, problem, alg):
    seed = cfg.seeds[0]
    start = time.perf_counter()
    state, est = vi_exact_baseline(problem.objective, problem.lam, tol=alg.tol)
    wall = 1000.0 * (time.perf_counter() - start) if cfg.record_timing else 0.0
    _, _, loss = evaluate_state(cfg, problem, state, RngStream(seed).fork(5))
    run_id = f"{alg.name}/seed{seed}"
    return [
        TraceRecord(run_id, alg.name, seed, p, est.value, 0.0, loss, wall)
        for p in range(cfg.passes)
    ]


def _job(args):
    cfg, alg, seed = args
    problem = build_problem(cfg)
    if alg.method == "vi-exact":
        return run_vi_exact(cfg, problem, alg)
    return run_algorithm(cfg, problem, alg, seed)


def run_experiment(cfg, jobs=1):
    """All trace records, ordered by (algorithm as configured, seed).

    VI-exact is computed once per problem and repeated on every pass as a
    constant reference.  ``jobs > 1`` runs trajectories in worker processes;
    the merge order does not depend on completion order.
    """
    tasks = []
    for alg in cfg.algorithms:
        seeds = cfg.seeds[:1] if alg.method == "vi-exact" else cfg.seeds
        tasks.extend((cfg, alg, s) for s in seeds)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_job, tasks))
    else:
        problem = build_problem(cfg)
        results = []
        for _, alg, seed in tasks:
            if alg.method == "vi-exact":
                results.append(run_vi_exact(cfg, problem, alg))
            else:
                results.append(run_algorithm(cfg, problem, alg, seed))
    return [rec for chunk in results for rec in chunk]
