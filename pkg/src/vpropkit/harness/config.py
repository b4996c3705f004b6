"""TOML experiment configuration with strict key checking."""

import re
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..errors import ConfigError
from ..optimizers import StepConfig

ALGORITHM_PATTERNS = {
    "rmsprop": re.compile(r"^RMSprop$"),
    "vprop": re.compile(r"^Vprop-(\d+)$"),
    "cvi": re.compile(r"^CVI-(\d+)$"),
    "bbvi": re.compile(r"^BBVI$"),
    "bbvi-rmsprop": re.compile(r"^BBVI-RMSprop$"),
    "von": re.compile(r"^VON-(\d+)$"),
    "vong": re.compile(r"^VONG-(\d+)$"),
    "newton": re.compile(r"^Newton$"),
    "vi-exact": re.compile(r"^VI-exact$"),
}

_TOP_KEYS = {
    "name", "lam", "passes", "batch_size", "seeds", "output", "init_s",
    "record_timing", "data", "model", "evaluation", "algorithms",
}
_DATA_KEYS = {"path", "synthetic", "n", "d", "seed", "noise", "split", "split_seed", "scale"}
_MODEL_KEYS = {"kind", "hidden", "activation", "init_mu", "init_scale"}
_EVAL_KEYS = {"elbo", "elbo_samples", "test_samples"}
_ALG_KEYS = {"name", "alpha", "beta", "rho", "delta", "k_samples", "decay_rate", "tol", "batch_size"}


@dataclass(frozen=True)
class AlgorithmSpec:
    name: str
    method: str
    step: StepConfig
    tol: float = 1e-8
    batch_size: object = None  # None: use the experiment-wide setting


@dataclass(frozen=True)
class DataSpec:
    path: str | None = None
    synthetic: str | None = None
    n: int = 200
    d: int = 2
    seed: int = 0
    noise: float = 0.1
    split: float | None = 0.5
    split_seed: int = 0
    scale: str = "auto"


@dataclass(frozen=True)
class ModelSpec:
    kind: str = "logreg"
    hidden: tuple = (10, 10)
    activation: str = "tanh"
    init_mu: str | None = None
    init_scale: float | None = None


@dataclass(frozen=True)
class EvalSpec:
    elbo: str | None = None
    elbo_samples: int = 100
    test_samples: int = 100


@dataclass(frozen=True)
class ExperimentConfig:
    data: DataSpec
    algorithms: tuple
    model: ModelSpec = field(default_factory=ModelSpec)
    evaluation: EvalSpec = field(default_factory=EvalSpec)
    name: str = "experiment"
    lam: float = 1.0
    passes: int = 100
    batch_size: int | None = None
    seeds: tuple = (0,)
    output: str = "runs"
    init_s: float = 0.0
    record_timing: bool = False
    base_dir: str = "."


def _reject_unknown(table, allowed, prefix):
    for key in table:
        if key not in allowed:
            raise ConfigError("unknown key", key=f"{prefix}{key}")


def _typed(table, key, kind, prefix, default=None):
    if key not in table:
        return default
    value = table[key]
    ok = isinstance(value, kind) and not (kind in (int, (int, float)) and isinstance(value, bool))
    if not ok:
        raise ConfigError(f"expected {getattr(kind, '__name__', kind)}, got {value!r}", key=f"{prefix}{key}")
    return value


def resolve_method(name):
    for method, pattern in ALGORITHM_PATTERNS.items():
        m = pattern.match(name)
        if m:
            k = int(m.group(1)) if m.groups() else None
            return method, k
    return None, None


def _algorithm(table, idx, lam):
    prefix = f"algorithms[{idx}]."
    if not isinstance(table, dict):
        raise ConfigError("expected a table", key=f"algorithms[{idx}]")
    _reject_unknown(table, _ALG_KEYS, prefix)
    name = _typed(table, "name", str, prefix)
    if name is None:
        raise ConfigError("missing required key", key=f"{prefix}name")
    method, k_from_name = resolve_method(name)
    if method is None:
        raise ConfigError(f"unknown algorithm {name!r}", key=f"{prefix}name")
    num = (int, float)
    k = _typed(table, "k_samples", int, prefix)
    if k is None:
        k = k_from_name if k_from_name is not None else (1 if method in ("bbvi", "bbvi-rmsprop") else 0)
    try:
        step = StepConfig(
            alpha=float(_typed(table, "alpha", num, prefix, 0.1)),
            beta=float(_typed(table, "beta", num, prefix, _typed(table, "alpha", num, prefix, 0.1))),
            rho=float(_typed(table, "rho", num, prefix, 0.01)),
            delta=float(_typed(table, "delta", num, prefix, 1e-8)),
            k_samples=int(k),
            lam=lam,
            decay_rate=float(_typed(table, "decay_rate", num, prefix, 0.0)),
        )
    except ValueError as err:
        raise ConfigError(str(err), key=f"algorithms[{idx}]") from None
    tol = float(_typed(table, "tol", num, prefix, 1e-8))
    batch = _batch_size(table["batch_size"], f"{prefix}batch_size") if "batch_size" in table else None
    return AlgorithmSpec(name, method, step, tol, batch)


def _batch_size(value, key):
    if value == "full":
        return "full"
    if isinstance(value, int) and not isinstance(value, bool) and value >= 1:
        return value
    raise ConfigError("expected \"full\" or a positive integer", key=key)


def parse_config(raw, base_dir="."):
    """Validate a parsed TOML mapping and fill defaults."""
    _reject_unknown(raw, _TOP_KEYS, "")
    num = (int, float)
    if "data" not in raw:
        raise ConfigError("missing required key", key="data")
    if "algorithms" not in raw:
        raise ConfigError("missing required key", key="algorithms")

    data_t = raw["data"]
    if not isinstance(data_t, dict):
        raise ConfigError("expected a table", key="data")
    _reject_unknown(data_t, _DATA_KEYS, "data.")
    path = _typed(data_t, "path", str, "data.")
    synthetic = _typed(data_t, "synthetic", str, "data.")
    if (path is None) == (synthetic is None):
        raise ConfigError("exactly one of path / synthetic is required", key="data")
    if synthetic is not None and synthetic not in ("logreg", "mlp", "quadratic", "australian-like"):
        raise ConfigError(f"unknown synthetic problem {synthetic!r}", key="data.synthetic")
    split = data_t.get("split", 0.5)
    if split is not False and not isinstance(split, (int, float)):
        raise ConfigError("expected a fraction or false", key="data.split")
    scale = data_t.get("scale", "auto")
    if scale not in ("auto", True, False):
        raise ConfigError("expected \"auto\", true or false", key="data.scale")
    data = DataSpec(
        path=path,
        synthetic=synthetic,
        n=int(_typed(data_t, "n", int, "data.", 200)),
        d=int(_typed(data_t, "d", int, "data.", 2)),
        seed=int(_typed(data_t, "seed", int, "data.", 0)),
        noise=float(_typed(data_t, "noise", num, "data.", 0.1)),
        split=None if split is False else float(split),
        split_seed=int(_typed(data_t, "split_seed", int, "data.", 0)),
        scale=scale,
    )

    model_t = raw.get("model", {})
    _reject_unknown(model_t, _MODEL_KEYS, "model.")
    kind = _typed(model_t, "kind", str, "model.", "quadratic" if synthetic == "quadratic" else "logreg")
    if kind not in ("logreg", "mlp", "quadratic"):
        raise ConfigError(f"unknown model {kind!r}", key="model.kind")
    init_mu = _typed(model_t, "init_mu", str, "model.")
    if init_mu not in (None, "zero", "random"):
        raise ConfigError("expected \"zero\" or \"random\"", key="model.init_mu")
    init_scale = _typed(model_t, "init_scale", num, "model.")
    model = ModelSpec(
        kind=kind,
        hidden=tuple(_typed(model_t, "hidden", list, "model.", [10, 10])),
        activation=_typed(model_t, "activation", str, "model.", "tanh"),
        init_mu=init_mu,
        init_scale=None if init_scale is None else float(init_scale),
    )

    eval_t = raw.get("evaluation", {})
    _reject_unknown(eval_t, _EVAL_KEYS, "evaluation.")
    elbo = _typed(eval_t, "elbo", str, "evaluation.")
    if elbo not in (None, "quadrature", "mc", "none"):
        raise ConfigError("expected quadrature, mc or none", key="evaluation.elbo")
    evaluation = EvalSpec(
        elbo=elbo,
        elbo_samples=int(_typed(eval_t, "elbo_samples", int, "evaluation.", 100)),
        test_samples=int(_typed(eval_t, "test_samples", int, "evaluation.", 100)),
    )

    lam = float(_typed(raw, "lam", num, "", 1.0))
    if not lam > 0:
        raise ConfigError("must be > 0", key="lam")
    algs = raw["algorithms"]
    if not isinstance(algs, list) or not algs:
        raise ConfigError("expected a non-empty array of tables", key="algorithms")
    algorithms = tuple(_algorithm(a, i, lam) for i, a in enumerate(algs))

    passes = int(_typed(raw, "passes", int, "", 100))
    if passes < 1:
        raise ConfigError("must be >= 1", key="passes")
    # minibatches of 32 for networks, full batch otherwise
    batch = _batch_size(raw.get("batch_size", 32 if kind == "mlp" else "full"), "batch_size")
    batch_size = None if batch == "full" else batch
    seeds = raw.get("seeds", [0])
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) and s >= 0 for s in seeds):
        raise ConfigError("expected a non-empty list of non-negative integers", key="seeds")

    return ExperimentConfig(
        data=data,
        algorithms=algorithms,
        model=model,
        evaluation=evaluation,
        name=_typed(raw, "name", str, "", "experiment"),
        lam=lam,
        passes=passes,
        batch_size=batch_size,
        seeds=tuple(seeds),
        output=_typed(raw, "output", str, "", "runs"),
        init_s=float(_typed(raw, "init_s", num, "", 0.0)),
        record_timing=bool(_typed(raw, "record_timing", bool, "", False)),
        base_dir=str(base_dir),
    )


def shipped_configs():
    root = resources.files("vpropkit") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def _locate(path):
    p = Path(path)
    if p.is_file():
        return p
    shipped = resources.files("vpropkit") / "configs" / (p.name if p.suffix == ".toml" else f"{p.name}.toml")
    if shipped.is_file():
        return Path(str(shipped))
    raise ConfigError(f"cannot read config file {path!r}", key="config")


def load_config(path):
    """Load a TOML file, or a shipped config by name (e.g. ``"australian"``)."""
    p = _locate(path)
    try:
        with open(p, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config file: {err}", key="config") from None
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"invalid TOML: {err}", key="config") from None
    return parse_config(raw, base_dir=p.parent)
