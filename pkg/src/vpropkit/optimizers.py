"""One-step state transitions for the Gaussian VI optimizers and their baselines.

Every ``*_step`` function is pure: it reads a state, an objective, a
:class:`StepConfig`, an optional minibatch and an RNG stream, and returns a
new state.  ``eps`` may be passed to inject the standard-normal noise
(shape ``(K, D)``) instead of drawing it from ``rng``.

Update order is the same everywhere: the scale / precision is refreshed
first and the mean step then uses the *new* scale.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    CapabilityError,
    NonPositivePrecisionError,
    NotPositiveDefiniteError,
    SingularMatrixError,
)
from .numkit import cholesky_factor, sample_gaussian_diag_precision, sample_gaussian_full_precision
from .states import (
    AdaptiveBbviState,
    BbviState,
    FullCovState,
    MeanFieldState,
    NaturalParams,
    RmsState,
)

SIGMA_FLOOR = 1e-8


@dataclass(frozen=True)
class StepConfig:
    """Step sizes and sampling options shared by all optimizers.

    ``k_samples = 0`` selects the deterministic (delta) mode where every
    expectation is evaluated at the mean.  ``decay_rate > 0`` turns on the
    ``1 / (1 + decay_rate * t)`` step-size schedule, see :meth:`at`.
    """

    alpha: float = 0.1
    beta: float = 0.1
    rho: float = 0.01
    delta: float = 1e-8
    k_samples: int = 1
    lam: float = 1.0
    decay_rate: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "beta", "rho"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.delta < 0:
            raise ValueError("delta must be >= 0")
        if self.k_samples < 0:
            raise ValueError("k_samples must be >= 0")
        if not self.lam > 0:
            raise ValueError("lam must be > 0")
        if self.decay_rate < 0:
            raise ValueError("decay_rate must be >= 0")

    def at(self, t):
        """Config for iteration ``t`` (0-based) under the decay schedule."""
        if self.decay_rate == 0.0:
            return self
        f = 1.0 / (1.0 + self.decay_rate * t)
        return replace(self, alpha=self.alpha * f, beta=self.beta * f, rho=self.rho * f, decay_rate=0.0)


def _noise(rng, eps, k, d):
    if eps is not None:
        return np.asarray(eps, dtype=float).reshape(k, d)
    return rng.standard_normal((k, d))


def _hessian_diags(obj, thetas, batch):
    if not obj.has_hessian_diag:
        raise CapabilityError(f"{type(obj).__name__} does not expose a diagonal Hessian")
    fn = getattr(obj, "hessian_diags", None)
    if fn is not None:
        return fn(thetas, batch)
    return np.stack([obj.hessian_diag(t, batch) for t in thetas])


def rmsprop_step(state, obj, cfg, batch=None):
    g = obj.grad(state.mu, batch)
    s = (1.0 - cfg.beta) * state.s + cfg.beta * (g * g)
    mu = state.mu - cfg.alpha * (g / np.sqrt(s + cfg.delta))
    return RmsState(mu, s)


def vprop0_step(state, obj, cfg, batch=None):
    """Delta-approximation variant: gradient taken at the mean."""
    lam = state.lam
    g = obj.grad(state.mu, batch)
    s = (1.0 - cfg.beta) * state.s + cfg.beta * (g * g)
    mu = state.mu - cfg.alpha * (g + lam * state.mu) / (s + lam)
    return MeanFieldState(mu, s, lam)


def vprop_step(state, obj, cfg, batch=None, rng=None, eps=None):
    """Gauss-Newton mean-field update with ``cfg.k_samples`` draws from q.

    The same draws feed both the gradient mean and the squared-gradient
    mean.  ``k_samples = 0`` is exactly :func:`vprop0_step`.
    """
    k = cfg.k_samples
    if k == 0:
        return vprop0_step(state, obj, cfg, batch)
    lam = state.lam
    d = state.mu.shape[0]
    thetas = sample_gaussian_diag_precision(state.mu, state.s + lam, eps=_noise(rng, eps, k, d))
    G = obj.grads(thetas, batch)
    g = G.mean(axis=0)
    h = (G * G).mean(axis=0)
    s = (1.0 - cfg.beta) * state.s + cfg.beta * h
    mu = state.mu - cfg.alpha * (g + lam * state.mu) / (s + lam)
    return MeanFieldState(mu, s, lam)


def cvi_meanfield_step(state, obj, cfg, batch=None, rng=None, eps=None):
    """Mean-field CVI with the exact diagonal Hessian.

    New precision ``(1 - beta) / var + beta (E[diag H] + lam)``, then
    ``mu - beta * var_new * (E[grad] + lam mu)``.
    """
    if not obj.has_hessian_diag:
        raise CapabilityError(f"{type(obj).__name__} does not expose a diagonal Hessian")
    lam = state.lam
    k = cfg.k_samples
    if k == 0:
        thetas = state.mu[None, :]
    else:
        d = state.mu.shape[0]
        thetas = sample_gaussian_diag_precision(state.mu, state.s + lam, eps=_noise(rng, eps, k, d))
    g = obj.grads(thetas, batch).mean(axis=0)
    h = _hessian_diags(obj, thetas, batch).mean(axis=0)
    prec = (1.0 - cfg.beta) * (state.s + lam) + cfg.beta * (h + lam)
    if np.any(prec <= 0.0):
        bad = int(np.argmax(prec <= 0.0))
        raise NonPositivePrecisionError(f"precision entry {bad} became {prec[bad]:.3e}")
    mu = state.mu - cfg.beta * (g + lam * state.mu) / prec
    return MeanFieldState(mu, prec - lam, lam)


def cvi_natural_step(state, grad_mu, grad_var, beta):
    """Additive step on the natural parameters of a diagonal Gaussian.

    ``grad_mu`` and ``grad_var`` are ELBO gradients w.r.t. the mean and the
    variance; they are mapped to mean-parameter gradients by the chain rule
    ``d/dm1 = d/dmu - 2 mu d/dvar`` and ``d/dm2 = d/dvar``.
    """
    mu, _ = state.to_moments()
    grad_mu = np.asarray(grad_mu, dtype=float)
    grad_var = np.asarray(grad_var, dtype=float)
    g1 = grad_mu - 2.0 * grad_var * mu
    lam1 = state.lam1 + beta * g1
    lam2 = state.lam2 + beta * grad_var
    if np.any(lam2 >= 0.0):
        bad = int(np.argmax(lam2 >= 0.0))
        raise NonPositivePrecisionError(f"natural parameter {bad} left the negative half-line")
    return NaturalParams(lam1, lam2)


def meanfield_elbo_gradients(state, grad_mean, hess_diag_mean):
    """ELBO gradients w.r.t. ``mu`` and ``var`` from expected gradient / Hessian of f."""
    lam = state.lam
    grad_mu = -grad_mean - lam * state.mu
    grad_var = -0.5 * hess_diag_mean - 0.5 * lam + 0.5 * (state.s + lam)
    return grad_mu, grad_var


def bbvi_gradients(state, obj, lam, k, batch=None, rng=None, eps=None):
    """Reparameterization estimates of ``dL/dmu`` and ``dL/dsigma``.

    The prior and entropy contributions are analytic; only the likelihood
    term is sampled.
    """
    d = state.mu.shape[0]
    e = _noise(rng, eps, k, d)
    thetas = state.mu + state.sigma * e
    G = obj.grads(thetas, batch)
    grad_mu = -G.mean(axis=0) - lam * state.mu
    grad_sigma = -(G * e).mean(axis=0) - lam * state.sigma + 1.0 / state.sigma
    return grad_mu, grad_sigma


def bbvi_step(state, obj, cfg, batch=None, rng=None, eps=None):
    k = max(cfg.k_samples, 1)
    gm, gs = bbvi_gradients(state, obj, cfg.lam, k, batch, rng, eps)
    mu = state.mu + cfg.rho * gm
    sigma = np.maximum(state.sigma + cfg.rho * gs, SIGMA_FLOOR)
    return BbviState(mu, sigma)


def bbvi_rmsprop_step(state, obj, cfg, batch=None, rng=None, eps=None):
    """BBVI with RMSprop step sizes on both ``mu`` and ``sigma`` (4D of state)."""
    k = max(cfg.k_samples, 1)
    gm, gs = bbvi_gradients(state, obj, cfg.lam, k, batch, rng, eps)
    s_mu = (1.0 - cfg.beta) * state.s_mu + cfg.beta * gm * gm
    s_sigma = (1.0 - cfg.beta) * state.s_sigma + cfg.beta * gs * gs
    mu = state.mu + cfg.alpha * gm / np.sqrt(s_mu + cfg.delta)
    sigma = np.maximum(state.sigma + cfg.alpha * gs / np.sqrt(s_sigma + cfg.delta), SIGMA_FLOOR)
    return AdaptiveBbviState(mu, sigma, s_mu, s_sigma)


def _full_samples(state, cfg, rng, eps):
    k = cfg.k_samples
    if k == 0:
        return state.mu[None, :]
    d = state.mu.shape[0]
    return np.atleast_2d(
        sample_gaussian_full_precision(state.mu, state.precision, eps=_noise(rng, eps, k, d))
    )


def _full_mean_step(state, S, g, beta):
    lam = state.lam
    P = S + lam * np.eye(S.shape[0])
    try:
        L = cholesky_factor(P)
    except NotPositiveDefiniteError as err:
        raise NotPositiveDefiniteError(f"S + lam I lost positive definiteness: {err}", index=err.index) from err
    r = g + lam * state.mu
    step = solve_triangular(L.T, solve_triangular(L, r, lower=True), lower=False)
    return FullCovState(state.mu - beta * step, S, lam)


def von_step(state, obj, cfg, batch=None, rng=None, eps=None):
    """Variational online-Newton: moving average of Hessians at samples from q."""
    if not obj.has_hessian_full:
        raise CapabilityError(f"{type(obj).__name__} does not expose a full Hessian")
    thetas = _full_samples(state, cfg, rng, eps)
    g = obj.grads(thetas, batch).mean(axis=0)
    H = np.mean([obj.hessian_full(t, batch) for t in thetas], axis=0)
    S = (1.0 - cfg.beta) * state.S + cfg.beta * H
    return _full_mean_step(state, S, g, cfg.beta)


def vong_step(state, obj, cfg, batch=None, rng=None, eps=None):
    """Variational online natural gradient: Hessian replaced by ``g g^T``."""
    thetas = _full_samples(state, cfg, rng, eps)
    G = obj.grads(thetas, batch)
    g = G.mean(axis=0)
    S = (1.0 - cfg.beta) * state.S + cfg.beta * (G.T @ G) / G.shape[0]
    return _full_mean_step(state, S, g, cfg.beta)


def newton_step(theta, obj, rho, batch=None):
    if not obj.has_hessian_full:
        raise CapabilityError(f"{type(obj).__name__} does not expose a full Hessian")
    theta = np.asarray(theta, dtype=float)
    H = obj.hessian_full(theta, batch)
    g = obj.grad(theta, batch)
    if not np.any(g):
        return theta.copy()
    try:
        if np.linalg.cond(H) > 1.0 / np.finfo(float).eps:
            raise np.linalg.LinAlgError("ill-conditioned")
        step = np.linalg.solve(H, g)
    except np.linalg.LinAlgError as err:
        raise SingularMatrixError(f"Hessian is singular at theta ({err})") from err
    return theta - rho * step
