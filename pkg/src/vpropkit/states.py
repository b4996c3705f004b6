"""Value types for optimizer states and the Gaussians they describe."""

from dataclasses import dataclass, fields

import numpy as np

from .errors import NonPositivePrecisionError
from .numkit import sample_gaussian_diag_precision, sample_gaussian_full_precision


def _vec(x):
    return np.array(x, dtype=float, copy=True).reshape(-1)


@dataclass(frozen=True, eq=False)
class RmsState:
    """Point estimate ``mu`` plus the RMSprop scaling vector ``s``."""

    mu: np.ndarray
    s: np.ndarray

    @classmethod
    def init(cls, d):
        return cls(np.zeros(d), np.zeros(d))


@dataclass(frozen=True, eq=False)
class MeanFieldState:
    """Diagonal Gaussian ``N(mu, 1 / (s + lam))`` stored as mean, scale and prior precision."""

    mu: np.ndarray
    s: np.ndarray
    lam: float

    @classmethod
    def init(cls, d, lam):
        return cls(np.zeros(d), np.zeros(d), float(lam))

    @classmethod
    def from_moments(cls, mu, var, lam):
        return cls(_vec(mu), 1.0 / _vec(var) - lam, float(lam))

    @property
    def precision(self):
        return self.s + self.lam

    @property
    def variance(self):
        return 1.0 / (self.s + self.lam)


@dataclass(frozen=True, eq=False)
class BbviState:
    """Mean and standard deviations updated directly by stochastic gradients."""

    mu: np.ndarray
    sigma: np.ndarray

    @classmethod
    def init(cls, d, lam):
        return cls(np.zeros(d), np.full(d, lam**-0.5))

    @property
    def variance(self):
        return self.sigma**2


@dataclass(frozen=True, eq=False)
class AdaptiveBbviState:
    """BBVI with a separate RMSprop scaling vector for ``mu`` and for ``sigma``."""

    mu: np.ndarray
    sigma: np.ndarray
    s_mu: np.ndarray
    s_sigma: np.ndarray

    @classmethod
    def init(cls, d, lam):
        return cls(np.zeros(d), np.full(d, lam**-0.5), np.zeros(d), np.zeros(d))

    @property
    def variance(self):
        return self.sigma**2


@dataclass(frozen=True, eq=False)
class FullCovState:
    """Full Gaussian ``N(mu, (S + lam I)^{-1})``."""

    mu: np.ndarray
    S: np.ndarray
    lam: float

    @classmethod
    def init(cls, d, lam):
        return cls(np.zeros(d), np.zeros((d, d)), float(lam))

    @property
    def precision(self):
        return self.S + self.lam * np.eye(self.mu.shape[0])


@dataclass(frozen=True, eq=False)
class NaturalParams:
    """Natural parameters of a diagonal Gaussian.

    ``lam1 = mu / var`` and ``lam2 = -1 / (2 var)``; the mean-parameter view is
    ``m1 = mu`` and ``m2 = var + mu**2``.
    """

    lam1: np.ndarray
    lam2: np.ndarray

    def __post_init__(self):
        if np.any(self.lam2 >= 0.0):
            raise NonPositivePrecisionError("second natural parameter must be negative")

    @classmethod
    def from_moments(cls, mu, var):
        mu, var = _vec(mu), _vec(var)
        return cls(mu / var, -0.5 / var)

    def to_moments(self):
        prec = -2.0 * self.lam2
        return self.lam1 / prec, 1.0 / prec

    @property
    def m1(self):
        return self.to_moments()[0]

    @property
    def m2(self):
        mu, var = self.to_moments()
        return var + mu * mu


def state_size(state):
    """Number of real numbers a state object stores."""
    total = 0
    for f in fields(state):
        value = getattr(state, f.name)
        total += np.size(value)
    return int(total)


def gaussian_moments(state, lam=None):
    """``(mu, var)`` for a diagonal-family state; point estimates have zero variance."""
    if isinstance(state, MeanFieldState):
        return state.mu, state.variance
    if isinstance(state, (BbviState, AdaptiveBbviState)):
        return state.mu, state.variance
    if isinstance(state, RmsState):
        return state.mu, np.zeros_like(state.mu)
    raise TypeError(f"no diagonal Gaussian view for {type(state).__name__}")


def prior_precision(state, lam=None):
    own = getattr(state, "lam", None)
    if own is not None:
        return float(own)
    if lam is None:
        raise ValueError(f"{type(state).__name__} does not carry lam; pass it explicitly")
    return float(lam)


def draw(state, k, rng=None, eps=None, deterministic=False):
    """Return a ``(k, D)`` array of parameter samples from the state's Gaussian.

    Point-estimate states, and any state with ``deterministic=True``, yield
    ``k`` copies of the mean.
    """
    mu = state.mu
    if deterministic or isinstance(state, RmsState):
        return np.tile(mu, (k, 1))
    if eps is None:
        eps = rng.standard_normal((k, mu.shape[0]))
    eps = np.asarray(eps, dtype=float).reshape(k, mu.shape[0])
    if isinstance(state, MeanFieldState):
        return sample_gaussian_diag_precision(mu, state.precision, eps=eps)
    if isinstance(state, (BbviState, AdaptiveBbviState)):
        return mu + state.sigma * eps
    if isinstance(state, FullCovState):
        return sample_gaussian_full_precision(mu, state.precision, eps=eps)
    raise TypeError(f"cannot sample from {type(state).__name__}")
