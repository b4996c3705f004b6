"""Deterministic numeric kernels: seeded Gaussian draws, Cholesky, sampling
from precision-parameterized Gaussians and finite-difference oracles.

Gaussian draws
--------------
Every standard-normal variate produced here comes from the Box-Muller
transform applied to uniform doubles from a PCG64 bit generator.  For a
request of ``n`` variates we draw ``2m`` uniforms (``m = ceil(n / 2)``) in one
call, split them into ``u1 = 1 - u[:m]`` (so ``u1`` lies in ``(0, 1]``) and
``u2 = u[m:]``, and return the first ``n`` entries of::

    concat(r * cos(2 pi u2), r * sin(2 pi u2)),   r = sqrt(-2 log u1)

numpy's own ``standard_normal`` uses a ziggurat whose table layout is an
implementation detail; pinning the transform keeps traces reproducible
across numpy releases.
"""

import math

import numpy as np

from .errors import InvalidDimensionError, NonPositivePrecisionError, NotPositiveDefiniteError

CHOLESKY_PIVOT_RTOL = 1e-12
FD_GRAD_STEP = 1e-5
FD_HESS_STEP = 1e-3


class RngStream:
    """Single-owner random stream identified by ``(seed, key)``.

    ``fork(*key)`` derives an independent child stream from the same seed
    without touching this stream's state, which lets evaluation code draw
    samples without perturbing an optimizer trajectory.
    """

    def __init__(self, seed, key=()):
        seed = int(seed)
        if seed < 0 or seed >= 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self.key = tuple(int(k) for k in key)
        ss = np.random.SeedSequence(seed, spawn_key=self.key)
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, key={self.key})"

    def fork(self, *key):
        return RngStream(self.seed, self.key + tuple(key))

    def uniform(self, n):
        return self._gen.random(n)

    def standard_normal(self, shape):
        shape = (shape,) if np.isscalar(shape) else tuple(shape)
        n = int(np.prod(shape, dtype=np.int64))
        if n == 0:
            return np.zeros(shape)
        m = (n + 1) // 2
        u = self._gen.random(2 * m)
        r = np.sqrt(-2.0 * np.log(1.0 - u[:m]))
        angle = 2.0 * math.pi * u[m:]
        z = np.concatenate((r * np.cos(angle), r * np.sin(angle)))
        return z[:n].reshape(shape)

    def permutation(self, n):
        return self._gen.permutation(n)


def sample_std_normal(rng, d):
    """Return ``d`` i.i.d. N(0, 1) draws from ``rng``."""
    if int(d) < 1:
        raise InvalidDimensionError(f"dimension must be >= 1, got {d}")
    return rng.standard_normal(int(d))


def cholesky_factor(a):
    """Lower-triangular ``L`` with ``L @ L.T == a``.

    A pivot at or below ``1e-12 * max(diag(a))`` is reported as a
    :class:`NotPositiveDefiniteError` carrying the 0-based pivot index.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidDimensionError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    scale = np.max(np.diag(a)) if n else 0.0
    tol = CHOLESKY_PIVOT_RTOL * max(scale, 0.0)
    L = np.zeros_like(a)
    for j in range(n):
        row = L[j, :j]
        pivot = a[j, j] - row @ row
        if not pivot > tol:
            raise NotPositiveDefiniteError(
                f"matrix is not positive definite (pivot {j} = {pivot:.3e})", index=j
            )
        ljj = math.sqrt(pivot)
        L[j, j] = ljj
        if j + 1 < n:
            L[j + 1 :, j] = (a[j + 1 :, j] - L[j + 1 :, :j] @ row) / ljj
    return L


def cholesky_solve(L, b):
    """Solve ``(L L^T) x = b`` given the lower factor ``L``."""
    from scipy.linalg import solve_triangular

    z = solve_triangular(L, b, lower=True)
    return solve_triangular(L.T, z, lower=False)


def sample_gaussian_diag_precision(mu, prec, rng=None, deterministic=False, eps=None):
    """Draw ``mu + eps / sqrt(prec)``.

    ``eps`` may be injected (shape ``(D,)`` or ``(K, D)``); otherwise one
    vector is drawn from ``rng``.  With ``deterministic`` the mean is
    returned unchanged.
    """
    mu = np.asarray(mu, dtype=float)
    prec = np.asarray(prec, dtype=float)
    if np.any(prec <= 0.0):
        bad = int(np.argmax(prec <= 0.0))
        raise NonPositivePrecisionError(f"precision entry {bad} is {prec[bad]:.3e} <= 0")
    if deterministic:
        return mu.copy()
    if eps is None:
        eps = sample_std_normal(rng, mu.shape[0])
    return mu + np.asarray(eps, dtype=float) / np.sqrt(prec)


def sample_gaussian_full_precision(mu, prec, rng=None, deterministic=False, eps=None):
    """Draw ``mu + L^{-T} eps`` where ``L`` is the Cholesky factor of ``prec``."""
    from scipy.linalg import solve_triangular

    mu = np.asarray(mu, dtype=float)
    L = cholesky_factor(prec)
    if deterministic:
        return mu.copy()
    if eps is None:
        eps = sample_std_normal(rng, mu.shape[0])
    eps = np.asarray(eps, dtype=float)
    # rows of a (K, D) batch are independent draws
    return mu + solve_triangular(L.T, eps.T, lower=False).T


def fd_grad(f, x, h=FD_GRAD_STEP):
    x = np.asarray(x, dtype=float)
    if not h > 0:
        raise ValueError("finite-difference step must be positive")
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def fd_hessian_diag(f, x, h=FD_HESS_STEP):
    x = np.asarray(x, dtype=float)
    if not h > 0:
        raise ValueError("finite-difference step must be positive")
    f0 = f(x)
    out = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (f(x + e) - 2.0 * f0 + f(x - e)) / (h * h)
    return out


def fd_jacobian(fn, x, h=FD_GRAD_STEP):
    """Central-difference Jacobian of a vector-valued ``fn`` (columns = inputs)."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((np.asarray(fn(x + e)) - np.asarray(fn(x - e))) / (2.0 * h))
    return np.stack(cols, axis=-1)
