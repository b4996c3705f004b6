"""Differentiable objectives ``f(theta) = -log p(y | X, theta)``.

Every objective accepts an optional ``batch`` of row indices.  Minibatch
values and derivatives are multiplied by ``N / M`` so that they stay unbiased
estimates of the full-data quantities; the prior is never part of an
objective and is therefore never rescaled.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import CapabilityError, InvalidDimensionError
from .numkit import fd_hessian_diag
from .states import RmsState, draw

HESSIAN_FULL_MAX_DIM = 2000
PROB_CLAMP = 1e-12


def sigmoid(x):
    return kernels._fallback.sigmoid(x)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Dense features ``X`` (N x D) with labels in {-1, +1}.

    Labels given as {0, 1} are remapped.  An empty dataset (N = 0) is allowed
    so that prior-only problems can be expressed.
    """

    X: np.ndarray
    y: np.ndarray
    names: tuple = field(default=())

    def __post_init__(self):
        X = np.array(self.X, dtype=float, ndmin=2)
        y = np.array(self.y, dtype=float).reshape(-1)
        if X.shape[0] == 0 and y.size == 0 and X.ndim == 2:
            X = X.reshape(0, X.shape[1])
        if X.shape[0] != y.shape[0]:
            raise InvalidDimensionError(f"X has {X.shape[0]} rows but y has {y.shape[0]} labels")
        if X.shape[1] < 1:
            raise InvalidDimensionError("dataset needs at least one feature column")
        if not np.all(np.isfinite(X)):
            raise ValueError("features must be finite")
        labels = set(np.unique(y).tolist())
        if labels <= {0.0, 1.0} and 0.0 in labels:
            y = np.where(y > 0, 1.0, -1.0)
        elif not labels <= {-1.0, 1.0}:
            raise ValueError(f"labels must be in {{-1, +1}} or {{0, 1}}, got {sorted(labels)}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    def subset(self, idx):
        return Dataset(self.X[idx], self.y[idx])


@dataclass(frozen=True)
class BatchSpec:
    """Minibatch size (``None`` = full batch) and the shuffle seed."""

    size: int | None = None
    seed: int = 0

    def batches(self, n, rng):
        """Index arrays covering one pass over ``n`` rows."""
        if self.size is None or self.size >= n:
            return [None]
        if self.size < 1:
            raise ValueError("batch size must be >= 1")
        perm = rng.permutation(n)
        return [perm[i : i + self.size] for i in range(0, n, self.size)]


class Objective:
    """Base class; subclasses implement ``_value_grad`` on a data view."""

    has_hessian_diag = False
    has_hessian_full = False
    # True when hessian_diag is a finite-difference estimate rather than analytic
    hessian_is_fd = False

    dim: int
    n: int

    def _check(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dim,):
            raise InvalidDimensionError(f"theta has shape {theta.shape}, expected ({self.dim},)")
        return theta

    def _scale(self, batch):
        if batch is None:
            return 1.0
        m = len(batch)
        if m < 1:
            raise ValueError("empty minibatch")
        return self.n / m

    def value(self, theta, batch=None):
        return self.value_grad(theta, batch)[0]

    def grad(self, theta, batch=None):
        return self.value_grad(theta, batch)[1]

    def value_grad(self, theta, batch=None):
        raise NotImplementedError

    def grads(self, thetas, batch=None):
        """Gradients at each row of a ``(K, D)`` array."""
        return np.stack([self.grad(t, batch) for t in np.atleast_2d(thetas)])

    def values(self, thetas, batch=None):
        return np.array([self.value(t, batch) for t in np.atleast_2d(thetas)])

    def hessian_diag(self, theta, batch=None):
        raise CapabilityError(f"{type(self).__name__} has no diagonal Hessian")

    def hessian_full(self, theta, batch=None):
        raise CapabilityError(f"{type(self).__name__} has no full Hessian")

    def logits(self, thetas, X):
        raise CapabilityError(f"{type(self).__name__} is not a classifier")

    def expected_nll(self, mu, var, rule):
        """``E_q[f]`` for ``q = N(mu, diag(var))`` with its ``mu``/``var`` gradients."""
        raise CapabilityError(f"{type(self).__name__} has no deterministic Gaussian expectation")

    def expected_curvature(self, mu, var, rule):
        raise CapabilityError(f"{type(self).__name__} has no deterministic Gaussian expectation")


class LogisticRegression(Objective):
    """Bernoulli-logistic likelihood ``sum_i log(1 + exp(-y_i x_i^T theta))``."""

    has_hessian_diag = True
    has_hessian_full = True

    def __init__(self, data):
        self.data = data
        self.dim = data.d
        self.n = data.n

    def _view(self, batch):
        if batch is None:
            return self.data.X, self.data.y
        return self.data.X[batch], self.data.y[batch]

    def value_grad(self, theta, batch=None):
        theta = self._check(theta)
        X, y = self._view(batch)
        scale = self._scale(batch)
        z = y * (X @ theta)
        value = np.sum(np.logaddexp(0.0, -z))
        grad = X.T @ (-y * sigmoid(-z))
        return scale * float(value), scale * grad

    def value(self, theta, batch=None):
        theta = self._check(theta)
        X, y = self._view(batch)
        z = y * (X @ theta)
        return self._scale(batch) * float(np.sum(np.logaddexp(0.0, -z)))

    def values(self, thetas, batch=None):
        X, y = self._view(batch)
        z = (np.atleast_2d(thetas) @ X.T) * y
        return self._scale(batch) * np.sum(np.logaddexp(0.0, -z), axis=1)

    def grads(self, thetas, batch=None):
        X, y = self._view(batch)
        z = (np.atleast_2d(thetas) @ X.T) * y
        return self._scale(batch) * ((-y * sigmoid(-z)) @ X)

    def hessian_diag(self, theta, batch=None):
        theta = self._check(theta)
        X, _ = self._view(batch)
        p = sigmoid(X @ theta)
        return self._scale(batch) * ((X * X).T @ (p * (1.0 - p)))

    def hessian_diags(self, thetas, batch=None):
        X, _ = self._view(batch)
        p = sigmoid(np.atleast_2d(thetas) @ X.T)
        return self._scale(batch) * ((p * (1.0 - p)) @ (X * X))

    def hessian_full(self, theta, batch=None):
        theta = self._check(theta)
        if self.dim > HESSIAN_FULL_MAX_DIM:
            raise InvalidDimensionError(
                f"dense Hessian refused for D={self.dim} > {HESSIAN_FULL_MAX_DIM}"
            )
        X, _ = self._view(batch)
        p = sigmoid(X @ theta)
        w = p * (1.0 - p)
        H = (X * w[:, None]).T @ X
        H = 0.5 * (H + H.T)
        # same reduction as hessian_diag so the diagonals agree bit for bit
        np.fill_diagonal(H, (X * X).T @ w)
        return self._scale(batch) * H

    def logits(self, thetas, X):
        return np.atleast_2d(thetas) @ np.asarray(X, dtype=float).T

    def _projected(self, mu, var):
        X = self.data.X
        return X @ mu, (X * X) @ var

    def expected_nll(self, mu, var, rule):
        m, v = self._projected(mu, var)
        e, dm, dv = kernels.gh_logsig_moments(m, v, self.data.y, rule.nodes, rule.weights)
        X = self.data.X
        return -float(np.sum(e)), -(X.T @ dm), -((X * X).T @ dv)

    def expected_curvature(self, mu, var, rule):
        """``E_q[Hessian of f]`` (dense); each row contributes ``E[p(1-p)] x x^T``."""
        m, v = self._projected(mu, var)
        _, _, dv = kernels.gh_logsig_moments(m, v, self.data.y, rule.nodes, rule.weights)
        X = self.data.X
        w = -2.0 * dv
        return (X * w[:, None]).T @ X


class QuadraticObjective(Objective):
    """``f(theta) = 1/2 theta^T H theta + c^T theta + const`` (data-free)."""

    has_hessian_diag = True
    has_hessian_full = True

    def __init__(self, H, c, const=0.0):
        self.H = np.atleast_2d(np.asarray(H, dtype=float))
        self.c = np.asarray(c, dtype=float).reshape(-1)
        self.const = float(const)
        self.dim = self.c.shape[0]
        self.n = 1
        if self.H.shape != (self.dim, self.dim):
            raise InvalidDimensionError("H and c dimensions disagree")

    def value_grad(self, theta, batch=None):
        theta = self._check(theta)
        Ht = self.H @ theta
        return float(0.5 * theta @ Ht + self.c @ theta + self.const), Ht + self.c

    def grads(self, thetas, batch=None):
        return np.atleast_2d(thetas) @ self.H.T + self.c

    def values(self, thetas, batch=None):
        T = np.atleast_2d(thetas)
        return 0.5 * np.einsum("kd,kd->k", T @ self.H.T, T) + T @ self.c + self.const

    def hessian_diag(self, theta, batch=None):
        self._check(theta)
        return np.diag(self.H).copy()

    def hessian_diags(self, thetas, batch=None):
        return np.tile(np.diag(self.H), (np.atleast_2d(thetas).shape[0], 1))

    def hessian_full(self, theta, batch=None):
        self._check(theta)
        return self.H.copy()

    def expected_nll(self, mu, var, rule=None):
        mu = np.asarray(mu, dtype=float)
        var = np.asarray(var, dtype=float)
        Hm = self.H @ mu
        value = 0.5 * (mu @ Hm + np.diag(self.H) @ var) + self.c @ mu + self.const
        return float(value), Hm + self.c, 0.5 * np.diag(self.H).copy()

    def expected_curvature(self, mu, var, rule=None):
        return self.H.copy()


@dataclass(frozen=True)
class MlpArchitecture:
    """Fully-connected net with one linear output logit.

    Flattened layout: layer-major; within a layer the row-major ``(out, in)``
    weight matrix comes first, then the bias.
    """

    n_in: int
    hidden: tuple = (10, 10)
    activation: str = "tanh"

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if not self.hidden:
            raise ValueError("hidden layer list must be non-empty")
        if self.activation not in ("tanh", "identity"):
            raise ValueError(f"unsupported activation {self.activation!r}")

    @property
    def sizes(self):
        return np.array((self.n_in, *self.hidden, 1), dtype=np.int64)

    @property
    def dim(self):
        s = self.sizes
        return int(sum(s[i + 1] * s[i] + s[i + 1] for i in range(len(s) - 1)))

    @property
    def act_code(self):
        return kernels.ACT_TANH if self.activation == "tanh" else kernels.ACT_IDENTITY

    def unflatten(self, theta):
        """List of ``(W, b)`` pairs, views into ``theta``."""
        s = self.sizes
        out, off = [], 0
        for i in range(len(s) - 1):
            n_in, n_out = int(s[i]), int(s[i + 1])
            W = theta[off : off + n_out * n_in].reshape(n_out, n_in)
            off += n_out * n_in
            out.append((W, theta[off : off + n_out]))
            off += n_out
        return out

    def init_params(self, rng, scale=None):
        """Glorot-style random weights and zero biases."""
        theta = np.zeros(self.dim)
        for W, b in self.unflatten(theta):
            n_out, n_in = W.shape
            sd = scale if scale is not None else np.sqrt(1.0 / n_in)
            W[...] = sd * rng.standard_normal(W.shape)
        return theta


class Mlp(Objective):
    """Logistic NLL of an :class:`MlpArchitecture` network.

    The diagonal Hessian is a second-difference estimate (2D + 1 forward
    passes), meant only for small networks.
    """

    has_hessian_diag = True
    hessian_is_fd = True

    def __init__(self, arch, data):
        if arch.n_in != data.d:
            raise InvalidDimensionError(f"architecture expects {arch.n_in} inputs, data has {data.d}")
        self.arch = arch
        self.data = data
        self.dim = arch.dim
        self.n = data.n
        self._sizes = arch.sizes

    def value_grad(self, theta, batch=None):
        theta = self._check(theta)
        X, y = (self.data.X, self.data.y) if batch is None else (self.data.X[batch], self.data.y[batch])
        value, grad = kernels.mlp_value_grad(theta, X, y, self._sizes, self.arch.act_code)
        scale = self._scale(batch)
        return scale * float(value), scale * grad

    def values(self, thetas, batch=None):
        X, y = (self.data.X, self.data.y) if batch is None else (self.data.X[batch], self.data.y[batch])
        z = self.logits(thetas, X) * y
        return self._scale(batch) * np.sum(np.logaddexp(0.0, -z), axis=1)

    def hessian_diag(self, theta, batch=None):
        theta = self._check(theta)
        return fd_hessian_diag(lambda t: self.value(t, batch), theta)

    def hessian_diags(self, thetas, batch=None):
        return np.stack([self.hessian_diag(t, batch) for t in np.atleast_2d(thetas)])

    def logits(self, thetas, X):
        X = np.asarray(X, dtype=float)
        thetas = np.atleast_2d(thetas)
        if thetas.shape[0] == 1:
            return kernels.mlp_logits(thetas[0], X, self._sizes, self.arch.act_code)[None, :]
        # many draws: one batched matmul per layer beats a loop of row kernels
        return kernels._fallback.mlp_logits_many(thetas, X, self._sizes, self.arch.act_code)


def logreg_value(data, theta, batch=None):
    return LogisticRegression(data).value(theta, batch)


def logreg_grad(data, theta, batch=None):
    return LogisticRegression(data).grad(theta, batch)


def logreg_hessian_diag(data, theta, batch=None):
    return LogisticRegression(data).hessian_diag(theta, batch)


def logreg_hessian_full(data, theta, batch=None):
    return LogisticRegression(data).hessian_full(theta, batch)


def mlp_value_grad(arch, data, theta, batch=None):
    return Mlp(arch, data).value_grad(theta, batch)


def predictive_probs(model, posterior, X, k, rng=None, deterministic=False, eps=None):
    """Monte-Carlo ``P(y = +1 | x)`` for every row of ``X``.

    Averages ``sigmoid(logit)`` over ``k`` posterior draws and clamps the
    result to ``[1e-12, 1 - 1e-12]``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if deterministic or isinstance(posterior, RmsState):
        # every draw would be the mean
        k = 1
    thetas = draw(posterior, k, rng=rng, eps=eps, deterministic=deterministic)
    p = sigmoid(model.logits(thetas, X)).mean(axis=0)
    return np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)


def predictive_prob(model, posterior, x, k, rng=None, deterministic=False, eps=None):
    x = np.asarray(x, dtype=float).reshape(1, -1)
    return float(predictive_probs(model, posterior, x, k, rng, deterministic, eps)[0])
