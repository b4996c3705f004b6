"""LIBSVM ingestion, splitting, scaling and synthetic problem generators."""

import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError
from .models import Dataset, QuadraticObjective
from .numkit import RngStream


@dataclass(frozen=True)
class RawRecord:
    label: float
    indices: tuple  # 1-based, strictly increasing
    values: tuple


def _label(token, lineno):
    try:
        v = float(token)
    except ValueError:
        raise ParseError(f"bad label {token!r}", lineno) from None
    if v in (1.0, -1.0):
        return v
    if v == 0.0:
        return -1.0
    raise ParseError(f"label {token!r} is not one of -1, +1, 0, 1", lineno)


def parse_libsvm(source):
    """Parse LIBSVM text into records and the inferred dimension.

    ``source`` may be a path, a string of file contents or a text stream.
    Blank lines are skipped and ``#`` starts a comment.
    """
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and Path(source).is_file()):
        with open(source, encoding="utf-8") as fh:
            return parse_libsvm(fh)
    if isinstance(source, str):
        source = io.StringIO(source)
    records = []
    dim = 0
    for lineno, line in enumerate(source, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        label = _label(tokens[0], lineno)
        idx, vals = [], []
        last = 0
        for tok in tokens[1:]:
            key, sep, val = tok.partition(":")
            if not sep:
                raise ParseError(f"malformed feature token {tok!r}", lineno)
            try:
                i = int(key)
                v = float(val)
            except ValueError:
                raise ParseError(f"malformed feature token {tok!r}", lineno) from None
            if i < 1:
                raise ParseError(f"feature index {i} must be >= 1", lineno)
            if i <= last:
                raise ParseError(f"feature indices not increasing ({last} then {i})", lineno)
            if not math.isfinite(v):
                raise ParseError(f"non-finite value in {tok!r}", lineno)
            last = i
            idx.append(i)
            vals.append(v)
        dim = max(dim, last)
        records.append(RawRecord(label, tuple(idx), tuple(vals)))
    return records, dim


def serialize_libsvm(records):
    lines = []
    for r in records:
        feats = " ".join(f"{i}:{v!r}" for i, v in zip(r.indices, r.values))
        label = "+1" if r.label > 0 else "-1"
        lines.append(f"{label} {feats}".rstrip())
    return "\n".join(lines) + "\n"


def add_bias_and_densify(records, dim):
    """Dense ``N x (dim + 1)`` dataset whose last column is a constant 1."""
    X = np.zeros((len(records), dim + 1))
    y = np.empty(len(records))
    for row, r in enumerate(records):
        if r.indices:
            if r.indices[-1] > dim:
                raise ValueError(f"record {row} has index {r.indices[-1]} > dim {dim}")
            X[row, np.asarray(r.indices) - 1] = r.values
        X[row, dim] = 1.0
        y[row] = r.label
    return Dataset(X, y)


def train_test_split(data, fraction, seed):
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie strictly between 0 and 1")
    n_train = int(math.floor(fraction * data.n))
    if n_train == 0 or n_train == data.n:
        raise ValueError(f"split of {data.n} rows at {fraction} leaves one side empty")
    perm = RngStream(seed).permutation(data.n)
    return data.subset(np.sort(perm[:n_train])), data.subset(np.sort(perm[n_train:]))


@dataclass(frozen=True, eq=False)
class MaxAbsScaler:
    """Per-column ``x / max|x|`` fit on training rows; the bias column is left alone."""

    scale: np.ndarray

    @classmethod
    def fit(cls, data):
        m = np.max(np.abs(data.X), axis=0) if data.n else np.ones(data.d)
        return cls(np.where(m > 0.0, m, 1.0))

    def transform(self, data):
        return Dataset(data.X / self.scale, data.y)


def load_libsvm_dataset(path, split=0.5, split_seed=0, scale=None):
    """Load, densify (+bias), split and optionally max-abs scale a LIBSVM file.

    ``scale=None`` applies the naming convention: files whose name contains
    "scale" are used as-is, everything else is max-abs scaled on the train side.
    """
    path = Path(path)
    records, dim = parse_libsvm(path)
    data = add_bias_and_densify(records, dim)
    if split is None:
        train, test = data, None
    else:
        train, test = train_test_split(data, split, split_seed)
    if scale is None:
        scale = "scale" not in path.name.lower()
    if scale:
        scaler = MaxAbsScaler.fit(train)
        train = scaler.transform(train)
        test = scaler.transform(test) if test is not None else None
    return train, test


@dataclass(frozen=True, eq=False)
class ConjugateProblem:
    """Quadratic negative log-likelihood under the ``N(0, I / lam)`` prior."""

    objective: QuadraticObjective
    H: np.ndarray
    c: np.ndarray
    lam: float
    post_mean: np.ndarray
    post_prec: np.ndarray
    log_evidence: float

    @property
    def meanfield_prec(self):
        """Precision of the best diagonal Gaussian (equals the posterior when H is diagonal)."""
        return np.diag(self.post_prec).copy()


def conjugate_posterior(H, c, lam):
    H = np.atleast_2d(np.asarray(H, dtype=float))
    c = np.asarray(c, dtype=float).reshape(-1)
    d = c.shape[0]
    P = H + lam * np.eye(d)
    mean = -np.linalg.solve(P, c)
    _, logdet = np.linalg.slogdet(P)
    log_ev = 0.5 * d * math.log(lam) - 0.5 * logdet - 0.5 * float(c @ mean)
    return mean, P, log_ev


def make_conjugate_problem(H, c, lam):
    H = np.atleast_2d(np.asarray(H, dtype=float))
    c = np.asarray(c, dtype=float).reshape(-1)
    mean, P, log_ev = conjugate_posterior(H, c, lam)
    return ConjugateProblem(QuadraticObjective(H, c), H, c, float(lam), mean, P, log_ev)


def gen_conjugate_quadratic(d, seed, lam=1.0, diagonal=False):
    """Random ``H = M^T M + I`` (or its diagonal) and ``c`` with the analytic posterior."""
    if d < 1:
        raise ValueError("d must be >= 1")
    rng = RngStream(seed)
    M = rng.standard_normal((d, d))
    H = M.T @ M + np.eye(d)
    if diagonal:
        H = np.diag(np.diag(H))
    c = rng.standard_normal(d)
    return make_conjugate_problem(H, c, lam)


def gen_logreg_synthetic(n, d, seed, return_theta=False):
    """Standard-normal features with labels drawn from a logistic model."""
    if n < 1 or d < 1:
        raise ValueError("n and d must be >= 1")
    rng = RngStream(seed)
    theta = rng.standard_normal(d)
    X = rng.standard_normal((n, d))
    p = 1.0 / (1.0 + np.exp(-(X @ theta)))
    y = np.where(rng.uniform(n) < p, 1.0, -1.0)
    data = Dataset(X, y)
    return (data, theta) if return_theta else data


def gen_mlp_synthetic(n, seed, noise=0.1, d_in=2):
    """Two interleaved noisy spirals-like classes in the plane (for MLP runs).

    Labels come from the sign of ``sin(2 x1) * cos(1.5 x2)`` with a fraction
    ``noise`` of them flipped, which gives a small model room to overfit.
    """
    rng = RngStream(seed)
    X = rng.uniform(n * d_in).reshape(n, d_in) * 4.0 - 2.0
    score = np.sin(2.0 * X[:, 0]) * np.cos(1.5 * X[:, 1 % d_in])
    y = np.where(score > 0.0, 1.0, -1.0)
    flip = rng.uniform(n) < noise
    y = np.where(flip, -y, y)
    return Dataset(X, y)


# per-column (mean, std) of the 14 Australian-Scale features; None marks a
# +-1 binary column with that mean
_AUSTRALIAN_COLUMNS = (
    (0.36, None), (-0.46, 0.37), (-0.65, 0.37), (-0.26, 0.44), (-0.03, 0.55),
    (0.02, 0.51), (-0.83, 0.24), (0.04, None), (0.01, None), (-0.92, 0.12),
    (-0.04, None), (-0.05, 0.21), (-0.83, 0.18), (-0.99, 0.04),
)


def gen_australian_like(n=690, seed=0, logit_scale=2.5):
    """Stand-in with the Australian-Scale shape: 14 features in [-1, 1] plus bias.

    Binary columns are +-1 with the listed mean.  Continuous columns are
    lognormal offsets from -1 matched to the listed mean and spread and
    clipped at 1, so the skewed ones pile up near -1 as in the LIBSVM
    "scale" file.  Labels follow a logistic model whose feature logits have
    standard deviation ``logit_scale``.
    """
    rng = RngStream(seed)
    X = np.empty((n, len(_AUSTRALIAN_COLUMNS)))
    for j, (m, sd) in enumerate(_AUSTRALIAN_COLUMNS):
        if sd is None:
            X[:, j] = np.where(rng.uniform(n) < 0.5 * (1.0 + m), 1.0, -1.0)
        else:
            cv = sd / (m + 1.0)
            sig = math.sqrt(math.log1p(cv * cv))
            u = np.exp(sig * rng.standard_normal(n) - 0.5 * sig * sig)
            X[:, j] = np.minimum(-1.0 + (m + 1.0) * u, 1.0)
    theta = rng.standard_normal(X.shape[1])
    z = X @ theta
    z = logit_scale * (z - z.mean()) / z.std()
    p = 1.0 / (1.0 + np.exp(-z))
    y = np.where(rng.uniform(n) < p, 1.0, -1.0)
    return Dataset(np.hstack([X, np.ones((n, 1))]), y)
