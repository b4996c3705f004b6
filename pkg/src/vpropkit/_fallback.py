"""Pure-numpy implementations of the hot kernels.

Signatures and return conventions match ``vpropkit._kernels`` exactly; the
selector in :mod:`vpropkit.kernels` picks one of the two at import.
"""

import numpy as np

ACT_TANH = 0
ACT_IDENTITY = 1


def log1pexp(x):
    """Overflow-safe ``log(1 + exp(x))``."""
    return np.logaddexp(0.0, x)


def sigmoid(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    z = np.exp(-x[pos])
    out[pos] = 1.0 / (1.0 + z)
    z = np.exp(x[~pos])
    out[~pos] = z / (1.0 + z)
    return out


def gh_logsig_moments(m, v, y, nodes, weights):
    """Gauss-Hermite moments of ``log sigmoid(y * a)`` for ``a ~ N(m, v)``.

    ``weights`` are raw Hermite weights (they sum to sqrt(pi)).  Returns three
    length-N arrays:

    * ``E[log sigmoid(y a)]``
    * its derivative w.r.t. ``m``:  ``E[y sigmoid(-y a)]``
    * its derivative w.r.t. ``v``:  ``-1/2 E[sigmoid(a) (1 - sigmoid(a))]``
    """
    m = np.asarray(m, dtype=float)
    v = np.asarray(v, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(weights, dtype=float) / np.sqrt(np.pi)
    a = m[:, None] + np.sqrt(2.0 * v)[:, None] * np.asarray(nodes, dtype=float)[None, :]
    z = y[:, None] * a
    p = sigmoid(-z)
    value = -log1pexp(-z) @ w
    dm = (y[:, None] * p) @ w
    dv = -0.5 * ((p * (1.0 - p)) @ w)
    return value, dm, dv


def _forward(theta, X, sizes, act):
    acts = [X]
    off = 0
    h = X
    nlayers = len(sizes) - 1
    for layer in range(nlayers):
        n_in, n_out = sizes[layer], sizes[layer + 1]
        W = theta[off : off + n_out * n_in].reshape(n_out, n_in)
        off += n_out * n_in
        b = theta[off : off + n_out]
        off += n_out
        z = h @ W.T + b
        if layer < nlayers - 1 and act == ACT_TANH:
            z = np.tanh(z)
        h = z
        acts.append(h)
    return acts


def mlp_logits(theta, X, sizes, act):
    theta = np.asarray(theta, dtype=float)
    return _forward(theta, np.asarray(X, dtype=float), list(sizes), act)[-1][:, 0]


def mlp_logits_many(thetas, X, sizes, act):
    """Logits for every row of ``thetas`` at once, shape ``(k, N)``."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    h = np.broadcast_to(np.asarray(X, dtype=float), (thetas.shape[0],) + np.shape(X))
    off = 0
    nlayers = len(sizes) - 1
    for layer in range(nlayers):
        n_in, n_out = sizes[layer], sizes[layer + 1]
        W = thetas[:, off : off + n_out * n_in].reshape(-1, n_out, n_in)
        off += n_out * n_in
        b = thetas[:, off : off + n_out]
        off += n_out
        h = np.matmul(h, W.transpose(0, 2, 1)) + b[:, None, :]
        if layer < nlayers - 1 and act == ACT_TANH:
            h = np.tanh(h)
    return h[:, :, 0]


def mlp_value_grad(theta, X, y, sizes, act):
    """Summed logistic NLL of a fully-connected net and its gradient.

    Hidden layers use ``act``; the single output unit is a linear logit.
    Parameters are layer-major, each layer's row-major ``(out, in)`` weight
    matrix followed by its bias.
    """
    theta = np.asarray(theta, dtype=float)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    sizes = list(sizes)
    acts = _forward(theta, X, sizes, act)
    logit = acts[-1][:, 0]
    z = y * logit
    value = float(np.sum(log1pexp(-z)))
    delta = (-y * sigmoid(-z))[:, None]
    grad = np.empty_like(theta)
    nlayers = len(sizes) - 1
    offsets = []
    off = 0
    for layer in range(nlayers):
        offsets.append(off)
        off += sizes[layer + 1] * sizes[layer] + sizes[layer + 1]
    for layer in reversed(range(nlayers)):
        n_in, n_out = sizes[layer], sizes[layer + 1]
        off = offsets[layer]
        W = theta[off : off + n_out * n_in].reshape(n_out, n_in)
        prev = acts[layer]
        grad[off : off + n_out * n_in] = (delta.T @ prev).ravel()
        grad[off + n_out * n_in : off + n_out * n_in + n_out] = delta.sum(axis=0)
        if layer > 0:
            delta = delta @ W
            if act == ACT_TANH:
                delta = delta * (1.0 - prev * prev)
    return value, grad
