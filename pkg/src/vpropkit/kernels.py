"""Backend selection for the hot kernels.

The compiled ``_kernels`` extension is used when it imports; otherwise the
numpy fallback is used.  Setting ``VPROPKIT_PURE_PYTHON=1`` forces the
fallback.  ``BACKEND`` records which one is active.
"""

import os

from . import _fallback

ACT_TANH = _fallback.ACT_TANH
ACT_IDENTITY = _fallback.ACT_IDENTITY

_compiled = None
if os.environ.get("VPROPKIT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None

_impl = _compiled if _compiled is not None else _fallback
BACKEND = "compiled" if _compiled is not None else "python"

gh_logsig_moments = _impl.gh_logsig_moments
mlp_value_grad = _impl.mlp_value_grad
mlp_logits = _impl.mlp_logits


def backends():
    """Mapping of available backend name -> module, compiled first."""
    out = {}
    if _compiled is not None:
        out["compiled"] = _compiled
    out["python"] = _fallback
    return out
