"""Gaussian variational-inference optimizers with a Gauss-Newton mean-field update."""

from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
