"""Backend selection for the per-point passes.

The compiled extension is used when it imports; setting
``PARTITION_LAB_PURE=1`` forces the numpy fallback.
"""
import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("PARTITION_LAB_PURE"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        _impl = _compiled
        BACKEND = "cython"


def get_backend(name: str | None = None):
    """Return the kernel module for ``name`` ("cython", "python") or the active one."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")


def _prep(x, mu, sigma, log_alpha):
    return (
        np.ascontiguousarray(x, dtype=float),
        np.ascontiguousarray(mu, dtype=float),
        np.ascontiguousarray(sigma, dtype=float),
        np.ascontiguousarray(log_alpha, dtype=float),
    )


def wta_pass(x, mu, sigma, log_alpha, backend=None):
    """Hard assignment to ``argmax_b log_alpha_b + ln P_b(x)`` (ties to lower index).

    Returns ``(labels, counts, s1, s2, logloss_bits)`` where ``s1``/``s2`` are
    the first/second moment sums of ``x - mu_b`` over each cluster and
    ``logloss_bits`` is ``sum -log2 P_F(x)`` without the weight term.
    """
    return get_backend(backend).wta_pass(*_prep(x, mu, sigma, log_alpha))


def soft_pass(x, mu, sigma, log_alpha, backend=None):
    """Responsibility sums ``(rsum, s1, s2, mixture_logloss_bits)``."""
    return get_backend(backend).soft_pass(*_prep(x, mu, sigma, log_alpha))


def posterior_pass(x, mu, sigma, log_alpha, need_grad=True, backend=None):
    """Posterior loss sum in bits, responsibility sums, and gradient sums.

    Gradients are with respect to ``mu_b`` and ``log sigma_b``.
    """
    return get_backend(backend).posterior_pass(
        *_prep(x, mu, sigma, log_alpha), bool(need_grad)
    )
