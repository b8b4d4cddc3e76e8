"""Finite-difference gradient verification utilities."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


def numerical_grad(f, t: Tensor, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar-valued f with respect to t."""
    flat = t.data.reshape(-1)
    out = np.zeros_like(flat)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + h
        fp = f()
        flat[i] = keep - h
        fm = f()
        flat[i] = keep
        out[i] = (fp - fm) / (2.0 * h)
    return out.reshape(t.data.shape)


def max_rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Worst-case elementwise error, relative to the gradient magnitude."""
    num = np.abs(analytic - numeric).max()
    den = max(np.abs(analytic).max(), np.abs(numeric).max(), 1e-8)
    return float(num / den)


def check_scalar_fn(build, wrt: list[Tensor], h: float = 1e-5) -> float:
    """Compare analytic and numeric gradients of a scalar graph.

    ``build()`` must construct and return the scalar loss Tensor from the
    current values of the tensors in ``wrt`` (all float64, requires_grad).
    Returns the worst relative error across all checked tensors.
    """
    for t in wrt:
        t.zero_grad()
    loss = build()
    loss.backward()
    worst = 0.0
    for t in wrt:
        analytic = t.grad.copy() if t.grad is not None else np.zeros_like(t.data)
        numeric = numerical_grad(lambda: float(build().data), t, h)
        worst = max(worst, max_rel_error(analytic, numeric))
    return worst
