"""Shared test oracles: central finite differences and gradient comparison."""

from __future__ import annotations

from typing import Callable

import numpy as np

FD_STEP = 1e-5

# Relative error with a denominator floor: entries whose analytic and
# numeric gradients are both below the floor are compared absolutely
# against floor * tolerance, which keeps near-zero gradients from
# dividing noise by noise.
REL_FLOOR = 1e-2


def finite_diff_grads(f: Callable[[dict[str, np.ndarray]], float],
                      params: dict[str, np.ndarray],
                      h: float = FD_STEP) -> dict[str, np.ndarray]:
    """Central-difference gradient of scalar f, entry by entry.

    f must treat params as read-only; it is re-evaluated 2x per entry.
    """
    grads = {}
    for name, p in params.items():
        g = np.zeros_like(p)
        flat_p = p.reshape(-1)
        flat_g = g.reshape(-1)
        for j in range(flat_p.size):
            orig = flat_p[j]
            flat_p[j] = orig + h
            fp = f(params)
            flat_p[j] = orig - h
            fm = f(params)
            flat_p[j] = orig
            flat_g[j] = (fp - fm) / (2.0 * h)
        grads[name] = g
    return grads


def max_rel_error(analytic: np.ndarray, numeric: np.ndarray,
                  floor: float = REL_FLOOR) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def compare_grads(analytic: dict[str, np.ndarray],
                  numeric: dict[str, np.ndarray],
                  tol: float = 1e-6) -> float:
    """Max relative error over all shared parameters; asserts within tol."""
    worst = 0.0
    for name in numeric:
        err = max_rel_error(analytic[name], numeric[name])
        assert err < tol, f"gradient mismatch for {name}: rel err {err:.3e}"
        worst = max(worst, err)
    return worst
