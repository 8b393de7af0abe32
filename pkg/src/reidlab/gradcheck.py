"""Central finite-difference gradient checker."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import ConfigError, NonFiniteFunctionError

REL_ERROR_FLOOR = 1e-12


def gradient_check(
    f: Callable[[np.ndarray], float],
    analytic: np.ndarray | Callable[[np.ndarray], np.ndarray],
    point: np.ndarray,
    eps: float = 1e-5,
) -> float:
    """Compare an analytic gradient against central differences of f.

    Probes every coordinate of `point` with step `eps` and returns the worst
    per-coordinate relative error, with the denominator floored at 1e-12 so
    an exactly-zero pair scores zero error.
    """
    if not (1e-8 <= eps <= 1e-3):
        raise ConfigError(f"gradcheck.eps: {eps} outside [1e-8, 1e-3]")
    # Contiguous copy so the in-place coordinate probes below are views.
    point = np.ascontiguousarray(point, dtype=np.float64).copy()
    grad = analytic(point) if callable(analytic) else np.asarray(analytic)
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != point.shape:
        raise ConfigError(
            f"analytic gradient shape {grad.shape} != point shape {point.shape}"
        )

    worst = 0.0
    flat = point.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        saved = flat[i]
        flat[i] = saved + eps
        f_plus = float(f(point))
        flat[i] = saved - eps
        f_minus = float(f(point))
        flat[i] = saved
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NonFiniteFunctionError(
                f"objective returned non-finite value near coordinate {i}"
            )
        numeric = (f_plus - f_minus) / (2.0 * eps)
        denom = max(abs(gflat[i]), abs(numeric), REL_ERROR_FLOOR)
        worst = max(worst, abs(gflat[i] - numeric) / denom)
    return worst
