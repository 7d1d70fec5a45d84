"""Scalar expectile solver, the reduction target of diagonal scoring
matrices and of the p=2 case."""

from __future__ import annotations

import numpy as np

from .core import Level

__all__ = ["univariate_expectile"]

_H_TOL = 1e-10
_MAX_ITER = 200


def _empirical_h(values: np.ndarray, alpha: float, x: float) -> float:
    gain = np.mean(np.maximum(values - x, 0.0))
    loss = np.mean(np.maximum(x - values, 0.0))
    return alpha * gain - (1.0 - alpha) * loss


def _analytic_h(marginal, alpha: float, x: float) -> float:
    return alpha * float(marginal.stop_loss(x)) - (1.0 - alpha) * float(
        marginal.lower_stop_loss(x)
    )


def _bisect(h, lo: float, hi: float) -> float:
    # h is continuous and strictly decreasing, so the bracketed root is unique.
    # Refine until the bracket collapses to adjacent floats; |h'| <= 1 means
    # the residual then sits at machine level too.
    for _ in range(_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        val = h(mid)
        if val == 0.0:
            return mid
        if val > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, abs(lo), abs(hi)) and abs(val) <= _H_TOL:
            break
    return 0.5 * (lo + hi)


def univariate_expectile(data, level) -> float:
    """Expectile of a 1-d sample or of an analytic marginal.

    Root of h(x) = alpha E[(X-x)+] - (1-alpha) E[(x-X)+], located by
    bisection on a bracketing interval and refined to |h| <= 1e-10.

    Parameters
    ----------
    data : array_like or marginal
        Either a nonempty 1-d sample, or a marginal object exposing
        ``mean``, ``stop_loss`` and ``lower_stop_loss`` (the catalogue
        families qualify).
    level : Level or float
        Asymmetry level in (0, 1).
    """
    alpha = Level.of(level).alpha
    if hasattr(data, "stop_loss"):
        marginal = data
        h = lambda x: _analytic_h(marginal, alpha, x)
        lo = 0.0  # support infimum of the catalogue families; h(0) = alpha*mean > 0
        hi = max(marginal.mean(), 1.0)
        for _ in range(_MAX_ITER):
            if h(hi) < 0.0:
                break
            hi *= 2.0
        return _bisect(h, lo, hi)

    values = np.asarray(data, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("cannot take the expectile of an empty sample")
    if not np.all(np.isfinite(values)):
        raise ValueError("sample entries must all be finite")
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        return lo
    return _bisect(lambda x: _empirical_h(values, alpha, x), lo, hi)
