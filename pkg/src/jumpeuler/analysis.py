"""Log-log regression of error against cost, predicted rates and (M, n) planning."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidParameter
from .model import ClassParams

Row = Tuple[int, int, float, float, float]  # (M, n, cost, error, std_error)


def _log_points(rows: Sequence[Sequence[float]]):
    if len(rows) < 2:
        raise InvalidParameter("rows", "need at least 2 rows")
    cost = np.array([float(r[2]) for r in rows])
    err = np.array([float(r[3]) for r in rows])
    if np.any(cost <= 0) or np.any(err <= 0) or not np.all(np.isfinite(cost * err)):
        raise InvalidParameter("rows", "costs and errors must be finite and > 0")
    x, y = np.log(cost), np.log(err)
    if np.all(x == x[0]):
        raise InvalidParameter("rows", "costs must not all coincide")
    return x, y


def fit_loglog_slope(rows: Sequence[Sequence[float]], weighted: bool = False) -> Tuple[float, float]:
    """Least-squares line through ``(ln cost, ln error)``; returns ``(slope, intercept)``.

    ``rows`` hold ``(M, n, cost, error, std_error)``. With ``weighted=True``
    each point gets weight ``(error / std_error)^2``, the inverse variance of
    ``ln error`` to first order.
    """
    x, y = _log_points(rows)
    if len(x) == 2 and not weighted:
        slope = (y[1] - y[0]) / (x[1] - x[0])
        return float(slope), float(y[0] - slope * x[0])
    if weighted:
        se = np.array([float(r[4]) for r in rows])
        if np.any(se <= 0):
            raise InvalidParameter("rows", "weighted fit needs positive std_error")
        w = (np.exp(y) / se) ** 2
    else:
        w = np.ones_like(x)
    xm = np.sum(w * x) / np.sum(w)
    ym = np.sum(w * y) / np.sum(w)
    slope = np.sum(w * (x - xm) * (y - ym)) / np.sum(w * (x - xm) ** 2)
    return float(slope), float(ym - slope * xm)


@dataclass(frozen=True)
class RatePrediction:
    gamma: float
    alpha: float
    slope: Optional[float]  # None unless gamma == 1/2

    @property
    def cost_exponent(self) -> float:
        """Exponent ``e`` in ``cost = Theta((1/eps)^e)``: ``1/gamma + 2/(2 alpha - 1)``."""
        if self.alpha <= 0.5:
            return math.inf
        return 1.0 / self.gamma + 2.0 / (2.0 * self.alpha - 1.0)


def predict_rate(class_params: ClassParams, alpha: float) -> RatePrediction:
    if not alpha >= 1:
        raise InvalidParameter("alpha", "must be >= 1")
    cp = class_params
    gamma = min(cp.rho1, cp.rho2, 1.0 / cp.p)
    slope = 1.0 / (4.0 * alpha) - 0.5 if gamma == 0.5 else None
    return RatePrediction(gamma, alpha, slope)


def delta_inverse(delta_fn: Callable[[int], float], x: float) -> int:
    """Smallest ``M >= 1`` with ``delta_fn(M) <= x``, for nonincreasing ``delta_fn``."""
    if not x > 0:
        raise InvalidParameter("x", "must be > 0")
    if delta_fn(1) <= x:
        return 1
    lo, hi = 1, 2
    while delta_fn(hi) > x:
        lo, hi = hi, 2 * hi
        if hi > 1 << 62:
            raise InvalidParameter("x", f"delta does not fall below {x}")
    # invariant: delta(lo) > x >= delta(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if delta_fn(mid) <= x:
            hi = mid
        else:
            lo = mid
    return hi


def optimal_params(epsilon: float, gamma: float, delta_fn: Callable[[int], float],
                   KC: float) -> Tuple[int, int]:
    """Minimal ``(M, n)`` with ``KC n^-gamma <= eps/2`` and ``KC delta(M) <= eps/2``."""
    for name, v in (("epsilon", epsilon), ("gamma", gamma), ("KC", KC)):
        if not (v > 0 and math.isfinite(v)):
            raise InvalidParameter(name, "must be finite and > 0")
    half = epsilon / 2.0

    def ok(n):
        return KC * float(n) ** -gamma <= half

    raw = (2.0 * KC / epsilon) ** (1.0 / gamma)
    if not raw < 2.0 ** 52:
        raise InvalidParameter("epsilon", f"needs n ~ {raw:.3g} steps, beyond exact integer range")
    n = max(1, math.ceil(raw))
    # the float power may land one off either way
    while n > 1 and ok(n - 1):
        n -= 1
    while not ok(n):
        n += 1
    M = delta_inverse(delta_fn, half / KC)
    return M, n


@dataclass
class ConvergenceTable:
    """Rows ``(M, n, cost, error, std_error)`` with the fitted and predicted slopes.

    ``slope``/``intercept`` are None when fewer than two distinct costs exist
    or some error is zero;
    ``predicted_slope`` is None when no prediction applies.
    """

    rows: List[Row] = field(default_factory=list)
    slope: Optional[float] = None
    intercept: Optional[float] = None
    predicted_slope: Optional[float] = None

    @classmethod
    def from_rows(cls, rows, predicted_slope=None, weighted=False) -> "ConvergenceTable":
        rows = [tuple(r) for r in rows]
        slope = intercept = None
        fittable = len({r[2] for r in rows}) >= 2 and all(r[2] > 0 and r[3] > 0 for r in rows)
        if fittable:
            slope, intercept = fit_loglog_slope(rows, weighted)
        return cls(rows, slope, intercept, predicted_slope)
