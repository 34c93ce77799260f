"""Closed-form density bounds and the region map between them.

Coordinates: ``(x, y)`` stands for ``(X_T, sup X_T)`` with ``y > max(x, 0)``;
``(x_plus, x_minus)`` for ``(sup X_T, sup X_T - X_T)``.  Every bound is a
shape times a constant ``C`` that defaults to 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import EmptyGrid, OutsideSupport, PreconditionViolated
from .stable_core import validate_params

REGIONS = ("00", "01", "10", "11")
# relative tolerance on log-values when deciding ties between regions
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class BoundQuery:
    alpha: float
    rho: float
    T: float = 1.0
    alpha_prime: Optional[float] = None
    orders: tuple[int, int] = (1, 1)
    C: float = 1.0

    def __post_init__(self):
        validate_params(self.alpha, self.rho, self.T)
        if self.alpha_prime is None:
            object.__setattr__(self, "alpha_prime", 0.9 * self.alpha)
        if not (0.0 <= self.alpha_prime < self.alpha):
            raise PreconditionViolated(
                f"alpha'={self.alpha_prime!r} must lie in [0, alpha={self.alpha!r})"
            )
        if min(self.orders) < 1:
            raise PreconditionViolated("orders must be >= 1")
        if not self.C > 0:
            raise PreconditionViolated("C must be positive")


def _support(x, y) -> None:
    if np.any(np.asarray(y) <= np.maximum(np.asarray(x), 0.0)):
        raise OutsideSupport("need y > max(x, 0)")


def _f_ij_raw(i, j, a1, alpha, rho, T, x, y):
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    t_exp = (a1 / alpha) * (i * (2 - rho) + j * (1 + rho) - 1)
    return (
        T**t_exp
        * (y - x) ** (a1 * (1 - rho) - i * a1 * (2 - rho))
        * y ** (a1 * rho - j * a1 * (1 + rho))
    )


def f_ij(i: int, j: int, q: BoundQuery, x, y, alpha_prime: Optional[float] = None):
    """The four interpolating shapes; ``alpha_prime`` overrides the query's."""
    if i not in (0, 1) or j not in (0, 1):
        raise ValueError("i, j must be 0 or 1")
    _support(x, y)
    a1 = q.alpha_prime if alpha_prime is None else alpha_prime
    out = _f_ij_raw(i, j, a1, q.alpha, q.rho, q.T, x, y)
    return out if np.ndim(out) else float(out)


def _all_f(q: BoundQuery, x, y, alpha_prime=None) -> np.ndarray:
    return np.stack([f_ij(int(r[0]), int(r[1]), q, x, y, alpha_prime) for r in REGIONS])


def joint_bound(q: BoundQuery, x, y):
    """``C y^-m (y-x)^(1-n-m) (2y-x)^(m-1) min_ij f_ij`` with ``(n, m) = orders``."""
    _support(x, y)
    n, m = q.orders
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    pref = y ** (-m) * (y - x) ** (1 - n - m) * (2 * y - x) ** (m - 1)
    out = q.C * pref * _all_f(q, x, y).min(axis=0)
    return out if np.ndim(out) else float(out)


def _two_sided_min(z, a1, alpha, T, pos):
    """``min{T^(a'/a) z^-a', T^(-(a'/a) pos) z^(a' pos)}``."""
    return np.minimum(T ** (a1 / alpha) * z ** (-a1), T ** (-(a1 / alpha) * pos) * z ** (a1 * pos))


def refl_bound(q: BoundQuery, x_plus, x_minus):
    """Bound on ``d+^n d-^m`` of the law of ``(X_+, X_-)`` with ``(n, m) = orders``."""
    xp, xm = np.asarray(x_plus, dtype=float), np.asarray(x_minus, dtype=float)
    if np.any(xp <= 0) or np.any(xm <= 0):
        raise OutsideSupport("x_plus and x_minus must be positive")
    n, m = q.orders
    a1, a, T = q.alpha_prime, q.alpha, q.T
    out = (
        q.C * xp ** (-n) * xm ** (-m)
        * _two_sided_min(xp, a1, a, T, q.rho)
        * _two_sided_min(xm, a1, a, T, 1 - q.rho)
    )
    return out if np.ndim(out) else float(out)


def classify_region(x, y, T: float, alpha: float, rho: float) -> str:
    """Index of the smallest ``f_ij`` at ``alpha' = alpha``; ties go to the lower index."""
    _support(x, y)
    logs = []
    for r in REGIONS:
        i, j = int(r[0]), int(r[1])
        t_exp = i * (2 - rho) + j * (1 + rho) - 1
        logs.append(
            t_exp * math.log(T)
            + alpha * ((1 - rho) - i * (2 - rho)) * math.log(y - x)
            + alpha * (rho - j * (1 + rho)) * math.log(y)
        )
    lo = min(logs)
    tol = TIE_RTOL * max(1.0, abs(lo))
    for r, v in zip(REGIONS, logs):
        if v <= lo + tol:
            return r
    raise AssertionError("unreachable")


def sup_density_bound(q: BoundQuery, y, n: int = 1):
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise OutsideSupport("y must be positive")
    out = q.C * y ** (-n) * _two_sided_min(y, q.alpha_prime, q.alpha, q.T, q.rho)
    return out if np.ndim(out) else float(out)


def passage_time_bound(q: BoundQuery, y0: float, n: int, T: float):
    """Bound on ``|d_T^n P(tau_{y0} <= T)|``."""
    if not (y0 > 0 and T > 0 and n >= 1):
        raise PreconditionViolated("need y0 > 0, T > 0, n >= 1")
    a1, a = q.alpha_prime, q.alpha
    return q.C * T ** (-1.0 / a - n) * min(T ** (a1 / a) * y0 ** (-a1), 1.0)


def joint_tail_bound(q: BoundQuery, x0: float, y0: float, T: float, t_exponent: Optional[float] = None):
    """Bound on ``P(X_T <= x0, tau_{y0} < T)`` for ``x0 <= 0``, ``y0 >= T^(1/alpha)``.

    The power of ``T`` defaults to ``2 alpha'/alpha``.
    """
    a1, a = q.alpha_prime, q.alpha
    if not (x0 <= 0 and T > 0 and y0 >= T ** (1.0 / a)):
        raise PreconditionViolated("need x0 <= 0 and y0 >= T^(1/alpha)")
    e = 2 * a1 / a if t_exponent is None else t_exponent
    tail = math.inf if x0 == 0 else (-x0) ** (-a1)
    return q.C * T**e * y0 ** (-a1) * min(y0 ** (-a1), tail)


@dataclass(frozen=True)
class FitReport:
    C_fit: float
    argmax: Optional[tuple[float, float]]
    ratios: tuple = field(repr=False)


def fit_constant(estimates: Sequence, q: BoundQuery) -> FitReport:
    """``sup (|value| - 2 stderr)^+ / shape`` over a grid of estimates.

    The shape is :func:`refl_bound` with ``C = 1`` at each estimate's point
    and orders.
    """
    if not estimates:
        raise EmptyGrid("no estimates to fit")
    ratios = []
    for e in estimates:
        qq = BoundQuery(q.alpha, q.rho, q.T, q.alpha_prime, tuple(e.orders), 1.0)
        shape = refl_bound(qq, e.point[0], e.point[1])
        ratios.append(max(abs(e.value) - 2 * e.stderr, 0.0) / shape)
    k = int(np.argmax(ratios))
    best = ratios[k]
    return FitReport(
        C_fit=float(best),
        argmax=tuple(estimates[k].point) if best > 0 else None,
        ratios=tuple(ratios),
    )


BOUNDS_COLUMNS = (
    "x", "y", "x_plus", "x_minus", "k_plus", "k_minus", "alpha_prime", "C",
    "f00", "f01", "f10", "f11", "region", "joint_bound", "refl_bound",
)


def bounds_rows(q: BoundQuery, xy_points: Iterable[tuple[float, float]]) -> list[list[str]]:
    """Rows for the bounds grid, one per ``(x, y)`` point in the support."""
    from .density import fmt17

    rows = []
    for x, y in xy_points:
        fs = [f_ij(int(r[0]), int(r[1]), q, x, y) for r in REGIONS]
        rows.append(
            [fmt17(x), fmt17(y), fmt17(y), fmt17(y - x), str(q.orders[0]), str(q.orders[1]),
             fmt17(q.alpha_prime), fmt17(q.C)]
            + [fmt17(f) for f in fs]
            + [classify_region(x, y, q.T, q.alpha, q.rho), fmt17(joint_bound(q, x, y)),
               fmt17(refl_bound(q, y, y - x))]
        )
    return rows
