"""Multilevel telescoping estimator for the joint law of (X_+, X_-).

With ``G(x+, x-) = P(X_+ > x+, X_- > x-)`` an estimate of *orders*
``(k+, k-)`` targets ``d+^{k+} d-^{k-} G``; orders ``(1, 1)`` give the joint
density.  Two kernels are available:

``indicator``
    ``f = 1{X_+ > x+, X_- > x-}`` with weights of orders ``(k+, k-)``.
``ramp``
    ``f = [X_+ - x+]^+ [X_- - x-]^+`` with weights of orders ``(k+ + 1, k- + 1)``.

Both carry the sign ``(-1)^{k+ + k-}``.  For ``m > n`` the weight times
``X_{+,n}^{k+} X_{-,n}^{k-}`` does not depend on ``n``, so one polynomial
value per level serves both terms of each telescoping difference.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy.special import comb

from .chi_approx import NoiseRecord, check_kappa, chi_levels, default_kappa
from .errors import LevelOrder, MissingOrder, OutsideSupport
from .ibp_algebra import evaluate, generator_values, iterate_H, mode_for, polynomial_part
from .stable_core import StableParams
from .streams import block_rng, fresh_seed, map_blocks

KERNELS = ("indicator", "ramp")
DEFAULT_N0 = 4
DEFAULT_J = 12
BOOTSTRAP_MIN_N = 10_000
BOOTSTRAP_RESAMPLES = 500
# bootstrap resamples means of consecutive batches of this many samples
BOOTSTRAP_BATCH = 64
_BOOTSTRAP_TAG = 7


def primitive_hat_F(point: tuple[float, float]) -> Callable:
    """The ramp product ``(x, y) -> [x - x+]^+ [y - x-]^+``."""
    xp, xm = map(float, point)
    if not (xp > 0 and xm > 0):
        raise OutsideSupport("the ramp corner must lie in the open quadrant")

    def F(x, y):
        return np.maximum(np.asarray(x) - xp, 0.0) * np.maximum(np.asarray(y) - xm, 0.0)

    return F


def weight_orders(orders: tuple[int, int], kernel: str) -> tuple[int, int]:
    if kernel not in KERNELS:
        raise ValueError(f"kernel must be one of {KERNELS}, got {kernel!r}")
    kp, km = orders
    return (kp, km) if kernel == "indicator" else (kp + 1, km + 1)


def _kernel_values(kernel: str, xp, xm, points: np.ndarray) -> np.ndarray:
    """Kernel at every (point, path); shape ``(n_points, batch)``."""
    cp = points[:, 0:1]
    cm = points[:, 1:2]
    if kernel == "indicator":
        return ((xp > cp) & (xm > cm)).astype(float)
    return np.maximum(xp - cp, 0.0) * np.maximum(xm - cm, 0.0)


@dataclass(frozen=True)
class SeriesTerm:
    level: int
    theta_next: float
    theta_prev: float
    tilde: float


def _level_polys(noise: NoiseRecord, wk: tuple[int, int], levels: Iterable[int]) -> dict:
    P, ks = polynomial_part(iterate_H(*wk, mode=mode_for(noise.params)))
    depth = max(ks)
    return {
        m: evaluate(P, generator_values(noise, m, depth), noise.params.alpha)
        * np.ones(noise.batch)
        for m in levels
    }


def series_values(
    noise: NoiseRecord,
    points,
    orders: tuple[int, int],
    n0: int,
    J: int,
    kappa: float,
    kernel: str = "indicator",
) -> np.ndarray:
    """Truncated series for each point and path, shape ``(n_points, batch)``.

    ``Theta_{n0,n0} + sum_{i=n0}^{n0+J-1} (Theta_{i+1,i+1} - Theta_{i,i+1})``,
    all levels evaluated on the same noise.
    """
    if n0 < 1:
        raise LevelOrder("base level n0 must be >= 1")
    if J < 0:
        raise ValueError("J must be >= 0")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    wk = weight_orders(orders, kernel)
    sign = (-1.0) ** (orders[0] + orders[1])
    top = n0 + J
    xp_all, xm_all = chi_levels(noise, top, kappa)
    polys = _level_polys(noise, wk, range(n0, top + 1))

    def scaled(i):
        xp, xm = xp_all[i], xm_all[i]
        return _kernel_values(kernel, xp, xm, pts) / (xp ** wk[0] * xm ** wk[1])

    prev = scaled(n0)
    total = prev * polys[n0]
    for i in range(n0, top):
        nxt = scaled(i + 1)
        total = total + (nxt - prev) * polys[i + 1]
        prev = nxt
    return sign * total


def series_terms(
    noise: NoiseRecord,
    point,
    orders: tuple[int, int],
    n0: int,
    J: int,
    kappa: float,
    kernel: str = "indicator",
    path: int = 0,
) -> list[SeriesTerm]:
    """Per-level ledger of the telescoping differences for one path."""
    pts = np.atleast_2d(np.asarray(point, dtype=float))
    wk = weight_orders(orders, kernel)
    sign = (-1.0) ** (orders[0] + orders[1])
    xp_all, xm_all = chi_levels(noise, n0 + J, kappa)
    polys = _level_polys(noise, wk, range(n0, n0 + J + 1))
    out = []
    for i in range(n0, n0 + J):
        def theta(n, m):
            xp, xm = xp_all[n][path : path + 1], xm_all[n][path : path + 1]
            f = _kernel_values(kernel, xp, xm, pts)[0, 0]
            return float(sign * f * polys[m][path] / (xp[0] ** wk[0] * xm[0] ** wk[1]))

        nxt, prv = theta(i + 1, i + 1), theta(i, i + 1)
        out.append(SeriesTerm(level=i, theta_next=nxt, theta_prev=prv, tilde=nxt - prv))
    return out


def sample_series(
    point,
    orders: tuple[int, int],
    n0: int,
    J: int,
    p: StableParams,
    kappa: float,
    rng: np.random.Generator,
    kernel: str = "indicator",
) -> float:
    """One realisation of the truncated series on a fresh noise record."""
    check_kappa(kappa, p)
    noise = NoiseRecord.draw(p, n0 + J, rng, 1)
    return float(series_values(noise, point, orders, n0, J, kappa, kernel)[0, 0])


@dataclass(frozen=True)
class DensityEstimate:
    point: tuple[float, float]
    orders: tuple[int, int]
    value: float
    stderr: float
    samples: int
    n0: int
    J: int
    params: StableParams
    kappa: float
    kernel: str = "indicator"
    seed: Optional[int] = None
    ci99: Optional[tuple[float, float]] = field(default=None)

    @property
    def z(self) -> float:
        return self.value / self.stderr if self.stderr > 0 else math.inf


def _density_block(rng, size, p, kappa, points, orders, n0, J, kernel):
    noise = NoiseRecord.draw(p, n0 + J, rng, size)
    vals = series_values(noise, points, orders, n0, J, kappa, kernel)
    nb = size // BOOTSTRAP_BATCH
    batch_sums = vals[:, : nb * BOOTSTRAP_BATCH].reshape(len(points), nb, BOOTSTRAP_BATCH).sum(axis=2)
    return vals.sum(axis=1), (vals**2).sum(axis=1), batch_sums


def estimate_density(
    points,
    orders: tuple[int, int] = (1, 1),
    n0: int = DEFAULT_N0,
    J: int = DEFAULT_J,
    N: int = 100_000,
    p: Optional[StableParams] = None,
    kappa: Optional[float] = None,
    workers: int = 1,
    seed: Optional[int] = None,
    kernel: str = "indicator",
    bootstrap: bool = True,
) -> list[DensityEstimate]:
    """Mean and standard error of the series at each point.

    All points share the same noise.  Sample block ``b`` comes from the
    sub-stream ``(seed, b)``, so values do not depend on ``workers``.  When
    ``N >= 10**4`` a 99% bootstrap interval is attached; it resamples means
    of consecutive 64-sample batches.
    """
    if p is None:
        raise ValueError("params are required")
    if N < 2:
        raise ValueError("N must be >= 2")
    if min(orders) < 1:
        raise ValueError("orders must be >= (1, 1)")
    kappa = default_kappa(p) if kappa is None else check_kappa(kappa, p)
    seed = fresh_seed() if seed is None else int(seed)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if np.any(pts <= 0):
        raise OutsideSupport("points must lie in the open quadrant")
    blocks = map_blocks(
        _density_block, N, seed, workers,
        args=(p, kappa, pts, tuple(orders), n0, J, kernel),
    )
    s1 = sum(b[0] for b in blocks)
    s2 = sum(b[1] for b in blocks)
    mean = s1 / N
    var = np.maximum(s2 / N - mean**2, 0.0) * N / (N - 1)
    se = np.sqrt(var / N)
    cis = [None] * len(pts)
    if bootstrap and N >= BOOTSTRAP_MIN_N:
        batch_means = np.concatenate([b[2] for b in blocks], axis=1) / BOOTSTRAP_BATCH
        cis = _bootstrap_ci(batch_means, seed)
    return [
        DensityEstimate(
            point=(float(x), float(y)), orders=tuple(orders), value=float(m), stderr=float(s),
            samples=N, n0=n0, J=J, params=p, kappa=kappa, kernel=kernel, seed=seed, ci99=ci,
        )
        for (x, y), m, s, ci in zip(pts, mean, se, cis)
    ]


def _bootstrap_ci(batch_means: np.ndarray, seed: int) -> list[tuple[float, float]]:
    nb = batch_means.shape[1]
    if nb < 2:
        return [None] * batch_means.shape[0]
    rng = block_rng(seed, 0, tag=_BOOTSTRAP_TAG)
    idx = rng.integers(0, nb, size=(BOOTSTRAP_RESAMPLES, nb))
    out = []
    for row in batch_means:
        boots = row[idx].mean(axis=1)
        lo, hi = np.quantile(boots, [0.005, 0.995])
        out.append((float(lo), float(hi)))
    return out


@dataclass(frozen=True)
class ProbabilityEstimate:
    point: tuple[float, float]
    value: float
    stderr: float
    samples: int


def estimate_survival(
    point, N: int, p: StableParams, kappa: float, n_truncation: int, rng: np.random.Generator
) -> ProbabilityEstimate:
    """Plain Monte Carlo of ``P(X_{+,n} > x+, X_{-,n} > x-)``."""
    if n_truncation < 1:
        raise LevelOrder("n_truncation must be >= 1")
    check_kappa(kappa, p)
    noise = NoiseRecord.draw(p, n_truncation, rng, N)
    xp, xm = chi_levels(noise, n_truncation, kappa)
    hit = (xp[-1] > point[0]) & (xm[-1] > point[1])
    v = float(hit.mean())
    return ProbabilityEstimate(
        point=(float(point[0]), float(point[1])),
        value=v, stderr=math.sqrt(v * (1 - v) / N), samples=N,
    )


def to_xy_derivatives(estimates, n: int, m: int, x: float, y: float) -> float:
    """``d_x^n d_y^m`` of the (X_T, sup) law from derivatives of ``G``.

    ``estimates`` maps orders ``(a, b)`` to ``d+^a d-^b G`` at ``(y, y - x)``,
    either as numbers or as callables of ``(x+, x-)``.
    """
    if not y > max(x, 0.0):
        raise OutsideSupport(f"need y > max(x, 0), got x={x}, y={y}")
    total = 0.0
    for i in range(m):
        key = (m - i, n + i)
        if key not in estimates:
            raise MissingOrder(key)
        v = estimates[key]
        v = v(y, y - x) if callable(v) else v
        total += comb(m - 1, i, exact=True) * v
    return (-1.0) ** (n - 1) * total


def xy_orders(n: int, m: int) -> list[tuple[int, int]]:
    return [(m - i, n + i) for i in range(m)]


# --- decay of the telescoping differences --------------------------------


def theta_prime_exponent(p_moment: float, orders: tuple[int, int], alpha_prime: float) -> float:
    s = min(p_moment, alpha_prime)
    return (
        max(p_moment * (orders[0] + orders[1]), 1.0)
        + max(alpha_prime - 1.0, 0.0)
        + max(alpha_prime - s - 1.0, 0.0)
    )


def decay_ceiling(alpha: float, kappa: float, p_moment: float, alpha_prime: float) -> float:
    s = min(p_moment, alpha_prime)
    return max(1.0 / (1.0 + s / alpha), kappa**s)


@dataclass(frozen=True)
class RateReport:
    levels: tuple
    means: tuple
    stderrs: tuple
    used: tuple
    fitted_rate: float
    ceiling: float
    exponent: float

    @property
    def passed(self) -> bool:
        return self.fitted_rate <= self.ceiling + 0.05


def fit_geometric_rate(levels, means, stderrs, exponent: float = 0.0, max_rel: float = 0.2):
    """OLS slope of ``log(mean / n**exponent)`` on ``n``; returns ``(rate, used_mask)``.

    Levels whose relative standard error exceeds ``max_rel`` are dropped.
    """
    n = np.asarray(levels, dtype=float)
    mu = np.asarray(means, dtype=float)
    se = np.asarray(stderrs, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        used = (mu > 0) & (se / mu <= max_rel)
    if used.sum() < 2:
        return math.nan, used
    y = np.log(mu[used]) - exponent * np.log(n[used])
    slope = np.polyfit(n[used], y, 1)[0]
    return float(math.exp(slope)), used


def _tilde_block(rng, size, p, kappa, point, wk, levels):
    noise = NoiseRecord.draw(p, max(levels) + 1, rng, size)
    xp_all, xm_all = chi_levels(noise, max(levels) + 1, kappa)
    polys = _level_polys(noise, wk, [n + 1 for n in levels])
    pts = np.atleast_2d(point)
    s1, s2 = [], []
    for n in levels:
        def r(i):
            return _kernel_values("ramp", xp_all[i], xm_all[i], pts)[0] / (
                xp_all[i] ** wk[0] * xm_all[i] ** wk[1]
            )

        t = np.abs((r(n + 1) - r(n)) * polys[n + 1])
        s1.append(t.sum())
        s2.append((t**2).sum())
    return np.array(s1), np.array(s2)


def decay_rate_check(
    orders: tuple[int, int],
    p: StableParams,
    kappa: float,
    n_range: Sequence[int],
    N: int,
    seed: int,
    alpha_prime: float,
    p_moment: float = 1.0,
    point=(1.0, 1.0),
    workers: int = 1,
) -> RateReport:
    """Fit the geometric decay of ``E|Theta~_n|`` for the ramp kernel.

    ``orders`` are the weight orders of ``Theta``.  The mean at each level is
    divided by ``n**p'`` before the log-linear fit.
    """
    levels = tuple(int(n) for n in n_range)
    if len(levels) < 6:
        raise ValueError("n_range must span at least 6 levels")
    check_kappa(kappa, p)
    blocks = map_blocks(
        _tilde_block, N, seed, workers,
        args=(p, kappa, np.asarray(point, dtype=float), tuple(orders), levels),
    )
    s1 = sum(b[0] for b in blocks)
    s2 = sum(b[1] for b in blocks)
    mean = s1 / N
    se = np.sqrt(np.maximum(s2 / N - mean**2, 0.0) / (N - 1))
    exponent = theta_prime_exponent(p_moment, orders, alpha_prime)
    rate, used = fit_geometric_rate(levels, mean, se, exponent)
    return RateReport(
        levels=levels, means=tuple(map(float, mean)), stderrs=tuple(map(float, se)),
        used=tuple(map(bool, used)), fitted_rate=rate,
        ceiling=decay_ceiling(p.alpha, kappa, p_moment, alpha_prime), exponent=exponent,
    )


# --- output ----------------------------------------------------------------

CSV_COLUMNS = ("x_plus", "x_minus", "k_plus", "k_minus", "value", "stderr", "n0", "J", "N", "seed")


def fmt17(x: float) -> str:
    return f"{x:.17g}"


def density_rows(estimates: Iterable[DensityEstimate]) -> list[list[str]]:
    rows = []
    for e in estimates:
        rows.append([
            fmt17(e.point[0]), fmt17(e.point[1]), str(e.orders[0]), str(e.orders[1]),
            fmt17(e.value), fmt17(e.stderr), str(e.n0), str(e.J), str(e.samples), str(e.seed),
        ])
    return rows


def write_density_csv(path_or_file, estimates: Iterable[DensityEstimate], extra: Optional[Mapping] = None):
    """Write the grid CSV; ``extra`` maps column names to per-row string lists."""
    rows = density_rows(estimates)
    header = list(CSV_COLUMNS)
    if extra:
        header += list(extra)
        for j, row in enumerate(rows):
            row.extend(extra[k][j] for k in extra)
    _write_csv(path_or_file, header, rows)


def _write_csv(path_or_file, header, rows):
    if hasattr(path_or_file, "write"):
        w = csv.writer(path_or_file, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return
    with open(path_or_file, "w", newline="") as fh:
        _write_csv(fh, header, rows)


def grid_integral(points: np.ndarray, values: np.ndarray, cell_area: float) -> float:
    """Midpoint-rule integral of gridded values."""
    return float(np.sum(values) * cell_area)
