"""Numerical oracles for the Laplace-transform bounds, tail integrals and
moment-decay rates used by the weight estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.special import betaln

from .chi_approx import NoiseRecord, check_kappa, chi_levels
from .density import fit_geometric_rate
from .errors import CauchyMode, DivergentIntegral, DomainError, QuadratureFailure
from .stable_core import StableParams, cms_g
from .streams import map_blocks

QUAD_TOL = 1e-10


def d_const(s: float) -> float:
    """``2^s max{1, s^s e^-s, Gamma(s+1)}`` with ``0^0 = 1``."""
    ss = 1.0 if s == 0 else s**s * math.exp(-s)
    return 2.0**s * max(1.0, ss, math.gamma(s + 1.0))


@dataclass(frozen=True)
class AuxiliaryConstants:
    alpha: float
    rho: float
    zeta: float
    c: float
    delta: float
    gamma: float
    b_rho: float
    b_one_minus_rho: float

    def d(self, s: float) -> float:
        return d_const(s)

    def d_prime(self, u: float) -> float:
        a = self.alpha
        return max(math.gamma(1 + u), math.gamma(1 + u) * math.gamma(1 / a), math.gamma(u + 1 / a))


# name used by callers that follow the original interface
AppendixConstants = AuxiliaryConstants


def _quad(f, a, b, **kw):
    val, err = integrate.quad(f, a, b, epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=500, **kw)
    if not math.isfinite(val) or err > 1e3 * max(QUAD_TOL, QUAD_TOL * abs(val)):
        raise QuadratureFailure(f"quadrature error estimate {err:.3g} too large")
    return val


def constants(p: StableParams) -> AuxiliaryConstants:
    if p.cauchy:
        raise CauchyMode("constants are defined for alpha != 1")
    a, r, z = p.alpha, p.rho, p.zeta
    if a > 1:
        integral = _quad(lambda y: math.exp(-(y**z)), 0.0, math.inf)
        c, delta, gam = max(1.0, integral), 1.0 / z, 1.0
    else:
        c = (2 + 1 / abs(z)) * max(1.0, (2 * math.exp(-1) / a) ** (1 / a))
        delta = 1.0
        base = min(math.cos(math.pi * (0.5 - r)), math.cos(math.pi * (0.5 - a * r)))
        gam = base ** (1 / a - 1)
    return AuxiliaryConstants(
        alpha=a, rho=r, zeta=z, c=c, delta=delta, gamma=gam,
        b_rho=1 / (gam * a * r), b_one_minus_rho=1 / (gam * a * (1 - r)),
    )


@dataclass(frozen=True)
class InequalityReport:
    name: str
    points: tuple
    lhs: tuple
    rhs: tuple
    max_ratio: float
    passed: bool
    extra: dict = field(default_factory=dict)


def _report(name, xs, lhs, rhs, slack=1e-12):
    ratios = [l / r if r > 0 else (0.0 if l == 0 else math.inf) for l, r in zip(lhs, rhs)]
    passed = all(l <= r * (1 + slack) + slack for l, r in zip(lhs, rhs))
    return InequalityReport(
        name=name, points=tuple(xs), lhs=tuple(lhs), rhs=tuple(rhs),
        max_ratio=max(ratios) if ratios else 0.0, passed=passed,
    )


def exp_moment(p: StableParams, s: float, x: float) -> float:
    """``E[Y^s exp(-x Y^zeta)]`` for a unit exponential ``Y``."""
    z = p.zeta

    def f(y):
        if y == 0.0:
            return 0.0 if (s > 0 or (z < 0 and x > 0)) else 1.0
        return y**s * math.exp(-x * y**z - y)

    # the factor exp(-x y^zeta) switches on or off around y = x^(-1/zeta)
    brk = {1.0, 60.0 + 2 * s}
    if x > 0:
        ystar = x ** (-1.0 / z)
        brk.update(ystar * 10.0**k for k in range(-4, 5))
    pieces = sorted(b for b in brk if 0.0 < b <= 60.0 + 2 * s)
    pieces = [0.0] + pieces
    total = sum(_quad(f, a, b) for a, b in zip(pieces[:-1], pieces[1:]))
    return total + _quad(f, pieces[-1], math.inf)


def check_exp_moment_bound(p: StableParams, s: float, x_grid: Sequence[float]) -> InequalityReport:
    k = constants(p)
    lhs = [exp_moment(p, s, x) for x in x_grid]
    rhs = [k.c * d_const(s) * (1.0 if x == 0 else min(1.0, x ** (-k.delta))) for x in x_grid]
    return _report("exp_moment", x_grid, lhs, rhs)


def G_laplace(p: StableParams, x: float) -> float:
    """``E[exp(-x G) | G > 0]`` by quadrature over the angle."""
    lo = math.pi * (0.5 - p.rho)
    hi = 0.5 * math.pi

    def f(v):
        if v <= lo or v >= hi:
            return 1.0 if v <= lo else 0.0
        return math.exp(-x * cms_g(v, p))

    # the integrand is concentrated within about 1/x of the lower end
    width = hi - lo
    cuts = [lo] + [lo + width * 10.0 ** (-k) for k in range(10, 0, -1)] + [hi]
    return sum(_quad(f, a, b) for a, b in zip(cuts[:-1], cuts[1:])) / width


def check_G_laplace_bound(p: StableParams, x_grid: Sequence[float]) -> InequalityReport:
    k = constants(p)
    lhs, rhs = [], []
    for x in x_grid:
        lhs.append(G_laplace(p, x))
        rhs.append(1.0 if x == 0 else min(1.0, 1.0 / (k.gamma * p.alpha * p.rho * x)))
    rep = _report("G_laplace", x_grid, lhs, rhs)
    pos_lhs = [1 - p.rho + p.rho * l for l in lhs]
    pos_rhs = [1 - p.rho + p.rho * r for r in rhs]
    pos = _report("G_plus_laplace", x_grid, pos_lhs, pos_rhs)
    return InequalityReport(
        name=rep.name, points=rep.points, lhs=rep.lhs, rhs=rep.rhs,
        max_ratio=max(rep.max_ratio, pos.max_ratio), passed=rep.passed and pos.passed,
        extra={"x_times_lhs": [x * l for x, l in zip(x_grid, lhs)], "limit": 1 / (k.gamma * p.alpha * p.rho)},
    )


def _cauchy_pieces(rho):
    w = math.pi * (rho - 0.5)
    return math.sin(w), math.cos(w)


def cauchy_eta_moment(rho: float, s: float, x: float) -> float:
    """``E[eta_+^s exp(-x eta_+)]`` for ``eta_+`` a Cauchy draw given it is positive."""
    sn, cs = _cauchy_pieces(rho)
    f = lambda y: y**s * math.exp(-x * y) / (cs * cs + (y - sn) ** 2)  # noqa: E731
    return cs / (math.pi * rho) * (_quad(f, 0.0, max(1.0, 2 * abs(sn))) + _quad(f, max(1.0, 2 * abs(sn)), math.inf))


def check_cauchy_laplace_bound(rho: float, s: float, x_grid: Sequence[float]) -> InequalityReport:
    if not (0 <= s < 1):
        raise DomainError("s must lie in [0, 1)")
    sn, cs = _cauchy_pieces(rho)
    f = lambda y: y**s / (cs * cs + (y - sn) ** 2)  # noqa: E731
    full = _quad(f, 0.0, 1.0) + _quad(f, 1.0, math.inf)
    pref = cs / (math.pi * rho)
    lhs, rhs = [], []
    for x in x_grid:
        lhs.append(cauchy_eta_moment(rho, s, x))
        second = math.inf if x == 0 else math.gamma(s + 1) / (cs * cs * x ** (s + 1))
        rhs.append(pref * min(full, second))
    rep = _report("cauchy_laplace", x_grid, lhs, rhs)
    if s == 0:
        simple = [1.0 if x == 0 else min(1.0, 1 / (math.pi * cs * rho * x)) for x in x_grid]
        ok = all(l <= r * (1 + 1e-12) + 1e-12 for l, r in zip(lhs, simple))
        rep = InequalityReport(rep.name, rep.points, rep.lhs, rep.rhs, rep.max_ratio, rep.passed and ok)
    return rep


def tail_integral_P(b: float, p: float, q: float) -> float:
    """``int_1^inf x^(p-1) min{1, (bx)^-q} dx`` in closed form."""
    if not b > 0:
        raise DomainError("b must be positive")
    if not q > p:
        raise DivergentIntegral(f"need q > p, got p={p}, q={q}")
    bm = min(b, 1.0)
    if p == 0:
        # limit of ((b^1)^-p - 1)/p as p -> 0
        first = -math.log(bm)
    elif q == 1.0 and b < 1.0:
        return b ** (-p) / (p * (1 - p)) - 1 / p
    else:
        first = (bm ** (-p) - 1) / p
    return first + b ** (-q) * bm ** (q - p) / (q - p)


def tail_integral_quad(b: float, p: float, q: float) -> float:
    f = lambda x: x ** (p - 1) * min(1.0, (b * x) ** (-q))  # noqa: E731
    if b < 1:
        return _quad(f, 1.0, 1.0 / b) + _quad(f, 1.0 / b, math.inf)
    return _quad(f, 1.0, math.inf)


@dataclass(frozen=True)
class SeqReport:
    trials: int
    violations_a: int
    violations_b: int
    max_excess: float

    @property
    def passed(self) -> bool:
        return self.violations_a == 0 and self.violations_b == 0


def seq_lhs_rhs(r: float, x: np.ndarray, y: np.ndarray) -> tuple[float, float, float, float]:
    n = len(x)
    k = np.arange(1, n + 1)
    la = float(np.prod((1 - r) + r * x))
    ra = (1 - r) ** n + float(np.sum(r * (1 - r) ** (k - 1) * x))
    lb = float(np.prod((1 - r) * y + r * x))
    rb = (
        r**n + (1 - r) ** n
        + float(np.sum(r * (1 - r) ** (k[1:] - 1) * x[1:] * y[0]))
        + float(np.sum((1 - r) * r ** (k[1:] - 1) * x[0] * y[1:]))
    )
    return la, ra, lb, rb


def check_seq_inequalities(trials: int, rng: np.random.Generator, slack: float = 1e-12) -> SeqReport:
    va = vb = 0
    worst = -math.inf
    for _ in range(trials):
        n = int(rng.integers(1, 21))
        r = float(rng.random())
        x, y = rng.random(n), rng.random(n)
        la, ra, lb, rb = seq_lhs_rhs(r, x, y)
        va += la > ra + slack
        vb += lb > rb + slack
        worst = max(worst, la - ra, lb - rb)
    return SeqReport(trials=trials, violations_a=int(va), violations_b=int(vb), max_excess=worst)


def aux_Q_R(p: float, q: float, r: float, u: float, alpha: float) -> tuple[float, float]:
    """The auxiliary constants ``Q_p(r, u)`` and ``R_{p,q}(r, u)``."""
    a = alpha
    if not (0 < u <= 1):
        raise DomainError("u must lie in (0, 1]")
    if not (0 < p < min(a * u, 1.0)):
        raise DomainError("p must lie in (0, min(alpha u, 1))")
    if not (0 < q < min(a, 1.0)):
        raise DomainError("q must lie in (0, min(alpha, 1))")
    if r < 0:
        raise DomainError("r must be nonnegative")
    Q = (a * u * (1 + r) - u * p) / (p * (1 - p) * (a * u * (1 + r) - p) * (1 - p / a))
    logB = betaln(1 + r - p / a, 1 - q / a)
    R = (
        max(math.gamma(1 / a), 1.0) * math.exp(logB)
        * u * (1 - u) * (1 + r) ** 2 * (1 + r - p / a)
        / (p * q * (1 - p) * (1 - q) * (1 - p / a) * (u * (1 + r) - p / a))
    )
    return Q, R


def Q_series(p: float, r: float, u: float, alpha: float, terms: int = 200) -> float:
    """Partial sum of the geometric series whose closed form is ``Q_p(r,u) - 1/p``."""
    k = np.arange(1, terms + 1)
    a = alpha
    inner = (1 + r - p / a) ** (1.0 - k) / (p * (1 - p) * (1 - p / a)) - (1 + r) ** (1.0 - k) / p
    return float(np.sum(u * (1 - u) ** (k - 1) * (1 + r) ** (k - 1) * inner))


# --- Monte Carlo rate checks -------------------------------------------------


@dataclass(frozen=True)
class MomentRateReport:
    name: str
    levels: tuple
    means: tuple
    stderrs: tuple
    used: tuple
    fitted_rate: float
    ceiling: float
    margin: float = 0.05

    @property
    def passed(self) -> bool:
        return math.isfinite(self.fitted_rate) and self.fitted_rate <= self.ceiling + self.margin


def _inv_mom_block(rng, size, p, kappa, exps, levels, part, j):
    pe, qe, r, u, v, w = exps
    top = max(levels) + 1
    noise = NoiseRecord.draw(p, max(top, j), rng, size)
    xp, xm = chi_levels(noise, top, kappa)
    if p.cauchy:
        ej = np.ones(size)
    else:
        ej = noise.E[:, j - 1] ** u
    common = ej * noise.eta_plus**v * noise.eta_minus**w
    s1, s2 = [], []
    for n in levels:
        lead = noise.lengths[:, n] ** r
        if part == "a":
            t = lead * common / (xp[n] ** pe * xm[n] ** qe)
        else:
            t = lead * common * xm[n] ** qe / xp[n] ** pe
        s1.append(t.sum())
        s2.append((t**2).sum())
    return np.array(s1), np.array(s2)


def _mc_levels(fn, N, seed, workers, args):
    blocks = map_blocks(fn, N, seed, workers, args=args)
    s1 = sum(b[0] for b in blocks)
    s2 = sum(b[1] for b in blocks)
    mean = s1 / N
    se = np.sqrt(np.maximum(s2 / N - mean**2, 0.0) / (N - 1))
    return mean, se


def inverse_moment_means(p, kappa, exps, levels, N, seed, part="a", j=1, workers=1):
    check_kappa(kappa, p)
    return _mc_levels(_inv_mom_block, N, seed, workers, (p, kappa, tuple(exps), tuple(levels), part, j))


def inverse_moment_rate_check(
    p: StableParams,
    kappa: float,
    exps: tuple,
    n_range: Sequence[int],
    N: int,
    seed: int,
    part: str = "a",
    j: int = 1,
    workers: int = 1,
) -> MomentRateReport:
    """Geometric rate of ``E[l_{n+1}^r E_j^u eta+^v eta-^w X+^-p X-^-q]`` in ``n``.

    Part ``"b"`` moves ``X_{-,n}^q`` to the numerator.  The ceiling is
    ``1/(1+r)``.
    """
    pe, qe, r = exps[:3]
    if not (0 < pe < p.alpha * p.rho):
        raise DomainError("p must lie in (0, alpha rho)")
    if part == "a" and not (0 <= qe < p.alpha * (1 - p.rho)):
        raise DomainError("q must lie in [0, alpha (1 - rho))")
    levels = tuple(n_range)
    mean, se = inverse_moment_means(p, kappa, exps, levels, N, seed, part, j, workers)
    rate, used = fit_geometric_rate(levels, mean, se)
    return MomentRateReport(
        name=f"inv_mom_{part}", levels=levels, means=tuple(map(float, mean)),
        stderrs=tuple(map(float, se)), used=tuple(map(bool, used)),
        fitted_rate=rate, ceiling=1.0 / (1.0 + r),
    )


@dataclass(frozen=True)
class ScalingReport:
    ratio: float
    ratio_stderr: float
    expected: float
    z: float

    @property
    def passed(self) -> bool:
        return abs(self.z) <= 4


def inverse_moment_T_scaling(
    p: StableParams, kappa: float, exps: tuple, n: int, N: int, seeds: tuple[int, int],
    T2: float = 2.0, part: str = "a",
) -> ScalingReport:
    """Compare the estimate at ``T2`` with ``T = 1`` on independent seeds."""
    pe, qe, r = exps[:3]
    p1, p2 = p.with_T(1.0), p.with_T(T2)
    m1, s1 = inverse_moment_means(p1, kappa, exps, (n,), N, seeds[0], part)
    m2, s2 = inverse_moment_means(p2, kappa, exps, (n,), N, seeds[1], part)
    ratio = float(m2[0] / m1[0])
    rse = ratio * math.hypot(s1[0] / m1[0], s2[0] / m2[0])
    power = r - (pe + qe) / p.alpha if part == "a" else r + (qe - pe) / p.alpha
    expected = T2**power
    return ScalingReport(ratio=ratio, ratio_stderr=rse, expected=expected, z=(ratio - expected) / rse)


def _inv_bound_block(rng, size, p, kappa, exps, levels, side, m_offset):
    pe, qe, r, s = exps
    top = max(levels) + 1 + m_offset
    noise = NoiseRecord.draw(p, top, rng, size)
    xp, xm = chi_levels(noise, top, kappa)
    if p.cauchy:
        Zc = np.ones((size, top))
    else:
        Zc = noise.eta_plus[:, None] + noise.eta_minus[:, None] + np.cumsum(noise.E, axis=1)
    s1, s2 = [], []
    for n in levels:
        m = n + 1 + m_offset
        x_side = xp if side == "+" else xm
        delta = np.abs(x_side[n + 1] - x_side[n])
        t = delta**r * Zc[:, m - 1] ** s / (xp[n] ** pe * xm[n] ** qe)
        s1.append(t.sum())
        s2.append((t**2).sum())
    return np.array(s1), np.array(s2)


def increment_rate_check(
    p: StableParams,
    kappa: float,
    exps: tuple,
    n_range: Sequence[int],
    N: int,
    seed: int,
    side: str = "+",
    m_offset: int = 0,
    workers: int = 1,
) -> MomentRateReport:
    """Rate of ``E[|Delta_{side,n+1}|^r Z_m^s / (X+^p X-^q)]`` with ``m = n + 1 + m_offset``.

    Means are divided by ``m^{s'}``, ``s' = 1{s>0} max(s, 1)``, before the fit;
    the ceiling is ``max{(1 + r/alpha)^-1, kappa^r}``.
    """
    pe, qe, r, s = exps
    check_kappa(kappa, p)
    levels = tuple(n_range)
    mean, se = _mc_levels(_inv_bound_block, N, seed, workers, (p, kappa, tuple(exps), levels, side, m_offset))
    s_prime = (max(s, 1.0) if s > 0 else 0.0)
    ms = np.array([n + 1 + m_offset for n in levels], dtype=float)
    adj = ms**s_prime
    rate, used = fit_geometric_rate(levels, mean / adj, se / adj)
    return MomentRateReport(
        name=f"increment_{side}", levels=levels, means=tuple(map(float, mean)),
        stderrs=tuple(map(float, se)), used=tuple(map(bool, used)), fitted_rate=rate,
        ceiling=max(1.0 / (1.0 + r / p.alpha), kappa**r),
    )
