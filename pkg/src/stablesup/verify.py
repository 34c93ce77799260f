"""Named numerical checks grouped into suites, with a JSON report.

Every check takes ``(seed, workers)`` and returns ``(passed, metric)`` where
the metric is a z-score, a maximal ratio or a maximal error depending on the
check.  Reports are deterministic for a fixed seed unless timings are asked
for.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import bounds, density, ibp_algebra, oracles
from .chi_approx import NoiseRecord, build_chi, default_kappa
from .stable_core import mellin_positive_moment, sample_stable, validate_params
from .stick_breaking import joint_stick_moment, sample_stick, stick_moment
from .streams import block_rng

SUITES = ("fast", "full", "appendix", "ibp", "rates")


@dataclass(frozen=True)
class Check:
    name: str
    paper_ref: str
    suites: tuple
    fn: Callable


_CHECKS: list[Check] = []


def check(name: str, ref: str, suites: tuple):
    def deco(fn):
        _CHECKS.append(Check(name, ref, suites, fn))
        return fn

    return deco


def _z(mean, target, se):
    return float((mean - target) / se) if se > 0 else (0.0 if mean == target else math.inf)


# --- sampler and sticks ------------------------------------------------------


@check("sampler_positive_probability", "P(S > 0) = rho for the angle/exponential sampler", ("fast", "full"))
def _sign_prob(seed, workers):
    worst = 0.0
    for k, (a, r) in enumerate([(1.5, 0.4), (0.7, 0.6), (1.0, 0.3)]):
        p = validate_params(a, r)
        s = sample_stable(p, block_rng(seed, k, tag=101), 200_000)
        ph = (s > 0).mean()
        worst = max(worst, abs(_z(ph, r, math.sqrt(r * (1 - r) / s.size))))
    return worst <= 4, worst


@check("sampler_positive_moment", "positive-part fractional moment closed form", ("fast", "full"))
def _mellin(seed, workers):
    worst = 0.0
    for k, (a, r) in enumerate([(1.5, 0.4), (0.7, 0.6)]):
        p = validate_params(a, r)
        s = sample_stable(p, block_rng(seed, k, tag=102), 200_000)
        for q in (0.3 * a, 0.6 * a):
            v = np.where(s > 0, np.abs(s) ** q, 0.0)
            z = _z(v.mean(), mellin_positive_moment(p, q), v.std(ddof=1) / math.sqrt(v.size))
            worst = max(worst, abs(z))
    return worst <= 4, worst


@check("stick_moments", "E[l_k^q] = T^q (1+q)^-k and the beta-product joint moment", ("fast", "full"))
def _sticks(seed, workers):
    path = sample_stick(1.0, 4, block_rng(seed, 0, tag=103), 200_000)
    ident = np.max(np.abs(path.lengths.sum(axis=1) + path.remainder - 1.0))
    worst = 0.0
    for q in (0.5, 1.0, 2.0):
        for k in (1, 2, 3, 4):
            v = path.lengths[:, k - 1] ** q
            worst = max(worst, abs(_z(v.mean(), stick_moment(1.0, q, k), v.std(ddof=1) / math.sqrt(v.size))))
    v = path.lengths[:, 0] * path.lengths[:, 1]
    worst = max(worst, abs(_z(v.mean(), joint_stick_moment(1.0, [1, 1]), v.std(ddof=1) / math.sqrt(v.size))))
    return bool(worst <= 4 and ident <= 1e-12), worst


# --- weight algebra ------------------------------------------------------------


@check("weight_commutation", "one-sided weight operators commute", ("fast", "full", "ibp"))
def _commute(seed, workers):
    for mode in (ibp_algebra.STANDARD, ibp_algebra.CAUCHY):
        for k in range(4):
            for j in range(4):
                a = ibp_algebra.one(mode)
                for _ in range(k):
                    a = ibp_algebra.apply_H(a, "+")
                for _ in range(j):
                    a = ibp_algebra.apply_H(a, "-")
                if a != ibp_algebra.iterate_H(k, j, mode):
                    return False, 1.0
    return True, 0.0


@check("weight_level_shift", "weight times X^k does not depend on the level n", ("fast", "full", "ibp"))
def _level_shift(seed, workers):
    p = validate_params(1.5, 0.5)
    noise = NoiseRecord.draw(p, 8, block_rng(seed, 0, tag=104), 10_000)
    worst = 0.0
    for orders in ((1, 1), (2, 1), (2, 2)):
        w = ibp_algebra.iterate_H(*orders)
        vals = []
        for n in (3, 4):
            chi = build_chi(noise, n, p, 0.9)
            vals.append(ibp_algebra.eval_weight(w, chi, noise, 7) * chi.x_plus ** orders[0] * chi.x_minus ** orders[1])
        worst = max(worst, float(np.max(np.abs(vals[0] - vals[1]) / np.abs(vals[1]))))
    return worst <= 1e-10, worst


@check("derivative_regeneration", "D[X^-p] = -(1 - 1/alpha) p X^-p by finite differences", ("fast", "full", "ibp"))
def _regen(seed, workers):
    worst = 0.0
    for a, r in ((1.5, 0.5), (0.7, 0.6), (1.0, 0.5)):
        p = validate_params(a, r)
        noise = NoiseRecord.draw(p, 6, block_rng(seed, 0, tag=105), 500)
        for side in "+-":
            for pw in (1, 2):
                def f(nz):
                    chi = build_chi(nz, 4, p, 0.95)
                    return (chi.x_plus if side == "+" else chi.x_minus) ** (-pw)

                fd = ibp_algebra.directional_derivative(noise, 6, side, f, 1e-6)
                factor = -pw if p.cauchy else -(1 - 1 / a) * pw
                worst = max(worst, float(np.max(np.abs(fd / (factor * f(noise)) - 1))))
    return worst <= 1e-5, worst


def _ibp(seed, a, r, n, N, cauchy_boundary=False):
    p = validate_params(a, r)
    worst = 0.0
    for k, side in enumerate("+-"):
        rep = ibp_algebra.verify_ibp_identity(
            ibp_algebra.EXP_DECAY, side, n, n, p, 0.9, N, block_rng(seed, k, tag=106 + n)
        )
        worst = max(worst, abs(rep.z_with_boundary if cauchy_boundary else rep.z))
    return worst <= 4, worst


@check("ibp_identity_standard", "finite-level integration by parts, alpha != 1", ("fast", "full", "ibp"))
def _ibp_std(seed, workers):
    return _ibp(seed, 1.5, 0.5, 3, 200_000)


@check("ibp_identity_cauchy_with_boundary", "finite-level integration by parts, alpha = 1, boundary term included", ("fast", "full", "ibp"))
def _ibp_cauchy_b(seed, workers):
    return _ibp(seed, 1.0, 0.5, 3, 200_000, cauchy_boundary=True)


@check("ibp_identity_cauchy_plain", "finite-level integration by parts, alpha = 1, as stated", ("full", "ibp"))
def _ibp_cauchy(seed, workers):
    return _ibp(seed, 1.0, 0.5, 3, 200_000)


# --- appendix oracles ---------------------------------------------------------

_APPX = ((1.5, 0.4), (0.7, 0.6))


@check("exp_moment_bound", "E[Y^s exp(-x Y^zeta)] <= c d_s min(1, x^-delta)", ("fast", "full", "appendix"))
def _expb(seed, workers):
    worst, ok = 0.0, True
    for a, r in _APPX:
        for s in (0.0, 0.5, 1.0):
            rep = oracles.check_exp_moment_bound(validate_params(a, r), s, np.logspace(-2, 4, 10))
            ok &= rep.passed
            worst = max(worst, rep.max_ratio)
    return ok, worst


@check("G_laplace_bound", "E[exp(-xG) | G > 0] <= min(1, 1/(gamma alpha rho x))", ("fast", "full", "appendix"))
def _gb(seed, workers):
    worst, ok = 0.0, True
    for a, r in _APPX:
        rep = oracles.check_G_laplace_bound(validate_params(a, r), np.logspace(-2, 4, 10))
        ok &= rep.passed
        worst = max(worst, rep.max_ratio)
    return ok, worst


@check("cauchy_laplace_bound", "Laplace bound for the conditioned Cauchy remainder variable", ("fast", "full", "appendix"))
def _cb(seed, workers):
    worst, ok = 0.0, True
    for rho in (0.5, 0.3):
        for s in (0.0, 0.5):
            rep = oracles.check_cauchy_laplace_bound(rho, s, np.logspace(-2, 3, 10))
            ok &= rep.passed
            worst = max(worst, rep.max_ratio)
    return ok, worst


@check("tail_integral", "closed form of int_1^inf x^(p-1) min(1, (bx)^-q) dx", ("fast", "full", "appendix"))
def _tail(seed, workers):
    worst = 0.0
    for b in (0.1, 0.5, 1.0, 2.0, 10.0):
        for pp in (-0.5, 0.0, 0.3, 0.7, 1.2):
            for dq in (0.5, 1.0, 1.7, 2.5, 4.0):
                q = pp + dq
                worst = max(worst, abs(oracles.tail_integral_P(b, pp, q) - oracles.tail_integral_quad(b, pp, q)))
    return worst <= 1e-8, worst


@check("sequence_inequalities", "product-versus-sum inequalities on [0,1]", ("fast", "full", "appendix"))
def _seq(seed, workers):
    rep = oracles.check_seq_inequalities(10_000, block_rng(seed, 0, tag=110))
    return rep.passed, float(rep.violations_a + rep.violations_b)


@check("Q_series_shifted", "geometric series equals Q_p(r, u) - 1/p", ("fast", "full", "appendix"))
def _qshift(seed, workers):
    worst = 0.0
    for a, pp, r, u in ((1.5, 0.5, 1.0, 0.5), (1.5, 0.3, 0.0, 0.4), (0.8, 0.2, 2.0, 0.6)):
        Q, _ = oracles.aux_Q_R(pp, 0.5 * min(a, 1), r, u, a)
        worst = max(worst, abs(oracles.Q_series(pp, r, u, a) - (Q - 1 / pp)))
    return worst <= 1e-10, worst


@check("Q_series_as_stated", "geometric series equals Q_p(r, u)", ("full", "appendix"))
def _qplain(seed, workers):
    worst = 0.0
    for a, pp, r, u in ((1.5, 0.5, 1.0, 0.5), (1.5, 0.3, 0.0, 0.4)):
        Q, _ = oracles.aux_Q_R(pp, 0.5, r, u, a)
        worst = max(worst, abs(oracles.Q_series(pp, r, u, a) - Q))
    return worst <= 1e-10, worst


# --- rates -----------------------------------------------------------------------


@check("multilevel_decay", "geometric decay of telescoping differences", ("full", "rates"))
def _decay(seed, workers):
    p = validate_params(1.5, 0.5)
    rep = density.decay_rate_check((2, 2), p, 0.9, range(3, 13), 100_000, seed, 1.2, workers=workers)
    return rep.passed, rep.fitted_rate - rep.ceiling


@check("inverse_moment_rates", "inverse moments decay like (1+r)^-n", ("full", "rates"))
def _invmom(seed, workers):
    worst, ok = -math.inf, True
    for a, r in ((1.5, 0.5), (0.8, 0.5)):
        p = validate_params(a, r)
        k = default_kappa(p)
        for part, exps in (("a", (0.3, 0.3, 1.0, 0.0, 0.0, 0.0)), ("b", (0.3, 0.3, 1.0, 1.0, 0.5, 0.5))):
            rep = oracles.inverse_moment_rate_check(p, k, exps, range(1, 11), 100_000, seed, part, workers=workers)
            ok &= rep.passed
            worst = max(worst, rep.fitted_rate - rep.ceiling)
    return ok, worst


@check("increment_rates", "increment moments decay like max((1+r/alpha)^-1, kappa^r)", ("full", "rates"))
def _incr(seed, workers):
    worst, ok = -math.inf, True
    for a, r in ((1.5, 0.5), (0.8, 0.5)):
        p = validate_params(a, r)
        rep = oracles.increment_rate_check(p, default_kappa(p), (0.3, 0.3, 1.0, 1.0), range(2, 12), 100_000, seed, workers=workers)
        ok &= rep.passed
        worst = max(worst, rep.fitted_rate - rep.ceiling)
    return ok, worst


@check("inverse_moment_T_scaling", "inverse moments scale like T^(r - (p+q)/alpha)", ("full", "rates"))
def _tscale(seed, workers):
    p = validate_params(1.5, 0.5)
    rep = oracles.inverse_moment_T_scaling(p, default_kappa(p), (0.5, 0.5, 1.0, 0, 0, 0), 4, 200_000, (seed, seed + 1))
    return rep.passed, abs(rep.z)


@check("density_vs_histogram", "(1,1) estimator against a histogram of the level-40 pair", ("full",))
def _dens(seed, workers):
    p = validate_params(1.5, 0.5)
    pts = [(1.0, 1.0), (0.5, 2.0), (2.0, 0.5)]
    est = density.estimate_density(pts, (1, 1), N=100_000, p=p, seed=seed, workers=workers, bootstrap=False)
    h = 0.1
    from .chi_approx import simulate_joint

    xT, sup = simulate_joint(p, default_kappa(p), 40, block_rng(seed, 0, tag=111), 1_000_000)
    xp, xm = sup, sup - xT
    worst = 0.0
    for e in est:
        inside = (np.abs(xp - e.point[0]) < h) & (np.abs(xm - e.point[1]) < h)
        hv = inside.mean() / (4 * h * h)
        hse = math.sqrt(inside.mean() * (1 - inside.mean()) / inside.size) / (4 * h * h)
        worst = max(worst, abs(e.value - hv) / math.hypot(e.stderr, hse))
    return worst <= 4, worst


@check("bound_shapes", "region map and bound homogeneity", ("fast", "full"))
def _bshape(seed, workers):
    q = bounds.BoundQuery(1.5, 0.4, 1.0, 1.2, (1, 2))
    worst = 0.0
    lam = 1.7
    for xp, xm in ((0.3, 0.5), (2.0, 0.7), (5.0, 4.0)):
        a = bounds.refl_bound(bounds.BoundQuery(1.5, 0.4, lam**1.5, 1.2, (1, 2)), lam * xp, lam * xm)
        b = lam ** (-3) * bounds.refl_bound(q, xp, xm)
        worst = max(worst, abs(a / b - 1))
    ok = bounds.classify_region(-50.0, 60.0, 1.0, 1.5, 0.4) == "11"
    ok &= bounds.classify_region(0.0, 0.01, 1.0, 1.5, 0.4) == "00"
    return bool(ok and worst < 1e-12), worst


# --- driver ------------------------------------------------------------------------


def checks_for(suite: str) -> list[Check]:
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from {SUITES}")
    return [c for c in _CHECKS if suite in c.suites]


def run_suite(suite: str, seed: int = 0, workers: int = 1, timing: bool = False) -> list[dict]:
    records = []
    for c in checks_for(suite):
        t0 = time.perf_counter()
        try:
            passed, metric = c.fn(seed, workers)
            status = "pass" if passed else "fail"
        except Exception as exc:  # a crashing check is a failed check
            status, metric = "error", math.nan
            c_err = f"{type(exc).__name__}: {exc}"
        else:
            c_err = None
        rec = {
            "name": c.name,
            "paper_ref": c.paper_ref,
            "status": status,
            "max_slack_or_z": _finite(metric),
            "runtime": round(time.perf_counter() - t0, 3) if timing else None,
        }
        if c_err:
            rec["error"] = c_err
        records.append(rec)
    return records


def _finite(x):
    x = float(x)
    return x if math.isfinite(x) else str(x)


def report_json(suite: str, seed: int, records: list[dict]) -> str:
    return json.dumps({"suite": suite, "seed": seed, "checks": records}, indent=2, sort_keys=True) + "\n"


def all_passed(records: list[dict]) -> bool:
    return all(r["status"] == "pass" for r in records)
