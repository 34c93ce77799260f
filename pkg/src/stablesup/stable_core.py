"""Strictly stable laws parameterised by (alpha, rho).

Sampling uses the Chambers-Mallows-Stuck split ``S = E**(1 - 1/alpha) * g(V)``
for ``alpha != 1`` and an explicit shifted Cauchy law for ``alpha == 1``.  The
closed-form fractional moments double as test oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import (
    CauchyMode,
    DegenerateRho,
    DomainError,
    MomentDoesNotExist,
    NonPositiveT,
    OutOfRange,
)

HALF_PI = 0.5 * math.pi
# g is only defined on the open interval; arguments this close to the
# endpoint are pulled inside.
EDGE_CLAMP = 1e-12


@dataclass(frozen=True)
class StableParams:
    """Validated ``(alpha, rho, T)`` with ``omega = pi*(rho - 1/2)``.

    Build through :func:`validate_params`; direct construction skips checks.
    """

    alpha: float
    rho: float
    omega: float
    T: float

    @property
    def cauchy(self) -> bool:
        return self.alpha == 1.0

    @property
    def zeta(self) -> float:
        """Exponent ``1 - 1/alpha`` carried by the exponential factors."""
        return 1.0 - 1.0 / self.alpha

    def with_T(self, T: float) -> "StableParams":
        return validate_params(self.alpha, self.rho, T)


def validate_params(alpha: float, rho: float, T: float = 1.0) -> StableParams:
    alpha = float(alpha)
    rho = float(rho)
    T = float(T)
    if not (0.0 < alpha < 2.0):
        raise OutOfRange(f"alpha={alpha!r} must lie in (0, 2)")
    lo, hi = max(1.0 - 1.0 / alpha, 0.0), min(1.0 / alpha, 1.0)
    if not (0.0 < rho < 1.0) or rho < lo or rho > hi:
        raise DegenerateRho(
            f"rho={rho!r} outside [1-1/alpha, 1/alpha] & (0,1) = [{lo}, {hi}]"
        )
    if not (T > 0.0) or not math.isfinite(T):
        raise NonPositiveT(f"T={T!r} must be positive")
    return StableParams(alpha=alpha, rho=rho, omega=math.pi * (rho - 0.5), T=T)


def _require_standard(p: StableParams) -> None:
    if p.cauchy:
        raise CauchyMode("formula needs alpha != 1")


def cms_g(x, p: StableParams):
    """The CMS angle function g, vectorised over ``x`` in (-pi/2, pi/2)."""
    _require_standard(p)
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) >= HALF_PI):
        raise DomainError("g is defined on the open interval (-pi/2, pi/2)")
    x = np.clip(x, -HALF_PI + EDGE_CLAMP, HALF_PI - EDGE_CLAMP)
    a, w = p.alpha, p.omega
    out = (
        np.sin(a * (x + w))
        / np.cos(x) ** (1.0 / a)
        / np.cos((1.0 - a) * x - a * w) ** (1.0 - 1.0 / a)
    )
    return out if out.ndim else float(out)


def open_uniform(rng: np.random.Generator, size) -> np.ndarray:
    """Uniforms on the open interval (0, 1)."""
    u = rng.random(size)
    bad = u == 0.0
    while np.any(bad):
        u[bad] = rng.random(int(bad.sum()))
        bad = u == 0.0
    return u


def positive_exponential(rng: np.random.Generator, size) -> np.ndarray:
    e = rng.standard_exponential(size)
    bad = e == 0.0
    while np.any(bad):
        e[bad] = rng.standard_exponential(int(bad.sum()))
        bad = e == 0.0
    return e


def uniform_angle(rng: np.random.Generator, size) -> np.ndarray:
    return math.pi * (open_uniform(rng, size) - 0.5)


def cauchy_quantile(u, rho: float):
    """Inverse CDF of the alpha = 1 law: location sin(omega), scale cos(omega)."""
    w = math.pi * (rho - 0.5)
    return math.sin(w) + math.cos(w) * np.tan(math.pi * (np.asarray(u) - 0.5))


def sample_stable(p: StableParams, rng: np.random.Generator, size=None):
    """Draw from the (alpha, rho) strictly stable law with unit time scale."""
    shape = () if size is None else size
    if p.cauchy:
        out = cauchy_quantile(open_uniform(rng, shape), p.rho)
    else:
        e = positive_exponential(rng, shape)
        v = uniform_angle(rng, shape)
        out = e ** p.zeta * cms_g(v, p)
    return float(out) if size is None else out


def cauchy_density(x, rho: float):
    w = math.pi * (rho - 0.5)
    c, s = math.cos(w), math.sin(w)
    x = np.asarray(x, dtype=float)
    out = (c / math.pi) / (c * c + (x - s) ** 2)
    return out if out.ndim else float(out)


def mellin_positive_moment(p: StableParams, q: float) -> float:
    """``E[S**q; S > 0]`` for ``q`` in (-1, alpha)."""
    a, r = p.alpha, p.rho
    if not (-1.0 < q < a):
        raise MomentDoesNotExist(f"E[S^q 1(S>0)] is infinite for q={q!r}, alpha={a!r}")
    if q == 0.0:
        return r
    return r * math.exp(
        gammaln(1 + q) + gammaln(1 - q / a) - gammaln(1 + q * r) - gammaln(1 - q * r)
    )


def mellin_G_moment(p: StableParams, q: float) -> float:
    """``E[G**q; G > 0]`` for the CMS angle factor, ``q`` in [0, alpha)."""
    _require_standard(p)
    if not (0.0 <= q < p.alpha):
        raise MomentDoesNotExist(f"E[G^q 1(G>0)] needs q in [0, alpha), got {q!r}")
    return mellin_positive_moment(p, q) / math.exp(gammaln(q * p.zeta + 1.0))
