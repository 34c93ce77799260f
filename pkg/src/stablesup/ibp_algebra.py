"""Exact algebra of the integration-by-parts weights.

A weight is a finite sum of monomials in a small set of generators:

* standard mode (``alpha != 1``): ``Sigma+-``, ``sigma+-``, ``Xinv+-``;
* Cauchy mode (``alpha == 1``): ``Z+-_k`` (k >= 1), ``sigma+-``, ``Xinv+-``;
* optionally ``phi_{a,b}``, the mixed partial ``d+^a d-^b phi`` of a smooth
  function of ``chi_n``.

Coefficients are Laurent polynomials with rational coefficients in
``A = alpha/(alpha - 1)``, stored by treating ``A`` as one more generator with
an integer exponent.  Since ``1 - 1/alpha = 1/A`` every coefficient produced
by the derivation rules stays in that ring, so canonical forms compare
exactly.

Derivation rules for ``D^s`` (s in {+, -}), standard mode::

    D^s[Sigma^s] = Sigma^s      D^s[sigma^*] = 0      D^s[Sigma^{-s}] = 0
    D^s[Xinv^s]  = -(1/A) Xinv^s                       D^s[Xinv^{-s}]  = 0

and Cauchy mode ``D^s[Z^s_k] = Z^s_{k+1}``, ``D^s[Xinv^s] = -Xinv^s``.  The
one-step weight is::

    H^s(Phi) = A Xinv^s ((Sigma^s - sigma^s + 1/A) Phi - D^s[Phi])   standard
    H^s(Phi) =   Xinv^s ((Z^s_1  - sigma^s + 1)   Phi - D^s[Phi])   Cauchy
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Optional

import numpy as np
from numpy.polynomial import Polynomial

from .errors import CauchyModeMismatch, LevelOrder

STANDARD = "standard"
CAUCHY = "cauchy"
SIDES = ("+", "-")

A_GEN = ("A",)

Monomial = tuple  # sorted tuple of (generator, exponent)


def Sigma(side: str) -> tuple:
    return ("Sigma", side)


def sigma(side: str) -> tuple:
    return ("sigma", side)


def Xinv(side: str) -> tuple:
    return ("Xinv", side)


def Z(side: str, k: int) -> tuple:
    return ("Z", side, k)


def phi(a: int, b: int) -> tuple:
    return ("phi", a, b)


def _other(side: str) -> str:
    return "-" if side == "+" else "+"


def _mono(powers: Mapping[tuple, int]) -> Monomial:
    return tuple(sorted((g, e) for g, e in powers.items() if e != 0))


def _mul_mono(m1: Monomial, m2: Monomial) -> Monomial:
    acc = dict(m1)
    for g, e in m2:
        acc[g] = acc.get(g, 0) + e
    return _mono(acc)


@dataclass(frozen=True)
class WeightExpr:
    """Immutable canonical polynomial; ``terms`` is sorted by monomial."""

    mode: str
    terms: tuple  # ((monomial, Fraction), ...)

    @classmethod
    def from_dict(cls, mode: str, d: Mapping[Monomial, Fraction]) -> "WeightExpr":
        items = tuple(sorted((m, Fraction(c)) for m, c in d.items() if c != 0))
        return cls(mode, items)

    @classmethod
    def const(cls, mode: str, c=1) -> "WeightExpr":
        return cls.from_dict(mode, {(): Fraction(c)})

    @classmethod
    def gen(cls, mode: str, g: tuple, power: int = 1, coef=1) -> "WeightExpr":
        return cls.from_dict(mode, {_mono({g: power}): Fraction(coef)})

    def as_dict(self) -> dict:
        return dict(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def _check(self, other: "WeightExpr") -> None:
        if self.mode != other.mode:
            raise CauchyModeMismatch(f"cannot combine {self.mode} and {other.mode} weights")

    def __add__(self, other: "WeightExpr") -> "WeightExpr":
        self._check(other)
        acc = self.as_dict()
        for m, c in other.terms:
            acc[m] = acc.get(m, 0) + c
        return WeightExpr.from_dict(self.mode, acc)

    def __neg__(self) -> "WeightExpr":
        return WeightExpr(self.mode, tuple((m, -c) for m, c in self.terms))

    def __sub__(self, other: "WeightExpr") -> "WeightExpr":
        return self + (-other)

    def __mul__(self, other) -> "WeightExpr":
        if not isinstance(other, WeightExpr):
            c = Fraction(other)
            return WeightExpr.from_dict(self.mode, {m: v * c for m, v in self.terms})
        self._check(other)
        acc: dict = {}
        for m1, c1 in self.terms:
            for m2, c2 in other.terms:
                m = _mul_mono(m1, m2)
                acc[m] = acc.get(m, 0) + c1 * c2
        return WeightExpr.from_dict(self.mode, acc)

    __rmul__ = __mul__

    def generators(self) -> set:
        return {g for m, _ in self.terms for g, _ in m}

    def x_exponents(self) -> set:
        """Distinct ``(k+, k-)`` powers of ``Xinv`` across monomials."""
        return {
            (dict(m).get(Xinv("+"), 0), dict(m).get(Xinv("-"), 0)) for m, _ in self.terms
        }

    def grouped(self) -> dict:
        """Monomials without ``A``, each mapped to ``{A-power: Fraction}``."""
        out: dict = {}
        for m, c in self.terms:
            d = dict(m)
            k = d.pop(A_GEN, 0)
            key = _mono(d)
            out.setdefault(key, {})
            out[key][k] = out[key].get(k, 0) + c
        return out

    def coefficient_values(self, alpha: float) -> dict:
        """Monomial (without ``A``) to float coefficient at this ``alpha``."""
        A = _A_value(self.mode, alpha)
        return {
            m: float(sum(float(c) * A**k for k, c in poly.items()))
            for m, poly in self.grouped().items()
        }

    def __str__(self) -> str:
        return pretty(self)


def _A_value(mode: str, alpha: float) -> float:
    if mode == CAUCHY:
        return 1.0
    return alpha / (alpha - 1.0)


def one(mode: str = STANDARD) -> WeightExpr:
    return WeightExpr.const(mode, 1)


# --- derivation -----------------------------------------------------------


def _D_generator(mode: str, g: tuple, side: str) -> Optional[WeightExpr]:
    """``D^side[g]`` or ``None`` when it vanishes."""
    kind = g[0]
    if kind == "Sigma":
        if mode != STANDARD:
            raise CauchyModeMismatch("Sigma generators exist only in standard mode")
        return WeightExpr.gen(mode, g) if g[1] == side else None
    if kind == "Z":
        if mode != CAUCHY:
            raise CauchyModeMismatch("Z generators exist only in Cauchy mode")
        return WeightExpr.gen(mode, Z(side, g[2] + 1)) if g[1] == side else None
    if kind == "Xinv":
        if g[1] != side:
            return None
        if mode == STANDARD:
            return WeightExpr.from_dict(mode, {_mono({g: 1, A_GEN: -1}): Fraction(-1)})
        return WeightExpr.gen(mode, g, coef=-1)
    if kind == "phi":
        a, b = g[1], g[2]
        nxt = phi(a + 1, b) if side == "+" else phi(a, b + 1)
        # D^s[X_s] = (1/A) X_s, and X_s = Xinv_s^{-1}
        powers = {nxt: 1, Xinv(side): -1}
        if mode == STANDARD:
            powers[A_GEN] = -1
        return WeightExpr.from_dict(mode, {_mono(powers): Fraction(1)})
    # sigma counts and the constant A are annihilated
    return None


def apply_D(expr: WeightExpr, side: str) -> WeightExpr:
    """Apply the derivation ``D^side`` by the Leibniz rule."""
    mode = expr.mode
    acc: dict = {}
    for m, c in expr.terms:
        for i, (g, e) in enumerate(m):
            dg = _D_generator(mode, g, side)
            if dg is None:
                continue
            rest = dict(m)
            rest[g] = e - 1
            rest_m = _mono(rest)
            for dm, dc in dg.terms:
                mm = _mul_mono(rest_m, dm)
                acc[mm] = acc.get(mm, 0) + c * e * dc
    return WeightExpr.from_dict(mode, acc)


def _base_factor(mode: str, side: str) -> WeightExpr:
    if mode == STANDARD:
        return (
            WeightExpr.gen(mode, Sigma(side))
            - WeightExpr.gen(mode, sigma(side))
            + WeightExpr.gen(mode, A_GEN, power=-1)
        )
    return (
        WeightExpr.gen(mode, Z(side, 1))
        - WeightExpr.gen(mode, sigma(side))
        + WeightExpr.const(mode, 1)
    )


def apply_H(expr: WeightExpr, side: str) -> WeightExpr:
    """One integration-by-parts step on ``side``."""
    mode = expr.mode
    inner = _base_factor(mode, side) * expr - apply_D(expr, side)
    pref = {Xinv(side): 1}
    if mode == STANDARD:
        pref[A_GEN] = 1
    return WeightExpr.from_dict(mode, {_mono(pref): Fraction(1)}) * inner


@lru_cache(maxsize=None)
def iterate_H(k_plus: int, k_minus: int, mode: str = STANDARD) -> WeightExpr:
    """Canonical form of ``H^{+,k_plus}(H^{-,k_minus}(1))``."""
    if k_plus < 0 or k_minus < 0:
        raise ValueError("orders must be nonnegative")
    if mode not in (STANDARD, CAUCHY):
        raise CauchyModeMismatch(f"unknown mode {mode!r}")
    expr = one(mode)
    for _ in range(k_minus):
        expr = apply_H(expr, "-")
    for _ in range(k_plus):
        expr = apply_H(expr, "+")
    return expr


def iterate_H_on(expr: WeightExpr, k_plus: int, k_minus: int) -> WeightExpr:
    for _ in range(k_minus):
        expr = apply_H(expr, "-")
    for _ in range(k_plus):
        expr = apply_H(expr, "+")
    return expr


def pretty(expr: WeightExpr) -> str:
    """Stable human-readable rendering, one signed term per monomial."""
    if expr.is_zero():
        return "0"
    A_name = "A" if expr.mode == STANDARD else ""
    parts = []
    for m, poly in sorted(expr.grouped().items()):
        coef = _format_laurent(poly, A_name)
        body = "*".join(_format_power(g, e) for g, e in m)
        if body:
            parts.append(f"({coef})*{body}" if coef not in ("1",) else body)
        else:
            parts.append(f"({coef})")
    return " + ".join(parts)


def _format_laurent(poly: Mapping[int, Fraction], A_name: str) -> str:
    bits = []
    for k in sorted(poly):
        c = poly[k]
        if c == 0:
            continue
        if k == 0 or not A_name:
            bits.append(str(c))
        else:
            bits.append(f"{c}*{A_name}^{k}")
    return " + ".join(bits) if bits else "0"


def _format_power(g: tuple, e: int) -> str:
    name = {
        "Sigma": lambda g: f"Sigma{g[1]}",
        "sigma": lambda g: f"sigma{g[1]}",
        "Xinv": lambda g: f"X{g[1]}^-1",
        "Z": lambda g: f"Z{g[1]}_{g[2]}",
        "phi": lambda g: f"phi_{g[1]}{g[2]}",
    }[g[0]](g)
    return name if e == 1 else f"({name})^{e}"


# --- Cauchy score functions ----------------------------------------------


@dataclass(frozen=True)
class RationalFn:
    """``numerator(x) / base(x)**power`` on x > 0, and 0 for x <= 0."""

    numerator: Polynomial
    base: Polynomial
    power: int

    @property
    def denominator(self) -> Polynomial:
        return self.base**self.power

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        pos = np.maximum(x, 0.0)
        val = self.numerator(pos) / self.base(pos) ** self.power
        out = np.where(x > 0, val, 0.0)
        return out if out.ndim else float(out)

    def bounded_on_half_line(self) -> bool:
        return self.numerator.degree() <= self.denominator.degree()

    def limit_at_infinity(self) -> float:
        num, den = self.numerator, self.denominator
        if num.degree() < den.degree():
            return 0.0
        return float(num.coef[-1] / den.coef[-1])


@lru_cache(maxsize=None)
def q_rational(k: int, side: str, rho: float) -> RationalFn:
    """``q^{(k)}`` on the magnitude of a side-``side`` Cauchy variable.

    ``q^{(1)}(y) = 2y(y - s)/(c^2 + (y - s)^2)`` for side ``+`` and
    ``2y(y + s)/(c^2 + (y + s)^2)`` for side ``-`` (with ``s = sin(omega)``,
    ``c = cos(omega)``), and ``q^{(k+1)}(y) = y d/dy q^{(k)}(y)``.
    """
    if k < 1:
        raise ValueError("k >= 1")
    w = math.pi * (rho - 0.5)
    s = math.sin(w) if side == "+" else -math.sin(w)
    c = math.cos(w)
    base = Polynomial([s * s + c * c, -2.0 * s, 1.0])
    num = Polynomial([0.0, -2.0 * s, 2.0])
    x = Polynomial([0.0, 1.0])
    for j in range(1, k):
        # x * (N'/D^j - j N D'/D^{j+1})
        num = x * (num.deriv() * base - j * num * base.deriv())
    return RationalFn(numerator=num, base=base, power=k)


# --- numeric evaluation ---------------------------------------------------


def _side_mask(noise, m: int, side: str) -> np.ndarray:
    src = noise.sign_source[:, :m]
    return src > 0 if side == "+" else src < 0


def generator_values(noise, m: int, z_orders: int = 0) -> dict:
    """Per-path values of the level-``m`` generators (everything except ``Xinv``)."""
    if m > noise.capacity:
        from .errors import CapacityExceeded

        raise CapacityExceeded(f"level {m} exceeds noise capacity {noise.capacity}")
    vals: dict = {}
    for side in SIDES:
        mask = _side_mask(noise, m, side)
        vals[sigma(side)] = 1.0 + mask.sum(axis=1)
        eta = noise.eta_plus if side == "+" else noise.eta_minus
        if noise.cauchy:
            mag = np.abs(noise.S_raw[:, :m]) * mask
            for k in range(1, z_orders + 1):
                q = q_rational(k, side, noise.params.rho)
                vals[Z(side, k)] = q(eta) + q(mag).sum(axis=1)
        else:
            vals[Sigma(side)] = eta + (noise.E[:, :m] * mask).sum(axis=1)
    return vals


def _z_depth(expr: WeightExpr) -> int:
    return max((g[2] for g in expr.generators() if g[0] == "Z"), default=0)


def evaluate(
    expr: WeightExpr,
    values: Mapping[tuple, np.ndarray],
    alpha: float,
    phi_values: Optional[Callable[[int, int], np.ndarray]] = None,
):
    """Numeric value of ``expr`` given generator values (arrays broadcast).

    Monomials are grouped by their ``Xinv`` powers and each group's polynomial
    is summed before the ``X`` factor is applied, so ``value * X^k`` does not
    depend on the level of ``X`` beyond rounding of the final product.
    """
    xkeys = (Xinv("+"), Xinv("-"))
    groups: dict = {}
    for m, c in expr.coefficient_values(alpha).items():
        d = dict(m)
        xk = tuple(d.pop(k, 0) for k in xkeys)
        term = c
        for g, e in sorted(d.items()):
            if g[0] == "phi":
                if phi_values is None:
                    raise KeyError("expression contains phi partials but no phi_values given")
                v = phi_values(g[1], g[2])
            else:
                v = values[g]
            term = term * (v**e if e != 1 else v)
        groups[xk] = groups.get(xk, 0.0) + term
    total = 0.0
    for (kp, km), poly in sorted(groups.items()):
        if kp:
            poly = poly * values[xkeys[0]] ** kp
        if km:
            poly = poly * values[xkeys[1]] ** km
        total = total + poly
    return total


def eval_weight(
    expr: WeightExpr,
    chi,
    noise,
    m: int,
    phi_values: Optional[Callable[[int, int], np.ndarray]] = None,
):
    """Value of ``expr`` with generators at level ``m`` and ``X`` at ``chi.n``."""
    if chi.n < 1:
        raise LevelOrder("weights need level n >= 1")
    if m < chi.n:
        raise LevelOrder(f"need m >= n, got m={m}, n={chi.n}")
    if (expr.mode == CAUCHY) != noise.cauchy:
        raise CauchyModeMismatch("weight mode does not match the noise record")
    vals = generator_values(noise, m, _z_depth(expr))
    vals[Xinv("+")] = 1.0 / chi.x_plus
    vals[Xinv("-")] = 1.0 / chi.x_minus
    return evaluate(expr, vals, noise.params.alpha, phi_values)


def polynomial_part(expr: WeightExpr) -> tuple[WeightExpr, tuple[int, int]]:
    """Split ``expr = P * Xinv+^k+ Xinv-^k-`` when the X-powers are uniform."""
    xs = expr.x_exponents()
    if len(xs) != 1:
        raise ValueError(f"non-uniform X exponents {sorted(xs)}")
    kp, km = next(iter(xs))
    acc = {}
    for m, c in expr.terms:
        d = dict(m)
        d.pop(Xinv("+"), None)
        d.pop(Xinv("-"), None)
        acc[_mono(d)] = c
    return WeightExpr.from_dict(expr.mode, acc), (kp, km)


def mode_for(params) -> str:
    return CAUCHY if params.cauchy else STANDARD


def sigma_sigma_degree(expr: WeightExpr) -> int:
    """Largest total degree in the Sigma/sigma/Z generators over monomials."""
    best = 0
    for m, _ in expr.terms:
        best = max(best, sum(e for g, e in m if g[0] in ("Sigma", "sigma", "Z")))
    return best


def monomial_count(expr: WeightExpr) -> int:
    return len(expr.grouped())


def terms_from(items: Iterable[tuple[Mapping[tuple, int], object]], mode: str) -> WeightExpr:
    acc: dict = {}
    for powers, c in items:
        m = _mono(powers)
        acc[m] = acc.get(m, 0) + Fraction(c)
    return WeightExpr.from_dict(mode, acc)


def polynomial_bound(expr: WeightExpr, Z_m, m: int, alpha: float):
    """Deterministic majorant of ``|expr|`` with every ``Xinv`` set to 1.

    Uses ``Sigma^+-_m <= Z_m`` and ``sigma^+-_m <= m + 1``; standard mode only.
    """
    if expr.mode != STANDARD:
        raise CauchyModeMismatch("polynomial bound is stated for standard mode")
    total = 0.0
    for mono, c in expr.coefficient_values(alpha).items():
        term = abs(c)
        for g, e in mono:
            if g[0] == "Sigma":
                term = term * np.asarray(Z_m, dtype=float) ** e
            elif g[0] == "sigma":
                term = term * float(m + 1) ** e
        total = total + term
    return total


# --- numerical checks of the calculus ---------------------------------------


def scale_noise(noise, m: int, side: str, t: float):
    """Copy of ``noise`` with the side-``side`` variables up to index ``m``
    multiplied by ``exp(t)``: ``E_i`` (or the magnitude of ``S_i``) and ``eta``.

    Then ``d/dt F(scale_noise(noise, m, side, t))`` at ``t = 0`` is ``D^side F``.
    """
    from dataclasses import replace

    factor = math.exp(t)
    cols = np.zeros(noise.capacity, dtype=bool)
    cols[:m] = True
    mask = _side_mask(noise, noise.capacity, side) & cols
    eta_field = "eta_plus" if side == "+" else "eta_minus"
    changes = {eta_field: getattr(noise, eta_field) * factor}
    if noise.cauchy:
        changes["S_raw"] = np.where(mask, noise.S_raw * factor, noise.S_raw)
    else:
        changes["E"] = np.where(mask, noise.E * factor, noise.E)
    return replace(noise, **changes)


def directional_derivative(noise, m: int, side: str, func, h: float = 1e-6):
    """Central difference of ``t -> func(scale_noise(noise, m, side, t))`` at 0."""
    up = func(scale_noise(noise, m, side, h))
    down = func(scale_noise(noise, m, side, -h))
    return (up - down) / (2.0 * h)


@dataclass(frozen=True)
class TestFunction:
    """A smooth ``f(x+, x-)`` together with its two first partials."""

    f: Callable
    d_plus: Callable
    d_minus: Callable


EXP_DECAY = TestFunction(
    f=lambda x, y: np.exp(-x - y),
    d_plus=lambda x, y: -np.exp(-x - y),
    d_minus=lambda x, y: -np.exp(-x - y),
)

CONSTANT = TestFunction(
    f=lambda x, y: np.ones_like(x),
    d_plus=lambda x, y: np.zeros_like(x),
    d_minus=lambda x, y: np.zeros_like(x),
)


@dataclass(frozen=True)
class IBPReport:
    side: str
    n: int
    m: int
    samples: int
    lhs: float
    lhs_stderr: float
    rhs: float
    rhs_stderr: float
    z: float
    boundary: float = 0.0
    z_with_boundary: float = 0.0


def cauchy_boundary_term(f: TestFunction, side: str, chi, noise) -> np.ndarray:
    """Per-path boundary contribution of ``eta_side -> 0`` in Cauchy mode.

    On the event that no ``S_k`` (``k <= n``) lies on ``side``, ``X_side`` is
    ``a_n eta_side`` and the product ``eta * F * density`` keeps a nonzero
    limit at ``eta = 0``.  Its value given everything else is
    ``f(0, X_-) p(0) / (P(side) a_n)`` (mirrored for ``side = -``).
    """
    from .stable_core import cauchy_density

    rho = noise.params.rho
    S = noise.S_raw[:, : chi.n]
    empty = ~np.any(S > 0 if side == "+" else S < 0, axis=1)
    if side == "+":
        fb = f.f(np.zeros_like(chi.x_minus), chi.x_minus)
        prob = rho
    else:
        fb = f.f(chi.x_plus, np.zeros_like(chi.x_plus))
        prob = 1.0 - rho
    return empty * fb * cauchy_density(0.0, rho) / (prob * chi.a_n)


def verify_ibp_identity(
    f: TestFunction,
    side: str,
    n: int,
    m: int,
    p,
    kappa: float,
    N: int,
    rng: np.random.Generator,
    chunk: int = 1 << 16,
) -> IBPReport:
    """Estimate ``E[d_side f(chi_n)]`` and ``E[f(chi_n) H^side_{n,m}(1)]`` on common noise.

    The z-score is computed from the per-sample difference, so shared noise
    cancels from its variance.  In Cauchy mode the report also carries the
    boundary term of :func:`cauchy_boundary_term` and the z-score after
    subtracting it from the weighted side.
    """
    from .chi_approx import build_chi, check_kappa, NoiseRecord

    if m < n:
        raise LevelOrder(f"need m >= n, got m={m}, n={n}")
    check_kappa(kappa, p)
    mode = mode_for(p)
    kp, km = (1, 0) if side == "+" else (0, 1)
    weight = iterate_H(kp, km, mode)
    deriv = f.d_plus if side == "+" else f.d_minus
    sums = np.zeros(5)
    sq = np.zeros(5)
    done = 0
    while done < N:
        size = min(chunk, N - done)
        noise = NoiseRecord.draw(p, m, rng, size)
        chi = build_chi(noise, n, p, kappa)
        lhs = deriv(chi.x_plus, chi.x_minus)
        rhs = f.f(chi.x_plus, chi.x_minus) * eval_weight(weight, chi, noise, m)
        if noise.cauchy:
            bnd = cauchy_boundary_term(f, side, chi, noise)
        else:
            bnd = np.zeros_like(lhs)
        cols = np.stack([lhs, rhs, lhs - rhs, bnd, lhs - rhs + bnd])
        sums += cols.sum(axis=1)
        sq += (cols**2).sum(axis=1)
        done += size
    mean = sums / N
    var = np.maximum(sq / N - mean**2, 0.0) * N / (N - 1)
    se = np.sqrt(var / N)
    return IBPReport(
        side=side, n=n, m=m, samples=N,
        lhs=float(mean[0]), lhs_stderr=float(se[0]),
        rhs=float(mean[1]), rhs_stderr=float(se[1]),
        z=_z(mean[2], se[2]), boundary=float(mean[3]),
        z_with_boundary=_z(mean[4], se[4]),
    )


def _z(mean: float, se: float) -> float:
    if se > 0:
        return float(mean / se)
    return 0.0 if mean == 0 else math.copysign(math.inf, mean)
