"""Level-n approximation of (sup X_T, sup X_T - X_T) from primitive noise.

For ``alpha != 1``::

    X_{+-,n} = sum_{i<=n} l_i**(1/alpha) * E_i**zeta * [G_i]^{+-} + a_n * eta_{+-}**zeta

with ``zeta = 1 - 1/alpha``, ``G_i = g(V_i)`` and ``a_n = T**(1/alpha) * kappa**n``.
For ``alpha == 1`` the stable draws ``S_i`` are stored directly and the
remainder is ``a_n * eta_{+-}`` with ``eta_{+-}`` distributed as ``+-S`` given
its sign.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from .errors import CapacityExceeded, DomainError, KappaTooSmall, LevelOrder
from .stable_core import (
    StableParams,
    cauchy_quantile,
    cms_g,
    open_uniform,
    positive_exponential,
    uniform_angle,
    validate_params,
)
from .stick_breaking import stick_from_uniforms
from .streams import block_rng

# relative slack for the kappa floor X_{n+1} >= kappa X_n under rounding
_FLOOR_RTOL = 1e-12


def minimal_kappa(p: StableParams) -> float:
    return max(p.rho, 1.0 - p.rho) ** (1.0 / p.alpha)


def default_kappa(p: StableParams) -> float:
    """Smallest admissible kappa plus a 0.01 margin, capped at 0.99."""
    return min(minimal_kappa(p) + 0.01, 0.99)


def check_kappa(kappa: float, p: StableParams) -> float:
    """Return ``kappa`` if ``kappa**alpha >= max(rho, 1-rho)``, else raise."""
    if not kappa < 1.0:
        raise DomainError(f"kappa={kappa!r} must be < 1")
    kmin = minimal_kappa(p)
    # equality allowed; compare on the kappa scale to avoid pow round-off
    if not kappa >= kmin and not math.isclose(kappa, kmin, rel_tol=1e-14):
        raise KappaTooSmall(kappa, kmin)
    return float(kappa)


def a_coef(p: StableParams, kappa: float, n) -> np.ndarray | float:
    return p.T ** (1.0 / p.alpha) * np.power(kappa, n)


def _cauchy_conditioned(rng: np.random.Generator, rho: float, size, sign: int) -> np.ndarray:
    v = open_uniform(rng, size)
    if sign > 0:
        u = (1.0 - rho) + rho * v
        return cauchy_quantile(u, rho)
    u = (1.0 - rho) * v
    return -cauchy_quantile(u, rho)


@dataclass(frozen=True)
class NoiseRecord:
    """Primitive randomness for a batch of paths.

    Per-index arrays have shape ``(batch, capacity)``; ``eta_plus`` and
    ``eta_minus`` have shape ``(batch,)``.  ``E``/``V`` are ``None`` in Cauchy
    mode and ``S_raw`` is ``None`` otherwise.
    """

    params: StableParams
    U: np.ndarray
    eta_plus: np.ndarray
    eta_minus: np.ndarray
    E: Optional[np.ndarray] = None
    V: Optional[np.ndarray] = None
    S_raw: Optional[np.ndarray] = None
    provenance: Optional[dict] = field(default=None, compare=False)

    @property
    def capacity(self) -> int:
        return self.U.shape[1]

    @property
    def batch(self) -> int:
        return self.U.shape[0]

    @property
    def cauchy(self) -> bool:
        return self.params.cauchy

    @cached_property
    def G(self) -> np.ndarray:
        if self.cauchy:
            raise AttributeError("no CMS split in Cauchy mode")
        return cms_g(self.V, self.params)

    @cached_property
    def S(self) -> np.ndarray:
        if self.cauchy:
            return self.S_raw
        return self.E ** self.params.zeta * self.G

    @cached_property
    def sign_source(self) -> np.ndarray:
        """Array whose sign decides the side of each index (G or S)."""
        return self.S_raw if self.cauchy else self.G

    @cached_property
    def lengths(self) -> np.ndarray:
        return stick_from_uniforms(self.params.T, self.U)[0]

    @classmethod
    def draw(
        cls, p: StableParams, capacity: int, rng: np.random.Generator, size: int = 1
    ) -> "NoiseRecord":
        shape = (size, capacity)
        U = open_uniform(rng, shape)
        if p.cauchy:
            S = cauchy_quantile(open_uniform(rng, shape), p.rho)
            ep = _cauchy_conditioned(rng, p.rho, size, +1)
            em = _cauchy_conditioned(rng, p.rho, size, -1)
            return cls(params=p, U=U, eta_plus=ep, eta_minus=em, S_raw=S)
        E = positive_exponential(rng, shape)
        V = uniform_angle(rng, shape)
        ep = positive_exponential(rng, size)
        em = positive_exponential(rng, size)
        return cls(params=p, U=U, eta_plus=ep, eta_minus=em, E=E, V=V)

    @classmethod
    def from_seed(
        cls, p: StableParams, capacity: int, seed: int, size: int = 1, block: int = 0, tag: int = 0
    ) -> "NoiseRecord":
        rec = cls.draw(p, capacity, block_rng(seed, block, tag), size)
        prov = {
            "alpha": repr(p.alpha), "rho": repr(p.rho), "T": repr(p.T),
            "capacity": capacity, "seed": str(int(seed)), "size": size,
            "block": block, "tag": tag,
        }
        kw = {k: getattr(rec, k) for k in _ARRAY_FIELDS}
        return cls(params=p, provenance=prov, **kw)

    def extend(self, rng: np.random.Generator, extra: int = 1) -> "NoiseRecord":
        """New record with ``extra`` more indices; existing entries are shared."""
        p = self.params
        tail = NoiseRecord.draw(p, extra, rng, self.batch)
        cat = lambda a, b: None if a is None else np.concatenate([a, b], axis=1)  # noqa: E731
        return NoiseRecord(
            params=p,
            U=cat(self.U, tail.U),
            eta_plus=self.eta_plus,
            eta_minus=self.eta_minus,
            E=cat(self.E, tail.E),
            V=cat(self.V, tail.V),
            S_raw=cat(self.S_raw, tail.S_raw),
        )

    def to_json(self) -> str:
        """Seed-based description; floats are regenerated, never serialised."""
        if self.provenance is None:
            raise ValueError("only seeded records (NoiseRecord.from_seed) serialise to JSON")
        return json.dumps(self.provenance, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "NoiseRecord":
        d = json.loads(text)
        p = validate_params(float(d["alpha"]), float(d["rho"]), float(d["T"]))
        return cls.from_seed(
            p, int(d["capacity"]), int(d["seed"]), int(d["size"]), int(d["block"]), int(d["tag"])
        )

    def save(self, path) -> None:
        arrays = {k: v for k, v in self.__dict__.items() if isinstance(v, np.ndarray)}
        arrays["params"] = np.array([self.params.alpha, self.params.rho, self.params.T])
        np.savez(path, **{k: v for k, v in arrays.items() if k in _ARRAY_FIELDS or k == "params"})

    @classmethod
    def load(cls, path) -> "NoiseRecord":
        with np.load(path) as z:
            a, r, T = z["params"]
            kw = {k: z[k] for k in _ARRAY_FIELDS if k in z}
        return cls(params=validate_params(a, r, T), **kw)


_ARRAY_FIELDS = ("U", "eta_plus", "eta_minus", "E", "V", "S_raw")


def contributions(noise: NoiseRecord, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-index terms ``l_i**(1/alpha) [S_i]^{+-}`` for ``i <= n``, shape ``(batch, n)``."""
    if n > noise.capacity:
        raise CapacityExceeded(f"level {n} needs {n} noise entries, have {noise.capacity}")
    scale = noise.lengths[:, :n] ** (1.0 / noise.params.alpha)
    S = noise.S[:, :n]
    return scale * np.maximum(S, 0.0), scale * np.maximum(-S, 0.0)


def eta_powers(noise: NoiseRecord) -> tuple[np.ndarray, np.ndarray]:
    if noise.cauchy:
        return noise.eta_plus, noise.eta_minus
    z = noise.params.zeta
    return noise.eta_plus**z, noise.eta_minus**z


@dataclass(frozen=True)
class ChiApprox:
    """``(X_{+,n}, X_{-,n})`` for a batch with increments from level ``n-1``."""

    n: int
    x_plus: np.ndarray
    x_minus: np.ndarray
    a_n: float
    delta_plus: np.ndarray
    delta_minus: np.ndarray
    params: StableParams
    kappa: float
    lengths: np.ndarray
    S: np.ndarray

    def terms(self, b: int = 0) -> list[tuple[float, float, str]]:
        """``(l_i, S_i, side)`` ledger for path ``b``."""
        out = []
        for l_i, s_i in zip(self.lengths[b], self.S[b]):
            side = "+" if s_i > 0 else ("-" if s_i < 0 else "0")
            out.append((float(l_i), float(s_i), side))
        return out


def _level_values(noise: NoiseRecord, n: int, kappa: float) -> tuple[np.ndarray, np.ndarray]:
    if n == 0:
        z = np.zeros(noise.batch)
        return z, z.copy()
    cp, cm = contributions(noise, n)
    ep, em = eta_powers(noise)
    an = a_coef(noise.params, kappa, n)
    return cp.sum(axis=1) + an * ep, cm.sum(axis=1) + an * em


def build_chi(noise: NoiseRecord, n: int, p: StableParams, kappa: float) -> ChiApprox:
    """Level ``n`` approximation by direct summation.

    ``n == 0`` returns the literal zeros; no weight may be evaluated there.
    """
    if n < 0:
        raise LevelOrder("level must be nonnegative")
    if n > noise.capacity:
        raise CapacityExceeded(f"level {n} exceeds noise capacity {noise.capacity}")
    xp, xm = _level_values(noise, n, kappa)
    pp, pm = _level_values(noise, n - 1, kappa) if n >= 1 else (xp, xm)
    return ChiApprox(
        n=n, x_plus=xp, x_minus=xm,
        a_n=float(a_coef(p, kappa, n)) if n else 0.0,
        delta_plus=xp - pp, delta_minus=xm - pm,
        params=p, kappa=kappa,
        lengths=noise.lengths[:, :n], S=noise.S[:, :n],
    )


def extend(chi: ChiApprox, noise: NoiseRecord) -> ChiApprox:
    """Move ``chi`` to level ``n+1`` by adding one increment."""
    n1 = chi.n + 1
    if n1 > noise.capacity:
        raise CapacityExceeded(f"level {n1} exceeds noise capacity {noise.capacity}")
    p, kappa = chi.params, chi.kappa
    ep, em = eta_powers(noise)
    scale = noise.lengths[:, n1 - 1] ** (1.0 / p.alpha)
    s = noise.S[:, n1 - 1]
    a_old = a_coef(p, kappa, chi.n) if chi.n else 0.0
    a_new = float(a_coef(p, kappa, n1))
    dp = scale * np.maximum(s, 0.0) + (a_new - a_old) * ep
    dm = scale * np.maximum(-s, 0.0) + (a_new - a_old) * em
    xp, xm = chi.x_plus + dp, chi.x_minus + dm
    if chi.n >= 1:
        floor_ok = (xp >= kappa * chi.x_plus * (1 - _FLOOR_RTOL)) & (
            xm >= kappa * chi.x_minus * (1 - _FLOOR_RTOL)
        )
        assert np.all(floor_ok), "kappa floor X_{n+1} >= kappa X_n violated"
    return ChiApprox(
        n=n1, x_plus=xp, x_minus=xm, a_n=a_new, delta_plus=dp, delta_minus=dm,
        params=p, kappa=kappa,
        lengths=noise.lengths[:, :n1], S=noise.S[:, :n1],
    )


def chi_levels(noise: NoiseRecord, n_max: int, kappa: float) -> tuple[np.ndarray, np.ndarray]:
    """``X_{+-,n}`` for ``n = 0..n_max`` stacked as ``(n_max+1, batch)`` arrays."""
    cp, cm = contributions(noise, n_max)
    ep, em = eta_powers(noise)
    an = a_coef(noise.params, kappa, np.arange(n_max + 1))[:, None]
    xp = np.zeros((n_max + 1, noise.batch))
    xm = np.zeros_like(xp)
    xp[1:] = np.cumsum(cp, axis=1).T
    xm[1:] = np.cumsum(cm, axis=1).T
    xp[1:] += an[1:] * ep
    xm[1:] += an[1:] * em
    return xp, xm


def simulate_joint(
    p: StableParams, kappa: float, n: int, rng: np.random.Generator, size: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """Level-n draws of ``(X_T, sup X_T) = (X_+ - X_-, X_+)``."""
    check_kappa(kappa, p)
    noise = NoiseRecord.draw(p, n, rng, size)
    xp, xm = _level_values(noise, n, kappa)
    return xp - xm, xp
