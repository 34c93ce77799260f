"""Uniform stick-breaking on [0, T] and its closed-form moments."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betaln

from .errors import IndexOrder, MomentDoesNotExist
from .stable_core import open_uniform


@dataclass(frozen=True)
class StickPath:
    """Stick lengths ``l_1..l_n`` and remainder ``L_n`` built from uniforms.

    Arrays carry a leading batch axis: ``lengths`` and ``uniforms`` have shape
    ``(batch, n)`` and ``remainder`` has shape ``(batch,)``.
    """

    T: float
    lengths: np.ndarray
    remainder: np.ndarray
    uniforms: np.ndarray

    @property
    def n(self) -> int:
        return self.lengths.shape[-1]


def stick_from_uniforms(T: float, uniforms: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Lengths ``(batch, n)`` and remainders ``L_0..L_n`` ``(batch, n+1)``."""
    u = np.atleast_2d(np.asarray(uniforms, dtype=float))
    rem = np.empty((u.shape[0], u.shape[1] + 1))
    rem[:, 0] = T
    rem[:, 1:] = T * np.cumprod(u, axis=1)
    return rem[:, :-1] * (1.0 - u), rem


def sample_stick(T: float, n: int, rng: np.random.Generator, size: int = 1) -> StickPath:
    u = open_uniform(rng, (size, n))
    lengths, rem = stick_from_uniforms(T, u)
    return StickPath(T=float(T), lengths=lengths, remainder=rem[:, -1], uniforms=u)


def stick_moment(T: float, q: float, k: int) -> float:
    """``E[l_k**q] = T**q (1+q)**(-k)``."""
    if q <= -1.0:
        raise MomentDoesNotExist(f"E[l_k^q] is infinite for q={q!r}")
    if k < 1:
        raise IndexOrder("stick index starts at 1")
    return T**q * (1.0 + q) ** (-k)


def joint_stick_moment(T: float, exponents) -> float:
    """``E[prod_k l_k**p_k]`` as a product of beta functions."""
    p = [float(x) for x in exponents]
    tails = [sum(p[k + 1 :]) for k in range(len(p))]
    if any(pk <= -1.0 for pk in p) or any(qk <= -1.0 for qk in tails):
        raise MomentDoesNotExist("every exponent and every tail sum must exceed -1")
    log = sum(betaln(1.0 + pk, 1.0 + qk) for pk, qk in zip(p, tails))
    return T ** sum(p) * math.exp(log)


def stick_moment_triple(
    T: float, p: float, q: float, r: float, j: int, k: int, n: int, C: float = 1.0
) -> tuple[float, float]:
    """Exact ``E[l_j**p l_k**q l_n**r]`` and the shape ``C T^{p+q+r} theta^{p+q} (1+r)^{-n}``.

    Returns ``(exact, bound)``.
    """
    if not (1 <= j <= k <= n):
        raise IndexOrder(f"need 1 <= j <= k <= n, got {(j, k, n)}")
    if min(p, q, r) < 0:
        raise MomentDoesNotExist("exponents must be nonnegative")
    # with j == k or k == n the powers merge onto a single stick length
    exps: dict[int, float] = {}
    for idx, e in ((j, p), (k, q), (n, r)):
        exps[idx] = exps.get(idx, 0.0) + e
    exact = joint_stick_moment(T, [exps.get(i, 0.0) for i in range(1, n + 1)])
    theta = (1.0 + r + max(p, q)) / (1.0 + r + p + q)
    bound = C * T ** (p + q + r) * theta ** (p + q) * (1.0 + r) ** (-n)
    return exact, bound


def triple_case_table(T: float, p: float, q: float, r: float, j: int, k: int, n: int) -> float:
    """The four-case closed form for ``E[l_j^p l_k^q l_n^r]`` (j <= k <= n)."""
    if not (1 <= j <= k <= n):
        raise IndexOrder(f"need 1 <= j <= k <= n, got {(j, k, n)}")
    B = lambda a, b: math.exp(betaln(a, b))  # noqa: E731
    s = 1.0 + p + q + r
    if j < k < n:
        val = (
            B(1 + p, 1 + q + r) * (1 + q + r) ** (j - k + 1)
            * B(1 + q, 1 + r) * s ** (1 - j)
        )
    elif j < k == n:
        val = s ** (1 - j) * B(1 + p, 1 + q + r) * (1 + q + r) ** (j - k)
    elif j == k < n:
        val = s ** (1 - j) * B(1 + p + q, 1 + r) * (1 + q + r) ** (j - k)
    else:
        val = s ** (-j) * (1 + q + r) ** (j - k)
    return T ** (p + q + r) * (1 + r) ** (k - n) * val


def remainder_mixed_bound(T: float, p: float, q: float, r: float, k: int) -> float:
    """Upper bound on ``E[L_{k-1}^p l_k^q l_1^r]`` for ``k >= 2``."""
    if k < 2:
        raise IndexOrder("bound stated for k >= 2")
    if not (p + q > -1 and q > -1 and r > -1):
        raise MomentDoesNotExist("need p+q, q, r > -1")
    return (
        T ** (p + q + r)
        * math.exp(betaln(1 + p + q, 1 + r))
        / (1 + q)
        * (1 + p + q) ** (2 - k)
    )
