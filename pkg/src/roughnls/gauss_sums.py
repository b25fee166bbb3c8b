"""Quadratic Gauss sums G(a, b, c) = sum_{l=0}^{c-1} exp(2 pi i (a l^2 + b l) / c)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MAX_MODULUS = 10**6


@dataclass(frozen=True)
class GaussSumParams:
    a: int
    b: int
    c: int

    def __post_init__(self):
        if self.c < 1:
            raise ValueError(f"modulus c must be >= 1, got {self.c}")


def gauss_sum(params: GaussSumParams | tuple[int, int, int], max_modulus: int = MAX_MODULUS) -> complex:
    """Direct O(c) evaluation.

    Exponents are reduced modulo c in exact integer arithmetic before the
    trigonometric call, and the real and imaginary parts are accumulated
    with ``math.fsum``.
    """
    if not isinstance(params, GaussSumParams):
        params = GaussSumParams(*params)
    a, b, c = params.a, params.b, params.c
    if c > max_modulus:
        raise ValueError(f"modulus {c} exceeds summation bound {max_modulus}")
    # with a, b reduced mod c every intermediate stays below c^2 + c < 2^63
    l = np.arange(c, dtype=np.int64)
    r = ((a % c) * (l * l % c) + (b % c) * l) % c
    ang = 2.0 * math.pi * r / c
    return complex(math.fsum(np.cos(ang)), math.fsum(np.sin(ang)))


def gauss_sum_row(a: int, c: int, max_modulus: int = 4096) -> np.ndarray:
    """G(a, b, c) for b = 0, ..., c-1 at once, with the same exact exponent reduction."""
    if c < 1:
        raise ValueError(f"modulus c must be >= 1, got {c}")
    if c > max_modulus:
        raise ValueError(f"modulus {c} exceeds row bound {max_modulus}")
    l = np.arange(c, dtype=np.int64)
    r = ((a % c) * (l * l % c))[None, :] + np.outer(l, l) % c
    ang = 2.0 * math.pi * (r % c) / c
    return np.cos(ang).sum(axis=1) + 1j * np.sin(ang).sum(axis=1)


def gauss_phase(p: int, m: int, q: int) -> float:
    """Angle theta in (-pi, pi] with G(-p, m, q) = sqrt(q) exp(i theta).

    Only defined for odd q coprime to p, where |G(-p, m, q)| = sqrt(q).
    """
    if q < 1 or q % 2 == 0:
        raise ValueError(f"q must be a positive odd integer, got {q}")
    if math.gcd(p, q) != 1:
        raise ValueError(f"gcd(p, q) must be 1, got gcd({p}, {q}) = {math.gcd(p, q)}")
    g = gauss_sum(GaussSumParams(-p, m, q))
    theta = math.atan2(g.imag, g.real)
    # atan2 returns -pi for a negative real axis with imag == -0.0
    if theta <= -math.pi:
        theta += 2.0 * math.pi
    return theta
