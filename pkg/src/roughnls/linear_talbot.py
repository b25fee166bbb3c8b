"""Free Schrödinger evolution of Dirac-comb data at rational times.

Conventions
-----------
The data ``u0 = sum_k alpha_k delta(x - k)`` has the 2*pi-periodic Fourier
transform ``hat u0(xi) = sum_k alpha_k exp(-i k xi)``.

Two kernel normalizations appear:

* ``"kernel"`` (default): ``(it)^{-1/2} exp(i x^2 / 4t)``, the constant-free
  kernel used by the coefficient ansatz everywhere in this package.
* ``"physical"``: the true kernel of ``exp(it d_x^2)``, which is the above
  divided by ``sqrt(4 pi)``.

``dirac_comb_revival`` returns weights for the physical propagator, since
that is the one for which the Gauss-sum revival formula holds verbatim.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .gauss_sums import GaussSumParams, gauss_sum

KERNEL_SCALE = math.sqrt(4.0 * math.pi)
_CHUNK = 2**22


@dataclass(frozen=True)
class RationalTime:
    """t = p / (2 pi q) with gcd(p, q) = 1."""

    p: int
    q: int

    def __post_init__(self):
        if self.p < 1 or self.q < 1:
            raise ValueError(f"p and q must be positive, got p={self.p}, q={self.q}")
        if math.gcd(self.p, self.q) != 1:
            raise ValueError(f"p/q must be reduced, got {self.p}/{self.q}")

    @property
    def value(self) -> float:
        return self.p / (2.0 * math.pi * self.q)

    @property
    def q_odd(self) -> bool:
        return self.q % 2 == 1


@dataclass
class PeriodicSpectrum:
    """Finitely supported coefficients alpha_k, stored as parallel arrays."""

    k: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        self.k = np.asarray(self.k, dtype=np.int64)
        self.alpha = np.asarray(self.alpha, dtype=complex)
        if self.k.shape != self.alpha.shape or self.k.ndim != 1:
            raise ValueError("k and alpha must be 1-d arrays of equal length")
        if len(np.unique(self.k)) != len(self.k):
            raise ValueError("duplicate frequency indices")
        if not np.all(np.isfinite(self.alpha)):
            raise ValueError("non-finite coefficient")

    @classmethod
    def from_mapping(cls, coeffs: dict) -> "PeriodicSpectrum":
        ks = sorted(int(k) for k in coeffs)
        vals = []
        for k in ks:
            v = coeffs[k] if k in coeffs else coeffs[str(k)]
            vals.append(complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v))
        return cls(np.array(ks, dtype=np.int64), np.array(vals, dtype=complex))

    @classmethod
    def load(cls, path) -> "PeriodicSpectrum":
        return cls.from_mapping(json.loads(Path(path).read_text()))

    def to_mapping(self) -> dict:
        return {str(int(k)): [float(a.real), float(a.imag)] for k, a in zip(self.k, self.alpha)}

    def is_even_real(self, tol: float = 0.0) -> bool:
        lookup = dict(zip(self.k.tolist(), self.alpha.tolist()))
        for k, a in lookup.items():
            if abs(a.imag) > tol or abs(a - lookup.get(-k, 0.0)) > tol:
                return False
        return True

    def l1(self) -> float:
        return float(np.abs(self.alpha).sum())

    def hat(self, xi) -> np.ndarray:
        """hat u0(xi) = sum_k alpha_k exp(-i k xi)."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        out = np.empty(xi.shape, dtype=complex)
        flat, res = xi.ravel(), out.reshape(-1)
        step = max(1, _CHUNK // max(1, len(self.k)))
        for s in range(0, len(flat), step):
            res[s:s + step] = np.exp(-1j * np.outer(flat[s:s + step], self.k)) @ self.alpha
        return out

    def hat_grid(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """hat u0 on xi_j = 2 pi j / n for j = 0..n-1, via FFT. Needs n > span of k."""
        if n <= np.ptp(self.k):
            raise ValueError(f"grid size {n} aliases a spectrum spanning {np.ptp(self.k) + 1} modes")
        buf = np.zeros(n, dtype=complex)
        np.add.at(buf, self.k % n, self.alpha)
        return 2.0 * np.pi * np.arange(n) / n, np.fft.fft(buf)


@dataclass
class DeltaTrain:
    """Weighted Dirac masses on one period cell, repeated with ``period``."""

    support: np.ndarray
    weights: np.ndarray
    period: float = 1.0
    meta: dict = field(default_factory=dict)

    def pair(self, test_fn, shifts=range(-1, 2)) -> complex:
        """Pair the periodic train with a test function (sum over nearby periods)."""
        total = 0.0 + 0.0j
        for l in shifts:
            total += np.sum(self.weights * test_fn(self.support + l * self.period))
        return complex(total)


def free_propagator_delta(x, t: float, j=0):
    """(it)^{-1/2} exp(i (x - j)^2 / 4t), principal branch (phase -pi/4)."""
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    x = np.asarray(x, dtype=float)
    d = x - np.asarray(j, dtype=float)
    return np.exp(1j * (d * d / (4.0 * t) - math.pi / 4.0)) / math.sqrt(t)


def dirac_comb_revival(t: RationalTime) -> DeltaTrain:
    """exp(it Delta) applied to sum_k delta_k at t = p / (2 pi q).

    The result is q masses at m/q with weights G(-p, m, q)/q per unit period.
    """
    q = t.q
    w = np.array([gauss_sum(GaussSumParams(-t.p, m, q)) for m in range(q)], dtype=complex) / q
    return DeltaTrain(np.arange(q) / q, w, 1.0, {"p": t.p, "q": q, "propagator": "physical"})


def linear_evolve_direct(spec: PeriodicSpectrum, t: float, x, normalization: str = "kernel"):
    """sum_k alpha_k (it)^{-1/2} exp(i (x - k)^2 / 4t), the truncated-sum oracle."""
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    kf = spec.k.astype(float)
    out = np.empty(xs.shape, dtype=complex)
    step = max(1, _CHUNK // max(1, len(kf)))
    for s in range(0, len(xs), step):
        d = xs[s:s + step, None] - kf[None, :]
        out[s:s + step] = np.exp(1j * (d * d) / (4.0 * t)) @ spec.alpha
    out *= np.exp(-1j * math.pi / 4.0) / math.sqrt(t)
    if normalization == "physical":
        out /= KERNEL_SCALE
    elif normalization != "kernel":
        raise ValueError(f"unknown normalization {normalization!r}")
    return complex(out[0]) if scalar else out


def lattice_offset(x, q: int):
    """Signed offset of x from the nearest point of (1/q)Z, in [-1/2q, 1/2q]."""
    x = np.asarray(x, dtype=float)
    return x - np.round(x * q) / q


def xi_x(x, t: RationalTime):
    """(pi q / p) * d(x, Z/q)."""
    return np.pi * t.q / t.p * np.abs(lattice_offset(x, t.q))


def talbot_prefactor(t: RationalTime, normalization: str = "kernel") -> float:
    """Amplitude factor C with |exp(it Delta) u0 (x)| = C |hat u0(xi)| for concentrated data.

    Integrating the revival comb against hat u0 over one period produces
    (1/2pi) * (1/2t) * sqrt(q) / q = sqrt(q) / (2p) for the physical
    propagator. ``"bare"`` returns 1/sqrt(q), i.e. both factors dropped.
    """
    if normalization == "physical":
        return math.sqrt(t.q) / (2.0 * t.p)
    if normalization == "kernel":
        return KERNEL_SCALE * math.sqrt(t.q) / (2.0 * t.p)
    if normalization == "bare":
        return 1.0 / math.sqrt(t.q)
    raise ValueError(f"unknown normalization {normalization!r}")


def check_support(spec: PeriodicSpectrum, eta: float, p: int, rtol: float = 1e-9, oversample: int = 8) -> float:
    """Verify hat u0 is concentrated in [-2 pi eta / p, 2 pi eta / p] mod 2 pi.

    Returns the measured leakage ratio; raises ValueError if it exceeds rtol.
    """
    if not 0.0 < eta < 0.25:
        raise ValueError(f"eta must lie in (0, 1/4), got {eta}")
    span = int(np.ptp(spec.k)) + 1
    n = 1 << max(10, int(math.ceil(math.log2(oversample * span))))
    xi, h = spec.hat_grid(n)
    xi = np.where(xi > np.pi, xi - 2.0 * np.pi, xi)
    peak = np.abs(h).max()
    if peak == 0.0:
        return 0.0
    outside = np.abs(xi) > 2.0 * np.pi * eta / p
    leak = float(np.abs(h[outside]).max() / peak) if outside.any() else 0.0
    if leak > rtol:
        raise ValueError(
            f"spectrum not concentrated within 2*pi*eta/p = {2 * np.pi * eta / p:.3g}: leakage {leak:.3g}"
        )
    return leak


def talbot_closed_form(
    spec: PeriodicSpectrum,
    t: RationalTime,
    x,
    eta: float,
    normalization: str = "kernel",
    check: bool = True,
):
    """Modulus of the free evolution at t_{p,q} for spectrally concentrated data.

    Returns C |hat u0((pi q / p) s)| with s the signed offset of x from Z/q,
    and exactly 0 where |s| > 2 eta / q. Only the modulus is produced.
    """
    if not t.q_odd:
        raise ValueError(f"closed form needs odd q, got q={t.q}")
    if check:
        check_support(spec, eta, t.p)
    scalar = np.ndim(x) == 0
    s = np.atleast_1d(lattice_offset(x, t.q))
    out = np.zeros(s.shape)
    near = np.abs(s) <= 2.0 * eta / t.q
    if near.any():
        out[near] = np.abs(spec.hat(np.pi * t.q / t.p * s[near]))
    out *= talbot_prefactor(t, normalization)
    return float(out[0]) if scalar else out


def _split(a):
    c = 134217729.0 * a
    hi = c - (c - a)
    return hi, a - hi


def _frac_of_product(r: float, n: np.ndarray) -> np.ndarray:
    """frac(r * n) with the rounding error of the product recovered (Dekker)."""
    prod = r * n
    rh, rl = _split(np.float64(r))
    nh, nl = _split(n)
    err = ((rh * nh - prod) + rh * nl + rl * nh) + rl * nl
    return (prod - np.round(prod)) + err


def riemann_function(t: float, K: int) -> complex:
    """sum_{k=1}^{K} (exp(i t k^2) - 1) / k^2; the tail beyond K is at most 2/K."""
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    k = np.arange(1, K + 1, dtype=float)
    k2 = k * k
    # reduce t k^2 modulo 2 pi before exponentiating
    phase = 2.0 * np.pi * _frac_of_product(t / (2.0 * np.pi), k2)
    terms = (np.exp(1j * phase) - 1.0) / k2
    # small terms first
    return complex(math.fsum(terms.real[::-1]), math.fsum(terms.imag[::-1]))
