"""Physical-space evaluation of u(x, t) from coefficient states, plus special solutions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coeff_dynamics import CoefficientState, a_from_b
from .linear_talbot import free_propagator_delta


@dataclass
class FieldSample:
    x: float
    t: float
    value: complex

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError("u is only evaluated for t > 0")


def v_eval(state: CoefficientState, y):
    """V(y, tau) = sum_j B_j exp(i j y) for a line state."""
    if state.mode != "line":
        raise ValueError("V is a function only for line states")
    y = np.asarray(y, dtype=float)
    return np.exp(1j * np.multiply.outer(y, state.indices)) @ state.coeffs


def u_from_state(state: CoefficientState, x):
    """u(x, t) = (it)^{-1/2} exp(i x^2 / 4t) conj(V(x / 2t, 1/t)) with t = 1/tau."""
    t = 1.0 / state.tau
    x = np.asarray(x, dtype=float)
    pref = np.exp(1j * (x * x / (4.0 * t) - math.pi / 4.0)) / math.sqrt(t)
    return pref * np.conj(v_eval(state, x / (2.0 * t)))


def u_from_coefficients(A: dict, t: float, x):
    """sum_j A_j (it)^{-1/2} exp(i (x - j)^2 / 4t)."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape, dtype=complex)
    for j, a in A.items():
        if a:
            out = out + a * free_propagator_delta(x, t, j)
    return out


def omega_eval(state: CoefficientState, xi):
    """omega(xi, t) = sum_j A_j(t) exp(i j xi); 2 pi-periodic."""
    A = a_from_b(state)
    j = np.array(list(A), dtype=float)
    vals = np.array(list(A.values()), dtype=complex)
    xi = np.asarray(xi, dtype=float)
    return np.exp(1j * np.multiply.outer(xi, j)) @ vals


def u_M_eval(c: float, x, t: float, K: int):
    """c * sum_{|k| <= K} exp(i t k^2 + i k x)."""
    if K < 0:
        raise ValueError("K must be >= 0")
    k = np.arange(-K, K + 1, dtype=float)
    x = np.asarray(x, dtype=float)
    return c * (np.exp(1j * np.multiply.outer(x, k)) @ np.exp(1j * t * k * k))


def self_similar(c0: float, x, t: float):
    """c0 t^{-1/2} exp(i x^2 / 4t); solves the equation with gauge M(t) = c0^2 / t."""
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    x = np.asarray(x, dtype=float)
    return c0 / math.sqrt(t) * np.exp(1j * x * x / (4.0 * t))


def nls_residual(u, x, t: float, h: float, gauge=lambda t: 0.0):
    """Centered-difference residual of u_t - i (u_xx + (|u|^2 - M(t)) u) at (x, t).

    ``u`` is a callable u(x, t); second order in h.
    """
    x = np.asarray(x, dtype=float)
    u0 = u(x, t)
    ut = (u(x, t + h) - u(x, t - h)) / (2 * h)
    uxx = (u(x + h, t) - 2 * u0 + u(x - h, t)) / (h * h)
    return ut - 1j * (uxx + (np.abs(u0) ** 2 - gauge(t)) * u0)


def galilean_boost(u, nu: float):
    """u^nu(x, t) = exp(-i t nu^2 + i nu x) u(x - 2 nu t, t)."""
    return lambda x, t: np.exp(-1j * t * nu * nu + 1j * nu * np.asarray(x)) * u(np.asarray(x) - 2 * nu * t, t)


def rescale(u, lam: float):
    """u_lambda(x, t) = lambda u(lambda x, lambda^2 t)."""
    return lambda x, t: lam * u(lam * np.asarray(x), lam * lam * t)


def c_from_angle(theta: float) -> float:
    """c >= 0 with sin(theta) = exp(-pi c^2 / 2), theta in (0, pi/2]."""
    if not 0.0 < theta <= math.pi / 2:
        raise ValueError(f"theta must lie in (0, pi/2], got {theta}")
    return math.sqrt(max(0.0, -(2.0 / math.pi) * math.log(math.sin(theta))))


def angle_from_c(c: float) -> float:
    if c < 0:
        raise ValueError("c must be nonnegative")
    return math.asin(math.exp(-math.pi * c * c / 2.0))


def polygon_c(M: int) -> float:
    """c_M with sin(2 pi / M) = exp(-pi c_M^2 / 2)."""
    if M < 3:
        raise ValueError(f"need M >= 3, got {M}")
    s = math.sin(2.0 * math.pi / M)
    if not 0.0 < s <= 1.0:
        raise ValueError(f"sin(2 pi / {M}) = {s} outside (0, 1]")
    return math.sqrt(max(0.0, -(2.0 / math.pi) * math.log(s)))
