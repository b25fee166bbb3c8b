"""Fourier-coefficient dynamics of the pseudo-conformally transformed NLS.

The coefficients B_k(tau) obey

    i dB_k/dtau = (1/tau) [ sum_{NR_k} exp(-i tau w) B_j1 conj(B_j2) B_j3
                            + (2 m0 - |B_k|^2) B_k ],

with j3 = k - j1 + j2, w = 2 (k - j1)(j1 - j2), NR_k the triads with w != 0
and m0 = sum_j |B_j|^2.

Two storage modes are supported. ``line`` keeps |j| <= N and drops every
triad leaving the window. ``periodic`` stores one period B_0..B_{M-1} of an
M-periodic sequence; the lattice sum over triad offsets is taken over one
symmetric period of offsets (a = j1 - k, b = j1 - j2), with half weight on
the offsets +-M/2 when M is even, so that the wrapped system stays
translation invariant and conserves the per-period mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp


class IntegrationError(RuntimeError):
    """Raised when the integrator fails; carries the last accepted state."""

    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state


@dataclass
class CoefficientState:
    tau: float
    coeffs: np.ndarray
    mode: str = "line"
    size: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.mode not in ("line", "periodic"):
            raise ValueError(f"mode must be 'line' or 'periodic', got {self.mode!r}")
        self.coeffs = np.asarray(self.coeffs, dtype=complex).copy()
        expected = 2 * self.size + 1 if self.mode == "line" else self.size
        if self.mode == "periodic" and self.size < 1:
            raise ValueError("periodic mode needs M >= 1")
        if self.size < 0 or self.coeffs.shape != (expected,):
            raise ValueError(f"{self.mode} state with size {self.size} needs {expected} coefficients, "
                             f"got shape {self.coeffs.shape}")

    @property
    def indices(self) -> np.ndarray:
        if self.mode == "line":
            return np.arange(-self.size, self.size + 1)
        return np.arange(self.size)

    @classmethod
    def line(cls, coeffs: dict, tau: float, N: int | None = None) -> "CoefficientState":
        keys = [int(j) for j in coeffs]
        if N is None:
            N = max((abs(j) for j in keys), default=0)
        if any(abs(j) > N for j in keys):
            raise ValueError(f"coefficient index outside |j| <= {N}")
        b = np.zeros(2 * N + 1, dtype=complex)
        for j, v in coeffs.items():
            b[int(j) + N] = v
        return cls(tau, b, "line", N)

    @classmethod
    def periodic(cls, values, tau: float) -> "CoefficientState":
        values = np.asarray(values, dtype=complex)
        return cls(tau, values, "periodic", len(values))

    def as_mapping(self) -> dict[int, complex]:
        return {int(j): complex(b) for j, b in zip(self.indices, self.coeffs)}

    def get(self, j: int) -> complex:
        if self.mode == "periodic":
            return complex(self.coeffs[j % self.size])
        return complex(self.coeffs[j + self.size]) if abs(j) <= self.size else 0.0j

    def with_coeffs(self, coeffs, tau: float | None = None) -> "CoefficientState":
        return CoefficientState(self.tau if tau is None else tau, coeffs, self.mode, self.size)

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "mode": self.mode,
            "size": self.size,
            "coeffs": {str(int(j)): [b.real, b.imag] for j, b in zip(self.indices, self.coeffs)},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CoefficientState":
        size = int(d["size"])
        st = cls(float(d["tau"]), np.zeros(2 * size + 1 if d["mode"] == "line" else size), d["mode"], size)
        for j, (re, im) in d["coeffs"].items():
            j = int(j)
            st.coeffs[j + size if st.mode == "line" else j % size] = complex(re, im)
        return st


@dataclass
class LineData:
    """Finitely supported t -> 0 coefficient data a_j."""

    a: dict[int, complex]

    def __post_init__(self):
        self.a = {int(j): complex(v) for j, v in self.a.items()}

    @property
    def N(self) -> int:
        return max((abs(j) for j in self.a), default=0)

    def l1(self) -> float:
        return sum(abs(v) for v in self.a.values())

    def l2s(self, s: float = 0.0) -> float:
        return math.sqrt(sum(abs(j) ** (2 * s) * abs(v) ** 2 for j, v in self.a.items() if j or s == 0))


@dataclass
class ConservedReport:
    tau: float
    m0: float
    cl1: float
    cl2: float | None = None
    cl3: float | None = None
    moment2: float | None = None
    energy: float | None = None
    energy_flux: float | None = None
    m: float | None = None


def resonance_weight(k: int, j1: int, j2: int) -> int:
    """k^2 - j1^2 + j2^2 - j3^2 with j3 = k - j1 + j2."""
    return 2 * (k - j1) * (j1 - j2)


def _offsets(M: int) -> tuple[np.ndarray, np.ndarray]:
    if M % 2:
        h = (M - 1) // 2
        return np.arange(-h, h + 1), np.ones(M)
    h = M // 2
    w = np.ones(M + 1)
    w[0] = w[-1] = 0.5
    return np.arange(-h, h + 1), w


@lru_cache(maxsize=32)
def triad_table(mode: str, size: int):
    """Non-resonant triads as index arrays (k, j1, j2, j3), integer w and weights.

    Indices are storage positions. Built once per (mode, size); this is the
    O(size^3) object of the direct evaluation.
    """
    if mode == "line":
        n = 2 * size + 1
        k, j1, j2 = (g.ravel() for g in np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij"))
        j3 = k - j1 + j2
        w = 2 * (k - j1) * (j1 - j2)
        keep = (j3 >= 0) & (j3 < n) & (w != 0)
        weight = np.ones(int(keep.sum()))
        return k[keep], j1[keep], j2[keep], j3[keep], w[keep], weight
    offs, wts = _offsets(size)
    k, ia, ib = (g.ravel() for g in np.meshgrid(np.arange(size), np.arange(len(offs)), np.arange(len(offs)),
                                                indexing="ij"))
    a, b = offs[ia], offs[ib]
    keep = (a != 0) & (b != 0)
    k, a, b = k[keep], a[keep], b[keep]
    weight = (wts[ia] * wts[ib])[keep]
    return k, (k + a) % size, (k + a - b) % size, (k - b) % size, -2 * a * b, weight


def _nonresonant_sum(state: CoefficientState) -> np.ndarray:
    k, j1, j2, j3, w, weight = triad_table(state.mode, state.size)
    B = state.coeffs
    terms = weight * np.exp(-1j * state.tau * w) * B[j1] * np.conj(B[j2]) * B[j3]
    n = len(B)
    return np.bincount(k, terms.real, n) + 1j * np.bincount(k, terms.imag, n)


def rhs_triads(state: CoefficientState) -> np.ndarray:
    """dB/dtau from the explicit non-resonant triad sum plus the resonant term."""
    if not state.tau > 0:
        raise ValueError(f"tau must be positive, got {state.tau}")
    B = state.coeffs
    m0 = float(np.vdot(B, B).real)
    return -1j / state.tau * (_nonresonant_sum(state) + (2.0 * m0 - np.abs(B) ** 2) * B)


def _fft_size(N: int) -> int:
    return 1 << max(3, int(math.ceil(math.log2(4 * N + 2))))


def interaction_field(state: CoefficientState, L: int | None = None) -> np.ndarray:
    """Samples of W(y) = sum_j B_j exp(i tau j^2) exp(i j y) on y_n = 2 pi n / L (line mode).

    |W(-y)| is the modulus of the Schrödinger-picture field driven by the
    coefficient system, so quadratic and quartic integrals of it are the
    ones entering the energy law.
    """
    N = state.size
    L = L or _fft_size(N)
    j = state.indices
    buf = np.zeros(L, dtype=complex)
    buf[j % L] = state.coeffs * np.exp(1j * state.tau * (j * j))
    return np.fft.ifft(buf) * L


def rhs(state: CoefficientState) -> np.ndarray:
    """dB/dtau for every stored index.

    Line mode evaluates the full triad sum pseudo-spectrally: the sum over
    k - j1 + j2 - j3 = 0 equals exp(-i tau k^2) times the k-th Fourier
    coefficient of |W|^2 W, computed alias-free on >= 4N + 2 points. This is
    identical to the split non-resonant + resonant form. Periodic mode uses
    the triad table.
    """
    if not state.tau > 0:
        raise ValueError(f"tau must be positive, got {state.tau}")
    if state.mode == "periodic":
        return rhs_triads(state)
    N = state.size
    L = _fft_size(N)
    W = interaction_field(state, L)
    g = np.fft.fft(np.abs(W) ** 2 * W) / L
    j = state.indices
    return -1j / state.tau * np.exp(-1j * state.tau * (j * j)) * g[j % L]


def cl1(state: CoefficientState) -> float:
    return float(np.sum(np.abs(state.coeffs) ** 2))


def cl2(state: CoefficientState) -> float:
    if state.mode != "line":
        raise ValueError("sum_j j |B_j|^2 diverges for periodic states")
    return float(np.sum(state.indices * np.abs(state.coeffs) ** 2))


def cl3(state: CoefficientState) -> float:
    if state.mode != "periodic":
        raise ValueError("per-period mass needs a periodic state")
    return float(np.sum(np.abs(state.coeffs) ** 2))


def moment2(state: CoefficientState) -> float:
    if state.mode != "line":
        raise ValueError("sum_j j^2 |B_j|^2 diverges for periodic states")
    return float(np.sum(state.indices.astype(float) ** 2 * np.abs(state.coeffs) ** 2))


def _quartic(state: CoefficientState, m: float, oversample: int = 8) -> float:
    L = max(_fft_size(state.size), 1 << int(math.ceil(math.log2(oversample * (2 * state.size + 1)))))
    W = interaction_field(state, L)
    return float(2.0 * np.pi * np.mean((np.abs(W) ** 2 - m) ** 2))


def energy_E(state: CoefficientState, m: float | None = None) -> float:
    """E = int |V_y|^2 - (1/2 tau) int (|V|^2 - m)^2 over one period; m defaults to m0."""
    if state.mode != "line":
        raise ValueError("energy needs a compactly supported (line) state")
    m = cl1(state) if m is None else m
    return 2.0 * np.pi * moment2(state) - _quartic(state, m) / (2.0 * state.tau)


def energy_flux(state: CoefficientState, m: float | None = None) -> float:
    """dE/dtau = (1 / 2 tau^2) int (|V|^2 - m)^2."""
    if state.mode != "line":
        raise ValueError("energy needs a compactly supported (line) state")
    m = cl1(state) if m is None else m
    return _quartic(state, m) / (2.0 * state.tau ** 2)


def conserved_report(state: CoefficientState) -> ConservedReport:
    m0 = cl1(state)
    if state.mode == "periodic":
        return ConservedReport(state.tau, m0, m0, cl3=m0)
    return ConservedReport(state.tau, m0, m0, cl2=cl2(state), moment2=moment2(state),
                           energy=energy_E(state), energy_flux=energy_flux(state), m=m0)


class _StepLimit(Exception):
    pass


def _solve(state: CoefficientState, sigmas, tol: float, method: str, max_steps: int | None):
    B0 = state.coeffs
    scale = float(np.abs(B0).max()) if B0.size else 0.0
    evals = [0]
    last = [math.log(state.tau), B0]
    # generous bound on rhs calls per accepted step for the explicit methods offered
    budget = None if max_steps is None else 16 * max_steps

    def f(sigma, y):
        evals[0] += 1
        if budget is not None and evals[0] > budget:
            raise _StepLimit
        last[0], last[1] = sigma, y
        tau = math.exp(sigma)
        return tau * rhs(state.with_coeffs(y, tau))

    s0, s1 = math.log(state.tau), sigmas[-1]
    try:
        sol = solve_ivp(f, (s0, s1), B0, method=method, t_eval=sigmas, rtol=tol,
                        atol=tol * max(scale, 1e-300))
    except _StepLimit:
        raise IntegrationError(f"step budget of {max_steps} exhausted",
                               state.with_coeffs(last[1], math.exp(last[0]))) from None
    if sol.status != 0:
        raise IntegrationError(f"integration failed: {sol.message}",
                               state.with_coeffs(last[1], math.exp(last[0])))
    return sol, evals[0]


def integrate(state: CoefficientState, tau_end: float, tol: float = 1e-10,
              method: str = "RK45", max_steps: int | None = None) -> CoefficientState:
    """Advance (forward or backward) to tau_end in sigma = log tau with local error control."""
    if not tau_end > 0:
        raise ValueError(f"tau_end must be positive, got {tau_end}")
    if tau_end == state.tau or not np.any(state.coeffs):
        out = state.with_coeffs(state.coeffs, tau_end)
        out.meta = {"nfev": 0, "cl1_drift": 0.0}
        return out
    sol, nfev = _solve(state, [math.log(tau_end)], tol, method, max_steps)
    out = state.with_coeffs(sol.y[:, -1], tau_end)
    out.meta = {"nfev": nfev, "cl1_drift": cl1(out) - cl1(state), "method": method, "tol": tol}
    return out


def trajectory(state: CoefficientState, taus, tol: float = 1e-10,
               method: str = "RK45", max_steps: int | None = None) -> list[CoefficientState]:
    """States at each tau in ``taus`` (monotone, starting on the side of state.tau)."""
    taus = [float(t) for t in taus]
    if not taus:
        return []
    if not np.any(state.coeffs):
        return [state.with_coeffs(state.coeffs, t) for t in taus]
    sig = [math.log(t) for t in taus]
    if sig[0] == math.log(state.tau) and len(sig) == 1:
        return [state.with_coeffs(state.coeffs, taus[0])]
    sol, _ = _solve(state, sig, tol, method, max_steps)
    return [state.with_coeffs(sol.y[:, i], t) for i, t in enumerate(taus)]


def b_from_a(a: LineData | dict, t: float, N: int | None = None) -> CoefficientState:
    """B_j(tau) = conj(A_j(t)) exp(-i tau j^2 / 4) with tau = 1/t."""
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    data = a.a if isinstance(a, LineData) else {int(j): complex(v) for j, v in a.items()}
    tau = 1.0 / t
    st = CoefficientState.line({}, tau, N if N is not None else max((abs(j) for j in data), default=0))
    for j, v in data.items():
        if abs(j) > st.size:
            raise ValueError(f"index {j} outside window N={st.size}")
        st.coeffs[j + st.size] = np.conj(v) * np.exp(-1j * (tau * (j * j) / 4.0))
    return st


def a_from_b(state: CoefficientState) -> dict[int, complex]:
    """Inverse of b_from_a at t = 1/state.tau."""
    if state.mode != "line":
        raise ValueError("a_from_b needs a line state")
    j = state.indices
    A = np.conj(state.coeffs * np.exp(1j * (state.tau * (j * j) / 4.0)))
    return {int(jj): complex(v) for jj, v in zip(j, A)}


_PHASE_ALIASES = {"section3": "eight_pi", "section5": "mass_shift"}


def log_phase_coefficients(a: LineData | dict, t: float, convention: str = "mass_shift") -> dict[int, complex]:
    """a_j times a unimodular logarithmic phase.

    ``"eight_pi"`` (alias ``"section3"``): exp(i |a_j|^2 / (8 pi) log t).
    ``"mass_shift"`` (alias ``"section5"``): exp(i (|a_j|^2 - 2 sum_l |a_l|^2) log t).
    ``"dynamic"``: exp(i (2 sum_l |a_l|^2 - |a_j|^2) log t), the phase the
    coefficient flow itself generates for a single mode; the conjugate of
    ``"mass_shift"``.
    """
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    data = a.a if isinstance(a, LineData) else {int(j): complex(v) for j, v in a.items()}
    lt = math.log(t)
    convention = _PHASE_ALIASES.get(convention, convention)
    if convention == "eight_pi":
        return {j: v * np.exp(1j * abs(v) ** 2 / (8 * math.pi) * lt) for j, v in data.items()}
    if convention == "mass_shift":
        total = sum(abs(v) ** 2 for v in data.values())
        return {j: v * np.exp(1j * (abs(v) ** 2 - 2 * total) * lt) for j, v in data.items()}
    if convention == "dynamic":
        total = sum(abs(v) ** 2 for v in data.values())
        return {j: v * np.exp(1j * (2 * total - abs(v) ** 2) * lt) for j, v in data.items()}
    raise ValueError(f"unknown convention {convention!r}")


# The ODE above, read with B_k(s) = A_k(t) and s = 1/(4t), is exactly the
# coefficient system of u = sum_k A_k(t) exp(it d_x^2) delta_k for
# u_t = i (u_xx + |u|^2 u). The conjugated map b_from_a does not intertwine
# the ODE with this flow; the functions below do.
ODE_TIME_SCALE = 0.25


def interaction_state(a: LineData | dict, t: float, N: int | None = None) -> CoefficientState:
    """ODE state carrying B_k = A_k(t) at slow time 1/(4t)."""
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    data = a.a if isinstance(a, LineData) else {int(j): complex(v) for j, v in a.items()}
    return CoefficientState.line(data, ODE_TIME_SCALE / t, N)


def a_from_interaction(state: CoefficientState) -> tuple[dict[int, complex], float]:
    """Inverse of interaction_state: (A_k, t)."""
    if state.mode != "line":
        raise ValueError("a_from_interaction needs a line state")
    return state.as_mapping(), ODE_TIME_SCALE / state.tau


def evolve_a(a: LineData | dict, t_from: float, t_to: float, N: int | None = None,
             tol: float = 1e-10) -> dict[int, complex]:
    """Coefficients A_k(t_to) of the cubic flow started from A_k(t_from) = a_k on |k| <= N."""
    st = integrate(interaction_state(a, t_from, N), ODE_TIME_SCALE / t_to, tol)
    return a_from_interaction(st)[0]
