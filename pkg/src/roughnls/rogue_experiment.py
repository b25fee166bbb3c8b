"""Small almost-periodic waves at one rational time, a large localized peak at another.

The datum is a Dirac comb whose 2 pi-periodic symbol is a narrow bump
f(xi) = p^beta psi(p xi / (2 pi eta)). At t = p / (2 pi q) the free flow
splits it into q small copies per unit length; at a time with a small
denominator q~ the copies are few and tall.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import roots_legendre

from .coeff_dynamics import ODE_TIME_SCALE, a_from_interaction, interaction_state, log_phase_coefficients, trajectory
from .linear_talbot import (
    PeriodicSpectrum,
    RationalTime,
    lattice_offset,
    linear_evolve_direct,
    talbot_closed_form,
    talbot_prefactor,
)

TAIL_RTOL = 1e-12


def standard_bump(x):
    """exp(1 - 1/(1 - x^2)) on (-1, 1), zero outside; equals 1 at 0."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - x[inside] ** 2))
    return out


@dataclass(frozen=True)
class BumpSpec:
    profile: Callable = standard_bump
    name: str = "standard"

    def __post_init__(self):
        probe = np.linspace(-1.5, 1.5, 301)
        v = np.asarray(self.profile(probe), dtype=float)
        if abs(float(self.profile(np.array([0.0]))[0]) - 1.0) > 1e-12:
            raise ValueError("bump profile must equal 1 at 0")
        if np.any(v < 0) or v.max() > 1.0 + 1e-12:
            raise ValueError("bump profile must be nonnegative with maximum 1")
        if np.any(v[np.abs(probe) > 1.0] != 0.0):
            raise ValueError("bump profile must vanish outside [-1, 1]")
        if np.abs(v - v[::-1]).max() > 1e-12:
            raise ValueError("bump profile must be even")

    def __call__(self, x):
        return np.asarray(self.profile(x), dtype=float)


@dataclass(frozen=True)
class RogueConfig:
    eta: float = 0.1
    p: int = 25
    q: int = 27
    s: float = 0.6
    beta: float = -0.5
    p_tilde: int = 1
    q_tilde: int = 3
    bump: BumpSpec = field(default_factory=BumpSpec)

    def __post_init__(self):
        if not 0.0 < self.eta < 0.25:
            raise ValueError(f"eta must lie in (0, 1/4), got {self.eta}")
        if not self.s > 0.5:
            raise ValueError(f"s must exceed 1/2, got {self.s}")
        if not self.beta < 0.5 - 1.5 * self.s:
            raise ValueError(f"beta must be < 1/2 - 3s/2 = {0.5 - 1.5 * self.s:g}, got {self.beta}")
        for name, (a, b) in {"(p, q)": (self.p, self.q), "(p~, q~)": (self.p_tilde, self.q_tilde)}.items():
            if a < 1 or b < 1 or b % 2 == 0 or math.gcd(a, b) != 1:
                raise ValueError(f"{name} = ({a}, {b}) must be positive, coprime, with odd denominator")
        if self.p_tilde >= self.q_tilde:
            raise ValueError("need p~ < q~")
        if abs(self.p / self.q - 1.0) > 0.2:
            raise ValueError(f"|p/q - 1| must be <= 0.2, got p/q = {self.p / self.q:.4g}")

    def warnings(self) -> list[str]:
        out = []
        if abs(self.p_tilde / self.q_tilde - 1.0) > 0.5:
            out.append(f"|p~/q~ - 1| = {abs(self.p_tilde / self.q_tilde - 1.0):.3g} exceeds 0.5")
        return out

    @property
    def t_pq(self) -> RationalTime:
        return RationalTime(self.p, self.q)

    @property
    def t_tilde(self) -> RationalTime:
        return RationalTime(self.p_tilde, self.q_tilde)

    @property
    def half_width(self) -> float:
        """Half-width 2 pi eta / p of the symbol's support."""
        return 2.0 * math.pi * self.eta / self.p

    @classmethod
    def from_dict(cls, d: dict) -> "RogueConfig":
        keys = {"eta", "p", "q", "s", "beta", "p_tilde", "q_tilde"}
        unknown = set(d) - keys
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("eta", "p", "q", "s", "beta", "p_tilde", "q_tilde")}


@dataclass
class RogueReport:
    amp_at_0_tpq: float
    amp_max_tpq: float
    amp_at_0_tilde: float
    zero_region_max_tpq: float
    period_check: float
    remainder_estimate: float
    meta: dict = field(default_factory=dict)
    profiles: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for k in ("amp_at_0_tpq", "amp_max_tpq", "amp_at_0_tilde", "zero_region_max_tpq",
                  "period_check", "remainder_estimate"):
            if not getattr(self, k) >= 0.0:
                raise ValueError(f"{k} must be nonnegative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("profiles")
        return d

    def scaled(self, factor: float) -> "RogueReport":
        """The linear report for the spectrum multiplied by factor > 0 (exact by linearity)."""
        if not factor > 0:
            raise ValueError("factor must be positive")
        amps = {k: getattr(self, k) * factor
                for k in ("amp_at_0_tpq", "amp_max_tpq", "amp_at_0_tilde", "zero_region_max_tpq")}
        meta = dict(self.meta, scaled_by=factor)
        profiles = {}
        for k, v in self.profiles.items():
            if k.startswith("u_"):
                profiles[k] = v * factor
            else:
                v = v.copy()
                v[:, 1:] *= factor
                profiles[k] = v
        return RogueReport(**amps, period_check=self.period_check, remainder_estimate=self.remainder_estimate,
                           meta=meta, profiles=profiles)


@lru_cache(maxsize=8)
def _legendre_nodes(n: int):
    return roots_legendre(n)


def _gauss_legendre(n: int, a: float, b: float):
    x, w = _legendre_nodes(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def _alpha(eta: float, p: int, beta: float, bump: BumpSpec, ks: np.ndarray, nodes: int | None = None) -> np.ndarray:
    """alpha_k = (1/pi) int_0^w f(xi) cos(k xi) d xi for the even symbol f, w = 2 pi eta / p."""
    w = 2.0 * math.pi * eta / p
    kmax = float(np.abs(ks).max()) if len(ks) else 0.0
    n = nodes or max(4000, int(2.0 * kmax * w) + 400)
    xi, wt = _gauss_legendre(n, 0.0, w)
    fw = p ** beta * bump(xi / w) * wt / math.pi
    out = np.empty(len(ks))
    step = max(1, 2**22 // n)
    for i in range(0, len(ks), step):
        out[i:i + step] = np.cos(np.outer(ks[i:i + step], xi)) @ fw
    return out


def suggest_K(eta: float, p: int, beta: float = 0.0, bump: BumpSpec | None = None,
              start: int = 256, limit: int = 2**20) -> int:
    """Smallest K on a doubling ladder with outer-decile tails below TAIL_RTOL of the peak."""
    bump = bump or BumpSpec()
    peak = abs(_alpha(eta, p, beta, bump, np.array([0.0]))[0])
    K = start
    while K <= limit:
        ks = np.arange(max(1, int(0.9 * K)), K + 1, dtype=float)
        if np.abs(_alpha(eta, p, beta, bump, ks)).max() <= TAIL_RTOL * peak:
            return K
        K *= 2
    raise ValueError(f"no K <= {limit} meets the tail condition")


def bump_coefficients(eta: float, p: int, beta: float = 0.0, K: int | None = None,
                      bump: BumpSpec | None = None) -> PeriodicSpectrum:
    """Fourier coefficients of f(xi) = p^beta psi(p xi / (2 pi eta)) for |k| <= K.

    The result is real and even. Raises ValueError, with a suggested K, when
    the outer decile of coefficients exceeds TAIL_RTOL of the peak.
    """
    if not 0.0 < eta < 0.25:
        raise ValueError(f"eta must lie in (0, 1/4), got {eta}")
    bump = bump or BumpSpec()
    if K is None:
        K = suggest_K(eta, p, beta, bump)
    ks = np.arange(0, K + 1, dtype=float)
    half = _alpha(eta, p, beta, bump, ks)
    peak = np.abs(half).max()
    tail = np.abs(half[int(0.9 * K):]).max() / peak if peak > 0 else 0.0
    if tail > TAIL_RTOL:
        raise ValueError(f"coefficient tail {tail:.3g} exceeds {TAIL_RTOL:g} of the peak at K={K}; "
                         f"try K={suggest_K(eta, p, beta, bump, start=2 * K)}")
    k = np.arange(-K, K + 1)
    alpha = np.concatenate([half[:0:-1], half])
    return PeriodicSpectrum(k, alpha.astype(complex))


def build_bump_coefficients(cfg: RogueConfig, K: int | None = None) -> PeriodicSpectrum:
    """Bump spectrum for a validated config; see bump_coefficients."""
    return bump_coefficients(cfg.eta, cfg.p, cfg.beta, K, cfg.bump)


def l2s_norm(spec: PeriodicSpectrum, s: float) -> float:
    w = (1.0 + spec.k.astype(float) ** 2) ** s
    return float(math.sqrt(np.sum(w * np.abs(spec.alpha) ** 2)))


def scale_spectrum(spec: PeriodicSpectrum, l1: float) -> PeriodicSpectrum:
    """Rescale so that sum |alpha_k| = l1."""
    cur = spec.l1()
    if cur == 0.0:
        raise ValueError("cannot rescale a zero spectrum")
    return PeriodicSpectrum(spec.k.copy(), spec.alpha * (l1 / cur))


def _ratio(a, b) -> float:
    return float(a / b) if b > 0 else 0.0


def measurement_grid(cfg: RogueConfig, per_cell: int = 32) -> np.ndarray:
    """One unit period [-1/2, 1/2) with per_cell points per 1/q~ cell and per 1/q cell times q~."""
    n = per_cell * cfg.q * cfg.q_tilde
    n += n % 2
    return -0.5 + np.arange(n) / n


def _measure(cfg: RogueConfig, x, mod_pq, mod_tilde) -> dict:
    n = len(x)
    i0 = int(np.argmin(np.abs(x)))
    shift = n // cfg.q
    far = np.abs(lattice_offset(x, cfg.q)) > 2.0 * cfg.eta / cfg.q
    peak = mod_pq.max()
    return {
        "amp_at_0_tpq": float(mod_pq[i0]),
        "amp_max_tpq": float(peak),
        "amp_at_0_tilde": float(mod_tilde[i0]),
        "zero_region_max_tpq": float(mod_pq[far].max()) if far.any() else 0.0,
        "period_check": _ratio(np.abs(np.roll(mod_pq, -shift) - mod_pq).max(), peak),
    }


def run_linear(cfg: RogueConfig, spectrum: PeriodicSpectrum, per_cell: int = 32) -> RogueReport:
    """Closed-form and direct-sum measurements at t_{p,q} and t_{p~,q~}."""
    x = measurement_grid(cfg, per_cell)
    t, tt = cfg.t_pq, cfg.t_tilde
    closed = talbot_closed_form(spectrum, t, x, cfg.eta)
    closed_t = talbot_closed_form(spectrum, tt, x, cfg.eta * cfg.p_tilde / cfg.p)
    u_o = linear_evolve_direct(spectrum, t.value, x)
    u_ot = linear_evolve_direct(spectrum, tt.value, x)
    oracle, oracle_t = np.abs(u_o), np.abs(u_ot)
    m = _measure(cfg, x, closed, closed_t)
    mo = _measure(cfg, x, oracle, oracle_t)
    # the closed form is exactly zero off the lattice cells; measure the oracle there
    m["zero_region_max_tpq"] = mo["zero_region_max_tpq"]
    m["period_check"] = mo["period_check"]
    pb = cfg.p ** cfg.beta
    meta = {
        "config": cfg.to_dict(),
        "warnings": cfg.warnings(),
        "grid_points": len(x),
        "K": int(spectrum.k.max()),
        "l1": spectrum.l1(),
        "l2s": l2s_norm(spectrum, cfg.s),
        "l2s_scaling": l2s_norm(spectrum, cfg.s) / cfg.p ** (cfg.beta + cfg.s - 0.5),
        "oracle": {k: v for k, v in mo.items()},
        "closed_vs_oracle_rel": _ratio(np.abs(closed - oracle).max(), oracle.max()),
        "closed_vs_oracle_rel_tilde": _ratio(np.abs(closed_t - oracle_t).max(), oracle_t.max()),
        "reading_bare_tpq": pb / math.sqrt(cfg.q),
        "reading_kernel_tpq": pb * talbot_prefactor(t),
        "reading_bare_tilde": pb / math.sqrt(cfg.q_tilde),
        "reading_narrative_tilde": cfg.p_tilde ** (cfg.beta - 0.5),
        "reading_kernel_tilde": pb * talbot_prefactor(tt),
        "ratio_tilde_over_max": _ratio(m["amp_at_0_tilde"], m["amp_max_tpq"]),
        "ratio_tilde_over_tpq": _ratio(m["amp_at_0_tilde"], m["amp_at_0_tpq"]),
    }
    meta["dichotomy"] = bool(meta["ratio_tilde_over_max"] > 2.5)
    cell = np.abs(x) <= 0.5 / cfg.q_tilde
    profiles = {
        "tpq": np.column_stack([x, closed, oracle]),
        "tilde": np.column_stack([x[cell], closed_t[cell], oracle_t[cell]]),
        "u_tpq": u_o,
        "u_tilde": u_ot,
    }
    return RogueReport(**m, remainder_estimate=0.0, meta=meta, profiles=profiles)


def _nonlinear_corrections(spectrum: PeriodicSpectrum, times, K_nl: int, tau_start: float, tol: float,
                           floor: float = 1e-17):
    """Sparse description of the nonlinear coefficients at each time.

    Returns (phase, corrections) per time with A_k = phase * alpha_k + d_k,
    where phase = exp(2 i m log t) is the common log phase and d_k is kept
    for |k| <= K_nl (integrated) and for modes whose own log phase moves
    them by more than ``floor``.
    """
    alpha = dict(zip(spectrum.k.tolist(), spectrum.alpha.tolist()))
    window = {k: v for k, v in alpha.items() if abs(k) <= K_nl}
    m_full = sum(abs(v) ** 2 for v in alpha.values())
    m_win = sum(abs(v) ** 2 for v in window.values())
    t_start = 1.0 / tau_start
    state = interaction_state(log_phase_coefficients(window, t_start, "dynamic"), t_start, K_nl)
    slow = sorted((ODE_TIME_SCALE / t for t in times), reverse=True)
    by_t = {}
    for st in trajectory(state, slow, tol):
        A, t = a_from_interaction(st)
        by_t[t] = A
    out = []
    for t in times:
        lt = math.log(t)
        phase = np.exp(2j * m_full * lt)
        A = by_t[min(by_t, key=lambda s: abs(s - t))]
        # the window evolves with its own mass; restore the full-mass common phase
        fix = np.exp(2j * (m_full - m_win) * lt)
        d = {k: A[k] * fix - phase * window[k] for k in window}
        for k, v in alpha.items():
            if k not in d and abs(v) ** 3 * abs(lt) > floor:
                d[k] = phase * v * (np.exp(-1j * abs(v) ** 2 * lt) - 1.0)
        out.append((phase, d))
    return out


def run_nonlinear(cfg: RogueConfig, spectrum: PeriodicSpectrum, tol: float = 1e-10, K_nl: int = 64,
                  tau_start: float | None = None, per_cell: int = 32, sensitivity: bool = False,
                  linear: RogueReport | None = None) -> RogueReport:
    """Linear report re-measured on the nonlinear field, with R_k integrated on |k| <= K_nl.

    R_k = 0 is imposed at tau_start (default 2 pi 10^3). Modes outside the
    window keep R_k = 0 and carry only their logarithmic phase.
    """
    tau_start = 2.0 * math.pi * 1e3 if tau_start is None else float(tau_start)
    times = [cfg.t_pq.value, cfg.t_tilde.value]
    if tau_start < max(1.0 / t for t in times):
        raise ValueError("tau_start must exceed 1/t at both measurement times")
    lin = linear if linear is not None else run_linear(cfg, spectrum, per_cell)
    x = measurement_grid(cfg, per_cell)
    u_lin = [lin.profiles["u_tpq"], lin.profiles["u_tilde"]]
    warn = list(lin.meta["warnings"])
    if spectrum.l1() > 0.1:
        msg = f"sum |alpha_k| = {spectrum.l1():.3g} is outside the small-data regime (<= 0.1)"
        warnings.warn(msg)
        warn.append(msg)

    def fields(ts):
        out = []
        for (phase, d), t, ul in zip(_nonlinear_corrections(spectrum, times, K_nl, ts, tol), times, u_lin):
            corr = linear_evolve_direct(PeriodicSpectrum.from_mapping(d), t, x) if d else 0.0
            out.append((phase * ul + corr, corr))
        return out

    res = fields(tau_start)
    u_nl = [u for u, _ in res]
    mod = [np.abs(u) for u in u_nl]
    m = _measure(cfg, x, mod[0], mod[1])
    sup_diff = [float(np.abs(a - b).max()) for a, b in zip(u_nl, u_lin)]
    prof = [_ratio(np.abs(np.abs(a) - np.abs(b)).max(), np.abs(b).max()) for a, b in zip(u_nl, u_lin)]
    norm3 = l2s_norm(spectrum, cfg.s) ** 3
    corr_sup = float(np.max(np.abs(res[0][1])))
    rem = corr_sup * math.sqrt(times[0]) / norm3 if norm3 > 0 else 0.0
    meta = {
        "config": cfg.to_dict(),
        "warnings": warn,
        "K_nl": K_nl,
        "tau_start": tau_start,
        "tol": tol,
        "l1": spectrum.l1(),
        "sup_diff_tpq": sup_diff[0],
        "sup_diff_tilde": sup_diff[1],
        "correction_sup_tpq": corr_sup,
        "profile_change_tpq": prof[0],
        "profile_change_tilde": prof[1],
        "linear": lin.to_dict(),
        "ratio_tilde_over_max": _ratio(m["amp_at_0_tilde"], m["amp_max_tpq"]),
    }
    meta["dichotomy"] = bool(meta["ratio_tilde_over_max"] > 2.5)
    if sensitivity:
        u2 = [u for u, _ in fields(2.0 * tau_start)]
        meta["tau_start_sensitivity"] = max(float(np.abs(a - b).max()) for a, b in zip(u2, u_nl))
    profiles = {"tpq": np.column_stack([x, mod[0], np.abs(u_lin[0])]),
                "tilde": np.column_stack([x, mod[1], np.abs(u_lin[1])]),
                "u_tpq": u_nl[0], "u_tilde": u_nl[1]}
    return RogueReport(**m, remainder_estimate=rem, meta=meta, profiles=profiles)
