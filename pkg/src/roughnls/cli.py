"""Command-line experiment runner.

Every output file starts with a metadata header (command, config hash,
versions, tolerances) and is byte-identical for identical arguments.
Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .coeff_dynamics import (
    CoefficientState,
    IntegrationError,
    ODE_TIME_SCALE,
    a_from_interaction,
    conserved_report,
    evolve_a,
    integrate,
    log_phase_coefficients,
    trajectory,
)
from .field_eval import u_from_coefficients, u_from_state
from .frame_flow import cascade_diagnostic, curve_from_tangent, transport_x
from .gauss_sums import GaussSumParams, gauss_phase, gauss_sum
from .linear_talbot import PeriodicSpectrum, RationalTime, linear_evolve_direct, talbot_closed_form

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


class Output:
    """Writes headed files into an output directory, or the main table to stdout."""

    def __init__(self, args: argparse.Namespace):
        self.dir = Path(args.out) if args.out else None
        cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "func")}
        blob = json.dumps(cfg, sort_keys=True, default=str)
        self.header = {
            "command": args.command,
            "config_hash": hashlib.sha256(blob.encode()).hexdigest()[:16],
            "config": cfg,
            "versions": {"roughnls": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
            "tolerances": {k: cfg[k] for k in ("tol", "eta") if k in cfg},
        }
        if self.dir:
            self.dir.mkdir(parents=True, exist_ok=True)

    def _header_lines(self) -> str:
        h = self.header
        return "".join(f"# {k}: {json.dumps(h[k], sort_keys=True, default=str)}\n" for k in h)

    def csv(self, name: str, columns: list[str], rows) -> None:
        body = [",".join(columns)]
        for row in rows:
            body.append(",".join("%.17g" % float(v) for v in row))
        text = self._header_lines() + "\n".join(body) + "\n"
        if self.dir:
            (self.dir / name).write_text(text)
        else:
            sys.stdout.write(text)

    def json(self, name: str, payload: dict) -> Path | None:
        text = json.dumps({"header": self.header, **payload}, indent=1, sort_keys=True) + "\n"
        if self.dir:
            (self.dir / name).write_text(text)
            return self.dir / name
        sys.stdout.write(text)
        return None

    def text(self, name: str, lines) -> None:
        text = self._header_lines() + "".join(lines)
        if self.dir:
            (self.dir / name).write_text(text)


def _load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValueError(f"cannot read {path}: {exc}") from None


def _coeff_map(d: dict) -> dict[int, complex]:
    d = {k: v for k, v in d.items() if k != "header"}
    return {int(k): complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v) for k, v in d.items()}


def _parse_grid(spec: str) -> np.ndarray:
    try:
        x0, x1, n = spec.split(":")
        x0, x1, n = float(x0), float(x1), int(n)
    except ValueError:
        raise ValueError(f"grid must look like x0:x1:n, got {spec!r}") from None
    if n < 2 or not x1 > x0:
        raise ValueError("grid needs n >= 2 and x1 > x0")
    return np.linspace(x0, x1, n)


def load_state(path) -> CoefficientState:
    return CoefficientState.from_dict(_load_json(path))


def cmd_gauss(args, out: Output) -> int:
    G = gauss_sum(GaussSumParams(-args.p, args.m, args.q))
    if args.q % 2 and math.gcd(args.p, args.q) == 1:
        phase = gauss_phase(args.p, args.m, args.q)
    else:
        phase = math.atan2(G.imag, G.real)
    out.csv("gauss.csv", ["real", "imag", "modulus", "phase"], [[G.real, G.imag, abs(G), phase]])
    return EXIT_OK


def cmd_talbot(args, out: Output) -> int:
    spec = PeriodicSpectrum.load(args.spectrum)
    t = RationalTime(args.p, args.q)
    x = -0.5 + np.arange(args.grid) / args.grid
    closed = talbot_closed_form(spec, t, x, args.eta)
    oracle = np.abs(linear_evolve_direct(spec, t.value, x))
    out.csv("talbot.csv", ["x", "abs_u_closed", "abs_u_oracle"], np.column_stack([x, closed, oracle]))
    return EXIT_OK


def cmd_evolve(args, out: Output) -> int:
    if not (args.t0 > 0 and args.t1 > 0):
        raise ValueError("t0 and t1 must be positive")
    data = _coeff_map(_load_json(args.data))
    tau0, tau1 = 1.0 / args.t0, 1.0 / args.t1
    if args.mode == "line":
        N = args.N if args.N is not None else max((abs(j) for j in data), default=0)
        state = CoefficientState.line(data, tau0, N)
    else:
        M = args.M if args.M is not None else (max(data) + 1 if data else 0)
        if M < 1:
            raise ValueError("periodic mode needs M >= 1")
        vals = np.zeros(M, dtype=complex)
        for j, v in data.items():
            vals[j % M] = v
        state = CoefficientState.periodic(vals, tau0)
    if not data:
        if out.dir:
            out.json("trajectory.json", {"snapshots": []})
            out.json("state.json", state.with_coeffs(state.coeffs, tau1).to_dict())
        out.csv("conserved.csv", _REPORT_COLUMNS, [])
        return EXIT_OK
    taus = np.geomspace(tau0, tau1, args.steps + 1)
    states = trajectory(state, taus, args.tol, max_steps=args.max_steps)
    if out.dir:
        out.json("trajectory.json", {"snapshots": [s.to_dict() for s in states]})
        out.json("state.json", states[-1].to_dict())
    out.csv("conserved.csv", _REPORT_COLUMNS, [_report_row(conserved_report(s)) for s in states])
    return EXIT_OK


_REPORT_COLUMNS = ["tau", "m0", "cl1", "cl2", "cl3", "moment2", "energy", "energy_flux"]


def _report_row(r) -> list[float]:
    return [float("nan") if v is None else v for v in
            (r.tau, r.m0, r.cl1, r.cl2, r.cl3, r.moment2, r.energy, r.energy_flux)]


def cmd_field(args, out: Output) -> int:
    state = load_state(args.state)
    if not args.t > 0:
        raise ValueError("t must be positive")
    x = _parse_grid(args.grid)
    if args.picture == "interaction":
        target = ODE_TIME_SCALE / args.t
        if not math.isclose(target, state.tau, rel_tol=1e-14):
            state = integrate(state, target, args.tol)
        A, t = a_from_interaction(state)
        u = u_from_coefficients(A, t, x)
    else:
        if not math.isclose(1.0 / args.t, state.tau, rel_tol=1e-14):
            state = integrate(state, 1.0 / args.t, args.tol)
        u = u_from_state(state, x)
    out.csv("field.csv", ["x", "re_u", "im_u", "abs_u"], np.column_stack([x, u.real, u.imag, np.abs(u)]))
    return EXIT_OK


def _coefficients_at(a: dict, t: float, tau_start: float | None, tol: float) -> dict:
    if tau_start is None:
        return log_phase_coefficients(a, t, "dynamic")
    t0 = 1.0 / tau_start
    N = max((abs(j) for j in a), default=0) + 2
    return evolve_a(log_phase_coefficients(a, t0, "dynamic"), t0, t, N, tol)


def cmd_filament(args, out: Output) -> int:
    if not args.t > 0:
        raise ValueError("t must be positive")
    a = _coeff_map(_load_json(args.data))
    A = _coefficients_at(a, args.t, args.tau_start, args.tol)
    x = _parse_grid(args.grid)
    ufun = lambda y: u_from_coefficients(A, args.t, y)
    field = transport_x(ufun(x), x, u_mid=ufun, t=args.t)
    curve = curve_from_tangent(field)
    cols = ["x", "T1", "T2", "T3", "chi1", "chi2", "chi3"]
    out.csv("filament.csv", cols, np.column_stack([x, field.T, curve.points]))
    out.text("curve.txt", ["%.17g %.17g %.17g\n" % tuple(p) for p in curve.points])
    return EXIT_OK


def cmd_cascade(args, out: Output) -> int:
    if not 0 < args.tmin < args.tmax:
        raise ValueError("need 0 < tmin < tmax")
    ts = np.geomspace(args.tmax, args.tmin, args.steps)
    res = cascade_diagnostic({-1: args.a, 1: args.a}, ts, N=args.N, tau_start=args.tau_start,
                             tol=args.tol, L=args.window)
    out.csv("cascade.csv", ["t", "sup", "window"], [[r["t"], r["sup"], r["window"]] for r in res["rows"]])
    if out.dir:
        out.json("cascade_fit.json", {k: res[k] for k in ("slope", "slope_se", "intercept", "tau_start", "N")})
    return EXIT_OK


def cmd_rogue(args, out: Output) -> int:
    from .rogue_experiment import RogueConfig, build_bump_coefficients, run_linear, run_nonlinear, scale_spectrum

    cfg = RogueConfig.from_dict({k: v for k, v in _load_json(args.config).items() if k != "header"})
    spec = build_bump_coefficients(cfg, args.K)
    if args.l1 is not None:
        spec = scale_spectrum(spec, args.l1)
    rep = run_linear(cfg, spec)
    if args.nonlinear:
        rep = run_nonlinear(cfg, spec, tol=args.tol, K_nl=args.K_nl, tau_start=args.tau_start, linear=rep)
    out.json("rogue_report.json", rep.to_dict())
    if out.dir:
        out.csv("profile_tpq.csv", ["x", "abs_u", "abs_u_ref"], rep.profiles["tpq"])
        out.csv("profile_tilde.csv", ["x", "abs_u", "abs_u_ref"], rep.profiles["tilde"])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="roughnls", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        p.add_argument("--out", help="output directory (default: main table to stdout)")
        p.add_argument("--seed", type=int, default=0, help="recorded in the header; runs are deterministic")
        p.set_defaults(func=func)
        return p

    p = add("gauss", cmd_gauss, "Quadratic Gauss sum G(-p, m, q) = sum_l exp(2 pi i (-p l^2 + m l) / q); "
                                "|G| = sqrt(q) for odd q coprime to p.")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--q", type=int, required=True)

    p = add("talbot", cmd_talbot, "|exp(it Delta) u0| at t = p/(2 pi q) for a Dirac comb u0: closed form "
                                  "C |hat u0((pi q/p) s)| next to the direct kernel sum.")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--spectrum", required=True, help="JSON map k -> [re, im]")
    p.add_argument("--grid", type=int, default=512, help="points on one unit period")
    p.add_argument("--eta", type=float, default=0.1, help="spectral concentration parameter")

    p = add("evolve", cmd_evolve, "Integrate the resonant coefficient system for B_j(tau), tau = 1/t, "
                                  "with conserved quantities at each snapshot.")
    p.add_argument("--data", required=True, help="JSON map j -> [re, im], the values B_j(1/t0)")
    p.add_argument("--t0", type=float, required=True)
    p.add_argument("--t1", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--mode", choices=("line", "periodic"), default="line")
    p.add_argument("--N", type=int)
    p.add_argument("--M", type=int)
    p.add_argument("--steps", type=int, default=10, help="number of snapshot intervals")
    p.add_argument("--max-steps", type=int, default=None, help="integrator step budget (exit 3 when exhausted)")

    p = add("field", cmd_field, "u(t, x) = (it)^(-1/2) exp(i x^2/4t) conj(V(x/2t)) from a coefficient state.")
    p.add_argument("--state", required=True, help="state JSON as written by evolve")
    p.add_argument("--grid", required=True, help="x0:x1:n (write --grid=-1:1:101 when x0 is negative)")
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--picture", choices=("literal", "interaction"), default="literal",
                   help="literal: coefficients of V at tau = 1/t; interaction: B_k = A_k(t) at tau = 1/(4t), "
                        "the reading under which the evolved field solves the cubic equation")

    p = add("filament", cmd_filament, "Parallel frame and curve chi with d chi/dx = T from u = alpha + i beta.")
    p.add_argument("--data", required=True, help="JSON map j -> [re, im], the t -> 0 data a_j")
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--grid", required=True, help="x0:x1:n (write --grid=-1:1:101 when x0 is negative)")
    p.add_argument("--tau-start", type=float, default=None,
                   help="integrate the remainders from this tau (default: log-phased data only)")
    p.add_argument("--tol", type=float, default=1e-10)

    p = add("cascade", cmd_cascade, "Windowed sup of |hat T_x|^2 over B(+-1/t, sqrt t) for a_{-1} = a_1.")
    p.add_argument("--tmin", type=float, required=True)
    p.add_argument("--tmax", type=float, required=True)
    p.add_argument("--steps", type=int, default=5)
    p.add_argument("--a", type=float, default=0.2)
    p.add_argument("--N", type=int, default=5)
    p.add_argument("--tau-start", type=float, default=1e3)
    p.add_argument("--window", type=float, default=8.0)
    p.add_argument("--tol", type=float, default=1e-10)

    p = add("rogue", cmd_rogue, "Bump-spectrum Dirac comb: small waves at t_{p,q}, a tall peak at t_{p~,q~}.")
    p.add_argument("--config", required=True, help="JSON with eta, p, q, s, beta, p_tilde, q_tilde")
    p.add_argument("--K", type=int, default=None, help="coefficient cutoff (default: smallest passing the tail check)")
    p.add_argument("--l1", type=float, default=None, help="rescale so that sum |alpha_k| equals this")
    p.add_argument("--nonlinear", action="store_true")
    p.add_argument("--K-nl", type=int, default=64)
    p.add_argument("--tau-start", type=float, default=None)
    p.add_argument("--tol", type=float, default=1e-10)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        out = Output(args)
        return args.func(args, out)
    except IntegrationError as exc:
        msg = f"numerical failure: {exc}"
        if exc.last_state is not None and args.out:
            path = Path(args.out) / "last_state.json"
            path.write_text(json.dumps(exc.last_state.to_dict(), indent=1, sort_keys=True) + "\n")
            msg += f" (last good state: {path})"
        print(msg, file=sys.stderr)
        return EXIT_NUMERICAL
    except (FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, KeyError, TypeError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
