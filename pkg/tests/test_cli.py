import json
import math

import numpy as np
import pytest

from roughnls.cli import build_parser, load_state, main
from roughnls.coeff_dynamics import CoefficientState


def write_json(path, payload):
    path.write_text(json.dumps(payload))
    return str(path)


def read_csv(path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    cols = lines[0].split(",")
    rows = [[float(v) for v in l.split(",")] for l in lines[1:]]
    return cols, rows


def header(path):
    out = {}
    for line in path.read_text().splitlines():
        if not line.startswith("# "):
            break
        k, v = line[2:].split(": ", 1)
        out[k] = json.loads(v)
    return out


@pytest.fixture
def data_file(tmp_path):
    return write_json(tmp_path / "data.json", {"-1": [0.2, 0.0], "0": [0.1, 0.05], "2": [0.0, 0.1]})


def test_gauss_row(capsys):
    assert main(["gauss", "--p", "1", "--m", "0", "--q", "3"]) == 0
    text = capsys.readouterr().out
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    assert lines[0] == "real,imag,modulus,phase"
    re_, im_, mod, phase = map(float, lines[1].split(","))
    assert mod == pytest.approx(math.sqrt(3), rel=1e-15)
    assert phase == pytest.approx(-math.pi / 2, abs=1e-14)
    assert "# config_hash:" in text


def test_evolve_empty_data(tmp_path):
    out = tmp_path / "out"
    rc = main(["evolve", "--data", write_json(tmp_path / "e.json", {}), "--t0", "1", "--t1", "0.1",
               "--out", str(out)])
    assert rc == 0
    assert json.loads((out / "trajectory.json").read_text())["snapshots"] == []
    cols, rows = read_csv(out / "conserved.csv")
    assert cols[0] == "tau" and rows == []


def test_evolve_outputs_and_round_trip(tmp_path, data_file):
    out = tmp_path / "out"
    assert main(["evolve", "--data", data_file, "--t0", "1", "--t1", "0.2", "--N", "4", "--steps", "4",
                 "--tol", "1e-11", "--out", str(out)]) == 0
    snaps = json.loads((out / "trajectory.json").read_text())["snapshots"]
    assert len(snaps) == 5
    state = load_state(out / "state.json")
    assert state.tau == pytest.approx(5.0) and state.size == 4
    # the emitted state reloads to an equal state and serialises identically
    assert CoefficientState.from_dict(state.to_dict()).to_dict() == state.to_dict()
    assert np.array_equal(CoefficientState.from_dict(snaps[-1]).coeffs, state.coeffs)
    cols, rows = read_csv(out / "conserved.csv")
    cl1 = [r[cols.index("cl1")] for r in rows]
    assert max(cl1) - min(cl1) <= 1e-8 * cl1[0]
    h = header(out / "conserved.csv")
    assert h["command"] == "evolve" and h["tolerances"] == {"tol": 1e-11} and "numpy" in h["versions"]


def test_evolve_periodic(tmp_path):
    out = tmp_path / "out"
    data = write_json(tmp_path / "p.json", {str(j): [0.3, 0.0] for j in range(3)})
    assert main(["evolve", "--data", data, "--t0", "1", "--t1", "0.1", "--mode", "periodic", "--M", "3",
                 "--out", str(out)]) == 0
    state = load_state(out / "state.json")
    assert state.mode == "periodic" and np.allclose(np.abs(state.coeffs), 0.3, rtol=1e-8)


def test_determinism(tmp_path, data_file):
    dirs = [tmp_path / "a", tmp_path / "b"]
    for d in dirs:
        assert main(["evolve", "--data", data_file, "--t0", "1", "--t1", "0.3", "--N", "3", "--out", str(d)]) == 0
        assert main(["filament", "--data", data_file, "--t", "0.1", "--grid=-1:1:201", "--out", str(d / "f")]) == 0
    for name in ("trajectory.json", "state.json", "conserved.csv", "f/filament.csv", "f/curve.txt"):
        assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes()


def test_config_hash_tracks_arguments(tmp_path, data_file):
    hashes = []
    for t1 in ("0.3", "0.3", "0.4"):
        d = tmp_path / t1 / str(len(hashes))
        main(["evolve", "--data", data_file, "--t0", "1", "--t1", t1, "--out", str(d)])
        hashes.append(header(d / "conserved.csv")["config_hash"])
    assert hashes[0] == hashes[1] != hashes[2]


def test_field_from_state(tmp_path, data_file):
    out = tmp_path / "out"
    main(["evolve", "--data", data_file, "--t0", "1", "--t1", "0.5", "--N", "3", "--out", str(out)])
    assert main(["field", "--state", str(out / "state.json"), "--grid=-1:1:11", "--t", "0.5",
                 "--out", str(out / "f")]) == 0
    cols, rows = read_csv(out / "f" / "field.csv")
    assert cols == ["x", "re_u", "im_u", "abs_u"] and len(rows) == 11
    assert all(abs(math.hypot(r[1], r[2]) - r[3]) <= 1e-14 * max(1, r[3]) for r in rows)


def test_filament_curve_is_arclength(tmp_path, data_file):
    out = tmp_path / "out"
    assert main(["filament", "--data", data_file, "--t", "0.2", "--grid=-1:1:401", "--tau-start", "100",
                 "--out", str(out)]) == 0
    pts = np.loadtxt(out / "curve.txt")
    steps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    assert np.abs(steps - 2 / 400).max() <= 1e-6 * 2 / 400


def test_talbot_command(tmp_path):
    from roughnls.rogue_experiment import bump_coefficients
    spec = bump_coefficients(0.1, 2, 0.0, 4096)
    path = write_json(tmp_path / "s.json", {str(k): [a.real, a.imag] for k, a in zip(spec.k, spec.alpha)})
    out = tmp_path / "out"
    assert main(["talbot", "--p", "2", "--q", "3", "--spectrum", path, "--grid", "96", "--out", str(out)]) == 0
    _, rows = read_csv(out / "talbot.csv")
    rows = np.array(rows)
    assert np.abs(rows[:, 1] - rows[:, 2]).max() <= 1e-6 * rows[:, 2].max()


def test_cascade_command(tmp_path):
    out = tmp_path / "out"
    assert main(["cascade", "--tmin", "0.2", "--tmax", "0.5", "--steps", "3", "--N", "3", "--window", "6",
                 "--tau-start", "50", "--tol", "1e-8", "--out", str(out)]) == 0
    cols, rows = read_csv(out / "cascade.csv")
    assert cols == ["t", "sup", "window"] and len(rows) == 3
    fit = json.loads((out / "cascade_fit.json").read_text())
    assert {"slope", "slope_se"} <= set(fit)


def test_rogue_command(tmp_path):
    cfg = write_json(tmp_path / "cfg.json", {"eta": 0.1, "p": 4, "q": 5, "s": 0.6, "beta": -0.5,
                                              "p_tilde": 1, "q_tilde": 3})
    out = tmp_path / "out"
    assert main(["rogue", "--config", cfg, "--out", str(out)]) == 0
    rep = json.loads((out / "rogue_report.json").read_text())
    assert rep["meta"]["dichotomy"] is True and rep["amp_at_0_tpq"] > 0
    assert (out / "profile_tpq.csv").exists() and (out / "profile_tilde.csv").exists()


@pytest.mark.parametrize("argv", [
    ["evolve", "--data", "/nonexistent.json", "--t0", "1", "--t1", "0.5"],
    ["evolve", "--data", "{data}", "--t0", "-1", "--t1", "0.5"],
    ["field", "--state", "{data}", "--grid", "0:1:5", "--t", "1"],
    ["filament", "--data", "{data}", "--t", "0.1", "--grid", "1:0:5"],
    ["gauss", "--p", "1", "--m", "0", "--q", "0"],
    ["cascade", "--tmin", "0.5", "--tmax", "0.1"],
    ["rogue", "--config", "{bad_cfg}"],
])
def test_invalid_input_exit_code(tmp_path, data_file, argv, capsys):
    bad = write_json(tmp_path / "bad.json", {"eta": 0.1, "p": 10, "q": 27})
    argv = [a.format(data=data_file, bad_cfg=bad) for a in argv]
    assert main(argv) == 2
    assert "invalid input" in capsys.readouterr().err


def test_numerical_failure_exit_code(tmp_path):
    rng = np.random.default_rng(3)
    data = {str(j): list(rng.normal(size=2)) for j in range(-6, 7)}
    out = tmp_path / "out"
    rc = main(["evolve", "--data", write_json(tmp_path / "d.json", data), "--t0", "1", "--t1", "1e-4",
               "--tol", "1e-12", "--max-steps", "3", "--out", str(out)])
    assert rc == 3
    last = load_state(out / "last_state.json")
    assert 1.0 <= last.tau < 1e4


def test_help_lists_commands():
    text = build_parser().format_help()
    for cmd in ("gauss", "talbot", "evolve", "field", "filament", "cascade", "rogue"):
        assert cmd in text
