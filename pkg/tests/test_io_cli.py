import json

import numpy as np
import pytest

from wstate_optomech import io as fio
from wstate_optomech.cli import main
from wstate_optomech.dynamics import PulseShape, TimeGrid, evolve_emission
from wstate_optomech.model import SystemParams
from wstate_optomech.schedule import CrabSchedule


def crab():
    return CrabSchedule(T=10.0, g0_fixed=1.0, A=[[1.5, -0.5], [0.2, 0.9]], r=[0.25, 0.75], seed=1)


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


# -------------------------------------------------------------------- io

def test_schedule_file_roundtrip_is_idempotent(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    fio.save_schedule(a, crab())
    fio.save_schedule(b, fio.load_schedule(a))
    assert a.read_bytes() == b.read_bytes()
    d = json.loads(a.read_text())
    assert d["format_version"] == fio.FORMAT_VERSION and d["kind"] == "crab" and d["m"] == 2


def test_unknown_format_version_rejected(tmp_path):
    d = crab().to_dict()
    d["format_version"] = 99
    with pytest.raises(ValueError, match="version"):
        fio.load_schedule(write(tmp_path / "s.json", d))


def test_atomic_write_leaves_no_temp_files(tmp_path):
    fio.atomic_write(tmp_path / "sub" / "x.txt", "hello")
    assert [p.name for p in (tmp_path / "sub").iterdir()] == ["x.txt"]


def test_csv_layouts_and_precision(tmp_path):
    p = SystemParams(n=2, kappa0=10.0)
    grid = TimeGrid(10.0, 1024)
    traj = evolve_emission(p, crab(), [0, 0.6, 0.8, 0], grid)
    text = fio.trajectory_csv(traj, "units: g0")
    lines = text.splitlines()
    assert lines[0] == "# units: g0"
    assert lines[1] == "t,re_d0,im_d0,re_d1,im_d1,re_d2,im_d2,re_dm,im_dm,norm2,flux_out_cum"
    assert len(lines) == grid.N + 3
    pulse = PulseShape(grid, np.full(grid.N + 1, 1 / 3 + 0.1j))
    path = fio.atomic_write(tmp_path / "p.csv", fio.pulse_csv(pulse))
    assert path.read_text().splitlines()[1] == "0,0.33333333333333331,0.10000000000000001"
    t, f = fio.read_pulse_csv(path)
    np.testing.assert_array_equal(f, pulse.samples)
    np.testing.assert_array_equal(t, grid.times)


# ------------------------------------------------------------------- cli

@pytest.fixture
def setup(tmp_path):
    sched = tmp_path / "schedule.json"
    fio.save_schedule(sched, crab())
    cfg = {"system": {"n": 2, "kappa0": 10.0, "kappa": 0.0, "gamma_m": 1e-3},
           "schedule": {"file": "schedule.json"}, "grid": {"N": 4096},
           "targets": [[0.6, 0.8], "empty"]}
    return tmp_path, cfg


def test_verify_passes_and_flipped_sign_fails(tmp_path, capsys):
    assert main(["verify", "--out", str(tmp_path / "v")]) == 0
    report = json.loads((tmp_path / "v" / "verify_report.json").read_text())
    antisym = next(c for c in report["checks"] if "V+V^T" in c["name"])
    assert report["passed"] and antisym["value"] < 1e-8
    assert main(["verify", "--flip-io-sign", "--out", str(tmp_path / "f")]) == 1
    out = capsys.readouterr().out
    assert "[FAIL] photon ledger" in out


def test_emit_writes_csvs_and_empty_state_is_silent(setup):
    tmp, cfg = setup
    rc = main(["emit", "--config", write(tmp / "c.json", cfg), "--out", str(tmp / "o")])
    assert rc == 0
    empty = np.loadtxt(tmp / "o" / "emit_1_pulse.csv", delimiter=",", comments="#", skiprows=2)
    assert np.all(empty[:, 1:] == 0)
    traj = np.loadtxt(tmp / "o" / "emit_1_trajectory.csv", delimiter=",", comments="#", skiprows=2)
    assert np.all(traj[:, 1:] == 0)


def test_inject_emitted_pulse(setup, capsys):
    tmp, cfg = setup
    main(["emit", "--config", write(tmp / "c.json", cfg), "--out", str(tmp / "o")])
    cfg["inject"] = {"pulse": "o/emit_0_pulse.csv"}
    cfg["targets"] = [[0.6, 0.8]]
    assert main(["inject", "--config", write(tmp / "c2.json", cfg), "--out", str(tmp / "i")]) == 0
    assert (tmp / "i" / "inject_trajectory.csv").exists()
    assert "F_1 = " in capsys.readouterr().out


def test_roundtrip_prints_fidelities(setup, capsys):
    tmp, cfg = setup
    cfg["targets"] = [[0.6, 0.8], {"re": [0.6, 0.0], "im": [0.0, 0.8]}]
    assert main(["roundtrip", "--config", write(tmp / "c.json", cfg), "--out", str(tmp / "r")]) == 0
    out = capsys.readouterr().out
    assert "F_1 = " in out and "F_2 = " in out
    summary = json.loads((tmp / "r" / "roundtrip.json").read_text())
    assert len(summary["fidelities"]) == 2
    cfg["min_fidelity"] = 1.0
    assert main(["roundtrip", "--config", write(tmp / "c.json", cfg), "--out", str(tmp / "r")]) == 1


def test_optimize_is_byte_reproducible_and_seed_sensitive(tmp_path):
    cfg = {"system": {"n": 1, "kappa0": 10.0}, "schedule": {"crab": {"T": 8.0, "n_restarts": 1, "max_evals": 30}}}
    c = write(tmp_path / "c.json", cfg)
    for out in ("a", "b"):
        assert main(["optimize", "--config", c, "--seed", "3", "--out", str(tmp_path / out)]) == 0
    for name in ("schedule.json", "report.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    main(["optimize", "--config", c, "--seed", "4", "--out", str(tmp_path / "c")])
    r3 = json.loads((tmp_path / "a" / "schedule.json").read_text())["r"]
    r4 = json.loads((tmp_path / "c" / "schedule.json").read_text())["r"]
    assert r3 != r4


def test_raw_units_match_normalized(setup, capsys):
    tmp, cfg = setup
    raw = json.loads(json.dumps(cfg))
    raw["system"] = {"n": 2, "kappa0": 1e8, "kappa": 0.0, "gamma_m": 1e4, "g0": 1e7}
    raw["sweep"] = {"kind": "damping", "axis": "gamma_m", "values": [0.0, 1e4]}
    cfg["sweep"] = {"kind": "damping", "axis": "gamma_m", "values": [0.0, 1e-3]}
    assert main(["sweep", "--units", "raw", "--config", write(tmp / "raw.json", raw), "--out", str(tmp / "raw")]) == 0
    assert main(["sweep", "--config", write(tmp / "g0.json", cfg), "--out", str(tmp / "g0")]) == 0
    a = (tmp / "raw" / "sweep_gamma_m_optimized_n2.csv").read_text().splitlines()
    b = (tmp / "g0" / "sweep_gamma_m_optimized_n2.csv").read_text().splitlines()
    assert "g0_ref=10000000" in a[0] and a[1:] == b[1:]


def test_time_sweep_writes_one_csv_per_curve(tmp_path):
    cfg = {"system": {"n": 2, "kappa0": 10.0}, "schedule": {"crab": {"n_restarts": 1, "max_evals": 20}},
           "sweep": {"kind": "time", "n": [1, 2], "T": [6.0, 10.0], "methods": ["trivial"]}}
    assert main(["sweep", "--config", write(tmp_path / "c.json", cfg), "--out", str(tmp_path / "s")]) == 0
    names = sorted(p.name for p in (tmp_path / "s").iterdir())
    assert names == ["sweep_g0T_trivial_n1.csv", "sweep_g0T_trivial_n2.csv"]


@pytest.mark.parametrize("argv", [["emit"], ["nosuch"], ["verify", "--units", "furlongs"], ["verify", "--jobs", "0"]])
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv) == 2


def test_config_errors_exit_2(setup, capsys):
    tmp, cfg = setup
    (tmp / "bad.json").write_text("{not json")
    assert main(["emit", "--config", str(tmp / "bad.json")]) == 2
    assert main(["emit", "--config", str(tmp / "missing.json")]) == 2
    broken = dict(cfg, schedule={"file": "nowhere.json"})
    assert main(["emit", "--config", write(tmp / "c.json", broken)]) == 2
    unnormalized = dict(cfg, targets=[[1.0, 1.0]])
    assert main(["emit", "--config", write(tmp / "c.json", unnormalized)]) == 2
    assert main(["roundtrip", "--config", write(tmp / "c.json", cfg)]) == 2
    assert main(["optimize", "--config", write(tmp / "c.json", cfg)]) == 2
    assert main(["sweep", "--config", write(tmp / "c.json", cfg)]) == 2
    assert "config error" in capsys.readouterr().err
