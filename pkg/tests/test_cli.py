import csv
import json
from pathlib import Path

import numpy as np
import pytest

from schrofield.cli import main
from schrofield.config import ConfigError, config_from_dict, parse_config
from schrofield.render import render_snapshots


def _write(tmp_path, name, cfg):
    path = tmp_path / name
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return str(path)


def _harmonic_cfg(**overrides):
    cfg = {
        "grid": {"n": 64, "x_min": -9.0, "x_max": 9.0},
        "potential": {"name": "harmonic", "omega": 1.0},
        "initial_state": "eigenstate:0",
        "integrator": "crank_nicolson",
        "dt": 0.002,
        "t_final": 0.04,
        "output": {"snapshot_stride": 10},
    }
    cfg.update(overrides)
    return cfg


def _read_series(out_dir):
    with open(Path(out_dir) / "series.csv", newline="") as fh:
        return list(csv.DictReader(fh))


def test_parse_minimal_config_defaults(tmp_path):
    path = _write(
        tmp_path,
        "min.json",
        {"grid": {"n": 24, "x_min": -4.0, "x_max": 4.0}, "potential": "harmonic",
         "initial_state": "eigenstate:0"},
    )
    cfg = parse_config(path)
    assert cfg.hbar == 1.0 and cfg.mass == 1.0
    assert cfg.boundary == "dirichlet"
    assert cfg.integrator == "spectral"


def test_parse_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="typo"):
        config_from_dict(
            {"grid": {"n": 8, "x_min": 0, "x_max": 1}, "typo": 1}
        )
    with pytest.raises(ConfigError, match="spacing"):
        config_from_dict({"grid": {"n": 8, "x_min": 0, "x_max": 1, "spacing": 0.1}})


def test_parse_rejects_unknown_preset():
    with pytest.raises(ConfigError, match="preset"):
        config_from_dict(
            {"grid": {"n": 8, "x_min": 0, "x_max": 1}, "potential": "morse"}
        )


def test_parse_malformed_json_reports_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"grid": {"n": 8,\n "x_min": 0 "x_max": 1}}', encoding="utf-8")
    with pytest.raises(ConfigError, match=r"line 2 column"):
        parse_config(str(path))


def test_parse_stability_rules(tmp_path):
    # Crank-Nicolson has no bound; leapfrog rejects with the bound value
    big_dt = _harmonic_cfg(dt=5.0, t_final=10.0)
    parse_config(_write(tmp_path, "cn.json", big_dt))
    lf = _harmonic_cfg(integrator="leapfrog", dt=5.0, t_final=10.0)
    with pytest.raises(ConfigError, match="bound"):
        parse_config(_write(tmp_path, "lf.json", lf))


def test_run_schrodinger_norm_constant(tmp_path):
    cfg = _write(tmp_path, "cfg.json", _harmonic_cfg())
    out = tmp_path / "run"
    assert main(["run-schrodinger", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    rows = _read_series(out)
    norms = np.array([float(r["norm"]) for r in rows])
    assert np.max(np.abs(norms - norms[0])) < 1e-12 * norms[0]
    hams = np.array([float(r["hamiltonian"]) for r in rows])
    assert abs(hams[0] - 0.25) < 2e-3


def test_run_determinism(tmp_path):
    cfg = _write(tmp_path, "cfg.json", _harmonic_cfg())
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    for out in (out_a, out_b):
        assert main(["run-schrodinger", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    for name in sorted(p.name for p in out_a.iterdir() if p.suffix == ".csv"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()
    ma = json.loads((out_a / "manifest.json").read_text())
    mb = json.loads((out_b / "manifest.json").read_text())
    ma.pop("wall_time_s")
    mb.pop("wall_time_s")
    assert ma == mb


def test_run_field_zero_mode_scenario(tmp_path):
    cfg = _write(
        tmp_path,
        "zm.json",
        {
            "grid": {"n": 32, "x_min": 0.0, "x_max": 6.4, "boundary": "periodic"},
            "potential": "free",
            "initial_state": {"type": "modes", "coefficients": [[0, 0.0, 1.0]]},
            "integrator": "spectral",
            "dt": 0.05,
            "t_final": 1.0,
            "output": {"snapshot_stride": 20},
        },
    )
    out = tmp_path / "zrun"
    assert main(["run-field", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    with open(out / "snapshot_000000.csv", newline="") as fh:
        first = list(csv.DictReader(fh))
    with open(out / "snapshot_000020.csv", newline="") as fh:
        last = list(csv.DictReader(fh))
    p_val = 1.0 / np.sqrt(6.4)  # normalized constant mode amplitude
    assert abs(float(last[0]["phi"]) - p_val * 1.0) < 1e-10  # linear growth to t=1
    assert abs(float(first[0]["P"]) - float(last[0]["P"])) < 1e-12


def test_run_constrained_residual_columns(tmp_path):
    cfg = _write(
        tmp_path,
        "cn.json",
        _harmonic_cfg(
            integrator="rk4",
            dt=0.002,
            t_final=0.2,
            initial_state={"type": "modes", "coefficients": [[0, 1.0, 0.0], [1, 0.3, 0.4]]},
        ),
    )
    out = tmp_path / "crun"
    assert main(["run-constrained", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    rows = _read_series(out)
    assert max(float(r["c1_inf"]) for r in rows) <= 1e-8
    assert max(float(r["c2_inf"]) for r in rows) == 0.0


def test_dequantize_cli_round_trip(tmp_path):
    cfg = _write(
        tmp_path,
        "dq.json",
        _harmonic_cfg(integrator="spectral", dt=0.1, t_final=1.0,
                      output={"snapshot_stride": 5}),
    )
    out = tmp_path / "dqrun"
    assert main(["dequantize", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    rows = _read_series(out)
    assert max(float(r["roundtrip_error"]) for r in rows) <= 1e-10
    assert (out / "integration_constant.csv").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["kernel"]["modes"] == 0


def test_dequantize_cli_kernel_scenario(tmp_path):
    cfg = _write(
        tmp_path,
        "kernel.json",
        {
            "grid": {"n": 32, "x_min": 0.0, "x_max": 6.4, "boundary": "periodic"},
            "potential": "free",
            "initial_state": {"type": "modes", "coefficients": [[0, 0.0, 1.0]]},
            "integrator": "spectral",
            "dt": 0.1,
            "t_final": 1.0,
        },
    )
    out = tmp_path / "krun"
    assert main(["dequantize", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    with open(out / "integration_constant.csv", newline="") as fh:
        c_rows = list(csv.DictReader(fh))
    assert max(abs(float(r["C"])) for r in c_rows) == 0.0
    rows = _read_series(out)
    assert max(float(r["roundtrip_error"]) for r in rows) < 1e-12
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["kernel"]["modes"] == 1


def test_verify_cli_passes_and_fault_flags_targets(tmp_path):
    cfg_ok = _write(tmp_path, "ok.json", _harmonic_cfg())
    out = tmp_path / "vrun"
    assert main(["verify", "--config", cfg_ok, "--out", str(out), "--quiet"]) == 0
    report = json.loads((out / "verify_report.json").read_text())
    assert report["all_pass"] is True

    cfg_bad = _write(tmp_path, "bad.json", _harmonic_cfg(fault="dirac_sign_flip"))
    out_bad = tmp_path / "vbad"
    assert main(["verify", "--config", cfg_bad, "--out", str(out_bad), "--quiet"]) == 1
    report = json.loads((out_bad / "verify_report.json").read_text())
    failed = {e["name"] for e in report["identities"] if not e["passed"]}
    assert failed == {
        "dirac_varphi_p_is_minus_K",
        "dirac_wave_sector_noncanonical",
        "dirac_constraint_casimir",
        "dirac_flow_wave_sector",
    }


def test_verify_cli_periodic_kernel_note(tmp_path):
    cfg = _write(
        tmp_path,
        "per.json",
        {
            "grid": {"n": 48, "x_min": 0.0, "x_max": 6.0, "boundary": "periodic"},
            "potential": "free",
            "initial_state": "eigenstate:0",
            "integrator": "spectral",
            "dt": 0.005,
            "t_final": 0.5,
        },
    )
    out = tmp_path / "pvrun"
    assert main(["verify", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    report = json.loads((out / "verify_report.json").read_text())
    entry = {e["name"]: e for e in report["identities"]}["dirac_sector_nondegenerate"]
    assert entry["asserted"] is False
    assert "zero mode present" in entry["note"]


def test_verify_cli_discontinuous_potential_measured_only(tmp_path):
    # at a square-well jump the pointwise residual diverges under refinement,
    # so the current-equation entry must downgrade itself to measured-only
    cfg = _write(
        tmp_path,
        "well.json",
        {
            "grid": {"n": 90, "x_min": -7.0, "x_max": 7.0},
            "potential": {"name": "square_well", "depth": 3.0, "width": 3.0},
            "initial_state": "eigenstate:0",
            "integrator": "spectral",
            "dt": 0.001,
            "t_final": 0.1,
        },
    )
    out = tmp_path / "wrun"
    assert main(["verify", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    report = json.loads((out / "verify_report.json").read_text())
    entry = {e["name"]: e for e in report["identities"]}["current_residual_decays"]
    assert entry["asserted"] is False
    assert "discontinuous" in entry["note"]


def test_convergence_cli_orders(tmp_path):
    cfg = _write(
        tmp_path,
        "conv.json",
        {
            "grid": {"n": 40, "x_min": -8.0, "x_max": 8.0},
            "potential": {"name": "harmonic", "omega": 1.0},
            "initial_state": {
                "type": "modes",
                "coefficients": [[0, 1.0, 0.0], [1, 0.5, 0.3], [2, 0.0, 0.4], [3, 0.2, 0.0]],
            },
            "integrator": "spectral",
            "dt": 0.02,
            "t_final": 2.0,
        },
    )
    out = tmp_path / "convrun"
    assert main(["convergence", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    orders = json.loads((out / "orders.json").read_text())
    assert 1.7 < orders["crank_nicolson"] < 2.3
    assert 1.7 < orders["leapfrog"] < 2.3
    assert 3.6 < orders["rk4"] < 4.4
    assert 1.7 < orders["schrodinger_residual"] < 2.3
    assert orders["current_residual"] > 1.7
    rows = (out / "convergence.csv").read_text().strip().splitlines()
    assert rows[0] == "study,level,h,error"
    assert len(rows) == 1 + 6 * 3


def test_spectrum_cli(tmp_path):
    cfg = _write(tmp_path, "sp.json", _harmonic_cfg())
    out = tmp_path / "sprun"
    assert main(["spectrum", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    lines = (out / "eigenvalues.csv").read_text().strip().splitlines()
    assert lines[0] == "index,kappa,energy"
    assert len(lines) == 65
    last = lines[-1].split(",")
    assert abs(float(last[2]) - 0.5) < 6e-3  # ground energy, n=64 discretization
    assert (out / "eigenvectors.csv").exists()


def test_render_cli(tmp_path):
    cfg = _write(tmp_path, "cfg.json", _harmonic_cfg())
    out = tmp_path / "run"
    main(["run-schrodinger", "--config", cfg, "--out", str(out), "--quiet"])
    # eigenstate density is stationary: asserted in the data, not the SVG
    snaps = sorted(out.glob("snapshot_*.csv"))
    profiles = []
    for snap in snaps:
        with open(snap, newline="") as fh:
            profiles.append(np.array([float(r["P"]) for r in csv.DictReader(fh)]))
    for prof in profiles[1:]:
        assert np.max(np.abs(prof - profiles[0])) < 1e-12
    written = render_snapshots(out)
    assert len(written) == 3
    first = written[0].read_bytes()
    render_snapshots(out)
    assert written[0].read_bytes() == first  # byte-identical on repeat

    empty = tmp_path / "empty"
    empty.mkdir()
    assert render_snapshots(empty) == []


def test_render_rejects_missing_columns(tmp_path):
    bad = tmp_path / "snapshot_000000.csv"
    bad.write_text("x,foo\n0.0,1.0\n1.0,2.0\n", encoding="utf-8")
    with pytest.raises(ValueError, match="columns"):
        render_snapshots(tmp_path)


def test_blowup_guard():
    from schrofield.runs import _check_blowup

    _check_blowup(1.0, 1.0, "energy")
    with pytest.raises(RuntimeError, match="instability"):
        _check_blowup(11.0, 1.0, "energy")


def test_states_reject_non_finite():
    from schrofield import FieldState, WaveFunction

    with pytest.raises(ValueError):
        WaveFunction(re=np.array([0.0, np.nan]), im=np.zeros(2))
    with pytest.raises(ValueError):
        FieldState(phi=np.zeros(2), p=np.array([np.inf, 0.0]))
    with pytest.raises(ValueError):
        WaveFunction(re=np.zeros(3), im=np.zeros(4))


def test_cli_exit_codes(tmp_path):
    bad = tmp_path / "nope.json"
    assert main(["run-schrodinger", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2
    cfg = _write(tmp_path, "wrong.json", _harmonic_cfg(integrator="leapfrog"))
    # leapfrog is not a wave-system integrator
    assert main(["run-schrodinger", "--config", cfg, "--out", str(tmp_path / "y")]) == 2
    ok = _write(tmp_path, "ok.json", _harmonic_cfg())
    assert main(["verify", "--config", ok, "--seed", "-1", "--quiet"]) == 2


def test_verify_report_deterministic_per_seed(tmp_path):
    cfg = _write(tmp_path, "cfg.json", _harmonic_cfg())
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    for out in (out_a, out_b):
        assert main(["verify", "--config", cfg, "--out", str(out), "--seed", "7", "--quiet"]) == 0
    rep_a = json.loads((out_a / "verify_report.json").read_text())
    rep_b = json.loads((out_b / "verify_report.json").read_text())
    rep_a.pop("wall_time_s")
    rep_b.pop("wall_time_s")
    assert rep_a == rep_b


def test_module_entry_point(tmp_path):
    import subprocess
    import sys

    cfg = _write(tmp_path, "cfg.json", _harmonic_cfg())
    proc = subprocess.run(
        [sys.executable, "-m", "schrofield", "verify", "--config", cfg, "--quiet"],
        capture_output=True,
    )
    assert proc.returncode == 0, proc.stderr
