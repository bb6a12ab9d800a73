import json

import pytest

from nrcdamp.cli import (
    ConfigError,
    config_to_dict,
    parse_config,
    parse_config_dict,
    run_command,
    summarize,
    surrogate_design_config,
)


def minimal_config():
    return {
        "plant": {
            "gain": 1.0,
            "modes": [{"freq_hz": 100.0, "zeta": 0.01, "weight": 1.0}],
        }
    }


def write(tmp_path, cfg, name="config.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


class TestParseConfig:
    def test_minimal_plant_only(self):
        cfg = parse_config_dict(minimal_config())
        assert cfg.tracker is None and cfg.nrc is None and cfg.sim is None
        assert cfg.plant.gain == 1.0
        assert cfg.grid.pts_per_decade == 400

    def test_gamma_rejection_names_stability(self):
        raw = minimal_config()
        raw["nrc"] = {"gamma": 1.2, "n": 3.0}
        with pytest.raises(ConfigError, match=r"gamma must lie in \(0,1\]"):
            parse_config_dict(raw)

    def test_round_trip(self):
        raw = surrogate_design_config()
        cfg = parse_config_dict(raw)
        again = parse_config_dict(config_to_dict(cfg))
        assert again == cfg

    def test_unknown_key_named(self):
        raw = minimal_config()
        raw["plant"]["delay_ms"] = 1.0
        with pytest.raises(ConfigError, match="delay_ms"):
            parse_config_dict(raw)

    def test_offending_key_in_message(self):
        raw = minimal_config()
        raw["plant"]["modes"][0]["freq_hz"] = -5.0
        with pytest.raises(ConfigError, match=r"plant\.modes\[0\]\.freq_hz"):
            parse_config_dict(raw)

    def test_tracker_kp_xor_bandwidth(self):
        raw = minimal_config()
        raw["tracker"] = {"kp": 1.0, "omega_b_hz": 100.0, "omega_i_hz": 1.0}
        with pytest.raises(ConfigError, match="exactly one"):
            parse_config_dict(raw)
        raw["tracker"] = {"omega_i_hz": 1.0}
        with pytest.raises(ConfigError, match="exactly one"):
            parse_config_dict(raw)

    def test_sim_nyquist_guard(self):
        raw = minimal_config()
        raw["grid"] = {"f_min_hz": 1.0, "f_max_hz": 20000.0, "pts_per_decade": 100}
        raw["sim"] = {
            "ts_us": 30.0,
            "duration_s": 0.1,
            "reference": {"kind": "step", "amplitude": 1.0},
        }
        with pytest.raises(ConfigError, match="ts_us"):
            parse_config_dict(raw)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            parse_config(tmp_path / "nope.json")


class TestCommands:
    def test_rootlocus_reference(self, tmp_path):
        raw = minimal_config()
        raw["nrc"] = {"gamma": 1.0, "n": 3.0}
        p = write(tmp_path, raw)
        out = tmp_path / "out"
        assert run_command("rootlocus", p, out) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["bifurcation_n"] == pytest.approx(2.8484, abs=1e-3)
        assert summary["marginal"] is True
        header = (out / "rootlocus.csv").read_text().splitlines()[0]
        assert header == "n,re_p2,im_p2,re_p3,im_p3"

    def test_design_pipeline_outputs(self, tmp_path):
        p = write(tmp_path, surrogate_design_config())
        out = tmp_path / "out"
        assert run_command("design", p, out) == 0
        for name in ("summary.json", "summary.txt", "sensitivities.csv", "margins.json"):
            assert (out / name).exists()
        s = json.loads((out / "summary.json").read_text())
        assert s["bandwidth"]["wc_3db_hz"] > 739.0
        assert s["dual_loop"]["stable"] is True
        text = (out / "summary.txt").read_text()
        assert "O1 tracking bandwidth" in text
        assert "+/-1 dB" in text and "+/-3 dB" in text

    def test_marginal_verdict_line(self, tmp_path):
        raw = surrogate_design_config()
        raw["plant"] = {
            "gain": 1.0,
            "modes": [{"freq_hz": 739.0, "zeta": 0.01, "weight": 1.0}],
        }
        raw["nrc"] = {"gamma": 1.0, "n": 3.0}
        raw["tracker"] = {"omega_b_hz": 200.0, "omega_i_hz": 20.0, "notches": []}
        del raw["sim"]
        p = write(tmp_path, raw)
        out = tmp_path / "out"
        assert run_command("design", p, out) == 0
        text = (out / "summary.txt").read_text()
        assert "marginally stable (integrator pole at s=0)" in text

    def test_simulate_outputs(self, tmp_path):
        p = write(tmp_path, surrogate_design_config())
        out = tmp_path / "out"
        assert run_command("simulate", p, out) == 0
        header = (out / "trace.csv").read_text().splitlines()[0]
        assert header == "time_s,r,d,n,u,x_true,y_meas,e"
        metrics = json.loads((out / "metrics.json").read_text())
        assert set(metrics) >= {"e_max", "e_rms"}
        assert metrics["e_rms"] <= metrics["e_max"]

    def test_identify_outputs(self, tmp_path):
        p = write(tmp_path, surrogate_design_config())
        out = tmp_path / "out"
        assert run_command("identify", p, out) == 0
        header = (out / "frf.csv").read_text().splitlines()[0]
        assert header == "freq_hz,mag_db,phase_deg,coherence"
        summary = json.loads((out / "summary.json").read_text())
        assert summary["peak_freq_hz"] == pytest.approx(739.0, rel=0.01)

    def test_bode_plant_only(self, tmp_path):
        p = write(tmp_path, minimal_config())
        out = tmp_path / "out"
        assert run_command("bode", p, out) == 0
        header = (out / "bode.csv").read_text().splitlines()[0]
        assert header.startswith("freq_hz,plant_mag_db,plant_phase_deg")

    def test_margins_outputs(self, tmp_path):
        p = write(tmp_path, surrogate_design_config())
        out = tmp_path / "out"
        assert run_command("margins", p, out) == 0
        m = json.loads((out / "margins.json").read_text())
        assert "outer_loop" in m and "dual_loop" in m
        assert m["outer_loop"]["gain_margin_db"] > 0

    def test_sweep(self, tmp_path):
        p = write(tmp_path, surrogate_design_config())
        out = tmp_path / "out"
        rc = run_command(
            "sweep", p, out, param="nrc.n", values=[4.0, 8.0], exact_tan60=False
        )
        assert rc == 0
        lines = (out / "sweep.csv").read_text().splitlines()
        assert lines[0] == "value,wc_3db_hz,peak_reduction_db,gain_margin_db,dual_stable"
        assert len(lines) == 3

    def test_deterministic_outputs(self, tmp_path):
        p = write(tmp_path, surrogate_design_config())
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert run_command("design", p, out1) == 0
        assert run_command("design", p, out2) == 0
        assert (out1 / "summary.json").read_bytes() == (out2 / "summary.json").read_bytes()
        assert (
            out1 / "sensitivities.csv"
        ).read_bytes() == (out2 / "sensitivities.csv").read_bytes()
        assert run_command("simulate", p, out1, seed=7) == 0
        assert run_command("simulate", p, out2, seed=7) == 0
        assert (out1 / "trace.csv").read_bytes() == (out2 / "trace.csv").read_bytes()

    def test_bad_config_exit_code(self, tmp_path):
        raw = minimal_config()
        raw["nrc"] = {"gamma": 2.0, "n": 1.0}
        p = write(tmp_path, raw)
        assert run_command("design", p, tmp_path / "out") == 2

    def test_missing_section_exit_code(self, tmp_path):
        p = write(tmp_path, minimal_config())
        assert run_command("design", p, tmp_path / "out") == 2

    def test_grid_override(self, tmp_path):
        p = write(tmp_path, minimal_config())
        out = tmp_path / "out"
        assert run_command("bode", p, out, grid_override="10,100,50") == 0
        rows = (out / "bode.csv").read_text().splitlines()
        first = float(rows[1].split(",")[0])
        last = float(rows[-1].split(",")[0])
        assert first == pytest.approx(10.0)
        assert last == pytest.approx(100.0)


class TestSummarize:
    def test_scorecard_lines(self, tmp_path):
        p = write(tmp_path, surrogate_design_config())
        out = tmp_path / "out"
        run_command("design", p, out)
        s = json.loads((out / "summary.json").read_text())
        text = summarize(s)
        for label in ("O1", "O2", "O3", "O4"):
            assert label in text
        assert "GM" in text and "PM" in text
