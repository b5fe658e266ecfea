import json
import os
from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_allclose

from qodimer import SpectrumSeries, default_omega_grid
from qodimer.cli import (
    RunConfig,
    UsageError,
    compare_series,
    main,
    parse_config,
    read_spectrum_csv,
    write_spectrum_csv,
)

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


class TestParse:
    def test_fig4_flags(self):
        cfg = parse_config([
            "spectrum-analytic", "--gamma", "0.1", "--delta", "0",
            "--j1", "3", "--j2", "1", "--pump", "3.275",
            "--branch", "lower", "--out", "x.csv"])
        assert cfg.command == "spectrum-analytic"
        p = cfg.params
        assert (p.gamma, p.delta1, p.delta2, p.j1, p.j2, p.pump) == \
            (0.1, 0.0, 0.0, 3.0, 1.0, 3.275)
        assert cfg.branch == "lower"

    def test_delta_shorthand_and_override(self):
        cfg = parse_config(["steady", "--delta", "0.5", "--delta2", "-0.3",
                            "--pump", "1"])
        assert cfg.params.delta1 == 0.5
        assert cfg.params.delta2 == -0.3

    def test_empty_argv_usage(self, capsys):
        assert main([]) == 2
        assert "usage" in capsys.readouterr().err.lower()

    def test_negative_pump_rejected(self, capsys):
        assert main(["steady", "--pump", "-1"]) == 2
        assert "pump" in capsys.readouterr().err

    def test_conflicting_pump_flags(self):
        with pytest.raises(UsageError, match="pump"):
            parse_config(["steady", "--pump", "1", "--pump-ratio", "0.9",
                          "--pump-of", "sp"])

    def test_ratio_requires_reference(self):
        with pytest.raises(UsageError, match="pump-of"):
            parse_config(["steady", "--pump-ratio", "0.9"])

    def test_unknown_config_key(self, tmp_path):
        f = tmp_path / "bad.cfg"
        f.write_text("nonsense = 1\n")
        with pytest.raises(UsageError, match="nonsense"):
            parse_config(["steady", "--config", str(f)])

    def test_malformed_number(self, tmp_path):
        f = tmp_path / "bad.cfg"
        f.write_text("pump = not-a-number\n")
        with pytest.raises(UsageError, match="pump"):
            parse_config(["steady", "--config", str(f)])

    def test_flags_override_config(self, tmp_path):
        f = tmp_path / "ok.cfg"
        f.write_text("# comment\npump = 1.5\ngamma = 0.2\n")
        cfg = parse_config(["steady", "--config", str(f), "--pump", "2.5"])
        assert cfg.params.pump == 2.5
        assert cfg.params.gamma == 0.2

    def test_seed_env_fallback(self, monkeypatch):
        monkeypatch.setenv("QDIMER_SEED", "777")
        cfg = parse_config(["steady", "--pump", "1"])
        assert cfg.seed == 777
        cfg = parse_config(["steady", "--pump", "1", "--seed", "3"])
        assert cfg.seed == 3

    @pytest.mark.parametrize("name", ["fig4", "fig5", "fig6", "fig7"])
    def test_golden_configs_parse(self, name, tmp_path):
        cfg = parse_config(["spectrum-analytic",
                            "--config", str(CONFIG_DIR / f"{name}.cfg"),
                            "--out", str(tmp_path / "o.csv")])
        assert isinstance(cfg, RunConfig)
        if name == "fig4":
            assert cfg.params.pump == 3.275 and cfg.params.j1 == 3.0
        if name == "fig6":
            assert cfg.pump_ratio == 0.97 and cfg.pump_of == "sym"
        if name == "fig7":
            assert cfg.pump_ratio == 0.95 and cfg.pump_of == "sp"


class TestCsv:
    def make_series(self, n=512, with_err=False):
        rng = np.random.default_rng(0)
        omega = default_omega_grid(20.0, n)
        return SpectrumSeries(
            observable="A1B1", sign="plus", omega=omega,
            values=1.0 + rng.normal(size=n) * 0.37,
            shot_noise=8e-8,
            stat_err=np.abs(rng.normal(size=n)) if with_err else None)

    def test_line_count(self, tmp_path):
        path = tmp_path / "s.csv"
        write_spectrum_csv(self.make_series(512), str(path))
        lines = path.read_text().splitlines()
        assert len(lines) == 513
        assert lines[0] == "omega,vbar"
        assert "\r" not in path.read_bytes().decode()

    def test_round_trip_bit_exact(self, tmp_path):
        path = tmp_path / "s.csv"
        series = self.make_series(100, with_err=True)
        write_spectrum_csv(series, str(path))
        back = read_spectrum_csv(str(path))
        assert np.array_equal(back.omega, series.omega)
        assert np.array_equal(back.values, series.values)
        assert np.array_equal(back.stat_err, series.stat_err)
        # re-serializing produces identical bytes
        path2 = tmp_path / "s2.csv"
        write_spectrum_csv(back, str(path2))
        assert path.read_bytes() == path2.read_bytes()

    def test_sidecar_metadata(self, tmp_path):
        path = tmp_path / "s.csv"
        write_spectrum_csv(self.make_series(8), str(path),
                           metadata={"note": 1})
        meta = json.loads((tmp_path / "s.csv.meta.json").read_text())
        assert meta["observable"] == "A1B1"
        assert meta["note"] == 1


class TestCommands:
    def test_steady_stdout(self, capsys):
        assert main(["steady", "--gamma", "0.1", "--delta", "0",
                     "--j1", "3", "--j2", "1", "--pump", "3.275"]) == 0
        out = capsys.readouterr().out
        assert "lower" in out and "upper" in out and "fold" in out

    def test_thresholds_hopf(self, capsys):
        assert main(["thresholds", "--gamma", "0.1", "--delta", "0",
                     "--j1", "2", "--j2", "1", "--kind", "hopf",
                     "--e-max", "10"]) == 0
        out = capsys.readouterr().out
        e_c = float(out.split("E_c =")[1].split()[0])
        assert e_c == pytest.approx(4.7, abs=0.05)

    def test_branch_required_when_bistable(self, capsys):
        code = main(["spectrum-analytic", "--gamma", "0.1", "--delta", "0",
                     "--j1", "3", "--j2", "1", "--pump", "3.275",
                     "--out", "x.csv"])
        assert code == 2
        assert "branch" in capsys.readouterr().err

    def test_spectrum_analytic_writes(self, tmp_path, capsys):
        out = tmp_path / "spec.csv"
        code = main(["spectrum-analytic", "--config",
                     str(CONFIG_DIR / "fig4.cfg"), "--out", str(out),
                     "--points", "101"])
        assert code == 0
        plus = read_spectrum_csv(str(tmp_path / "spec_plus.csv"))
        assert plus.values.min() == pytest.approx(0.206, abs=0.02)
        assert (tmp_path / "spec_minus.csv").exists()

    def test_reproducible_sim_csv(self, tmp_path):
        args = ["spectrum-sim", "--gamma", "0.8", "--delta", "0.2",
                "--j1", "0.5", "--j2", "0.3", "--pump", "1.0",
                "--total-time", "300", "--lags", "16", "--transient", "5",
                "--trajectories", "1", "--segments", "2",
                "--observable", "a2b2", "--sign", "plus", "--seed", "9"]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_scan_writes_and_continues(self, tmp_path):
        out = tmp_path / "scan.csv"
        code = main(["scan", "--gamma", "0.1", "--j2", "1",
                     "--x-axis", "delta", "--x-range", "0:1:2",
                     "--y-axis", "j1", "--y-range", "2:3:2",
                     "--e-max", "8", "--e-points", "10",
                     "--out", str(out)])
        assert code == 0
        rows = out.read_text().splitlines()
        assert rows[0].startswith("delta,j1,")
        assert len(rows) == 5

    def test_compare_self_consistency(self, tmp_path):
        report = tmp_path / "report.json"
        code = main(["compare", "--gamma", "0.8", "--delta", "0.3",
                     "--j1", "1.4", "--j2", "0.9", "--pump", "1.4",
                     "--observable", "a2b2", "--sign", "minus",
                     "--total-time", "1500", "--lags", "32",
                     "--transient", "10", "--trajectories", "1",
                     "--segments", "8", "--seed", "12",
                     "--out", str(report)])
        assert code == 0
        record = json.loads(report.read_text())[0]
        ana = read_spectrum_csv(str(tmp_path / "report_minus_analytic.csv"))
        sim = read_spectrum_csv(str(tmp_path / "report_minus_sim.csv"))
        verdict, details = compare_series(ana, sim)
        assert verdict == record["verdict"]
        assert details["fraction_within_3sigma"] == pytest.approx(
            record["fraction_within_3sigma"])
