"""Configuration parsing, file output, orchestration, and the CLI."""

import math
import os

import numpy as np
import pytest

from qtl import cli, harness, io
from qtl.config import SCHEMA, parse_config, render_config
from qtl.errors import ConfigError, QtlError

CLASSICAL_CFG = """
mode = classical
system.Lambda = 10.0
noise.sigma_x = 0.0
noise.sigma_p = 0.0
run.dt = 1e-3
run.T = 2.0
run.sample_every = 10
"""

STROBE_CFG = """
mode = strobe
seed = 123
strobe.system = classical
ensemble.n_traj = 3
run.dt = 1e-3
run.T = 10.0
run.sample_every = 10
strobe.t_skip = 2.0
"""


class TestParseConfig:
    def test_paper_defaults(self):
        cfg = parse_config("mode = regime\n")
        assert cfg["system.B"] == 0.5
        assert cfg["system.A"] == 10.0
        assert cfg["system.Lambda"] == 10.0
        assert cfg["system.omega"] == 6.07
        assert cfg["measure.hbar"] == 1e-5
        assert cfg["measure.k"] == 1e5
        assert cfg["measure.eta"] == 1.0

    def test_eta_out_of_range(self):
        with pytest.raises(ConfigError, match=r"eta out of \(0,1\]") as err:
            parse_config("mode = regime\nmeasure.eta = 1.5\n")
        assert err.value.line == 2

    def test_unknown_key_with_line(self):
        with pytest.raises(ConfigError, match="unknown key") as err:
            parse_config("mode = regime\nbogus.key = 1\n")
        assert err.value.line == 2

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config("mode = regime\nrun.dt = 0.1\nrun.dt = 0.2\n")

    def test_type_mismatch(self):
        with pytest.raises(ConfigError, match="not a valid float"):
            parse_config("mode = regime\nrun.dt = fast\n")

    def test_empty_file_lists_required_keys(self):
        with pytest.raises(ConfigError, match="mode"):
            parse_config("")

    def test_seed_required_for_stochastic_modes(self):
        with pytest.raises(ConfigError, match="seed"):
            parse_config("mode = quantum\n")
        parse_config("mode = classical\n")  # deterministic: seed optional

    def test_comments_and_blank_lines(self):
        cfg = parse_config("# a comment\n\nmode = regime  # trailing\n")
        assert cfg.mode == "regime"

    def test_round_trip(self):
        cfg = parse_config(STROBE_CFG)
        again = parse_config(render_config(cfg))
        assert again.values == cfg.values
        assert again.fingerprint() == cfg.fingerprint()

    def test_overrides(self):
        cfg = parse_config("mode = classical\n", mode_override="regime",
                           seed_override=9)
        assert cfg.mode == "regime"
        assert cfg.seed == 9

    def test_schema_covers_all_values(self):
        cfg = parse_config("mode = regime\n")
        assert set(cfg.values) == set(SCHEMA)


class TestIo:
    def test_golden_headers(self):
        assert io.TRAJECTORY_HEADER == "t,mean_x,mean_p,var_x,var_p,cov_xp,norm,energy"
        assert io.RECORD_RAW_HEADER == "t,y_raw"
        assert io.RECORD_AVG_HEADER == "t_center,y_avg"
        assert io.STROBE_HEADER == "run,period_index,x,p"
        assert io.LYAPUNOV_HEADER == "tau,mean_ln_delta,stderr"

    def test_atomic_write_leaves_no_temp(self, tmp_path):
        target = tmp_path / "out.csv"
        io.atomic_write_text(target, "hello\n")
        assert target.read_text() == "hello\n"
        assert os.listdir(tmp_path) == ["out.csv"]

    def test_float_rendering_is_lossless(self):
        x = 1.0 / 3.0
        assert float(io._f(x)) == x

    def test_trajectory_csv_layout(self, tmp_path):
        from qtl.classical import ClassicalState, run_classical_trajectory
        from qtl.quantum import SystemParams
        rec = run_classical_trajectory(ClassicalState(-3.0, 8.0), 0.1, 1e-3,
                                       SystemParams(), sample_every=10)
        path = tmp_path / "traj.csv"
        io.write_trajectory(path, rec)
        lines = path.read_text().splitlines()
        assert lines[0] == f"# schema v{io.SCHEMA_VERSION}"
        assert lines[1] == io.TRAJECTORY_HEADER
        assert len(lines) == 2 + rec.t.size


class TestRunModes:
    def test_classical_mode_outputs(self, tmp_path):
        cfg = parse_config(CLASSICAL_CFG)
        summary = harness.run(cfg, out_dir=str(tmp_path))
        assert "final (x, p)" in summary
        for name in ("trajectory.csv", "phase_space.png", "resolved_config.txt"):
            assert (tmp_path / name).exists()
        # resolved config reparses to the same configuration
        again = parse_config((tmp_path / "resolved_config.txt").read_text())
        assert again.values == cfg.values

    def test_quantum_mode_outputs(self, tmp_path):
        text = """
mode = quantum
seed = 5
measure.hbar = 1e-2
measure.k = 1e3
grid.n = 4096
run.dt = 1e-3
run.T = 0.5
run.sample_every = 10
record.window = 0.01
"""
        cfg = parse_config(text)
        summary = harness.run(cfg, out_dir=str(tmp_path))
        assert "max sqrt(V_x)" in summary
        for name in ("trajectory.csv", "record_raw.csv", "record_avg.csv",
                     "variance.png", "phase_space.png"):
            assert (tmp_path / name).exists()

    def test_regime_mode(self, tmp_path):
        cfg = parse_config("mode = regime\n")
        summary = harness.run(cfg, out_dir=str(tmp_path))
        assert "k_min(record) = 125000" in summary
        text = (tmp_path / "regime.csv").read_text()
        assert text.splitlines()[0] == "quantity,value,verdict"

    def test_lyapunov_mode(self, tmp_path):
        text = """
mode = lyapunov
seed = 4
lyapunov.system = classical
branch.n_fiducial = 4
branch.n_branch_points = 3
branch.spacing = 10.0
branch.track_time = 4.0
fit.lo = 1.0
fit.hi = 3.0
"""
        cfg = parse_config(text)
        summary = harness.run(cfg, out_dir=str(tmp_path))
        assert summary.startswith("lambda = ")
        assert (tmp_path / "lyapunov.csv").exists()
        assert (tmp_path / "lyapunov.png").exists()

    def test_strobe_mode_and_worker_independence(self, tmp_path):
        cfg = parse_config(STROBE_CFG)
        out1 = tmp_path / "w1"
        out2 = tmp_path / "w2"
        harness.run(cfg, out_dir=str(out1), workers=1)
        harness.run(cfg, out_dir=str(out2), workers=2)
        names = sorted(p.name for p in out1.iterdir())
        assert names == sorted(p.name for p in out2.iterdir())
        assert "strobe.csv" in names
        for name in names:
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name

    def test_strobe_merge_sorted(self, tmp_path):
        cfg = parse_config(STROBE_CFG)
        harness.run(cfg, out_dir=str(tmp_path))
        rows = [line.split(",") for line in
                (tmp_path / "strobe.csv").read_text().splitlines()[2:]]
        keys = [(int(r[0]), int(r[1])) for r in rows]
        assert keys == sorted(keys)

    def test_run_ensemble_rejects_empty(self):
        cfg = parse_config(STROBE_CFG)
        with pytest.raises(QtlError):
            harness.run_ensemble(cfg, 0)

    def test_run_ensemble_reports_partial_failures(self):
        # one diverging classical trajectory out of two
        text = """
mode = classical
system.B = 0.0
system.A = 10.0
system.Lambda = 0.0
noise.sigma_x = 0.0
noise.sigma_p = 0.0
init.x0 = 1.0
init.p0 = 0.0
run.dt = 1e-2
run.T = 400.0
run.sample_every = 100
"""
        cfg = parse_config(text)
        records, failures = harness.run_ensemble(cfg, 1, kind="classical")
        assert records == {}
        assert 0 in failures and "diverged" in failures[0]


class TestCli:
    def write(self, tmp_path, text):
        path = tmp_path / "run.cfg"
        path.write_text(text)
        return str(path)

    def test_success_exit_zero(self, tmp_path, capsys):
        cfg = self.write(tmp_path, "mode = regime\n")
        code = cli.main(["regime", "--config", cfg, "--out", str(tmp_path / "o")])
        assert code == 0
        assert "k_min(record)" in capsys.readouterr().out

    def test_config_error_exit_two(self, tmp_path, capsys):
        cfg = self.write(tmp_path, "mode = regime\nmeasure.eta = 1.5\n")
        code = cli.main(["regime", "--config", cfg, "--out", str(tmp_path / "o")])
        assert code == 2
        assert "eta" in capsys.readouterr().err

    def test_unreadable_config_exit_two(self, tmp_path, capsys):
        code = cli.main(["regime", "--config", str(tmp_path / "missing.cfg")])
        assert code == 2

    def test_numerical_failure_exit_three(self, tmp_path, capsys):
        text = """
mode = classical
system.B = 0.0
system.A = 10.0
system.Lambda = 0.0
noise.sigma_x = 0.0
noise.sigma_p = 0.0
init.x0 = 1.0
init.p0 = 0.0
run.dt = 1e-2
run.T = 400.0
run.sample_every = 100
output.figures = false
"""
        cfg = self.write(tmp_path, text)
        code = cli.main(["classical", "--config", cfg, "--out", str(tmp_path / "o")])
        assert code == 3
        assert "numerical failure" in capsys.readouterr().err

    def test_seed_override(self, tmp_path, capsys):
        text = STROBE_CFG.replace("seed = 123\n", "")
        cfg = self.write(tmp_path, "seed = 1\n" + text)
        out = str(tmp_path / "o")
        code = cli.main(["strobe", "--config", cfg, "--seed", "99", "--out", out])
        assert code == 0
        resolved = (tmp_path / "o" / "resolved_config.txt").read_text()
        assert "seed = 99" in resolved
