
import numpy as np
import pytest

from sivsim import io
from sivsim.cli import main
from sivsim.experiments import (
    ConfigError,
    ExperimentConfig,
    ReportError,
    RunManifest,
    emit_report,
    run_experiment,
)


class TestRunExperiment:
    def test_unknown_experiment(self, tmp_path):
        with pytest.raises(ConfigError):
            run_experiment(ExperimentConfig(name="frobnicate", out_dir=tmp_path))

    def test_unknown_override_key(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown configuration key"):
            run_experiment(ExperimentConfig(name="thermal-1k",
                                            overrides={"nope.nope": 1},
                                            out_dir=tmp_path))

    def test_stochastic_requires_seed(self, tmp_path):
        with pytest.raises(ConfigError, match="requires a seed"):
            run_experiment(ExperimentConfig(name="stream-stats", out_dir=tmp_path))

    def test_deterministic_digests(self, tmp_path):
        cfg = ExperimentConfig(name="stream-stats",
                               overrides={"attempts": 200_000}, seed=5,
                               out_dir=tmp_path / "a")
        m1 = run_experiment(cfg)
        cfg2 = ExperimentConfig(name="stream-stats",
                                overrides={"attempts": 200_000}, seed=5,
                                out_dir=tmp_path / "b")
        m2 = run_experiment(cfg2)
        assert [o["sha256"] for o in m1.outputs] == [o["sha256"] for o in m2.outputs]

    def test_manifest_round_trip(self, tmp_path):
        manifest = run_experiment(ExperimentConfig(name="thermal-1k",
                                                   out_dir=tmp_path))
        path = tmp_path / "thermal-1k.manifest.json"
        assert path.exists()
        loaded = RunManifest.load(path)
        assert loaded.experiment == "thermal-1k"
        assert loaded.metrics["upper_branch_population"] == pytest.approx(
            manifest.metrics["upper_branch_population"])

    def test_every_csv_has_header(self, tmp_path):
        run_experiment(ExperimentConfig(name="hyperfine-scan", out_dir=tmp_path))
        text = (tmp_path / "hyperfine_scan.csv").read_text()
        assert text.splitlines()[0] == "detuning_mhz,rate"

    def test_efficiency_map_covers_device_point(self, tmp_path):
        manifest = run_experiment(ExperimentConfig(
            name="efficiency-map", overrides={"grid.n": 10}, out_dir=tmp_path))
        assert manifest.metrics["eta_s_device"] == pytest.approx(0.62, abs=0.01)


class TestReport:
    def test_report_table(self, tmp_path):
        run_experiment(ExperimentConfig(name="thermal-1k", out_dir=tmp_path))
        run_experiment(ExperimentConfig(name="wcs-gain", out_dir=tmp_path))
        text = emit_report([tmp_path / "thermal-1k.manifest.json",
                            tmp_path / "wcs-gain.manifest.json"])
        assert "thermal-1k" in text and "wcs-gain" in text
        assert "gain=" in text

    def test_tampered_digest_detected(self, tmp_path):
        run_experiment(ExperimentConfig(name="thermal-1k", out_dir=tmp_path))
        target = tmp_path / "thermal_estimates.csv"
        target.write_text(target.read_text() + "tampered\n")
        with pytest.raises(ReportError, match="digest mismatch"):
            emit_report([tmp_path / "thermal-1k.manifest.json"])

    def test_missing_file_detected(self, tmp_path):
        run_experiment(ExperimentConfig(name="thermal-1k", out_dir=tmp_path))
        (tmp_path / "thermal_estimates.csv").unlink()
        with pytest.raises(ReportError, match="missing output"):
            emit_report([tmp_path / "thermal-1k.manifest.json"])


class TestCli:
    def test_successful_run(self, tmp_path, capsys):
        code = main(["thermal-1k", "--out", str(tmp_path)])
        assert code == 0
        assert "upper_branch_population" in capsys.readouterr().out

    def test_set_override(self, tmp_path, capsys):
        code = main(["wcs-gain", "--out", str(tmp_path), "--set", "duty=1.0",
                     "--set", "g2_zero=1.0"])
        assert code == 0
        assert "gain = 1" in capsys.readouterr().out

    def test_unknown_key_exit_code(self, tmp_path, capsys):
        code = main(["thermal-1k", "--out", str(tmp_path), "--set", "bad.key=1"])
        assert code == 1
        assert "unknown configuration key" in capsys.readouterr().err

    def test_missing_seed_exit_code(self, tmp_path, capsys):
        code = main(["stream-stats", "--out", str(tmp_path)])
        assert code == 1
        assert "requires a seed" in capsys.readouterr().err

    def test_unknown_experiment_usage(self, tmp_path):
        with pytest.raises(SystemExit) as excinfo:
            main(["frobnicate", "--out", str(tmp_path)])
        assert excinfo.value.code == 2

    def test_config_file(self, tmp_path, capsys):
        config = tmp_path / "run.toml"
        config.write_text("[target]\nfamily = \"gaussian\"\nsigma_ns = 30.0\n")
        # parse/validation path only; use a cheap experiment for the full run
        config2 = tmp_path / "thermal.toml"
        config2.write_text("temperature_k = 2.0\n")
        code = main(["thermal-1k", "--config", str(config2), "--out", str(tmp_path)])
        assert code == 0

    def test_bad_toml_reports_location(self, tmp_path, capsys):
        config = tmp_path / "bad.toml"
        config.write_text("temperature_k = = 2.0\n")
        code = main(["thermal-1k", "--config", str(config), "--out", str(tmp_path)])
        assert code == 1
        assert "cannot parse config file" in capsys.readouterr().err

    def test_report_command(self, tmp_path, capsys):
        main(["thermal-1k", "--out", str(tmp_path)])
        code = main(["report", str(tmp_path / "thermal-1k.manifest.json")])
        assert code == 0
        assert "thermal-1k" in capsys.readouterr().out


class TestIoFormats:
    def test_two_column_round_trip(self, tmp_path):
        path = tmp_path / "wave.txt"
        t = np.linspace(0.0, 5.0, 11)
        v = np.sin(t)
        io.write_two_column(path, "t_ns value", t, v)
        header, t2, v2 = io.read_two_column(path)
        assert header == "t_ns value"
        assert np.allclose(t2, t)
        assert np.allclose(v2, v, atol=1e-8)

    def test_atomic_write_replaces(self, tmp_path):
        path = tmp_path / "out.txt"
        io.atomic_write_text(path, "one")
        io.atomic_write_text(path, "two")
        assert path.read_text() == "two"
        assert list(tmp_path.iterdir()) == [path]
