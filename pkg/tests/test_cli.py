import json

import pytest

from spectralcp.cli import main
from spectralcp.experiment import load_config

SMALL_SYNTH = {
    "data.synthetic.length": "600",
    "data.synthetic.graph.n_nodes": "10",
    "scale.epochs": "3",
}


def run_cli(args, tmp_path, extra_sets=()):
    sets = [f"{k}={v}" for k, v in SMALL_SYNTH.items()] + list(extra_sets)
    argv = [args, "--output-dir", str(tmp_path)]
    for s in sets:
        argv += ["--set", s]
    return main(argv)


class TestSynth:
    def test_writes_files_that_reload_identically(self, tmp_path):
        assert run_cli("synth", tmp_path) == 0
        from spectralcp import load_adjacency_csv, load_series_csv

        series = load_series_csv(tmp_path / "series.csv", 24)
        graph = load_adjacency_csv(tmp_path / "adjacency.csv")
        assert len(series) == 600
        assert graph.n_nodes == 10
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert "config_hash" in manifest and manifest["seeds"]

    def test_repeat_runs_are_bitwise_identical(self, tmp_path):
        a_dir, b_dir = tmp_path / "a", tmp_path / "b"
        a_dir.mkdir(), b_dir.mkdir()
        run_cli("synth", a_dir)
        run_cli("synth", b_dir)
        assert (a_dir / "series.csv").read_bytes() == (b_dir / "series.csv").read_bytes()
        assert (a_dir / "manifest.json").read_bytes() == (b_dir / "manifest.json").read_bytes()

    def test_invalid_spec_fails_before_writing(self, tmp_path):
        code = run_cli("synth", tmp_path, ["data.synthetic.trend_rank=99"])
        assert code == 2
        assert not (tmp_path / "series.csv").exists()


class TestDecompose:
    def test_high_band_less_correlated_on_coupled_data(self, tmp_path):
        assert run_cli("decompose", tmp_path) == 0
        payload = json.loads((tmp_path / "decompose.json").read_text())
        bands = payload["mean_abs_offdiag"]
        assert bands["high"] < bands["low"]
        for key in ("raw", "low", "high"):
            assert len(payload["correlation_intensity"][key]) == 10

    def test_zero_series_reports_zero_intensities(self, tmp_path):
        code = run_cli("decompose", tmp_path, [
            "data.synthetic.trend_scale=0.0",
            "data.synthetic.noise_scale=0.0",
        ])
        assert code == 0
        payload = json.loads((tmp_path / "decompose.json").read_text())
        assert max(abs(v) for v in payload["correlation_intensity"]["raw"]) == 0.0


class TestAutocut:
    def test_deterministic_chosen_k(self, tmp_path):
        a_dir, b_dir = tmp_path / "a", tmp_path / "b"
        a_dir.mkdir(), b_dir.mkdir()
        assert run_cli("autocut", a_dir) == 0
        assert run_cli("autocut", b_dir) == 0
        a = json.loads((a_dir / "cutoff.json").read_text())
        b = json.loads((b_dir / "cutoff.json").read_text())
        assert a == b
        assert 0 <= a["chosen_k"] <= 4

    def test_default_uses_four_scales(self, tmp_path):
        run_cli("autocut", tmp_path)
        payload = json.loads((tmp_path / "cutoff.json").read_text())
        assert len(payload["diagnostics"]["per_scale_energy"]) == 4


class TestEvaluate:
    def test_full_default_method_grid(self, tmp_path):
        code = run_cli("evaluate", tmp_path, ["seeds=[0]", "alphas=[0.1,0.2]"])
        assert code == 0
        payload = json.loads((tmp_path / "metrics.json").read_text())
        methods = {row["method"] for row in payload["summary"]}
        assert methods == {"SCP", "SeqCP", "NexCP", "SpectralSCP", "SCALE"}
        assert len(payload["summary"]) == 10
        csv_lines = (tmp_path / "metrics.csv").read_text().strip().split("\n")
        assert csv_lines[0].startswith("method,alpha,coverage_mean")
        assert len(csv_lines) == 11

    def test_zero_noise_scp_has_full_coverage_and_zero_width(self, tmp_path):
        code = run_cli("evaluate", tmp_path, [
            "data.synthetic.trend_scale=0.0",
            "data.synthetic.noise_scale=0.0",
            'backbone.method="seasonal_naive"',
            'methods=[{"method": "SCP"}]',
            "alphas=[0.1]",
            "seeds=[0]",
        ])
        assert code == 0
        payload = json.loads((tmp_path / "metrics.json").read_text())
        row = payload["summary"][0]
        assert row["coverage_mean"] == 1.0
        assert row["width_mean"] == 0.0

    def test_identical_data_seeds_give_zero_std_for_deterministic_methods(self, tmp_path):
        # CSV data is seed-independent; SCP must then have exactly std 0.
        synth_dir = tmp_path / "synth"
        synth_dir.mkdir()
        run_cli("synth", synth_dir)
        code = main([
            "evaluate", "--output-dir", str(tmp_path),
            "--set", f'data={{"series_csv": "{synth_dir}/series.csv", "adjacency_csv": "{synth_dir}/adjacency.csv", "slots_per_day": 24}}',
            "--set", 'methods=[{"method": "SCP"}, {"method": "NexCP"}]',
            "--set", "alphas=[0.1]",
            "--set", "seeds=[0,1]",
        ])
        assert code == 0
        payload = json.loads((tmp_path / "metrics.json").read_text())
        for row in payload["summary"]:
            assert row["coverage_std"] == 0.0
            assert row["width_std"] == 0.0

    def test_config_error_exit_code(self, tmp_path):
        assert run_cli("evaluate", tmp_path, ["alphas=[2.0]"]) == 2

    def test_missing_data_file_exit_code(self, tmp_path):
        code = main([
            "evaluate", "--output-dir", str(tmp_path),
            "--set", 'data={"series_csv": "/nonexistent.csv", "adjacency_csv": "/nope.csv"}',
        ])
        assert code == 3

    def test_unknown_method_rejected(self, tmp_path):
        assert run_cli("evaluate", tmp_path, ['methods=[{"method": "EnbPI"}]']) == 2


class TestConfigHandling:
    def test_overrides_reach_nested_keys(self):
        cfg = load_config(None, ["sgwt.n_scales=6", "backbone.window=8"])
        assert cfg["sgwt"]["n_scales"] == 6
        assert cfg["backbone"]["window"] == 8

    def test_config_file_merges_with_defaults(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"alphas": [0.5], "scale": {"epochs": 2}}))
        cfg = load_config(str(path))
        assert cfg["alphas"] == [0.5]
        assert cfg["scale"]["epochs"] == 2
        assert cfg["scale"]["batch_size"] == 128

    def test_malformed_override_rejected(self):
        from spectralcp.errors import ConfigError

        with pytest.raises(ConfigError, match="must look like"):
            load_config(None, ["oops"])


class TestMethodLevelOverrides:
    def test_spectral_method_cutoff_override(self, tmp_path):
        code = run_cli("evaluate", tmp_path, [
            'methods=[{"method": "SpectralSCP", "cutoff": 5}]',
            "alphas=[0.2]",
            "seeds=[0]",
        ])
        assert code == 0
        payload = json.loads((tmp_path / "metrics.json").read_text())
        assert payload["summary"][0]["method"] == "SpectralSCP"


class TestCsvConfigFile:
    def test_config_file_can_switch_to_csv_data(self, tmp_path):
        synth_dir = tmp_path / "synth"
        synth_dir.mkdir()
        run_cli("synth", synth_dir)
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({
            "data": {"series_csv": str(synth_dir / "series.csv"),
                     "adjacency_csv": str(synth_dir / "adjacency.csv"),
                     "slots_per_day": 24},
            "methods": [{"method": "SCP"}],
            "alphas": [0.1],
            "seeds": [0],
        }))
        out = tmp_path / "out"
        out.mkdir()
        code = main(["evaluate", "--config", str(cfg_path), "--output-dir", str(out)])
        assert code == 0
        payload = json.loads((out / "metrics.json").read_text())
        assert payload["summary"][0]["method"] == "SCP"
