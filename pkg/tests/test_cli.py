import csv
import json

import numpy as np
import pytest
from click.testing import CliRunner

from ckmkit.cli import cli, main
from ckmkit.grid import GridMap
from ckmkit.mapio import read_map, write_map


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli_ds")
    runner = CliRunner()
    result = runner.invoke(cli, [
        "gen-dataset", "--out", str(root), "--seed", "3",
        "--train", "4", "--val", "1", "--test", "2", "--size-m", "128",
    ])
    assert result.exit_code == 0, result.output
    return root


class TestGenDataset:
    def test_manifest_written(self, dataset_dir):
        manifest = json.loads((dataset_dir / "manifest.json").read_text())
        assert manifest["counts"] == {"train": 4, "val": 1, "test": 2}
        assert "manifest_hash" in manifest

    def test_hash_reported_and_stable(self, dataset_dir, tmp_path):
        runner = CliRunner()
        result = runner.invoke(cli, [
            "gen-dataset", "--out", str(tmp_path / "again"), "--seed", "3",
            "--train", "4", "--val", "1", "--test", "2", "--size-m", "128",
        ])
        assert result.exit_code == 0
        manifest = json.loads((dataset_dir / "manifest.json").read_text())
        assert manifest["manifest_hash"] in result.output


class TestReconstructLocalize:
    def test_reconstruct_writes_maps(self, dataset_dir, tmp_path):
        runner = CliRunner()
        out = tmp_path / "recon"
        result = runner.invoke(cli, [
            "reconstruct", "--dataset", str(dataset_dir), "--scene", "scene_0005",
            "--rate", "0.3", "--method", "idw", "--out-dir", str(out),
        ])
        assert result.exit_code == 0, result.output
        iss = read_map(out / "scene_0005_iss_hat.map")
        assert iss.kind == "rss_watts"
        assert iss.meta["scene_id"] == "scene_0005"
        sinr = read_map(out / "scene_0005_sinr_hat.map")
        assert sinr.kind == "sinr_linear"

    def test_estimator_params_forwarded(self, dataset_dir, tmp_path):
        runner = CliRunner()
        result = runner.invoke(cli, [
            "reconstruct", "--dataset", str(dataset_dir), "--scene", "scene_0005",
            "--rate", "0.3", "--method", "knn", "--param", "k=3",
            "--out-dir", str(tmp_path / "knn3"),
        ])
        assert result.exit_code == 0, result.output

    def test_localize_csv(self, dataset_dir, tmp_path):
        runner = CliRunner()
        out = tmp_path / "loc"
        runner.invoke(cli, [
            "reconstruct", "--dataset", str(dataset_dir), "--scene", "scene_0005",
            "--rate", "0.3", "--method", "idw", "--out-dir", str(out),
        ], catch_exceptions=False)
        csv_path = tmp_path / "dets.csv"
        result = runner.invoke(cli, [
            "localize", "--map", str(out / "scene_0005_iss_hat.map"),
            "--out", str(csv_path),
        ])
        assert result.exit_code == 0, result.output
        with open(csv_path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert all(r["scene_id"] == "scene_0005" for r in rows)
        if rows:
            assert {"det_idx", "x_px", "y_px", "score_db"} <= set(rows[0])


class TestEvaluate:
    def test_truth_scores_zero(self, dataset_dir):
        runner = CliRunner()
        result = runner.invoke(cli, [
            "evaluate", "--dataset", str(dataset_dir), "--split", "test",
            "--estimates", str(dataset_dir),
        ])
        assert result.exit_code == 0, result.output
        assert "0.000000" in result.output

    def test_sweep_runs_and_writes_json(self, dataset_dir, tmp_path):
        runner = CliRunner()
        out = tmp_path / "res.json"
        out_csv = tmp_path / "res.csv"
        result = runner.invoke(cli, [
            "evaluate", "--dataset", str(dataset_dir), "--split", "test",
            "--rates", "0.3", "--methods", "knn", "--max-scenes", "2",
            "--out", str(out), "--out-csv", str(out_csv),
        ])
        assert result.exit_code == 0, result.output
        payload = json.loads(out.read_text())
        assert len(payload["entries"]) == 2
        assert payload["summary"][0]["method"] == "knn"
        assert np.isfinite(payload["summary"][0]["mean_iss_mse_db2"])

        with open(out_csv, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 1
        assert rows[0]["method"] == "knn"
        assert float(rows[0]["rate"]) == 0.3
        assert float(rows[0]["mean_iss_mse_db2"]) == pytest.approx(
            payload["summary"][0]["mean_iss_mse_db2"])

    def test_unknown_method_rejected(self, dataset_dir):
        runner = CliRunner()
        result = runner.invoke(cli, [
            "evaluate", "--dataset", str(dataset_dir), "--methods", "spline",
        ])
        assert result.exit_code != 0


class TestRender:
    def test_grayscale_pixels_exact(self, dataset_dir, tmp_path):
        from PIL import Image

        from ckmkit.render import resolve_bounds
        from ckmkit.sampling import power_to_db

        runner = CliRunner()
        png = tmp_path / "rin.png"
        src = dataset_dir / "scenes" / "scene_0000" / "rin.map"
        result = runner.invoke(cli, ["render", "--map", str(src), "--out", str(png)])
        assert result.exit_code == 0, result.output

        grid = read_map(src)
        bounds = resolve_bounds(grid, None)
        want = np.rint(bounds.normalize(power_to_db(grid.data)) * 255).astype(np.uint8)
        got = np.asarray(Image.open(png))
        np.testing.assert_array_equal(got, want)
        sidecar = json.loads((tmp_path / "rin.png.json").read_text())
        assert sidecar["range_db"]["r_min_db"] == pytest.approx(bounds.r_min_db)

    def test_falsecolor_with_overlays(self, dataset_dir, tmp_path):
        runner = CliRunner()
        png = tmp_path / "fc.png"
        result = runner.invoke(cli, [
            "render", "--map", str(dataset_dir / "scenes" / "scene_0000" / "rin.map"),
            "--out", str(png), "--falsecolor",
            "--truth-csv", str(dataset_dir / "scenes" / "scene_0000" / "ins.csv"),
        ])
        assert result.exit_code == 0, result.output
        sidecar = json.loads((tmp_path / "fc.png.json").read_text())
        assert sidecar["markers"][0]["shape"] == "dot"

    def test_range_override(self, dataset_dir, tmp_path):
        runner = CliRunner()
        png = tmp_path / "ovr.png"
        result = runner.invoke(cli, [
            "render", "--map", str(dataset_dir / "scenes" / "scene_0000" / "rin.map"),
            "--out", str(png), "--range-db", "-90,-50",
        ])
        assert result.exit_code == 0, result.output
        sidecar = json.loads((tmp_path / "ovr.png.json").read_text())
        assert sidecar["range_db"] == {"r_min_db": -90.0, "r_max_db": -50.0}


class TestExitCodes:
    def test_usage_error(self):
        assert main(["evaluate", "--dataset", "/nonexistent"]) == 2

    def test_io_error(self, tmp_path):
        bad = tmp_path / "bad.map"
        bad.write_bytes(b"garbage!" * 8)
        assert main(["localize", "--map", str(bad), "--out", str(tmp_path / "o.csv")]) == 3

    def test_numerical_error(self, dataset_dir, tmp_path):
        # One sample cannot support the denormalization fit.
        code = main([
            "reconstruct", "--dataset", str(dataset_dir), "--scene", "scene_0000",
            "--rate", "0.001", "--method", "knn", "--out-dir", str(tmp_path / "x"),
        ])
        assert code == 4

    def test_success_returns_zero(self, dataset_dir, tmp_path):
        code = main([
            "evaluate", "--dataset", str(dataset_dir), "--split", "test",
            "--estimates", str(dataset_dir),
        ])
        assert code == 0
