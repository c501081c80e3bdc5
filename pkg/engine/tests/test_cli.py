import json
import logging
from pathlib import Path

import numpy as np
import pytest

from app.cloud_io import load_cloud, load_labels
from app.main import build_parser, main
from app.shape_histogram import load_histogram

PLANE_SPEC = {"primitives": [{"kind": "plane", "extent": 0.1, "resolution": 0.005}], "seed": 3}
CYLINDER_SPEC = {"primitives": [{"kind": "cylinder", "radius": 0.05, "height": 0.04, "resolution": 0.0025}]}
MIXED_SPEC = {
    "primitives": [
        {"kind": "plane", "extent": 0.1, "resolution": 0.005},
        {"kind": "cylinder", "radius": 0.02, "height": 0.05, "resolution": 0.005, "origin": [0.4, 0.0, 0.0]},
    ],
    "viewpoint": [0.05, 0.05, 1.0],
}


def _synth(tmp_path: Path, name: str, spec: dict) -> str:
    spec_path = tmp_path / f"{name}.json"
    spec_path.write_text(json.dumps(spec))
    prefix = str(tmp_path / name)
    assert main(["synth", str(spec_path), "--out", prefix]) == 0
    return prefix


class TestParser:
    def test_every_subcommand_is_mounted(self):
        parser = build_parser()
        subparsers = next(a for a in parser._actions if a.dest == "subcommand")
        assert set(subparsers.choices) == {
            "synth", "histogram", "backproject", "classify", "edges", "eval", "bench", "ransac",
        }

    def test_unknown_subcommand(self):
        assert main(["nope"]) == 2


class TestSynth:
    def test_writes_cloud_labels_viewpoint_and_provenance(self, tmp_path):
        prefix = _synth(tmp_path, "plane", PLANE_SPEC)
        cloud = load_cloud(prefix + ".pcd")
        assert len(cloud) == 21 * 21 and cloud.has_normals
        assert len(load_labels(prefix + ".labels")) == len(cloud)
        assert json.loads(Path(prefix + ".viewpoint.json").read_text())["viewpoint"] == pytest.approx([0.05, 0.05, 1.0])
        run = json.loads(Path(prefix + ".config.json").read_text())
        assert run["subcommand"] == "synth" and run["seed"] == 3

    def test_xyz_format_drops_normals(self, tmp_path):
        spec_path = tmp_path / "s.json"
        spec_path.write_text(json.dumps(PLANE_SPEC))
        assert main(["synth", str(spec_path), "--out", str(tmp_path / "p"), "--format", "xyz"]) == 0
        assert not load_cloud(tmp_path / "p.xyz").has_normals

    def test_malformed_spec_exits_2(self, tmp_path, caplog):
        spec_path = tmp_path / "bad.json"
        spec_path.write_text('{"primitives": []}')
        assert main(["synth", str(spec_path), "--out", str(tmp_path / "x")]) == 2
        assert "bad-spec" in caplog.text


class TestHistogramAndBackProject:
    def test_plane_histogram_peaks_at_origin_bin(self, tmp_path):
        prefix = _synth(tmp_path, "plane", PLANE_SPEC)
        out = str(tmp_path / "plane.hist.json")
        assert main(["histogram", prefix + ".pcd", "--out", out, "--radius", "0.011"]) == 0
        hist = load_histogram(out)
        assert hist.bins[0, 0] == 1.0 and hist.bins.sum() == 1.0
        assert Path(out + ".config.json").exists()

    def test_cylinder_argmax_shifts_with_radius(self, tmp_path):
        prefix = _synth(tmp_path, "cyl", CYLINDER_SPEC)
        peaks = []
        for r in ("0.006", "0.03"):
            out = str(tmp_path / f"cyl.{r}.json")
            args = ["histogram", prefix + ".pcd", "--out", out, "--radius", r, "--viewpoint-file", prefix + ".viewpoint.json"]
            assert main(args) == 0
            bins = load_histogram(out).bins
            peaks.append(np.unravel_index(np.argmax(bins), bins.shape))
        assert peaks[0] != peaks[1]

    def test_empty_cloud_exits_2(self, tmp_path):
        empty = tmp_path / "empty.xyz"
        empty.write_text("")
        assert main(["histogram", str(empty), "--out", str(tmp_path / "h.json")]) == 2

    def test_plane_on_plane_back_projection(self, tmp_path, caplog):
        prefix = _synth(tmp_path, "plane", PLANE_SPEC)
        hist = str(tmp_path / "h.json")
        assert main(["histogram", prefix + ".pcd", "--out", hist, "--radius", "0.011"]) == 0
        out = str(tmp_path / "bp")
        with caplog.at_level(logging.WARNING):
            assert main(["backproject", hist, prefix + ".pcd", "--out", out, "--inad-csv"]) == 0
        assert "Histogram was built" not in caplog.text
        rows = Path(out + ".csv").read_text().splitlines()[1:]
        assert rows and all(row.split(",")[1:] == ["1.000000", "1"] for row in rows)
        assert Path(out + ".ply").exists() and Path(out + ".inad.csv").exists()

    def test_mismatched_radius_warns_and_proceeds(self, tmp_path, caplog):
        prefix = _synth(tmp_path, "plane", PLANE_SPEC)
        hist = str(tmp_path / "h.json")
        assert main(["histogram", prefix + ".pcd", "--out", hist, "--radius", "0.011"]) == 0
        with caplog.at_level(logging.WARNING):
            assert main(["backproject", hist, prefix + ".pcd", "--out", str(tmp_path / "bp"), "--radius", "0.016"]) == 0
        assert "Histogram was built" in caplog.text


class TestTasksAndReports:
    def _plane_histogram(self, tmp_path) -> str:
        prefix = _synth(tmp_path, "plane", PLANE_SPEC)
        hist = str(tmp_path / "plane.hist.json")
        assert main(["histogram", prefix + ".pcd", "--out", hist, "--radius", "0.012", "--normal-radius", "0.011"]) == 0
        return hist

    def test_classify_writes_metrics(self, tmp_path):
        hist = self._plane_histogram(tmp_path)
        scene = _synth(tmp_path, "mixed", MIXED_SPEC)
        out = str(tmp_path / "cls")
        args = [
            "classify", hist, scene + ".pcd", "--out", out, "--labels", scene + ".labels",
            "--radius", "0.012", "--normal-radius", "0.011", "--edge-radius", "0.006",
            "--viewpoint-file", scene + ".viewpoint.json",
        ]
        assert main(args) == 0
        report = json.loads(Path(out + ".metrics.json").read_text())
        assert [c["label"] for c in report["classes"]] == ["planar", "curved"]
        assert report["classes"][0]["recall"] == 1.0
        assert report["wall_times"] is None
        assert len(load_labels(out + ".labels")) == len(load_cloud(scene + ".pcd"))

    def test_identical_runs_are_byte_identical(self, tmp_path):
        hist = self._plane_histogram(tmp_path)
        scene = _synth(tmp_path, "mixed", MIXED_SPEC)
        outputs = []
        for name in ("a", "b"):
            out = str(tmp_path / name)
            args = ["classify", hist, scene + ".pcd", "--out", out, "--labels", scene + ".labels", "--radius", "0.012"]
            assert main(args) == 0
            outputs.append([Path(out + suffix).read_bytes() for suffix in (".labels", ".csv", ".ply", ".metrics.json")])
        assert outputs[0] == outputs[1]

    def test_timings_flag(self, tmp_path):
        hist = self._plane_histogram(tmp_path)
        scene = _synth(tmp_path, "mixed", MIXED_SPEC)
        out = str(tmp_path / "t")
        args = ["classify", hist, scene + ".pcd", "--out", out, "--labels", scene + ".labels", "--radius", "0.012", "--timings"]
        assert main(args) == 0
        assert "classify" in json.loads(Path(out + ".metrics.json").read_text())["wall_times"]

    def test_eval(self, tmp_path):
        (tmp_path / "p.labels").write_text("0\n0\n1\n2\n")
        (tmp_path / "g.labels").write_text("0\n1\n1\n2\n")
        out = str(tmp_path / "ev")
        args = ["eval", "--pred", str(tmp_path / "p.labels"), "--gt", str(tmp_path / "g.labels"), "--out", out,
                "--classes", "planar", "curved", "edge"]
        assert main(args) == 0
        report = json.loads(Path(out + ".metrics.json").read_text())
        assert report["miou"] == pytest.approx((0.5 + 0.5 + 1.0) / 3)
        assert "mIoU" in Path(out + ".metrics.txt").read_text()

    def test_eval_length_mismatch_exits_2(self, tmp_path):
        (tmp_path / "p.labels").write_text("0\n")
        (tmp_path / "g.labels").write_text("0\n1\n")
        args = ["eval", "--pred", str(tmp_path / "p.labels"), "--gt", str(tmp_path / "g.labels"), "--out", str(tmp_path / "e")]
        assert main(args) == 2

    def test_bench_and_density_error(self, tmp_path):
        prefix = _synth(tmp_path, "plane", PLANE_SPEC)
        out = str(tmp_path / "bench")
        assert main(["bench", prefix + ".pcd", "--out", out, "--k", "4", "16", "--repetitions", "1"]) == 0
        assert [row["k"] for row in json.loads(Path(out + ".bench.json").read_text())["rows"]] == [4, 16]
        assert main(["bench", prefix + ".pcd", "--out", out, "--k", "1000"]) == 1

    def test_ransac_report(self, tmp_path):
        scene = _synth(tmp_path, "mixed", MIXED_SPEC)
        out = str(tmp_path / "rs")
        args = ["ransac", scene + ".pcd", "--out", out, "--threshold", "0.001", "--iterations", "200",
                "--normal-threshold", "10", "--labels", scene + ".labels"]
        assert main(args) == 0
        report = json.loads(Path(out + ".ransac.json").read_text())
        assert report["instances"][0]["model"]["kind"] == "cylinder"
        assert report["instances"][0]["model"]["radius"] == pytest.approx(0.02, rel=1e-3)
        assert report["requested"] == 1
        assert report["rounds"] == [{"round": 1, "status": "found", "inlier_count": report["instances"][0]["inlier_count"], "detail": None}]
        assert Path(out + ".metrics.json").exists()
