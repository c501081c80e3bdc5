import pytest

from app.errors import ErrorCode, ShapeError
from app.evaluation import (
    Confusion,
    bench_inad,
    class_metrics,
    confusion,
    f1,
    format_metrics_table,
    format_sweep_table,
    format_timing_table,
    iou,
    loglog_slope,
    metrics,
    precision,
    recall,
    sweep_bins,
)
from app.models import LabelMask, SurfaceClass
from app.schemas import TaskConfig
from app.synth import gen_box_scene, gen_plane


def _naive(pred, gt, cls):
    tp = fp = fn = tn = 0
    for p, g in zip(pred, gt):
        if g == SurfaceClass.UNLABELED.value:
            continue
        if p == cls and g == cls:
            tp += 1
        elif p == cls:
            fp += 1
        elif g == cls:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn


class TestMetrics:
    def test_matches_naive_tallies(self, rng):
        for _ in range(100):
            n = int(rng.integers(1, 60))
            pred = rng.choice([0, 1, 2], size=n)
            gt = rng.choice([0, 1, 2, 255], size=n)
            for cls in SurfaceClass:
                if cls is SurfaceClass.UNLABELED:
                    continue
                c = confusion(LabelMask(labels=pred), LabelMask(labels=gt), cls)
                assert tuple(c) == _naive(pred, gt, cls.value)

    def test_miou_example(self):
        pred = LabelMask(labels=[0] * 8 + [1] * 3 + [0, 1])
        gt = LabelMask(labels=[0] * 8 + [1] * 3 + [1, 0])
        report = metrics(pred, gt)
        assert [m.iou for m in report.classes] == pytest.approx([0.8, 0.6])
        assert report.miou == pytest.approx(0.7)
        assert report.wall_times is None

    def test_zero_denominators(self):
        c = Confusion(tp=0, fp=0, fn=0, tn=5)
        assert (precision(c), recall(c), f1(c), iou(c)) == (0.0, 0.0, 0.0, 0.0)

    def test_class_metrics_values(self):
        pred = LabelMask(labels=[2, 2, 0, 0])
        gt = LabelMask(labels=[2, 0, 2, 0])
        m = class_metrics(pred, gt, SurfaceClass.EDGE)
        assert (m.label, m.tp, m.fp, m.fn, m.tn) == ("edge", 1, 1, 1, 1)
        assert m.precision == m.recall == m.f1 == 0.5
        assert m.iou == pytest.approx(1 / 3)

    def test_length_mismatch(self):
        with pytest.raises(ShapeError) as info:
            confusion(LabelMask(labels=[0]), LabelMask(labels=[0, 1]), SurfaceClass.PLANAR)
        assert info.value.code == ErrorCode.LENGTH_MISMATCH

    def test_metrics_table(self):
        report = metrics(LabelMask(labels=[0, 1]), LabelMask(labels=[0, 1]))
        table = format_metrics_table(report)
        assert table.splitlines()[0].split() == ["class", "precision", "recall", "F1", "IoU"]
        assert "mIoU" in table and "1.00" in table


class TestTiming:
    def test_loglog_slope(self):
        assert loglog_slope([10, 100, 1000], [1.0, 10.0, 100.0]) == pytest.approx(1.0)
        assert loglog_slope([10], [3.0]) == 0.0

    def test_bench_rows(self):
        cloud = gen_plane(12, 12, 0.005).cloud
        report = bench_inad(cloud, [8, 2], repetitions=2)
        assert [row.k for row in report.rows] == [2, 8]
        assert all(row.us_per_point > 0 for row in report.rows)
        assert report.points == 144
        assert "log-log slope" in format_timing_table(report)

    def test_bench_needs_enough_points(self):
        with pytest.raises(ShapeError) as info:
            bench_inad(gen_plane(3, 3, 0.01).cloud, [10])
        assert info.value.code == ErrorCode.INSUFFICIENT_DENSITY
        assert info.value.exit_code == 1


class TestSweep:
    def test_sweep_rows(self):
        box = gen_box_scene(0.03, 0.001, edge_band=4)
        sample = gen_plane(31, 31, 0.001).cloud
        config = TaskConfig(r_classify=0.03, r_edge=0.006, normal_radius=0.0015, min_neighbors=5, c=1.0)
        rows = sweep_bins(box.cloud, box.labels, sample, config, [(10, 10), (20, 20)])
        assert [(r.k_mu, r.k_sigma) for r in rows] == [(10, 10), (20, 20)]
        assert all(0.0 <= r.f1 <= 1.0 for r in rows)
        assert "10x10" in format_sweep_table(rows)
