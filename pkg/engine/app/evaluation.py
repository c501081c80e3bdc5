"""Precision/recall/F1/IoU against ground-truth masks, INAD timing and bin-count sweeps."""

import logging
import time
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from app.config import settings
from app.errors import ErrorCode, ShapeError
from app.inad import fold_degrees, inad_from_pairs
from app.models import LabelMask, NormalField, PointCloud, SurfaceClass
from app.normals import estimate_all_normals
from app.schemas import BenchReport, ClassMetrics, MetricsReport, SweepRow, TaskConfig, TimingRow
from app.shape_histogram import back_project, build_histogram
from app.spatial_index import build_index, knn_pairs
from app.tasks import complement, compute_field, label_edges
from app.utils import run_chunked

logger = logging.getLogger(__name__)

DEFAULT_CLASSES = (SurfaceClass.PLANAR, SurfaceClass.CURVED)


class Confusion(NamedTuple):
    tp: int
    fp: int
    fn: int
    tn: int


def _ratio(num: float, den: float) -> float:
    return float(num) / den if den > 0 else 0.0


def precision(c: Confusion) -> float:
    return _ratio(c.tp, c.tp + c.fp)


def recall(c: Confusion) -> float:
    return _ratio(c.tp, c.tp + c.fn)


def f1(c: Confusion) -> float:
    p, r = precision(c), recall(c)
    return _ratio(2 * p * r, p + r)


def iou(c: Confusion) -> float:
    return _ratio(c.tp, c.tp + c.fp + c.fn)


def confusion(pred: LabelMask, gt: LabelMask, positive_class: SurfaceClass) -> Confusion:
    """Binary counts for one class; points unlabeled in the ground truth are ignored."""
    if len(pred) != len(gt):
        raise ShapeError(ErrorCode.LENGTH_MISMATCH, f"prediction has {len(pred)} labels, ground truth {len(gt)}")
    labelled = gt.labels != SurfaceClass.UNLABELED.value
    p = pred.labels[labelled] == positive_class.value
    g = gt.labels[labelled] == positive_class.value
    return Confusion(
        tp=int(np.count_nonzero(p & g)),
        fp=int(np.count_nonzero(p & ~g)),
        fn=int(np.count_nonzero(~p & g)),
        tn=int(np.count_nonzero(~p & ~g)),
    )


def class_metrics(pred: LabelMask, gt: LabelMask, cls: SurfaceClass) -> ClassMetrics:
    c = confusion(pred, gt, cls)
    return ClassMetrics(
        label=cls.name.lower(),
        tp=c.tp,
        fp=c.fp,
        fn=c.fn,
        tn=c.tn,
        precision=precision(c),
        recall=recall(c),
        f1=f1(c),
        iou=iou(c),
    )


def metrics(
    pred: LabelMask,
    gt: LabelMask,
    classes: Sequence[SurfaceClass] = DEFAULT_CLASSES,
    parameters: Optional[Dict[str, object]] = None,
) -> MetricsReport:
    rows = [class_metrics(pred, gt, cls) for cls in classes]
    miou = float(np.mean([row.iou for row in rows])) if rows else 0.0
    return MetricsReport(classes=rows, miou=miou, parameters=parameters or {})


# ---------- TIMING ----------

def loglog_slope(ks: Sequence[float], values: Sequence[float]) -> float:
    """Least-squares slope of log(value) against log(k)."""
    if len(ks) < 2:
        return 0.0
    slope, _ = np.polyfit(np.log(np.asarray(ks, dtype=np.float64)), np.log(np.asarray(values, dtype=np.float64)), 1)
    return float(slope)


def _time_once(normals: np.ndarray, owner: np.ndarray, neighbor: np.ndarray, n: int, k: int, c: float, threads: int) -> float:
    def work(start: int, stop: int) -> None:
        lo, hi = start * k, stop * k
        alpha = fold_degrees(np.einsum("ij,ij->i", normals[owner[lo:hi]], normals[neighbor[lo:hi]]))
        inad_from_pairs(owner[lo:hi] - start, alpha, stop - start, c)

    begin = time.perf_counter()
    run_chunked(n, work, threads=threads, chunk_size=n if threads <= 1 else settings.CHUNK_SIZE)
    return time.perf_counter() - begin


def bench_inad(
    cloud: PointCloud,
    k_list: Sequence[int],
    repetitions: int = 5,
    normals: Optional[NormalField] = None,
    c: float = settings.OUTLIER_RATE,
    threads: int = 1,
) -> BenchReport:
    """Median per-point INAD time (angles, outlier rejection, statistics) for exactly k nearest neighbors.

    The neighbor search itself is not timed. A warm-up pass is discarded.
    """
    ks = sorted(int(k) for k in k_list)
    if not ks or ks[0] < 1:
        raise ShapeError(ErrorCode.INVARIANT_VIOLATION, "k_list must hold positive neighbor counts")
    if repetitions < 1:
        raise ShapeError(ErrorCode.INVARIANT_VIOLATION, "repetitions must be >= 1")
    n = len(cloud)
    if n <= ks[-1]:
        raise ShapeError(ErrorCode.INSUFFICIENT_DENSITY, f"{n} points cannot provide {ks[-1]} neighbors each")

    index = build_index(cloud)
    if normals is None:
        normals = (
            NormalField.from_cloud(cloud)
            if cloud.has_normals
            else estimate_all_normals(cloud, index, settings.RADIUS, threads=threads)
        )
    vecs = normals.normals

    rows: List[TimingRow] = []
    for k in ks:
        owner, neighbor = knn_pairs(index, np.arange(n), k)
        _time_once(vecs, owner, neighbor, n, k, c, threads)
        samples = [_time_once(vecs, owner, neighbor, n, k, c, threads) for _ in range(repetitions)]
        us = float(np.median(samples)) / n * 1e6
        logger.info("k=%d: %.2f us/point (median of %d)", k, us, repetitions)
        rows.append(TimingRow(k=k, us_per_point=us, repetitions=repetitions))

    slope = loglog_slope([row.k for row in rows], [row.us_per_point for row in rows])
    return BenchReport(rows=rows, loglog_slope=slope, points=n, threads=threads)


# ---------- SWEEPS ----------

def sweep_bins(
    cloud: PointCloud,
    gt: LabelMask,
    plane_sample: PointCloud,
    config: TaskConfig,
    bins: Sequence[Tuple[int, int]],
) -> List[SweepRow]:
    """Edge-detection F1 for each (k_mu, k_sigma); INAD fields are computed once at r_edge."""
    gt.check_aligned(len(cloud))
    plane_field = compute_field(plane_sample, config.r_edge, config)
    test_field = compute_field(cloud, config.r_edge, config)
    rows = []
    for k_mu, k_sigma in bins:
        hist = build_histogram(plane_field, k_mu, k_sigma, config.mu_max, config.sigma_max)
        mask = label_edges(complement(back_project(hist, test_field)), config.tau)
        score = f1(confusion(mask, gt, SurfaceClass.EDGE))
        logger.info("bins %dx%d: edge F1 %.3f", k_mu, k_sigma, score)
        rows.append(SweepRow(k_mu=k_mu, k_sigma=k_sigma, f1=score))
    return rows


# ---------- TABLES ----------

def _table(header: List[str], body: List[List[str]]) -> str:
    widths = [max(len(cell) for cell in column) for column in zip(header, *body)]
    lines = ["  ".join(cell.rjust(w) for cell, w in zip(row, widths)) for row in [header] + body]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def format_metrics_table(report: MetricsReport) -> str:
    body = [
        [m.label, f"{m.precision:.2f}", f"{m.recall:.2f}", f"{m.f1:.2f}", f"{m.iou:.2f}"]
        for m in report.classes
    ]
    body.append(["mIoU", "", "", "", f"{report.miou:.2f}"])
    return _table(["class", "precision", "recall", "F1", "IoU"], body)


def format_timing_table(report: BenchReport) -> str:
    body = [[str(row.k), f"{row.us_per_point:.1f}"] for row in report.rows]
    return _table(["neighbors", "us/point"], body) + f"log-log slope: {report.loglog_slope:.2f}\n"


def format_sweep_table(rows: Sequence[SweepRow]) -> str:
    return _table(["bins", "edge F1"], [[f"{r.k_mu}x{r.k_sigma}", f"{r.f1:.2f}"] for r in rows])
