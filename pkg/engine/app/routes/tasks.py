import argparse
import logging
import time
from typing import Callable, Dict, Sequence, Tuple

from app.cli import CommandRouter, arg, field_args, read_cloud, task_config, write_provenance, write_text
from app.cloud_io import export_likelihood_csv, label_colors, load_labels, save_colored_ply, save_labels
from app.config import settings
from app.evaluation import format_metrics_table, metrics
from app.models import LabelMask, LikelihoodField, PointCloud, ShapeHistogram, SurfaceClass
from app.schemas import TaskConfig
from app.shape_histogram import fingerprint, load_histogram
from app.tasks import classify_cloud, detect_edges

logger = logging.getLogger(__name__)

router = CommandRouter()

Task = Callable[[PointCloud, ShapeHistogram, TaskConfig], Tuple[LabelMask, LikelihoodField]]


def task_args() -> list:
    return [
        arg("histogram", help="planar sample histogram"),
        arg("cloud", help="test cloud"),
        arg("--out", required=True, help="output prefix"),
        arg("--labels", help="ground-truth labels; enables <out>.metrics.json and <out>.metrics.txt"),
        arg("--timings", action="store_true", help="record wall times in the metrics report"),
        arg("--edge-radius", type=float, default=settings.EDGE_RADIUS, help="INAD radius for edge detection"),
        arg("--threshold", type=float, default=settings.THRESHOLD, help="decision threshold tau"),
        *field_args(settings.RADIUS),
    ]


def run_task(args: argparse.Namespace, task: Task, classes: Sequence[SurfaceClass]) -> None:
    config = task_config(args, r_classify=args.radius, r_edge=args.edge_radius)
    hist = load_histogram(args.histogram)
    cloud = read_cloud(args.cloud, args)
    gt = load_labels(args.labels) if args.labels else None
    if gt is not None:
        gt.check_aligned(len(cloud))

    begin = time.perf_counter()
    mask, likelihood = task(cloud, hist, config)
    elapsed = time.perf_counter() - begin

    outputs = {
        "labels": f"{args.out}.labels",
        "likelihood": f"{args.out}.csv",
        "colored": f"{args.out}.ply",
    }
    save_labels(mask, outputs["labels"])
    export_likelihood_csv(likelihood, outputs["likelihood"])
    save_colored_ply(cloud, label_colors(mask), outputs["colored"])

    parameters = {**config.model_dump(), "histogram_id": fingerprint(hist)}
    inputs: Dict[str, str] = {"histogram": args.histogram, "cloud": args.cloud}
    if gt is not None:
        inputs["labels"] = args.labels
        report = metrics(mask, gt, classes, parameters)
        if args.timings:
            report = report.model_copy(update={"wall_times": {args.subcommand: elapsed}})
        outputs["metrics"] = f"{args.out}.metrics.json"
        outputs["table"] = f"{args.out}.metrics.txt"
        write_text(outputs["metrics"], report.model_dump_json(indent=2) + "\n")
        write_text(outputs["table"], format_metrics_table(report))
        logger.info("%s mIoU %.3f", args.subcommand, report.miou)

    write_provenance(args.out, args, inputs=inputs, outputs=outputs, parameters=parameters)


@router.command("classify", help="Label points planar or curved with a planar histogram", arguments=task_args())
def cmd_classify(args: argparse.Namespace) -> None:
    run_task(args, classify_cloud, (SurfaceClass.PLANAR, SurfaceClass.CURVED))


@router.command("edges", help="Detect crease edges as low planar likelihood at a small radius", arguments=task_args())
def cmd_edges(args: argparse.Namespace) -> None:
    run_task(args, detect_edges, (SurfaceClass.PLANAR, SurfaceClass.EDGE))
