import argparse
import logging

from app.cli import CommandRouter, arg, read_cloud, write_provenance, write_text
from app.cloud_io import load_labels
from app.config import settings
from app.evaluation import bench_inad, format_metrics_table, format_timing_table, metrics
from app.models import SurfaceClass

logger = logging.getLogger(__name__)

router = CommandRouter()

CLASS_NAMES = [cls.name.lower() for cls in SurfaceClass if cls is not SurfaceClass.UNLABELED]


# ---------- METRICS ----------

@router.command(
    "eval",
    help="Per-class precision, recall, F1 and IoU of a predicted label file",
    arguments=[
        arg("--pred", required=True, help="predicted labels"),
        arg("--gt", required=True, help="ground-truth labels"),
        arg("--out", required=True, help="output prefix for <out>.metrics.json and <out>.metrics.txt"),
        arg("--classes", nargs="+", choices=CLASS_NAMES, default=["planar", "curved"]),
    ],
)
def cmd_eval(args: argparse.Namespace) -> None:
    pred, gt = load_labels(args.pred), load_labels(args.gt)
    classes = [SurfaceClass[name.upper()] for name in args.classes]
    report = metrics(pred, gt, classes, {"classes": args.classes})

    outputs = {"metrics": f"{args.out}.metrics.json", "table": f"{args.out}.metrics.txt"}
    write_text(outputs["metrics"], report.model_dump_json(indent=2) + "\n")
    write_text(outputs["table"], format_metrics_table(report))
    logger.info("mIoU %.3f over %s", report.miou, ", ".join(args.classes))
    write_provenance(
        args.out,
        args,
        inputs={"pred": args.pred, "gt": args.gt},
        outputs=outputs,
        parameters={"classes": args.classes},
    )


# ---------- TIMING ----------

@router.command(
    "bench",
    help="Per-point INAD time for a sweep of neighbor counts",
    arguments=[
        arg("cloud", help="benchmark cloud; normals are estimated when it carries none"),
        arg("--out", required=True, help="output prefix for <out>.bench.json and <out>.bench.txt"),
        arg("--k", type=int, nargs="+", default=[10, 100, 500], help="neighbor counts"),
        arg("--repetitions", type=int, default=5),
        arg("--outlier-rate", type=float, default=settings.OUTLIER_RATE),
        arg("--threads", type=int, default=settings.THREADS),
        arg("--drop-nan", action="store_true"),
    ],
)
def cmd_bench(args: argparse.Namespace) -> None:
    cloud = read_cloud(args.cloud, args)
    report = bench_inad(cloud, args.k, repetitions=args.repetitions, c=args.outlier_rate, threads=args.threads)

    outputs = {"bench": f"{args.out}.bench.json", "table": f"{args.out}.bench.txt"}
    write_text(outputs["bench"], report.model_dump_json(indent=2) + "\n")
    write_text(outputs["table"], format_timing_table(report))
    write_provenance(
        args.out,
        args,
        inputs={"cloud": args.cloud},
        outputs=outputs,
        parameters={"k": sorted(args.k), "repetitions": args.repetitions, "c": args.outlier_rate},
    )
