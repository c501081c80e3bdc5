import argparse
import logging

from pydantic import ValidationError

from app.baseline import extract_instances, instances_mask
from app.cli import CommandRouter, arg, read_cloud, resolve_viewpoint, viewpoint_args, write_provenance, write_text
from app.cloud_io import label_colors, load_labels, save_colored_ply, save_labels
from app.config import settings
from app.errors import ErrorCode, ShapeError
from app.evaluation import format_metrics_table, metrics
from app.models import NormalField, SurfaceClass
from app.normals import estimate_all_normals
from app.schemas import InstanceResult, RansacConfig, RansacReport
from app.spatial_index import build_index

logger = logging.getLogger(__name__)

router = CommandRouter()


def ransac_config(args: argparse.Namespace) -> RansacConfig:
    limits = None
    if args.radius_min is not None or args.radius_max is not None:
        limits = (args.radius_min or 0.0, args.radius_max if args.radius_max is not None else float("inf"))
    try:
        return RansacConfig(
            model=args.model,
            inlier_threshold=args.threshold,
            max_iterations=args.iterations,
            min_inliers=args.min_inliers,
            seed=args.seed,
            normal_threshold_deg=args.normal_threshold,
            radius_limits=limits,
        )
    except ValidationError as exc:
        raise ShapeError(ErrorCode.BAD_SPEC, str(exc)) from exc


@router.command(
    "ransac",
    help="RANSAC plane or cylinder extraction, the multi-instance baseline",
    arguments=[
        arg("cloud", help="input cloud"),
        arg("--out", required=True, help="output prefix"),
        arg("--model", choices=["plane", "cylinder"], default="cylinder"),
        arg("--instances", type=int, default=1, help="models to extract, removing inliers between rounds"),
        arg("--threshold", type=float, default=settings.RANSAC_THRESHOLD, help="inlier distance in meters"),
        arg("--iterations", type=int, default=settings.RANSAC_ITERATIONS),
        arg("--min-inliers", type=int, default=50),
        arg("--normal-threshold", type=float, default=None, help="max normal deviation of inliers in degrees"),
        arg("--radius-min", type=float, default=None),
        arg("--radius-max", type=float, default=None),
        arg("--normal-radius", type=float, default=settings.RADIUS,
            help="radius for normal estimation when the cloud carries none"),
        arg("--min-neighbors", type=int, default=settings.MIN_NEIGHBORS),
        arg("--labels", help="ground-truth labels; enables <out>.metrics.json"),
        arg("--seed", type=int, default=settings.SEED),
        arg("--threads", type=int, default=settings.THREADS),
        arg("--drop-nan", action="store_true"),
        *viewpoint_args(),
    ],
)
def cmd_ransac(args: argparse.Namespace) -> None:
    config = ransac_config(args)
    cloud = read_cloud(args.cloud, args)
    gt = load_labels(args.labels) if args.labels else None
    if gt is not None:
        gt.check_aligned(len(cloud))

    if cloud.has_normals:
        normals = NormalField.from_cloud(cloud)
    else:
        normals = estimate_all_normals(
            cloud,
            build_index(cloud),
            args.normal_radius,
            viewpoint=resolve_viewpoint(args),
            min_neighbors=args.min_neighbors,
            threads=args.threads,
        )

    found, rounds = extract_instances(cloud, normals, config, args.instances)
    label = SurfaceClass.CURVED if config.model == "cylinder" else SurfaceClass.PLANAR
    mask = instances_mask(len(cloud), found, label)
    report = RansacReport(
        config=config,
        requested=args.instances,
        instances=[InstanceResult(model=model, inlier_count=len(inliers)) for model, inliers in found],
        rounds=rounds,
    )

    outputs = {
        "report": f"{args.out}.ransac.json",
        "labels": f"{args.out}.labels",
        "colored": f"{args.out}.ply",
    }
    write_text(outputs["report"], report.model_dump_json(indent=2) + "\n")
    save_labels(mask, outputs["labels"])
    save_colored_ply(cloud, label_colors(mask), outputs["colored"])

    inputs = {"cloud": args.cloud}
    parameters = {**config.model_dump(), "instances": args.instances}
    if gt is not None:
        inputs["labels"] = args.labels
        evaluated = metrics(mask, gt, (SurfaceClass.PLANAR, SurfaceClass.CURVED), parameters)
        outputs["metrics"] = f"{args.out}.metrics.json"
        outputs["table"] = f"{args.out}.metrics.txt"
        write_text(outputs["metrics"], evaluated.model_dump_json(indent=2) + "\n")
        write_text(outputs["table"], format_metrics_table(evaluated))
    write_provenance(args.out, args, inputs=inputs, outputs=outputs, parameters=parameters)
