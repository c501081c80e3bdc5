import argparse
import logging

from app.cli import CommandRouter, arg, field_parameters, pipeline_args, read_cloud, task_config, write_provenance
from app.cloud_io import load_labels
from app.config import settings
from app.errors import require_radius
from app.models import SurfaceClass
from app.shape_histogram import save_histogram
from app.tasks import sample_histogram

logger = logging.getLogger(__name__)

router = CommandRouter()

CLASS_NAMES = [cls.name.lower() for cls in SurfaceClass if cls is not SurfaceClass.UNLABELED]


@router.command(
    "histogram",
    help="Learn the shape histogram of a sample surface",
    arguments=[
        arg("cloud", help="sample cloud (.pcd, .ply or .xyz)"),
        arg("--out", required=True, help="histogram JSON path"),
        arg("--labels", help="per-point labels of the sample cloud"),
        arg("--label", choices=CLASS_NAMES, help="learn only from points with this label"),
        *pipeline_args(settings.RADIUS),
    ],
)
def cmd_histogram(args: argparse.Namespace) -> None:
    require_radius(args.radius)
    config = task_config(args)
    cloud = read_cloud(args.cloud, args)
    labels = load_labels(args.labels) if args.labels else None
    label = SurfaceClass[args.label.upper()] if args.label else None

    hist = sample_histogram(cloud, args.radius, config, labels=labels, label=label)
    save_histogram(hist, args.out)
    logger.info("Wrote %dx%d histogram of %d samples to %s", hist.k_mu, hist.k_sigma, hist.sample_count, args.out)

    inputs = {"cloud": args.cloud}
    if args.labels:
        inputs["labels"] = args.labels
    write_provenance(
        args.out,
        args,
        inputs=inputs,
        outputs={"histogram": args.out},
        parameters={**field_parameters(args.radius, config), "label": args.label},
    )
