import argparse
import logging

from app.cli import CommandRouter, arg, field_args, field_parameters, read_cloud, task_config, write_provenance
from app.cloud_io import export_inad_csv, export_likelihood_csv, likelihood_colors, save_colored_ply
from app.errors import require_radius
from app.shape_histogram import back_project, load_histogram
from app.tasks import compute_field

logger = logging.getLogger(__name__)

router = CommandRouter()


@router.command(
    "backproject",
    help="Score every point of a cloud against a shape histogram",
    arguments=[
        arg("histogram", help="histogram JSON written by the histogram command"),
        arg("cloud", help="test cloud"),
        arg("--out", required=True, help="output prefix for <out>.csv and <out>.ply"),
        arg("--inad-csv", action="store_true", help="also write the per-point INAD values to <out>.inad.csv"),
        *field_args(None),
    ],
)
def cmd_backproject(args: argparse.Namespace) -> None:
    hist = load_histogram(args.histogram)
    if args.radius is None:
        args.radius = hist.source_r
    require_radius(args.radius)
    config = task_config(args)
    cloud = read_cloud(args.cloud, args)

    field = compute_field(cloud, args.radius, config)
    likelihood = back_project(hist, field)

    outputs = {"likelihood": f"{args.out}.csv", "colored": f"{args.out}.ply"}
    export_likelihood_csv(likelihood, outputs["likelihood"])
    save_colored_ply(cloud, likelihood_colors(likelihood), outputs["colored"])
    if args.inad_csv:
        outputs["inad"] = f"{args.out}.inad.csv"
        export_inad_csv(field, outputs["inad"])
    logger.info("Back-projected %s onto %d points (%d valid)", args.histogram, len(cloud), int(field.valid.sum()))

    write_provenance(
        args.out,
        args,
        inputs={"histogram": args.histogram, "cloud": args.cloud},
        outputs=outputs,
        parameters={**field_parameters(args.radius, config), "histogram_id": likelihood.histogram_id},
    )
