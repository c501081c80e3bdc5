import argparse

from app.cli import CommandRouter, arg, write_provenance, write_text
from app.cloud_io import CloudFormat, save_cloud, save_labels
from app.schemas import ViewpointDocument
from app.synth import gen_scene, load_scene_spec

router = CommandRouter()

_SUFFIX = {CloudFormat.PCD: ".pcd", CloudFormat.PLY: ".ply", CloudFormat.XYZ: ".xyz"}


@router.command(
    "synth",
    help="Generate a synthetic cloud, its labels and viewpoint from a scene spec",
    arguments=[
        arg("spec", help="scene spec JSON file"),
        arg("--out", required=True, help="output prefix"),
        arg("--format", type=CloudFormat, choices=list(CloudFormat), default=CloudFormat.PCD),
        arg("--no-normals", action="store_true", help="omit the analytic normals"),
    ],
)
def cmd_synth(args: argparse.Namespace) -> None:
    spec = load_scene_spec(args.spec)
    scene = gen_scene(spec)
    cloud = scene.cloud
    if args.no_normals or args.format == CloudFormat.XYZ:
        cloud = cloud.without_normals()

    cloud_path = args.out + _SUFFIX[args.format]
    labels_path = args.out + ".labels"
    viewpoint_path = args.out + ".viewpoint.json"
    save_cloud(cloud, cloud_path, args.format)
    save_labels(scene.labels, labels_path)
    write_text(viewpoint_path, ViewpointDocument(viewpoint=scene.viewpoint).model_dump_json() + "\n")
    write_provenance(
        args.out,
        args,
        inputs={"spec": args.spec},
        outputs={"cloud": cloud_path, "labels": labels_path, "viewpoint": viewpoint_path},
        parameters={"scene": spec.model_dump(), "format": args.format.value, "normals": cloud.has_normals},
        seed=spec.seed,
    )
