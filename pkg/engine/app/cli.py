"""Command registry shared by the route modules, plus option and provenance helpers."""

import argparse
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from app.cloud_io import load_cloud
from app.config import settings
from app.errors import ErrorCode, ShapeError
from app.models import PointCloud
from app.schemas import RunConfig, TaskConfig, ViewpointDocument, parse_document

logger = logging.getLogger(__name__)

Handler = Callable[[argparse.Namespace], None]


@dataclass
class Argument:
    flags: Tuple[str, ...]
    options: Dict[str, Any]


def arg(*flags: str, **options: Any) -> Argument:
    return Argument(flags, options)


@dataclass
class Command:
    name: str
    help: str
    handler: Handler
    arguments: List[Argument] = field(default_factory=list)


class CommandRouter:
    """Groups subcommands; ``main`` mounts every router onto one parser."""

    def __init__(self) -> None:
        self.commands: List[Command] = []

    def command(self, name: str, help: str, arguments: Sequence[Argument] = ()) -> Callable[[Handler], Handler]:
        def register(handler: Handler) -> Handler:
            self.commands.append(Command(name, help, handler, list(arguments)))
            return handler

        return register


def include_router(subparsers: argparse._SubParsersAction, router: CommandRouter) -> None:
    for cmd in router.commands:
        sub = subparsers.add_parser(cmd.name, help=cmd.help, description=cmd.help)
        for a in cmd.arguments:
            sub.add_argument(*a.flags, **a.options)
        sub.set_defaults(handler=cmd.handler, subcommand=cmd.name)


# ---------- SHARED OPTIONS ----------

def viewpoint_args() -> List[Argument]:
    return [
        arg("--viewpoint", type=float, nargs=3, metavar=("X", "Y", "Z"), default=None,
            help="sensor position used to orient normals (default: origin)"),
        arg("--viewpoint-file", default=None, help="viewpoint JSON written by synth"),
    ]


def resolve_viewpoint(args: argparse.Namespace) -> Tuple[float, float, float]:
    if args.viewpoint is not None:
        return tuple(args.viewpoint)
    if args.viewpoint_file:
        doc = parse_document(ViewpointDocument, read_text(args.viewpoint_file), ErrorCode.BAD_SPEC)
        return doc.viewpoint
    return (0.0, 0.0, 0.0)


def field_args(radius_default: Optional[float]) -> List[Argument]:
    """Options shared by every command that computes an INAD field."""
    return [
        arg("--radius", type=float, default=radius_default, help="INAD neighbor search radius in meters"),
        arg("--normal-radius", type=float, default=settings.NORMAL_RADIUS,
            help="normal estimation radius (default: --radius)"),
        arg("--min-neighbors", type=int, default=settings.MIN_NEIGHBORS),
        arg("--outlier-rate", type=float, default=settings.OUTLIER_RATE),
        arg("--threads", type=int, default=settings.THREADS),
        arg("--seed", type=int, default=settings.SEED),
        arg("--drop-nan", action="store_true", help="drop records whose coordinates are all NaN"),
        *viewpoint_args(),
    ]


def pipeline_args(radius_default: Optional[float]) -> List[Argument]:
    return field_args(radius_default) + [
        arg("--bins-mu", type=int, default=settings.BINS_MU),
        arg("--bins-sigma", type=int, default=settings.BINS_SIGMA),
        arg("--mu-max", type=float, default=settings.MU_MAX),
        arg("--sigma-max", type=float, default=settings.SIGMA_MAX),
        arg("--threshold", type=float, default=settings.THRESHOLD, help="decision threshold tau"),
    ]


def task_config(args: argparse.Namespace, **overrides: Any) -> TaskConfig:
    values = dict(
        normal_radius=args.normal_radius,
        min_neighbors=args.min_neighbors,
        c=args.outlier_rate,
        k_mu=getattr(args, "bins_mu", settings.BINS_MU),
        k_sigma=getattr(args, "bins_sigma", settings.BINS_SIGMA),
        mu_max=getattr(args, "mu_max", settings.MU_MAX),
        sigma_max=getattr(args, "sigma_max", settings.SIGMA_MAX),
        tau=getattr(args, "threshold", settings.THRESHOLD),
        viewpoint=resolve_viewpoint(args),
        threads=args.threads,
    )
    values.update(overrides)
    try:
        return TaskConfig(**values)
    except ValidationError as exc:
        raise ShapeError(ErrorCode.BAD_SPEC, str(exc)) from exc


def read_cloud(path: str, args: argparse.Namespace) -> PointCloud:
    cloud = load_cloud(path, drop_nan=getattr(args, "drop_nan", False))
    cloud.require_points()
    return cloud


def write_provenance(
    out: str,
    args: argparse.Namespace,
    inputs: Dict[str, str],
    outputs: Dict[str, str],
    parameters: Dict[str, Any],
    seed: Optional[int] = None,
) -> Path:
    """Write ``<out>.config.json`` with the fully resolved run configuration."""
    sidecar = Path(f"{out}.config.json")
    run = RunConfig(
        subcommand=args.subcommand,
        inputs=inputs,
        outputs=outputs,
        parameters=parameters,
        seed=seed if seed is not None else getattr(args, "seed", settings.SEED),
        threads=getattr(args, "threads", settings.THREADS),
    )
    try:
        sidecar.write_text(run.model_dump_json(indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise ShapeError(ErrorCode.IO_ERROR, f"{sidecar}: {exc.strerror or exc}") from exc
    return sidecar


def write_text(path: str, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ShapeError(ErrorCode.IO_ERROR, f"{path}: {exc.strerror or exc}") from exc


def read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ShapeError(ErrorCode.IO_ERROR, f"{path}: {exc.strerror or exc}") from exc


def field_parameters(radius: float, config: TaskConfig) -> Dict[str, Any]:
    """Resolved pipeline parameters for a single-radius run; the task radii are replaced by ``radius``."""
    return {"radius": radius, **config.model_dump(exclude={"r_classify", "r_edge"})}
