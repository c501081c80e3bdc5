import argparse
import logging
import sys
from typing import List, Optional

from app.cli import include_router
from app.config import settings
from app.errors import ShapeError

# ROUTES
from app.routes import backproject, baseline, evaluation, histogram, synth, tasks

logger = logging.getLogger("app")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shapebp",
        description="Shape back-projection: INAD shape histograms for point cloud surface classification",
    )
    subparsers = parser.add_subparsers(dest="subcommand", required=True, metavar="COMMAND")

    include_router(subparsers, synth.router)
    include_router(subparsers, histogram.router)
    include_router(subparsers, backproject.router)
    include_router(subparsers, tasks.router)
    include_router(subparsers, evaluation.router)
    include_router(subparsers, baseline.router)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(
        level=settings.LOG_LEVEL.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        args.handler(args)
    except ShapeError as exc:
        logger.error("%s", exc)
        return exc.exit_code
    except Exception:
        logger.exception("Unexpected failure in %s", args.subcommand)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
