"""Synthetic clouds with exact ground truth: planes, cylinders and three-plane box corners."""

import logging
from pathlib import Path
from typing import List, NamedTuple, Tuple, Union

import numpy as np

from app.errors import ErrorCode, ShapeError
from app.models import LabelMask, PointCloud, SurfaceClass
from app.schemas import BoxPrimitive, CylinderPrimitive, PlanePrimitive, SceneSpec, parse_document

logger = logging.getLogger(__name__)

Vec3 = Tuple[float, float, float]


class Scene(NamedTuple):
    cloud: PointCloud
    labels: LabelMask
    viewpoint: Vec3


def _jitter(points: np.ndarray, normals: np.ndarray, noise_sigma: float, seed: int) -> np.ndarray:
    if noise_sigma < 0:
        raise ShapeError(ErrorCode.BAD_SPEC, f"noise_sigma must be >= 0, got {noise_sigma}")
    if noise_sigma == 0:
        return points
    rng = np.random.default_rng(seed)
    return points + rng.normal(0.0, noise_sigma, size=len(points))[:, None] * normals


def _check_res(res: float) -> None:
    if not res > 0:
        raise ShapeError(ErrorCode.BAD_SPEC, f"resolution must be positive, got {res}")


def gen_plane(nx: int, ny: int, res: float, noise_sigma: float = 0.0, seed: int = 0) -> Scene:
    """nx x ny grid in z=0, jittered along z; viewpoint 1 m above the grid centre."""
    if nx < 2 or ny < 2:
        raise ShapeError(ErrorCode.BAD_SPEC, f"plane grid must be at least 2x2, got {nx}x{ny}")
    _check_res(res)
    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    points = np.stack([i.ravel() * res, j.ravel() * res, np.zeros(nx * ny)], axis=1)
    normals = np.tile([0.0, 0.0, 1.0], (len(points), 1))
    points = _jitter(points, normals, noise_sigma, seed)
    viewpoint = ((nx - 1) * res / 2, (ny - 1) * res / 2, 1.0)
    return Scene(
        PointCloud(points=points, normals=normals),
        LabelMask.full(len(points), SurfaceClass.PLANAR),
        viewpoint,
    )


def gen_cylinder(R: float, height: float, res: float, noise_sigma: float = 0.0, seed: int = 0) -> Scene:
    """Lateral surface of a z-axis cylinder with its base at z=0, jittered radially."""
    _check_res(res)
    if not R > 0 or not height > 0:
        raise ShapeError(ErrorCode.BAD_SPEC, "cylinder radius and height must be positive")
    if res >= R:
        raise ShapeError(ErrorCode.BAD_SPEC, f"resolution {res} must be smaller than radius {R}")
    n_around = max(3, int(round(2 * np.pi * R / res)))
    n_axial = max(1, int(round(height / res)))
    theta, k = np.meshgrid(np.arange(n_around) * (2 * np.pi / n_around), np.arange(n_axial), indexing="ij")
    theta, k = theta.ravel(), k.ravel()
    normals = np.stack([np.cos(theta), np.sin(theta), np.zeros_like(theta)], axis=1)
    points = np.stack([R * normals[:, 0], R * normals[:, 1], k * res], axis=1)
    points = _jitter(points, normals, noise_sigma, seed)
    return Scene(
        PointCloud(points=points, normals=normals),
        LabelMask.full(len(points), SurfaceClass.CURVED),
        (3.0 * R, 0.0, height / 2),
    )


def gen_box_scene(
    L: float, res: float, noise_sigma: float = 0.0, seed: int = 0, edge_band: float = 2.0
) -> Scene:
    """Three orthogonal square faces meeting at the origin (x=0, y=0, z=0 planes).

    Points whose grid distance to one of the three creases is at most ``edge_band`` samples are edges.
    """
    _check_res(res)
    if not L > 0 or res >= L / 10:
        raise ShapeError(ErrorCode.BAD_SPEC, f"box needs L > 0 and res < L/10, got L={L}, res={res}")
    n = int(round(L / res)) + 1
    a, b = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    a, b = a.ravel(), b.ravel()

    faces: List[Tuple[np.ndarray, np.ndarray, np.ndarray]] = []
    # floor z=0 keeps both creases it touches
    faces.append((np.stack([a, b, np.zeros_like(a)], axis=1), np.minimum(a, b), np.array([0.0, 0.0, 1.0])))
    wall_y = b >= 1
    faces.append(
        (np.stack([a[wall_y], np.zeros(wall_y.sum(), dtype=a.dtype), b[wall_y]], axis=1),
         np.minimum(a[wall_y], b[wall_y]), np.array([0.0, 1.0, 0.0]))
    )
    wall_x = (a >= 1) & (b >= 1)
    faces.append(
        (np.stack([np.zeros(wall_x.sum(), dtype=a.dtype), a[wall_x], b[wall_x]], axis=1),
         np.minimum(a[wall_x], b[wall_x]), np.array([1.0, 0.0, 0.0]))
    )

    grid = np.concatenate([f[0] for f in faces]).astype(np.float64)
    crease_dist = np.concatenate([f[1] for f in faces])
    normals = np.concatenate([np.tile(f[2], (len(f[0]), 1)) for f in faces])
    points = _jitter(grid * res, normals, noise_sigma, seed)
    labels = np.where(crease_dist <= edge_band, SurfaceClass.EDGE.value, SurfaceClass.PLANAR.value)
    logger.info("Box scene: %d points, %d edge", len(points), int(np.count_nonzero(labels == SurfaceClass.EDGE.value)))
    return Scene(PointCloud(points=points, normals=normals), LabelMask(labels=labels), (L, L, L))


def _generate(primitive: Union[PlanePrimitive, CylinderPrimitive, BoxPrimitive], noise_sigma: float, seed: int) -> Scene:
    if isinstance(primitive, PlanePrimitive):
        n = int(round(primitive.extent / primitive.resolution)) + 1
        return gen_plane(n, n, primitive.resolution, noise_sigma, seed)
    if isinstance(primitive, CylinderPrimitive):
        return gen_cylinder(primitive.radius, primitive.height, primitive.resolution, noise_sigma, seed)
    return gen_box_scene(primitive.edge_length, primitive.resolution, noise_sigma, seed, primitive.edge_band)


def gen_scene(spec: SceneSpec) -> Scene:
    """Concatenate the spec's primitives, each shifted by its origin and seeded from the scene seed."""
    children = np.random.SeedSequence(spec.seed).spawn(len(spec.primitives))
    parts = []
    for primitive, child in zip(spec.primitives, children):
        scene = _generate(primitive, spec.noise_sigma, int(child.generate_state(1)[0]))
        offset = np.asarray(primitive.origin)
        parts.append((scene, offset))

    points = np.concatenate([s.cloud.points + off for s, off in parts])
    normals = np.concatenate([s.cloud.normals for s, _ in parts])
    labels = np.concatenate([s.labels.labels for s, _ in parts])
    first, first_offset = parts[0]
    viewpoint = spec.viewpoint or tuple(float(v) for v in np.asarray(first.viewpoint) + first_offset)
    return Scene(PointCloud(points=points, normals=normals), LabelMask(labels=labels), tuple(viewpoint))


def load_scene_spec(path: Union[str, Path]) -> SceneSpec:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ShapeError(ErrorCode.IO_ERROR, f"{path}: {exc.strerror or exc}") from exc
    return parse_document(SceneSpec, text, ErrorCode.BAD_SPEC)
