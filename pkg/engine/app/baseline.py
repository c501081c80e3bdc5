"""Minimal RANSAC plane/cylinder fitting, used as the multi-instance comparison baseline."""

import logging
from typing import List, NamedTuple, Optional, Tuple, Union

import numpy as np

from app.errors import ErrorCode, ShapeError
from app.models import LabelMask, NormalField, PointCloud, SurfaceClass
from app.normals import covariance, smallest_eigenvector
from app.schemas import CylinderModel, PlaneModel, RansacConfig, RansacRound

logger = logging.getLogger(__name__)

Model = Union[PlaneModel, CylinderModel]
Instance = Tuple[Model, np.ndarray]


class Extraction(NamedTuple):
    instances: List[Instance]
    rounds: List[RansacRound]


MIN_SAMPLE = {"plane": 3, "cylinder": 2}
_DEGENERATE = 1e-9


def fit_plane(points: np.ndarray) -> Optional[PlaneModel]:
    """Plane through three points, or the least-squares plane of more; None when collinear."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) == 3:
        normal = np.cross(pts[1] - pts[0], pts[2] - pts[0])
        length = np.linalg.norm(normal)
        if length <= _DEGENERATE * max(np.abs(pts).max(), 1.0) ** 2:
            return None
        normal = normal / length
    else:
        normal = smallest_eigenvector(covariance(pts))
    anchor = pts.mean(axis=0)
    return PlaneModel(normal=tuple(normal), offset=float(-normal @ anchor))


def fit_cylinder(p1: np.ndarray, n1: np.ndarray, p2: np.ndarray, n2: np.ndarray) -> Optional[CylinderModel]:
    """Cylinder from two oriented samples: axis along n1 x n2 through the closest point of the normal lines."""
    axis = np.cross(n1, n2)
    length = np.linalg.norm(axis)
    if length < 1e-6:
        return None
    axis = axis / length
    w0 = p1 - p2
    a, b, c = n1 @ n1, n1 @ n2, n2 @ n2
    d, e = n1 @ w0, n2 @ w0
    denom = a * c - b * b
    if abs(denom) < 1e-12:
        return None
    center = p1 + ((b * e - c * d) / denom) * n1
    radii = [np.linalg.norm((p - center) - ((p - center) @ axis) * axis) for p in (p1, p2)]
    return CylinderModel(axis_point=tuple(center), axis_direction=tuple(axis), radius=float(np.mean(radii)))


def _radial(points: np.ndarray, model: CylinderModel) -> np.ndarray:
    axis = np.asarray(model.axis_direction)
    rel = points - np.asarray(model.axis_point)
    return rel - np.outer(rel @ axis, axis)


def point_distances(points: np.ndarray, model: Model) -> np.ndarray:
    if isinstance(model, PlaneModel):
        return np.abs(points @ np.asarray(model.normal) + model.offset)
    return np.abs(np.linalg.norm(_radial(points, model), axis=1) - model.radius)


def _surface_normals(points: np.ndarray, model: Model) -> np.ndarray:
    if isinstance(model, PlaneModel):
        return np.broadcast_to(np.asarray(model.normal), points.shape)
    radial = _radial(points, model)
    norms = np.linalg.norm(radial, axis=1, keepdims=True)
    return radial / np.where(norms > 0, norms, 1.0)


def _inlier_mask(
    points: np.ndarray, vecs: Optional[np.ndarray], ok: Optional[np.ndarray], model: Model, config: RansacConfig
) -> np.ndarray:
    mask = point_distances(points, model) <= config.inlier_threshold
    if config.normal_threshold_deg is not None and vecs is not None:
        cos_limit = np.cos(np.radians(config.normal_threshold_deg))
        agree = np.abs(np.einsum("ij,ij->i", vecs, _surface_normals(points, model))) >= cos_limit
        mask &= agree & ok
    return mask


def _search(
    points: np.ndarray,
    vecs: Optional[np.ndarray],
    ok: Optional[np.ndarray],
    config: RansacConfig,
    rng: np.random.Generator,
) -> Instance:
    size = MIN_SAMPLE[config.model]
    pool = np.arange(len(points)) if config.model == "plane" else np.flatnonzero(ok)
    if len(pool) < size:
        raise ShapeError(ErrorCode.INSUFFICIENT_POINTS, f"{config.model} needs {size} samples, have {len(pool)}")

    best_model, best_mask, best_count = None, None, -1
    for _ in range(config.max_iterations):
        sample = rng.choice(pool, size=size, replace=False)
        if config.model == "plane":
            model = fit_plane(points[sample])
        else:
            i, j = sample
            model = fit_cylinder(points[i], vecs[i], points[j], vecs[j])
            if model is not None and config.radius_limits is not None:
                low, high = config.radius_limits
                if not low <= model.radius <= high:
                    model = None
        if model is None:
            continue
        mask = _inlier_mask(points, vecs, ok, model, config)
        count = int(np.count_nonzero(mask))
        # strict comparison keeps the earliest candidate on ties
        if count > best_count:
            best_model, best_mask, best_count = model, mask, count

    if best_model is None or best_count < config.min_inliers:
        raise ShapeError(
            ErrorCode.NO_MODEL_FOUND,
            f"best {config.model} has {max(best_count, 0)} inliers, fewer than {config.min_inliers}",
        )
    return best_model, np.flatnonzero(best_mask)


def _normal_arrays(cloud: PointCloud, normals: Optional[NormalField], model: str) -> Tuple[Optional[np.ndarray], Optional[np.ndarray]]:
    if normals is None and cloud.has_normals:
        normals = NormalField.from_cloud(cloud)
    if normals is None:
        if model == "cylinder":
            raise ShapeError(ErrorCode.INVARIANT_VIOLATION, "cylinder RANSAC needs normals")
        return None, None
    if len(normals) != len(cloud):
        raise ShapeError(ErrorCode.LENGTH_MISMATCH, f"{len(normals)} normals for {len(cloud)} points")
    return np.asarray(normals.normals), np.asarray(normals.valid)


def ransac_fit(cloud: PointCloud, normals: Optional[NormalField], config: RansacConfig) -> Instance:
    """Best model by inlier count after ``max_iterations`` samples."""
    vecs, ok = _normal_arrays(cloud, normals, config.model)
    if len(cloud) < MIN_SAMPLE[config.model]:
        raise ShapeError(ErrorCode.INSUFFICIENT_POINTS, f"{len(cloud)} points are too few for a {config.model}")
    return _search(cloud.points, vecs, ok, config, np.random.default_rng(config.seed))


def extract_instances(
    cloud: PointCloud, normals: Optional[NormalField], config: RansacConfig, n_instances: int
) -> Extraction:
    """Fit up to ``n_instances`` models, removing each round's inliers; stops at the first empty round.

    Every attempted round is reported, including the one that found nothing.
    """
    if n_instances < 1:
        raise ShapeError(ErrorCode.INVARIANT_VIOLATION, f"n_instances must be >= 1, got {n_instances}")
    vecs, ok = _normal_arrays(cloud, normals, config.model)
    rng = np.random.default_rng(config.seed)
    remaining = np.arange(len(cloud))
    found: List[Instance] = []
    rounds: List[RansacRound] = []
    for round_no in range(n_instances):
        try:
            model, local = _search(
                cloud.points[remaining],
                None if vecs is None else vecs[remaining],
                None if ok is None else ok[remaining],
                config,
                rng,
            )
        except ShapeError as exc:
            if not found or exc.code not in (ErrorCode.NO_MODEL_FOUND, ErrorCode.INSUFFICIENT_POINTS):
                raise
            logger.warning("RANSAC round %d found no %s: %s", round_no + 1, config.model, exc.detail)
            rounds.append(RansacRound(round=round_no + 1, status="no_model", detail=exc.detail))
            break
        inliers = remaining[local]
        found.append((model, inliers))
        rounds.append(RansacRound(round=round_no + 1, status="found", inlier_count=len(inliers)))
        remaining = np.setdiff1d(remaining, inliers, assume_unique=True)
        logger.info("RANSAC round %d: %s with %d inliers", round_no + 1, config.model, len(inliers))
    return Extraction(found, rounds)


def instances_mask(n: int, instances: List[Instance], label: SurfaceClass = SurfaceClass.CURVED) -> LabelMask:
    """Union of instance inliers labelled ``label``, everything else planar."""
    labels = np.full(n, SurfaceClass.PLANAR.value, dtype=np.uint8)
    for _, inliers in instances:
        labels[inliers] = label.value
    return LabelMask(labels=labels)
