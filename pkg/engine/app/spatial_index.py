from itertools import chain
from typing import Tuple

import numpy as np
from scipy.spatial import cKDTree

from app.errors import ErrorCode, ShapeError, require_radius
from app.models import PointCloud

Pairs = Tuple[np.ndarray, np.ndarray]


class SpatialIndex:
    """Balanced kD-tree over a cloud's points. Immutable once built."""

    def __init__(self, points: np.ndarray):
        self.points = points
        self.size = len(points)
        self.tree = cKDTree(points, balanced_tree=True, compact_nodes=True)

    def check_id(self, point_id: int) -> int:
        if isinstance(point_id, bool) or not isinstance(point_id, (int, np.integer)):
            raise ShapeError(ErrorCode.INVALID_ID, f"point id must be an integer, got {point_id!r}")
        if not 0 <= point_id < self.size:
            raise ShapeError(ErrorCode.INVALID_ID, f"point id {point_id} outside [0, {self.size})")
        return int(point_id)


def build_index(cloud: PointCloud) -> SpatialIndex:
    cloud.require_points()
    return SpatialIndex(cloud.points)


def radius_neighbors(index: SpatialIndex, point_id: int, r: float) -> np.ndarray:
    """Ids within distance <= r of the point, itself excluded, ascending by id."""
    require_radius(r)
    point_id = index.check_id(point_id)
    found = np.asarray(index.tree.query_ball_point(index.points[point_id], r, return_sorted=True), dtype=np.intp)
    return found[found != point_id]


def k_nearest(index: SpatialIndex, point_id: int, k: int) -> np.ndarray:
    """The k closest other points, ascending by distance."""
    point_id = index.check_id(point_id)
    if k < 1:
        raise ShapeError(ErrorCode.INVALID_ID, f"k must be >= 1, got {k}")
    _, neighbor = knn_pairs(index, np.array([point_id]), k)
    return neighbor


def brute_force_radius(cloud: PointCloud, point_id: int, r: float) -> np.ndarray:
    require_radius(r)
    if isinstance(point_id, bool) or not isinstance(point_id, (int, np.integer)) or not 0 <= point_id < len(cloud):
        raise ShapeError(ErrorCode.INVALID_ID, f"point id {point_id!r} outside [0, {len(cloud)})")
    d2 = np.sum((cloud.points - cloud.points[point_id]) ** 2, axis=1)
    ids = np.flatnonzero(d2 <= r * r)
    return ids[ids != point_id]


# ---------- BATCH ----------

def radius_pairs(index: SpatialIndex, ids: np.ndarray, r: float, include_self: bool = False, workers: int = 1) -> Pairs:
    """Flattened (owner, neighbor) arrays of closed-ball neighborhoods, grouped by owner in ``ids`` order."""
    require_radius(r)
    ids = np.asarray(ids, dtype=np.intp)
    if ids.size == 0:
        return np.empty(0, dtype=np.intp), np.empty(0, dtype=np.intp)
    found = index.tree.query_ball_point(index.points[ids], r, return_sorted=True, workers=workers)
    lengths = np.fromiter(map(len, found), dtype=np.intp, count=len(found))
    neighbor = np.fromiter(chain.from_iterable(found), dtype=np.intp, count=int(lengths.sum()))
    owner = np.repeat(ids, lengths)
    if include_self:
        return owner, neighbor
    keep = neighbor != owner
    return owner[keep], neighbor[keep]


def knn_pairs(index: SpatialIndex, ids: np.ndarray, k: int, workers: int = 1) -> Pairs:
    """Flattened (owner, neighbor) arrays of the k nearest other points, ascending by distance per owner."""
    ids = np.asarray(ids, dtype=np.intp)
    q = min(k + 1, index.size)
    _, found = index.tree.query(index.points[ids], k=q, workers=workers)
    found = np.asarray(found, dtype=np.intp).reshape(len(ids), q)

    drop = found == ids[:, None]
    # coincident duplicates can push the query point itself out of the k+1 results
    drop[~drop.any(axis=1), -1] = True
    keep = ~drop
    owner = np.broadcast_to(ids[:, None], found.shape)[keep]
    return owner, found[keep]
