"""Inter-normal angle statistics: folded angles, one-pass outlier rejection, (mu, sigma) pairs."""

import logging
from typing import Sequence, Tuple

import numpy as np

from app.config import settings
from app.errors import ErrorCode, ShapeError, require_radius
from app.models import InadField, InadPair, NormalField, PointCloud
from app.spatial_index import SpatialIndex, radius_pairs
from app.utils import run_chunked

logger = logging.getLogger(__name__)

SIGMA_GUARD = 1e-9


def fold_degrees(dots: np.ndarray) -> np.ndarray:
    """Angle between undirected lines, in [0, 90] degrees."""
    alpha = np.degrees(np.arccos(np.clip(dots, -1.0, 1.0)))
    return np.minimum(alpha, 180.0 - alpha)


def inter_normal_angles(normals: NormalField, point_id: int, neighbor_ids: Sequence[int]) -> np.ndarray:
    if not 0 <= point_id < len(normals):
        raise ShapeError(ErrorCode.INVALID_ID, f"point id {point_id} outside [0, {len(normals)})")
    if not normals.valid[point_id]:
        raise ShapeError(ErrorCode.INVALID_CENTER_NORMAL, f"point {point_id} has no valid normal")
    ids = np.asarray(neighbor_ids, dtype=np.intp)
    ids = ids[normals.valid[ids]]
    return fold_degrees(normals.normals[ids] @ normals.normals[point_id])


def _check_c(c: float) -> None:
    if not c > 0:
        raise ShapeError(ErrorCode.INVARIANT_VIOLATION, f"outlier rate must be positive, got {c}")


def reject_outliers(alphas: Sequence[float], c: float = settings.OUTLIER_RATE) -> np.ndarray:
    """Keep values within c population standard deviations of the mean.

    With sigma below 1e-9 everything is kept; the value(s) closest to the mean always survive.
    """
    a = np.asarray(alphas, dtype=np.float64)
    if a.size == 0:
        raise ShapeError(ErrorCode.EMPTY_INPUT, "no angles to filter")
    _check_c(c)
    mu = a.mean()
    sigma = a.std()
    if sigma < SIGMA_GUARD:
        return a.copy()
    dev = np.abs(a - mu)
    keep = (dev / sigma <= c) | (dev == dev.min())
    return a[keep]


def inad_pair(alphas: Sequence[float]) -> InadPair:
    a = np.asarray(alphas, dtype=np.float64)
    if a.size == 0:
        raise ShapeError(ErrorCode.EMPTY_INPUT, "no angles for an INAD pair")
    return InadPair(mu=float(a.mean()), sigma=float(a.std()), inlier_count=int(a.size))


def _group_stats(owner: np.ndarray, values: np.ndarray, n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    counts = np.bincount(owner, minlength=n)
    safe = np.where(counts > 0, counts, 1)
    mu = np.bincount(owner, weights=values, minlength=n) / safe
    var = np.bincount(owner, weights=(values - mu[owner]) ** 2, minlength=n) / safe
    return mu, np.sqrt(var), counts


def inad_from_pairs(owner: np.ndarray, alpha: np.ndarray, n: int, c: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-owner reject_outliers + inad_pair over flattened angles.

    ``owner`` holds local ids in [0, n), sorted ascending. Owners without angles get NaN and 0 inliers.
    """
    _check_c(c)
    mu0, sigma0, counts = _group_stats(owner, alpha, n)
    if alpha.size == 0:
        return np.full(n, np.nan), np.full(n, np.nan), counts

    dev = np.abs(alpha - mu0[owner])
    s = sigma0[owner]
    flat = s < SIGMA_GUARD
    keep = flat | (dev / np.where(flat, 1.0, s) <= c)
    starts = np.flatnonzero(np.r_[True, owner[1:] != owner[:-1]])
    min_dev = np.minimum.reduceat(dev, starts)
    group_min = np.empty(n)
    group_min[owner[starts]] = min_dev
    keep |= dev == group_min[owner]

    mu, sigma, inliers = _group_stats(owner[keep], alpha[keep], n)
    empty = inliers == 0
    mu[empty] = np.nan
    sigma[empty] = np.nan
    return mu, sigma, inliers


def compute_inad_field(
    cloud: PointCloud,
    normals: NormalField,
    index: SpatialIndex,
    r: float,
    c: float = settings.OUTLIER_RATE,
    threads: int = settings.THREADS,
    chunk_size: int = settings.CHUNK_SIZE,
) -> InadField:
    require_radius(r)
    _check_c(c)
    cloud.require_points()
    n = len(cloud)
    if len(normals) != n:
        raise ShapeError(ErrorCode.LENGTH_MISMATCH, f"{len(normals)} normals for {n} points")
    vecs, ok = normals.normals, normals.valid
    mu = np.full(n, np.nan)
    sigma = np.full(n, np.nan)
    inliers = np.zeros(n, dtype=np.int64)

    def work(start: int, stop: int) -> None:
        owner, neighbor = radius_pairs(index, np.arange(start, stop), r)
        usable = ok[owner] & ok[neighbor]
        owner, neighbor = owner[usable], neighbor[usable]
        alpha = fold_degrees(np.einsum("ij,ij->i", vecs[owner], vecs[neighbor]))
        m, s, k = inad_from_pairs(owner - start, alpha, stop - start, c)
        mu[start:stop], sigma[start:stop], inliers[start:stop] = m, s, k

    run_chunked(n, work, threads=threads, chunk_size=chunk_size)
    valid = ok & (inliers > 0)
    logger.info("INAD field at r=%.4f, c=%.2f: %d/%d valid points", r, c, int(valid.sum()), n)
    return InadField(mu=mu, sigma=sigma, inliers=inliers, valid=valid, radius=r, outlier_rate=c)
