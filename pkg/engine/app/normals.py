"""Surface normals from the smallest-eigenvalue eigenvector of local covariance matrices."""

import logging
from typing import Sequence, Tuple

import numpy as np

from app.config import settings
from app.errors import ErrorCode, ShapeError, require_radius
from app.models import NormalField, PointCloud
from app.spatial_index import SpatialIndex, radius_pairs
from app.utils import run_chunked

logger = logging.getLogger(__name__)

SymMat3 = np.ndarray

JACOBI_TOL = 1e-12
JACOBI_SWEEPS = 50
SEPARATION = 1e-9
RANK_TOL = 1e-6
_TINY = np.finfo(np.float64).tiny


def covariance(points: np.ndarray) -> SymMat3:
    """Covariance about the centroid, divided by the point count."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) < 3:
        raise ShapeError(ErrorCode.TOO_FEW_POINTS, f"covariance needs at least 3 points, got {len(pts)}")
    centered = pts - pts.mean(axis=0)
    return centered.T @ centered / len(pts)


def jacobi_eigh(m: SymMat3, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_SWEEPS) -> Tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi diagonalization; eigenvalues ascending, eigenvectors as columns."""
    a = np.array(m, dtype=np.float64)
    v = np.eye(3)
    scale = max(float(np.abs(a).max()), _TINY)
    for _ in range(max_sweeps):
        off = np.sqrt(a[0, 1] ** 2 + a[0, 2] ** 2 + a[1, 2] ** 2)
        if off <= tol * scale:
            break
        for p, q in ((0, 1), (0, 2), (1, 2)):
            if a[p, q] == 0.0:
                continue
            theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
            t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            rot = np.eye(3)
            rot[p, p] = rot[q, q] = c
            rot[p, q] = s
            rot[q, p] = -s
            a = rot.T @ a @ rot
            v = v @ rot
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def _trig_eigenvalues(m: np.ndarray) -> np.ndarray:
    """Closed-form eigenvalues of stacked symmetric 3x3 matrices, ascending."""
    q = np.trace(m, axis1=1, axis2=2) / 3.0
    p1 = m[:, 0, 1] ** 2 + m[:, 0, 2] ** 2 + m[:, 1, 2] ** 2
    diag = np.diagonal(m, axis1=1, axis2=2) - q[:, None]
    p = np.sqrt((np.sum(diag**2, axis=1) + 2.0 * p1) / 6.0)
    safe_p = np.where(p > 0, p, 1.0)
    b = (m - q[:, None, None] * np.eye(3)) / safe_p[:, None, None]
    r = np.clip(np.linalg.det(b) / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    hi = q + 2.0 * p * np.cos(phi)
    lo = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    mid = 3.0 * q - hi - lo
    return np.stack([lo, mid, hi], axis=1)


def smallest_eigenpairs(mats: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending, shape (N, 3)) and unit eigenvectors of the smallest eigenvalue (N, 3)."""
    m = np.asarray(mats, dtype=np.float64).reshape(-1, 3, 3)
    lam = _trig_eigenvalues(m)

    shifted = m - lam[:, 0, None, None] * np.eye(3)
    crosses = np.stack(
        [
            np.cross(shifted[:, 0], shifted[:, 1]),
            np.cross(shifted[:, 0], shifted[:, 2]),
            np.cross(shifted[:, 1], shifted[:, 2]),
        ],
        axis=1,
    )
    norms = np.linalg.norm(crosses, axis=2)
    best = np.argmax(norms, axis=1)
    rows = np.arange(len(m))
    best_norm = norms[rows, best]
    vecs = crosses[rows, best] / np.where(best_norm > 0, best_norm, 1.0)[:, None]

    scale = np.maximum(np.abs(lam[:, 2]), _TINY)
    fallback = (lam[:, 1] - lam[:, 0] <= SEPARATION * scale) | (best_norm <= 0)
    for i in np.flatnonzero(fallback):
        w, v = jacobi_eigh(m[i])
        lam[i] = w
        vecs[i] = v[:, 0] / np.linalg.norm(v[:, 0])
    return lam, vecs


def smallest_eigenvector(m: SymMat3) -> np.ndarray:
    _, vecs = smallest_eigenpairs(np.asarray(m, dtype=np.float64)[None])
    return vecs[0]


def estimate_all_normals(
    cloud: PointCloud,
    index: SpatialIndex,
    r: float,
    viewpoint: Sequence[float] = (0.0, 0.0, 0.0),
    min_neighbors: int = settings.MIN_NEIGHBORS,
    threads: int = settings.THREADS,
    chunk_size: int = settings.CHUNK_SIZE,
) -> NormalField:
    """Normal per point from the covariance of the point and its radius neighbors, oriented to the viewpoint.

    Points with fewer than ``min_neighbors`` neighbors or a rank-deficient neighborhood are invalid.
    """
    require_radius(r)
    if min_neighbors < 3:
        raise ShapeError(ErrorCode.INVARIANT_VIOLATION, f"min_neighbors must be >= 3, got {min_neighbors}")
    cloud.require_points()
    n = len(cloud)
    points = cloud.points
    vp = np.asarray(viewpoint, dtype=np.float64)
    normals = np.zeros((n, 3))
    valid = np.zeros(n, dtype=bool)

    def work(start: int, stop: int) -> None:
        m = stop - start
        owner, neighbor = radius_pairs(index, np.arange(start, stop), r)
        local = owner - start
        counts = np.bincount(local, minlength=m)

        # sums of offsets from the query point; the query point adds a zero offset
        d = points[neighbor] - points[owner]
        s1 = np.stack([np.bincount(local, weights=d[:, j], minlength=m) for j in range(3)], axis=1)
        s2 = np.empty((m, 3, 3))
        for a in range(3):
            for b in range(a, 3):
                s2[:, a, b] = s2[:, b, a] = np.bincount(local, weights=d[:, a] * d[:, b], minlength=m)
        total = (counts + 1).astype(np.float64)
        mean = s1 / total[:, None]
        cov = s2 / total[:, None, None] - mean[:, :, None] * mean[:, None, :]

        enough = np.flatnonzero(counts >= min_neighbors)
        if enough.size == 0:
            return
        lam, vecs = smallest_eigenpairs(cov[enough])
        full_rank = lam[:, 1] > RANK_TOL * lam[:, 2]
        ok = enough[full_rank]
        vecs = vecs[full_rank]
        to_view = vp - points[start + ok]
        flip = np.einsum("ij,ij->i", to_view, vecs) < 0
        vecs[flip] *= -1.0
        normals[start + ok] = vecs
        valid[start + ok] = True

    run_chunked(n, work, threads=threads, chunk_size=chunk_size)
    logger.info("Estimated %d/%d valid normals at r=%.4f", int(valid.sum()), n, r)
    return NormalField(normals=normals, valid=valid, radius=r, viewpoint=tuple(vp))


def attach_normals(cloud: PointCloud, field: NormalField) -> PointCloud:
    return PointCloud(points=cloud.points, normals=np.where(field.valid[:, None], field.normals, np.nan), valid=field.valid)
