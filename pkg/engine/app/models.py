import enum
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from app.errors import ErrorCode, ShapeError

UNIT_TOLERANCE = 1e-6


class SurfaceClass(int, enum.Enum):
    PLANAR = 0
    CURVED = 1
    EDGE = 2
    UNLABELED = 255


def _readonly(array, dtype) -> np.ndarray:
    out = np.array(array, dtype=dtype)
    out.setflags(write=False)
    return out


def _check_unit(normals: np.ndarray, valid: np.ndarray) -> None:
    norms = np.linalg.norm(normals[valid], axis=1)
    if norms.size and np.max(np.abs(norms - 1.0)) > UNIT_TOLERANCE:
        raise ShapeError(ErrorCode.INVARIANT_VIOLATION, "valid normals must have unit length")


class ArrayModel(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


# ---------- CLOUDS ----------

class PointCloud(ArrayModel):
    """Unordered set of 3D points (meters) with optional unit normals.

    ``valid`` flags the points whose normal is usable; without normals every point is valid.
    """

    points: np.ndarray
    normals: Optional[np.ndarray] = None
    valid: np.ndarray

    @model_validator(mode="before")
    @classmethod
    def _coerce(cls, data: dict) -> dict:
        points = np.asarray(data.get("points", ()), dtype=np.float64)
        if points.size == 0:
            points = points.reshape(0, 3)
        if points.ndim != 2 or points.shape[1] != 3:
            raise ShapeError(ErrorCode.INVARIANT_VIOLATION, f"points must be (n, 3), got {points.shape}")
        if not np.all(np.isfinite(points)):
            raise ShapeError(ErrorCode.NON_FINITE, "point coordinates must be finite")

        normals = data.get("normals")
        valid = data.get("valid")
        if normals is not None:
            normals = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
            if len(normals) != len(points):
                raise ShapeError(
                    ErrorCode.LENGTH_MISMATCH,
                    f"{len(normals)} normals for {len(points)} points",
                )
            if valid is None:
                valid = np.all(np.isfinite(normals), axis=1) & (np.linalg.norm(normals, axis=1) > 0)
        if valid is None:
            valid = np.ones(len(points), dtype=bool)
        valid = np.asarray(valid, dtype=bool)
        if len(valid) != len(points):
            raise ShapeError(ErrorCode.LENGTH_MISMATCH, "valid flags must match point count")
        if normals is not None:
            _check_unit(normals, valid)
            normals = _readonly(normals, np.float64)

        return {"points": _readonly(points, np.float64), "normals": normals, "valid": _readonly(valid, bool)}

    def __len__(self) -> int:
        return len(self.points)

    @property
    def has_normals(self) -> bool:
        return self.normals is not None

    def require_points(self) -> None:
        if len(self.points) == 0:
            raise ShapeError(ErrorCode.EMPTY_CLOUD, "cloud has no points")

    def without_normals(self) -> "PointCloud":
        return PointCloud(points=self.points)

    def subset(self, ids: np.ndarray) -> "PointCloud":
        ids = np.asarray(ids, dtype=np.intp)
        normals = None if self.normals is None else self.normals[ids]
        return PointCloud(points=self.points[ids], normals=normals, valid=self.valid[ids])

    def transformed(self, rotation: np.ndarray, translation: np.ndarray) -> "PointCloud":
        """Rigid motion ``p -> R p + t``; normals are rotated."""
        rotation = np.asarray(rotation, dtype=np.float64)
        points = self.points @ rotation.T + np.asarray(translation, dtype=np.float64)
        normals = None if self.normals is None else self.normals @ rotation.T
        return PointCloud(points=points, normals=normals, valid=self.valid)


class LabelMask(ArrayModel):
    """Per-point class ids, index-aligned with a cloud."""

    labels: np.ndarray

    @model_validator(mode="before")
    @classmethod
    def _coerce(cls, data: dict) -> dict:
        raw = np.asarray(data.get("labels", ()), dtype=np.int64).reshape(-1)
        known = np.array([c.value for c in SurfaceClass])
        unknown = np.setdiff1d(np.unique(raw), known)
        if unknown.size:
            raise ShapeError(ErrorCode.UNKNOWN_CLASS, f"unknown class ids: {unknown.tolist()}")
        return {"labels": _readonly(raw, np.uint8)}

    def __len__(self) -> int:
        return len(self.labels)

    @classmethod
    def full(cls, n: int, label: SurfaceClass) -> "LabelMask":
        return cls(labels=np.full(n, label.value, dtype=np.uint8))

    def check_aligned(self, n: int) -> None:
        if len(self.labels) != n:
            raise ShapeError(
                ErrorCode.LENGTH_MISMATCH,
                f"label mask has {len(self.labels)} entries for {n} points",
            )

    def count(self, label: SurfaceClass) -> int:
        return int(np.count_nonzero(self.labels == label.value))


# ---------- NORMALS / INAD ----------

class NormalField(ArrayModel):
    normals: np.ndarray
    valid: np.ndarray
    radius: float
    viewpoint: Tuple[float, float, float]

    @model_validator(mode="before")
    @classmethod
    def _coerce(cls, data: dict) -> dict:
        normals = np.asarray(data["normals"], dtype=np.float64).reshape(-1, 3)
        valid = np.asarray(data["valid"], dtype=bool)
        if len(valid) != len(normals):
            raise ShapeError(ErrorCode.LENGTH_MISMATCH, "valid flags must match normal count")
        _check_unit(normals, valid)
        viewpoint = tuple(float(v) for v in data.get("viewpoint", (0.0, 0.0, 0.0)))
        return {
            "normals": _readonly(normals, np.float64),
            "valid": _readonly(valid, bool),
            "radius": float(data["radius"]),
            "viewpoint": viewpoint,
        }

    def __len__(self) -> int:
        return len(self.normals)

    @classmethod
    def from_cloud(cls, cloud: PointCloud, radius: float = 0.0) -> "NormalField":
        """Wrap the normals stored in a cloud (e.g. analytic normals from a generator)."""
        if cloud.normals is None:
            raise ShapeError(ErrorCode.INVARIANT_VIOLATION, "cloud carries no normals")
        return cls(normals=np.where(cloud.valid[:, None], cloud.normals, 0.0), valid=cloud.valid, radius=radius)


class InadPair(BaseModel):
    """Mean and population standard deviation (degrees) of the folded inter-normal angles."""

    mu: float
    sigma: float
    inlier_count: int

    @model_validator(mode="after")
    def _check(self) -> "InadPair":
        eps = 1e-9
        if not (-eps <= self.mu <= 90.0 + eps and -eps <= self.sigma <= 45.0 + eps):
            raise ShapeError(ErrorCode.INVARIANT_VIOLATION, f"INAD pair out of range: {self.mu}, {self.sigma}")
        if self.inlier_count < 1:
            raise ShapeError(ErrorCode.INVARIANT_VIOLATION, "INAD pair needs at least one inlier")
        if self.inlier_count == 1 and self.sigma != 0.0:
            raise ShapeError(ErrorCode.INVARIANT_VIOLATION, "single inlier must have zero sigma")
        return self


class InadField(ArrayModel):
    mu: np.ndarray
    sigma: np.ndarray
    inliers: np.ndarray
    valid: np.ndarray
    radius: float
    outlier_rate: float

    @model_validator(mode="before")
    @classmethod
    def _coerce(cls, data: dict) -> dict:
        valid = np.asarray(data["valid"], dtype=bool)
        mu = np.where(valid, np.asarray(data["mu"], dtype=np.float64), np.nan)
        sigma = np.where(valid, np.asarray(data["sigma"], dtype=np.float64), np.nan)
        inliers = np.where(valid, np.asarray(data["inliers"], dtype=np.int64), 0)
        if not (len(mu) == len(sigma) == len(inliers) == len(valid)):
            raise ShapeError(ErrorCode.LENGTH_MISMATCH, "INAD arrays must have equal length")
        return {
            "mu": _readonly(mu, np.float64),
            "sigma": _readonly(sigma, np.float64),
            "inliers": _readonly(inliers, np.int64),
            "valid": _readonly(valid, bool),
            "radius": float(data["radius"]),
            "outlier_rate": float(data["outlier_rate"]),
        }

    def __len__(self) -> int:
        return len(self.mu)

    def pair(self, point_id: int) -> Optional[InadPair]:
        if not self.valid[point_id]:
            return None
        return InadPair(mu=self.mu[point_id], sigma=self.sigma[point_id], inlier_count=int(self.inliers[point_id]))


# ---------- HISTOGRAMS ----------

class ShapeHistogram(ArrayModel):
    """k_mu x k_sigma grid of max-normalized INAD frequencies.

    ``counts`` keeps the raw integer accumulation, ``bins`` is ``counts / counts.max()``.
    """

    k_mu: int
    k_sigma: int
    mu_range: Tuple[float, float]
    sigma_range: Tuple[float, float]
    counts: np.ndarray
    bins: np.ndarray
    sample_count: int
    source_r: float

    @model_validator(mode="before")
    @classmethod
    def _coerce(cls, data: dict) -> dict:
        k_mu, k_sigma = int(data["k_mu"]), int(data["k_sigma"])
        if k_mu < 1 or k_sigma < 1:
            raise ShapeError(ErrorCode.INVARIANT_VIOLATION, "bin counts must be >= 1")
        mu_range = tuple(float(v) for v in data["mu_range"])
        sigma_range = tuple(float(v) for v in data["sigma_range"])
        for name, (lo, hi) in (("mu_range", mu_range), ("sigma_range", sigma_range)):
            if lo != 0.0 or not hi > 0.0:
                raise ShapeError(ErrorCode.INVARIANT_VIOLATION, f"{name} must be [0, max] with max > 0")

        bins = np.asarray(data["bins"], dtype=np.float64).reshape(k_mu, k_sigma)
        counts = data.get("counts")
        counts = (
            np.zeros((k_mu, k_sigma), dtype=np.int64)
            if counts is None
            else np.asarray(counts, dtype=np.int64).reshape(k_mu, k_sigma)
        )
        if not np.all(np.isfinite(bins)) or bins.min() < 0.0 or bins.max() > 1.0:
            raise ShapeError(ErrorCode.INVARIANT_VIOLATION, "bin values must lie in [0, 1]")
        sample_count = int(data["sample_count"])
        if sample_count > 0 and bins.max() != 1.0:
            raise ShapeError(ErrorCode.INVARIANT_VIOLATION, "max-normalized histogram must peak at 1.0")
        if counts.min() < 0:
            raise ShapeError(ErrorCode.INVARIANT_VIOLATION, "raw counts must be non-negative")

        return {
            "k_mu": k_mu,
            "k_sigma": k_sigma,
            "mu_range": mu_range,
            "sigma_range": sigma_range,
            "counts": _readonly(counts, np.int64),
            "bins": _readonly(bins, np.float64),
            "sample_count": sample_count,
            "source_r": float(data["source_r"]),
        }


class LikelihoodField(ArrayModel):
    """Per-point back-projection score in [0, 1]; NaN where invalid."""

    scores: np.ndarray
    valid: np.ndarray
    radius: float
    histogram_id: str

    @model_validator(mode="before")
    @classmethod
    def _coerce(cls, data: dict) -> dict:
        valid = np.asarray(data["valid"], dtype=bool)
        scores = np.where(valid, np.asarray(data["scores"], dtype=np.float64), np.nan)
        kept = scores[valid]
        if kept.size and (kept.min() < 0.0 or kept.max() > 1.0):
            raise ShapeError(ErrorCode.INVARIANT_VIOLATION, "likelihood scores must lie in [0, 1]")
        return {
            "scores": _readonly(scores, np.float64),
            "valid": _readonly(valid, bool),
            "radius": float(data["radius"]),
            "histogram_id": str(data.get("histogram_id", "")),
        }

    def __len__(self) -> int:
        return len(self.scores)
