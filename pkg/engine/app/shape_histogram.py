"""Fixed-range histograms over INAD pairs and their back-projection onto test fields."""

import hashlib
import logging
from pathlib import Path
from typing import Literal, Optional, Sequence, Union

import numpy as np
from pydantic import ValidationError

from app.config import settings
from app.errors import ErrorCode, ShapeError
from app.models import InadField, LikelihoodField, ShapeHistogram
from app.schemas import HistogramDocument

logger = logging.getLogger(__name__)

Normalization = Literal["max", "sum"]


# ---------- BINNING ----------

def _check_axis(range_max: float, k: int) -> None:
    if k < 1:
        raise ShapeError(ErrorCode.INVARIANT_VIOLATION, f"bin count must be >= 1, got {k}")
    if not range_max > 0:
        raise ShapeError(ErrorCode.INVARIANT_VIOLATION, f"range max must be positive, got {range_max}")


def bin_id(value: float, range_max: float, k: int) -> int:
    """floor(value * k / range_max), values at or beyond range_max clamp into the last bin."""
    _check_axis(range_max, k)
    if value < 0:
        raise ShapeError(ErrorCode.NEGATIVE_VALUE, f"cannot bin negative value {value}")
    return min(int(np.floor(value * k / range_max)), k - 1)


def bin_ids(values: np.ndarray, range_max: float, k: int) -> np.ndarray:
    _check_axis(range_max, k)
    values = np.asarray(values, dtype=np.float64)
    if values.size and values.min() < 0:
        raise ShapeError(ErrorCode.NEGATIVE_VALUE, f"cannot bin negative value {values.min()}")
    return np.minimum(np.floor(values * k / range_max), k - 1).astype(np.intp)


def accumulate(samples: np.ndarray, range_maxes: Sequence[float], ks: Sequence[int]) -> np.ndarray:
    """Integer counts of n-D samples over [0, max] axes."""
    samples = np.asarray(samples, dtype=np.float64).reshape(-1, len(ks))
    idx = tuple(bin_ids(samples[:, d], range_maxes[d], ks[d]) for d in range(len(ks)))
    flat = np.ravel_multi_index(idx, tuple(ks))
    return np.bincount(flat, minlength=int(np.prod(ks))).reshape(tuple(ks)).astype(np.int64)


def normalize(counts: np.ndarray, mode: Normalization = "max") -> np.ndarray:
    """Divide by the largest bin (peak = 1) or by the total (sums to 1)."""
    counts = np.asarray(counts, dtype=np.float64)
    denom = counts.max() if mode == "max" else counts.sum()
    if denom <= 0:
        return np.zeros_like(counts)
    return counts / denom


def lookup(table: np.ndarray, samples: np.ndarray, range_maxes: Sequence[float]) -> np.ndarray:
    table = np.asarray(table)
    samples = np.asarray(samples, dtype=np.float64).reshape(-1, table.ndim)
    idx = tuple(bin_ids(samples[:, d], range_maxes[d], table.shape[d]) for d in range(table.ndim))
    return table[idx]


# ---------- SHAPE HISTOGRAMS ----------

def build_histogram(
    field: InadField,
    k_mu: int = settings.BINS_MU,
    k_sigma: int = settings.BINS_SIGMA,
    mu_max: float = settings.MU_MAX,
    sigma_max: float = settings.SIGMA_MAX,
) -> ShapeHistogram:
    if not field.valid.any():
        raise ShapeError(ErrorCode.NO_VALID_POINTS, "INAD field has no valid points")
    pairs = np.stack([field.mu[field.valid], field.sigma[field.valid]], axis=1)
    counts = accumulate(pairs, (mu_max, sigma_max), (k_mu, k_sigma))
    peak = np.unravel_index(np.argmax(counts), counts.shape)
    logger.info("Histogram %dx%d from %d samples, peak at bin %s", k_mu, k_sigma, len(pairs), tuple(map(int, peak)))
    return ShapeHistogram(
        k_mu=k_mu,
        k_sigma=k_sigma,
        mu_range=(0.0, mu_max),
        sigma_range=(0.0, sigma_max),
        counts=counts,
        bins=normalize(counts, "max"),
        sample_count=len(pairs),
        source_r=field.radius,
    )


def back_project(h: ShapeHistogram, field: InadField, histogram_id: Optional[str] = None) -> LikelihoodField:
    if not np.isclose(h.source_r, field.radius, rtol=1e-9, atol=0.0):
        logger.warning(
            "Histogram was built at r=%.4f but the test field uses r=%.4f; scores may be meaningless",
            h.source_r,
            field.radius,
        )
    scores = np.full(len(field), np.nan)
    pairs = np.stack([field.mu[field.valid], field.sigma[field.valid]], axis=1)
    scores[field.valid] = lookup(h.bins, pairs, (h.mu_range[1], h.sigma_range[1]))
    return LikelihoodField(
        scores=scores,
        valid=field.valid,
        radius=field.radius,
        histogram_id=histogram_id if histogram_id is not None else fingerprint(h),
    )


# ---------- SERIALIZATION ----------

def to_document(h: ShapeHistogram) -> HistogramDocument:
    return HistogramDocument(
        k_mu=h.k_mu,
        k_sigma=h.k_sigma,
        mu_range=h.mu_range,
        sigma_range=h.sigma_range,
        source_r=h.source_r,
        sample_count=h.sample_count,
        bins=h.bins.ravel().tolist(),
        counts=h.counts.ravel().tolist(),
    )


def serialize(h: ShapeHistogram) -> str:
    return to_document(h).model_dump_json(indent=2)


def deserialize(text: str) -> ShapeHistogram:
    try:
        doc = HistogramDocument.model_validate_json(text)
    except ValidationError as exc:
        code = ErrorCode.PARSE_ERROR if any(e["type"] == "json_invalid" for e in exc.errors()) else ErrorCode.SCHEMA_MISMATCH
        raise ShapeError(code, str(exc)) from exc
    return ShapeHistogram(
        k_mu=doc.k_mu,
        k_sigma=doc.k_sigma,
        mu_range=doc.mu_range,
        sigma_range=doc.sigma_range,
        counts=doc.counts,
        bins=doc.bins,
        sample_count=doc.sample_count,
        source_r=doc.source_r,
    )


def fingerprint(h: ShapeHistogram) -> str:
    return hashlib.sha1(serialize(h).encode("ascii")).hexdigest()[:12]


def save_histogram(h: ShapeHistogram, path: Union[str, Path]) -> None:
    try:
        Path(path).write_text(serialize(h) + "\n", encoding="ascii")
    except OSError as exc:
        raise ShapeError(ErrorCode.IO_ERROR, f"{path}: {exc.strerror or exc}") from exc


def load_histogram(path: Union[str, Path]) -> ShapeHistogram:
    try:
        text = Path(path).read_text(encoding="ascii")
    except OSError as exc:
        raise ShapeError(ErrorCode.IO_ERROR, f"{path}: {exc.strerror or exc}") from exc
    return deserialize(text)
