"""Binary planar/curved classification and crease-edge detection by back-projecting a planar histogram."""

import logging
from typing import Optional, Tuple

import numpy as np

from app.errors import ErrorCode, ShapeError
from app.inad import compute_inad_field
from app.models import InadField, LabelMask, LikelihoodField, PointCloud, ShapeHistogram, SurfaceClass
from app.normals import estimate_all_normals
from app.schemas import TaskConfig
from app.shape_histogram import back_project, build_histogram
from app.spatial_index import SpatialIndex, build_index

logger = logging.getLogger(__name__)


def _check_tau(tau: float) -> None:
    if not 0.0 < tau < 1.0:
        raise ShapeError(ErrorCode.INVARIANT_VIOLATION, f"tau must lie strictly between 0 and 1, got {tau}")


def complement(likelihood: LikelihoodField) -> LikelihoodField:
    """1 - score at every valid point; invalid points stay invalid."""
    return LikelihoodField(
        scores=1.0 - likelihood.scores,
        valid=likelihood.valid,
        radius=likelihood.radius,
        histogram_id=likelihood.histogram_id,
    )


def classify_binary(likelihood: LikelihoodField, tau: float = 0.5) -> LabelMask:
    """Planar where the planar score reaches tau, curved below it, unlabeled where invalid."""
    _check_tau(tau)
    labels = np.full(len(likelihood), SurfaceClass.UNLABELED.value, dtype=np.uint8)
    scores = likelihood.scores[likelihood.valid]
    labels[likelihood.valid] = np.where(scores >= tau, SurfaceClass.PLANAR.value, SurfaceClass.CURVED.value)
    return LabelMask(labels=labels)


def label_edges(edge_likelihood: LikelihoodField, tau: float = 0.5) -> LabelMask:
    _check_tau(tau)
    labels = np.full(len(edge_likelihood), SurfaceClass.UNLABELED.value, dtype=np.uint8)
    scores = edge_likelihood.scores[edge_likelihood.valid]
    labels[edge_likelihood.valid] = np.where(scores >= tau, SurfaceClass.EDGE.value, SurfaceClass.PLANAR.value)
    return LabelMask(labels=labels)


def compute_field(
    cloud: PointCloud, r: float, config: TaskConfig, index: Optional[SpatialIndex] = None
) -> InadField:
    """Normals at the configured normal radius, then the INAD field at ``r``."""
    index = index or build_index(cloud)
    normals = estimate_all_normals(
        cloud,
        index,
        config.normal_radius_for(r),
        viewpoint=config.viewpoint,
        min_neighbors=config.min_neighbors,
        threads=config.threads,
    )
    return compute_inad_field(cloud, normals, index, r, config.c, threads=config.threads)


def sample_histogram(
    cloud: PointCloud,
    r: float,
    config: TaskConfig,
    labels: Optional[LabelMask] = None,
    label: Optional[SurfaceClass] = None,
) -> ShapeHistogram:
    """Shape histogram of a sample surface, optionally restricted to the points of one class."""
    if label is not None:
        if labels is None:
            raise ShapeError(ErrorCode.INVARIANT_VIOLATION, "a class filter needs a label mask")
        labels.check_aligned(len(cloud))
        cloud = cloud.subset(np.flatnonzero(labels.labels == label.value))
        logger.info("Learning histogram from %d points labelled %s", len(cloud), label.name.lower())
    field = compute_field(cloud, r, config)
    return build_histogram(field, config.k_mu, config.k_sigma, config.mu_max, config.sigma_max)


def surface_likelihood(
    cloud: PointCloud,
    histogram: ShapeHistogram,
    r: float,
    config: TaskConfig,
    index: Optional[SpatialIndex] = None,
) -> LikelihoodField:
    return back_project(histogram, compute_field(cloud, r, config, index))


def classify_cloud(
    cloud: PointCloud, plane_hist: ShapeHistogram, config: TaskConfig
) -> Tuple[LabelMask, LikelihoodField]:
    planar = surface_likelihood(cloud, plane_hist, config.r_classify, config)
    mask = classify_binary(planar, config.tau)
    logger.info(
        "Classified %d points: %d planar, %d curved",
        len(mask),
        mask.count(SurfaceClass.PLANAR),
        mask.count(SurfaceClass.CURVED),
    )
    return mask, planar


def detect_edges(
    cloud: PointCloud, plane_hist_small_r: ShapeHistogram, config: TaskConfig
) -> Tuple[LabelMask, LikelihoodField]:
    """Edge likelihood is the complement of the planar score at the small edge radius."""
    planar = surface_likelihood(cloud, plane_hist_small_r, config.r_edge, config)
    edge = complement(planar)
    mask = label_edges(edge, config.tau)
    logger.info("Detected %d edge points out of %d", mask.count(SurfaceClass.EDGE), len(mask))
    return mask, edge
