from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Type, TypeVar, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from app.config import settings
from app.errors import ErrorCode, ShapeError

Vec3 = Tuple[float, float, float]
Doc = TypeVar("Doc", bound=BaseModel)


def parse_document(model: Type[Doc], text: str, code: ErrorCode = ErrorCode.SCHEMA_MISMATCH) -> Doc:
    try:
        return model.model_validate_json(text)
    except ValidationError as exc:
        raise ShapeError(code, str(exc)) from exc


# ---------- SCENES ----------

class PrimitiveBase(BaseModel):
    model_config = ConfigDict(extra="forbid")

    resolution: float = Field(gt=0)
    origin: Vec3 = (0.0, 0.0, 0.0)


class PlanePrimitive(PrimitiveBase):
    kind: Literal["plane"] = "plane"
    extent: float = Field(gt=0)


class CylinderPrimitive(PrimitiveBase):
    kind: Literal["cylinder"] = "cylinder"
    radius: float = Field(gt=0)
    height: float = Field(gt=0)

    @model_validator(mode="after")
    def check_resolution(self) -> "CylinderPrimitive":
        if self.resolution >= self.radius:
            raise ValueError("cylinder resolution must be smaller than its radius")
        return self


class BoxPrimitive(PrimitiveBase):
    kind: Literal["box"] = "box"
    edge_length: float = Field(gt=0)
    edge_band: float = Field(default=2.0, gt=0)

    @model_validator(mode="after")
    def check_resolution(self) -> "BoxPrimitive":
        if self.resolution >= self.edge_length / 10:
            raise ValueError("box resolution must be below a tenth of the edge length")
        return self


Primitive = Annotated[Union[PlanePrimitive, CylinderPrimitive, BoxPrimitive], Field(discriminator="kind")]


class SceneSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    primitives: List[Primitive] = Field(min_length=1)
    noise_sigma: float = Field(default=0.0, ge=0)
    seed: int = 0
    viewpoint: Optional[Vec3] = None


# ---------- HISTOGRAMS ----------

class HistogramDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    version: Literal[1] = 1
    k_mu: int
    k_sigma: int
    mu_range: Tuple[float, float]
    sigma_range: Tuple[float, float]
    source_r: float
    sample_count: int
    bins: List[float]
    counts: Optional[List[int]] = None

    @model_validator(mode="after")
    def check_grid(self) -> "HistogramDocument":
        if len(self.bins) != self.k_mu * self.k_sigma:
            raise ValueError(f"expected {self.k_mu * self.k_sigma} bins, got {len(self.bins)}")
        if self.counts is not None and len(self.counts) != len(self.bins):
            raise ValueError("counts must have one entry per bin")
        return self


# ---------- TASKS ----------

class TaskConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    r_classify: float = Field(default=settings.RADIUS, gt=0)
    r_edge: float = Field(default=settings.EDGE_RADIUS, gt=0)
    normal_radius: Optional[float] = Field(default=settings.NORMAL_RADIUS, gt=0)
    min_neighbors: int = Field(default=settings.MIN_NEIGHBORS, ge=3)
    c: float = Field(default=settings.OUTLIER_RATE, gt=0)
    k_mu: int = Field(default=settings.BINS_MU, ge=1)
    k_sigma: int = Field(default=settings.BINS_SIGMA, ge=1)
    mu_max: float = Field(default=settings.MU_MAX, gt=0)
    sigma_max: float = Field(default=settings.SIGMA_MAX, gt=0)
    tau: float = settings.THRESHOLD
    viewpoint: Vec3 = (0.0, 0.0, 0.0)
    threads: int = Field(default=settings.THREADS, ge=1)

    @field_validator("tau")
    @classmethod
    def check_tau(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError("tau must lie strictly between 0 and 1")
        return v

    @model_validator(mode="after")
    def check_radii(self) -> "TaskConfig":
        if not self.r_edge < self.r_classify:
            raise ValueError("r_edge must be smaller than r_classify")
        return self

    def normal_radius_for(self, r: float) -> float:
        return self.normal_radius if self.normal_radius is not None else r


# ---------- EVALUATION ----------

class ClassMetrics(BaseModel):
    label: str
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    f1: float
    iou: float


class MetricsReport(BaseModel):
    classes: List[ClassMetrics]
    miou: float
    parameters: Dict[str, Any] = {}
    wall_times: Optional[Dict[str, float]] = None


class TimingRow(BaseModel):
    k: int
    us_per_point: float
    repetitions: int


class BenchReport(BaseModel):
    rows: List[TimingRow]
    loglog_slope: float
    points: int
    threads: int = 1


class SweepRow(BaseModel):
    k_mu: int
    k_sigma: int
    f1: float


# ---------- RANSAC ----------

class RansacConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    model: Literal["plane", "cylinder"]
    inlier_threshold: float = Field(default=settings.RANSAC_THRESHOLD, gt=0)
    max_iterations: int = Field(default=settings.RANSAC_ITERATIONS, ge=1)
    min_inliers: int = Field(default=50, ge=1)
    seed: int = settings.SEED
    normal_threshold_deg: Optional[float] = Field(default=None, gt=0, le=90)
    radius_limits: Optional[Tuple[float, float]] = None

    @field_validator("radius_limits")
    @classmethod
    def check_limits(cls, v: Optional[Tuple[float, float]]) -> Optional[Tuple[float, float]]:
        if v is not None and not 0.0 <= v[0] < v[1]:
            raise ValueError("radius_limits must satisfy 0 <= low < high")
        return v


class PlaneModel(BaseModel):
    kind: Literal["plane"] = "plane"
    normal: Vec3
    offset: float


class CylinderModel(BaseModel):
    kind: Literal["cylinder"] = "cylinder"
    axis_point: Vec3
    axis_direction: Vec3
    radius: float


ShapeModel = Annotated[Union[PlaneModel, CylinderModel], Field(discriminator="kind")]


class InstanceResult(BaseModel):
    model: ShapeModel
    inlier_count: int


class RansacRound(BaseModel):
    round: int
    status: Literal["found", "no_model"]
    inlier_count: int = 0
    detail: Optional[str] = None


class RansacReport(BaseModel):
    config: RansacConfig
    requested: int
    instances: List[InstanceResult]
    rounds: List[RansacRound]


# ---------- PROVENANCE ----------

class RunConfig(BaseModel):
    subcommand: str
    inputs: Dict[str, str] = {}
    outputs: Dict[str, str] = {}
    parameters: Dict[str, Any] = {}
    seed: int = settings.SEED
    threads: int = settings.THREADS


class ViewpointDocument(BaseModel):
    viewpoint: Vec3
