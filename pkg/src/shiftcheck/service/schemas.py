"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from ..pipeline import EstimatorConfig


class ConfigModel(BaseModel):
    k: int = 25
    quantile: float = Field(default=0.99, gt=0.0, lt=1.0)
    classwise: bool = False
    normalize: bool = False
    max_ref: int = 50_000
    min_samples: int = 20
    seed: int = 0
    self_exclude: bool = False
    cot_batch_size: int = 2500
    cot_max_samples: int = 25_000

    def to_config(self) -> EstimatorConfig:
        return EstimatorConfig(**self.model_dump())


class SynthRequest(BaseModel):
    out_dir: str
    preset: Optional[str] = None
    scenario: Optional[dict] = None
    seed: Optional[int] = None


class SynthResponse(BaseModel):
    out_dir: str
    name: str
    seed: int
    n_train: int
    n_val: int
    n_test: int


class FitRequest(BaseModel):
    bundle: str
    out_dir: str
    config: ConfigModel = ConfigModel()


class FitResponse(BaseModel):
    out_dir: str
    artifacts: List[str]


class EstimateRequest(BaseModel):
    bundle: str
    methods: List[str]
    bundle_b: Optional[str] = None
    fitted_dir: Optional[str] = None
    config: ConfigModel = ConfigModel()


class ReportModel(BaseModel):
    method: str
    accuracy_estimate: float
    n_test: int
    kept_confidence_fraction: Optional[float] = None
    kept_distance_fraction: Optional[float] = None
    kept_joint_fraction: Optional[float] = None
    config: dict


class EstimateResponse(BaseModel):
    bundle: str
    reports: List[ReportModel]
    timestamp: str


class EvaluateRequest(BaseModel):
    bundles: List[str]
    methods: List[str]
    bundles_b: Optional[List[str]] = None
    out_dir: Optional[str] = None
    dataset_family: str = "all"
    config: ConfigModel = ConfigModel()


class SignificanceModel(BaseModel):
    method_a: str
    method_b: str
    n_pairs: int
    statistic: float
    p_value_raw: float
    p_value_bonferroni: float
    n_comparisons: int
    degenerate: bool


class EvaluateResponse(BaseModel):
    n_records: int
    mae_by_method: Dict[str, float]
    best_method: Optional[str] = None
    best_equivalent: List[str] = []
    significance: List[SignificanceModel] = []
    files: List[str] = []
    timestamp: str


class ErrorResponse(BaseModel):
    error: str
    kind: str  # "validation" | "io"
