"""Request/response models for the HTTP service."""

from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..experiment import ChainSection, ExperimentConfig, QubitSection, ThermalSection


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class HealthResponse(_Model):
    status: str
    version: str


class PhysSection(_Model):
    JS2_kelvin: float = Field(gt=0)
    S_over_hbar: float = Field(ge=1.0, default=1.0)


class ScalesRequest(_Model):
    h: float = Field(gt=0)
    beta: Optional[float] = None
    tan_beta: Optional[float] = None
    N: Optional[int] = Field(default=None, ge=2)
    phys: Optional[PhysSection] = None

    @model_validator(mode="after")
    def _one_beta(self):
        if (self.beta is None) == (self.tan_beta is None):
            raise ValueError("specify exactly one of beta / tan_beta")
        return self


class PhysicalOut(_Model):
    velocity_spacings_per_s: float
    traversal_time_s: Optional[float] = None


class ScalesResponse(_Model):
    beta: float
    h: float
    lam: float
    tau: float
    epsilon: float
    v: float
    validity_ratio: float
    continuum_warning: bool
    physical: Optional[PhysicalOut] = None


class SummaryRow(_Model):
    seed: int
    detected: Optional[bool] = None
    velocity: Optional[float] = None
    beta_eff_velocity: Optional[float] = None
    beta_eff_shape: Optional[float] = None
    lambda_shape: Optional[float] = None
    shape_residual: Optional[float] = None
    delta_E: Optional[float] = None
    work_integral: Optional[float] = None
    eps_beta_eff: Optional[float] = None
    az_out: Optional[float] = None
    aperp_out: Optional[float] = None
    omega: Optional[float] = None
    phi: Optional[float] = None
    backaction: Optional[float] = None


class InjectRequest(_Model):
    config: ExperimentConfig
    base_dir: str = "."


class InjectResponse(_Model):
    output_dir: str
    digest: str
    manifest: str
    rows: list[SummaryRow]


class CorrelatorOut(_Model):
    value: float
    stderr: Optional[float] = None


class ThermalizeRequest(_Model):
    chain: ChainSection
    thermal: ThermalSection
    n_samples: int = Field(default=1, ge=1)
    out: Optional[str] = None


class ThermalizeResponse(_Model):
    onsite_x: CorrelatorOut
    onsite_y: CorrelatorOut
    nn_diff_x: CorrelatorOut
    nn_diff_y: CorrelatorOut
    files: list[str]


class QubitRequest(_Model):
    source: str = "analytic"          # "analytic" | "trajectory"
    h: Optional[float] = None         # required for analytic
    beta: Optional[float] = None
    tan_beta: Optional[float] = None
    window_xi: float = 12.0
    qubit: QubitSection = Field(default_factory=QubitSection)
    trajectory_path: Optional[str] = None
    track_threshold: float = 0.9
    out: Optional[str] = None

    @model_validator(mode="after")
    def _check(self):
        if self.source not in ("analytic", "trajectory"):
            raise ValueError("source must be 'analytic' or 'trajectory'")
        if self.source == "analytic":
            if self.h is None:
                raise ValueError("analytic source needs h")
            if (self.beta is None) == (self.tan_beta is None):
                raise ValueError("specify exactly one of beta / tan_beta")
        elif self.trajectory_path is None:
            raise ValueError("trajectory source needs trajectory_path")
        return self


class QubitResponse(_Model):
    az_out: float
    aperp_out: float
    omega: float
    phi: float
    backaction: Optional[float] = None
    norm_deviation: float
    files: list[str]


class SweepRequest(_Model):
    base: ExperimentConfig
    axes: dict[str, list[Any]]
    out: str
    workers: int = Field(default=1, ge=1)
    max_cells: int = Field(default=256, ge=1)


class SweepResponse(_Model):
    cells: int
    csv: str
    rows: list[dict[str, Any]]


class ExportRequest(_Model):
    bundle_dir: str
    kind: str
    seed: Optional[int] = None
    heatmap: bool = False


class ExportResponse(_Model):
    files: list[str]
