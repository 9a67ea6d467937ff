from enum import Enum

from pydantic import BaseModel, Field


class Assignment(str, Enum):
    A = "A"
    B = "B"
    TIE = "Tie"


class OverlapEstimate(BaseModel):
    p_minus_hat: float = Field(..., ge=0.0, le=1.0, description="Observed flip frequency")
    n_diag: int = Field(..., gt=0, description="Diagonal-control trials behind the estimate")
    n_flip: int = Field(..., ge=0)
    overlap_mag: float = Field(..., ge=0.0, le=1.0, description="Estimate of |<u|v>|")
    ci_level: float
    ci_low: float
    ci_high: float


class DistanceEstimate(BaseModel):
    d: float = Field(..., ge=0.0)
    mag_u: float
    mag_v: float
    overlap_mag: float
    radicand: float = Field(..., description="|u|^2 + |v|^2 - 2|u||v|overlap before clamping")
    clamped: bool = Field(default=False, description="Radicand was negative and clamped to zero")


class ClusterAssignment(BaseModel):
    chosen: Assignment
    d_a: DistanceEstimate
    d_b: DistanceEstimate
    margin: float


class ReferenceEstimate(BaseModel):
    overlap: OverlapEstimate
    distance: DistanceEstimate


class SessionEstimates(BaseModel):
    reference_a: ReferenceEstimate
    reference_b: ReferenceEstimate
    assignment: ClusterAssignment
