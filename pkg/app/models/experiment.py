from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..config import settings
from .channel import (
    BasisPolicy,
    ChannelModel,
    ChannelName,
    Depolarize,
    FakePhoton,
    InterceptResend,
    NoAttack,
)
from .estimates import SessionEstimates
from .protocol import (
    AbortReason,
    CheckReport,
    HonestyReport,
    PolarizationVector,
    ProtocolMessage,
    SessionConfig,
    TrialOutcome,
)
from .quantum import Outcome


class AttackKind(str, Enum):
    NONE = "none"
    INTERCEPT_RESEND = "intercept_resend"
    FAKE_PHOTON = "fake_photon"
    DEPOLARIZE = "depolarize"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SessionSection(_Section):
    n_pairs_per_source: Optional[int] = Field(default=None, gt=0)
    check_fraction: float = Field(default=0.5, gt=0.0, le=1.0)
    message_check_fraction: float = Field(default=0.0, ge=0.0, lt=1.0)
    shots: int = Field(..., gt=0)
    check_threshold: float = Field(default=settings.DEFAULT_CHECK_THRESHOLD, ge=0.0, le=1.0)
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    tie_epsilon: float = Field(default=settings.DEFAULT_TIE_EPSILON, ge=0.0)
    verify_return: bool = False
    server_measures_targets: bool = False


class VectorsSection(_Section):
    u: PolarizationVector
    v_a: PolarizationVector
    v_b: PolarizationVector


class ChannelSpec(_Section):
    """Flat, file-friendly form of a ChannelModel."""

    attack: AttackKind = AttackKind.NONE
    p: Optional[float] = Field(default=None, ge=0.0, le=1.0, allow_inf_nan=False)
    basis_policy: BasisPolicy = BasisPolicy.RANDOM_UNIFORM
    replacement: Outcome = Outcome.H
    loss_p: float = Field(default=0.0, ge=0.0, le=1.0, allow_inf_nan=False)

    @model_validator(mode="after")
    def validate_p(self) -> "ChannelSpec":
        if self.attack == AttackKind.DEPOLARIZE and self.p is None:
            raise ValueError("depolarize needs p")
        if self.attack != AttackKind.DEPOLARIZE and self.p is not None:
            raise ValueError(f"p only applies to depolarize, not {self.attack.value}")
        return self

    def to_model(self, name: ChannelName) -> ChannelModel:
        if self.attack == AttackKind.INTERCEPT_RESEND:
            attack = InterceptResend(basis_policy=self.basis_policy)
        elif self.attack == AttackKind.FAKE_PHOTON:
            attack = FakePhoton(replacement=self.replacement)
        elif self.attack == AttackKind.DEPOLARIZE:
            attack = Depolarize(p=self.p)
        else:
            attack = NoAttack()
        return ChannelModel(name=name, attack=attack, loss_p=self.loss_p)


class ReportSection(_Section):
    ci_level: float = Field(default=settings.DEFAULT_CI_LEVEL, gt=0.0, lt=1.0)
    repetitions: int = Field(default=1, gt=0)
    output_dir: str = Field(default=settings.DEFAULT_OUTPUT_DIR)
    emit_transcript: bool = False


class ExperimentConfig(_Section):
    session: SessionSection
    vectors: VectorsSection
    channels: Dict[ChannelName, ChannelSpec] = Field(default_factory=dict)
    report: ReportSection = Field(default_factory=ReportSection)

    @model_validator(mode="after")
    def validate_session_capacity(self) -> "ExperimentConfig":
        try:
            self.session_config(self.session.seed)
        except ValidationError as e:
            raise ValueError("; ".join(error["msg"] for error in e.errors())) from None
        return self

    def session_config(self, seed: int) -> SessionConfig:
        fields = self.session.model_dump()
        fields["seed"] = seed
        return SessionConfig(
            **fields,
            u=self.vectors.u,
            v_a=self.vectors.v_a,
            v_b=self.vectors.v_b,
            ci_level=self.report.ci_level,
        )

    def channel_models(self) -> Dict[ChannelName, ChannelModel]:
        return {name: spec.to_model(name) for name, spec in self.channels.items()}


class RepetitionSummary(BaseModel):
    repetition: int
    seed: int
    aborted: bool
    abort_reason: Optional[AbortReason] = None
    n_trials: int = 0
    n_discarded: int = 0
    computational_trials: int = 0
    security_fail_count: int = 0
    check_reports: List[CheckReport] = Field(default_factory=list)
    estimates: Optional[SessionEstimates] = None
    honesty: Optional[HonestyReport] = None
    interceptions: int = 0
    transcript_hash: str


class ReferenceAggregate(BaseModel):
    p_minus_hat_mean: Optional[float] = None
    p_minus_hat_std: Optional[float] = None
    overlap_mag_mean: Optional[float] = None
    distance_mean: Optional[float] = None
    ci_level: float
    ci_low_mean: Optional[float] = None
    ci_high_mean: Optional[float] = None


class ChannelSecurity(BaseModel):
    checked: int = 0
    mismatches: int = 0
    security_fail_count: int = 0


class RunSummary(BaseModel):
    """Contents of summary.json; field order is the file's key order."""

    config_hash: str
    repetitions: int
    aborted_count: int
    per_reference: Dict[str, ReferenceAggregate]
    assignment_histogram: Dict[str, int]
    security: Dict[str, ChannelSecurity]
    wall_clock_s: float


class RunReport(BaseModel):
    summary: RunSummary
    repetitions: List[RepetitionSummary]
    output_dir: Optional[str] = None
    emit_transcript: bool = False
    trials: Dict[int, List[TrialOutcome]] = Field(default_factory=dict, exclude=True)
    transcripts: Dict[int, List[ProtocolMessage]] = Field(default_factory=dict, exclude=True)

    @property
    def all_aborted(self) -> bool:
        return self.summary.aborted_count == self.summary.repetitions

    def abort_reasons(self) -> Dict[str, int]:
        """Aborted repetitions per reason, in first-seen order."""
        counts: Dict[str, int] = {}
        for summary in self.repetitions:
            if summary.abort_reason is not None:
                counts[summary.abort_reason.value] = counts.get(summary.abort_reason.value, 0) + 1
        return counts
