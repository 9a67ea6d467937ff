import math
from enum import Enum
from typing import Annotated, List, Literal, Optional, Union

from pydantic import BaseModel, Field, model_validator

from ..config import settings
from .channel import ChannelName
from .estimates import SessionEstimates
from .quantum import MeasBasis, Outcome


class Source(str, Enum):
    S1 = "S1"  # control pairs
    S2 = "S2"  # carries |u>
    S3 = "S3"  # carries the reference vector


class Reference(str, Enum):
    A = "A"
    B = "B"


class TrialKind(str, Enum):
    SECURITY_PASS = "SecurityPass"
    SECURITY_FAIL = "SecurityFail"
    SAME = "Same"
    FLIP = "Flip"


class CheckRound(str, Enum):
    CHECKING = "checking"
    MESSAGE = "message"


class AbortReason(str, Enum):
    EAVESDROPPER_SUSPECTED = "eavesdropper-suspected"
    CONTROL_TAMPERING_SUSPECTED = "control-tampering-suspected"
    INSUFFICIENT_TRIALS = "insufficient-trials"


class PolarizationVector(BaseModel):
    """Classical description of a vector encoded as alpha|H> + beta|V> with length `magnitude`."""

    alpha: float = Field(..., allow_inf_nan=False)
    beta: float = Field(..., allow_inf_nan=False)
    magnitude: float = Field(default=1.0, ge=0.0, allow_inf_nan=False)

    @model_validator(mode="after")
    def validate_normalized(self) -> "PolarizationVector":
        norm = self.alpha ** 2 + self.beta ** 2
        if abs(norm - 1.0) > settings.NORM_TOLERANCE:
            raise ValueError(f"alpha^2 + beta^2 must equal 1 (got {norm:.12g})")
        return self


class SessionConfig(BaseModel):
    n_pairs_per_source: Optional[int] = Field(
        default=None,
        gt=0,
        description="Pairs per source (2N); defaults to check/message split that leaves exactly `shots` message pairs"
    )
    check_fraction: float = Field(default=0.5, gt=0.0, le=1.0, description="Fraction of each source used as checking group")
    message_check_fraction: float = Field(
        default=0.0,
        ge=0.0,
        lt=1.0,
        description="Fraction of the message group spot-checked before trials start"
    )
    u: PolarizationVector
    v_a: PolarizationVector
    v_b: PolarizationVector
    shots: int = Field(..., gt=0, description="Fredkin trials in the session, alternating references A and B")
    check_threshold: float = Field(default=settings.DEFAULT_CHECK_THRESHOLD, ge=0.0, le=1.0)
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    ci_level: float = Field(default=settings.DEFAULT_CI_LEVEL, gt=0.0, lt=1.0)
    tie_epsilon: float = Field(default=settings.DEFAULT_TIE_EPSILON, ge=0.0)
    verify_return: bool = False
    server_measures_targets: bool = False

    @model_validator(mode="after")
    def fill_pairs_and_check_capacity(self) -> "SessionConfig":
        if self.n_pairs_per_source is None:
            self.n_pairs_per_source = self.default_pairs_for(self.shots, self.check_fraction, self.message_check_fraction)
        if self.shots > self.n_trial_pairs:
            raise ValueError(
                f"shots ({self.shots}) exceeds message pairs available after checking "
                f"({self.n_trial_pairs} of {self.n_pairs_per_source} per source)"
            )
        return self

    @staticmethod
    def default_pairs_for(shots: int, check_fraction: float, message_check_fraction: float) -> int:
        if check_fraction >= 1.0:
            return shots
        n = max(1, math.ceil(shots / ((1.0 - check_fraction) * (1.0 - message_check_fraction))))
        # Rounding of the split may eat a pair; grow until the capacity fits.
        while _trial_capacity(n, check_fraction, message_check_fraction) < shots:
            n += 1
        return n

    @property
    def n_check(self) -> int:
        return _round_half_up(self.n_pairs_per_source * self.check_fraction)

    @property
    def n_message(self) -> int:
        return self.n_pairs_per_source - self.n_check

    @property
    def n_spot_check(self) -> int:
        return _round_half_up(self.n_message * self.message_check_fraction)

    @property
    def n_trial_pairs(self) -> int:
        return self.n_message - self.n_spot_check

    def reference_vector(self, reference: Reference) -> PolarizationVector:
        return self.v_a if reference == Reference.A else self.v_b


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _trial_capacity(n: int, check_fraction: float, message_check_fraction: float) -> int:
    n_message = n - _round_half_up(n * check_fraction)
    return n_message - _round_half_up(n_message * message_check_fraction)


# Classical messages. `seq` is assigned by the transcript when the message is sent.

class _Message(BaseModel):
    seq: int = -1
    sender: Literal["alice", "bob"]


class BasisAnnouncement(_Message):
    type: Literal["basis_announcement"] = "basis_announcement"
    source: Source
    index: int
    basis: MeasBasis


class ResultAnnouncement(_Message):
    type: Literal["result_announcement"] = "result_announcement"
    source: Source
    index: int
    outcome: Outcome


class CorrectionRequest(_Message):
    type: Literal["correction_request"] = "correction_request"
    source: Source
    index: int
    apply_x: bool
    apply_z: bool


class FredkinRequest(_Message):
    type: Literal["fredkin_request"] = "fredkin_request"
    control_index: int
    target_indices: List[int]


class ReturnRequest(_Message):
    type: Literal["return_request"] = "return_request"
    indices: List[int]


class AbortNotice(_Message):
    type: Literal["abort_notice"] = "abort_notice"
    reason: AbortReason


ProtocolMessage = Annotated[
    Union[BasisAnnouncement, ResultAnnouncement, CorrectionRequest, FredkinRequest, ReturnRequest, AbortNotice],
    Field(discriminator="type")
]


class ControlRecord(BaseModel):
    pair_index: int
    prepared_outcome: Outcome
    basis: MeasBasis

    @model_validator(mode="after")
    def validate_outcome_matches_basis(self) -> "ControlRecord":
        if self.prepared_outcome.basis != self.basis:
            raise ValueError("prepared_outcome must belong to the recorded basis")
        return self


class PrepRecord(BaseModel):
    source: Source
    pair_index: int
    outcome: Outcome
    correction_requested: bool


class TrialOutcome(BaseModel):
    pair_index: int
    reference: Reference
    control_basis: Optional[MeasBasis] = None
    kind: Optional[TrialKind] = None
    discarded_loss: bool = False

    @model_validator(mode="after")
    def validate_kind_matches_basis(self) -> "TrialOutcome":
        if self.discarded_loss:
            if self.kind is not None:
                raise ValueError("discarded trials carry no outcome")
            return self
        if self.kind is None or self.control_basis is None:
            raise ValueError("completed trials need a control basis and an outcome kind")
        security = self.kind in (TrialKind.SECURITY_PASS, TrialKind.SECURITY_FAIL)
        if security != (self.control_basis == MeasBasis.COMPUTATIONAL):
            raise ValueError(f"{self.kind.value} is inconsistent with a {self.control_basis.value} control")
        return self


class CheckReport(BaseModel):
    source: Source
    channel: ChannelName
    round: CheckRound
    n_checked: int = 0
    n_mismatch: int = 0
    n_lost: int = 0
    aborted: bool = False

    @property
    def mismatch_rate(self) -> float:
        return self.n_mismatch / self.n_checked if self.n_checked else 0.0


class HonestyReport(BaseModel):
    n_returned: int = 0
    n_checked: int = 0
    n_suspicious: int = 0
    n_lost: int = 0
    n_excluded_diagonal: int = 0

    @property
    def suspicion_rate(self) -> float:
        return self.n_suspicious / self.n_checked if self.n_checked else 0.0


class SessionResult(BaseModel):
    seed: int
    check_reports: List[CheckReport] = Field(default_factory=list)
    trials: List[TrialOutcome] = Field(default_factory=list)
    aborted: bool = False
    abort_reason: Optional[AbortReason] = None
    estimates: Optional[SessionEstimates] = None
    honesty: Optional[HonestyReport] = None
    interceptions: int = Field(default=0, description="Entries written to Eve's ledger across all channels")
    transcript_hash: str = ""
    transcript: Optional[List[ProtocolMessage]] = None

    @model_validator(mode="after")
    def validate_abort_consistency(self) -> "SessionResult":
        if self.aborted != (self.abort_reason is not None):
            raise ValueError("abort_reason is required exactly when the session aborted")
        return self

    def completed_trials(self) -> List[TrialOutcome]:
        return [t for t in self.trials if not t.discarded_loss]

    def security_fail_count(self) -> int:
        return sum(1 for t in self.trials if t.kind == TrialKind.SECURITY_FAIL)

    def computational_trial_count(self) -> int:
        return sum(
            1 for t in self.trials
            if not t.discarded_loss and t.control_basis == MeasBasis.COMPUTATIONAL
        )
