from enum import Enum
from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, Field

from .quantum import MeasBasis, Outcome


class ChannelName(str, Enum):
    C_A1B1 = "C_a1b1"
    C_A2B2 = "C_a2b2"
    C_A3B3 = "C_a3b3"
    C_A4B4 = "C_a4b4"


class BasisPolicy(str, Enum):
    RANDOM_UNIFORM = "random_uniform"
    FIXED_COMPUTATIONAL = "fixed_computational"
    FIXED_DIAGONAL = "fixed_diagonal"


class Pauli(str, Enum):
    I = "I"
    X = "X"
    Y = "Y"
    Z = "Z"


class NoAttack(BaseModel):
    kind: Literal["none"] = "none"


class InterceptResend(BaseModel):
    kind: Literal["intercept_resend"] = "intercept_resend"
    basis_policy: BasisPolicy = Field(
        default=BasisPolicy.RANDOM_UNIFORM,
        description="How Eve picks the basis she measures the in-flight qubit in"
    )


class FakePhoton(BaseModel):
    kind: Literal["fake_photon"] = "fake_photon"
    replacement: Outcome = Field(
        default=Outcome.H,
        description="Eigenstate of the unentangled photon Eve forwards"
    )


class Depolarize(BaseModel):
    kind: Literal["depolarize"] = "depolarize"
    p: float = Field(..., ge=0.0, le=1.0, allow_inf_nan=False, description="Probability of a uniformly chosen X, Y or Z")


AttackStrategy = Annotated[
    Union[NoAttack, InterceptResend, FakePhoton, Depolarize],
    Field(discriminator="kind")
]


class ChannelModel(BaseModel):
    name: ChannelName
    attack: AttackStrategy = Field(default_factory=NoAttack)
    loss_p: float = Field(default=0.0, ge=0.0, le=1.0, description="Photon loss probability")


class LogEntry(BaseModel):
    """One line of Eve's private ledger; written only for attacked or lossy transmissions."""

    channel: ChannelName
    pair_index: int
    eve_basis: Optional[MeasBasis] = None
    eve_outcome: Optional[Outcome] = None
    replaced: bool = False
    pauli_applied: Optional[Pauli] = None
    lost: bool = False
