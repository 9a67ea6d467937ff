"""
Alice (client) and Bob (server) session state.

Both parties point at the same PairRegistry, which owns every joint
StateVector of the session. Each party only ever touches the qubit labels
it physically holds; the registry enforces that no pair is used twice.
"""

import hashlib
import logging
from typing import Dict, List, Set, Tuple

import numpy as np

from ..exceptions import ProtocolError
from ..models.protocol import (
    ControlRecord,
    PrepRecord,
    ProtocolMessage,
    Reference,
    SessionConfig,
    Source,
)
from .quantum_core import StateVector

logger = logging.getLogger(__name__)

PairKey = Tuple[Source, int]


class Transcript:
    """Ordered classical message log with a running SHA-256 over every message."""

    def __init__(self, keep_messages: bool = False):
        self._hash = hashlib.sha256()
        self._next_seq = 0
        self.keep_messages = keep_messages
        self.messages: List[ProtocolMessage] = []

    def send(self, message: ProtocolMessage) -> ProtocolMessage:
        message.seq = self._next_seq
        self._next_seq += 1
        self._hash.update(message.model_dump_json().encode())
        self._hash.update(b"\n")
        if self.keep_messages:
            self.messages.append(message)
        return message

    def __len__(self) -> int:
        return self._next_seq

    @property
    def digest(self) -> str:
        return self._hash.hexdigest()


class PairRegistry:
    """Quantum truth of a session: Bell pairs per source and the joint trial states built from them."""

    def __init__(self, n_pairs_per_source: int):
        self.n_pairs = n_pairs_per_source
        self.pairs: Dict[PairKey, StateVector] = {}
        self.lost: Set[PairKey] = set()
        self.consumed: Dict[PairKey, str] = {}
        self.joint: Dict[int, StateVector] = {}

    def get(self, source: Source, index: int) -> StateVector:
        try:
            return self.pairs[(source, index)]
        except KeyError:
            raise ProtocolError(f"pair {source.value}[{index}] was never distributed") from None

    def put(self, source: Source, index: int, state: StateVector) -> None:
        self.pairs[(source, index)] = state

    def is_lost(self, source: Source, index: int) -> bool:
        return (source, index) in self.lost

    def discard(self, source: Source, index: int) -> None:
        self.pairs.pop((source, index), None)

    def consume(self, source: Source, index: int, purpose: str) -> None:
        key = (source, index)
        if key in self.consumed:
            raise ProtocolError(
                f"pair {source.value}[{index}] already consumed by {self.consumed[key]}",
                details={"source": source.value, "index": index, "purpose": purpose}
            )
        if not 0 <= index < self.n_pairs:
            raise ProtocolError(f"pair index {index} out of range for {source.value}")
        self.consumed[key] = purpose


class Client:
    """Alice: single-qubit rotations and measurements only."""

    def __init__(
        self,
        config: SessionConfig,
        registry: PairRegistry,
        rng: np.random.Generator,
        transcript: Transcript,
    ):
        self.config = config
        self.registry = registry
        self.rng = rng
        self.transcript = transcript
        self.controls: Dict[int, ControlRecord] = {}
        self.preps: Dict[PairKey, PrepRecord] = {}
        self.trial_references: Dict[int, Reference] = {}


class Server:
    """Bob: creates the pairs, runs the Fredkin gate, returns qubits on request."""

    def __init__(
        self,
        config: SessionConfig,
        registry: PairRegistry,
        rng: np.random.Generator,
        transcript: Transcript,
    ):
        self.config = config
        self.registry = registry
        self.rng = rng
        self.transcript = transcript
        self.measures_targets = config.server_measures_targets
        self.fredkin_done: Set[int] = set()
        self.checking_indices = list(range(config.n_check))
        self.message_indices = list(range(config.n_check, config.n_pairs_per_source))
        self.spot_check_indices: List[int] = []

    @property
    def trial_indices(self) -> List[int]:
        """Message-group positions left for Fredkin trials once spot checks took their share."""
        spot = set(self.spot_check_indices)
        return [i for i in self.message_indices if i not in spot]
