"""
Quantum channels between Bob and Alice with pluggable adversaries.

Attacks act directly on the in-flight qubit of the shared joint state.
Classical messages never pass through here.
"""

import logging
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from ..exceptions import InvalidArgumentError
from ..models.channel import (
    AttackStrategy,
    BasisPolicy,
    ChannelModel,
    ChannelName,
    Depolarize,
    FakePhoton,
    InterceptResend,
    LogEntry,
    NoAttack,
    Pauli,
)
from ..models.quantum import MeasBasis, Outcome, QubitId
from .quantum_core import (
    StateVector,
    apply_single_qubit,
    bell_phi_plus,
    hwp,
    measure,
    outcome_probabilities,
    pauli_x,
    pauli_y,
    pauli_z,
    project,
)

logger = logging.getLogger(__name__)

_PAULIS = {Pauli.X: pauli_x, Pauli.Y: pauli_y, Pauli.Z: pauli_z}
_DEPOLARIZING_SET = (Pauli.X, Pauli.Y, Pauli.Z)
_NEGLIGIBLE = 1e-14  # branches below this weight are numerical noise


def _eve_basis(policy: BasisPolicy, rng: np.random.Generator) -> MeasBasis:
    if policy == BasisPolicy.FIXED_COMPUTATIONAL:
        return MeasBasis.COMPUTATIONAL
    if policy == BasisPolicy.FIXED_DIAGONAL:
        return MeasBasis.DIAGONAL
    return MeasBasis.COMPUTATIONAL if rng.random() < 0.5 else MeasBasis.DIAGONAL


def _replace_with(state: StateVector, q: QubitId, captured: Outcome, replacement: Outcome) -> StateVector:
    # q is collapsed onto |H> or |V>; steer it to the replacement eigenstate.
    if captured.bit != replacement.bit:
        state = apply_single_qubit(state, q, pauli_x())
    if replacement.basis == MeasBasis.DIAGONAL:
        state = apply_single_qubit(state, q, hwp())
    return state


def transmit(
    state: StateVector,
    q: QubitId,
    channel: ChannelModel,
    rng: np.random.Generator,
    pair_index: int = -1,
) -> Tuple[StateVector, Optional[LogEntry]]:
    """
    Send qubit q through the channel.

    Returns the (possibly disturbed) state and Eve's ledger entry, which is
    None for clean transmissions on an unattacked, lossless channel.
    """
    state.index_of(q)
    attack = channel.attack

    if channel.loss_p > 0.0 and rng.random() < channel.loss_p:
        return state, LogEntry(channel=channel.name, pair_index=pair_index, lost=True)

    if isinstance(attack, NoAttack):
        if channel.loss_p > 0.0:
            return state, LogEntry(channel=channel.name, pair_index=pair_index)
        return state, None

    if isinstance(attack, InterceptResend):
        basis = _eve_basis(attack.basis_policy, rng)
        outcome, state = measure(state, q, basis, rng)
        return state, LogEntry(channel=channel.name, pair_index=pair_index, eve_basis=basis, eve_outcome=outcome)

    if isinstance(attack, FakePhoton):
        captured, state = measure(state, q, MeasBasis.COMPUTATIONAL, rng)
        state = _replace_with(state, q, captured, attack.replacement)
        return state, LogEntry(
            channel=channel.name,
            pair_index=pair_index,
            eve_basis=MeasBasis.COMPUTATIONAL,
            eve_outcome=captured,
            replaced=True,
        )

    if isinstance(attack, Depolarize):
        pauli = Pauli.I
        if attack.p > 0.0 and rng.random() < attack.p:
            pauli = _DEPOLARIZING_SET[int(rng.integers(3))]
            state = apply_single_qubit(state, q, _PAULIS[pauli]())
        return state, LogEntry(channel=channel.name, pair_index=pair_index, pauli_applied=pauli)

    raise InvalidArgumentError(f"unsupported attack strategy: {attack!r}")


class ChannelSet:
    """The four channels of a session, each with its own random stream and ledger."""

    def __init__(self, models: Mapping[ChannelName, ChannelModel], rngs: Mapping[ChannelName, np.random.Generator]):
        self.models: Dict[ChannelName, ChannelModel] = {
            name: models.get(name, ChannelModel(name=name)) for name in ChannelName
        }
        self.rngs = dict(rngs)
        self.logs: Dict[ChannelName, List[LogEntry]] = {name: [] for name in ChannelName}

    def __getitem__(self, name: ChannelName) -> ChannelModel:
        return self.models[name]

    def send(self, name: ChannelName, state: StateVector, q: QubitId, pair_index: int) -> Tuple[StateVector, bool]:
        """Transmit on the named channel; returns the new state and whether the photon was lost."""
        state, entry = transmit(state, q, self.models[name], self.rngs[name], pair_index=pair_index)
        if entry is None:
            return state, False
        self.logs[name].append(entry)
        if entry.lost:
            logger.debug(f"Photon lost on {name.value} (pair {pair_index})")
        return state, entry.lost

    def interception_count(self) -> int:
        return sum(len(entries) for entries in self.logs.values())


def _attack_branches(state: StateVector, q: QubitId, attack: AttackStrategy) -> List[Tuple[float, StateVector]]:
    """Every post-attack state with its exact probability."""
    if isinstance(attack, InterceptResend):
        weights = {
            BasisPolicy.RANDOM_UNIFORM: {MeasBasis.COMPUTATIONAL: 0.5, MeasBasis.DIAGONAL: 0.5},
            BasisPolicy.FIXED_COMPUTATIONAL: {MeasBasis.COMPUTATIONAL: 1.0},
            BasisPolicy.FIXED_DIAGONAL: {MeasBasis.DIAGONAL: 1.0},
        }[attack.basis_policy]
        branches = []
        for basis, w in weights.items():
            for outcome, p in outcome_probabilities(state, q, basis).items():
                if p > _NEGLIGIBLE:
                    branches.append((w * p, project(state, q, outcome)[1]))
        return branches

    if isinstance(attack, FakePhoton):
        branches = []
        for captured, p in outcome_probabilities(state, q, MeasBasis.COMPUTATIONAL).items():
            if p > _NEGLIGIBLE:
                collapsed = project(state, q, captured)[1]
                branches.append((p, _replace_with(collapsed, q, captured, attack.replacement)))
        return branches

    if isinstance(attack, Depolarize):
        branches = [(1.0 - attack.p, state)]
        for pauli in _DEPOLARIZING_SET:
            branches.append((attack.p / 3.0, apply_single_qubit(state, q, _PAULIS[pauli]())))
        return branches

    raise InvalidArgumentError(
        "detection oracle supports intercept_resend, fake_photon and depolarize attacks",
        details={"attack": getattr(attack, "kind", repr(attack))}
    )


def _mismatch_probability(state: StateVector, alice: QubitId, bob: QubitId, basis: MeasBasis) -> float:
    total = 0.0
    for bob_outcome, p_bob in outcome_probabilities(state, bob, basis).items():
        if p_bob <= _NEGLIGIBLE:
            continue
        collapsed = project(state, bob, bob_outcome)[1]
        alice_probs = outcome_probabilities(collapsed, alice, basis)
        total += p_bob * (1.0 - alice_probs[bob_outcome])
    return total


def detection_probability_oracle(attack: AttackStrategy) -> float:
    """
    Exact per-checked-pair mismatch probability of the Bell-pair check under an attack.

    Enumerates Eve's choices, the two check bases (weight 1/2 each) and all
    outcomes with their Born weights. No sampling is involved.
    """
    if isinstance(attack, NoAttack):
        raise InvalidArgumentError("detection oracle is undefined for an unattacked channel")
    pair = bell_phi_plus("a", "b")
    probability = 0.0
    for weight, attacked in _attack_branches(pair, "a", attack):
        for basis in (MeasBasis.COMPUTATIONAL, MeasBasis.DIAGONAL):
            probability += 0.5 * weight * _mismatch_probability(attacked, "a", "b", basis)
    return probability
