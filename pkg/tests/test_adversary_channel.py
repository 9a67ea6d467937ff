from collections import Counter

import numpy as np
import pytest

from app.exceptions import InvalidArgumentError
from app.models.channel import (
    BasisPolicy,
    ChannelModel,
    ChannelName,
    Depolarize,
    FakePhoton,
    InterceptResend,
    NoAttack,
    Pauli,
)
from app.models.quantum import MeasBasis, Outcome
from app.services.channel import ChannelSet, detection_probability_oracle, transmit
from app.services.quantum_core import bell_phi_plus, fidelity, measure, schmidt_rank


def channel(attack=None, loss_p=0.0, name=ChannelName.C_A1B1) -> ChannelModel:
    return ChannelModel(name=name, attack=attack or NoAttack(), loss_p=loss_p)


def test_no_attack_is_identity(rng):
    pair = bell_phi_plus("a", "b")
    out, entry = transmit(pair, "a", channel(), rng, pair_index=0)
    assert entry is None
    assert np.array_equal(out.amplitudes, pair.amplitudes)


def test_transmit_requires_known_qubit(rng):
    with pytest.raises(InvalidArgumentError):
        transmit(bell_phi_plus("a", "b"), "z", channel(), rng)


@pytest.mark.parametrize("replacement", list(Outcome))
def test_fake_photon_destroys_entanglement(rng, replacement):
    for index in range(20):
        out, entry = transmit(bell_phi_plus("a", "b"), "a", channel(FakePhoton(replacement=replacement)), rng, index)
        assert schmidt_rank(out, ["a"]) == 1
        assert entry.replaced and entry.eve_basis == MeasBasis.COMPUTATIONAL
        assert abs(out.norm() - 1.0) <= 1e-10


def test_intercept_resend_logs_eve_measurement(rng):
    attack = InterceptResend(basis_policy=BasisPolicy.FIXED_DIAGONAL)
    out, entry = transmit(bell_phi_plus("a", "b"), "a", channel(attack), rng, pair_index=4)
    assert entry.pair_index == 4
    assert entry.eve_basis == MeasBasis.DIAGONAL
    assert entry.eve_outcome in (Outcome.PLUS, Outcome.MINUS)
    assert schmidt_rank(out, ["a"]) == 1
    assert abs(out.norm() - 1.0) <= 1e-10


def test_depolarize_applies_each_pauli_uniformly(rng):
    counts = Counter()
    n = 30_000
    for index in range(n):
        out, entry = transmit(bell_phi_plus("a", "b"), "a", channel(Depolarize(p=1.0)), rng, index)
        counts[entry.pauli_applied] += 1
        assert abs(out.norm() - 1.0) <= 1e-10
    assert counts[Pauli.I] == 0
    for pauli in (Pauli.X, Pauli.Y, Pauli.Z):
        assert counts[pauli] / n == pytest.approx(1 / 3, abs=0.015)


def test_depolarize_zero_keeps_bell_state(rng):
    pair = bell_phi_plus("a", "b")
    out, entry = transmit(pair, "a", channel(Depolarize(p=0.0)), rng)
    assert entry.pauli_applied == Pauli.I
    assert fidelity(out, pair) == pytest.approx(1.0, abs=1e-12)


def test_loss_extremes(rng):
    for index in range(200):
        _, entry = transmit(bell_phi_plus("a", "b"), "a", channel(loss_p=1.0), rng, index)
        assert entry.lost
        _, entry = transmit(bell_phi_plus("a", "b"), "a", channel(loss_p=0.0), rng, index)
        assert entry is None


def test_lossy_channel_logs_clean_transmissions(rng):
    lost = 0
    for index in range(2_000):
        _, entry = transmit(bell_phi_plus("a", "b"), "a", channel(loss_p=0.25), rng, index)
        assert entry is not None
        lost += entry.lost
    assert lost / 2_000 == pytest.approx(0.25, abs=0.04)


def test_channel_set_fills_defaults_and_keeps_ledgers():
    rngs = {name: np.random.default_rng(i) for i, name in enumerate(ChannelName)}
    channels = ChannelSet({ChannelName.C_A2B2: channel(InterceptResend(), name=ChannelName.C_A2B2)}, rngs)
    assert isinstance(channels[ChannelName.C_A1B1].attack, NoAttack)

    for index in range(10):
        channels.send(ChannelName.C_A1B1, bell_phi_plus("a1", "b1"), "a1", index)
        _, lost = channels.send(ChannelName.C_A2B2, bell_phi_plus("a2", "b2"), "a2", index)
        assert not lost
    assert channels.logs[ChannelName.C_A1B1] == []
    assert len(channels.logs[ChannelName.C_A2B2]) == 10
    assert channels.interception_count() == 10


def test_attacked_bell_pair_loses_correlation_sometimes(rng):
    mismatches = 0
    for index in range(400):
        out, _ = transmit(bell_phi_plus("a", "b"), "a", channel(InterceptResend()), rng, index)
        basis = MeasBasis.COMPUTATIONAL if index % 2 else MeasBasis.DIAGONAL
        first, out = measure(out, "b", basis, rng)
        second, _ = measure(out, "a", basis, rng)
        mismatches += first != second
    assert mismatches > 0


@pytest.mark.parametrize(
    "attack, expected",
    [
        (InterceptResend(basis_policy=BasisPolicy.RANDOM_UNIFORM), 0.25),
        (InterceptResend(basis_policy=BasisPolicy.FIXED_COMPUTATIONAL), 0.25),
        (InterceptResend(basis_policy=BasisPolicy.FIXED_DIAGONAL), 0.25),
        (FakePhoton(replacement=Outcome.H), 0.5),
        (FakePhoton(replacement=Outcome.MINUS), 0.5),
        (Depolarize(p=1.0), 2 / 3),
        (Depolarize(p=0.3), 0.2),
        (Depolarize(p=0.0), 0.0),
    ],
)
def test_detection_probability_oracle(attack, expected):
    assert detection_probability_oracle(attack) == pytest.approx(expected, abs=1e-12)


def test_oracle_rejects_no_attack():
    with pytest.raises(InvalidArgumentError):
        detection_probability_oracle(NoAttack())
