import time

import numpy as np
import pytest
from pydantic import ValidationError

from app.config import settings
from app.exceptions import ProtocolError
from app.models.channel import BasisPolicy, ChannelModel, ChannelName, Depolarize, FakePhoton, InterceptResend
from app.models.protocol import (
    AbortNotice,
    AbortReason,
    CheckRound,
    CorrectionRequest,
    FredkinRequest,
    HonestyReport,
    Reference,
    Source,
    TrialKind,
)
from app.models.quantum import MeasBasis, Outcome
from app.services.estimator import distance, overlap_magnitude
from app.services.protocol import (
    client_measure_control,
    distribute_pairs,
    eavesdrop_check,
    prepare_control,
    remote_prepare,
    run_session,
    server_fredkin_and_return,
    session_init,
    verify_returned_reference,
)
from app.services.quantum_core import (
    basis_state,
    bell_phi_plus,
    fidelity,
    qubit_state,
    reduced_qubit_state,
)
from conftest import H_VEC, PLUS_VEC, TARGET_68, V_VEC, make_session, vector


def attacked(name: ChannelName, attack=None, loss_p: float = 0.0):
    if attack is None:
        return {name: ChannelModel(name=name, loss_p=loss_p)}
    return {name: ChannelModel(name=name, attack=attack, loss_p=loss_p)}


def ready_session(config, channel_models=None, keep_transcript=False):
    client, server, channels = session_init(config, channel_models, keep_transcript)
    distribute_pairs(server, channels)
    return client, server, channels


def prepared_trial(client, server, channels, index, reference_vector=V_VEC):
    record = prepare_control(client, index, client.rng)
    remote_prepare(client, server, client.config.u, Source.S2, index, client.rng)
    remote_prepare(client, server, reference_vector, Source.S3, index, client.rng)
    server_fredkin_and_return(server, index, index, index, channels)
    return record


# Session setup and distribution

def test_session_init_splits_groups():
    client, server, channels = session_init(make_session(n_pairs_per_source=100, check_fraction=0.5, shots=10))
    assert len(server.checking_indices) == 50
    assert len(server.message_indices) == 50
    assert set(channels.models) == set(ChannelName)
    assert len(client.transcript) == 0


def test_default_pair_count_leaves_exactly_shots_for_trials():
    config = make_session(shots=37, check_fraction=0.3, message_check_fraction=0.1)
    assert config.n_pairs_per_source == 59
    assert config.n_check == 18
    assert config.n_spot_check == 4
    assert config.n_trial_pairs == 37


def test_too_many_shots_is_a_configuration_error():
    with pytest.raises(ValidationError):
        make_session(n_pairs_per_source=100, check_fraction=0.5, shots=51)


def test_initial_transcript_hash_is_deterministic():
    first, _, _ = session_init(make_session(seed=7))
    second, _, _ = session_init(make_session(seed=7))
    assert first.transcript.digest == second.transcript.digest


def test_distribution_log_and_honest_pairs():
    config = make_session(n_pairs_per_source=40, shots=10)
    client, server, channels = session_init(config)
    log = distribute_pairs(server, channels)
    assert len(log) == 3 * 40
    assert not any(entry.lost for entry in log)
    for source in Source:
        for index in range(40):
            pair = server.registry.get(source, index)
            reference = bell_phi_plus(pair.qubits[0], pair.qubits[1])
            assert fidelity(pair, reference) == pytest.approx(1.0, abs=1e-12)


# Eavesdropping checks

def test_honest_check_has_no_mismatch():
    client, server, _ = ready_session(make_session(n_pairs_per_source=2_000, shots=10))
    for source in Source:
        report = eavesdrop_check(client, server, source, server.checking_indices, server.rng)
        assert report.n_checked == 1_000
        assert report.n_mismatch == 0
        assert not report.aborted


@pytest.mark.parametrize(
    "attack, expected",
    [
        (InterceptResend(basis_policy=BasisPolicy.RANDOM_UNIFORM), 0.25),
        (InterceptResend(basis_policy=BasisPolicy.FIXED_COMPUTATIONAL), 0.25),
        (FakePhoton(replacement=Outcome.H), 0.5),
    ],
)
def test_check_mismatch_rate_matches_oracle(attack, expected):
    config = make_session(n_pairs_per_source=50_000, check_fraction=0.999, shots=2, check_threshold=1.0)
    client, server, _ = ready_session(config, attacked(ChannelName.C_A1B1, attack))
    report = eavesdrop_check(client, server, Source.S1, server.checking_indices, server.rng)
    assert report.n_checked == 49_950
    assert report.mismatch_rate == pytest.approx(expected, abs=0.01)
    assert not report.aborted


def test_check_aborts_with_notice_at_zero_threshold():
    config = make_session(n_pairs_per_source=200, shots=10)
    client, server, _ = ready_session(config, attacked(ChannelName.C_A2B2, InterceptResend()), keep_transcript=True)
    report = eavesdrop_check(client, server, Source.S2, server.checking_indices, server.rng)
    assert report.aborted
    assert report.n_checked == 100
    notice = client.transcript.messages[-1]
    assert isinstance(notice, AbortNotice)
    assert notice.reason == AbortReason.EAVESDROPPER_SUSPECTED


def test_check_rejects_message_group_indices():
    client, server, _ = ready_session(make_session(n_pairs_per_source=20, shots=5))
    with pytest.raises(ProtocolError):
        eavesdrop_check(client, server, Source.S1, [server.message_indices[0]], server.rng)


def test_check_counts_lost_pairs():
    config = make_session(n_pairs_per_source=100, shots=10)
    client, server, _ = ready_session(config, attacked(ChannelName.C_A3B3, loss_p=1.0))
    report = eavesdrop_check(client, server, Source.S3, server.checking_indices, server.rng)
    assert report.n_lost == 50
    assert report.n_checked == 0
    assert not report.aborted


# Step 3 and Step 4

def test_prepare_control_collapses_bobs_half_silently():
    config = make_session(n_pairs_per_source=40, shots=10)
    client, server, _ = ready_session(config, keep_transcript=True)
    for index in server.message_indices:
        record = prepare_control(client, index, client.rng)
        assert record.prepared_outcome.basis == record.basis
        bob = reduced_qubit_state(server.registry.get(Source.S1, index), "b1")
        assert fidelity(bob, basis_state("b1", record.prepared_outcome)) == pytest.approx(1.0, abs=1e-10)
    assert len(client.transcript) == 0


def test_control_basis_choice_is_balanced():
    config = make_session(n_pairs_per_source=10_200, check_fraction=0.01, shots=10)
    client, server, _ = ready_session(config)
    indices = server.message_indices[:10_000]
    computational = sum(
        prepare_control(client, index, client.rng).basis == MeasBasis.COMPUTATIONAL for index in indices
    )
    assert computational / 10_000 == pytest.approx(0.5, abs=0.02)


def test_pairs_cannot_be_reused():
    client, server, _ = ready_session(make_session(n_pairs_per_source=20, shots=5))
    index = server.message_indices[0]
    prepare_control(client, index, client.rng)
    with pytest.raises(ProtocolError):
        prepare_control(client, index, client.rng)
    with pytest.raises(ProtocolError):
        prepare_control(client, server.checking_indices[0], client.rng)
    remote_prepare(client, server, TARGET_68, Source.S2, index, client.rng)
    with pytest.raises(ProtocolError):
        remote_prepare(client, server, TARGET_68, Source.S2, index, client.rng)
    with pytest.raises(ProtocolError):
        remote_prepare(client, server, TARGET_68, Source.S1, server.message_indices[1], client.rng)


def test_remote_prepare_reaches_target_for_both_outcomes():
    config = make_session(n_pairs_per_source=80, shots=10)
    client, server, _ = ready_session(config, keep_transcript=True)
    target = qubit_state("b2", 0.6, 0.8)
    seen = set()
    for index in server.message_indices:
        record = remote_prepare(client, server, TARGET_68, Source.S2, index, client.rng)
        seen.add(record.outcome)
        assert record.correction_requested == (record.outcome == Outcome.V)
        bob = reduced_qubit_state(server.registry.get(Source.S2, index), "b2")
        assert fidelity(bob, target) == pytest.approx(1.0, abs=1e-10)
    assert seen == {Outcome.H, Outcome.V}

    corrections = [m for m in client.transcript.messages if isinstance(m, CorrectionRequest)]
    assert len(corrections) == sum(r.correction_requested for r in client.preps.values())
    assert all(m.sender == "alice" and m.apply_x and m.apply_z for m in corrections)


def test_remote_prepare_fidelity_over_random_targets():
    config = make_session(n_pairs_per_source=10_200, check_fraction=0.01, shots=10)
    client, server, _ = ready_session(config)
    gen = np.random.default_rng(99)
    v_outcomes = 0
    for index in server.message_indices[:10_000]:
        angle = gen.uniform(0.0, 2.0 * np.pi)
        target = vector(float(np.cos(angle)), float(np.sin(angle)))
        record = remote_prepare(client, server, target, Source.S3, index, client.rng)
        v_outcomes += record.outcome == Outcome.V
        bob = reduced_qubit_state(server.registry.get(Source.S3, index), "b3")
        assert fidelity(bob, qubit_state("b3", target.alpha, target.beta)) == pytest.approx(1.0, abs=1e-10)
    assert v_outcomes / 10_000 == pytest.approx(0.5, abs=0.02)


# Step 5

def test_fredkin_requires_preparation():
    client, server, channels = ready_session(make_session(n_pairs_per_source=20, shots=5))
    index = server.message_indices[0]
    with pytest.raises(ProtocolError):
        server_fredkin_and_return(server, index, index, index, channels)
    prepare_control(client, index, client.rng)
    with pytest.raises(ProtocolError):
        server_fredkin_and_return(server, index, index, index, channels)


def test_fredkin_wiring_follows_computational_control():
    config = make_session(u=TARGET_68, v_a=H_VEC, n_pairs_per_source=200, shots=10)
    client, server, channels = ready_session(config)
    seen = set()
    for index in server.message_indices:
        record = prepared_trial(client, server, channels, index, reference_vector=H_VEC)
        if record.basis != MeasBasis.COMPUTATIONAL:
            continue
        seen.add(record.prepared_outcome)
        joint = server.registry.joint[index]
        u_wire, v_wire = ("b2", "b3") if record.prepared_outcome == Outcome.H else ("b3", "b2")
        assert fidelity(reduced_qubit_state(joint, u_wire), qubit_state(u_wire, 0.6, 0.8)) == pytest.approx(1.0, abs=1e-10)
        assert fidelity(reduced_qubit_state(joint, v_wire), basis_state(v_wire, Outcome.H)) == pytest.approx(1.0, abs=1e-10)
        assert client_measure_control(client, record, client.rng).kind == TrialKind.SECURITY_PASS
    assert seen == {Outcome.H, Outcome.V}


def test_measuring_before_return_is_a_protocol_error():
    client, server, _ = ready_session(make_session(n_pairs_per_source=20, shots=5))
    index = server.message_indices[0]
    record = prepare_control(client, index, client.rng)
    with pytest.raises(ProtocolError):
        client_measure_control(client, record, client.rng)


def test_equal_targets_never_flip():
    config = make_session(u=TARGET_68, v_a=TARGET_68, n_pairs_per_source=400, shots=10)
    client, server, channels = ready_session(config)
    for index in server.message_indices:
        record = prepared_trial(client, server, channels, index, reference_vector=TARGET_68)
        outcome = client_measure_control(client, record, client.rng)
        assert outcome.kind in (TrialKind.SAME, TrialKind.SECURITY_PASS)


def test_lost_control_leaves_nothing_to_measure():
    config = make_session(n_pairs_per_source=40, shots=10)
    client, server, channels = ready_session(config, attacked(ChannelName.C_A4B4, loss_p=1.0))
    index = server.message_indices[0]
    record = prepare_control(client, index, client.rng)
    remote_prepare(client, server, config.u, Source.S2, index, client.rng)
    remote_prepare(client, server, V_VEC, Source.S3, index, client.rng)
    returned = server_fredkin_and_return(server, index, index, index, channels)
    assert returned.lost
    assert index in server.fredkin_done
    assert index not in server.registry.joint
    with pytest.raises(ProtocolError):
        client_measure_control(client, record, client.rng)


# Full sessions

def test_honest_identical_vectors_session():
    result = run_session(make_session(u=PLUS_VEC, v_a=PLUS_VEC, v_b=H_VEC, shots=10_000, seed=1))
    assert not result.aborted
    assert result.security_fail_count() == 0
    assert all(report.n_mismatch == 0 for report in result.check_reports)

    estimate_a = result.estimates.reference_a
    assert estimate_a.overlap.n_flip == 0
    assert estimate_a.overlap.p_minus_hat <= 0.005
    assert estimate_a.distance.d <= 0.1
    counts = {ref: sum(1 for t in result.trials if t.reference == ref) for ref in Reference}
    assert counts[Reference.A] == counts[Reference.B] == 5_000


def test_ten_thousand_identity_trials_run_within_budget():
    config = make_session(u=PLUS_VEC, v_a=PLUS_VEC, v_b=PLUS_VEC, shots=20_800, check_fraction=0.1, seed=3)
    started = time.perf_counter()
    result = run_session(config)
    elapsed = time.perf_counter() - started

    assert not result.aborted
    estimates = result.estimates
    n_diag = estimates.reference_a.overlap.n_diag + estimates.reference_b.overlap.n_diag
    assert n_diag >= 10_000
    for estimate in (estimates.reference_a, estimates.reference_b):
        assert estimate.overlap.p_minus_hat <= 0.005
        assert estimate.distance.d <= 0.1
    assert elapsed < 5.0, f"{n_diag} Diagonal trials took {elapsed:.2f}s"


def test_orthogonal_and_intermediate_overlaps():
    result = run_session(make_session(u=PLUS_VEC, v_a=H_VEC, v_b=PLUS_VEC, shots=8_000, seed=5))
    estimate_a = result.estimates.reference_a.overlap
    assert estimate_a.p_minus_hat == pytest.approx(0.25, abs=0.045)
    assert estimate_a.ci_low <= estimate_a.p_minus_hat <= estimate_a.ci_high

    result = run_session(make_session(u=H_VEC, v_a=V_VEC, v_b=H_VEC, shots=8_000, seed=6))
    assert result.estimates.reference_a.overlap.p_minus_hat == pytest.approx(0.5, abs=0.05)
    assert result.estimates.reference_b.overlap.n_flip == 0
    assert result.estimates.assignment.chosen.value == "B"


def test_honest_sessions_never_fail_security():
    result = run_session(make_session(u=TARGET_68, v_a=PLUS_VEC, v_b=V_VEC, shots=6_000, seed=8))
    assert result.computational_trial_count() > 2_500
    assert result.security_fail_count() == 0


def test_session_is_deterministic():
    config = make_session(u=PLUS_VEC, v_a=TARGET_68, v_b=V_VEC, shots=300, seed=42)
    first = run_session(config, keep_transcript=True)
    second = run_session(config, keep_transcript=True)
    assert first.model_dump_json() == second.model_dump_json()
    assert first.transcript_hash == second.transcript_hash
    assert [m.seq for m in first.transcript] == list(range(len(first.transcript)))


def test_transcript_messages_follow_protocol_roles():
    config = make_session(u=TARGET_68, v_a=TARGET_68, v_b=V_VEC, n_pairs_per_source=40, shots=20, seed=4)
    result = run_session(config, keep_transcript=True)
    senders = {type(m).__name__: m.sender for m in result.transcript}
    assert senders["BasisAnnouncement"] == "bob"
    assert senders["ResultAnnouncement"] == "bob"
    assert senders["FredkinRequest"] == "alice"
    fredkin = [m for m in result.transcript if isinstance(m, FredkinRequest)]
    assert len(fredkin) == 20


def test_intercept_resend_aborts_session():
    config = make_session(n_pairs_per_source=120, shots=20)
    aborted = 0
    for seed in range(20):
        result = run_session(
            config.model_copy(update={"seed": seed}),
            attacked(ChannelName.C_A1B1, InterceptResend()),
        )
        assert result.aborted
        assert result.abort_reason == AbortReason.EAVESDROPPER_SUSPECTED
        assert result.trials == []
        assert result.estimates is None
        aborted += 1
    assert aborted == 20


def test_tampered_return_channel_aborts_on_security_fail():
    attack = InterceptResend(basis_policy=BasisPolicy.FIXED_DIAGONAL)
    result = run_session(make_session(shots=400, seed=9), attacked(ChannelName.C_A4B4, attack))
    assert result.aborted
    assert result.abort_reason == AbortReason.CONTROL_TAMPERING_SUSPECTED
    assert result.security_fail_count() == 1
    assert result.trials[-1].kind == TrialKind.SECURITY_FAIL
    assert len(result.trials) < 400


def test_tolerant_threshold_keeps_noisy_session_running():
    attack = InterceptResend(basis_policy=BasisPolicy.FIXED_DIAGONAL)
    result = run_session(
        make_session(shots=400, seed=9, check_threshold=0.9),
        attacked(ChannelName.C_A4B4, attack),
    )
    assert not result.aborted
    assert len(result.trials) == 400
    assert result.security_fail_count() > 0


def test_control_tampering_stops_the_session_early():
    result = run_session(
        make_session(shots=2_000, seed=13, check_threshold=0.2),
        attacked(ChannelName.C_A4B4, Depolarize(p=1.0)),
    )
    assert result.aborted
    assert result.abort_reason == AbortReason.CONTROL_TAMPERING_SUSPECTED
    assert result.computational_trial_count() == settings.CONTROL_MONITOR_MIN_SAMPLES
    assert result.trials[-1].control_basis == MeasBasis.COMPUTATIONAL
    assert len(result.trials) < 2_000


def test_loss_discards_whole_trials():
    result = run_session(make_session(shots=400, seed=2), attacked(ChannelName.C_A2B2, loss_p=0.3))
    assert not result.aborted
    discarded = [t for t in result.trials if t.discarded_loss]
    assert 0 < len(discarded) < 400
    assert all(t.kind is None for t in discarded)
    assert len(result.trials) == 400


def test_total_loss_leaves_insufficient_trials():
    result = run_session(make_session(shots=50, seed=2), attacked(ChannelName.C_A3B3, loss_p=1.0))
    assert result.aborted
    assert result.abort_reason == AbortReason.INSUFFICIENT_TRIALS
    assert all(t.discarded_loss for t in result.trials)

    result = run_session(make_session(shots=50, seed=2), attacked(ChannelName.C_A4B4, loss_p=1.0))
    assert result.abort_reason == AbortReason.INSUFFICIENT_TRIALS
    assert all(t.discarded_loss and t.control_basis is not None for t in result.trials)


def test_message_group_spot_checks():
    config = make_session(shots=100, message_check_fraction=0.2, seed=12)
    result = run_session(config)
    spot = [r for r in result.check_reports if r.round == CheckRound.MESSAGE]
    assert len(spot) == 3
    assert all(r.n_checked == config.n_spot_check for r in spot)
    assert len(result.trials) == 100


# Returned-reference honesty check

def test_verify_on_empty_session_returns_empty_report():
    client, server, channels = session_init(make_session(shots=10))
    assert verify_returned_reference(client, server, channels, client.rng) == HonestyReport()


def test_honest_server_raises_no_suspicion():
    config = make_session(u=H_VEC, v_a=TARGET_68, v_b=V_VEC, shots=600, seed=21, verify_return=True)
    honesty = run_session(config).honesty
    assert honesty.n_checked > 400
    assert honesty.n_suspicious == 0
    assert honesty.n_checked + honesty.n_excluded_diagonal + honesty.n_lost == honesty.n_returned


def test_measuring_server_is_noticed():
    config = make_session(
        u=TARGET_68, v_a=TARGET_68, v_b=TARGET_68, shots=6_000, seed=22,
        verify_return=True, server_measures_targets=True,
    )
    honesty = run_session(config).honesty
    assert honesty.n_checked > 5_000
    assert honesty.suspicion_rate == pytest.approx(2 * 0.36 * 0.64, abs=0.03)


# Full-scale runs

@pytest.fixture(scope="module")
def plus_against_h_sessions():
    config = make_session(u=PLUS_VEC, v_a=H_VEC, v_b=V_VEC, shots=50_000)
    return [run_session(config.model_copy(update={"seed": 100 + i})) for i in range(8)]


@pytest.mark.slow
def test_half_overlap_estimate_at_full_scale(plus_against_h_sessions):
    n_diag = sum(r.estimates.reference_a.overlap.n_diag for r in plus_against_h_sessions)
    n_flip = sum(r.estimates.reference_a.overlap.n_flip for r in plus_against_h_sessions)
    assert n_diag >= 95_000
    p_minus_hat = n_flip / n_diag
    overlap = overlap_magnitude(p_minus_hat)
    assert p_minus_hat == pytest.approx(0.25, abs=0.005)
    assert overlap == pytest.approx(np.sqrt(0.5), abs=0.01)
    assert distance(1.0, 1.0, overlap).d == pytest.approx(0.7654, abs=0.02)


@pytest.mark.slow
def test_honest_controls_never_fail_at_full_scale(plus_against_h_sessions):
    assert not any(r.aborted for r in plus_against_h_sessions)
    assert sum(r.computational_trial_count() for r in plus_against_h_sessions) >= 100_000
    assert sum(r.security_fail_count() for r in plus_against_h_sessions) == 0


@pytest.mark.slow
def test_closer_reference_wins_almost_every_repetition():
    config = make_session(
        u=H_VEC,
        v_a=vector(np.sqrt(0.9), np.sqrt(0.1)),
        v_b=vector(np.sqrt(0.1), np.sqrt(0.9)),
        shots=4_000,
        check_fraction=0.1,
    )
    chosen = [
        run_session(config.model_copy(update={"seed": seed})).estimates.assignment.chosen.value
        for seed in range(100)
    ]
    assert chosen.count("A") >= 99


def test_intercept_resend_never_slips_past_fifty_checks():
    config = make_session(shots=50, check_fraction=0.5)
    assert config.n_check == 50
    for seed in range(1_000):
        result = run_session(config.model_copy(update={"seed": seed}), attacked(ChannelName.C_A1B1, InterceptResend()))
        assert result.aborted, f"seed {seed}"
        assert result.abort_reason == AbortReason.EAVESDROPPER_SUSPECTED
