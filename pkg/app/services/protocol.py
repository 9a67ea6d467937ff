"""
The delegated swap-test protocol, step by step.

Bob distributes Bell pairs from three sources, both parties sacrifice a
checking group to look for an eavesdropper, Alice turns the message group
into a random control (S1) and remotely prepared targets (S2 carries u, S3
carries the reference), Bob runs the Fredkin gate and returns the control,
and Alice reads it in the basis only she knows.
"""

import logging
from typing import Dict, List, Mapping, NamedTuple, Optional, Tuple

import numpy as np

from ..config import settings
from ..exceptions import InsufficientDataError, ProtocolError
from ..models.channel import ChannelModel, ChannelName
from ..models.estimates import ReferenceEstimate, SessionEstimates
from ..models.protocol import (
    AbortNotice,
    AbortReason,
    BasisAnnouncement,
    CheckReport,
    CheckRound,
    ControlRecord,
    CorrectionRequest,
    FredkinRequest,
    HonestyReport,
    PolarizationVector,
    PrepRecord,
    Reference,
    ResultAnnouncement,
    ReturnRequest,
    SessionConfig,
    SessionResult,
    Source,
    TrialKind,
    TrialOutcome,
)
from ..models.quantum import MeasBasis, Outcome, QubitId
from ..utils.protocol_constants import (
    ALICE_LABEL,
    BOB_LABEL,
    CONTROL_LABEL,
    RETURN_CHANNEL,
    SOURCE_CHANNEL,
    TARGET_U_LABEL,
    TARGET_V_LABEL,
)
from ..utils.rng import session_streams
from .abort_monitor import AbortMonitor
from .channel import ChannelSet
from .estimator import assign_cluster, distance, estimate_flip_probability
from .parties import Client, PairRegistry, Server, Transcript
from .quantum_core import (
    apply_fredkin,
    apply_single_qubit,
    bell_phi_plus,
    measure,
    measure_pair,
    pauli_x,
    pauli_z,
    pauli_zx,
    rotation,
    tensor_all,
)

logger = logging.getLogger(__name__)

_PURPOSE_CONTROL = "control"
_PURPOSE_TARGET = "target"


class Transmission(NamedTuple):
    source: Source
    pair_index: int
    channel: ChannelName
    lost: bool


class ReturnedQubit(NamedTuple):
    pair_index: int
    qubit: QubitId
    lost: bool


def session_init(
    config: SessionConfig,
    channel_models: Optional[Mapping[ChannelName, ChannelModel]] = None,
    keep_transcript: bool = False,
) -> Tuple[Client, Server, ChannelSet]:
    """Fresh parties and channels for one session, each with its own stream spawned from the seed."""
    streams = session_streams(config.seed)
    registry = PairRegistry(config.n_pairs_per_source)
    transcript = Transcript(keep_messages=keep_transcript)
    client = Client(config, registry, streams.client, transcript)
    server = Server(config, registry, streams.server, transcript)
    channels = ChannelSet(channel_models or {}, streams.channels)
    logger.debug(
        f"Session initialized: seed={config.seed}, {config.n_pairs_per_source} pairs per source "
        f"({config.n_check} checking, {config.n_message} message)"
    )
    return client, server, channels


def distribute_pairs(server: Server, channels: ChannelSet) -> List[Transmission]:
    """Bob creates every Bell pair and sends the Alice-bound half through its source channel."""
    registry = server.registry
    log: List[Transmission] = []
    for source in Source:
        alice, bob = ALICE_LABEL[source], BOB_LABEL[source]
        channel = SOURCE_CHANNEL[source]
        for index in range(registry.n_pairs):
            pair, lost = channels.send(channel, bell_phi_plus(alice, bob), alice, index)
            registry.put(source, index, pair)
            if lost:
                registry.lost.add((source, index))
            log.append(Transmission(source, index, channel, lost))
    logger.debug(f"Distributed {len(log)} pairs, {len(registry.lost)} lost in transit")
    return log


def _abort(client: Client, reason: AbortReason) -> None:
    client.transcript.send(AbortNotice(sender="alice", reason=reason))
    logger.warning(f"Session aborted: {reason.value}")


def eavesdrop_check(
    client: Client,
    server: Server,
    source: Source,
    indices: List[int],
    rng: np.random.Generator,
    check_round: CheckRound = CheckRound.CHECKING,
) -> CheckReport:
    """
    Compare both halves of the given pairs in a basis Bob picks at random.

    Bob measures and announces basis and result; Alice measures her half in
    the same basis and counts a mismatch when the results differ. Lost pairs
    are counted but not checked. All indices are checked before the abort
    decision, which Alice announces with an AbortNotice.
    """
    allowed = set(server.checking_indices if check_round == CheckRound.CHECKING else server.spot_check_indices)
    stray = [i for i in indices if i not in allowed]
    if stray:
        raise ProtocolError(
            f"indices outside the {check_round.value} group of {source.value}",
            details={"indices": stray[:10]}
        )

    registry = server.registry
    alice, bob = ALICE_LABEL[source], BOB_LABEL[source]
    channel = SOURCE_CHANNEL[source]
    monitor = AbortMonitor(
        server.config.check_threshold,
        AbortReason.EAVESDROPPER_SUSPECTED,
        label=f"{check_round.value} check {source.value}",
    )
    report = CheckReport(source=source, channel=channel, round=check_round)

    for index in indices:
        registry.consume(source, index, f"{check_round.value}-check")
        if registry.is_lost(source, index):
            report.n_lost += 1
            registry.discard(source, index)
            continue
        pair = registry.get(source, index)
        basis = MeasBasis.COMPUTATIONAL if rng.random() < 0.5 else MeasBasis.DIAGONAL
        # Bob's result is fixed before Alice measures; the announcements only carry it.
        bob_outcome, alice_outcome, _ = measure_pair(pair, bob, alice, basis, rng, client.rng)
        server.transcript.send(BasisAnnouncement(sender="bob", source=source, index=index, basis=basis))
        server.transcript.send(ResultAnnouncement(sender="bob", source=source, index=index, outcome=bob_outcome))
        registry.discard(source, index)
        if alice_outcome == bob_outcome:
            monitor.record_pass()
        else:
            monitor.record_failure()

    report.n_checked = monitor.checked
    report.n_mismatch = monitor.failures
    report.aborted = monitor.evaluate()
    logger.debug(
        f"{check_round.value} check on {channel.value}: {report.n_mismatch}/{report.n_checked} mismatches, "
        f"{report.n_lost} lost"
    )
    if report.aborted:
        _abort(client, monitor.reason)
    return report


def _require_message_pair(client: Client, source: Source, pair_index: int) -> None:
    registry = client.registry
    n_check = client.config.n_check
    if not n_check <= pair_index < registry.n_pairs:
        raise ProtocolError(
            f"pair {source.value}[{pair_index}] is not in the message group",
            details={"source": source.value, "index": pair_index}
        )
    if registry.is_lost(source, pair_index):
        raise ProtocolError(f"pair {source.value}[{pair_index}] was lost in transit")


def prepare_control(client: Client, pair_index: int, rng: np.random.Generator) -> ControlRecord:
    """
    Alice measures her S1 half in a random basis, collapsing Bob's half onto the same eigenstate.

    Nothing is announced: the basis and outcome stay private to Alice.
    """
    _require_message_pair(client, Source.S1, pair_index)
    registry = client.registry
    registry.consume(Source.S1, pair_index, _PURPOSE_CONTROL)
    basis = MeasBasis.COMPUTATIONAL if rng.random() < 0.5 else MeasBasis.DIAGONAL
    outcome, pair = measure(registry.get(Source.S1, pair_index), ALICE_LABEL[Source.S1], basis, rng)
    registry.put(Source.S1, pair_index, pair)
    record = ControlRecord(pair_index=pair_index, prepared_outcome=outcome, basis=basis)
    client.controls[pair_index] = record
    return record


def _apply_correction(server: Server, request: CorrectionRequest) -> None:
    registry = server.registry
    bob = BOB_LABEL[request.source]
    pair = registry.get(request.source, request.index)
    if request.apply_x and request.apply_z:
        pair = apply_single_qubit(pair, bob, pauli_zx())
    elif request.apply_x:
        pair = apply_single_qubit(pair, bob, pauli_x())
    elif request.apply_z:
        pair = apply_single_qubit(pair, bob, pauli_z())
    registry.put(request.source, request.index, pair)


def remote_prepare(
    client: Client,
    server: Server,
    target: PolarizationVector,
    source: Source,
    pair_index: int,
    rng: np.random.Generator,
) -> PrepRecord:
    """
    Steer Bob's half of a message pair into target.alpha|H> + target.beta|V>.

    Alice rotates her half and measures it. On H Bob already holds the
    target; on V he holds beta|H> - alpha|V>, and Alice asks him to apply
    X then Z, which leaves the target up to a global phase of -1.
    """
    if source == Source.S1:
        raise ProtocolError("remote preparation uses sources S2 and S3 only")
    _require_message_pair(client, source, pair_index)
    registry = client.registry
    registry.consume(source, pair_index, _PURPOSE_TARGET)

    alice = ALICE_LABEL[source]
    pair = apply_single_qubit(registry.get(source, pair_index), alice, rotation(target.alpha, target.beta))
    outcome, pair = measure(pair, alice, MeasBasis.COMPUTATIONAL, rng)
    registry.put(source, pair_index, pair)

    corrected = outcome == Outcome.V
    if corrected:
        request = client.transcript.send(
            CorrectionRequest(sender="alice", source=source, index=pair_index, apply_x=True, apply_z=True)
        )
        _apply_correction(server, request)

    record = PrepRecord(source=source, pair_index=pair_index, outcome=outcome, correction_requested=corrected)
    client.preps[(source, pair_index)] = record
    return record


def server_fredkin_and_return(
    server: Server,
    control_index: int,
    u_index: int,
    v_index: int,
    channels: ChannelSet,
) -> ReturnedQubit:
    """Bob swaps his S2 and S3 qubits under control of his S1 qubit and sends the control back on C_a4b4."""
    registry = server.registry
    wanted = (
        (Source.S1, control_index, _PURPOSE_CONTROL),
        (Source.S2, u_index, _PURPOSE_TARGET),
        (Source.S3, v_index, _PURPOSE_TARGET),
    )
    for source, index, purpose in wanted:
        if registry.consumed.get((source, index)) != purpose or (source, index) not in registry.pairs:
            raise ProtocolError(
                f"pair {source.value}[{index}] has not been prepared as a {purpose}",
                details={"source": source.value, "index": index}
            )
    if control_index in server.fredkin_done:
        raise ProtocolError(f"Fredkin already applied on control {control_index}")

    joint = tensor_all([registry.pairs.pop((source, index)) for source, index, _ in wanted])
    joint = apply_fredkin(joint, CONTROL_LABEL, [TARGET_U_LABEL], [TARGET_V_LABEL])
    server.fredkin_done.add(control_index)

    joint, lost = channels.send(RETURN_CHANNEL, joint, CONTROL_LABEL, control_index)
    if not lost:
        registry.joint[control_index] = joint
    return ReturnedQubit(control_index, CONTROL_LABEL, lost)


def client_measure_control(client: Client, record: ControlRecord, rng: np.random.Generator) -> TrialOutcome:
    """Alice measures the returned control in the basis she prepared it in."""
    index = record.pair_index
    registry = client.registry
    if index not in registry.joint:
        raise ProtocolError(f"control {index} has not been returned")
    reference = client.trial_references.get(index, Reference.A)

    observed, joint = measure(registry.joint[index], CONTROL_LABEL, record.basis, rng)
    registry.joint[index] = joint
    same = observed == record.prepared_outcome
    if record.basis == MeasBasis.COMPUTATIONAL:
        kind = TrialKind.SECURITY_PASS if same else TrialKind.SECURITY_FAIL
    else:
        kind = TrialKind.SAME if same else TrialKind.FLIP
    return TrialOutcome(pair_index=index, reference=reference, control_basis=record.basis, kind=kind)


def verify_returned_reference(
    client: Client,
    server: Server,
    channels: ChannelSet,
    rng: np.random.Generator,
) -> HonestyReport:
    """
    Ask Bob to send back the target qubits of every completed trial and test them.

    Only Computational-control trials are tested: there the Fredkin output
    is a product state and Alice knows which vector sits on which wire (u on
    S2 for an H control, swapped for V). She undoes the preparation rotation
    and measures; landing on V means the qubit was not the vector she
    prepared. Diagonal-control trials leave the targets entangled with the
    control and are excluded.
    """
    registry = client.registry
    report = HonestyReport()
    indices = sorted(registry.joint)
    if not indices:
        return report

    client.transcript.send(ReturnRequest(sender="alice", indices=indices))
    config = client.config
    for index in indices:
        joint = registry.joint.pop(index)
        record = client.controls[index]
        reference_vector = config.reference_vector(client.trial_references.get(index, Reference.A))
        if record.prepared_outcome == Outcome.V:
            wires = {TARGET_U_LABEL: reference_vector, TARGET_V_LABEL: config.u}
        else:
            wires = {TARGET_U_LABEL: config.u, TARGET_V_LABEL: reference_vector}

        for label, target in wires.items():
            if server.measures_targets:
                _, joint = measure(joint, label, MeasBasis.COMPUTATIONAL, server.rng)
            joint, lost = channels.send(RETURN_CHANNEL, joint, label, index)
            report.n_returned += 1
            if lost:
                report.n_lost += 1
                continue
            if record.basis == MeasBasis.DIAGONAL:
                report.n_excluded_diagonal += 1
                continue
            joint = apply_single_qubit(joint, label, rotation(target.alpha, target.beta))
            outcome, joint = measure(joint, label, MeasBasis.COMPUTATIONAL, rng)
            report.n_checked += 1
            if outcome == Outcome.V:
                report.n_suspicious += 1

    if report.n_suspicious:
        logger.warning(
            f"Returned targets disagree with their preparation: "
            f"{report.n_suspicious}/{report.n_checked} suspicious"
        )
    return report


def _estimate(config: SessionConfig, trials: List[TrialOutcome]) -> SessionEstimates:
    per_reference: Dict[Reference, ReferenceEstimate] = {}
    for reference in Reference:
        overlap = estimate_flip_probability(trials, reference, config.ci_level)
        dist = distance(config.u.magnitude, config.reference_vector(reference).magnitude, overlap.overlap_mag)
        per_reference[reference] = ReferenceEstimate(overlap=overlap, distance=dist)
    assignment = assign_cluster(
        per_reference[Reference.A].distance,
        per_reference[Reference.B].distance,
        config.tie_epsilon,
    )
    return SessionEstimates(
        reference_a=per_reference[Reference.A],
        reference_b=per_reference[Reference.B],
        assignment=assignment,
    )


def _run_trial(
    client: Client,
    server: Server,
    channels: ChannelSet,
    pair_index: int,
    reference: Reference,
) -> TrialOutcome:
    registry = client.registry
    client.trial_references[pair_index] = reference
    if any(registry.is_lost(source, pair_index) for source in Source):
        for source in Source:
            registry.consume(source, pair_index, "discarded")
            registry.discard(source, pair_index)
        return TrialOutcome(pair_index=pair_index, reference=reference, discarded_loss=True)

    config = client.config
    record = prepare_control(client, pair_index, client.rng)
    remote_prepare(client, server, config.u, Source.S2, pair_index, client.rng)
    remote_prepare(client, server, config.reference_vector(reference), Source.S3, pair_index, client.rng)
    client.transcript.send(
        FredkinRequest(sender="alice", control_index=pair_index, target_indices=[pair_index, pair_index])
    )

    returned = server_fredkin_and_return(server, pair_index, pair_index, pair_index, channels)
    if returned.lost:
        return TrialOutcome(
            pair_index=pair_index,
            reference=reference,
            control_basis=record.basis,
            discarded_loss=True,
        )

    outcome = client_measure_control(client, record, client.rng)
    if not config.verify_return:
        registry.joint.pop(pair_index, None)
    return outcome


def run_session(
    config: SessionConfig,
    channel_models: Optional[Mapping[ChannelName, ChannelModel]] = None,
    keep_transcript: bool = False,
) -> SessionResult:
    """
    Run one full session and estimate both overlaps.

    Trial k uses the k-th trial position of every source and alternates the
    references (even k against A, odd k against B). The session aborts when
    a check round exceeds the threshold, when Computational controls come
    back changed more often than the threshold allows, or when loss leaves a
    reference without a Diagonal trial. The control-return rate is watched
    while trials run, so tampering stops the session before the last shot.
    """
    client, server, channels = session_init(config, channel_models, keep_transcript)
    logger.info(f"Session {config.seed}: {config.shots} trials over {config.n_pairs_per_source} pairs per source")

    distribute_pairs(server, channels)
    check_reports: List[CheckReport] = []
    trials: List[TrialOutcome] = []
    abort_reason: Optional[AbortReason] = None

    for source in Source:
        report = eavesdrop_check(client, server, source, server.checking_indices, server.rng)
        check_reports.append(report)
        if report.aborted:
            abort_reason = AbortReason.EAVESDROPPER_SUSPECTED
            break

    if abort_reason is None and config.n_spot_check > 0:
        picked = server.rng.choice(server.message_indices, size=config.n_spot_check, replace=False)
        server.spot_check_indices = sorted(int(i) for i in picked)
        for source in Source:
            report = eavesdrop_check(
                client, server, source, server.spot_check_indices, server.rng, check_round=CheckRound.MESSAGE
            )
            check_reports.append(report)
            if report.aborted:
                abort_reason = AbortReason.EAVESDROPPER_SUSPECTED
                break

    if abort_reason is None:
        control_monitor = AbortMonitor(
            config.check_threshold,
            AbortReason.CONTROL_TAMPERING_SUSPECTED,
            label="control return",
            min_samples=settings.CONTROL_MONITOR_MIN_SAMPLES,
        )
        for k, pair_index in enumerate(server.trial_indices[:config.shots]):
            reference = Reference.A if k % 2 == 0 else Reference.B
            outcome = _run_trial(client, server, channels, pair_index, reference)
            trials.append(outcome)
            if outcome.kind == TrialKind.SECURITY_PASS:
                control_monitor.record_pass()
            elif outcome.kind == TrialKind.SECURITY_FAIL:
                control_monitor.record_failure()
            if control_monitor.is_open:
                break
        if control_monitor.evaluate():
            abort_reason = control_monitor.reason
            _abort(client, abort_reason)

    estimates = None
    if abort_reason is None:
        try:
            estimates = _estimate(config, trials)
        except InsufficientDataError as e:
            logger.warning(f"Session {config.seed}: {e.message}")
            abort_reason = AbortReason.INSUFFICIENT_TRIALS
            _abort(client, abort_reason)

    honesty = None
    if abort_reason is None and config.verify_return:
        honesty = verify_returned_reference(client, server, channels, client.rng)

    result = SessionResult(
        seed=config.seed,
        check_reports=check_reports,
        trials=trials,
        aborted=abort_reason is not None,
        abort_reason=abort_reason,
        estimates=estimates,
        honesty=honesty,
        interceptions=channels.interception_count(),
        transcript_hash=client.transcript.digest,
        transcript=list(client.transcript.messages) if keep_transcript else None,
    )
    if estimates is not None:
        logger.info(
            f"Session {config.seed} completed: {len(result.completed_trials())} trials, "
            f"assignment {estimates.assignment.chosen.value}"
        )
    return result
