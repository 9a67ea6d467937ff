"""Repetition worker: runs a batch of sessions, in-process or inside a process pool."""

import logging
from typing import Any, Dict, List, NamedTuple, Optional

from .models.experiment import ExperimentConfig, RepetitionSummary
from .models.protocol import ProtocolMessage, SessionResult, TrialOutcome
from .services.protocol import run_session
from .utils.rng import repetition_seed

logger = logging.getLogger(__name__)


class RepetitionResult(NamedTuple):
    summary: RepetitionSummary
    trials: List[TrialOutcome]
    transcript: Optional[List[ProtocolMessage]]


def summarize(repetition: int, result: SessionResult) -> RepetitionSummary:
    completed = result.completed_trials()
    return RepetitionSummary(
        repetition=repetition,
        seed=result.seed,
        aborted=result.aborted,
        abort_reason=result.abort_reason,
        n_trials=len(completed),
        n_discarded=len(result.trials) - len(completed),
        computational_trials=result.computational_trial_count(),
        security_fail_count=result.security_fail_count(),
        check_reports=result.check_reports,
        estimates=result.estimates,
        honesty=result.honesty,
        interceptions=result.interceptions,
        transcript_hash=result.transcript_hash,
    )


def run_repetition(config: ExperimentConfig, repetition: int) -> RepetitionResult:
    seed = repetition_seed(config.session.seed, repetition)
    result = run_session(
        config.session_config(seed),
        config.channel_models(),
        keep_transcript=config.report.emit_transcript,
    )
    if result.aborted:
        logger.info(f"Repetition {repetition} (seed {seed}) aborted: {result.abort_reason.value}")
    return RepetitionResult(summarize(repetition, result), result.trials, result.transcript)


def run_batch(config_data: Dict[str, Any], repetitions: List[int]) -> List[RepetitionResult]:
    """Process entry point; the config travels as plain data so it pickles cheaply."""
    config = ExperimentConfig.model_validate(config_data)
    logger.debug(f"Worker running repetitions {repetitions[0]}..{repetitions[-1]}")
    return [run_repetition(config, i) for i in repetitions]
