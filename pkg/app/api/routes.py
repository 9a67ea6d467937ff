import logging
from typing import Any, Dict, Optional

from fastapi import APIRouter, HTTPException, Query
from fastapi.concurrency import run_in_threadpool

from ..config import settings
from ..exceptions import BQMLError, ConfigurationError
from ..models.channel import BasisPolicy, Depolarize, FakePhoton, InterceptResend, NoAttack
from ..models.experiment import AttackKind, ExperimentConfig
from ..models.quantum import Outcome
from ..services.channel import detection_probability_oracle
from ..services.experiment import run_experiment, validate_config

logger = logging.getLogger(__name__)
router = APIRouter()


@router.post("/experiments/run")
async def run_experiment_endpoint(config: ExperimentConfig):
    """
    Run an experiment synchronously and return its summary.

    Nothing is written to disk; the per-repetition summaries come back in
    the response instead.
    """
    if config.report.repetitions > settings.API_MAX_REPETITIONS:
        raise HTTPException(
            status_code=400,
            detail=f"repetitions above the API limit of {settings.API_MAX_REPETITIONS}"
        )
    if config.session.shots > settings.API_MAX_SHOTS:
        raise HTTPException(status_code=400, detail=f"shots above the API limit of {settings.API_MAX_SHOTS}")

    logger.info(f"API experiment: {config.report.repetitions} repetition(s) of {config.session.shots} trials")
    try:
        report = await run_in_threadpool(run_experiment, config, False)
    except BQMLError as e:
        logger.error(f"Experiment failed: {e.message}")
        raise HTTPException(status_code=500, detail=e.message)

    return {
        "summary": report.summary.model_dump(mode="json"),
        "repetitions": [r.model_dump(mode="json") for r in report.repetitions],
    }


@router.post("/config/validate")
async def validate_config_endpoint(payload: Dict[str, Any]):
    """Validate an experiment config and list every violation instead of failing on the first."""
    try:
        config = validate_config(payload)
    except ConfigurationError as e:
        return {"valid": False, "violations": e.violations}

    session = config.session_config(config.session.seed)
    return {
        "valid": True,
        "violations": [],
        "n_pairs_per_source": session.n_pairs_per_source,
        "n_check": session.n_check,
        "n_trial_pairs": session.n_trial_pairs,
    }


@router.get("/oracle/{attack}")
async def oracle(
    attack: AttackKind,
    basis_policy: BasisPolicy = Query(default=BasisPolicy.RANDOM_UNIFORM),
    replacement: Outcome = Query(default=Outcome.H),
    p: Optional[float] = Query(default=None, ge=0.0, le=1.0),
):
    """Exact per-pair mismatch probability of the eavesdropping check under an attack."""
    if attack == AttackKind.INTERCEPT_RESEND:
        strategy = InterceptResend(basis_policy=basis_policy)
    elif attack == AttackKind.FAKE_PHOTON:
        strategy = FakePhoton(replacement=replacement)
    elif attack == AttackKind.DEPOLARIZE:
        if p is None:
            raise HTTPException(status_code=400, detail="depolarize needs the p query parameter")
        strategy = Depolarize(p=p)
    else:
        strategy = NoAttack()

    try:
        probability = detection_probability_oracle(strategy)
    except BQMLError as e:
        raise HTTPException(status_code=400, detail=e.message)

    return {
        "attack": strategy.model_dump(mode="json"),
        "mismatch_probability": probability,
    }
