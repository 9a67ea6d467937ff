"""
Experiment orchestration: config files in, report files out.

A config describes one session layout plus how many repetitions to run;
repetition i runs with seed `session.seed + i`. Results are folded in
repetition order whatever order the workers finish in, so the summary is
reproducible byte for byte apart from the wall-clock field.
"""

import csv
import hashlib
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import yaml
from pydantic import ValidationError

from ..config import settings
from ..exceptions import ConfigParseError, ConfigurationError, ReportIOError
from ..models.channel import ChannelName
from ..models.estimates import Assignment
from ..models.experiment import (
    ChannelSecurity,
    ExperimentConfig,
    ReferenceAggregate,
    RepetitionSummary,
    RunReport,
    RunSummary,
)
from ..models.protocol import Reference
from ..utils.batch_utils import split_into_batches
from ..utils.protocol_constants import (
    RETURN_CHANNEL,
    SUMMARY_FILE,
    TRANSCRIPT_FILE,
    TRIALS_CSV_HEADER,
    TRIALS_FILE,
)
from ..worker import RepetitionResult, run_batch, run_repetition

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _violations(error: ValidationError) -> List[str]:
    violations = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"])
        violations.append(f"{location}: {item['msg']}" if location else item["msg"])
    return violations


def validate_config(data: Any) -> ExperimentConfig:
    """Validate already-parsed config data, reporting every violation at once."""
    if not isinstance(data, dict):
        raise ConfigParseError("config must be a mapping at the top level")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        violations = _violations(e)
        logger.debug(f"Config rejected with {len(violations)} violation(s)")
        raise ConfigurationError(f"{len(violations)} configuration violation(s)", violations=violations) from None


def parse_config(path: PathLike) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigParseError(f"cannot read {path}: {e.strerror or e}") from None

    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        problem = getattr(e, "problem", None) or str(e)
        raise ConfigParseError(f"malformed YAML: {problem}", line=mark.line + 1 if mark else None) from None

    return validate_config(data)


def apply_overrides(
    config: ExperimentConfig,
    seed: Optional[int] = None,
    repetitions: Optional[int] = None,
    output_dir: Optional[str] = None,
    emit_transcript: Optional[bool] = None,
) -> ExperimentConfig:
    """Command-line overrides, re-validated like the file itself."""
    data = config.model_dump(mode="json")
    if seed is not None:
        data["session"]["seed"] = seed
    if repetitions is not None:
        data["report"]["repetitions"] = repetitions
    if output_dir is not None:
        data["report"]["output_dir"] = output_dir
    if emit_transcript is not None:
        data["report"]["emit_transcript"] = emit_transcript
    return validate_config(data)


def config_hash(config: ExperimentConfig) -> str:
    """SHA-256 over everything that influences results; output location and transcript flag excluded."""
    payload = config.model_dump(
        mode="json",
        include={
            "session": True,
            "vectors": True,
            "channels": True,
            "report": {"ci_level": True, "repetitions": True},
        },
    )
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _mean(values: List[float]) -> Optional[float]:
    return float(np.mean(values)) if values else None


def _std(values: List[float]) -> Optional[float]:
    return float(np.std(values)) if values else None


def aggregate(
    config: ExperimentConfig,
    summaries: List[RepetitionSummary],
    wall_clock_s: float,
) -> RunSummary:
    completed = [s for s in summaries if s.estimates is not None]

    per_reference: Dict[str, ReferenceAggregate] = {}
    for reference in Reference:
        estimates = [
            s.estimates.reference_a if reference == Reference.A else s.estimates.reference_b
            for s in completed
        ]
        p_hats = [e.overlap.p_minus_hat for e in estimates]
        per_reference[reference.value] = ReferenceAggregate(
            p_minus_hat_mean=_mean(p_hats),
            p_minus_hat_std=_std(p_hats),
            overlap_mag_mean=_mean([e.overlap.overlap_mag for e in estimates]),
            distance_mean=_mean([e.distance.d for e in estimates]),
            ci_level=config.report.ci_level,
            ci_low_mean=_mean([e.overlap.ci_low for e in estimates]),
            ci_high_mean=_mean([e.overlap.ci_high for e in estimates]),
        )

    histogram = {assignment.value: 0 for assignment in Assignment}
    for s in completed:
        histogram[s.estimates.assignment.chosen.value] += 1

    security = {name.value: ChannelSecurity() for name in ChannelName}
    for s in summaries:
        for check in s.check_reports:
            entry = security[check.channel.value]
            entry.checked += check.n_checked
            entry.mismatches += check.n_mismatch
        returned = security[RETURN_CHANNEL.value]
        returned.checked += s.computational_trials
        returned.mismatches += s.security_fail_count
        returned.security_fail_count += s.security_fail_count

    return RunSummary(
        config_hash=config_hash(config),
        repetitions=len(summaries),
        aborted_count=sum(1 for s in summaries if s.aborted),
        per_reference=per_reference,
        assignment_histogram=histogram,
        security=security,
        wall_clock_s=round(wall_clock_s, 3),
    )


def _run_all(config: ExperimentConfig) -> List[RepetitionResult]:
    repetitions = config.report.repetitions
    workers = min(settings.WORKER_COUNT, repetitions)
    if workers <= 1:
        return [run_repetition(config, i) for i in range(repetitions)]

    batches = split_into_batches(repetitions, workers)
    config_data = config.model_dump(mode="json")
    logger.info(f"Running {repetitions} repetitions on {workers} workers in {len(batches)} batches")
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_batch, config_data, batch) for batch in batches]
        results = [result for future in futures for result in future.result()]
    return sorted(results, key=lambda r: r.summary.repetition)


def run_experiment(config: ExperimentConfig, write: bool = True) -> RunReport:
    """Run every repetition, fold the results and (optionally) write the report files."""
    logger.info(
        f"Experiment {config_hash(config)[:12]}: {config.report.repetitions} repetition(s) "
        f"of {config.session.shots} trials"
    )
    started = time.perf_counter()
    results = _run_all(config)
    summaries = [r.summary for r in results]
    report = RunReport(
        summary=aggregate(config, summaries, time.perf_counter() - started),
        repetitions=summaries,
        output_dir=config.report.output_dir,
        emit_transcript=config.report.emit_transcript,
        trials={r.summary.repetition: r.trials for r in results},
        transcripts={r.summary.repetition: r.transcript for r in results if r.transcript is not None},
    )
    logger.info(
        f"Experiment finished: {report.summary.aborted_count}/{report.summary.repetitions} aborted, "
        f"assignments {report.summary.assignment_histogram}"
    )
    if write:
        emit_report(report, config.report.output_dir)
    return report


def _flag(value: bool) -> str:
    return "true" if value else "false"


def emit_report(report: RunReport, directory: PathLike) -> List[Path]:
    """Write summary.json, trials.csv (completed trials only) and, when requested, transcript.jsonl."""
    directory = Path(directory)
    written: List[Path] = []
    target = directory
    try:
        directory.mkdir(parents=True, exist_ok=True)

        target = directory / SUMMARY_FILE
        target.write_text(report.summary.model_dump_json(indent=2) + "\n", encoding="utf-8")
        written.append(target)

        target = directory / TRIALS_FILE
        with target.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(TRIALS_CSV_HEADER)
            for repetition in sorted(report.trials):
                # Loss-discarded positions are not trials; the column stays for the fixed header.
                for trial in report.trials[repetition]:
                    if trial.discarded_loss:
                        continue
                    writer.writerow([
                        repetition,
                        trial.pair_index,
                        trial.reference.value,
                        trial.control_basis.value if trial.control_basis else "",
                        trial.kind.value if trial.kind else "",
                        _flag(trial.discarded_loss),
                    ])
        written.append(target)

        if report.emit_transcript:
            target = directory / TRANSCRIPT_FILE
            with target.open("w", encoding="utf-8") as handle:
                for repetition in sorted(report.transcripts):
                    for message in report.transcripts[repetition]:
                        line = {"repetition": repetition, **message.model_dump(mode="json")}
                        handle.write(json.dumps(line) + "\n")
            written.append(target)
    except OSError as e:
        raise ReportIOError(f"cannot write report ({e.strerror or e})", path=str(target)) from None

    logger.info(f"Report written to {directory} ({', '.join(p.name for p in written)})")
    return written
