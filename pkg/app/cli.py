import logging
import sys
from typing import Optional

import click

from .config import settings
from .exceptions import BQMLError, ConfigurationError, ReportIOError
from .models.channel import BasisPolicy, Depolarize, FakePhoton, InterceptResend
from .models.quantum import Outcome
from .services.channel import detection_probability_oracle
from .services.experiment import apply_overrides, parse_config, run_experiment
from .utils.protocol_constants import (
    EXIT_ALL_ABORTED,
    EXIT_COMPLETED,
    EXIT_CONFIG_ERROR,
    EXIT_IO_ERROR,
)

logger = logging.getLogger(__name__)

ORACLE_ATTACKS = ("intercept_resend", "fake_photon", "depolarize")


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else settings.LOG_LEVEL,
        format=settings.LOG_FORMAT,
        stream=sys.stderr,
    )


def _report_config_error(error: ConfigurationError) -> None:
    click.echo(f"configuration error: {error.message}", err=True)
    for violation in error.violations:
        if violation != error.message:
            click.echo(f"  - {violation}", err=True)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log per-trial detail.")
def cli(verbose: bool) -> None:
    """Simulate blind delegated swap-test classification over attackable channels."""
    _configure_logging(verbose)


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False), help="Experiment YAML file.")
@click.option("--seed", type=click.IntRange(0, 2 ** 64 - 1), default=None, help="Override session.seed.")
@click.option("--repetitions", type=int, default=None, help="Override report.repetitions.")
@click.option("--output", "output_dir", type=click.Path(file_okay=False), default=None, help="Override report.output_dir.")
@click.option("--emit-transcript", is_flag=True, help="Also write transcript.jsonl.")
def run(
    config_path: str,
    seed: Optional[int],
    repetitions: Optional[int],
    output_dir: Optional[str],
    emit_transcript: bool,
) -> None:
    """Run an experiment and write its report.

    Exits 0 when at least one repetition completed and 2 when every
    repetition aborted, whatever the reason (eavesdropper suspected,
    control tampering suspected or too few trials left after loss).
    Configuration errors exit 3 and unwritable output exits 4.
    """
    try:
        config = apply_overrides(
            parse_config(config_path),
            seed=seed,
            repetitions=repetitions,
            output_dir=output_dir,
            emit_transcript=emit_transcript or None,
        )
        report = run_experiment(config)
    except ConfigurationError as e:
        _report_config_error(e)
        sys.exit(EXIT_CONFIG_ERROR)
    except ReportIOError as e:
        click.echo(f"I/O error: {e.message}", err=True)
        sys.exit(EXIT_IO_ERROR)

    summary = report.summary
    click.echo(
        f"{summary.repetitions} repetition(s), {summary.aborted_count} aborted, "
        f"assignments {summary.assignment_histogram} -> {config.report.output_dir}"
    )
    if report.all_aborted:
        reasons = ", ".join(f"{reason}: {count}" for reason, count in report.abort_reasons().items())
        click.echo(f"every repetition aborted ({reasons})", err=True)
        sys.exit(EXIT_ALL_ABORTED)
    sys.exit(EXIT_COMPLETED)


@cli.command()
@click.option("--attack", required=True, type=click.Choice(ORACLE_ATTACKS), help="Attack to evaluate.")
@click.option(
    "--basis-policy",
    type=click.Choice([p.value for p in BasisPolicy]),
    default=BasisPolicy.RANDOM_UNIFORM.value,
    show_default=True,
)
@click.option(
    "--replacement",
    type=click.Choice([o.value for o in Outcome]),
    default=Outcome.H.value,
    show_default=True,
)
@click.option("-p", "p", type=click.FloatRange(0.0, 1.0), default=1.0, show_default=True, help="Depolarizing probability.")
def oracle(attack: str, basis_policy: str, replacement: str, p: float) -> None:
    """Print the exact per-pair mismatch probability of the eavesdropping check."""
    if attack == "intercept_resend":
        strategy = InterceptResend(basis_policy=BasisPolicy(basis_policy))
    elif attack == "fake_photon":
        strategy = FakePhoton(replacement=Outcome(replacement))
    else:
        strategy = Depolarize(p=p)
    try:
        value = detection_probability_oracle(strategy)
    except BQMLError as e:
        click.echo(f"error: {e.message}", err=True)
        sys.exit(EXIT_CONFIG_ERROR)
    click.echo(f"{attack}\t{value:.12g}")


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False), help="Experiment YAML file.")
def validate(config_path: str) -> None:
    """Check a config file without running it."""
    try:
        config = parse_config(config_path)
    except ConfigurationError as e:
        _report_config_error(e)
        sys.exit(EXIT_CONFIG_ERROR)
    session = config.session_config(config.session.seed)
    click.echo(
        f"ok: {session.n_pairs_per_source} pairs per source, {session.n_check} checking, "
        f"{config.session.shots} trials, {config.report.repetitions} repetition(s)"
    )


def main() -> None:
    cli()


if __name__ == "__main__":
    main()
