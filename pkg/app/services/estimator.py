"""
Turn swap-test statistics into overlaps, distances and a cluster choice.

A Diagonal control flips with probability (1 - |<u|v>|^2) / 2, so the
observed flip frequency gives |<u|v>| = sqrt(1 - 2 p). The classical
lengths of the vectors are then folded back in to get the Euclidean
distance. The swap test cannot see the sign of the overlap, so for
vectors with a negative inner product the distance is under-reported.
"""

import logging
import math
from typing import Iterable, Tuple

from scipy.stats import norm

from ..exceptions import InsufficientDataError, InvalidArgumentError
from ..models.estimates import Assignment, ClusterAssignment, DistanceEstimate, OverlapEstimate
from ..models.protocol import Reference, TrialKind, TrialOutcome
from ..models.quantum import MeasBasis

logger = logging.getLogger(__name__)


def score_interval(successes: int, n: int, level: float) -> Tuple[float, float]:
    """
    Wilson score interval for a binomial proportion.

    Unlike the normal approximation it stays inside [0, 1] and does not
    collapse to a point when every trial failed or every trial succeeded.
    """
    if n < 1:
        raise InvalidArgumentError("score interval needs at least one trial", details={"n": n})
    if not 0 <= successes <= n:
        raise InvalidArgumentError(
            "successes must lie in [0, n]",
            details={"successes": successes, "n": n}
        )
    if not 0.0 < level < 1.0:
        raise InvalidArgumentError("confidence level must lie in (0, 1)", details={"level": level})

    p_hat = successes / n
    z = float(norm.ppf(1.0 - (1.0 - level) / 2.0))
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (p_hat + z2 / (2.0 * n)) / denom
    half = z * math.sqrt(p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n)) / denom

    low = 0.0 if successes == 0 else max(0.0, center - half)
    high = 1.0 if successes == n else min(1.0, center + half)
    return min(low, p_hat), max(high, p_hat)


def overlap_magnitude(p_minus: float) -> float:
    """|<u|v>| from a flip probability, clamped so the result is always real."""
    return math.sqrt(max(0.0, 1.0 - 2.0 * p_minus))


def estimate_flip_probability(
    trials: Iterable[TrialOutcome],
    reference: Reference,
    level: float,
) -> OverlapEstimate:
    """Flip frequency of the Diagonal-control trials run against one reference."""
    n_diag = 0
    n_flip = 0
    for trial in trials:
        if trial.discarded_loss or trial.reference != reference:
            continue
        if trial.control_basis != MeasBasis.DIAGONAL:
            continue
        n_diag += 1
        if trial.kind == TrialKind.FLIP:
            n_flip += 1

    if n_diag == 0:
        raise InsufficientDataError(f"no Diagonal-control trials for reference {reference.value}")

    p_hat = n_flip / n_diag
    ci_low, ci_high = score_interval(n_flip, n_diag, level)
    logger.debug(f"Reference {reference.value}: {n_flip}/{n_diag} flips, interval [{ci_low:.5f}, {ci_high:.5f}]")
    return OverlapEstimate(
        p_minus_hat=p_hat,
        n_diag=n_diag,
        n_flip=n_flip,
        overlap_mag=overlap_magnitude(p_hat),
        ci_level=level,
        ci_low=ci_low,
        ci_high=ci_high,
    )


def distance(mag_u: float, mag_v: float, overlap_mag: float) -> DistanceEstimate:
    if mag_u < 0.0 or mag_v < 0.0:
        raise InvalidArgumentError(
            "vector magnitudes must be non-negative",
            details={"mag_u": mag_u, "mag_v": mag_v}
        )
    if not 0.0 <= overlap_mag <= 1.0:
        raise InvalidArgumentError("overlap magnitude must lie in [0, 1]", details={"overlap_mag": overlap_mag})

    radicand = mag_u * mag_u + mag_v * mag_v - 2.0 * mag_u * mag_v * overlap_mag
    clamped = radicand < 0.0
    if clamped:
        logger.debug(f"Negative distance radicand {radicand:.3e} clamped to zero")
    return DistanceEstimate(
        d=math.sqrt(max(0.0, radicand)),
        mag_u=mag_u,
        mag_v=mag_v,
        overlap_mag=overlap_mag,
        radicand=radicand,
        clamped=clamped,
    )


def assign_cluster(d_a: DistanceEstimate, d_b: DistanceEstimate, tie_epsilon: float) -> ClusterAssignment:
    """
    Nearest-centroid choice between the two references.

    The tie band is relative: a Tie needs |d_a - d_b| <= tie_epsilon * max(d_a, d_b),
    so scaling both radicands by the same factor never changes the answer.
    Two zero distances are a Tie.
    """
    gap = d_a.d - d_b.d
    margin = abs(gap)
    if margin <= tie_epsilon * max(d_a.d, d_b.d):
        chosen = Assignment.TIE
    elif gap < 0.0:
        chosen = Assignment.A
    else:
        chosen = Assignment.B
    return ClusterAssignment(chosen=chosen, d_a=d_a, d_b=d_b, margin=margin)
