import logging
import math
from typing import List

from ..config import settings

logger = logging.getLogger(__name__)


def split_into_batches(repetitions: int, workers: int) -> List[List[int]]:
    """
    Split repetition indices into contiguous batches, one or more per worker

    Args:
        repetitions: Number of repetitions in the experiment
        workers: Number of worker processes available

    Returns:
        List of repetition index batches, in repetition order
    """
    indices = list(range(repetitions))
    if workers <= 1 or repetitions <= settings.MIN_REPETITIONS_PER_BATCH:
        return [indices]

    batch_size = max(settings.MIN_REPETITIONS_PER_BATCH, math.ceil(repetitions / workers))
    batches = [indices[i:i + batch_size] for i in range(0, repetitions, batch_size)]
    logger.debug(f"Split {repetitions} repetitions into {len(batches)} batches of up to {batch_size}")
    return batches
