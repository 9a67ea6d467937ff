import logging
from typing import Optional

from ..models.protocol import AbortReason

logger = logging.getLogger(__name__)


class AbortMonitor:
    """
    Breaker for one security round of a session.

    Tracks checked and failed samples and trips once the failure rate goes
    above the configured threshold. With a threshold of 0 the first failure
    trips it. With min_samples set, the rate is re-evaluated after every
    sample once that many have been seen, so a running round can trip
    before it ends. A tripped monitor stays open for the rest of the session.
    """

    def __init__(self, threshold: float, reason: AbortReason, label: str, min_samples: Optional[int] = None):
        if min_samples is not None and min_samples < 1:
            raise ValueError("min_samples must be positive")
        self.threshold = threshold
        self.reason = reason
        self.label = label
        self.min_samples = min_samples
        self.checked = 0
        self.failures = 0
        self._open = False

    @property
    def is_open(self) -> bool:
        return self._open

    @property
    def failure_rate(self) -> float:
        return self.failures / self.checked if self.checked else 0.0

    def record_pass(self) -> None:
        self.checked += 1
        self._evaluate_running()

    def record_failure(self) -> None:
        self.checked += 1
        self.failures += 1
        # Zero tolerance aborts on the spot.
        if self.threshold == 0.0:
            self._trip()
        self._evaluate_running()

    def _evaluate_running(self) -> None:
        if self.min_samples is not None and self.checked >= self.min_samples:
            self.evaluate()

    def evaluate(self) -> bool:
        """Trip the monitor if the accumulated failure rate exceeds the threshold."""
        if not self._open and self.failures > self.threshold * self.checked:
            self._trip()
        return self._open

    def _trip(self) -> None:
        if not self._open:
            logger.warning(
                f"{self.label}: failure rate {self.failures}/{self.checked} above threshold "
                f"{self.threshold}, aborting ({self.reason.value})"
            )
        self._open = True

    def get_metrics(self) -> dict:
        return {
            "label": self.label,
            "status": "open" if self._open else "closed",
            "checked": self.checked,
            "failures": self.failures,
            "threshold": self.threshold,
        }
