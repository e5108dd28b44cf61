import logging
import time
from contextlib import contextmanager


logger = logging.getLogger(__name__)


class StageTimer:
    """Wall-clock durations per pipeline stage, in insertion order."""

    def __init__(self):
        self.timings: dict[str, float] = {}

    @contextmanager
    def stage(self, name: str):
        start = time.perf_counter()
        try:
            yield
        finally:
            elapsed_ms = (time.perf_counter() - start) * 1000
            self.timings[name] = round(self.timings.get(name, 0.0) + elapsed_ms / 1000, 6)
            logger.info('[perf] %s -> %.1f ms', name, elapsed_ms)
