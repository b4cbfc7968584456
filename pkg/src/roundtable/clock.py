"""Clock sources: real wall time for deployments, a settable one for tests.

All timestamps in the engine are float seconds from the active clock's
domain; the simulated clock starts at 0.0 so traces read as offsets.
"""

from __future__ import annotations

import time


class Clock:
    def now(self) -> float:
        raise NotImplementedError


class WallClock(Clock):
    def now(self) -> float:
        return time.time()


class SimulatedClock(Clock):
    """Manually advanced clock; never moves backwards."""

    def __init__(self, start: float = 0.0):
        self._now = start

    def now(self) -> float:
        return self._now

    def advance(self, seconds: float) -> float:
        if seconds < 0:
            raise ValueError("cannot advance by a negative amount")
        self._now += seconds
        return self._now

    def set(self, t: float) -> float:
        if t < self._now:
            raise ValueError("cannot move the clock backwards")
        self._now = t
        return self._now
