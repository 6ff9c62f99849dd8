"""
Discrete-event kernel.

Integer-microsecond virtual clock, a heap of events ordered by
(fire_at, sequence) and independent seeded random streams.
"""

import hashlib
import heapq
import itertools
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, List, Tuple

import numpy as np

logger = logging.getLogger(__name__)

STREAM_PURPOSES = {
    "topology": 0,
    "traffic": 1,
    "shadowing": 2,
    "csma-backoff": 3,
}


class SchedulingError(RuntimeError):
    """An event was scheduled before the current clock."""


@dataclass(order=True)
class Event:
    fire_at: int
    sequence: int
    target: Callable[..., Any] = field(compare=False)
    payload: Tuple[Any, ...] = field(default=(), compare=False)

    @property
    def name(self) -> str:
        return getattr(self.target, "__qualname__", repr(self.target))


class Simulator:
    """Single-threaded event loop for one run."""

    def __init__(self):
        self.now = 0
        self._queue: List[Event] = []
        self._sequence = itertools.count()
        self._digest = hashlib.sha256()
        self.dispatched = 0

    def schedule(self, event: Event) -> None:
        if event.fire_at < self.now:
            raise SchedulingError(
                f"event {event.name} scheduled at {event.fire_at} us, clock is {self.now} us"
            )
        heapq.heappush(self._queue, event)

    def schedule_at(self, fire_at: int, target: Callable[..., Any], *payload: Any) -> Event:
        """Build and enqueue an event with the next tie-break sequence."""
        event = Event(int(fire_at), next(self._sequence), target, payload)
        self.schedule(event)
        return event

    def schedule_in(self, delay: int, target: Callable[..., Any], *payload: Any) -> Event:
        return self.schedule_at(self.now + delay, target, *payload)

    @property
    def pending(self) -> int:
        return len(self._queue)

    def run_until(self, t_end: int) -> int:
        """Dispatch every event due at or before t_end; returns the dispatch count."""
        if t_end < self.now:
            raise SchedulingError(f"run_until({t_end}) is before the clock ({self.now})")
        count = 0
        while self._queue and self._queue[0].fire_at <= t_end:
            event = heapq.heappop(self._queue)
            self.now = event.fire_at
            self._digest.update(f"{event.fire_at}:{event.sequence}:{event.name};".encode())
            event.target(*event.payload)
            count += 1
        self.now = t_end
        self.dispatched += count
        return count

    @property
    def trace_digest(self) -> str:
        """Hash over every dispatched (time, sequence, handler) triple."""
        return self._digest.hexdigest()


class RngStreams:
    """Factory of independent numpy generators keyed by (seed, purpose, index)."""

    def __init__(self, seed: int):
        self.seed = int(seed)

    def stream(self, purpose: str, index: int = 0) -> np.random.Generator:
        if purpose not in STREAM_PURPOSES:
            raise KeyError(f"unknown random stream purpose: {purpose}")
        sequence = np.random.SeedSequence(
            entropy=self.seed, spawn_key=(STREAM_PURPOSES[purpose], int(index))
        )
        return np.random.default_rng(sequence)
