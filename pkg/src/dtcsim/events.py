"""Deterministic event queue, virtual clock, and seeded random source.

One run owns one queue and one random source; everything is single
threaded and replayable: equal-time events pop in insertion order, and
identical seeds produce identical draw sequences.
"""

from __future__ import annotations

import heapq
import random
from typing import NamedTuple, Optional

# virtual time is integer microseconds; integers keep replay exact
SimTime = int

US_PER_MS = 1_000
US_PER_S = 1_000_000


class SchedulingError(RuntimeError):
    """An event was scheduled before the current clock (programming fault)."""


# event payloads ------------------------------------------------------------

class StartTransfer(NamedTuple):
    pass


class FrameArrival(NamedTuple):
    frame: object           # linklayer frame delivered to the target node


class LlAckArrival(NamedTuple):
    frame_id: int           # link-layer ack for one earlier transmission


class LlAckTimeout(NamedTuple):
    generation: int         # stale unless it matches the node's counter


class LocalRtoExpiry(NamedTuple):
    generation: int


class SenderRtoExpiry(NamedTuple):
    generation: int


class SenderSendSlot(NamedTuple):
    pass                    # the sender's pacing gate opened


class Event(NamedTuple):
    fire_at: SimTime
    tiebreak: int           # insertion counter; makes heap order total
    target: int
    payload: object


class EventQueue:
    """Min-heap of events ordered by (fire_at, insertion order).

    ``now`` advances to each popped event's fire time.  The tiebreak
    counter is unique per queue, so heap comparisons never reach the
    payload and equal-time events stay FIFO.
    """

    def __init__(self) -> None:
        self._heap: list[Event] = []
        self._counter = 0
        self.now: SimTime = 0

    def __len__(self) -> int:
        return len(self._heap)

    def schedule(self, fire_at: SimTime, target: int, payload: object) -> Event:
        if fire_at < self.now:
            raise SchedulingError(
                f"event for node {target} scheduled at t={fire_at}us "
                f"behind the clock t={self.now}us"
            )
        event = Event(fire_at, self._counter, target, payload)
        self._counter += 1
        heapq.heappush(self._heap, event)
        return event

    def pop_next(self) -> Optional[Event]:
        """Next event in (fire_at, tiebreak) order, or None when drained."""
        if not self._heap:
            return None
        event = heapq.heappop(self._heap)
        self.now = event.fire_at
        return event


class RandomSource:
    """Seeded uniform source; a run consumes it in event-processing order."""

    def __init__(self, seed: int) -> None:
        self.seed = seed
        self._rng = random.Random(seed)
        self.draws = 0

    def uniform_draw(self) -> float:
        """One value in [0, 1); advances the generator state."""
        self.draws += 1
        return self._rng.random()
