"""Discrete-event engine: integer-nanosecond clock, cancellable events, named RNG streams."""

from __future__ import annotations

import hashlib
import heapq
import random
from typing import Any, Callable

NS_PER_S = 1_000_000_000

EVENT_KINDS = (
    "mobility-step",
    "radio-delivery",
    "timer-expiry",
    "traffic-send",
    "stop-begin",
    "stop-end",
    "sim-end",
)

STREAM_IDS = ("mobility", "traffic", "radio", "topology")


def seconds(value: float) -> int:
    """Convert seconds to integer nanoseconds (rounded to nearest)."""
    return int(round(value * NS_PER_S))


def to_seconds(ns: int) -> float:
    return ns / NS_PER_S


class SchedulingError(RuntimeError):
    """Raised when an event is scheduled before the current clock."""


class Event:
    __slots__ = ("fire_at", "sequence", "kind", "callback", "payload", "cancelled")

    def __init__(self, fire_at: int, sequence: int, kind: str, callback: Callable, payload: Any):
        self.fire_at = fire_at
        self.sequence = sequence
        self.kind = kind
        self.callback = callback
        self.payload = payload
        self.cancelled = False

    def cancel(self) -> None:
        self.cancelled = True

    def __lt__(self, other: "Event") -> bool:
        return (self.fire_at, self.sequence) < (other.fire_at, other.sequence)

    def __repr__(self) -> str:
        return f"Event({self.fire_at}, #{self.sequence}, {self.kind})"


def rng_stream(seed: int, stream_id: str) -> random.Random:
    """Independent Mersenne Twister stream for ``(seed, stream_id)``.

    The derived state depends only on the two inputs (no salted ``hash``), so the
    same pair reproduces the same sequence on every platform.
    """
    if stream_id not in STREAM_IDS:
        raise ValueError(f"unknown rng stream {stream_id!r}")
    digest = hashlib.blake2b(f"{seed & 0xFFFFFFFFFFFFFFFF}:{stream_id}".encode(), digest_size=8).digest()
    return random.Random(int.from_bytes(digest, "big"))


class Engine:
    """Single-threaded event loop.

    Events dispatch in strictly increasing ``(fire_at, sequence)`` order; the
    sequence number is assigned at scheduling time.
    """

    def __init__(self, seed: int = 0, record: bool = False):
        self.now = 0
        self.seed = seed
        self._queue: list[tuple[int, int, Event]] = []
        self._seq = 0
        self.dispatched = 0
        self.streams = {name: rng_stream(seed, name) for name in STREAM_IDS}
        self.log: list[tuple[int, int, str]] | None = [] if record else None

    def rng(self, stream_id: str) -> random.Random:
        return self.streams[stream_id]

    def schedule(self, fire_at: int, kind: str, callback: Callable, payload: Any = None) -> Event:
        if fire_at < self.now:
            raise SchedulingError(f"event {kind} at {fire_at} ns scheduled in the past (now={self.now} ns)")
        ev = Event(fire_at, self._seq, kind, callback, payload)
        self._seq += 1
        heapq.heappush(self._queue, (fire_at, ev.sequence, ev))
        return ev

    def schedule_in(self, delay: int, kind: str, callback: Callable, payload: Any = None) -> Event:
        return self.schedule(self.now + delay, kind, callback, payload)

    @staticmethod
    def cancel(handle: Event | None) -> None:
        if handle is not None:
            handle.cancelled = True

    def __len__(self) -> int:
        return len(self._queue)

    def run_until(self, end: int) -> int:
        """Dispatch every event with ``fire_at <= end``; leave the clock at ``end``."""
        queue = self._queue
        log = self.log
        count = 0
        pop = heapq.heappop
        while queue and queue[0][0] <= end:
            fire_at, _, ev = pop(queue)
            if ev.cancelled:
                continue
            self.now = fire_at
            if log is not None:
                log.append((fire_at, ev.sequence, ev.kind))
            ev.callback(ev.payload)
            count += 1
        if end > self.now:
            self.now = end
        self.dispatched += count
        return count
