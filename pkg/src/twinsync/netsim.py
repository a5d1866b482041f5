"""Slotted two-channel network between the twins.

Time advances in integer slots.  Each direction is a separate unidirectional
channel with a fixed latency and an optional random drop applied at send
time; whatever survives the drop sits in a FIFO queue until its delivery
slot.  At delivery the whole due batch is handed to an interceptor hook (the
adversary) which may rewrite it arbitrarily.

Drop decisions come from a SplitMix64 stream so that identical (scenario,
seed) pairs reproduce identical delivery traces in any implementation of the
same generator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

_MASK64 = 0xFFFFFFFFFFFFFFFF


class SplitMix64:
    """SplitMix64 generator (the usual published constants)."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def chance(self, probability: float) -> bool:
        """True with the given probability; exact at 0 and 1."""
        threshold = int(probability * 2.0**64)
        return self.next_u64() < threshold


class Direction(str, Enum):
    PHYS_TO_VIRT = "phys_to_virt"
    VIRT_TO_PHYS = "virt_to_phys"


@dataclass
class Clock:
    current_slot: int = 0

    def tick(self) -> int:
        self.current_slot += 1
        return self.current_slot


@dataclass(frozen=True)
class QueuedFrame:
    deliver_at_slot: int
    sent_at_slot: int
    data: bytes


Interceptor = Callable[[int, "Direction", list[bytes]], list[bytes]]


@dataclass
class Channel:
    """One direction of the link. Frames are raw bytes; the channel never inspects them."""

    direction: Direction
    rng: SplitMix64
    latency_slots: int = 1
    drop_probability: float = 0.0
    queue: list[QueuedFrame] = field(default_factory=list)
    drop_log: list[QueuedFrame] = field(default_factory=list)

    def send(self, data: bytes, slot: int) -> None:
        """Enqueue for delivery at slot + latency; may drop instead.

        The drop decision happens here, before the adversary ever sees the
        frame: a benignly lost frame is not capturable.
        """
        frame = QueuedFrame(
            deliver_at_slot=slot + self.latency_slots, sent_at_slot=slot, data=data
        )
        # One draw per send, unconditionally, so the stream position is a pure
        # function of the send count.
        if self.rng.chance(self.drop_probability):
            self.drop_log.append(frame)
            return
        self.queue.append(frame)

    def deliver_due(self, slot: int, interceptor: Interceptor | None = None) -> list[bytes]:
        """Remove and return the frames due this slot, FIFO, via the interceptor."""
        due = [f.data for f in self.queue if f.deliver_at_slot == slot]
        self.queue = [f for f in self.queue if f.deliver_at_slot != slot]
        if interceptor is not None:
            due = interceptor(slot, self.direction, due)
        return due
