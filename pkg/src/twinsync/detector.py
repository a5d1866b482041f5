"""Rule-based detection of replication attacks.

Three security requirements anchor every verdict:

    R1  synchronized, timely state replication between the twins
    R2  the digital twin's state may only change through verified sync records
    R3  physical actuation only through commands vetted against the live state

Each anomaly is mapped to the requirements whose enforcement caught it, and
the mapping depends on which side of the link was attacked: anomalies on the
physical-bound channel always implicate R3 because that channel drives
actuation, while anomalies on the virtual-bound channel implicate R2
whenever forged or altered content could have corrupted the replica.

Liveness is the detector's own job: both endpoints emit one authenticated
frame per sync period (heartbeats when idle), so a deleted message shows up
as an emission slot that never produced an accepted arrival within the
grace window.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .adversary import AttackKind
from .frames import ChannelError, ChannelErrorKind
from .machine import ExecutionLog, TwinMachine
from .netsim import Direction
from .sync import MismatchError, Reject, ReplicaState


class Requirement(str, Enum):
    R1 = "R1"
    R2 = "R2"
    R3 = "R3"


class EventKind(str, Enum):
    MISSED_SYNC = "MISSED_SYNC"
    TAMPER = "TAMPER"
    REPLAY_ATTACK = "REPLAY_ATTACK"
    FORGED_INSERT = "FORGED_INSERT"
    STATE_MISMATCH = "STATE_MISMATCH"
    COMMAND_REJECTED = "COMMAND_REJECTED"


@dataclass(frozen=True)
class DetectionEvent:
    kind: EventKind
    slot: int
    direction: Direction
    requirements: frozenset[Requirement]
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "slot": self.slot,
            "direction": self.direction.value,
            "requirements": sorted(r.value for r in self.requirements),
            "detail": {k: self.detail[k] for k in sorted(self.detail)},
        }


_R1 = frozenset({Requirement.R1})
_R1R2 = frozenset({Requirement.R1, Requirement.R2})
_R1R3 = frozenset({Requirement.R1, Requirement.R3})
_R3 = frozenset({Requirement.R3})

# Channel-level event kinds by evidence, and the requirements enforced,
# keyed by the direction the anomaly was observed on.
_CHANNEL_EVENT_KIND = {
    ChannelErrorKind.AUTH_FAIL: EventKind.TAMPER,
    ChannelErrorKind.REPLAY: EventKind.REPLAY_ATTACK,
    ChannelErrorKind.MALFORMED: EventKind.FORGED_INSERT,
}

EVENT_REQUIREMENTS: dict[tuple[EventKind, Direction], frozenset[Requirement]] = {
    (EventKind.MISSED_SYNC, Direction.PHYS_TO_VIRT): _R1,
    (EventKind.MISSED_SYNC, Direction.VIRT_TO_PHYS): _R1R3,
    (EventKind.TAMPER, Direction.PHYS_TO_VIRT): _R1R2,
    (EventKind.TAMPER, Direction.VIRT_TO_PHYS): _R1R3,
    (EventKind.FORGED_INSERT, Direction.PHYS_TO_VIRT): _R1R2,
    (EventKind.FORGED_INSERT, Direction.VIRT_TO_PHYS): _R1R3,
    (EventKind.REPLAY_ATTACK, Direction.PHYS_TO_VIRT): _R1,
    (EventKind.REPLAY_ATTACK, Direction.VIRT_TO_PHYS): _R1R3,
}

# What a run is expected to detect for each scheduled attack, by the channel
# it targets. Total over all attack kinds and both directions.
ATTACK_EXPECTATIONS: dict[tuple[AttackKind, Direction], frozenset[Requirement]] = {
    (AttackKind.DELETE, Direction.PHYS_TO_VIRT): _R1,
    (AttackKind.REPLAY, Direction.PHYS_TO_VIRT): _R1,
    (AttackKind.INSERT, Direction.PHYS_TO_VIRT): _R1R2,
    (AttackKind.MODIFY, Direction.PHYS_TO_VIRT): _R1R2,
    (AttackKind.DELETE, Direction.VIRT_TO_PHYS): _R1R3,
    (AttackKind.REPLAY, Direction.VIRT_TO_PHYS): _R1R3,
    (AttackKind.INSERT, Direction.VIRT_TO_PHYS): _R1R3,
    (AttackKind.MODIFY, Direction.VIRT_TO_PHYS): _R1R3,
}


@dataclass(frozen=True)
class DirectionExpectation:
    sync_period: int
    latency_slots: int
    grace_slots: int = 1


class ExpectationTable:
    """Tracks which periodic emissions have produced an accepted arrival.

    An emission at slot e (e divisible by the period) is due at
    e + latency + grace; if no authenticated frame claiming emission slot e
    has arrived by then, that emission was lost.
    """

    def __init__(self, expectations: dict[Direction, DirectionExpectation]):
        self.expectations = dict(expectations)
        self._satisfied: set[tuple[Direction, int]] = set()

    def record_arrival(self, direction: Direction, emission_slot: int) -> None:
        self._satisfied.add((direction, emission_slot))

    def overdue(self, slot: int) -> list[tuple[Direction, int]]:
        """Emission slots that became overdue exactly at this slot."""
        out = []
        for direction, cfg in self.expectations.items():
            emission = slot - cfg.latency_slots - cfg.grace_slots
            if emission < 0 or emission % cfg.sync_period != 0:
                continue
            if (direction, emission) not in self._satisfied:
                out.append((direction, emission))
        return out


class Detector:
    """Turns channel errors, liveness gaps, and semantic failures into events."""

    def __init__(self, expectations: ExpectationTable):
        self.expectations = expectations

    def on_frame_accepted(self, direction: Direction, emission_slot: int) -> None:
        self.expectations.record_arrival(direction, emission_slot)

    def on_channel_error(
        self, err: ChannelError, slot: int, direction: Direction
    ) -> DetectionEvent:
        kind = _CHANNEL_EVENT_KIND[err.kind]
        detail = {"reason": err.reason}
        if err.slot is not None:
            detail["claimed_slot"] = err.slot
        if err.seq is not None:
            detail["claimed_seq"] = err.seq
        return DetectionEvent(
            kind=kind,
            slot=slot,
            direction=direction,
            requirements=EVENT_REQUIREMENTS[(kind, direction)],
            detail=detail,
        )

    def on_slot_boundary(self, slot: int) -> list[DetectionEvent]:
        events = []
        for direction, emission in self.expectations.overdue(slot):
            events.append(
                DetectionEvent(
                    kind=EventKind.MISSED_SYNC,
                    slot=slot,
                    direction=direction,
                    requirements=EVENT_REQUIREMENTS[(EventKind.MISSED_SYNC, direction)],
                    detail={"expected_emission_slot": emission},
                )
            )
        return events

    def on_semantic_mismatch(
        self, err: MismatchError | Reject, slot: int, direction: Direction
    ) -> DetectionEvent:
        if isinstance(err, Reject):
            detail = {"reason": err.reason}
            if err.detail is not None:
                detail["input"] = err.detail
            return DetectionEvent(
                kind=EventKind.COMMAND_REJECTED,
                slot=slot,
                direction=direction,
                requirements=_R3,
                detail=detail,
            )
        return DetectionEvent(
            kind=EventKind.STATE_MISMATCH,
            slot=slot,
            direction=direction,
            requirements=_R1R2,
            detail={
                "mismatch": err.kind.value,
                "expected": err.expected,
                "got": err.got,
                "reason": err.reason,
            },
        )


def consistency_audit(
    log: ExecutionLog,
    machine: TwinMachine,
    replica: ReplicaState,
    slot: int,
    latency_slots: int,
    sync_period: int = 1,
) -> DetectionEvent | None:
    """Compare the replica against the physical history it should mirror.

    The newest emission that can have been delivered by the end of `slot`
    happened at the last sync boundary at or before slot - latency; the
    replica must hold the key state the physical log had reached by then.
    Returns None when consistent.
    """
    horizon = slot - latency_slots
    if horizon < 0:
        expected = machine.initial
    else:
        emission = (horizon // sync_period) * sync_period
        expected = machine.initial
        for entry in log.entries:
            if entry.slot > emission:
                break
            if entry.is_key_crossing:
                expected = entry.to_state
    if replica.last_synced_key == expected:
        return None
    return DetectionEvent(
        kind=EventKind.STATE_MISMATCH,
        slot=slot,
        direction=Direction.PHYS_TO_VIRT,
        requirements=_R1,
        detail={
            "audit": True,
            "expected": expected,
            "got": replica.last_synced_key,
        },
    )
