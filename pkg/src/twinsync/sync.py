"""Delta-based key-state replication between the physical twin and its replica.

The physical twin executes the machine and periodically emits a DeltaRecord:
the key state it started from, the inputs applied since, and the key state it
claims to have reached.  The replica never force-sets its state; it re-folds
the inputs through its own copy of the transition table and only accepts the
result if the fold confirms the claim.  The reverse path carries operator
inputs (CommandRecord), never states: the physical twin re-executes them
itself after a plausibility check.

Between key crossings a delta is cumulative (all inputs since the key state
in force was last established), so every record verifies from the replica's
current key even when the machine is partway between key states.  A slot with
no activity still produces an empty heartbeat record so the other side can
tell silence from a deleted message.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .machine import (
    ExecutionLog,
    LogEntry,
    MachineError,
    TwinMachine,
    project_key_state,
    step,
)


@dataclass(frozen=True)
class DeltaRecord:
    base_state: int
    result_state: int
    applied_inputs: tuple[int, ...]
    slot: int


@dataclass(frozen=True)
class CommandRecord:
    inputs: tuple[int, ...]
    issued_slot: int


@dataclass(frozen=True)
class ReplicaState:
    """The digital twin's view: last confirmed key state plus queued commands."""

    last_synced_key: int
    last_synced_slot: int = 0
    pending_commands: tuple[CommandRecord, ...] = ()


class MismatchKind(str, Enum):
    BASE_MISMATCH = "base_mismatch"
    REPLAYED_BASE = "replayed_base"
    UNREACHABLE_RESULT = "unreachable_result"


@dataclass(frozen=True)
class MismatchError:
    """Verification failure, returned as a value for the detector to consume."""

    kind: MismatchKind
    expected: int
    got: int
    reason: str = ""


@dataclass(frozen=True)
class Reject:
    """Reconciliation refusal for an operator command."""

    reason: str
    detail: int | None = None


def fold_key_state(
    machine: TwinMachine, base: int, inputs: tuple[int, ...]
) -> tuple[int, int | None]:
    """Walk the inputs from base; return (final state, last key state visited).

    The last key visited starts as base itself when base is a key state and
    is None otherwise, so a record based outside the key set can never claim
    a reachable result.
    """
    state = base
    last_key = base if base in machine.key_states else None
    for sym in inputs:
        state = step(machine, state, sym)
        if state in machine.key_states:
            last_key = state
    return state, last_key


def compute_delta(
    log: ExecutionLog, machine: TwinMachine, since_slot: int
) -> DeltaRecord | None:
    """Delta covering everything after since_slot, or None when nothing happened.

    since_slot must be a slot at which the machine occupied the key state in
    force (slot 0, or the slot of a key crossing); the emitting side's tick
    maintains that anchor.
    """
    after = [e for e in log.entries if e.slot > since_slot]
    if not after:
        return None
    base = machine.initial
    for entry in log.entries:
        if entry.slot > since_slot:
            break
        if entry.is_key_crossing:
            base = entry.to_state
    return DeltaRecord(
        base_state=base,
        result_state=project_key_state(log, machine),
        applied_inputs=tuple(e.input for e in after),
        slot=after[-1].slot,
    )


def verify_delta(
    machine: TwinMachine, delta: DeltaRecord, expected_base: int
) -> MismatchError | None:
    """Check a received delta against the replica's current key state.

    Returns None when the record is consistent: the base matches and folding
    the inputs through the machine visits result_state as the last key state.
    """
    if delta.base_state != expected_base:
        return MismatchError(
            kind=MismatchKind.BASE_MISMATCH,
            expected=expected_base,
            got=delta.base_state,
            reason="delta base does not match replica key state",
        )
    try:
        _, last_key = fold_key_state(machine, delta.base_state, delta.applied_inputs)
    except MachineError as exc:
        return MismatchError(
            kind=MismatchKind.UNREACHABLE_RESULT,
            expected=delta.result_state,
            got=delta.result_state,
            reason=f"fold failed: {exc}",
        )
    if last_key != delta.result_state:
        return MismatchError(
            kind=MismatchKind.UNREACHABLE_RESULT,
            expected=last_key if last_key is not None else delta.base_state,
            got=delta.result_state,
            reason="claimed result not reached by folding the inputs",
        )
    return None


def apply_delta(
    replica: ReplicaState, delta: DeltaRecord | None, machine: TwinMachine
) -> ReplicaState | MismatchError:
    """Advance the replica by a verified delta; on any error the replica is unchanged.

    A record carrying a slot older than the replica's sync point is rejected
    as replayed before its content is even looked at.
    """
    if delta is None:
        return replica
    if delta.slot < replica.last_synced_slot:
        return MismatchError(
            kind=MismatchKind.REPLAYED_BASE,
            expected=replica.last_synced_slot,
            got=delta.slot,
            reason="delta slot predates the replica's sync point",
        )
    err = verify_delta(machine, delta, replica.last_synced_key)
    if err is not None:
        return err
    return replace(
        replica, last_synced_key=delta.result_state, last_synced_slot=delta.slot
    )


def reconcile(
    physical_key: int, command: CommandRecord, machine: TwinMachine
) -> tuple[int, ...] | Reject:
    """Vet an operator command before the physical twin executes it.

    Accepted commands come back as the input tuple to execute at the next
    slot. physical_key is part of the contract so rejection rules that
    depend on the current key state can hang off this hook.
    """
    if not command.inputs:
        return Reject(reason="empty_command")
    for sym in command.inputs:
        if sym not in machine.inputs:
            return Reject(reason="unknown_input", detail=sym)
    return command.inputs


class PhysicalTwin:
    """Stateful physical endpoint: executes inputs, emits one record per sync period.

    The emission anchor tracks the log position just after the last key
    crossing already shipped, so records stay verifiable from the replica's
    key state even while the machine sits between key states.
    """

    def __init__(self, machine: TwinMachine, sync_period: int = 1):
        if sync_period < 1:
            raise ValueError("sync_period must be >= 1")
        self.machine = machine
        self.sync_period = sync_period
        self.state = machine.initial
        self.log = ExecutionLog(machine.machine_id)
        self._anchor_index = 0
        self._emitted_index = 0
        self.pending_reconciled: list[tuple[int, ...]] = []
        self.acked: list[tuple[int, int]] = []  # (slot, acked seq) pairs

    def current_key(self) -> int:
        return project_key_state(self.log, self.machine)

    def apply_input(self, slot: int, sym: int) -> LogEntry:
        nxt = step(self.machine, self.state, sym)
        entry = LogEntry(
            slot=slot,
            input=sym,
            from_state=self.state,
            to_state=nxt,
            is_key_crossing=nxt in self.machine.key_states,
        )
        self.log.append(entry)
        self.state = nxt
        return entry

    def record_ack(self, slot: int, acked_seq: int) -> None:
        self.acked.append((slot, acked_seq))

    def _key_at_anchor(self) -> int:
        for entry in reversed(self.log.entries[: self._anchor_index]):
            if entry.is_key_crossing:
                return entry.to_state
        return self.machine.initial

    def tick(self, slot: int) -> DeltaRecord | None:
        """End-of-slot emission: a delta when the log moved, a heartbeat otherwise."""
        if slot % self.sync_period != 0:
            return None
        entries = self.log.entries
        if len(entries) == self._emitted_index:
            key = self.current_key()
            return DeltaRecord(base_state=key, result_state=key, applied_inputs=(), slot=slot)
        base = self._key_at_anchor()
        inputs = tuple(e.input for e in entries[self._anchor_index :])
        record = DeltaRecord(
            base_state=base,
            result_state=project_key_state(self.log, self.machine),
            applied_inputs=inputs,
            slot=slot,
        )
        self._emitted_index = len(entries)
        for idx in range(len(entries) - 1, self._anchor_index - 1, -1):
            if entries[idx].is_key_crossing:
                self._anchor_index = idx + 1
                break
        return record


class VirtualTwin:
    """Stateful digital endpoint: applies verified deltas, queues operator commands."""

    def __init__(self, machine: TwinMachine, sync_period: int = 1):
        if sync_period < 1:
            raise ValueError("sync_period must be >= 1")
        self.machine = machine
        self.sync_period = sync_period
        self.replica = ReplicaState(last_synced_key=machine.initial)
        self.last_sync_seq = 0

    def queue_operator_inputs(self, slot: int, inputs: tuple[int, ...]) -> None:
        command = CommandRecord(inputs=inputs, issued_slot=slot)
        self.replica = replace(
            self.replica, pending_commands=self.replica.pending_commands + (command,)
        )

    def tick(self, slot: int) -> list[CommandRecord]:
        """Flush queued commands at sync boundaries."""
        if slot % self.sync_period != 0:
            return []
        commands = list(self.replica.pending_commands)
        if commands:
            self.replica = replace(self.replica, pending_commands=())
        return commands

    def apply_sync(self, seq: int, delta: DeltaRecord) -> MismatchError | None:
        result = apply_delta(self.replica, delta, self.machine)
        if isinstance(result, MismatchError):
            return result
        self.replica = result
        self.last_sync_seq = seq
        return None
