"""Finite state machines executed by the physical twin and mirrored by the digital twin.

A machine is a total deterministic transition table over small unsigned
integers.  A subset of the states is marked as *key states*: the states the
digital twin actually tracks.  Everything the sync protocol ships across the
wire is expressed in terms of key states, so the projection helpers here
(`project_key_state`, `key_trace`) are the ground truth the rest of the
package is checked against.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field


class MachineError(Exception):
    """Base class for machine-level contract violations."""


class UnknownState(MachineError):
    pass


class UnknownInput(MachineError):
    pass


class NonMonotonicSchedule(MachineError):
    pass


class LogContiguityError(MachineError):
    pass


class MachineFormatError(MachineError):
    """Raised when a machine definition document is structurally broken."""


@dataclass(frozen=True)
class TwinMachine:
    """Deterministic FSM with a designated set of key states.

    `transitions` must be total over states x inputs for the machine to be
    usable; `validate_machine` reports gaps instead of the constructor so
    that broken definitions can still be loaded and diagnosed.
    """

    machine_id: str
    states: frozenset[int]
    inputs: frozenset[int]
    initial: int
    key_states: frozenset[int]
    transitions: dict[tuple[int, int], int]
    labels: dict[str, dict[str, str]] = field(default_factory=dict)

    def input_label(self, sym: int) -> str:
        return self.labels.get("inputs", {}).get(str(sym), str(sym))

    def state_label(self, state: int) -> str:
        return self.labels.get("states", {}).get(str(state), str(state))


@dataclass(frozen=True)
class LogEntry:
    slot: int
    input: int
    from_state: int
    to_state: int
    is_key_crossing: bool


class ExecutionLog:
    """Append-only record of executed transitions.

    Contiguity is enforced on every append: each entry must start where the
    previous one ended, and slots may never decrease.
    """

    def __init__(self, machine_id: str):
        self.machine_id = machine_id
        self.entries: list[LogEntry] = []

    def append(self, entry: LogEntry) -> None:
        if self.entries:
            last = self.entries[-1]
            if entry.from_state != last.to_state:
                raise LogContiguityError(
                    f"entry starts at {entry.from_state}, log ends at {last.to_state}"
                )
            if entry.slot < last.slot:
                raise LogContiguityError(
                    f"slot {entry.slot} precedes last logged slot {last.slot}"
                )
        self.entries.append(entry)

    def __len__(self) -> int:
        return len(self.entries)


# A key trace is the sequence of key states visited, as (slot, state) pairs.
# The first element is always (0, initial).
KeyTrace = list[tuple[int, int]]


@dataclass(frozen=True)
class ValidationIssue:
    code: str
    message: str


@dataclass
class ValidationResult:
    errors: list[ValidationIssue] = field(default_factory=list)
    warnings: list[ValidationIssue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def step(machine: TwinMachine, state: int, sym: int) -> int:
    """Apply one input symbol. Raises on undeclared states or inputs."""
    if state not in machine.states:
        raise UnknownState(f"machine {machine.machine_id!r} has no state {state}")
    if sym not in machine.inputs:
        raise UnknownInput(f"machine {machine.machine_id!r} has no input {sym}")
    return machine.transitions[(state, sym)]


def run_schedule(
    machine: TwinMachine, start: int, schedule: list[tuple[int, int]]
) -> ExecutionLog:
    """Execute (slot, input) pairs in order and return the resulting log.

    Schedule slots must be nondecreasing; several inputs may share a slot.
    """
    if start not in machine.states:
        raise UnknownState(f"start state {start} not in machine {machine.machine_id!r}")
    log = ExecutionLog(machine.machine_id)
    state = start
    prev_slot = None
    for slot, sym in schedule:
        if prev_slot is not None and slot < prev_slot:
            raise NonMonotonicSchedule(f"slot {slot} after slot {prev_slot}")
        prev_slot = slot
        nxt = step(machine, state, sym)
        log.append(
            LogEntry(
                slot=slot,
                input=sym,
                from_state=state,
                to_state=nxt,
                is_key_crossing=nxt in machine.key_states,
            )
        )
        state = nxt
    return log


def project_key_state(log: ExecutionLog, machine: TwinMachine) -> int:
    """Key state in force after the whole log: the last crossing, else initial."""
    for entry in reversed(log.entries):
        if entry.is_key_crossing:
            return entry.to_state
    return machine.initial


def key_trace(log: ExecutionLog, machine: TwinMachine) -> KeyTrace:
    trace: KeyTrace = [(0, machine.initial)]
    for entry in log.entries:
        if entry.is_key_crossing:
            trace.append((entry.slot, entry.to_state))
    return trace


def validate_machine(machine: TwinMachine) -> ValidationResult:
    """Report structural problems. Errors make the machine unusable, warnings do not."""
    result = ValidationResult()

    def err(code: str, message: str) -> None:
        result.errors.append(ValidationIssue(code, message))

    def warn(code: str, message: str) -> None:
        result.warnings.append(ValidationIssue(code, message))

    if machine.initial not in machine.states:
        err("unknown_initial", f"initial state {machine.initial} not declared")
    if machine.initial not in machine.key_states:
        err("initial_not_key_state", f"initial state {machine.initial} must be a key state")
    for k in sorted(machine.key_states):
        if k not in machine.states:
            err("key_state_unknown", f"key state {k} not declared")
    for (src, sym), dst in sorted(machine.transitions.items()):
        if src not in machine.states:
            err("transition_source_unknown", f"transition from undeclared state {src}")
        if sym not in machine.inputs:
            err("transition_input_unknown", f"transition on undeclared input {sym}")
        if dst not in machine.states:
            err("transition_target_unknown", f"transition to undeclared state {dst}")
    for src in sorted(machine.states):
        for sym in sorted(machine.inputs):
            if (src, sym) not in machine.transitions:
                err(
                    "non_total_transition",
                    f"no transition defined for state {src} on input {sym}",
                )

    if result.errors:
        return result

    # Reachability from the initial state.
    seen = {machine.initial}
    frontier = [machine.initial]
    while frontier:
        src = frontier.pop()
        for sym in machine.inputs:
            dst = machine.transitions[(src, sym)]
            if dst not in seen:
                seen.add(dst)
                frontier.append(dst)
    for state in sorted(machine.states - seen):
        warn("unreachable_state", f"state {state} unreachable from initial")

    if machine.key_states == machine.states:
        warn(
            "key_states_cover_all_states",
            "every state is a key state; the twin gains nothing from projection",
        )
    return result


def machine_from_dict(obj: dict) -> TwinMachine:
    """Build a machine from its JSON document form.

    Only the document shape is checked here; semantic gaps (missing
    transitions and the like) are left to `validate_machine`.
    """
    if not isinstance(obj, dict):
        raise MachineFormatError("machine definition must be an object")
    required = ["machine_id", "states", "inputs", "initial", "key_states", "delta"]
    for key in required:
        if key not in obj:
            raise MachineFormatError(f"missing field {key!r}")
    if not isinstance(obj["machine_id"], str):
        raise MachineFormatError("machine_id must be a string")
    for key in ("states", "inputs", "key_states"):
        vals = obj[key]
        if not isinstance(vals, list) or not all(
            isinstance(v, int) and not isinstance(v, bool) and v >= 0 for v in vals
        ):
            raise MachineFormatError(f"{key} must be a list of unsigned integers")
    if not isinstance(obj["initial"], int) or isinstance(obj["initial"], bool) or obj["initial"] < 0:
        raise MachineFormatError("initial must be an unsigned integer")

    transitions: dict[tuple[int, int], int] = {}
    if not isinstance(obj["delta"], list):
        raise MachineFormatError("delta must be a list of [from, input, to] triples")
    for row in obj["delta"]:
        if (
            not isinstance(row, list)
            or len(row) != 3
            or not all(isinstance(v, int) and not isinstance(v, bool) and v >= 0 for v in row)
        ):
            raise MachineFormatError(f"bad transition row {row!r}")
        src, sym, dst = row
        if (src, sym) in transitions:
            raise MachineFormatError(f"duplicate transition for state {src} input {sym}")
        transitions[(src, sym)] = dst

    labels = obj.get("labels", {})
    if not isinstance(labels, dict):
        raise MachineFormatError("labels must be an object")

    return TwinMachine(
        machine_id=obj["machine_id"],
        states=frozenset(obj["states"]),
        inputs=frozenset(obj["inputs"]),
        initial=obj["initial"],
        key_states=frozenset(obj["key_states"]),
        transitions=transitions,
        labels={k: dict(v) for k, v in labels.items()},
    )


def machine_to_dict(machine: TwinMachine) -> dict:
    out: dict = {
        "machine_id": machine.machine_id,
        "states": sorted(machine.states),
        "inputs": sorted(machine.inputs),
        "initial": machine.initial,
        "key_states": sorted(machine.key_states),
        "delta": [[src, sym, dst] for (src, sym), dst in sorted(machine.transitions.items())],
    }
    if machine.labels:
        out["labels"] = machine.labels
    return out


def load_machine_file(path: str) -> TwinMachine:
    with open(path, "r", encoding="utf-8") as fh:
        return machine_from_dict(json.load(fh))
