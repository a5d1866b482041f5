"""Closed-form oracle for the full replication stack.

The whole pipeline (log, delta records, framing, channel, replica) must be
observationally equivalent to simply folding the transition table over the
inputs and projecting key states, delayed by the channel latency.  This
module computes that closed form directly, with none of the protocol
machinery, and diffs full-stack runs against it over exhaustively enumerated
input schedules.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

from .machine import TwinMachine, validate_machine
from .runner import run_scenario
from .scenario import ChannelConfig, ScenarioSpec
from .netsim import Direction


@dataclass(frozen=True)
class Divergence:
    schedule: tuple[int, ...]
    slot: int
    expected: int
    got: int
    what: str


@dataclass
class OracleReport:
    machine_id: str
    max_schedule_len: int
    schedules_checked: int = 0
    divergences: list[Divergence] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.divergences

    def to_dict(self) -> dict:
        return {
            "machine_id": self.machine_id,
            "max_schedule_len": self.max_schedule_len,
            "schedules_checked": self.schedules_checked,
            "divergences": [
                {
                    "schedule": list(d.schedule),
                    "slot": d.slot,
                    "expected": d.expected,
                    "got": d.got,
                    "what": d.what,
                }
                for d in self.divergences
            ],
            "ok": self.ok,
        }


def expected_traces(
    machine: TwinMachine,
    inputs_by_slot: dict[int, list[int]],
    total_slots: int,
    latency_slots: int = 1,
    sync_period: int = 1,
) -> tuple[list[int], list[int], list[int]]:
    """Pure fold: per-slot (physical state, physical key, replica key).

    The replica's expected key at the end of slot t is the physical key at
    the newest sync emission old enough to have been delivered, i.e. the
    last multiple of the period at or before t - latency.
    """
    state = machine.initial
    key = machine.initial
    phys_state, phys_key = [], []
    for slot in range(total_slots):
        for sym in inputs_by_slot.get(slot, []):
            state = machine.transitions[(state, sym)]
            if state in machine.key_states:
                key = state
        phys_state.append(state)
        phys_key.append(key)
    replica = []
    for slot in range(total_slots):
        horizon = slot - latency_slots
        if horizon < 0:
            replica.append(machine.initial)
        else:
            emission = (horizon // sync_period) * sync_period
            replica.append(phys_key[emission])
    return phys_state, phys_key, replica


def build_schedule_scenario(
    machine: TwinMachine, schedule: tuple[int, ...], seed: int = 0
) -> ScenarioSpec:
    """Attack-free scenario applying one input per slot starting at slot 1."""
    total = len(schedule) + 2
    return ScenarioSpec(
        machine=machine,
        total_slots=total,
        name="oracle",
        operator_inputs_physical=[(slot + 1, sym) for slot, sym in enumerate(schedule)],
        channels={
            Direction.PHYS_TO_VIRT: ChannelConfig(),
            Direction.VIRT_TO_PHYS: ChannelConfig(),
        },
        seed=seed,
    )


def oracle_check(
    machine: TwinMachine, max_schedule_len: int, max_states: int = 6
) -> OracleReport:
    """Diff the full stack against the closed form on every schedule up to the cap."""
    if max_schedule_len > 8:
        raise ValueError("exhaustive enumeration capped at schedule length 8")
    if len(machine.states) > max_states or len(machine.inputs) > 3:
        raise ValueError(
            f"oracle_check is for small machines "
            f"(<= {max_states} states, <= 3 inputs)"
        )
    result = validate_machine(machine)
    if not result.ok:
        raise ValueError(f"machine does not validate: {result.errors}")

    report = OracleReport(machine_id=machine.machine_id, max_schedule_len=max_schedule_len)
    symbols = sorted(machine.inputs)
    for length in range(max_schedule_len + 1):
        for schedule in product(symbols, repeat=length):
            report.schedules_checked += 1
            _check_one(machine, schedule, report)
    return report


def _check_one(
    machine: TwinMachine, schedule: tuple[int, ...], report: OracleReport
) -> None:
    spec = build_schedule_scenario(machine, schedule)
    inputs_by_slot = {slot + 1: [sym] for slot, sym in enumerate(schedule)}
    exp_state, exp_key, exp_replica = expected_traces(
        machine, inputs_by_slot, spec.total_slots
    )
    run = run_scenario(spec)
    for row in run.slots:
        slot = row["slot"]
        if row["physical_state"] != exp_state[slot]:
            report.divergences.append(
                Divergence(schedule, slot, exp_state[slot], row["physical_state"], "physical_state")
            )
        if row["physical_key_state"] != exp_key[slot]:
            report.divergences.append(
                Divergence(schedule, slot, exp_key[slot], row["physical_key_state"], "physical_key")
            )
        if row["replica_key_state"] != exp_replica[slot]:
            report.divergences.append(
                Divergence(schedule, slot, exp_replica[slot], row["replica_key_state"], "replica_key")
            )
    if run.detection_events:
        report.divergences.append(
            Divergence(schedule, -1, 0, len(run.detection_events), "unexpected_detection_events")
        )
