"""Scenario documents: one JSON object describes a whole simulated run.

A scenario names the machine (inline or a bundled fixture), the channel
parameters and keys, the operator input schedules for both sides, the attack
schedule, and the run length.  Validation is strict and collects every
problem it can find; a scenario that parses is guaranteed to run.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

from .adversary import AttackAction, AttackKind
from .machine import (
    MachineFormatError,
    TwinMachine,
    machine_from_dict,
    machine_to_dict,
    validate_machine,
)
from .netsim import Direction

DEFAULT_KEYS = {
    Direction.PHYS_TO_VIRT: bytes(range(32)),
    Direction.VIRT_TO_PHYS: bytes(range(32, 64)),
}
BUNDLED_FIXTURES = ("kettle", "fig4_walkthrough", "attack_matrix")


class ScenarioInvalid(Exception):
    """Carries every field-level problem found in a scenario document."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class ChannelConfig:
    latency_slots: int = 1
    drop_probability: float = 0.0


@dataclass
class ScenarioSpec:
    machine: TwinMachine
    total_slots: int
    name: str = ""
    sync_period_slots: int = 1
    channels: dict[Direction, ChannelConfig] = field(default_factory=dict)
    keys: dict[Direction, bytes] = field(default_factory=dict)
    session_id: int = 1
    operator_inputs_physical: list[tuple[int, int]] = field(default_factory=list)
    operator_inputs_virtual: list[tuple[int, int]] = field(default_factory=list)
    attacks: list[AttackAction] = field(default_factory=list)
    seed: int = 0
    grace_slots: int = 1

    def __post_init__(self) -> None:
        for direction in Direction:
            self.channels.setdefault(direction, ChannelConfig())
            self.keys.setdefault(direction, DEFAULT_KEYS[direction])

    def to_dict(self) -> dict:
        """Normalized echo with all defaults materialized."""
        return {
            "name": self.name,
            "machine": machine_to_dict(self.machine),
            "total_slots": self.total_slots,
            "sync_period_slots": self.sync_period_slots,
            "channels": {
                d.value: {
                    "latency_slots": self.channels[d].latency_slots,
                    "drop_probability": self.channels[d].drop_probability,
                }
                for d in Direction
            },
            "keys": {d.value: self.keys[d].hex() for d in Direction},
            "session_id": self.session_id,
            "operator_inputs_physical": [list(p) for p in self.operator_inputs_physical],
            "operator_inputs_virtual": [list(p) for p in self.operator_inputs_virtual],
            "attacks": [a.to_dict() for a in self.attacks],
            "seed": self.seed,
            "grace_slots": self.grace_slots,
        }


def fixture_path(name: str):
    return resources.files("twinsync").joinpath("fixtures", name)


def load_fixture_json(name: str) -> dict:
    with fixture_path(name + ".json").open("r", encoding="utf-8") as fh:
        return json.load(fh)


def resolve_machine(spec: object, problems: list[str]) -> TwinMachine | None:
    if isinstance(spec, str):
        if spec not in BUNDLED_FIXTURES:
            problems.append(f"machine: no bundled fixture named {spec!r}")
            return None
        doc = load_fixture_json(spec)
        if "machine" in doc:  # scenario fixtures embed or name their machine
            inner = doc["machine"]
            if isinstance(inner, str):
                return resolve_machine(inner, problems)
            doc = inner
        spec = doc
    if not isinstance(spec, dict):
        problems.append("machine: must be a fixture name or an inline definition object")
        return None
    try:
        machine = machine_from_dict(spec)
    except MachineFormatError as exc:
        problems.append(f"machine: {exc}")
        return None
    result = validate_machine(machine)
    for issue in result.errors:
        problems.append(f"machine: {issue.code}: {issue.message}")
    return machine if result.ok else None


def _uint(obj: dict, key: str, problems: list[str], default: int | None = None,
          minimum: int = 0, maximum: int | None = None) -> int | None:
    if key not in obj:
        if default is None:
            problems.append(f"{key}: required")
            return None
        return default
    val = obj[key]
    if not isinstance(val, int) or isinstance(val, bool):
        problems.append(f"{key}: must be an integer")
        return default
    if val < minimum or (maximum is not None and val > maximum):
        hi = f" and <= {maximum}" if maximum is not None else ""
        problems.append(f"{key}: must be >= {minimum}{hi}")
        return default
    return val


def _parse_channels(obj: dict, problems: list[str]) -> dict[Direction, ChannelConfig]:
    channels: dict[Direction, ChannelConfig] = {}
    raw = obj.get("channels", {})
    if not isinstance(raw, dict):
        problems.append("channels: must be an object keyed by direction")
        return channels
    for key in raw:
        if key not in (d.value for d in Direction):
            problems.append(f"channels.{key}: unknown direction")
    for direction in Direction:
        cfg = raw.get(direction.value, {})
        if not isinstance(cfg, dict):
            problems.append(f"channels.{direction.value}: must be an object")
            continue
        latency = _uint(cfg, "latency_slots", problems, default=1)
        drop = cfg.get("drop_probability", 0.0)
        if not isinstance(drop, (int, float)) or isinstance(drop, bool) or not 0 <= drop <= 1:
            problems.append(
                f"channels.{direction.value}.drop_probability: must be in [0, 1]"
            )
            drop = 0.0
        channels[direction] = ChannelConfig(
            latency_slots=latency if latency is not None else 1,
            drop_probability=float(drop),
        )
    return channels


def _parse_keys(obj: dict, problems: list[str]) -> dict[Direction, bytes]:
    keys: dict[Direction, bytes] = {}
    raw = obj.get("keys", {})
    if not isinstance(raw, dict):
        problems.append("keys: must be an object keyed by direction")
        return keys
    for direction in Direction:
        if direction.value not in raw:
            keys[direction] = DEFAULT_KEYS[direction]
            continue
        val = raw[direction.value]
        try:
            if not isinstance(val, str):
                raise ValueError("not a string")
            decoded = bytes.fromhex(val)
            if not decoded:
                raise ValueError("empty")
            keys[direction] = decoded
        except ValueError:
            problems.append(f"keys.{direction.value}: must be a nonempty hex string")
    return keys


def _parse_inputs(
    obj: dict, key: str, machine: TwinMachine | None, total_slots: int | None,
    problems: list[str],
) -> list[tuple[int, int]]:
    out: list[tuple[int, int]] = []
    raw = obj.get(key, [])
    if not isinstance(raw, list):
        problems.append(f"{key}: must be a list of [slot, input] pairs")
        return out
    for i, pair in enumerate(raw):
        if (
            not isinstance(pair, list)
            or len(pair) != 2
            or not all(isinstance(v, int) and not isinstance(v, bool) and v >= 0 for v in pair)
        ):
            problems.append(f"{key}[{i}]: must be a [slot, input] pair of unsigned integers")
            continue
        slot, sym = pair
        if total_slots is not None and slot >= total_slots:
            problems.append(f"{key}[{i}]: slot {slot} outside the run of {total_slots} slots")
        if machine is not None and sym not in machine.inputs:
            problems.append(f"{key}[{i}]: input {sym} not defined by the machine")
        out.append((slot, sym))
    out.sort(key=lambda p: p[0])
    return out


_ATTACK_PARAM_KEYS = {
    AttackKind.DELETE: {"index"},
    AttackKind.MODIFY: {"index", "byte_offset", "xor_mask", "payload_hex"},
    AttackKind.INSERT: {"raw_hex", "template"},
    AttackKind.REPLAY: {"capture_slot", "capture_index"},
}


def _parse_attacks(
    obj: dict, total_slots: int | None, problems: list[str]
) -> list[AttackAction]:
    out: list[AttackAction] = []
    raw = obj.get("attacks", [])
    if not isinstance(raw, list):
        problems.append("attacks: must be a list")
        return out
    for i, entry in enumerate(raw):
        where = f"attacks[{i}]"
        if not isinstance(entry, dict):
            problems.append(f"{where}: must be an object")
            continue
        try:
            kind = AttackKind(entry.get("kind"))
        except ValueError:
            problems.append(f"{where}.kind: must be one of {[k.value for k in AttackKind]}")
            continue
        try:
            direction = Direction(entry.get("direction"))
        except ValueError:
            problems.append(
                f"{where}.direction: must be one of {[d.value for d in Direction]}"
            )
            continue
        slot = _uint(entry, "slot", problems)
        if slot is None:
            continue
        if total_slots is not None and slot >= total_slots:
            problems.append(f"{where}.slot: {slot} outside the run of {total_slots} slots")
        params = entry.get("params", {})
        if not isinstance(params, dict):
            problems.append(f"{where}.params: must be an object")
            continue
        unknown = set(params) - _ATTACK_PARAM_KEYS[kind]
        if unknown:
            problems.append(
                f"{where}.params: unknown keys for {kind.value}: {sorted(unknown)}"
            )
        if kind is AttackKind.REPLAY:
            if "capture_slot" not in params:
                problems.append(f"{where}.params.capture_slot: required for REPLAY")
            elif slot is not None and int(params["capture_slot"]) > slot:
                problems.append(
                    f"{where}.params.capture_slot: cannot replay a frame captured "
                    f"after the attack slot"
                )
        if kind is AttackKind.MODIFY:
            if "payload_hex" not in params and (
                "byte_offset" not in params or "xor_mask" not in params
            ):
                problems.append(
                    f"{where}.params: MODIFY needs byte_offset and xor_mask, "
                    f"or payload_hex"
                )
        if kind is AttackKind.INSERT and "raw_hex" in params:
            try:
                bytes.fromhex(params["raw_hex"])
            except (TypeError, ValueError):
                problems.append(f"{where}.params.raw_hex: must be a hex string")
        out.append(AttackAction(kind=kind, slot=slot, direction=direction, params=params))
    return out


def scenario_from_dict(obj: dict) -> ScenarioSpec:
    if not isinstance(obj, dict):
        raise ScenarioInvalid(["scenario document must be an object"])
    problems: list[str] = []

    machine = None
    if "machine" not in obj:
        problems.append("machine: required")
    else:
        machine = resolve_machine(obj["machine"], problems)

    total_slots = _uint(obj, "total_slots", problems, minimum=1)
    sync_period = _uint(obj, "sync_period_slots", problems, default=1, minimum=1)
    session_id = _uint(obj, "session_id", problems, default=1, minimum=1)
    grace = _uint(obj, "grace_slots", problems, default=1)
    seed = _uint(obj, "seed", problems, default=0, maximum=2**64 - 1)
    channels = _parse_channels(obj, problems)
    keys = _parse_keys(obj, problems)
    phys_inputs = _parse_inputs(obj, "operator_inputs_physical", machine, total_slots, problems)
    virt_inputs = _parse_inputs(obj, "operator_inputs_virtual", machine, total_slots, problems)
    attacks = _parse_attacks(obj, total_slots, problems)
    name = obj.get("name", "")
    if not isinstance(name, str):
        problems.append("name: must be a string")
        name = ""

    if problems or machine is None or total_slots is None:
        raise ScenarioInvalid(problems or ["scenario invalid"])
    return ScenarioSpec(
        machine=machine,
        total_slots=total_slots,
        name=name,
        sync_period_slots=sync_period,
        channels=channels,
        keys=keys,
        session_id=session_id,
        operator_inputs_physical=phys_inputs,
        operator_inputs_virtual=virt_inputs,
        attacks=attacks,
        seed=seed,
        grace_slots=grace,
    )


def load_scenario_file(path: str) -> ScenarioSpec:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ScenarioInvalid([f"cannot read {path}: {exc}"]) from exc
    except json.JSONDecodeError as exc:
        raise ScenarioInvalid([f"{path} is not valid JSON: {exc}"]) from exc
    return scenario_from_dict(doc)


def load_bundled_scenario(name: str) -> ScenarioSpec:
    return scenario_from_dict(load_fixture_json(name))
