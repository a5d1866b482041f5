"""Shared fixtures: reference machines and an independent HMAC oracle."""

from __future__ import annotations

import hashlib

import pytest

from twinsync.machine import TwinMachine, machine_from_dict
from twinsync.scenario import load_fixture_json

HEAT = 1
IDLE = 2
COOL = 3


@pytest.fixture
def kettle() -> TwinMachine:
    return machine_from_dict(load_fixture_json("kettle"))


@pytest.fixture
def kettle_cool(kettle: TwinMachine) -> TwinMachine:
    """Kettle extended with a COOL input: 25 degrees down, floor at 0."""
    doc = load_fixture_json("kettle")
    doc["machine_id"] = "kettle_cool"
    doc["inputs"].append(COOL)
    doc["labels"]["inputs"][str(COOL)] = "COOL"
    for state in doc["states"]:
        doc["delta"].append([state, COOL, max(state - 25, 0)])
    return machine_from_dict(doc)


def _machine(machine_id, states, inputs, initial, key_states, delta) -> TwinMachine:
    return machine_from_dict(
        {
            "machine_id": machine_id,
            "states": states,
            "inputs": inputs,
            "initial": initial,
            "key_states": key_states,
            "delta": delta,
        }
    )


@pytest.fixture
def four_state_machines() -> list[TwinMachine]:
    """Three fixed 4-state machines with different shapes of key-state sets."""
    ring = _machine(
        "ring4",
        states=[0, 1, 2, 3],
        inputs=[1, 2],
        initial=0,
        key_states=[0, 2],
        delta=[[s, 1, (s + 1) % 4] for s in range(4)]
        + [[s, 2, (s - 1) % 4] for s in range(4)],
    )
    ladder = _machine(
        "ladder4",
        states=[0, 1, 2, 3],
        inputs=[1, 2],
        initial=0,
        key_states=[0, 3],
        delta=[[s, 1, min(s + 1, 3)] for s in range(4)] + [[s, 2, 0] for s in range(4)],
    )
    stride = _machine(
        "stride4",
        states=[0, 1, 2, 3],
        inputs=[1, 2, 3],
        initial=0,
        key_states=[0, 1],
        delta=[[s, 1, (s + 1) % 4] for s in range(4)]
        + [[s, 2, (s + 2) % 4] for s in range(4)]
        + [[s, 3, s] for s in range(4)],
    )
    return [ring, ladder, stride]


def manual_hmac_sha256(key: bytes, msg: bytes) -> bytes:
    """RFC 2104 construction built by hand; the reference the encoder is diffed against."""
    block = 64
    if len(key) > block:
        key = hashlib.sha256(key).digest()
    key = key.ljust(block, b"\x00")
    ipad = bytes(b ^ 0x36 for b in key)
    opad = bytes(b ^ 0x5C for b in key)
    return hashlib.sha256(opad + hashlib.sha256(ipad + msg).digest()).digest()
