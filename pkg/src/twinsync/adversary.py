"""Channel-controlling adversary without key material.

The adversary sits in the delivery path of both channels and can delete,
insert, modify, and replay frames.  It observes every frame that passes
through (captures are append-only) but cannot compute valid tags, so
anything it fabricates or mutates is detectable downstream.  Attack actions
are scheduled per (slot, direction) by the scenario.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum

from .frames import HEADER_LEN, HEADER_STRUCT, MAGIC, TAG_LEN, VERSION
from .netsim import Direction, SplitMix64


class AdversaryError(Exception):
    """Scenario authoring error discovered while applying an attack."""


class ReplayReferenceMissing(AdversaryError):
    pass


class AttackTargetMissing(AdversaryError):
    pass


class AttackKind(str, Enum):
    DELETE = "DELETE"
    INSERT = "INSERT"
    MODIFY = "MODIFY"
    REPLAY = "REPLAY"


@dataclass(frozen=True)
class AttackAction:
    kind: AttackKind
    slot: int
    direction: Direction
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "slot": self.slot,
            "direction": self.direction.value,
            "params": dict(sorted(self.params.items())),
        }


@dataclass(frozen=True)
class CapturedFrame:
    slot: int
    direction: Direction
    index: int
    data: bytes


class CaptureLog:
    """Append-only log of frames the adversary has seen in flight."""

    def __init__(self) -> None:
        self.frames: list[CapturedFrame] = []
        self._by_ref: dict[tuple[int, Direction, int], bytes] = {}

    def add(self, slot: int, direction: Direction, index: int, data: bytes) -> None:
        self.frames.append(CapturedFrame(slot, direction, index, data))
        self._by_ref[(slot, direction, index)] = data

    def lookup(self, slot: int, direction: Direction, index: int) -> bytes | None:
        return self._by_ref.get((slot, direction, index))


def forge_frame_bytes(template: dict, rng: SplitMix64) -> bytes:
    """Structurally valid frame with an attacker-chosen header and a random tag."""
    payload = bytes.fromhex(template.get("payload_hex", ""))
    body = HEADER_STRUCT.pack(
        MAGIC,
        VERSION,
        int(template.get("msg_type", 1)),
        int(template.get("sender_id", 0)),
        int(template.get("session_id", 0)),
        int(template.get("seq", 1)),
        int(template.get("slot", 0)),
        len(payload),
    ) + payload
    tag = b"".join(struct.pack(">Q", rng.next_u64()) for _ in range(4))
    return body + tag


class Adversary:
    """Applies scheduled attack actions to each due batch of frames.

    Every incoming frame is captured before any action runs, so a replay may
    reference a frame from the very batch it is injected into.
    """

    def __init__(self, actions: list[AttackAction], rng: SplitMix64):
        self.actions = list(actions)
        self.rng = rng
        self.captures = CaptureLog()
        self.applied: list[tuple[int, AttackAction]] = []

    def intercept(self, slot: int, direction: Direction, frames: list[bytes]) -> list[bytes]:
        for index, data in enumerate(frames):
            self.captures.add(slot, direction, index, data)
        out = list(frames)
        for action in self.actions:
            if action.slot != slot or action.direction != direction:
                continue
            out = self._apply(action, slot, out)
            self.applied.append((slot, action))
        return out

    def _apply(self, action: AttackAction, slot: int, frames: list[bytes]) -> list[bytes]:
        params = action.params
        if action.kind == AttackKind.DELETE:
            index = int(params.get("index", 0))
            if index >= len(frames):
                raise AttackTargetMissing(
                    f"DELETE at slot {slot} on {action.direction.value}: "
                    f"no frame at index {index}"
                )
            return frames[:index] + frames[index + 1 :]

        if action.kind == AttackKind.MODIFY:
            index = int(params.get("index", 0))
            if index >= len(frames):
                raise AttackTargetMissing(
                    f"MODIFY at slot {slot} on {action.direction.value}: "
                    f"no frame at index {index}"
                )
            frames = list(frames)
            frames[index] = self._mutate(frames[index], params, slot, action)
            return frames

        if action.kind == AttackKind.INSERT:
            if "raw_hex" in params:
                forged = bytes.fromhex(params["raw_hex"])
            else:
                forged = forge_frame_bytes(params.get("template", {}), self.rng)
            return frames + [forged]

        if action.kind == AttackKind.REPLAY:
            ref_slot = int(params["capture_slot"])
            ref_index = int(params.get("capture_index", 0))
            data = self.captures.lookup(ref_slot, action.direction, ref_index)
            if data is None:
                raise ReplayReferenceMissing(
                    f"REPLAY at slot {slot} references uncaptured frame "
                    f"({ref_slot}, {action.direction.value}, {ref_index})"
                )
            return frames + [data]

        raise AdversaryError(f"unknown attack kind {action.kind!r}")

    def _mutate(self, data: bytes, params: dict, slot: int, action: AttackAction) -> bytes:
        if "payload_hex" in params:
            # Splice in a new payload and fix the declared length; the tag is
            # left as it was, which is the point: the adversary cannot redo it.
            new_payload = bytes.fromhex(params["payload_hex"])
            if len(data) < HEADER_LEN + TAG_LEN:
                raise AttackTargetMissing(
                    f"MODIFY at slot {slot}: frame too short to carry a payload"
                )
            header = bytearray(data[:HEADER_LEN])
            struct.pack_into(">H", header, 32, len(new_payload))
            return bytes(header) + new_payload + data[-TAG_LEN:]
        offset = int(params["byte_offset"])
        mask = int(params["xor_mask"])
        if offset >= len(data):
            raise AttackTargetMissing(
                f"MODIFY at slot {slot}: byte_offset {offset} outside a "
                f"{len(data)}-byte frame"
            )
        mutated = bytearray(data)
        mutated[offset] ^= mask & 0xFF
        return bytes(mutated)
