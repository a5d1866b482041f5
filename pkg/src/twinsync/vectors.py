"""Golden wire-format vectors.

Three canonical frames pin the byte layout and the tag construction: an
all-zero-fields frame under the all-zero key, a STATE_SYNC frame carrying a
four-input delta, and a two-input COMMAND frame.  The encoder must reproduce
them byte for byte; any drift in field order, widths, endianness, or the MAC
construction shows up as a vector mismatch.

The vector file format is plain text, one lowercase hex frame per line.
"""

from __future__ import annotations

from dataclasses import dataclass

from .frames import (
    Frame,
    MsgType,
    encode_command_payload,
    encode_delta_payload,
    encode_frame,
)
from .sync import CommandRecord, DeltaRecord


@dataclass(frozen=True)
class GoldenVector:
    description: str
    key: bytes
    frame: Frame


GOLDEN_VECTORS: tuple[GoldenVector, ...] = (
    GoldenVector(
        description="empty payload, all header fields zero, zero key",
        key=bytes(32),
        frame=Frame(msg_type=0, sender_id=0, session_id=0, seq=0, slot=0, payload=b""),
    ),
    GoldenVector(
        description="state sync carrying a four-input delta",
        key=bytes(range(32)),
        frame=Frame(
            msg_type=MsgType.STATE_SYNC,
            sender_id=1,
            session_id=1,
            seq=1,
            slot=4,
            payload=encode_delta_payload(
                DeltaRecord(base_state=0, result_state=100, applied_inputs=(1, 1, 1, 1), slot=4)
            ),
        ),
    ),
    GoldenVector(
        description="command carrying two inputs",
        key=b"\xff" * 32,
        frame=Frame(
            msg_type=MsgType.COMMAND,
            sender_id=2,
            session_id=1,
            seq=7,
            slot=9,
            payload=encode_command_payload(CommandRecord(inputs=(1, 2), issued_slot=9)),
        ),
    ),
)


class VectorMismatch(Exception):
    def __init__(self, line: int, byte_offset: int | None, reason: str):
        self.line = line
        self.byte_offset = byte_offset
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


def golden_frame_bytes() -> list[bytes]:
    return [encode_frame(v.frame, v.key) for v in GOLDEN_VECTORS]


def emit_golden_vectors(path: str) -> int:
    """Write the canonical vectors; returns the number of lines written."""
    frames = golden_frame_bytes()
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for data in frames:
            fh.write(data.hex() + "\n")
    return len(frames)


def verify_golden_vectors(path: str) -> int:
    """Check a vector file byte for byte; returns the number of frames verified."""
    with open(path, "r", encoding="ascii") as fh:
        lines = [line.strip() for line in fh if line.strip()]
    expected = golden_frame_bytes()
    if len(lines) != len(expected):
        raise VectorMismatch(
            line=len(lines) + 1,
            byte_offset=None,
            reason=f"expected {len(expected)} frames, file has {len(lines)}",
        )
    for lineno, (line, want) in enumerate(zip(lines, expected), start=1):
        try:
            got = bytes.fromhex(line)
        except ValueError as exc:
            raise VectorMismatch(lineno, None, f"not valid hex: {exc}") from exc
        if got != want:
            offset = next(
                (i for i, (a, b) in enumerate(zip(got, want)) if a != b),
                min(len(got), len(want)),
            )
            raise VectorMismatch(
                lineno,
                offset,
                f"frame differs from the canonical encoding at byte {offset}",
            )
    return len(expected)
