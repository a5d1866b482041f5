"""Authenticated wire format for twin synchronization traffic.

Frame layout, all integers big-endian:

    [0..2)    magic 0x44 0x54
    [2]       version (1)
    [3]       msg_type: 1 STATE_SYNC, 2 COMMAND, 3 ACK
    [4..8)    sender_id  u32
    [8..16)   session_id u64
    [16..24)  seq        u64
    [24..32)  slot       u64
    [32..34)  payload_len u16
    [34..34+L)    payload
    [34+L..66+L)  tag = HMAC-SHA-256(key, bytes[0 .. 34+L))

The tag covers header and payload, so the shortest valid frame is 66 bytes.
decode_frame checks the tag before anything else: any bit flipped anywhere in
a frame therefore fails authentication rather than surfacing as a parse
error, and structural checks only ever run on authentic bytes.  Sequence
numbers are per sender and session, start at 1, and must increase on every
accepted frame; a frame from an older session is treated the same as a stale
sequence number.  The tracker is updated only when the whole decode succeeds.
"""

from __future__ import annotations

import hashlib
import hmac
import struct
from dataclasses import dataclass
from enum import Enum, IntEnum

from .sync import CommandRecord, DeltaRecord

MAGIC = b"\x44\x54"
VERSION = 1
HEADER_LEN = 34
TAG_LEN = 32
MIN_FRAME_LEN = HEADER_LEN + TAG_LEN
MAX_PAYLOAD_LEN = 0xFFFF

HEADER_STRUCT = struct.Struct(">2sBBIQQQH")


class MsgType(IntEnum):
    STATE_SYNC = 1
    COMMAND = 2
    ACK = 3


class PayloadTooLarge(ValueError):
    pass


class MalformedPayload(ValueError):
    """An authenticated payload that does not parse as its message type."""


@dataclass(frozen=True)
class Frame:
    msg_type: int
    sender_id: int
    session_id: int
    seq: int
    slot: int
    payload: bytes = b""


class ChannelErrorKind(str, Enum):
    MALFORMED = "malformed"
    AUTH_FAIL = "auth_fail"
    REPLAY = "replay"


@dataclass(frozen=True)
class ChannelError:
    """Rejected frame, described for the detector. Carries the claimed slot when parseable."""

    kind: ChannelErrorKind
    reason: str
    slot: int | None = None
    sender_id: int | None = None
    seq: int | None = None


@dataclass
class _PeerState:
    session_id: int = 0
    highest_seq: int = 0


class SequenceTracker:
    """Per-sender replay window: highest accepted seq within the current session."""

    def __init__(self) -> None:
        self._peers: dict[int, _PeerState] = {}

    def validate(self, sender_id: int, session_id: int, seq: int) -> str | None:
        peer = self._peers.get(sender_id, _PeerState())
        if session_id < peer.session_id:
            return f"session {session_id} older than current session {peer.session_id}"
        if session_id == peer.session_id and seq <= peer.highest_seq:
            return f"seq {seq} not above highest accepted seq {peer.highest_seq}"
        if seq < 1:
            return f"seq {seq} below initial value 1"
        return None

    def commit(self, sender_id: int, session_id: int, seq: int) -> None:
        self._peers[sender_id] = _PeerState(session_id=session_id, highest_seq=seq)

    def peer(self, sender_id: int) -> tuple[int, int]:
        peer = self._peers.get(sender_id, _PeerState())
        return peer.session_id, peer.highest_seq


def _tag(key: bytes, body: bytes) -> bytes:
    return hmac.new(key, body, hashlib.sha256).digest()


def encode_frame(frame: Frame, key: bytes) -> bytes:
    if len(frame.payload) > MAX_PAYLOAD_LEN:
        raise PayloadTooLarge(f"payload of {len(frame.payload)} bytes exceeds u16 length")
    body = HEADER_STRUCT.pack(
        MAGIC,
        VERSION,
        frame.msg_type,
        frame.sender_id,
        frame.session_id,
        frame.seq,
        frame.slot,
        len(frame.payload),
    ) + frame.payload
    return body + _tag(key, body)


def _claimed_header(data: bytes) -> tuple[int | None, int | None, int | None]:
    # Best-effort header fields for error reports; the bytes may be garbage.
    if len(data) < HEADER_LEN:
        return None, None, None
    _, _, _, sender_id, _, seq, slot, _ = HEADER_STRUCT.unpack_from(data)
    return slot, sender_id, seq


def decode_frame(
    data: bytes, key: bytes, tracker: SequenceTracker
) -> Frame | ChannelError:
    """Authenticate, parse, and replay-check one frame.

    Returns the Frame on success (tracker advanced), otherwise a ChannelError
    and the tracker is left untouched.
    """
    slot, sender, seq = _claimed_header(data)
    if len(data) < MIN_FRAME_LEN:
        return ChannelError(
            kind=ChannelErrorKind.MALFORMED,
            reason=f"frame of {len(data)} bytes shorter than minimum {MIN_FRAME_LEN}",
        )
    body, tag = data[:-TAG_LEN], data[-TAG_LEN:]
    if not hmac.compare_digest(_tag(key, body), tag):
        return ChannelError(
            kind=ChannelErrorKind.AUTH_FAIL,
            reason="tag mismatch",
            slot=slot,
            sender_id=sender,
            seq=seq,
        )

    magic, version, msg_type, sender_id, session_id, seq_n, slot_n, payload_len = (
        HEADER_STRUCT.unpack_from(body)
    )
    if magic != MAGIC:
        return ChannelError(ChannelErrorKind.MALFORMED, "bad magic", slot_n, sender_id, seq_n)
    if version != VERSION:
        return ChannelError(
            ChannelErrorKind.MALFORMED, f"unsupported version {version}", slot_n, sender_id, seq_n
        )
    if msg_type not in (MsgType.STATE_SYNC, MsgType.COMMAND, MsgType.ACK):
        return ChannelError(
            ChannelErrorKind.MALFORMED, f"unknown msg_type {msg_type}", slot_n, sender_id, seq_n
        )
    if payload_len != len(data) - MIN_FRAME_LEN:
        return ChannelError(
            ChannelErrorKind.MALFORMED,
            f"payload_len {payload_len} does not match frame size",
            slot_n,
            sender_id,
            seq_n,
        )

    stale = tracker.validate(sender_id, session_id, seq_n)
    if stale is not None:
        return ChannelError(ChannelErrorKind.REPLAY, stale, slot_n, sender_id, seq_n)
    tracker.commit(sender_id, session_id, seq_n)
    return Frame(
        msg_type=msg_type,
        sender_id=sender_id,
        session_id=session_id,
        seq=seq_n,
        slot=slot_n,
        payload=body[HEADER_LEN:],
    )


# Payload codecs. These run on authenticated bytes only, so failures raise
# rather than flow back as channel errors.

def encode_delta_payload(record: DeltaRecord) -> bytes:
    n = len(record.applied_inputs)
    if 10 + 4 * n > MAX_PAYLOAD_LEN:
        raise PayloadTooLarge(f"{n} inputs do not fit in one frame")
    return struct.pack(">IIH", record.base_state, record.result_state, n) + struct.pack(
        f">{n}I" if n else ">", *record.applied_inputs
    )


def decode_delta_payload(data: bytes, slot: int) -> DeltaRecord:
    if len(data) < 10:
        raise MalformedPayload(f"delta payload of {len(data)} bytes truncated")
    base, result, n = struct.unpack_from(">IIH", data)
    if len(data) != 10 + 4 * n:
        raise MalformedPayload(
            f"delta payload length {len(data)} does not match {n} declared inputs"
        )
    inputs = struct.unpack_from(f">{n}I", data, 10) if n else ()
    return DeltaRecord(base_state=base, result_state=result, applied_inputs=inputs, slot=slot)


def encode_command_payload(record: CommandRecord) -> bytes:
    n = len(record.inputs)
    if n == 0:
        raise ValueError("command must carry at least one input")
    if 10 + 4 * n > MAX_PAYLOAD_LEN:
        raise PayloadTooLarge(f"{n} inputs do not fit in one frame")
    return (
        struct.pack(">H", n)
        + struct.pack(f">{n}I", *record.inputs)
        + struct.pack(">Q", record.issued_slot)
    )


def decode_command_payload(data: bytes) -> CommandRecord:
    if len(data) < 2:
        raise MalformedPayload(f"command payload of {len(data)} bytes truncated")
    (n,) = struct.unpack_from(">H", data)
    if n == 0:
        raise MalformedPayload("command payload with empty input list")
    if len(data) != 2 + 4 * n + 8:
        raise MalformedPayload(
            f"command payload length {len(data)} does not match {n} declared inputs"
        )
    inputs = struct.unpack_from(f">{n}I", data, 2)
    (issued_slot,) = struct.unpack_from(">Q", data, 2 + 4 * n)
    return CommandRecord(inputs=inputs, issued_slot=issued_slot)


def encode_ack_payload(acked_seq: int) -> bytes:
    return struct.pack(">Q", acked_seq)


def decode_ack_payload(data: bytes) -> int:
    if len(data) != 8:
        raise MalformedPayload(f"ack payload must be 8 bytes, got {len(data)}")
    return struct.unpack(">Q", data)[0]
