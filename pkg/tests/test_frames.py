"""Wire format: golden vectors, tag-first decoding, replay tracking, payload codecs."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import manual_hmac_sha256
from twinsync.frames import (
    HEADER_STRUCT,
    MAGIC,
    MIN_FRAME_LEN,
    ChannelError,
    ChannelErrorKind,
    Frame,
    MalformedPayload,
    MsgType,
    PayloadTooLarge,
    SequenceTracker,
    decode_ack_payload,
    decode_command_payload,
    decode_delta_payload,
    decode_frame,
    encode_ack_payload,
    encode_command_payload,
    encode_delta_payload,
    encode_frame,
)
from twinsync.sync import CommandRecord, DeltaRecord
from twinsync.vectors import GOLDEN_VECTORS, golden_frame_bytes

# Frozen canonical encodings. Computed once with an independent HMAC
# construction (see manual_hmac_sha256) and pinned; the encoder must
# reproduce them byte for byte forever.
GOLDEN_HEX = (
    "4454010000000000000000000000000000000000000000000000000000000000"
    "00003fa573f43923db2156aa7097cdca5a48cc7ca00a2744f7dad7b9319a618f"
    "a75e",
    "4454010100000001000000000000000100000000000000010000000000000004"
    "001a000000000000006400040000000100000001000000010000000198e34bfb"
    "1955f140139d6e375fea4d8afbf4123fd6b869465753e359037f0eeb",
    "4454010200000002000000000000000100000000000000070000000000000009"
    "00120002000000010000000200000000000000091ade68c25a7e6d3b4824c9ce"
    "bfb104d752ea9272cf6187cc7a72e3d7b89c3c11",
)


class TestHmacReference:
    """The independent tag construction agrees with published HMAC-SHA-256 vectors."""

    def test_rfc4231_case_1(self):
        tag = manual_hmac_sha256(b"\x0b" * 20, b"Hi There")
        assert tag.hex() == (
            "b0344c61d8db38535ca8afceaf0bf12b881dc200c9833da726e9376c2e32cff7"
        )

    def test_rfc4231_case_2(self):
        tag = manual_hmac_sha256(b"Jefe", b"what do ya want for nothing?")
        assert tag.hex() == (
            "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843"
        )

    def test_long_key_is_hashed_first(self):
        tag = manual_hmac_sha256(b"\xaa" * 131, b"Test Using Larger Than Block-Size Key - Hash Key First")
        assert tag.hex() == (
            "60e431591ee0b67f0d8a26aacbf5b77f8e0bc6213728c5140546040f0ee37f54"
        )


class TestGoldenVectors:
    def test_encodings_are_pinned(self):
        assert [f.hex() for f in golden_frame_bytes()] == list(GOLDEN_HEX)

    def test_tags_match_independent_construction(self):
        for vector, data in zip(GOLDEN_VECTORS, golden_frame_bytes()):
            body, tag = data[:-32], data[-32:]
            assert tag == manual_hmac_sha256(vector.key, body)

    def test_minimum_frame_is_66_bytes(self):
        assert MIN_FRAME_LEN == 66
        assert len(bytes.fromhex(GOLDEN_HEX[0])) == 66

    def test_bundled_vector_file_matches(self):
        from twinsync.scenario import fixture_path
        from twinsync.vectors import verify_golden_vectors

        assert verify_golden_vectors(str(fixture_path("golden_frames.hex"))) == 3

    def test_zero_field_frame_is_not_a_protocol_frame(self):
        """Vector 1 pins layout and tag only; msg_type 0 never decodes to a Frame."""
        data = bytes.fromhex(GOLDEN_HEX[0])
        out = decode_frame(data, bytes(32), SequenceTracker())
        assert isinstance(out, ChannelError)
        assert out.kind is ChannelErrorKind.MALFORMED
        assert "msg_type" in out.reason


class TestDecode:
    def setup_method(self):
        self.key = bytes(range(32))
        self.frame = Frame(
            msg_type=MsgType.STATE_SYNC,
            sender_id=1,
            session_id=1,
            seq=1,
            slot=4,
            payload=encode_delta_payload(DeltaRecord(0, 100, (1, 1, 1, 1), 4)),
        )
        self.data = encode_frame(self.frame, self.key)

    def test_round_trip(self):
        out = decode_frame(self.data, self.key, SequenceTracker())
        assert out == self.frame

    def test_short_frame_is_malformed(self):
        out = decode_frame(self.data[:65], self.key, SequenceTracker())
        assert isinstance(out, ChannelError)
        assert out.kind is ChannelErrorKind.MALFORMED

    def test_empty_frame_is_malformed(self):
        out = decode_frame(b"", self.key, SequenceTracker())
        assert isinstance(out, ChannelError)
        assert out.kind is ChannelErrorKind.MALFORMED

    def test_wrong_key_fails_authentication(self):
        out = decode_frame(self.data, bytes(32), SequenceTracker())
        assert isinstance(out, ChannelError)
        assert out.kind is ChannelErrorKind.AUTH_FAIL

    @pytest.mark.parametrize("offset", [0, 2, 3, 16, 33, 34, 59, 91])
    @pytest.mark.parametrize("bit", [0, 7])
    def test_any_flipped_bit_fails_authentication(self, offset, bit):
        """Tag is checked first, so corruption is auth failure, not a parse error."""
        corrupted = bytearray(self.data)
        corrupted[offset] ^= 1 << bit
        out = decode_frame(bytes(corrupted), self.key, SequenceTracker())
        assert isinstance(out, ChannelError)
        assert out.kind is ChannelErrorKind.AUTH_FAIL

    def test_authentic_bad_magic_is_malformed(self):
        body = HEADER_STRUCT.pack(b"XX", 1, 1, 1, 1, 1, 4, 0)
        data = body + manual_hmac_sha256(self.key, body)
        out = decode_frame(data, self.key, SequenceTracker())
        assert isinstance(out, ChannelError)
        assert out.kind is ChannelErrorKind.MALFORMED
        assert out.reason == "bad magic"

    def test_authentic_bad_version_is_malformed(self):
        body = HEADER_STRUCT.pack(MAGIC, 2, 1, 1, 1, 1, 4, 0)
        data = body + manual_hmac_sha256(self.key, body)
        out = decode_frame(data, self.key, SequenceTracker())
        assert isinstance(out, ChannelError)
        assert out.kind is ChannelErrorKind.MALFORMED
        assert "version" in out.reason

    def test_authentic_length_field_mismatch_is_malformed(self):
        body = HEADER_STRUCT.pack(MAGIC, 1, 1, 1, 1, 1, 4, 5) + b"abc"
        data = body + manual_hmac_sha256(self.key, body)
        out = decode_frame(data, self.key, SequenceTracker())
        assert isinstance(out, ChannelError)
        assert out.kind is ChannelErrorKind.MALFORMED
        assert "payload_len" in out.reason

    def test_error_reports_carry_claimed_header_fields(self):
        out = decode_frame(self.data, bytes(32), SequenceTracker())
        assert isinstance(out, ChannelError)
        assert (out.slot, out.sender_id, out.seq) == (4, 1, 1)


class TestReplayProtection:
    def setup_method(self):
        self.key = b"\x07" * 32
        self.tracker = SequenceTracker()

    def _frame(self, seq, session=1, sender=1):
        return encode_frame(
            Frame(MsgType.ACK, sender, session, seq, slot=seq, payload=encode_ack_payload(0)),
            self.key,
        )

    def _decode(self, data):
        return decode_frame(data, self.key, self.tracker)

    def test_duplicate_delivery_is_replay(self):
        data = self._frame(seq=1)
        assert isinstance(self._decode(data), Frame)
        out = self._decode(data)
        assert isinstance(out, ChannelError)
        assert out.kind is ChannelErrorKind.REPLAY

    def test_stale_seq_is_replay(self):
        assert isinstance(self._decode(self._frame(seq=5)), Frame)
        out = self._decode(self._frame(seq=3))
        assert isinstance(out, ChannelError)
        assert out.kind is ChannelErrorKind.REPLAY

    def test_gaps_are_tolerated(self):
        assert isinstance(self._decode(self._frame(seq=1)), Frame)
        assert isinstance(self._decode(self._frame(seq=9)), Frame)

    def test_seq_zero_never_accepted(self):
        out = self._decode(self._frame(seq=0))
        assert isinstance(out, ChannelError)
        assert out.kind is ChannelErrorKind.REPLAY

    def test_session_restart_resets_the_window(self):
        assert isinstance(self._decode(self._frame(seq=5, session=1)), Frame)
        assert isinstance(self._decode(self._frame(seq=1, session=2)), Frame)

    def test_older_session_is_replay(self):
        assert isinstance(self._decode(self._frame(seq=1, session=2)), Frame)
        out = self._decode(self._frame(seq=9, session=1))
        assert isinstance(out, ChannelError)
        assert out.kind is ChannelErrorKind.REPLAY

    def test_senders_are_tracked_independently(self):
        assert isinstance(self._decode(self._frame(seq=1, sender=1)), Frame)
        assert isinstance(self._decode(self._frame(seq=1, sender=2)), Frame)

    def test_tracker_not_advanced_by_rejected_frames(self):
        corrupted = bytearray(self._frame(seq=3))
        corrupted[-1] ^= 0x01
        self._decode(bytes(corrupted))
        assert self.tracker.peer(1) == (0, 0)
        assert isinstance(self._decode(self._frame(seq=3)), Frame)


class TestPayloadCodecs:
    def test_four_input_delta_payload_layout(self):
        payload = encode_delta_payload(DeltaRecord(0, 100, (1, 1, 1, 1), slot=4))
        assert len(payload) == 26
        assert payload.hex() == "00000000000000640004" + "00000001" * 4

    def test_heartbeat_delta_payload_is_ten_bytes(self):
        payload = encode_delta_payload(DeltaRecord(100, 100, (), slot=7))
        assert payload.hex() == "0000006400000064" + "0000"

    def test_delta_round_trip(self):
        record = DeltaRecord(0, 100, (1, 2, 1), slot=11)
        assert decode_delta_payload(encode_delta_payload(record), slot=11) == record

    def test_truncated_delta_payload(self):
        payload = encode_delta_payload(DeltaRecord(0, 100, (1, 1, 1, 1), slot=4))
        with pytest.raises(MalformedPayload):
            decode_delta_payload(payload[:25], slot=4)

    def test_delta_payload_shorter_than_header(self):
        with pytest.raises(MalformedPayload):
            decode_delta_payload(b"\x00" * 9, slot=0)

    def test_delta_count_must_match_length(self):
        bad = bytes.fromhex("00000000000000640004" + "00000001" * 3)
        with pytest.raises(MalformedPayload):
            decode_delta_payload(bad, slot=4)

    def test_two_input_command_payload_layout(self):
        payload = encode_command_payload(CommandRecord(inputs=(1, 2), issued_slot=9))
        assert len(payload) == 18
        assert payload.hex() == "0002" + "00000001" + "00000002" + "0000000000000009"

    def test_command_round_trip(self):
        record = CommandRecord(inputs=(2,), issued_slot=3)
        assert decode_command_payload(encode_command_payload(record)) == record

    def test_empty_command_cannot_be_encoded(self):
        with pytest.raises(ValueError):
            encode_command_payload(CommandRecord(inputs=(), issued_slot=1))

    def test_zero_count_command_payload_rejected(self):
        with pytest.raises(MalformedPayload):
            decode_command_payload(bytes.fromhex("0000" + "0000000000000001"))

    def test_command_count_must_match_length(self):
        with pytest.raises(MalformedPayload):
            decode_command_payload(bytes.fromhex("0002" + "00000001" + "0000000000000009"))

    def test_ack_payload(self):
        assert encode_ack_payload(3).hex() == "0000000000000003"
        assert decode_ack_payload(encode_ack_payload(3)) == 3

    def test_ack_payload_wrong_size(self):
        with pytest.raises(MalformedPayload):
            decode_ack_payload(b"\x00" * 7)

    def test_oversized_payload_rejected_at_encode(self):
        frame = Frame(MsgType.STATE_SYNC, 1, 1, 1, 1, payload=b"\x00" * 65536)
        with pytest.raises(PayloadTooLarge):
            encode_frame(frame, bytes(32))


@given(
    msg_type=st.sampled_from([MsgType.STATE_SYNC, MsgType.COMMAND, MsgType.ACK]),
    sender_id=st.integers(min_value=0, max_value=2**32 - 1),
    session_id=st.integers(min_value=0, max_value=2**64 - 1),
    seq=st.integers(min_value=1, max_value=2**64 - 1),
    slot=st.integers(min_value=0, max_value=2**64 - 1),
    payload=st.binary(max_size=80),
    key=st.binary(min_size=1, max_size=48),
)
def test_encode_decode_round_trip(msg_type, sender_id, session_id, seq, slot, payload, key):
    frame = Frame(msg_type, sender_id, session_id, seq, slot, payload)
    out = decode_frame(encode_frame(frame, key), key, SequenceTracker())
    assert out == frame
