"""Scenario execution: both twins, both channels, adversary, and detector.

Every slot runs the same four phases:

    1. operator inputs are applied (physical inputs first, then any
       reconciled command inputs queued from the previous slot)
    2. both twins tick and send their frames
    3. each channel delivers its due frames through the adversary, and the
       receiving endpoint decodes, verifies, and applies them
    4. the detector checks liveness expectations and the consistency audit
       compares the replica against the physical history

The resulting report is plain JSON with sorted keys and no wall-clock or
environment dependence, so identical (scenario, seed) pairs produce byte
identical reports.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .adversary import Adversary
from .detector import (
    ATTACK_EXPECTATIONS,
    Detector,
    DetectionEvent,
    DirectionExpectation,
    EventKind,
    ExpectationTable,
    consistency_audit,
)
from .frames import (
    ChannelError,
    ChannelErrorKind,
    Frame,
    MalformedPayload,
    MsgType,
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
from .netsim import Channel, Direction, SplitMix64
from .scenario import ScenarioSpec
from .sync import PhysicalTwin, Reject, VirtualTwin, reconcile

PHYSICAL_SENDER_ID = 1
VIRTUAL_SENDER_ID = 2

REPORT_SCHEMA = "twinsync.report.v1"


@dataclass
class RunReport:
    scenario: dict
    slots: list[dict]
    detection_events: list[dict]
    audits: list[dict]
    summary: dict

    def to_json_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "scenario": self.scenario,
            "slots": self.slots,
            "detection_events": self.detection_events,
            "consistency_audit": self.audits,
            "summary": self.summary,
        }

    def to_json_bytes(self) -> bytes:
        text = json.dumps(self.to_json_dict(), sort_keys=True, indent=2)
        return (text + "\n").encode("utf-8")


def run_scenario(spec: ScenarioSpec) -> RunReport:
    machine = spec.machine
    period = spec.sync_period_slots
    physical = PhysicalTwin(machine, sync_period=period)
    virtual = VirtualTwin(machine, sync_period=period)

    seed_stream = SplitMix64(spec.seed)
    channels = {}
    for direction in Direction:  # seed order: phys_to_virt, virt_to_phys, adversary
        cfg = spec.channels[direction]
        channels[direction] = Channel(
            direction=direction,
            rng=SplitMix64(seed_stream.next_u64()),
            latency_slots=cfg.latency_slots,
            drop_probability=cfg.drop_probability,
        )
    adversary = Adversary(spec.attacks, SplitMix64(seed_stream.next_u64()))

    trackers = {d: SequenceTracker() for d in Direction}
    detector = Detector(
        ExpectationTable(
            {
                d: DirectionExpectation(
                    sync_period=period,
                    latency_slots=spec.channels[d].latency_slots,
                    grace_slots=spec.grace_slots,
                )
                for d in Direction
            }
        )
    )

    phys_inputs: dict[int, list[int]] = {}
    for slot, sym in spec.operator_inputs_physical:
        phys_inputs.setdefault(slot, []).append(sym)
    virt_inputs: dict[int, list[int]] = {}
    for slot, sym in spec.operator_inputs_virtual:
        virt_inputs.setdefault(slot, []).append(sym)

    seqs = {Direction.PHYS_TO_VIRT: 0, Direction.VIRT_TO_PHYS: 0}

    def next_seq(direction: Direction) -> int:
        seqs[direction] += 1
        return seqs[direction]

    events: list[DetectionEvent] = []
    audits: list[dict] = []
    rows: list[dict] = []

    for slot in range(spec.total_slots):
        sent = {d.value: [] for d in Direction}
        delivered = {d.value: [] for d in Direction}

        # Phase 1: operator inputs, then command inputs reconciled last slot.
        for sym in phys_inputs.get(slot, []):
            physical.apply_input(slot, sym)
        pending = physical.pending_reconciled
        physical.pending_reconciled = []
        for inputs in pending:
            for sym in inputs:
                physical.apply_input(slot, sym)
        if slot in virt_inputs:
            virtual.queue_operator_inputs(slot, tuple(virt_inputs[slot]))

        # Phase 2: ticks and sends.
        delta = physical.tick(slot)
        if delta is not None:
            data = encode_frame(
                Frame(
                    msg_type=MsgType.STATE_SYNC,
                    sender_id=PHYSICAL_SENDER_ID,
                    session_id=spec.session_id,
                    seq=next_seq(Direction.PHYS_TO_VIRT),
                    slot=slot,
                    payload=encode_delta_payload(delta),
                ),
                spec.keys[Direction.PHYS_TO_VIRT],
            )
            channels[Direction.PHYS_TO_VIRT].send(data, slot)
            sent[Direction.PHYS_TO_VIRT.value].append(data.hex())

        if slot % period == 0:
            commands = virtual.tick(slot)
            outbound = []
            if commands:
                for command in commands:
                    outbound.append(
                        Frame(
                            msg_type=MsgType.COMMAND,
                            sender_id=VIRTUAL_SENDER_ID,
                            session_id=spec.session_id,
                            seq=next_seq(Direction.VIRT_TO_PHYS),
                            slot=slot,
                            payload=encode_command_payload(command),
                        )
                    )
            else:
                # Idle heartbeat on the reverse path: acknowledge the newest
                # accepted sync so this channel has per-period liveness too.
                outbound.append(
                    Frame(
                        msg_type=MsgType.ACK,
                        sender_id=VIRTUAL_SENDER_ID,
                        session_id=spec.session_id,
                        seq=next_seq(Direction.VIRT_TO_PHYS),
                        slot=slot,
                        payload=encode_ack_payload(virtual.last_sync_seq),
                    )
                )
            for frame in outbound:
                data = encode_frame(frame, spec.keys[Direction.VIRT_TO_PHYS])
                channels[Direction.VIRT_TO_PHYS].send(data, slot)
                sent[Direction.VIRT_TO_PHYS.value].append(data.hex())

        # Phase 3: deliveries, physical-to-virtual first.
        for direction in Direction:
            due = channels[direction].deliver_due(slot, adversary.intercept)
            for data in due:
                outcome = _receive(
                    data,
                    direction,
                    slot,
                    spec,
                    trackers,
                    detector,
                    physical,
                    virtual,
                    events,
                )
                delivered[direction.value].append(
                    {"frame_hex": data.hex(), "outcome": outcome}
                )

        # Phase 4: liveness expectations and the consistency audit.
        events.extend(detector.on_slot_boundary(slot))
        audit_event = consistency_audit(
            physical.log,
            machine,
            virtual.replica,
            slot,
            latency_slots=spec.channels[Direction.PHYS_TO_VIRT].latency_slots,
            sync_period=period,
        )
        audit_row = {
            "slot": slot,
            "ok": audit_event is None,
            "replica_key_state": virtual.replica.last_synced_key,
        }
        if audit_event is not None:
            audit_row["expected"] = audit_event.detail["expected"]
        audits.append(audit_row)

        dropped = {
            d.value: [
                f.data.hex()
                for f in channels[d].drop_log
                if f.sent_at_slot == slot
            ]
            for d in Direction
        }
        rows.append(
            {
                "slot": slot,
                "physical_state": physical.state,
                "physical_key_state": physical.current_key(),
                "replica_key_state": virtual.replica.last_synced_key,
                "replica_synced_slot": virtual.replica.last_synced_slot,
                "sent": sent,
                "delivered": delivered,
                "dropped": dropped,
                "adversary_actions": [
                    action.to_dict()
                    for applied_slot, action in adversary.applied
                    if applied_slot == slot
                ],
            }
        )

    summary, annotated = _summarize(spec, events, channels)
    return RunReport(
        scenario=spec.to_dict(),
        slots=rows,
        detection_events=annotated,
        audits=audits,
        summary=summary,
    )


def _receive(
    data: bytes,
    direction: Direction,
    slot: int,
    spec: ScenarioSpec,
    trackers: dict[Direction, SequenceTracker],
    detector: Detector,
    physical: PhysicalTwin,
    virtual: VirtualTwin,
    events: list[DetectionEvent],
) -> str:
    result = decode_frame(data, spec.keys[direction], trackers[direction])
    if isinstance(result, ChannelError):
        events.append(detector.on_channel_error(result, slot, direction))
        return result.kind.value
    frame = result
    detector.on_frame_accepted(direction, frame.slot)

    try:
        if frame.msg_type == MsgType.STATE_SYNC:
            delta = decode_delta_payload(frame.payload, frame.slot)
            err = virtual.apply_sync(frame.seq, delta)
            if err is not None:
                events.append(detector.on_semantic_mismatch(err, slot, direction))
                return "state_mismatch"
        elif frame.msg_type == MsgType.COMMAND:
            command = decode_command_payload(frame.payload)
            verdict = reconcile(physical.current_key(), command, spec.machine)
            if isinstance(verdict, Reject):
                events.append(detector.on_semantic_mismatch(verdict, slot, direction))
                return "command_rejected"
            physical.pending_reconciled.append(verdict)
        else:
            physical.record_ack(slot, decode_ack_payload(frame.payload))
    except MalformedPayload as exc:
        # Authenticated frames with broken payloads cannot come from the
        # honest peer; classify like any other forgery.
        synthetic = ChannelError(
            kind=ChannelErrorKind.MALFORMED, reason=str(exc), slot=frame.slot
        )
        events.append(detector.on_channel_error(synthetic, slot, direction))
        return "malformed_payload"
    return "accepted"


def _summarize(
    spec: ScenarioSpec,
    events: list[DetectionEvent],
    channels: dict[Direction, Channel],
) -> tuple[dict, list[dict]]:
    window = spec.grace_slots + 1

    def in_window(event: DetectionEvent, attack) -> bool:
        return (
            event.direction == attack.direction
            and attack.slot <= event.slot <= attack.slot + window
        )

    attack_rows = []
    all_matched = True
    matrix: dict[str, dict[str, list[str]]] = {}
    expected_matrix: dict[str, dict[str, list[str]]] = {}
    for attack in spec.attacks:
        hits = [e for e in events if in_window(e, attack)]
        detected: set = set()
        for e in hits:
            detected |= e.requirements
        expected = ATTACK_EXPECTATIONS[(attack.kind, attack.direction)]
        matched = detected == expected
        all_matched = all_matched and matched
        attack_rows.append(
            {
                "kind": attack.kind.value,
                "slot": attack.slot,
                "direction": attack.direction.value,
                "expected_requirements": sorted(r.value for r in expected),
                "detected_requirements": sorted(r.value for r in detected),
                "event_count": len(hits),
                "matched": matched,
            }
        )
        cell = matrix.setdefault(attack.kind.value, {}).setdefault(
            attack.direction.value, []
        )
        for r in sorted(detected):
            if r.value not in cell:
                cell.append(r.value)
        cell.sort()
        expected_matrix.setdefault(attack.kind.value, {})[attack.direction.value] = sorted(
            r.value for r in expected
        )

    annotated = []
    spurious = 0
    benign_loss = 0
    for event in events:
        entry = event.to_dict()
        scheduled = any(in_window(event, a) for a in spec.attacks)
        entry["attack_scheduled"] = scheduled
        if event.kind == EventKind.MISSED_SYNC:
            emission = event.detail.get("expected_emission_slot")
            lost = any(
                f.sent_at_slot == emission
                for f in channels[event.direction].drop_log
            )
            entry["explained_by_benign_loss"] = lost
            if lost:
                benign_loss += 1
            elif not scheduled:
                spurious += 1
        elif not scheduled:
            spurious += 1
        annotated.append(entry)

    verdict = "pass" if all_matched and spurious == 0 else "detection_mismatch"
    summary = {
        "attacks": attack_rows,
        "matrix": matrix,
        "expected_matrix": expected_matrix,
        "event_count": len(events),
        "spurious_event_count": spurious,
        "benign_loss_event_count": benign_loss,
        "verdict": verdict,
    }
    return summary, annotated
