"""Digital-twin key-state replication over an authenticated slotted link.

A physical twin executes a finite state machine; a digital twin mirrors its
key states through verified delta records.  The package simulates the pair,
the network between them, a channel-controlling adversary, and a rule-based
detector that attributes every anomaly to the security requirement whose
enforcement caught it.
"""

from .machine import (
    ExecutionLog,
    LogEntry,
    TwinMachine,
    key_trace,
    machine_from_dict,
    machine_to_dict,
    project_key_state,
    run_schedule,
    step,
    validate_machine,
)
from .sync import (
    CommandRecord,
    DeltaRecord,
    MismatchError,
    PhysicalTwin,
    ReplicaState,
    VirtualTwin,
    apply_delta,
    compute_delta,
    reconcile,
    verify_delta,
)
from .frames import (
    ChannelError,
    Frame,
    MsgType,
    SequenceTracker,
    decode_frame,
    encode_frame,
)
from .netsim import Channel, Clock, Direction, SplitMix64
from .adversary import Adversary, AttackAction, AttackKind
from .detector import (
    DetectionEvent,
    Detector,
    EventKind,
    Requirement,
    consistency_audit,
)
from .scenario import ScenarioInvalid, ScenarioSpec, scenario_from_dict
from .runner import RunReport, run_scenario
from .oracle import oracle_check

__version__ = "0.1.0"

__all__ = [
    "Adversary",
    "AttackAction",
    "AttackKind",
    "Channel",
    "ChannelError",
    "Clock",
    "CommandRecord",
    "DeltaRecord",
    "DetectionEvent",
    "Detector",
    "Direction",
    "EventKind",
    "ExecutionLog",
    "Frame",
    "LogEntry",
    "MismatchError",
    "MsgType",
    "PhysicalTwin",
    "ReplicaState",
    "Requirement",
    "RunReport",
    "ScenarioInvalid",
    "ScenarioSpec",
    "SequenceTracker",
    "SplitMix64",
    "TwinMachine",
    "VirtualTwin",
    "apply_delta",
    "compute_delta",
    "consistency_audit",
    "decode_frame",
    "encode_frame",
    "key_trace",
    "machine_from_dict",
    "machine_to_dict",
    "oracle_check",
    "project_key_state",
    "reconcile",
    "run_scenario",
    "run_schedule",
    "scenario_from_dict",
    "step",
    "validate_machine",
    "verify_delta",
]
