"""Simulator for two-party quantum private comparison with eight-qubit carriers."""

from .adversary import AttackKind, AttackModel, detection_experiment, expected_detection
from .protocol import (
    BitPair,
    Locality,
    Measurement,
    Quantumness,
    SessionConfig,
    SessionReport,
    Verdict,
    run_session,
)
from .qsim import BellLabel, ProbeUnitary, PureState, StateKind, make_state

__version__ = "0.1.0"

__all__ = [
    "AttackKind",
    "AttackModel",
    "BellLabel",
    "BitPair",
    "Locality",
    "Measurement",
    "ProbeUnitary",
    "PureState",
    "Quantumness",
    "SessionConfig",
    "SessionReport",
    "StateKind",
    "Verdict",
    "detection_experiment",
    "expected_detection",
    "make_state",
    "run_session",
]
