"""Gesture-programmable robot interaction toolkit.

Pipeline: classifier frames -> confirmer -> keymap resolution -> incremental
interpreter -> simulated vehicle.  See the README for entry points.
"""

__version__ = "0.1.0"

from .confirmer import AcceptedGesture, Confirmer, ConfirmerConfig, GestureFrame
from .interpreter import (
    ConcreteCommand,
    DefinedFunction,
    Executed,
    Interpreter,
    KeymapChanged,
    VariableSet,
)
from .keymap import Keymap, KeymapRegistry, Position, Token, TokenKind, parse_keymap
from .robot import Robot

__all__ = [
    "AcceptedGesture",
    "Confirmer",
    "ConfirmerConfig",
    "ConcreteCommand",
    "DefinedFunction",
    "Executed",
    "GestureFrame",
    "Interpreter",
    "Keymap",
    "KeymapChanged",
    "KeymapRegistry",
    "Position",
    "Robot",
    "Token",
    "TokenKind",
    "VariableSet",
    "parse_keymap",
]
