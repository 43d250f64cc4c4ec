"""Behavior-tree supervisory control under PLC-style execution models."""

from .core import (
    NodeKind,
    NodeSpec,
    NodeStatus,
    TreeSpec,
    combine_fallback,
    combine_sequence,
    reference_tick,
    validate_tree,
)
from .cyclic import CyclicEngine, ExecState, LeafBehavior, ScriptBehavior
from .dsl import parse, serialize
from .events import Network, SignalKind, build_network, compose_nary

__all__ = [
    "NodeKind",
    "NodeSpec",
    "NodeStatus",
    "TreeSpec",
    "combine_fallback",
    "combine_sequence",
    "reference_tick",
    "validate_tree",
    "CyclicEngine",
    "ExecState",
    "LeafBehavior",
    "ScriptBehavior",
    "parse",
    "serialize",
    "Network",
    "SignalKind",
    "build_network",
    "compose_nary",
]
