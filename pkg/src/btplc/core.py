"""Tree structure, the three-valued status algebra, and the reference tick.

The recursive tick implemented here is the correctness oracle: both
execution engines are tested against it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class NodeStatus(Enum):
    RUNNING = "running"
    SUCCESS = "success"
    FAILURE = "failure"


class NodeKind(Enum):
    SEQUENCE = "sequence"
    FALLBACK = "fallback"
    ACTION = "action"
    CONDITION = "condition"


CONTROL_KINDS = (NodeKind.SEQUENCE, NodeKind.FALLBACK)
LEAF_KINDS = (NodeKind.ACTION, NodeKind.CONDITION)


@dataclass(frozen=True)
class NodeSpec:
    id: str
    kind: NodeKind
    children: tuple[str, ...] = ()
    binding: str | None = None
    params: tuple[tuple[str, object], ...] = ()

    def param_dict(self) -> dict[str, object]:
        return dict(self.params)


@dataclass
class TreeSpec:
    name: str
    nodes: dict[str, NodeSpec]
    root: str

    def node(self, node_id: str) -> NodeSpec:
        return self.nodes[node_id]

    def children(self, node_id: str) -> tuple[str, ...]:
        return self.nodes[node_id].children

    def is_leaf(self, node_id: str) -> bool:
        return self.nodes[node_id].kind in LEAF_KINDS

    def leaves(self) -> list[str]:
        return [n for n in self.preorder() if self.is_leaf(n)]

    def preorder(self) -> list[str]:
        out: list[str] = []
        stack = [self.root]
        while stack:
            nid = stack.pop()
            out.append(nid)
            stack.extend(reversed(self.nodes[nid].children))
        return out

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TreeSpec):
            return NotImplemented
        return (self.name, self.root, self.nodes) == (other.name, other.root, other.nodes)


@dataclass(frozen=True)
class Violation:
    node_id: str
    rule: str


def validate_tree(spec: TreeSpec) -> list[Violation]:
    """Check the structural invariants; an empty list means the tree is ok."""
    violations: list[Violation] = []
    if spec.root not in spec.nodes:
        return [Violation(spec.root, "root is not a declared node")]

    parents: dict[str, str] = {}
    for nid, node in spec.nodes.items():
        for ch in node.children:
            if ch not in spec.nodes:
                violations.append(Violation(nid, f"child '{ch}' is not declared"))
                continue
            if ch in parents:
                violations.append(Violation(ch, "node has more than one parent"))
            parents[ch] = nid
    if spec.root in parents:
        violations.append(Violation(spec.root, "root must not have a parent"))

    for nid, node in spec.nodes.items():
        if node.kind in CONTROL_KINDS and not node.children:
            violations.append(Violation(nid, "control node needs >=1 child"))
        if node.kind in LEAF_KINDS and node.children:
            violations.append(Violation(nid, "execution node must not have children"))

    # Reachability doubles as the cycle check: every node must hang off the root.
    seen: set[str] = set()
    stack = [spec.root]
    while stack:
        nid = stack.pop()
        if nid in seen:
            violations.append(Violation(nid, "cycle detected"))
            break
        seen.add(nid)
        stack.extend(spec.nodes[nid].children if nid in spec.nodes else ())
    for nid in spec.nodes:
        if nid not in seen:
            violations.append(Violation(nid, "node unreachable from root"))
    return violations


def combine_sequence(child_statuses: list[NodeStatus]) -> NodeStatus:
    """Sequence verdict: fail or keep running at the first non-success child."""
    if not child_statuses:
        raise ValueError("combine_sequence requires at least one status")
    for s in child_statuses:
        if s is not NodeStatus.SUCCESS:
            return s
    return NodeStatus.SUCCESS


def combine_fallback(child_statuses: list[NodeStatus]) -> NodeStatus:
    """Fallback verdict: succeed or keep running at the first non-failure child."""
    if not child_statuses:
        raise ValueError("combine_fallback requires at least one status")
    for s in child_statuses:
        if s is not NodeStatus.FAILURE:
            return s
    return NodeStatus.FAILURE


class MissingLeafState(KeyError):
    pass


def reference_tick(
    spec: TreeSpec, leaf_states: dict[str, NodeStatus]
) -> tuple[NodeStatus, list[str]]:
    """Classical depth-first tick with left-to-right short circuit.

    Returns the root status and the ordered list of visited node ids.
    """
    visited: list[str] = []

    def tick(nid: str) -> NodeStatus:
        node = spec.node(nid)
        visited.append(nid)
        if node.kind in LEAF_KINDS:
            if nid not in leaf_states:
                raise MissingLeafState(f"no status provided for leaf '{nid}'")
            return leaf_states[nid]
        statuses: list[NodeStatus] = []
        stop = NodeStatus.SUCCESS if node.kind is NodeKind.SEQUENCE else NodeStatus.FAILURE
        for ch in node.children:
            s = tick(ch)
            statuses.append(s)
            if s is not stop:
                break
        if node.kind is NodeKind.SEQUENCE:
            return combine_sequence(statuses)
        return combine_fallback(statuses)

    return tick(spec.root), visited


def fig2_tree() -> TreeSpec:
    """Fallback(C1, Sequence(C2, a)) -- the canonical two-level example."""
    nodes = {
        "root": NodeSpec("root", NodeKind.FALLBACK, ("C1", "seq")),
        "C1": NodeSpec("C1", NodeKind.CONDITION, binding="C1"),
        "seq": NodeSpec("seq", NodeKind.SEQUENCE, ("C2", "a")),
        "C2": NodeSpec("C2", NodeKind.CONDITION, binding="C2"),
        "a": NodeSpec("a", NodeKind.ACTION, binding="a"),
    }
    return TreeSpec("fig2", nodes, "root")
