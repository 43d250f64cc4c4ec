"""Scan-cycle execution of a tree with edge-triggered function-block nodes.

Every node carries the six-state execution machine (Idle/Busy/Done/Error/
Aborting/Aborted) behind the {xExecute, xAbort} -> {xBusy, xDone, xError,
xAborted} interface. Control nodes run the non-blocking prefix-counter
algorithm; the whole scan is iterative with an explicit frame stack and
touches each node exactly once per cycle.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .core import NodeKind, NodeStatus, TreeSpec, validate_tree


class ExecState(Enum):
    IDLE = "IDLE"
    BUSY = "BUSY"
    DONE = "DONE"
    ERROR = "ERROR"
    ABORTING = "ABORTING"
    ABORTED = "ABORTED"


TERMINAL_STATES = (ExecState.DONE, ExecState.ERROR, ExecState.ABORTED)

_STATUS_TO_STATE = {
    NodeStatus.RUNNING: ExecState.BUSY,
    NodeStatus.SUCCESS: ExecState.DONE,
    NodeStatus.FAILURE: ExecState.ERROR,
}

_STATE_TO_STATUS = {
    ExecState.BUSY: NodeStatus.RUNNING,
    ExecState.ABORTING: NodeStatus.RUNNING,
    ExecState.DONE: NodeStatus.SUCCESS,
    ExecState.ERROR: NodeStatus.FAILURE,
    ExecState.ABORTED: NodeStatus.FAILURE,
}


def output_flags(state: ExecState) -> dict[str, bool]:
    """Derive the PLCopen-style output flags; exclusivity holds by construction."""
    return {
        "xBusy": state in (ExecState.BUSY, ExecState.ABORTING),
        "xDone": state is ExecState.DONE,
        "xError": state is ExecState.ERROR,
        "xAborted": state is ExecState.ABORTED,
    }


def state_to_status(state: ExecState) -> NodeStatus | None:
    """Map an execution state to the tree-level status (Idle has none)."""
    return _STATE_TO_STATUS.get(state)


class EngineFault(RuntimeError):
    """Determinism or consistency violation inside the engine itself."""


class LeafBehavior:
    """One activation-scoped behavior bound to an Action or Condition leaf."""

    def start(self, cycle: int) -> None:
        pass

    def evaluate(self, cycle: int) -> NodeStatus:
        raise NotImplementedError

    def abort(self, cycle: int) -> None:
        pass


class ScriptBehavior(LeafBehavior):
    """Replays a fixed status list indexed by cycle number, clamped at the end."""

    def __init__(self, script: list[NodeStatus]):
        if not script:
            raise ValueError("script must not be empty")
        self.script = list(script)

    def evaluate(self, cycle: int) -> NodeStatus:
        return self.script[min(cycle, len(self.script) - 1)]


@dataclass
class NodeRuntime:
    node_id: str
    state: ExecState = ExecState.IDLE
    x_execute: bool = False
    x_abort: bool = False
    prev_execute: bool = False
    k: int = 0  # latched count of the decided child prefix
    behavior: LeafBehavior | None = None


@dataclass
class CycleRecord:
    cycle: int
    states: list[tuple[str, ExecState]]
    axis: tuple[str, float] | None = None

    def lines(self) -> list[str]:
        out = [f"{self.cycle};{nid};{st.value}" for nid, st in self.states]
        if self.axis is not None:
            out.append(f"{self.cycle};axis;{self.axis[0]};{self.axis[1]:.3f}")
        return out


@dataclass
class Trace:
    records: list[CycleRecord] = field(default_factory=list)

    def lines(self) -> list[str]:
        out = ["cycle;node;state"]
        for rec in self.records:
            out.extend(rec.lines())
        return out

    def text(self) -> str:
        return "\n".join(self.lines()) + "\n"


@dataclass
class RunResult:
    outcome: str  # "done" | "failed" | "budget"
    cycles: int
    trace: Trace


@dataclass
class _Frame:
    node: str
    phase: str = "enter"
    i: int = 0


class CyclicEngine:
    def __init__(
        self,
        spec: TreeSpec,
        behaviors: dict[str, LeafBehavior],
        plant=None,
    ):
        violations = validate_tree(spec)
        if violations:
            raise ValueError(f"invalid tree: {violations}")
        self.spec = spec
        self.plant = plant  # optional object with step(cycle) and telemetry()
        self.preorder = spec.preorder()
        self.rt: dict[str, NodeRuntime] = {}
        for nid in self.preorder:
            node = spec.node(nid)
            beh = None
            if spec.is_leaf(nid):
                if nid not in behaviors:
                    raise KeyError(f"unknown leaf binding for '{nid}'")
                beh = behaviors[nid]
            self.rt[nid] = NodeRuntime(nid, behavior=beh)
        self.cycle = 0
        self.trace = Trace()
        self._evaluated: set[str] = set()

    # -- public drive interface -------------------------------------------

    def set_root_execute(self, value: bool) -> None:
        self.rt[self.spec.root].x_execute = value

    def root_state(self) -> ExecState:
        return self.rt[self.spec.root].state

    def scan(self) -> CycleRecord:
        """One full cycle: plant fault window, tree evaluation, plant step."""
        cyc = self.cycle
        self._evaluated = set()
        if self.plant is not None:
            self.plant.begin_cycle(cyc)
        root = self.spec.root
        if self.rt[root].x_execute:
            self._demand(root, cyc)
        for nid in self.preorder:
            if nid not in self._evaluated:
                self._housekeep(nid, cyc)
        for nid in self.preorder:
            node = self.rt[nid]
            node.prev_execute = node.x_execute
        if self.plant is not None:
            self.plant.step(cyc)
        record = CycleRecord(
            cyc,
            [(nid, self.rt[nid].state) for nid in self.preorder],
            self.plant.telemetry() if self.plant is not None else None,
        )
        self.trace.records.append(record)
        self.cycle += 1
        return record

    def run(self, max_cycles: int, restart_on_failure: bool = False) -> RunResult:
        """Drive the root until Done, Error (unless restarting), or budget."""
        if max_cycles < 1:
            raise ValueError("max_cycles must be >= 1")
        restart_gap = 0
        for _ in range(max_cycles):
            if restart_gap > 0:
                self.set_root_execute(False)
                restart_gap -= 1
            else:
                self.set_root_execute(True)
            self.scan()
            state = self.root_state()
            if state is ExecState.DONE:
                return RunResult("done", self.cycle, self.trace)
            if state is ExecState.ERROR:
                if not restart_on_failure:
                    return RunResult("failed", self.cycle, self.trace)
                restart_gap = 1
        return RunResult("budget", self.cycle, self.trace)

    # -- per-node machinery -----------------------------------------------

    def _mark(self, nid: str) -> None:
        if nid in self._evaluated:
            raise EngineFault(f"node '{nid}' entered twice in one cycle")
        self._evaluated.add(nid)

    def _leaf_cycle(self, nid: str, cyc: int) -> None:
        node = self.rt[nid]
        self._mark(nid)
        if node.x_abort and node.state in (ExecState.BUSY, ExecState.ABORTING):
            node.behavior.abort(cyc)
            node.state = ExecState.ABORTED
            return
        if not node.x_execute:
            if node.state is not ExecState.IDLE:
                if node.state in (ExecState.BUSY, ExecState.ABORTING):
                    node.behavior.abort(cyc)
                node.state = ExecState.IDLE
            return
        rising = not node.prev_execute
        if rising and node.state not in (ExecState.BUSY, ExecState.ABORTING):
            node.state = ExecState.BUSY
            node.behavior.start(cyc)
        if node.state in (ExecState.BUSY, ExecState.DONE, ExecState.ERROR):
            node.state = _STATUS_TO_STATE[node.behavior.evaluate(cyc)]

    def _demand(self, root: str, cyc: int) -> None:
        stack = [_Frame(root)]
        while stack:
            fr = stack[-1]
            nid = fr.node
            node = self.rt[nid]
            spec_node = self.spec.node(nid)
            if fr.phase == "enter":
                if spec_node.kind in (NodeKind.ACTION, NodeKind.CONDITION):
                    self._leaf_cycle(nid, cyc)
                    stack.pop()
                    continue
                self._mark(nid)
                if not node.prev_execute or node.state is ExecState.IDLE:
                    node.k = 0
                node.state = ExecState.BUSY
                fr.phase = "loop"
                fr.i = 0
                continue
            kids = spec_node.children
            if fr.i >= len(kids):
                # Ran past the last child: sequence all-done / fallback all-failed.
                node.state = (
                    ExecState.DONE
                    if spec_node.kind is NodeKind.SEQUENCE
                    else ExecState.ERROR
                )
                stack.pop()
                continue
            ch = kids[fr.i]
            child = self.rt[ch]
            if ch not in self._evaluated:
                child.x_execute = True
                child.x_abort = False
                stack.append(_Frame(ch))
                continue
            advance = (
                ExecState.DONE
                if spec_node.kind is NodeKind.SEQUENCE
                else ExecState.ERROR
            )
            decide = (
                ExecState.ERROR
                if spec_node.kind is NodeKind.SEQUENCE
                else ExecState.DONE
            )
            st = child.state
            if st is ExecState.ABORTED:
                # Aborted reads as a failed child when the parent looks at it.
                st = ExecState.ERROR
            if st is advance:
                node.k = max(node.k, fr.i + 1)
                fr.i += 1
                continue
            if st is decide:
                node.state = decide
                self._release_from(spec_node, fr.i + 1)
                stack.pop()
                continue
            # Busy, Aborting, or a child waiting for a fresh start edge.
            if st is ExecState.IDLE:
                # Held-execute Idle child cannot see an edge; force one next cycle.
                child.x_execute = False
            node.state = ExecState.BUSY
            self._release_from(spec_node, fr.i + 1)
            stack.pop()

    def _release_from(self, spec_node, start_index: int) -> None:
        """Drop execute on trailing children; abort the ones still working."""
        for ch in spec_node.children[start_index:]:
            child = self.rt[ch]
            if child.x_execute or child.state in (ExecState.BUSY, ExecState.ABORTING):
                child.x_execute = False
                if child.state in (ExecState.BUSY, ExecState.ABORTING):
                    child.x_abort = True

    def _housekeep(self, nid: str, cyc: int) -> None:
        node = self.rt[nid]
        spec_node = self.spec.node(nid)
        if spec_node.kind in (NodeKind.ACTION, NodeKind.CONDITION):
            self._leaf_cycle(nid, cyc)
            return
        self._mark(nid)
        if node.x_abort and node.state in (ExecState.BUSY, ExecState.ABORTING):
            node.state = ExecState.ABORTING
            busy_child = False
            for ch in spec_node.children:
                child = self.rt[ch]
                if child.state in (ExecState.BUSY, ExecState.ABORTING):
                    child.x_execute = False
                    child.x_abort = True
                    busy_child = True
            if not busy_child:
                node.state = ExecState.ABORTED
            return
        if not node.x_execute and node.state is not ExecState.IDLE:
            node.state = ExecState.IDLE
            for ch in spec_node.children:
                child = self.rt[ch]
                child.x_execute = False
                if child.state in (ExecState.BUSY, ExecState.ABORTING):
                    child.x_abort = True


def build_script_behaviors(
    spec: TreeSpec, scripts: dict[str, list[NodeStatus]]
) -> dict[str, LeafBehavior]:
    behaviors: dict[str, LeafBehavior] = {}
    for nid in spec.leaves():
        if nid not in scripts:
            raise KeyError(f"no script for leaf '{nid}'")
        node = spec.node(nid)
        script = scripts[nid]
        if node.kind is NodeKind.CONDITION and any(
            s is NodeStatus.RUNNING for s in script
        ):
            raise ValueError(f"condition '{nid}' script may not contain Running")
        behaviors[nid] = ScriptBehavior(script)
    return behaviors
