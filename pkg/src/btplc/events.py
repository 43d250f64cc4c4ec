"""Event-driven execution: each node is an asynchronous state machine.

Signals {run, halt} travel parent to child, {succ, fail} child to parent.
Control nodes are two-child machines; wider nodes are first rewritten into
a right-leaning chain of binary nodes. Runtimes exchange signals over FIFO
channels with an integer latency measured in event rounds.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum

from .core import (
    NodeKind,
    NodeSpec,
    NodeStatus,
    TreeSpec,
    combine_fallback,
    combine_sequence,
    validate_tree,
)


class SignalKind(Enum):
    RUN = "run"
    HALT = "halt"
    SUCC = "succ"
    FAIL = "fail"


@dataclass(frozen=True)
class Signal:
    kind: SignalKind
    source: str
    destination: str


class ProcState(Enum):
    IDLE = "Idle"
    RUNNING = "Running"
    RUNNING_CHILD1 = "RunningChild1"
    RUNNING_CHILD2 = "RunningChild2"
    SUCCESS = "Success"
    FAILURE = "Failure"
    HALTING = "Halting"


PARENT_OF_ROOT = "__harness__"


def compose_nary(spec: TreeSpec) -> TreeSpec:
    """Rewrite control nodes with more than two children into binary chains.

    The chain leans right: Sequence(a,b,c) becomes Sequence(a, Sequence(b,c)),
    with deterministic ids for the synthesized inner nodes.
    """
    nodes: dict[str, NodeSpec] = {}

    def rewrite(nid: str) -> str:
        node = spec.node(nid)
        if node.kind in (NodeKind.ACTION, NodeKind.CONDITION):
            nodes[nid] = node
            return nid
        kids = [rewrite(ch) for ch in node.children]
        if len(kids) <= 2:
            nodes[nid] = NodeSpec(nid, node.kind, tuple(kids))
            return nid
        # Fold from the right; inner node ids extend the original id.
        tail = kids[-1]
        for idx in range(len(kids) - 2, 0, -1):
            inner_id = f"{nid}__{idx}" if idx > 0 else nid
            nodes[inner_id] = NodeSpec(inner_id, node.kind, (kids[idx], tail))
            tail = inner_id
        nodes[nid] = NodeSpec(nid, node.kind, (kids[0], tail))
        return nid

    root = rewrite(spec.root)
    return TreeSpec(spec.name, nodes, root)


def nary_status(kind: NodeKind, statuses: list[NodeStatus]) -> NodeStatus:
    if len(statuses) < 2:
        raise ValueError("n-ary composition requires n >= 2")
    if kind is NodeKind.SEQUENCE:
        return combine_sequence(statuses)
    if kind is NodeKind.FALLBACK:
        return combine_fallback(statuses)
    raise ValueError(f"not a control kind: {kind}")


class ConformanceFault:
    def __init__(self, node_id: str, state: ProcState, signal: Signal):
        self.node_id = node_id
        self.state = state
        self.signal = signal

    def __repr__(self) -> str:
        return f"ConformanceFault({self.node_id}, {self.state}, {self.signal})"


class Process:
    def __init__(self, node_id: str, parent_id: str):
        self.node_id = node_id
        self.parent_id = parent_id
        self.state = ProcState.IDLE

    def handle(self, signal: Signal, network: "Network") -> list[Signal]:
        raise NotImplementedError

    def _to(self, kind: SignalKind, dst: str) -> Signal:
        return Signal(kind, self.node_id, dst)


class LeafProcess(Process):
    """Scripted execution node: replies after its busy delay, or never.

    `outcome` is the eventual verdict; None keeps the node Running forever.
    `delay` counts extra rounds spent Running before the reply.
    """

    def __init__(self, node_id: str, parent_id: str, outcome: NodeStatus | None, delay: int = 0):
        super().__init__(node_id, parent_id)
        if outcome is NodeStatus.RUNNING:
            outcome = None
        self.outcome = outcome
        self.delay = delay
        self.activation = 0

    def handle(self, signal: Signal, network: "Network") -> list[Signal]:
        if signal.kind is SignalKind.RUN:
            if self.state is ProcState.RUNNING:
                return []  # idempotent start
            self.activation += 1
            network.note_state(self.node_id, ProcState.RUNNING)
            self.state = ProcState.RUNNING
            if self.outcome is not None:
                network.schedule(
                    self.node_id, 1 + self.delay, ("complete", self.activation)
                )
            return []
        if signal.kind is SignalKind.HALT:
            if self.state is ProcState.RUNNING:
                self.activation += 1  # invalidates the pending completion
                self.state = ProcState.IDLE
                network.note_state(self.node_id, ProcState.IDLE)
            return []
        network.note_fault(ConformanceFault(self.node_id, self.state, signal))
        return []

    def on_timer(self, payload, network: "Network") -> list[Signal]:
        tag, activation = payload
        if tag != "complete" or activation != self.activation:
            return []
        if self.state is not ProcState.RUNNING:
            return []
        if self.outcome is NodeStatus.SUCCESS:
            self.state = ProcState.SUCCESS
            network.note_state(self.node_id, ProcState.SUCCESS)
            network.count_emission(SignalKind.SUCC)
            return [self._to(SignalKind.SUCC, self.parent_id)]
        self.state = ProcState.FAILURE
        network.note_state(self.node_id, ProcState.FAILURE)
        network.count_emission(SignalKind.FAIL)
        return [self._to(SignalKind.FAIL, self.parent_id)]


class ControlProcess(Process):
    """Two-child sequence or fallback machine (unary degenerates to pass-through)."""

    def __init__(self, node_id: str, parent_id: str, kind: NodeKind, children: tuple[str, ...]):
        super().__init__(node_id, parent_id)
        if len(children) not in (1, 2):
            raise ValueError("control process takes one or two children")
        self.kind = kind
        self.children = children

    def _emit_verdict(self, success: bool, network: "Network") -> list[Signal]:
        if success:
            self.state = ProcState.SUCCESS
            network.note_state(self.node_id, ProcState.SUCCESS)
            network.count_emission(SignalKind.SUCC)
            return [self._to(SignalKind.SUCC, self.parent_id)]
        self.state = ProcState.FAILURE
        network.note_state(self.node_id, ProcState.FAILURE)
        network.count_emission(SignalKind.FAIL)
        return [self._to(SignalKind.FAIL, self.parent_id)]

    def handle(self, signal: Signal, network: "Network") -> list[Signal]:
        seq = self.kind is NodeKind.SEQUENCE
        if signal.source == self.parent_id or signal.source == PARENT_OF_ROOT:
            if signal.kind is SignalKind.RUN:
                if self.state in (ProcState.RUNNING_CHILD1, ProcState.RUNNING_CHILD2):
                    return []
                self.state = ProcState.RUNNING_CHILD1
                network.note_state(self.node_id, ProcState.RUNNING_CHILD1)
                return [self._to(SignalKind.RUN, self.children[0])]
            if signal.kind is SignalKind.HALT:
                if self.state is ProcState.RUNNING_CHILD1:
                    self.state = ProcState.HALTING
                    network.note_state(self.node_id, ProcState.HALTING)
                    network.schedule(self.node_id, 1, ("settle",))
                    return [self._to(SignalKind.HALT, self.children[0])]
                if self.state is ProcState.RUNNING_CHILD2:
                    self.state = ProcState.HALTING
                    network.note_state(self.node_id, ProcState.HALTING)
                    network.schedule(self.node_id, 1, ("settle",))
                    return [self._to(SignalKind.HALT, self.children[1])]
                return []
            network.note_fault(ConformanceFault(self.node_id, self.state, signal))
            return []
        # Child verdicts. Stale ones (after halt or re-arm) are discarded.
        if signal.kind not in (SignalKind.SUCC, SignalKind.FAIL):
            network.note_fault(ConformanceFault(self.node_id, self.state, signal))
            return []
        if self.state in (ProcState.IDLE, ProcState.HALTING, ProcState.SUCCESS, ProcState.FAILURE):
            return []
        expected = (
            self.children[0]
            if self.state is ProcState.RUNNING_CHILD1
            else self.children[1]
        )
        if signal.source != expected:
            network.note_fault(ConformanceFault(self.node_id, self.state, signal))
            return []
        child_ok = signal.kind is SignalKind.SUCC
        advance = (not child_ok) if not seq else child_ok
        if self.state is ProcState.RUNNING_CHILD1 and advance and len(self.children) == 2:
            self.state = ProcState.RUNNING_CHILD2
            network.note_state(self.node_id, ProcState.RUNNING_CHILD2)
            return [self._to(SignalKind.RUN, self.children[1])]
        # Verdict reached: sequence succeeds on last succ / fails on any fail,
        # fallback dually.
        return self._emit_verdict(child_ok, network)

    def on_timer(self, payload, network: "Network") -> list[Signal]:
        if payload == ("settle",) and self.state is ProcState.HALTING:
            self.state = ProcState.IDLE
            network.note_state(self.node_id, ProcState.IDLE)
        return []


@dataclass
class EventRuntime:
    name: str
    queue: deque = field(default_factory=deque)
    processes: dict[str, Process] = field(default_factory=dict)


@dataclass
class RunOutcome:
    quiescent: bool
    rounds: int
    root_status: NodeStatus | None
    trace_lines: list[str]
    faults: list[ConformanceFault]
    queue_snapshot: list[str]


class Network:
    """Deterministic round-robin scheduler over runtimes and channels."""

    def __init__(self, latency: int | dict[tuple[str, str], int] = 0):
        self.runtimes: dict[str, EventRuntime] = {}
        self.assignment: dict[str, str] = {}
        self._latency = latency
        self.channels: dict[tuple[str, str], deque] = {}
        self.pending: list[tuple[int, str, tuple]] = []
        self.round = 0
        self.trace_lines: list[str] = []
        self.faults: list[ConformanceFault] = []
        self.emission_counts: dict[SignalKind, int] = {
            SignalKind.SUCC: 0,
            SignalKind.FAIL: 0,
        }
        self.root_id: str | None = None
        self.root_verdict: NodeStatus | None = None

    def add_runtime(self, name: str) -> EventRuntime:
        rt = EventRuntime(name)
        self.runtimes[name] = rt
        return rt

    def add_process(self, proc: Process, runtime: str) -> None:
        self.runtimes[runtime].processes[proc.node_id] = proc
        self.assignment[proc.node_id] = runtime

    def latency_for(self, src_rt: str, dst_rt: str) -> int:
        if isinstance(self._latency, dict):
            return self._latency.get((src_rt, dst_rt), 0)
        return self._latency

    # -- callbacks used by processes --------------------------------------

    def schedule(self, node_id: str, delay: int, payload: tuple) -> None:
        self.pending.append((self.round + delay, node_id, payload))

    def note_state(self, node_id: str, state: ProcState) -> None:
        rt = self.assignment[node_id]
        self.trace_lines.append(f"{self.round};{rt};{node_id};{state.value}")

    def note_fault(self, fault: ConformanceFault) -> None:
        self.faults.append(fault)

    def count_emission(self, kind: SignalKind) -> None:
        self.emission_counts[kind] += 1

    # -- signal routing ----------------------------------------------------

    def route(self, signal: Signal) -> None:
        if signal.destination == PARENT_OF_ROOT:
            if signal.kind is SignalKind.SUCC:
                self.root_verdict = NodeStatus.SUCCESS
            elif signal.kind is SignalKind.FAIL:
                self.root_verdict = NodeStatus.FAILURE
            return
        src_rt = self.assignment.get(signal.source, self.assignment[signal.destination])
        dst_rt = self.assignment[signal.destination]
        if src_rt == dst_rt:
            self.runtimes[dst_rt].queue.append(signal)
            return
        key = (src_rt, dst_rt)
        chan = self.channels.setdefault(key, deque())
        chan.append((self.round + self.latency_for(src_rt, dst_rt), signal))

    def inject_run(self, root_id: str) -> None:
        self.root_id = root_id
        self.route(Signal(SignalKind.RUN, PARENT_OF_ROOT, root_id))

    def inject_halt(self, node_id: str) -> None:
        self.route(Signal(SignalKind.HALT, PARENT_OF_ROOT, node_id))

    def _deliver(self, signal: Signal) -> None:
        rt_name = self.assignment[signal.destination]
        self.trace_lines.append(
            f"{self.round};{rt_name};{signal.kind.value};{signal.source};{signal.destination}"
        )
        proc = self.runtimes[rt_name].processes[signal.destination]
        for out in proc.handle(signal, self):
            self.route(out)

    def step_round(self) -> int:
        """One event round; returns the number of signals processed."""
        processed = 0
        # Channel deliveries whose latency has expired (FIFO per channel).
        for key in sorted(self.channels):
            chan = self.channels[key]
            while chan and chan[0][0] <= self.round:
                _, sig = chan.popleft()
                self.runtimes[key[1]].queue.append(sig)
        # Timers (leaf completions, halt settling), in schedule order.
        due = [p for p in self.pending if p[0] <= self.round]
        self.pending = [p for p in self.pending if p[0] > self.round]
        for _, node_id, payload in due:
            proc = self.runtimes[self.assignment[node_id]].processes[node_id]
            for out in proc.on_timer(payload, self):
                self.route(out)
        # Drain every runtime queue, including same-round local emissions.
        for rt in self.runtimes.values():
            while rt.queue:
                self._deliver(rt.queue.popleft())
                processed += 1
        return processed

    def quiescent(self) -> bool:
        if self.pending:
            return False
        if any(rt.queue for rt in self.runtimes.values()):
            return False
        return not any(self.channels.values())

    def run_until_quiescent(self, max_rounds: int) -> RunOutcome:
        if max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        for _ in range(max_rounds):
            self.step_round()
            self.round += 1
            if self.quiescent():
                return RunOutcome(
                    True, self.round, self.root_status(), self.trace_lines, self.faults, []
                )
        snapshot = [
            f"{name}:{len(rt.queue)}" for name, rt in self.runtimes.items()
        ] + [f"channel{k}:{len(v)}" for k, v in self.channels.items() if v]
        return RunOutcome(
            False, self.round, self.root_status(), self.trace_lines, self.faults, snapshot
        )

    def root_status(self) -> NodeStatus | None:
        if self.root_verdict is not None:
            return self.root_verdict
        if self.root_id is None:
            return None
        proc = self.runtimes[self.assignment[self.root_id]].processes[self.root_id]
        if proc.state in (ProcState.RUNNING, ProcState.RUNNING_CHILD1, ProcState.RUNNING_CHILD2):
            return NodeStatus.RUNNING
        if proc.state is ProcState.SUCCESS:
            return NodeStatus.SUCCESS
        if proc.state is ProcState.FAILURE:
            return NodeStatus.FAILURE
        return None

    def node_state(self, node_id: str) -> ProcState:
        return self.runtimes[self.assignment[node_id]].processes[node_id].state


def leaf_reply(script: list[NodeStatus]) -> tuple[NodeStatus | None, int]:
    """Event-engine reading of a leaf script: busy delay + eventual verdict."""
    delay = 0
    for s in script:
        if s is NodeStatus.RUNNING:
            delay += 1
        else:
            return s, delay
    return None, delay


def build_network(
    spec: TreeSpec,
    scripts: dict[str, list[NodeStatus]],
    assignment: dict[str, str] | None = None,
    latency: int | dict[tuple[str, str], int] = 0,
) -> Network:
    """Instantiate the (binarized) tree as processes across runtimes."""
    violations = validate_tree(spec)
    if violations:
        raise ValueError(f"invalid tree: {violations}")
    bspec = compose_nary(spec)
    net = Network(latency)
    runtimes = sorted(set((assignment or {}).values())) or ["main"]
    for name in runtimes:
        net.add_runtime(name)

    parent_of: dict[str, str] = {bspec.root: PARENT_OF_ROOT}
    for nid in bspec.preorder():
        for ch in bspec.children(nid):
            parent_of[ch] = nid

    for nid in bspec.preorder():
        node = bspec.node(nid)
        rt = (assignment or {}).get(nid, runtimes[0])
        if node.kind in (NodeKind.ACTION, NodeKind.CONDITION):
            source = nid if nid in scripts else nid.split("__")[0]
            outcome, delay = leaf_reply(scripts[source])
            net.add_process(LeafProcess(nid, parent_of[nid], outcome, delay), rt)
        else:
            net.add_process(
                ControlProcess(nid, parent_of[nid], node.kind, node.children), rt
            )
    net.root_id = bspec.root
    return net
