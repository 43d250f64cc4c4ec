"""Oracle-equivalence verification of both engines against the reference tick."""
from __future__ import annotations

from dataclasses import dataclass, field

from .core import NodeStatus, TreeSpec, reference_tick
from .cyclic import CyclicEngine, ExecState, build_script_behaviors, state_to_status
from .dsl import serialize
from .events import build_network, leaf_reply
from .gen import GeneratedCase, RandomTreeGen, script_at


@dataclass
class Mismatch:
    tree_index: int
    engine: str
    detail: str
    dsl: str
    scripts: dict[str, list[NodeStatus]]

    def summary(self) -> str:
        return f"tree {self.tree_index} [{self.engine}]: {self.detail}"


@dataclass
class VerifyReport:
    trees: int
    mismatches: list[Mismatch] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches


def oracle_root_per_cycle(
    spec: TreeSpec, scripts: dict[str, list[NodeStatus]], max_cycles: int
) -> list[NodeStatus]:
    """Reference root status for each cycle, stopping at the first verdict."""
    out: list[NodeStatus] = []
    for cycle in range(max_cycles):
        states = {leaf: script_at(scripts[leaf], cycle) for leaf in spec.leaves()}
        status, _ = reference_tick(spec, states)
        out.append(status)
        if status is not NodeStatus.RUNNING:
            break
    return out

def check_cyclic(case: GeneratedCase, index: int, max_cycles: int = 64) -> Mismatch | None:
    """Per-cycle root agreement between the scan engine and the oracle."""
    spec, scripts = case.spec, case.scripts
    expected = oracle_root_per_cycle(spec, scripts, max_cycles)
    engine = CyclicEngine(spec, build_script_behaviors(spec, scripts))
    for cycle, want in enumerate(expected):
        engine.set_root_execute(True)
        engine.scan()
        got = state_to_status(engine.root_state())
        if got is not want:
            return Mismatch(
                index,
                "cyclic",
                f"cycle {cycle}: engine {engine.root_state().value}, oracle {want.value}",
                serialize(spec),
                scripts,
            )
        if engine.root_state() in (ExecState.DONE, ExecState.ERROR):
            if cycle != len(expected) - 1:
                return Mismatch(
                    index,
                    "cyclic",
                    f"engine terminal at cycle {cycle}, oracle still running",
                    serialize(spec),
                    scripts,
                )
    if expected and expected[-1] is NodeStatus.RUNNING:
        # Oracle never settles within the budget; neither may the engine.
        if engine.root_state() is not ExecState.BUSY:
            return Mismatch(
                index, "cyclic", "engine settled, oracle did not", serialize(spec), scripts
            )
    return None


def event_oracle_status(spec: TreeSpec, scripts: dict[str, list[NodeStatus]]) -> NodeStatus:
    """Reference verdict with each leaf pinned to its eventual reply."""
    outcomes = {}
    for leaf in spec.leaves():
        outcome, _ = leaf_reply(scripts[leaf])
        outcomes[leaf] = outcome if outcome is not None else NodeStatus.RUNNING
    status, _ = reference_tick(spec, outcomes)
    return status


def split_assignment(spec: TreeSpec) -> dict[str, str]:
    """Two-runtime split: control nodes on one, every other leaf remote."""
    assignment: dict[str, str] = {}
    for i, nid in enumerate(spec.preorder()):
        if spec.is_leaf(nid) and i % 2 == 1:
            assignment[nid] = "remote"
        else:
            assignment[nid] = "main"
    return assignment


def check_event(
    case: GeneratedCase,
    index: int,
    latencies: tuple[int, ...] = (0, 1, 5),
    max_rounds: int = 2000,
) -> Mismatch | None:
    """Quiescent-root agreement plus latency invariance."""
    spec, scripts = case.spec, case.scripts
    want = event_oracle_status(spec, scripts)
    results = {}
    for lat in latencies:
        net = build_network(spec, scripts, split_assignment(spec), lat)
        net.inject_run(net.root_id)
        outcome = net.run_until_quiescent(max_rounds)
        if not outcome.quiescent:
            return Mismatch(
                index, "event", f"latency {lat}: not quiescent", serialize(spec), scripts
            )
        if outcome.faults:
            return Mismatch(
                index,
                "event",
                f"latency {lat}: conformance faults {outcome.faults}",
                serialize(spec),
                scripts,
            )
        got = outcome.root_status or NodeStatus.RUNNING
        results[lat] = got
        if got is not want:
            return Mismatch(
                index,
                "event",
                f"latency {lat}: engine {got.value}, oracle {want.value}",
                serialize(spec),
                scripts,
            )
    if len(set(results.values())) != 1:
        return Mismatch(
            index, "event", f"latency-dependent verdicts: {results}", serialize(spec), scripts
        )
    return None


def run_verify(
    n_trees: int,
    depth: int,
    seed: int,
    latencies: tuple[int, ...] = (0, 1, 5),
) -> VerifyReport:
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    gen = RandomTreeGen(seed, max_depth=depth)
    report = VerifyReport(n_trees)
    for index in range(n_trees):
        case = gen.generate(index)
        for check in (
            check_cyclic(case, index),
            check_event(case, index, latencies),
        ):
            if check is not None:
                report.mismatches.append(check)
    return report
