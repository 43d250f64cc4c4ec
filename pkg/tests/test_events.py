from itertools import product

import pytest

from btplc.core import NodeKind, NodeSpec, NodeStatus, TreeSpec, fig2_tree
from btplc.dsl import parse
from btplc.events import (
    PARENT_OF_ROOT,
    ControlProcess,
    LeafProcess,
    Network,
    ProcState,
    Signal,
    SignalKind,
    build_network,
    compose_nary,
    leaf_reply,
    nary_status,
)

S, F, R = NodeStatus.SUCCESS, NodeStatus.FAILURE, NodeStatus.RUNNING


def nary_spec(kind, n):
    nodes = {"r": NodeSpec("r", kind, tuple(f"l{i}" for i in range(n)))}
    for i in range(n):
        nodes[f"l{i}"] = NodeSpec(f"l{i}", NodeKind.ACTION, (), f"l{i}")
    return TreeSpec("t", nodes, "r")


class TestComposeNary:
    def test_binary_tree_unchanged(self):
        spec = fig2_tree()
        assert compose_nary(spec).nodes == spec.nodes

    def test_three_children_right_leaning(self):
        b = compose_nary(nary_spec(NodeKind.SEQUENCE, 3))
        assert b.node("r").children == ("l0", "r__1")
        assert b.node("r__1").children == ("l1", "l2")
        assert b.node("r__1").kind is NodeKind.SEQUENCE

    def test_five_children_chain(self):
        b = compose_nary(nary_spec(NodeKind.FALLBACK, 5))
        assert b.node("r").children == ("l0", "r__1")
        assert b.node("r__1").children == ("l1", "r__2")
        assert b.node("r__2").children == ("l2", "r__3")
        assert b.node("r__3").children == ("l3", "l4")

    def test_leaf_count_preserved(self):
        for n in range(2, 7):
            spec = nary_spec(NodeKind.SEQUENCE, n)
            assert sorted(compose_nary(spec).leaves()) == sorted(spec.leaves())

    def test_nary_status_requires_two(self):
        with pytest.raises(ValueError):
            nary_status(NodeKind.SEQUENCE, [S])


def run_net(spec, scripts, latency=0, assignment=None, rounds=200):
    net = build_network(spec, scripts, assignment, latency)
    net.inject_run(net.root_id)
    return net, net.run_until_quiescent(rounds)


class TestLeafProcess:
    def test_run_then_completion(self):
        spec = TreeSpec("t", {"a": NodeSpec("a", NodeKind.ACTION, (), "a")}, "a")
        net, out = run_net(spec, {"a": [R, R, S]})
        assert out.quiescent
        assert out.root_status is S
        assert net.node_state("a") is ProcState.SUCCESS

    def test_failure_outcome(self):
        spec = TreeSpec("t", {"a": NodeSpec("a", NodeKind.ACTION, (), "a")}, "a")
        _, out = run_net(spec, {"a": [F]})
        assert out.quiescent
        assert out.root_status is F

    def test_all_running_never_quiesces_alone(self):
        spec = TreeSpec("t", {"a": NodeSpec("a", NodeKind.ACTION, (), "a")}, "a")
        net = build_network(spec, {"a": [R]}, None, 0)
        net.inject_run(net.root_id)
        out = net.run_until_quiescent(20)
        # Run delivered, then nothing pending: the leaf just stays Running.
        assert out.quiescent
        assert out.root_status is R

    def test_duplicate_run_is_idempotent(self):
        net = Network()
        net.add_runtime("main")
        leaf = LeafProcess("a", PARENT_OF_ROOT, S, delay=2)
        net.add_process(leaf, "main")
        run = Signal(SignalKind.RUN, PARENT_OF_ROOT, "a")
        leaf.handle(run, net)
        pending_before = list(net.pending)
        leaf.handle(run, net)
        assert net.pending == pending_before
        assert leaf.activation == 1

    def test_halt_cancels_pending_completion(self):
        spec = TreeSpec("t", {"a": NodeSpec("a", NodeKind.ACTION, (), "a")}, "a")
        net = build_network(spec, {"a": [R, R, R, S]}, None, 0)
        net.inject_run(net.root_id)
        net.step_round()
        net.round += 1
        net.inject_halt("a")
        out = net.run_until_quiescent(50)
        assert out.quiescent
        assert net.node_state("a") is ProcState.IDLE
        assert net.emission_counts[SignalKind.SUCC] == 0


class TestControlProcess:
    def make(self, kind):
        net = Network()
        net.add_runtime("main")
        ctl = ControlProcess("r", PARENT_OF_ROOT, kind, ("c1", "c2"))
        net.add_process(ctl, "main")
        net.add_process(LeafProcess("c1", "r", S), "main")
        net.add_process(LeafProcess("c2", "r", S), "main")
        return net, ctl

    def test_run_starts_first_child(self):
        net, ctl = self.make(NodeKind.SEQUENCE)
        out = ctl.handle(Signal(SignalKind.RUN, PARENT_OF_ROOT, "r"), net)
        assert ctl.state is ProcState.RUNNING_CHILD1
        assert out == [Signal(SignalKind.RUN, "r", "c1")]

    def test_sequence_advances_on_succ(self):
        net, ctl = self.make(NodeKind.SEQUENCE)
        ctl.handle(Signal(SignalKind.RUN, PARENT_OF_ROOT, "r"), net)
        out = ctl.handle(Signal(SignalKind.SUCC, "c1", "r"), net)
        assert ctl.state is ProcState.RUNNING_CHILD2
        assert out == [Signal(SignalKind.RUN, "r", "c2")]

    def test_sequence_fails_fast(self):
        net, ctl = self.make(NodeKind.SEQUENCE)
        ctl.handle(Signal(SignalKind.RUN, PARENT_OF_ROOT, "r"), net)
        out = ctl.handle(Signal(SignalKind.FAIL, "c1", "r"), net)
        assert ctl.state is ProcState.FAILURE
        assert out == [Signal(SignalKind.FAIL, "r", PARENT_OF_ROOT)]

    def test_fallback_advances_on_fail(self):
        net, ctl = self.make(NodeKind.FALLBACK)
        ctl.handle(Signal(SignalKind.RUN, PARENT_OF_ROOT, "r"), net)
        out = ctl.handle(Signal(SignalKind.FAIL, "c1", "r"), net)
        assert ctl.state is ProcState.RUNNING_CHILD2
        assert out == [Signal(SignalKind.RUN, "r", "c2")]

    def test_fallback_succeeds_fast(self):
        net, ctl = self.make(NodeKind.FALLBACK)
        ctl.handle(Signal(SignalKind.RUN, PARENT_OF_ROOT, "r"), net)
        out = ctl.handle(Signal(SignalKind.SUCC, "c1", "r"), net)
        assert ctl.state is ProcState.SUCCESS
        assert out == [Signal(SignalKind.SUCC, "r", PARENT_OF_ROOT)]

    def test_halt_forwards_to_active_child_and_settles(self):
        net, ctl = self.make(NodeKind.SEQUENCE)
        ctl.handle(Signal(SignalKind.RUN, PARENT_OF_ROOT, "r"), net)
        out = ctl.handle(Signal(SignalKind.HALT, PARENT_OF_ROOT, "r"), net)
        assert ctl.state is ProcState.HALTING
        assert out == [Signal(SignalKind.HALT, "r", "c1")]
        # The settle timer returns it to Idle after one round.
        ctl.on_timer(("settle",), net)
        assert ctl.state is ProcState.IDLE

    def test_stale_verdict_after_halt_discarded(self):
        net, ctl = self.make(NodeKind.SEQUENCE)
        ctl.handle(Signal(SignalKind.RUN, PARENT_OF_ROOT, "r"), net)
        ctl.handle(Signal(SignalKind.HALT, PARENT_OF_ROOT, "r"), net)
        out = ctl.handle(Signal(SignalKind.SUCC, "c1", "r"), net)
        assert out == []
        assert ctl.state is ProcState.HALTING
        assert net.faults == []

    def test_verdict_from_wrong_child_is_a_fault(self):
        net, ctl = self.make(NodeKind.SEQUENCE)
        ctl.handle(Signal(SignalKind.RUN, PARENT_OF_ROOT, "r"), net)
        ctl.handle(Signal(SignalKind.SUCC, "c2", "r"), net)
        assert len(net.faults) == 1


class TestNetwork:
    def test_empty_round_is_quiescent(self):
        net = Network()
        net.add_runtime("main")
        assert net.step_round() == 0
        assert net.quiescent()

    def test_fig2_single_runtime(self):
        spec = fig2_tree()
        net, out = run_net(spec, {"C1": [F], "C2": [S], "a": [R, R, S]})
        assert out.quiescent
        assert out.root_status is S
        assert out.faults == []

    def test_trace_line_formats(self):
        spec = fig2_tree()
        _, out = run_net(spec, {"C1": [S], "C2": [S], "a": [S]})
        assert "0;main;run;__harness__;root" in out.trace_lines
        for line in out.trace_lines:
            parts = line.split(";")
            assert len(parts) in (4, 5)
            assert parts[0].isdigit()

    def test_latency_does_not_change_outcome(self):
        spec = fig2_tree()
        assignment = {nid: ("remote" if nid in ("C2", "a") else "main")
                      for nid in spec.preorder()}
        finals = []
        for latency in (0, 1, 5):
            _, out = run_net(
                spec, {"C1": [F], "C2": [S], "a": [R, S]},
                latency=latency, assignment=assignment,
            )
            assert out.quiescent
            assert out.faults == []
            finals.append(out.root_status)
        assert finals == [S, S, S]

    def test_higher_latency_takes_more_rounds(self):
        spec = fig2_tree()
        assignment = {nid: ("remote" if nid == "a" else "main")
                      for nid in spec.preorder()}
        rounds = []
        for latency in (0, 4):
            _, out = run_net(
                spec, {"C1": [F], "C2": [S], "a": [S]},
                latency=latency, assignment=assignment,
            )
            rounds.append(out.rounds)
        assert rounds[1] > rounds[0]

    def test_channels_are_fifo(self):
        # Two leaves on the remote runtime finish in schedule order even
        # with latency; the sequence sees c1's verdict before running c2.
        text = """
        tree t {
          sequence {
            action c1(script="S")
            action c2(script="S")
          }
        }
        """
        spec = parse(text).spec
        assignment = {nid: ("remote" if nid.startswith("c") else "main")
                      for nid in spec.preorder()}
        scripts = {"c1": [S], "c2": [S]}
        _, out = run_net(spec, scripts, latency=2, assignment=assignment)
        assert out.quiescent
        assert out.root_status is S
        assert out.faults == []

    def test_halt_converges_to_idle_everywhere(self):
        spec = fig2_tree()
        net = build_network(spec, {"C1": [F], "C2": [S], "a": [R]}, None, 0)
        net.inject_run(net.root_id)
        net.run_until_quiescent(50)
        assert net.node_state("a") is ProcState.RUNNING
        net.inject_halt(net.root_id)
        out = net.run_until_quiescent(50)
        assert out.quiescent
        active = (
            ProcState.RUNNING,
            ProcState.RUNNING_CHILD1,
            ProcState.RUNNING_CHILD2,
            ProcState.HALTING,
        )
        # Every node that was running is back to Idle; already-settled leaves
        # (C1 failed before the halt) keep their verdict until re-armed.
        for nid in spec.preorder():
            assert net.node_state(nid) not in active
        assert net.node_state("root") is ProcState.IDLE
        assert net.node_state("seq") is ProcState.IDLE
        assert net.node_state("a") is ProcState.IDLE
        assert out.faults == []

    def test_emission_discipline_one_verdict_per_activation(self):
        spec = fig2_tree()
        net, out = run_net(spec, {"C1": [F], "C2": [S], "a": [R, S]})
        # Verdicts: C1 fail, C2 succ, a succ, seq succ, root succ = 5 total.
        assert net.emission_counts[SignalKind.SUCC] == 4
        assert net.emission_counts[SignalKind.FAIL] == 1

    def test_determinism(self):
        spec = fig2_tree()
        scripts = {"C1": [F], "C2": [S], "a": [R, R, S]}
        traces = []
        for _ in range(2):
            _, out = run_net(spec, dict(scripts))
            traces.append("\n".join(out.trace_lines))
        assert traces[0] == traces[1]


class TestLeafReply:
    def test_immediate(self):
        assert leaf_reply([S]) == (S, 0)

    def test_delayed_failure(self):
        assert leaf_reply([R, R, F]) == (F, 2)

    def test_forever_running(self):
        assert leaf_reply([R, R]) == (None, 2)


class TestNaryEquivalence:
    @pytest.mark.parametrize("kind", [NodeKind.SEQUENCE, NodeKind.FALLBACK])
    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_network_outcome_matches_combine(self, kind, n):
        spec = nary_spec(kind, n)
        for combo in product((S, F), repeat=n):
            scripts = {f"l{i}": [combo[i]] for i in range(n)}
            _, out = run_net(spec, scripts)
            assert out.quiescent
            assert out.root_status is nary_status(kind, list(combo)), combo
