import pytest

from btplc.core import NodeKind, NodeSpec, NodeStatus, TreeSpec, fig2_tree
from btplc.cyclic import (
    CyclicEngine,
    ExecState,
    ScriptBehavior,
    build_script_behaviors,
    output_flags,
    state_to_status,
)

S, F, R = NodeStatus.SUCCESS, NodeStatus.FAILURE, NodeStatus.RUNNING


def single_leaf(script):
    spec = TreeSpec("t", {"a": NodeSpec("a", NodeKind.ACTION, (), "a")}, "a")
    return CyclicEngine(spec, {"a": ScriptBehavior(script)})


def fig2_engine(c1, c2, a):
    spec = fig2_tree()
    return CyclicEngine(
        spec, build_script_behaviors(spec, {"C1": c1, "C2": c2, "a": a})
    )


class TestOutputFlags:
    @pytest.mark.parametrize("state", list(ExecState))
    def test_at_most_one_result_flag(self, state):
        flags = output_flags(state)
        results = [flags["xDone"], flags["xError"], flags["xAborted"]]
        assert sum(results) <= 1
        if any(results):
            assert not flags["xBusy"] or state is ExecState.ABORTING
        if state is ExecState.IDLE:
            assert not any(flags.values())

    def test_status_mapping(self):
        assert state_to_status(ExecState.IDLE) is None
        assert state_to_status(ExecState.BUSY) is R
        assert state_to_status(ExecState.ABORTING) is R
        assert state_to_status(ExecState.DONE) is S
        assert state_to_status(ExecState.ERROR) is F
        assert state_to_status(ExecState.ABORTED) is F


class TestLeafCycle:
    def test_rising_edge_starts_busy(self):
        eng = single_leaf([R, R, S])
        eng.set_root_execute(True)
        eng.scan()
        assert eng.root_state() is ExecState.BUSY

    def test_completion_latches_done_while_execute_held(self):
        eng = single_leaf([R, S])
        eng.set_root_execute(True)
        eng.scan()
        eng.scan()
        assert eng.root_state() is ExecState.DONE
        eng.scan()
        assert eng.root_state() is ExecState.DONE

    def test_failure_reports_error(self):
        eng = single_leaf([F])
        eng.set_root_execute(True)
        eng.scan()
        assert eng.root_state() is ExecState.ERROR

    def test_deassert_returns_to_idle(self):
        eng = single_leaf([R, S])
        eng.set_root_execute(True)
        eng.scan()
        eng.scan()
        eng.set_root_execute(False)
        eng.scan()
        assert eng.root_state() is ExecState.IDLE

    def test_abort_handshake_within_two_cycles(self):
        eng = single_leaf([R, R, R, R])
        eng.set_root_execute(True)
        eng.scan()
        assert eng.root_state() is ExecState.BUSY
        eng.rt["a"].x_abort = True
        eng.scan()
        assert eng.root_state() is ExecState.ABORTED

    def test_no_edge_no_start(self):
        eng = single_leaf([R, S])
        eng.scan()
        assert eng.root_state() is ExecState.IDLE


class TestControlCycle:
    def test_sequence_both_done_same_cycle(self):
        nodes = {
            "r": NodeSpec("r", NodeKind.SEQUENCE, ("x", "y")),
            "x": NodeSpec("x", NodeKind.ACTION, (), "x"),
            "y": NodeSpec("y", NodeKind.ACTION, (), "y"),
        }
        spec = TreeSpec("t", nodes, "r")
        eng = CyclicEngine(spec, build_script_behaviors(spec, {"x": [S], "y": [S]}))
        eng.set_root_execute(True)
        eng.scan()
        assert eng.root_state() is ExecState.DONE

    def test_sequence_holds_at_busy_child(self):
        nodes = {
            "r": NodeSpec("r", NodeKind.SEQUENCE, ("x", "y", "z")),
            "x": NodeSpec("x", NodeKind.ACTION, (), "x"),
            "y": NodeSpec("y", NodeKind.ACTION, (), "y"),
            "z": NodeSpec("z", NodeKind.ACTION, (), "z"),
        }
        spec = TreeSpec("t", nodes, "r")
        eng = CyclicEngine(
            spec, build_script_behaviors(spec, {"x": [S], "y": [R, R, S], "z": [S]})
        )
        eng.set_root_execute(True)
        eng.scan()
        assert eng.rt["y"].state is ExecState.BUSY
        assert eng.rt["z"].state is ExecState.IDLE  # not started past the busy child
        assert eng.root_state() is ExecState.BUSY

    def test_sequence_child_error_propagates(self):
        nodes = {
            "r": NodeSpec("r", NodeKind.SEQUENCE, ("x", "y")),
            "x": NodeSpec("x", NodeKind.ACTION, (), "x"),
            "y": NodeSpec("y", NodeKind.ACTION, (), "y"),
        }
        spec = TreeSpec("t", nodes, "r")
        eng = CyclicEngine(spec, build_script_behaviors(spec, {"x": [F], "y": [S]}))
        eng.set_root_execute(True)
        eng.scan()
        assert eng.root_state() is ExecState.ERROR
        assert eng.rt["y"].state is ExecState.IDLE

    def test_fallback_first_success_short_circuits(self):
        nodes = {
            "r": NodeSpec("r", NodeKind.FALLBACK, ("x", "y")),
            "x": NodeSpec("x", NodeKind.ACTION, (), "x"),
            "y": NodeSpec("y", NodeKind.ACTION, (), "y"),
        }
        spec = TreeSpec("t", nodes, "r")
        eng = CyclicEngine(spec, build_script_behaviors(spec, {"x": [S], "y": [S]}))
        eng.set_root_execute(True)
        eng.scan()
        assert eng.root_state() is ExecState.DONE
        assert eng.rt["y"].state is ExecState.IDLE

    def test_fallback_advances_past_failure(self):
        nodes = {
            "r": NodeSpec("r", NodeKind.FALLBACK, ("x", "y")),
            "x": NodeSpec("x", NodeKind.ACTION, (), "x"),
            "y": NodeSpec("y", NodeKind.ACTION, (), "y"),
        }
        spec = TreeSpec("t", nodes, "r")
        eng = CyclicEngine(spec, build_script_behaviors(spec, {"x": [F], "y": [R, S]}))
        eng.set_root_execute(True)
        eng.scan()
        assert eng.rt["y"].state is ExecState.BUSY
        eng.scan()
        assert eng.root_state() is ExecState.DONE


class TestScanExamples:
    def test_fig2_cycle0_same_cycle_resolution(self):
        eng = fig2_engine([F], [S], [R, R, S])
        eng.set_root_execute(True)
        rec = eng.scan()
        assert dict(rec.states) == {
            "root": ExecState.BUSY,
            "C1": ExecState.ERROR,
            "seq": ExecState.BUSY,
            "C2": ExecState.DONE,
            "a": ExecState.BUSY,
        }

    def test_no_execute_everything_idle(self):
        eng = fig2_engine([F], [S], [R])
        rec = eng.scan()
        assert all(st is ExecState.IDLE for _, st in rec.states)

    def test_reactive_condition_flip_aborts_action_same_cycle(self):
        # C1 flips to Success while the action is mid-flight: the root reports
        # Done in that very cycle and the action receives the abort request.
        eng = fig2_engine([F, F, F, S], [S], [R, R, R, R, R, R])
        eng.set_root_execute(True)
        for _ in range(3):
            eng.scan()
            assert eng.root_state() is ExecState.BUSY
            assert eng.rt["a"].state is ExecState.BUSY
        eng.scan()
        assert eng.root_state() is ExecState.DONE
        assert eng.rt["a"].x_abort
        eng.scan()
        assert eng.rt["a"].state in (ExecState.ABORTED, ExecState.IDLE)

    def test_guard_failure_aborts_running_action(self):
        # C2 drops back to Failure mid-action: the sequence fails and the
        # action is released with an abort.
        eng = fig2_engine([F], [S, S, F], [R, R, R, R])
        eng.set_root_execute(True)
        eng.scan()
        eng.scan()
        assert eng.rt["a"].state is ExecState.BUSY
        eng.scan()
        assert eng.root_state() is ExecState.ERROR
        assert eng.rt["a"].x_abort
        eng.scan()


class TestRun:
    def test_condition_eventually_allows_success(self):
        eng = fig2_engine([F, F, S], [S], [R, R, R, S])
        result = eng.run(10)
        assert result.outcome == "done"
        assert result.cycles == 3  # Done observed in cycle index 2

    def test_budget_exhaustion(self):
        eng = single_leaf([R])
        result = eng.run(5)
        assert result.outcome == "budget"
        assert result.cycles == 5

    def test_failure_without_restart(self):
        eng = single_leaf([R, F])
        result = eng.run(10)
        assert result.outcome == "failed"
        assert result.cycles == 2

    def test_trace_format(self):
        eng = single_leaf([R, S])
        result = eng.run(10)
        lines = result.trace.lines()
        assert lines[0] == "cycle;node;state"
        assert lines[1] == "0;a;BUSY"
        assert lines[2] == "1;a;DONE"

    def test_determinism_byte_identical(self):
        runs = []
        for _ in range(2):
            eng = fig2_engine([F, F, S], [S], [R, R, R, S])
            runs.append(eng.run(10).trace.text())
        assert runs[0] == runs[1]


class TestInvariants:
    def test_each_node_recorded_once_per_cycle(self):
        eng = fig2_engine([F, F, S], [S], [R, S])
        eng.set_root_execute(True)
        for _ in range(4):
            rec = eng.scan()
            ids = [nid for nid, _ in rec.states]
            assert len(ids) == len(set(ids)) == 5

    def test_abort_soundness_no_silent_drop(self):
        # Whenever a busy node loses its demand, it sees xAbort before Idle.
        eng = fig2_engine([F, F, S, S], [S], [R, R, R, R])
        eng.set_root_execute(True)
        seen_abort = False
        for _ in range(6):
            eng.scan()
            if eng.rt["a"].x_abort:
                seen_abort = True
            if eng.rt["a"].state is ExecState.ABORTED:
                assert seen_abort
        assert seen_abort

    def test_condition_script_with_running_rejected(self):
        spec = fig2_tree()
        with pytest.raises(ValueError):
            build_script_behaviors(spec, {"C1": [R], "C2": [S], "a": [R]})

    def test_missing_behavior_rejected(self):
        spec = fig2_tree()
        with pytest.raises(KeyError):
            CyclicEngine(spec, {})
