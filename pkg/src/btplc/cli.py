"""Command-line harness: scenario runs, the verifier, and the demos.

Exit codes: 0 the root settled successfully, 2 the run exhausted its budget
(or ended in failure / non-quiescence), 1 a harness fault such as an
unreadable tree file or an unknown leaf binding.
"""
from __future__ import annotations

import argparse
import sys
import time
from importlib import resources
from pathlib import Path

from .adapter import explore_adapter, halt_path_terminals
from .axis import AxisModel, axis_bindings
from .core import NodeStatus, TreeSpec
from .cyclic import CyclicEngine, LeafBehavior, ScriptBehavior
from .dsl import parse
from .events import build_network
from .verify import run_verify

AXIS_BINDING_NAMES = {"Power", "Reset", "MoveTo", "AxisPowered", "NoAxisError"}

_SCRIPT_CHARS = {
    "R": NodeStatus.RUNNING,
    "S": NodeStatus.SUCCESS,
    "F": NodeStatus.FAILURE,
}


class HarnessFault(RuntimeError):
    pass


def parse_script_text(text: str) -> list[NodeStatus]:
    chars = [c for c in text.upper() if c not in ", "]
    bad = [c for c in chars if c not in _SCRIPT_CHARS]
    if bad or not chars:
        raise HarnessFault(f"malformed script {text!r}: use characters R, S, F")
    return [_SCRIPT_CHARS[c] for c in chars]


def demo_tree_path() -> Path:
    return Path(resources.files("btplc").joinpath("trees/demo.bt"))


def load_tree(path_text: str) -> TreeSpec:
    path = Path(path_text)
    if not path.exists() and path_text in ("demo", "demo.bt"):
        path = demo_tree_path()
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise HarnessFault(f"cannot read tree file '{path_text}': {exc}")
    result = parse(text)
    if not result.ok:
        msgs = "\n".join(str(d) for d in result.diagnostics)
        raise HarnessFault(f"tree file '{path_text}' has errors:\n{msgs}")
    return result.spec


def build_cyclic_engine(
    spec: TreeSpec, cycle_time: float, fault_at: int | None
) -> CyclicEngine:
    needs_axis = any(
        spec.node(leaf).binding in AXIS_BINDING_NAMES for leaf in spec.leaves()
    )
    axis = None
    factories = {}
    if needs_axis:
        axis = AxisModel(cycle_time=cycle_time, fault_at_cycle=fault_at)
        factories = axis_bindings(axis)
    behaviors: dict[str, LeafBehavior] = {}
    for leaf in spec.leaves():
        node = spec.node(leaf)
        params = node.param_dict()
        if "script" in params:
            behaviors[leaf] = ScriptBehavior(parse_script_text(str(params["script"])))
        elif node.binding in factories:
            behaviors[leaf] = factories[node.binding](params)
        else:
            raise HarnessFault(f"unknown leaf binding '{node.binding}' for node '{leaf}'")
    return CyclicEngine(spec, behaviors, plant=axis)


def collect_event_scripts(spec: TreeSpec) -> dict[str, list[NodeStatus]]:
    scripts: dict[str, list[NodeStatus]] = {}
    for leaf in spec.leaves():
        params = spec.node(leaf).param_dict()
        if "script" not in params:
            raise HarnessFault(
                f"unknown leaf binding '{spec.node(leaf).binding}' for node "
                f"'{leaf}': the event engine runs scripted leaves only"
            )
        scripts[leaf] = parse_script_text(str(params["script"]))
    return scripts


def _write_trace(path_text: str | None, text: str) -> None:
    if path_text:
        Path(path_text).write_bytes(text.encode("utf-8"))
    else:
        sys.stdout.write(text)


def cmd_run(args) -> int:
    spec = load_tree(args.tree)
    cycle_time = args.cycle_time_ms / 1000.0
    if args.engine == "cyclic":
        engine = build_cyclic_engine(spec, cycle_time, args.fault_at)
        result = engine.run(args.cycles, restart_on_failure=True)
        _write_trace(args.trace, result.trace.text())
        if args.figures:
            from .report import render_run_figures

            stem = Path(args.trace).stem if args.trace else spec.name
            for fig in render_run_figures(result.trace, Path(args.figures), stem):
                print(f"figure: {fig}", file=sys.stderr)
        if result.outcome == "done":
            return 0
        print(f"outcome: {result.outcome} after {result.cycles} cycles", file=sys.stderr)
        return 2
    scripts = collect_event_scripts(spec)
    net = build_network(spec, scripts, None, 0)
    net.inject_run(net.root_id)
    outcome = net.run_until_quiescent(args.cycles)
    _write_trace(args.trace, "\n".join(outcome.trace_lines) + "\n")
    if not outcome.quiescent:
        print(f"outcome: non-quiescent, queues {outcome.queue_snapshot}", file=sys.stderr)
        return 2
    if outcome.root_status is NodeStatus.SUCCESS:
        return 0
    print(f"outcome: root {outcome.root_status}", file=sys.stderr)
    return 2


def cmd_verify(args) -> int:
    t0 = time.time()
    report = run_verify(args.trees, args.depth, args.seed)
    elapsed = time.time() - t0
    for m in report.mismatches:
        print(f"FAIL {m.summary()}")
        print(m.dsl)
        for leaf, script in m.scripts.items():
            print(f"  {leaf}: {''.join(s.value[0].upper() for s in script)}")
    verdict = "pass" if report.ok else f"FAIL ({len(report.mismatches)} mismatches)"
    print(f"verify: {args.trees} trees, depth {args.depth}, seed {args.seed}: "
          f"{verdict} in {elapsed:.1f}s")
    return 0 if report.ok else 1


def cmd_explore_adapter(args) -> int:
    report = explore_adapter()
    print(f"states: {report.state_count}")
    for state in report.reachable:
        print(f"  {state}")
    print(f"transitions: {report.transition_count}")
    print(f"deadlocks: {len(report.deadlocks)}")
    for d in report.deadlocks:
        print(f"  {d}")
    terminals = halt_path_terminals()
    print("halt-path terminals:")
    for state, steps in sorted(terminals.items()):
        print(f"  {state} within {steps} transitions")
    return 0 if not report.deadlocks else 1


DIST_DEMO_TEXT = """\
tree dist_demo {
  sequence {
    fallback {
      action robot_pick(script="RS")
      action robot_recover(script="RRS")
    }
    action drive_move(script="RRRS")
  }
}
"""

DIST_ASSIGNMENT = {
    "robot_pick": "robot",
    "robot_recover": "robot",
    "drive_move": "drive",
}


def cmd_dist_demo(args) -> int:
    if args.latency < 0:
        raise HarnessFault("latency must be >= 0")
    text = DIST_DEMO_TEXT
    if args.robot_fail:
        text = text.replace('robot_pick(script="RS")', 'robot_pick(script="RF")')
    spec = parse(text).spec
    scripts = collect_event_scripts(spec)
    assignment = {
        nid: DIST_ASSIGNMENT.get(nid, "coordinator") for nid in spec.preorder()
    }
    net = build_network(spec, scripts, assignment, args.latency)
    net.inject_run(net.root_id)
    outcome = net.run_until_quiescent(args.rounds)
    _write_trace(args.trace, "\n".join(outcome.trace_lines) + "\n")
    if not outcome.quiescent:
        print(f"outcome: non-quiescent, queues {outcome.queue_snapshot}", file=sys.stderr)
        return 2
    print(
        f"dist-demo: latency {args.latency}, {outcome.rounds} rounds, "
        f"root {outcome.root_status.value if outcome.root_status else 'idle'}",
        file=sys.stderr,
    )
    return 0 if outcome.root_status is NodeStatus.SUCCESS else 2


def _load_config(path_text: str) -> dict[str, str]:
    try:
        lines = Path(path_text).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise HarnessFault(f"cannot read config '{path_text}': {exc}")
    values: dict[str, str] = {}
    for raw in lines:
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise HarnessFault(f"config line is not key=value: {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="btplc")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a tree file against an engine")
    run.add_argument("--tree", required=True)
    run.add_argument("--engine", choices=("cyclic", "event"), default="cyclic")
    run.add_argument("--cycles", type=int, default=1000)
    run.add_argument("--cycle-time-ms", type=float, default=10.0)
    run.add_argument("--fault-at", type=int, default=None)
    run.add_argument("--trace", default=None)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--figures", default=None, help="directory for report figures")
    run.add_argument("--config", default=None, help="key=value defaults file")
    run.set_defaults(func=cmd_run)

    verify = sub.add_parser("verify", help="oracle-equivalence check on random trees")
    verify.add_argument("--trees", type=int, default=500)
    verify.add_argument("--depth", type=int, default=4)
    verify.add_argument("--seed", type=int, default=42)
    verify.set_defaults(func=cmd_verify)

    exp = sub.add_parser("explore-adapter", help="reachability report of the adapter")
    exp.set_defaults(func=cmd_explore_adapter)

    dist = sub.add_parser("dist-demo", help="tree split across three event runtimes")
    dist.add_argument("--latency", type=int, default=0)
    dist.add_argument("--rounds", type=int, default=500)
    dist.add_argument("--robot-fail", action="store_true")
    dist.add_argument("--trace", default=None)
    dist.set_defaults(func=cmd_dist_demo)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        # Config files supply defaults; explicit flags win.
        if "--config" in argv:
            cfg_path = argv[argv.index("--config") + 1]
            values = _load_config(cfg_path)
            insert = []
            for key, value in values.items():
                flag = "--" + key.replace("_", "-")
                if flag not in argv:
                    insert.extend([flag, value])
            argv = argv[:1] + insert + argv[1:]
        args = parser.parse_args(argv)
        return args.func(args)
    except HarnessFault as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
