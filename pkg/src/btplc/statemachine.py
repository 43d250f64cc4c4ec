"""Small labeled-transition-system toolkit: composition and reachability.

Machines react to named inputs and may emit named outputs. `compose` builds
a synchronized product: outputs listed in the sync map are relayed to the
mapped inputs within the same macro transition (run-to-completion), while
unbound inputs stay external.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field


@dataclass(frozen=True)
class Transition:
    src: str
    event: str
    dst: str
    outputs: tuple[str, ...] = ()


class StateMachine:
    def __init__(
        self,
        name: str,
        states: list[str],
        initial: str,
        transitions: list[Transition],
        inputs: list[str],
        outputs: list[str],
    ):
        self.name = name
        self.states = list(states)
        self.initial = initial
        self.transitions = list(transitions)
        self.inputs = list(inputs)
        self.outputs = list(outputs)
        self._table: dict[tuple[str, str], Transition] = {}
        for t in transitions:
            key = (t.src, t.event)
            if key in self._table:
                raise ValueError(f"nondeterministic transition on {key}")
            if t.src not in self.states or t.dst not in self.states:
                raise ValueError(f"transition uses undeclared state: {t}")
            self._table[key] = t

    def step(self, state: str, event: str) -> Transition | None:
        return self._table.get((state, event))

    def enabled(self, state: str) -> list[str]:
        return [e for e in self.inputs if (state, e) in self._table]


@dataclass
class ExplorationReport:
    reachable: list
    transition_count: int
    deadlocks: list
    unreachable_declared: list

    @property
    def state_count(self) -> int:
        return len(self.reachable)


def explore(sm: StateMachine) -> ExplorationReport:
    """BFS over the machine's input alphabet from the initial state.

    A deadlock is a reachable state with no enabled input; ignored inputs do
    not count as transitions.
    """
    seen = {sm.initial}
    order = [sm.initial]
    queue = deque([sm.initial])
    transition_count = 0
    deadlocks = []
    while queue:
        state = queue.popleft()
        enabled = sm.enabled(state)
        if not enabled:
            deadlocks.append(state)
        for event in enabled:
            t = sm.step(state, event)
            transition_count += 1
            if t.dst not in seen:
                seen.add(t.dst)
                order.append(t.dst)
                queue.append(t.dst)
    unreachable = [s for s in sm.states if s not in seen]
    return ExplorationReport(order, transition_count, deadlocks, unreachable)


def compose(
    a: StateMachine,
    b: StateMachine,
    sync_map: list[tuple[str, str]],
) -> StateMachine:
    """Synchronized product of two machines.

    `sync_map` pairs an output of either machine with an input of either
    machine (self-loops through the glue are allowed). Mapped inputs leave
    the external alphabet; a relayed output with no transition in the
    target's current state is dropped.
    """
    machines = {a.name: a, b.name: b}

    def owner_of_input(port: str) -> str:
        for m in machines.values():
            if port in m.inputs:
                return m.name
        raise ValueError(f"sync map references unknown input port '{port}'")

    for out, inp in sync_map:
        if not any(out in m.outputs for m in machines.values()):
            raise ValueError(f"sync map references unknown output port '{out}'")
        owner_of_input(inp)

    bound_inputs = {inp for _, inp in sync_map}
    external = [
        i for m in (a, b) for i in m.inputs if i not in bound_inputs
    ]
    relays: dict[str, list[str]] = {}
    for out, inp in sync_map:
        relays.setdefault(out, []).append(inp)

    def macro(state: tuple[str, str], event: str) -> tuple[tuple[str, str], tuple[str, ...]] | None:
        current = {a.name: state[0], b.name: state[1]}
        owner = owner_of_input(event)
        first = machines[owner].step(current[owner], event)
        if first is None:
            return None
        current[owner] = first.dst
        emitted: list[str] = []
        work = deque(first.outputs)
        guard = 0
        while work:
            out = work.popleft()
            emitted.append(out)
            guard += 1
            if guard > 64:
                raise RuntimeError("relay cascade did not settle")
            for inp in relays.get(out, ()):
                target = owner_of_input(inp)
                t = machines[target].step(current[target], inp)
                if t is not None:
                    current[target] = t.dst
                    work.extend(t.outputs)
        return (current[a.name], current[b.name]), tuple(emitted)

    initial = (a.initial, b.initial)
    states = [initial]
    seen = {initial}
    transitions: list[Transition] = []
    queue = deque([initial])
    while queue:
        st = queue.popleft()
        for event in external:
            res = macro(st, event)
            if res is None:
                continue
            dst, outs = res
            transitions.append(
                Transition(_pair_name(st), event, _pair_name(dst), outs)
            )
            if dst not in seen:
                seen.add(dst)
                states.append(dst)
                queue.append(dst)
    return StateMachine(
        f"{a.name}x{b.name}",
        [_pair_name(s) for s in states],
        _pair_name(initial),
        transitions,
        external,
        sorted(set(a.outputs) | set(b.outputs)),
    )


def _pair_name(state: tuple[str, str]) -> str:
    return f"({state[0]},{state[1]})"
