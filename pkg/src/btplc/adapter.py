"""Bridge between tree-side {run, halt}/{succ, fail} and an edge-triggered FB.

Two layers live here: the state-machine models used for conformance
exploration (`bt_process_model`, `etrig_model`, `adapter_sync_map`) and the
runtime pieces that move real messages (`FbAdapter`, `BtSyncClient`) with a
monotone activation number guarding against stale completions.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .cyclic import ExecState
from .statemachine import StateMachine, Transition, compose, explore


def bt_process_model() -> StateMachine:
    """The four-state tree-action face: Idle/Running/Success/Failure."""
    return StateMachine(
        "bt",
        ["Idle", "Running", "Success", "Failure"],
        "Idle",
        [
            Transition("Idle", "bt.run", "Running", ("bt.start",)),
            Transition("Running", "bt.halt", "Idle", ("bt.cancel",)),
            Transition("Running", "bt.ok", "Success", ("bt.succ",)),
            Transition("Running", "bt.err", "Failure", ("bt.fail",)),
            Transition("Success", "bt.run", "Running", ("bt.start",)),
            Transition("Failure", "bt.run", "Running", ("bt.start",)),
        ],
        ["bt.run", "bt.halt", "bt.ok", "bt.err"],
        ["bt.start", "bt.cancel", "bt.succ", "bt.fail"],
    )


def etrig_model() -> StateMachine:
    """Edge-triggered FB with abort: the six execution states."""
    return StateMachine(
        "fb",
        ["Idle", "Busy", "Done", "Error", "Aborting", "Aborted"],
        "Idle",
        [
            Transition("Idle", "fb.exec_rise", "Busy"),
            Transition("Busy", "fb.plant_done", "Done", ("fb.done",)),
            Transition("Busy", "fb.plant_error", "Error", ("fb.error",)),
            Transition("Busy", "fb.abort", "Aborting"),
            Transition("Aborting", "fb.plant_ack", "Aborted", ("fb.aborted",)),
            Transition("Done", "fb.exec_fall", "Idle"),
            Transition("Error", "fb.exec_fall", "Idle"),
            Transition("Aborted", "fb.exec_fall", "Idle"),
        ],
        [
            "fb.exec_rise",
            "fb.exec_fall",
            "fb.abort",
            "fb.plant_done",
            "fb.plant_error",
            "fb.plant_ack",
        ],
        ["fb.done", "fb.error", "fb.aborted"],
    )


def adapter_sync_map() -> list[tuple[str, str]]:
    """Glue wiring: tree commands drive the FB, FB verdicts answer the tree.

    fb.aborted also relays to bt.err; when the abort was halt-initiated the
    tree side is already Idle, so the failure verdict is dropped there.
    """
    return [
        ("bt.start", "fb.exec_rise"),
        ("bt.cancel", "fb.abort"),
        ("fb.done", "bt.ok"),
        ("fb.error", "bt.err"),
        ("fb.aborted", "bt.err"),
        ("fb.aborted", "fb.exec_fall"),
        ("bt.succ", "fb.exec_fall"),
        ("bt.fail", "fb.exec_fall"),
    ]


def composed_adapter() -> StateMachine:
    return compose(bt_process_model(), etrig_model(), adapter_sync_map())


def explore_adapter():
    return explore(composed_adapter())


def halt_path_terminals(max_steps: int = 6) -> dict[str, int]:
    """From every reachable busy state, follow a halt to its settled state.

    Returns {terminal state: steps needed}; used to show every
    halt-during-Busy path lands on (Idle,Idle) within the step budget.
    """
    sm = composed_adapter()
    report = explore(sm)
    terminals: dict[str, int] = {}
    for state in report.reachable:
        if "Busy" not in state:
            continue
        current = state
        t = sm.step(current, "bt.halt")
        if t is None:
            continue
        current = t.dst
        steps = 1
        # Drive the plant acknowledgment until the pair settles.
        while current != "(Idle,Idle)" and steps < max_steps:
            nxt = sm.step(current, "fb.plant_ack")
            if nxt is None:
                break
            current = nxt.dst
            steps += 1
        terminals[current] = max(terminals.get(current, 0), steps)
    return terminals


# -- runtime message layer -------------------------------------------------


class SyncKind(Enum):
    RUN = "RUN"
    HALT = "HALT"
    SUCC = "SUCC"
    FAIL = "FAIL"


@dataclass(frozen=True)
class SyncMessage:
    seq: int
    kind: SyncKind

    def encode(self) -> str:
        return f"{self.seq}:{self.kind.value}"


def decode_message(line: str) -> SyncMessage:
    seq_text, _, kind_text = line.strip().partition(":")
    return SyncMessage(int(seq_text), SyncKind(kind_text))


class FbAdapter:
    """Server side: turns RUN/HALT into FB inputs and FB outputs into verdicts.

    Commands take effect at the FB's next scan cycle; `fb_inputs()` is read
    by the cyclic harness once per cycle, `on_fb()` is fed the FB state once
    per cycle.
    """

    def __init__(self):
        self.seq = 0
        self.x_execute = False
        self.x_abort = False
        self._halted = False
        self._queued_run: int | None = None

    def on_bt(self, msg: SyncMessage) -> None:
        if msg.kind is SyncKind.RUN:
            if self.x_execute:
                # Prior activation still finalizing: keep the request.
                self._queued_run = msg.seq
                return
            self.seq = msg.seq
            self._halted = False
            self.x_execute = True
            self.x_abort = False
        elif msg.kind is SyncKind.HALT:
            self._queued_run = None
            self._halted = True
            self.x_abort = True

    def fb_inputs(self) -> tuple[bool, bool]:
        return self.x_execute, self.x_abort

    def on_fb(self, state: ExecState) -> SyncMessage | None:
        msg: SyncMessage | None = None
        if state is ExecState.DONE:
            msg = SyncMessage(self.seq, SyncKind.SUCC)
        elif state is ExecState.ERROR:
            msg = SyncMessage(self.seq, SyncKind.FAIL)
        elif state is ExecState.ABORTED:
            # Halt-initiated aborts carry no upward verdict.
            msg = None if self._halted else SyncMessage(self.seq, SyncKind.FAIL)
        if state in (ExecState.DONE, ExecState.ERROR, ExecState.ABORTED):
            self.x_execute = False
            self.x_abort = False
            if self._queued_run is not None:
                self.seq = self._queued_run
                self._queued_run = None
                self._halted = False
                self.x_execute = True
        return msg


class BtSyncClient:
    """Client side: issues numbered RUNs and discards stale answers."""

    def __init__(self):
        self.seq = 0
        self.state = "Idle"  # Idle | Running | Success | Failure
        self.stale_seen = 0

    def run(self) -> SyncMessage:
        self.seq += 1
        self.state = "Running"
        return SyncMessage(self.seq, SyncKind.RUN)

    def halt(self) -> SyncMessage | None:
        if self.state != "Running":
            return None
        self.state = "Idle"
        return SyncMessage(self.seq, SyncKind.HALT)

    def on_answer(self, msg: SyncMessage) -> bool:
        """Apply a SUCC/FAIL; returns False (and changes nothing) if stale."""
        if msg.seq != self.seq or self.state != "Running":
            self.stale_seen += 1
            return False
        self.state = "Success" if msg.kind is SyncKind.SUCC else "Failure"
        return True
