"""Simulated motion axis plant and its edge-triggered control behaviors.

The axis follows a constant-velocity profile with an exact snap onto the
target, so completion times stay analytically checkable. A fault schedule
can force the axis into ErrorStop at a given cycle; that is the only path
into ErrorStop.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .core import NodeStatus
from .cyclic import LeafBehavior


class AxisState(Enum):
    DISABLED = "Disabled"
    STANDSTILL = "Standstill"
    DISCRETE_MOTION = "DiscreteMotion"
    ERROR_STOP = "ErrorStop"


class AxisCommandError(RuntimeError):
    pass


@dataclass
class AxisModel:
    position: float = 0.0
    velocity: float = 0.0
    target: float = 0.0
    cycle_time: float = 0.01
    fault_at_cycle: int | None = None
    state: AxisState = AxisState.DISABLED

    # -- commands (issued by the FBs during the scan) ----------------------

    def power_on(self) -> None:
        if self.state is AxisState.DISABLED:
            self.state = AxisState.STANDSTILL

    def power_off(self) -> None:
        self.state = AxisState.DISABLED

    def reset(self) -> None:
        if self.state is not AxisState.ERROR_STOP:
            raise AxisCommandError("reset accepted only in ErrorStop")
        self.state = AxisState.STANDSTILL

    def command_move(self, target: float, velocity: float) -> None:
        if self.state is not AxisState.STANDSTILL:
            raise AxisCommandError("motion accepted only in Standstill")
        if velocity <= 0:
            raise AxisCommandError("velocity must be positive")
        self.target = target
        self.velocity = velocity
        self.state = AxisState.DISCRETE_MOTION

    def halt_motion(self) -> None:
        if self.state is AxisState.DISCRETE_MOTION:
            self.state = AxisState.STANDSTILL

    # -- simulation --------------------------------------------------------

    def begin_cycle(self, cycle: int) -> None:
        if self.fault_at_cycle is not None and cycle == self.fault_at_cycle:
            self.state = AxisState.ERROR_STOP

    def step(self, cycle: int) -> None:
        """Kinematics for one scan cycle; position moves only in DiscreteMotion."""
        if self.state is not AxisState.DISCRETE_MOTION:
            return
        delta = self.velocity * self.cycle_time
        if abs(self.target - self.position) < delta or abs(
            self.target - self.position
        ) == delta:
            self.position = self.target
            self.state = AxisState.STANDSTILL
        else:
            self.position += delta if self.target > self.position else -delta

    def telemetry(self) -> tuple[str, float]:
        return (self.state.value, self.position)

    def status_flags(self) -> dict[str, bool]:
        """MC_ReadStatus: one boolean per axis state, exactly one true."""
        return {s.name: self.state is s for s in AxisState}


class PowerBehavior(LeafBehavior):
    """Level-style enable: asserts power while active, succeeds once powered.

    The enable latches on the plant side; deactivating the leaf does not
    drop axis power.
    """

    def __init__(self, axis: AxisModel):
        self.axis = axis

    def evaluate(self, cycle: int) -> NodeStatus:
        self.axis.power_on()
        if self.axis.state is not AxisState.DISABLED:
            return NodeStatus.SUCCESS
        return NodeStatus.FAILURE


class ResetBehavior(LeafBehavior):
    """Edge FB: one busy cycle in ErrorStop, then the axis is back in Standstill."""

    def __init__(self, axis: AxisModel):
        self.axis = axis
        self._started: int | None = None
        self._done = False

    def start(self, cycle: int) -> None:
        self._done = False
        self._started = cycle if self.axis.state is AxisState.ERROR_STOP else None

    def evaluate(self, cycle: int) -> NodeStatus:
        if self._done:
            return NodeStatus.SUCCESS
        if self._started is None:
            return NodeStatus.FAILURE
        if cycle == self._started:
            return NodeStatus.RUNNING
        self.axis.reset()
        self._done = True
        return NodeStatus.SUCCESS


class MoveAbsoluteBehavior(LeafBehavior):
    """Edge FB: commands a constant-velocity move, Done when the target holds."""

    def __init__(self, axis: AxisModel, target: float, velocity: float):
        self.axis = axis
        self.target = target
        self.velocity = velocity
        self._active = False
        self._start_failed = False

    def start(self, cycle: int) -> None:
        self._start_failed = False
        try:
            self.axis.command_move(self.target, self.velocity)
            self._active = True
        except AxisCommandError:
            self._active = False
            self._start_failed = True

    def evaluate(self, cycle: int) -> NodeStatus:
        if self._start_failed:
            return NodeStatus.FAILURE
        if self.axis.state is AxisState.ERROR_STOP:
            self._active = False
            return NodeStatus.FAILURE
        if (
            self.axis.position == self.target
            and self.axis.state is AxisState.STANDSTILL
        ):
            self._active = False
            return NodeStatus.SUCCESS
        return NodeStatus.RUNNING

    def abort(self, cycle: int) -> None:
        if self._active:
            self.axis.halt_motion()
            self._active = False


class AxisFlagCondition(LeafBehavior):
    """Condition reading the MC_ReadStatus flags, re-evaluated every cycle."""

    def __init__(self, axis: AxisModel, predicate):
        self.axis = axis
        self.predicate = predicate

    def evaluate(self, cycle: int) -> NodeStatus:
        flags = self.axis.status_flags()
        return NodeStatus.SUCCESS if self.predicate(flags) else NodeStatus.FAILURE


def axis_bindings(axis: AxisModel) -> dict[str, object]:
    """Behavior factories for the leaf names the demo trees use."""
    return {
        "Power": lambda params: PowerBehavior(axis),
        "Reset": lambda params: ResetBehavior(axis),
        "MoveTo": lambda params: MoveAbsoluteBehavior(
            axis, float(params["pos"]), float(params["vel"])
        ),
        "AxisPowered": lambda params: AxisFlagCondition(
            axis, lambda f: not f["DISABLED"]
        ),
        "NoAxisError": lambda params: AxisFlagCondition(
            axis, lambda f: not f["ERROR_STOP"]
        ),
    }
