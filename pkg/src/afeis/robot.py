"""Simulated underwater vehicle: buffered command delivery and kinematic execution.

The vehicle stores every command list it is handed and moves only when told
to execute, mirroring a controller that acts on an explicit EXECUTE.  Motion
is instantaneous kinematics on a pose (x, y, depth, heading) plus a clock
and a snapshot log; there are no dynamics and no water.

Axis conventions (documented because nothing upstream fixes them): x/y are
meters in a top-down plane, heading is degrees in [0, 360) with 0 along +x
and RIGHT turning toward +y; LEFT decreases heading.  Depth is meters,
positive downward, clamped at the surface (0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .errors import DeliveryError, ExecutionError
from .interpreter import ConcreteCommand

Pose = tuple[float, float, float, float]  # x, y, depth, heading


@dataclass(frozen=True, slots=True)
class Snapshot:
    seq: int
    x: float
    y: float
    depth: float
    heading: float
    clock: float


@dataclass(frozen=True, slots=True)
class TrajectoryPoint:
    """Pose and clock right after one command was applied."""

    command: ConcreteCommand
    x: float
    y: float
    depth: float
    heading: float
    clock: float


@dataclass(frozen=True)
class RobotView:
    """Read-only copy of the vehicle state, safe to publish."""

    x: float
    y: float
    depth: float
    heading: float
    clock: float
    snapshots: tuple[Snapshot, ...]
    buffered: int

    def pose(self) -> Pose:
        return (self.x, self.y, self.depth, self.heading)


@dataclass(frozen=True, slots=True)
class CommandSpec:
    """One executable command: argument contract plus its state transition."""

    name: str
    min_args: int
    max_args: int
    apply: Callable[["Robot", Sequence[float | str]], None]
    symbolic_ok: bool = False


class CommandRegistry:
    """Name -> command spec table; extendable from configuration.

    Configuration entries bind a new name to a built-in effect, optionally
    with arguments fixed up front (e.g. ``GOTO1`` meaning ``GOTO`` with
    location 1), so keymap command words can match the vehicle without code
    changes.
    """

    def __init__(self) -> None:
        self._specs: dict[str, CommandSpec] = {}

    def add(self, spec: CommandSpec) -> None:
        self._specs[spec.name] = spec

    def get(self, name: str) -> CommandSpec | None:
        return self._specs.get(name)

    def names(self) -> tuple[str, ...]:
        return tuple(sorted(self._specs))

    def alias(self, name: str, builtin: str, bound_args: Sequence[float] = ()) -> None:
        base = self._specs.get(builtin)
        if base is None:
            raise ValueError(f"cannot alias {name!r}: no built-in command {builtin!r}")
        bound = tuple(float(a) for a in bound_args)
        remaining_min = max(0, base.min_args - len(bound))
        remaining_max = max(0, base.max_args - len(bound))

        def apply(robot: "Robot", args: Sequence[float | str]) -> None:
            base.apply(robot, [*bound, *args])

        self.add(CommandSpec(name, remaining_min, remaining_max, apply, base.symbolic_ok))

    def validate(self, command: ConcreteCommand) -> None:
        spec = self._specs.get(command.name)
        if spec is None:
            raise DeliveryError(f"unknown command {command.name!r}")
        n = len(command.args)
        if not spec.min_args <= n <= spec.max_args:
            if spec.min_args == spec.max_args:
                expected = str(spec.min_args)
            else:
                expected = f"{spec.min_args}..{spec.max_args}"
            raise DeliveryError(
                f"{command.name} takes {expected} argument(s), got {n}"
            )
        if not spec.symbolic_ok:
            for arg in command.args:
                if isinstance(arg, str):
                    raise DeliveryError(
                        f"{command.name} takes numeric arguments, got symbol {arg!r}"
                    )


def _builtin(name: str, min_args: int, max_args: int):
    def register(fn):
        _BUILTINS.append(CommandSpec(name, min_args, max_args, fn))
        return fn

    return register


_BUILTINS: list[CommandSpec] = []


@_builtin("FORWARD", 1, 1)
def _cmd_forward(robot: "Robot", args) -> None:
    d = float(args[0])
    rad = math.radians(robot.heading)
    robot.x += d * math.cos(rad)
    robot.y += d * math.sin(rad)


@_builtin("UP", 1, 1)
def _cmd_up(robot: "Robot", args) -> None:
    robot.depth = max(0.0, robot.depth - float(args[0]))


@_builtin("DOWN", 1, 1)
def _cmd_down(robot: "Robot", args) -> None:
    robot.depth = max(0.0, robot.depth + float(args[0]))


@_builtin("LEFT", 1, 1)
def _cmd_left(robot: "Robot", args) -> None:
    robot.heading = (robot.heading - float(args[0])) % 360.0


@_builtin("RIGHT", 1, 1)
def _cmd_right(robot: "Robot", args) -> None:
    robot.heading = (robot.heading + float(args[0])) % 360.0


@_builtin("SNAPSHOT", 0, 0)
def _cmd_snapshot(robot: "Robot", args) -> None:
    robot.take_snapshot()


@_builtin("GOTO", 1, 1)
def _cmd_goto(robot: "Robot", args) -> None:
    key = int(args[0])
    location = robot.locations.get(key)
    if location is None:
        raise ExecutionError(f"GOTO {key}: no such configured location")
    robot.x, robot.y, robot.depth = location
    robot.depth = max(0.0, robot.depth)


@_builtin("WAIT", 1, 1)
def _cmd_wait(robot: "Robot", args) -> None:
    robot.clock += float(args[0])


@_builtin("SURFACE", 0, 0)
def _cmd_surface(robot: "Robot", args) -> None:
    robot.depth = 0.0


@_builtin("GOBACK", 0, 0)
def _cmd_goback(robot: "Robot", args) -> None:
    robot.x, robot.y, robot.depth, robot.heading = robot.home


@_builtin("CIRCLE", 0, 1)
def _cmd_circle(robot: "Robot", args) -> None:
    laps = float(args[0]) if args else 1.0
    robot.clock += laps * robot.circle_seconds  # pose-neutral maneuver


@_builtin("FOLLOW", 1, 2)
def _cmd_follow(robot: "Robot", args) -> None:
    duration = float(args[0])
    interval = float(args[1]) if len(args) > 1 else robot.follow_snapshot_interval
    if interval <= 0:
        raise ExecutionError("FOLLOW snapshot interval must be positive")
    elapsed = interval
    while elapsed <= duration + 1e-9:
        robot.clock += interval
        robot.take_snapshot()
        elapsed += interval
    remainder = duration - (elapsed - interval)
    if remainder > 0:
        robot.clock += remainder


def default_registry() -> CommandRegistry:
    registry = CommandRegistry()
    for spec in _BUILTINS:
        registry.add(spec)
    return registry


@dataclass
class RobotState:
    x: float = 0.0
    y: float = 0.0
    depth: float = 0.0
    heading: float = 0.0
    clock: float = 0.0
    snapshots: list[Snapshot] = field(default_factory=list)
    buffer: list[ConcreteCommand] = field(default_factory=list)


class Robot:
    """Single-owner simulated vehicle."""

    def __init__(
        self,
        registry: CommandRegistry | None = None,
        locations: Mapping[int, tuple[float, float, float]] | None = None,
        *,
        follow_snapshot_interval: float = 1.0,
        circle_seconds: float = 5.0,
    ):
        self.registry = registry or default_registry()
        self.locations = dict(locations or {})
        self.follow_snapshot_interval = follow_snapshot_interval
        self.circle_seconds = circle_seconds
        self._state = RobotState()
        self._snapshot_seq = 0
        self.home: Pose = (0.0, 0.0, 0.0, 0.0)

    # pose fields proxied so command implementations read naturally
    @property
    def x(self) -> float:
        return self._state.x

    @x.setter
    def x(self, value: float) -> None:
        self._state.x = value

    @property
    def y(self) -> float:
        return self._state.y

    @y.setter
    def y(self, value: float) -> None:
        self._state.y = value

    @property
    def depth(self) -> float:
        return self._state.depth

    @depth.setter
    def depth(self, value: float) -> None:
        self._state.depth = value

    @property
    def heading(self) -> float:
        return self._state.heading

    @heading.setter
    def heading(self, value: float) -> None:
        self._state.heading = value

    @property
    def clock(self) -> float:
        return self._state.clock

    @clock.setter
    def clock(self, value: float) -> None:
        self._state.clock = value

    def take_snapshot(self) -> Snapshot:
        self._snapshot_seq += 1
        snap = Snapshot(
            self._snapshot_seq,
            self._state.x,
            self._state.y,
            self._state.depth,
            self._state.heading,
            self._state.clock,
        )
        self._state.snapshots.append(snap)
        return snap

    def reset(self) -> None:
        """Return to origin, clear logs and buffer, and re-record home."""
        self._state = RobotState()
        self._snapshot_seq = 0
        self.home = (0.0, 0.0, 0.0, 0.0)

    def deliver(self, commands: Sequence[ConcreteCommand]) -> None:
        """Buffer a command list after validating all of it; no motion happens.

        Validation is all-or-nothing: one bad command rejects the whole list
        and the buffer is left untouched.
        """
        for command in commands:
            self.registry.validate(command)
        self._state.buffer.extend(commands)

    def execute(self) -> list[TrajectoryPoint]:
        """Apply every buffered command in order and clear the buffer."""
        pending = list(self._state.buffer)
        self._state.buffer.clear()
        log: list[TrajectoryPoint] = []
        for command in pending:
            spec = self.registry.get(command.name)
            if spec is None:  # buffer can only hold validated commands
                raise ExecutionError(f"unknown command {command.name!r}")
            spec.apply(self, command.args)
            state = self._state
            log.append(
                TrajectoryPoint(
                    command, state.x, state.y, state.depth, state.heading, state.clock
                )
            )
        return log

    def state_snapshot(self) -> RobotView:
        state = self._state
        return RobotView(
            x=state.x,
            y=state.y,
            depth=state.depth,
            heading=state.heading,
            clock=state.clock,
            snapshots=tuple(state.snapshots),
            buffered=len(state.buffer),
        )


def trajectory_lines(log: Sequence[TrajectoryPoint]) -> list[str]:
    """Line-delimited export of an execution log."""
    return [
        f"{p.command.render()} -> x={p.x:.3f} y={p.y:.3f} depth={p.depth:.3f} "
        f"heading={p.heading:.1f} clock={p.clock:.2f}"
        for p in log
    ]
