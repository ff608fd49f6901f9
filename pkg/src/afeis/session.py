"""Session wiring: configuration, the live pipeline, and canonical effect records.

A session owns one confirmer, one keymap registry, one interpreter and one
simulated vehicle.  Every entry point (REPL, script runner, server,
experiment trials) drives the same :class:`Session`, so identical input
produces identical effect logs everywhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .confirmer import AcceptedGesture, Confirmer, ConfirmerConfig, DropBelowThreshold, GapFrames
from .errors import ConfigError, DeliveryError, ExecutionError, KeymapError
from .interpreter import (
    DefinedFunction,
    Executed,
    FeedResult,
    Interpreter,
    KeymapChanged,
    Outcome,
    ProgramEffect,
    VariableSet,
    format_number,
    render_body,
)
from .keymap import Keymap, KeymapRegistry, load_keymap_file
from .robot import Robot, RobotView, TrajectoryPoint, default_registry


@dataclass(frozen=True)
class RobotConfig:
    locations: dict[int, tuple[float, float, float]] = field(default_factory=dict)
    commands: dict[str, tuple[str, tuple[float, ...]]] = field(default_factory=dict)
    follow_snapshot_interval: float = 1.0
    circle_seconds: float = 5.0

    def build(self) -> Robot:
        registry = default_registry()
        for name, (builtin, bound) in self.commands.items():
            try:
                registry.alias(name, builtin, bound)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        return Robot(
            registry,
            self.locations,
            follow_snapshot_interval=self.follow_snapshot_interval,
            circle_seconds=self.circle_seconds,
        )


@dataclass(frozen=True)
class SessionConfig:
    """Everything a session needs; ``noise`` is the profile simulated-input
    clients (the operator console's noise toggle, offline replay tools) should
    use, the live pipeline itself never synthesizes frames."""

    keymaps: dict[int, Keymap]
    confirmer: ConfirmerConfig = ConfirmerConfig()
    robot: RobotConfig = RobotConfig()
    noise: object | None = None  # stream_sim.NoiseProfile, imported lazily
    port: int = 7878
    source: Path | None = None

    def __post_init__(self) -> None:
        if 0 not in self.keymaps:
            raise ConfigError("a default keymap with index 0 is required")

    def build_session(self) -> "Session":
        return Session(self)


def _parse_confirmer(data: dict[str, Any]) -> ConfirmerConfig:
    rearm_raw = data.get("rearm", "drop_below_threshold")
    if rearm_raw == "drop_below_threshold":
        rearm = DropBelowThreshold()
    elif isinstance(rearm_raw, dict) and "gap_frames" in rearm_raw:
        rearm = GapFrames(int(rearm_raw["gap_frames"]))
    else:
        raise ConfigError(f"unknown rearm policy {rearm_raw!r}")
    try:
        return ConfirmerConfig(
            window_ms=int(data.get("window_ms", 1000)),
            threshold=int(data.get("threshold", 8)),
            min_fraction=float(data.get("min_fraction", 0.6)),
            rearm=rearm,
            frame_rate_hint=float(data.get("frame_rate_hint", 20.0)),
        )
    except ValueError as exc:
        raise ConfigError(f"bad confirmer config: {exc}") from exc


def _parse_robot(data: dict[str, Any]) -> RobotConfig:
    locations: dict[int, tuple[float, float, float]] = {}
    for key, value in data.get("locations", {}).items():
        try:
            x, y, depth = (float(v) for v in value)
            locations[int(key)] = (x, y, depth)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad location {key!r}: expected [x, y, depth]") from exc
    commands: dict[str, tuple[str, tuple[float, ...]]] = {}
    for name, value in data.get("commands", {}).items():
        if not isinstance(value, dict) or "builtin" not in value:
            raise ConfigError(f"command {name!r} needs {{\"builtin\": ..., \"args\": [...]}}")
        bound = tuple(float(a) for a in value.get("args", ()))
        commands[name] = (str(value["builtin"]), bound)
    return RobotConfig(
        locations=locations,
        commands=commands,
        follow_snapshot_interval=float(data.get("follow_snapshot_interval", 1.0)),
        circle_seconds=float(data.get("circle_seconds", 5.0)),
    )


def load_session_config(path: str | Path) -> SessionConfig:
    """Read and validate a session config file (JSON).

    Keymaps may be given as ``{"keymaps": {"0": "path"}}`` and/or a
    ``"keymap_dir"`` holding ``<index>.keymap`` files.  Every referenced file
    must exist and validate now, not at first use.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    base = path.parent

    keymaps: dict[int, Keymap] = {}
    if "keymap_dir" in data:
        directory = base / data["keymap_dir"]
        if not directory.is_dir():
            raise ConfigError(f"keymap_dir {directory} does not exist")
        for file in sorted(directory.glob("*.keymap")):
            try:
                index = int(file.stem)
            except ValueError:
                continue
            keymaps[index] = _load_keymap(file, index)
    for key, rel in data.get("keymaps", {}).items():
        try:
            index = int(key)
        except ValueError as exc:
            raise ConfigError(f"keymap index {key!r} is not an integer") from exc
        keymaps[index] = _load_keymap(base / rel, index)
    if not keymaps:
        raise ConfigError("config declares no keymaps")

    noise = None
    if "noise" in data:
        from .stream_sim import _profile_from_dict  # lazy: avoids an import cycle

        noise = _profile_from_dict(data["noise"])
    try:
        return SessionConfig(
            keymaps=keymaps,
            confirmer=_parse_confirmer(data.get("confirmer", {})),
            robot=_parse_robot(data.get("robot", {})),
            noise=noise,
            port=int(data.get("port", 7878)),
            source=path,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from exc


def _load_keymap(path: Path, index: int) -> Keymap:
    if not path.is_file():
        raise ConfigError(f"keymap file {path} does not exist")
    try:
        return load_keymap_file(path, index)
    except KeymapError as exc:
        raise ConfigError(f"keymap {path} invalid: {'; '.join(exc.errors)}") from exc


# --- effect records -----------------------------------------------------------

def effect_record(effect: ProgramEffect, env_functions=None) -> dict[str, Any]:
    """Canonical JSON-able record for one program effect."""
    if isinstance(effect, DefinedFunction):
        body: list[str] = []
        if env_functions and effect.slot in env_functions:
            body = render_body(env_functions[effect.slot])
        return {"kind": "defined_function", "slot": effect.slot, "body": body}
    if isinstance(effect, VariableSet):
        return {"kind": "variable_set", "slot": effect.slot, "value": effect.value}
    if isinstance(effect, KeymapChanged):
        return {"kind": "keymap_changed", "index": effect.index}
    assert isinstance(effect, Executed)
    return {
        "kind": "executed",
        "commands": [[c.name, *c.args] for c in effect.commands],
    }


def effect_line(effect: ProgramEffect, env_functions=None) -> str:
    return json.dumps(effect_record(effect, env_functions), sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class FeedReport:
    """Everything one fed gesture produced, for display and logging."""

    result: FeedResult
    delivery_error: str | None = None
    trajectory: tuple[TrajectoryPoint, ...] = ()
    robot: RobotView | None = None


@dataclass(frozen=True)
class FrameReport:
    accepted: AcceptedGesture | None = None
    feed: FeedReport | None = None


class Session:
    """The live pipeline: frames or gestures in, effects and telemetry out."""

    def __init__(self, config: SessionConfig):
        self.config = config
        keymaps = config.keymaps
        registry = KeymapRegistry(keymaps[0])
        for index, keymap in keymaps.items():
            if index != 0:
                registry.register(index, keymap)
        self.registry = registry
        self.interpreter = Interpreter(registry)
        self.confirmer = Confirmer(config.confirmer)
        self.robot = config.robot.build()
        self.effect_log: list[str] = []
        self.delivery_failures: list[str] = []
        self.parse_error_count = 0

    def reset(self) -> None:
        """Back to a fresh session: empty window, cleared tables, vehicle at origin."""
        self.confirmer.reset()
        self.interpreter = Interpreter(self.registry)
        self.registry.activate(0)
        self.robot.reset()
        self.effect_log.clear()
        self.delivery_failures.clear()
        self.parse_error_count = 0

    def feed_gesture(self, gesture: int) -> FeedReport:
        """Feed one already-confirmed gesture through keymap + interpreter.

        An Executed effect is immediately delivered to the vehicle and run,
        mirroring a controller that executes on the closing END.
        """
        result = self.interpreter.feed(gesture)
        return self._after_feed(result)

    def _after_feed(self, result: FeedResult) -> FeedReport:
        if result.outcome is Outcome.PARSE_ERROR:
            self.parse_error_count += 1
        delivery_error: str | None = None
        trajectory: tuple[TrajectoryPoint, ...] = ()
        if result.effect is not None:
            self.effect_log.append(
                effect_line(result.effect, self.interpreter.env.functions)
            )
            if isinstance(result.effect, Executed):
                try:
                    self.robot.deliver(result.effect.commands)
                    trajectory = tuple(self.robot.execute())
                except (DeliveryError, ExecutionError) as exc:
                    delivery_error = str(exc)
                    self.delivery_failures.append(delivery_error)
        return FeedReport(
            result=result,
            delivery_error=delivery_error,
            trajectory=trajectory,
            robot=self.robot.state_snapshot(),
        )

    def push_frame(self, timestamp_ms: int, gesture: int) -> FrameReport:
        accepted = self.confirmer.push_raw(timestamp_ms, gesture)
        if accepted is None:
            return FrameReport()
        return FrameReport(accepted=accepted, feed=self.feed_gesture(accepted.gesture))

    @property
    def clean(self) -> bool:
        return self.parse_error_count == 0 and not self.delivery_failures

    def robot_record(self) -> dict[str, Any]:
        view = self.robot.state_snapshot()
        return {
            "x": view.x,
            "y": view.y,
            "depth": view.depth,
            "heading": view.heading,
            "clock": view.clock,
            "snapshots": [
                {
                    "seq": s.seq,
                    "x": s.x,
                    "y": s.y,
                    "depth": s.depth,
                    "heading": s.heading,
                    "clock": s.clock,
                }
                for s in view.snapshots
            ],
        }

    def keymap_record(self) -> dict[str, Any]:
        keymap = self.registry.active
        tiles = []
        for gesture in range(50):
            system = keymap.system_token_for(gesture)
            tiles.append(
                {
                    "gesture": gesture,
                    "system": system.kind.value if system else None,
                    "fn": keymap.fn.get(gesture),
                    "param": keymap.param.get(gesture),
                }
            )
        return {"index": self.registry.active_index, "tiles": tiles}

    def env_record(self) -> dict[str, Any]:
        env = self.interpreter.env
        return {
            "functions": {str(slot): render_body(body) for slot, body in env.functions.items()},
            "variables": {str(slot): value for slot, value in env.variables.items()},
        }

    def window_record(self) -> dict[str, Any]:
        return {
            "counts": {str(g): c for g, c in sorted(self.confirmer.counts.items())},
            "total": self.confirmer.window_size,
            "threshold": self.confirmer.config.threshold,
        }


def describe_report(report: FeedReport) -> list[str]:
    """Console-friendly lines for one feed outcome."""
    result = report.result
    lines = [f"{result.token.describe():<18} {result.outcome.value}"]
    if result.diagnostic:
        lines.append(f"  ! {result.diagnostic}")
    if result.effect is not None:
        lines.append(f"  effect: {effect_line(result.effect)}")
    for point in report.trajectory:
        lines.append(
            f"  ran {point.command.render()} -> depth {format_number(point.depth)} m, "
            f"heading {format_number(point.heading)} deg"
        )
    if report.delivery_error:
        lines.append(f"  ! delivery failed: {report.delivery_error}")
    return lines
