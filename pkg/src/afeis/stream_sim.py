"""Synthetic gesture streams and seeded robustness experiments.

Real input is messy in specific ways: the operator holds each gesture for a
few dozen frames, the camera catches transient hand shapes while the hand
moves between gestures, and the classifier occasionally mislabels single
frames.  :func:`synthesize` reproduces that texture from an intended gesture
sequence, deterministically for a given seed.

The experiment harness replays whole tasks through the full pipeline
(synthesize -> confirmer -> interpreter -> vehicle) while varying how many
gesture definitions are deliberately left empty, and reports success rates
per task and per empty-slot setting.  Leaving definitions empty is the
system's robustness mechanism: accepted noise that lands on an unbound
gesture parses as nothing.

The stock noise profile here is a stand-in tuned to exercise that mechanism
on a desk; it is not calibrated against any particular camera or operator.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from random import Random
from typing import Iterable, Mapping, Sequence

from .confirmer import Confirmer, ConfirmerConfig, GestureFrame
from .errors import ConfigError, DeliveryError, ExecutionError
from .interpreter import (
    ConcreteCommand,
    DefinedFunction,
    Executed,
    Interpreter,
    Outcome,
    ProgramEffect,
)
from .keymap import GESTURE_COUNT, Keymap, KeymapRegistry, check_gesture, parse_keymap
from .robot import Robot
from .session import RobotConfig


@dataclass(frozen=True)
class NoiseProfile:
    """Knobs for the stream synthesizer.

    hold_frames / transition_frames are inclusive uniform ranges.  Each
    transition holds a single shape drawn from ``transient_pool``, which is
    what lets a slow gesture change masquerade as a deliberate input; each
    hold frame is independently mislabeled with ``misclassify_rate`` using
    ``confusion`` (per-gesture weighted choices) or a uniform pool draw.

    Identical intended gestures back to back are separated by a short burst
    of mixed pool shapes (``repeat_break_*``), the stream equivalent of the
    operator relaxing the hand so the second input registers as new.
    """

    hold_frames: tuple[int, int] = (16, 22)
    transition_frames: tuple[int, int] = (1, 12)
    transient_pool: tuple[int, ...] = tuple(range(25, 50))
    misclassify_rate: float = 0.02
    confusion: Mapping[int, Sequence[tuple[int, float]]] | None = None
    seed: int = 1
    frame_period_ms: int = 50
    repeat_break_frames: int = 26
    repeat_break_segment: tuple[int, int] = (4, 6)

    def __post_init__(self) -> None:
        if not 0.0 <= self.misclassify_rate <= 1.0:
            raise ValueError("misclassify_rate must be in [0, 1]")
        for name in ("hold_frames", "transition_frames", "repeat_break_segment"):
            lo, hi = getattr(self, name)
            if lo > hi or lo < 0:
                raise ValueError(f"{name} must be a non-empty non-negative range")
        if self.hold_frames[0] < 1:
            raise ValueError("hold_frames must be at least 1")
        if not self.transient_pool:
            raise ValueError("transient_pool must not be empty")
        for gesture in self.transient_pool:
            check_gesture(gesture)
        if self.frame_period_ms < 1:
            raise ValueError("frame_period_ms must be positive")


NOISE_FREE = NoiseProfile(
    hold_frames=(14, 14),
    transition_frames=(0, 0),
    misclassify_rate=0.0,
)

DEFAULT_PROFILE = NoiseProfile()


def synthesize(
    intended: Sequence[int],
    profile: NoiseProfile,
    rng: Random | None = None,
    start_ts: int = 0,
) -> list[GestureFrame]:
    """Expand an intended gesture sequence into a noisy frame stream."""
    if not intended:
        raise ValueError("intended sequence must not be empty")
    for gesture in intended:
        check_gesture(gesture)
    rng = rng if rng is not None else Random(profile.seed)
    frames: list[GestureFrame] = []
    ts = start_ts
    period = profile.frame_period_ms
    pool = profile.transient_pool

    def emit(gesture: int) -> None:
        nonlocal ts
        frames.append(GestureFrame(ts, gesture))
        ts += period

    def misdraw(gesture: int) -> int:
        if profile.confusion and gesture in profile.confusion:
            choices = profile.confusion[gesture]
            return rng.choices(
                [g for g, _ in choices], weights=[w for _, w in choices]
            )[0]
        return rng.choice(pool)

    previous: int | None = None
    for gesture in intended:
        if gesture == previous:
            _emit_repeat_break(profile, rng, gesture, emit)
        hold = rng.randint(*profile.hold_frames)
        for _ in range(hold):
            if profile.misclassify_rate and rng.random() < profile.misclassify_rate:
                emit(misdraw(gesture))
            else:
                emit(gesture)
        transition = rng.randint(*profile.transition_frames)
        if transition:
            shape = rng.choice(pool)
            for _ in range(transition):
                emit(shape)
        previous = gesture
    return frames


def _emit_repeat_break(profile: NoiseProfile, rng: Random, held: int, emit) -> None:
    candidates = [g for g in profile.transient_pool if g != held]
    if not candidates:
        raise ValueError("transient_pool too small to break up a repeated gesture")
    emitted = 0
    last: int | None = None
    while emitted < profile.repeat_break_frames:
        shape = rng.choice(candidates)
        if shape == last and len(candidates) > 1:
            continue
        seg = rng.randint(*profile.repeat_break_segment)
        for _ in range(seg):
            emit(shape)
        emitted += seg
        last = shape


# --- task definitions ---------------------------------------------------------

def _keymap_text(fn: Mapping[int, str], param: Mapping[int, str]) -> str:
    lines = [
        "[alias]",
        "A=10", "B=11", "C=12", "D=13", "E=14",
        "",
        "[system]",
        "BEGIN=A", "END=B", "CALL=C", "CMD_SEP=D", "PARAM_SEP=E",
        "DO=  ; =BEGIN by default",
        "DEF= ; =BEGIN by default",
        "SET= ; =BEGIN by default",
        "",
        "[fn]",
        *(f"{g}={name}" for g, name in sorted(fn.items())),
        "",
        "[param]",
        *(f"{g}={text}" for g, text in sorted(param.items())),
        "",
    ]
    return "\n".join(lines)


# The dual demo keymaps: one gesture alphabet, two command vocabularies,
# switchable mid-session.  Keymap 1 is the diving vocabulary used by task 8.
DEMO_KEYMAP_MAIN = _keymap_text(
    {0: "FORWARD", 1: "LEFT", 2: "RIGHT"},
    {0: "0", 1: "1", 2: "2", 3: "3"},
)
DEMO_KEYMAP_DIVE = _keymap_text(
    {0: "UP", 1: "DOWN", 2: "SNAPSHOT"},
    {0: "0", 1: "1", 2: "2", 3: "3"},
)

# Gesture IDs shared by the built-in task keymaps.
B, E, C, S, P = 10, 11, 12, 13, 14  # BEGIN END CALL CMD_SEP PARAM_SEP
DOWN, SNAP, LEFT, SURF, BACK, CIRC, FWD, GOTO1, GOTO2, FOLLOW = range(15, 25)


def _cmd(name: str, *args: float | str) -> ConcreteCommand:
    return ConcreteCommand(name, args)


@dataclass(frozen=True)
class TaskDef:
    """One benchmark task: its minimal keymaps, input sequence, and outcome."""

    task_id: int
    name: str
    keymap_texts: tuple[str, ...]
    intended: tuple[int, ...]
    expected_effects: tuple[ProgramEffect, ...]
    robot: RobotConfig = RobotConfig()

    def keymaps(self) -> tuple[Keymap, ...]:
        return tuple(parse_keymap(text, i) for i, text in enumerate(self.keymap_texts))


def builtin_tasks() -> dict[int, TaskDef]:
    """The eight benchmark tasks, each with the smallest keymap that expresses it."""
    t6_robot = RobotConfig(
        locations={1: (5.0, 0.0, 2.0), 2: (8.0, 3.0, 2.0)},
        commands={"GOTO1": ("GOTO", (1.0,)), "GOTO2": ("GOTO", (2.0,))},
    )
    tasks = [
        TaskDef(
            1,
            "go down 1 m and take a photo",
            (_keymap_text({DOWN: "DOWN", SNAP: "SNAPSHOT"}, {1: "1"}),),
            (B, 1, B, DOWN, 1, S, SNAP, E),
            (Executed((_cmd("DOWN", 1.0), _cmd("SNAPSHOT"))),),
        ),
        TaskDef(
            2,
            "go left 30 degrees and take a photo",
            (_keymap_text({LEFT: "LEFT", SNAP: "SNAPSHOT"}, {1: "1", 3: "3", 0: "0"}),),
            (B, 1, B, LEFT, 3, 0, S, SNAP, E),
            (Executed((_cmd("LEFT", 30.0), _cmd("SNAPSHOT"))),),
        ),
        TaskDef(
            3,
            "surface, take a photo, go back",
            (
                _keymap_text(
                    {SURF: "SURFACE", SNAP: "SNAPSHOT", BACK: "GOBACK"}, {1: "1"}
                ),
            ),
            (B, 1, B, SURF, S, SNAP, S, BACK, E),
            (Executed((_cmd("SURFACE"), _cmd("SNAPSHOT"), _cmd("GOBACK"))),),
        ),
        TaskDef(
            4,
            "circle 3 times, forward 2 m, photo, go back",
            (
                _keymap_text(
                    {CIRC: "CIRCLE", FWD: "FORWARD", SNAP: "SNAPSHOT", BACK: "GOBACK"},
                    {1: "1", 2: "2", 3: "3"},
                ),
            ),
            (B, 1, B, B, 3, B, CIRC, E, S, FWD, 2, S, SNAP, S, BACK, E),
            (
                Executed(
                    (
                        _cmd("CIRCLE"),
                        _cmd("CIRCLE"),
                        _cmd("CIRCLE"),
                        _cmd("FORWARD", 2.0),
                        _cmd("SNAPSHOT"),
                        _cmd("GOBACK"),
                    )
                ),
            ),
        ),
        TaskDef(
            5,
            "go down 3 m, photo every meter",
            (_keymap_text({DOWN: "DOWN", SNAP: "SNAPSHOT"}, {3: "3", 1: "1"}),),
            (B, 3, B, DOWN, 1, S, SNAP, E),
            (Executed((_cmd("DOWN", 1.0), _cmd("SNAPSHOT")) * 3),),
        ),
        TaskDef(
            6,
            "visit two locations with photos, go back",
            (
                _keymap_text(
                    {GOTO1: "GOTO1", GOTO2: "GOTO2", SNAP: "SNAPSHOT", BACK: "GOBACK"},
                    {1: "1"},
                ),
            ),
            (B, 1, B, GOTO1, S, SNAP, S, GOTO2, S, SNAP, S, BACK, E),
            (
                Executed(
                    (
                        _cmd("GOTO1"),
                        _cmd("SNAPSHOT"),
                        _cmd("GOTO2"),
                        _cmd("SNAPSHOT"),
                        _cmd("GOBACK"),
                    )
                ),
            ),
            t6_robot,
        ),
        TaskDef(
            7,
            "follow for 9 s, photo every second",
            (_keymap_text({FOLLOW: "FOLLOW"}, {9: "9", 1: "1"}),),
            (B, 1, B, FOLLOW, 9, P, 1, E),
            (Executed((_cmd("FOLLOW", 9.0, 1.0),)),),
        ),
        TaskDef(
            8,
            "define a dive function in the field, run it 3 times",
            (DEMO_KEYMAP_MAIN, DEMO_KEYMAP_DIVE),
            (10, 1, 13, 10, 1, 13, 1, 1, 13, 2, 13, 10, 0, 11, 10, 3, 10, 12, 1, 11),
            (
                DefinedFunction(1),
                Executed((_cmd("DOWN", 1.0), _cmd("SNAPSHOT")) * 3),
            ),
        ),
    ]
    return {task.task_id: task for task in tasks}


# --- empty-definition masking ---------------------------------------------------

def with_empty_targets(keymap: Keymap, empty_fn: int, empty_param: int) -> Keymap:
    """Pad a keymap with dummy definitions until the empty counts hit the targets.

    "Empty" counts gestures that carry no system binding and no entry in the
    given table.  A task's own bindings are never removed, so a target below
    what the task requires yields the closest reachable count.  Padding fills
    the lowest-numbered unbound gestures first, leaving the high end of the
    gesture range empty.
    """
    non_system = [g for g in range(GESTURE_COUNT) if g not in keymap.system_gestures()]
    fn = dict(keymap.fn)
    param = dict(keymap.param)

    def fill(table: dict[int, str], target_empty: int, prefix: str) -> None:
        target_bound = max(len(table), len(non_system) - target_empty)
        for g in non_system:
            if len(table) >= target_bound:
                break
            table.setdefault(g, f"{prefix}{g}")

    fill(fn, empty_fn, "X")
    fill(param, empty_param, "x")
    return Keymap(keymap.index, keymap.system, fn, param, keymap.aliases)


def empty_counts(keymap: Keymap) -> tuple[int, int]:
    non_system = GESTURE_COUNT - len(keymap.system_gestures())
    return non_system - len(keymap.fn), non_system - len(keymap.param)


# --- trials ---------------------------------------------------------------------

@dataclass(frozen=True)
class TrialSpec:
    """A task pinned to one empty-definition setting."""

    task_id: int
    intended: tuple[int, ...]
    keymaps: tuple[Keymap, ...]
    empty_fn: int
    empty_param: int
    expected_effects: tuple[ProgramEffect, ...]
    robot: RobotConfig = RobotConfig()
    n_trials: int = 10


def spec_for_cell(task: TaskDef, empty_fn: int, empty_param: int, n_trials: int) -> TrialSpec:
    masked = tuple(
        with_empty_targets(km, empty_fn, empty_param) for km in task.keymaps()
    )
    # reported counts are the primary keymap's; alternates are padded the same way
    actual_fn, actual_param = empty_counts(masked[0])
    return TrialSpec(
        task_id=task.task_id,
        intended=task.intended,
        keymaps=masked,
        empty_fn=actual_fn,
        empty_param=actual_param,
        expected_effects=task.expected_effects,
        robot=task.robot,
        n_trials=n_trials,
    )


FAILURE_KINDS = ("wrong_accept", "missed_accept", "parse_error", "wrong_effect")


@dataclass(frozen=True)
class TrialOutcome:
    success: bool
    diagnosis: str | None
    accepted: tuple[int, ...]
    effects: tuple[ProgramEffect, ...]


def _end_state_key(robot: Robot) -> tuple:
    view = robot.state_snapshot()
    return (view.x, view.y, view.depth, view.heading, view.clock, len(view.snapshots))


def _expected_end_state(spec: TrialSpec) -> tuple:
    robot = spec.robot.build()
    for effect in spec.expected_effects:
        if isinstance(effect, Executed):
            robot.deliver(effect.commands)
            robot.execute()
    return _end_state_key(robot)


def _is_subsequence(needle: Sequence[int], haystack: Sequence[int]) -> bool:
    it = iter(haystack)
    return all(item in it for item in needle)


def run_trial(
    spec: TrialSpec,
    profile: NoiseProfile,
    seed: int,
    confirmer_config: ConfirmerConfig | None = None,
) -> TrialOutcome:
    """One end-to-end attempt: noisy stream in, effect/state comparison out."""
    registry = KeymapRegistry(spec.keymaps[0])
    for keymap in spec.keymaps[1:]:
        registry.register(keymap.index, keymap)
    interpreter = Interpreter(registry)
    confirmer = Confirmer(confirmer_config or ConfirmerConfig())
    robot = spec.robot.build()

    accepted: list[int] = []
    effects: list[ProgramEffect] = []
    parse_errors = 0
    delivery_failed = False
    for frame in synthesize(spec.intended, profile, rng=Random(seed)):
        hit = confirmer.push(frame)
        if hit is None:
            continue
        accepted.append(hit.gesture)
        result = interpreter.feed(hit.gesture)
        if result.outcome is Outcome.PARSE_ERROR:
            parse_errors += 1
        if result.effect is not None:
            effects.append(result.effect)
            if isinstance(result.effect, Executed):
                try:
                    robot.deliver(result.effect.commands)
                    robot.execute()
                except (DeliveryError, ExecutionError):
                    delivery_failed = True

    success = (
        tuple(effects) == spec.expected_effects
        and not delivery_failed
        and _end_state_key(robot) == _expected_end_state(spec)
    )
    diagnosis = None
    if not success:
        intended = list(spec.intended)
        if accepted != intended:
            if _is_subsequence(accepted, intended) and len(accepted) < len(intended):
                diagnosis = "missed_accept"
            else:
                diagnosis = "wrong_accept"
        elif parse_errors:
            diagnosis = "parse_error"
        else:
            diagnosis = "wrong_effect"
    return TrialOutcome(success, diagnosis, tuple(accepted), tuple(effects))


@dataclass
class TrialResult:
    """Aggregate over one spec's trials; successes + failures == trials run."""

    trials: int = 0
    successes: int = 0
    diagnoses: Counter = field(default_factory=Counter)

    @property
    def failures(self) -> int:
        return self.trials - self.successes

    @property
    def success_rate(self) -> float:
        return self.successes / self.trials if self.trials else 0.0


def _trial_seed(master: int, task_id: int, empty_fn: int, empty_param: int, i: int) -> int:
    text = f"{master}|{task_id}|{empty_fn}|{empty_param}|{i}"
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big")


def run_spec(spec: TrialSpec, profile: NoiseProfile, master_seed: int) -> TrialResult:
    result = TrialResult()
    for i in range(spec.n_trials):
        seed = _trial_seed(master_seed, spec.task_id, spec.empty_fn, spec.empty_param, i)
        outcome = run_trial(spec, profile, seed)
        result.trials += 1
        if outcome.success:
            result.successes += 1
        elif outcome.diagnosis:
            result.diagnoses[outcome.diagnosis] += 1
    return result


# --- experiment plans and CSV ----------------------------------------------------

@dataclass(frozen=True)
class ExperimentPlan:
    tasks: tuple[TaskDef, ...]
    cells: tuple[tuple[int, int], ...] = ((45, 45), (10, 10), (0, 0))
    profile: NoiseProfile = DEFAULT_PROFILE
    n_trials: int = 200
    seed: int = 1


@dataclass(frozen=True)
class ExperimentRow:
    task_id: int
    empty_fn: int
    empty_param: int
    result: TrialResult


CSV_COLUMNS = (
    "task",
    "empty_fn",
    "empty_param",
    "trials",
    "successes",
    "failures",
    "wrong_accept",
    "missed_accept",
    "parse_error",
    "wrong_effect",
)


def run_experiment(plan: ExperimentPlan) -> list[ExperimentRow]:
    rows: list[ExperimentRow] = []
    for task in plan.tasks:
        for empty_fn, empty_param in plan.cells:
            spec = spec_for_cell(task, empty_fn, empty_param, plan.n_trials)
            result = run_spec(spec, plan.profile, plan.seed)
            rows.append(ExperimentRow(task.task_id, spec.empty_fn, spec.empty_param, result))
    return rows


def rows_to_csv(rows: Iterable[ExperimentRow]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        r = row.result
        writer.writerow(
            [
                row.task_id,
                row.empty_fn,
                row.empty_param,
                r.trials,
                r.successes,
                r.failures,
                *(r.diagnoses.get(kind, 0) for kind in FAILURE_KINDS),
            ]
        )
    return out.getvalue()


def _profile_from_dict(data: Mapping) -> NoiseProfile:
    kwargs = {}
    pairs = {
        "hold_frames": tuple,
        "transition_frames": tuple,
        "repeat_break_segment": tuple,
    }
    for key in (
        "hold_frames",
        "transition_frames",
        "transient_pool",
        "misclassify_rate",
        "seed",
        "frame_period_ms",
        "repeat_break_frames",
        "repeat_break_segment",
    ):
        if key in data:
            value = data[key]
            if key in pairs:
                value = (int(value[0]), int(value[1]))
            elif key == "transient_pool":
                value = tuple(int(v) for v in value)
            kwargs[key] = value
    try:
        return replace(DEFAULT_PROFILE, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad noise profile: {exc}") from exc


def load_experiment_plan(path: str | Path) -> ExperimentPlan:
    """Read an experiment spec file (JSON) referencing the built-in tasks."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read experiment spec {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"experiment spec {path} is not valid JSON: {exc}") from exc

    catalog = builtin_tasks()
    task_ids = data.get("tasks", sorted(catalog))
    tasks = []
    for task_id in task_ids:
        if task_id not in catalog:
            raise ConfigError(f"unknown task {task_id}; built-ins are {sorted(catalog)}")
        tasks.append(catalog[task_id])
    cells_raw = data.get("cells", [[45, 45], [10, 10], [0, 0]])
    try:
        cells = tuple((int(a), int(b)) for a, b in cells_raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError("cells must be pairs of integers") from exc
    return ExperimentPlan(
        tasks=tuple(tasks),
        cells=cells,
        profile=_profile_from_dict(data.get("profile", {})),
        n_trials=int(data.get("n_trials", 200)),
        seed=int(data.get("seed", 1)),
    )
