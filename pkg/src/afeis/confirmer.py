"""Windowed counting filter that turns raw classifier frames into accepted gestures.

A single camera frame is never trusted: the classifier has to label every
image with *something*, so transient hand shapes and noise produce spurious
IDs.  The confirmer keeps the frames from the last ``window_ms`` and accepts
gesture ``k`` only when its occurrence count in the window exceeds the
threshold ``t`` and its share of the window reaches ``min_fraction``.  A
hysteresis rule then keeps a held gesture from being accepted twice.

Acceptance emits the gesture ID, not its meaning: gestures with no keymap
binding may win the window and are harmlessly dropped by the parser.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Protocol

from .errors import StreamOrderError
from .keymap import check_gesture


@dataclass(frozen=True, slots=True)
class GestureFrame:
    """One classifier output: a gesture ID at a monotonic millisecond timestamp."""

    timestamp_ms: int
    gesture: int


@dataclass(frozen=True, slots=True)
class AcceptedGesture:
    gesture: int
    timestamp_ms: int


@dataclass(frozen=True, slots=True)
class DropBelowThreshold:
    """Re-arm a gesture once its window count falls back to the threshold or below.

    Guarantees exactly one acceptance per held gesture, however long the hold.
    """


@dataclass(frozen=True, slots=True)
class GapFrames:
    """Re-arm a gesture a fixed number of frames after it was accepted.

    Allows deliberate repeat input during one long hold; not exactly-once.
    """

    frames: int


RearmPolicy = DropBelowThreshold | GapFrames


class Scorer(Protocol):
    """Discriminant over the window: confidence that the input is ``gesture``.

    Returns a value in [0, 1], or None when the gesture is not a candidate.
    The stock rule counts occurrences; richer models (transition-aware,
    risk-weighted) drop in here without touching the acceptance machinery.
    """

    def score(
        self, counts: Mapping[int, int], total: int, gesture: int, threshold: int
    ) -> float | None: ...


class CountingScorer:
    """Window share of the gesture, gated by the occurrence threshold."""

    def score(
        self, counts: Mapping[int, int], total: int, gesture: int, threshold: int
    ) -> float | None:
        if total == 0:
            return None
        count = counts.get(gesture, 0)
        if count <= threshold:
            return None
        return count / total


@dataclass(frozen=True)
class ConfirmerConfig:
    window_ms: int = 1000
    threshold: int = 8
    min_fraction: float = 0.6
    rearm: RearmPolicy = DropBelowThreshold()
    frame_rate_hint: float = 20.0
    scorer: Scorer = field(default_factory=CountingScorer)

    def __post_init__(self) -> None:
        if self.window_ms <= 0:
            raise ValueError("window_ms must be positive")
        if self.threshold < 1:
            raise ValueError("threshold must be >= 1")
        if not 0.0 < self.min_fraction <= 1.0:
            raise ValueError("min_fraction must be in (0, 1]")
        if self.frame_rate_hint <= 0:
            raise ValueError("frame_rate_hint must be positive")
        capacity = self.window_ms / 1000.0 * self.frame_rate_hint
        if capacity < self.threshold:
            raise ValueError(
                f"window of {self.window_ms} ms holds only ~{capacity:.1f} frames at "
                f"{self.frame_rate_hint} fps, below threshold {self.threshold}"
            )
        if isinstance(self.rearm, GapFrames) and self.rearm.frames < 1:
            raise ValueError("GapFrames re-arm needs at least 1 frame")


class Confirmer:
    """Single-consumer stream processor; one owner pushes frames in order."""

    def __init__(self, config: ConfirmerConfig | None = None):
        self.config = config or ConfirmerConfig()
        self._frames: deque[tuple[int, int]] = deque()  # (timestamp_ms, gesture)
        self._counts: dict[int, int] = {}
        self._disarmed: dict[int, int] = {}  # gesture -> frames seen since acceptance
        self.last_accepted: AcceptedGesture | None = None
        self._last_ts: int | None = None

    def reset(self) -> None:
        self._frames.clear()
        self._counts.clear()
        self._disarmed.clear()
        self.last_accepted = None
        self._last_ts = None

    @property
    def counts(self) -> dict[int, int]:
        return dict(self._counts)

    @property
    def window_size(self) -> int:
        return len(self._frames)

    def frames(self) -> tuple[GestureFrame, ...]:
        return tuple(GestureFrame(ts, g) for ts, g in self._frames)

    def score(self, gesture: int) -> float | None:
        """The configured discriminant for ``gesture`` over the current window."""
        return self.config.scorer.score(
            self._counts, len(self._frames), gesture, self.config.threshold
        )

    def push(self, frame: GestureFrame) -> AcceptedGesture | None:
        return self.push_raw(frame.timestamp_ms, frame.gesture)

    def push_raw(self, timestamp_ms: int, gesture: int) -> AcceptedGesture | None:
        """Add one frame, slide the window, and report an acceptance if one fires."""
        check_gesture(gesture)
        if self._last_ts is not None and timestamp_ms < self._last_ts:
            raise StreamOrderError(
                f"frame timestamp {timestamp_ms} ms precedes previous {self._last_ts} ms"
            )
        self._last_ts = timestamp_ms

        frames = self._frames
        counts = self._counts
        frames.append((timestamp_ms, gesture))
        counts[gesture] = counts.get(gesture, 0) + 1
        horizon = timestamp_ms - self.config.window_ms
        while frames[0][0] <= horizon:
            _, old = frames.popleft()
            left = counts[old] - 1
            if left:
                counts[old] = left
            else:
                del counts[old]

        threshold = self.config.threshold
        if self._disarmed:
            rearm = self.config.rearm
            if isinstance(rearm, DropBelowThreshold):
                rearmed = [g for g in self._disarmed if counts.get(g, 0) <= threshold]
            else:
                for g in self._disarmed:
                    self._disarmed[g] += 1
                rearmed = [g for g, n in self._disarmed.items() if n >= rearm.frames]
            for g in rearmed:
                del self._disarmed[g]

        # Unique argmax of the window counts.
        best_gesture = -1
        best = 0
        tied = False
        for g, c in counts.items():
            if c > best:
                best_gesture, best, tied = g, c, False
            elif c == best:
                tied = True
        if tied or best <= threshold or best_gesture in self._disarmed:
            return None
        score = self.config.scorer.score(counts, len(frames), best_gesture, threshold)
        if score is None or score < self.config.min_fraction:
            return None
        self._disarmed[best_gesture] = 0
        accepted = AcceptedGesture(best_gesture, timestamp_ms)
        self.last_accepted = accepted
        return accepted


def read_frames(source: str | Path | Iterable[str]) -> Iterator[GestureFrame]:
    """Parse a ``timestamp_ms,gesture_id`` line stream (offline replay format)."""
    if isinstance(source, (str, Path)):
        lines: Iterable[str] = Path(source).read_text(encoding="utf-8").splitlines()
    else:
        lines = source
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            ts_text, g_text = line.split(",")
            yield GestureFrame(int(ts_text), int(g_text))
        except ValueError as exc:
            raise StreamOrderError(f"line {lineno}: bad frame record {line!r}") from exc
