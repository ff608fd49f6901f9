"""Keymap files: binding gesture IDs to symbols, and resolving gestures to tokens.

A keymap assigns meanings to the classifier's gesture IDs (integers 0..49).
Each gesture may carry up to three kinds of meaning:

* a *system* symbol (``BEGIN``, ``END``, ``CALL``, ``CMD_SEP``, ``PARAM_SEP``,
  and optionally ``DO``, ``DEF``, ``SET``) -- structural punctuation of the
  command grammar;
* an *fn* name -- the command word used when the gesture appears at the head
  of a command;
* a *param* text -- the value used when the gesture appears inside an
  argument or number.

System bindings are exclusive: a gesture bound to a system symbol may hold no
other binding.  Fn and param bindings may coexist on one gesture, so a small
gesture alphabet covers both command words and digits.  Gestures with no
binding at all are deliberately useful: misrecognized input that lands on
them resolves to nothing and is ignored downstream.

File format is a line-oriented INI dialect (``;`` starts a comment)::

    [alias]            ; optional: readable names for gesture IDs
    A=10
    B=11

    [system]
    BEGIN=A            ; gesture ID or alias; comma list allowed (BEGIN=10,12)
    END=B
    CALL=12
    CMD_SEP=13
    PARAM_SEP=14
    DO=                ; empty right-hand side = unbound (BEGIN stands in)

    [fn]
    0=FORWARD          ; left side is a gesture ID (or alias)
    1=LEFT

    [param]
    0=0
    1=1

``BEGIN``, ``END``, ``CALL``, ``CMD_SEP`` and ``PARAM_SEP`` must each be
bound to at least one gesture; ``DO``/``DEF``/``SET`` are optional because
the grammar accepts ``BEGIN`` in their place.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import GestureRangeError, KeymapError, UnknownKeymapError

logger = logging.getLogger(__name__)

GESTURE_COUNT = 50

SYSTEM_SYMBOLS = ("BEGIN", "END", "CALL", "CMD_SEP", "PARAM_SEP", "DO", "DEF", "SET")
MANDATORY_SYMBOLS = ("BEGIN", "END", "CALL", "CMD_SEP", "PARAM_SEP")


class TokenKind(Enum):
    BEGIN = "BEGIN"
    END = "END"
    CALL = "CALL"
    CMD_SEP = "CMD_SEP"
    PARAM_SEP = "PARAM_SEP"
    DO = "DO"
    DEF = "DEF"
    SET = "SET"
    DIGIT = "DIGIT"
    DECIMAL_POINT = "DECIMAL_POINT"
    NEG_SIGN = "NEG_SIGN"
    FN = "FN"
    PARAM = "PARAM"
    EMPTY = "EMPTY"


SYSTEM_TOKEN_KINDS = frozenset(
    {
        TokenKind.BEGIN,
        TokenKind.END,
        TokenKind.CALL,
        TokenKind.CMD_SEP,
        TokenKind.PARAM_SEP,
        TokenKind.DO,
        TokenKind.DEF,
        TokenKind.SET,
    }
)


@dataclass(frozen=True, slots=True)
class Token:
    """A resolved grammar symbol.

    ``value`` holds the digit (int) for DIGIT tokens and the name/text (str)
    for FN and PARAM tokens; it is None for all other kinds.
    """

    kind: TokenKind
    value: int | str | None = None

    @staticmethod
    def digit(d: int) -> "Token":
        if not 0 <= d <= 9:
            raise ValueError(f"digit out of range: {d}")
        return Token(TokenKind.DIGIT, d)

    @staticmethod
    def fn(name: str) -> "Token":
        if not name:
            raise ValueError("FN name must be non-empty")
        return Token(TokenKind.FN, name)

    @staticmethod
    def param(text: str) -> "Token":
        if not text:
            raise ValueError("PARAM text must be non-empty")
        return Token(TokenKind.PARAM, text)

    def describe(self) -> str:
        if self.kind is TokenKind.DIGIT:
            return f"DIGIT({self.value})"
        if self.kind in (TokenKind.FN, TokenKind.PARAM):
            return f"{self.kind.value}({self.value})"
        return self.kind.value


BEGIN = Token(TokenKind.BEGIN)
END = Token(TokenKind.END)
CALL = Token(TokenKind.CALL)
CMD_SEP = Token(TokenKind.CMD_SEP)
PARAM_SEP = Token(TokenKind.PARAM_SEP)
DO = Token(TokenKind.DO)
DEF = Token(TokenKind.DEF)
SET = Token(TokenKind.SET)
NEG_SIGN = Token(TokenKind.NEG_SIGN)
DECIMAL_POINT = Token(TokenKind.DECIMAL_POINT)
EMPTY = Token(TokenKind.EMPTY)


class Position(Enum):
    """Where in the grammar a gesture is being read.

    The same gesture means different things at different positions: the head
    of a command consults the fn table, argument/number positions consult the
    param table, and structural positions consult only the system bindings.
    System bindings always win regardless of position.
    """

    SYSTEM_FIRST = "system_first"
    FN = "fn"
    PARAM = "param"


def check_gesture(gesture: int) -> int:
    if not isinstance(gesture, int) or isinstance(gesture, bool):
        raise GestureRangeError(f"gesture ID must be an integer, got {gesture!r}")
    if not 0 <= gesture < GESTURE_COUNT:
        raise GestureRangeError(
            f"gesture ID {gesture} outside supported range 0..{GESTURE_COUNT - 1}"
        )
    return gesture


@dataclass(frozen=True)
class Keymap:
    """Immutable in-memory form of one keymap file."""

    index: int
    system: dict[str, tuple[int, ...]]
    fn: dict[int, str]
    param: dict[int, str]
    aliases: dict[str, int] = field(default_factory=dict)
    _system_of: dict[int, TokenKind] = field(
        init=False, repr=False, compare=False, default_factory=dict
    )

    def __post_init__(self) -> None:
        reverse: dict[int, TokenKind] = {}
        for symbol in SYSTEM_SYMBOLS:
            for g in self.system.get(symbol, ()):
                reverse[g] = TokenKind(symbol)
        object.__setattr__(self, "_system_of", reverse)

    def system_gestures(self) -> frozenset[int]:
        return frozenset(self._system_of)

    def system_token_for(self, gesture: int) -> Token | None:
        kind = self._system_of.get(gesture)
        return Token(kind) if kind is not None else None

    def resolve(self, gesture: int, position: Position) -> Token:
        """Resolve one gesture to a token under this keymap.

        Never fails: a gesture unbound in the consulted table yields EMPTY.
        """
        check_gesture(gesture)
        token = self.system_token_for(gesture)
        if token is not None:
            return token
        if position is Position.FN:
            name = self.fn.get(gesture)
            return Token.fn(name) if name is not None else EMPTY
        if position is Position.PARAM:
            text = self.param.get(gesture)
            if text is None:
                return EMPTY
            return specialize_param(text)
        return EMPTY

def specialize_param(text: str) -> Token:
    """Param texts that spell number pieces become the matching number tokens."""
    if len(text) == 1 and text.isdigit():
        return Token.digit(int(text))
    if text == "-":
        return NEG_SIGN
    if text == ".":
        return DECIMAL_POINT
    return Token.param(text)


def parse_keymap(text: str, index: int) -> Keymap:
    """Parse keymap file contents; raise :class:`KeymapError` listing all problems."""
    keymap, errors, warnings = parse_keymap_report(text, index)
    for w in warnings:
        logger.warning("keymap %d: %s", index, w)
    if errors:
        raise KeymapError(errors)
    assert keymap is not None
    return keymap


def parse_keymap_report(
    text: str, index: int
) -> tuple[Keymap | None, list[str], list[str]]:
    """Parse and validate, returning (keymap-or-None, errors, warnings).

    Gathers every problem instead of stopping at the first, so a bad file can
    be fixed in one pass.
    """
    errors: list[str] = []
    warnings: list[str] = []
    aliases: dict[str, int] = {}
    system_raw: dict[str, str] = {}
    fn_raw: dict[str, str] = {}
    param_raw: dict[str, str] = {}

    section = None
    section_tables = {"alias": aliases, "system": system_raw, "fn": fn_raw, "param": param_raw}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip().lower()
            if name not in section_tables:
                errors.append(f"line {lineno}: unknown section [{name}]")
                section = None
            else:
                section = name
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: malformed line {line!r} (expected key=value)")
            continue
        if section is None:
            errors.append(f"line {lineno}: entry {line!r} outside any section")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            errors.append(f"line {lineno}: empty key")
            continue
        if section == "alias":
            try:
                aliases[key] = int(value)
            except ValueError:
                errors.append(f"line {lineno}: alias {key!r} must map to an integer")
            continue
        table = section_tables[section]
        if key in table:
            warnings.append(
                f"line {lineno}: duplicate key {key!r} in [{section}]; last occurrence wins"
            )
        table[key] = value

    def to_gesture(label: str, where: str) -> int | None:
        if label in aliases:
            value = aliases[label]
        else:
            try:
                value = int(label)
            except ValueError:
                errors.append(f"{where}: {label!r} is not a gesture index or known alias")
                return None
        if not 0 <= value < GESTURE_COUNT:
            errors.append(f"{where}: gesture {value} outside 0..{GESTURE_COUNT - 1}")
            return None
        return value

    system: dict[str, tuple[int, ...]] = {}
    for symbol, value in system_raw.items():
        if symbol not in SYSTEM_SYMBOLS:
            errors.append(f"[system]: unknown symbol {symbol!r}")
            continue
        gestures = []
        if value:
            for part in value.split(","):
                g = to_gesture(part.strip(), f"[system] {symbol}")
                if g is not None:
                    gestures.append(g)
        system[symbol] = tuple(gestures)

    for symbol in MANDATORY_SYMBOLS:
        if not system.get(symbol):
            errors.append(f"mandatory symbol {symbol} unbound")

    fn: dict[int, str] = {}
    param: dict[int, str] = {}
    for raw_table, table, label in ((fn_raw, fn, "fn"), (param_raw, param, "param")):
        for key, value in raw_table.items():
            g = to_gesture(key, f"[{label}]")
            if g is None:
                continue
            if value:
                table[g] = value
            # empty right-hand side: definition deliberately left empty

    seen_system: dict[int, str] = {}
    for symbol in SYSTEM_SYMBOLS:
        for g in system.get(symbol, ()):
            if g in seen_system and seen_system[g] != symbol:
                errors.append(
                    f"gesture {g} bound to both {seen_system[g]} and {symbol}"
                )
            seen_system[g] = symbol
    for g, symbol in seen_system.items():
        if g in fn or g in param:
            errors.append(
                f"gesture {g} bound to system symbol {symbol} cannot also hold an fn/param definition"
            )

    if errors:
        return None, errors, warnings
    return Keymap(index=index, system=system, fn=fn, param=param, aliases=aliases), errors, warnings


def serialize_keymap(keymap: Keymap) -> str:
    """Write a keymap back to file text; inverse of :func:`parse_keymap`."""
    lines: list[str] = []
    if keymap.aliases:
        lines.append("[alias]")
        for name, g in keymap.aliases.items():
            lines.append(f"{name}={g}")
        lines.append("")
    lines.append("[system]")
    for symbol in SYSTEM_SYMBOLS:
        gestures = keymap.system.get(symbol, ())
        lines.append(f"{symbol}={','.join(str(g) for g in gestures)}")
    lines.append("")
    lines.append("[fn]")
    for g in sorted(keymap.fn):
        lines.append(f"{g}={keymap.fn[g]}")
    lines.append("")
    lines.append("[param]")
    for g in sorted(keymap.param):
        lines.append(f"{g}={keymap.param[g]}")
    lines.append("")
    return "\n".join(lines)


class KeymapRegistry:
    """Holds the loaded keymaps and tracks which one is active.

    Index 0 is the default keymap and must exist; activation switches are
    parse-time effects driven by the interpreter.  Single-writer: one
    interaction session owns a registry.
    """

    def __init__(self, default: Keymap):
        self._keymaps: dict[int, Keymap] = {0: default}
        self.active_index = 0

    @property
    def active(self) -> Keymap:
        return self._keymaps[self.active_index]

    def keymap(self, index: int) -> Keymap:
        try:
            return self._keymaps[index]
        except KeyError:
            raise UnknownKeymapError(f"unknown keymap {index}") from None

    def indices(self) -> tuple[int, ...]:
        return tuple(sorted(self._keymaps))

    def register(self, index: int, keymap: Keymap) -> None:
        if index < 0:
            raise ValueError(f"keymap index must be non-negative, got {index}")
        self._keymaps[index] = keymap

    def activate(self, index: int) -> None:
        if index not in self._keymaps:
            raise UnknownKeymapError(f"unknown keymap {index}")
        self.active_index = index

    def resolve(self, gesture: int, position: Position) -> Token:
        return self.active.resolve(gesture, position)

    def clone(self) -> "KeymapRegistry":
        # Keymaps are immutable, so a shallow copy of the table is enough.
        other = object.__new__(KeymapRegistry)
        other._keymaps = dict(self._keymaps)
        other.active_index = self.active_index
        return other


def load_keymap_file(path: str | Path, index: int) -> Keymap:
    return parse_keymap(Path(path).read_text(encoding="utf-8"), index)


def load_keymap_dir(path: str | Path) -> dict[int, Keymap]:
    """Load every ``<index>.keymap`` file in a directory."""
    result: dict[int, Keymap] = {}
    for file in sorted(Path(path).glob("*.keymap")):
        try:
            index = int(file.stem)
        except ValueError:
            logger.warning("skipping %s: file name is not an index", file)
            continue
        result[index] = load_keymap_file(file, index)
    return result
