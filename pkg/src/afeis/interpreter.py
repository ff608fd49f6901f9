"""Incremental interpreter for the gesture command language.

The language is consumed one token at a time, as gestures are confirmed, so
the parser is an explicit pushdown machine rather than a text parser.  The
grammar it realizes::

    <explist>  ::= <exp> | <set-var> | <def-fn> | <change-keymap>

    <def-fn>   ::= <def> <integer> CMD_SEP <cmdset> END
    <def>      ::= DEF | BEGIN
    <set-var>  ::= <set> <integer> PARAM_SEP <num> END
    <change-keymap> ::= <set> <integer> END
    <set>      ::= SET | BEGIN

    <exp>      ::= BEGIN <integer> <do> <cmdset> [CMD_SEP] END
    <do>       ::= DO | BEGIN
    <cmdset>   ::= <cmd> [CMD_SEP <cmdset>]
    <cmd>      ::= <function> | <call-fn> | <load-keymap>
                 | <set-var'> | <math-fn> | <exp>

    <function> ::= FN [<arg-list>]
    <arg-list> ::= <arg> [PARAM_SEP <arg-list>]
    <arg>      ::= <num> | <load-var> | PARAM
    <load-var> ::= CALL <integer>
    <call-fn>  ::= CALL <integer>
    <load-keymap> ::= <set> <integer>
    <set-var'> ::= <set> <integer> PARAM_SEP <num>        (no END inside a cmdset)
    <math-fn>  ::= <math-op> <load-var> PARAM_SEP (<load-var> | <num>)
    <num>      ::= [NEG_SIGN] <integer> [DECIMAL_POINT <integer>]

Math operators arrive as FN tokens whose name is one of ``+ - * /``.

Notes that shape the implementation:

* ``<integer>`` is not self-terminating; digits accumulate until the first
  structural token, which then selects the branch (CMD_SEP starts a function
  definition body, PARAM_SEP a variable value, END completes a keymap
  change, DO/BEGIN opens a loop body).
* A top-level ``<exp>`` is the only executable form, so "run once" is a loop
  of count 1.  The repetition count is a literal integer.
* ``CALL`` at the head of a command calls a function; inside arguments it
  loads a variable.  Function and variable slots are disjoint namespaces.
* Keymap switches (``<load-keymap>``, ``<change-keymap>``) take effect at
  parse time.  Inside a recorded body the switch changes how *subsequent
  gestures resolve while recording* and is itself not recorded: a replayed
  body never re-switches keymaps.
* Inside a cmdset, ``<set> <integer>`` followed directly by an FN token is
  accepted as a keymap switch immediately followed by the next command (the
  separator is implied); this is the one place two commands may touch.
* A parse error discards the partial form and resets to top level; function
  and variable tables survive.

Because gestures resolve position-dependently, each parser state consults
the keymap tables in its own order: number/argument states try the param
table first and fall back to fn, command-head and structural states try fn
first.  System bindings always win.  A gesture bound in none of the tables
resolves to EMPTY and is ignored wherever it appears, which is what makes
deliberately-empty definitions absorb misrecognized input.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .errors import AfeisError, ExpansionError, UnknownKeymapError
from .keymap import KeymapRegistry, Position, Token, TokenKind

MATH_OPS = ("+", "-", "*", "/")

DEFAULT_MAX_DEPTH = 16
DEFAULT_MAX_COMMANDS = 10_000


# --- AST -------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class Literal:
    value: float


@dataclass(frozen=True, slots=True)
class VarRef:
    slot: int


@dataclass(frozen=True, slots=True)
class Symbol:
    text: str


Arg = Literal | VarRef | Symbol


@dataclass(frozen=True, slots=True)
class FnCall:
    name: str
    args: tuple[Arg, ...]


@dataclass(frozen=True, slots=True)
class CallFn:
    slot: int


@dataclass(frozen=True, slots=True)
class SetVar:
    slot: int
    value: float


@dataclass(frozen=True, slots=True)
class MathFn:
    op: str
    var_slot: int
    operand: Literal | VarRef


@dataclass(frozen=True, slots=True)
class Loop:
    count: int
    body: tuple["CmdNode", ...]


CmdNode = FnCall | CallFn | SetVar | MathFn | Loop


# --- Program effects --------------------------------------------------------

@dataclass(frozen=True, slots=True)
class ConcreteCommand:
    """A fully resolved robot command: name plus numeric/symbolic arguments."""

    name: str
    args: tuple[float | str, ...] = ()

    def render(self) -> str:
        return " ".join([self.name, *(format_number(a) if isinstance(a, float) else a for a in self.args)])


@dataclass(frozen=True, slots=True)
class DefinedFunction:
    slot: int


@dataclass(frozen=True, slots=True)
class VariableSet:
    slot: int
    value: float


@dataclass(frozen=True, slots=True)
class KeymapChanged:
    index: int


@dataclass(frozen=True, slots=True)
class Executed:
    commands: tuple[ConcreteCommand, ...]


ProgramEffect = DefinedFunction | VariableSet | KeymapChanged | Executed


def format_number(value: float) -> str:
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


@dataclass
class Environment:
    """Function and variable tables; slots are disjoint non-negative namespaces."""

    functions: dict[int, tuple[CmdNode, ...]] = field(default_factory=dict)
    variables: dict[int, float] = field(default_factory=dict)

    def clone(self) -> "Environment":
        return Environment(dict(self.functions), dict(self.variables))

    def key(self) -> tuple:
        return (
            tuple(sorted(self.functions.items())),
            tuple(sorted(self.variables.items())),
        )


# --- Expansion --------------------------------------------------------------

def expand(
    body: Sequence[CmdNode],
    env: Environment,
    *,
    max_commands: int = DEFAULT_MAX_COMMANDS,
    max_depth: int = DEFAULT_MAX_DEPTH,
) -> tuple[ConcreteCommand, ...]:
    """Unroll a recorded body into concrete commands.

    Loops contribute their body ``count`` times; function calls inline the
    recorded body with the environment as it stands at that point; variable
    writes apply immediately so later reads see them (late binding).  The
    environment is only committed when expansion succeeds, so a failing form
    leaves no half-applied state behind.
    """
    variables = dict(env.variables)
    out: list[ConcreteCommand] = []
    active_calls: list[int] = []

    def read_var(slot: int) -> float:
        try:
            return variables[slot]
        except KeyError:
            raise ExpansionError(f"undefined variable {slot}") from None

    def run(nodes: Sequence[CmdNode], depth: int) -> None:
        if depth > max_depth:
            raise ExpansionError(f"expansion nested deeper than {max_depth}")
        for node in nodes:
            if isinstance(node, FnCall):
                args: list[float | str] = []
                for arg in node.args:
                    if isinstance(arg, Literal):
                        args.append(arg.value)
                    elif isinstance(arg, VarRef):
                        args.append(read_var(arg.slot))
                    else:
                        args.append(arg.text)
                out.append(ConcreteCommand(node.name, tuple(args)))
                if len(out) > max_commands:
                    raise ExpansionError(f"expansion exceeds {max_commands} commands")
            elif isinstance(node, Loop):
                for _ in range(node.count):
                    run(node.body, depth + 1)
            elif isinstance(node, CallFn):
                if node.slot not in env.functions:
                    raise ExpansionError(f"undefined function {node.slot}")
                if node.slot in active_calls:
                    raise ExpansionError(f"recursive call to function {node.slot}")
                active_calls.append(node.slot)
                run(env.functions[node.slot], depth + 1)
                active_calls.pop()
            elif isinstance(node, SetVar):
                variables[node.slot] = node.value
            else:  # MathFn
                current = read_var(node.var_slot)
                operand = (
                    node.operand.value
                    if isinstance(node.operand, Literal)
                    else read_var(node.operand.slot)
                )
                if node.op == "+":
                    variables[node.var_slot] = current + operand
                elif node.op == "-":
                    variables[node.var_slot] = current - operand
                elif node.op == "*":
                    variables[node.var_slot] = current * operand
                else:
                    if operand == 0:
                        raise ExpansionError(
                            f"division by zero updating variable {node.var_slot}"
                        )
                    variables[node.var_slot] = current / operand

    run(body, 0)
    env.variables.clear()
    env.variables.update(variables)
    return tuple(out)


# --- Parser machinery -------------------------------------------------------

class Outcome(Enum):
    CONSUMED = "consumed"
    IGNORED = "ignored"
    FORM_COMPLETED = "form_completed"
    PARSE_ERROR = "parse_error"


@dataclass(frozen=True, slots=True)
class FeedResult:
    token: Token
    outcome: Outcome
    effect: ProgramEffect | None = None
    diagnostic: str | None = None
    gesture: int | None = None
    state_before: str = ""
    state_after: str = ""

    def trace_line(self) -> str:
        parts = [self.token.describe(), self.state_before, "->", self.state_after, self.outcome.value]
        if self.diagnostic:
            parts.append(f"({self.diagnostic})")
        return " ".join(parts)


class ParseFailure(AfeisError):
    """Raised by batch parsing on the first parse error (or truncated input)."""

    def __init__(self, diagnostic: str, position: int, effects: list[ProgramEffect]):
        self.diagnostic = diagnostic
        self.position = position
        self.effects = effects
        super().__init__(f"item {position}: {diagnostic}")


class _ParseProblem(Exception):
    pass


def _fail(message: str) -> None:
    raise _ParseProblem(message)


class _NumBuilder:
    __slots__ = ("negative", "int_digits", "frac_digits", "in_frac")

    def __init__(self, negative: bool = False):
        self.negative = negative
        self.int_digits = ""
        self.frac_digits = ""
        self.in_frac = False

    def add_digit(self, d: int) -> None:
        if self.in_frac:
            self.frac_digits += str(d)
        else:
            self.int_digits += str(d)

    def add_point(self) -> None:
        if not self.int_digits:
            _fail("decimal point before any digit")
        if self.in_frac:
            _fail("second decimal point in one number")
        self.in_frac = True

    def value(self) -> float:
        if not self.int_digits:
            _fail("number has no digits")
        if self.in_frac and not self.frac_digits:
            _fail("decimal point with no digits after it")
        text = self.int_digits
        if self.frac_digits:
            text += "." + self.frac_digits
        return -float(text) if self.negative else float(text)

    def describe(self) -> str:
        sign = "-" if self.negative else ""
        point = "." + self.frac_digits if self.in_frac else ""
        return f"{sign}{self.int_digits}{point}"

    def key(self) -> tuple:
        return ("num", self.negative, self.int_digits, self.frac_digits, self.in_frac)


class _CallRef:
    __slots__ = ("digits",)

    def __init__(self) -> None:
        self.digits = ""

    def slot(self) -> int:
        if not self.digits:
            _fail("expected a slot number after CALL")
        return int(self.digits)

    def key(self) -> tuple:
        return ("call", self.digits)


class _TopForm:
    __slots__ = ("lead", "digits")

    def __init__(self, lead: TokenKind):
        self.lead = lead
        self.digits = ""

    def describe(self) -> str:
        return f"form({self.lead.value} {self.digits or '?'})"

    def key(self) -> tuple:
        return ("topform", self.lead.value, self.digits)


class _TopSetValue:
    __slots__ = ("slot", "num")

    def __init__(self, slot: int):
        self.slot = slot
        self.num = _NumBuilder()

    def describe(self) -> str:
        return f"set-var({self.slot}={self.num.describe() or '?'})"

    def key(self) -> tuple:
        return ("topset", self.slot, self.num.key())


class _CmdSet:
    __slots__ = ("kind", "slot", "count", "nodes", "awaiting", "cmd_count")

    def __init__(self, kind: str, *, slot: int | None = None, count: int | None = None):
        self.kind = kind  # "def" | "loop"
        self.slot = slot
        self.count = count
        self.nodes: list[CmdNode] = []
        self.awaiting = "cmd"  # "cmd" | "sep"
        self.cmd_count = 0

    def describe(self) -> str:
        head = f"def {self.slot}" if self.kind == "def" else f"loop {self.count}"
        return f"body({head}; {self.cmd_count} cmds; expect {self.awaiting})"

    def key(self) -> tuple:
        return (
            "cmdset",
            self.kind,
            self.slot,
            self.count,
            tuple(self.nodes),
            self.awaiting,
            self.cmd_count,
        )


class _FnCmd:
    __slots__ = ("name", "args", "cur", "expect_arg")

    def __init__(self, name: str):
        self.name = name
        self.args: list[Arg] = []
        self.cur: _NumBuilder | _CallRef | None = None
        self.expect_arg = False

    def describe(self) -> str:
        return f"fn({self.name}/{len(self.args)} args)"

    def key(self) -> tuple:
        cur = self.cur.key() if self.cur is not None else None
        return ("fn", self.name, tuple(self.args), cur, self.expect_arg)


class _CallCmd:
    __slots__ = ("digits",)

    def __init__(self) -> None:
        self.digits = ""

    def describe(self) -> str:
        return f"call({self.digits or '?'})"

    def key(self) -> tuple:
        return ("callcmd", self.digits)


class _SetCmd:
    __slots__ = ("lead", "digits")

    def __init__(self, lead: TokenKind):
        self.lead = lead
        self.digits = ""

    def describe(self) -> str:
        return f"set({self.lead.value} {self.digits or '?'})"

    def key(self) -> tuple:
        return ("setcmd", self.lead.value, self.digits)


class _SetValueCmd:
    __slots__ = ("slot", "num")

    def __init__(self, slot: int):
        self.slot = slot
        self.num = _NumBuilder()

    def describe(self) -> str:
        return f"set-var'({self.slot}={self.num.describe() or '?'})"

    def key(self) -> tuple:
        return ("setval", self.slot, self.num.key())


class _MathCmd:
    __slots__ = ("op", "stage", "slot_digits", "operand")

    def __init__(self, op: str):
        self.op = op
        self.stage = "call"  # "call" | "slot" | "operand"
        self.slot_digits = ""
        self.operand: _NumBuilder | _CallRef | None = None

    def describe(self) -> str:
        return f"math({self.op} var {self.slot_digits or '?'}; {self.stage})"

    def key(self) -> tuple:
        operand = self.operand.key() if self.operand is not None else None
        return ("math", self.op, self.stage, self.slot_digits, operand)


_Frame = _TopForm | _TopSetValue | _CmdSet | _FnCmd | _CallCmd | _SetCmd | _SetValueCmd | _MathCmd

# Sentinel: the current token must be re-examined against the new stack top.
_REDO = object()


class Interpreter:
    """One operator session: parser state, environment, and keymap registry.

    Strictly sequential token consumption; transferable between threads but
    never shared.
    """

    def __init__(
        self,
        registry: KeymapRegistry,
        *,
        max_depth: int = DEFAULT_MAX_DEPTH,
        max_commands: int = DEFAULT_MAX_COMMANDS,
    ):
        self.registry = registry
        self.env = Environment()
        self.max_depth = max_depth
        self.max_commands = max_commands
        self._stack: list[_Frame] = []

    # -- public API ----------------------------------------------------------

    def feed(self, gesture: int) -> FeedResult:
        """Resolve one gesture under the current state and keymap, then advance."""
        token = self._resolve(gesture)
        return self.feed_token(token, gesture=gesture)

    def feed_token(self, token: Token, gesture: int | None = None) -> FeedResult:
        before = self.describe_state()
        if token.kind is TokenKind.EMPTY:
            return FeedResult(
                token, Outcome.IGNORED, gesture=gesture,
                state_before=before, state_after=before,
            )
        try:
            outcome, effect = self._step(token)
            diagnostic = None
        except _ParseProblem as problem:
            self._stack.clear()
            outcome, effect, diagnostic = Outcome.PARSE_ERROR, None, str(problem)
        return FeedResult(
            token, outcome, effect=effect, diagnostic=diagnostic, gesture=gesture,
            state_before=before, state_after=self.describe_state(),
        )

    def parse_script(self, items: Iterable[int | Token]) -> list[ProgramEffect]:
        """Feed a whole sequence; equivalent to folding :meth:`feed` over it.

        Raises :class:`ParseFailure` on the first parse error, and also when
        the input ends with a form still open.
        """
        effects: list[ProgramEffect] = []
        position = 0
        for position, item in enumerate(items, start=1):
            result = self.feed_token(item) if isinstance(item, Token) else self.feed(item)
            if result.outcome is Outcome.PARSE_ERROR:
                raise ParseFailure(result.diagnostic or "parse error", position, effects)
            if result.effect is not None:
                effects.append(result.effect)
        if self._stack:
            raise ParseFailure(
                f"input ended before the form completed (in {self.describe_state()})",
                position,
                effects,
            )
        return effects

    @property
    def mid_form(self) -> bool:
        return bool(self._stack)

    def describe_state(self) -> str:
        if not self._stack:
            return "TopLevel"
        return " > ".join(frame.describe() for frame in self._stack)

    def state_key(self) -> tuple:
        """Canonical hashable snapshot of parser + environment + keymap state."""
        return (
            tuple(frame.key() for frame in self._stack),
            self.env.key(),
            self.registry.active_index,
        )

    def clone(self) -> "Interpreter":
        other = Interpreter(
            self.registry.clone(),
            max_depth=self.max_depth,
            max_commands=self.max_commands,
        )
        other.env = self.env.clone()
        other._stack = copy.deepcopy(self._stack)
        return other

    # -- gesture resolution ----------------------------------------------------

    def _cascade(self) -> tuple[Position, ...]:
        top = self._stack[-1] if self._stack else None
        if top is None or isinstance(top, _CmdSet):
            return (Position.FN, Position.PARAM)
        if isinstance(top, _MathCmd) and top.stage == "call":
            return (Position.FN, Position.PARAM)
        return (Position.PARAM, Position.FN)

    def _resolve(self, gesture: int) -> Token:
        token = Token(TokenKind.EMPTY)
        for position in self._cascade():
            token = self.registry.resolve(gesture, position)
            if token.kind is not TokenKind.EMPTY:
                return token
        return token

    # -- transitions -----------------------------------------------------------

    def _step(self, token: Token) -> tuple[Outcome, ProgramEffect | None]:
        while True:
            top = self._stack[-1] if self._stack else None
            if top is None:
                result = self._at_top_level(token)
            elif isinstance(top, _TopForm):
                result = self._in_top_form(top, token)
            elif isinstance(top, _TopSetValue):
                result = self._in_top_set_value(top, token)
            elif isinstance(top, _CmdSet):
                result = self._in_cmdset(top, token)
            elif isinstance(top, _FnCmd):
                result = self._in_fn(top, token)
            elif isinstance(top, _CallCmd):
                result = self._in_call(top, token)
            elif isinstance(top, _SetCmd):
                result = self._in_set(top, token)
            elif isinstance(top, _SetValueCmd):
                result = self._in_set_value(top, token)
            else:
                result = self._in_math(top, token)
            if result is not _REDO:
                return result

    def _at_top_level(self, token: Token):
        if token.kind in (TokenKind.BEGIN, TokenKind.DEF, TokenKind.SET):
            self._stack.append(_TopForm(token.kind))
            return Outcome.CONSUMED, None
        _fail(f"expected BEGIN, DEF or SET to start a form, got {token.describe()}")

    def _in_top_form(self, frame: _TopForm, token: Token):
        kind = token.kind
        if kind is TokenKind.DIGIT:
            frame.digits += str(token.value)
            return Outcome.CONSUMED, None
        if not frame.digits:
            _fail(f"expected a digit after {frame.lead.value}, got {token.describe()}")
        number = int(frame.digits)
        lead = frame.lead
        if kind is TokenKind.CMD_SEP:
            if lead is TokenKind.SET:
                _fail("SET cannot start a function definition (use DEF or BEGIN)")
            self._stack.pop()
            self._push_cmdset(_CmdSet("def", slot=number))
            return Outcome.CONSUMED, None
        if kind is TokenKind.PARAM_SEP:
            if lead is TokenKind.DEF:
                _fail("DEF cannot start a variable assignment (use SET or BEGIN)")
            self._stack.pop()
            self._stack.append(_TopSetValue(number))
            return Outcome.CONSUMED, None
        if kind is TokenKind.END:
            if lead is TokenKind.DEF:
                _fail("DEF <n> END is not a form (keymap change needs SET or BEGIN)")
            self._activate_keymap(number)
            self._stack.pop()
            return Outcome.FORM_COMPLETED, KeymapChanged(number)
        if kind in (TokenKind.DO, TokenKind.BEGIN):
            if lead is not TokenKind.BEGIN:
                _fail(f"a loop must start with BEGIN, not {lead.value}")
            self._stack.pop()
            self._push_cmdset(_CmdSet("loop", count=number))
            return Outcome.CONSUMED, None
        _fail(
            f"expected CMD_SEP, PARAM_SEP, END, DO or BEGIN after {lead.value} {number}, "
            f"got {token.describe()}"
        )

    def _in_top_set_value(self, frame: _TopSetValue, token: Token):
        kind = token.kind
        if kind is TokenKind.END:
            value = frame.num.value()
            self.env.variables[frame.slot] = value
            self._stack.pop()
            return Outcome.FORM_COMPLETED, VariableSet(frame.slot, value)
        self._feed_number(frame.num, token, "variable value")
        return Outcome.CONSUMED, None

    def _in_cmdset(self, frame: _CmdSet, token: Token):
        kind = token.kind
        if kind is TokenKind.END:
            if frame.awaiting == "cmd" and frame.cmd_count == 0:
                _fail("a command set needs at least one command before END")
            return self._close_cmdset()
        if frame.awaiting == "sep":
            if kind is TokenKind.CMD_SEP:
                frame.awaiting = "cmd"
                return Outcome.CONSUMED, None
            _fail(f"expected CMD_SEP or END after a command, got {token.describe()}")
        # awaiting == "cmd"
        if kind is TokenKind.FN:
            name = str(token.value)
            self._stack.append(_MathCmd(name) if name in MATH_OPS else _FnCmd(name))
            return Outcome.CONSUMED, None
        if kind is TokenKind.CALL:
            self._stack.append(_CallCmd())
            return Outcome.CONSUMED, None
        if kind in (TokenKind.BEGIN, TokenKind.SET):
            self._stack.append(_SetCmd(kind))
            return Outcome.CONSUMED, None
        if kind is TokenKind.CMD_SEP:
            _fail("expected a command, got CMD_SEP")
        _fail(f"expected a command (FN, CALL, BEGIN or SET), got {token.describe()}")

    def _in_fn(self, frame: _FnCmd, token: Token):
        kind = token.kind
        cur = frame.cur
        if isinstance(cur, _NumBuilder):
            if kind is TokenKind.DIGIT:
                cur.add_digit(int(token.value))  # type: ignore[arg-type]
                return Outcome.CONSUMED, None
            if kind is TokenKind.DECIMAL_POINT:
                cur.add_point()
                return Outcome.CONSUMED, None
            if kind is TokenKind.PARAM_SEP:
                frame.args.append(Literal(cur.value()))
                frame.cur = None
                frame.expect_arg = True
                return Outcome.CONSUMED, None
            if kind in (TokenKind.CMD_SEP, TokenKind.END):
                frame.args.append(Literal(cur.value()))
                return self._finish_cmd(FnCall(frame.name, tuple(frame.args)))
            _fail(f"expected digit, PARAM_SEP, CMD_SEP or END in a number, got {token.describe()}")
        if isinstance(cur, _CallRef):
            if kind is TokenKind.DIGIT:
                cur.digits += str(token.value)
                return Outcome.CONSUMED, None
            if kind is TokenKind.PARAM_SEP:
                frame.args.append(VarRef(cur.slot()))
                frame.cur = None
                frame.expect_arg = True
                return Outcome.CONSUMED, None
            if kind in (TokenKind.CMD_SEP, TokenKind.END):
                frame.args.append(VarRef(cur.slot()))
                return self._finish_cmd(FnCall(frame.name, tuple(frame.args)))
            _fail(f"expected a digit after CALL, got {token.describe()}")
        # no argument in progress
        if kind is TokenKind.DIGIT:
            frame.cur = _NumBuilder()
            frame.cur.add_digit(int(token.value))  # type: ignore[arg-type]
            frame.expect_arg = False
            return Outcome.CONSUMED, None
        if kind is TokenKind.NEG_SIGN:
            frame.cur = _NumBuilder(negative=True)
            frame.expect_arg = False
            return Outcome.CONSUMED, None
        if kind is TokenKind.CALL:
            frame.cur = _CallRef()
            frame.expect_arg = False
            return Outcome.CONSUMED, None
        if kind is TokenKind.PARAM:
            if frame.args and not frame.expect_arg:
                _fail("arguments must be separated by PARAM_SEP")
            frame.args.append(Symbol(str(token.value)))
            frame.expect_arg = False
            return Outcome.CONSUMED, None
        if kind is TokenKind.PARAM_SEP:
            if frame.expect_arg:
                _fail("expected an argument after PARAM_SEP")
            if not frame.args:
                _fail("PARAM_SEP before the first argument")
            frame.expect_arg = True
            return Outcome.CONSUMED, None
        if kind in (TokenKind.CMD_SEP, TokenKind.END):
            if frame.expect_arg:
                _fail("dangling PARAM_SEP before end of command")
            return self._finish_cmd(FnCall(frame.name, tuple(frame.args)))
        _fail(f"expected an argument, PARAM_SEP, CMD_SEP or END, got {token.describe()}")

    def _in_call(self, frame: _CallCmd, token: Token):
        kind = token.kind
        if kind is TokenKind.DIGIT:
            frame.digits += str(token.value)
            return Outcome.CONSUMED, None
        if kind in (TokenKind.CMD_SEP, TokenKind.END):
            if not frame.digits:
                _fail("expected a function slot number after CALL")
            return self._finish_cmd(CallFn(int(frame.digits)))
        _fail(f"expected a digit, CMD_SEP or END after CALL, got {token.describe()}")

    def _in_set(self, frame: _SetCmd, token: Token):
        kind = token.kind
        if kind is TokenKind.DIGIT:
            frame.digits += str(token.value)
            return Outcome.CONSUMED, None
        if not frame.digits:
            _fail(f"expected a digit after {frame.lead.value}, got {token.describe()}")
        number = int(frame.digits)
        if kind is TokenKind.PARAM_SEP:
            self._stack.pop()
            self._stack.append(_SetValueCmd(number))
            return Outcome.CONSUMED, None
        if kind in (TokenKind.CMD_SEP, TokenKind.END):
            # Keymap switch: applied now, never recorded.
            self._activate_keymap(number)
            self._stack.pop()
            parent = self._stack[-1]
            assert isinstance(parent, _CmdSet)
            parent.cmd_count += 1
            parent.awaiting = "sep"
            return _REDO
        if kind is TokenKind.FN:
            # Switch keymap and let the FN start the next command directly.
            self._activate_keymap(number)
            self._stack.pop()
            parent = self._stack[-1]
            assert isinstance(parent, _CmdSet)
            parent.cmd_count += 1
            parent.awaiting = "cmd"
            return _REDO
        if kind in (TokenKind.DO, TokenKind.BEGIN):
            if frame.lead is not TokenKind.BEGIN:
                _fail("a nested loop must start with BEGIN, not SET")
            self._stack.pop()
            self._push_cmdset(_CmdSet("loop", count=number))
            return Outcome.CONSUMED, None
        _fail(
            f"expected PARAM_SEP, CMD_SEP, END, DO, BEGIN or a command word after "
            f"{frame.lead.value} {number}, got {token.describe()}"
        )

    def _in_set_value(self, frame: _SetValueCmd, token: Token):
        kind = token.kind
        if kind in (TokenKind.CMD_SEP, TokenKind.END):
            return self._finish_cmd(SetVar(frame.slot, frame.num.value()))
        self._feed_number(frame.num, token, "variable value")
        return Outcome.CONSUMED, None

    def _in_math(self, frame: _MathCmd, token: Token):
        kind = token.kind
        if frame.stage == "call":
            if kind is TokenKind.CALL:
                frame.stage = "slot"
                return Outcome.CONSUMED, None
            _fail(f"math '{frame.op}' expects CALL <variable slot>, got {token.describe()}")
        if frame.stage == "slot":
            if kind is TokenKind.DIGIT:
                frame.slot_digits += str(token.value)
                return Outcome.CONSUMED, None
            if kind is TokenKind.PARAM_SEP:
                if not frame.slot_digits:
                    _fail("expected a variable slot number after CALL")
                frame.stage = "operand"
                return Outcome.CONSUMED, None
            _fail(
                f"expected a digit or PARAM_SEP in math '{frame.op}', got {token.describe()}"
            )
        # stage == "operand"
        operand = frame.operand
        if operand is None:
            if kind is TokenKind.DIGIT:
                frame.operand = _NumBuilder()
                frame.operand.add_digit(int(token.value))  # type: ignore[arg-type]
                return Outcome.CONSUMED, None
            if kind is TokenKind.NEG_SIGN:
                frame.operand = _NumBuilder(negative=True)
                return Outcome.CONSUMED, None
            if kind is TokenKind.CALL:
                frame.operand = _CallRef()
                return Outcome.CONSUMED, None
            _fail(f"expected a number or CALL <var> operand, got {token.describe()}")
        if isinstance(operand, _NumBuilder):
            if kind is TokenKind.DIGIT:
                operand.add_digit(int(token.value))  # type: ignore[arg-type]
                return Outcome.CONSUMED, None
            if kind is TokenKind.DECIMAL_POINT:
                operand.add_point()
                return Outcome.CONSUMED, None
            if kind in (TokenKind.CMD_SEP, TokenKind.END):
                node = MathFn(frame.op, int(frame.slot_digits), Literal(operand.value()))
                return self._finish_cmd(node)
            _fail(f"expected digit, CMD_SEP or END in math operand, got {token.describe()}")
        # operand is a variable load
        if kind is TokenKind.DIGIT:
            operand.digits += str(token.value)
            return Outcome.CONSUMED, None
        if kind in (TokenKind.CMD_SEP, TokenKind.END):
            node = MathFn(frame.op, int(frame.slot_digits), VarRef(operand.slot()))
            return self._finish_cmd(node)
        _fail(f"expected a digit, CMD_SEP or END after CALL, got {token.describe()}")

    # -- helpers ---------------------------------------------------------------

    def _feed_number(self, num: _NumBuilder, token: Token, what: str) -> None:
        kind = token.kind
        if kind is TokenKind.DIGIT:
            num.add_digit(int(token.value))  # type: ignore[arg-type]
        elif kind is TokenKind.NEG_SIGN:
            if num.negative or num.int_digits:
                _fail("negative sign must come first in a number")
            num.negative = True
        elif kind is TokenKind.DECIMAL_POINT:
            num.add_point()
        else:
            _fail(f"expected a number token in {what}, got {token.describe()}")

    def _push_cmdset(self, frame: _CmdSet) -> None:
        depth = sum(isinstance(f, _CmdSet) for f in self._stack)
        if depth >= self.max_depth:
            _fail(f"command sets nested deeper than {self.max_depth}")
        self._stack.append(frame)

    def _activate_keymap(self, index: int) -> None:
        try:
            self.registry.activate(index)
        except UnknownKeymapError as exc:
            _fail(str(exc))

    def _finish_cmd(self, node: CmdNode):
        """Record a completed command and hand the terminator back to the cmdset."""
        self._stack.pop()
        parent = self._stack[-1]
        assert isinstance(parent, _CmdSet)
        parent.nodes.append(node)
        parent.cmd_count += 1
        parent.awaiting = "sep"
        return _REDO

    def _close_cmdset(self):
        frame = self._stack.pop()
        assert isinstance(frame, _CmdSet)
        if frame.kind == "def":
            assert frame.slot is not None
            self.env.functions[frame.slot] = tuple(frame.nodes)
            return Outcome.FORM_COMPLETED, DefinedFunction(frame.slot)
        assert frame.count is not None
        node = Loop(frame.count, tuple(frame.nodes))
        if not self._stack:
            try:
                commands = expand(
                    [node],
                    self.env,
                    max_commands=self.max_commands,
                    max_depth=self.max_depth,
                )
            except ExpansionError as exc:
                _fail(str(exc))
            return Outcome.FORM_COMPLETED, Executed(commands)
        parent = self._stack[-1]
        assert isinstance(parent, _CmdSet)
        parent.nodes.append(node)
        parent.cmd_count += 1
        parent.awaiting = "sep"
        return Outcome.CONSUMED, None


def render_body(body: Sequence[CmdNode]) -> list[str]:
    """Human-readable listing of a recorded body, one line per command."""
    lines: list[str] = []

    def arg_text(arg: Arg) -> str:
        if isinstance(arg, Literal):
            return format_number(arg.value)
        if isinstance(arg, VarRef):
            return f"var[{arg.slot}]"
        return arg.text

    def walk(nodes: Sequence[CmdNode], indent: int) -> None:
        pad = "  " * indent
        for node in nodes:
            if isinstance(node, FnCall):
                lines.append(pad + " ".join([node.name, *(arg_text(a) for a in node.args)]).rstrip())
            elif isinstance(node, CallFn):
                lines.append(f"{pad}call {node.slot}")
            elif isinstance(node, SetVar):
                lines.append(f"{pad}var[{node.slot}] = {format_number(node.value)}")
            elif isinstance(node, MathFn):
                lines.append(f"{pad}var[{node.var_slot}] {node.op}= {arg_text(node.operand)}")
            else:
                lines.append(f"{pad}repeat {node.count}:")
                walk(node.body, indent + 1)

    walk(body, 0)
    return lines
