"""Random well-formed program generator for parser fuzzing.

Programs are generated as structure first, then linearized to gestures under
a single-role keymap (every gesture carries exactly one meaning), so the
token stream a sequence produces is unambiguous.  The generator carries its
own tiny evaluator, written independently of the interpreter, to predict the
effects a program must produce.

Each program is a preamble (variable/function definitions the subject may
reference) plus one subject form.  ``deletable`` lists the indices of the
subject's structural tokens: removing any one of them must make the parse
fail without emitting any effect beyond the preamble's.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from random import Random

from afeis.interpreter import (
    CallFn,
    ConcreteCommand,
    DefinedFunction,
    Executed,
    FnCall,
    KeymapChanged,
    Literal,
    MathFn,
    SetVar,
    Symbol,
    VarRef,
    VariableSet,
)
from afeis.keymap import Keymap

# Single-role gesture layout for fuzzing.
G_BEGIN, G_END, G_CALL, G_SEP, G_PSEP = 40, 41, 42, 43, 44
G_DO, G_DEF, G_SET = 45, 46, 47
G_NEG, G_POINT = 30, 31
G_DIGIT = dict(enumerate(range(0, 10)))  # digit d -> gesture d
FN_NAMES = {15: "F15", 16: "F16", 17: "F17", 18: "F18"}
SYMBOL_TEXTS = {25: "alpha", 26: "beta", 27: "gamma"}
MATH_GESTURES = {33: "+", 34: "-", 35: "*", 36: "/"}
UNBOUND_GESTURE = 49  # resolves to nothing everywhere


def fuzz_keymap(bind_optional_symbols: bool) -> Keymap:
    system = {
        "BEGIN": (G_BEGIN,),
        "END": (G_END,),
        "CALL": (G_CALL,),
        "CMD_SEP": (G_SEP,),
        "PARAM_SEP": (G_PSEP,),
        "DO": (G_DO,) if bind_optional_symbols else (),
        "DEF": (G_DEF,) if bind_optional_symbols else (),
        "SET": (G_SET,) if bind_optional_symbols else (),
    }
    fn = dict(FN_NAMES) | MATH_GESTURES
    param = {g: str(d) for d, g in G_DIGIT.items()}
    param[G_NEG] = "-"
    param[G_POINT] = "."
    param |= SYMBOL_TEXTS
    return Keymap(0, system, fn, param, {})


@dataclass(frozen=True)
class Num:
    negative: bool
    int_digits: str
    frac_digits: str = ""

    @property
    def value(self) -> float:
        text = self.int_digits + ("." + self.frac_digits if self.frac_digits else "")
        return -float(text) if self.negative else float(text)


@dataclass(frozen=True)
class DefForm:
    slot: int
    body: tuple


@dataclass(frozen=True)
class SetForm:
    slot: int
    num: Num


@dataclass(frozen=True)
class KeymapForm:
    index: int


@dataclass(frozen=True)
class ExpForm:
    count: int
    body: tuple


@dataclass(frozen=True)
class LoadKeymapCmd:
    index: int


@dataclass
class Program:
    forms: list
    gestures: list[int] = field(default_factory=list)
    deletable: list[int] = field(default_factory=list)
    expected_effects: list = field(default_factory=list)
    optional_symbols_bound: bool = True


class ProgramGenerator:
    def __init__(self, rng: Random):
        self.rng = rng

    def generate(self) -> Program:
        rng = self.rng
        program = Program(forms=[], optional_symbols_bound=rng.random() < 0.5)
        self.var_slots: list[int] = []
        self.fn_slots: list[int] = []

        for _ in range(rng.randint(0, 2)):
            if rng.random() < 0.6:
                program.forms.append(self._gen_set_form())
            else:
                program.forms.append(self._gen_def_form())
        subject_kind = rng.choices(
            ["exp", "def", "set", "keymap"], weights=[6, 2, 1, 1]
        )[0]
        if subject_kind == "exp":
            subject = ExpForm(rng.randint(0, 3), self._gen_body(depth=1))
        elif subject_kind == "def":
            subject = self._gen_def_form()
        elif subject_kind == "set":
            subject = self._gen_set_form()
        else:
            subject = KeymapForm(0)
        program.forms.append(subject)

        program.expected_effects = evaluate(program.forms)
        self._linearize(program)
        return program

    # -- structure -------------------------------------------------------------

    def _gen_num(self, *, allow_fraction: bool = True) -> Num:
        rng = self.rng
        int_digits = "".join(
            str(rng.randint(0, 9)) for _ in range(rng.randint(1, 3))
        )
        frac = ""
        if allow_fraction and rng.random() < 0.3:
            frac = "".join(str(rng.randint(0, 9)) for _ in range(rng.randint(1, 2)))
        return Num(rng.random() < 0.25, int_digits, frac)

    def _gen_set_form(self) -> SetForm:
        slot = self.rng.randint(0, 9)
        if slot not in self.var_slots:
            self.var_slots.append(slot)
        return SetForm(slot, self._gen_num())

    def _gen_def_form(self) -> DefForm:
        slot = self.rng.randint(0, 5)
        form = DefForm(slot, self._gen_body(depth=1, allow_calls=False))
        if slot not in self.fn_slots:
            self.fn_slots.append(slot)
        return form

    def _gen_body(self, depth: int, allow_calls: bool = True) -> tuple:
        rng = self.rng
        body = []
        for _ in range(rng.randint(1, 3)):
            roll = rng.random()
            if roll < 0.5 or depth >= 3:
                name = rng.choice(list(FN_NAMES.values()))
                args = []
                for _ in range(rng.randint(0, 2)):
                    arg_roll = rng.random()
                    if arg_roll < 0.55 or not self.var_slots:
                        args.append(Literal(self._gen_num().value))
                    elif arg_roll < 0.8:
                        args.append(VarRef(rng.choice(self.var_slots)))
                    else:
                        args.append(Symbol(rng.choice(list(SYMBOL_TEXTS.values()))))
                body.append(FnCall(name, tuple(args)))
            elif roll < 0.6 and allow_calls and self.fn_slots:
                body.append(CallFn(rng.choice(self.fn_slots)))
            elif roll < 0.7:
                body.append(LoadKeymapCmd(0))
            elif roll < 0.8 and self.var_slots:
                op = rng.choice(["+", "-", "*"])  # '/' needs nonzero guarantees
                operand = (
                    Literal(self._gen_num(allow_fraction=False).value)
                    if rng.random() < 0.7 or not self.var_slots
                    else VarRef(rng.choice(self.var_slots))
                )
                body.append(MathFn(op, rng.choice(self.var_slots), operand))
            elif roll < 0.9:
                body.append(SetVar(20 + rng.randint(0, 5), self._gen_num().value))
            else:
                body.append(ExpForm(rng.randint(0, 2), self._gen_body(depth + 1, allow_calls)))
        return tuple(body)

    # -- linearization -----------------------------------------------------------

    def _emit(self, program: Program, gesture: int, deletable: bool = False) -> None:
        if deletable:
            program.deletable.append(len(program.gestures))
        program.gestures.append(gesture)

    def _emit_int(self, program: Program, value: int) -> None:
        for ch in str(value):
            self._emit(program, G_DIGIT[int(ch)])

    def _emit_num(self, program: Program, value: float) -> None:
        text = f"{value:f}".rstrip("0")
        if text.startswith("-"):
            self._emit(program, G_NEG)
            text = text[1:]
        int_part, _, frac_part = text.partition(".")
        for ch in int_part:
            self._emit(program, G_DIGIT[int(ch)])
        if frac_part:
            self._emit(program, G_POINT)
            for ch in frac_part:
                self._emit(program, G_DIGIT[int(ch)])

    def _lead(self, program: Program, preferred: int, structural: bool) -> None:
        # DEF/SET leads fall back to BEGIN when the optional symbols are unbound.
        if not program.optional_symbols_bound and preferred in (G_DEF, G_SET):
            preferred = G_BEGIN
        self._emit(program, preferred, deletable=structural)

    def _linearize(self, program: Program) -> None:
        subject_index = len(program.forms) - 1
        for i, form in enumerate(program.forms):
            structural = i == subject_index
            if isinstance(form, SetForm):
                lead = G_SET if self.rng.random() < 0.5 else G_BEGIN
                self._lead(program, lead, structural)
                self._emit_int(program, form.slot)
                self._emit(program, G_PSEP)
                self._emit_num(program, form.num.value)
                self._emit(program, G_END, deletable=structural)
            elif isinstance(form, DefForm):
                lead = G_DEF if self.rng.random() < 0.5 else G_BEGIN
                self._lead(program, lead, structural)
                self._emit_int(program, form.slot)
                self._emit(program, G_SEP, deletable=structural)
                self._emit_cmdset(program, form.body, structural)
                self._emit(program, G_END, deletable=structural)
            elif isinstance(form, KeymapForm):
                lead = G_SET if self.rng.random() < 0.5 else G_BEGIN
                self._lead(program, lead, structural)
                self._emit_int(program, form.index)
                self._emit(program, G_END, deletable=structural)
            else:
                assert isinstance(form, ExpForm)
                self._emit(program, G_BEGIN, deletable=structural)
                self._emit_int(program, form.count)
                do = G_DO if program.optional_symbols_bound and self.rng.random() < 0.5 else G_BEGIN
                self._emit(program, do, deletable=structural)
                self._emit_cmdset(program, form.body, structural)
                self._emit(program, G_END, deletable=structural)

    def _emit_cmdset(self, program: Program, body: tuple, structural: bool) -> None:
        fn_by_name = {name: g for g, name in FN_NAMES.items()}
        math_by_op = {op: g for g, op in MATH_GESTURES.items()}
        symbol_by_text = {text: g for g, text in SYMBOL_TEXTS.items()}
        for i, node in enumerate(body):
            if i:
                prev = body[i - 1]
                head_is_fn = isinstance(node, (FnCall, MathFn))
                head_is_setlike = isinstance(node, (LoadKeymapCmd, SetVar, ExpForm))
                safe = (head_is_fn or head_is_setlike) and not isinstance(
                    prev, LoadKeymapCmd
                )
                self._emit(program, G_SEP, deletable=structural and safe)
            if isinstance(node, FnCall):
                self._emit(program, fn_by_name[node.name])
                for j, arg in enumerate(node.args):
                    if j:
                        self._emit(program, G_PSEP)
                    if isinstance(arg, Literal):
                        self._emit_num(program, arg.value)
                    elif isinstance(arg, VarRef):
                        self._emit(program, G_CALL)
                        self._emit_int(program, arg.slot)
                    else:
                        self._emit(program, symbol_by_text[arg.text])
            elif isinstance(node, CallFn):
                self._emit(program, G_CALL, deletable=structural)
                self._emit_int(program, node.slot)
            elif isinstance(node, LoadKeymapCmd):
                lead = G_SET if program.optional_symbols_bound and self.rng.random() < 0.5 else G_BEGIN
                self._emit(program, lead)
                self._emit_int(program, node.index)
            elif isinstance(node, SetVar):
                lead = G_SET if program.optional_symbols_bound and self.rng.random() < 0.5 else G_BEGIN
                self._emit(program, lead)
                self._emit_int(program, node.slot)
                self._emit(program, G_PSEP)
                self._emit_num(program, node.value)
            elif isinstance(node, MathFn):
                self._emit(program, math_by_op[node.op])
                self._emit(program, G_CALL, deletable=structural)
                self._emit_int(program, node.var_slot)
                self._emit(program, G_PSEP)
                if isinstance(node.operand, Literal):
                    self._emit_num(program, node.operand.value)
                else:
                    self._emit(program, G_CALL)
                    self._emit_int(program, node.operand.slot)
            else:
                assert isinstance(node, ExpForm)
                self._emit(program, G_BEGIN, deletable=structural)
                self._emit_int(program, node.count)
                do = G_DO if program.optional_symbols_bound and self.rng.random() < 0.5 else G_BEGIN
                # With count 0, deleting the DO leaves "<set> 0 FN..." which
                # reads as a valid switch to keymap 0; only nonzero counts make
                # the deletion detectable.
                self._emit(program, do, deletable=structural and node.count != 0)
                self._emit_cmdset(program, node.body, structural)
                self._emit(program, G_END, deletable=structural)


def evaluate(forms) -> list:
    """Independent evaluator: predicts the effect list a program must yield."""
    functions: dict[int, tuple] = {}
    variables: dict[int, float] = {}
    effects = []

    def run(nodes, out) -> None:  # mirrors expansion semantics, written separately
        for node in nodes:
            if isinstance(node, FnCall):
                args = []
                for arg in node.args:
                    if isinstance(arg, Literal):
                        args.append(arg.value)
                    elif isinstance(arg, VarRef):
                        args.append(variables[arg.slot])
                    else:
                        args.append(arg.text)
                out.append(ConcreteCommand(node.name, tuple(args)))
            elif isinstance(node, CallFn):
                run(functions[node.slot], out)
            elif isinstance(node, LoadKeymapCmd):
                pass  # parse-time only, never part of the recording
            elif isinstance(node, SetVar):
                variables[node.slot] = node.value
            elif isinstance(node, MathFn):
                operand = (
                    node.operand.value
                    if isinstance(node.operand, Literal)
                    else variables[node.operand.slot]
                )
                current = variables[node.var_slot]
                variables[node.var_slot] = {
                    "+": current + operand,
                    "-": current - operand,
                    "*": current * operand,
                }[node.op]
            else:
                assert isinstance(node, ExpForm)
                for _ in range(node.count):
                    run(node.body, out)

    for form in forms:
        if isinstance(form, SetForm):
            variables[form.slot] = form.num.value
            effects.append(VariableSet(form.slot, form.num.value))
        elif isinstance(form, DefForm):
            functions[form.slot] = form.body
            effects.append(DefinedFunction(form.slot))
        elif isinstance(form, KeymapForm):
            effects.append(KeymapChanged(form.index))
        else:
            out: list[ConcreteCommand] = []
            for _ in range(form.count):
                run(form.body, out)
            effects.append(Executed(tuple(out)))
    return effects
