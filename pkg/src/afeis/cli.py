"""Command-line entry points.

Exit codes: 0 success, 1 parse/validation failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import IO, Iterable

from .errors import ConfigError, GestureRangeError
from .interpreter import Outcome, format_number
from .keymap import parse_keymap_report
from .server import SessionServer
from .session import Session, describe_report, load_session_config
from .stream_sim import load_experiment_plan, run_experiment, rows_to_csv

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_CONFIG = 2


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="afeis",
        description="Gesture-programmable robot interaction: REPL, script runner, "
        "session server, and robustness experiments.",
    )
    sub = parser.add_subparsers(required=True)

    p_repl = sub.add_parser("repl", help="interactive session: type gesture IDs or alias letters")
    p_repl.add_argument("--config", required=True)
    p_repl.add_argument("--effects-out", help="write the canonical effect log to this file")
    p_repl.set_defaults(handler=_cmd_repl)

    p_run = sub.add_parser("run", help="run a gesture script file")
    p_run.add_argument("script")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--effects-out")
    p_run.set_defaults(handler=_cmd_run)

    p_serve = sub.add_parser("serve", help="serve the live pipeline over the line protocol")
    p_serve.add_argument("--config", required=True)
    p_serve.add_argument("--port", type=int, help="override the configured port")
    p_serve.set_defaults(handler=_cmd_serve)

    p_exp = sub.add_parser("experiment", help="run a seeded robustness experiment to CSV")
    p_exp.add_argument("spec")
    p_exp.add_argument("-o", "--output", required=True)
    p_exp.set_defaults(handler=_cmd_experiment)

    p_val = sub.add_parser("validate-keymap", help="check a keymap file and print its bindings")
    p_val.add_argument("file")
    p_val.add_argument("--index", type=int, default=0)
    p_val.set_defaults(handler=_cmd_validate)
    return parser


def _write_effects(session: Session, path: str | None) -> None:
    if path:
        Path(path).write_text("".join(line + "\n" for line in session.effect_log), encoding="utf-8")


# --- repl ---------------------------------------------------------------------

REPL_HELP = """\
enter a gesture ID (0..49) or an alias letter from the active keymap
  :state   show the vehicle state
  :env     show defined functions and variables
  :trace   toggle the parse trace
  :reset   fresh session (vehicle at origin, tables cleared)
  :help    this text
  :quit    leave"""


def repl(session: Session, in_stream: IO[str], out_stream: IO[str]) -> int:
    """Drive a session from a line stream; returns the process exit code."""
    trace = False
    interactive = in_stream.isatty() if hasattr(in_stream, "isatty") else False

    def say(text: str = "") -> None:
        print(text, file=out_stream)

    if interactive:
        say("afeis session ready (:help for commands)")
    while True:
        if interactive:
            out_stream.write("afeis> ")
            out_stream.flush()
        line = in_stream.readline()
        if not line:
            break
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith(":"):
            command = line.lower()
            if command in (":quit", ":q", ":exit"):
                break
            if command == ":help":
                say(REPL_HELP)
            elif command == ":state":
                say(_state_line(session))
            elif command == ":env":
                for text in _env_lines(session):
                    say(text)
            elif command == ":trace":
                trace = not trace
                say(f"trace {'on' if trace else 'off'}")
            elif command == ":reset":
                session.reset()
                say("session reset")
            else:
                say(f"unknown command {line!r} (:help)")
            continue
        for word in line.split():
            gesture = _parse_gesture_word(word, session)
            if gesture is None:
                say(f"not a gesture ID or alias: {word!r}")
                continue
            try:
                report = session.feed_gesture(gesture)
            except GestureRangeError as exc:
                say(f"rejected: {exc}")
                continue
            if trace:
                say(report.result.trace_line())
            for text in describe_report(report):
                say(text)
    return EXIT_OK if session.clean else EXIT_PARSE


def _parse_gesture_word(word: str, session: Session) -> int | None:
    aliases = session.registry.active.aliases
    if word in aliases:
        return aliases[word]
    try:
        return int(word)
    except ValueError:
        return None


def _state_line(session: Session) -> str:
    view = session.robot.state_snapshot()
    return (
        f"x={format_number(round(view.x, 9))} m  y={format_number(round(view.y, 9))} m  "
        f"depth={format_number(view.depth)} m  heading={format_number(view.heading)} deg  "
        f"clock={format_number(view.clock)} s  snapshots={len(view.snapshots)}"
    )


def _env_lines(session: Session) -> list[str]:
    record = session.env_record()
    lines = []
    for slot, body in sorted(record["functions"].items(), key=lambda kv: int(kv[0])):
        lines.append(f"function {slot}:")
        lines.extend(f"  {entry}" for entry in body)
    for slot, value in sorted(record["variables"].items(), key=lambda kv: int(kv[0])):
        lines.append(f"variable {slot} = {format_number(value)}")
    return lines or ["(nothing defined)"]


def _cmd_repl(args) -> int:
    session = load_session_config(args.config).build_session()
    code = repl(session, sys.stdin, sys.stdout)
    _write_effects(session, args.effects_out)
    return code


# --- script runner ---------------------------------------------------------------

def script_words(text: str) -> Iterable[tuple[str, int, int]]:
    """Yield (word, line, column) from a script; ``#`` comments to end of line."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        column = 1
        for word in line.split():
            column = line.index(word, column - 1) + 1
            yield word, lineno, column
            column += len(word)


def run_script(session: Session, text: str, out_stream: IO[str]) -> int:
    """Feed a whole script; report effects and final state; nonzero on any error."""

    def say(message: str) -> None:
        print(message, file=out_stream)

    failed = False
    for word, line, column in script_words(text):
        gesture = _parse_gesture_word(word, session)
        if gesture is None:
            say(f"{line}:{column}: not a gesture ID or alias: {word!r}")
            failed = True
            continue
        try:
            report = session.feed_gesture(gesture)
        except GestureRangeError as exc:
            say(f"{line}:{column}: rejected: {exc}")
            failed = True
            continue
        result = report.result
        if result.outcome is Outcome.PARSE_ERROR:
            say(f"{line}:{column}: parse error: {result.diagnostic}")
            failed = True
        if report.delivery_error:
            say(f"{line}:{column}: delivery failed: {report.delivery_error}")
            failed = True
    if session.interpreter.mid_form:
        say(f"error: script ended mid-form (in {session.interpreter.describe_state()})")
        failed = True
    say(f"effects: {len(session.effect_log)}")
    for entry in session.effect_log:
        say(f"  {entry}")
    say(_state_line(session))
    return EXIT_PARSE if failed else EXIT_OK


def _cmd_run(args) -> int:
    session = load_session_config(args.config).build_session()
    script_path = Path(args.script)
    if not script_path.is_file():
        raise ConfigError(f"script {script_path} does not exist")
    code = run_script(session, script_path.read_text(encoding="utf-8"), sys.stdout)
    _write_effects(session, args.effects_out)
    return code


# --- server -----------------------------------------------------------------------

def _cmd_serve(args) -> int:
    config = load_session_config(args.config)
    session = config.build_session()
    port = args.port if args.port is not None else config.port
    server = SessionServer(session, port=port)
    host, bound_port = server.start()
    print(f"listening on {host}:{bound_port}", flush=True)
    try:
        server.wait()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return EXIT_OK


# --- experiment ---------------------------------------------------------------------

def _cmd_experiment(args) -> int:
    plan = load_experiment_plan(args.spec)
    rows = run_experiment(plan)
    csv_text = rows_to_csv(rows)
    Path(args.output).write_text(csv_text, encoding="utf-8")
    total = sum(row.result.trials for row in rows)
    wins = sum(row.result.successes for row in rows)
    print(f"{len(rows)} rows, {wins}/{total} successful trials -> {args.output}")
    return EXIT_OK


# --- keymap validation ----------------------------------------------------------------

def _cmd_validate(args) -> int:
    path = Path(args.file)
    if not path.is_file():
        raise ConfigError(f"keymap file {path} does not exist")
    keymap, errors, warnings = parse_keymap_report(path.read_text(encoding="utf-8"), args.index)
    for warning in warnings:
        print(f"warning: {warning}")
    if errors:
        for error in errors:
            print(f"error: {error}")
        return EXIT_PARSE
    assert keymap is not None
    bound = sorted(keymap.system_gestures() | set(keymap.fn) | set(keymap.param))
    print(f"OK: {len(bound)} gestures bound, {50 - len(bound)} left empty")
    for symbol, gestures in keymap.system.items():
        if gestures:
            print(f"  {symbol} = {', '.join(map(str, gestures))}")
    for g in sorted(keymap.fn):
        print(f"  fn {g} = {keymap.fn[g]}")
    for g in sorted(keymap.param):
        print(f"  param {g} = {keymap.param[g]}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
