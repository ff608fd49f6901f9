import json

import pytest

from afeis.errors import ConfigError
from afeis.interpreter import ConcreteCommand, Executed, VariableSet
from afeis.keymap import serialize_keymap
from afeis.session import Session, effect_line, load_session_config
from afeis.stream_sim import DEMO_KEYMAP_DIVE, DEMO_KEYMAP_MAIN
from conftest import WORKED_SEQUENCE


@pytest.fixture
def config_dir(tmp_path):
    keymaps = tmp_path / "keymaps"
    keymaps.mkdir()
    (keymaps / "0.keymap").write_text(DEMO_KEYMAP_MAIN)
    (keymaps / "1.keymap").write_text(DEMO_KEYMAP_DIVE)
    config = {
        "keymap_dir": "keymaps",
        "confirmer": {"window_ms": 1000, "threshold": 8, "min_fraction": 0.6},
        "robot": {
            "locations": {"1": [5.0, 0.0, 2.0]},
            "commands": {"GOTO1": {"builtin": "GOTO", "args": [1]}},
        },
        "port": 0,
    }
    path = tmp_path / "session.json"
    path.write_text(json.dumps(config))
    return path


def make_session(config_dir) -> Session:
    return load_session_config(config_dir).build_session()


def test_load_session_config(config_dir):
    config = load_session_config(config_dir)
    assert set(config.keymaps) == {0, 1}
    assert config.confirmer.threshold == 8
    assert config.robot.locations == {1: (5.0, 0.0, 2.0)}


def test_config_missing_file():
    with pytest.raises(ConfigError, match="cannot read"):
        load_session_config("/nonexistent/session.json")


def test_config_bad_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{nope")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_session_config(path)


def test_config_missing_keymap_file(tmp_path):
    path = tmp_path / "session.json"
    path.write_text(json.dumps({"keymaps": {"0": "missing.keymap"}}))
    with pytest.raises(ConfigError, match="does not exist"):
        load_session_config(path)


def test_config_invalid_keymap(tmp_path):
    (tmp_path / "0.keymap").write_text("[system]\nBEGIN=\n")
    path = tmp_path / "session.json"
    path.write_text(json.dumps({"keymaps": {"0": "0.keymap"}}))
    with pytest.raises(ConfigError, match="invalid"):
        load_session_config(path)


def test_config_requires_default_keymap(tmp_path, demo_main):
    (tmp_path / "1.keymap").write_text(serialize_keymap(demo_main))
    path = tmp_path / "session.json"
    path.write_text(json.dumps({"keymaps": {"1": "1.keymap"}}))
    with pytest.raises(ConfigError, match="index 0"):
        load_session_config(path)


def test_config_gap_frames_rearm(config_dir):
    from afeis.confirmer import GapFrames

    data = json.loads(config_dir.read_text())
    data["confirmer"]["rearm"] = {"gap_frames": 25}
    config_dir.write_text(json.dumps(data))
    config = load_session_config(config_dir)
    assert config.confirmer.rearm == GapFrames(25)


def test_config_optional_noise_profile(config_dir):
    data = json.loads(config_dir.read_text())
    data["noise"] = {"hold_frames": [18, 18], "misclassify_rate": 0.1}
    config_dir.write_text(json.dumps(data))
    config = load_session_config(config_dir)
    assert config.noise.hold_frames == (18, 18)
    assert config.noise.misclassify_rate == 0.1


def test_config_bad_rearm(tmp_path, config_dir):
    data = json.loads(config_dir.read_text())
    data["confirmer"]["rearm"] = "sometimes"
    config_dir.write_text(json.dumps(data))
    with pytest.raises(ConfigError, match="rearm"):
        load_session_config(config_dir)


# --- the pipeline ----------------------------------------------------------------


def test_session_runs_worked_example(config_dir):
    session = make_session(config_dir)
    for gesture in WORKED_SEQUENCE:
        session.feed_gesture(gesture)
    assert session.clean
    assert len(session.effect_log) == 2
    view = session.robot.state_snapshot()
    assert view.depth == 3.0
    assert len(view.snapshots) == 3
    record = json.loads(session.effect_log[0])
    assert record["kind"] == "defined_function"
    assert record["body"] == ["DOWN 1", "SNAPSHOT"]


def test_session_executes_on_effect(config_dir):
    session = make_session(config_dir)
    reports = [session.feed_gesture(g) for g in [10, 1, 10, 0, 2, 11]]
    # BEGIN 1 DO FORWARD 2 END
    last = reports[-1]
    assert last.result.effect == Executed((ConcreteCommand("FORWARD", (2.0,)),))
    assert len(last.trajectory) == 1
    assert last.robot.x == pytest.approx(2.0)


def test_session_frames_feed_confirmer(config_dir):
    session = make_session(config_dir)
    accepted = []
    ts = 0
    for gesture in (10, 1, 10, 0, 2, 11):  # BEGIN 1 DO FORWARD 2 END
        for _ in range(12):
            report = session.push_frame(ts, gesture)
            if report.accepted:
                accepted.append(report.accepted.gesture)
            ts += 50
        ts += 1500  # idle gap so the window drains between bursts
    assert accepted == [10, 1, 10, 0, 2, 11]
    assert session.robot.state_snapshot().x == pytest.approx(2.0)


def test_session_reset(config_dir):
    session = make_session(config_dir)
    for gesture in WORKED_SEQUENCE:
        session.feed_gesture(gesture)
    session.registry.activate(1)
    session.reset()
    assert session.effect_log == []
    assert session.interpreter.env.functions == {}
    assert session.registry.active_index == 0
    assert session.robot.state_snapshot().depth == 0.0


def test_session_delivery_failure_reported(config_dir):
    session = make_session(config_dir)
    # keymap 1 binds UP at fn 0; feed BEGIN 1 DO UP END (UP missing its arg)
    session.registry.activate(1)
    reports = [session.feed_gesture(g) for g in (10, 1, 10, 0, 11)]
    assert reports[-1].delivery_error is not None
    assert not session.clean


def test_effect_line_is_canonical():
    effect = VariableSet(2, -1.5)
    assert effect_line(effect) == '{"kind":"variable_set","slot":2,"value":-1.5}'


def test_records_for_console(config_dir):
    session = make_session(config_dir)
    keymap = session.keymap_record()
    assert keymap["index"] == 0
    assert len(keymap["tiles"]) == 50
    begin_tile = keymap["tiles"][10]
    assert begin_tile["system"] == "BEGIN"
    dual = keymap["tiles"][1]
    assert dual["fn"] == "LEFT" and dual["param"] == "1"
    for gesture in WORKED_SEQUENCE:
        session.feed_gesture(gesture)
    env = session.env_record()
    assert env["functions"]["1"] == ["DOWN 1", "SNAPSHOT"]
    robot = session.robot_record()
    assert robot["depth"] == 3.0
    assert len(robot["snapshots"]) == 3
    window = session.window_record()
    assert window["threshold"] == 8
