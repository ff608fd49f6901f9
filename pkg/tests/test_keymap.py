from random import Random

import pytest

from afeis.errors import GestureRangeError, KeymapError, UnknownKeymapError
from afeis.keymap import (
    Keymap,
    Position,
    Token,
    TokenKind,
    load_keymap_dir,
    parse_keymap,
    parse_keymap_report,
    serialize_keymap,
)
from conftest import A, B, C, D, E


def test_parse_demo_main(demo_main):
    assert demo_main.system["BEGIN"] == (A,)
    assert demo_main.system["END"] == (B,)
    assert demo_main.system["CALL"] == (C,)
    assert demo_main.system["CMD_SEP"] == (D,)
    assert demo_main.system["PARAM_SEP"] == (E,)
    assert demo_main.system["DO"] == ()
    assert demo_main.fn == {0: "FORWARD", 1: "LEFT", 2: "RIGHT"}
    assert demo_main.param == {0: "0", 1: "1", 2: "2", 3: "3"}
    assert demo_main.aliases["A"] == A


def test_missing_mandatory_symbol_rejected():
    text = "[system]\nBEGIN=\nEND=1\nCALL=2\nCMD_SEP=3\nPARAM_SEP=4\n"
    with pytest.raises(KeymapError) as excinfo:
        parse_keymap(text, 0)
    assert any("BEGIN" in error for error in excinfo.value.errors)


def test_dual_fn_param_binding_is_valid():
    text = (
        "[system]\nBEGIN=10\nEND=11\nCALL=12\nCMD_SEP=13\nPARAM_SEP=14\n"
        "[fn]\n7=UP\n[param]\n7=4\n"
    )
    keymap = parse_keymap(text, 0)
    assert keymap.fn[7] == "UP"
    assert keymap.param[7] == "4"
    assert keymap.resolve(7, Position.FN) == Token.fn("UP")
    assert keymap.resolve(7, Position.PARAM) == Token.digit(4)


def test_system_gesture_cannot_hold_other_bindings():
    text = (
        "[system]\nBEGIN=10\nEND=11\nCALL=12\nCMD_SEP=13\nPARAM_SEP=14\n"
        "[fn]\n10=UP\n"
    )
    with pytest.raises(KeymapError) as excinfo:
        parse_keymap(text, 0)
    assert any("system symbol" in error for error in excinfo.value.errors)


def test_gesture_in_two_system_symbols_rejected():
    text = "[system]\nBEGIN=10\nEND=10\nCALL=12\nCMD_SEP=13\nPARAM_SEP=14\n"
    with pytest.raises(KeymapError) as excinfo:
        parse_keymap(text, 0)
    assert any("both" in error for error in excinfo.value.errors)


def test_non_integer_gesture_index_rejected():
    text = (
        "[system]\nBEGIN=10\nEND=11\nCALL=12\nCMD_SEP=13\nPARAM_SEP=14\n"
        "[fn]\nfoo=UP\n"
    )
    with pytest.raises(KeymapError) as excinfo:
        parse_keymap(text, 0)
    assert any("not a gesture index" in error for error in excinfo.value.errors)


def test_out_of_range_gesture_rejected():
    text = "[system]\nBEGIN=50\nEND=11\nCALL=12\nCMD_SEP=13\nPARAM_SEP=14\n"
    with pytest.raises(KeymapError):
        parse_keymap(text, 0)


def test_malformed_line_reported_with_line_number():
    text = "[system]\nBEGIN=10\nEND=11\nCALL=12\nCMD_SEP=13\nPARAM_SEP=14\nbogus line\n"
    _, errors, _ = parse_keymap_report(text, 0)
    assert any("line 7" in error for error in errors)


def test_duplicate_key_warns_and_last_wins():
    text = (
        "[system]\nBEGIN=10\nEND=11\nCALL=12\nCMD_SEP=13\nPARAM_SEP=14\n"
        "[fn]\n5=UP\n5=DOWN\n"
    )
    keymap, errors, warnings = parse_keymap_report(text, 0)
    assert not errors
    assert keymap.fn[5] == "DOWN"
    assert any("duplicate" in warning for warning in warnings)


def test_comments_and_multi_gesture_bindings():
    text = (
        "[system]\n"
        "BEGIN=10,15 ; two gestures mean BEGIN\n"
        "END=11\nCALL=12\nCMD_SEP=13\nPARAM_SEP=14\n"
    )
    keymap = parse_keymap(text, 0)
    assert keymap.system["BEGIN"] == (10, 15)
    assert keymap.resolve(15, Position.PARAM).kind is TokenKind.BEGIN


def test_minimal_five_slot_keymap_validates():
    # The smallest usable layout: five system gestures, digits doubling as
    # command words on the same gestures.
    text = (
        "[system]\nBEGIN=10\nEND=11\nCALL=12\nCMD_SEP=13\nPARAM_SEP=14\n"
        "[fn]\n0=FORWARD\n1=STOP\n"
        "[param]\n0=0\n1=1\n"
    )
    keymap = parse_keymap(text, 0)
    assert len(keymap.system_gestures()) == 5


# --- resolve ------------------------------------------------------------------


def test_resolve_system_precedence_everywhere(demo_main):
    for position in Position:
        assert demo_main.resolve(A, position).kind is TokenKind.BEGIN


def test_resolve_position_dependence(demo_main):
    assert demo_main.resolve(1, Position.FN) == Token.fn("LEFT")
    assert demo_main.resolve(1, Position.PARAM) == Token.digit(1)


def test_resolve_unbound_gesture_is_empty(demo_main):
    assert demo_main.resolve(49, Position.FN).kind is TokenKind.EMPTY
    assert demo_main.resolve(49, Position.PARAM).kind is TokenKind.EMPTY
    assert demo_main.resolve(49, Position.SYSTEM_FIRST).kind is TokenKind.EMPTY


def test_resolve_system_first_sees_only_system(demo_main):
    # Gesture 1 has fn and param meanings but no system binding.
    assert demo_main.resolve(1, Position.SYSTEM_FIRST).kind is TokenKind.EMPTY


def test_resolve_param_specialization():
    text = (
        "[system]\nBEGIN=10\nEND=11\nCALL=12\nCMD_SEP=13\nPARAM_SEP=14\n"
        "[param]\n0=-\n1=.\n2=HOME\n3=7\n"
    )
    keymap = parse_keymap(text, 0)
    assert keymap.resolve(0, Position.PARAM).kind is TokenKind.NEG_SIGN
    assert keymap.resolve(1, Position.PARAM).kind is TokenKind.DECIMAL_POINT
    assert keymap.resolve(2, Position.PARAM) == Token.param("HOME")
    assert keymap.resolve(3, Position.PARAM) == Token.digit(7)


def test_resolve_rejects_out_of_range(demo_main):
    with pytest.raises(GestureRangeError):
        demo_main.resolve(50, Position.FN)
    with pytest.raises(GestureRangeError):
        demo_main.resolve(-1, Position.PARAM)


def test_resolve_deterministic(demo_registry):
    for gesture in range(50):
        for position in Position:
            first = demo_registry.resolve(gesture, position)
            assert demo_registry.resolve(gesture, position) == first


# --- registry -----------------------------------------------------------------


def test_activate_switches_resolution(demo_registry):
    assert demo_registry.resolve(1, Position.FN) == Token.fn("LEFT")
    demo_registry.activate(1)
    assert demo_registry.active_index == 1
    assert demo_registry.resolve(1, Position.FN) == Token.fn("DOWN")


def test_activate_unknown_index_fails(demo_registry):
    with pytest.raises(UnknownKeymapError):
        demo_registry.activate(5)
    assert demo_registry.active_index == 0


def test_register_replaces_existing(demo_registry, demo_dive):
    replacement = Keymap(
        1, demo_dive.system, {1: "ASCEND"}, demo_dive.param, demo_dive.aliases
    )
    demo_registry.register(1, replacement)
    demo_registry.activate(1)
    assert demo_registry.resolve(1, Position.FN) == Token.fn("ASCEND")


def test_registry_clone_is_independent(demo_registry):
    clone = demo_registry.clone()
    clone.activate(1)
    assert demo_registry.active_index == 0
    assert clone.active_index == 1


# --- round trip -----------------------------------------------------------------


def _random_keymap(rng: Random, index: int) -> Keymap:
    gestures = list(range(50))
    rng.shuffle(gestures)
    it = iter(gestures)
    system = {symbol: (next(it),) for symbol in ("BEGIN", "END", "CALL", "CMD_SEP", "PARAM_SEP")}
    system["DO"] = (next(it),) if rng.random() < 0.5 else ()
    system["DEF"] = ()
    system["SET"] = ()
    remaining = list(it)
    fn = {g: f"FN{g}" for g in rng.sample(remaining, rng.randint(0, len(remaining)))}
    param = {
        g: rng.choice([str(rng.randint(0, 9)), "-", ".", f"sym{g}"])
        for g in rng.sample(remaining, rng.randint(0, len(remaining)))
    }
    aliases = {"A": system["BEGIN"][0]} if rng.random() < 0.5 else {}
    return Keymap(index, system, fn, param, aliases)


def test_serialize_parse_round_trip(demo_main, demo_dive):
    for keymap in (demo_main, demo_dive):
        assert parse_keymap(serialize_keymap(keymap), keymap.index) == keymap


def test_serialize_parse_round_trip_random():
    rng = Random(2024)
    for i in range(50):
        keymap = _random_keymap(rng, i)
        assert parse_keymap(serialize_keymap(keymap), i) == keymap


def test_load_keymap_dir(tmp_path, demo_main, demo_dive):
    (tmp_path / "0.keymap").write_text(serialize_keymap(demo_main))
    (tmp_path / "1.keymap").write_text(serialize_keymap(demo_dive))
    (tmp_path / "notes.txt").write_text("not a keymap")
    loaded = load_keymap_dir(tmp_path)
    assert set(loaded) == {0, 1}
    assert loaded[0] == demo_main
    assert loaded[1] == demo_dive
