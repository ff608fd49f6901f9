import pytest

from afeis.keymap import KeymapRegistry, parse_keymap
from afeis.stream_sim import DEMO_KEYMAP_DIVE, DEMO_KEYMAP_MAIN

# Gesture IDs used by the demo keymaps (aliases A..E).
A, B, C, D, E = 10, 11, 12, 13, 14


@pytest.fixture
def demo_main():
    return parse_keymap(DEMO_KEYMAP_MAIN, 0)


@pytest.fixture
def demo_dive():
    return parse_keymap(DEMO_KEYMAP_DIVE, 1)


@pytest.fixture
def demo_registry(demo_main, demo_dive):
    registry = KeymapRegistry(demo_main)
    registry.register(1, demo_dive)
    return registry


# The dual-keymap walkthrough: define a dive routine in slot 1 (switching to
# the dive keymap inside the body), then run it three times.
#   A 1 D | A 1 D | 1 1 D | 2 D | A 0 | B    (definition, 14 signals)
#   A 3 A | C 1 | B                          (call it 3 times, 6 signals)
WORKED_SEQUENCE = (A, 1, D, A, 1, D, 1, 1, D, 2, D, A, 0, B, A, 3, A, C, 1, B)
