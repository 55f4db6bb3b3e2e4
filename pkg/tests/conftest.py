import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from eegavatar.geometry import builtin_montage, generate_lattice


@pytest.fixture(scope="session")
def montage32():
    return builtin_montage("standard32")


@pytest.fixture(scope="session")
def montage20():
    return builtin_montage("standard20")


@pytest.fixture(scope="session")
def lattice402():
    return generate_lattice(402)


def write_scenario(path, events):
    with open(path, "w", encoding="utf-8") as fh:
        for e in events:
            fh.write(json.dumps(e) + "\n")
    return str(path)


#: the end-to-end fixture scenario used by the acceptance suite
FIXTURE_SCENARIO = [
    {"t": 2.0, "kind": "eyes_closed"},
    {"t": 4.0, "kind": "eyes_open"},
    {"t": 5.0, "kind": "move_left_hand", "duration": 2.0},
    {"t": 8.0, "kind": "move_right_hand", "duration": 2.0},
]
