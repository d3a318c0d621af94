"""Bundled demonstration topologies and scenarios.

Each ``.rel`` file uses the standard relationship format; the name maps
below give the mnemonic node names used in tests and docs.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from ..topology import AsGraph, load_topology

#: mnemonic -> AS id, per fixture
NAMES: dict[str, dict[str, int]] = {
    "fig1": {"A": 1, "B": 2, "C": 3, "D": 4, "E": 5, "F": 6},
    "fig3": {"MIT": 1, "Sprint": 2, "Hari": 3, "ATT": 4, "Peter": 5},
    "fig3_loop": {"MIT": 1, "Hari": 3, "ATT": 4, "Peter": 5},
    "fig4": {"MIT": 1, "Sprint": 2, "Hari": 3, "ATT": 4, "Peter": 5, "David": 6},
    "fig5": {"A": 1, "B": 2, "C": 3, "D": 4, "E": 5, "F": 6},
    "fig6": {"N": 1, "O": 2, "D": 3, "I": 4, "G": 5, "L": 6},
}

FIXTURES = tuple(sorted(NAMES))


def fixture_path(name: str) -> Path:
    if name not in NAMES:
        raise KeyError(f"unknown fixture {name!r}; have {', '.join(FIXTURES)}")
    return Path(str(resources.files(__package__) / f"{name}.rel"))


def scenario_path(name: str) -> Path:
    path = Path(str(resources.files(__package__) / "scenarios" / f"{name}.json"))
    if not path.exists():
        raise KeyError(f"unknown scenario fixture {name!r}")
    return path


def load_fixture(name: str) -> AsGraph:
    return load_topology(fixture_path(name).read_text())


def names(name: str) -> dict[str, int]:
    return dict(NAMES[name])
