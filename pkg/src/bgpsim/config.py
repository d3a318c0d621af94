"""Run-time knobs shared by the simulator and the per-AS protocol nodes."""

from __future__ import annotations

from dataclasses import dataclass, field

from .topology import link_key


class ScenarioError(ValueError):
    """A scenario references something the run cannot satisfy."""


class NonConvergence(RuntimeError):
    """The event queue did not drain within the configured limit."""


@dataclass
class SimConfig:
    """Per-run configuration.  Everything here is deterministic input."""

    default_delay: int = 1
    link_delays: dict[tuple[int, int], int] = field(default_factory=dict)
    quiesce_limit: int = 100_000
    # R-BGP
    rci_enabled: bool = True
    # MIRO
    tunnel_id_start: int = 1
    offer_limit: int = 2
    default_budget: int = 1
    miro_disabled: frozenset[int] = frozenset()
    price_tags: dict[int, str] = field(default_factory=dict)

    def delay(self, a: int, b: int) -> int:
        return self.link_delays.get(link_key(a, b), self.default_delay)

    def price_tag(self, as_id: int) -> str:
        return self.price_tags.get(as_id, f"as{as_id}")
