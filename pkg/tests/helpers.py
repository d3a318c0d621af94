"""Shared scenario-building helpers for the test suite."""

from __future__ import annotations

from typing import Iterable, Optional

from bgpsim import fixtures
from bgpsim.config import SimConfig
from bgpsim.sim_engine import LinkDown, Probe, Simulation
from bgpsim.bgp_core import Announce, Withdraw


def tick_probes(pairs: Iterable[tuple[int, int]], start: int, end: int,
                label=None, tclass=None) -> list:
    events = []
    for t in range(start, end + 1):
        for src, dst in pairs:
            events.append((t, Probe(src, dst, label=label, tclass=tclass)))
    return events


def run_fixture(name: str, protocol: str, events=(), originate=(),
                config: Optional[SimConfig] = None) -> Simulation:
    graph = fixtures.load_fixture(name)
    sim = Simulation(graph, protocol, config)
    sim.run(events=list(events), originate=list(originate))
    return sim


def outcomes_by_src(sim: Simulation, dst: int) -> dict[int, list[tuple[int, str]]]:
    out: dict[int, list[tuple[int, str]]] = {}
    for rec in sim.probe_records:
        if rec.dst == dst:
            out.setdefault(rec.src, []).append((rec.time, rec.outcome))
    return out


def control_messages(sim: Simulation):
    """(time, msg) pairs for announce/withdraw deliveries."""
    return [(t, m) for t, m in sim.delivered_trace if isinstance(m, (Announce, Withdraw))]


def single_failure_scenario(graph, dest: int, fail_link: tuple[int, int],
                            fail_at: int = 20, horizon: int = 40) -> list:
    events = [(fail_at, LinkDown(*fail_link))]
    for t in range(fail_at, horizon + 1):
        for src in sorted(graph.nodes):
            if src != dest:
                events.append((t, Probe(src, dest)))
    return events
