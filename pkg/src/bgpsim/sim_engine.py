"""Deterministic discrete-event simulation: scheduling, failure injection,
data-plane probing, and metrics.

Time is integer ticks.  Events are processed in (time, phase, seq) order
with a monotone sequence number, so identical inputs always replay
identically.  Within a tick, link flips happen first, then control
messages, then probes: a probe at tick t observes the state after every
control action of tick t.  Messages crossing a link when it fails are
voided and counted.  Probes are side-effect-free walks of the current
forwarding state.
"""

from __future__ import annotations

import collections
import heapq
import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .bgp_core import BgpNode, Drop, FollowPath, Next, PathLabel
from .config import ScenarioError, SimConfig
from .miro import MiroMsg, MiroNode
from .rbgp import RbgpNode
from .topology import AsGraph, link_key
from .yamr import YamrHidingNode, YamrNode

PROTOCOLS = ("bgp", "rbgp", "miro", "yamr", "yamr_hiding")

_NODE_TYPES: dict[str, Callable] = {
    "bgp": BgpNode,
    "rbgp": RbgpNode,
    "miro": MiroNode,
    "yamr": YamrNode,
    "yamr_hiding": YamrHidingNode,
}

_PHASE_LINK = 0
_PHASE_MSG = 1
_PHASE_PROBE = 2


# ---------------------------------------------------------------------------
# events


@dataclass(frozen=True)
class LinkDown:
    a: int
    b: int


@dataclass(frozen=True)
class LinkUp:
    a: int
    b: int


@dataclass(frozen=True)
class Probe:
    src: int
    dst: int
    label: Optional[PathLabel] = None
    tclass: Optional[str] = None


@dataclass(frozen=True)
class MiroIssue:
    requester: int
    responder: int
    dest: int
    avoid_as: frozenset[int] = frozenset()
    avoid_links: frozenset[tuple[int, int]] = frozenset()
    budget: Optional[int] = None
    accept: object = "first"
    tclass: Optional[str] = None


@dataclass(frozen=True)
class Deliver:
    msg: object


ScenarioEvent = LinkDown | LinkUp | Probe | MiroIssue


@dataclass
class _Entry:
    time: int
    phase: int
    seq: int
    event: object
    voided: bool = False

    def key(self):
        return (self.time, self.phase, self.seq)


@dataclass(frozen=True)
class ProbeRecord:
    time: int
    src: int
    dst: int
    label: Optional[PathLabel]
    tclass: Optional[str]
    outcome: str  # "delivered" | "no_route" | "loop"
    path: Optional[tuple[int, ...]]
    dropped_at: Optional[int]


# ---------------------------------------------------------------------------
# simulation


class Simulation:
    """One protocol instance over one graph; owns all per-AS state."""

    def __init__(self, graph: AsGraph, protocol: str, config: Optional[SimConfig] = None):
        if protocol not in _NODE_TYPES:
            raise ScenarioError(f"unknown protocol {protocol!r}")
        self.graph = graph
        self.protocol = protocol
        self.config = config or SimConfig()
        self.nodes = {as_id: _NODE_TYPES[protocol](as_id, graph, self.config)
                      for as_id in sorted(graph.nodes)}
        self._heap: list[tuple[tuple[int, int, int], _Entry]] = []
        self._seq = 0
        self.now = 0
        self.sent_by_kind: collections.Counter = collections.Counter()
        self.voided_messages = 0
        self.undeliverable_messages = 0
        self.skipped_events = 0
        self.events_processed = 0
        self.last_control_time = 0
        self.converged = True
        self.failures: list[tuple[int, tuple[int, int]]] = []
        self.probe_records: list[ProbeRecord] = []
        self.delivered_trace: list[tuple[int, object]] = []
        self.originated: list[int] = []
        self._fifo_check: dict[tuple[int, int], int] = {}

    # -- scheduling ------------------------------------------------------

    def schedule(self, time: int, event: ScenarioEvent) -> None:
        if time < 0:
            raise ScenarioError("event times must be non-negative")
        phase = _PHASE_LINK if isinstance(event, (LinkDown, LinkUp)) else (
            _PHASE_PROBE if isinstance(event, Probe) else _PHASE_MSG)
        self._push(time, phase, event)

    def _push(self, time: int, phase: int, event: object) -> None:
        entry = _Entry(time=time, phase=phase, seq=self._seq, event=event)
        self._seq += 1
        heapq.heappush(self._heap, (entry.key(), entry))

    def _send_all(self, msgs: Iterable, now: int) -> None:
        for msg in msgs:
            if not self.graph.has_link(msg.sender, msg.receiver) \
                    or not self.graph.link_up(msg.sender, msg.receiver):
                self.undeliverable_messages += 1
                continue
            self.sent_by_kind[msg.kind] += 1
            self._push(now + self.config.delay(msg.sender, msg.receiver),
                       _PHASE_MSG, Deliver(msg))

    # -- running -----------------------------------------------------------

    def originate(self, dest: int) -> None:
        if dest not in self.nodes:
            raise ScenarioError(f"cannot originate unknown AS {dest}")
        if dest not in self.originated:
            self.originated.append(dest)
        node = self.nodes[dest]
        node.now = 0
        self._send_all(node.originate(dest), now=0)

    def run(self, events: Iterable[tuple[int, ScenarioEvent]] = (),
            originate: Iterable[int] = ()) -> "MetricsReport":
        for dest in sorted(originate):
            self.originate(dest)
        for time, ev in events:
            self.schedule(time, ev)
        self._drain()
        return self.report()

    def _drain(self) -> None:
        while self._heap:
            _, entry = heapq.heappop(self._heap)
            if entry.voided:
                continue
            self.events_processed += 1
            if self.events_processed > self.config.quiesce_limit:
                self.converged = False
                break
            self.now = entry.time
            self._dispatch(entry.event)

    def _dispatch(self, ev: object) -> None:
        if isinstance(ev, Deliver):
            msg = ev.msg
            expected = self._fifo_check.get((msg.sender, msg.receiver), -1)
            assert self.now >= expected, "per-channel FIFO violated"
            self._fifo_check[(msg.sender, msg.receiver)] = self.now
            node = self.nodes[msg.receiver]
            node.now = self.now
            self.delivered_trace.append((self.now, msg))
            self._send_all(node.process_message(msg), self.now)
            self.last_control_time = self.now
        elif isinstance(ev, LinkDown):
            self._link_down(ev.a, ev.b)
        elif isinstance(ev, LinkUp):
            self._link_up(ev.a, ev.b)
        elif isinstance(ev, Probe):
            self.probe_records.append(self.probe(ev.src, ev.dst, ev.label, ev.tclass))
        elif isinstance(ev, MiroIssue):
            self._miro_issue(ev)
        else:  # pragma: no cover - defensive
            raise ScenarioError(f"unknown event {ev!r}")

    def _link_down(self, a: int, b: int) -> None:
        if not self.graph.has_link(a, b):
            raise ScenarioError(f"no link {a}-{b} to fail")
        if not self.graph.link_up(a, b):
            return  # already down
        self.graph.set_link_state(a, b, False)
        self.failures.append((self.now, link_key(a, b)))
        endpoints = {a, b}
        for _, entry in self._heap:
            if (not entry.voided and isinstance(entry.event, Deliver)
                    and {entry.event.msg.sender, entry.event.msg.receiver} == endpoints):
                entry.voided = True
                self.voided_messages += 1
        for end, other in ((min(a, b), max(a, b)), (max(a, b), min(a, b))):
            node = self.nodes[end]
            node.now = self.now
            self._send_all(node.on_link_down(other), self.now)
        self.last_control_time = self.now

    def _link_up(self, a: int, b: int) -> None:
        if not self.graph.has_link(a, b):
            raise ScenarioError(f"no link {a}-{b} to restore")
        if self.graph.link_up(a, b):
            return
        self.graph.set_link_state(a, b, True)
        for end, other in ((min(a, b), max(a, b)), (max(a, b), min(a, b))):
            node = self.nodes[end]
            node.now = self.now
            self._send_all(node.on_link_up(other), self.now)
        self.last_control_time = self.now

    def _miro_issue(self, ev: MiroIssue) -> None:
        node = self.nodes.get(ev.requester)
        if node is None:
            raise ScenarioError(f"unknown requester {ev.requester}")
        if not isinstance(node, MiroNode):
            self.skipped_events += 1
            return
        node.now = self.now
        self._send_all(node.issue_request(
            dest=ev.dest, responder=ev.responder, avoid_as=ev.avoid_as,
            avoid_links=ev.avoid_links, budget=ev.budget, accept=ev.accept,
            tclass=ev.tclass), self.now)
        self.last_control_time = self.now

    # -- data plane -----------------------------------------------------------

    def probe(self, src: int, dst: int, label: Optional[PathLabel] = None,
              tclass: Optional[str] = None) -> ProbeRecord:
        """Walk the forwarding state as it stands right now; no side effects."""
        if src not in self.nodes or dst not in self.nodes:
            raise ScenarioError(f"probe endpoints {src}->{dst} not in topology")
        limit = 2 * len(self.graph.nodes)
        path = [src]
        visited = {src}
        cur = src
        cur_label = label
        hops = 0

        def record(outcome: str, dropped_at: Optional[int] = None) -> ProbeRecord:
            return ProbeRecord(time=self.now, src=src, dst=dst, label=label,
                               tclass=tclass, outcome=outcome,
                               path=tuple(path) if outcome == "delivered" else None,
                               dropped_at=dropped_at)

        while hops <= limit:
            if cur == dst:
                return record("delivered")
            decision = self.nodes[cur].forward_decision(dst, cur_label, tclass)
            if isinstance(decision, Drop):
                return record("no_route", dropped_at=cur)
            if isinstance(decision, Next):
                nxt = decision.hop
                if not self.graph.has_link(cur, nxt) or not self.graph.link_up(cur, nxt):
                    return record("no_route", dropped_at=cur)
                if nxt in visited and nxt != dst:
                    return record("loop", dropped_at=nxt)
                path.append(nxt)
                visited.add(nxt)
                cur = nxt
                cur_label = decision.label
                hops += 1
                continue
            # encapsulated segment: follow the recorded hops to their end
            prev = cur
            for nxt in decision.hops:
                if not self.graph.has_link(prev, nxt) or not self.graph.link_up(prev, nxt):
                    return record("no_route", dropped_at=prev)
                path.append(nxt)
                prev = nxt
                hops += 1
                if hops > limit:
                    return record("loop", dropped_at=prev)
            cur = prev
            visited.add(cur)
        return record("loop", dropped_at=cur)

    # -- reporting ---------------------------------------------------------------

    def report(self) -> "MetricsReport":
        probe_counts = collections.Counter(r.outcome for r in self.probe_records)
        stats: collections.Counter = collections.Counter()
        for as_id in sorted(self.nodes):
            stats.update(self.nodes[as_id].stats)
        rib_in_sizes = [self.nodes[n].rib_in_size() for n in sorted(self.nodes)]
        lame_peak = max((getattr(self.nodes[n], "lame_peak", 0) for n in self.nodes),
                        default=0)
        return MetricsReport(
            protocol=self.protocol,
            converged=self.converged,
            quiescence_time=self.last_control_time,
            events_processed=self.events_processed,
            messages={k: self.sent_by_kind.get(k, 0)
                      for k in ("announce", "withdraw", "miro_request", "miro_response")},
            messages_total=sum(self.sent_by_kind.values()),
            voided_messages=self.voided_messages,
            undeliverable_messages=self.undeliverable_messages,
            skipped_events=self.skipped_events,
            poisoned_drops=stats.get("poisoned_drops", 0),
            probes={
                "total": len(self.probe_records),
                "delivered": probe_counts.get("delivered", 0),
                "dropped_no_route": probe_counts.get("no_route", 0),
                "dropped_loop": probe_counts.get("loop", 0),
            },
            disconnectivity=self._disconnectivity(),
            rib={
                "rib_in_total": sum(rib_in_sizes),
                "rib_in_max": max(rib_in_sizes, default=0),
                "local_rib_total": sum(self.nodes[n].local_rib_size()
                                       for n in sorted(self.nodes)),
            },
            extras={
                "rci_discards": stats.get("rci_discards", 0),
                "failover_switches": stats.get("failover_switches", 0),
                "stale_engagements": stats.get("stale_engagements", 0),
                "hidden_failures": stats.get("hidden_failures", 0),
                "deflection_switches": stats.get("deflection_switches", 0),
                "lame_peak": lame_peak,
                "tunnels_established": stats.get("tunnels_established", 0),
                "tunnels_torn_down": stats.get("tunnels_torn_down", 0),
                "tunnel_refusals": stats.get("tunnel_refusals", 0),
            },
            final_routes=self._final_routes(),
        )

    def _disconnectivity(self) -> list[dict]:
        by_pair: dict[tuple[int, int], list[ProbeRecord]] = collections.defaultdict(list)
        for rec in self.probe_records:
            by_pair[(rec.src, rec.dst)].append(rec)
        out = []
        for ftime, flink in self.failures:
            for (src, dst) in sorted(by_pair):
                recs = [r for r in by_pair[(src, dst)] if r.time >= ftime]
                if not recs:
                    continue
                restored = next((r.time for r in recs if r.outcome == "delivered"), None)
                dropped = sum(1 for r in recs
                              if r.outcome != "delivered"
                              and (restored is None or r.time < restored))
                out.append({
                    "src": src, "dst": dst,
                    "failure_time": ftime,
                    "failed_link": list(flink),
                    "dropped_probes": dropped,
                    "restored_time": restored,
                })
        return out

    def _final_routes(self) -> dict:
        routes: dict[str, dict[str, dict[str, list[int]]]] = {}
        for dest in sorted(self.originated):
            per_as: dict[str, dict[str, list[int]]] = {}
            for as_id in sorted(self.nodes):
                node = self.nodes[as_id]
                labels = {}
                for (d, lab), route in sorted(node.local_rib.items(),
                                              key=lambda kv: (kv[0][0], _label_str(kv[0][1]))):
                    if d == dest:
                        labels[_label_str(lab)] = list(route.as_path)
                if labels:
                    per_as[str(as_id)] = labels
            routes[str(dest)] = per_as
        return routes


def _label_str(label: Optional[PathLabel]) -> str:
    return "d" if label is None or label.is_default else str(label)


# ---------------------------------------------------------------------------
# metrics report


@dataclass
class MetricsReport:
    protocol: str
    converged: bool
    quiescence_time: int
    events_processed: int
    messages: dict
    messages_total: int
    voided_messages: int
    undeliverable_messages: int
    skipped_events: int
    poisoned_drops: int
    probes: dict
    disconnectivity: list
    rib: dict
    extras: dict
    final_routes: dict

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "converged": self.converged,
            "quiescence_time": self.quiescence_time,
            "events_processed": self.events_processed,
            "messages": dict(sorted(self.messages.items())),
            "messages_total": self.messages_total,
            "voided_messages": self.voided_messages,
            "undeliverable_messages": self.undeliverable_messages,
            "skipped_events": self.skipped_events,
            "poisoned_drops": self.poisoned_drops,
            "probes": dict(sorted(self.probes.items())),
            "disconnectivity": self.disconnectivity,
            "rib": dict(sorted(self.rib.items())),
            "extras": dict(sorted(self.extras.items())),
            "final_routes": self.final_routes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def scalar_items(self) -> list[tuple[str, object]]:
        """Flattened (metric, value) pairs; used for CSV and comparisons."""
        out: list[tuple[str, object]] = []
        data = self.to_dict()
        for key in sorted(data):
            value = data[key]
            if key in ("final_routes",):
                continue
            if key == "disconnectivity":
                for entry in value:
                    tag = f"disconnectivity.{entry['src']}->{entry['dst']}@{entry['failure_time']}"
                    out.append((f"{tag}.dropped_probes", entry["dropped_probes"]))
                    restored = entry["restored_time"]
                    out.append((f"{tag}.restored_time",
                                "" if restored is None else restored))
                continue
            if isinstance(value, dict):
                for sub in sorted(value):
                    out.append((f"{key}.{sub}", value[sub]))
            else:
                out.append((key, value))
        return out

    def to_csv(self) -> str:
        lines = ["metric,value"]
        for key, value in self.scalar_items():
            lines.append(f"{key},{value}")
        return "\n".join(lines) + "\n"


def simulate(graph: AsGraph, protocol: str,
             events: Iterable[tuple[int, ScenarioEvent]] = (),
             originate: Iterable[int] = (),
             config: Optional[SimConfig] = None) -> Simulation:
    """Run a scenario to quiescence and return the finished instance."""
    sim = Simulation(graph, protocol, config)
    sim.run(events=events, originate=originate)
    return sim


def run(graph: AsGraph, protocol: str,
        events: Iterable[tuple[int, ScenarioEvent]] = (),
        originate: Iterable[int] = (),
        config: Optional[SimConfig] = None) -> MetricsReport:
    """Like :func:`simulate` but returns only the metrics report."""
    return simulate(graph, protocol, events, originate, config).report()
