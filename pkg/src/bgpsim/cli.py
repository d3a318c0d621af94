"""Scenario runner and protocol comparison harness.

A scenario is a single strict JSON document (see README for the schema):
unknown fields are rejected so typos in experiment scripts surface
immediately.  Exit codes: 0 ok, 2 validation error, 3 non-convergence,
4 I/O error.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import click

from . import fixtures, gen
from .bgp_core import PathLabel
from .config import ScenarioError, SimConfig
from .sim_engine import (
    PROTOCOLS,
    LinkDown,
    LinkUp,
    MetricsReport,
    MiroIssue,
    Probe,
    ScenarioEvent,
    Simulation,
)
from .topology import AsGraph, TopologyError, load_topology, serialize_topology

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NON_CONVERGENCE = 3
EXIT_IO = 4


@dataclass
class Scenario:
    name: str
    topology: Optional[str]
    protocols: list[str]
    originate: list[int]
    events: list[tuple[int, ScenarioEvent]]
    config: SimConfig
    version: int = 1
    quiesce_limit: int = 100_000


# ---------------------------------------------------------------------------
# scenario parsing


def _require_keys(obj: dict, allowed: set[str], where: str, strict: bool) -> None:
    unknown = set(obj) - allowed
    if unknown and strict:
        raise ScenarioError(f"{where}: unknown field(s) {', '.join(sorted(unknown))}")


def _as_id(value, where: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise ScenarioError(f"{where}: expected an AS id (integer >= 1), got {value!r}")
    return value


def _parse_link(value, where: str) -> tuple[int, int]:
    if (not isinstance(value, list)) or len(value) != 2:
        raise ScenarioError(f"{where}: expected [a, b]")
    return (_as_id(value[0], where), _as_id(value[1], where))


def _parse_event(raw: dict, idx: int, strict: bool) -> tuple[int, ScenarioEvent]:
    where = f"events[{idx}]"
    if not isinstance(raw, dict):
        raise ScenarioError(f"{where}: expected an object")
    kind = raw.get("kind")
    time = raw.get("time")
    if not isinstance(time, int) or time < 0:
        raise ScenarioError(f"{where}: bad or missing time")
    if kind in ("link_down", "link_up"):
        _require_keys(raw, {"kind", "time", "a", "b"}, where, strict)
        a, b = _as_id(raw.get("a"), where), _as_id(raw.get("b"), where)
        return time, (LinkDown(a, b) if kind == "link_down" else LinkUp(a, b))
    if kind == "probe":
        _require_keys(raw, {"kind", "time", "src", "dst", "label", "traffic_class"},
                      where, strict)
        label = raw.get("label")
        return time, Probe(src=_as_id(raw.get("src"), where),
                           dst=_as_id(raw.get("dst"), where),
                           label=None if label is None else PathLabel.avoiding(
                               *_parse_link(label, where)),
                           tclass=raw.get("traffic_class"))
    if kind == "miro_request":
        _require_keys(raw, {"kind", "time", "requester", "responder", "dest",
                            "avoid_ases", "avoid_links", "budget", "accept",
                            "traffic_class"}, where, strict)
        avoid_as = frozenset(_as_id(v, where) for v in raw.get("avoid_ases", []))
        avoid_links = frozenset(_parse_link(v, where) for v in raw.get("avoid_links", []))
        accept = raw.get("accept", "first")
        if not (accept in ("first", "none") or isinstance(accept, int)):
            raise ScenarioError(f"{where}: accept must be 'first', 'none', or an index")
        return time, MiroIssue(requester=_as_id(raw.get("requester"), where),
                               responder=_as_id(raw.get("responder"), where),
                               dest=_as_id(raw.get("dest"), where),
                               avoid_as=avoid_as, avoid_links=avoid_links,
                               budget=raw.get("budget"), accept=accept,
                               tclass=raw.get("traffic_class"))
    raise ScenarioError(f"{where}: unknown event kind {kind!r}")


def _parse_probe_block(raw: dict, strict: bool) -> list[tuple[int, ScenarioEvent]]:
    _require_keys(raw, {"pairs", "start", "end", "every", "label", "traffic_class"},
                  "probes", strict)
    pairs = raw.get("pairs")
    if not isinstance(pairs, list) or not pairs:
        raise ScenarioError("probes: need a non-empty pairs list")
    start = raw.get("start", 0)
    end = raw.get("end")
    every = raw.get("every", 1)
    if not isinstance(start, int) or not isinstance(end, int) or start < 0 or end < start:
        raise ScenarioError("probes: need integer start <= end")
    if not isinstance(every, int) or every < 1:
        raise ScenarioError("probes: every must be a positive integer")
    label = raw.get("label")
    parsed_label = None if label is None else PathLabel.avoiding(*_parse_link(label, "probes"))
    out = []
    for t in range(start, end + 1, every):
        for pair in pairs:
            src, dst = _parse_link(pair, "probes.pairs")
            out.append((t, Probe(src=src, dst=dst, label=parsed_label,
                                 tclass=raw.get("traffic_class"))))
    return out


def _parse_config(raw: dict, strict: bool) -> SimConfig:
    _require_keys(raw, {"default_delay", "link_delays", "rci_enabled",
                        "tunnel_id_start", "offer_limit", "default_budget",
                        "miro_disabled", "price_tags"}, "config", strict)
    cfg = SimConfig()
    if "default_delay" in raw:
        cfg.default_delay = int(raw["default_delay"])
    for idx, entry in enumerate(raw.get("link_delays", [])):
        _require_keys(entry, {"a", "b", "delay"}, f"config.link_delays[{idx}]", strict)
        key = (_as_id(entry["a"], "link_delays"), _as_id(entry["b"], "link_delays"))
        cfg.link_delays[(min(key), max(key))] = int(entry["delay"])
    if "rci_enabled" in raw:
        cfg.rci_enabled = bool(raw["rci_enabled"])
    if "tunnel_id_start" in raw:
        cfg.tunnel_id_start = int(raw["tunnel_id_start"])
    if "offer_limit" in raw:
        cfg.offer_limit = int(raw["offer_limit"])
    if "default_budget" in raw:
        cfg.default_budget = int(raw["default_budget"])
    cfg.miro_disabled = frozenset(_as_id(v, "config.miro_disabled")
                                  for v in raw.get("miro_disabled", []))
    cfg.price_tags = {int(k): str(v) for k, v in raw.get("price_tags", {}).items()}
    return cfg


def parse_scenario(doc: dict, strict: bool = True) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object")
    _require_keys(doc, {"version", "name", "topology", "protocols", "originate",
                        "events", "probes", "quiesce_limit", "config"},
                  "scenario", strict)
    version = doc.get("version")
    if version != 1:
        raise ScenarioError(f"unsupported scenario version {version!r}")
    protocols = doc.get("protocols", ["bgp"])
    if not isinstance(protocols, list) or not protocols:
        raise ScenarioError("protocols must be a non-empty list")
    for p in protocols:
        if p not in PROTOCOLS:
            raise ScenarioError(f"unknown protocol {p!r}; have {', '.join(PROTOCOLS)}")
    originate = doc.get("originate", [])
    if not isinstance(originate, list):
        raise ScenarioError("originate must be a list of AS ids")
    originate = [_as_id(v, "originate") for v in originate]
    events = [_parse_event(raw, i, strict)
              for i, raw in enumerate(doc.get("events", []))]
    if "probes" in doc:
        events.extend(_parse_probe_block(doc["probes"], strict))
    config = _parse_config(doc.get("config", {}), strict)
    quiesce_limit = doc.get("quiesce_limit", 100_000)
    if not isinstance(quiesce_limit, int) or quiesce_limit < 1:
        raise ScenarioError("quiesce_limit must be a positive integer")
    config.quiesce_limit = quiesce_limit
    return Scenario(name=str(doc.get("name", "scenario")),
                    topology=doc.get("topology"),
                    protocols=list(protocols), originate=originate,
                    events=events, config=config, quiesce_limit=quiesce_limit)


def validate_scenario(scenario: Scenario, graph: AsGraph) -> None:
    def check(as_id: int, where: str) -> None:
        if as_id not in graph.nodes:
            raise ScenarioError(f"{where}: AS {as_id} is not in the topology")

    for dest in scenario.originate:
        check(dest, "originate")
    for _, ev in scenario.events:
        if isinstance(ev, (LinkDown, LinkUp)):
            check(ev.a, "event")
            check(ev.b, "event")
            if not graph.has_link(ev.a, ev.b):
                raise ScenarioError(f"event references missing link {ev.a}-{ev.b}")
        elif isinstance(ev, Probe):
            check(ev.src, "probe")
            check(ev.dst, "probe")
        elif isinstance(ev, MiroIssue):
            check(ev.requester, "miro_request")
            check(ev.responder, "miro_request")
            check(ev.dest, "miro_request")
            if ev.dest in ev.avoid_as:
                raise ScenarioError("miro_request: destination cannot be avoided")
            if ev.requester == ev.responder:
                raise ScenarioError("miro_request: requester equals responder")


# ---------------------------------------------------------------------------
# running


def resolve_topology(spec: str) -> AsGraph:
    if spec.startswith("fixture:"):
        try:
            return fixtures.load_fixture(spec.split(":", 1)[1])
        except KeyError as exc:
            raise ScenarioError(str(exc)) from None
    path = Path(spec)
    if not path.exists():
        raise FileNotFoundError(f"topology file not found: {spec}")
    return load_topology(path.read_text())


def run_scenario(scenario: Scenario, graph: AsGraph, protocol: str) -> Simulation:
    sim = Simulation(graph.copy(), protocol, scenario.config)
    validate_scenario(scenario, graph)
    sim.run(events=scenario.events, originate=scenario.originate)
    return sim


def compare(reports: list[MetricsReport]) -> dict:
    """Aligned metric table across protocol runs."""
    if len(reports) < 2:
        raise ScenarioError("comparison needs at least two protocols")
    table: dict[str, dict[str, object]] = {}
    for report in reports:
        for key, value in report.scalar_items():
            if key == "protocol":
                continue
            table.setdefault(key, {})[report.protocol] = value
    return {
        "protocols": [r.protocol for r in reports],
        "metrics": {k: table[k] for k in sorted(table)},
    }


def compare_to_csv(comparison: dict) -> str:
    protocols = comparison["protocols"]
    lines = ["metric," + ",".join(protocols)]
    for metric in sorted(comparison["metrics"]):
        row = comparison["metrics"][metric]
        lines.append(metric + "," + ",".join(str(row.get(p, "")) for p in protocols))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# command line


@click.command(name="bgpsim")
@click.option("--topology", "topology_spec", default=None,
              help="Topology file path or fixture:NAME (overrides the scenario).")
@click.option("--scenario", "scenario_path", default=None,
              help="Scenario JSON file path or fixture scenario name.")
@click.option("--protocol", "protocols", multiple=True,
              help="Protocol to run (repeatable; overrides the scenario list).")
@click.option("--out", "out_dir", default=None, help="Directory for report files.")
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json")
@click.option("--quiesce-limit", type=int, default=None,
              help="Abort after this many processed events.")
@click.option("--strict/--no-strict", default=True,
              help="Reject unknown scenario fields (default on).")
@click.option("--gen", "gen_spec", nargs=2, type=int, default=None,
              metavar="N SEED", help="Generate a random topology and exit.")
def main(topology_spec, scenario_path, protocols, out_dir, fmt, quiesce_limit,
         strict, gen_spec):
    """Run routing scenarios and emit per-protocol metric reports."""
    try:
        if gen_spec is not None:
            text = serialize_topology(gen.generate(gen_spec[0], gen_spec[1]))
            if out_dir:
                path = Path(out_dir)
                path.mkdir(parents=True, exist_ok=True)
                (path / f"gen_{gen_spec[0]}_{gen_spec[1]}.rel").write_text(text)
            else:
                click.echo(text, nl=False)
            sys.exit(EXIT_OK)
        if scenario_path is None:
            raise ScenarioError("--scenario is required (or use --gen)")
        sys.exit(_run_cli(topology_spec, scenario_path, protocols, out_dir, fmt,
                          quiesce_limit, strict))
    except ScenarioError as exc:
        click.echo(f"validation error: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    except TopologyError as exc:
        click.echo(f"topology error: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    except (FileNotFoundError, OSError, json.JSONDecodeError) as exc:
        click.echo(f"i/o error: {exc}", err=True)
        sys.exit(EXIT_IO)


def _run_cli(topology_spec, scenario_path, protocols, out_dir, fmt,
             quiesce_limit, strict) -> int:
    path = Path(scenario_path)
    if not path.exists():
        try:
            path = fixtures.scenario_path(scenario_path)
        except KeyError:
            raise FileNotFoundError(f"scenario file not found: {scenario_path}")
    scenario = parse_scenario(json.loads(path.read_text()), strict=strict)
    if protocols:
        for p in protocols:
            if p not in PROTOCOLS:
                raise ScenarioError(f"unknown protocol {p!r}")
        scenario.protocols = list(protocols)
    if quiesce_limit is not None:
        scenario.config.quiesce_limit = quiesce_limit
    spec = topology_spec or scenario.topology
    if spec is None:
        raise ScenarioError("no topology given (flag or scenario field)")
    graph = resolve_topology(spec)

    reports = []
    for protocol in scenario.protocols:
        sim = run_scenario(scenario, graph, protocol)
        reports.append(sim.report())

    outputs: dict[str, str] = {}
    for report in reports:
        body = report.to_json() if fmt == "json" else report.to_csv()
        outputs[f"report_{report.protocol}.{fmt}"] = body
    if len(reports) >= 2:
        comparison = compare(reports)
        if fmt == "json":
            outputs[f"compare.{fmt}"] = json.dumps(comparison, sort_keys=True, indent=2) + "\n"
        else:
            outputs[f"compare.{fmt}"] = compare_to_csv(comparison)

    if out_dir:
        directory = Path(out_dir)
        directory.mkdir(parents=True, exist_ok=True)
        for fname in sorted(outputs):
            (directory / fname).write_text(outputs[fname])
    else:
        for fname in sorted(outputs):
            click.echo(f"# {fname}")
            click.echo(outputs[fname], nl=False)

    if any(not r.converged for r in reports):
        click.echo("non-convergence: event queue did not drain", err=True)
        return EXIT_NON_CONVERGENCE
    return EXIT_OK


if __name__ == "__main__":
    main()
