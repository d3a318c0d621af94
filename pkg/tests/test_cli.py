import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from bgpsim import fixtures
from bgpsim.cli import (
    EXIT_IO,
    EXIT_NON_CONVERGENCE,
    EXIT_VALIDATION,
    compare,
    compare_to_csv,
    main,
    parse_scenario,
    run_scenario,
)
from bgpsim.config import ScenarioError
from bgpsim.topology import RelKind, load_topology


def _run(args):
    return CliRunner().invoke(main, args)


def test_fig3_scenario_reports_drops_under_bgp(tmp_path):
    result = _run(["--scenario", str(fixtures.scenario_path("fig3")),
                   "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    report = json.loads((tmp_path / "report_bgp.json").read_text())
    assert report["probes"]["dropped_no_route"] > 0
    rbgp = json.loads((tmp_path / "report_rbgp.json").read_text())
    assert rbgp["probes"]["dropped_no_route"] == 0
    compare_doc = json.loads((tmp_path / "compare.json").read_text())
    assert compare_doc["protocols"] == ["bgp", "rbgp"]
    row = compare_doc["metrics"]["probes.dropped_no_route"]
    assert row["rbgp"] <= row["bgp"]


def test_scenario_names_resolve_to_bundled_fixtures(tmp_path):
    result = _run(["--scenario", "fig6", "--out", str(tmp_path), "--format", "csv"])
    assert result.exit_code == 0, result.output
    hiding = (tmp_path / "report_yamr_hiding.csv").read_text()
    plain = (tmp_path / "report_yamr.csv").read_text()
    val = lambda text, key: [l.split(",")[1] for l in text.splitlines()
                             if l.startswith(key + ",")][0]
    assert int(val(hiding, "messages_total")) <= int(val(plain, "messages_total"))
    assert (tmp_path / "compare.csv").exists()


def test_empty_event_list_reports_origination_only(tmp_path):
    scenario = {
        "version": 1,
        "topology": "fixture:fig3",
        "protocols": ["bgp"],
        "originate": [1],
        "events": [],
    }
    path = tmp_path / "s.json"
    path.write_text(json.dumps(scenario))
    result = _run(["--scenario", str(path), "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    report = json.loads((tmp_path / "report_bgp.json").read_text())
    assert report["messages_total"] > 0
    assert report["probes"]["total"] == 0
    assert report["converged"] is True


def test_protocol_flag_overrides_scenario(tmp_path):
    result = _run(["--scenario", str(fixtures.scenario_path("fig3")),
                   "--protocol", "bgp", "--out", str(tmp_path)])
    assert result.exit_code == 0
    assert (tmp_path / "report_bgp.json").exists()
    assert not (tmp_path / "report_rbgp.json").exists()
    assert not (tmp_path / "compare.json").exists()


def test_unknown_protocol_is_a_validation_error():
    result = _run(["--scenario", str(fixtures.scenario_path("fig3")),
                   "--protocol", "ospf"])
    assert result.exit_code == EXIT_VALIDATION


def test_missing_topology_file_is_an_io_error(tmp_path):
    scenario = {"version": 1, "topology": "nowhere.rel", "protocols": ["bgp"],
                "originate": [1], "events": []}
    path = tmp_path / "s.json"
    path.write_text(json.dumps(scenario))
    assert _run(["--scenario", str(path)]).exit_code == EXIT_IO


def test_malformed_scenario_json_is_an_io_error(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert _run(["--scenario", str(path)]).exit_code == EXIT_IO


def test_unknown_field_rejected_in_strict_mode(tmp_path):
    scenario = {"version": 1, "topology": "fixture:fig3", "protocols": ["bgp"],
                "originate": [1], "events": [], "typo_field": 1}
    path = tmp_path / "s.json"
    path.write_text(json.dumps(scenario))
    assert _run(["--scenario", str(path)]).exit_code == EXIT_VALIDATION
    assert _run(["--scenario", str(path), "--no-strict", "--out",
                 str(tmp_path)]).exit_code == 0


def test_event_referencing_unknown_as_is_rejected(tmp_path):
    scenario = {"version": 1, "topology": "fixture:fig3", "protocols": ["bgp"],
                "originate": [1],
                "events": [{"time": 5, "kind": "link_down", "a": 1, "b": 99}]}
    path = tmp_path / "s.json"
    path.write_text(json.dumps(scenario))
    assert _run(["--scenario", str(path)]).exit_code == EXIT_VALIDATION


def test_quiesce_limit_gives_non_convergence_exit(tmp_path):
    result = _run(["--scenario", str(fixtures.scenario_path("fig3")),
                   "--quiesce-limit", "2", "--out", str(tmp_path)])
    assert result.exit_code == EXIT_NON_CONVERGENCE


def test_compare_requires_two_protocols():
    scenario = parse_scenario(json.loads(fixtures.scenario_path("fig3").read_text()))
    graph = fixtures.load_fixture("fig3")
    report = run_scenario(scenario, graph, "bgp").report()
    with pytest.raises(ScenarioError):
        compare([report])
    both = [run_scenario(scenario, graph, p).report() for p in ("bgp", "rbgp")]
    table = compare(both)
    csv = compare_to_csv(table)
    assert csv.splitlines()[0] == "metric,bgp,rbgp"


def test_gen_is_deterministic_and_gr_consistent():
    one = _run(["--gen", "10", "42"])
    two = _run(["--gen", "10", "42"])
    assert one.exit_code == 0 and one.output == two.output
    g = load_topology(one.output)
    assert len(g.nodes) == 10
    # provider edges must all cross tiers consistently: no provider cycles
    edges = [(l.a, l.b) for l in g.links() if l.rel is RelKind.PROVIDER_TO_CUSTOMER]
    assert edges

    def reaches(start, goal, seen=()):
        return any(b == goal or (b not in seen and reaches(b, goal, seen + (b,)))
                   for a, b in edges if a == start)

    assert not any(reaches(x, x) for x in g.nodes)


def test_cli_output_is_deterministic(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    for out in (out1, out2):
        result = _run(["--scenario", str(fixtures.scenario_path("fig4")),
                       "--out", str(out)])
        assert result.exit_code == 0
    for name in ("report_rbgp.json",):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_stdout_mode_prints_reports():
    result = _run(["--scenario", str(fixtures.scenario_path("fig5"))])
    assert result.exit_code == 0
    assert "# report_yamr.json" in result.output
    assert '"protocol": "yamr"' in result.output
