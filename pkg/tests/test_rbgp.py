import itertools

import pytest

from bgpsim import fixtures
from bgpsim.bgp_core import Announce, Route, Withdraw
from bgpsim.config import SimConfig
from bgpsim.gen import generate
from bgpsim.rbgp import select_failover, suffix_overlap
from bgpsim.sim_engine import LinkDown, Simulation

from tests.helpers import run_fixture, single_failure_scenario, tick_probes


def _route(path, rank=0):
    return Route(dest=path[-1], as_path=tuple(path),
                 learned_from=path[1] if len(path) > 1 else None, rank=rank)


def test_suffix_overlap_counts_shared_tail():
    assert suffix_overlap((1, 2, 9), (3, 4, 9)) == 1
    assert suffix_overlap((1, 2, 9), (3, 2, 9)) == 2
    assert suffix_overlap((1, 9), (1, 9)) == 2


def test_select_failover_minimizes_shared_suffix():
    primary = _route((1, 7, 9))
    short_overlap = _route((1, 3, 9), rank=2)       # shares only the destination
    long_overlap = _route((1, 4, 7, 9), rank=0)     # shares (7, 9)
    chosen = select_failover(primary, [long_overlap, short_overlap])
    assert chosen is short_overlap
    # brute force over all orderings agrees
    for perm in itertools.permutations([long_overlap, short_overlap]):
        assert select_failover(primary, list(perm)) is short_overlap


def test_select_failover_empty_candidates():
    assert select_failover(_route((1, 2, 9)), []) is None


def test_select_failover_tie_breaks_like_decide():
    primary = _route((1, 7, 9))
    a = _route((1, 3, 9), rank=2)
    b = _route((1, 2, 9), rank=2)   # same overlap/rank/len; lower next hop
    assert select_failover(primary, [a, b]) is b


def _failover_announces(sim):
    return [(t, m.sender, m.receiver, m.route.as_path)
            for t, m in sim.delivered_trace
            if isinstance(m, Announce) and m.route.failover]


def test_fig4_failover_advertised_to_primary_next_hop_only():
    n = fixtures.names("fig4")
    sim = run_fixture("fig4", "rbgp", events=[], originate=[n["MIT"]])
    fo = _failover_announces(sim)
    att_fo = {(s, r, p) for _, s, r, p in fo if s == n["ATT"]}
    assert att_fo == {(n["ATT"], n["Hari"], (n["ATT"], n["Sprint"], n["MIT"]))}
    # nothing failover-flagged ever reaches Peter
    assert not [x for x in fo if x[2] == n["Peter"]]


def test_fig4_david_forwards_the_most_disjoint_path_toward_hari():
    n = fixtures.names("fig4")
    sim = run_fixture("fig4", "rbgp", events=[], originate=[n["MIT"]])
    david_fo = [(r, p) for _, s, r, p in _failover_announces(sim) if s == n["David"]]
    assert david_fo[-1] == (n["Hari"], (n["David"], n["ATT"], n["Hari"], n["MIT"]))


def test_no_failover_candidate_means_no_advertisement():
    # a two-AS stub has no alternates to advertise
    g = fixtures.load_fixture("fig3")
    n = fixtures.names("fig3")
    sim = Simulation(g, "rbgp")
    sim.run(events=[], originate=[n["MIT"]])
    sprint_fo = [x for x in _failover_announces(sim) if x[1] == n["Sprint"]]
    assert sprint_fo == []


def test_fig4_failover_keeps_all_three_sources_connected():
    n = fixtures.names("fig4")
    pairs = [(n["Hari"], n["MIT"]), (n["ATT"], n["MIT"]), (n["Peter"], n["MIT"])]
    events = [(20, LinkDown(n["Hari"], n["MIT"]))] + tick_probes(pairs, 20, 45)
    sim = run_fixture("fig4", "rbgp", events=events, originate=[n["MIT"]])
    post = [r for r in sim.probe_records if r.time >= 20]
    assert post and all(r.outcome == "delivered" for r in post)
    assert sim.report().extras["failover_switches"] >= 1


def test_failover_unused_when_regular_alternative_exists():
    n = fixtures.names("fig3")
    # losing the AT&T-Hari link leaves AT&T with regular candidates
    events = [(20, LinkDown(n["ATT"], n["Hari"]))]
    sim = run_fixture("fig3", "rbgp", events=events, originate=[n["MIT"]])
    att = sim.nodes[n["ATT"]]
    assert att.selected(n["MIT"]).as_path == (n["ATT"], n["Sprint"], n["MIT"])
    assert att.fo_active == {}
    hari = sim.nodes[n["Hari"]]
    assert hari.selected(n["MIT"]).as_path == (n["Hari"], n["MIT"])
    assert hari.fo_active == {}


def test_without_failover_or_alternative_behaves_like_baseline():
    n = fixtures.names("fig3_loop")
    pairs = [(n["Hari"], n["MIT"])]
    events = [(20, LinkDown(n["Hari"], n["MIT"]))] + tick_probes(pairs, 20, 30)
    sim = run_fixture("fig3_loop", "rbgp", events=events, originate=[n["MIT"]])
    post = [r.outcome for r in sim.probe_records if r.time >= 20]
    assert set(post) == {"no_route"}


def test_rci_filter_discards_paths_through_the_failed_link():
    n = fixtures.names("fig3")
    events = [(20, LinkDown(n["Hari"], n["MIT"]))]
    sim = run_fixture("fig3", "rbgp", events=events, originate=[n["MIT"]])
    att = sim.nodes[n["ATT"]]
    assert att.selected(n["MIT"]).as_path == (n["ATT"], n["Sprint"], n["MIT"])
    assert att.rci  # learned the root cause
    assert sim.report().extras["rci_discards"] >= 1
    # a path through the dead link never makes it into the candidate set
    stale = Route(dest=n["MIT"], as_path=(n["ATT"], n["Peter"], n["Hari"], n["MIT"]),
                  learned_from=n["Peter"], rank=2)
    att.rib_in[(n["MIT"], n["Peter"], None)] = stale
    assert stale not in att.regular_candidates(n["MIT"])


def test_empty_rci_leaves_candidates_untouched():
    n = fixtures.names("fig3")
    sim = run_fixture("fig3", "rbgp", events=[], originate=[n["MIT"]])
    att = sim.nodes[n["ATT"]]
    assert att.rci == {}
    assert len(att.regular_candidates(n["MIT"])) == 3


def test_fig3_rbgp_records_no_loops_while_disabled_rci_does():
    n = fixtures.names("fig3_loop")
    pairs = [(n["ATT"], n["MIT"]), (n["Peter"], n["MIT"])]
    events = [(20, LinkDown(n["Hari"], n["MIT"]))] + tick_probes(pairs, 20, 32)

    with_rci = run_fixture("fig3_loop", "rbgp", events=list(events),
                           originate=[n["MIT"]])
    assert all(r.outcome != "loop" for r in with_rci.probe_records)

    without = run_fixture("fig3_loop", "rbgp", events=list(events),
                          originate=[n["MIT"]], config=SimConfig(rci_enabled=False))
    assert any(r.outcome == "loop" for r in without.probe_records)


def test_received_failover_only_forwards_when_no_regular_route():
    n = fixtures.names("fig4")
    events = [(20, LinkDown(n["Hari"], n["MIT"]))]
    sim = run_fixture("fig4", "rbgp", events=events, originate=[n["MIT"]])
    hari = sim.nodes[n["Hari"]]
    # after reconvergence Hari holds a regular route again: failover disengaged
    assert hari.selected(n["MIT"]).as_path == (n["Hari"], n["ATT"], n["Sprint"], n["MIT"])
    assert hari.fo_active == {}


def test_at_most_one_outstanding_failover_per_destination():
    for seed in range(10):
        g = generate(4 + seed % 6, seed)
        dest = 1 + seed % (4 + seed % 6)
        links = [l.key() for l in g.links()]
        events = [(20, LinkDown(*links[seed % len(links)]))]
        sim = Simulation(g.copy(), "rbgp")
        sim.run(events=events, originate=[dest])
        # replay the trace, tracking outstanding (sender -> dest -> receiver);
        # a failing link evaporates the adverts that crossed it on both sides
        outstanding: dict[tuple[int, int], int] = {}
        timeline = [(t, "msg", m) for t, m in sim.delivered_trace]
        timeline += [(t, "fail", lnk) for t, lnk in sim.failures]
        for _, kind, item in sorted(timeline, key=lambda x: (x[0], x[1] == "msg")):
            if kind == "fail":
                for key in [k for k, rcv in outstanding.items()
                            if {k[0], rcv} == set(item)]:
                    del outstanding[key]
                continue
            m = item
            if isinstance(m, Announce) and m.route.failover:
                outstanding[(m.sender, m.route.dest)] = m.receiver
            elif isinstance(m, Withdraw) and m.failover:
                outstanding.pop((m.sender, m.dest), None)
        for (sender, d), receiver in outstanding.items():
            primary = sim.nodes[sender].selected(d)
            if primary is not None and len(primary.as_path) > 1:
                assert primary.next_hop == receiver


def test_failover_withdrawn_from_old_next_hop_on_primary_change():
    n = fixtures.names("fig3")
    events = [(20, LinkDown(n["ATT"], n["Hari"]))]
    sim = run_fixture("fig3", "rbgp", events=events, originate=[n["MIT"]])
    fo_withdraws = [(t, m.sender, m.receiver) for t, m in sim.delivered_trace
                    if isinstance(m, Withdraw) and m.failover]
    # Peter's primary moved off Hari onto AT&T... its old failover advert to
    # Hari must have been withdrawn
    assert any(s == n["Peter"] and r == n["Hari"] for _, s, r in fo_withdraws)
