import pytest

from bgpsim import fixtures
from bgpsim.gen import generate
from bgpsim.topology import (
    AsGraph,
    Rel,
    RelKind,
    TopologyError,
    link_key,
    load_topology,
    serialize_topology,
)


def test_parse_provider_customer_record():
    g = load_topology("1|2|-1")
    assert g.rel_from_perspective(1, 2) is Rel.CUSTOMER
    assert g.rel_from_perspective(2, 1) is Rel.PROVIDER
    assert g.link(1, 2).up


def test_conflicting_duplicate_is_rejected_with_line_number():
    with pytest.raises(TopologyError) as err:
        load_topology("1|2|-1\n1|2|0")
    assert "line 2" in str(err.value)
    # reversed provider direction is also a conflict
    with pytest.raises(TopologyError):
        load_topology("1|2|-1\n2|1|-1")


def test_exact_duplicate_record_is_tolerated():
    g = load_topology("1|2|-1\n1|2|-1")
    assert len(list(g.links())) == 1


def test_self_loop_rejected():
    with pytest.raises(TopologyError) as err:
        load_topology("3|3|0")
    assert "self-loop" in str(err.value)


@pytest.mark.parametrize("text", ["1|2", "a|2|-1", "1|2|7", "0|2|-1"])
def test_malformed_lines_report_position(text):
    with pytest.raises(TopologyError) as err:
        load_topology(f"# header\n{text}")
    assert "line 2" in str(err.value)


def test_comments_and_blank_lines_ignored():
    g = load_topology("# c\n\n1|2|0\n   \n# d\n2|3|2\n")
    assert g.rel_from_perspective(1, 2) is Rel.PEER
    assert g.rel_from_perspective(2, 3) is Rel.SIBLING
    assert g.rel_from_perspective(3, 2) is Rel.SIBLING


def test_rel_from_perspective_requires_link():
    g = load_topology("1|2|-1")
    with pytest.raises(TopologyError):
        g.rel_from_perspective(1, 3)


def test_set_link_state_idempotent_and_isolated():
    g = load_topology("1|2|-1\n2|3|0")
    before = serialize_topology(g)
    g.set_link_state(1, 2, False)
    assert not g.link_up(1, 2)
    g.set_link_state(1, 2, False)  # second time is a no-op
    assert not g.link_up(1, 2)
    assert g.link_up(2, 3)  # untouched
    g.set_link_state(1, 2, True)
    assert serialize_topology(g) == before
    with pytest.raises(TopologyError):
        g.set_link_state(1, 3, False)


@pytest.mark.parametrize("name", fixtures.FIXTURES)
def test_fixture_round_trip(name):
    g = fixtures.load_fixture(name)
    text = serialize_topology(g)
    again = load_topology(text)
    assert serialize_topology(again) == text
    assert again.nodes == g.nodes


@pytest.mark.parametrize("seed", range(12))
def test_random_graph_round_trip_and_duals(seed):
    g = generate(6 + seed % 4, seed, sibling_prob=0.1)
    assert serialize_topology(load_topology(serialize_topology(g))) == serialize_topology(g)
    dual = {Rel.CUSTOMER: Rel.PROVIDER, Rel.PROVIDER: Rel.CUSTOMER,
            Rel.PEER: Rel.PEER, Rel.SIBLING: Rel.SIBLING}
    for lnk in g.links():
        assert g.rel_from_perspective(lnk.b, lnk.a) is dual[g.rel_from_perspective(lnk.a, lnk.b)]


def test_generated_provider_hierarchy_is_acyclic():
    for seed in range(10):
        g = generate(10, seed)
        # follow provider->customer edges; a cycle would revisit a node
        edges = [(l.a, l.b) for l in g.links() if l.rel is RelKind.PROVIDER_TO_CUSTOMER]
        seen_order = {}
        remaining = {a for e in edges for a in e}
        out = {a: [] for a in remaining}
        indeg = {a: 0 for a in remaining}
        for a, b in edges:
            out[a].append(b)
            indeg[b] += 1
        frontier = sorted(a for a in remaining if indeg[a] == 0)
        visited = 0
        while frontier:
            node = frontier.pop()
            visited += 1
            for nxt in out[node]:
                indeg[nxt] -= 1
                if indeg[nxt] == 0:
                    frontier.append(nxt)
        assert visited == len(remaining)


def test_copy_is_independent():
    g = fixtures.load_fixture("fig3")
    h = g.copy()
    h.set_link_state(3, 1, False)
    assert g.link_up(3, 1)
    assert not h.link_up(3, 1)


def test_path_links_requires_adjacency():
    g = fixtures.load_fixture("fig3")
    assert g.path_links((5, 3, 1)) == [link_key(5, 3), link_key(3, 1)]
    with pytest.raises(TopologyError):
        g.path_links((5, 1))
