"""Brute-force reference model for the stable routing outcome.

Independent of the event-driven simulator: no messages, no RIBs, no
timing.  All simple paths to the destination are enumerated, the
valley-free ones form each AS's candidate universe, and a fixed point of
the preference/export rules is computed over that universe by sweeping
until nothing changes.  On provider-acyclic topologies the fixed point is
unique, which is what makes this usable as an oracle.
"""

from __future__ import annotations

import itertools
from typing import Optional

from bgpsim.policy import export_allowed, import_rank, valley_free
from bgpsim.topology import AsGraph


def all_valley_free_paths(g: AsGraph, src: int, dest: int) -> list[tuple[int, ...]]:
    """Every simple path src -> dest that respects the no-valley shape."""
    out = []

    def dfs(node: int, path: tuple[int, ...]):
        if node == dest:
            if valley_free(path, g):
                out.append(path)
            return
        for nxt in g.neighbors(node):
            if nxt in path or not g.link_up(node, nxt):
                continue
            dfs(nxt, path + (nxt,))

    dfs(src, (src,))
    return sorted(out)


def _choice_key(g: AsGraph, me: int, path: tuple[int, ...]) -> tuple:
    rank = import_rank(g.rel_from_perspective(me, path[1]))
    return (rank, len(path), path[1], path)


def stable_selection(g: AsGraph, dest: int,
                     max_sweeps: Optional[int] = None) -> dict[int, Optional[tuple[int, ...]]]:
    """The unique stable per-AS selected path for one destination.

    A path (me, n, ...) is available iff n currently selects its tail and
    n's export policy allows giving it to me; each AS picks the best
    available path under (rank, length, next hop id).
    """
    selection: dict[int, Optional[tuple[int, ...]]] = {n: None for n in g.nodes}
    selection[dest] = (dest,)
    limit = max_sweeps if max_sweeps is not None else 4 * len(g.nodes) + 8
    for _ in range(limit):
        changed = False
        nxt: dict[int, Optional[tuple[int, ...]]] = {}
        for me in sorted(g.nodes):
            if me == dest:
                nxt[me] = (dest,)
                continue
            best = None
            for n in g.neighbors(me):
                if not g.link_up(me, n):
                    continue
                tail = selection[n]
                if tail is None or me in tail:
                    continue
                learned = (None if len(tail) == 1
                           else g.rel_from_perspective(n, tail[1]))
                if not export_allowed(learned, g.rel_from_perspective(n, me)):
                    continue
                path = (me,) + tail
                key = _choice_key(g, me, path)
                if best is None or key < best[0]:
                    best = (key, path)
            nxt[me] = None if best is None else best[1]
        if nxt != selection:
            selection = nxt
            changed = True
        if not changed:
            return selection
    raise RuntimeError("no stable solution within the sweep limit")


def stable_selection_enumerated(g: AsGraph, dest: int) -> dict[int, Optional[tuple[int, ...]]]:
    """Same fixed point, but restricted to pre-enumerated valley-free paths.

    Exponential; only meant for small graphs as a cross-check of
    :func:`stable_selection`.
    """
    universe = {n: all_valley_free_paths(g, n, dest) for n in g.nodes}
    selection: dict[int, Optional[tuple[int, ...]]] = {n: None for n in g.nodes}
    selection[dest] = (dest,)
    for _ in range(4 * len(g.nodes) + 8):
        nxt: dict[int, Optional[tuple[int, ...]]] = {}
        for me in sorted(g.nodes):
            if me == dest:
                nxt[me] = (dest,)
                continue
            best = None
            for path in universe[me]:
                n = path[1]
                if not g.link_up(me, n) or selection[n] != path[1:]:
                    continue
                learned = (None if len(path) == 2
                           else g.rel_from_perspective(n, path[2]))
                if not export_allowed(learned, g.rel_from_perspective(n, me)):
                    continue
                key = _choice_key(g, me, path)
                if best is None or key < best[0]:
                    best = (key, path)
            nxt[me] = None if best is None else best[1]
        if nxt == selection:
            return selection
        selection = nxt
    raise RuntimeError("no stable solution within the sweep limit")


def quiescent_paths(sim, dest: int) -> dict[int, Optional[tuple[int, ...]]]:
    """Selected default paths per AS from a finished simulation."""
    out = {}
    for as_id, node in sim.nodes.items():
        sel = node.selected(dest)
        out[as_id] = None if sel is None else sel.as_path
    return out
