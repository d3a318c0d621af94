"""R-BGP variant: precomputed failover paths, root-cause-stamped withdrawals,
and stale forwarding while reconvergence is in flight.

Mechanics on top of the baseline:

* After each selection change an AS advertises one failover route, the
  candidate most disjoint from its primary by shortest shared path suffix,
  and only to the neighbor it currently routes through.
* Withdrawals (and the updates they trigger) carry the failed link as root
  cause information; candidates whose path crosses a known-failed link are
  discarded at decision time.
* A received failover is used for forwarding only while no regular route
  exists.  An AS that loses all candidates through a withdrawal keeps
  forwarding along the withdrawn path until it learns an alternative; the
  AS adjacent to the failure deflects that traffic onto its failover path.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Optional

from .bgp_core import (
    Announce,
    BgpNode,
    Drop,
    FollowPath,
    ForwardDecision,
    Next,
    Route,
    UpdateMsg,
    Withdraw,
    decide,
)
from .topology import link_key


def suffix_overlap(a: tuple[int, ...], b: tuple[int, ...]) -> int:
    """Number of trailing ASes two paths share; at least 1 for a common dest."""
    n = 0
    for x, y in zip(reversed(a), reversed(b)):
        if x != y:
            break
        n += 1
    return n


def select_failover(primary: Route, candidates: list[Route]) -> Optional[Route]:
    """Most disjoint candidate: minimal shared suffix with the primary,
    ties broken like the regular decision process."""
    best = None
    for r in candidates:
        key = (suffix_overlap(primary.as_path, r.as_path),
               r.rank, len(r.as_path), r.next_hop, r.as_path)
        if best is None or key < best[0]:
            best = (key, r)
    return None if best is None else best[1]


class RbgpNode(BgpNode):
    variant = "rbgp"

    def __init__(self, me, graph, config):
        super().__init__(me, graph, config)
        self.now = 0
        # (dest, neighbor) -> received failover route, holder form
        self.fo_rib_in: dict[tuple[int, int], Route] = {}
        # dest -> (neighbor advertised to, as_path sent)
        self.fo_out: dict[int, tuple[int, tuple[int, ...]]] = {}
        # failed link -> tick it was learned about
        self.rci: dict[tuple[int, int], int] = {}
        # data-plane fallbacks, engaged only while no regular route exists
        self.fo_active: dict[int, Route] = {}
        self.stale_fib: dict[int, Route] = {}
        self._cause: tuple[tuple[int, int], ...] = ()

    # -- root cause bookkeeping -----------------------------------------

    def _cause_rci(self) -> tuple[tuple[int, int], ...]:
        return self._cause if self.config.rci_enabled else ()

    def _learn_rci(self, links: tuple[tuple[int, int], ...]) -> None:
        for lnk in links:
            self.rci.setdefault(link_key(*lnk), self.now)

    def _repair_evidence(self, route: Route, stamped: tuple[tuple[int, int], ...]) -> None:
        # a fresh path crossing a supposedly dead link, without that link in
        # its own root-cause stamp, means the link is back
        stamped_keys = {link_key(*l) for l in stamped}
        for lnk in [l for l in self.rci if route.contains_link(l)]:
            if lnk not in stamped_keys:
                del self.rci[lnk]

    # -- message handling -------------------------------------------------

    def handle_announce(self, msg: Announce) -> list[UpdateMsg]:
        self._learn_rci(msg.route.rci)
        self._cause = tuple(link_key(*l) for l in msg.route.rci)
        try:
            if msg.route.failover:
                imported = self.import_route(msg.sender, msg.route)
                key = (msg.route.dest, msg.sender)
                if imported is None:
                    self.fo_rib_in.pop(key, None)
                else:
                    self.fo_rib_in[key] = imported
                self._refresh_dataplane(msg.route.dest)
                return []
            self._repair_evidence(msg.route, msg.route.rci)
            return super().handle_announce(msg)
        finally:
            self._cause = ()

    def handle_withdraw(self, msg: Withdraw) -> list[UpdateMsg]:
        self._learn_rci(msg.rci)
        self._cause = tuple(link_key(*l) for l in msg.rci)
        try:
            if msg.failover:
                if self.fo_rib_in.pop((msg.dest, msg.sender), None) is not None:
                    self._refresh_dataplane(msg.dest)
                return []
            key = (msg.dest, msg.sender, msg.label)
            if key in self.rib_in:
                del self.rib_in[key]
                return self.reselect(msg.dest, withdrawal=True)
            # no matching entry, but fresh root-cause news can still
            # invalidate what we currently use
            sel = self.selected(msg.dest)
            if (sel is not None and self.config.rci_enabled
                    and any(sel.contains_link(l) for l in self.rci)):
                return self.reselect(msg.dest, withdrawal=True)
            return []
        finally:
            self._cause = ()

    def on_link_down(self, neighbor: int) -> list[UpdateMsg]:
        lnk = link_key(self.me, neighbor)
        self.rci.setdefault(lnk, self.now)
        self._cause = (lnk,)
        try:
            return super().on_link_down(neighbor)
        finally:
            self._cause = ()

    def on_link_up(self, neighbor: int) -> list[UpdateMsg]:
        self.rci.pop(link_key(self.me, neighbor), None)
        return super().on_link_up(neighbor)

    # -- decision process ---------------------------------------------------

    def regular_candidates(self, dest: int) -> list[Route]:
        candidates = super().regular_candidates(dest)
        if not self.config.rci_enabled or not self.rci:
            return candidates
        kept = [r for r in candidates if not any(r.contains_link(l) for l in self.rci)]
        self.stats["rci_discards"] += len(candidates) - len(kept)
        return kept

    def reselect(self, dest: int, withdrawal: bool = False,
                 link_loss: bool = False) -> list[UpdateMsg]:
        out = super().reselect(dest, withdrawal=withdrawal, link_loss=link_loss)
        out.extend(self._maintain_failover(dest))
        return out

    def _adopt(self, dest: int, best: Optional[Route], withdrawal: bool = False,
               link_loss: bool = False) -> list[UpdateMsg]:
        old = self.local_rib.get((dest, None))
        out = super()._adopt(dest, best, withdrawal=withdrawal, link_loss=link_loss)
        if best is None and old is not None and withdrawal:
            # keep forwarding along the withdrawn path until something better
            # is learned; the next hop's own fallbacks carry the traffic
            self.stale_fib[dest] = old
            self.stats["stale_engagements"] += 1
        self._refresh_dataplane(dest)
        return out

    def _refresh_dataplane(self, dest: int) -> None:
        if self.selected(dest) is not None:
            self.fo_active.pop(dest, None)
            self.stale_fib.pop(dest, None)
            return
        fo = decide(self._usable_failovers(dest))
        prev = self.fo_active.get(dest)
        if fo is None:
            self.fo_active.pop(dest, None)
        elif prev is None or prev.as_path != fo.as_path:
            self.fo_active[dest] = fo
            self.stats["failover_switches"] += 1

    def _usable_failovers(self, dest: int) -> list[Route]:
        out = []
        for (d, n), r in sorted(self.fo_rib_in.items()):
            if d != dest or not self.graph.link_up(self.me, n):
                continue
            if self.config.rci_enabled and any(r.contains_link(l) for l in self.rci):
                continue
            out.append(r)
        return out

    # -- failover advertisement ---------------------------------------------

    def _maintain_failover(self, dest: int) -> list[UpdateMsg]:
        primary = self.selected(dest)
        target = None
        fo = None
        if primary is not None and len(primary.as_path) > 1 and primary.next_hop != dest:
            target = primary.next_hop
            candidates = [r for (d, n, lab), r in sorted(self.rib_in.items())
                          if d == dest and lab is None and n != primary.learned_from]
            if self.config.rci_enabled and self.rci:
                candidates = [r for r in candidates
                              if not any(r.contains_link(l) for l in self.rci)]
            fo = select_failover(primary, candidates)
        out: list[UpdateMsg] = []
        prev = self.fo_out.get(dest)
        want = None if fo is None or target is None else (target, fo.as_path)
        if prev == want:
            return out
        if prev is not None and (want is None or prev[0] != want[0]):
            old_target = prev[0]
            if self.graph.has_link(self.me, old_target) and self.graph.link_up(self.me, old_target):
                out.append(Withdraw(sender=self.me, receiver=old_target, dest=dest,
                                    failover=True, rci=self._cause_rci()))
        if want is None:
            self.fo_out.pop(dest, None)
        else:
            self.fo_out[dest] = want
            out.append(Announce(sender=self.me, receiver=target,
                                route=replace(fo, failover=True, rci=self._cause_rci())))
        return out

    def _purge_neighbor(self, neighbor: int) -> list[int]:
        affected = set(super()._purge_neighbor(neighbor))
        for key in [k for k in self.fo_rib_in if k[1] == neighbor]:
            affected.add(key[0])
            del self.fo_rib_in[key]
        for dest in [d for d, (t, _) in self.fo_out.items() if t == neighbor]:
            del self.fo_out[dest]
        for dest in [d for d, r in self.stale_fib.items() if r.next_hop == neighbor]:
            affected.add(dest)
            del self.stale_fib[dest]
        for dest in [d for d, r in self.fo_active.items() if not self.graph.link_up(self.me, r.next_hop)]:
            affected.add(dest)
            del self.fo_active[dest]
        return sorted(affected)

    # -- data plane -----------------------------------------------------------

    def forward_decision(self, dest: int, label=None, tclass=None) -> ForwardDecision:
        route = self.selected(dest)
        if route is not None:
            return Next(route.next_hop, label)
        fo = self.fo_active.get(dest)
        if fo is not None:
            # failover traffic follows the advertised path end to end,
            # regardless of what intermediate ASes currently select
            return FollowPath(fo.as_path[1:])
        stale = self.stale_fib.get(dest)
        if stale is not None:
            return Next(stale.next_hop, label)
        return Drop("no_route")
