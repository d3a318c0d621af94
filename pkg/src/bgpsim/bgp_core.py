"""Baseline path-vector protocol: routes, update messages, RIBs, decision
process.  Every multipath variant subclasses :class:`BgpNode`.

Conventions used throughout:

* A stored route's ``as_path`` starts at its holder and ends at the
  destination, e.g. ``(2, 5, 6)`` held by AS 2 for destination 6.
* Announcements carry the sender's own path; the receiver prepends its id
  and drops the route when its id already appears (loop suppression).
* A new announcement for the same (destination, neighbor, label) replaces
  the previous one, even when the new path is rejected as a loop: the
  neighbor evidently no longer has the old path.
* Output is deterministic: per destination, neighbors are served in
  ascending id order.
"""

from __future__ import annotations

import collections
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

from .config import SimConfig
from .policy import RANK_SELF, RANK_TO_REL, export_allowed, import_rank
from .topology import AsGraph, Rel, link_key


# ---------------------------------------------------------------------------
# labels (used by YAMR; plain routes carry label None)


@dataclass(frozen=True)
class PathLabel:
    """Forwarding-table label: the default path or the link a path avoids."""

    avoid: Optional[tuple[int, int]] = None

    def __lt__(self, other: "PathLabel") -> bool:
        return self.sort_key() < other.sort_key()

    @staticmethod
    def default() -> "PathLabel":
        return DEFAULT_LABEL

    @staticmethod
    def avoiding(a: int, b: int) -> "PathLabel":
        return PathLabel(link_key(a, b))

    @property
    def is_default(self) -> bool:
        return self.avoid is None

    def sort_key(self) -> tuple:
        return (0,) if self.avoid is None else (1, self.avoid)

    def __str__(self) -> str:
        if self.avoid is None:
            return "d"
        return f"avoid({self.avoid[0]}-{self.avoid[1]})"


DEFAULT_LABEL = PathLabel(None)


# ---------------------------------------------------------------------------
# routes and messages


@dataclass(frozen=True)
class Route:
    """A path to ``dest`` as held by ``as_path[0]``."""

    dest: int
    as_path: tuple[int, ...]
    learned_from: Optional[int]  # neighbor id, or None when originated here
    rank: int  # import rank frozen at learning time; RANK_SELF when local
    label: Optional[PathLabel] = None
    failover: bool = False
    rci: tuple[tuple[int, int], ...] = ()
    price_tag: Optional[str] = None

    def __post_init__(self):
        assert self.as_path, "empty AS path"
        assert self.as_path[-1] == self.dest, "path must end at the destination"
        assert len(set(self.as_path)) == len(self.as_path), "looping AS path"
        if len(self.as_path) > 1 and self.learned_from is not None:
            assert self.learned_from == self.as_path[1]

    @property
    def holder(self) -> int:
        return self.as_path[0]

    @property
    def next_hop(self) -> int:
        return self.as_path[1] if len(self.as_path) > 1 else self.as_path[0]

    @property
    def learned_rel(self) -> Optional[Rel]:
        return None if self.rank == RANK_SELF else RANK_TO_REL[self.rank]

    def contains_link(self, link: tuple[int, int]) -> bool:
        return link in {link_key(x, y) for x, y in zip(self.as_path, self.as_path[1:])}


def decide(candidates: Iterable[Route]) -> Optional[Route]:
    """Pick the best route: lowest (rank, path length, next hop id)."""
    best = None
    for r in candidates:
        key = (r.rank, len(r.as_path), r.next_hop, r.as_path)
        if best is None or key < best[0]:
            best = (key, r)
    return None if best is None else best[1]


@dataclass(frozen=True)
class Announce:
    sender: int
    receiver: int
    route: Route  # in the sender's holder form
    kind = "announce"


@dataclass(frozen=True)
class Withdraw:
    sender: int
    receiver: int
    dest: int
    label: Optional[PathLabel] = None
    rci: tuple[tuple[int, int], ...] = ()
    failover: bool = False
    kind = "withdraw"


UpdateMsg = Announce | Withdraw  # variants add their own message classes


# ---------------------------------------------------------------------------
# per-AS protocol state


class BgpNode:
    """Per-AS protocol state plus the baseline decision process.

    The node never talks to the network directly: every handler returns the
    messages to send, in order, and the event loop owns delivery.
    """

    variant = "bgp"

    def __init__(self, me: int, graph: AsGraph, config: SimConfig):
        self.me = me
        self.graph = graph
        self.config = config
        # (dest, neighbor, label) -> Route, holder form
        self.rib_in: dict[tuple[int, int, Optional[PathLabel]], Route] = {}
        # (dest, label) -> selected Route
        self.local_rib: dict[tuple[int, Optional[PathLabel]], Route] = {}
        # (neighbor, dest, label) -> as_path last advertised there
        self.rib_out: dict[tuple[int, int, Optional[PathLabel]], tuple[int, ...]] = {}
        self.stats: collections.Counter = collections.Counter()

    # -- small helpers --------------------------------------------------

    def neighbors_up(self) -> list[int]:
        return [n for n in self.graph.neighbors(self.me) if self.graph.link_up(self.me, n)]

    def rel_to(self, neighbor: int) -> Rel:
        return self.graph.rel_from_perspective(self.me, neighbor)

    def selected(self, dest: int) -> Optional[Route]:
        return self.local_rib.get((dest, self.default_label()))

    def default_label(self) -> Optional[PathLabel]:
        return None

    def import_route(self, sender: int, route: Route) -> Optional[Route]:
        """Prepend self and re-rank; None when the path would loop through us."""
        if self.me in route.as_path:
            self.stats["poisoned_drops"] += 1
            return None
        return Route(
            dest=route.dest,
            as_path=(self.me,) + route.as_path,
            learned_from=sender,
            rank=import_rank(self.rel_to(sender)),
            label=route.label,
            failover=route.failover,
        )

    # -- lifecycle -------------------------------------------------------

    def originate(self, dest: int) -> list[UpdateMsg]:
        """Install the local route for our own identifier and advertise it."""
        assert dest == self.me, "an AS only originates itself"
        route = Route(dest=dest, as_path=(self.me,), learned_from=None, rank=RANK_SELF,
                      label=self.default_label())
        key = (dest, self.default_label())
        if self.local_rib.get(key) == route:
            return []  # re-origination is a no-op
        self.local_rib[key] = route
        return self._export_diff(dest)

    def process_message(self, msg: UpdateMsg) -> list[UpdateMsg]:
        if isinstance(msg, Announce):
            return self.handle_announce(msg)
        if isinstance(msg, Withdraw):
            return self.handle_withdraw(msg)
        self.stats["unhandled_messages"] += 1
        return []

    def handle_announce(self, msg: Announce) -> list[UpdateMsg]:
        route = msg.route
        key = (route.dest, msg.sender, route.label)
        self.rib_in.pop(key, None)  # implicit withdraw of the previous path
        imported = self.import_route(msg.sender, route)
        if imported is not None:
            self.rib_in[key] = imported
        return self.reselect(route.dest)

    def handle_withdraw(self, msg: Withdraw) -> list[UpdateMsg]:
        key = (msg.dest, msg.sender, msg.label)
        if key not in self.rib_in:
            return []
        del self.rib_in[key]
        return self.reselect(msg.dest, withdrawal=True)

    def on_link_down(self, neighbor: int) -> list[UpdateMsg]:
        """Session loss: every path via that neighbor is gone, silently."""
        affected = self._purge_neighbor(neighbor)
        out: list[UpdateMsg] = []
        for dest in affected:
            out.extend(self.reselect(dest, link_loss=True))
        return out

    def on_link_up(self, neighbor: int) -> list[UpdateMsg]:
        """Session (re-)establishment: advertise our current exportable state."""
        out: list[UpdateMsg] = []
        rel = self.rel_to(neighbor)
        for (dest, label) in sorted(self.local_rib, key=_rib_sort_key):
            route = self.local_rib[(dest, label)]
            if export_allowed(route.learned_rel, rel):
                self.rib_out[(neighbor, dest, label)] = route.as_path
                out.append(self._announce_to(neighbor, route))
        return out

    # -- decision process --------------------------------------------------

    def regular_candidates(self, dest: int) -> list[Route]:
        label = self.default_label()
        out = [r for (d, _, lab), r in sorted(self.rib_in.items())
               if d == dest and lab == label]
        sel = self.local_rib.get((dest, label))
        if sel is not None and sel.rank == RANK_SELF:
            out.append(sel)  # we are the destination; nothing beats that
        return out

    def reselect(self, dest: int, withdrawal: bool = False,
                 link_loss: bool = False) -> list[UpdateMsg]:
        best = decide(self.regular_candidates(dest))
        return self._adopt(dest, best, withdrawal=withdrawal, link_loss=link_loss)

    def _adopt(self, dest: int, best: Optional[Route], withdrawal: bool = False,
               link_loss: bool = False) -> list[UpdateMsg]:
        key = (dest, self.default_label())
        old = self.local_rib.get(key)
        if old == best:
            return []
        if best is None:
            del self.local_rib[key]
        else:
            self.local_rib[key] = best
        return self._export_diff(dest)

    def _export_diff(self, dest: int) -> list[UpdateMsg]:
        """Emit announces/withdraws so each neighbor sees our current selection."""
        out: list[UpdateMsg] = []
        cur = self.local_rib.get((dest, self.default_label()))
        for n in self.neighbors_up():
            want = cur if (cur is not None and export_allowed(cur.learned_rel, self.rel_to(n))) else None
            rib_out_key = (n, dest, self.default_label())
            prev = self.rib_out.get(rib_out_key)
            if want is None:
                if prev is not None:
                    del self.rib_out[rib_out_key]
                    out.append(self._withdraw_to(n, dest))
            elif prev != want.as_path:
                self.rib_out[rib_out_key] = want.as_path
                out.append(self._announce_to(n, want))
        return out

    def _announce_to(self, neighbor: int, route: Route) -> Announce:
        return Announce(sender=self.me, receiver=neighbor,
                        route=replace(route, rci=self._cause_rci()))

    def _withdraw_to(self, neighbor: int, dest: int,
                     label: Optional[PathLabel] = None) -> Withdraw:
        return Withdraw(sender=self.me, receiver=neighbor, dest=dest, label=label,
                        rci=self._cause_rci())

    def _cause_rci(self) -> tuple[tuple[int, int], ...]:
        """Root-cause links to stamp on outbound updates; baseline has none."""
        return ()

    def _purge_neighbor(self, neighbor: int) -> list[int]:
        """Drop all state tied to a dead session; returns affected destinations."""
        dead = [k for k in self.rib_in if k[1] == neighbor]
        for k in dead:
            del self.rib_in[k]
        for k in [k for k in self.rib_out if k[0] == neighbor]:
            del self.rib_out[k]
        return sorted({k[0] for k in dead})

    # -- data plane --------------------------------------------------------

    def forward_decision(self, dest: int, label: Optional[PathLabel] = None,
                         tclass: Optional[str] = None) -> "ForwardDecision":
        route = self.selected(dest)
        if route is None:
            return Drop("no_route")
        return Next(route.next_hop, label)

    # -- inspection --------------------------------------------------------

    def rib_in_size(self) -> int:
        return len(self.rib_in)

    def local_rib_size(self) -> int:
        return len(self.local_rib)


def _rib_sort_key(key: tuple[int, Optional[PathLabel]]) -> tuple:
    dest, label = key
    return (dest,) + (label.sort_key() if label is not None else (0,))


# ---------------------------------------------------------------------------
# forwarding decisions returned to the data-plane walker


@dataclass(frozen=True)
class Next:
    """Hand the packet to a neighbor; ``label`` is what it carries onward."""

    hop: int
    label: Optional[PathLabel] = None


@dataclass(frozen=True)
class FollowPath:
    """Encapsulated segment: traverse these hops without consulting tables."""

    hops: tuple[int, ...]


@dataclass(frozen=True)
class Drop:
    reason: str  # "no_route"


ForwardDecision = Next | FollowPath | Drop
