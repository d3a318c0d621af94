"""MIRO variant: pull-based alternate-route negotiation and tunneled
forwarding on top of unchanged baseline dissemination.

A requester asks a responder for routes to a destination that dodge a set
of ASes and/or links.  The responder offers its policy-exportable
alternates (price-tagged, truncated), possibly after recursing one level
to a neighbor of its own.  Accepting an offer establishes a tunnel: the
responder binds a tunnel id to the offered route and the requester maps
the destination onto that tunnel for forwarding.  Either side tears the
tunnel down when the state it depends on changes.

Negotiation messages travel hop by hop; intermediate ASes relay them
opaquely (deployment elsewhere is never required) and replies run back
along the reverse of the recorded trail, so negotiation does not require
the requester's own AS to be a routed destination.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

from .bgp_core import BgpNode, FollowPath, ForwardDecision, Route, UpdateMsg
from .config import ScenarioError
from .policy import export_allowed
from .topology import link_key

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# negotiation payloads


@dataclass(frozen=True)
class RouteQuery:
    request_id: int
    requester: int
    responder: int
    dest: int
    avoid_as: frozenset[int]
    avoid_links: frozenset[tuple[int, int]]
    budget: int


@dataclass(frozen=True)
class OfferedRoute:
    as_path: tuple[int, ...]
    price_tag: str


@dataclass(frozen=True)
class RouteOffer:
    request_id: int
    responder: int
    routes: tuple[OfferedRoute, ...]


@dataclass(frozen=True)
class TunnelAccept:
    request_id: int
    requester: int
    chosen: tuple[int, ...]


@dataclass(frozen=True)
class TunnelEstablished:
    request_id: int
    responder: int
    tunnel_id: int
    bound_path: tuple[int, ...]


@dataclass(frozen=True)
class TunnelRefused:
    request_id: int
    responder: int
    reason: str


@dataclass(frozen=True)
class TunnelTeardown:
    tunnel_id: int
    responder: int  # id of the tunnel's responder side, for matching


MiroPayload = (RouteQuery | RouteOffer | TunnelAccept | TunnelEstablished
               | TunnelRefused | TunnelTeardown)

_REQUEST_PAYLOADS = (RouteQuery, TunnelAccept)


@dataclass(frozen=True)
class MiroMsg:
    """One hop of a relayed negotiation message.

    ``trail`` records the ASes already traversed (origin first); replies
    travel back along its reverse, so negotiation works even when the
    requester's AS is not a routed destination.
    """

    sender: int
    receiver: int
    rest: tuple[int, ...]  # remaining hops after the receiver; empty = deliver
    trail: tuple[int, ...]
    payload: MiroPayload
    category: str  # "miro_request" | "miro_response"

    @property
    def kind(self) -> str:
        return self.category


# ---------------------------------------------------------------------------
# per-AS state


@dataclass
class PendingRequest:
    query: RouteQuery
    accept: object  # "first" | "none" | int index
    tclass: Optional[str]
    parent: Optional[RouteQuery] = None  # set on sub-requests raised by us
    parent_back: Optional[tuple[int, ...]] = None  # our path back to the parent


@dataclass
class RespTunnel:
    """Responder half: a tunnel id bound to a route we must keep valid."""

    requester: int
    dest: int
    bound_path: tuple[int, ...]
    source_key: Optional[tuple[int, int, Optional[object]]] = None
    depends_on: Optional[int] = None  # our own sub-request id


@dataclass
class ReqTunnel:
    """Requester half: forwarding state toward the responder."""

    responder: int
    tunnel_id: int
    bound_path: tuple[int, ...]
    via_path: tuple[int, ...]  # our path to the responder when established


class MiroNode(BgpNode):
    variant = "miro"

    def __init__(self, me, graph, config):
        super().__init__(me, graph, config)
        self.now = 0
        self.enabled = me not in config.miro_disabled
        self._next_request = 1
        self._next_tunnel = config.tunnel_id_start
        self.pending: dict[int, PendingRequest] = {}
        # (request_id, requester) -> composed binding awaiting an accept
        self.offers_made: dict[tuple[int, int], RespTunnel] = {}
        self.resp_tunnels: dict[int, RespTunnel] = {}
        self.req_tunnels: dict[tuple[int, Optional[str]], ReqTunnel] = {}
        self.sub_tunnels: dict[int, ReqTunnel] = {}  # keyed by our sub-request id

    # -- plumbing ------------------------------------------------------------

    def route_to(self, target: int) -> Optional[tuple[int, ...]]:
        """Current forwarding path from here to another AS."""
        if target == self.me:
            return (self.me,)
        if self.graph.has_link(self.me, target) and self.graph.link_up(self.me, target):
            return (self.me, target)
        sel = self.selected(target)
        return sel.as_path if sel is not None else None

    def _wrap(self, payload: MiroPayload, to: int,
              via: Optional[tuple[int, ...]] = None) -> list[MiroMsg]:
        """Package a payload for ``to``, relayed along ``via`` (a full path
        starting here) or, by default, along our current route to ``to``."""
        path = via if via is not None else self.route_to(to)
        if path is None or len(path) < 2:
            self.stats["miro_unroutable"] += 1
            return []
        if isinstance(payload, TunnelTeardown):
            # the requester side tearing down speaks as a requester
            category = "miro_response" if payload.responder == self.me else "miro_request"
        else:
            category = ("miro_request" if isinstance(payload, _REQUEST_PAYLOADS)
                        else "miro_response")
        return [MiroMsg(sender=self.me, receiver=path[1], rest=path[2:],
                        trail=(self.me,), payload=payload, category=category)]

    # -- requester side ---------------------------------------------------------

    def issue_request(self, dest: int, responder: int,
                      avoid_as: frozenset[int] = frozenset(),
                      avoid_links: frozenset[tuple[int, int]] = frozenset(),
                      budget: Optional[int] = None,
                      accept: object = "first",
                      tclass: Optional[str] = None) -> list[MiroMsg]:
        if responder == self.me:
            raise ScenarioError(f"AS {self.me} cannot negotiate with itself")
        if dest in avoid_as:
            raise ScenarioError("destination cannot be in the avoid set")
        if self.selected(dest) is None and dest != self.me:
            raise ScenarioError(f"AS {self.me} has no route to destination {dest}")
        if self.route_to(responder) is None:
            raise ScenarioError(f"AS {self.me} cannot reach responder {responder}")
        rid = self._next_request
        self._next_request += 1
        query = RouteQuery(request_id=rid, requester=self.me, responder=responder,
                           dest=dest, avoid_as=frozenset(avoid_as),
                           avoid_links=frozenset(link_key(*l) for l in avoid_links),
                           budget=self.config.default_budget if budget is None else budget)
        self.pending[rid] = PendingRequest(query=query, accept=accept, tclass=tclass)
        self.stats["miro_requests_issued"] += 1
        return self._wrap(query, responder)

    def _handle_offer(self, offer: RouteOffer, back: tuple[int, ...]) -> list[MiroMsg]:
        pending = self.pending.get(offer.request_id)
        if pending is None or offer.responder != pending.query.responder:
            self.stats["miro_spurious"] += 1
            return []
        if pending.parent is not None:
            return self._handle_sub_offer(offer, pending, back)
        if not offer.routes or pending.accept == "none":
            del self.pending[offer.request_id]
            return []
        index = 0 if pending.accept == "first" else int(pending.accept)
        if index >= len(offer.routes):
            del self.pending[offer.request_id]
            return []
        chosen = offer.routes[index]
        return self._wrap(TunnelAccept(request_id=offer.request_id, requester=self.me,
                                       chosen=chosen.as_path),
                          offer.responder, via=back)

    def _handle_established(self, est: TunnelEstablished) -> list[MiroMsg]:
        pending = self.pending.pop(est.request_id, None)
        if pending is None:
            self.stats["miro_spurious"] += 1
            return []
        tunnel = ReqTunnel(responder=est.responder, tunnel_id=est.tunnel_id,
                           bound_path=est.bound_path,
                           via_path=self.route_to(est.responder) or ())
        if pending.parent is not None:
            self.sub_tunnels[est.request_id] = tunnel
            return self._answer_parent(pending, est)
        self.req_tunnels[(pending.query.dest, pending.tclass)] = tunnel
        self.stats["tunnels_established"] += 1
        return []

    def _handle_refused(self, refusal: TunnelRefused) -> list[MiroMsg]:
        pending = self.pending.pop(refusal.request_id, None)
        if pending is not None and pending.parent is not None:
            return self._wrap(RouteOffer(request_id=pending.parent.request_id,
                                         responder=self.me, routes=()),
                              pending.parent.requester, via=pending.parent_back)
        self.stats["tunnel_refusals"] += 1
        return []

    # -- responder side -----------------------------------------------------------

    def _query_candidates(self, query: RouteQuery, back: tuple[int, ...]) -> list[Route]:
        """RIB_IN alternates satisfying the avoid sets and exportable toward
        the neighbor the answer will leave through."""
        rel = self.rel_to(back[1])
        current = self.selected(query.dest)
        # a neighboring requester already learns our selection the normal way,
        # so only true alternates are worth offering it; remote requesters do
        # not, and may legitimately want exactly our default
        skip_current = self.graph.has_link(self.me, query.requester)
        out = []
        entries = sorted((r for (d, n, lab), r in self.rib_in.items()
                          if d == query.dest and lab is None),
                         key=lambda r: (r.rank, len(r.as_path), r.next_hop, r.as_path))
        for r in entries:
            if skip_current and current is not None and r.as_path == current.as_path:
                continue
            if set(r.as_path[1:]) & query.avoid_as or query.requester in r.as_path:
                continue
            if any(r.contains_link(l) for l in query.avoid_links):
                continue
            if not export_allowed(r.learned_rel, rel):
                continue
            out.append(r)
        return out

    def _handle_query(self, query: RouteQuery, back: tuple[int, ...]) -> list[MiroMsg]:
        self.stats["miro_requests_served"] += 1
        candidates = self._query_candidates(query, back)
        if candidates:
            offered = tuple(OfferedRoute(as_path=r.as_path,
                                         price_tag=self.config.price_tag(self.me))
                            for r in candidates[: self.config.offer_limit])
            return self._wrap(RouteOffer(request_id=query.request_id,
                                         responder=self.me, routes=offered),
                              query.requester, via=back)
        if query.budget > 0:
            target = self._forward_target(query)
            if target is not None:
                rid = self._next_request
                self._next_request += 1
                sub = RouteQuery(request_id=rid, requester=self.me, responder=target,
                                 dest=query.dest, avoid_as=query.avoid_as,
                                 avoid_links=query.avoid_links, budget=query.budget - 1)
                self.pending[rid] = PendingRequest(query=sub, accept="first", tclass=None,
                                                   parent=query, parent_back=back)
                return self._wrap(sub, target)
        return self._wrap(RouteOffer(request_id=query.request_id,
                                     responder=self.me, routes=()),
                          query.requester, via=back)

    def _forward_target(self, query: RouteQuery) -> Optional[int]:
        for n in self.neighbors_up():  # ascending ids
            if n in query.avoid_as or n == query.requester:
                continue
            return n
        return None

    def _handle_sub_offer(self, offer: RouteOffer, pending: PendingRequest,
                          back: tuple[int, ...]) -> list[MiroMsg]:
        parent = pending.parent
        if not offer.routes:
            del self.pending[offer.request_id]
            return self._wrap(RouteOffer(request_id=parent.request_id,
                                         responder=self.me, routes=()),
                              parent.requester, via=pending.parent_back)
        chosen = offer.routes[0]
        return self._wrap(TunnelAccept(request_id=offer.request_id, requester=self.me,
                                       chosen=chosen.as_path),
                          offer.responder, via=back)

    def _answer_parent(self, pending: PendingRequest,
                       est: TunnelEstablished) -> list[MiroMsg]:
        parent = pending.parent
        composed = (self.me,) + est.bound_path
        usable = (parent.requester not in composed
                  and not set(composed[1:]) & parent.avoid_as
                  and not any(link_key(x, y) in parent.avoid_links
                              for x, y in zip(composed, composed[1:])))
        if usable:
            binding = RespTunnel(requester=parent.requester, dest=parent.dest,
                                 bound_path=composed, depends_on=est.request_id)
            self.offers_made[(parent.request_id, parent.requester)] = binding
            routes = (OfferedRoute(as_path=composed,
                                   price_tag=self.config.price_tag(self.me)),)
            return self._wrap(RouteOffer(request_id=parent.request_id,
                                         responder=self.me, routes=routes),
                              parent.requester, via=pending.parent_back)
        return self._wrap(RouteOffer(request_id=parent.request_id,
                                     responder=self.me, routes=()),
                          parent.requester, via=pending.parent_back)

    def _handle_accept(self, accept: TunnelAccept, back: tuple[int, ...]) -> list[MiroMsg]:
        offer_key = (accept.request_id, accept.requester)
        binding = self.offers_made.pop(offer_key, None)
        valid = False
        source_key = None
        depends_on = None
        if binding is not None and binding.depends_on is not None:
            sub = self.sub_tunnels.get(binding.depends_on)
            valid = sub is not None and (self.me,) + sub.bound_path == accept.chosen
            depends_on = binding.depends_on
        else:
            for (d, n, lab), r in sorted(self.rib_in.items()):
                if d == accept.chosen[-1] and lab is None and r.as_path == accept.chosen:
                    valid = True
                    source_key = (d, n, lab)
                    break
        if not valid:
            self.stats["tunnel_refusals"] += 1
            return self._wrap(TunnelRefused(request_id=accept.request_id,
                                            responder=self.me, reason="stale offer"),
                              accept.requester, via=back)
        tid = self._next_tunnel
        self._next_tunnel += 1
        self.resp_tunnels[tid] = RespTunnel(requester=accept.requester,
                                            dest=accept.chosen[-1],
                                            bound_path=accept.chosen,
                                            source_key=source_key,
                                            depends_on=depends_on)
        self.stats["tunnels_bound"] += 1
        return self._wrap(TunnelEstablished(request_id=accept.request_id,
                                            responder=self.me, tunnel_id=tid,
                                            bound_path=accept.chosen),
                          accept.requester, via=back)

    # -- teardown ----------------------------------------------------------------

    def _handle_teardown(self, msg: TunnelTeardown) -> list[MiroMsg]:
        out: list[MiroMsg] = []
        if msg.responder == self.me:
            if self.resp_tunnels.pop(msg.tunnel_id, None) is None:
                self.stats["teardown_unknown"] += 1
                logger.debug("AS %s: teardown for unknown tunnel %s ignored",
                             self.me, msg.tunnel_id)
            else:
                self.stats["tunnels_torn_down"] += 1
            return out
        # the responder tells us its half is gone
        matched = False
        for key, t in sorted(self.req_tunnels.items(), key=lambda kv: (kv[0][0], str(kv[0][1]))):
            if t.responder == msg.responder and t.tunnel_id == msg.tunnel_id:
                del self.req_tunnels[key]
                self.stats["tunnels_torn_down"] += 1
                matched = True
                break
        for rid, t in sorted(self.sub_tunnels.items()):
            if t.responder == msg.responder and t.tunnel_id == msg.tunnel_id:
                del self.sub_tunnels[rid]
                matched = True
                out.extend(self._cascade_dependents(rid))
                break
        if not matched:
            self.stats["teardown_unknown"] += 1
            logger.debug("AS %s: teardown for unknown tunnel %s ignored",
                         self.me, msg.tunnel_id)
        return out

    def _cascade_dependents(self, sub_request_id: int) -> list[MiroMsg]:
        out: list[MiroMsg] = []
        for tid in sorted(t for t, rt in self.resp_tunnels.items()
                          if rt.depends_on == sub_request_id):
            rt = self.resp_tunnels.pop(tid)
            self.stats["tunnels_torn_down"] += 1
            out.extend(self._wrap(TunnelTeardown(tunnel_id=tid, responder=self.me),
                                  rt.requester))
        return out

    def _check_liveness(self) -> list[MiroMsg]:
        """Tear down whatever no longer rests on live state."""
        out: list[MiroMsg] = []
        for tid in sorted(self.resp_tunnels):
            rt = self.resp_tunnels[tid]
            alive = True
            if rt.source_key is not None:
                entry = self.rib_in.get(rt.source_key)
                alive = entry is not None and entry.as_path == rt.bound_path
            elif rt.depends_on is not None:
                alive = rt.depends_on in self.sub_tunnels
            if not alive:
                del self.resp_tunnels[tid]
                self.stats["tunnels_torn_down"] += 1
                out.extend(self._wrap(TunnelTeardown(tunnel_id=tid, responder=self.me),
                                      rt.requester))
        for key in sorted(self.req_tunnels, key=lambda k: (k[0], str(k[1]))):
            t = self.req_tunnels[key]
            if self.route_to(t.responder) != t.via_path:
                del self.req_tunnels[key]
                self.stats["tunnels_torn_down"] += 1
                out.extend(self._wrap(TunnelTeardown(tunnel_id=t.tunnel_id,
                                                     responder=t.responder),
                                      t.responder))
        for rid in sorted(self.sub_tunnels):
            t = self.sub_tunnels[rid]
            if self.route_to(t.responder) != t.via_path:
                del self.sub_tunnels[rid]
                out.extend(self._wrap(TunnelTeardown(tunnel_id=t.tunnel_id,
                                                     responder=t.responder), t.responder))
                out.extend(self._cascade_dependents(rid))
        return out

    # -- dispatch -------------------------------------------------------------------

    def process_message(self, msg) -> list[UpdateMsg]:
        if isinstance(msg, MiroMsg):
            if msg.rest:  # opaque relay toward its real recipient
                self.stats["miro_relayed"] += 1
                return [replace(msg, sender=self.me, receiver=msg.rest[0],
                                rest=msg.rest[1:], trail=msg.trail + (self.me,))]
            if not self.enabled:
                self.stats["miro_ignored"] += 1
                logger.debug("AS %s does not speak MIRO; message dropped", self.me)
                return []
            back = (self.me,) + tuple(reversed(msg.trail))
            payload = msg.payload
            if isinstance(payload, RouteQuery):
                return self._handle_query(payload, back)
            if isinstance(payload, RouteOffer):
                return self._handle_offer(payload, back)
            if isinstance(payload, TunnelAccept):
                return self._handle_accept(payload, back)
            if isinstance(payload, TunnelEstablished):
                return self._handle_established(payload)
            if isinstance(payload, TunnelRefused):
                return self._handle_refused(payload)
            if isinstance(payload, TunnelTeardown):
                return self._handle_teardown(payload)
            return []
        out = super().process_message(msg)
        out.extend(self._check_liveness())
        return out

    def on_link_down(self, neighbor: int) -> list[UpdateMsg]:
        out = super().on_link_down(neighbor)
        out.extend(self._check_liveness())
        return out

    def on_link_up(self, neighbor: int) -> list[UpdateMsg]:
        out = super().on_link_up(neighbor)
        out.extend(self._check_liveness())
        return out

    # -- data plane --------------------------------------------------------------------

    def forward_decision(self, dest: int, label=None,
                         tclass: Optional[str] = None) -> ForwardDecision:
        tunnel = self.req_tunnels.get((dest, tclass))
        if tunnel is not None:
            to_resp = self.route_to(tunnel.responder)
            if to_resp is not None and len(to_resp) >= 2:
                return FollowPath(to_resp[1:] + tunnel.bound_path[1:])
        return super().forward_decision(dest, label, tclass)
