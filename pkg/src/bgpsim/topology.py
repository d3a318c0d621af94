"""AS-level topology: nodes, business-relationship links, link state.

The on-disk format is the common AS-relationship convention, one record
per line::

    <as-a>|<as-b>|<code>

with code -1 meaning a is a provider of b, 0 meaning a and b peer, and 2
meaning a and b are siblings.  Lines starting with ``#`` and blank lines
are ignored.  AS identifiers are integers >= 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional


class RelKind(Enum):
    """Relationship attached to a link. PROVIDER_TO_CUSTOMER is directed."""

    PROVIDER_TO_CUSTOMER = -1
    PEER = 0
    SIBLING = 2


class Rel(Enum):
    """A neighbor's role as seen from one endpoint of a link."""

    CUSTOMER = "customer"
    SIBLING = "sibling"
    PEER = "peer"
    PROVIDER = "provider"


#: dual of each perspective relationship, as seen from the other side
DUAL = {
    Rel.CUSTOMER: Rel.PROVIDER,
    Rel.PROVIDER: Rel.CUSTOMER,
    Rel.PEER: Rel.PEER,
    Rel.SIBLING: Rel.SIBLING,
}


class TopologyError(ValueError):
    """Raised for malformed relationship files or invalid link operations."""

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


def link_key(a: int, b: int) -> tuple[int, int]:
    """Canonical unordered key for the link between a and b."""
    return (a, b) if a < b else (b, a)


@dataclass
class Link:
    """One AS-level adjacency.  For PROVIDER_TO_CUSTOMER, ``a`` is the provider."""

    a: int
    b: int
    rel: RelKind
    up: bool = True

    def key(self) -> tuple[int, int]:
        return link_key(self.a, self.b)

    def other(self, me: int) -> int:
        return self.b if me == self.a else self.a


class AsGraph:
    """AS graph with typed links and mutable link state.

    Mutation is limited to link up/down flips; the node and link sets are
    fixed after construction, which keeps the adjacency index trivially
    consistent.
    """

    def __init__(self) -> None:
        self.nodes: set[int] = set()
        self._links: dict[tuple[int, int], Link] = {}
        self._adj: dict[int, list[int]] = {}

    # -- construction -------------------------------------------------

    def add_node(self, as_id: int) -> None:
        if as_id < 1:
            raise TopologyError(f"AS id must be >= 1, got {as_id}")
        if as_id not in self.nodes:
            self.nodes.add(as_id)
            self._adj[as_id] = []

    def add_link(self, a: int, b: int, rel: RelKind) -> None:
        if a == b:
            raise TopologyError(f"self-loop on AS {a}")
        self.add_node(a)
        self.add_node(b)
        key = link_key(a, b)
        existing = self._links.get(key)
        if existing is not None:
            if existing.rel is rel and (rel is not RelKind.PROVIDER_TO_CUSTOMER or existing.a == a):
                return  # exact duplicate record, harmless
            raise TopologyError(f"conflicting duplicate link {a}|{b}")
        self._links[key] = Link(a, b, rel)
        self._adj[a].append(b)
        self._adj[b].append(a)
        self._adj[a].sort()
        self._adj[b].sort()

    def copy(self) -> "AsGraph":
        g = AsGraph()
        g.nodes = set(self.nodes)
        g._links = {k: Link(l.a, l.b, l.rel, l.up) for k, l in self._links.items()}
        g._adj = {n: list(vs) for n, vs in self._adj.items()}
        return g

    # -- queries ------------------------------------------------------

    def neighbors(self, me: int) -> list[int]:
        """All neighbors of ``me`` in ascending id order, regardless of link state."""
        return self._adj[me]

    def link(self, a: int, b: int) -> Link:
        try:
            return self._links[link_key(a, b)]
        except KeyError:
            raise TopologyError(f"no link between AS {a} and AS {b}") from None

    def has_link(self, a: int, b: int) -> bool:
        return link_key(a, b) in self._links

    def link_up(self, a: int, b: int) -> bool:
        return self.link(a, b).up

    def links(self) -> Iterable[Link]:
        for key in sorted(self._links):
            yield self._links[key]

    def rel_from_perspective(self, me: int, neighbor: int) -> Rel:
        """What ``neighbor`` is to ``me``: its role from ``me``'s point of view."""
        lnk = self.link(me, neighbor)
        if lnk.rel is RelKind.PEER:
            return Rel.PEER
        if lnk.rel is RelKind.SIBLING:
            return Rel.SIBLING
        return Rel.CUSTOMER if lnk.a == me else Rel.PROVIDER

    def path_links(self, path: tuple[int, ...]) -> list[tuple[int, int]]:
        """Canonical link keys along a path; raises if two hops are not adjacent."""
        out = []
        for x, y in zip(path, path[1:]):
            if not self.has_link(x, y):
                raise TopologyError(f"path hops {x},{y} are not adjacent")
            out.append(link_key(x, y))
        return out

    # -- mutation -----------------------------------------------------

    def set_link_state(self, a: int, b: int, up: bool) -> None:
        """Flip a link up or down.  Idempotent; touches nothing else."""
        self.link(a, b).up = up


def load_topology(text: str) -> AsGraph:
    """Parse relationship-file contents into a graph, all links up."""
    g = AsGraph()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("|")
        if len(parts) != 3:
            raise TopologyError(f"expected a|b|code, got {raw!r}", line=lineno)
        try:
            a, b, code = (int(p) for p in parts)
        except ValueError:
            raise TopologyError(f"non-integer field in {raw!r}", line=lineno) from None
        if a < 1 or b < 1:
            raise TopologyError(f"AS ids must be >= 1 in {raw!r}", line=lineno)
        try:
            rel = RelKind(code)
        except ValueError:
            raise TopologyError(f"unknown relationship code {code}", line=lineno) from None
        try:
            g.add_link(a, b, rel)
        except TopologyError as exc:
            raise TopologyError(str(exc), line=lineno) from None
    return g


def serialize_topology(g: AsGraph) -> str:
    """Canonical text form: records sorted by link key, provider listed first."""
    lines = []
    for lnk in g.links():
        lines.append(f"{lnk.a}|{lnk.b}|{lnk.rel.value}")
    return "\n".join(lines) + ("\n" if lines else "")
