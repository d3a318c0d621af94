"""Import preference and export rules shared by every protocol variant.

Route preference follows prefer-customer: customer < sibling < peer <
provider (lower is better).  Export follows the no-valley discipline:
routes learned from a customer, a sibling, or originated locally go to
everyone; routes learned from a peer or a provider go only to customers
and siblings.
"""

from __future__ import annotations

from typing import Optional

from .topology import AsGraph, Rel

#: preference rank per perspective relationship; lower wins
IMPORT_RANK = {
    Rel.CUSTOMER: 0,
    Rel.SIBLING: 1,
    Rel.PEER: 2,
    Rel.PROVIDER: 3,
}

#: rank used for self-originated routes; below every learned route
RANK_SELF = -1

RANK_TO_REL = {rank: rel for rel, rank in IMPORT_RANK.items()}


def import_rank(rel: Rel) -> int:
    """Preference rank of a route learned from a neighbor with role ``rel``."""
    return IMPORT_RANK[rel]


def export_allowed(learned_from: Optional[Rel], to: Rel) -> bool:
    """Whether a route learned from ``learned_from`` (None = originated here)
    may be advertised to a neighbor with role ``to``."""
    if learned_from in (None, Rel.CUSTOMER, Rel.SIBLING):
        return True
    return to in (Rel.CUSTOMER, Rel.SIBLING)


def valley_free(path: tuple[int, ...] | list[int], g: AsGraph) -> bool:
    """Check the no-valley shape of a path read toward the destination.

    Allowed edge-type sequence: zero or more steps up to a provider, at
    most one peer step, then zero or more steps down to a customer.
    Sibling edges are transparent and may appear anywhere.  Raises
    TopologyError when consecutive hops are not adjacent.
    """
    descending = False  # set once we take a peer or down step
    for x, y in zip(path, path[1:]):
        rel = g.rel_from_perspective(x, y)
        if rel is Rel.SIBLING:
            continue
        if rel is Rel.PROVIDER:  # climbing
            if descending:
                return False
        elif rel is Rel.PEER:
            if descending:
                return False
            descending = True
        else:  # Rel.CUSTOMER, going down
            descending = True
    return True
