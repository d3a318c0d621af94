"""Seeded random AS topologies with a consistent provider hierarchy.

Nodes are placed on tiers; every provider link crosses from a lower tier
number (provider) to a higher one (customer), so the provider relation is
acyclic and prefer-customer policies have a unique stable outcome.  Peer
(and optionally sibling) links connect nodes on the same tier.  The seed
fully determines the output.
"""

from __future__ import annotations

import random

from .topology import AsGraph, RelKind


def generate(n: int, seed: int, tiers: int = 3, peer_prob: float = 0.3,
             extra_provider_prob: float = 0.3, sibling_prob: float = 0.0) -> AsGraph:
    if n < 1:
        raise ValueError("need at least one AS")
    rng = random.Random(seed)
    g = AsGraph()
    ids = list(range(1, n + 1))
    for as_id in ids:
        g.add_node(as_id)
    tiers = max(1, min(tiers, n))
    shuffled = ids[:]
    rng.shuffle(shuffled)
    tier_of = {as_id: min(i * tiers // n, tiers - 1) for i, as_id in enumerate(shuffled)}

    # chain the top tier with peer links so the graph cannot fall apart there
    top = sorted(a for a in ids if tier_of[a] == 0)
    for x, y in zip(top, top[1:]):
        g.add_link(x, y, RelKind.PEER)

    for as_id in sorted(ids):
        if tier_of[as_id] == 0:
            continue
        uppers = sorted(b for b in ids if tier_of[b] < tier_of[as_id])
        provider = rng.choice(uppers)
        g.add_link(provider, as_id, RelKind.PROVIDER_TO_CUSTOMER)
        if len(uppers) > 1 and rng.random() < extra_provider_prob:
            second = rng.choice([b for b in uppers if b != provider])
            if not g.has_link(second, as_id):
                g.add_link(second, as_id, RelKind.PROVIDER_TO_CUSTOMER)

    for i, x in enumerate(sorted(ids)):
        for y in sorted(ids)[i + 1:]:
            if tier_of[x] != tier_of[y] or g.has_link(x, y) or tier_of[x] == 0:
                continue
            roll = rng.random()
            if roll < sibling_prob:
                g.add_link(x, y, RelKind.SIBLING)
            elif roll < sibling_prob + peer_prob:
                g.add_link(x, y, RelKind.PEER)
    return g
