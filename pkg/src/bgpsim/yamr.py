"""YAMR variant: a default path per destination plus one alternative per
default-path link, labeled forwarding, and optional failure hiding.

Table construction per destination:

* The default path is selected exactly like the baseline, over neighbors'
  default-labeled advertisements.
* For every link ``l`` of the default path, the candidate contributed by a
  neighbor is its avoid(l) advertisement when present, otherwise its
  default advertisement; candidates whose path crosses ``l`` are dropped,
  and the alternative is selected with the regular decision rule.
* Changed table entries are re-exported per the usual export policy, with
  labels preserved.

Hiding (the ``yamr_hiding`` protocol) keeps a withdrawn-but-selected path
in place, marked lame, forwards the affected traffic on a locally chosen
deflection path, and tells nobody whose exported view is unchanged.  When
no deflection exists the withdrawal proceeds normally and the downstream
neighbors get their own chance to hide it.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from .bgp_core import (
    DEFAULT_LABEL,
    Announce,
    BgpNode,
    Drop,
    ForwardDecision,
    Next,
    PathLabel,
    Route,
    UpdateMsg,
    Withdraw,
    decide,
)
from .policy import RANK_SELF, export_allowed
from .topology import link_key


@dataclass
class LameBinding:
    """A kept-alive withdrawn table entry and the path actually used for it."""

    deflection_label: PathLabel
    failed_link: Optional[tuple[int, int]]
    rib_key: tuple[int, int, PathLabel]  # the rib_in entry being kept


class YamrNode(BgpNode):
    variant = "yamr"

    def __init__(self, me, graph, config, hiding: bool = False):
        super().__init__(me, graph, config)
        self.hiding = hiding
        self.now = 0
        # (dest, label) -> binding for lame LOCAL_RIB entries
        self.lame: dict[tuple[int, PathLabel], LameBinding] = {}
        # rib_in keys kept only because some lame slot still needs them
        self.lame_keys: set[tuple[int, int, PathLabel]] = set()
        self.lame_peak = 0
        self._cause: tuple[tuple[int, int], ...] = ()

    def default_label(self) -> PathLabel:
        return DEFAULT_LABEL

    def _cause_rci(self) -> tuple[tuple[int, int], ...]:
        return self._cause

    # -- message handling ---------------------------------------------------

    def handle_announce(self, msg: Announce) -> list[UpdateMsg]:
        route = msg.route
        label = route.label if route.label is not None else DEFAULT_LABEL
        key = (route.dest, msg.sender, label)
        if key in self.lame_keys:
            self._unlame_key(key)  # fresh news supersedes the kept entry
        self.rib_in.pop(key, None)
        imported = self.import_route(msg.sender, replace(route, label=label))
        if imported is not None:
            self.rib_in[key] = imported
        self._cause = tuple(link_key(*l) for l in route.rci)
        try:
            return self.reselect(route.dest)
        finally:
            self._cause = ()

    def handle_withdraw(self, msg: Withdraw) -> list[UpdateMsg]:
        label = msg.label if msg.label is not None else DEFAULT_LABEL
        key = (msg.dest, msg.sender, label)
        if key not in self.rib_in or key in self.lame_keys:
            return []
        self._cause = tuple(link_key(*l) for l in msg.rci)
        try:
            if self.hiding:
                failed = link_key(*msg.rci[0]) if msg.rci else None
                self._hide_or_drop(key, failed)
            else:
                del self.rib_in[key]
            return self.reselect(msg.dest, withdrawal=True)
        finally:
            self._cause = ()

    def on_link_down(self, neighbor: int) -> list[UpdateMsg]:
        failed = link_key(self.me, neighbor)
        self._cause = (failed,)
        try:
            if not self.hiding:
                return super().on_link_down(neighbor)
            dead = sorted(k for k in self.rib_in if k[1] == neighbor and k not in self.lame_keys)
            for k in [k for k in self.rib_out if k[0] == neighbor]:
                del self.rib_out[k]
            affected = sorted({k[0] for k in dead})
            for key in dead:
                self._hide_or_drop(key, failed)
            out: list[UpdateMsg] = []
            for dest in affected:
                out.extend(self.reselect(dest, link_loss=True))
            return out
        finally:
            self._cause = ()

    def on_link_up(self, neighbor: int) -> list[UpdateMsg]:
        restored = link_key(self.me, neighbor)
        out: list[UpdateMsg] = []
        if self.hiding:
            stale = sorted({(d, lab) for (d, lab), b in self.lame.items()
                            if b.failed_link == restored})
            dests = sorted({d for d, _ in stale})
            for slot in stale:
                self._unlame_slot(slot, drop_entry=True)
            for dest in dests:
                out.extend(self.reselect(dest))
        out.extend(super().on_link_up(neighbor))
        return out

    # -- hiding machinery -----------------------------------------------------

    def _hide_or_drop(self, key: tuple[int, int, PathLabel],
                      failed: Optional[tuple[int, int]]) -> None:
        """Keep the entry and lame its table slots when a deflection exists,
        otherwise delete it so normal reselection runs."""
        dest = key[0]
        entry = self.rib_in[key]
        victims = sorted((lab for (d, lab), r in self.local_rib.items()
                          if d == dest and r.as_path == entry.as_path),
                         key=PathLabel.sort_key)
        hidden_any = False
        for lab in victims:
            deflection = self.pick_deflection(dest, lab, failed)
            if deflection is not None:
                self.lame[(dest, lab)] = LameBinding(deflection, failed, key)
                hidden_any = True
                self.stats["hidden_failures"] += 1
                self.stats["deflection_switches"] += 1
            else:
                self.local_rib.pop((dest, lab), None)
        if hidden_any:
            self.lame_keys.add(key)
            self.lame_peak = max(self.lame_peak, len(self.lame))
        else:
            del self.rib_in[key]

    def pick_deflection(self, dest: int, lame_label: PathLabel,
                        failed: Optional[tuple[int, int]]) -> Optional[PathLabel]:
        """Best other table entry that dodges the failed link; None if stuck."""
        candidates = []
        slots = sorted((lab for (d, lab) in self.local_rib if d == dest),
                       key=PathLabel.sort_key)
        for lab in slots:
            r = self.local_rib[(dest, lab)]
            if lab == lame_label or (dest, lab) in self.lame:
                continue
            if failed is not None and r.contains_link(failed):
                continue
            candidates.append((lab, r))
        best = decide([r for _, r in candidates])
        if best is None:
            return None
        return next(lab for lab, r in candidates if r is best)

    def _unlame_key(self, key: tuple[int, int, PathLabel]) -> None:
        self.lame_keys.discard(key)
        for slot in [s for s, b in self.lame.items() if b.rib_key == key]:
            del self.lame[slot]
        self.rib_in.pop(key, None)

    def _unlame_slot(self, slot: tuple[int, PathLabel], drop_entry: bool) -> None:
        binding = self.lame.pop(slot, None)
        if binding is None:
            return
        self.local_rib.pop(slot, None)
        still_needed = any(b.rib_key == binding.rib_key for b in self.lame.values())
        if not still_needed:
            self.lame_keys.discard(binding.rib_key)
            if drop_entry:
                self.rib_in.pop(binding.rib_key, None)

    def _revalidate_lames(self, dest: int) -> None:
        """Re-pick deflections whose entry vanished; un-hide when stuck."""
        for slot in sorted((s for s in self.lame if s[0] == dest),
                           key=lambda s: s[1].sort_key()):
            binding = self.lame.get(slot)
            if binding is None:
                continue
            defl = self.local_rib.get((dest, binding.deflection_label))
            ok = (defl is not None
                  and (dest, binding.deflection_label) not in self.lame
                  and (binding.failed_link is None
                       or not defl.contains_link(binding.failed_link)))
            if ok:
                continue
            repick = self.pick_deflection(dest, slot[1], binding.failed_link)
            if repick is not None:
                binding.deflection_label = repick
                self.stats["deflection_switches"] += 1
            else:
                self._unlame_slot(slot, drop_entry=True)

    # -- table construction -----------------------------------------------------

    def reselect(self, dest: int, withdrawal: bool = False,
                 link_loss: bool = False) -> list[UpdateMsg]:
        if self.hiding:
            self._revalidate_lames(dest)
        self._recompute_table(dest)
        return self._export_diff(dest)

    def _recompute_table(self, dest: int) -> None:
        old = {lab: r for (d, lab), r in self.local_rib.items() if d == dest}
        lame_slots = {lab for (d, lab) in self.lame if d == dest}
        if DEFAULT_LABEL in lame_slots:
            return  # fully hidden: pretend nothing happened
        table: dict[PathLabel, Route] = {lab: old[lab] for lab in lame_slots}
        default = decide(self._label_candidates(dest, DEFAULT_LABEL, None))
        if default is not None:
            table[DEFAULT_LABEL] = default
            for lnk in zip(default.as_path, default.as_path[1:]):
                label = PathLabel.avoiding(*lnk)
                if label in table:
                    continue
                alt = decide(self._label_candidates(dest, label, link_key(*lnk)))
                if alt is not None:
                    table[label] = replace(alt, label=label)
        for lab in [l for l in old if l not in table]:
            del self.local_rib[(dest, lab)]
        for lab, route in table.items():
            self.local_rib[(dest, lab)] = route

    def _label_candidates(self, dest: int, label: PathLabel,
                          avoid: Optional[tuple[int, int]]) -> list[Route]:
        """Per neighbor: its avoid-label path when advertised, else its default."""
        out = []
        for n in self.graph.neighbors(self.me):
            entry = None
            if not label.is_default:
                key = (dest, n, label)
                if key in self.rib_in and key not in self.lame_keys:
                    entry = self.rib_in[key]
            if entry is None:
                key = (dest, n, DEFAULT_LABEL)
                if key in self.rib_in and key not in self.lame_keys:
                    entry = self.rib_in[key]
            if entry is None:
                continue
            if avoid is not None and entry.contains_link(avoid):
                continue
            out.append(entry)
        sel = self.local_rib.get((dest, DEFAULT_LABEL))
        if label.is_default and sel is not None and sel.rank == RANK_SELF:
            out.append(sel)  # we are the destination; keep the local route
        return out

    def _export_diff(self, dest: int) -> list[UpdateMsg]:
        out: list[UpdateMsg] = []
        table = {lab: r for (d, lab), r in self.local_rib.items() if d == dest}
        for n in self.neighbors_up():
            rel = self.rel_to(n)
            advertised = {k[2] for k in self.rib_out if k[0] == n and k[1] == dest}
            for lab in sorted(set(table) | advertised, key=PathLabel.sort_key):
                route = table.get(lab)
                want = route if (route is not None
                                 and export_allowed(route.learned_rel, rel)) else None
                rib_out_key = (n, dest, lab)
                prev = self.rib_out.get(rib_out_key)
                if want is None:
                    if prev is not None:
                        del self.rib_out[rib_out_key]
                        out.append(self._withdraw_to(n, dest, label=lab))
                elif prev != want.as_path:
                    if lab.avoid is not None:
                        assert not want.contains_link(lab.avoid), "label violates its own avoid link"
                    self.rib_out[rib_out_key] = want.as_path
                    out.append(self._announce_to(n, want))
        return out

    # -- origination ------------------------------------------------------------

    def originate(self, dest: int) -> list[UpdateMsg]:
        assert dest == self.me
        key = (dest, DEFAULT_LABEL)
        if key in self.local_rib:
            return []
        self.local_rib[key] = Route(dest=dest, as_path=(self.me,), learned_from=None,
                                    rank=RANK_SELF, label=DEFAULT_LABEL)
        return self._export_diff(dest)

    # -- data plane ----------------------------------------------------------------

    def forward_decision(self, dest: int, label: Optional[PathLabel] = None,
                         tclass: Optional[str] = None) -> ForwardDecision:
        slot = None
        if label is not None and not label.is_default and (dest, label) in self.local_rib:
            slot = label
        elif (dest, DEFAULT_LABEL) in self.local_rib:
            slot = DEFAULT_LABEL
        if slot is None:
            return Drop("no_route")
        binding = self.lame.get((dest, slot))
        if binding is not None:
            deflected = self.local_rib[(dest, binding.deflection_label)]
            return Next(deflected.next_hop, binding.deflection_label)
        return Next(self.local_rib[(dest, slot)].next_hop, label)

    def local_rib_size(self) -> int:
        return len(self.local_rib)


class YamrHidingNode(YamrNode):
    variant = "yamr_hiding"

    def __init__(self, me, graph, config):
        super().__init__(me, graph, config, hiding=True)
