"""Merge candidates that are equal whatever thefunc means."""

from __future__ import annotations

from dataclasses import dataclass

from .egraph import EGraph, Extractor, RunBudget, RunReport, ast_size, run
from .expr import count_op, order_key
from .rules import Rule
from .synth import DUPLICATE, TRIVIAL, TRIVIAL_RHS, Identity


@dataclass
class DedupResult:
    # groups[g] lists candidate indices; representatives[g] stands for the group
    groups: list[list[int]]
    representatives: list[Identity]
    trivial_group: int
    run: RunReport

    @property
    def unique(self) -> list[Identity]:
        return self.representatives


def dedup(candidates: list[Identity], rules: list[Rule], budget: RunBudget | None = None) -> DedupResult:
    """Group candidates by e-class after saturating without the defining equation.

    The bare thefunc(x) is always added, so whatever lands with it is a
    duplicate of the trivial identity.  Groups are ordered by their
    representatives' printed size, then text; each representative is the cheapest form
    of the class (thefunc costs one like any operator), falling back to the
    cheapest member when the cheapest form does not mention thefunc at all.
    Candidates get classified in place: representatives keep their status,
    the trivial representative becomes trivial, every other member a
    duplicate.
    """
    g = EGraph()
    trivial_cid = g.add(TRIVIAL_RHS)
    cids = [g.add(c.rhs) for c in candidates]
    g.rebuild()
    report = run(g, rules, budget)

    by_class: dict[int, list[int]] = {}
    for idx, cid in enumerate(cids):
        by_class.setdefault(g.find(cid), []).append(idx)
    trivial_cid = g.find(trivial_cid)
    by_class.setdefault(trivial_cid, [])

    ex = Extractor(g, ast_size, prefer_thefunc=True)
    entries = []
    for cid, members in by_class.items():
        if cid == trivial_cid:
            rep = Identity(TRIVIAL_RHS, TRIVIAL, 2)
        else:
            best = ex.best(cid)
            if not count_op(best, "thefunc"):
                best = min((candidates[m].rhs for m in members), key=order_key)
            rep = Identity(best, cost=best.size())
        entries.append((order_key(rep.rhs), members, rep, cid == trivial_cid))
    entries.sort(key=lambda t: t[0])

    trivial_group = next(n for n, e in enumerate(entries) if e[3])
    for _, members, rep, is_trivial in entries:
        for m in members:
            c = candidates[m]
            if is_trivial and c.is_trivial:
                c.classification = TRIVIAL
            elif is_trivial or c.rhs != rep.rhs:
                c.classification = DUPLICATE
    return DedupResult(
        groups=[e[1] for e in entries],
        representatives=[e[2] for e in entries],
        trivial_group=trivial_group,
        run=report,
    )
