"""Composition facts between identities and the minimum core that covers them all.

A fact (i, j, k) says composing identity i with identity j gives identity k
for every meaning of thefunc, so k is redundant once i and j are kept.  A set
of kept identities covers k when k is kept or a fact derives it from covered
identities; derivations must be finite, which is what the age variables of
the integer-programming formulation enforce.  Here coverage is computed as a
least fixpoint instead, whose derivation heights are exactly such ages.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .egraph import EGraph, RunBudget, RunReport, run
from .expr import X, Expr, substitute
from .rules import Rule
from .synth import TRIVIAL_RHS, Identity


@dataclass(frozen=True, order=True)
class CoverageFact:
    i: int
    j: int
    k: int


def compose(outer: Identity | Expr, inner: Identity | Expr) -> Expr:
    """Replace each thefunc(u) in the outer rhs by the inner rhs at x := u."""
    outer_rhs = outer.rhs if isinstance(outer, Identity) else outer
    inner_rhs = inner.rhs if isinstance(inner, Identity) else inner

    def go(e: Expr) -> Expr:
        if e.op == "thefunc":
            return substitute(inner_rhs, {"x": go(e.args[0])})
        if not e.args:
            return e
        return Expr(e.op, tuple(go(a) for a in e.args), e.value)

    return go(outer_rhs)


@dataclass
class FactResult:
    facts: list[CoverageFact]
    # (i, j) pairs whose composition is provably the trivial identity
    collapses: list[tuple[int, int]]
    # identity index -> lower index it turned out to equal
    duplicates: dict[int, int]
    run: RunReport
    egraph: EGraph | None = field(default=None, repr=False)


def discover_facts(
    identities: list[Identity],
    rules: list[Rule],
    budget: RunBudget | None = None,
    keep_graph: bool = False,
) -> FactResult:
    """Saturate all identities and their pairwise compositions together.

    No defining equation is present, so every fact holds for any thefunc.
    Facts name the lowest-indexed identity of the composition's class; if the
    run proves two identities equal, the later one is reported in
    ``duplicates`` and never appears in facts.
    """
    n = len(identities)
    g = EGraph()
    trivial = g.add(TRIVIAL_RHS)
    ids = [g.add(ident.rhs) for ident in identities]
    comps = {(i, j): g.add(compose(identities[i], identities[j])) for i in range(n) for j in range(n)}
    g.rebuild()
    report = run(g, rules, budget)

    owner: dict[int, int] = {}
    duplicates: dict[int, int] = {}
    for k, cid in enumerate(ids):
        cid = g.find(cid)
        if cid in owner:
            duplicates[k] = owner[cid]
        else:
            owner[cid] = k
    trivial = g.find(trivial)
    facts, collapses = set(), []
    for (i, j), cid in comps.items():
        if i in duplicates or j in duplicates:
            continue
        cid = g.find(cid)
        if cid == trivial:
            collapses.append((i, j))
        k = owner.get(cid)
        if k is not None:
            facts.add(CoverageFact(i, j, k))
    return FactResult(sorted(facts), sorted(collapses), duplicates, report, g if keep_graph else None)


# -- minimum core ---------------------------------------------------------------


def closure(n: int, facts, core) -> dict[int, tuple[int, ...]]:
    """Least fixpoint of coverage from ``core``.

    Maps every covered index to how it was covered: ``()`` for core members,
    ``(i, j)`` for the first fact that derived it.  Facts are applied in
    rounds, so derivations are finite and well-founded by construction.
    """
    how: dict[int, tuple[int, ...]] = {k: () for k in core}
    by_source: dict[int, list[CoverageFact]] = {}
    for fact in facts:
        by_source.setdefault(fact.i, []).append(fact)
        if fact.j != fact.i:
            by_source.setdefault(fact.j, []).append(fact)
    frontier = sorted(how)
    while frontier:
        nxt = []
        for s in frontier:
            for fact in by_source.get(s, ()):
                if fact.k not in how and fact.i in how and fact.j in how:
                    how[fact.k] = (fact.i, fact.j)
                    nxt.append(fact.k)
        frontier = sorted(nxt)
    return how


@dataclass
class CoreSolution:
    core: list[int]
    # non-core index -> (i, j) it was derived from; core members map to ()
    certificate: dict[int, tuple[int, ...]]

    def ages(self) -> dict[int, int]:
        """Derivation height of each identity: 1 for core, 1 + max of the parts otherwise."""
        ages: dict[int, int] = {}

        def age(k: int) -> int:
            if k not in ages:
                parts = self.certificate[k]
                ages[k] = 1 + max((age(p) for p in parts), default=0)
            return ages[k]

        for k in self.certificate:
            age(k)
        return ages


def minimize_core(n: int, facts) -> CoreSolution:
    """Smallest set of identities whose coverage closure is everything.

    Among minimum sets the lexicographically smallest (by sorted indices) is
    returned, so lower-indexed, cheaper identities win ties.  Search goes by
    increasing size; a branch is cut as soon as the current choice together
    with every still-available index cannot cover all identities, which is a
    sound bound because coverage is monotone.
    """
    facts = [f if isinstance(f, CoverageFact) else CoverageFact(*f) for f in facts]
    for f in facts:
        if not all(0 <= v < n for v in (f.i, f.j, f.k)):
            raise ValueError(f"fact {f} refers outside 0..{n - 1}")
    useful = [f for f in facts if f.k != f.i and f.k != f.j]
    derivable = {f.k for f in useful}
    forced = [k for k in range(n) if k not in derivable]
    optional = [k for k in range(n) if k in derivable]
    everything = set(range(n))
    cache: dict[frozenset, bool] = {}

    def covers(chosen) -> bool:
        key = frozenset(chosen)
        hit = cache.get(key)
        if hit is None:
            hit = cache[key] = len(closure(n, useful, key)) == n
        return hit

    def search(chosen: list[int], start: int, left: int):
        if left == 0:
            return list(chosen) if covers(chosen) else None
        for pos in range(start, len(optional) - left + 1):
            if not covers(chosen + optional[pos:]):
                return None
            chosen.append(optional[pos])
            found = search(chosen, pos + 1, left - 1)
            chosen.pop()
            if found is not None:
                return found
        return None

    if n == 0:
        return CoreSolution([], {})
    for extra in range(len(optional) + 1):
        found = search(list(forced), 0, extra)
        if found is not None:
            core = sorted(found)
            how = closure(n, useful, core)
            assert set(how) == everything
            return CoreSolution(core, dict(sorted(how.items())))
    raise AssertionError("the full set always covers")


def brute_force_core(n: int, facts) -> list[int]:
    """Reference solver: every subset in order of size, then lexicographically."""
    facts = [f if isinstance(f, CoverageFact) else CoverageFact(*f) for f in facts]
    for size in range(n + 1):
        for subset in itertools.combinations(range(n), size):
            covered = set(subset)
            changed = True
            while changed:
                changed = False
                for f in facts:
                    if f.k not in covered and f.i in covered and f.j in covered:
                        covered.add(f.k)
                        changed = True
            if len(covered) == n:
                return list(subset)
    raise AssertionError("unreachable")


def emit_lp(n: int, facts, name: str = "core") -> str:
    """The covering problem as a mixed-integer program in CPLEX LP text format.

    Variables: I_k (kept), c_k (covered), a_k (age), u_i_j_k (fact used).
    A fact may only be used when both parts are covered, and it forces the
    age of k above the ages of both parts (big-M = n + 1 deactivates the
    bound when unused), so no identity can justify itself through a cycle.
    """
    facts = sorted({f if isinstance(f, CoverageFact) else CoverageFact(*f) for f in facts})
    big_m = n + 1
    lines = [f"\\ minimum core covering problem: {name}", "Minimize"]
    objective = " + ".join(f"I_{k}" for k in range(n)) or "0 I_0"
    lines.append(f" obj: {objective}")
    lines.append("Subject To")
    incoming: dict[int, list[str]] = {k: [] for k in range(n)}
    for f in facts:
        incoming[f.k].append(f"u_{f.i}_{f.j}_{f.k}")
    for k in range(n):
        lines.append(f" covered_{k}: c_{k} = 1")
        terms = "".join(f" - {u}" for u in incoming[k])
        lines.append(f" justify_{k}: c_{k} - I_{k}{terms} <= 0")
    for f in facts:
        u = f"u_{f.i}_{f.j}_{f.k}"
        tag = f"{f.i}_{f.j}_{f.k}"
        lines.append(f" left_{tag}: {u} - c_{f.i} <= 0")
        lines.append(f" right_{tag}: {u} - c_{f.j} <= 0")
        lines.append(f" age_left_{tag}: a_{f.k} - a_{f.i} - {big_m} {u} >= {1 - big_m}")
        lines.append(f" age_right_{tag}: a_{f.k} - a_{f.j} - {big_m} {u} >= {1 - big_m}")
    lines.append("Bounds")
    for k in range(n):
        lines.append(f" 1 <= a_{k} <= {n}")
    lines.append("General")
    lines.append(" " + " ".join(f"a_{k}" for k in range(n)))
    lines.append("Binary")
    names = [f"I_{k}" for k in range(n)] + [f"c_{k}" for k in range(n)]
    names += [f"u_{f.i}_{f.j}_{f.k}" for f in facts]
    lines.append(" " + " ".join(names))
    lines.append("End")
    return "\n".join(lines) + "\n"
