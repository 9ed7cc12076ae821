"""Candidate identities for one function: seed thefunc(x) = f(x), saturate, harvest."""

from __future__ import annotations

from dataclasses import dataclass, field

from .egraph import EGraph, Extractor, RunBudget, RunReport, extract_all_nodes, run, synth_cost
from .expr import X, Expr, count_op, free_vars, substitute, thefunc, var
from .rules import Rule

HOLE = var("y")
DEFAULT_CAP = 512

CANDIDATE = "candidate"
DUPLICATE = "duplicate"
COMPOSITE = "composite"
TRIVIAL = "trivial"
DEFINITIONAL = "definitional"
CORE = "core"


@dataclass
class Identity:
    """The claim f(x) = rhs, with ``thefunc`` in rhs standing for f."""

    rhs: Expr
    classification: str = CANDIDATE
    cost: float | None = None

    @property
    def thefunc_count(self) -> int:
        return count_op(self.rhs, "thefunc")

    @property
    def is_trivial(self) -> bool:
        return self.rhs == TRIVIAL_RHS

    @property
    def decomposition(self) -> tuple[Expr, Expr] | None:
        return decompose(self)

    @property
    def text(self) -> str:
        return str(self.rhs)

    def __str__(self) -> str:
        return self.text


TRIVIAL_RHS = thefunc(X)


def decompose(i: Identity | Expr) -> tuple[Expr, Expr] | None:
    """Split rhs = s(thefunc(t)) into (s over the hole y, t over x) when thefunc occurs once."""
    rhs = i.rhs if isinstance(i, Identity) else i
    if count_op(rhs, "thefunc") != 1:
        return None
    found = []

    def cut(e: Expr) -> Expr:
        if e.op == "thefunc":
            found.append(e.args[0])
            return HOLE
        if not e.args:
            return e
        return Expr(e.op, tuple(cut(a) for a in e.args), e.value)

    s = cut(rhs)
    return s, found[0]


def defining_rule(f: Expr) -> Rule:
    """f with x abstracted, rewriting any instance f(u) to thefunc(u)."""
    return Rule("define-thefunc", substitute(f, {"x": var("a")}), thefunc(var("a")))


@dataclass
class SynthResult:
    candidates: list[Identity]
    raw: int
    discarded: int
    capped: bool
    run: RunReport
    egraph: EGraph | None = field(default=None, repr=False)


def synthesize(
    f: Expr,
    rules: list[Rule],
    budget: RunBudget | None = None,
    cap: int = DEFAULT_CAP,
    keep_graph: bool = False,
) -> SynthResult:
    """Saturate from thefunc(x) = f(x) and keep every extraction mentioning thefunc.

    ``rules`` must already be directed.  Besides the seed union, the defining
    equation is also run as a rule so instances such as f(-x) fold back into
    thefunc(-x).  Candidates are ordered by (cost, text) and the first ``cap``
    kept.
    """
    if count_op(f, "thefunc"):
        raise ValueError("benchmark already mentions thefunc")
    if free_vars(f) - {"x"}:
        raise ValueError(f"benchmark must be a function of x only: {f}")
    g = EGraph()
    root = g.union(g.add(TRIVIAL_RHS), g.add(f))
    g.rebuild()
    report = run(g, list(rules) + [defining_rule(f)], budget)
    root = g.find(root)
    extracted = extract_all_nodes(g, root, extractor=Extractor(g, synth_cost, prefer_thefunc=True))
    kept = [(cost, str(e), e) for e, cost in extracted if count_op(e, "thefunc")]
    kept.sort(key=lambda t: (t[0], t[1]))
    candidates = [Identity(e, cost=cost) for cost, _, e in kept[:cap]]
    return SynthResult(
        candidates=candidates,
        raw=len(extracted),
        discarded=len(extracted) - len(kept),
        capped=len(kept) > cap,
        run=report,
        egraph=g if keep_graph else None,
    )
