"""A small e-graph with deferred rebuilding, two analyses and cost extraction.

E-nodes are plain tuples: ``(op, child_id, ...)`` for operators and
``("const", RationalPi)`` / ``("var", name)`` for leaves.  Each e-class tracks

* ``const``: the exact constant the class equals, if folding proved one.  Two
  distinct constants meeting in one class means an unsound rule fired, and
  raises ``SoundnessError`` (the sentinel).
* ``free``: whether some member term avoids ``thefunc`` entirely.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .expr import LEAF_OPS, Expr, RationalPi, fold_node
from .rules import Rule, Status

Node = tuple


class SoundnessError(RuntimeError):
    """Two different constants were proven equal."""

    def __init__(self, first: RationalPi, second: RationalPi):
        self.constants = (first, second)
        super().__init__(
            f"soundness sentinel: constants {first} and {second} were merged; "
            "the rule set contains an unsound rule"
        )


class NodeLimitExceeded(RuntimeError):
    pass


@dataclass
class RunBudget:
    max_iters: int = 10
    max_nodes: int = 100_000
    timeout: float = 30.0

    def __post_init__(self):
        if self.max_iters <= 0 or self.max_nodes <= 0 or self.timeout <= 0:
            raise ValueError("budget limits must be positive")


@dataclass
class RunReport:
    iterations: int
    stop_reason: str
    nodes: int
    classes: int
    elapsed: float
    # matches applied per rule name
    applied: dict[str, int] = field(default_factory=dict)

    @property
    def exhausted(self) -> bool:
        return self.stop_reason in ("iter-limit", "node-limit", "timeout")


class EClass:
    __slots__ = ("id", "nodes", "parents", "const", "free")

    def __init__(self, cid: int, node: Node, const, free: bool):
        self.id = cid
        self.nodes: list[Node] = [node]
        self.parents: list[tuple[Node, int]] = []
        self.const: RationalPi | None = const
        self.free: bool = free


def children(node: Node) -> tuple[int, ...]:
    return () if node[0] in LEAF_OPS else node[1:]


class EGraph:
    def __init__(self, max_nodes: int | None = None):
        self._uf: list[int] = []
        self.classes: dict[int, EClass] = {}
        self.memo: dict[Node, int] = {}
        self._pending: list[tuple[Node, int]] = []
        self._analysis_pending: list[tuple[Node, int]] = []
        self.max_nodes = max_nodes
        self.unions = 0

    # -- union-find -----------------------------------------------------------

    def find(self, cid: int) -> int:
        uf = self._uf
        while uf[cid] != cid:
            uf[cid] = uf[uf[cid]]
            cid = uf[cid]
        return cid

    def canon(self, node: Node) -> Node:
        if node[0] in LEAF_OPS:
            return node
        find = self.find
        return (node[0],) + tuple(find(c) for c in node[1:])

    # -- analysis ---------------------------------------------------------------

    def _make_const(self, node: Node):
        op = node[0]
        if op == "const":
            return node[1]
        if op == "var" or op == "thefunc":
            return None
        values = []
        for c in node[1:]:
            v = self.classes[self.find(c)].const
            if v is None:
                return None
            values.append(v)
        return fold_node(op, values)

    def _make_free(self, node: Node) -> bool:
        op = node[0]
        if op == "thefunc":
            return False
        if op in LEAF_OPS:
            return True
        return all(self.classes[self.find(c)].free for c in node[1:])

    # -- building ---------------------------------------------------------------

    @property
    def num_nodes(self) -> int:
        return len(self.memo)

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    def add_node(self, node: Node) -> int:
        node = self.canon(node)
        cid = self.memo.get(node)
        if cid is not None:
            return self.find(cid)
        if self.max_nodes is not None and len(self.memo) >= self.max_nodes:
            raise NodeLimitExceeded(f"e-graph reached {self.max_nodes} nodes")
        cid = len(self._uf)
        self._uf.append(cid)
        const = self._make_const(node)
        cls = EClass(cid, node, const, self._make_free(node))
        self.classes[cid] = cls
        self.memo[node] = cid
        for child in set(children(node)):
            self.classes[child].parents.append((node, cid))
        if const is not None and node[0] != "const":
            cid = self.union(cid, self.add_node(("const", const)))
        return cid

    def add(self, e: Expr) -> int:
        """Add a term; structurally equal subterms share classes."""
        if e.op == "const":
            return self.add_node(("const", e.value))
        if e.op == "var":
            return self.add_node(("var", e.value))
        return self.add_node((e.op,) + tuple(self.add(a) for a in e.args))

    def lookup(self, e: Expr) -> int | None:
        """Class of an already-present term, without adding anything."""
        if e.op in LEAF_OPS:
            cid = self.memo.get((e.op, e.value))
            return None if cid is None else self.find(cid)
        kids = []
        for a in e.args:
            k = self.lookup(a)
            if k is None:
                return None
            kids.append(k)
        cid = self.memo.get((e.op,) + tuple(kids))
        return None if cid is None else self.find(cid)

    def union(self, a: int, b: int) -> int:
        a, b = self.find(a), self.find(b)
        if a == b:
            return a
        ca, cb = self.classes[a], self.classes[b]
        if ca.const is not None and cb.const is not None and ca.const != cb.const:
            raise SoundnessError(ca.const, cb.const)
        if len(ca.parents) < len(cb.parents) or (len(ca.parents) == len(cb.parents) and b < a):
            a, b, ca, cb = b, a, cb, ca
        self._uf[b] = a
        self.unions += 1
        self._pending.extend(cb.parents)
        const = ca.const if ca.const is not None else cb.const
        free = ca.free or cb.free
        if const != ca.const or free != ca.free:
            self._analysis_pending.extend(ca.parents)
        if const != cb.const or free != cb.free:
            self._analysis_pending.extend(cb.parents)
        ca.nodes.extend(cb.nodes)
        ca.parents.extend(cb.parents)
        ca.const, ca.free = const, free
        del self.classes[b]
        return a

    def equiv(self, a: int, b: int) -> bool:
        return self.find(a) == self.find(b)

    def rebuild(self) -> None:
        """Restore congruence and propagate analysis changes upward."""
        # folding may add constant leaves; never stop halfway through a repair
        limit, self.max_nodes = self.max_nodes, None
        try:
            self._process_pending()
        finally:
            self.max_nodes = limit
        self._rebuild_classes()

    def _process_pending(self) -> None:
        while self._pending or self._analysis_pending:
            while self._pending:
                node, cid = self._pending.pop()
                node = self.canon(node)
                old = self.memo.get(node)
                self.memo[node] = cid
                if old is not None:
                    self.union(old, cid)
            while self._analysis_pending:
                node, cid = self._analysis_pending.pop()
                cid = self.find(cid)
                cls = self.classes[cid]
                node = self.canon(node)
                changed = new_const = False
                value = self._make_const(node)
                if value is not None:
                    if cls.const is None:
                        cls.const = value
                        changed = new_const = True
                    elif cls.const != value:
                        raise SoundnessError(cls.const, value)
                if not cls.free and self._make_free(node):
                    cls.free = True
                    changed = True
                if changed:
                    self._analysis_pending.extend(cls.parents)
                if new_const:
                    self.union(cid, self.add_node(("const", value)))

    def _rebuild_classes(self) -> None:
        memo: dict[Node, int] = {}
        canon, find = self.canon, self.find
        for cid, cls in self.classes.items():
            nodes = list(dict.fromkeys(canon(n) for n in cls.nodes))
            cls.nodes = nodes
            for n in nodes:
                memo[n] = cid
            parents: dict[Node, int] = {}
            for n, p in cls.parents:
                parents[canon(n)] = find(p)
            cls.parents = list(parents.items())
        self.memo = memo

    # -- rule application -------------------------------------------------------

    def _match(self, pat: tuple, cid: int, subst: dict) -> list[dict]:
        """Substitutions extending ``subst`` under which ``pat`` matches class ``cid``."""
        ix = self.op_index()
        found = _searcher(pat)(ix.buckets, self.classes, [self.find(cid)], None)
        return [{**subst, **s} for _, s in found if all(s.get(k, v) == v for k, v in subst.items())]

    def _buckets(self) -> dict[int, dict[str, list[Node]]]:
        out: dict[int, dict[str, list[Node]]] = {}
        for cid, cls in self.classes.items():
            by_op: dict[str, list[Node]] = {}
            for node in cls.nodes:
                by_op.setdefault(node[0], []).append(node)
            out[cid] = by_op
        return out

    def _instantiate(self, pat: tuple, subst: dict) -> int:
        head = pat[0]
        if head == "?":
            return self.find(subst[pat[1]])
        if head == "=":
            return self.add_node(("const", pat[1]))
        return self.add_node((head,) + tuple(self._instantiate(p, subst) for p in pat[1:]))

    def search(self, rule: CompiledRule, index: MatchIndex | None = None, limit: int | None = None) -> list[tuple[int, dict]]:
        """All (class, substitution) matches of the rule's left side.

        With ``limit`` the search stops once more than ``limit`` matches are
        found, since the caller only needs to know the limit was exceeded.
        """
        index = index or self.op_index()
        head = rule.lhs[0]
        if head == "?":
            candidates = list(self.classes)
        elif head == "=":
            candidates = [c for c, cls in self.classes.items() if cls.const == rule.lhs[1]]
        else:
            candidates = index.by_op.get(head, [])
        return _searcher(rule.lhs)(index.buckets, self.classes, candidates, limit)

    def op_index(self) -> MatchIndex:
        """Snapshot of which classes hold which operators, for one round of searching."""
        buckets = self._buckets()
        by_op: dict[str, list[int]] = {}
        for cid, ops in buckets.items():
            for op in ops:
                by_op.setdefault(op, []).append(cid)
        return MatchIndex(by_op, buckets, self.classes, self.memo)

    # -- inspection -------------------------------------------------------------

    def class_nodes(self, cid: int) -> list[Node]:
        return self.classes[self.find(cid)].nodes

    def const_of(self, cid: int) -> RationalPi | None:
        return self.classes[self.find(cid)].const

    def is_free(self, cid: int) -> bool:
        return self.classes[self.find(cid)].free

    def check_congruence(self) -> None:
        """Raise AssertionError unless hashcons and union-find agree everywhere."""
        assert not self._pending and not self._analysis_pending, "rebuild pending"
        owner: dict[Node, int] = {}
        for cid, cls in self.classes.items():
            assert self.find(cid) == cid
            for node in cls.nodes:
                canon = self.canon(node)
                assert canon == node, f"non-canonical node {node} in class {cid}"
                prev = owner.setdefault(canon, cid)
                assert prev == cid, f"congruent node {canon} in classes {prev} and {cid}"
                assert self.memo.get(canon) == cid, f"hashcons disagrees for {canon}"

    def recompute_analysis(self) -> dict[int, tuple]:
        """Analysis values from scratch by fixpoint iteration, for auditing."""
        const = {cid: None for cid in self.classes}
        free = {cid: False for cid in self.classes}
        changed = True
        while changed:
            changed = False
            for cid, cls in self.classes.items():
                for node in cls.nodes:
                    op = node[0]
                    kids = children(node)
                    if op == "const":
                        v = node[1]
                    elif op in ("var", "thefunc") or any(const[self.find(k)] is None for k in kids):
                        v = None
                    else:
                        v = fold_node(op, [const[self.find(k)] for k in kids])
                    if v is not None and const[cid] is None:
                        const[cid] = v
                        changed = True
                    f = op != "thefunc" and all(free[self.find(k)] for k in kids)
                    if f and not free[cid]:
                        free[cid] = True
                        changed = True
        return {cid: (const[cid], free[cid]) for cid in self.classes}

    def to_dot(self) -> str:
        lines = ["digraph egraph {", "  compound=true;", "  clusterrank=local;"]
        for cid, cls in self.classes.items():
            lines.append(f"  subgraph cluster_{cid} {{")
            lines.append(f'    label="c{cid}"; style=dotted;')
            for i, node in enumerate(cls.nodes):
                label = str(node[1]) if node[0] in LEAF_OPS else node[0]
                label = label.replace('"', '\\"')
                lines.append(f'    n{cid}_{i} [label="{label}"];')
            lines.append("  }")
        for cid, cls in self.classes.items():
            for i, node in enumerate(cls.nodes):
                for child in children(node):
                    child = self.find(child)
                    lines.append(f"  n{cid}_{i} -> n{child}_0 [lhead=cluster_{child}];")
        lines.append("}")
        return "\n".join(lines) + "\n"


# -- rules in matcher form -----------------------------------------------------


@dataclass
class MatchIndex:
    """Read-only view of a rebuilt graph used by the matchers."""

    by_op: dict[str, list[int]]
    buckets: dict[int, dict[str, list[Node]]]
    classes: dict[int, EClass]
    memo: dict[Node, int]


_SEARCHERS: dict[tuple, Callable] = {}


def _searcher(pat: tuple) -> Callable:
    """Compiled search function for a pattern, cached by pattern."""
    fn = _SEARCHERS.get(pat)
    if fn is None:
        fn = _SEARCHERS[pat] = _compile_searcher(pat)
    return fn


def _compile_searcher(pat: tuple) -> Callable:
    """Turn a pattern into straight-line Python: one loop per operator node.

    The generated ``search(buckets, classes, candidates, limit)`` returns
    (class, substitution) pairs in candidate order, then node order, and
    stops early once more than ``limit`` pairs are found.  Generated code is
    several times faster than interpreting the pattern recursively.
    """
    lines = ["def search(buckets, classes, candidates, limit):", " out = []", " for root in candidates:"]
    consts: list = []
    bound: list[str] = []
    counter = [0]

    def emit(sub: tuple, where: str, depth: int) -> int:
        pad = " " * depth
        head = sub[0]
        if head == "?":
            name = f"v_{sub[1]}"
            if sub[1] in bound:
                lines.append(f"{pad}if {where} == {name}:")
                return depth + 1
            bound.append(sub[1])
            lines.append(f"{pad}{name} = {where}")
            return depth
        if head == "=":
            consts.append(sub[1])
            lines.append(f"{pad}if classes[{where}].const == K[{len(consts) - 1}]:")
            return depth + 1
        counter[0] += 1
        node = f"n{counter[0]}"
        lines.append(f"{pad}for {node} in buckets[{where}].get({head!r}, ()):")
        depth += 1
        for k, child in enumerate(sub[1:], 1):
            depth = emit(child, f"{node}[{k}]", depth)
        return depth

    depth = emit(pat, "root", 2)
    pad = " " * depth
    subst = ", ".join(f"{n!r}: v_{n}" for n in bound)
    lines.append(f"{pad}out.append((root, {{{subst}}}))")
    lines.append(f"{pad}if limit is not None and len(out) > limit:")
    lines.append(f"{pad} return out")
    lines.append(" return out")
    namespace = {"K": consts}
    exec("\n".join(lines), namespace)
    return namespace["search"]


@dataclass(frozen=True)
class CompiledRule:
    name: str
    lhs: tuple
    rhs: tuple


def compile_pattern(e: Expr) -> tuple:
    if e.op == "var":
        return ("?", e.value)
    if e.op == "const":
        return ("=", e.value)
    return (e.op,) + tuple(compile_pattern(a) for a in e.args)


def compile_rule(rule: Rule) -> CompiledRule:
    if rule.bidirectional:
        raise ValueError(f"rule {rule.name} must be split into directed rules first")
    return CompiledRule(rule.name, compile_pattern(rule.lhs), compile_pattern(rule.rhs))


MATCH_LIMIT = 1000
BAN_LENGTH = 5


def run(
    g: EGraph,
    rules: Iterable[Rule],
    budget: RunBudget | None = None,
    until: Callable[[EGraph], bool] | None = None,
    match_limit: int = MATCH_LIMIT,
    ban_length: int = BAN_LENGTH,
) -> RunReport:
    """Equality saturation with an exponential-backoff rule scheduler.

    Rules fire in the order given, each against the graph as it stood at the
    start of the iteration.  A rule whose match count exceeds its threshold
    is skipped for a while and its threshold doubles; saturation is only
    declared once nothing changes with no rule banned.  ``until`` is checked
    after every iteration and stops the run early with reason "goal".
    """
    budget = budget or RunBudget()
    rules = list(rules)
    for r in rules:
        if r.status is Status.UNSOUND:
            raise ValueError(f"rule {r.name} is flagged unsound and cannot be run")
    compiled = [compile_rule(r) for r in rules]
    times_banned = [0] * len(compiled)
    banned_until = [0] * len(compiled)
    applied = {r.name: 0 for r in compiled}
    saved_limit = g.max_nodes
    g.max_nodes = budget.max_nodes
    start = time.monotonic()
    deadline = start + budget.timeout
    stop = "iter-limit"
    iterations = 0
    g.rebuild()
    try:
        for it in range(budget.max_iters):
            if until is not None and until(g):
                stop = "goal"
                break
            if time.monotonic() > deadline:
                stop = "timeout"
                break
            index = g.op_index()
            scheduled = []
            timed_out = False
            for i, rule in enumerate(compiled):
                if banned_until[i] > it:
                    continue
                threshold = match_limit << times_banned[i]
                matches = g.search(rule, index, threshold)
                if len(matches) > threshold:
                    banned_until[i] = it + (ban_length << times_banned[i])
                    times_banned[i] += 1
                    continue
                scheduled.append((rule, matches))
                if time.monotonic() > deadline:
                    timed_out = True
                    break
            nodes_before, unions_before = g.num_nodes, g.unions
            try:
                for rule, matches in scheduled:
                    for cid, subst in matches:
                        g.union(cid, g._instantiate(rule.rhs, subst))
                    applied[rule.name] += len(matches)
            except NodeLimitExceeded:
                g.rebuild()
                iterations += 1
                stop = "node-limit"
                break
            g.rebuild()
            iterations += 1
            if timed_out:
                stop = "timeout"
                break
            if g.num_nodes == nodes_before and g.unions == unions_before:
                if any(b > it for b in banned_until):
                    banned_until = [0] * len(compiled)
                    continue
                stop = "saturated"
                break
            if g.num_nodes >= budget.max_nodes:
                stop = "node-limit"
                break
        else:
            if until is not None and until(g):
                stop = "goal"
    finally:
        g.max_nodes = saved_limit
    return RunReport(
        iterations=iterations,
        stop_reason=stop,
        nodes=g.num_nodes,
        classes=g.num_classes,
        elapsed=time.monotonic() - start,
        applied=applied,
    )


# -- extraction -----------------------------------------------------------------


def ast_size(op: str) -> int:
    return 1


def synth_cost(op: str) -> int:
    """Every operator costs one except ``thefunc``, which is free."""
    return 0 if op == "thefunc" else 1


class Extractor:
    """Minimum-cost representatives for every class.

    Costs come from Knuth's generalisation of Dijkstra: classes are settled in
    increasing cost order, so every class has a representative built from
    classes settled before it and no choice is cyclic, even when some
    operators are free.  With ``prefer_thefunc`` the choice among equal-cost
    nodes is then revisited class by class in settle order: a ``thefunc`` node
    wins, then a node whose children contain one.  Equal-cost children are
    resolved depth-first, skipping any option that would loop back.
    """

    def __init__(self, g: EGraph, costfn: Callable[[str], float] = ast_size, prefer_thefunc: bool = True):
        self.g = g
        self.costfn = costfn
        self.prefer_thefunc = prefer_thefunc
        self.cost: dict[int, float] = {}
        self._rank: dict[int, int] = {}
        self._choice: dict[int, Node] = {}
        self._exprs: dict[int, Expr] = {}
        order = self._settle()
        if prefer_thefunc:
            self._choice = {}
            for cid in order:
                self._resolve(cid, set())

    def node_cost(self, node: Node) -> float:
        return self.costfn(node[0]) + sum(self.cost[k] for k in children(node))

    def _settle(self) -> list[int]:
        g = self.g
        heap: list = []
        waiting: dict[tuple[int, int], int] = {}
        dependents: dict[int, list[tuple[int, int]]] = {}
        for cid, cls in g.classes.items():
            for idx, node in enumerate(cls.nodes):
                kids = set(children(node))
                if not kids:
                    heapq.heappush(heap, (self.costfn(node[0]), cid, idx))
                else:
                    waiting[(cid, idx)] = len(kids)
                    for k in kids:
                        dependents.setdefault(k, []).append((cid, idx))
        order = []
        while heap:
            cost, cid, idx = heapq.heappop(heap)
            if cid in self.cost:
                continue
            self.cost[cid] = cost
            self._choice[cid] = g.classes[cid].nodes[idx]
            order.append(cid)
            for pc, pidx in dependents.get(cid, ()):
                left = waiting[(pc, pidx)] - 1
                waiting[(pc, pidx)] = left
                if left == 0 and pc not in self.cost:
                    node = g.classes[pc].nodes[pidx]
                    heapq.heappush(heap, (self.node_cost(node), pc, pidx))
        return order

    def _resolve(self, cid: int, stack: set[int]) -> bool:
        if cid in self._choice:
            return True
        stack.add(cid)
        best = None
        target = self.cost[cid]
        for node in self.g.classes[cid].nodes:
            kids = children(node)
            if self.node_cost(node) != target:
                continue
            if not all(
                k in self._choice or (k not in stack and self._resolve(k, stack)) for k in kids
            ):
                continue
            if node[0] == "thefunc":
                best = (0, node)
                break
            rank = 1 if any(self._rank[k] <= 1 for k in kids) else 2
            if best is None or rank < best[0]:
                best = (rank, node)
        stack.discard(cid)
        if best is None:
            return False
        self._rank[cid], self._choice[cid] = best
        return True

    def best(self, cid: int) -> Expr:
        cid = self.g.find(cid)
        done = self._exprs.get(cid)
        if done is None:
            done = self.node_expr(self._choice[cid])
            self._exprs[cid] = done
        return done

    def node_expr(self, node: Node) -> Expr:
        op = node[0]
        if op == "const":
            return Expr("const", (), node[1])
        if op == "var":
            return Expr("var", (), node[1])
        return Expr(op, tuple(self.best(k) for k in node[1:]))

    def best_cost(self, cid: int) -> float:
        return self.cost[self.g.find(cid)]


def extract_best(g: EGraph, cid: int, costfn: Callable[[str], float] = ast_size, prefer_thefunc: bool = True) -> Expr:
    return Extractor(g, costfn, prefer_thefunc).best(cid)


def extract_all_nodes(
    g: EGraph,
    cid: int,
    costfn: Callable[[str], float] = ast_size,
    prefer_thefunc: bool = True,
    extractor: Extractor | None = None,
) -> list[tuple[Expr, float]]:
    """One expression per e-node of the class: the node over its children's best forms.

    Results are deduplicated by printed form and keep the class's node order.
    """
    ex = extractor or Extractor(g, costfn, prefer_thefunc)
    seen: set[str] = set()
    out = []
    for node in g.class_nodes(cid):
        e = ex.node_expr(node)
        text = str(e)
        if text not in seen:
            seen.add(text)
            out.append((e, ex.node_cost(node)))
    return out
