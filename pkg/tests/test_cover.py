import random
import re

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import Bounds, LinearConstraint, milp

from forge.cover import (
    CoverageFact,
    brute_force_core,
    closure,
    compose,
    discover_facts,
    emit_lp,
    minimize_core,
)
from forge.expr import parse
from forge.rules import default_rules, rule_closure
from forge.synth import Identity

RULES = rule_closure(default_rules())


def test_compose_substitutes_inner_at_argument():
    out = compose(parse("(- (thefunc (- x)))"), parse("(thefunc (- PI x))"))
    assert str(out) == "(- (thefunc (- PI (- x))))"


def test_compose_with_trivial_is_identity():
    i = Identity(parse("(* 2 (thefunc (+ x 1)))"))
    assert compose(i, parse("(thefunc x)")) == i.rhs
    assert compose(parse("(thefunc x)"), i) == i.rhs


def test_period_facts_are_found():
    idents = [Identity(parse("(thefunc (+ x (* 2 PI)))")), Identity(parse("(thefunc (+ x (* 4 PI)))"))]
    out = discover_facts(idents, RULES)
    assert CoverageFact(0, 0, 1) in out.facts


def test_parity_squared_collapses_to_trivial():
    idents = [Identity(parse("(- (thefunc (- x)))"))]
    out = discover_facts(idents, RULES)
    assert (0, 0) in out.collapses


def test_equal_identities_reported_as_late_duplicates():
    idents = [Identity(parse("(thefunc (- PI x))")), Identity(parse("(thefunc (+ (- x) PI))"))]
    out = discover_facts(idents, RULES)
    assert out.duplicates == {1: 0}


def test_small_cores():
    assert minimize_core(2, [(0, 0, 1)]).core == [0]
    assert minimize_core(1, [(0, 0, 0)]).core == [0]
    assert minimize_core(3, [(0, 1, 2), (1, 0, 2)]).core == [0, 1]
    assert minimize_core(0, []).core == []
    assert minimize_core(3, []).core == [0, 1, 2]


def test_cycle_is_not_self_justifying():
    # 0 and 1 derive each other, but something must be kept
    sol = minimize_core(2, [(0, 0, 1), (1, 1, 0)])
    assert sol.core == [0]
    sol = minimize_core(2, [(1, 1, 0), (0, 0, 1), (0, 1, 0)])
    assert len(sol.core) == 1


def test_out_of_range_fact_rejected():
    with pytest.raises(ValueError):
        minimize_core(2, [(0, 0, 2)])


def test_certificate_and_ages():
    sol = minimize_core(4, [(0, 0, 1), (1, 1, 2), (1, 2, 3)])
    assert sol.core == [0]
    assert sol.certificate == {0: (), 1: (0, 0), 2: (1, 1), 3: (1, 2)}
    assert sol.ages() == {0: 1, 1: 2, 2: 3, 3: 4}


def _replay(n, facts, sol):
    known = set(sol.core)
    pending = {k: parts for k, parts in sol.certificate.items() if parts}
    while pending:
        ready = [k for k, (i, j) in pending.items() if i in known and j in known]
        assert ready, "certificate is cyclic"
        for k in ready:
            i, j = pending.pop(k)
            assert CoverageFact(i, j, k) in facts
            known.add(k)
    assert known == set(range(n))


def _random_instance(rng, n, m):
    return sorted({CoverageFact(rng.randrange(n), rng.randrange(n), rng.randrange(n)) for _ in range(m)})


def test_two_hundred_random_instances_match_brute_force():
    rng = random.Random(2024)
    for _ in range(200):
        n = rng.randint(1, 12)
        facts = _random_instance(rng, n, rng.randint(0, 40))
        sol = minimize_core(n, facts)
        assert sol.core == brute_force_core(n, facts)
        _replay(n, set(facts), sol)


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 10), st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9), st.integers(0, 9)), max_size=30))
def test_minimize_matches_brute_force_property(n, raw):
    facts = [CoverageFact(i % n, j % n, k % n) for i, j, k in raw]
    sol = minimize_core(n, facts)
    assert sol.core == brute_force_core(n, facts)
    assert set(closure(n, facts, sol.core)) == set(range(n))


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 9), st.lists(st.tuples(st.integers(0, 8), st.integers(0, 8), st.integers(0, 8)), max_size=25),
       st.tuples(st.integers(0, 8), st.integers(0, 8), st.integers(0, 8)))
def test_more_facts_never_grow_the_core(n, raw, extra):
    facts = [CoverageFact(i % n, j % n, k % n) for i, j, k in raw]
    more = facts + [CoverageFact(*(v % n for v in extra))]
    assert len(minimize_core(n, more).core) <= len(minimize_core(n, facts).core)


# -- LP cross-check -----------------------------------------------------------------

TERM = re.compile(r"([+-])?\s*(\d+)?\s*([A-Za-z_][A-Za-z0-9_]*)")


def _linear(text):
    out = {}
    for sign, coef, var in TERM.findall(text):
        out[var] = out.get(var, 0) + (-1 if sign == "-" else 1) * int(coef or 1)
    return out


def _read_lp(text):
    objective, rows, bounds, integers = {}, [], {}, set()
    section = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("\\"):
            continue
        if line in ("Minimize", "Subject To", "Bounds", "General", "Binary", "End"):
            section = line
            continue
        if section == "Minimize":
            objective = _linear(line.split(":", 1)[1])
        elif section == "Subject To":
            body = line.split(":", 1)[1]
            lhs, op, rhs = re.split(r"\s*(<=|>=|=)\s*", body)
            rows.append((_linear(lhs), op, float(rhs)))
        elif section == "Bounds":
            lo, var, hi = re.match(r"(\S+) <= (\S+) <= (\S+)", line).groups()
            bounds[var] = (float(lo), float(hi))
        elif section == "General":
            integers.update(line.split())
        elif section == "Binary":
            for var in line.split():
                integers.add(var)
                bounds[var] = (0.0, 1.0)
    return objective, rows, bounds, integers


def _solve_lp(text):
    objective, rows, bounds, integers = _read_lp(text)
    names = sorted(set(objective) | {v for r, _, _ in rows for v in r} | set(bounds))
    col = {v: i for i, v in enumerate(names)}
    c = np.zeros(len(names))
    for v, a in objective.items():
        c[col[v]] = a
    A = np.zeros((len(rows), len(names)))
    lo = np.full(len(rows), -np.inf)
    hi = np.full(len(rows), np.inf)
    for r, (coefs, op, rhs) in enumerate(rows):
        for v, a in coefs.items():
            A[r, col[v]] = a
        if op in ("<=", "="):
            hi[r] = rhs
        if op in (">=", "="):
            lo[r] = rhs
    lb = np.array([bounds.get(v, (0.0, np.inf))[0] for v in names])
    ub = np.array([bounds.get(v, (0.0, np.inf))[1] for v in names])
    integrality = np.array([1 if v in integers else 0 for v in names])
    res = milp(c, constraints=LinearConstraint(A, lo, hi), bounds=Bounds(lb, ub), integrality=integrality)
    assert res.success
    return round(res.fun), {v: round(res.x[col[v]]) for v in names}


def test_lp_text_shape():
    text = emit_lp(2, [(0, 0, 1)])
    assert text.startswith("\\") and text.rstrip().endswith("End")
    assert " obj: I_0 + I_1" in text
    assert " age_left_0_0_1: a_1 - a_0 - 3 u_0_0_1 >= -2" in text


def test_lp_optimum_matches_minimize_core():
    rng = random.Random(9)
    for _ in range(40):
        n = rng.randint(1, 8)
        facts = _random_instance(rng, n, rng.randint(0, 20))
        size, values = _solve_lp(emit_lp(n, facts))
        assert size == len(minimize_core(n, facts).core)
        kept = [k for k in range(n) if values[f"I_{k}"]]
        assert len(closure(n, [f for f in facts if f.k not in (f.i, f.j)], kept)) == n


def test_lp_rejects_cyclic_justification():
    size, _ = _solve_lp(emit_lp(2, [(0, 0, 1), (1, 1, 0)]))
    assert size == 1
    size, _ = _solve_lp(emit_lp(1, [(0, 0, 0)]))
    assert size == 1
