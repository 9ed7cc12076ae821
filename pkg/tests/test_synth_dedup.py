import math
import random

import mpmath
import pytest

from forge.dedup import dedup
from forge.definitional import verify_identity
from forge.domain import MP, Indeterminate, Undefined, evaluate
from forge.egraph import RunBudget
from forge.expr import X, count_op, parse, thefunc
from forge.rules import default_rules, rule_closure
from forge.synth import DUPLICATE, TRIVIAL, Identity, decompose, defining_rule, synthesize

RULES = rule_closure(default_rules())


@pytest.fixture(scope="module")
def sin_synth():
    return synthesize(parse("(sin x)"), RULES)


@pytest.fixture(scope="module")
def sin_dedup(sin_synth):
    return dedup([Identity(c.rhs, cost=c.cost) for c in sin_synth.candidates], RULES)


def test_decompose_parity():
    s, t = decompose(Identity(parse("(- (thefunc (- x)))")))
    assert str(s) == "(- y)" and str(t) == "(- x)"


def test_decompose_reflection():
    s, t = decompose(Identity(parse("(thefunc (- PI x))")))
    assert str(s) == "y" and str(t) == "(- PI x)"


def test_decompose_needs_exactly_one_call():
    assert decompose(Identity(parse("(+ (thefunc x) (thefunc (- x)))"))) is None
    assert decompose(Identity(parse("(sin x)"))) is None


def test_decomposition_rebuilds_rhs():
    for text in ["(- (thefunc (- x)))", "(* 2 (thefunc (+ x PI)))", "(thefunc x)"]:
        rhs = parse(text)
        s, t = decompose(Identity(rhs))
        from forge.expr import substitute

        assert substitute(s, {"y": thefunc(t)}) == rhs


def test_trivial_identity():
    assert Identity(thefunc(X)).is_trivial
    assert not Identity(parse("(thefunc (- PI x))")).is_trivial


def test_defining_rule_abstracts_x():
    r = defining_rule(parse("(- (tan x) (sin x))"))
    assert str(r) == "define-thefunc: (- (tan a) (sin a)) => (thefunc a)"


def test_sin_candidates_include_parity_and_reflection(sin_synth):
    texts = {c.text for c in sin_synth.candidates}
    assert "(- (thefunc (- x)))" in texts
    assert "(thefunc (- PI x))" in texts
    assert "(thefunc x)" in texts


def test_candidates_distinct_and_mention_thefunc(sin_synth):
    texts = [c.text for c in sin_synth.candidates]
    assert len(texts) == len(set(texts))
    assert all(c.thefunc_count >= 1 for c in sin_synth.candidates)
    assert sin_synth.raw == len(sin_synth.candidates) + sin_synth.discarded or sin_synth.capped


def test_candidates_are_ordered_by_cost(sin_synth):
    keys = [(c.cost, c.text) for c in sin_synth.candidates]
    assert keys == sorted(keys)


def test_cap_is_respected_and_reported():
    out = synthesize(parse("(sin x)"), RULES, RunBudget(max_iters=4), cap=5)
    assert len(out.candidates) == 5 and out.capped
    assert out.candidates[0].text == "(thefunc x)"


def test_one_plus_cos_finds_even_form():
    out = synthesize(parse("(+ 1 (cos x))"), RULES)
    texts = {c.text for c in out.candidates}
    assert "(thefunc (- x))" in texts


def test_synthesize_rejects_thefunc_input():
    with pytest.raises(ValueError):
        synthesize(thefunc(X), RULES)


def test_sample_of_sin_candidates_verifies(sin_synth):
    rng = random.Random(1)
    sample = rng.sample(sin_synth.candidates, 40)
    for c in sample:
        check = verify_identity(parse("(sin x)"), c, points=48, prec=128)
        assert check.passed, (c.text, check)


# -- dedup --------------------------------------------------------------------------


def test_dedup_partitions_candidates(sin_synth, sin_dedup):
    seen = sorted(i for group in sin_dedup.groups for i in group)
    assert seen == list(range(len(sin_synth.candidates)))
    assert len(sin_dedup.representatives) == len(sin_dedup.groups)


def test_dedup_removes_most_sin_candidates(sin_synth, sin_dedup):
    assert len(sin_dedup.groups) < 0.3 * len(sin_synth.candidates)


def test_zero_plus_merges_with_trivial():
    cands = [Identity(thefunc(X)), Identity(parse("(+ 0 (thefunc x))"))]
    out = dedup(cands, RULES)
    assert len(out.groups) == 1
    assert cands[0].classification == TRIVIAL and cands[1].classification == DUPLICATE


def test_fabs_is_not_merged():
    cands = [Identity(parse("(fabs (thefunc x))")), Identity(thefunc(X))]
    assert len(dedup(cands, RULES).groups) == 2


def test_singleton():
    out = dedup([Identity(parse("(- (thefunc (- x)))"))], RULES)
    # the parity identity plus the always-present trivial class
    assert len(out.groups) == 2 and [len(g) for g in out.groups].count(1) == 1
    assert any(r.text == "(- (thefunc (- x)))" for r in out.representatives)


def test_representatives_mention_thefunc(sin_dedup):
    assert all(count_op(r.rhs, "thefunc") for r in sin_dedup.representatives)


# closed-form stand-ins for thefunc used to check that merges hold for any f
STAND_INS = [
    lambda v: v * v * v - 2 * v + 1,
    lambda v: mpmath.sin(v) + v / 3,
    lambda v: mpmath.exp(v / 5),
    lambda v: mpmath.cos(3 * v) * v,
    lambda v: 1 / (1 + v * v),
    lambda v: mpmath.atan(v) - v * v,
    lambda v: mpmath.exp(mpmath.sin(v)),
    lambda v: v ** 4 - v,
    lambda v: mpmath.sinh(v / 4) + 2,
    lambda v: mpmath.cos(v) ** 2,
    lambda v: v,
    lambda v: -7 * v + 3,
    lambda v: mpmath.tanh(v),
    lambda v: mpmath.exp(-v * v),
    lambda v: mpmath.sin(v) * mpmath.exp(v / 7),
    lambda v: 5 + 0 * v,
    lambda v: v ** 5 / 10,
    lambda v: mpmath.atan(2 * v + 1),
    lambda v: mpmath.cos(v / 2) - mpmath.sin(v),
    lambda v: mpmath.log(1 + v * v),
]


def _eval_with(rhs, func, x0):
    with mpmath.workprec(128):
        return evaluate(rhs, {"x": mpmath.mpf(x0)}, MP, func=func)


def test_merged_candidates_agree_for_arbitrary_functions(sin_synth, sin_dedup):
    rng = random.Random(4)
    xs = [rng.uniform(-4, 4) for _ in range(6)]
    cands = sin_synth.candidates
    for group in sin_dedup.groups:
        members = [cands[m].rhs for m in group][:6]
        for func in STAND_INS:
            for x0 in xs:
                values = []
                for rhs in members:
                    try:
                        values.append(_eval_with(rhs, func, x0))
                    except (Undefined, Indeterminate):
                        values.append(None)
                defined = [v for v in values if v is not None]
                for v in defined[1:]:
                    assert abs(v - defined[0]) <= 1e-10 * max(1, abs(defined[0])), [str(m) for m in members]
