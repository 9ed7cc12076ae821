import pytest

from forge.definitional import is_definitional_direct, is_definitional_equation, sample_points, verify_identity
from forge.egraph import RunBudget
from forge.expr import parse
from forge.rules import default_rules, rule_closure
from forge.synth import Identity

RULES = rule_closure(default_rules())


def test_direct_detects_restated_definition():
    i = Identity(parse("(- (- 1 (thefunc x)) (- (- (thefunc x)) (cos x)))"))
    assert is_definitional_direct(i, RULES)


def test_direct_keeps_structural_identities():
    for text in ["(- (thefunc (- x)))", "(thefunc (- PI x))"]:
        out = is_definitional_direct(Identity(parse(text)), RULES, RunBudget(max_iters=6))
        assert not out and out.run.stop_reason != "goal"


def test_equation_detects_solvable_form():
    # thefunc(x) = 2 thefunc(x) - cos(x) only says thefunc(x) = cos(x)
    i = Identity(parse("(- (* 2 (thefunc x)) (cos x))"))
    assert is_definitional_equation(i, RULES)
    assert not is_definitional_direct(i, RULES, RunBudget(max_iters=6))


def test_equation_keeps_parity():
    assert not is_definitional_equation(Identity(parse("(- (thefunc (- x)))")), RULES, RunBudget(max_iters=6))


def test_sample_points_count_and_mix():
    for count in (1, 7, 48, 256):
        assert len(sample_points(count)) == count
    pts = sample_points(256)
    assert sum(isinstance(p, tuple) for p in pts) > 50
    floats = [p for p in pts if not isinstance(p, tuple)]
    assert max(floats) >= 1e11 and min(abs(p) for p in floats if p) <= 1e-11
    assert sample_points(256) == pts


def test_verify_true_identities():
    assert verify_identity(parse("(sin x)"), parse("(- (thefunc (- x)))"))
    assert verify_identity(parse("(sin x)"), parse("(thefunc (- PI x))"))
    assert verify_identity(parse("(+ 1 (cos x))"), parse("(- 2 (thefunc (+ PI x)))"))
    assert verify_identity(parse("(- (log (+ x 1)) (log x))"), parse("(thefunc x)"))


def test_verify_rejects_false_identity_with_witness():
    out = verify_identity(parse("(sin x)"), parse("(thefunc (- x))"))
    assert not out and out.witness is not None and "rhs" in out.detail
    out = verify_identity(parse("(cos x)"), parse("(thefunc (+ x PI))"))
    assert not out


def test_verify_skips_points_outside_domain():
    out = verify_identity(parse("(log x)"), parse("(thefunc x)"))
    assert out and out.skipped > 0 and out.checked > 0


def test_verify_fails_when_nothing_is_defined():
    out = verify_identity(parse("(log (- 0 (* x x)))"), parse("(thefunc x)"))
    assert not out and out.checked == 0


def test_tolerance_catches_tiny_error():
    f = parse("(sin x)")
    assert not verify_identity(f, parse("(* (+ 1 1/1000000000) (thefunc x))"))
    assert verify_identity(f, parse("(* (+ 1 1/1000000000000000) (thefunc x))"))
