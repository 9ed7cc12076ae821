"""Detecting identities that only restate f, and numeric verification of identities."""

from __future__ import annotations

from dataclasses import dataclass

import mpmath

from .domain import MP, DomainTable, Indeterminate, Undefined, evaluate
from .egraph import EGraph, RunBudget, RunReport, run
from .expr import X, Expr, app, const, thefunc
from .rules import Rule
from .synth import Identity


@dataclass
class FilterResult:
    definitional: bool
    run: RunReport

    def __bool__(self) -> bool:
        return self.definitional


def _rhs(i: Identity | Expr) -> Expr:
    return i.rhs if isinstance(i, Identity) else i


def is_definitional_direct(i: Identity | Expr, rules: list[Rule], budget: RunBudget | None = None) -> FilterResult:
    """True when the rhs alone is provably equal to a thefunc-free term.

    If the budget runs out first the answer is False: an identity is only
    ever dropped on proof.
    """
    g = EGraph()
    root = g.add(_rhs(i))
    g.rebuild()
    report = run(g, rules, budget, until=lambda g: g.is_free(root))
    return FilterResult(g.is_free(root), report)


def is_definitional_equation(i: Identity | Expr, rules: list[Rule], budget: RunBudget | None = None) -> FilterResult:
    """True when assuming thefunc(x) - rhs = 0 proves thefunc(x) equal to a thefunc-free term."""
    g = EGraph()
    target = g.add(thefunc(X))
    diff = g.add(app("-", thefunc(X), _rhs(i)))
    g.union(diff, g.add(const(0)))
    g.rebuild()
    report = run(g, rules, budget, until=lambda g: g.is_free(target))
    return FilterResult(g.is_free(target), report)


# -- numeric verification ---------------------------------------------------------


def sample_points(count: int = 256) -> list:
    """A deterministic mix of a linear grid on [-10, 10], a signed log grid
    over [1e-12, 1e12] and multiples of pi/6, the last given as ("pi/6", k)."""
    n_lin = count // 3
    n_log = count // 3
    n_pi = count - n_lin - n_log
    pts = [-10.0 + 20.0 * k / max(n_lin - 1, 1) for k in range(n_lin)]
    half = n_log // 2
    for k in range(half):
        v = 10.0 ** (-12.0 + 24.0 * k / max(half - 1, 1))
        pts.extend((v, -v))
    if n_log % 2:
        pts.append(0.0)
    start = -(n_pi // 2)
    pts.extend(("pi/6", start + k) for k in range(n_pi))
    return pts


def _to_mp(p):
    if isinstance(p, tuple):
        return mpmath.pi * p[1] / 6
    return mpmath.mpf(p)


@dataclass
class Verification:
    passed: bool
    checked: int
    skipped: int
    witness: float | None = None
    detail: str = ""

    def __bool__(self) -> bool:
        return self.passed


def verify_identity(
    f: Expr,
    i: Identity | Expr,
    points: int = 256,
    tol: float = 1e-10,
    prec: int = 256,
    table: DomainTable | None = None,
) -> Verification:
    """Check f(x0) = rhs[thefunc := f](x0) at ``points`` sample points.

    Evaluation uses mpmath at ``prec`` bits.  Points where either side is
    undefined, or within 2**(-prec/2) of a domain boundary, are skipped; the
    check fails when the relative error exceeds ``tol`` anywhere, or when no
    point could be checked at all.
    """
    rhs = _rhs(i)
    table = table or DomainTable()
    checked = skipped = 0
    with mpmath.workprec(prec):
        eps = mpmath.mpf(2) ** (-(prec // 2))
        # absolute slack for results that cancel to (numerically) zero
        atol = mpmath.mpf(2) ** (-(prec // 3))

        def body(v):
            return evaluate(f, {"x": v}, MP, table, eps=eps)

        for p in sample_points(points):
            x0 = _to_mp(p)
            try:
                want = body(x0)
                got = evaluate(rhs, {"x": x0}, MP, table, func=body, eps=eps)
            except (Undefined, Indeterminate, ValueError, ZeroDivisionError):
                skipped += 1
                continue
            checked += 1
            err = abs(want - got)
            if err > tol * max(abs(want), abs(got)) + atol:
                return Verification(
                    False, checked, skipped, float(x0),
                    f"f = {mpmath.nstr(want, 17)}, rhs = {mpmath.nstr(got, 17)}",
                )
    if checked == 0:
        return Verification(False, 0, skipped, None, "undefined at every sample point")
    return Verification(True, checked, skipped)
