"""Rewrite rules: loading, closure into directed rules, and domain-soundness checks."""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, replace
from enum import Enum
from importlib import resources
from pathlib import Path

from .domain import DomainTable, is_defined
from .expr import Expr, ParseError, free_vars, parse, to_sexpr

PATTERN_VARS = ("a", "b", "c")


class Status(str, Enum):
    CURATED = "curated-sound"
    VALIDATED = "validated"
    UNSOUND = "flagged-unsound"


class RuleError(ValueError):
    pass


@dataclass(frozen=True)
class Rule:
    name: str
    lhs: Expr
    rhs: Expr
    bidirectional: bool = False
    status: Status = Status.CURATED

    def __post_init__(self):
        unbound = free_vars(self.rhs) - free_vars(self.lhs)
        if unbound:
            raise RuleError(f"rule {self.name}: rhs variable(s) {sorted(unbound)} not bound in lhs")
        if self.bidirectional:
            unbound = free_vars(self.lhs) - free_vars(self.rhs)
            if unbound:
                raise RuleError(
                    f"rule {self.name}: reverse direction leaves {sorted(unbound)} unbound"
                )

    def __str__(self) -> str:
        arrow = "<=>" if self.bidirectional else "=>"
        return f"{self.name}: {to_sexpr(self.lhs)} {arrow} {to_sexpr(self.rhs)}"


def parse_rule(line: str, lineno: int | None = None) -> Rule:
    where = f"line {lineno}: " if lineno is not None else ""
    name, sep, body = line.partition(":")
    name = name.strip()
    if not sep or not name or any(ch.isspace() for ch in name):
        raise RuleError(f"{where}expected 'name: LHS => RHS'")
    if "<=>" in body:
        lhs_text, rhs_text = body.split("<=>", 1)
        bidirectional = True
    elif "=>" in body:
        lhs_text, rhs_text = body.split("=>", 1)
        bidirectional = False
    else:
        raise RuleError(f"{where}missing '=>' or '<=>' in rule {name}")
    try:
        lhs = parse(lhs_text, PATTERN_VARS)
        rhs = parse(rhs_text, PATTERN_VARS)
    except ParseError as exc:
        raise RuleError(f"{where}rule {name}: {exc}") from exc
    try:
        return Rule(name, lhs, rhs, bidirectional)
    except RuleError as exc:
        raise RuleError(f"{where}{exc}") from exc


def parse_rules(text: str) -> list[Rule]:
    rules: list[Rule] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        rule = parse_rule(line, lineno)
        if rule.name in seen:
            raise RuleError(f"line {lineno}: duplicate rule name {rule.name!r}")
        seen.add(rule.name)
        rules.append(rule)
    return rules


def load_rules(path: str | Path) -> list[Rule]:
    return parse_rules(Path(path).read_text(encoding="utf-8"))


def default_rules_text() -> str:
    return resources.files("forge").joinpath("data/default.rules").read_text(encoding="utf-8")


def default_rules() -> list[Rule]:
    return parse_rules(default_rules_text())


def rule_closure(rules: list[Rule]) -> list[Rule]:
    """Split bidirectional rules into two directed ones, ordered by (name, direction)."""
    out = []
    for r in rules:
        out.append(((r.name, 0), replace(r, bidirectional=False)))
        if r.bidirectional:
            out.append(((r.name, 1), Rule(f"{r.name}-rev", r.rhs, r.lhs, False, r.status)))
    out.sort(key=lambda item: item[0])
    return [r for _, r in out]


# -- validation ---------------------------------------------------------------

GRID = (0.0, 1.0, -1.0, 2.0, -2.0, 0.5, -0.5, math.pi, -math.pi, 1e-9, -1e-9, 1e9, -1e9)


@dataclass(frozen=True)
class Verdict:
    status: Status
    witness: dict[str, float] | None = None
    lhs_defined: bool | None = None
    rhs_defined: bool | None = None

    @property
    def unsound(self) -> bool:
        return self.status is Status.UNSOUND


def _random_real(rng: random.Random) -> float:
    if rng.random() < 0.5:
        return rng.uniform(-10.0, 10.0)
    return rng.choice((-1.0, 1.0)) * 10.0 ** rng.uniform(-12.0, 12.0)


def sample_points(names: list[str], samples: int, seed: int = 0):
    """The fixed grid crossed over all variables, then ``samples`` random tuples."""
    for combo in itertools.product(GRID, repeat=len(names)):
        yield dict(zip(names, combo))
    rng = random.Random(seed)
    for _ in range(samples):
        yield {n: _random_real(rng) for n in names}


def validate_rule(rule: Rule, table: DomainTable | None = None, samples: int = 1000, seed: int = 0) -> Verdict:
    """Search for a point where exactly one side of the rule is defined.

    An e-graph union is symmetric, so a rule whose right side is defined
    where its left side is not (``a * (1/a) => 1``) is as harmful as one that
    loses definedness (``a / b => 1 / (b / a)``).  Returns the first witness
    found; absence of one is evidence, not proof.
    """
    table = table or DomainTable()
    names = sorted(free_vars(rule.lhs) | free_vars(rule.rhs))
    for env in sample_points(names, samples, seed):
        left = is_defined(rule.lhs, env, table)
        right = is_defined(rule.rhs, env, table)
        if left is None or right is None:
            continue
        if left != right:
            return Verdict(Status.UNSOUND, env, left, right)
    return Verdict(Status.VALIDATED)


def validate_rules(rules: list[Rule], table: DomainTable | None = None, samples: int = 1000) -> list[tuple[Rule, Verdict]]:
    return [(r, validate_rule(r, table, samples)) for r in rules]
