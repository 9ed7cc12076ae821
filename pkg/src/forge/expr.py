"""Expression terms over the single-variable real-function grammar.

Terms are immutable trees.  Constants are exact values ``q * PI**d`` with a
rational ``q`` and ``d`` in {0, 1}; everything else is an operator node, a
variable, or a call to the uninterpreted ``thefunc`` symbol.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator

UNARY_OPS = frozenset(
    {
        "neg", "fabs", "sqrt", "cbrt", "floor",
        "sin", "cos", "tan", "asin", "acos", "atan",
        "sinh", "cosh", "tanh", "acosh",
        "exp", "log", "expm1", "log1p",
        "thefunc",
    }
)
BINARY_OPS = frozenset({"+", "-", "*", "/", "pow", "atan2"})
OPERATORS = UNARY_OPS | BINARY_OPS

# constant/var carry a payload instead of children
LEAF_OPS = frozenset({"const", "var"})


class ParseError(ValueError):
    def __init__(self, message: str, pos: int | None = None):
        self.pos = pos
        if pos is not None:
            message = f"{message} (at offset {pos})"
        super().__init__(message)


@dataclass(frozen=True, order=True)
class RationalPi:
    """The exact real ``q * PI**d``."""

    q: Fraction
    d: int = 0

    def __post_init__(self):
        if self.d not in (0, 1):
            raise ValueError("pi-degree must be 0 or 1")
        if not isinstance(self.q, Fraction):
            object.__setattr__(self, "q", Fraction(self.q))
        if self.q == 0 and self.d:
            object.__setattr__(self, "d", 0)

    @property
    def is_zero(self) -> bool:
        return self.q == 0

    def __neg__(self) -> RationalPi:
        return RationalPi(-self.q, self.d)

    def add(self, other: RationalPi) -> RationalPi | None:
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        if self.d != other.d:
            return None
        return RationalPi(self.q + other.q, self.d)

    def sub(self, other: RationalPi) -> RationalPi | None:
        return self.add(-other)

    def mul(self, other: RationalPi) -> RationalPi | None:
        if self.is_zero or other.is_zero:
            return ZERO
        if self.d + other.d > 1:
            return None
        return RationalPi(self.q * other.q, self.d + other.d)

    def div(self, other: RationalPi) -> RationalPi | None:
        if other.is_zero:
            return None
        if self.is_zero:
            return ZERO
        if other.d > self.d:
            return None
        return RationalPi(self.q / other.q, self.d - other.d)

    def to_float(self) -> float:
        import math

        return float(self.q) * (math.pi if self.d else 1.0)

    def __str__(self) -> str:
        if self.d == 0:
            return _fraction_text(self.q)
        if self.q == 1:
            return "PI"
        return f"(* {_fraction_text(self.q)} PI)"


ZERO = RationalPi(Fraction(0))
ONE = RationalPi(Fraction(1))
PI = RationalPi(Fraction(1), 1)


def _fraction_text(q: Fraction) -> str:
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True)
class Expr:
    op: str
    args: tuple[Expr, ...] = ()
    # RationalPi for "const", variable name for "var"
    value: RationalPi | str | None = None

    def __post_init__(self):
        if self.op in LEAF_OPS:
            if self.args:
                raise ValueError(f"{self.op} node takes no children")
        elif self.op in UNARY_OPS:
            if len(self.args) != 1:
                raise ValueError(f"{self.op} expects 1 argument, got {len(self.args)}")
        elif self.op in BINARY_OPS:
            if len(self.args) != 2:
                raise ValueError(f"{self.op} expects 2 arguments, got {len(self.args)}")
        else:
            raise ValueError(f"unknown operator {self.op!r}")

    def __str__(self) -> str:
        return to_sexpr(self)

    def __repr__(self) -> str:
        return f"Expr({to_sexpr(self)})"

    @property
    def is_const(self) -> bool:
        return self.op == "const"

    def walk(self) -> Iterator[Expr]:
        yield self
        for a in self.args:
            yield from a.walk()

    def size(self) -> int:
        return 1 + sum(a.size() for a in self.args)

    def depth(self) -> int:
        return 1 + max((a.depth() for a in self.args), default=0)


def const(value) -> Expr:
    if not isinstance(value, RationalPi):
        value = RationalPi(Fraction(value))
    return Expr("const", (), value)


def var(name: str = "x") -> Expr:
    return Expr("var", (), name)


def app(op: str, *args: Expr) -> Expr:
    return Expr(op, tuple(args))


X = var("x")
PI_EXPR = Expr("const", (), PI)


def thefunc(arg: Expr) -> Expr:
    return Expr("thefunc", (arg,))


def count_op(e: Expr, op: str) -> int:
    return sum(1 for n in e.walk() if n.op == op)


def free_vars(e: Expr) -> set[str]:
    return {n.value for n in e.walk() if n.op == "var"}


def substitute(e: Expr, env: dict[str, Expr]) -> Expr:
    """Replace variables by the terms bound in ``env``."""
    if e.op == "var":
        return env.get(e.value, e)
    if not e.args:
        return e
    return Expr(e.op, tuple(substitute(a, env) for a in e.args))


def transform(e: Expr, fn: Callable[[Expr], Expr]) -> Expr:
    """Bottom-up rebuild, applying ``fn`` to every rebuilt node."""
    if e.args:
        e = Expr(e.op, tuple(transform(a, fn) for a in e.args), e.value)
    return fn(e)


# -- printing ---------------------------------------------------------------

_PRINT_NAMES = {"neg": "-"}


def to_sexpr(e: Expr) -> str:
    if e.op == "const":
        return str(e.value)
    if e.op == "var":
        return e.value
    name = _PRINT_NAMES.get(e.op, e.op)
    return "(" + " ".join([name] + [to_sexpr(a) for a in e.args]) + ")"


def print_size(e: Expr) -> int:
    """Number of atoms in the printed form; ``(* 2 PI)`` counts three, ``PI`` one."""
    if e.op == "const":
        return 3 if e.value.d and e.value.q != 1 else 1
    return 1 + sum(print_size(a) for a in e.args)


def order_key(e: Expr) -> tuple[int, str]:
    """Deterministic simplest-first order: printed size, then text."""
    return print_size(e), to_sexpr(e)


# -- parsing ----------------------------------------------------------------


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch.isspace():
            i += 1
        elif ch in "()":
            tokens.append((ch, i))
            i += 1
        else:
            start = i
            while i < n and not text[i].isspace() and text[i] not in "();":
                i += 1
            tokens.append((text[start:i], start))
    return tokens


def _literal(tok: str) -> Fraction | None:
    if not tok or not (tok[0].isdigit() or tok[0] in "+-." and len(tok) > 1):
        return None
    try:
        return Fraction(tok)
    except (ValueError, ZeroDivisionError):
        return None


def parse(text: str, variables: tuple[str, ...] = ("x",)) -> Expr:
    """Parse one s-expression.

    ``variables`` lists the symbols accepted as variables; benchmarks use
    ``x`` only, rule patterns use ``a b c``.
    """
    tokens = _tokenize(text)
    if not tokens:
        raise ParseError("empty expression", 0)
    expr, pos = _parse_at(tokens, 0, variables, text)
    if pos != len(tokens):
        raise ParseError("trailing input", tokens[pos][1])
    return expr


def _parse_at(tokens, pos, variables, text) -> tuple[Expr, int]:
    if pos >= len(tokens):
        raise ParseError("unexpected end of input", len(text))
    tok, off = tokens[pos]
    if tok == ")":
        raise ParseError("unexpected ')'", off)
    if tok != "(":
        return _atom(tok, off, variables), pos + 1

    if pos + 1 >= len(tokens):
        raise ParseError("unclosed '('", off)
    head, head_off = tokens[pos + 1]
    if head in "()":
        raise ParseError("expected operator", head_off)
    pos += 2
    args = []
    while True:
        if pos >= len(tokens):
            raise ParseError("unclosed '('", off)
        if tokens[pos][0] == ")":
            pos += 1
            break
        arg, pos = _parse_at(tokens, pos, variables, text)
        args.append(arg)

    if head == "-" and len(args) == 1:
        head = "neg"
    if head not in OPERATORS or head == "neg" and len(args) != 1:
        raise ParseError(f"unknown operator {head!r}", head_off)
    expected = 1 if head in UNARY_OPS else 2
    if len(args) != expected:
        raise ParseError(
            f"operator {head!r} expects {expected} argument(s), got {len(args)}", head_off
        )
    # "(* q PI)" with a literal q is how printed pi-multiples come back in
    if (
        head == "*"
        and args[0].op == "const"
        and args[0].value.d == 0
        and args[1] == PI_EXPR
        and tokens[pos - 2][0] == "PI"
    ):
        return Expr("const", (), RationalPi(args[0].value.q, 1)), pos
    return Expr(head, tuple(args)), pos


def _atom(tok: str, off: int, variables) -> Expr:
    if tok == "PI":
        return PI_EXPR
    q = _literal(tok)
    if q is not None:
        return const(q)
    if tok in variables:
        return var(tok)
    if tok in OPERATORS or tok == "-":
        raise ParseError(f"operator {tok!r} used as a value", off)
    raise ParseError(f"unknown symbol {tok!r}", off)


def normalize(e: Expr) -> Expr:
    """The form ``parse(to_sexpr(e))`` yields: literal ``q * PI`` products become constants."""

    def fix(n: Expr) -> Expr:
        if (
            n.op == "*"
            and n.args[0].op == "const"
            and n.args[0].value.d == 0
            and n.args[1] == PI_EXPR
        ):
            return Expr("const", (), RationalPi(n.args[0].value.q, 1))
        return n

    return transform(e, fix)


# -- constant folding -------------------------------------------------------


def fold_binary(op: str, a: RationalPi, b: RationalPi) -> RationalPi | None:
    if op == "+":
        return a.add(b)
    if op == "-":
        return a.sub(b)
    if op == "*":
        return a.mul(b)
    if op == "/":
        return a.div(b)
    return None


FOLDABLE = frozenset({"+", "-", "*", "/", "neg"})


def fold_node(op: str, values: list[RationalPi]) -> RationalPi | None:
    """Exact value of ``op`` applied to constant children, or None when not representable."""
    if op == "neg":
        return -values[0]
    if op in FOLDABLE:
        return fold_binary(op, values[0], values[1])
    return None


def fold_constants(e: Expr) -> Expr:
    """Collapse every foldable all-constant subtree into one constant node.

    Division by an exact zero is left in place, so an undefined subtree is
    never turned into a defined constant.
    """

    def fold(n: Expr) -> Expr:
        if n.op in FOLDABLE and all(a.op == "const" for a in n.args):
            v = fold_node(n.op, [a.value for a in n.args])
            if v is not None:
                return Expr("const", (), v)
        return n

    return transform(e, fold)
