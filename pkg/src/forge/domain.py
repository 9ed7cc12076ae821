"""Pointwise definedness of the grammar's operators and numeric evaluation.

Two backends are provided: plain floats (fast, used to screen rule
instantiations) and mpmath at a chosen precision (used to confirm and for
identity verification).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import mpmath

from .expr import Expr


class Undefined(Exception):
    """Raised when a term is evaluated outside its domain."""


class Indeterminate(Exception):
    """The backend could not decide (overflow, NaN); retry with another backend."""


def _is_integer(v) -> bool:
    try:
        return v == int(v)
    except (OverflowError, ValueError):
        return False


def _pow_invalid(args, eps):
    base, exponent = args
    if _is_integer(exponent):
        return exponent < 0 and abs(base) <= eps
    if exponent < 0:
        return base <= eps
    return base < eps


def _tan_invalid(args, eps):
    (a,) = args
    cos = mpmath.cos(a) if isinstance(a, mpmath.mpf) else math.cos(a)
    return abs(cos) <= eps


# Each predicate answers "is this point outside the domain?".  ``eps`` widens
# the boundary so high-precision evaluation treats near-singular points as
# undefined; eps = 0 gives the exact mathematical condition.
DEFAULT_PREDICATES: dict[str, Callable] = {
    "/": lambda a, eps: abs(a[1]) <= eps,
    "acos": lambda a, eps: abs(a[0]) > 1 - eps,
    "acosh": lambda a, eps: a[0] < 1 + eps,
    "asin": lambda a, eps: abs(a[0]) > 1 - eps,
    "log": lambda a, eps: a[0] <= eps,
    "log1p": lambda a, eps: a[0] <= -1 + eps,
    "sqrt": lambda a, eps: a[0] < eps,
    "atan2": lambda a, eps: abs(a[1]) <= eps,
    # not in the published table but partial all the same
    "tan": _tan_invalid,
    "pow": _pow_invalid,
}


@dataclass
class DomainTable:
    """Operator -> invalid-domain predicate; operators absent from the map are total."""

    predicates: dict[str, Callable] = field(default_factory=lambda: dict(DEFAULT_PREDICATES))

    def partial_ops(self) -> frozenset[str]:
        return frozenset(self.predicates)

    def invalid(self, op: str, args, eps=0) -> bool:
        pred = self.predicates.get(op)
        return bool(pred(args, eps)) if pred else False


class FloatBackend:
    name = "float"
    pi = math.pi

    @staticmethod
    def number(v):
        return float(v)

    def apply(self, op, args):
        try:
            v = _FLOAT_OPS[op](*args)
        except (OverflowError, ValueError, ZeroDivisionError) as exc:
            raise Indeterminate(op) from exc
        if isinstance(v, complex) or not math.isfinite(v):
            raise Indeterminate(op)
        return v


def _cbrt(v):
    return math.copysign(abs(v) ** (1.0 / 3.0), v)


def _fpow(a, b):
    if float(b).is_integer():
        return a ** int(b)
    return a ** b


_FLOAT_OPS = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": lambda a, b: a / b,
    "neg": lambda a: -a,
    "fabs": abs,
    "sqrt": math.sqrt,
    "cbrt": _cbrt,
    "pow": _fpow,
    "floor": lambda a: float(math.floor(a)),
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "asin": math.asin,
    "acos": math.acos,
    "atan": math.atan,
    "sinh": math.sinh,
    "cosh": math.cosh,
    "tanh": math.tanh,
    "acosh": math.acosh,
    "exp": math.exp,
    "log": math.log,
    "expm1": math.expm1,
    "log1p": math.log1p,
    "atan2": math.atan2,
}


class MPBackend:
    """mpmath evaluation; callers set the working precision with ``mpmath.workprec``."""

    name = "mpmath"

    @property
    def pi(self):
        return mpmath.pi()

    @staticmethod
    def number(v):
        return mpmath.mpf(v)

    def apply(self, op, args):
        v = _MP_OPS[op](*args)
        if not mpmath.isfinite(v):
            raise Indeterminate(op)
        return v


def _mp_cbrt(v):
    if v < 0:
        return -mpmath.cbrt(-v)
    return mpmath.cbrt(v)


def _mp_pow(a, b):
    if b == int(b):
        return a ** int(b)
    return a ** b


def _mp_asin(v):
    return mpmath.asin(max(-1, min(1, v)))


def _mp_acos(v):
    return mpmath.acos(max(-1, min(1, v)))


_MP_OPS = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": lambda a, b: a / b,
    "neg": lambda a: -a,
    "fabs": abs,
    "sqrt": mpmath.sqrt,
    "cbrt": _mp_cbrt,
    "pow": _mp_pow,
    "floor": mpmath.floor,
    "sin": mpmath.sin,
    "cos": mpmath.cos,
    "tan": mpmath.tan,
    "asin": _mp_asin,
    "acos": _mp_acos,
    "atan": mpmath.atan,
    "sinh": mpmath.sinh,
    "cosh": mpmath.cosh,
    "tanh": mpmath.tanh,
    "acosh": mpmath.acosh,
    "exp": mpmath.exp,
    "log": mpmath.log,
    "expm1": mpmath.expm1,
    "log1p": mpmath.log1p,
    "atan2": mpmath.atan2,
}

FLOAT = FloatBackend()
MP = MPBackend()


def evaluate(
    e: Expr,
    env: dict,
    backend=FLOAT,
    table: DomainTable | None = None,
    func: Callable | None = None,
    eps=0,
):
    """Evaluate ``e`` bottom-up.

    Raises ``Undefined`` on the first domain violation and ``Indeterminate``
    when the backend cannot represent an intermediate.  ``func`` interprets
    ``thefunc``; it may itself raise ``Undefined``.
    """
    table = table or _DEFAULT_TABLE
    return _eval(e, env, backend, table, func, eps)


def _eval(e, env, backend, table, func, eps):
    op = e.op
    if op == "const":
        v = e.value
        num = backend.number(v.q.numerator) / backend.number(v.q.denominator)
        return num * backend.pi if v.d else num
    if op == "var":
        return env[e.value]
    args = [_eval(a, env, backend, table, func, eps) for a in e.args]
    if op == "thefunc":
        if func is None:
            raise ValueError("thefunc has no interpretation")
        return func(args[0])
    if table.invalid(op, args, eps):
        raise Undefined(op)
    if op == "floor" and eps:
        # near an integer the floor is numerically meaningless
        frac = args[0] - mpmath.floor(args[0])
        if frac <= eps or 1 - frac <= eps:
            raise Undefined(op)
    return backend.apply(op, args)


def is_defined(e: Expr, env: dict, table: DomainTable | None = None) -> bool | None:
    """Exact-condition definedness at a point; None when undecidable numerically.

    Floats screen first; anything they cannot settle (overflow, underflow to
    a boundary) is re-evaluated with mpmath at 113 bits.
    """
    try:
        evaluate(e, env, FLOAT, table)
        return True
    except Undefined:
        pass
    except Indeterminate:
        pass
    with mpmath.workprec(113):
        menv = {k: mpmath.mpf(v) for k, v in env.items()}
        try:
            evaluate(e, menv, MP, table)
            return True
        except Undefined:
            return False
        except (Indeterminate, ValueError, ZeroDivisionError):
            return None


_DEFAULT_TABLE = DomainTable()
