"""Synthesis of range-reduction identities with e-graphs."""

from .expr import Expr, parse, to_sexpr
from .pipeline import Config, run_pipeline

__all__ = ["Config", "Expr", "parse", "run_pipeline", "to_sexpr"]
