"""Command-line entry point: ``forge run --benchmarks FILE --rules FILE ...``."""

from __future__ import annotations

import argparse
import configparser
import logging
import sys
from dataclasses import fields
from pathlib import Path

from .egraph import RunBudget
from .expr import ParseError
from .pipeline import Config, format_summary, load_benchmarks, run_pipeline, write_outputs
from .rules import RuleError, default_rules, load_rules

# option name -> Config field; every option can also be set in the config file
OPTIONS = {
    "iters": int,
    "max_nodes": int,
    "timeout": float,
    "cap": int,
    "jobs": int,
    "emit_lp": bool,
    "dump_egraphs": bool,
    "defs_before_cover": bool,
    "verify_points": int,
    "validate_samples": int,
}
PATHS = ("benchmarks", "rules", "out")


def read_config_file(path: str | Path) -> dict:
    """``key = value`` lines (``#`` or ``;`` comments); keys may use - or _."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    text = Path(path).read_text(encoding="utf-8")
    parser.read_string("[forge]\n" + text, source=str(path))
    out = {}
    for key, raw in parser["forge"].items():
        name = key.replace("-", "_")
        value = raw.strip().strip('"').strip("'")
        if name in PATHS:
            out[name] = value
        elif name in OPTIONS:
            kind = OPTIONS[name]
            if kind is bool:
                out[name] = parser["forge"].getboolean(key)
            else:
                out[name] = kind(value)
        else:
            raise ValueError(f"{path}: unknown setting {key!r}")
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="forge", description="Synthesize range-reduction identities for real functions.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the full pipeline over a benchmark file")
    run.add_argument("--benchmarks", metavar="FILE", help="one s-expression in x per line")
    run.add_argument("--rules", metavar="FILE", help="rule file (default: the shipped rule set)")
    run.add_argument("--out", metavar="DIR", help="output directory (default: forge-out)")
    run.add_argument("--config", metavar="FILE", help="key = value settings; command-line flags win")
    run.add_argument("--iters", type=int, help="iterations per saturation run (default 10)")
    run.add_argument("--max-nodes", type=int, help="e-node limit per run (default 100000)")
    run.add_argument("--timeout", type=float, help="seconds per run (default 30)")
    run.add_argument("--cap", type=int, help="candidates kept per benchmark (default 512)")
    run.add_argument("--jobs", type=int, help="benchmarks processed in parallel (default 1)")
    run.add_argument("--emit-lp", action="store_true", default=None, help="write each core problem in LP format")
    run.add_argument("--dump-egraphs", action="store_true", default=None, help="write e-graphs as DOT files")
    run.add_argument(
        "--defs-before-cover", action="store_true", default=None,
        help="drop definitional identities before core minimization",
    )
    run.add_argument("--verify-points", type=int, help="sample points per verification (default 256)")
    run.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        settings = read_config_file(args.config) if args.config else {}
    except (OSError, ValueError, configparser.Error) as exc:
        print(f"forge: config: {exc}", file=sys.stderr)
        return 2
    for name in list(OPTIONS) + list(PATHS):
        value = getattr(args, name, None)
        if value is not None:
            settings[name] = value
    if "benchmarks" not in settings:
        print("forge: --benchmarks is required", file=sys.stderr)
        return 2
    config = Config(**{f.name: settings[f.name] for f in fields(Config) if f.name in settings})
    try:
        RunBudget(config.iters, config.max_nodes, config.timeout)
        benchmarks = load_benchmarks(settings["benchmarks"])
        rules = load_rules(settings["rules"]) if "rules" in settings else default_rules()
    except (OSError, ParseError, RuleError, ValueError) as exc:
        print(f"forge: {exc}", file=sys.stderr)
        return 2
    report, results, code = run_pipeline(benchmarks, rules, config)
    write_outputs(settings.get("out", "forge-out"), report, results)
    sys.stdout.write(format_summary(report))
    return code


if __name__ == "__main__":
    sys.exit(main())
