"""Whole-corpus pipeline: synthesize, deduplicate, cover, filter, verify, report."""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .cover import discover_facts, emit_lp, minimize_core
from .dedup import dedup
from .definitional import is_definitional_direct, is_definitional_equation, verify_identity
from .egraph import RunBudget, RunReport, SoundnessError
from .expr import Expr, ParseError, parse
from .rules import Rule, Status, default_rules, rule_closure, validate_rule
from .synth import COMPOSITE, CORE, DEFINITIONAL, DUPLICATE, Identity, synthesize

log = logging.getLogger(__name__)


@dataclass
class Config:
    iters: int = 10
    max_nodes: int = 100_000
    timeout: float = 30.0
    cap: int = 512
    jobs: int = 1
    emit_lp: bool = False
    dump_egraphs: bool = False
    defs_before_cover: bool = False
    verify_points: int = 256
    validate_samples: int = 200

    @property
    def budget(self) -> RunBudget:
        return RunBudget(self.iters, self.max_nodes, self.timeout)

    def result_settings(self) -> dict:
        """Settings that can change results (worker count and output switches cannot)."""
        return {
            "iters": self.iters,
            "max_nodes": self.max_nodes,
            "timeout": self.timeout,
            "cap": self.cap,
            "defs_before_cover": self.defs_before_cover,
            "verify_points": self.verify_points,
        }


def load_benchmarks(path: str | Path) -> list[Expr]:
    """One s-expression in x per line; ``;`` starts a comment."""
    out = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        try:
            out.append(parse(line))
        except ParseError as exc:
            raise ParseError(f"{path}, line {lineno}: {exc}") from exc
    return out


def prepare_rules(rules: list[Rule], samples: int = 200) -> tuple[list[Rule], list[dict]]:
    """Directed, validated rules ready for the engine, plus a note per dropped rule."""
    kept, dropped = [], []
    for rule in rule_closure(rules):
        if rule.status is Status.UNSOUND:
            dropped.append({"rule": str(rule), "witness": None})
            continue
        verdict = validate_rule(rule, samples=samples)
        if verdict.unsound:
            dropped.append({"rule": str(rule), "witness": verdict.witness})
            log.warning("dropping rule %s: one side undefined at %s", rule.name, verdict.witness)
        else:
            kept.append(rule)
    return kept, dropped


def _run_info(r: RunReport) -> dict:
    return {"iterations": r.iterations, "stop": r.stop_reason, "nodes": r.nodes, "exhausted": r.exhausted}


def _describe(ident: Identity) -> dict:
    out = {"rhs": ident.text}
    parts = ident.decomposition
    if parts is not None:
        out["s"], out["t"] = str(parts[0]), str(parts[1])
    return out


@dataclass
class BenchmarkResult:
    report: dict
    timings: dict[str, float] = field(default_factory=dict)
    lp: str | None = None
    dots: dict[str, str] = field(default_factory=dict)


def process_benchmark(f: Expr, rules: list[Rule], config: Config) -> BenchmarkResult:
    """Run every phase on one function; ``rules`` must already be directed and validated."""
    budget = config.budget
    timings: dict[str, float] = {}
    report: dict = {"input": str(f), "error": None}
    result = BenchmarkResult(report, timings)
    clock = time.monotonic()

    def lap(name):
        nonlocal clock
        now = time.monotonic()
        timings[name] = round(now - clock, 3)
        clock = now

    try:
        synth = synthesize(f, rules, budget, config.cap, keep_graph=config.dump_egraphs)
        lap("synthesize")
        candidates = synth.candidates
        deduped = dedup(candidates, rules, budget)
        lap("dedup")
        unique = deduped.representatives
        trivial = unique[deduped.trivial_group]
        pool = [u for u in unique if not u.is_trivial]

        definitional: list[Identity] = []
        def_runs = []

        def drop_definitional(idents):
            keep = []
            for ident in idents:
                direct = is_definitional_direct(ident, rules, budget)
                hit = direct.definitional
                runs = [_run_info(direct.run)]
                if not hit:
                    eq = is_definitional_equation(ident, rules, budget)
                    hit = eq.definitional
                    runs.append(_run_info(eq.run))
                def_runs.append({"rhs": ident.text, "runs": runs})
                if hit:
                    ident.classification = DEFINITIONAL
                    definitional.append(ident)
                else:
                    keep.append(ident)
            return keep

        if config.defs_before_cover:
            pool = drop_definitional(pool)
            lap("definitional")

        facts = discover_facts(pool, rules, budget, keep_graph=config.dump_egraphs)
        late = sorted(facts.duplicates)
        for k in late:
            pool[k].classification = DUPLICATE
        live = [k for k in range(len(pool)) if k not in facts.duplicates]
        renumber = {old: new for new, old in enumerate(live)}
        live_facts = [(renumber[x.i], renumber[x.j], renumber[x.k]) for x in facts.facts]
        solution = minimize_core(len(live), live_facts)
        covered = [pool[live[k]] for k in solution.core]
        for k, how in solution.certificate.items():
            pool[live[k]].classification = CORE if not how else COMPOSITE
        if config.emit_lp:
            result.lp = emit_lp(len(live), live_facts, name=str(f))
        lap("cover")

        after_cover = len(covered)
        core = covered
        if not config.defs_before_cover:
            core = drop_definitional(covered)
            lap("definitional")

        entries = []
        failures = 0
        for ident in core:
            check = verify_identity(f, ident, points=config.verify_points)
            entry = _describe(ident)
            entry["verification"] = "pass" if check.passed else "fail"
            if not check.passed:
                failures += 1
                entry["witness"] = check.witness
                entry["detail"] = check.detail
            entries.append(entry)
        lap("verify")

        certificate = {}
        for k, how in solution.certificate.items():
            if how:
                certificate[pool[live[k]].text] = [pool[live[p]].text for p in how]

        report.update(
            counts={
                "raw_extractions": synth.raw,
                "thefunc_free_discarded": synth.discarded,
                "candidates": len(candidates),
                "after_dedup": len(unique),
                "after_cover": after_cover,
                "trivial_present": any(c.is_trivial for c in candidates),
                "definitional_removed": len(definitional),
                "final_core": len(core),
            },
            core=entries,
            definitional=[_describe(d) for d in definitional],
            composite=[p.text for p in pool if p.classification == COMPOSITE],
            derivations=certificate,
            late_duplicates=[pool[k].text for k in late],
            trivial=trivial.text,
            facts=len(facts.facts),
            trivial_collapses=len(facts.collapses),
            verification_failures=failures,
            flags={
                "capped": synth.capped,
                "synthesize": _run_info(synth.run),
                "dedup": _run_info(deduped.run),
                "cover": _run_info(facts.run),
                "definitional": def_runs,
            },
        )
        if config.dump_egraphs:
            result.dots["synth"] = synth.egraph.to_dot()
            result.dots["cover"] = facts.egraph.to_dot()
    except SoundnessError as exc:
        report["error"] = f"soundness: {exc}"
    return result


def _worker(args):
    f, rules, config = args
    return process_benchmark(f, rules, config)


def run_pipeline(
    benchmarks: list[Expr],
    rules: list[Rule] | None = None,
    config: Config | None = None,
) -> tuple[dict, list[BenchmarkResult], int]:
    """Process every benchmark and assemble the corpus report.

    Results are kept in input order whatever the worker count.  The exit
    code is 1 if any benchmark tripped the soundness sentinel or had a core
    identity fail verification, else 0.
    """
    config = config or Config()
    rules = default_rules() if rules is None else rules
    directed, dropped = prepare_rules(rules, config.validate_samples)
    jobs = [(f, directed, config) for f in benchmarks]
    if config.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(_worker, jobs))
    else:
        results = [_worker(j) for j in jobs]

    reports = [r.report for r in results]
    ok = [r for r in reports if r["error"] is None]
    candidates = sum(r["counts"]["candidates"] for r in ok)
    after_dedup = sum(r["counts"]["after_dedup"] for r in ok)
    totals = {
        "benchmarks": len(reports),
        "errors": len(reports) - len(ok),
        "candidates": candidates,
        "after_dedup": after_dedup,
        "duplicate_fraction": round(1 - after_dedup / candidates, 6) if candidates else 0.0,
        "core": sum(r["counts"]["final_core"] for r in ok),
        "definitional": sum(r["counts"]["definitional_removed"] for r in ok),
        "verification_failures": sum(r["verification_failures"] for r in ok),
    }
    report = {
        "settings": config.result_settings(),
        "rules": {"directed": len(directed), "dropped": dropped},
        "totals": totals,
        "benchmarks": reports,
    }
    failed = totals["errors"] or totals["verification_failures"]
    return report, results, 1 if failed else 0


def emit_histogram(reports: list[dict]) -> list[tuple[int, int, int]]:
    """Rows (n, benchmarks with n useful identities, benchmarks with n definitional ones)."""
    useful = [r["counts"]["final_core"] for r in reports if r.get("error") is None]
    defs = [r["counts"]["definitional_removed"] for r in reports if r.get("error") is None]
    top = max(useful + defs, default=0)
    return [(n, useful.count(n), defs.count(n)) for n in range(top + 1)]


def format_summary(report: dict, results: list[BenchmarkResult] | None = None) -> str:
    lines = []
    for n, b in enumerate(report["benchmarks"]):
        lines.append(f"[{n}] f(x) = {b['input']}")
        if b["error"]:
            lines.append(f"    ERROR {b['error']}")
            lines.append("")
            continue
        c = b["counts"]
        lines.append(
            "    extracted {raw_extractions}  thefunc-free {thefunc_free_discarded}  "
            "candidates {candidates}  unique {after_dedup}  cover {after_cover}  "
            "definitional {definitional_removed}  core {final_core}".format(**c)
        )
        width = max((len(e["rhs"]) for e in b["core"]), default=0)
        for e in b["core"]:
            tail = f"s(y) = {e['s']}, t(x) = {e['t']}" if "s" in e else "(several calls)"
            lines.append(f"    {e['rhs']:<{width}}  {tail}  [{e['verification']}]")
        for d in b["definitional"]:
            lines.append(f"    definitional: {d['rhs']}")
        if results is not None:
            t = results[n].timings
            lines.append("    time " + "  ".join(f"{k} {v:.2f}s" for k, v in t.items()))
        lines.append("")
    t = report["totals"]
    lines.append(
        f"{t['benchmarks']} benchmarks, {t['candidates']} candidates, {t['after_dedup']} unique "
        f"({100 * t['duplicate_fraction']:.1f}% removed as duplicates), "
        f"{t['core']} core, {t['definitional']} definitional, "
        f"{t['verification_failures']} verification failures, {t['errors']} errors"
    )
    return "\n".join(lines) + "\n"


def write_outputs(out: str | Path, report: dict, results: list[BenchmarkResult]) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    (out / "summary.txt").write_text(format_summary(report, results), encoding="utf-8")
    rows = emit_histogram(report["benchmarks"])
    text = "count,useful,definitional\n" + "".join(f"{a},{b},{c}\n" for a, b, c in rows)
    (out / "histogram.csv").write_text(text, encoding="utf-8")
    for n, r in enumerate(results):
        if r.lp is not None:
            (out / f"bench{n:02d}.lp").write_text(r.lp, encoding="utf-8")
        for phase, dot in r.dots.items():
            (out / f"bench{n:02d}-{phase}.dot").write_text(dot, encoding="utf-8")

