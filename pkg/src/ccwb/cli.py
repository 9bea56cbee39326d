"""``ccwb`` command-line front end."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal, localcontext
from fractions import Fraction
from typing import Sequence

from . import __version__
from .archmodel import ARCH_IDS, FAMILY, Architecture, Cost, get_architecture, resolve_cost_tables
from .convention import (
    CallingConvention,
    assign,
    convention_to_dict,
    convention_to_json,
    print_convention,
    resolve_convention,
)
from .costing import DEFAULT_WEIGHTS, ScoreWeights, corpus_breakdown, score, score_number
from .errors import CcwbError, ReportError
from .search import Candidate, default_space, load_space, search_with_overrides
from .sigmodel import load_corpus, parse_signature

FORMATS = ("table", "json", "csv")


# --- output helpers -------------------------------------------------------------

def render_table(header: Sequence[str], rows: Sequence[Sequence], right: set[int] | None = None) -> str:
    cells = [[str(c) for c in header]] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    right = right if right is not None else set()
    out = []
    for r in cells:
        parts = [c.rjust(w) if i in right else c.ljust(w) for i, (c, w) in enumerate(zip(r, widths))]
        out.append("  ".join(parts).rstrip())
    return "\n".join(out) + "\n"


def render_csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def render_json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def fmt_score(value: Fraction) -> str:
    return f"{float(value):.2f}"


def pct(value: int, base: int) -> Decimal:
    """Percentage change from ``base``, one decimal place, half-even."""
    if base == 0:
        if value == 0:
            return Decimal("0.0")
        raise ReportError("percentage change from a zero baseline is undefined")
    ratio = Fraction(value - base, base) * 100
    with localcontext() as ctx:
        ctx.prec = 60
        d = Decimal(ratio.numerator) / Decimal(ratio.denominator)
        d = d.quantize(Decimal("0.1"), rounding=ROUND_HALF_EVEN)
    return d + 0  # normalizes -0.0 to 0.0


def fmt_pct(d: Decimal) -> str:
    return f"{d:+.1f}%" if d != 0 else "0.0%"


# --- comparison report -------------------------------------------------------

@dataclass(frozen=True)
class ComparisonRow:
    label: str
    bytes: int
    cycles: int
    bytes_delta_pct: Decimal
    cycles_delta_pct: Decimal

    def as_dict(self) -> dict:
        return {
            "label": self.label,
            "bytes": self.bytes,
            "cycles": self.cycles,
            "bytes_delta_pct": float(self.bytes_delta_pct),
            "cycles_delta_pct": float(self.cycles_delta_pct),
        }


COMPARISON_COLUMNS = ("label", "bytes", "cycles", "bytes_delta_pct", "cycles_delta_pct")


def comparison_rows(results: Sequence[tuple[str, Cost]]) -> list[ComparisonRow]:
    if len(results) < 2:
        raise ReportError("a comparison needs at least two results")
    base = results[0][1]
    return [
        ComparisonRow(label, c.bytes, c.cycles, pct(c.bytes, base.bytes), pct(c.cycles, base.cycles))
        for label, c in results
    ]


def emit_comparison_report(results: Sequence[tuple[str, Cost]], fmt: str = "table") -> str:
    """Percentage deltas of every result relative to the first one."""
    rows = comparison_rows(results)
    if fmt == "json":
        return render_json([r.as_dict() for r in rows])
    if fmt == "csv":
        return render_csv(COMPARISON_COLUMNS, [
            (r.label, r.bytes, r.cycles, f"{r.bytes_delta_pct:.1f}", f"{r.cycles_delta_pct:.1f}") for r in rows
        ])
    return render_table(
        COMPARISON_COLUMNS,
        [(r.label, r.bytes, r.cycles, fmt_pct(r.bytes_delta_pct), fmt_pct(r.cycles_delta_pct)) for r in rows],
        right={1, 2, 3, 4},
    )


# --- shared plumbing ----------------------------------------------------------

def _weights(text: str) -> ScoreWeights:
    try:
        return ScoreWeights.parse(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"invalid weights {text!r}: {exc}") from None


def _target(conv: CallingConvention, arch_id: str | None) -> str:
    # a convention serves every variant of its register family (z80-new on z180, ...)
    if arch_id is None:
        return conv.arch
    if FAMILY[arch_id] != FAMILY[conv.arch]:
        raise CcwbError(f"convention {conv.name} targets {conv.arch}, not {arch_id}")
    return arch_id


def _setup(conv_ref: str, arch_id: str | None, tables_path: str | None) -> tuple[CallingConvention, Architecture]:
    conv = resolve_convention(conv_ref)
    target = _target(conv, arch_id)
    if target != conv.arch:
        conv = conv.replace(arch=target)
    tables = resolve_cost_tables(target, tables_path)
    return conv, get_architecture(target, conv.exclude_reserved, tables)


def convention_summary(conv: CallingConvention) -> str:
    ret = "/".join(" ".join(r) if r else "mem" for _, r in conv.ret_reg)
    args = " ".join(
        f"{w}=" + (",".join(" ".join(e) for e in entries) if entries else "-") for w, entries in conv.arg_prefs
    )
    return f"ret {ret}; args {args}; cleanup {conv.cleanup.mode}; slot {conv.stack_slot_width_for_8bit}"


def _loc_text(loc) -> str:
    return str(loc) if loc is not None else "none"


# --- verbs -----------------------------------------------------------------------

def cmd_arch_list(args, out) -> int:
    rows = []
    for aid in ARCH_IDS:
        arch = get_architecture(aid, args.exclude_reserved)
        rows.append((
            aid,
            arch.family,
            " ".join(arch.register_names),
            " ".join(arch.allocatable_of_width(16)),
            arch.push_granularity,
        ))
    header = ("id", "family", "registers", "allocatable_16bit", "push_granularity")
    if args.format == "json":
        out.write(render_json([dict(zip(header, r)) for r in rows]))
    elif args.format == "csv":
        out.write(render_csv(header, rows))
    else:
        out.write(render_table(header, rows))
    return 0


def cmd_conv_show(args, out) -> int:
    conv = resolve_convention(args.convention)
    if args.format == "json":
        out.write(convention_to_json(conv))
    elif args.format == "csv":
        d = convention_to_dict(conv)
        rows = [(k, json.dumps(v)) for k, v in d.items()]
        out.write(render_csv(("field", "value"), rows))
    else:
        out.write(print_convention(conv))
        if conv.callee_cleanup_possible:
            out.write("# note: callee cleanup may prevent some tail calls (not costed)\n")
    return 0


def cmd_assign(args, out) -> int:
    conv, arch = _setup(args.conv, args.arch, args.cost_tables)
    records = []
    for text in args.signatures:
        sig = parse_signature(text)
        plan = assign(conv, sig, arch)
        records.append((sig, plan))
    if args.format == "json":
        out.write(render_json([
            {
                "signature": str(sig),
                "params": [_loc_text(loc) for loc in plan.param_locs],
                "return": _loc_text(plan.return_loc),
                "cleanup": plan.cleanup_side,
                "stack_arg_bytes": plan.stack_arg_bytes,
            }
            for sig, plan in records
        ]))
    elif args.format == "csv":
        out.write(render_csv(
            ("signature", "params", "return", "cleanup", "stack_arg_bytes"),
            [(str(s), " ".join(_loc_text(l) for l in p.param_locs), _loc_text(p.return_loc), p.cleanup_side,
              p.stack_arg_bytes) for s, p in records],
        ))
    else:
        for sig, plan in records:
            prefix = f"{sig}: " if len(records) > 1 else ""
            out.write(prefix + plan.describe() + "\n")
    return 0


EVAL_COLUMNS = ("signature", "call_weight", "def_weight", "call_bytes", "call_cycles", "def_bytes", "def_cycles",
                "bytes", "cycles", "score")


def cmd_eval(args, out) -> int:
    conv, arch = _setup(args.conv, args.arch, args.cost_tables)
    corpus = load_corpus(args.corpus)
    weights = args.weights
    rows = []
    total = Cost()
    for (sig, sc, weighted), entry in zip(corpus_breakdown(conv, corpus, arch), corpus.entries):
        total = total + weighted
        rows.append({
            "signature": str(sig),
            "call_weight": entry.call_weight,
            "def_weight": entry.def_weight,
            "call_bytes": sc.call_site.bytes,
            "call_cycles": sc.call_site.cycles,
            "def_bytes": sc.definition.bytes,
            "def_cycles": sc.definition.cycles,
            "bytes": weighted.bytes,
            "cycles": weighted.cycles,
            "score": score(weighted, weights),
        })
    total_row = {"bytes": total.bytes, "cycles": total.cycles, "score": score(total, weights)}
    if args.format == "json":
        for r in rows:
            r["score"] = score_number(r["score"])
        total_row["score"] = score_number(total_row["score"])
        out.write(render_json({
            "convention": conv.name, "arch": arch.id, "weights": str(weights),
            "signatures": rows, "total": total_row,
        }))
    elif args.format == "csv":
        lines = [[r[c] if c != "score" else score_number(r[c]) for c in EVAL_COLUMNS] for r in rows]
        lines.append(["TOTAL", "", "", "", "", "", "", total.bytes, total.cycles, score_number(total_row["score"])])
        out.write(render_csv(EVAL_COLUMNS, lines))
    else:
        lines = [[r[c] if c != "score" else fmt_score(r[c]) for c in EVAL_COLUMNS] for r in rows]
        lines.append(["TOTAL", "", "", "", "", "", "", total.bytes, total.cycles, fmt_score(total_row["score"])])
        out.write(f"# {conv.name} on {arch.id}, weights {weights}\n")
        out.write(render_table(EVAL_COLUMNS, lines, right=set(range(1, len(EVAL_COLUMNS)))))
    return 0


PARETO_COLUMNS = ("index", "name", "bytes", "cycles", "score", "ret8", "ret16", "ret32", "args8", "args16",
                  "args32", "cleanup", "slot_width_8bit")


def _candidate_row(c: Candidate) -> list:
    conv = c.convention
    entries = lambda lst: ",".join(" ".join(e) for e in lst) or "-"  # noqa: E731
    ret = dict(conv.ret_reg)
    prefs = dict(conv.arg_prefs)
    return [
        c.index, conv.name, c.cost.bytes, c.cost.cycles, score_number(c.score),
        " ".join(ret[8]), " ".join(ret[16]), " ".join(ret[32]) or "mem",
        entries(prefs[8]), entries(prefs[16]), entries(prefs[32]),
        conv.cleanup.mode, conv.stack_slot_width_for_8bit,
    ]


def _candidate_json(c: Candidate, rank: int | None = None) -> dict:
    d = {"index": c.index, "name": c.convention.name, "bytes": c.cost.bytes, "cycles": c.cost.cycles,
         "score": score_number(c.score)}
    if rank is not None:
        d = {"rank": rank, **d}
    d["convention"] = convention_to_dict(c.convention)
    return d


def cmd_search(args, out) -> int:
    space = load_space(args.space) if args.space else default_space(args.arch)
    if space.arch != args.arch:
        if FAMILY[space.arch] != FAMILY[args.arch]:
            raise CcwbError(f"search space targets {space.arch}, not {args.arch}")
        space = space.with_arch(args.arch)
    tables = resolve_cost_tables(args.arch, args.cost_tables)
    arch = get_architecture(args.arch, space.exclude_reserved, tables)
    corpus = load_corpus(args.corpus)
    hot = [parse_signature(s) for s in (args.overrides or [])]
    res = search_with_overrides(space, corpus, hot, arch, tables, args.weights, args.workers)
    base = res.base
    top = base.ranked[: args.top]

    if args.pareto:
        with open(args.pareto, "w", encoding="utf-8", newline="") as fh:
            fh.write(render_csv(PARETO_COLUMNS, [_candidate_row(c) for c in base.pareto]))

    if args.format == "json":
        doc = {
            "arch": arch.id,
            "evaluated_count": base.evaluated_count,
            "weights": str(base.weights),
            "ranked": [_candidate_json(c, i) for i, c in enumerate(top, 1)],
            "pareto": [_candidate_json(c) for c in base.pareto],
            "overrides": [
                {
                    "signature": str(sig),
                    "winner": _candidate_json(o.winner),
                    "base_score": score_number(o.base_score),
                    "delta": score_number(o.delta),
                }
                for sig, o in res.overrides.items()
            ],
            "total_score": score_number(res.total),
        }
        out.write(render_json(doc))
    elif args.format == "csv":
        out.write(render_csv(("rank",) + PARETO_COLUMNS, [[i] + _candidate_row(c) for i, c in enumerate(top, 1)]))
    else:
        out.write(f"# {arch.id}: {base.evaluated_count} candidates, weights {base.weights}, "
                  f"pareto front {len(base.pareto)}\n")
        rows = [(i, c.convention.name, c.cost.bytes, c.cost.cycles, fmt_score(c.score),
                 convention_summary(c.convention)) for i, c in enumerate(top, 1)]
        out.write(render_table(("rank", "name", "bytes", "cycles", "score", "convention"), rows, right={0, 2, 3, 4}))
        if res.overrides:
            out.write("\n# per-type overrides\n")
            orows = [(str(sig), o.winner.convention.name, fmt_score(o.base_score), fmt_score(o.winner.score),
                      fmt_score(o.delta), convention_summary(o.winner.convention))
                     for sig, o in res.overrides.items()]
            out.write(render_table(("signature", "winner", "base_score", "score", "delta", "convention"), orows,
                                   right={2, 3, 4}))
            out.write(f"total score {fmt_score(res.base_total)} -> {fmt_score(res.total)}\n")
    return 0


def cmd_compare(args, out) -> int:
    if len(args.conventions) < 2:
        raise ReportError("compare needs at least two conventions")
    corpus = load_corpus(args.corpus)
    per_conv = []
    for ref in args.conventions:
        conv, arch = _setup(ref, args.arch, args.cost_tables)
        per_conv.append((conv.name, corpus_breakdown(conv, corpus, arch)))
    totals = [(name, sum((row[2] for row in rows), Cost())) for name, rows in per_conv]

    if args.format == "csv":
        out.write(emit_comparison_report(totals, "csv"))
        return 0
    sig_reports = []
    for i, entry in enumerate(corpus.entries):
        results = [(name, rows[i][2]) for name, rows in per_conv]
        sig_reports.append((str(entry.signature), comparison_rows(results)))
    if args.format == "json":
        out.write(render_json({
            "arch": args.arch,
            "signatures": [{"signature": s, "results": [r.as_dict() for r in rows]} for s, rows in sig_reports],
            "total": [r.as_dict() for r in comparison_rows(totals)],
        }))
        return 0
    table = []
    for s, rows in sig_reports:
        for r in rows:
            table.append((s, r.label, r.bytes, r.cycles, fmt_pct(r.bytes_delta_pct), fmt_pct(r.cycles_delta_pct)))
            s = ""
    out.write(render_table(("signature",) + COMPARISON_COLUMNS, table, right={2, 3, 4, 5}))
    out.write("\n# total\n")
    out.write(emit_comparison_report(totals, "table"))
    return 0


# --- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=FORMATS, default="table", help="output format (default: table)")
    common.add_argument("--cost-tables", metavar="PATH",
                        help="cost-table file or directory (default: $CCWB_COST_TABLES, then built-in)")

    p = argparse.ArgumentParser(prog="ccwb", description="Calling-convention workbench for 8-bit targets.")
    p.add_argument("--version", action="version", version=f"ccwb {__version__}")
    sub = p.add_subparsers(dest="verb", metavar="VERB", required=True)

    s = sub.add_parser("arch-list", parents=[common], help="list supported architectures")
    s.add_argument("--exclude-reserved", action="store_true", help="drop ix/iy from the allocatable set")
    s.set_defaults(func=cmd_arch_list)

    s = sub.add_parser("conv-show", parents=[common], help="print a convention document")
    s.add_argument("convention", help="builtin name or path to a convention document")
    s.set_defaults(func=cmd_conv_show)

    s = sub.add_parser("assign", parents=[common], help="show argument and return locations")
    s.add_argument("--arch", choices=ARCH_IDS)
    s.add_argument("--conv", required=True, help="builtin name or convention document")
    s.add_argument("signatures", nargs="+", metavar="SIGNATURE")
    s.set_defaults(func=cmd_assign)

    s = sub.add_parser("eval", parents=[common], help="cost a convention over a corpus")
    s.add_argument("--arch", choices=ARCH_IDS)
    s.add_argument("--conv", required=True)
    s.add_argument("--corpus", default="default", help="corpus file, or 'default'")
    s.add_argument("--weights", type=_weights, default=DEFAULT_WEIGHTS, help="alpha,beta (default 1,1/20)")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("search", parents=[common], help="search a convention design space")
    s.add_argument("--arch", choices=ARCH_IDS, required=True)
    s.add_argument("--corpus", default="default")
    s.add_argument("--space", help="search-space document (default: the built-in space)")
    s.add_argument("--weights", type=_weights, default=DEFAULT_WEIGHTS)
    s.add_argument("--top", type=int, default=10)
    s.add_argument("--pareto", metavar="CSV", help="write the Pareto front to this CSV file")
    s.add_argument("--overrides", nargs="+", metavar="SIG", help="hot function types to optimize separately")
    s.add_argument("--workers", type=int, default=1, help="parallel evaluation processes")
    s.set_defaults(func=cmd_search)

    s = sub.add_parser("compare", parents=[common], help="compare conventions over a corpus")
    s.add_argument("--arch", choices=ARCH_IDS)
    s.add_argument("--corpus", default="default")
    s.add_argument("conventions", nargs="+", metavar="CONV")
    s.set_defaults(func=cmd_compare)
    return p


def run(argv: Sequence[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "top", 1) < 1 or getattr(args, "workers", 1) < 1:
            parser.error("--top and --workers must be at least 1")
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, out)
    except CcwbError as exc:
        err.write(f"ccwb: error: {exc}\n")
        return 1
    except OSError as exc:
        err.write(f"ccwb: error: {exc}\n")
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
