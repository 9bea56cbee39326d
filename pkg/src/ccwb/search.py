"""Exhaustive exploration of calling-convention design spaces."""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Iterator, Sequence

from .archmodel import ARCH_IDS, FAMILY, Architecture, Cost, CostTables, format_cost_tables, get_architecture, parse_cost_tables
from .convention import (
    CLEANUP_MODES,
    CallingConvention,
    CleanupPolicy,
    ConventionSyntaxError,
    check_convention,
    parse_bool,
    parse_entries,
    parse_width_set,
    read_sections,
)
from .costing import DEFAULT_WEIGHTS, ScoreWeights, corpus_cost, score
from .errors import EmptySpaceError, InvariantViolationError, UnknownArchitectureError, UnknownHotTypeError
from .sigmodel import Corpus, CorpusEntry, FunctionSignature

Entry = tuple  # tuple[str, ...]
PrefList = tuple  # tuple[Entry, ...]


@dataclass(frozen=True)
class SearchSpace:
    arch: str
    ret8_choices: tuple[Entry, ...]
    ret16_choices: tuple[Entry, ...]
    ret32_choices: tuple[Entry, ...]
    arg_pref_choices: tuple[tuple[int, tuple[PrefList, ...]], ...]
    cleanup_choices: tuple[CleanupPolicy, ...] = (CleanupPolicy(),)
    stack_width_choices: tuple[int, ...] = (8,)
    max_register_params: int = 2
    stop_on_stack: bool = True
    exclude_reserved: bool = False

    def __post_init__(self):
        def entries(xs):
            return tuple(tuple(x) if not isinstance(x, str) else (x,) for x in xs)

        object.__setattr__(self, "ret8_choices", entries(self.ret8_choices))
        object.__setattr__(self, "ret16_choices", entries(self.ret16_choices))
        object.__setattr__(self, "ret32_choices", entries(self.ret32_choices))
        prefs = dict(self.arg_pref_choices)
        norm = []
        for w in (8, 16, 32):
            lists = prefs.get(w, ((),))
            norm.append((w, tuple(entries(lst) for lst in lists)))
        object.__setattr__(self, "arg_pref_choices", tuple(norm))
        object.__setattr__(self, "cleanup_choices", tuple(self.cleanup_choices))
        object.__setattr__(self, "stack_width_choices", tuple(self.stack_width_choices))
        if self.arch not in ARCH_IDS:
            raise UnknownArchitectureError(f"unknown architecture {self.arch!r}")
        self._check_family_bounds()

    def _check_family_bounds(self):
        fam = FAMILY[self.arch]
        if fam == "stm8":
            allowed = {8: {"a", "xl", "xh", "yl", "yh"}, 16: {"x", "y"}, 32: {"x", "y"}}
        else:
            allowed = None
        for w, choices in ((8, self.ret8_choices), (16, self.ret16_choices), (32, self.ret32_choices)):
            for c in choices:
                if allowed and not set(c) <= allowed[w]:
                    raise InvariantViolationError("space", f"return {w} choice {' '.join(c)} outside the STM8 space")
                if fam != "stm8" and {"ix", "iy"} & set(c):
                    raise InvariantViolationError("space", "ix and iy are not return-register candidates")

    def prefs(self, width: int) -> tuple[PrefList, ...]:
        return dict(self.arg_pref_choices)[width]

    @property
    def raw_size(self) -> int:
        n = len(self.ret8_choices) * len(self.ret16_choices) * len(self.ret32_choices)
        for _, lists in self.arg_pref_choices:
            n *= len(lists)
        return n * len(self.cleanup_choices) * len(self.stack_width_choices)

    def with_arch(self, arch_id: str) -> SearchSpace:
        from dataclasses import replace

        return replace(self, arch=arch_id)


def _dedupe_entries(prefs: PrefList) -> PrefList:
    # a later entry over the same registers as an earlier one can never be chosen
    seen, out = [], []
    for e in prefs:
        key = frozenset(e)
        if key not in seen:
            seen.append(key)
            out.append(e)
    return tuple(out)


def enumerate_space(space: SearchSpace) -> Iterator[CallingConvention]:
    """Valid candidates of ``space`` in canonical order.

    Order is the cartesian product over (ret8, ret16, ret32, args 8, args 16,
    args 32, cleanup, stack width) with the last dimension varying fastest.
    Candidates breaking a convention invariant are skipped, and candidates
    that reduce to an already-yielded convention are dropped.
    """
    arch = get_architecture(space.arch, space.exclude_reserved)
    seen: set = set()
    count = 0
    dims = itertools.product(
        space.ret8_choices,
        space.ret16_choices,
        space.ret32_choices,
        space.prefs(8),
        space.prefs(16),
        space.prefs(32),
        space.cleanup_choices,
        space.stack_width_choices,
    )
    for r8, r16, r32, a8, a16, a32, cleanup, slot in dims:
        a8, a16, a32 = _dedupe_entries(a8), _dedupe_entries(a16), _dedupe_entries(a32)
        key = (r8, r16, r32, a8, a16, a32, cleanup, slot)
        if key in seen:
            continue
        try:
            conv = CallingConvention(
                name=f"{space.arch}-c{count:05d}",
                arch=space.arch,
                ret_reg={8: r8, 16: r16, 32: r32},
                arg_prefs={8: a8, 16: a16, 32: a32},
                max_register_params=space.max_register_params,
                stop_on_stack=space.stop_on_stack,
                cleanup=cleanup,
                stack_slot_width_for_8bit=slot,
                exclude_reserved=space.exclude_reserved,
                validate=False,
            )
            check_convention(conv, arch)
        except InvariantViolationError:
            continue
        seen.add(key)
        count += 1
        yield conv
    if count == 0:
        raise EmptySpaceError(f"search space for {space.arch} has no valid candidate")


@dataclass(frozen=True)
class Candidate:
    index: int
    convention: CallingConvention
    cost: Cost
    score: Fraction

    @property
    def sort_key(self) -> tuple:
        return (self.score, self.cost.bytes, self.cost.cycles, self.index)


@dataclass(frozen=True)
class SearchResult:
    ranked: tuple[Candidate, ...]
    pareto: tuple[Candidate, ...]
    evaluated_count: int
    weights: ScoreWeights = DEFAULT_WEIGHTS

    @property
    def best(self) -> Candidate:
        return self.ranked[0]


def rank(candidates: Sequence[Candidate]) -> tuple[Candidate, ...]:
    return tuple(sorted(candidates, key=lambda c: c.sort_key))


def pareto_front(candidates: Sequence[Candidate]) -> tuple[Candidate, ...]:
    """Candidates no other candidate dominates in (bytes, cycles); equal-cost
    candidates are all kept.  Output follows the input order."""
    costs = sorted({c.cost for c in candidates})
    frontier: set[Cost] = set()
    best_cycles = None
    # sweep by bytes ascending, cycles ascending
    for cost in costs:
        if best_cycles is None or cost.cycles < best_cycles:
            frontier.add(cost)
            best_cycles = cost.cycles
    return tuple(c for c in candidates if c.cost in frontier)


# --- evaluation -------------------------------------------------------------

_worker_state: dict = {}


def _worker_init(arch_id: str, exclude: bool, tables_text: str, source: str, corpus: Corpus):
    tables = parse_cost_tables(tables_text, source)
    _worker_state["arch"] = get_architecture(arch_id, exclude, tables)
    _worker_state["tables"] = tables
    _worker_state["corpus"] = corpus


def _worker_eval(convs: list[CallingConvention]) -> list[Cost]:
    s = _worker_state
    return [corpus_cost(c, s["corpus"], s["arch"], s["tables"]) for c in convs]


def evaluate(
    convs: Sequence[CallingConvention],
    corpus: Corpus,
    arch: Architecture,
    tables: CostTables | None = None,
    workers: int = 1,
) -> list[Cost]:
    """``corpus_cost`` of every candidate, in input order regardless of ``workers``."""
    tables = tables or arch.cost_tables
    if workers <= 1 or len(convs) < 2:
        return [corpus_cost(c, corpus, arch, tables) for c in convs]
    chunk = max(1, -(-len(convs) // (workers * 4)))
    chunks = [list(convs[i : i + chunk]) for i in range(0, len(convs), chunk)]
    init = (arch.id, arch.exclude_reserved, format_cost_tables(tables), tables.source, corpus)
    with ProcessPoolExecutor(max_workers=workers, initializer=_worker_init, initargs=init) as pool:
        results = pool.map(_worker_eval, chunks)
        return [cost for part in results for cost in part]


def _arch_for_space(space: SearchSpace, tables: CostTables | None) -> Architecture:
    return get_architecture(space.arch, space.exclude_reserved, tables)


def search(
    space: SearchSpace,
    corpus: Corpus,
    arch: Architecture | None = None,
    tables: CostTables | None = None,
    weights: ScoreWeights = DEFAULT_WEIGHTS,
    workers: int = 1,
) -> SearchResult:
    """Evaluate every candidate; rank by (score, bytes, cycles, enumeration index)."""
    arch = arch or _arch_for_space(space, tables)
    tables = tables or arch.cost_tables
    convs = list(enumerate_space(space))
    costs = evaluate(convs, corpus, arch, tables, workers)
    cands = [Candidate(i, c, cost, score(cost, weights)) for i, (c, cost) in enumerate(zip(convs, costs))]
    ranked = rank(cands)
    return SearchResult(ranked, pareto_front(ranked), len(cands), weights)


@dataclass(frozen=True)
class Override:
    signature: FunctionSignature
    winner: Candidate
    base_cost: Cost
    base_score: Fraction

    @property
    def delta(self) -> Fraction:
        return self.winner.score - self.base_score


@dataclass(frozen=True)
class OverrideResult:
    base: SearchResult
    overrides: dict[FunctionSignature, Override] = field(default_factory=dict)

    @property
    def base_total(self) -> Fraction:
        return self.base.best.score

    @property
    def total_delta(self) -> Fraction:
        return sum((o.delta for o in self.overrides.values()), Fraction(0))

    @property
    def total(self) -> Fraction:
        return self.base_total + self.total_delta


def search_with_overrides(
    space: SearchSpace,
    corpus: Corpus,
    hot_types: Sequence[FunctionSignature],
    arch: Architecture | None = None,
    tables: CostTables | None = None,
    weights: ScoreWeights = DEFAULT_WEIGHTS,
    workers: int = 1,
) -> OverrideResult:
    """Base search, then an independent per-type optimum for each hot type
    while every other signature keeps the base winner."""
    arch = arch or _arch_for_space(space, tables)
    tables = tables or arch.cost_tables
    known = corpus.weights()
    for sig in hot_types:
        if sig not in known:
            raise UnknownHotTypeError(f"hot type {sig} is not in the corpus")
    base = search(space, corpus, arch, tables, weights, workers)
    if not hot_types:
        return OverrideResult(base, {})
    convs = [c.convention for c in sorted(base.ranked, key=lambda c: c.index)]
    base_conv = base.best.convention
    overrides = {}
    for sig in dict.fromkeys(hot_types):
        cw, dw = known[sig]
        single = Corpus((CorpusEntry(sig, max(cw, 1), dw),))
        costs = evaluate(convs, single, arch, tables, workers)
        cands = [Candidate(i, c, cost, score(cost, weights)) for i, (c, cost) in enumerate(zip(convs, costs))]
        winner = rank(cands)[0]
        base_cost = corpus_cost(base_conv, single, arch, tables)
        overrides[sig] = Override(sig, winner, base_cost, score(base_cost, weights))
    return OverrideResult(base, overrides)


# --- space documents ----------------------------------------------------------

def _alternatives(value: str) -> list[str]:
    return [v.strip() for v in value.split("|")]


def parse_space(text: str, source: str = "<space>") -> SearchSpace:
    """Parse a space document: the convention document layout with ``|``
    separating alternatives and ``-`` for the empty preference list."""
    sections = read_sections(text, source)
    top = {k: v for _, k, v in sections[""]}
    if "arch" not in top:
        raise ConventionSyntaxError(f"{source}: missing 'arch'")
    rets: dict[int, list] = {}
    for lineno, key, value in sections.get("return", []):
        try:
            w = int(key)
        except ValueError:
            raise ConventionSyntaxError(f"{source}:{lineno}: bad return width {key!r}") from None
        rets[w] = [() if a == "mem" else tuple(a.split()) for a in _alternatives(value)]
    prefs: dict[int, tuple] = {}
    flags = {}
    for lineno, key, value in sections.get("args", []):
        where = f"{source}:{lineno}"
        if key == "max_register_params":
            flags[key] = int(value)
        elif key == "stop_on_stack":
            flags[key] = parse_bool(value, where)
        else:
            try:
                w = int(key)
            except ValueError:
                raise ConventionSyntaxError(f"{where}: unknown key {key!r}") from None
            prefs[w] = tuple(parse_entries(a) for a in _alternatives(value))
    cl = {k: (lineno, v) for lineno, k, v in sections.get("cleanup", [])}
    modes = _alternatives(cl.get("mode", (0, "caller_always"))[1])
    for m in modes:
        if m not in CLEANUP_MODES:
            raise ConventionSyntaxError(f"{source}: unknown cleanup mode {m!r}")
    widths = parse_width_set(cl.get("callee_if_return_width_in", (0, "0 8 16"))[1], source)
    ff = parse_bool(cl.get("callee_if_float_float", (0, "true"))[1], source)
    cleanups = tuple(
        CleanupPolicy(m, widths, ff) if m == "conditional" else CleanupPolicy(m) for m in modes
    )
    slots = (8,)
    for lineno, key, value in sections.get("stack", []):
        if key != "slot_width_8bit":
            raise ConventionSyntaxError(f"{source}:{lineno}: unknown key {key!r}")
        slots = tuple(int(a) for a in _alternatives(value))
    missing = {8, 16, 32} - set(rets)
    if missing:
        raise ConventionSyntaxError(f"{source}: [return] needs choices for widths {sorted(missing)}")
    return SearchSpace(
        arch=top["arch"],
        ret8_choices=rets[8],
        ret16_choices=rets[16],
        ret32_choices=rets[32],
        arg_pref_choices=tuple(prefs.items()),
        cleanup_choices=cleanups,
        stack_width_choices=slots,
        max_register_params=flags.get("max_register_params", 2),
        stop_on_stack=flags.get("stop_on_stack", True),
        exclude_reserved=parse_bool(top.get("exclude_reserved", "false"), source),
    )


def format_space(space: SearchSpace) -> str:
    def alts(items, fmt):
        return " | ".join(fmt(i) for i in items)

    def entries(lst):
        return ", ".join(" ".join(e) for e in lst) if lst else "-"

    lines = [
        f"arch = {space.arch}",
        f"exclude_reserved = {'true' if space.exclude_reserved else 'false'}",
        "",
        "[return]",
        f"8 = {alts(space.ret8_choices, ' '.join)}",
        f"16 = {alts(space.ret16_choices, ' '.join)}",
        f"32 = {alts(space.ret32_choices, lambda e: ' '.join(e) if e else 'mem')}",
        "",
        "[args]",
    ]
    for w, lists in space.arg_pref_choices:
        lines.append(f"{w} = {alts(lists, entries)}")
    lines += [
        f"max_register_params = {space.max_register_params}",
        f"stop_on_stack = {'true' if space.stop_on_stack else 'false'}",
        "",
        "[cleanup]",
        f"mode = {alts(space.cleanup_choices, lambda c: c.mode)}",
    ]
    cond = [c for c in space.cleanup_choices if c.mode == "conditional"]
    if cond:
        lines.append("callee_if_return_width_in = " + (" ".join(map(str, sorted(cond[0].callee_if_return_width_in))) or "-"))
        lines.append(f"callee_if_float_float = {'true' if cond[0].callee_if_float_float else 'false'}")
    lines += ["", "[stack]", f"slot_width_8bit = {alts(space.stack_width_choices, str)}"]
    return "\n".join(lines) + "\n"


def load_space(path: str | os.PathLike) -> SearchSpace:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConventionSyntaxError(f"cannot read space {p}: {exc.strerror}") from None
    return parse_space(text, source=str(p))


def default_space(arch_id: str) -> SearchSpace:
    """The shipped space for ``arch_id``'s family, retargeted to ``arch_id``."""
    if arch_id not in ARCH_IDS:
        raise UnknownArchitectureError(f"unknown architecture {arch_id!r}")
    fam = FAMILY[arch_id]
    text = resources.files("ccwb").joinpath("data").joinpath("spaces").joinpath(f"{fam}.txt").read_text("utf-8")
    return parse_space(text, source=f"<default space {fam}>").with_arch(arch_id)
