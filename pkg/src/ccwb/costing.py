"""Lowering of assignment plans to marshalling steps, and their (bytes, cycles) cost."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .archmodel import ZERO, Architecture, Cost, CostTables
from .convention import AssignmentPlan, CallingConvention, Registers, Stack, assign
from .errors import MissingTableEntryError
from .sigmodel import Corpus, FunctionSignature

STEP_KINDS = (
    "load_reg", "push_stack", "push_pair", "call", "sp_adjust", "ret",
    "access_reg", "access_pair", "access_stack",
)


@dataclass(frozen=True)
class MarshalStep:
    kind: str
    reg: str | None = None
    width: int = 0
    slot_width: int = 0
    nbytes: int = 0
    side: str | None = None
    free_16bit_regs: int = 0

    def __post_init__(self):
        if self.kind not in STEP_KINDS:
            raise ValueError(f"unknown step kind {self.kind!r}")

    def __str__(self) -> str:
        k = self.kind
        if k in ("load_reg", "access_reg"):
            return f"{k}({self.reg}, {self.width})"
        if k == "push_stack":
            return f"push_stack({self.slot_width}, {self.width})"
        if k == "push_pair":
            return "push_pair(8, 8)"
        if k == "access_stack":
            return f"access_stack({self.width})"
        if k == "sp_adjust":
            return f"sp_adjust({self.nbytes}, {self.side}, free={self.free_16bit_regs})"
        return k


def load_reg(reg: str, width: int) -> MarshalStep:
    return MarshalStep("load_reg", reg=reg, width=width)


def push_stack(slot_width: int, value_width: int) -> MarshalStep:
    return MarshalStep("push_stack", slot_width=slot_width, width=value_width)


def sp_adjust(nbytes: int, side: str, free: int) -> MarshalStep:
    return MarshalStep("sp_adjust", nbytes=nbytes, side=side, free_16bit_regs=free)


CALL = MarshalStep("call")
RET = MarshalStep("ret")
PUSH_PAIR = MarshalStep("push_pair", width=8, slot_width=8)


def free_registers_at_cleanup(plan: AssignmentPlan, arch: Architecture) -> int:
    """Allocatable 16-bit registers the return value leaves untouched."""
    occupied = plan.return_loc.regs if isinstance(plan.return_loc, Registers) else ()
    return arch.free_16bit_count(occupied)


def _push_groups(plan: AssignmentPlan, arch: Architecture, tables: CostTables) -> list[list[int]]:
    """Stack parameter indices, with adjacent 1-byte 8-bit slots paired when the
    target pushes 16 bits at a time (greedy, left to right)."""
    stack_idx = [i for i, loc in enumerate(plan.param_locs) if isinstance(loc, Stack)]
    can_pair = arch.push_granularity == 16 and tables.push_pair is not None

    def single_byte(i):
        return plan.param_widths[i] == 8 and plan.param_locs[i].slot_bytes == 1

    groups: list[list[int]] = []
    k = 0
    while k < len(stack_idx):
        i = stack_idx[k]
        if (
            can_pair
            and k + 1 < len(stack_idx)
            and stack_idx[k + 1] == i + 1
            and single_byte(i)
            and single_byte(i + 1)
        ):
            groups.append([i, i + 1])
            k += 2
        else:
            groups.append([i])
            k += 1
    return groups


def lower_call_site(
    plan: AssignmentPlan, arch: Architecture, tables: CostTables | None = None
) -> list[MarshalStep]:
    tables = tables or arch.cost_tables
    steps: list[MarshalStep] = []
    # stack arguments first (right to left), since pushing needs scratch registers
    for group in reversed(_push_groups(plan, arch, tables)):
        if len(group) == 2:
            steps.append(PUSH_PAIR)
        else:
            i = group[0]
            steps.append(push_stack(plan.param_locs[i].slot_bytes * 8, plan.param_widths[i]))
    for loc, width in zip(plan.param_locs, plan.param_widths):
        if isinstance(loc, Registers):
            if width == 32:
                steps.extend(load_reg(r, 16) for r in loc.regs)
            else:
                steps.append(load_reg(loc.regs[0], width))
    steps.append(CALL)
    if plan.cleanup_side == "caller" and plan.stack_arg_bytes > 0:
        steps.append(sp_adjust(plan.stack_arg_bytes, "caller", free_registers_at_cleanup(plan, arch)))
    return steps


def lower_definition(plan: AssignmentPlan, arch: Architecture) -> list[MarshalStep]:
    """Callee-side steps: one representative access per parameter, callee
    cleanup if any, and the return."""
    steps: list[MarshalStep] = []
    for loc, width in zip(plan.param_locs, plan.param_widths):
        if isinstance(loc, Registers):
            if width == 32:
                steps.append(MarshalStep("access_pair", width=32))
            else:
                steps.append(MarshalStep("access_reg", reg=loc.regs[0], width=width))
        else:
            steps.append(MarshalStep("access_stack", width=width))
    if plan.cleanup_side == "callee" and plan.stack_arg_bytes > 0:
        steps.append(sp_adjust(plan.stack_arg_bytes, "callee", free_registers_at_cleanup(plan, arch)))
    steps.append(RET)
    return steps


def step_cost(step: MarshalStep, tables: CostTables) -> Cost:
    k = step.kind
    try:
        if k == "load_reg":
            return tables.load[(step.reg, step.width)]
        if k == "push_stack":
            return tables.push[(step.slot_width, step.width)]
        if k == "push_pair":
            if tables.push_pair is None:
                raise KeyError(k)
            return tables.push_pair
        if k == "access_reg":
            return tables.access_reg[(step.reg, step.width)]
        if k == "access_pair":
            return tables.access_pair
        if k == "access_stack":
            return tables.access_stack[step.width]
        if k == "call":
            return tables.call
        if k == "ret":
            return tables.ret
        if k == "sp_adjust":
            return tables.sp_adjust_cost(step.nbytes, step.free_16bit_regs, step.side)
    except KeyError:
        raise MissingTableEntryError(f"no table entry for {step} in {tables.source}") from None
    raise MissingTableEntryError(f"no table entry for {step}")


def cost_of(steps: Iterable[MarshalStep], tables: CostTables) -> Cost:
    total = ZERO
    for s in steps:
        total = total + step_cost(s, tables)
    return total


@dataclass(frozen=True)
class SignatureCost:
    call_site: Cost
    definition: Cost

    def __iter__(self):
        return iter((self.call_site, self.definition))


def signature_cost(
    conv: CallingConvention,
    sig: FunctionSignature,
    arch: Architecture,
    tables: CostTables | None = None,
) -> SignatureCost:
    tables = tables or arch.cost_tables
    plan = assign(conv, sig, arch)
    return plan_cost(plan, arch, tables)


def plan_cost(plan: AssignmentPlan, arch: Architecture, tables: CostTables | None = None) -> SignatureCost:
    tables = tables or arch.cost_tables
    return SignatureCost(
        cost_of(lower_call_site(plan, arch, tables), tables),
        cost_of(lower_definition(plan, arch), tables),
    )


def weigh(sc: SignatureCost, call_weight: int, def_weight: int) -> Cost:
    """Aggregate contribution of one corpus entry.

    Definition code is emitted once per definition but executes on every call,
    so definition bytes scale with ``def_weight`` and definition cycles with
    ``call_weight``.
    """
    return Cost(
        call_weight * sc.call_site.bytes + def_weight * sc.definition.bytes,
        call_weight * (sc.call_site.cycles + sc.definition.cycles),
    )


def corpus_breakdown(
    conv: CallingConvention, corpus: Corpus, arch: Architecture, tables: CostTables | None = None
) -> list[tuple[FunctionSignature, SignatureCost, Cost]]:
    tables = tables or arch.cost_tables
    rows = []
    for e in corpus.entries:
        sc = signature_cost(conv, e.signature, arch, tables)
        rows.append((e.signature, sc, weigh(sc, e.call_weight, e.def_weight)))
    return rows


def corpus_cost(
    conv: CallingConvention, corpus: Corpus, arch: Architecture, tables: CostTables | None = None
) -> Cost:
    return sum((row[2] for row in corpus_breakdown(conv, corpus, arch, tables)), ZERO)


@dataclass(frozen=True)
class ScoreWeights:
    """Linear score weights, kept as exact fractions so that scaling both
    weights never perturbs an ordering."""

    alpha_bytes: Fraction = Fraction(1)
    beta_cycles: Fraction = Fraction(1, 20)

    def __post_init__(self):
        a, b = Fraction(self.alpha_bytes), Fraction(self.beta_cycles)
        object.__setattr__(self, "alpha_bytes", a)
        object.__setattr__(self, "beta_cycles", b)
        if a < 0 or b < 0:
            raise ValueError("score weights must be non-negative")
        if a + b <= 0:
            raise ValueError("at least one score weight must be positive")

    @classmethod
    def parse(cls, text: str) -> ScoreWeights:
        """``"a,b"``; each part an int, decimal or ratio such as ``1/20``."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 2:
            raise ValueError(f"expected 'alpha,beta', got {text!r}")
        return cls(Fraction(parts[0]), Fraction(parts[1]))

    def scaled(self, k) -> ScoreWeights:
        return ScoreWeights(self.alpha_bytes * k, self.beta_cycles * k)

    def __str__(self) -> str:
        return f"{self.alpha_bytes},{self.beta_cycles}"


DEFAULT_WEIGHTS = ScoreWeights()
SIZE_ONLY = ScoreWeights(Fraction(1), Fraction(0))


def score(cost: Cost, w: ScoreWeights = DEFAULT_WEIGHTS) -> Fraction:
    return w.alpha_bytes * cost.bytes + w.beta_cycles * cost.cycles


def score_number(value: Fraction) -> int | float:
    """JSON/CSV-friendly rendering of a score."""
    return int(value) if value.denominator == 1 else float(value)


def describe_steps(steps: Sequence[MarshalStep]) -> str:
    return "; ".join(str(s) for s in steps)
