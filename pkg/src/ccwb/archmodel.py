"""Register files, aliasing, and instruction cost tables for the supported
8-bit targets."""

from __future__ import annotations

import functools
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

from .errors import (
    CostTableError,
    MissingTableEntryError,
    UnknownArchitectureError,
    UnknownRegisterError,
)

ARCH_IDS = ("stm8", "z80", "z180", "z80n", "sm83", "r2k", "r2ka", "r3ka", "ez80", "tlcs90")

# Convention family each target belongs to.
FAMILY = {
    "stm8": "stm8",
    "z80": "z80",
    "z180": "z80",
    "z80n": "z80",
    "sm83": "sm83",
    "r2k": "rabbit",
    "r2ka": "rabbit",
    "r3ka": "rabbit",
    "ez80": "rabbit",
    "tlcs90": "rabbit",
}

COST_TABLES_ENV = "CCWB_COST_TABLES"


@dataclass(frozen=True, order=True)
class Cost:
    bytes: int = 0
    cycles: int = 0

    def __post_init__(self):
        if self.bytes < 0 or self.cycles < 0:
            raise ValueError(f"negative cost {self.bytes}/{self.cycles}")

    def __add__(self, other: Cost) -> Cost:
        if not isinstance(other, Cost):
            return NotImplemented
        return Cost(self.bytes + other.bytes, self.cycles + other.cycles)

    def __radd__(self, other):
        # lets sum() start from 0
        if other == 0:
            return self
        return NotImplemented

    def __mul__(self, k: int) -> Cost:
        return Cost(self.bytes * k, self.cycles * k)

    __rmul__ = __mul__

    def dominates(self, other: Cost) -> bool:
        """True if no worse on both axes and strictly better on one."""
        return self.bytes <= other.bytes and self.cycles <= other.cycles and self != other


ZERO = Cost(0, 0)


@dataclass(frozen=True)
class Register:
    name: str
    width: int
    parts: tuple[str, ...] = ()

    def __post_init__(self):
        if self.width not in (8, 16):
            raise ValueError(f"register {self.name}: width must be 8 or 16")
        if self.width == 8 and self.parts:
            raise ValueError(f"register {self.name}: 8-bit registers have no parts")
        if self.width == 16 and len(self.parts) not in (0, 2):
            raise ValueError(f"register {self.name}: 16-bit registers have 0 or 2 parts")


@dataclass(frozen=True, eq=False)
class CostTables:
    """Per-primitive costs.  Keys:

    * ``load[(reg, width)]`` - caller materializes an argument in ``reg``
    * ``push[(slot_width, value_width)]`` - caller pushes one stack argument
    * ``push_pair`` - two adjacent 8-bit arguments in one 16-bit push, if the
      target can do that
    * ``access_reg[(reg, width)]``, ``access_pair``, ``access_stack[width]`` -
      one representative use of a parameter inside the callee
    * ``sp_adjust[(bytes, free_16bit_regs)]`` - stack cleanup; ``sp_adjust_callee``
      optionally overrides it for the callee side
    """

    arch: str
    load: Mapping[tuple[str, int], Cost]
    push: Mapping[tuple[int, int], Cost]
    access_reg: Mapping[tuple[str, int], Cost]
    access_stack: Mapping[int, Cost]
    sp_adjust: Mapping[tuple[int, int], Cost]
    call: Cost
    ret: Cost
    access_pair: Cost = ZERO
    push_pair: Cost | None = None
    sp_adjust_callee: Mapping[tuple[int, int], Cost] = field(
        default_factory=lambda: MappingProxyType({})
    )
    source: str = "<builtin>"

    def sp_adjust_cost(self, nbytes: int, free: int, side: str = "caller") -> Cost:
        table = self.sp_adjust
        if side == "callee" and self.sp_adjust_callee:
            table = self.sp_adjust_callee
        frees = [f for (b, f) in table if b == nbytes]
        if not frees:
            raise MissingTableEntryError(f"no sp_adjust entry for {nbytes} bytes ({self.source})")
        # more free registers than the table distinguishes behave like the maximum
        key = (nbytes, min(free, max(frees)))
        if key not in table:
            raise MissingTableEntryError(f"no sp_adjust entry for {nbytes} bytes, {free} free ({self.source})")
        return table[key]

    def free_counts(self) -> list[int]:
        return sorted({f for (_, f) in self.sp_adjust})


def _parse_int(tok: str, lineno: int, source: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise CostTableError(f"{source}:{lineno}: expected an integer, got {tok!r}") from None


def parse_cost_tables(text: str, source: str = "<string>") -> CostTables:
    """Parse the line-oriented cost-table format.

    ``<primitive> <key-fields...> <bytes> <cycles>`` per line, ``#`` comments,
    headed by ``ccwb-costs 1`` and ``arch <id>``.
    """
    load: dict = {}
    push: dict = {}
    access_reg: dict = {}
    access_stack: dict = {}
    sp_adjust: dict = {}
    sp_callee: dict = {}
    singles: dict = {}
    arch = None
    version_seen = False

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        head = toks[0]
        if not version_seen:
            if toks != ["ccwb-costs", "1"]:
                raise CostTableError(f"{source}:{lineno}: expected header 'ccwb-costs 1'")
            version_seen = True
            continue
        if head == "arch":
            if len(toks) != 2 or toks[1] not in ARCH_IDS:
                raise CostTableError(f"{source}:{lineno}: bad arch line")
            arch = toks[1]
            continue
        if len(toks) < 3:
            raise CostTableError(f"{source}:{lineno}: too few fields")
        cost_b = _parse_int(toks[-2], lineno, source)
        cost_c = _parse_int(toks[-1], lineno, source)
        if cost_b < 0 or cost_c < 0:
            raise CostTableError(f"{source}:{lineno}: negative cost")
        cost = Cost(cost_b, cost_c)
        keys = toks[1:-2]
        n = lambda i: _parse_int(keys[i], lineno, source)  # noqa: E731
        if head == "load" and len(keys) == 2:
            load[(keys[0], n(1))] = cost
        elif head == "push" and len(keys) == 2:
            push[(n(0), n(1))] = cost
        elif head == "push_pair" and keys == ["8", "8"]:
            singles["push_pair"] = cost
        elif head == "access" and keys[:1] == ["reg"] and len(keys) == 3:
            access_reg[(keys[1], n(2))] = cost
        elif head == "access" and keys[:1] == ["stack"] and len(keys) == 2:
            access_stack[n(1)] = cost
        elif head == "access" and keys == ["pair", "32"]:
            singles["access_pair"] = cost
        elif head == "sp_adjust" and len(keys) == 2:
            sp_adjust[(n(0), n(1))] = cost
        elif head == "sp_adjust_callee" and len(keys) == 2:
            sp_callee[(n(0), n(1))] = cost
        elif head in ("call", "ret") and not keys:
            singles[head] = cost
        else:
            raise CostTableError(f"{source}:{lineno}: unrecognized entry {line!r}")

    if arch is None:
        raise CostTableError(f"{source}: missing 'arch' line")
    for req in ("call", "ret"):
        if req not in singles:
            raise CostTableError(f"{source}: missing '{req}' entry")
    return CostTables(
        arch=arch,
        load=MappingProxyType(load),
        push=MappingProxyType(push),
        access_reg=MappingProxyType(access_reg),
        access_stack=MappingProxyType(access_stack),
        sp_adjust=MappingProxyType(sp_adjust),
        sp_adjust_callee=MappingProxyType(sp_callee),
        call=singles["call"],
        ret=singles["ret"],
        access_pair=singles.get("access_pair", ZERO),
        push_pair=singles.get("push_pair"),
        source=source,
    )


def format_cost_tables(tables: CostTables) -> str:
    lines = ["ccwb-costs 1", f"arch {tables.arch}"]
    for (reg, w), c in tables.load.items():
        lines.append(f"load {reg} {w} {c.bytes} {c.cycles}")
    for (slot, w), c in tables.push.items():
        lines.append(f"push {slot} {w} {c.bytes} {c.cycles}")
    if tables.push_pair is not None:
        lines.append(f"push_pair 8 8 {tables.push_pair.bytes} {tables.push_pair.cycles}")
    for (reg, w), c in tables.access_reg.items():
        lines.append(f"access reg {reg} {w} {c.bytes} {c.cycles}")
    lines.append(f"access pair 32 {tables.access_pair.bytes} {tables.access_pair.cycles}")
    for w, c in tables.access_stack.items():
        lines.append(f"access stack {w} {c.bytes} {c.cycles}")
    for (b, f), c in tables.sp_adjust.items():
        lines.append(f"sp_adjust {b} {f} {c.bytes} {c.cycles}")
    for (b, f), c in tables.sp_adjust_callee.items():
        lines.append(f"sp_adjust_callee {b} {f} {c.bytes} {c.cycles}")
    lines.append(f"call {tables.call.bytes} {tables.call.cycles}")
    lines.append(f"ret {tables.ret.bytes} {tables.ret.cycles}")
    return "\n".join(lines) + "\n"


@functools.lru_cache(maxsize=None)
def default_cost_tables(arch_id: str) -> CostTables:
    if arch_id not in ARCH_IDS:
        raise UnknownArchitectureError(f"unknown architecture {arch_id!r}")
    text = resources.files("ccwb").joinpath("data").joinpath("costs").joinpath(f"{arch_id}.txt").read_text("utf-8")
    return parse_cost_tables(text, source=f"<builtin {arch_id}>")


def load_cost_tables(path: str | os.PathLike, arch_id: str | None = None) -> CostTables:
    """Read a cost-table file, or ``<dir>/<arch_id>.txt`` when ``path`` is a directory."""
    p = Path(path)
    if p.is_dir():
        if arch_id is None:
            raise CostTableError(f"{p} is a directory; an architecture id is needed")
        p = p / f"{arch_id}.txt"
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise CostTableError(f"cannot read cost tables {p}: {exc.strerror}") from None
    tables = parse_cost_tables(text, source=str(p))
    if arch_id is not None and tables.arch != arch_id:
        raise CostTableError(f"{p} describes {tables.arch}, not {arch_id}")
    return tables


def resolve_cost_tables(arch_id: str, path: str | os.PathLike | None = None) -> CostTables:
    """Explicit path, then ``$CCWB_COST_TABLES``, then the embedded defaults."""
    if path is not None:
        return load_cost_tables(path, arch_id)
    env = os.environ.get(COST_TABLES_ENV)
    if env:
        return load_cost_tables(env, arch_id)
    return default_cost_tables(arch_id)


@dataclass(frozen=True)
class Architecture:
    id: str
    registers: tuple[Register, ...]
    reserved: frozenset[str]
    push_granularity: int
    cost_tables: CostTables
    exclude_reserved: bool = False

    def __post_init__(self):
        names = {r.name for r in self.registers}
        for r in self.registers:
            for p in r.parts:
                if p not in names or self.register(p).width != 8:
                    raise ValueError(f"{self.id}: part {p} of {r.name} is not a declared 8-bit register")
        for r in self.reserved:
            if r not in names:
                raise ValueError(f"{self.id}: reserved register {r} not declared")

    @property
    def family(self) -> str:
        return FAMILY[self.id]

    def register(self, name: str) -> Register:
        for r in self.registers:
            if r.name == name:
                return r
        raise UnknownRegisterError(f"{self.id} has no register {name!r}")

    @functools.cached_property
    def overlaps(self) -> Mapping[str, frozenset[str]]:
        """Register name -> names of every register it conflicts with (itself included)."""
        out = {}
        for a in self.registers:
            out[a.name] = frozenset(
                b.name
                for b in self.registers
                if a.name == b.name or a.name in b.parts or b.name in a.parts or set(a.parts) & set(b.parts)
            )
        return MappingProxyType(out)

    def has_register(self, name: str) -> bool:
        return any(r.name == name for r in self.registers)

    @property
    def register_names(self) -> tuple[str, ...]:
        return tuple(r.name for r in self.registers)

    @property
    def allocatable(self) -> tuple[str, ...]:
        if not self.exclude_reserved:
            return self.register_names
        return tuple(r.name for r in self.registers if r.name not in self.reserved)

    def allocatable_of_width(self, width: int) -> tuple[str, ...]:
        return tuple(n for n in self.allocatable if self.register(n).width == width)

    def free_16bit_count(self, occupied: Iterable[str]) -> int:
        """Allocatable 16-bit registers not overlapping any of ``occupied``."""
        occupied = tuple(occupied)
        return sum(
            1
            for r in self.allocatable_of_width(16)
            if not any(conflicts(self, r, o) for o in occupied)
        )


def _z80_registers(index_halves: bool = False, index_regs: bool = True) -> tuple[Register, ...]:
    regs = [Register(n, 8) for n in ("a", "b", "c", "d", "e", "h", "l")]
    regs += [Register("bc", 16, ("b", "c")), Register("de", 16, ("d", "e")), Register("hl", 16, ("h", "l"))]
    if index_regs:
        if index_halves:
            regs += [Register(n, 8) for n in ("ixh", "ixl", "iyh", "iyl")]
            regs += [Register("ix", 16, ("ixh", "ixl")), Register("iy", 16, ("iyh", "iyl"))]
        else:
            regs += [Register("ix", 16), Register("iy", 16)]
    return tuple(regs)


def _build(arch_id: str, tables: CostTables, exclude_reserved: bool) -> Architecture:
    if arch_id == "stm8":
        regs = (
            Register("a", 8),
            Register("x", 16, ("xh", "xl")),
            Register("y", 16, ("yh", "yl")),
            Register("xl", 8),
            Register("xh", 8),
            Register("yl", 8),
            Register("yh", 8),
        )
        # sort so parts precede the registers that contain them
        regs = tuple(sorted(regs, key=lambda r: r.width))
        return Architecture("stm8", regs, frozenset(), 8, tables, exclude_reserved)
    if arch_id == "sm83":
        return Architecture("sm83", _z80_registers(index_regs=False), frozenset(), 16, tables, exclude_reserved)
    halves = arch_id == "ez80"
    regs = _z80_registers(index_halves=halves)
    reserved = {"ix", "iy"} | ({"ixh", "ixl", "iyh", "iyl"} if halves else set())
    return Architecture(arch_id, regs, frozenset(reserved), 16, tables, exclude_reserved)


@functools.lru_cache(maxsize=None)
def _default_architecture(arch_id: str, exclude_reserved: bool) -> Architecture:
    return _build(arch_id, default_cost_tables(arch_id), exclude_reserved)


def get_architecture(
    arch_id: str, exclude_reserved: bool = False, cost_tables: CostTables | None = None
) -> Architecture:
    """Immutable description of ``arch_id``.

    With ``exclude_reserved`` the index registers (ix, iy and, on eZ80, their
    halves) leave the allocatable set; stm8 and sm83 are unaffected.
    """
    if arch_id not in ARCH_IDS:
        raise UnknownArchitectureError(f"unknown architecture {arch_id!r}; known: {', '.join(ARCH_IDS)}")
    if cost_tables is None:
        return _default_architecture(arch_id, bool(exclude_reserved))
    if cost_tables.arch != arch_id:
        raise CostTableError(f"cost tables are for {cost_tables.arch}, not {arch_id}")
    return _build(arch_id, cost_tables, bool(exclude_reserved))


def conflicts(arch: Architecture, r1: str, r2: str) -> bool:
    """True iff the two registers overlap: equal, one part of the other, or sharing a part."""
    overlaps = arch.overlaps
    for r in (r1, r2):
        if r not in overlaps:
            raise UnknownRegisterError(f"{arch.id} has no register {r!r}")
    return r2 in overlaps[r1]
