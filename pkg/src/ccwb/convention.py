"""Declarative calling conventions and the parameter/return location assigner."""

from __future__ import annotations

import functools
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

from .archmodel import ARCH_IDS, Architecture, get_architecture
from .errors import (
    ConventionSyntaxError,
    InvariantViolationError,
    UnknownArchitectureError,
    UnknownConventionError,
    UnsupportedWidthError,
)
from .sigmodel import FunctionSignature

WIDTHS = (8, 16, 32)
CLEANUP_MODES = ("caller_always", "callee_always", "conditional")

@dataclass(frozen=True)
class Registers:
    regs: tuple[str, ...]

    def __str__(self) -> str:
        return "".join(self.regs) if len(self.regs) > 1 else self.regs[0]


@dataclass(frozen=True)
class Stack:
    offset: int
    slot_bytes: int

    def __str__(self) -> str:
        return f"stack+{self.offset}"


@dataclass(frozen=True)
class Memory:
    """Return value left in compiler-managed memory (pseudoregisters)."""

    bytes: int

    def __str__(self) -> str:
        return "mem"


Location = Union[Registers, Stack, Memory]


@dataclass(frozen=True)
class CleanupPolicy:
    mode: str = "caller_always"
    callee_if_return_width_in: frozenset[int] = frozenset()
    callee_if_float_float: bool = False

    def __post_init__(self):
        object.__setattr__(self, "callee_if_return_width_in", frozenset(self.callee_if_return_width_in))
        if self.mode not in CLEANUP_MODES:
            raise InvariantViolationError("cleanup-mode", f"unknown cleanup mode {self.mode!r}")
        bad = self.callee_if_return_width_in - {0, 8, 16, 32}
        if bad:
            raise InvariantViolationError("cleanup-widths", f"invalid return widths {sorted(bad)}")


CALLER_ALWAYS = CleanupPolicy("caller_always")
CALLEE_ALWAYS = CleanupPolicy("callee_always")
# callee cleans up for void/<=16-bit returns and for float f(float, ...)
SMALL_RETURN_OR_FLOAT = CleanupPolicy("conditional", frozenset({0, 8, 16}), True)


def _norm_entry(entry) -> tuple[str, ...]:
    if isinstance(entry, str):
        return (entry,)
    return tuple(entry)


@dataclass(frozen=True)
class CallingConvention:
    """Where arguments and return values live, and who cleans up the stack.

    ``ret_reg`` maps width -> register tuple (empty tuple: returned in memory).
    ``arg_prefs`` maps width -> ordered candidates tried left to right for every
    parameter; ``positional_prefs`` maps (1-based position, width) -> candidates
    that replace ``arg_prefs`` for that one position.
    """

    name: str
    arch: str
    ret_reg: tuple = ()
    arg_prefs: tuple = ()
    positional_prefs: tuple = ()
    max_register_params: int = 2
    stop_on_stack: bool = True
    first_of_each_width: bool = False
    cleanup: CleanupPolicy = CALLER_ALWAYS
    stack_slot_width_for_8bit: int = 8
    exclude_reserved: bool = False
    validate: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        ret = {int(w): tuple(_norm_entry(r)) for w, r in dict(self.ret_reg).items()}
        args = {w: () for w in WIDTHS}
        for w, entries in dict(self.arg_prefs).items():
            args[int(w)] = tuple(_norm_entry(e) for e in entries)
        pos = {}
        for (p, w), entries in dict(self.positional_prefs).items():
            pos[(int(p), int(w))] = tuple(_norm_entry(e) for e in entries)
        object.__setattr__(self, "ret_reg", tuple(sorted(ret.items())))
        object.__setattr__(self, "arg_prefs", tuple(sorted(args.items())))
        object.__setattr__(self, "positional_prefs", tuple(sorted(pos.items())))
        if self.validate:
            check_convention(self)

    def ret_for(self, width: int) -> tuple[str, ...]:
        return dict(self.ret_reg)[width]

    def prefs_for(self, position: int, width: int) -> tuple[tuple[str, ...], ...]:
        return self._pref_lookup.get((position, width), self._pref_lookup[(0, width)])

    @functools.cached_property
    def _pref_lookup(self) -> dict:
        out = {(0, w): e for w, e in self.arg_prefs}
        out.update(self.positional_prefs)
        return out

    def referenced_registers(self) -> set[str]:
        regs = set()
        for _, r in self.ret_reg:
            regs.update(r)
        for _, entries in self.arg_prefs + self.positional_prefs:
            for e in entries:
                regs.update(e)
        return regs

    def replace(self, **changes) -> CallingConvention:
        from dataclasses import replace

        return replace(self, **changes)

    @property
    def callee_cleanup_possible(self) -> bool:
        """Callee cleanup can get in the way of tail calls; reported, not costed."""
        return self.cleanup.mode != "caller_always"


def _arch_for(conv: CallingConvention) -> Architecture:
    if conv.arch not in ARCH_IDS:
        raise UnknownArchitectureError(f"unknown architecture {conv.arch!r}")
    return get_architecture(conv.arch, conv.exclude_reserved)


def check_convention(conv: CallingConvention, arch: Architecture | None = None) -> None:
    """Raise :class:`InvariantViolationError` naming the first broken rule."""
    arch = arch or _arch_for(conv)
    allocatable = set(arch.allocatable)

    def check_reg(r: str, width: int | None, what: str):
        if not arch.has_register(r):
            raise InvariantViolationError("unknown-register", f"{what}: {arch.id} has no register {r!r}")
        if r not in allocatable:
            raise InvariantViolationError(
                "allocatable", f"{what}: {r} is reserved under the current profile (exclude_reserved)"
            )
        if width is not None and arch.register(r).width != width:
            raise InvariantViolationError("width", f"{what}: {r} is not a {width}-bit register")

    def check_entry(entry: tuple[str, ...], width: int, what: str):
        if width == 32:
            if len(entry) != 2:
                raise InvariantViolationError("width", f"{what}: 32-bit values need a pair of 16-bit registers")
            for r in entry:
                check_reg(r, None, what)
            if entry[1] in arch.overlaps[entry[0]]:
                raise InvariantViolationError("conflict", f"{what}: {entry[0]} and {entry[1]} overlap")
            for r in entry:
                check_reg(r, 16, what)
        else:
            if len(entry) != 1:
                raise InvariantViolationError("width", f"{what}: {width}-bit values take one register")
            check_reg(entry[0], width, what)

    widths = dict(conv.ret_reg)
    if set(widths) != set(WIDTHS):
        raise InvariantViolationError("return", "return registers must be given for widths 8, 16 and 32")
    for w, regs in conv.ret_reg:
        if w == 32 and regs == ():
            continue
        check_entry(regs, w, f"return {w}")
    for w, entries in conv.arg_prefs:
        if w not in WIDTHS:
            raise InvariantViolationError("width", f"argument width {w} not in 8/16/32")
        for e in entries:
            check_entry(e, w, f"args {w}")
    for (p, w), entries in conv.positional_prefs:
        if p < 1 or w not in WIDTHS:
            raise InvariantViolationError("position", f"bad positional key {p}:{w}")
        for e in entries:
            check_entry(e, w, f"args {p}:{w}")
    if conv.max_register_params < 0:
        raise InvariantViolationError("max-register-params", "must be non-negative")
    if conv.stack_slot_width_for_8bit not in (8, 16):
        raise InvariantViolationError("slot-width", "8-bit stack slots are 8 or 16 bits wide")


@dataclass(frozen=True)
class AssignmentPlan:
    param_locs: tuple[Location, ...]
    param_widths: tuple[int, ...]
    return_loc: Registers | Memory | None
    return_width: int
    cleanup_side: str
    stack_arg_bytes: int

    def registers_used(self) -> list[str]:
        return [r for loc in self.param_locs if isinstance(loc, Registers) for r in loc.regs]

    def describe(self) -> str:
        parts = [f"p{i}={loc}" for i, loc in enumerate(self.param_locs, 1)]
        parts.append(f"ret={self.return_loc if self.return_loc is not None else 'none'}")
        parts.append(f"cleanup={self.cleanup_side}")
        return ", ".join(parts)


def resolve_cleanup(conv: CallingConvention, sig: FunctionSignature) -> str:
    if sig.varargs:
        return "caller"
    policy = conv.cleanup
    if policy.mode == "caller_always":
        return "caller"
    if policy.mode == "callee_always":
        return "callee"
    if sig.return_type.width in policy.callee_if_return_width_in:
        return "callee"
    if (
        policy.callee_if_float_float
        and sig.return_type.kind == "float"
        and sig.params
        and sig.params[0].kind == "float"
    ):
        return "callee"
    return "caller"


def assign(conv: CallingConvention, sig: FunctionSignature, arch: Architecture) -> AssignmentPlan:
    """Greedy left-to-right location assignment.

    Each parameter takes the first preference entry not overlapping a register
    already handed out, while fewer than ``max_register_params`` parameters sit
    in registers.  Everything else goes to the stack in parameter order;
    varargs signatures pass every named parameter on the stack.
    """
    for w in (sig.return_type.width, *(p.width for p in sig.params)):
        if w not in (0, *WIDTHS):
            raise UnsupportedWidthError(f"unsupported width {w}")
    missing = conv.referenced_registers() - set(arch.register_names)
    if missing:
        raise InvariantViolationError(
            "arch-mismatch", f"{conv.name} uses {', '.join(sorted(missing))}, absent on {arch.id}"
        )
    locs, stack_bytes = _assign_params(conv, sig.params, sig.varargs, arch)

    rw = sig.return_type.width
    if rw == 0:
        ret_loc = None
    else:
        regs = conv.ret_for(rw)
        ret_loc = Registers(regs) if regs else Memory(rw // 8)
    return AssignmentPlan(
        param_locs=locs,
        param_widths=tuple(p.width for p in sig.params),
        return_loc=ret_loc,
        return_width=rw,
        cleanup_side=resolve_cleanup(conv, sig),
        stack_arg_bytes=stack_bytes,
    )


def _assign_params(conv, params, varargs, arch):
    overlaps = arch.overlaps
    used: set[str] = set()
    locs: list[Location] = []
    offset = 0
    forced_stack = varargs
    in_regs = 0
    widths_seen: set[int] = set()
    for pos, p in enumerate(params, 1):
        w = p.width
        placed = None
        if (
            not forced_stack
            and in_regs < conv.max_register_params
            and not (conv.first_of_each_width and w in widths_seen)
        ):
            for entry in conv.prefs_for(pos, w):
                if not any(r in used for r in entry):
                    placed = entry
                    break
        widths_seen.add(w)
        if placed is not None:
            locs.append(Registers(placed))
            for r in placed:
                used |= overlaps[r]
            in_regs += 1
        else:
            slot = conv.stack_slot_width_for_8bit // 8 if w == 8 else w // 8
            locs.append(Stack(offset, slot))
            offset += slot
            if conv.stop_on_stack:
                forced_stack = True
    return tuple(locs), offset


# --- builtins ---------------------------------------------------------------

def _conv(name, arch, ret, args=None, positional=None, **kw) -> CallingConvention:
    return CallingConvention(
        name=name,
        arch=arch,
        ret_reg=ret,
        arg_prefs=args or {},
        positional_prefs=positional or {},
        **kw,
    )


def _builtins() -> dict[str, CallingConvention]:
    stm8_ret = {8: "a", 16: "x", 32: ("x", "y")}
    stm8_ret_pseudo = {8: "a", 16: "x", 32: ()}
    stm8_args = {8: ["a"], 16: ["x"]}
    convs = [
        _conv("stm8-old", "stm8", stm8_ret),
        _conv("stm8-new", "stm8", stm8_ret, stm8_args, cleanup=SMALL_RETURN_OR_FLOAT),
        _conv("stm8-raisonance", "stm8", stm8_ret_pseudo, stm8_args),
        _conv("stm8-cosmic", "stm8", stm8_ret_pseudo, stm8_args, max_register_params=1),
        _conv(
            "stm8-iar", "stm8", stm8_ret_pseudo, stm8_args,
            first_of_each_width=True, stop_on_stack=False,
        ),
        _conv("z80-old", "z80", {8: "l", 16: "hl", 32: ("de", "hl")}, exclude_reserved=True),
        _conv(
            "z80-new", "z80", {8: "a", 16: "de", 32: ("hl", "de")},
            {8: ["a", "l"], 16: ["hl", "de"], 32: [("hl", "de")]},
            {(2, 16): ["de"], (2, 32): []},
            cleanup=SMALL_RETURN_OR_FLOAT, exclude_reserved=True,
        ),
        _conv("sm83-old", "sm83", {8: "e", 16: "de", 32: ("hl", "de")}),
        _conv(
            "sm83-new", "sm83", {8: "a", 16: "bc", 32: ("de", "bc")},
            {8: ["a", "e"], 16: ["de", "bc"], 32: [("de", "bc")]},
            {(2, 32): []},
            cleanup=CALLEE_ALWAYS,
        ),
        _conv(
            "rabbit-new", "r3ka", {8: "a", 16: "hl", 32: ("hl", "de")},
            {8: ["a", "l"], 16: ["hl"], 32: [("hl", "de")]},
            {(2, 32): []},
            cleanup=SMALL_RETURN_OR_FLOAT, exclude_reserved=True,
        ),
    ]
    return {c.name: c for c in convs}


BUILTIN_NAMES = (
    "stm8-old", "stm8-new", "stm8-raisonance", "stm8-cosmic", "stm8-iar",
    "z80-old", "z80-new", "sm83-old", "sm83-new", "rabbit-new",
)

# Which builtins serve which targets.
SERVES = {
    "stm8": ("stm8",),
    "z80": ("z80", "z180", "z80n"),
    "sm83": ("sm83",),
    "r3ka": ("r2k", "r2ka", "r3ka", "ez80", "tlcs90"),
}


@functools.lru_cache(maxsize=None)
def _builtin_table() -> dict[str, CallingConvention]:
    return _builtins()


def builtin_convention(name: str) -> CallingConvention:
    try:
        return _builtin_table()[name]
    except KeyError:
        raise UnknownConventionError(
            f"unknown convention {name!r}; builtins: {', '.join(BUILTIN_NAMES)}"
        ) from None


def builtin_conventions() -> list[CallingConvention]:
    return [builtin_convention(n) for n in BUILTIN_NAMES]


def convention_for_arch(conv: CallingConvention, arch_id: str) -> CallingConvention:
    """Re-target ``conv`` to a variant of the same register family (z80 -> z180, ...)."""
    if conv.arch == arch_id:
        return conv
    return conv.replace(arch=arch_id)


# --- documents --------------------------------------------------------------

def _fmt_entry(entry: tuple[str, ...]) -> str:
    return " ".join(entry)


def _fmt_entries(entries: Sequence[tuple[str, ...]]) -> str:
    return ", ".join(_fmt_entry(e) for e in entries) if entries else "-"


def _fmt_bool(b: bool) -> str:
    return "true" if b else "false"


def print_convention(conv: CallingConvention) -> str:
    """Render the sectioned key-value document; :func:`parse_convention` inverts it."""
    lines = [
        f"name = {conv.name}",
        f"arch = {conv.arch}",
        f"exclude_reserved = {_fmt_bool(conv.exclude_reserved)}",
        "",
        "[return]",
    ]
    for w, regs in conv.ret_reg:
        lines.append(f"{w} = {_fmt_entry(regs) if regs else 'mem'}")
    lines += ["", "[args]"]
    for w, entries in conv.arg_prefs:
        lines.append(f"{w} = {_fmt_entries(entries)}")
    for (p, w), entries in conv.positional_prefs:
        lines.append(f"{p}:{w} = {_fmt_entries(entries)}")
    lines += [
        f"max_register_params = {conv.max_register_params}",
        f"stop_on_stack = {_fmt_bool(conv.stop_on_stack)}",
        f"first_of_each_width = {_fmt_bool(conv.first_of_each_width)}",
        "",
        "[cleanup]",
        f"mode = {conv.cleanup.mode}",
        "callee_if_return_width_in = "
        + (" ".join(str(w) for w in sorted(conv.cleanup.callee_if_return_width_in)) or "-"),
        f"callee_if_float_float = {_fmt_bool(conv.cleanup.callee_if_float_float)}",
        "",
        "[stack]",
        f"slot_width_8bit = {conv.stack_slot_width_for_8bit}",
    ]
    return "\n".join(lines) + "\n"


def convention_to_dict(conv: CallingConvention) -> dict:
    return {
        "name": conv.name,
        "arch": conv.arch,
        "exclude_reserved": conv.exclude_reserved,
        "return": {str(w): list(regs) if regs else "mem" for w, regs in conv.ret_reg},
        "args": {
            "prefs": {str(w): [list(e) for e in entries] for w, entries in conv.arg_prefs},
            "positional": {f"{p}:{w}": [list(e) for e in entries] for (p, w), entries in conv.positional_prefs},
            "max_register_params": conv.max_register_params,
            "stop_on_stack": conv.stop_on_stack,
            "first_of_each_width": conv.first_of_each_width,
        },
        "cleanup": {
            "mode": conv.cleanup.mode,
            "callee_if_return_width_in": sorted(conv.cleanup.callee_if_return_width_in),
            "callee_if_float_float": conv.cleanup.callee_if_float_float,
        },
        "stack": {"slot_width_8bit": conv.stack_slot_width_for_8bit},
    }


def convention_to_json(conv: CallingConvention) -> str:
    return json.dumps(convention_to_dict(conv), indent=2) + "\n"


def convention_from_dict(d: Mapping) -> CallingConvention:
    try:
        args = d.get("args", {})
        cleanup = d.get("cleanup", {})
        ret = {int(w): (() if v == "mem" else tuple(v)) for w, v in d["return"].items()}
        positional = {}
        for key, entries in args.get("positional", {}).items():
            p, w = key.split(":")
            positional[(int(p), int(w))] = [tuple(e) for e in entries]
        return CallingConvention(
            name=d["name"],
            arch=d["arch"],
            exclude_reserved=bool(d.get("exclude_reserved", False)),
            ret_reg=ret,
            arg_prefs={int(w): [tuple(e) for e in v] for w, v in args.get("prefs", {}).items()},
            positional_prefs=positional,
            max_register_params=int(args.get("max_register_params", 2)),
            stop_on_stack=bool(args.get("stop_on_stack", True)),
            first_of_each_width=bool(args.get("first_of_each_width", False)),
            cleanup=CleanupPolicy(
                cleanup.get("mode", "caller_always"),
                frozenset(int(w) for w in cleanup.get("callee_if_return_width_in", ())),
                bool(cleanup.get("callee_if_float_float", False)),
            ),
            stack_slot_width_for_8bit=int(d.get("stack", {}).get("slot_width_8bit", 8)),
        )
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        if isinstance(exc, InvariantViolationError):
            raise
        raise ConventionSyntaxError(f"malformed convention document: {exc}") from None


def read_sections(text: str, source: str = "<document>") -> dict[str, list[tuple[int, str, str]]]:
    """Split a ``key = value`` document into sections (top level is ``""``)."""
    sections: dict[str, list[tuple[int, str, str]]] = {"": []}
    current = ""
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConventionSyntaxError(f"{source}:{lineno}: unterminated section header")
            current = line[1:-1].strip()
            if current in sections:
                raise ConventionSyntaxError(f"{source}:{lineno}: duplicate section [{current}]")
            sections[current] = []
            continue
        if "=" not in line:
            raise ConventionSyntaxError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConventionSyntaxError(f"{source}:{lineno}: empty key")
        sections[current].append((lineno, key, value))
    return sections


def parse_bool(value: str, where: str) -> bool:
    if value in ("true", "yes", "1"):
        return True
    if value in ("false", "no", "0"):
        return False
    raise ConventionSyntaxError(f"{where}: expected true/false, got {value!r}")


def parse_entries(value: str) -> tuple[tuple[str, ...], ...]:
    if value.strip() in ("-", ""):
        return ()
    return tuple(tuple(part.split()) for part in value.split(","))


def parse_width_set(value: str, where: str) -> frozenset[int]:
    if value.strip() in ("-", ""):
        return frozenset()
    try:
        return frozenset(int(t) for t in value.split())
    except ValueError:
        raise ConventionSyntaxError(f"{where}: expected widths, got {value!r}") from None


def _int(value: str, where: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConventionSyntaxError(f"{where}: expected an integer, got {value!r}") from None


_KNOWN_KEYS = {
    "": {"name", "arch", "exclude_reserved"},
    "cleanup": {"mode", "callee_if_return_width_in", "callee_if_float_float"},
    "stack": {"slot_width_8bit"},
}


def parse_convention(text: str, source: str = "<document>") -> CallingConvention:
    """Parse a convention document (sectioned text, or the JSON form)."""
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConventionSyntaxError(f"{source}: invalid JSON: {exc}") from None
        return convention_from_dict(data)

    sections = read_sections(text, source)
    unknown = set(sections) - {"", "return", "args", "cleanup", "stack"}
    if unknown:
        raise ConventionSyntaxError(f"{source}: unknown section(s) {', '.join(sorted(unknown))}")
    top = {}
    for lineno, key, value in sections[""]:
        if key not in _KNOWN_KEYS[""]:
            raise ConventionSyntaxError(f"{source}:{lineno}: unknown key {key!r}")
        top[key] = value
    if "arch" not in top:
        raise ConventionSyntaxError(f"{source}: missing 'arch'")

    ret = {}
    for lineno, key, value in sections.get("return", []):
        w = _int(key, f"{source}:{lineno}")
        ret[w] = () if value == "mem" else tuple(value.split())

    args: dict[int, tuple] = {}
    positional = {}
    flags = {}
    for lineno, key, value in sections.get("args", []):
        where = f"{source}:{lineno}"
        if key in ("max_register_params",):
            flags[key] = _int(value, where)
        elif key in ("stop_on_stack", "first_of_each_width"):
            flags[key] = parse_bool(value, where)
        elif ":" in key:
            p, w = key.split(":", 1)
            positional[(_int(p, where), _int(w, where))] = parse_entries(value)
        else:
            args[_int(key, where)] = parse_entries(value)

    cleanup_kw = {}
    for lineno, key, value in sections.get("cleanup", []):
        where = f"{source}:{lineno}"
        if key not in _KNOWN_KEYS["cleanup"]:
            raise ConventionSyntaxError(f"{where}: unknown key {key!r}")
        if key == "mode":
            cleanup_kw["mode"] = value
        elif key == "callee_if_return_width_in":
            cleanup_kw[key] = parse_width_set(value, where)
        else:
            cleanup_kw[key] = parse_bool(value, where)

    slot = 8
    for lineno, key, value in sections.get("stack", []):
        if key not in _KNOWN_KEYS["stack"]:
            raise ConventionSyntaxError(f"{source}:{lineno}: unknown key {key!r}")
        slot = _int(value, f"{source}:{lineno}")

    return CallingConvention(
        name=top.get("name", "custom"),
        arch=top["arch"],
        exclude_reserved=parse_bool(top.get("exclude_reserved", "false"), source),
        ret_reg=ret,
        arg_prefs=args,
        positional_prefs=positional,
        max_register_params=flags.get("max_register_params", 2),
        stop_on_stack=flags.get("stop_on_stack", True),
        first_of_each_width=flags.get("first_of_each_width", False),
        cleanup=CleanupPolicy(**cleanup_kw),
        stack_slot_width_for_8bit=slot,
    )


def resolve_convention(ref: str) -> CallingConvention:
    """A builtin name, or a path to a convention document."""
    from pathlib import Path

    try:
        return builtin_convention(ref)
    except UnknownConventionError:
        p = Path(ref)
        if not p.is_file():
            raise
        return parse_convention(p.read_text(encoding="utf-8"), source=str(p))


def iter_signature_plans(
    conv: CallingConvention, sigs: Iterable[FunctionSignature], arch: Architecture
) -> list[AssignmentPlan]:
    return [assign(conv, s, arch) for s in sigs]
