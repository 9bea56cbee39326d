from __future__ import annotations

import itertools
from types import SimpleNamespace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccwb.archmodel import conflicts, get_architecture
from ccwb.convention import (
    BUILTIN_NAMES,
    CALLEE_ALWAYS,
    CallingConvention,
    CleanupPolicy,
    Registers,
    Stack,
    assign,
    builtin_convention,
    check_convention,
    convention_to_json,
    parse_convention,
    print_convention,
    resolve_cleanup,
    resolve_convention,
)
from ccwb.errors import (
    ConventionSyntaxError,
    InvariantViolationError,
    UnknownConventionError,
    UnsupportedWidthError,
)
from ccwb.sigmodel import BOOL, FLOAT32, INT8, INT16, INT32, PTR, VOID, FunctionSignature, parse_signature

VALUE_TYPES = [BOOL, INT8, INT16, INT32, FLOAT32, PTR]


def arch_of(conv):
    return get_architecture(conv.arch, conv.exclude_reserved)


def locs(conv_name, text):
    conv = builtin_convention(conv_name)
    plan = assign(conv, parse_signature(text), arch_of(conv))
    return [str(l) for l in plan.param_locs], plan


def test_builtin_examples():
    old = builtin_convention("stm8-old")
    assert old.ret_reg == ((8, ("a",)), (16, ("x",)), (32, ("x", "y")))
    assert all(entries == () for _, entries in old.arg_prefs)
    assert old.cleanup.mode == "caller_always"

    z = builtin_convention("z80-old")
    assert dict(z.ret_reg) == {8: ("l",), 16: ("hl",), 32: ("de", "hl")}

    sm = builtin_convention("sm83-new")
    assert dict(sm.ret_reg) == {8: ("a",), 16: ("bc",), 32: ("de", "bc")}
    assert dict(sm.arg_prefs) == {8: (("a",), ("e",)), 16: (("de",), ("bc",)), 32: (("de", "bc"),)}
    assert sm.cleanup == CALLEE_ALWAYS

    r = builtin_convention("rabbit-new")
    assert dict(r.ret_reg) == {8: ("a",), 16: ("hl",), 32: ("hl", "de")}
    assert dict(r.arg_prefs) == {8: (("a",), ("l",)), 16: (("hl",),), 32: (("hl", "de"),)}


def test_unknown_convention():
    with pytest.raises(UnknownConventionError):
        builtin_convention("sdcc-ancient")
    with pytest.raises(UnknownConventionError):
        resolve_convention("no/such/file.conv")


@pytest.mark.parametrize("conv, sig, expected", [
    ("stm8-new", "i16 f(u8, i16)", ["a", "x"]),
    ("stm8-new", "i16 f(i16, u8)", ["x", "a"]),
    ("stm8-new", "i16 f(u8, u8)", ["a", "stack+0"]),
    ("z80-new", "i32 f(i32)", ["hlde"]),
    ("z80-new", "i8 f(u8, u8)", ["a", "l"]),
    ("sm83-new", "i16 f(i16, i16)", ["de", "bc"]),
    ("stm8-iar", "i16 f(i32, u8)", ["stack+0", "a"]),
    ("stm8-cosmic", "i16 f(u8, i16)", ["a", "stack+0"]),
])
def test_assign_examples(conv, sig, expected):
    assert locs(conv, sig)[0] == expected


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_varargs_and_void(name):
    got, plan = locs(name, "i16 f(ptr, ...)")
    assert got == ["stack+0"] and plan.cleanup_side == "caller"
    got, plan = locs(name, "void f(void)")
    assert got == [] and plan.return_loc is None and plan.stack_arg_bytes == 0


def test_pseudoregister_return():
    _, plan = locs("stm8-cosmic", "i32 f(void)")
    assert str(plan.return_loc) == "mem"


def test_unsupported_width():
    conv = builtin_convention("stm8-new")
    odd = SimpleNamespace(width=24, kind="integer", is_void=False)
    with pytest.raises(UnsupportedWidthError):
        assign(conv, FunctionSignature(INT8, (odd,)), arch_of(conv))


def test_arch_mismatch():
    with pytest.raises(InvariantViolationError, match="arch-mismatch"):
        assign(builtin_convention("stm8-new"), parse_signature("void f(i16)"), get_architecture("z80"))


# --- plan invariants ------------------------------------------------------------

signatures = st.builds(
    lambda ret, params, va: FunctionSignature(ret, tuple(params), va and bool(params)),
    st.sampled_from([VOID] + VALUE_TYPES),
    st.lists(st.sampled_from(VALUE_TYPES), max_size=6),
    st.booleans(),
)


def check_plan(conv, sig, plan, arch):
    regs = plan.registers_used()
    for r1, r2 in itertools.combinations(regs, 2):
        assert not conflicts(arch, r1, r2), (r1, r2)
    offset = 0
    for loc, p in zip(plan.param_locs, sig.params):
        if isinstance(loc, Stack):
            assert loc.offset == offset
            expected_slot = conv.stack_slot_width_for_8bit // 8 if p.width == 8 else p.width // 8
            assert loc.slot_bytes == expected_slot
            offset += loc.slot_bytes
        else:
            assert isinstance(loc, Registers)
    assert offset == plan.stack_arg_bytes
    if sig.varargs:
        assert all(isinstance(l, Stack) for l in plan.param_locs)
        assert plan.cleanup_side == "caller"
    assert len([l for l in plan.param_locs if isinstance(l, Registers)]) <= conv.max_register_params


@settings(max_examples=300)
@given(st.sampled_from(BUILTIN_NAMES), signatures)
def test_plan_invariants(name, sig):
    conv = builtin_convention(name)
    arch = arch_of(conv)
    plan = assign(conv, sig, arch)
    check_plan(conv, sig, plan, arch)
    assert assign(conv, sig, arch) == plan


@settings(max_examples=300)
@given(st.sampled_from(BUILTIN_NAMES), signatures, st.sampled_from(VALUE_TYPES))
def test_appending_a_parameter_keeps_earlier_locations(name, sig, extra):
    conv = builtin_convention(name)
    arch = arch_of(conv)
    longer = FunctionSignature(sig.return_type, sig.params + (extra,), sig.varargs)
    a, b = assign(conv, sig, arch), assign(conv, longer, arch)
    assert b.param_locs[: len(a.param_locs)] == a.param_locs


def test_raisonance_matches_new_on_short_signatures():
    new, rai = builtin_convention("stm8-new"), builtin_convention("stm8-raisonance")
    arch = arch_of(new)
    for n in (0, 1, 2):
        for params in itertools.product(VALUE_TYPES, repeat=n):
            for va in (False, True) if n else (False,):
                sig = FunctionSignature(INT16, params, va)
                assert assign(new, sig, arch).param_locs == assign(rai, sig, arch).param_locs


def test_retargeted_builtins():
    z = builtin_convention("z80-new")
    for aid in ("z180", "z80n"):
        moved = z.replace(arch=aid)
        assert assign(moved, parse_signature("i8 f(u8, u8)"), arch_of(moved)).registers_used() == ["a", "l"]
    r = builtin_convention("rabbit-new")
    for aid in ("r2k", "r2ka", "ez80", "tlcs90"):
        moved = r.replace(arch=aid)
        assert str(assign(moved, parse_signature("i32 f(i32)"), arch_of(moved)).param_locs[0]) == "hlde"


# --- cleanup ---------------------------------------------------------------------

def _cleanup_oracle(mode, ret_width, ret_float, first_float, varargs):
    if varargs:
        return "caller"
    if mode == "caller_always":
        return "caller"
    if mode == "callee_always":
        return "callee"
    return "callee" if ret_width <= 16 or (ret_float and first_float) else "caller"


def test_cleanup_truth_table():
    stm8_new = builtin_convention("stm8-new")
    for mode in ("caller_always", "callee_always", "conditional"):
        conv = stm8_new.replace(cleanup=CleanupPolicy(mode, frozenset({0, 8, 16}), True))
        for ret, first, va in itertools.product([VOID, INT8, INT16, INT32, FLOAT32], [INT16, FLOAT32], [False, True]):
            sig = FunctionSignature(ret, (first, INT8), va)
            want = _cleanup_oracle(mode, ret.width, ret.kind == "float", first.kind == "float", va)
            assert resolve_cleanup(conv, sig) == want, (mode, str(sig))


@pytest.mark.parametrize("conv, sig, side", [
    ("stm8-new", "f32 f(f32, f32)", "callee"),
    ("stm8-new", "i32 f(i16)", "caller"),
    ("sm83-new", "i32 f(i32)", "callee"),
    ("stm8-old", "void f(i16)", "caller"),
    ("z80-new", "f32 f(f32)", "callee"),
])
def test_cleanup_examples(conv, sig, side):
    assert resolve_cleanup(builtin_convention(conv), parse_signature(sig)) == side


def test_callee_cleanup_flag():
    assert builtin_convention("sm83-new").callee_cleanup_possible
    assert not builtin_convention("z80-old").callee_cleanup_possible


# --- documents ----------------------------------------------------------------------

@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_round_trip(name):
    conv = builtin_convention(name)
    assert parse_convention(print_convention(conv)) == conv
    assert parse_convention(convention_to_json(conv)) == conv
    assert print_convention(parse_convention(print_convention(conv))) == print_convention(conv)


Z80_DOC = """\
name = test
arch = z80
exclude_reserved = {excl}

[return]
8 = a
16 = de
32 = {ret32}

[args]
8 = a, l
16 = {args16}
32 = hl de
"""


def test_iy_rejected_under_exclusion():
    doc = Z80_DOC.format(excl="true", ret32="hl de", args16="hl, iy")
    with pytest.raises(InvariantViolationError) as ei:
        parse_convention(doc)
    assert ei.value.rule == "allocatable"
    # allowed when the profile keeps the index registers
    conv = parse_convention(Z80_DOC.format(excl="false", ret32="hl de", args16="hl, iy"))
    assert ("iy",) in dict(conv.arg_prefs)[16]


def test_aliased_return_pair_rejected():
    with pytest.raises(InvariantViolationError) as ei:
        parse_convention(Z80_DOC.format(excl="true", ret32="hl l", args16="hl"))
    assert ei.value.rule == "conflict"


@pytest.mark.parametrize("mutation, rule", [
    (("args16", "hl, a"), "width"),
    (("ret32", "hl"), "width"),
    (("ret32", "hl qq"), "unknown-register"),
])
def test_other_invariant_violations(mutation, rule):
    fields = {"excl": "true", "ret32": "hl de", "args16": "hl"}
    fields[mutation[0]] = mutation[1]
    with pytest.raises(InvariantViolationError) as ei:
        parse_convention(Z80_DOC.format(**fields))
    assert ei.value.rule == rule


@pytest.mark.parametrize("doc, msg", [
    ("arch = z80\n[bogus]\n", "unknown section"),
    ("arch = z80\nfrob\n", "key = value"),
    ("arch = z80\n[return\n", "unterminated"),
    ("name = x\n", "missing 'arch'"),
    ("arch = z80\ncolour = blue\n", "unknown key"),
    ("arch = z80\nexclude_reserved = maybe\n", "true/false"),
    ("arch = z80\n[stack]\nslot_width_8bit = wide\n", "integer"),
    ("{ not json", "invalid JSON"),
    ('{"arch": "z80"}', "malformed"),
])
def test_syntax_errors(doc, msg):
    with pytest.raises(ConventionSyntaxError, match=msg):
        parse_convention(doc)


def test_missing_return_widths_and_bad_cleanup():
    with pytest.raises(InvariantViolationError, match="return"):
        parse_convention("arch = stm8\n[return]\n8 = a\n")
    with pytest.raises(InvariantViolationError, match="cleanup"):
        parse_convention("arch = stm8\n[return]\n8 = a\n16 = x\n32 = x y\n[cleanup]\nmode = sometimes\n")


def test_check_convention_accepts_builtins_on_their_targets():
    for name in BUILTIN_NAMES:
        conv = builtin_convention(name)
        check_convention(conv, arch_of(conv))


def test_document_file(tmp_path):
    p = tmp_path / "mine.conv"
    p.write_text(print_convention(builtin_convention("z80-new")).replace("name = z80-new", "name = mine"))
    conv = resolve_convention(str(p))
    assert conv.name == "mine"
    assert conv.replace(name="z80-new") == builtin_convention("z80-new")


def test_explicit_construction_validates():
    with pytest.raises(InvariantViolationError):
        CallingConvention("bad", "stm8", ret_reg={8: "x", 16: "x", 32: ("x", "y")})
