from __future__ import annotations

import itertools

import pytest

from ccwb.archmodel import (
    ARCH_IDS,
    FAMILY,
    Cost,
    conflicts,
    default_cost_tables,
    format_cost_tables,
    get_architecture,
    load_cost_tables,
    parse_cost_tables,
    resolve_cost_tables,
)
from ccwb.errors import CostTableError, MissingTableEntryError, UnknownArchitectureError, UnknownRegisterError

Z80_LIKE = [a for a in ARCH_IDS if FAMILY[a] in ("z80", "rabbit", "sm83")]


def test_stm8_registers():
    arch = get_architecture("stm8")
    assert set(arch.register_names) == {"a", "x", "y", "xl", "xh", "yl", "yh"}
    assert arch.register("x").parts == ("xh", "xl")
    assert arch.push_granularity == 8


def test_sm83_has_no_index_registers():
    names = set(get_architecture("sm83").register_names)
    assert "ix" not in names and "iy" not in names
    assert {"bc", "de", "hl", "a"} <= names


def test_exclude_reserved():
    assert get_architecture("z80", True).allocatable_of_width(16) == ("bc", "de", "hl")
    assert "ix" in get_architecture("z80", False).allocatable_of_width(16)
    ez = get_architecture("ez80", True)
    assert not {"ix", "iy", "ixh", "ixl", "iyh", "iyl"} & set(ez.allocatable)
    # no effect where nothing is reserved
    assert get_architecture("stm8", True).allocatable == get_architecture("stm8").allocatable
    assert get_architecture("sm83", True).allocatable == get_architecture("sm83").allocatable


@pytest.mark.parametrize("aid", ARCH_IDS)
def test_push_granularity(aid):
    expected = 8 if aid == "stm8" else 16
    assert get_architecture(aid).push_granularity == expected


def test_unknown_architecture():
    with pytest.raises(UnknownArchitectureError):
        get_architecture("6502")


def test_conflicts_examples():
    z80 = get_architecture("z80")
    assert conflicts(z80, "hl", "l")
    assert not conflicts(z80, "hl", "de")
    assert not conflicts(get_architecture("stm8"), "a", "xl")
    with pytest.raises(UnknownRegisterError):
        conflicts(z80, "hl", "x")


def _reference_conflict(arch, r1, r2):
    a, b = arch.register(r1), arch.register(r2)
    return r1 == r2 or r1 in b.parts or r2 in a.parts or bool(set(a.parts) & set(b.parts))


@pytest.mark.parametrize("aid", ARCH_IDS)
def test_conflicts_symmetric_reflexive_and_matches_reference(aid):
    arch = get_architecture(aid)
    for r1, r2 in itertools.product(arch.register_names, repeat=2):
        assert conflicts(arch, r1, r2) == conflicts(arch, r2, r1)
        assert conflicts(arch, r1, r2) == _reference_conflict(arch, r1, r2)
    for r in arch.register_names:
        assert conflicts(arch, r, r)


def test_architecture_is_deterministic():
    assert get_architecture("z80", True) is get_architecture("z80", True)
    a = get_architecture("stm8")
    b = get_architecture("stm8", cost_tables=default_cost_tables("stm8"))
    assert a.registers == b.registers and a.reserved == b.reserved


def test_cost_arithmetic():
    assert Cost(1, 2) + Cost(3, 4) == Cost(4, 6) == Cost(3, 4) + Cost(1, 2)
    assert sum([Cost(1, 1), Cost(2, 2)]) == Cost(3, 3)
    assert 3 * Cost(1, 2) == Cost(3, 6)
    with pytest.raises(ValueError):
        Cost(-1, 0)
    assert Cost(1, 1).dominates(Cost(1, 2))
    assert not Cost(1, 1).dominates(Cost(1, 1))


# --- cost-table audit ---------------------------------------------------------------

@pytest.mark.parametrize("aid", ARCH_IDS)
def test_tables_nonnegative_and_complete(aid):
    arch = get_architecture(aid)
    t = arch.cost_tables
    every = [*t.load.values(), *t.push.values(), *t.access_reg.values(), *t.access_stack.values(),
             *t.sp_adjust.values(), t.call, t.ret, t.access_pair]
    assert all(c.bytes >= 0 and c.cycles >= 0 for c in every)
    for name in arch.register_names:
        w = arch.register(name).width
        assert (name, w) in t.load, name
        assert (name, w) in t.access_reg, name
    for w in (8, 16, 32):
        assert w in t.access_stack
    assert {(8, 8), (16, 8), (16, 16), (32, 32)} <= set(t.push)
    frees = t.free_counts()
    assert frees == list(range(len(arch.allocatable_of_width(16)) + 1)) or aid in ("stm8",)
    for n in range(1, 65):
        for f in frees:
            assert (n, f) in t.sp_adjust
    if arch.push_granularity == 16:
        assert t.push_pair is not None
    else:
        assert t.push_pair is None


# y-forms that carry the 0x90 prefix, paired with their x-forms
STM8_PREFIXED = [
    ("access_reg", ("x", 16), ("y", 16)),
    ("access_reg", ("xl", 8), ("yl", 8)),
    ("access_reg", ("xh", 8), ("yh", 8)),
    ("load", ("xl", 8), ("yl", 8)),
    ("load", ("xh", 8), ("yh", 8)),
]


def test_stm8_y_prefix_penalty():
    t = default_cost_tables("stm8")
    for table, kx, ky in STM8_PREFIXED:
        tab = getattr(t, table)
        assert tab[ky].bytes == tab[kx].bytes + 1, (table, kx, ky)
    # ldw y,(n,sp) has its own unprefixed opcode, so no penalty there
    assert t.load[("y", 16)].bytes == t.load[("x", 16)].bytes


@pytest.mark.parametrize("aid", Z80_LIKE)
def test_eight_bit_slots_cost_more_caller_bytes(aid):
    t = default_cost_tables(aid)
    assert t.push[(8, 8)].bytes > t.push[(16, 8)].bytes


def test_sm83_sp_adjust_ignores_free_registers():
    t = default_cost_tables("sm83")
    for n in range(1, 65):
        assert len({t.sp_adjust[(n, f)] for f in t.free_counts()}) == 1


@pytest.mark.parametrize("aid", [a for a in ARCH_IDS if a != "sm83"])
def test_sp_adjust_non_increasing_in_free_registers(aid):
    t = default_cost_tables(aid)
    frees = t.free_counts()
    for n in range(1, 65):
        seq = [t.sp_adjust[(n, f)] for f in frees]
        # Cost orders lexicographically: bytes first, cycles break ties.  On Z180
        # a pop is one byte shorter but one cycle slower than two inc sp.
        assert all(b <= a for a, b in zip(seq, seq[1:])), (n, seq)
        assert all(b.bytes <= a.bytes for a, b in zip(seq, seq[1:]))


def test_variants_share_byte_counts():
    z80 = default_cost_tables("z80")
    for v in ("z180", "z80n"):
        t = default_cost_tables(v)
        assert {k: c.bytes for k, c in t.load.items()} == {k: c.bytes for k, c in z80.load.items()}
        assert {k: c.bytes for k, c in t.sp_adjust.items()} == {k: c.bytes for k, c in z80.sp_adjust.items()}
    r3ka = default_cost_tables("r3ka")
    for v in ("r2k", "r2ka", "tlcs90"):
        t = default_cost_tables(v)
        assert {k: c.bytes for k, c in t.push.items()} == {k: c.bytes for k, c in r3ka.push.items()}


def test_sp_adjust_clamps_free_count():
    t = default_cost_tables("z80")
    assert t.sp_adjust_cost(4, 99) == t.sp_adjust_cost(4, max(t.free_counts()))
    with pytest.raises(MissingTableEntryError):
        t.sp_adjust_cost(1000, 0)


# --- table I/O ---------------------------------------------------------------------

@pytest.mark.parametrize("aid", ARCH_IDS)
def test_table_format_round_trip(aid):
    t = default_cost_tables(aid)
    t2 = parse_cost_tables(format_cost_tables(t))
    for attr in ("load", "push", "access_reg", "access_stack", "sp_adjust"):
        assert dict(getattr(t, attr)) == dict(getattr(t2, attr))
    assert (t.call, t.ret, t.push_pair, t.access_pair) == (t2.call, t2.ret, t2.push_pair, t2.access_pair)


@pytest.mark.parametrize("text, msg", [
    ("", "missing 'arch'"),
    ("ccwb-costs 2\n", "header"),
    ("ccwb-costs 1\narch stm8\ncall 3 4\n", "missing 'ret'"),
    ("ccwb-costs 1\narch stm8\ncall 3 x\n", "integer"),
    ("ccwb-costs 1\narch stm8\nfrob 1 2 3\n", "unrecognized"),
    ("ccwb-costs 1\narch pdp11\n", "bad arch"),
    ("ccwb-costs 1\narch stm8\ncall -1 2\nret 1 1\n", "negative"),
])
def test_table_parse_errors(text, msg):
    with pytest.raises(CostTableError, match=msg):
        parse_cost_tables(text)


def test_override_precedence(tmp_path, monkeypatch):
    t = default_cost_tables("stm8")
    text = format_cost_tables(t).replace(f"call {t.call.bytes} {t.call.cycles}", "call 9 9")
    (tmp_path / "stm8.txt").write_text(text)
    assert load_cost_tables(tmp_path, "stm8").call == Cost(9, 9)
    monkeypatch.setenv("CCWB_COST_TABLES", str(tmp_path))
    assert resolve_cost_tables("stm8").call == Cost(9, 9)
    explicit = tmp_path / "other.txt"
    explicit.write_text(text.replace("call 9 9", "call 7 7"))
    assert resolve_cost_tables("stm8", explicit).call == Cost(7, 7)
    monkeypatch.delenv("CCWB_COST_TABLES")
    assert resolve_cost_tables("stm8").call == t.call
    with pytest.raises(CostTableError):
        load_cost_tables(tmp_path / "stm8.txt", "z80")
    with pytest.raises(CostTableError):
        load_cost_tables(tmp_path / "missing.txt")
