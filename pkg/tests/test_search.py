from __future__ import annotations

import itertools
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ccwb.archmodel import Cost, get_architecture
from ccwb.convention import CALLEE_ALWAYS, CALLER_ALWAYS, SMALL_RETURN_OR_FLOAT
from ccwb.costing import DEFAULT_WEIGHTS, SIZE_ONLY, ScoreWeights
from ccwb.errors import EmptySpaceError, InvariantViolationError, UnknownHotTypeError
from ccwb.search import (
    Candidate,
    SearchSpace,
    default_space,
    enumerate_space,
    format_space,
    pareto_front,
    parse_space,
    rank,
    search,
    search_with_overrides,
)
from ccwb.sigmodel import default_corpus, parse_signature

STM8_ARGS = ((8, ([("a",)],)), (16, ([("x",)],)), (32, ([],)))


def stm8_space(**kw):
    base = dict(
        arch="stm8",
        ret8_choices=[("a",)],
        ret16_choices=[("x",)],
        ret32_choices=[("x", "y")],
        arg_pref_choices=STM8_ARGS,
        cleanup_choices=[SMALL_RETURN_OR_FLOAT],
    )
    base.update(kw)
    return SearchSpace(**base)


def test_product_count():
    space = stm8_space(ret16_choices=["x", "y"], ret32_choices=[("x", "y"), ("y", "x")])
    assert len(list(enumerate_space(space))) == 4


def test_z80_ordered_pairs():
    regs = ["bc", "de", "hl"]
    pairs = [p for p in itertools.product(regs, repeat=2) if p[0] != p[1]]
    assert len(pairs) == 6
    space = SearchSpace(
        arch="z80", ret8_choices=["a"], ret16_choices=["hl"],
        ret32_choices=list(itertools.product(regs, repeat=2)),
        arg_pref_choices=(), exclude_reserved=True,
    )
    got = [dict(c.ret_reg)[32] for c in enumerate_space(space)]
    assert got == pairs


def test_conflicting_pairs_never_yielded():
    space = stm8_space(ret32_choices=[("x", "x"), ("x", "y")])
    assert [dict(c.ret_reg)[32] for c in enumerate_space(space)] == [("x", "y")]
    with pytest.raises(EmptySpaceError):
        list(enumerate_space(stm8_space(ret32_choices=[("x", "x")])))


def test_equivalent_preference_lists_collapse():
    # (x y) then (y x) reduces to just (x y): the second entry can never be picked
    space = stm8_space(arg_pref_choices=((8, ([],)), (16, ([],)), (32, ([("x", "y")], [("x", "y"), ("y", "x")]))))
    assert len(list(enumerate_space(space))) == 1


def test_space_bounds():
    with pytest.raises(InvariantViolationError):
        stm8_space(ret8_choices=["b"])
    with pytest.raises(InvariantViolationError):
        SearchSpace(arch="z80", ret8_choices=["a"], ret16_choices=["ix"], ret32_choices=[("hl", "de")],
                    arg_pref_choices=())


def cand(i, b, c, w=DEFAULT_WEIGHTS):
    from ccwb.costing import score

    return Candidate(i, None, Cost(b, c), score(Cost(b, c), w))


def test_dominance_two_candidates():
    a, b = cand(1, 10, 10), cand(0, 12, 11)
    ranked = rank([b, a])
    assert [c.index for c in ranked] == [1, 0]
    assert [c.index for c in pareto_front(ranked)] == [1]


def _naive_front(cands):
    return [c for c in cands if not any(o.cost.dominates(c.cost) for o in cands)]


@given(st.lists(st.tuples(st.integers(0, 20), st.integers(0, 20)), min_size=1, max_size=40))
def test_pareto_matches_pairwise_definition(costs):
    cands = [cand(i, b, c) for i, (b, c) in enumerate(costs)]
    assert pareto_front(cands) == tuple(_naive_front(cands))


@given(st.lists(st.tuples(st.integers(0, 20), st.integers(0, 20)), min_size=1, max_size=30),
       st.lists(st.tuples(st.integers(0, 20), st.integers(0, 20)), max_size=10))
def test_pareto_never_shrinks(costs, extra):
    small = [cand(i, b, c) for i, (b, c) in enumerate(costs)]
    big = small + [cand(len(small) + i, b, c) for i, (b, c) in enumerate(extra)]
    front_small = {c.cost for c in pareto_front(small)}
    front_big = {c.cost for c in pareto_front(big)}
    # every old front point is either still there or dominated by a new one
    for p in front_small:
        assert p in front_big or any(q.dominates(p) for q in front_big)
    assert len(pareto_front(big)) >= 1


def test_every_non_front_candidate_is_dominated():
    res = search(default_space("stm8"), default_corpus())
    front = {c.cost for c in res.pareto}
    for c in res.ranked:
        if c.cost not in front:
            assert any(p.dominates(c.cost) for p in front)
    assert res.evaluated_count == len(res.ranked) == 5400


SMALL_STM8 = """\
arch = stm8
[return]
8 = a | xl
16 = x | y
32 = x y | y x
[args]
8 = - | a
16 = - | x | y
32 = -
[cleanup]
mode = caller_always | callee_always | conditional
"""


@pytest.mark.parametrize("k", [Fraction(1, 3), 2, 17])
def test_weight_scaling_keeps_ranking(k):
    space = parse_space(SMALL_STM8)
    w = ScoreWeights(1, Fraction(1, 10))
    a = search(space, default_corpus(), weights=w)
    b = search(space, default_corpus(), weights=w.scaled(k))
    assert [c.index for c in a.ranked] == [c.index for c in b.ranked]
    assert [c.index for c in a.pareto] == [c.index for c in b.pareto]


def test_x_outranks_y():
    space = stm8_space(arg_pref_choices=((8, ([("a",)],)), (16, ([("x",)], [("y",)])), (32, ([],))))
    res = search(space, default_corpus(), weights=SIZE_ONLY)
    assert dict(res.best.convention.arg_prefs)[16] == (("x",),)
    assert res.ranked[0].cost.bytes < res.ranked[1].cost.bytes


def test_workers_do_not_change_results():
    space = parse_space(SMALL_STM8)
    a = search(space, default_corpus(), workers=1)
    b = search(space, default_corpus(), workers=3)
    assert [(c.index, c.cost) for c in a.ranked] == [(c.index, c.cost) for c in b.ranked]


def test_overrides():
    space = parse_space(SMALL_STM8)
    corpus = default_corpus()
    none = search_with_overrides(space, corpus, [])
    assert none.overrides == {} and none.total == none.base_total
    hot = parse_signature("f32 f(f32, f32)")
    res = search_with_overrides(space, corpus, [hot])
    o = res.overrides[hot]
    assert o.winner.score <= o.base_score
    assert o.winner.convention.cleanup.mode in ("callee_always", "conditional")
    assert res.total <= res.base_total
    with pytest.raises(UnknownHotTypeError):
        search_with_overrides(space, corpus, [parse_signature("i8 f(i8)")])


def test_override_prefers_callee_cleanup_for_float_type():
    # base fixed to a stm8-new-like convention with caller cleanup available
    space = stm8_space(cleanup_choices=[CALLER_ALWAYS, CALLEE_ALWAYS])
    hot = parse_signature("f32 f(f32, f32)")
    res = search_with_overrides(space, default_corpus(), [hot])
    assert res.overrides[hot].winner.convention.cleanup == CALLEE_ALWAYS


@pytest.mark.parametrize("aid", ["stm8", "z80", "sm83", "r3ka", "ez80"])
def test_default_spaces(aid):
    space = default_space(aid)
    assert space.arch == aid
    n = sum(1 for _ in enumerate_space(space))
    assert 1000 <= n <= 10000
    assert parse_space(format_space(space)) == space


def test_default_z80_space_avoids_index_registers():
    space = default_space("z80")
    assert space.exclude_reserved
    regs = {r for c in space.ret16_choices + space.ret32_choices for r in c}
    assert not regs & {"ix", "iy"}


def test_result_is_deterministic():
    space = parse_space(SMALL_STM8)
    a = search(space, default_corpus())
    b = search(space, default_corpus())
    assert a == b
    arch = get_architecture("stm8")
    assert search(space, default_corpus(), arch) == a
