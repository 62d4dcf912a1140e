import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from basintopo.cubetopo import (
    BettiProfile,
    EmptyComplexError,
    betti,
    betti_by_rank,
    complex_from_mask,
    compare_profiles,
    parse_verdict,
)


def profile(mask, periodic=False):
    return betti(complex_from_mask(mask, periodic))


def test_full_square_counts():
    p = profile(np.ones((10, 10), bool))
    assert (p.V, p.E, p.F, p.chi) == (121, 220, 100, 1)
    assert p.pair == (1, 0)


def test_one_hole():
    m = np.ones((10, 10), bool)
    m[4, 5] = False
    p = profile(m)
    assert p.chi == 0 and p.pair == (1, 1)


def test_two_holes_against_oracle():
    m = np.ones((10, 10), bool)
    m[2, 2] = m[7, 6] = False
    c = complex_from_mask(m)
    assert betti(c).pair == (1, 2)
    assert betti_by_rank(c) == (1, 2, 0)


def test_periodic_band():
    p = profile(np.ones((8, 4), bool), periodic=True)
    assert (p.V, p.E, p.F, p.chi) == (40, 72, 32, 0)
    assert p.pair == (1, 1)


def test_periodic_band_cut_is_a_disc():
    m = np.ones((8, 4), bool)
    m[0] = False
    assert profile(m, periodic=True).pair == (1, 0)


def test_diagonal_touch_is_connected():
    m = np.zeros((4, 4), bool)
    m[0, 0] = m[1, 1] = True
    p = profile(m)
    assert p.pair == (1, 0) and p.V == 7


def test_diagonal_ring_encloses_a_hole():
    m = np.zeros((5, 5), bool)
    for i, j in ((2, 0), (3, 1), (4, 2), (3, 3), (2, 4), (1, 3), (0, 2), (1, 1)):
        m[i, j] = True
    c = complex_from_mask(m)
    assert betti(c).pair == (1, 1) == betti_by_rank(c)[:2]


def test_periodic_wrap_joins_components():
    m = np.zeros((8, 3), bool)
    m[0] = m[7] = True
    assert profile(m, periodic=False).b0 == 2
    assert profile(m, periodic=True).b0 == 1


def test_empty_raises():
    with pytest.raises(EmptyComplexError):
        complex_from_mask(np.zeros((8, 8), bool))


def test_compare_profiles():
    a = BettiProfile(1, 1, 0, 4, 4, 0)
    assert str(compare_profiles(a, a)) == "CONSISTENT"
    b = BettiProfile(1, 0, 1, 4, 4, 1)
    v = compare_profiles(BettiProfile(1, 2, -1, 0, 0, 0), b)
    assert str(v) == "MISMATCH{b1}" and not v.consistent
    v = compare_profiles(BettiProfile(2, 0, 2, 0, 0, 0), b)
    assert str(v) == "MISMATCH{b0}"
    v = compare_profiles(BettiProfile(2, 1, 1, 0, 0, 0), b)
    assert str(v) == "MISMATCH{b0,b1}"
    for s in ("CONSISTENT", "MISMATCH{b1}", "MISMATCH{b0,b1}"):
        assert str(parse_verdict(s)) == s
    with pytest.raises(ValueError):
        parse_verdict("maybe")


def test_profile_json_round_trip():
    p = profile(np.ones((3, 3), bool))
    assert BettiProfile.from_dict(json.loads(p.to_json())) == p


masks = st.tuples(st.integers(1, 7), st.integers(1, 7), st.booleans()).flatmap(
    lambda t: st.tuples(
        st.lists(st.booleans(), min_size=t[0] * t[1], max_size=t[0] * t[1])
        .map(lambda bits, t=t: np.array(bits, bool).reshape(t[0], t[1])),
        st.just(t[2])))


@settings(max_examples=300, deadline=None)
@given(masks)
def test_matches_rank_oracle(mp):
    mask, periodic = mp
    if not mask.any():
        return
    if periodic and mask.shape[0] < 3:
        periodic = False  # a 1- or 2-column cycle is not a cubical complex
    c = complex_from_mask(mask, periodic)
    p = betti(c)
    b0, b1, b2 = betti_by_rank(c)
    assert (p.b0, p.b1) == (b0, b1)
    assert b2 == 0
    assert p.chi == b0 - b1 + b2


@pytest.mark.parametrize("shape", [(2, 2), (3, 3), (3, 4), (4, 3), (2, 6)])
def test_exhaustive_small(shape):
    nx, ny = shape
    for periodic in (False, True):
        if periodic and nx < 3:
            continue
        for bits in itertools.product((False, True), repeat=nx * ny):
            m = np.array(bits, bool).reshape(nx, ny)
            if not m.any():
                continue
            c = complex_from_mask(m, periodic)
            assert betti(c).pair == betti_by_rank(c)[:2], (m, periodic)
