import itertools
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import all_words, free_reduce_brute
from qexpand.linalg import RngStream, sample_haar
from qexpand.word_core import (
    Letter,
    WordError,
    as_pairs,
    canonical_rotation,
    canonicalize,
    conjugate_pair,
    count_estimate,
    cyclic_reduction,
    enumerate_minimal,
    equivalent,
    format_kword,
    inverse,
    is_minimal,
    is_trivial,
    minimal_writing,
    normalize_labels,
    parse_kword,
    word,
    word_product,
)

letters = st.integers(1, 3).flatmap(lambda s: st.sampled_from([s, -s]))
words = st.lists(letters, max_size=8).map(tuple)


# -- grammar ----------------------------------------------------------------


def test_parse_two_word_example():
    kw = parse_kword("1 1 -2 -3 | 3 2 -1 -1", 3)
    assert kw == ((1, 1, -2, -3), (3, 2, -1, -1))
    assert as_pairs(kw[0]) == [(1, "+"), (1, "+"), (2, "-"), (3, "-")]


def test_parse_single_letter():
    assert parse_kword("2", 2) == ((2,),)


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("1 -4", "exceeds d=3"),
        ("1 0", "integer 0"),
        ("1 | | 2", "empty trace"),
        ("1 |", "empty trace"),
        ("1 a", "malformed token 'a' at position 2"),
        ("", "empty"),
    ],
)
def test_parse_errors(text, fragment):
    with pytest.raises(WordError, match=fragment):
        parse_kword(text, 3)


def test_parse_tolerates_tight_bars():
    assert parse_kword("1|-1", 1) == ((1,), (-1,))


@given(st.lists(st.lists(letters, min_size=1, max_size=5).map(tuple), min_size=1, max_size=3).map(tuple))
def test_format_round_trip(kw):
    assert parse_kword(format_kword(kw), 3) == kw


def test_letter_helpers():
    assert Letter(2, -1).code == -2
    assert Letter.from_code(-3) == Letter(3, -1)
    assert word([(1, "+"), (2, "-"), (3, -1)]) == (1, -2, -3)
    with pytest.raises(WordError):
        word([(0, "+")])
    with pytest.raises(WordError):
        word([(1, "?")])


# -- reduction --------------------------------------------------------------


def test_minimal_writing_example():
    w = word([(1, "+"), (1, "-"), (2, "+"), (3, "-"), (2, "+"), (2, "-")])
    assert minimal_writing(w) == (-3, 2)
    assert equivalent(minimal_writing(w), (2, -3))


def test_minimal_writing_small_cases():
    assert minimal_writing((1, -1)) == ()
    assert minimal_writing((1, -2)) == (1, -2)
    assert minimal_writing(()) == ()


def test_is_trivial_examples():
    assert is_trivial((1, -1))
    assert not is_trivial((1, -2))
    assert is_trivial((2, -3, 3, -2))


def test_equivalent_examples():
    s = (1, 1, -2, -3)
    assert equivalent(s, (-2, -3, 1, 1))
    assert not equivalent((1,), (2,))
    # the word with an inner cancellation and its reduced form
    assert equivalent((2, -3, 2, -2), (2, -3))


def test_cyclic_reduction_prefers_tagged_pairs():
    assert cyclic_reduction((-1, 2, 1)) == ([1], [(2, 0)])  # wraparound first
    assert cyclic_reduction((1, -1, 1)) == ([2], [(0, 1)])
    alive, pairs = cyclic_reduction((1, -1, 1, -1), tags=[0, 7, 7, 0])
    assert pairs == [(1, 2), (3, 0)] and alive == []


@given(words)
def test_minimal_writing_is_idempotent_and_minimal(w):
    m = minimal_writing(w)
    assert is_minimal(m)
    assert minimal_writing(m) == m
    assert len(m) == len(free_reduce_brute(w))


def test_minimal_writing_against_brute_force_exhaustive():
    for m in range(0, 7):
        for w in all_words(m, 2):
            assert len(minimal_writing(w)) == len(free_reduce_brute(w)), w


@given(words, st.integers(0, 7))
def test_equivalent_under_rotation(w, r):
    if w:
        r %= len(w)
        assert equivalent(w, w[r:] + w[:r])


def test_equivalence_relation_on_corpus():
    rng = random.Random(3)
    corpus = [tuple(rng.choice([1, -1, 2, -2]) for _ in range(rng.randint(0, 5))) for _ in range(40)]
    for a in corpus:
        assert equivalent(a, a)
        for b in corpus:
            assert equivalent(a, b) == equivalent(b, a)
            if equivalent(a, b):
                for c in corpus:
                    if equivalent(b, c):
                        assert equivalent(a, c)


def test_trace_invariance_of_minimal_writing():
    rng = random.Random(11)
    for t in range(100):
        N = rng.randint(1, 16)
        us = [sample_haar(N, RngStream(5, (t, s))) for s in range(3)]
        w = tuple(rng.choice([1, -1, 2, -2, 3, -3]) for _ in range(rng.randint(0, 8)))
        a = np.trace(word_product(w, us))
        b = np.trace(word_product(minimal_writing(w), us))
        assert abs(a - b) <= 1e-10 * N


def test_inverse_and_pair():
    assert inverse((1, -2, 3)) == (-3, 2, -1)
    assert conjugate_pair((1, 2)) == ((1, 2), (-2, -1))


# -- canonical forms --------------------------------------------------------

kwords = st.lists(st.lists(letters, min_size=1, max_size=4).map(tuple), min_size=1, max_size=3).map(
    lambda ts: tuple(minimal_writing(t) for t in ts if minimal_writing(t))
).filter(bool)


def _swap(kw):
    mp = {1: 2, 2: 1, 3: 3}
    return tuple(tuple(mp[abs(c)] * (1 if c > 0 else -1) for c in t) for t in kw)


def _adjoint(kw, s):
    return tuple(tuple(-c if abs(c) == s else c for c in t) for t in kw)


def _rotate_permute(kw, rng):
    ts = [t[r:] + t[:r] for t in kw for r in [rng.randrange(len(t))]]
    rng.shuffle(ts)
    return tuple(ts)


@given(kwords)
def test_canonicalize_symmetries(kw):
    key = canonicalize(kw).kword
    assert canonicalize(_swap(kw)).kword == key
    assert canonicalize(_adjoint(kw, 1)).kword == key
    assert canonicalize(_rotate_permute(kw, random.Random(len(kw)))).kword == key


def test_canonicalize_idempotent_on_1000_kwords():
    rng = random.Random(0)
    done = 0
    while done < 1000:
        kw = []
        for _ in range(rng.randint(1, 3)):
            t = minimal_writing(tuple(rng.choice([1, -1, 2, -2, 3, -3]) for _ in range(rng.randint(1, 5))))
            if t:
                kw.append(t)
        if not kw:
            continue
        c = canonicalize(tuple(kw)).kword
        assert canonicalize(c).kword == c
        done += 1


def test_normalize_labels_map():
    kw, mp = normalize_labels(((3, -2), (2, -3)))
    assert kw == ((1, 2), (-2, -1))
    assert mp == {3: 1, 2: -2}


def test_canonical_rotation():
    assert canonical_rotation((2, -1, 1)) == (1, 2, -1)
    assert canonical_rotation((-1, 1)) == (1, -1)


# -- enumeration ------------------------------------------------------------


def test_enumeration_examples():
    assert len(list(enumerate_minimal(1, 2, "alternating"))) == 2
    assert len(list(enumerate_minimal(1, 2, "all"))) == 4
    assert len(list(enumerate_minimal(1, 2, "symmetric"))) == 2


@pytest.mark.parametrize("m,d", [(2, 2), (3, 2), (4, 3)])
def test_enumeration_matches_filter(m, d):
    got = list(enumerate_minimal(m, d))
    assert len(got) == len(set(got))
    assert set(got) == {w for w in all_words(m, d) if is_minimal(w)}


def test_enumeration_shapes_are_right():
    for w in enumerate_minimal(2, 3, "alternating"):
        assert [c > 0 for c in w] == [True, False, True, False] and is_minimal(w)
    for w in enumerate_minimal(2, 3, "symmetric"):
        assert [c > 0 for c in w] == [True, True, False, False] and is_minimal(w)


def test_enumeration_budget():
    assert count_estimate(12, 4) > 10**7
    with pytest.raises(WordError, match="refused"):
        next(enumerate_minimal(12, 4))
    with pytest.raises(WordError):
        next(enumerate_minimal(2, 2, "spiral"))
