import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coupledsft.sft import (
    ResourceError,
    SubshiftSpec,
    WordMetricParams,
    count_cylinders,
    cylinders,
    emit_spec,
    higher_block,
    is_admissible,
    parse_spec,
    validate_sft,
    word_distance,
)

GOLDEN = SubshiftSpec(["0", "1"], [[1, 1], [1, 0]])


def matrices(max_n=4):
    return st.integers(1, max_n).flatmap(
        lambda n: st.lists(st.lists(st.integers(0, 1), min_size=n, max_size=n), min_size=n, max_size=n)
    )


def spec_of(rows):
    return SubshiftSpec([f"s{i}" for i in range(len(rows))], rows)


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        SubshiftSpec([], np.zeros((0, 0)))
    with pytest.raises(ValueError):
        SubshiftSpec(["a", "a"], np.ones((2, 2)))
    with pytest.raises(ValueError):
        SubshiftSpec(["a", "b"], np.ones((2, 3)))
    with pytest.raises(ValueError):
        SubshiftSpec(["a"], [[2]])


def test_golden_mean_counts_are_fibonacci():
    assert [count_cylinders(GOLDEN, k) for k in range(1, 8)] == [2, 3, 5, 8, 13, 21, 34]


def test_golden_mean_is_valid():
    d = validate_sft(GOLDEN)
    assert d.irreducible and d.period == 1
    assert set(d.recurrent_core) == {"0", "1"}


def test_period_two_cycle():
    d = validate_sft(SubshiftSpec(["a", "b"], [[0, 1], [1, 0]]))
    assert d.irreducible and d.period == 2


def test_transient_and_dead_symbols():
    # c feeds into the loop on a; d has no successor
    spec = SubshiftSpec(["a", "c", "d"], [[1, 0, 1], [1, 0, 0], [0, 0, 0]])
    d = validate_sft(spec)
    assert d.recurrent_core == ("a",)
    assert d.successor_free == ("d",)


def test_empty_core_is_invalid():
    assert not SubshiftSpec(["a", "b"], [[0, 1], [0, 0]]).validity


@settings(max_examples=60, deadline=None)
@given(matrices(), st.integers(1, 4))
def test_cylinders_match_brute_force(rows, k):
    spec = spec_of(rows)
    brute = [w for w in itertools.product(spec.symbols, repeat=k) if is_admissible(spec, w)]
    assert sorted(cylinders(spec, k)) == sorted(brute)
    assert count_cylinders(spec, k) == len(brute)


@settings(max_examples=40, deadline=None)
@given(matrices(3), st.integers(2, 3))
def test_higher_block_preserves_language(rows, k):
    spec = spec_of(rows)
    if not cylinders(spec, k):
        return
    hb = higher_block(spec, k)
    # words of length L+1 in the k-block shift correspond to words of length L+k
    for L in (1, 2):
        lifted = {tuple(b[0] for b in w[:-1]) + w[-1] for w in cylinders(hb, L + 1)}
        assert lifted == set(cylinders(spec, L + k))


def test_higher_block_budget():
    full = SubshiftSpec(list("abcdefgh"), np.ones((8, 8), dtype=int))
    with pytest.raises(ResourceError):
        higher_block(full, 7)


@settings(max_examples=60, deadline=None)
@given(matrices())
def test_emit_parse_round_trip(rows):
    spec = spec_of(rows)
    text = emit_spec(spec)
    assert parse_spec(text) == spec
    assert emit_spec(parse_spec(text)) == text


def test_parse_ignores_comments():
    text = "# golden mean\nsymbols: 0 1\n\n1 1\n1 0\n"
    assert parse_spec(text) == GOLDEN


def test_word_distance():
    assert word_distance("abc", "abd") == 0.25
    assert word_distance("abc", "abc") == 0.0
    assert word_distance("xbc", "abc", WordMetricParams(3.0)) == 1.0
    with pytest.raises(ValueError):
        WordMetricParams(1.0)


@settings(max_examples=80, deadline=None)
@given(st.text("ab", min_size=3, max_size=8), st.text("ab", min_size=3, max_size=8),
       st.text("ab", min_size=3, max_size=8))
def test_word_distance_is_ultrametric(x, y, z):
    n = min(len(x), len(y), len(z))
    x, y, z = x[:n], y[:n], z[:n]
    assert word_distance(x, z) <= max(word_distance(x, y), word_distance(y, z))
