import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coupledsft.fatcantor import (
    FatCantorError,
    FatCantorParams,
    c1_slope_formula,
    cantor_gaps,
    cauchy_increments,
    check_c1_expanding,
    conjugacy_stage,
    conjugated_slope,
    cusp_image,
    hole_preimages,
    remaining_length,
    removed_length,
)


def test_removed_length_closed_form():
    beta = 0.25
    assert removed_length(beta) == 0.5
    assert abs(1 - 2**80 * remaining_length(beta, 80) - removed_length(beta)) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 0.33), st.integers(1, 9))
def test_gap_lengths_sum_to_recursion(beta, n):
    gaps = cantor_gaps(beta, n)
    removed = sum(float(np.sum(g[:, 1] - g[:, 0])) for g in gaps)
    assert removed == pytest.approx(1 - 2**n * remaining_length(beta, n), abs=1e-12)
    for k, g in enumerate(gaps, start=1):
        assert len(g) == 2 ** (k - 1)
        np.testing.assert_allclose(g[:, 1] - g[:, 0], beta**k, rtol=1e-9, atol=1e-15)


def test_hole_preimage_lengths():
    a = 3 / 16
    for n, b in enumerate(hole_preimages(a, 6), start=1):
        assert len(b) == 2 ** (n - 1)
        np.testing.assert_allclose(b[:, 1] - b[:, 0], (0.5 - 2 * a) * (2 * a) ** n)
        assert np.all(b[:, 1] <= a)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 0.33), st.floats(0.01, 0.2), st.floats(0.05, 0.24), st.integers(0, 7))
def test_stage_maps_are_increasing_homeomorphisms(beta, delta, a, n):
    h = conjugacy_stage(FatCantorParams(beta, delta, a), n)
    assert h.monotone
    assert h(0.0) == 0.0 and h(0.5) == 0.5 and h(0.25) == pytest.approx(0.25)
    t = np.linspace(0, 0.5, 101)
    np.testing.assert_allclose(h.inverse(h(t)), t, atol=1e-12)


def test_cauchy_bound_every_stage():
    for sup, bound in cauchy_increments(FatCantorParams(), 12):
        assert sup <= bound


def test_conjugated_slopes():
    p = FatCantorParams()
    for n in range(2, 9):
        assert conjugated_slope(p, n, 12) == pytest.approx(1 / p.beta, abs=1e-9)
    assert conjugated_slope(p, 1, 12) == pytest.approx(c1_slope_formula(p), abs=1e-9)
    assert check_c1_expanding(p) == pytest.approx(2.0)


def test_non_expanding_first_gap_is_rejected():
    with pytest.raises(FatCantorError, match="not expanding"):
        check_c1_expanding(FatCantorParams(beta=0.25, delta=0.02))


def test_cusp_lands_in_right_cantor_block():
    p = FatCantorParams()
    lo, hi = cusp_image(p, 1e-3)
    assert lo == 0.5 and 0.5 < hi < 0.75 - p.delta
    with pytest.raises(FatCantorError):
        cusp_image(p, 0.3)


def test_parameter_validation():
    with pytest.raises(FatCantorError):
        FatCantorParams(beta=0.34)
    with pytest.raises(FatCantorError):
        FatCantorParams(delta=0.3)
