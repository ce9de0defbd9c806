import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coupledsft.coupling.automaton import automaton_operator, build_sigma_m
from coupledsft.coupling.family import SequenceRule, six_symbol_family
from coupledsft.geometry import (
    SYMBOLS,
    GeometryError,
    GeometryParams,
    breakpoint_csv,
    build_family_map,
    code_point,
    cylinder_interval,
    empirical_lyapunov,
    image_checks,
    lyapunov_bound,
    mme_mass,
    mme_measure,
    transition_matrix,
)
from coupledsft.sft import cylinders
from coupledsft.transfer import gibbs_measure, perron

HALF = Fraction(1, 2)


@pytest.mark.parametrize("n,nprime", [(2, 2), (4, 4), (4, 7), (10, 10)])
@pytest.mark.parametrize("linked", [True, False])
def test_partition_is_markov_for_base_matrix(n, nprime, linked):
    if not linked and min(n, nprime) == 2:
        pytest.skip("literal rule needs a cusp height below the host cell")
    T = build_family_map(GeometryParams(), n, nprime, linked)
    assert transition_matrix(T) == six_symbol_family().base
    assert all(image_checks(T).values())


def test_cusp_heights():
    T = build_family_map(GeometryParams(), 4, 5)
    lam = Fraction(8, 3)  # slope 1 / (2a) with a = 3/16
    assert T.lam_left == lam and T.lam_right == lam
    assert T.eps == HALF / lam**4
    assert T.eps_prime == HALF / lam**5
    assert T(Fraction(1, 4)) == HALF + T.eps_prime
    assert T(Fraction(3, 4)) == HALF - T.eps


def test_invalid_parameters():
    with pytest.raises(GeometryError):
        GeometryParams(a=Fraction(1, 4))
    with pytest.raises(GeometryError):
        GeometryParams(a=Fraction(3, 16), c=Fraction(3, 4))
    with pytest.raises(GeometryError):
        build_family_map(GeometryParams(), 1, 4)


def test_non_cusp_slopes_expand():
    T = build_family_map(GeometryParams(), 6, 6)
    slopes = T.slopes()
    for i in (0, 3, 4, 7):  # R1, R3, R4, R6
        assert abs(slopes[i]) >= 2


def test_code_point_fixed_points_and_boundaries():
    T = build_family_map(GeometryParams(), 4, 4)
    assert code_point(T, 0, 5).boundary  # 0 is an endpoint of R1
    c = code_point(T, Fraction(1, 100), 3)
    assert c.word == ("a1", "a1", "a1")
    assert code_point(T, T.a, 3).word == ()


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 2**40 - 1), st.integers(2, 6), st.integers(2, 6))
def test_coded_orbits_are_admissible(k, n, nprime):
    T = build_family_map(GeometryParams(), n, nprime)
    cp = code_point(T, Fraction(k, 2**40), 25)
    if cp.word:
        assert cp.admissible, cp.word


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 2**30 - 1))
def test_cylinder_interval_contains_point(k):
    T = build_family_map(GeometryParams(), 3, 4)
    x = Fraction(k, 2**30)
    cp = code_point(T, x, 6)
    if cp.word:
        lo, hi = cylinder_interval(T, cp.word)
        assert lo <= x <= hi


def test_cylinder_intervals_tile_depth_two():
    T = build_family_map(GeometryParams(), 3, 3)
    total = Fraction(0)
    for w in cylinders(six_symbol_family().base, 2):
        iv = cylinder_interval(T, w)
        if iv is not None:
            total += iv[1] - iv[0]
    assert total == 1


def test_mme_mass_matches_symbolic_stationary_mass():
    T = build_family_map(GeometryParams(), 4, 6)
    aut = build_sigma_m(six_symbol_family(SequenceRule("affine", 0, 4), SequenceRule("affine", 0, 6)), 0)
    g = gibbs_measure(perron(automaton_operator(aut)))
    alpha = float(g.stationary[aut.well_mask("A")].sum())
    assert mme_mass(T, 0, HALF) == pytest.approx(alpha, abs=1e-12)
    mu = mme_measure(T)
    assert mme_mass(T, 0, 1, measure=mu) == pytest.approx(1.0, abs=1e-12)
    assert mme_mass(T, 0, HALF, measure=mu) + mme_mass(T, HALF, 1, measure=mu) == pytest.approx(1.0)


def test_mme_mass_rejects_non_markov_interval():
    T = build_family_map(GeometryParams(), 4, 4)
    with pytest.raises(GeometryError, match="depth"):
        mme_mass(T, 0, Fraction(1, 3), max_depth=3)


def test_lyapunov_bound_holds_on_sampled_orbits():
    T = build_family_map(GeometryParams(), 6, 6)
    bound = lyapunov_bound(T)
    assert bound == pytest.approx(math.log(8 / 3) / 14)
    emp = empirical_lyapunov(T, 40, 4000, seed=3)
    assert emp.min() >= bound - 1e-3


def test_empirical_lyapunov_is_seeded():
    T = build_family_map(GeometryParams(), 5, 5)
    np.testing.assert_array_equal(empirical_lyapunov(T, 5, 100, 1), empirical_lyapunov(T, 5, 100, 1))


def test_breakpoint_csv():
    text = breakpoint_csv(build_family_map(GeometryParams(), 3, 3))
    lines = text.splitlines()
    assert lines[0] == "lo,hi,slope,intercept"
    assert len(lines) == 9
    assert lines[1].startswith("0,3/16,8/3")
