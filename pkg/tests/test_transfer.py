import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coupledsft.sft import SubshiftSpec, cylinders
from coupledsft.transfer import (
    DegenerateSpectrumError,
    PeriodicityError,
    Potential,
    build_transfer_matrix,
    conformal_cylinder,
    conformality_residual,
    extend_operator,
    gibbs_cylinder,
    gibbs_measure,
    parse_potential,
    perron,
    spectral_diagnostics,
)

FULL2 = SubshiftSpec(["a", "b"], np.ones((2, 2), dtype=int))
GOLDEN = SubshiftSpec(["0", "1"], [[1, 1], [1, 0]])
SIX_A = SubshiftSpec(["a1", "a2", "a3"], [[1, 1, 1], [0, 0, 0], [1, 1, 1]])
SIX_AP = SubshiftSpec(["a1", "a2", "a3"], [[1, 0, 0], [0, 0, 0], [1, 0, 0]])


def dense_weighted(spec, pot):
    op = build_transfer_matrix(spec, pot)
    return op, op.matrix.toarray()


def test_full_shift_pressure():
    s = perron(build_transfer_matrix(FULL2, Potential.zero(FULL2)))
    assert s.pressure == pytest.approx(math.log(2), abs=1e-14)
    assert s.gap == math.inf


def test_golden_mean_pressure():
    s = perron(build_transfer_matrix(GOLDEN, Potential.zero(GOLDEN)))
    assert s.pressure == pytest.approx(math.log((1 + math.sqrt(5)) / 2), abs=1e-14)


def test_normalizations():
    pot = Potential(1, {("a",): 0.3, ("b",): -0.4})
    s = perron(build_transfer_matrix(FULL2, pot))
    assert s.conformal.sum() == pytest.approx(1.0)
    assert s.conformal @ s.eigenfunction == pytest.approx(1.0)
    assert np.all(s.eigenfunction > 0)


def test_six_symbol_well_eigendata():
    s = perron(build_transfer_matrix(SIX_A, Potential.zero(SIX_A)))
    np.testing.assert_allclose(s.conformal, [0.5, 0.0, 0.5], atol=1e-14)
    np.testing.assert_allclose(s.eigenfunction, [1, 1, 1], atol=1e-13)


def test_extension_of_single_entry_matrix():
    ext = extend_operator(SIX_AP, SIX_A, Potential.zero(SIX_A))
    assert ext.pressure == pytest.approx(0.0, abs=1e-14)
    np.testing.assert_allclose(ext.conformal, [0.5, 0.0, 0.5], atol=1e-14)
    np.testing.assert_allclose(ext.eigenfunction, [2.0, 0.0, 0.0], atol=1e-13)
    assert ext.restriction_error() == pytest.approx(0.0, abs=1e-13)


def test_periodic_and_degenerate_are_rejected():
    flip = SubshiftSpec(["a", "b"], [[0, 1], [1, 0]])
    with pytest.raises(PeriodicityError):
        perron(build_transfer_matrix(flip, Potential.zero(flip)))
    two = SubshiftSpec(["a", "b"], [[1, 0], [0, 1]])
    with pytest.raises(DegenerateSpectrumError):
        perron(build_transfer_matrix(two, Potential.zero(two)))


def random_spec(seed, n):
    rng = np.random.default_rng(seed)
    while True:
        mat = (rng.random((n, n)) < 0.6).astype(int)
        np.fill_diagonal(mat, 1)
        mat[np.arange(n), (np.arange(n) + 1) % n] = 1  # cycle through all symbols
        spec = SubshiftSpec([f"s{i}" for i in range(n)], mat)
        if spec.validity:
            return spec, rng


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 5), st.integers(1, 2))
def test_pressure_matches_dense_eigenvalue(seed, n, depth):
    spec, rng = random_spec(seed, n)
    pot = Potential.from_function(spec, depth, lambda w: float(rng.normal()))
    op, dense = dense_weighted(spec, pot)
    s = perron(op)
    rho = max(abs(np.linalg.eigvals(dense)))
    assert s.pressure == pytest.approx(math.log(rho), abs=1e-11)
    # H is a left and nu a right eigenvector of W
    np.testing.assert_allclose(s.eigenfunction @ dense, rho * s.eigenfunction, atol=1e-10)
    np.testing.assert_allclose(dense @ s.conformal, rho * s.conformal, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 4))
def test_conformality_on_random_systems(seed, n):
    spec, rng = random_spec(seed, n)
    pot = Potential.from_function(spec, 1, lambda w: float(rng.normal()))
    s = perron(build_transfer_matrix(spec, pot))
    for k in range(1, 5):
        for w in cylinders(spec, k):
            assert conformality_residual(s, w) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 4))
def test_gibbs_cylinders_are_consistent_and_invariant(seed, n):
    spec, rng = random_spec(seed, n)
    pot = Potential.from_function(spec, 2, lambda w: float(rng.normal()))
    g = gibbs_measure(perron(build_transfer_matrix(spec, pot)))
    syms = spec.symbols
    for k in range(1, 4):
        words = cylinders(spec, k)
        assert sum(gibbs_cylinder(g, w).mass for w in words) == pytest.approx(1.0, abs=1e-12)
        for w in words:
            m = gibbs_cylinder(g, w).mass
            # additivity to the right and shift invariance (extension to the left)
            right = sum(gibbs_cylinder(g, w + (s,)).mass for s in syms)
            left = sum(gibbs_cylinder(g, (s,) + w).mass for s in syms)
            assert right == pytest.approx(m, abs=1e-12)
            assert left == pytest.approx(m, abs=1e-12)


def test_gibbs_of_markov_measure_for_full_shift():
    # phi(x) = log p(x0) gives the Bernoulli measure
    p = {"a": 0.3, "b": 0.7}
    pot = Potential(1, {(s,): math.log(v) for s, v in p.items()})
    g = gibbs_measure(perron(build_transfer_matrix(FULL2, pot)))
    assert gibbs_cylinder(g, ("a", "b", "b")).mass == pytest.approx(0.3 * 0.7 * 0.7)
    assert gibbs_cylinder(g, ("a", "z")).admissible is False


def test_conformal_cylinder_of_bernoulli():
    s = perron(build_transfer_matrix(FULL2, Potential.zero(FULL2)))
    assert conformal_cylinder(s, ("a", "b", "a")) == pytest.approx(1 / 8)


def test_remainder_decays_at_gap_rate():
    spec, rng = random_spec(7, 4)
    pot = Potential.from_function(spec, 2, lambda w: float(rng.normal()))
    op = build_transfer_matrix(spec, pot)
    s = perron(op)
    cesaro, rem = spectral_diagnostics(op, s, rng.random(op.size), 25)
    assert cesaro < 0.1
    rem = np.array(rem)
    keep = rem > 1e-13
    slope = np.polyfit(np.arange(25)[keep], np.log(rem[keep]), 1)[0]
    assert slope <= -s.gap + 0.05


def test_parse_potential():
    pot = parse_potential({"depth": 1, "values": [["a", 0.5]], "default_zero": True}, FULL2)
    assert pot(("a",)) == 0.5 and pot(("b",)) == 0.0
    with pytest.raises(ValueError):
        parse_potential({"depth": 1, "values": [["a", 0.5]]}, FULL2)
