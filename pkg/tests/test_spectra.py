import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from cptring.model import DynamicalMatrix, SystemParams, build_matrix
from cptring.spectra import (
    Regime,
    SpectrumError,
    analytic_spectrum,
    classify_regime,
    exceptional_points,
    multiset_distance,
    numerical_spectrum,
)
from oracles import SUPERMODE_TABLE, table_eigenvalues


def _multiplicity_map(report, digits=9):
    return {complex(round(p.value.real, digits), round(p.value.imag, digits)): p.multiplicity
            for p in report.eigenpairs}


def test_six_cavity_fully_broken_values():
    rep = numerical_spectrum(build_matrix(SystemParams(3, 1.0, 0.4)))
    got = _multiplicity_map(rep)
    s1 = round(math.sqrt(1 - 0.16), 9)
    assert got == {complex(-s1, 0): 2, complex(-0.6, 0): 1, complex(0.6, 0): 1, complex(s1, 0): 2}
    assert not rep.is_defective
    assert rep.regime is Regime.FULLY_BROKEN


def test_strong_coupling_all_imaginary():
    rep = numerical_spectrum(build_matrix(SystemParams(3, 1.0, 2.5)))
    assert np.all(np.abs(rep.values.real) < 1e-12)
    assert rep.regime is Regime.ALL_OSCILLATORY


def test_defective_zero_at_exceptional_point():
    rep = numerical_spectrum(build_matrix(SystemParams(3, 1.0, 1.0)))
    zero = [p for p in rep.eigenpairs if abs(p.value) < 1e-6]
    assert len(zero) == 1
    assert zero[0].multiplicity == 4
    assert zero[0].geometric_multiplicity == 2
    assert rep.is_defective
    assert rep.regime is Regime.AT_EXCEPTIONAL_POINT


def test_eigenvectors_normalised_and_correct():
    m = build_matrix(SystemParams(4, 1.0, 0.37))
    rep = numerical_spectrum(m)
    for pair in rep.eigenpairs:
        v = pair.eigenvectors
        np.testing.assert_allclose(np.linalg.norm(v, axis=0), 1.0, rtol=1e-12)
        for col in v.T:
            first = col[np.abs(col) > 1e-12][0]
            assert first.imag == pytest.approx(0.0, abs=1e-14) and first.real > 0
            np.testing.assert_allclose(m.generator @ col, pair.value * col, atol=1e-10)


def test_eigensolver_failure_is_explicit():
    bad = np.full((4, 4), np.nan, dtype=complex)
    with pytest.raises((SpectrumError, np.linalg.LinAlgError)):
        numerical_spectrum(DynamicalMatrix(bad, ("gain", "loss") * 2))


@pytest.mark.parametrize("n_cav", sorted(SUPERMODE_TABLE))
@pytest.mark.parametrize("j", [0.0, 0.2, 0.4, 0.6, 1.2, 2.5])
def test_analytic_reproduces_table(n_cav, j):
    expected = table_eigenvalues(n_cav, 1.0, j)
    rep = analytic_spectrum(SystemParams(n_cav // 2, 1.0, j))
    assert multiset_distance(rep.values, expected) < 1e-12


@pytest.mark.parametrize("n_cav", sorted(SUPERMODE_TABLE))
def test_table_degeneracy_pattern(n_cav):
    # Away from coincidences every supermode-table entry is its own cluster.
    p = SystemParams(n_cav // 2, 1.0, 0.23)
    for report in (analytic_spectrum(p), numerical_spectrum(build_matrix(p))):
        expected = sorted(m for _, _, m in SUPERMODE_TABLE[n_cav] for _ in (0, 1))
        assert sorted(report.multiplicities) == expected


def test_four_cavities_contain_pinned_pair():
    rep = analytic_spectrum(SystemParams(2, 1.3, 0.77))
    lam = np.sqrt(complex(1.3**2 - 4 * 0.77**2))
    assert multiset_distance(rep.values, [1.3, -1.3, lam, -lam]) < 1e-12


def test_ten_cavities_golden_families():
    rep = analytic_spectrum(SystemParams(5, 1.0, 1.0))
    got = _multiplicity_map(rep)
    for c in ((3 - math.sqrt(5)) / 2, (3 + math.sqrt(5)) / 2):
        lam = np.sqrt(complex(1 - c))
        for v in (lam, -lam):
            assert got[complex(round(v.real, 9), round(v.imag, 9))] == 2


@pytest.mark.parametrize("n_pairs", [1, 2, 3, 5, 8])
def test_decoupled_limit(n_pairs):
    rep = analytic_spectrum(SystemParams(n_pairs, 1.7, 0.0))
    assert _multiplicity_map(rep) == {complex(-1.7, 0): n_pairs, complex(1.7, 0): n_pairs}


def test_analytic_eigenvectors_solve_matrix():
    for n_pairs in (1, 2, 3, 6):
        p = SystemParams(n_pairs, 1.0, 0.81)
        g = build_matrix(p).generator
        for pair in analytic_spectrum(p).eigenpairs:
            for col in pair.eigenvectors.T:
                np.testing.assert_allclose(g @ col, pair.value * col, atol=1e-12)


def test_exceptional_points_table():
    six = exceptional_points(SystemParams(3)).points
    assert [k for _, k in six] == [0, 1]
    np.testing.assert_allclose([r for r, _ in six], [0.5, 1.0], rtol=1e-14)
    assert exceptional_points(SystemParams(1)).j_over_kappa == [1.0]
    four = exceptional_points(SystemParams(2))
    np.testing.assert_allclose(four.j_over_kappa, [0.5], rtol=1e-14)
    assert four.pinned_families == [1]


@pytest.mark.parametrize("n_pairs", [1, 2, 3, 4, 5, 6, 9])
def test_each_exceptional_point_is_defective(n_pairs):
    for ratio in exceptional_points(SystemParams(n_pairs)).j_over_kappa:
        p = SystemParams(n_pairs, 1.0, ratio)
        assert numerical_spectrum(build_matrix(p)).is_defective
        assert analytic_spectrum(p).is_defective
        assert classify_regime(p) is Regime.AT_EXCEPTIONAL_POINT


@pytest.mark.parametrize("j, regime", [
    (2.5, Regime.ALL_OSCILLATORY), (0.6, Regime.MIXED), (0.4, Regime.FULLY_BROKEN),
    (1.0, Regime.AT_EXCEPTIONAL_POINT), (0.5, Regime.AT_EXCEPTIONAL_POINT),
])
def test_regimes_six_cavities(j, regime):
    assert classify_regime(SystemParams(3, 1.0, j)) is regime


def test_pinned_pair_blocks_oscillatory_label():
    # N=4 always keeps the +/-kappa pair, so strong coupling is "mixed", not oscillatory.
    assert classify_regime(SystemParams(2, 1.0, 2.5)) is Regime.MIXED
    assert classify_regime(SystemParams(2, 1.0, 0.3)) is Regime.FULLY_BROKEN


@pytest.mark.parametrize("n_pairs", range(1, 13))
def test_pinned_family_iff_even_pairs(n_pairs):
    p = SystemParams(n_pairs, 1.0, 0.77)
    has_kappa = any(abs(v - 1.0) < 1e-12 for v in analytic_spectrum(p).values)
    assert has_kappa == (n_pairs % 2 == 0)
    assert bool(exceptional_points(p).pinned_families) == (n_pairs % 2 == 0)


def _away_from_eps(n_pairs, j, margin=1e-3):
    return all(abs(j - r) > margin for r in exceptional_points(SystemParams(n_pairs)).j_over_kappa)


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 12), st.floats(0.0, 3.0))
def test_analytic_agrees_with_numerical(n_pairs, j):
    assume(_away_from_eps(n_pairs, j))
    p = SystemParams(n_pairs, 1.0, j)
    num = numerical_spectrum(build_matrix(p)).values
    ana = analytic_spectrum(p).values
    assert multiset_distance(num, ana) < 1e-9 * max(1.0, 2 * j)


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 12), st.floats(0.0, 3.0), st.floats(0.2, 3.0))
def test_values_real_or_imaginary(n_pairs, j, kappa):
    p = SystemParams(n_pairs, kappa, j)
    vals = numerical_spectrum(build_matrix(p)).values
    tol = 1e-6 * max(kappa, j) ** 2
    assert np.max(np.abs(vals.real * vals.imag)) < tol


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 12), st.floats(0.0, 3.0))
def test_multiplicities_sum_to_dimension(n_pairs, j):
    p = SystemParams(n_pairs, 1.0, j)
    for report in (numerical_spectrum(build_matrix(p)), analytic_spectrum(p)):
        assert sum(report.multiplicities) == p.n_cavities
        vals = report.values
        for lam in vals:
            assert np.min(np.abs(vals + lam)) < 1e-6
