import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cavitycool import analytic
from cavitycool.errors import RegimeWarning
from cavitycool.fock import FockSpace


def p_plus_series(nbar, g, terms=400):
    """Direct evaluation of the thermal average of <m|(D(g)+D(-g))|m>, before resummation."""
    q = nbar / (nbar + 1)
    total = sum(q ** m * analytic.displacement_diagonal(m, g) for m in range(terms))
    return 0.5 + 0.5 * total / (nbar + 1)


def test_p_plus_values():
    assert analytic.p_plus_exact(3.0, 0) == 1
    assert analytic.p_plus_exact(0, math.sqrt(2 * math.log(2))) == pytest.approx(0.75, abs=1e-15)
    assert analytic.p_plus_exact(1, 0.1) == pytest.approx(0.5 * (1 + math.exp(-0.015)), abs=1e-15)


@pytest.mark.parametrize("nbar,g", [(0.5, 0.3), (1.0, 0.1), (2.0, 0.6)])
def test_p_plus_resummation(nbar, g):
    assert analytic.p_plus_exact(nbar, g) == pytest.approx(p_plus_series(nbar, g), abs=1e-12)


def test_one_round_values():
    assert analytic.nbar_one_round(0, 0.3) == 0
    assert analytic.nbar_one_round(5, 0.1) == pytest.approx(4.4, abs=1e-12)
    assert analytic.nbar_one_round(2.5, 0) == 2.5
    assert analytic.prob_one_round(3, 0) == 1
    assert analytic.prob_one_round(1, 0.1) == pytest.approx(0.97, abs=1e-15)
    assert analytic.prob_one_round(5, 0.1) == pytest.approx(0.89, abs=1e-15)


def test_k_round_values():
    assert analytic.nbar_k_rounds(2.0, 0.2, 0) == 2.0
    assert analytic.prob_k_rounds(2.0, 0.2, 0) == 1.0
    assert analytic.nbar_k_rounds(1, 0.05, 10) == pytest.approx(0.99 ** 10, rel=1e-14)
    assert analytic.nbar_k_rounds(1, 0.05, 10) == pytest.approx(0.90438, abs=1e-5)
    assert analytic.prob_k_rounds(1, 0.05, 10) == pytest.approx(0.9925 ** 10, rel=1e-14)
    assert analytic.prob_k_rounds(1, 0.05, 10) == pytest.approx(0.92748, abs=1e-5)


@given(st.floats(0, 10), st.floats(0, 1))
def test_k1_is_one_round_bitwise(nbar, g):
    assert analytic.nbar_k_rounds(nbar, g, 1) == analytic.nbar_one_round(nbar, g)
    assert analytic.prob_k_rounds(nbar, g, 1) == analytic.prob_one_round(nbar, g)


def test_linearized_variants():
    assert analytic.nbar_k_rounds_linear(1, 0.05, 10) == pytest.approx(0.9)
    assert analytic.prob_k_rounds_linear(1, 0.05, 10) == pytest.approx(0.925)


def test_recursive_matches_one_round_first_step():
    n, p = analytic.nbar_recursive(2.0, 0.1, 1)
    assert n == analytic.nbar_one_round(2.0, 0.1)
    assert p == analytic.prob_one_round(2.0, 0.1)


def test_four_electron_product_agrees_to_fourth_order():
    # product of single-electron probabilities along the OCB vs the one-round formula
    nbar = 1.0
    residuals = []
    gs = [0.01, 0.02, 0.04]
    for g in gs:
        prod = analytic.p_plus_exact(nbar, g) ** 4
        residuals.append(abs(prod - analytic.prob_one_round(nbar, g)))
    # leading terms cancel; the mismatch is driven by the O(|g|^2) per-electron n drift
    slope = np.polyfit(np.log(gs), np.log(residuals), 1)[0]
    assert slope == pytest.approx(4, abs=0.3)


def test_regime_warning():
    with pytest.warns(RegimeWarning):
        analytic.prob_one_round(5, 0.5, check=True)


def test_d_ocb_approx_matrix():
    sp = FockSpace(6)
    np.testing.assert_array_equal(analytic.d_ocb_approx_matrix(sp, 0), np.eye(6))
    m = analytic.d_ocb_approx_matrix(sp, 0.2)
    for n in range(6):
        assert m[n, n] == pytest.approx(1 - 0.5 * 0.04 * (2 * n + 1 - 1j))
    assert np.count_nonzero(m - np.diag(np.diag(m))) == 0
