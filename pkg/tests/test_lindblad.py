import math

import numpy as np
import pytest

from cavitycool.errors import PositivityError, TruncationWarning
from cavitycool.fock import FockSpace, annihilation, creation, displacement
from cavitycool.lindblad import (BathSpec, DriftPropagator, IntegratorSpec, evolve, lindblad_rhs,
                                 step_plan)
from cavitycool.states import DensityMatrix, mean_photons, thermal_state, trace_distance

from conftest import random_density_matrix


def dense_rhs(rho, kappa, nb):
    """Master equation written with explicit truncated matrix products."""
    sp = FockSpace(rho.shape[0])
    a, ad = annihilation(sp), creation(sp)
    return kappa * ((nb + 1) * (2 * a @ rho @ ad - ad @ a @ rho - rho @ ad @ a)
                    + nb * (2 * ad @ rho @ a - a @ ad @ rho - rho @ a @ ad))


@pytest.mark.parametrize("dim", [2, 3, 10])
def test_rhs_matches_matrix_products(rng, dim):
    rho = random_density_matrix(rng, dim)
    for kappa, nb in ((1.0, 0.0), (0.3, 1.7)):
        np.testing.assert_allclose(lindblad_rhs(rho, BathSpec(kappa, nb)), dense_rhs(rho, kappa, nb),
                                   atol=1e-14)


def test_rhs_is_traceless(rng):
    rho = random_density_matrix(rng, 30)
    assert abs(np.trace(lindblad_rhs(rho, BathSpec(1, 2)))) < 1e-13


def test_zero_kappa_leaves_state_unchanged(rng):
    rho = random_density_matrix(rng, 12, support=8)
    out = evolve(rho, 3.0, BathSpec(0.0, 1.0))
    assert np.max(np.abs(out.data - rho)) < 1e-14


def test_bath_validation():
    with pytest.raises(ValueError):
        BathSpec(-1, 0)
    with pytest.raises(ValueError):
        BathSpec(1, math.inf)
    with pytest.raises(ValueError):
        IntegratorSpec(0)


def test_step_plan():
    assert step_plan(0.05, BathSpec(1, 1), IntegratorSpec(1e-3)) == (50, pytest.approx(1e-3))
    n, h = step_plan(0.1, BathSpec(2, 1), IntegratorSpec(1e-3))
    assert n == 200 and h == pytest.approx(5e-4)
    assert step_plan(0.1, BathSpec(0, 1), IntegratorSpec()) == (0, 0.0)


@pytest.mark.parametrize("kt", [0.1, 0.5, 2.0])
def test_vacuum_heats_toward_bath(kt):
    rho = thermal_state(FockSpace(64), 0)
    out = evolve(rho, kt, BathSpec(1.0, 1.0))
    assert mean_photons(out) == pytest.approx(1 - math.exp(-2 * kt), abs=1e-6)


def test_mean_relaxation_displaced_state():
    sp = FockSpace(64)
    d = displacement(sp, 0.9 + 0.4j)
    rho = DensityMatrix(d @ thermal_state(sp, 0.5).data @ d.conj().T)
    n0 = mean_photons(rho)
    bath = BathSpec(0.5, 1.0)
    for t in (0.3, 1.0):
        expected = 1.0 + (n0 - 1.0) * math.exp(-2 * 0.5 * t)
        assert mean_photons(evolve(rho, t, bath)) == pytest.approx(expected, rel=1e-5)


def test_thermal_fixed_point():
    rho = thermal_state(FockSpace(64), 1.3)
    out = evolve(rho, 0.7, BathSpec(1.0, 1.3))
    assert trace_distance(out, rho) < 1e-8


def test_trace_preserved_before_renormalization(rng):
    rho = random_density_matrix(rng, 32, support=8)
    out = evolve(rho, 10.0, BathSpec(1.0, 0.8), IntegratorSpec(2e-3), renormalize=False)
    assert abs(out.trace() - 1) < 1e-9


def test_step_halving_convergence():
    sp = FockSpace(48)
    d = displacement(sp, 0.7)
    rho = d @ thermal_state(sp, 0.5).data @ d.conj().T
    coarse = mean_photons(evolve(rho, 1.0, BathSpec(1, 1), IntegratorSpec(2e-3)))
    fine = mean_photons(evolve(rho, 1.0, BathSpec(1, 1), IntegratorSpec(1e-3)))
    assert abs(coarse - fine) < 1e-8


def test_positivity_error_for_unstable_step():
    rho = thermal_state(FockSpace(64), 0.0)
    # RK4 is unstable far outside its stability region
    with pytest.raises(PositivityError):
        evolve(rho, 0.5, BathSpec(1, 1), IntegratorSpec(0.5))


def test_edge_population_warning():
    rho = thermal_state(FockSpace(12), 0.1)
    with pytest.warns(TruncationWarning):
        evolve(rho, 2.0, BathSpec(1, 3.0))


@pytest.mark.parametrize("duration", [0.0004, 0.05, 0.4])
def test_propagator_matches_stepwise(rng, duration):
    rho = random_density_matrix(rng, 40, support=10)
    bath = BathSpec(1.0, 1.0)
    fast = DriftPropagator(40, duration, bath).apply(rho)
    slow = evolve(rho, duration, bath, check=False)
    assert np.max(np.abs(fast.data - slow.data)) < 1e-13
    np.testing.assert_array_equal(fast.data, fast.data.conj().T)


def test_propagator_zero_duration_is_identity(rng):
    rho = random_density_matrix(rng, 10)
    out = DriftPropagator(10, 0.0, BathSpec(1, 1)).apply(rho)
    np.testing.assert_allclose(out.data, rho, atol=1e-15)


def test_propagator_dim_mismatch():
    with pytest.raises(ValueError):
        DriftPropagator(10, 0.1, BathSpec(1, 1)).apply(np.eye(5) / 5)


def test_hot_thermal_state_converges_to_bath():
    sp = FockSpace(128)
    out = DriftPropagator(128, 5.0, BathSpec(1.0, 1.0)).apply(thermal_state(sp, 3.0))
    assert trace_distance(out, thermal_state(sp, 1.0)) < 1e-4
