import numpy as np
import pytest
from numpy.testing import assert_allclose

from dwdecay.bethe import (BetheConvergenceError, bethe_energy_curve,
                           solve_bethe)

ELL = 51.0
EPS1 = (np.pi / ELL) ** 2
EPS2 = (2.0 * np.pi / ELL) ** 2


def test_decoupled_point():
    bm = solve_bethe(0.0, ELL)
    assert_allclose([bm.k1 * ELL, bm.k2 * ELL], [np.pi, np.pi], rtol=1e-14)
    assert_allclose(bm.energy, 2.0 * EPS1, rtol=1e-14)


def test_residuals_at_roots():
    for u in (0.01, 0.2, 1.0, 5.0, 50.0):
        bm = solve_bethe(u, ELL)
        assert bm.residual < 1e-12


def test_reference_interaction_energy():
    bm = solve_bethe(0.2, ELL)
    assert abs(bm.energy - 0.0139) < 2e-4


def test_fermionization_momenta():
    bm = solve_bethe(50.0, ELL)
    assert abs(bm.k1 * ELL / (2 * np.pi) - 1.0) < 0.02
    assert abs(bm.k2 * ELL / np.pi - 1.0) < 0.02
    assert abs(bm.energy - (EPS1 + EPS2)) / (EPS1 + EPS2) < 0.02


def test_excited_level():
    bm = solve_bethe(0.3, ELL, n1=2, n2=1)
    assert bm.k1 > bm.k2 > 0
    assert bm.residual < 1e-12
    assert bm.energy > solve_bethe(0.3, ELL).energy


def test_invalid_inputs():
    with pytest.raises(ValueError):
        solve_bethe(-0.1, ELL)
    with pytest.raises(ValueError):
        solve_bethe(0.1, -3.0)
    with pytest.raises(ValueError):
        solve_bethe(0.1, ELL, n1=1, n2=2)


def test_monotone_momentum_and_energy():
    us = np.linspace(0.0, 8.0, 41)
    k1s, es = [], []
    for u in us:
        bm = solve_bethe(u, ELL)
        k1s.append(bm.k1)
        es.append(bm.energy)
    k1s, es = np.array(k1s), np.array(es)
    assert np.all(np.diff(k1s) > -1e-14)
    assert np.all(np.diff(es) > -1e-14)
    assert np.all(k1s * ELL <= 2 * np.pi + 1e-9)
    assert np.all(es <= EPS1 + EPS2 + 1e-12)


def test_energy_curve_shape():
    us = np.linspace(0.0, 1.0, 11)
    curve = bethe_energy_curve(us, ELL, levels=((1, 1), (2, 1)))
    g = curve[(1, 1)]
    assert_allclose(g[0], 2.0 * EPS1, rtol=1e-13)
    assert np.all(np.diff(g) > 0)
    assert g[-1] < EPS1 + EPS2
    assert np.all(curve[(2, 1)] >= g)


def test_energy_curve_rejects_bad_samples():
    with pytest.raises(ValueError):
        bethe_energy_curve([0.5, 0.2], ELL)
    with pytest.raises(ValueError):
        bethe_energy_curve([], ELL)
