import json
import math

import numpy as np
import pytest
from scipy import integrate as sint

from qsdlab import measures as ms
from qsdlab.analytic import DriftParams
from qsdlab.measures import AtomicMeasure, GridDensity, IntegrabilityError

P1 = DriftParams(1.0)
E = math.e


def test_dirac_integral():
    assert ms.integrate(AtomicMeasure.dirac(2.0), lambda x: x) == 2.0


def test_two_atom_second_moment():
    mu = AtomicMeasure.from_pairs([[1, 0.5], [3, 0.5]])
    assert ms.integrate(mu, lambda x: x * x) == pytest.approx(5.0, abs=1e-15)


def test_yaglom_grid_first_moment():
    grid = np.linspace(0, 40, 40001)
    mu = GridDensity.from_callable(lambda x: x * np.exp(-x), grid, tail=41 * math.exp(-40))
    assert ms.integrate(mu, lambda x: x) == pytest.approx(2.0, abs=1e-6)


@pytest.mark.parametrize("bad", [[[0.0, 1.0]], [[-1.0, 1.0]], [[1.0, 0.5]], [[1.0, 1.5], [2.0, -0.5]]])
def test_atomic_rejects_bad_input(bad):
    with pytest.raises(ValueError):
        AtomicMeasure.from_pairs(bad)


def test_grid_density_requires_declared_tail():
    x = np.linspace(0, 5, 101)
    with pytest.raises(ValueError):
        GridDensity(x, np.exp(-x))  # trapezoid mass ~0.993, no tail declared


def test_integrate_signals_nonfinite_values():
    with pytest.raises(ValueError):
        ms.integrate(AtomicMeasure.dirac(1.0), lambda x: np.full(np.shape(x), np.inf))


def test_integrate_with_error_reports_tail_for_bounded_f():
    mu = ms.exponential_measure(1.0, n=2001, span=20.0)
    val, err = ms.integrate_with_error(mu, lambda x: np.ones_like(x), sup_f=1.0)
    assert val == pytest.approx(1 - math.exp(-20), abs=1e-12)
    # tail mass plus an O(h^2) discretization term
    assert math.exp(-20) < err < 1e-4


def test_eta_transform_dirac_is_fixed_point():
    out = ms.eta_transform(AtomicMeasure.dirac(1.7), P1)
    assert out.locations.tolist() == [1.7] and out.weights.tolist() == [1.0]


def test_eta_transform_two_atoms():
    out = ms.eta_transform(AtomicMeasure.from_pairs([[1, 0.5], [2, 0.5]]), P1)
    np.testing.assert_allclose(out.weights, [1 / (1 + 2 * E), 2 * E / (1 + 2 * E)], rtol=1e-14)


def test_eta_transform_of_exponential_is_yaglom():
    mu = ms.exponential_measure(2.0)
    out = ms.eta_transform(mu, P1)
    x = out.grid[1:]
    ratio = out.pdf[1:] / (x * np.exp(-x))
    # same shape to 1e-8; the constant carries the trapezoid normalization
    np.testing.assert_allclose(ratio, ratio[0], rtol=1e-8)
    assert ratio[0] == pytest.approx(1.0, abs=1e-6)
    assert ms.integrate(out, lambda v: np.ones_like(v)) + out.tail == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("mu", [AtomicMeasure.from_pairs([[0.5, 0.2], [4.0, 0.8]]),
                                ms.exponential_measure(3.0), ms.exponential_measure(1.5, n=4001)])
def test_eta_transform_is_normalized(mu):
    out = ms.eta_transform(mu, P1)
    assert ms.integrate(out, lambda v: np.ones_like(v)) + out.tail_bound == pytest.approx(1.0, abs=1e-10)


def test_eta_transform_refuses_heavy_tail():
    with pytest.raises(IntegrabilityError):
        ms.eta_transform(ms.yaglom_measure(P1), P1)
    with pytest.raises(IntegrabilityError):
        ms.eta_transform(AtomicMeasure.dirac(800.0), P1)  # e^{800} overflows


def test_check_integrability_dirac():
    rep = ms.check_integrability(AtomicMeasure.dirac(1.0), P1, 3)
    assert rep.finite and rep.value == pytest.approx(E, rel=1e-15)


def test_check_integrability_yaglom_is_nonfinite():
    rep = ms.check_integrability(ms.yaglom_measure(P1), P1, 3)
    assert not rep.finite and rep.value == math.inf


def test_check_integrability_exponential_density():
    # density 2 e^{-2x}: int x^3 e^{x} 2 e^{-2x} dx = 2 * Gamma(4) = 12
    rep = ms.check_integrability(ms.exponential_measure(2.0), P1, 3)
    assert rep.finite
    assert rep.value == pytest.approx(12.0, rel=1e-5)


@pytest.mark.parametrize("mu", [AtomicMeasure.dirac(2.0), ms.exponential_measure(2.0),
                                ms.yaglom_measure(P1), ms.exponential_measure(1.0)])
def test_k0_integrability_matches_eta_mass(mu):
    finite = ms.check_integrability(mu, P1, 0).finite
    try:
        ms.eta_mass(mu, P1)
        eta_finite = True
    except IntegrabilityError:
        eta_finite = False
    assert finite == eta_finite


@pytest.mark.parametrize("k,expected", [(0, 1.0), (1, 3.0), (2, 9.0)])
def test_moment_dirac(k, expected):
    assert ms.moment(AtomicMeasure.dirac(3.0), k) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("r,expected", [(1.0, 6.0), (2.0, 1.5)])
def test_moment_yaglom(r, expected):
    assert ms.moment(ms.yaglom_measure(DriftParams(r)), 2) == pytest.approx(expected, rel=1e-6)


def test_grid_integral_refinement_within_tail_bound():
    coarse = ms.exponential_measure(1.0, n=4001, span=25.0)
    fine = ms.exponential_measure(1.0, n=8001, span=25.0)
    f = lambda x: np.exp(-x) * np.cos(x)
    value, err = ms.integrate_with_error(coarse, f, sup_f=1.0)
    assert abs(value - ms.integrate(fine, f)) <= err


def test_second_moment_eta_dirac_and_pair():
    assert ms.second_moment_eta(AtomicMeasure.dirac(1.0), P1) == pytest.approx(1.0)
    mu = AtomicMeasure.from_pairs([[1, 0.5], [2, 0.5]])
    w = np.array([E, 2 * E * E]) / (E + 2 * E * E)
    assert ms.second_moment_eta(mu, P1) == pytest.approx(w @ [1, 4], rel=1e-14)


def test_json_round_trip(tmp_path):
    for mu in (AtomicMeasure.from_pairs([[0.25, 0.5], [1.5, 0.5]]), ms.exponential_measure(2.0, n=101, span=10)):
        path = tmp_path / "m.json"
        path.write_text(json.dumps(mu.to_dict()))
        back = ms.load_measure(path)
        assert ms.measure_hash(back) == ms.measure_hash(mu)


def test_unknown_measure_type():
    with pytest.raises(ValueError):
        ms.measure_from_dict({"type": "weird"})


def test_yaglom_measure_mass():
    mu = ms.yaglom_measure(P1)
    x = mu.grid
    val, _ = sint.quad(lambda v: v * math.exp(-v), 0, x[-1])
    assert ms.integrate(mu, lambda v: np.ones_like(v)) == pytest.approx(val, abs=1e-8)
