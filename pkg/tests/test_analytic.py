import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from qsdlab import analytic as an
from qsdlab.analytic import DriftParams
from qsdlab.quadrature import panel_rule, uniform_knots

P1 = DriftParams(1.0)

# mpmath (40 digits) evaluations of Phi((x-rt)/sqrt t) - e^{2rx} Phi((-x-rt)/sqrt t)
SURVIVAL_ORACLE = {
    (1.0, 1.0, 1.0): 0.33189799877682939357,
    (0.5, 3.0, 2.0): 0.4535818552730552448,
    (2.0, 0.5, 0.25): 0.039632593004746135126,
    (1.0, 50.0, 3.0): 1.6367607711398387134e-12,
    (3.0, 10.0, 0.5): 1.7202445622976105936e-22,
}
# mpmath evaluations of xy/t - sinh(xy/t) e^{-(x^2+y^2)/2t}
REMAINDER_ORACLE = {
    (10.0, 1.0, 2.0): 0.043199363560529642026,
    (1e4, 1.0, 2.0): 4.9992417520756453683e-8,
    (1.0, 1.0, 1.0): 0.56766764161830634595,
    (200.0, 0.5, 3.0): 0.00017137879264693191759,
}

pos = st.floats(min_value=1e-3, max_value=50.0)
times = st.floats(min_value=1e-2, max_value=1e5)


def _quad_halfline(f, scale=1.0, upper=80.0):
    nodes, weights = panel_rule(uniform_knots(0.0, upper, 0.05 * scale))
    return float(np.sum(weights * f(nodes)))


@pytest.mark.parametrize("r", [0.0, -1.0, math.nan, math.inf])
def test_drift_rejects_nonpositive(r):
    with pytest.raises(ValueError):
        DriftParams(r)


@pytest.mark.parametrize("r,expected", [(2.0, 2.0), (1.0, 0.5), (0.5, 0.125)])
def test_lambda0(r, expected):
    assert an.lambda0(DriftParams(r)) == expected
    assert DriftParams(r).lambda0 == expected


def test_eta_values():
    assert an.eta(P1, 0.0) == 0.0
    assert an.eta(P1, 1.0) == pytest.approx(math.e, rel=1e-15)
    assert an.eta(DriftParams(2.0), 1.0) == pytest.approx(math.exp(2) / 4, rel=1e-15)
    assert an.log_eta(P1, 2.0) == pytest.approx(math.log(an.eta(P1, 2.0)), rel=1e-14)


def test_yaglom_pdf_values():
    assert an.yaglom_pdf(P1, 1.0) == pytest.approx(math.exp(-1), rel=1e-15)
    assert an.yaglom_pdf(P1, 0.0) == 0.0


@pytest.mark.parametrize("r", [0.5, 1.0, 2.0, 3.7])
def test_yaglom_mode_by_grid_search(r):
    x = np.linspace(0, 10 / r, 200001)
    assert x[np.argmax(an.yaglom_pdf(DriftParams(r), x))] == pytest.approx(1 / r, abs=1e-4 / r)


@pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
def test_yaglom_pdf_integrates_to_one(r):
    val, _ = integrate.quad(lambda x: an.yaglom_pdf(DriftParams(r), x), 0, np.inf)
    assert val == pytest.approx(1.0, abs=1e-12)


def test_yaglom_cdf_values():
    assert an.yaglom_cdf(P1, 0.0) == 0.0
    assert an.yaglom_cdf(P1, 200.0) == 1.0
    oracle, _ = integrate.quad(lambda x: an.yaglom_pdf(P1, x), 0, 2, epsabs=1e-14)
    assert an.yaglom_cdf(P1, 2.0) == pytest.approx(oracle, rel=1e-13)
    assert an.yaglom_cdf(P1, 2.0) == pytest.approx(0.593994, abs=1e-6)


def test_yaglom_cdf_small_argument_branch_is_continuous():
    x = np.array([1e-6, 9.99e-4, 1.001e-3, 0.01])
    with mp.workdps(40):
        exact = [float(1 - (1 + mp.mpf(v)) * mp.e ** (-mp.mpf(v))) for v in x]
    np.testing.assert_allclose(an.yaglom_cdf(P1, x), exact, rtol=1e-12)


@pytest.mark.parametrize("k,expected", [(0, 1.0), (1, 2.0), (2, 6.0), (3, 24.0)])
def test_yaglom_moments(k, expected):
    assert an.yaglom_moment(P1, k) == pytest.approx(expected)
    assert an.yaglom_moment(DriftParams(2.0), k) == pytest.approx(expected / 2 ** k)


def test_normal_cdf_against_mpmath():
    z = np.concatenate([np.linspace(-38, 38, 301), [-37.9, -20.5, -8.25, 0.0, 5.5]])
    with mp.workdps(40):
        ref = np.array([float(mp.ncdf(mp.mpf(v))) for v in z])
    # deep in the tail the rounding of z/sqrt(2) alone costs ~z^2 ulps; subnormals carry no relative precision
    np.testing.assert_allclose(an.normal_cdf(z), ref, rtol=5e-13, atol=1e-300)
    assert an.normal_cdf(-39.0) == 0.0
    assert an.normal_cdf(39.0) == 1.0


@pytest.mark.parametrize("t,expected", [(1.0, math.sqrt(2 * math.pi) / 2), (2.0, 2 * math.sqrt(math.pi)),
                                        (4.0, 4 * math.sqrt(2 * math.pi))])
def test_k_factor(t, expected):
    assert an.k_factor(t) == pytest.approx(expected, rel=1e-15)


def test_bessel3_boundary_limit():
    assert an.bessel3_density(1.0, 0.0, 1.0) == pytest.approx(2 / math.sqrt(2 * math.pi) * math.exp(-0.5), rel=1e-14)
    # continuity in x at 0
    assert an.bessel3_density(1.0, 1e-9, 1.0) == pytest.approx(an.bessel3_density(1.0, 0.0, 1.0), rel=1e-8)


@pytest.mark.parametrize("t,x", [(1.0, 1.0), (0.1, 2.0), (5.0, 0.0), (30.0, 3.0)])
def test_bessel3_is_a_probability_density(t, x):
    val, _ = integrate.quad(lambda y: an.bessel3_density(t, x, y), 0, np.inf, epsabs=1e-13, epsrel=1e-13, limit=200)
    assert val == pytest.approx(1.0, abs=1e-10)


def test_bessel3_large_argument_does_not_overflow():
    v = an.bessel3_density(1e-3, 40.0, 40.0)
    assert np.isfinite(v) and v > 0
    assert v == pytest.approx(1 / math.sqrt(2 * math.pi * 1e-3), rel=1e-3)


@settings(max_examples=200, deadline=None)
@given(t=times, x=pos, y=pos)
def test_detailed_balance(t, x, y):
    lhs = x * x * an.bessel3_density(t, x, y)
    rhs = y * y * an.bessel3_density(t, y, x)
    if lhs == 0 and rhs == 0:
        return
    assert lhs == pytest.approx(rhs, rel=1e-13)


@pytest.mark.parametrize("r", [0.3, 1.0, 2.0, 4.0])
def test_doob_identity(r):
    p = DriftParams(r)
    t, x, y = np.meshgrid([0.2, 1.0, 5.0], [0.3, 1.0, 2.0], [0.5, 1.0, 2.5], indexing="ij")
    lhs = an.bessel3_density(t, x, y)
    rhs = np.exp(an.lambda0(p) * t + an.log_eta(p, y) - an.log_eta(p, x)) * an.killed_density(p, t, x, y)
    np.testing.assert_allclose(rhs, lhs, rtol=1e-12)


def test_killed_density_vanishes_at_zero():
    assert an.killed_density(P1, 1.0, 1.0, 0.0) == 0.0
    assert an.killed_density(P1, 1.0, 0.0, 1.0) == 0.0


def test_killed_density_matches_reflection_formula():
    # e^{-r(y-x) - r^2 t/2} (phi_t(y-x) - phi_t(y+x)), written naively (fine at moderate arguments)
    r, t, x, y = 1.3, 0.7, 0.9, 1.6
    naive = (math.exp(-r * (y - x) - r * r * t / 2) / math.sqrt(2 * math.pi * t)
             * (math.exp(-(y - x) ** 2 / (2 * t)) - math.exp(-(y + x) ** 2 / (2 * t))))
    assert an.killed_density(DriftParams(r), t, x, y) == pytest.approx(naive, rel=1e-13)


@pytest.mark.parametrize("key", sorted(SURVIVAL_ORACLE))
def test_survival_against_mpmath(key):
    r, t, x = key
    assert an.survival_probability(DriftParams(r), t, x) == pytest.approx(SURVIVAL_ORACLE[key], rel=1e-10)


def test_survival_known_value_by_quadrature():
    # the quadrature oracle: integrate the killed density over (0, inf)
    val, _ = integrate.quad(lambda y: an.killed_density(P1, 1.0, 1.0, y), 0, np.inf, epsabs=1e-14, epsrel=1e-14)
    assert val == pytest.approx(0.331898, abs=1e-6)
    assert an.survival_probability(P1, 1.0, 1.0) == pytest.approx(val, abs=1e-12)


@pytest.mark.parametrize("r", [0.5, 1.0, 2.5])
@pytest.mark.parametrize("x", [0.1, 1.0, 4.0])
@pytest.mark.parametrize("t", [0.05, 1.0, 7.0, 40.0])
def test_survival_equals_integral_of_killed_density(r, x, t):
    p = DriftParams(r)
    upper = x + 12 * math.sqrt(t) + 1
    q = _quad_halfline(lambda y: an.killed_density(p, t, x, y), scale=min(1.0, math.sqrt(t)), upper=upper)
    assert an.survival_probability(p, t, x) == pytest.approx(q, abs=1e-10)
    # scaled survival is the same number times e^{lambda0 t}
    assert an.scaled_survival(p, t, x) * math.exp(-p.lambda0 * t) == pytest.approx(
        an.survival_probability(p, t, x), rel=1e-10, abs=1e-300)


def test_survival_short_time_limit():
    for r in (0.5, 1.0, 3.0):
        assert an.survival_probability(DriftParams(r), 1e-8, 1.0) == pytest.approx(1.0, abs=1e-12)
    assert an.scaled_survival(P1, 0.0, 1.0) == 1.0


def test_scaled_survival_large_time_against_mpmath():
    for r, t, x in [(1.0, 400.0, 1.0), (1.0, 2000.0, 2.0), (0.5, 300.0, 0.3), (2.0, 100.0, 5.0)]:
        with mp.workdps(50):
            rr, tt, xx = mp.mpf(r), mp.mpf(t), mp.mpf(x)
            p = mp.ncdf((xx - rr * tt) / mp.sqrt(tt)) - mp.e ** (2 * rr * xx) * mp.ncdf((-xx - rr * tt) / mp.sqrt(tt))
            ref = float(p * mp.e ** (rr * rr * tt / 2))
        assert an.scaled_survival(DriftParams(r), t, x) == pytest.approx(ref, rel=1e-9)


def test_scaled_survival_approaches_eigenfunction_limit():
    # e^{lambda0 t} P_x(tau > t) ~ x e^{rx} 2/(r^2 sqrt(2 pi t^3)) for large t
    r, x, t = 1.0, 1.0, 1e6
    lead = x * math.exp(r * x) * 2 / (r * r * math.sqrt(2 * math.pi * t ** 3))
    assert an.scaled_survival(DriftParams(r), t, x) == pytest.approx(lead, rel=1e-5)


@pytest.mark.parametrize("key", sorted(REMAINDER_ORACLE))
def test_sinh_remainder_against_mpmath(key):
    assert an.sinh_remainder(*key) == pytest.approx(REMAINDER_ORACLE[key], rel=1e-13)


@settings(max_examples=300, deadline=None)
@given(t=times, x=pos, y=pos)
def test_sinh_remainder_bounds(t, x, y):
    v = an.sinh_remainder(t, x, y)
    assert v >= 0
    assert v <= x * y * (x * x + y * y) / (2 * t * t) * (1 + 1e-12)


def test_sinh_remainder_leading_order():
    t = 1e6
    assert t * t * an.sinh_remainder(t, 1.0, 2.0) == pytest.approx(5.0, rel=1e-5)
    assert an.leading_coefficient(1.0, 2.0) == 5.0


def test_sinh_remainder_branches_agree_near_switch():
    rng = np.random.default_rng(4)
    x = rng.uniform(0.1, 3.0, 500)
    y = rng.uniform(0.1, 3.0, 500)
    u = rng.uniform(2e-3, 5e-2, 500)
    t = (x + y) ** 2 / (2 * u)
    c = x * y / t
    up, um = (x + y) ** 2 / (2 * t), (x - y) ** 2 / (2 * t)
    np.testing.assert_allclose(an._remainder_series(c, up, um), an._remainder_direct(c, um), rtol=1e-12)


def test_sinh_remainder_no_overflow():
    v = an.sinh_remainder(1e-3, 30.0, 30.0)
    assert v == pytest.approx(900.0 / 1e-3 - 0.5, rel=1e-14)


def test_expansion_coefficient_values():
    # (-1)^n ((x+y)^{2n} - (x-y)^{2n}) / (2^{n+1} n!)
    assert an.expansion_coefficient(3, 1.0, 1.0) == pytest.approx(-2.0 / 3.0, rel=1e-15)
    assert an.expansion_coefficient(4, 1.0, 1e-12) == pytest.approx(0.0, abs=1e-10)
    for n in (2, 1, 0, 3.5):
        with pytest.raises(ValueError):
            an.expansion_coefficient(n, 1.0, 1.0)


def test_expansion_partial_sums_converge_to_remainder():
    t, x, y = 10.0, 1.0, 2.0
    target = an.sinh_remainder(t, x, y)
    total = an.leading_coefficient(x, y) / t ** 2
    errors = []
    for n in range(3, 30):
        total += an.expansion_coefficient(n, x, y) / t ** n
        errors.append(abs(total - target))
    assert errors[-1] < 1e-15
    assert errors[5] < errors[0]


def test_expansion_coefficients_match_taylor_coefficients():
    # independent oracle: Taylor coefficients in s = 1/t from mpmath
    with mp.workdps(40):
        x, y = mp.mpf("0.7"), mp.mpf("1.9")
        f = lambda s: x * y * s - mp.sinh(x * y * s) * mp.e ** (-(x * x + y * y) * s / 2)
        coeffs = mp.taylor(f, 0, 7)
    assert float(coeffs[2]) == pytest.approx(an.leading_coefficient(0.7, 1.9), rel=1e-12)
    for n in range(3, 8):
        assert float(coeffs[n]) == pytest.approx(an.expansion_coefficient(n, 0.7, 1.9), rel=1e-10)


def _ck_rule(upper, width):
    nodes, weights = panel_rule(uniform_knots(0.0, upper, width))
    return nodes.ravel(), weights.ravel()


@pytest.mark.parametrize("x", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("s", [0.3, 1.0, 2.0])
@pytest.mark.parametrize("t", [0.5, 1.0, 3.0])
def test_chapman_kolmogorov(x, s, t):
    y = np.array([0.25, 1.0, 2.5])
    z, w = _ck_rule(x + 14 * math.sqrt(s + t) + 2, 0.05)
    p = DriftParams(1.0)
    lhs = np.array([np.sum(w * an.killed_density(p, s, x, z) * an.killed_density(p, t, z, yy)) for yy in y])
    np.testing.assert_allclose(lhs, an.killed_density(p, s + t, x, y), atol=1e-8, rtol=0)
    lhs = np.array([np.sum(w * an.bessel3_density(s, x, z) * an.bessel3_density(t, z, yy)) for yy in y])
    np.testing.assert_allclose(lhs, an.bessel3_density(s + t, x, y), atol=1e-8, rtol=0)


@pytest.mark.parametrize("t,y", [(1.0, 1.0), (2.0, 0.5), (0.5, 3.0)])
def test_gamma_is_invariant(t, y):
    M = y + 15 * math.sqrt(t)
    # Gaussian tail beyond M is below e^{-(M - y)^2 / 2t} * poly, < 1e-40 here
    z, w = _ck_rule(M, 0.02)
    val = np.sum(w * z * z * an.bessel3_density(t, z, y))
    assert val == pytest.approx(y * y, rel=1e-10)


def test_kernels_agree_with_their_definitions():
    t, x, y = 3.0, 0.8, 1.7
    assert an.kt_kernel(t, x, y) == pytest.approx(an.k_factor(t) * an.bessel3_density(t, x, y), rel=1e-14)
    naive = t * (y / x) * math.sinh(x * y / t) * math.exp(-(x * x + y * y) / (2 * t))
    assert an.kt_kernel(t, x, y) == pytest.approx(naive, rel=1e-14)
    assert an.gap_kernel(t, x, y) == pytest.approx(y * y - naive, rel=1e-12)
    assert an.gap_kernel(t, 0.0, y) == pytest.approx(y * y - an.kt_kernel(t, 0.0, y), rel=1e-12)
