import math

import numpy as np
import pytest
import sympy
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from adhoc_capacity import analysis
from adhoc_capacity.scheduling import max_degree_bound
from adhoc_capacity.sphere import GeometryDomainError, SphereParams, pair_distance_pdf

# oracle values from 30-digit evaluations
T0 = 0.0500079194647532866392604409307
BUDGET_EPS001_N1E4 = 0.00067239238973680134207895658654
E_DELTA_INV_E_4PI = 0.260803479565943062443604434293


def test_t0_root():
    t0 = analysis.solve_t0()
    assert t0 == pytest.approx(T0, rel=1e-13)
    assert (1 - 16 * t0 / math.pi) / (8 - t0) == pytest.approx(3 / 32, rel=1e-13)
    with pytest.raises(GeometryDomainError):
        analysis.solve_t0(0.2)


@pytest.mark.parametrize("c1", [0, 3, 5.5])
def test_m0(c1):
    assert analysis.solve_m0(c1) == 64 * (1 + c1)
    assert 2 * (1 + c1) / analysis.solve_m0(c1, 0.1) == pytest.approx(0.1)


def test_beta0_formula_and_preconditions():
    assert analysis.beta0(1.0, 12.0, 3.0) == pytest.approx(20.0 ** 3, rel=1e-15)
    assert analysis.beta0(0.5, 12.0, 2.5) == pytest.approx(40.0 ** 2.5, rel=1e-15)
    with pytest.raises(GeometryDomainError):
        analysis.beta0(1.0, 2.0, 4.0)
    with pytest.raises(GeometryDomainError):
        analysis.beta0(0.0, 20.0, 4.0)


@given(st.floats(0.01, 1.0), st.floats(0.01, 1.0), st.floats(10, 500), st.floats(10, 500))
def test_beta0_monotone(ta, tb, ma, mb):
    lo_t, hi_t = sorted((ta, tb))
    lo_m, hi_m = sorted((ma, mb))
    assert analysis.beta0(hi_t, lo_m, 3.0) <= analysis.beta0(lo_t, lo_m, 3.0)
    assert analysis.beta0(lo_t, lo_m, 3.0) <= analysis.beta0(lo_t, hi_m, 3.0)


def test_beta1_examples():
    # exact integer oracle: 100^3 * 25^3
    assert analysis.beta1(17.0, 3.0) == 100 ** 3 * 25 ** 3 == 15_625_000_000
    t0, m0 = analysis.solve_t0(), 64.0
    assert analysis.beta1(m0, 4.0) / analysis.beta0(t0, m0, 4.0) == pytest.approx((100 * t0) ** 4, rel=1e-12)
    with pytest.raises(GeometryDomainError):
        analysis.beta1(16.0, 3.0)


def test_expected_delta_l_examples():
    assert analysis.expected_delta_L(1.0, 1e4) == 1.0
    assert analysis.expected_delta_L(math.exp(-1), 4 * math.pi) == pytest.approx(E_DELTA_INV_E_4PI, rel=1e-14)
    with pytest.raises(GeometryDomainError):
        analysis.expected_delta_L(0.0, 100.0)


@pytest.mark.parametrize("n,delta", [(1e4, 0.99), (500.0, 0.5), (4 * math.pi, 0.3)])
def test_expected_delta_l_matches_quadrature(n, delta):
    sp = SphereParams(n)
    val, _ = integrate.quad(lambda l: delta ** l * pair_distance_pdf(l, sp), 0, sp.half_circumference,
                            epsabs=1e-14, epsrel=1e-12, limit=200)
    assert analysis.expected_delta_L(delta, n) == pytest.approx(val, rel=1e-10)


def test_expected_delta_l_monotone():
    for n in (50.0, 1e4, 1e6):
        e = [analysis.expected_delta_L(d, n) for d in np.linspace(0.001, 1.0, 200)]
        assert all(0 < v <= 1 for v in e)
        assert all(a <= b for a, b in zip(e, e[1:]))


def test_per_link_budget():
    rho = 10 * math.sqrt(math.log(1e4))
    assert analysis.per_link_loss_budget(0.01, 1e4, rho) == pytest.approx(BUDGET_EPS001_N1E4, rel=1e-14)
    assert analysis.per_link_loss_budget(0.05, 1e4, rho) == pytest.approx(5 * BUDGET_EPS001_N1E4, rel=1e-14)
    b = [analysis.per_link_loss_budget(0.05, n, 10 * math.sqrt(math.log(n))) for n in (1e4, 1e8, 1e16)]
    assert b[0] > b[1] > b[2]


def test_upper_pi1_bound():
    lam, n, rho, phi = 0.01, 1e4, 5.0, 0.5
    b = analysis.throughput_upper_pi1(lam, n, rho, phi)
    assert b == pytest.approx(lam * 1024 * math.pi * rho ** 2 / (n * math.log(phi) ** 2), rel=1e-15)
    assert analysis.throughput_upper_pi1(lam, n, 2 * rho, phi) == pytest.approx(4 * b, rel=1e-15)
    for bad in (0.0, 1.0, 1.5):
        with pytest.raises(GeometryDomainError):
            analysis.throughput_upper_pi1(lam, n, rho, bad)
    assert analysis.throughput_upper_pi1_log(lam, n, rho, 0.0) == math.inf


def test_upper_pi1_c_over_n_form():
    phi = 0.3
    for n in (1e3, 1e6):
        lam, rho = 1 / (50 * math.log(n)), 10 * math.sqrt(math.log(n))
        assert analysis.throughput_upper_pi1(lam, n, rho, phi) == pytest.approx(
            analysis.loss_bound_c1(math.log(phi)) / n, rel=1e-13)


def test_kn_coefficients_symbolic():
    # oracle: sympy expansion of 8 (1 + 4 g x)^2 + 1 with g = (256/(alpha - 2))^(1/(alpha - 2))
    g, x = sympy.symbols("g x", positive=True)
    poly = sympy.Poly(sympy.expand(8 * (1 + 4 * g * x) ** 2 + 1), x)
    for a in (2.5, 3.0, 4.0, 6.0, 10.0):
        gv = (256 / (a - 2)) ** (1 / (a - 2))
        want = [float(poly.coeff_monomial(x ** k).subs(g, gv)) for k in range(3)]
        assert analysis.kn_coefficients(a) == pytest.approx(tuple(want), rel=1e-14)
        for n in np.geomspace(10, 1e9, 12):
            xv = math.log(n) ** (1 / (a - 2))
            a0, a1, a2 = analysis.kn_coefficients(a)
            assert a0 + a1 * xv + a2 * xv * xv == pytest.approx(max_degree_bound(n, a) + 1, rel=1e-12)


def test_lower_pi2_properties():
    assert analysis.throughput_lower_pi2(1e4, 4.0, 1.0) == 0.0
    with pytest.raises(GeometryDomainError):
        analysis.throughput_lower_pi2(1e4, 2.0, 0.1)
    eps = np.linspace(0.01, 0.99, 30)
    v = [analysis.throughput_lower_pi2(1e5, 4.0, e) for e in eps]
    assert all(a > b for a, b in zip(v, v[1:]))
    w = [analysis.throughput_lower_pi2(1e5, 4.0, 0.1, w_bandwidth=x) for x in (0.5, 1.0, 2.0)]
    assert w[0] < w[1] < w[2]


@pytest.mark.parametrize("alpha", [2.5, 3.0, 4.0, 6.0, 10.0])
def test_lower_pi2_envelope(alpha):
    r = [analysis.throughput_lower_pi2(2.0 ** k, alpha, 0.05) / analysis.pi2_envelope(2.0 ** k, alpha)
         for k in (20, 30)]
    assert max(r) / min(r) < 1.05


def test_ni_bound():
    assert analysis.ni_bound(100.0, 2.0, 64.0, 0.0) == pytest.approx(50 * 2 / 64)
    assert analysis.ni_bound(200.0, 2.0, 64.0, 1.0) == pytest.approx(2 * analysis.ni_bound(100.0, 2.0, 64.0, 1.0))
    assert analysis.ni_bound(100.0, 2.0, 1e300, 3.0) < 1e-290
    with pytest.raises(GeometryDomainError):
        analysis.ni_bound(1.0, 1.0, 9.0, 1.0)


def test_lemma_bounds_shapes():
    lo, hi = analysis.lemma1_bounds(np.array([16.0, 160.0]), 2.0)
    np.testing.assert_allclose(lo, [1.0, 10.0])
    np.testing.assert_allclose(hi, [128 / math.pi, 1280 / math.pi])
    assert analysis.lemma2_bound(80.0, 1.0, 0.0) == pytest.approx(10.0)


def test_crossing_hops_model():
    np.testing.assert_allclose(analysis.crossing_hops([0.0, 0.1, 1.0, 1e3], 100.0, 10.0),
                               [1.0, 1.0, 20 / math.pi, 2e4 / math.pi])
    # p = 1 gives total probability one
    assert analysis.expected_success_fixed_p(1.0, 4096.0, 5000.0) == pytest.approx(1.0, rel=1e-10)


def test_constants_bundle():
    c = analysis.AnalysisConstants.build(4.0, 5.0, 3.0, kappa=1.0, epsilon=0.05)
    assert c.M0 == 64 * 6
    assert c.t0 == pytest.approx(T0, rel=1e-13)
    assert c.beta0 == pytest.approx(((c.M0 + 8) / c.t0) ** 4, rel=1e-14)
    assert c.log_phi_beta0 <= 0.0
    assert 0 < c.delta <= 1
    assert set(c.to_dict()) >= {"t0", "M0", "beta0", "beta1", "delta"}
