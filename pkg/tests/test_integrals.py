import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from cfgp import integrals, kernels
from cfgp.exceptions import InvalidArgumentError
from cfgp.gp import TrendBasis
from cfgp.kernels import CorrelationSpec, Family

FAMS = st.sampled_from(list(Family))


def k1(fam, phi):
    spec = CorrelationSpec(fam, [phi])
    return lambda a, b: kernels.corr_eval([a - b], spec)


def oracle(f, pts=()):
    return quad(f, 0, 1, points=[p for p in pts if 0 < p < 1] or None, epsabs=1e-13, epsrel=1e-12, limit=200)[0]


class TestFrozenValues:
    def test_gaussian_line_integral_centre(self):
        # int_0^1 exp(-(0.5 - u)^2) du = sqrt(pi) erf(1/2)
        I = integrals.line_integrals([[0.5]], CorrelationSpec("gaussian", [1.0]))
        assert I[0, 0, 0] == pytest.approx(math.sqrt(math.pi) * math.erf(0.5), rel=1e-14)
        assert I[0, 0, 0] == pytest.approx(0.9225, abs=1e-4)

    def test_exponential_line_integral_at_zero(self):
        I = integrals.line_integrals([[0.0]], CorrelationSpec("matern05", [1.0]))
        assert I[0, 0, 0] == pytest.approx(1 - math.exp(-1), rel=1e-14)
        # int_0^1 u exp(-u) du = 1 - 2/e
        assert I[0, 0, 1] == pytest.approx(1 - 2 * math.exp(-1), rel=1e-13)

    def test_exponential_w_at_zero(self):
        w = integrals.w_matrix([[0.0]], [[0.0]], CorrelationSpec("matern05", [1.0]))
        assert w[0, 0] == pytest.approx((1 - math.exp(-2)) / 2, rel=1e-14)

    def test_legendre_gram_is_diagonal(self):
        G = integrals.g_matrix(TrendBasis("legendre"), 1, exact=True)
        assert G[0, 0] == 1 and G[1, 1] == Fraction(1, 3) and G[2, 2] == Fraction(1, 5)
        assert G[0, 1] == 0 and G[1, 2] == 0 and G[0, 2] == 0

    def test_interaction_column(self):
        G = integrals.g_matrix(TrendBasis("legendre"), 2, exact=True)
        # int (2x-1)^2 (2y-1)^2 = 1/9
        assert G[5, 5] == Fraction(1, 9)

    def test_monomial_moment(self):
        assert integrals.monomial_moment((1, 2), (0, 1)) == Fraction(1, 8)


class TestAgainstQuadrature:
    @given(x=st.floats(0, 1), phi=st.floats(0.3, 8), fam=FAMS)
    def test_line_integrals(self, x, phi, fam):
        k = k1(fam, phi)
        I = integrals.line_integrals([[x]], CorrelationSpec(fam, [phi]))[0, 0]
        for q in range(3):
            assert I[q] == pytest.approx(oracle(lambda u: u**q * k(x, u), [x]), abs=1e-10)

    @given(a=st.floats(0, 1), b=st.floats(0, 1), phi=st.floats(0.3, 8), fam=FAMS)
    def test_w_entries(self, a, b, phi, fam):
        k = k1(fam, phi)
        w = integrals.w_matrix([[a]], [[b]], CorrelationSpec(fam, [phi]))[0, 0]
        assert w == pytest.approx(oracle(lambda u: k(a, u) * k(b, u), [a, b]), abs=1e-10)

    @given(a=st.floats(0, 1), phi=st.floats(0.3, 8), fam=FAMS)
    def test_w_diag_matches_matrix(self, a, phi, fam):
        spec = CorrelationSpec(fam, [phi])
        assert integrals.w_diag([[a]], spec)[0] == pytest.approx(integrals.w_matrix([[a]], [[a]], spec)[0, 0], rel=1e-13)

    @given(x=st.floats(0.01, 0.99), phi=st.floats(0.3, 5), fam=st.sampled_from(list(Family)[1:]))
    def test_matern_helpers(self, x, phi, fam):
        c = {Family.MATERN05: 1.0, Family.MATERN15: math.sqrt(3), Family.MATERN25: math.sqrt(5)}[fam] * phi
        A, B = integrals.matern_ab(x, phi, fam, kmax=3)
        for k in range(1, 4):
            assert A[k - 1] == pytest.approx(quad(lambda u: u ** (k - 1) * math.exp(-c * (x - u)), 0, x)[0], rel=1e-9, abs=1e-13)
            assert B[k - 1] == pytest.approx(quad(lambda u: u ** (k - 1) * math.exp(-c * (u - x)), x, 1)[0], rel=1e-9, abs=1e-13)

    def test_matern_helpers_reject_gaussian(self):
        with pytest.raises(InvalidArgumentError):
            integrals.matern_ab(0.3, 1.0, "gaussian")

    def test_h_matrix_two_dimensions(self):
        spec = CorrelationSpec("matern25", [1.5, 0.7])
        basis = TrendBasis("legendre")
        x = np.array([[0.3, 0.8]])
        H = integrals.h_matrix(x, basis, spec)[0]
        ku = [k1("matern25", spec.phi[r]) for r in range(2)]
        # the integrand factorizes over coordinates
        i0 = [oracle(lambda u: ku[r](x[0, r], u), [x[0, r]]) for r in range(2)]
        i1 = [oracle(lambda u: (2 * u - 1) * ku[r](x[0, r], u), [x[0, r]]) for r in range(2)]
        i2 = [oracle(lambda u: (6 * u * u - 6 * u + 1) * ku[r](x[0, r], u), [x[0, r]]) for r in range(2)]
        ref = [i0[0] * i0[1], i1[0] * i0[1], i0[0] * i1[1], i2[0] * i0[1], i0[0] * i2[1], i1[0] * i1[1]]
        np.testing.assert_allclose(H, ref, rtol=1e-10)

    @given(seed=st.integers(0, 2**31), fam=FAMS)
    def test_w_two_dimensions_is_product(self, seed, fam):
        r = np.random.default_rng(seed)
        a, b, phi = r.uniform(0, 1, 2), r.uniform(0, 1, 2), r.uniform(0.5, 3, 2)
        W = integrals.w_matrix(a[None], b[None], CorrelationSpec(fam, phi))[0, 0]
        per = [integrals.w_matrix([[a[i]]], [[b[i]]], CorrelationSpec(fam, [phi[i]]))[0, 0] for i in range(2)]
        assert W == pytest.approx(per[0] * per[1], rel=1e-13)
