import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfgp import kernels
from cfgp.exceptions import InvalidArgumentError
from cfgp.gp import Dataset, TrendBasis
from cfgp.inference import (ModelConfig, Parameterization, fisher_information, fisher_matrix, fit_mle, fit_model,
                            loglik_and_grad, profile_loglik)
from cfgp.kernels import CombinedCovSpec, CorrelationSpec, FidelityKernelSpec
from cfgp.simulators import gp_draw


def dense_profile(data, basis, spec, jitter):
    """Profile log-likelihood from dense inverses and determinants."""
    K = kernels.cov_matrix(data.X, data.T, data.X, data.T, spec.with_sigma2(1.0)) + jitter * np.eye(data.n)
    F = basis.evaluate(data.X, data.T)
    Ki = np.linalg.inv(K)
    P = F.T @ Ki @ F
    Pi = Ki - Ki @ F @ np.linalg.inv(P) @ F.T @ Ki
    q = data.y @ Pi @ data.y
    n, p = F.shape
    return -0.5 * (n - p) * math.log(q) - 0.5 * np.linalg.slogdet(K)[1] - 0.5 * np.linalg.slogdet(P)[1]


def random_problem(seed, fam="gaussian", d=1, m=1, n=10):
    r = np.random.default_rng(seed)
    X, T = r.uniform(0, 1, (n, d)), r.uniform(0.1, 1, (n, m))
    y = np.cos(4 * X.sum(1)) + T.sum(1) ** 2 + 0.05 * r.standard_normal(n)
    return Dataset(X, T, y)


class TestParameterization:
    def test_round_trip(self):
        p = Parameterization(2, 1, ModelConfig())
        theta = np.array([0.1, -0.3, 0.5, 0.2, -1.0, 1.5])
        np.testing.assert_allclose(p.from_spec(p.to_spec(theta)), theta, atol=1e-12)

    def test_fixed_gamma_drops_coordinate(self):
        p = Parameterization(1, 1, ModelConfig(fixed_gamma=0.5))
        assert p.size == 3
        assert p.to_spec(np.zeros(3)).fidelity.gamma == 0.5

    def test_gamma_stays_inside_bounds(self):
        p = Parameterization(1, 1, ModelConfig(gamma_bounds=(0.01, 0.99)))
        assert 0.01 < p.gamma_of(-9) < p.gamma_of(9) < 0.99

    def test_bad_bounds(self):
        with pytest.raises(InvalidArgumentError):
            ModelConfig(gamma_bounds=(0.5, 0.4))


class TestLikelihood:
    @given(seed=st.integers(0, 2**31), fam=st.sampled_from(["gaussian", "matern05", "matern15", "matern25"]))
    def test_matches_dense_oracle(self, seed, fam):
        data = random_problem(seed, fam)
        spec = CombinedCovSpec(1.0, CorrelationSpec(fam, [1.3]), CorrelationSpec(fam, [2.0]),
                               FidelityKernelSpec(0.7, [1.0], [4.0]))
        got = profile_loglik(data, TrendBasis("legendre"), spec, jitter=1e-8)
        assert got == pytest.approx(dense_profile(data, TrendBasis("legendre"), spec, 1e-8), rel=1e-8, abs=1e-8)

    @settings(max_examples=15)
    @given(seed=st.integers(0, 2**31), fam=st.sampled_from(["gaussian", "matern05", "matern15", "matern25"]),
           d=st.integers(1, 2), m=st.integers(1, 2))
    def test_gradient_five_point_stencil(self, seed, fam, d, m):
        data = random_problem(seed, fam, d, m, n=9)
        param = Parameterization(d, m, ModelConfig(family=fam))
        theta = np.random.default_rng(seed).uniform(-1, 1, param.size)
        _, g = loglik_and_grad(data, TrendBasis(), theta, param)
        h = 1e-4
        fd = np.empty_like(g)
        for k in range(theta.size):
            e = np.zeros_like(theta)
            e[k] = h
            f = [loglik_and_grad(data, TrendBasis(), theta + c * e, param)[0] for c in (-2, -1, 1, 2)]
            fd[k] = (f[0] - 8 * f[1] + 8 * f[2] - f[3]) / (12 * h)
        assert np.max(np.abs(g - fd) / np.maximum(1.0, np.abs(fd))) < 1e-5

    def test_needs_more_points_than_columns(self):
        data = random_problem(0, n=3)
        spec = CombinedCovSpec(1.0, CorrelationSpec("gaussian", [1.0]), CorrelationSpec("gaussian", [1.0]),
                               FidelityKernelSpec(0.5, [1.0]))
        with pytest.raises(InvalidArgumentError):
            profile_loglik(data, TrendBasis("legendre"), spec)


class TestFit:
    def test_recovers_roughness_ordering(self):
        # draws with strongly different gamma give ordered estimates
        est = {}
        X = np.linspace(0, 1, 12)
        for g in (0.1, 0.9):
            sim = gp_draw({"phi2_sq": 4.0, "gamma": g}, seed=7)
            Xd = np.repeat(X, 4)[:, None]
            Td = np.tile([0.25, 0.5, 0.75, 1.0], 12)[:, None]
            data = Dataset(Xd, Td, sim(Xd, Td))
            _, rep = fit_model(data, TrendBasis(), n_starts=6, seed=1)
            est[g] = rep.gamma
        assert est[0.1] < est[0.9]

    def test_never_worse_than_start_and_deterministic(self):
        data = random_problem(4, n=12)
        a = fit_mle(data, TrendBasis(), n_starts=3, seed=5)
        b = fit_mle(data, TrendBasis(), n_starts=3, seed=5)
        assert a.loglik == b.loglik
        for rec in a.starts:
            assert rec.value >= -1e24
        assert a.loglik == max(r.value for r in a.starts)

    def test_report_serializable(self):
        import json

        rep = fit_mle(random_problem(2, n=10), TrendBasis(), n_starts=2, seed=0)
        d = rep.to_dict()
        json.dumps(d)
        assert set(d) >= {"sigma2", "gamma", "phi1", "phi2", "a", "beta", "loglik", "starts"}

    def test_fixed_gamma_respected(self):
        rep = fit_mle(random_problem(3, n=10), TrendBasis(), ModelConfig(fixed_gamma=0.5), n_starts=2)
        assert rep.gamma == 0.5


class TestFisher:
    def test_single_point_variance(self):
        # one observation: 0.5 * (1 / sigma2)^2 at sigma2 = 2
        spec = CombinedCovSpec(2.0, CorrelationSpec("gaussian", [1.0]), CorrelationSpec("gaussian", [1.0]),
                               FidelityKernelSpec(0.5, [1.0]))
        assert fisher_information([[0.5]], [[0.0]], spec, "sigma2", "sigma2") == pytest.approx(0.125, rel=1e-8)

    def test_symmetric_psd(self):
        r = np.random.default_rng(0)
        X, T = r.uniform(0, 1, (12, 1)), r.uniform(0.25, 1, (12, 1))
        spec = CombinedCovSpec(1.0, CorrelationSpec("gaussian", [1.0]), CorrelationSpec("gaussian", [10**0.5]),
                               FidelityKernelSpec(0.5, [1.0]))
        F = fisher_matrix(X, T, spec, ["sigma2", "gamma", "a_0", "phi1_0", "phi2_0"])
        np.testing.assert_allclose(F, F.T)
        assert np.linalg.eigvalsh(F).min() > -1e-8 * np.abs(F).max()

    def test_unknown_name(self):
        spec = CombinedCovSpec(1.0, CorrelationSpec("gaussian", [1.0]), CorrelationSpec("gaussian", [1.0]),
                               FidelityKernelSpec(0.5, [1.0]))
        with pytest.raises(InvalidArgumentError):
            fisher_information([[0.5]], [[0.5]], spec, "beta", "gamma")
