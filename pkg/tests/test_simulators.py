import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cfgp import kernels
from cfgp.exceptions import ConfigError, InvalidArgumentError, SimulatorError
from cfgp.kernels import FidelityKernelSpec
from cfgp.simulators import (CostModel, GpDraw, PoissonAverage, Simulator, cost_eval, gp_draw, make_simulator,
                             poisson_average, poisson_synthetic)


class TestCost:
    def test_power_law_values(self):
        c = CostModel.power(2)
        assert c.cost([0.25]) == 16.0
        assert c.cost([1.0]) == 1.0

    def test_param_double(self):
        c = CostModel.from_dict({"form": "param_double", "a1": 2, "a2": 1, "b": 1})
        assert c.cost([0.1, 0.01]) == pytest.approx(1e4, rel=1e-12)

    @given(t=st.floats(0.01, 1.0), a=st.floats(0.5, 4), b=st.floats(0.1, 10))
    def test_inverse(self, t, a, b):
        c = CostModel("param_single", (a,), b)
        assert c.inverse(c.cost([t])) == pytest.approx(t, rel=1e-10)

    @given(r=st.floats(1.0, 20.0))
    def test_affordable_box(self, r):
        c = CostModel.power(2)
        lo, hi = c.affordable_box(r, [0.25], [1.0])
        assert c.cost(lo) <= r
        assert lo[0] >= 0.25 and hi[0] == 1.0
        if r < 16:
            assert c.cost(lo) == pytest.approx(r, rel=1e-9)

    def test_nothing_affordable(self):
        assert CostModel.power(2).affordable_box(0.5, [0.25], [1.0]) is None

    def test_cost_eval_box(self):
        with pytest.raises(InvalidArgumentError):
            cost_eval(CostModel.power(2), [0.1], box=([0.25], [1.0]))

    def test_bad_forms(self):
        with pytest.raises(InvalidArgumentError):
            CostModel("param_double", (1.0,))
        with pytest.raises(ConfigError):
            CostModel.from_dict({"form": "power_single", "c": 2, "zeta": 1})


class TestPoisson:
    def test_centre_value(self):
        assert poisson_average(0.0) == pytest.approx(4 / math.pi**2, rel=1e-15)

    def test_unit_cube_mapping(self):
        sim = PoissonAverage()
        assert sim([[0.5]], [[0.3]])[0] == pytest.approx(4 / math.pi**2, rel=1e-15)

    def test_synthetic_error_vanishes_at_zero(self):
        sim = poisson_synthetic(amplitude=0.5)
        X = np.linspace(0, 1, 5)[:, None]
        np.testing.assert_allclose(sim(X, np.zeros((5, 1))), poisson_average(2 * X[:, 0] - 1))
        e1 = np.abs(sim(X, np.full((5, 1), 0.1)) - sim.exact(X)).max()
        e2 = np.abs(sim(X, np.full((5, 1), 0.2)) - sim.exact(X)).max()
        assert e1 < e2


class TestGpDraw:
    def test_deterministic(self):
        a = gp_draw({"phi2_sq": 10, "gamma": 0.5}, seed=3)
        b = gp_draw({"phi2_sq": 10, "gamma": 0.5}, seed=3)
        X, T = np.array([[0.123], [0.5]]), np.array([[0.33], [0.25]])
        assert np.array_equal(a(X, T), b(X, T))

    def test_lattice_nodes_exact(self):
        sim = gp_draw({"phi2_sq": 10, "gamma": 0.5}, seed=1)
        assert sim.exact([[0.3]])[0] == sim.phi_nodes[30]
        assert sim([[0.3]], [[0.25]])[0] == sim.phi_nodes[30] + sim.delta_nodes[30, 4]

    def test_conditioning_is_smooth(self):
        sim = gp_draw({"phi2_sq": 1, "gamma": 0.5}, seed=2)
        # off-lattice value sits between close lattice values
        a, b = sim.exact([[0.30]])[0], sim.exact([[0.31]])[0]
        assert min(a, b) - 1e-3 <= sim.exact([[0.305]])[0] <= max(a, b) + 1e-3

    def test_lattice_limit(self):
        with pytest.raises(ConfigError):
            GpDraw(1.0, 0.5, 0, d=2, nodes_per_dim=101)

    def test_covariance_law_at_nodes(self):
        # sample covariance over many seeds against the model covariance
        g, n = 0.7, 600
        kw = dict(nodes_per_dim=6, n_levels=5, phi2_sq=2.0, gamma=g)
        pts = np.array([[0.2], [0.4], [0.4]]), np.array([[0.25], [0.5], [1.0]])
        Y = np.array([GpDraw(seed=s, **kw)(*pts) for s in range(n)])
        spec = kernels.CombinedCovSpec(1.0, kernels.CorrelationSpec("gaussian", [1.0]),
                                       kernels.CorrelationSpec("gaussian", [math.sqrt(2.0)]),
                                       FidelityKernelSpec(g, [1.0], [4.0]))
        K = kernels.cov_matrix(pts[0], pts[1], pts[0], pts[1], spec)
        S = np.cov(Y.T, bias=False)
        for i in range(3):
            for j in range(3):
                se = math.sqrt((K[i, j] ** 2 + K[i, i] * K[j, j]) / n)
                assert abs(S[i, j] - K[i, j]) < 3.5 * se


class TestRegistry:
    def test_kinds(self):
        assert isinstance(make_simulator({"kind": "poisson_average"}), PoissonAverage)
        assert isinstance(make_simulator({"kind": "gp_draw", "phi2_sq": 1.0, "gamma": 0.5}, seed=0), GpDraw)

    def test_unknown(self):
        with pytest.raises(ConfigError):
            make_simulator({"kind": "fem"})
        with pytest.raises(ConfigError):
            make_simulator({"kind": "poisson_average", "mesh": 3})

    def test_failure_wrapped(self):
        class Bad(Simulator):
            def evaluate(self, X, T):
                return np.full(X.shape[0], np.nan)

        with pytest.raises(SimulatorError):
            Bad()([[0.1]], [[0.5]])
