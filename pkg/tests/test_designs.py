import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfgp import designs
from cfgp.designs import DesignKind, budget_design
from cfgp.exceptions import InvalidArgumentError
from cfgp.simulators import CostModel

C2 = CostModel.power(2)


def is_latin(col, n):
    return np.array_equal(np.sort(np.floor(col * n).astype(int)), np.arange(n))


class TestMaxPro:
    @given(n=st.integers(2, 20), d=st.integers(1, 3), seed=st.integers(0, 1000))
    @settings(max_examples=15)
    def test_latin_hypercube(self, n, d, seed):
        X = designs.generate_maxpro_like(n, d, seed, n_proposals=300)
        assert X.shape == (n, d)
        for r in range(d):
            assert is_latin(X[:, r], n)

    def test_annealing_improves_criterion(self):
        rng = np.random.default_rng(0)
        X0 = designs._lhs_start(15, 2, rng)
        X, val = designs.anneal_maxpro(X0, np.random.default_rng(1), n_proposals=3000)
        assert val <= designs.maxpro_criterion(X0)
        assert val == pytest.approx(designs.maxpro_criterion(X), rel=1e-12)

    def test_criterion_brute_force(self):
        X = np.array([[0.1, 0.2], [0.5, 0.9], [0.8, 0.4]])
        ref = sum(1 / ((X[i, 0] - X[j, 0]) ** 2 * (X[i, 1] - X[j, 1]) ** 2) for i in range(3) for j in range(i + 1, 3))
        assert designs.maxpro_criterion(X) == pytest.approx(ref, rel=1e-14)

    def test_deterministic(self):
        a = designs.generate_maxpro_like(10, 2, 3, n_proposals=500)
        b = designs.generate_maxpro_like(10, 2, 3, n_proposals=500)
        assert np.array_equal(a, b)

    def test_too_small(self):
        with pytest.raises(InvalidArgumentError):
            designs.generate_maxpro_like(1, 2)


class TestNested:
    def test_levels_are_subsets(self):
        plan = designs.generate_nested(16, 3, 2, [0.25], [1.0], seed=4)
        lv = plan.meta["level"]
        rows = [{tuple(x) for x in plan.X[lv == k]} for k in range(3)]
        assert rows[1] <= rows[0] and rows[2] <= rows[1]
        assert [len(r) for r in rows] == [16, 8, 4]

    def test_levels_run_coarse_to_fine(self):
        plan = designs.generate_nested(8, 3, 1, [0.25], [1.0])
        np.testing.assert_allclose(plan.meta["levels"][:, 0], [1.0, 0.625, 0.25])

    def test_coupled_adds_ladder(self):
        plan = designs.generate_coupled_nested(8, 3, 1, [0.25], [1.0], stack_size=4)
        ladder = plan.T[plan.meta["level"] == -1, 0]
        assert ladder.size == 4
        assert np.all((ladder > 0.625) & (ladder < 1.0))
        assert np.all(np.diff(ladder) > 0)
        assert np.all(plan.X[plan.meta["level"] == -1] == plan.meta["stack_x"])

    def test_rejects_too_few(self):
        with pytest.raises(InvalidArgumentError):
            designs.generate_nested(3, 3, 1, [0.25], [1.0])


class TestOtherDesigns:
    def test_mmed_prefers_cheap_fidelity_first(self):
        plan = designs.generate_mmed(12, 1, 1, C2, 0, [0.25], [1.0])
        assert plan.T[0, 0] == 1.0
        assert np.all((plan.T >= 0.25) & (plan.T <= 1.0))

    def test_mmed_constant_cost_warns(self):
        with pytest.warns(RuntimeWarning):
            designs.generate_mmed(5, 1, 1, CostModel.power(0.0), 0, [0.25], [1.0])

    def test_repetitive_structure(self):
        plan = designs.generate_repetitive(6, 3, 2, [0.25], [1.0], seed=1)
        assert plan.n == 18
        _, counts = np.unique(plan.X, axis=0, return_counts=True)
        assert np.all(counts == 3)
        assert np.unique(plan.T[:, 0]).size == 18


class TestBudget:
    @pytest.mark.parametrize("kind", list(DesignKind))
    def test_within_one_cheap_point_of_budget(self, kind):
        plan = budget_design(kind, 64, 1, C2, [0.25], [1.0], seed=2)
        total = plan.total_cost(C2)
        assert total <= 64 + 1e-9
        assert 64 - total < C2.cost([1.0])
        assert np.all((plan.T >= 0.25 - 1e-12) & (plan.T <= 1.0))

    def test_top_up_adds_cheapest(self):
        plan = designs.generate_nested(8, 2, 1, [0.25], [1.0])
        before = plan.total_cost(C2)
        up = designs.top_up(plan, before + 3.5, C2, [0.25], [1.0])
        assert up.n == plan.n + 3 and up.meta["topped_up"] == 3
        assert np.all(up.T[-3:] == 1.0)

    def test_two_fidelity_components(self):
        cost = CostModel("param_double", (2.0, 1.0), 1.0)
        plan = budget_design("mmed", 500, 2, cost, [0.1, 0.1], [1.0, 1.0], seed=0)
        assert plan.T.shape[1] == 2 and plan.total_cost(cost) <= 500
