import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import linprog

from darcy_smc.errors import ContractViolation
from darcy_smc.fields import Grid, GridField
from darcy_smc.permeability import ChannelGeometry, P1Parameter, P2Parameter
from darcy_smc.resampling import (
    cost_matrix,
    flatten,
    independent_coupling_cost,
    multinomial_resample,
    solve_transport,
    transform_ensemble,
    transport_cost,
    unflatten,
)
from darcy_smc.rng import stream


def lp_objective(cost, weights):
    """Generic-simplex oracle for the transportation objective."""
    j = weights.size
    a_eq, b_eq = [], []
    for i in range(j):
        row = np.zeros((j, j))
        row[i, :] = 1.0
        a_eq.append(row.ravel())
        b_eq.append(weights[i])
    for c in range(j - 1):
        col = np.zeros((j, j))
        col[:, c] = 1.0
        a_eq.append(col.ravel())
        b_eq.append(1.0 / j)
    res = linprog(
        cost.ravel(), A_eq=np.array(a_eq), b_eq=np.array(b_eq), bounds=(0, None), method="highs"
    )
    assert res.status == 0, res.message
    return res.fun


class TestMultinomialResample:
    def test_degenerate_weight(self):
        w = np.zeros(10)
        w[0] = 1.0
        idx = multinomial_resample(w, stream(0, "transition", 1))
        assert np.all(idx == 0)

    def test_reproducible(self):
        w = np.full(50, 0.02)
        a = multinomial_resample(w, stream(1, "transition", 1))
        b = multinomial_resample(w, stream(1, "transition", 1))
        np.testing.assert_array_equal(a, b)

    def test_uniform_counts(self):
        j = 1000
        w = np.full(j, 1.0 / j)
        rng = stream(2, "transition", 1)
        counts = np.zeros(j)
        reps = 200
        for _ in range(reps):
            idx = multinomial_resample(w, rng)
            counts += np.bincount(idx, minlength=j)
        mean_count = counts / reps
        stderr = np.sqrt(1.0 * (1 - 1 / j) / reps)
        assert np.abs(mean_count - 1.0).max() < 5.0 * stderr


class TestFlatten:
    def test_p1_length(self):
        g = Grid(2, 2)
        u = P1Parameter(GridField(g, np.arange(4.0)))
        assert flatten(u).shape == (4,)

    def test_p2_layout(self):
        g = Grid(2, 2)
        u = P2Parameter(
            ChannelGeometry(1.0, 2.0, 0.3, 4.0, 0.5),
            GridField(g, np.arange(4.0)),
            GridField(g, np.arange(4.0, 8.0)),
        )
        v = flatten(u)
        assert v.shape == (13,)
        np.testing.assert_array_equal(v[:5], [1.0, 2.0, 0.3, 4.0, 0.5])

    def test_round_trip(self):
        g = Grid(3, 2)
        rng = np.random.default_rng(0)
        u = P2Parameter(
            ChannelGeometry(1.0, 2.0, 0.3, 4.0, 0.5),
            GridField(g, rng.normal(size=6)),
            GridField(g, rng.normal(size=6)),
        )
        again = unflatten(flatten(u), u)
        np.testing.assert_array_equal(flatten(again), flatten(u))


class TestCostMatrix:
    @given(
        arrays(
            float,
            (6, 3),
            elements=st.floats(-50, 50, allow_nan=False, allow_infinity=False),
        )
    )
    def test_symmetric_zero_diag_nonnegative(self, u):
        d = cost_matrix(u)
        assert np.array_equal(d, d.T)
        assert np.all(np.diag(d) == 0.0)
        assert d.min() >= 0.0

    def test_matches_pairwise_norms(self):
        rng = np.random.default_rng(1)
        u = rng.normal(size=(5, 4))
        d = cost_matrix(u)
        for i in range(5):
            for j in range(5):
                assert d[i, j] == pytest.approx(np.sum((u[i] - u[j]) ** 2), abs=1e-9)


class TestSolveTransport:
    def test_uniform_weights_zero_cost_diagonal(self):
        rng = np.random.default_rng(2)
        u = rng.normal(size=(8, 3))
        d = cost_matrix(u)
        plan = solve_transport(d, np.full(8, 1.0 / 8.0))
        np.testing.assert_allclose(plan, np.eye(8) / 8.0, atol=1e-12)
        assert transport_cost(d, plan) == 0.0

    def test_degenerate_weight_forced_plan(self):
        u = np.arange(6.0).reshape(-1, 1)
        w = np.zeros(6)
        w[0] = 1.0
        plan = solve_transport(cost_matrix(u), w)
        np.testing.assert_allclose(plan[0], 1.0 / 6.0, atol=1e-12)
        assert np.abs(plan[1:]).max() == 0.0

    def test_matches_lp_oracle(self):
        rng = np.random.default_rng(3)
        for trial in range(12):
            j = int(rng.integers(2, 13))
            u = rng.normal(size=(j, int(rng.integers(1, 6))))
            if trial % 4 == 0:
                u[0] = u[-1]
            w = rng.dirichlet(np.full(j, 0.5))
            d = cost_matrix(u)
            obj = transport_cost(d, solve_transport(d, w))
            ref = lp_objective(d, w)
            assert obj == pytest.approx(ref, rel=1e-8, abs=1e-12)

    def test_unnormalized_weights_rejected(self):
        with pytest.raises(ContractViolation):
            solve_transport(np.zeros((3, 3)), np.array([0.5, 0.4, 0.4]))

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=25)
    def test_feasibility_and_consistency(self, seed):
        rng = np.random.default_rng(seed)
        j = int(rng.integers(2, 9))
        u = rng.normal(size=(j, int(rng.integers(1, 5))))
        w = rng.dirichlet(np.full(j, 0.4))
        d = cost_matrix(u)
        plan = solve_transport(d, w)
        assert plan.min() >= 0.0
        assert np.abs(plan.sum(axis=1) - w).max() <= 1e-9
        assert np.abs(plan.sum(axis=0) - 1.0 / j).max() <= 1e-9
        assert transport_cost(d, plan) <= independent_coupling_cost(d, w) + 1e-12
        new = transform_ensemble(u, plan)
        assert np.abs(new.mean(axis=0) - w @ u).max() <= 1e-10


class TestTransformEnsemble:
    def test_identity_plan(self):
        rng = np.random.default_rng(4)
        u = rng.normal(size=(7, 5))
        plan = np.eye(7) / 7.0
        np.testing.assert_allclose(transform_ensemble(u, plan), u, atol=1e-12)

    def test_collapse_to_single_ancestor(self):
        u = np.arange(12.0).reshape(6, 2)
        plan = np.zeros((6, 6))
        plan[0, :] = 1.0 / 6.0
        new = transform_ensemble(u, plan)
        np.testing.assert_allclose(new, np.tile(u[0], (6, 1)), atol=1e-12)

    def test_convex_hull_containment(self):
        rng = np.random.default_rng(5)
        u = rng.normal(size=(9, 1))
        w = rng.dirichlet(np.full(9, 0.6))
        plan = solve_transport(cost_matrix(u), w)
        new = transform_ensemble(u, plan)
        assert new.min() >= u.min() - 1e-12
        assert new.max() <= u.max() + 1e-12
