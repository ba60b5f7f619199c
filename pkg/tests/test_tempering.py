import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from darcy_smc.errors import ContractViolation, DimensionError
from darcy_smc.forward import ObservationSet
from darcy_smc.tempering import (
    TemperingState,
    ess,
    misfit,
    next_temperature,
    tempered_log_weights,
)

finite_misfits = st.lists(
    st.floats(0.0, 1e4, allow_nan=False, allow_infinity=False), min_size=3, max_size=40
)


def _obs(y, sigma):
    y = np.atleast_1d(np.asarray(y, dtype=float))
    locs = np.column_stack([np.linspace(1, 5, y.size), np.full(y.size, 3.0)])
    return ObservationSet(locs, eps=0.5, sigma=sigma, y=y)


class TestMisfit:
    def test_perfect_predictions(self):
        obs = _obs([1.0, 2.0, 3.0], sigma=0.7)
        assert misfit(np.array([1.0, 2.0, 3.0]), obs) == 0.0

    def test_single_observation_formula(self):
        assert misfit(np.array([0.0]), _obs([1.0], sigma=1.0)) == 0.5

    def test_sigma_scaling(self):
        pred = np.array([0.3, -0.2])
        assert misfit(pred, _obs([1.0, 2.0], sigma=2.0)) == pytest.approx(
            misfit(pred, _obs([1.0, 2.0], sigma=1.0)) / 4.0
        )

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            misfit(np.zeros(2), _obs([1.0], sigma=1.0))


class TestTemperedWeights:
    def test_zero_step_uniform(self):
        w = tempered_log_weights(np.array([1.0, 5.0, 9.0]), 0.3, 0.3)
        np.testing.assert_allclose(w, 1.0 / 3.0, atol=1e-15)

    def test_equal_misfits_uniform(self):
        w = tempered_log_weights(np.full(7, 123.4), 0.0, 1.0)
        np.testing.assert_allclose(w, 1.0 / 7.0, atol=1e-15)

    def test_two_particle_example(self):
        w = tempered_log_weights(np.array([0.0, math.log(3.0)]), 0.0, 1.0)
        np.testing.assert_allclose(w, [0.75, 0.25], atol=1e-14)

    def test_no_underflow_at_huge_misfits(self):
        w = tempered_log_weights(np.array([1e6, 2e6, 3e6]), 0.0, 1.0)
        assert np.isfinite(w).all() and w.sum() == pytest.approx(1.0)

    @given(finite_misfits, st.floats(0.0, 500.0))
    def test_shift_invariance(self, misfits, shift):
        m = np.asarray(misfits)
        a = tempered_log_weights(m, 0.2, 0.7)
        b = tempered_log_weights(m + shift, 0.2, 0.7)
        assert np.abs(a - b).max() < 1e-12

    @given(finite_misfits)
    def test_normalized_nonnegative(self, misfits):
        w = tempered_log_weights(np.asarray(misfits), 0.0, 0.5)
        assert w.min() >= 0.0
        assert abs(w.sum() - 1.0) < 1e-12


class TestEss:
    def test_uniform(self):
        assert ess(np.full(100, 0.01)) == pytest.approx(100.0)

    def test_degenerate(self):
        w = np.zeros(8)
        w[0] = 1.0
        assert ess(w) == 1.0

    def test_two_particle_value(self):
        assert ess(np.array([0.75, 0.25])) == pytest.approx(1.6)

    @given(finite_misfits)
    def test_bounds(self, misfits):
        w = tempered_log_weights(np.asarray(misfits), 0.0, 1.0)
        assert 1.0 - 1e-9 <= ess(w) <= len(misfits) + 1e-9


class TestNextTemperature:
    def test_equal_misfits_jump_to_one(self):
        phi, w = next_temperature(np.full(30, 42.0), 0.0, j_thresh=10.0)
        assert phi == 1.0
        np.testing.assert_allclose(w, 1.0 / 30.0)

    def test_ess_matches_threshold(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            misfits = rng.gamma(2.0, 200.0, size=100)
            phi, w = next_temperature(misfits, 0.0, j_thresh=100 / 3.0)
            if phi < 1.0:
                assert abs(ess(w) - 100 / 3.0) <= 0.01 * 100 / 3.0

    def test_near_one_start(self):
        rng = np.random.default_rng(1)
        misfits = rng.gamma(2.0, 5.0, size=50)
        phi, _ = next_temperature(misfits, 0.999, j_thresh=50 / 3.0)
        assert phi == 1.0

    def test_monotone_ess_in_phi(self):
        rng = np.random.default_rng(2)
        misfits = rng.gamma(2.0, 100.0, size=60)
        values = [
            ess(tempered_log_weights(misfits, 0.1, phi)) for phi in np.linspace(0.1, 1.0, 30)
        ]
        assert np.all(np.diff(values) <= 1e-9)

    def test_strictly_increasing(self):
        rng = np.random.default_rng(3)
        misfits = rng.gamma(2.0, 400.0, size=80)
        phi, _ = next_temperature(misfits, 0.25, j_thresh=80 / 3.0)
        assert phi > 0.25

    def test_contract_checks(self):
        with pytest.raises(ContractViolation):
            next_temperature(np.ones(5), 1.0, 2.0)
        with pytest.raises(ContractViolation):
            next_temperature(np.ones(5), 0.0, 6.0)


def test_tempering_state_invariant():
    TemperingState(0.2, 0.5, 3)
    with pytest.raises(ContractViolation):
        TemperingState(0.5, 0.5, 1)
    with pytest.raises(ContractViolation):
        TemperingState(0.7, 0.2, 1)
