import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from darcy_smc.errors import ConfigError
from darcy_smc.fields import Grid
from darcy_smc.forward import ObservationSet
from darcy_smc.mutation import (
    GibbsConfig,
    PcnConfig,
    default_gibbs_config,
    mutate,
    mwg_step,
    pcn_vector_step,
    reflect,
    tune_acceptance,
)
from darcy_smc.permeability import ModelKind
from darcy_smc.prior import MaternParams, PriorSpec, sample_prior
from darcy_smc.rng import stream
from darcy_smc.tempering import misfit


def _toy():
    """Linear forward map on a 2x2 grid with a Matern prior."""
    g = Grid(2, 2)
    spec = PriorSpec(ModelKind.P1, g, matern=MaternParams(nu=1.5, ell=2.0, sigma0_sq=0.8, mean=1.0))
    b = np.array([[1.0, 0.0, 0.5, 0.0], [0.0, 1.0, 0.0, -0.5]])
    obs = ObservationSet([[1.0, 1.0], [2.0, 2.0]], eps=0.1, sigma=0.7, y=[1.3, 0.2])
    forward = lambda v: b @ v
    return g, spec, b, obs, forward


class TestReflect:
    def test_fold_at_upper_bound(self):
        assert reflect(6.4, 0.0, 6.0) == pytest.approx(5.6, abs=1e-12)

    def test_fold_at_lower_bound(self):
        assert reflect(-0.4, 0.0, 6.0) == pytest.approx(0.4, abs=1e-12)

    def test_multi_fold(self):
        # a step longer than the interval keeps folding back inside
        assert 0.0 <= reflect(25.3, 0.0, 6.0) <= 6.0

    @given(st.floats(-30.0, 30.0))
    def test_lands_inside(self, x):
        r = reflect(x, 1.0, 4.0)
        assert 1.0 <= r <= 4.0

    @given(st.floats(-2.0, 9.0))
    def test_involution_within_one_width(self, x):
        r = reflect(x, 1.0, 4.0)
        assert reflect(r, 1.0, 4.0) == pytest.approx(r, abs=1e-12)


class TestPcnStep:
    def test_phi_zero_always_accepts(self):
        g, spec, b, obs, forward = _toy()
        rng = stream(0, "mutation", 1, 0)
        state = np.full(4, 1.0)
        pred = forward(state)
        mis = misfit(pred, obs)
        for _ in range(200):
            state, pred, mis, acc = pcn_vector_step(
                state, pred, mis, 1.0, spec.factor().chol, forward, obs, 0.0, 0.5, rng
            )
            assert acc

    def test_beta_one_is_independent_prior_draw(self):
        g, spec, b, obs, forward = _toy()
        state = np.full(4, 99.0)  # far away; proposal must not depend on it
        pred = forward(state)
        mis = misfit(pred, obs)
        new, _, _, _ = pcn_vector_step(
            state, pred, mis, 1.0, spec.factor().chol, forward, obs, 0.0, 1.0,
            stream(1, "mutation", 1, 0),
        )
        xi = stream(1, "mutation", 1, 0).standard_normal(4)
        np.testing.assert_allclose(new, 1.0 + spec.factor().chol @ xi, atol=1e-12)

    def test_equal_misfit_accepts(self):
        g, spec, b, obs, forward = _toy()
        # zero-variance proposal: beta tiny, same state -> misfit unchanged
        state = np.full(4, 1.0)
        pred = forward(state)
        mis = misfit(pred, obs)
        _, _, _, acc = pcn_vector_step(
            state, pred, mis, 1.0, 1e-18 * spec.factor().chol, lambda v: forward(state), obs,
            1.0, 1e-9, stream(2, "mutation", 1, 0),
        )
        assert acc

    def test_posterior_moments_linear_gaussian(self):
        g, spec, b, obs, forward = _toy()
        factor = spec.factor()
        cov_prior = factor.chol @ factor.chol.T
        prec = np.linalg.inv(cov_prior) + b.T @ b / obs.sigma**2
        cov_post = np.linalg.inv(prec)
        mean_post = cov_post @ (np.linalg.inv(cov_prior) @ np.full(4, 1.0) + b.T @ obs.y / obs.sigma**2)

        rng = stream(3, "mutation", 1, 0)
        state = np.full(4, 1.0)
        pred = forward(state)
        mis = misfit(pred, obs)
        n, burn = 60_000, 2_000
        total = np.zeros(4)
        total_sq = np.zeros((4, 4))
        for i in range(n + burn):
            state, pred, mis, _ = pcn_vector_step(
                state, pred, mis, 1.0, factor.chol, forward, obs, 1.0, 0.5, rng
            )
            if i >= burn:
                total += state
                total_sq += np.outer(state, state)
        mean = total / n
        cov = total_sq / n - np.outer(mean, mean)
        # 3x the stderr of n/20 effectively independent samples
        stderr = np.sqrt(np.diag(cov_post) / (n / 20.0))
        assert np.all(np.abs(mean - mean_post) < 3.0 * stderr)
        assert np.abs(cov - cov_post).max() < 0.05


class TestMwgStep:
    def test_zero_geometric_step_accepts_unchanged(self, p2_setup):
        spec = p2_setup.problem.prior
        rng = stream(4, "mutation", 1, 0)
        state = sample_prior(spec, rng)
        pred = p2_setup.problem.forward(state)
        mis = misfit(pred, p2_setup.problem.obs)
        cfg = GibbsConfig(geom_step=np.zeros(5), n_mu=1)
        new, _, _, flags = mwg_step(
            state, pred, mis, spec, p2_setup.problem.forward, p2_setup.problem.obs, 0.7, cfg, rng
        )
        assert flags["geom"]
        np.testing.assert_array_equal(new.geom.as_array(), state.geom.as_array())

    def test_phi_zero_all_blocks_accept(self, p2_setup):
        spec = p2_setup.problem.prior
        rng = stream(5, "mutation", 1, 0)
        state = sample_prior(spec, rng)
        pred = p2_setup.problem.forward(state)
        mis = misfit(pred, p2_setup.problem.obs)
        cfg = default_gibbs_config(spec, 0.1, 1)
        for _ in range(20):
            state, pred, mis, flags = mwg_step(
                state, pred, mis, spec, p2_setup.problem.forward, p2_setup.problem.obs, 0.0,
                cfg, rng,
            )
            assert all(flags.values())

    def test_geometry_stays_in_support(self, p2_setup):
        spec = p2_setup.problem.prior
        rng = stream(6, "mutation", 1, 0)
        state = sample_prior(spec, rng)
        pred = p2_setup.problem.forward(state)
        mis = misfit(pred, p2_setup.problem.obs)
        cfg = GibbsConfig(geom_step=5.0 * (spec.intervals[:, 1] - spec.intervals[:, 0]), n_mu=1)
        for _ in range(30):
            state, pred, mis, _ = mwg_step(
                state, pred, mis, spec, p2_setup.problem.forward, p2_setup.problem.obs, 0.5,
                cfg, rng,
            )
            d = state.geom.as_array()
            assert np.all(d >= spec.intervals[:, 0]) and np.all(d <= spec.intervals[:, 1])


class TestMutate:
    def test_chain_length_validation(self):
        with pytest.raises(ConfigError):
            PcnConfig(beta=0.2, n_mu=0)
        with pytest.raises(ConfigError):
            PcnConfig(beta=1.5, n_mu=1)

    def test_single_step_count(self, p1_setup):
        spec = p1_setup.problem.prior
        rng = stream(7, "mutation", 1, 0)
        u = sample_prior(spec, rng)
        pred = p1_setup.problem.forward(u)
        result = mutate(
            u, pred, misfit(pred, p1_setup.problem.obs), spec, p1_setup.problem.forward,
            p1_setup.problem.obs, 0.5, PcnConfig(beta=0.3, n_mu=1), rng,
        )
        assert result.proposals == {"field": 1}

    def test_identical_stream_identical_output(self, p1_setup):
        spec = p1_setup.problem.prior
        u = sample_prior(spec, stream(8, "init"))
        pred = p1_setup.problem.forward(u)
        mis = misfit(pred, p1_setup.problem.obs)
        cfg = PcnConfig(beta=0.3, n_mu=5)
        r1 = mutate(u, pred, mis, spec, p1_setup.problem.forward, p1_setup.problem.obs, 0.5,
                    cfg, stream(9, "mutation", 1, 3))
        r2 = mutate(u, pred, mis, spec, p1_setup.problem.forward, p1_setup.problem.obs, 0.5,
                    cfg, stream(9, "mutation", 1, 3))
        np.testing.assert_array_equal(r1.particle.logk.values, r2.particle.logk.values)
        assert r1.misfit == r2.misfit

    def test_default_chain_length_is_ten(self):
        assert PcnConfig().n_mu == 10


class TestTuneAcceptance:
    def test_in_window_unchanged(self):
        cfg = PcnConfig(beta=0.3, n_mu=2)
        assert tune_acceptance({"field": 0.25}, cfg).beta == 0.3

    def test_low_rate_shrinks(self):
        cfg = PcnConfig(beta=0.3, n_mu=2)
        assert tune_acceptance({"field": 0.05}, cfg).beta == pytest.approx(0.24)

    def test_high_rate_grows(self):
        cfg = PcnConfig(beta=0.3, n_mu=2)
        assert tune_acceptance({"field": 0.9}, cfg).beta == pytest.approx(0.375)

    def test_beta_capped_at_one(self):
        cfg = PcnConfig(beta=0.9, n_mu=2)
        assert tune_acceptance({"field": 0.9}, cfg).beta == 1.0

    def test_gibbs_blocks_scaled_independently(self):
        cfg = GibbsConfig(geom_step=np.array([1.0] * 5), beta_in=0.2, beta_out=0.2, n_mu=2)
        out = tune_acceptance({"geom": 0.05, "field_in": 0.25, "field_out": 0.9}, cfg)
        np.testing.assert_allclose(out.geom_step, 0.8)
        assert out.beta_in == 0.2
        assert out.beta_out == pytest.approx(0.25)
