"""Tests for similarity softmax, dual reweighting, and dual updates."""

import math
import warnings

import numpy as np
import pytest

from onzeta.labels import (
    DualState,
    HyperParams,
    check_simplex,
    reweight_with_duals,
    softmax_similarity,
    update_duals,
)


def _simplex_grid(num_classes, step):
    """All probability vectors whose entries are multiples of ``step``."""
    units = round(1.0 / step)
    if num_classes == 2:
        k = np.arange(units + 1)
        return np.stack([k, units - k], axis=1) / units
    rows = []
    for first in range(units + 1):
        rest = _simplex_grid(num_classes - 1, step) * ((units - first) / units)
        block = np.concatenate(
            [np.full((rest.shape[0], 1), first / units), rest], axis=1
        )
        rows.append(block)
    return np.concatenate(rows, axis=0)


def _reweight_objective(p, q, rho):
    """KL(p || q) minus the dual bonus, the quantity reweighting minimizes.

    ``p`` may be a batch of rows; returns per-row values.
    """
    p = np.atleast_2d(np.asarray(p, dtype=np.float64))
    ent = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    return np.sum(ent - p * (np.log(q) + rho), axis=-1)


class TestSoftmaxSimilarity:
    def test_two_logits_with_gap_of_one_temperature(self):
        x = np.array([1.0, 0.0])
        proxies = np.array([[1.0, 0.0], [0.9, 0.0]])
        got = softmax_similarity(x, proxies, tau=0.1)
        np.testing.assert_allclose(got, [0.73106, 0.26894], atol=1e-5)

    def test_equal_logits_are_uniform(self):
        x = np.array([1.0, 0.0, 0.0])
        proxies = np.array([[0.5, 0.1, 0.0], [0.5, 0.0, 0.1], [0.5, -0.1, 0.0]])
        for tau in (0.01, 0.04, 1.0):
            got = softmax_similarity(x, proxies, tau=tau)
            np.testing.assert_allclose(got, [1 / 3, 1 / 3, 1 / 3], atol=1e-12)

    def test_sharp_temperature_regime(self):
        x = np.array([1.0, 0.0])
        proxies = np.array([[0.26, 0.0], [0.21, 0.0]])
        got = softmax_similarity(x, proxies, tau=0.01)
        np.testing.assert_allclose(got, [0.99331, 0.00669], atol=1e-5)

    def test_batch_input_matches_per_row(self):
        rng = np.random.default_rng(0)
        xs = rng.standard_normal((7, 5))
        proxies = rng.standard_normal((4, 5))
        batch = softmax_similarity(xs, proxies, tau=0.1)
        assert batch.shape == (7, 4)
        for i in range(7):
            np.testing.assert_allclose(batch[i], softmax_similarity(xs[i], proxies, 0.1))

    def test_extreme_logits_stay_finite(self):
        x = np.array([1.0, 0.0])
        proxies = np.array([[1.0, 0.0], [-1.0, 0.0]])
        got = softmax_similarity(x, proxies, tau=1e-4)
        assert np.all(np.isfinite(got))
        np.testing.assert_allclose(got.sum(), 1.0, atol=1e-12)

    def test_rejects_bad_temperature_and_shapes(self):
        x = np.array([1.0, 0.0])
        proxies = np.array([[1.0, 0.0], [0.0, 1.0]])
        with pytest.raises(ValueError):
            softmax_similarity(x, proxies, tau=0.0)
        with pytest.raises(ValueError):
            softmax_similarity(x, proxies, tau=-0.1)
        with pytest.raises(ValueError):
            softmax_similarity(np.array([1.0, 0.0, 0.0]), proxies, tau=0.1)

    def test_outputs_live_on_the_simplex(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            x = rng.standard_normal(6)
            proxies = rng.standard_normal((5, 6))
            got = softmax_similarity(x, proxies, tau=0.05)
            check_simplex(got, "softmax output")


class TestCheckSimplex:
    def test_accepts_valid_rows(self):
        check_simplex(np.array([0.2, 0.8]), "p")
        check_simplex(np.array([[0.5, 0.5], [1.0, 0.0]]), "p")

    def test_rejects_negative_and_unnormalized(self):
        with pytest.raises(ValueError):
            check_simplex(np.array([-0.1, 1.1]), "p")
        with pytest.raises(ValueError):
            check_simplex(np.array([0.6, 0.6]), "p")


class TestReweightWithDuals:
    def test_zero_duals_do_nothing(self):
        q = np.array([0.7, 0.3])
        np.testing.assert_allclose(reweight_with_duals(q, np.zeros(2)), q, atol=1e-12)

    def test_log_two_boost_on_second_class(self):
        q = np.array([0.7, 0.3])
        got = reweight_with_duals(q, np.array([0.0, math.log(2.0)]))
        np.testing.assert_allclose(got, [0.53846, 0.46154], atol=1e-5)

    def test_unit_boost_on_first_class(self):
        q = np.array([0.5, 0.5])
        got = reweight_with_duals(q, np.array([1.0, 0.0]))
        np.testing.assert_allclose(got, [0.73106, 0.26894], atol=1e-5)

    def test_accepts_dual_state_wrapper(self):
        q = np.array([0.5, 0.5])
        state = DualState(rho=np.array([1.0, 0.0]), step_index=3)
        np.testing.assert_allclose(
            reweight_with_duals(q, state), reweight_with_duals(q, state.rho)
        )

    def test_output_attains_grid_minimum(self):
        # The reweighted vector minimizes KL(p||q) - rho.p over the simplex;
        # sanity-check against coarse exhaustive grids (the acceptance suite
        # runs the fine-grained version).
        rng = np.random.default_rng(2)
        grid3 = _simplex_grid(3, 0.01)
        for _ in range(10):
            q = rng.dirichlet(np.ones(3))
            rho = rng.uniform(0.0, 2.0, size=3)
            p_star = reweight_with_duals(q, rho)
            best = _reweight_objective(grid3, q, rho).min()
            assert _reweight_objective(p_star, q, rho)[0] <= best + 1e-9

    def test_boosting_one_class_moves_mass_toward_it(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            q = rng.dirichlet(np.ones(4))
            rho = rng.uniform(0.0, 1.0, size=4)
            j = rng.integers(4)
            before = reweight_with_duals(q, rho)
            rho_up = rho.copy()
            rho_up[j] += 0.5
            after = reweight_with_duals(q, rho_up)
            assert after[j] > before[j]
            others = np.delete(np.arange(4), j)
            assert np.all(after[others] <= before[others] + 1e-12)

    def test_constant_shift_of_duals_is_invisible(self):
        rng = np.random.default_rng(4)
        for _ in range(25):
            q = rng.dirichlet(np.ones(5))
            rho = rng.uniform(0.0, 3.0, size=5)
            np.testing.assert_allclose(
                reweight_with_duals(q, rho),
                reweight_with_duals(q, rho + 7.5),
                atol=1e-12,
            )

    def test_batch_rows_match_individual_calls(self):
        rng = np.random.default_rng(5)
        q = rng.dirichlet(np.ones(3), size=6)
        rho = rng.uniform(0.0, 2.0, size=3)
        batch = reweight_with_duals(q, rho)
        for i in range(6):
            np.testing.assert_allclose(batch[i], reweight_with_duals(q[i], rho))


class TestDualState:
    def test_fresh_state_is_zero_at_step_one(self):
        state = DualState.fresh(4)
        np.testing.assert_array_equal(state.rho, np.zeros(4))
        assert state.step_index == 1
        assert state.num_classes == 4

    def test_rejects_invalid_states(self):
        with pytest.raises(ValueError):
            DualState(rho=np.array([-0.1, 0.0]), step_index=1)
        with pytest.raises(ValueError):
            DualState(rho=np.zeros(3), step_index=0)
        with pytest.raises(ValueError):
            DualState(rho=np.zeros((2, 2)), step_index=1)


class TestHyperParams:
    def test_defaults(self):
        params = HyperParams(n=100)
        assert params.alpha == 1.0
        assert params.beta == 0.8
        assert params.c_rho == 20.0
        assert params.c_w == 0.5
        assert params.tau_t == 0.01
        assert params.tau_i == 0.04
        assert params.epochs == 1
        assert params.seed == 0
        assert params.n_total == 100

    def test_n_total_scales_with_epochs(self):
        assert HyperParams(n=50, epochs=4).n_total == 200

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n": 0},
            {"n": 10, "alpha": -0.1},
            {"n": 10, "alpha": 1.5},
            {"n": 10, "beta": -0.2},
            {"n": 10, "beta": 1.1},
            {"n": 10, "c_rho": -1.0},
            {"n": 10, "c_w": -1.0},
            {"n": 10, "tau_t": 0.0},
            {"n": 10, "tau_i": -0.04},
            {"n": 10, "epochs": 0},
        ],
    )
    def test_rejects_out_of_range_values(self, kwargs):
        with pytest.raises(ValueError):
            HyperParams(**kwargs)

    def test_warns_when_proxy_temperature_not_larger(self):
        with pytest.warns(UserWarning):
            HyperParams(n=10, tau_t=0.04, tau_i=0.04)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            HyperParams(n=10)  # default temperatures are fine

    def test_to_dict_round_trips_fields(self):
        params = HyperParams(n=10, alpha=0.4, beta=0.4, seed=7)
        d = params.to_dict()
        assert d["n"] == 10 and d["alpha"] == 0.4 and d["seed"] == 7
        assert HyperParams(**d) == params


class TestUpdateDuals:
    def test_hand_worked_single_step(self):
        params = HyperParams(n=10, alpha=1.0, c_rho=1.0)
        state = DualState.fresh(2)
        new = update_duals(state, np.array([0.7, 0.3]), params)
        np.testing.assert_allclose(new.rho, [0.0, 0.2], atol=1e-12)
        assert new.step_index == 2

    def test_zero_alpha_never_moves(self):
        params = HyperParams(n=10, alpha=0.0)
        state = DualState.fresh(3)
        rng = np.random.default_rng(6)
        for _ in range(20):
            state = update_duals(state, rng.dirichlet(np.ones(3)), params)
        np.testing.assert_array_equal(state.rho, np.zeros(3))

    def test_exactly_met_floor_is_a_fixpoint(self):
        # With alpha = 1 the floor is 1/C, and a perfectly uniform assignment
        # leaves every multiplier untouched.
        params = HyperParams(n=10, alpha=1.0)
        state = DualState(rho=np.array([0.3, 0.1, 0.0]), step_index=5)
        new = update_duals(state, np.full(3, 1.0 / 3), params)
        np.testing.assert_allclose(new.rho, state.rho, atol=1e-15)

    def test_duals_stay_nonnegative_under_random_streams(self):
        rng = np.random.default_rng(7)
        params = HyperParams(n=100, alpha=0.8)
        state = DualState.fresh(5)
        for _ in range(200):
            p = rng.dirichlet(np.full(5, 0.3))
            state = update_duals(state, reweight_with_duals(p, state), params)
            assert np.all(state.rho >= 0.0)

    def test_step_size_decays_with_index(self):
        p = np.array([1.0, 0.0])
        params = HyperParams(n=10, alpha=0.0, c_rho=2.0)
        early = update_duals(DualState(rho=np.array([5.0, 5.0]), step_index=1), p, params)
        late = update_duals(DualState(rho=np.array([5.0, 5.0]), step_index=100), p, params)
        # moving toward zero: class 0 over-assigned, step eta*(1-0) = eta
        assert 5.0 - early.rho[0] == pytest.approx(2.0)
        assert 5.0 - late.rho[0] == pytest.approx(0.2)
