"""
Tests for the ground-truth market: parameters, behavior, drift and log generation
"""
import numpy as np
import pytest

from vtlab.config import OracleConfig
from vtlab.error_handling import MissingInputError, RejectedInputError
from vtlab.market.domain import N_TYPES, CustomerAction, ProfileBatch, type_from_index
from vtlab.market.policies import ConstantEnginePolicy, FixedCustomerPolicy
from vtlab.oracle.drift import DriftSchedule, drift
from vtlab.oracle.market import (
    OracleCustomerPolicy,
    OracleSampler,
    PriceModel,
    action_norm_report,
    evaluate_in_oracle,
    generate_log,
    logging_policy,
)
from vtlab.oracle.params import CATEGORY_WEIGHTS, default_params, load_params, population_with, save_params
from vtlab.utils.stats import tv_distance


class TestOracleParams:
    """World construction and persistence"""

    def test_world_seed_fixes_the_world(self):
        a = default_params(OracleConfig(world_seed=5))
        b = default_params(OracleConfig(world_seed=5))
        c = default_params(OracleConfig(world_seed=6))
        assert a == b
        assert a.preferences != c.preferences

    def test_population_is_a_distribution(self, oracle_params):
        assert oracle_params.population_array.shape == (48,)
        assert oracle_params.population_array.sum() == pytest.approx(1.0)

    def test_bad_population_is_rejected(self, oracle_params):
        with pytest.raises(ValueError):
            population_with(oracle_params, [1.0 / 47] * 47)
        with pytest.raises(ValueError):
            population_with(oracle_params, [0.5] + [0.0] * 47)

    def test_save_and_load(self, oracle_params, tmp_path):
        path = save_params(oracle_params, tmp_path / "params.json")
        assert load_params(path) == oracle_params
        with pytest.raises(MissingInputError):
            load_params(tmp_path / "absent.json")


class TestOracleBehavior:
    """Customer behavior and prices"""

    def test_probabilities_are_distributions(self, oracle_params, rng):
        profiles = OracleSampler(oracle_params).sample(20, rng)
        probs = OracleCustomerPolicy(oracle_params).probabilities(
            profiles, rng.uniform(-0.5, 0.5, (20, 8)), rng.integers(0, 11, 20)
        )
        np.testing.assert_allclose(probs.sum(axis=1), 1.0)
        assert (probs > 0).all()

    def test_preferred_action_raises_buy_probability(self, oracle_params, rng):
        policy = OracleCustomerPolicy(oracle_params)
        category, power, level = type_from_index(np.arange(N_TYPES))
        profiles = ProfileBatch(category, power, level, np.tile([1.0, 0, 0, 0], (N_TYPES, 1)))
        pages = np.zeros(N_TYPES, dtype=int)
        p_best = policy.probabilities(profiles, policy.optimal_actions(), pages)[:, CustomerAction.BUY]
        p_random = np.stack([
            policy.probabilities(profiles, rng.uniform(-0.5, 0.5, (N_TYPES, 8)), pages)[:, CustomerAction.BUY]
            for _ in range(200)
        ])
        assert (p_best[None, :] > p_random).all()
        assert (p_best - p_random.mean(axis=0)).min() > 0.01

    def test_leaving_grows_with_page_depth(self, oracle_params, rng):
        policy = OracleCustomerPolicy(oracle_params)
        profiles = ProfileBatch.repeat(OracleSampler(oracle_params).sample(1, rng).profile(0), 11)
        probs = policy.probabilities(profiles, np.zeros((11, 8)), np.arange(11))
        assert (np.diff(probs[:, CustomerAction.LEAVE]) > 0).all()

    def test_sampler_matches_category_weights(self, oracle_params, rng):
        profiles = OracleSampler(oracle_params).sample(20000, rng)
        profiles.validate()
        observed = np.bincount(profiles.category - 1, minlength=8) / 20000
        assert tv_distance(observed, CATEGORY_WEIGHTS) < 0.03

    def test_uniform_population_samples_every_type_evenly(self, oracle_params, rng):
        uniform = population_with(oracle_params, [1.0 / N_TYPES] * N_TYPES)
        profiles = OracleSampler(uniform).sample(200000, rng)
        observed = np.bincount(profiles.type_index(), minlength=N_TYPES) / 200000
        np.testing.assert_allclose(observed, 1.0 / N_TYPES, atol=0.005)

    def test_prices_follow_purchase_power(self, oracle_params, rng):
        model = PriceModel(oracle_params)
        low = model(ProfileBatch([1] * 2000, [1] * 2000, [False] * 2000, np.tile([1.0, 0, 0, 0], (2000, 1))), rng)
        high = model(ProfileBatch([1] * 2000, [3] * 2000, [False] * 2000, np.tile([1.0, 0, 0, 0], (2000, 1))), rng)
        assert (low > 0).all()
        assert high.mean() > low.mean()


class TestDrift:
    """Controlled drift of the world"""

    def test_level_zero_is_identity(self, oracle_params):
        assert drift(oracle_params, 0.0, 2018) is oracle_params

    @pytest.mark.parametrize("level", [-0.1, 1.5])
    def test_level_out_of_range(self, oracle_params, level):
        with pytest.raises(RejectedInputError):
            drift(oracle_params, level, 2018)

    def test_larger_levels_move_further(self, oracle_params):
        base = oracle_params.population_array
        moved = [drift(oracle_params, level, 2018) for level in (0.2, 0.5, 1.0)]
        distances = [tv_distance(m.population_array, base) for m in moved]
        assert distances[0] < distances[1] < distances[2]
        biases = [m.buy_bias for m in moved]
        assert oracle_params.buy_bias > biases[0] > biases[1] > biases[2]

    def test_drift_is_deterministic(self, oracle_params):
        assert drift(oracle_params, 0.5, 11) == drift(oracle_params, 0.5, 11)

    def test_schedules(self):
        day = DriftSchedule.day_slots(12)
        assert len(day.levels) == 12
        assert day.levels[0] == pytest.approx(0.0)
        assert day.levels[6] == pytest.approx(1.0)
        assert DriftSchedule.preset("day/week/month").slice_ids == ["day", "week", "month"]
        assert set(DriftSchedule.stationary().levels) == {0.0}
        with pytest.raises(RejectedInputError):
            DriftSchedule.preset("fortnight")
        with pytest.raises(RejectedInputError):
            DriftSchedule.day_week_month((1.0, 0.5, 0.2))


class TestLogGeneration:
    """Logging the historical policy in the ground-truth market"""

    def test_meta(self, small_log, oracle_params):
        meta = small_log.meta
        assert meta.logging_policy == "uniform-logging"
        assert meta.seed == 7
        assert meta.max_index == oracle_params.max_index
        assert meta.engine_dim == 8 and meta.request_dim == 4

    def test_logged_actions_stay_in_range(self, small_log):
        actions = small_log.actions()
        assert actions.min() >= -0.5 and actions.max() <= 0.5

    def test_purchases_carry_prices(self, oracle_params):
        data = generate_log(oracle_params, ConstantEnginePolicy(tuple([0.0] * 8)), 30, seed=1,
                            customer_override=FixedCustomerPolicy.always(CustomerAction.BUY))
        assert data.rewards().sum() == 30
        assert (data.prices() > 0).all()

    def test_session_count_must_be_positive(self, oracle_params):
        with pytest.raises(RejectedInputError):
            generate_log(oracle_params, logging_policy(oracle_params), 0, seed=1)

    def test_evaluate_in_oracle(self, oracle_params):
        metrics = evaluate_in_oracle(oracle_params, logging_policy(oracle_params), 100, seed=3)
        assert metrics.n_sessions == 100
        assert 0.0 <= metrics.r2p <= 1.0

    def test_logging_policy_is_calibrated(self, oracle_params):
        metrics = evaluate_in_oracle(oracle_params, logging_policy(oracle_params), 20000, seed=3)
        assert 0.08 <= metrics.r2p <= 0.12

    def test_fatigue_lowers_r2p(self):
        r2p = []
        for fatigue in (0.0, 0.3, 1.0):
            params = default_params(OracleConfig(fatigue=fatigue))
            r2p.append(evaluate_in_oracle(params, logging_policy(params), 20000, seed=3).r2p)
        assert r2p[0] > r2p[1] > r2p[2]

    def test_action_norm_report(self, small_log):
        report = action_norm_report(small_log, mu=0.01)
        values = dict(zip(report["metric"], report["value"]))
        assert values["mu"] == 0.01
        assert values["share_at_or_below_mu"] < 0.01
        assert values["norm_q01"] <= values["norm_q50"] <= 0.5 * np.sqrt(8)
