"""
Tests for the market domain: profiles, transitions, rollouts, datasets and metrics
"""
import numpy as np
import pandas as pd
import pytest

from vtlab.error_handling import InsufficientDataError, MissingInputError, RejectedInputError
from vtlab.market.dataset import FEATURE_VALUES, Dataset, DatasetMeta, load_dataset, save_dataset
from vtlab.market.domain import (
    N_TYPES,
    TERMINATED,
    TYPE_DIM,
    CustomerAction,
    CustomerProfile,
    CustomerState,
    EngineAction,
    PageIndex,
    ProfileBatch,
    type_from_index,
    type_index,
)
from vtlab.market.environment import VirtualEnvironment, r2p_of
from vtlab.market.metrics import compute_metrics, r2p_by_feature, write_metrics_csv
from vtlab.market.policies import ConstantEnginePolicy, EmpiricalSampler, FixedCustomerPolicy, PointMassSampler
from vtlab.market.rollout import rollout_sessions
from vtlab.market.transitions import customer_transition, engine_transition, is_terminal

ALICE = CustomerProfile(2, 3, True, (1.0, 0.0, 0.0, 0.0))
BOB = CustomerProfile(7, 1, False, (0.0, 0.6, 0.8, 0.0))


def zero_engine(dim=8):
    return ConstantEnginePolicy(tuple(np.zeros(dim)))


def run_fixed(action: CustomerAction, count=20, max_index=10, seed=0):
    return rollout_sessions(zero_engine(), FixedCustomerPolicy.always(action), PointMassSampler(ALICE),
                            count, seed, max_index=max_index)


class TestDomainTypes:
    """Customer profiles, actions and indices"""

    def test_type_index_corners(self):
        assert type_index(1, 1, False) == 0
        assert type_index(8, 3, True) == N_TYPES - 1
        category, power, level = type_from_index(np.arange(N_TYPES))
        np.testing.assert_array_equal(type_index(category, power, level), np.arange(N_TYPES))

    @pytest.mark.parametrize("category,power,request_arg", [
        (0, 1, (1.0, 0.0)),
        (9, 1, (1.0, 0.0)),
        (1, 4, (1.0, 0.0)),
        (1, 1, (1.0, 1.0)),
    ])
    def test_invalid_profiles_are_rejected(self, category, power, request_arg):
        with pytest.raises(RejectedInputError):
            CustomerProfile(category, power, False, request_arg)

    def test_action_labels(self):
        assert CustomerAction.from_label("turn_page") is CustomerAction.TURN_PAGE
        assert CustomerAction.LEAVE.label == "leave"
        with pytest.raises(RejectedInputError):
            CustomerAction.from_label("browse")

    def test_page_index_bounds(self):
        assert PageIndex(10).check(10).n == 10
        with pytest.raises(RejectedInputError):
            PageIndex(11).check(10)

    def test_profile_encoding(self):
        encoded = ALICE.encode()
        assert encoded.shape == (TYPE_DIM + 4,)
        assert encoded[1] == 1.0
        assert encoded[8 + 2] == 1.0
        assert encoded[8 + 3 + 1] == 1.0
        assert encoded[:TYPE_DIM].sum() == 3.0
        np.testing.assert_array_equal(encoded[TYPE_DIM:], ALICE.request_vec)

    def test_batch_round_trip(self):
        batch = ProfileBatch.from_profiles([ALICE, BOB])
        assert batch.to_profiles() == [ALICE, BOB]
        assert list(batch.type_index()) == [ALICE.type_index, BOB.type_index]

    def test_batch_validate_catches_bad_rows(self):
        batch = ProfileBatch([1], [2], [False], [[2.0, 0.0]])
        with pytest.raises(RejectedInputError):
            batch.validate()


class TestTransitions:
    """Engine-view and customer-view transitions"""

    state = CustomerState(ALICE, EngineAction((0.1,) * 8), PageIndex(3))

    def test_buy_terminates(self, rng):
        assert customer_transition(self.state, CustomerAction.BUY, zero_engine(), PointMassSampler(BOB), rng) is TERMINATED

    def test_turn_page_advances(self, rng):
        nxt = customer_transition(self.state, CustomerAction.TURN_PAGE, zero_engine(), PointMassSampler(BOB), rng)
        assert nxt.profile == ALICE
        assert nxt.engine_action == self.state.engine_action
        assert nxt.page.n == 4

    def test_leave_brings_a_fresh_customer(self, rng):
        nxt = customer_transition(self.state, CustomerAction.LEAVE, zero_engine(), PointMassSampler(BOB), rng)
        assert nxt.profile == BOB
        assert nxt.page.n == 0
        assert nxt.engine_action.norm == 0.0

    def test_engine_transition(self, rng):
        kept = engine_transition(ALICE, CustomerAction.TURN_PAGE, PointMassSampler(BOB), rng)
        assert kept.profile == ALICE and not kept.session_boundary
        moved = engine_transition(ALICE, CustomerAction.BUY, PointMassSampler(BOB), rng)
        assert moved.profile == BOB and moved.session_boundary

    def test_page_overflow_is_terminal(self):
        assert not is_terminal(CustomerState(ALICE, EngineAction((0.0,)), PageIndex(10)), 10)
        assert is_terminal(CustomerState(ALICE, EngineAction((0.0,)), PageIndex(11)), 10)


class TestRollouts:
    """Session rollouts with fixed behavior"""

    def test_always_turning_runs_to_max_index(self):
        data = run_fixed(CustomerAction.TURN_PAGE, count=5, max_index=10)
        assert data.n_sessions == 5
        assert data.n_records == 5 * 11
        assert data.rewards().sum() == 0
        data.validate()

    def test_always_buying_gives_one_record_per_session(self):
        data = run_fixed(CustomerAction.BUY, count=12)
        assert data.n_records == 12
        assert data.rewards().sum() == 12
        assert compute_metrics(data).r2p == pytest.approx(1.0)

    def test_uniform_customer_picks_each_action_a_third_of_the_time(self):
        data = rollout_sessions(zero_engine(), FixedCustomerPolicy.uniform(), PointMassSampler(ALICE), 70000, 5)
        assert data.n_records >= 100000
        observed = np.bincount(data.customer_actions(), minlength=3) / data.n_records
        np.testing.assert_allclose(observed, 1.0 / 3.0, atol=0.01)

    def test_count_must_be_positive(self):
        with pytest.raises(RejectedInputError):
            run_fixed(CustomerAction.LEAVE, count=0)

    def test_same_seed_same_dataset(self, oracle_params):
        from vtlab.oracle.market import OracleCustomerPolicy, OracleSampler, logging_policy

        def roll(threads):
            return rollout_sessions(logging_policy(oracle_params), OracleCustomerPolicy(oracle_params),
                                    OracleSampler(oracle_params), 40, 3, threads=threads, shard_size=16)

        pd.testing.assert_frame_equal(roll(1).records, roll(2).records)

    def test_different_seeds_differ(self, oracle_params):
        from vtlab.oracle.market import OracleCustomerPolicy, OracleSampler, logging_policy
        a = rollout_sessions(logging_policy(oracle_params), OracleCustomerPolicy(oracle_params),
                             OracleSampler(oracle_params), 40, 1)
        b = rollout_sessions(logging_policy(oracle_params), OracleCustomerPolicy(oracle_params),
                             OracleSampler(oracle_params), 40, 2)
        assert not np.array_equal(a.actions()[:5], b.actions()[:5])


class TestDataset:
    """Dataset invariants and persistence"""

    def test_logged_data_is_valid(self, small_log):
        small_log.validate()
        assert small_log.n_sessions == 300
        assert (small_log.pages() <= small_log.meta.max_index).all()

    def test_validate_catches_a_page_gap(self, small_log):
        records = small_log.records.copy()
        records.loc[records.index[0], "page"] = 1
        with pytest.raises(RejectedInputError):
            small_log.with_records(records).validate()

    def test_validate_catches_reward_off_purchase(self, small_log):
        records = small_log.records.copy()
        leave_rows = records.index[records["customer_action"] == int(CustomerAction.LEAVE)]
        records.loc[leave_rows[0], "reward"] = 1
        with pytest.raises(RejectedInputError):
            small_log.with_records(records).validate()

    def test_save_and_load(self, small_log, tmp_path):
        path = save_dataset(small_log, tmp_path / "log.jsonl")
        assert path.read_text(encoding="utf-8").splitlines()[0] == "VTLAB-DATA v1"
        loaded = load_dataset(path)
        assert loaded.n_sessions == small_log.n_sessions
        assert loaded.n_records == small_log.n_records
        assert loaded.meta == small_log.meta
        np.testing.assert_array_equal(loaded.customer_actions(), small_log.customer_actions())
        np.testing.assert_allclose(loaded.actions(), small_log.actions())
        loaded.validate()

    def test_missing_dataset_names_gen_data(self, tmp_path):
        with pytest.raises(MissingInputError) as exc_info:
            load_dataset(tmp_path / "nothing.jsonl")
        assert exc_info.value.producer == "gen-data"

    def test_sessions_view(self, small_log):
        sessions = small_log.sessions()
        assert len(sessions) == small_log.n_sessions
        assert sum(len(s) for s in sessions) == small_log.n_records
        first = sessions[0].records
        assert first[0].state.page.n == 0


class TestMetrics:
    """R2P, TT, TV and per-feature tables"""

    def test_metrics_of_logged_data(self, small_log):
        metrics = compute_metrics(small_log)
        assert metrics.tv == int(small_log.rewards().sum())
        assert metrics.r2p == pytest.approx(metrics.tv / small_log.n_records)
        assert metrics.tt == pytest.approx(np.nansum(small_log.prices()[small_log.purchase_mask()]))
        assert metrics.n_sessions == 300

    def test_metrics_of_session_list(self):
        data = run_fixed(CustomerAction.BUY, count=3)
        metrics = compute_metrics(data.sessions())
        assert metrics.tv == 3 and metrics.tt == 0.0

    def test_one_purchase_in_ten_single_view_sessions(self):
        choices = np.full(10, int(CustomerAction.LEAVE))
        choices[3] = int(CustomerAction.BUY)
        prices = np.full(10, np.nan)
        prices[3] = 5.0
        data = Dataset.from_arrays(
            DatasetMeta(), np.arange(10), ProfileBatch.repeat(ALICE, 10), np.zeros((10, 8)),
            np.zeros(10, dtype=int), choices, (choices == int(CustomerAction.BUY)).astype(int), prices,
        )
        data.validate()
        metrics = compute_metrics(data)
        assert metrics.r2p == pytest.approx(0.1)
        assert metrics.tv == 1
        assert metrics.tt == pytest.approx(5.0)

    def test_r2p_ignores_session_order(self, small_log):
        sessions = small_log.sessions()
        shuffled = [sessions[i] for i in np.random.default_rng(3).permutation(len(sessions))]
        assert compute_metrics(shuffled).r2p == compute_metrics(sessions).r2p
        assert compute_metrics(shuffled).r2p == pytest.approx(compute_metrics(small_log).r2p)

    def test_r2p_by_feature(self, small_log):
        table = r2p_by_feature(small_log)
        assert len(table) == len(FEATURE_VALUES) == 13
        per_category = table[table["feature"] == "query_category"]
        assert per_category["pv"].sum() == small_log.n_records

    def test_metrics_csv(self, small_log, tmp_path):
        path = write_metrics_csv(compute_metrics(small_log), tmp_path / "m.csv")
        frame = pd.read_csv(path)
        assert list(frame.columns) == ["metric", "value"]
        assert "r2p" in set(frame["metric"])


class TestEnvironment:
    """Engine-view environment"""

    def test_step_holds_the_action_for_one_session(self, rng):
        env = VirtualEnvironment(PointMassSampler(ALICE), FixedCustomerPolicy.always(CustomerAction.TURN_PAGE), 4)
        step = env.step(ALICE, np.zeros(8), rng)
        assert step.done
        assert step.reward == 0.0
        assert step.info["page_views"] == 5

    def test_play_counts_purchases(self, rng):
        env = VirtualEnvironment(PointMassSampler(ALICE), FixedCustomerPolicy.always(CustomerAction.BUY))
        outcome = env.play(ProfileBatch.repeat(ALICE, 6), np.zeros((6, 8)), rng)
        assert r2p_of(outcome) == (1.0, 6)

    def test_play_rejects_mismatched_actions(self, rng):
        env = VirtualEnvironment(PointMassSampler(ALICE), FixedCustomerPolicy.uniform())
        with pytest.raises(RejectedInputError):
            env.play(ProfileBatch.repeat(ALICE, 3), np.zeros((2, 8)), rng)

    def test_empirical_sampler(self, small_log, rng):
        sampler = EmpiricalSampler.from_dataset(small_log)
        drawn = sampler.sample(50, rng)
        assert len(drawn) == 50
        drawn.validate()
        with pytest.raises(InsufficientDataError):
            EmpiricalSampler(ProfileBatch.empty(4))
