"""
Tests for customer-behavior imitation: joint rollouts, discriminator and training
"""
import numpy as np
import pytest

from vtlab.error_handling import InsufficientDataError, MissingInputError, RejectedInputError
from vtlab.mail import (
    JointPolicy,
    MailDiscriminator,
    build_virtual_env,
    discriminator_accuracy,
    expert_pairs,
    imitation_reward,
    init_mail,
    load_mail,
    mail_discriminator_update,
    mail_rollout,
    policy_tv_distance,
    save_mail,
    train_mail,
)
from vtlab.mail.train import CURVE_COLUMNS, MAIL_STREAM_INDEX
from vtlab.market.domain import CustomerAction, encode_customer_state
from vtlab.nn.optim import make_optimizer
from vtlab.oracle.market import OracleCustomerPolicy, OracleSampler
from vtlab.policy_opt.heads import CategoricalHead
from vtlab.utils.seeding import STREAM_TRAINING, make_rng

MAX_INDEX = 10


@pytest.fixture
def joint(rng):
    return JointPolicy.create(4, 8, MAX_INDEX, rng, hidden=(8,))


@pytest.fixture
def sampler(oracle_params):
    return OracleSampler(oracle_params)


class TestMailRollout:
    """Customer-view trajectories under the joint policy"""

    def test_trajectory_structure(self, joint, sampler):
        traj = mail_rollout(joint, sampler, 20, seed=1, max_index=MAX_INDEX, step_cap=15)
        assert traj.n_trajectories == 20
        lengths = traj.lengths()
        assert lengths.min() >= 1 and lengths.max() <= 15
        assert (traj.pages <= MAX_INDEX).all()
        ends = traj.segment_ends()
        for index in range(20):
            rows = np.flatnonzero(traj.trajectory == index)
            np.testing.assert_array_equal(traj.step[rows], np.arange(rows.size))
            assert traj.fresh[rows[0]] and traj.pages[rows[0]] == 0
            assert ends[rows].sum() == 1 and ends[rows[-1]]

    def test_truncation_only_at_step_cap(self, joint, sampler):
        traj = mail_rollout(joint, sampler, 20, seed=2, max_index=MAX_INDEX, step_cap=3)
        truncated_lengths = traj.lengths()[traj.trajectory[traj.truncated]]
        assert (truncated_lengths == 3).all()
        assert not (traj.truncated & traj.terminal).any()

    def test_terminal_rows_buy_or_overflow(self, joint, sampler):
        traj = mail_rollout(joint, sampler, 30, seed=3, max_index=MAX_INDEX, step_cap=50)
        buys = traj.choices[traj.terminal] == int(CustomerAction.BUY)
        overflow = traj.pages[traj.terminal] == MAX_INDEX
        assert (buys | overflow).all()

    def test_same_seed_same_trajectories(self, joint, sampler):
        a = mail_rollout(joint, sampler, 12, seed=4, max_index=MAX_INDEX, step_cap=20)
        b = mail_rollout(joint, sampler, 12, seed=4, max_index=MAX_INDEX, step_cap=20)
        np.testing.assert_array_equal(a.choices, b.choices)
        np.testing.assert_array_equal(a.actions, b.actions)

    def test_pairs_of_one_trajectory(self, joint, sampler):
        traj = mail_rollout(joint, sampler, 5, seed=5, max_index=MAX_INDEX, step_cap=20)
        pairs = traj.pairs(0)
        assert len(pairs) == traj.lengths()[0]
        state, action = pairs[0]
        assert state.page.n == 0
        assert isinstance(action, CustomerAction)

    def test_forced_buy_ends_every_trajectory_at_once(self, joint, sampler):
        net = joint.customer.net
        bias = np.zeros(net.out_dim)
        bias[int(CustomerAction.BUY)] = 50.0
        params = net.parameters()
        params[-2] = np.zeros_like(params[-2])
        params[-1] = bias
        buyer = JointPolicy(joint.engine, CategoricalHead(net.with_parameters(params)), MAX_INDEX)
        traj = mail_rollout(buyer, sampler, 25, seed=8, max_index=MAX_INDEX, step_cap=20)
        np.testing.assert_array_equal(traj.lengths(), np.ones(25, dtype=int))
        assert (traj.choices == int(CustomerAction.BUY)).all()

    def test_count_must_be_positive(self, joint, sampler):
        with pytest.raises(RejectedInputError):
            mail_rollout(joint, sampler, 0, seed=1, max_index=MAX_INDEX)


class TestDiscriminator:
    """Pair discriminator and imitation reward"""

    @pytest.fixture
    def disc(self, rng):
        return MailDiscriminator.create(4, 8, MAX_INDEX, rng, hidden=(8,))

    def test_expert_pairs(self, small_log):
        inputs, choices = expert_pairs(small_log, MAX_INDEX)
        assert inputs.shape[0] == choices.shape[0] == small_log.n_records

    def test_expert_pairs_reject_empty_data(self, small_log):
        with pytest.raises(RejectedInputError):
            expert_pairs(small_log.with_records(small_log.records.iloc[0:0]), MAX_INDEX)

    def test_imitation_reward_is_minus_log_d(self, disc, joint, sampler):
        traj = mail_rollout(joint, sampler, 3, seed=6, max_index=MAX_INDEX, step_cap=10)
        state, action = traj.pairs(0)[0]
        inputs = traj.customer_inputs(joint)[:1]
        expected = -np.log(disc.prob(inputs, traj.choices[:1]))[0]
        assert imitation_reward(disc, state, action) == pytest.approx(expected)
        assert imitation_reward(disc, state, action) > 0.0

    def test_undecided_discriminator_pays_log_two(self, disc, joint, sampler):
        undecided = MailDiscriminator(disc.network.with_flat(np.zeros_like(disc.network.get_flat())), MAX_INDEX)
        traj = mail_rollout(joint, sampler, 3, seed=6, max_index=MAX_INDEX, step_cap=10)
        for state, action in traj.pairs(0):
            assert imitation_reward(undecided, state, action) == pytest.approx(np.log(2.0))

    def test_identical_sets_cannot_be_separated(self, disc, small_log):
        expert = expert_pairs(small_log, MAX_INDEX)
        floor = 2.0 * np.log(2.0)
        undecided = MailDiscriminator(disc.network.with_flat(np.zeros_like(disc.network.get_flat())), MAX_INDEX)
        sgd = make_optimizer(undecided.network.parameters(), "sgd", 1e-2)
        _, loss = mail_discriminator_update(undecided, expert, expert, sgd)
        assert loss == pytest.approx(floor)

        optimizer = make_optimizer(disc.network.parameters(), "adam", 1e-2)
        losses = []
        for _ in range(200):
            disc, loss = mail_discriminator_update(disc, expert, expert, optimizer)
            losses.append(loss)
        assert min(losses) >= floor - 1e-9
        assert losses[-1] == pytest.approx(floor, abs=0.05)

    def test_update_learns_to_separate(self, disc, joint, sampler, small_log):
        traj = mail_rollout(joint, sampler, 40, seed=7, max_index=MAX_INDEX, step_cap=30)
        generated = (traj.customer_inputs(joint), traj.choices)
        expert = expert_pairs(small_log, MAX_INDEX)
        optimizer = make_optimizer(disc.network.parameters(), "adam", 1e-2)
        disc, first = mail_discriminator_update(disc, generated, expert, optimizer)
        for _ in range(30):
            disc, last = mail_discriminator_update(disc, generated, expert, optimizer)
        assert np.isfinite(first) and first > 0.0
        assert last < first
        assert 0.0 <= discriminator_accuracy(disc, generated, expert) <= 1.0

    def test_update_rejects_empty_pairs(self, disc, small_log):
        expert = expert_pairs(small_log, MAX_INDEX)
        empty = (expert[0][:0], expert[1][:0])
        optimizer = make_optimizer(disc.network.parameters(), "adam")
        with pytest.raises(RejectedInputError):
            mail_discriminator_update(disc, empty, expert, optimizer)


class TestMailTraining:
    """End-to-end imitation on a small log"""

    def test_training_curve(self, small_log, sampler, tiny_cfg):
        result = train_mail(small_log, sampler, tiny_cfg.mail, tiny_cfg.trpo, seed=1)
        assert list(result.curve.columns) == CURVE_COLUMNS
        assert len(result.curve) == tiny_cfg.mail.iterations
        assert np.isfinite(result.curve[["disc_loss", "mean_imitation_reward", "policy_kl"]].to_numpy()).all()

    def test_empty_expert(self, small_log, sampler, tiny_cfg):
        empty = small_log.with_records(small_log.records.iloc[0:0])
        with pytest.raises(InsufficientDataError):
            train_mail(empty, sampler, tiny_cfg.mail, tiny_cfg.trpo, seed=1)

    def test_learned_behavior_drives_an_environment(self, small_log, sampler, tiny_cfg, rng):
        result = train_mail(small_log, sampler, tiny_cfg.mail, tiny_cfg.trpo, seed=1, iterations=1)
        env = build_virtual_env(sampler, result.customer_policy, MAX_INDEX)
        profiles = sampler.sample(30, rng)
        outcome = env.play(profiles, np.zeros((30, 8)), rng)
        assert outcome.page_views.sum() >= 30

    def test_joint_probabilities_compose_engine_and_customer(self, joint, sampler, rng):
        profiles = sampler.sample(30, rng)
        pages = rng.integers(0, MAX_INDEX + 1, 30)
        engine_mean = joint.engine.mean(profiles.encode())
        composed = joint.customer.probabilities(encode_customer_state(profiles, engine_mean, pages, MAX_INDEX))
        np.testing.assert_array_equal(joint.probabilities(profiles, joint.engine_actions(profiles), pages), composed)
        np.testing.assert_array_equal(joint.customer_policy().probabilities(profiles, engine_mean, pages), composed)

    def test_zero_iterations_return_the_initial_policies(self, small_log, sampler, tiny_cfg):
        result = train_mail(small_log, sampler, tiny_cfg.mail, tiny_cfg.trpo, seed=5, iterations=0)
        joint, disc = init_mail(4, 8, MAX_INDEX, tiny_cfg.mail, make_rng(5, STREAM_TRAINING, MAIL_STREAM_INDEX))
        np.testing.assert_array_equal(result.joint.get_flat(), joint.get_flat())
        np.testing.assert_array_equal(result.discriminator.network.get_flat(), disc.network.get_flat())
        assert result.curve.empty

    def test_policy_distance(self, joint, sampler, oracle_params, rng):
        profiles = sampler.sample(40, rng)
        actions = rng.uniform(-0.5, 0.5, (40, 8))
        pages = rng.integers(0, MAX_INDEX + 1, 40)
        learned = joint.customer_policy()
        assert policy_tv_distance(learned, learned, profiles, actions, pages) == {"mean": 0.0, "max": 0.0}
        gap = policy_tv_distance(learned, OracleCustomerPolicy(oracle_params), profiles, actions, pages)
        assert 0.0 < gap["mean"] <= gap["max"] <= 1.0

    def test_checkpoint(self, small_log, sampler, tiny_cfg, tmp_path, rng):
        result = train_mail(small_log, sampler, tiny_cfg.mail, tiny_cfg.trpo, seed=1, iterations=1)
        restored = load_mail(save_mail(result, tmp_path / "mail.vtl"))
        np.testing.assert_array_equal(restored.joint.get_flat(), result.joint.get_flat())
        np.testing.assert_array_equal(restored.discriminator.network.get_flat(),
                                      result.discriminator.network.get_flat())
        with pytest.raises(MissingInputError):
            load_mail(tmp_path / "absent.vtl")
