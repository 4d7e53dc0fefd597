"""
Tests for the numpy network core: forward/backward, losses, optimizers, checkpoints
"""
import numpy as np
import pytest

from vtlab.config import GansdConfig
from vtlab.error_handling import MissingInputError, NumericFaultError, RejectedInputError
from vtlab.gansd.model import gansd_discriminator_loss
from vtlab.gansd.train import init_gansd
from vtlab.mail.discriminator import MailDiscriminator, mail_discriminator_update
from vtlab.market.domain import customer_state_dim
from vtlab.nn.checkpoint import MAGIC, decode, encode, load_checkpoint, mlp_from_tensors, mlp_to_tensors, save_checkpoint
from vtlab.nn.gradcheck import check_mlp_gradients, numerical_gradient, relative_error
from vtlab.nn.losses import bernoulli_loss_grads, bernoulli_objective, cross_entropy_logits, mse
from vtlab.nn.mlp import Mlp, build_mlp
from vtlab.nn.optim import clip_by_global_norm, linear_decay, make_optimizer, optimize_step
from vtlab.nn.tensor import as_tensor, flatten, unflatten
from vtlab.oracle.market import OracleSampler
from vtlab.policy_opt.heads import CategoricalHead, GaussianData, GaussianPolicy
from vtlab.policy_opt.value import ValueFunction

GRAD_TOL = 1e-5


class TestMlpForward:
    """Shapes and output activations"""

    def test_batch_and_single_row(self, rng):
        net = build_mlp(3, 2, rng, hidden=(4,))
        assert net.forward(rng.standard_normal((5, 3))).shape == (5, 2)
        assert net.forward(rng.standard_normal(3)).shape == (2,)

    def test_wrong_input_size_is_rejected(self, rng):
        net = build_mlp(3, 2, rng, hidden=(4,))
        with pytest.raises(RejectedInputError) as exc_info:
            net.forward(np.zeros((2, 4)))
        assert exc_info.value.details["expected_last_dim"] == 3

    def test_non_finite_input_is_rejected(self, rng):
        net = build_mlp(3, 2, rng, hidden=(4,))
        with pytest.raises(RejectedInputError):
            net.forward(np.array([[0.0, np.nan, 1.0]]))

    def test_softmax_blocks_sum_to_one(self, rng):
        net = Mlp.create((3, 6, 5), rng, output_activation="softmax_blocks", blocks=(3, 2))
        out = net.forward(rng.standard_normal((7, 3)))
        np.testing.assert_allclose(out[:, :3].sum(axis=1), 1.0)
        np.testing.assert_allclose(out[:, 3:].sum(axis=1), 1.0)

    def test_blocks_larger_than_output_are_rejected(self, rng):
        with pytest.raises(RejectedInputError):
            Mlp.create((3, 4), rng, output_activation="softmax_blocks", blocks=(3, 2))

    def test_flat_parameters_round_trip(self, rng):
        net = build_mlp(3, 2, rng, hidden=(4,))
        x = rng.standard_normal((4, 3))
        clone = net.with_flat(net.get_flat())
        np.testing.assert_array_equal(clone.forward(x), net.forward(x))
        assert net.num_params == 3 * 4 + 4 + 4 * 2 + 2


class TestGradients:
    """Analytic gradients against central finite differences"""

    @pytest.mark.parametrize("output_activation,blocks", [
        ("identity", ()),
        ("sigmoid", ()),
        ("softmax_blocks", (2, 2)),
    ])
    def test_backward_matches_finite_differences(self, rng, output_activation, blocks):
        net = Mlp.create((3, 5, 4, 4), rng, output_activation=output_activation, blocks=blocks)
        x = rng.standard_normal((6, 3))
        upstream = rng.standard_normal((6, 4))
        assert check_mlp_gradients(net, x, upstream) < GRAD_TOL

    def test_jvp_matches_directional_difference(self, rng):
        net = build_mlp(3, 2, rng, hidden=(5,))
        x = rng.standard_normal((4, 3))
        v = rng.standard_normal(net.num_params)
        _, cache = net.forward_cache(x)
        analytic = net.jvp(cache, net.grads_from_flat(v))
        h = 1e-6
        flat = net.get_flat()
        numeric = (net.with_flat(flat + h * v).logits(x) - net.with_flat(flat - h * v).logits(x)) / (2 * h)
        assert relative_error(analytic, numeric) < GRAD_TOL

    def test_cross_entropy_gradient(self, rng):
        logits = rng.standard_normal((5, 3))
        labels = np.array([0, 2, 1, 1, 0])
        _, grad = cross_entropy_logits(logits, labels)
        numeric = numerical_gradient(
            lambda flat: cross_entropy_logits(flat.reshape(5, 3), labels)[0], logits.ravel()
        ).reshape(5, 3)
        assert relative_error(grad, numeric) < GRAD_TOL


class TestLosses:
    """Loss values"""

    def test_bernoulli_loss_value(self):
        loss, grad_real, grad_fake = bernoulli_loss_grads(np.array([[0.9]]), np.array([[0.2]]))
        assert loss == pytest.approx(-(np.log(0.9) + np.log(0.8)))
        assert grad_real[0, 0] == pytest.approx(-1.0 / 0.9)
        assert grad_fake[0, 0] == pytest.approx(1.0 / 0.8)

    def test_bernoulli_loss_stays_finite_at_saturation(self):
        loss, _, _ = bernoulli_loss_grads(np.array([[0.0]]), np.array([[1.0]]))
        assert np.isfinite(loss)

    def test_mse_weight(self):
        loss, grad = mse(np.array([[1.0, 2.0]]), np.zeros((1, 2)), weight=-0.5)
        assert loss == pytest.approx(-2.5)
        np.testing.assert_allclose(grad, [[-1.0, -2.0]])

    def test_cross_entropy_rejects_empty_batch(self):
        with pytest.raises(RejectedInputError):
            cross_entropy_logits(np.zeros((0, 3)), np.zeros(0))


class TestOptimizers:
    """Optimizer steps and schedules"""

    def test_sgd_step(self):
        state = make_optimizer([np.zeros(2)], "sgd", lr=0.1)
        (updated,) = optimize_step(state, [np.array([1.0, 2.0])], [np.array([1.0, -1.0])])
        np.testing.assert_allclose(updated, [0.9, 2.1])
        assert state.step == 1

    def test_adam_first_step_moves_by_learning_rate(self):
        state = make_optimizer([np.zeros(3)], "adam", lr=0.01)
        (updated,) = optimize_step(state, [np.zeros(3)], [np.array([2.0, -0.5, 1e-3])])
        np.testing.assert_allclose(updated, [-0.01, 0.01, -0.01], rtol=1e-4)

    def test_unknown_kind_is_rejected(self):
        with pytest.raises(RejectedInputError):
            make_optimizer([np.zeros(1)], "rmsprop")

    def test_non_finite_gradient_is_a_numeric_fault(self):
        state = make_optimizer([np.zeros(2)], "adam")
        with pytest.raises(NumericFaultError):
            optimize_step(state, [np.zeros(2)], [np.array([np.inf, 0.0])])

    def test_clip_by_global_norm(self):
        clipped, norm = clip_by_global_norm([np.array([3.0]), np.array([4.0])], 1.0)
        assert norm == pytest.approx(5.0)
        np.testing.assert_allclose([clipped[0][0], clipped[1][0]], [0.6, 0.8])

    def test_linear_decay_endpoints(self):
        assert linear_decay(1.0, 0, 10) == pytest.approx(1.0)
        assert linear_decay(1.0, 9, 10) == pytest.approx(0.1)
        assert linear_decay(1.0, 50, 10) == pytest.approx(0.1)


class TestTensors:
    """Tensor conversion helpers"""

    def test_shape_check(self):
        with pytest.raises(RejectedInputError):
            as_tensor([1.0, 2.0], shape=(3,))

    def test_unflatten_rejects_wrong_size(self):
        like = [np.zeros((2, 2)), np.zeros(3)]
        parts = unflatten(flatten([np.ones((2, 2)), np.ones(3)]), like)
        assert [p.shape for p in parts] == [(2, 2), (3,)]
        with pytest.raises(RejectedInputError):
            unflatten(np.zeros(8), like)


class TestCheckpoints:
    """ModelCheckpoint container"""

    def test_encode_decode(self):
        tensors = {"a": np.arange(6.0).reshape(2, 3), "b": np.array(2.5)}
        blob = encode(tensors)
        assert blob.startswith(MAGIC)
        decoded = decode(blob)
        np.testing.assert_array_equal(decoded["a"], tensors["a"])
        assert decoded["b"].shape == ()

    def test_bad_magic(self):
        with pytest.raises(RejectedInputError):
            decode(b"NOTVTL" + b"\x00" * 8)

    def test_truncated_and_trailing_bytes(self):
        blob = encode({"a": np.ones(4)})
        with pytest.raises(RejectedInputError):
            decode(blob[:-3])
        with pytest.raises(RejectedInputError):
            decode(blob + b"\x00")

    def test_missing_file_names_the_producer(self, tmp_path):
        with pytest.raises(MissingInputError) as exc_info:
            load_checkpoint(tmp_path / "gone.vtl", producer="fit-gansd")
        assert exc_info.value.details["producer"] == "fit-gansd"
        assert "fit-gansd" in exc_info.value.message

    def test_network_survives_save_and_load(self, rng, tmp_path):
        net = Mlp.create((4, 3, 5), rng, output_activation="softmax_blocks", blocks=(3, 2))
        path = save_checkpoint(tmp_path / "net.vtl", mlp_to_tensors(net, "net"))
        restored = mlp_from_tensors(load_checkpoint(path), "net")
        x = rng.standard_normal((3, 4))
        np.testing.assert_array_equal(restored.forward(x), net.forward(x))
        assert restored.blocks == (3, 2)
        assert restored.output_activation == "softmax_blocks"


INSTANCES = range(20)
DOWNSTREAM_TOL = 1e-4


class TestDownstreamGradients:
    """Every trained network against central differences, over many random instances"""

    @pytest.mark.parametrize("seed", INSTANCES)
    def test_gansd_discriminator(self, oracle_params, seed):
        rng = np.random.default_rng(seed)
        profiles = OracleSampler(oracle_params).sample(6, rng)
        model = init_gansd(profiles, GansdConfig(noise_dim=3, hidden=(6,)), rng)
        disc = model.discriminator
        real = profiles.encode()
        fake = model.soft_outputs(rng.standard_normal((5, model.noise_dim)))
        real_out, real_cache = disc.forward_cache(real)
        fake_out, fake_cache = disc.forward_cache(fake)
        _, grad_real, grad_fake = bernoulli_loss_grads(real_out, fake_out)
        analytic = disc.backward_from_cache(real_cache, grad_real)[0] + disc.backward_from_cache(fake_cache, grad_fake)[0]
        numeric = numerical_gradient(
            lambda flat: gansd_discriminator_loss(real, fake, disc.with_flat(flat)), disc.get_flat()
        )
        assert relative_error(analytic.flat(), numeric) < DOWNSTREAM_TOL

    @pytest.mark.parametrize("seed", INSTANCES)
    def test_mail_discriminator_update_step(self, seed):
        rng = np.random.default_rng(seed)
        disc = MailDiscriminator.create(4, 8, 10, rng, hidden=(6,))
        dim = customer_state_dim(4, 8)
        generated = (rng.standard_normal((5, dim)), rng.integers(0, 3, 5))
        expert = (rng.standard_normal((7, dim)), rng.integers(0, 3, 7))
        before = disc.network.get_flat()
        # plain SGD with unit rate: the parameter change is exactly minus the gradient
        sgd = make_optimizer(disc.network.parameters(), "sgd", 1.0)
        updated, _ = mail_discriminator_update(disc, generated, expert, sgd)
        analytic = before - updated.network.get_flat()

        def loss_of(flat):
            net = disc.network.with_flat(flat)
            return -bernoulli_objective(net.forward(disc.pair_inputs(*generated)), net.forward(disc.pair_inputs(*expert)))

        assert relative_error(analytic, numerical_gradient(loss_of, before)) < DOWNSTREAM_TOL

    @pytest.mark.parametrize("seed", INSTANCES)
    def test_gaussian_policy_head(self, seed):
        rng = np.random.default_rng(seed)
        policy = GaussianPolicy.create(5, 3, rng, hidden=(6,))
        inputs = rng.standard_normal((7, 5))
        data = GaussianData(inputs, policy.head.sample(inputs, rng))
        weights = rng.standard_normal(7)
        numeric = numerical_gradient(
            lambda flat: float(np.sum(weights * policy.with_flat(flat).log_prob(data))), policy.get_flat()
        )
        assert relative_error(policy.log_prob_grad(data, weights), numeric) < DOWNSTREAM_TOL

    @pytest.mark.parametrize("seed", INSTANCES)
    def test_categorical_policy_head(self, seed):
        rng = np.random.default_rng(seed)
        head = CategoricalHead(build_mlp(5, 3, rng, hidden=(6,), output_activation="softmax_blocks", blocks=(3,)))
        inputs = rng.standard_normal((7, 5))
        choices = rng.integers(0, 3, 7)
        weights = rng.standard_normal(7)
        numeric = numerical_gradient(
            lambda flat: float(np.sum(weights * head.with_flat(flat).log_prob(inputs, choices))), head.get_flat()
        )
        assert relative_error(head.log_prob_grad(inputs, choices, weights), numeric) < DOWNSTREAM_TOL

    @pytest.mark.parametrize("seed", INSTANCES)
    def test_value_function(self, seed):
        rng = np.random.default_rng(seed)
        value = ValueFunction.create(5, rng, hidden=(6,))
        inputs = rng.standard_normal((7, 5))
        targets = rng.standard_normal(7)
        out, cache = value.net.forward_cache(inputs)
        _, grad = mse(out, targets[:, None])
        analytic = value.net.backward_from_cache(cache, grad)[0].flat()
        numeric = numerical_gradient(
            lambda flat: ValueFunction(value.net.with_flat(flat), value.optimizer).loss(inputs, targets),
            value.net.get_flat(),
        )
        assert relative_error(analytic, numeric) < DOWNSTREAM_TOL
