import numpy as np
import pytest

from cellfuse import tensor as T
from cellfuse.tensor import Tensor

from oracles import numeric_grad, rel_err

TOL = 1e-4


def fd_check(params, forward, tol=TOL):
    """Analytic vs central-difference gradients for every param."""
    T.zero_grad(params)
    loss = forward()
    loss.backward()
    for p in params:
        assert rel_err(p.grad, numeric_grad(forward, p)) < tol


class TestBasicOps:
    def test_add_broadcast_grad_shapes(self):
        rng = np.random.default_rng(0)
        a = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
        b = Tensor(rng.standard_normal(4), requires_grad=True)
        out = a + b
        out.sum().backward()
        assert a.grad.shape == (3, 4)
        assert b.grad.shape == (4,)
        np.testing.assert_allclose(b.grad, 3.0)

    def test_mul_sub_neg_values(self):
        a = Tensor([1.0, -2.0])
        b = Tensor([3.0, 4.0])
        np.testing.assert_allclose((a * b).data, [3.0, -8.0])
        np.testing.assert_allclose((a - b).data, [-2.0, -6.0])
        np.testing.assert_allclose((-a).data, [-1.0, 2.0])

    def test_pow_scalar_values_and_grad(self):
        x = Tensor([4.0, 9.0])
        np.testing.assert_allclose(T.pow_scalar(x, -0.5).data, [0.5, 1.0 / 3.0])
        rng = np.random.default_rng(40)
        y = Tensor(rng.uniform(0.5, 3.0, (4,)), requires_grad=True)
        fd_check([y], lambda: T.pow_scalar(y, -0.5).sum())
        fd_check([y], lambda: T.pow_scalar(y, 3.0).sum())

    def test_matmul_batched_shared_weight(self):
        rng = np.random.default_rng(1)
        adj = Tensor(rng.standard_normal((5, 5)), requires_grad=True)
        h = Tensor(rng.standard_normal((3, 5, 2)), requires_grad=True)
        fd_check([adj, h], lambda: (adj @ h).sum())

    def test_matmul_rejects_vectors(self):
        with pytest.raises(ValueError):
            T.matmul(Tensor([1.0, 2.0]), Tensor([[1.0], [2.0]]))

    def test_reshape_transpose_roundtrip(self):
        rng = np.random.default_rng(2)
        x = Tensor(rng.standard_normal((2, 3, 4)), requires_grad=True)
        y = T.transpose(T.reshape(x, (6, 4)), (1, 0))
        y.sum().backward()
        np.testing.assert_allclose(x.grad, 1.0)

    def test_concat_stack_grads(self):
        rng = np.random.default_rng(3)
        xs = [Tensor(rng.standard_normal((2, 3)), requires_grad=True) for _ in range(3)]
        fd_check(xs, lambda: T.tanh(T.concat(xs, axis=1)).sum())
        fd_check(xs, lambda: T.tanh(T.stack(xs, axis=0)).sum())

    def test_sum_mean_axis_keepdims(self):
        rng = np.random.default_rng(4)
        x = Tensor(rng.standard_normal((3, 4, 5)), requires_grad=True)
        fd_check([x], lambda: T.tanh(x.sum(axis=1)).sum())
        fd_check([x], lambda: T.tanh(x.mean(axis=(0, 2), keepdims=True)).sum())

    def test_gather_rows_accumulates_duplicates(self):
        x = Tensor(np.arange(6.0).reshape(3, 2), requires_grad=True)
        out = T.gather_rows(x, np.array([0, 0, 2]))
        out.sum().backward()
        np.testing.assert_allclose(x.grad, [[2.0, 2.0], [0.0, 0.0], [1.0, 1.0]])


class TestActivations:
    # inputs are kept away from the relu/leaky kinks at 0
    def setup_method(self):
        rng = np.random.default_rng(5)
        raw = rng.standard_normal((4, 6))
        raw[np.abs(raw) < 0.05] = 0.1
        self.x = Tensor(raw, requires_grad=True)

    def test_relu_values_and_grad(self):
        np.testing.assert_allclose(
            T.relu(Tensor([-1.0, 0.0, 2.0])).data, [0.0, 0.0, 2.0]
        )
        fd_check([self.x], lambda: T.relu(self.x).sum())

    def test_leaky_relu(self):
        np.testing.assert_allclose(
            T.leaky_relu(Tensor([-1.0, 2.0])).data, [-0.01, 2.0]
        )
        fd_check([self.x], lambda: T.leaky_relu(self.x).sum())

    def test_gelu_reference_points(self):
        # x * Phi(x) at 0, 1, -1 with the exact normal CDF
        vals = T.gelu(Tensor([0.0, 1.0, -1.0])).data
        assert vals[0] == 0.0
        np.testing.assert_allclose(vals[1], 0.8413447460685429, rtol=1e-12)
        np.testing.assert_allclose(vals[2], -0.15865525393145707, rtol=1e-12)
        fd_check([self.x], lambda: T.gelu(self.x).sum())

    def test_tanh_grad(self):
        fd_check([self.x], lambda: T.tanh(self.x).sum())

    def test_reglu_halves_width_and_gates(self):
        x = Tensor([[1.0, 2.0, 3.0, -1.0]], requires_grad=True)
        out = T.reglu(x)
        np.testing.assert_allclose(out.data, [[3.0, 0.0]])
        fd_check([self.x], lambda: T.reglu(self.x).sum())

    def test_reglu_odd_width_rejected(self):
        with pytest.raises(ValueError):
            T.reglu(Tensor([[1.0, 2.0, 3.0]]))


class TestNormalizationAndDropout:
    def test_layer_norm_statistics(self):
        rng = np.random.default_rng(6)
        x = Tensor(rng.standard_normal((5, 8)) * 3 + 2)
        g = Tensor(np.ones(8))
        b = Tensor(np.zeros(8))
        out = T.layer_norm(x, g, b).data
        np.testing.assert_allclose(out.mean(axis=-1), 0.0, atol=1e-12)
        # population variance, slightly below 1 because of eps
        np.testing.assert_allclose(out.var(axis=-1), 1.0, atol=1e-4)

    def test_layer_norm_grads(self):
        rng = np.random.default_rng(7)
        x = Tensor(rng.standard_normal((3, 5)), requires_grad=True)
        g = Tensor(rng.standard_normal(5), requires_grad=True)
        b = Tensor(rng.standard_normal(5), requires_grad=True)
        fd_check([x, g, b], lambda: T.tanh(T.layer_norm(x, g, b)).sum())

    def test_dropout_eval_is_identity(self):
        x = Tensor(np.arange(12.0).reshape(3, 4))
        out = T.dropout(x, 0.5, rng=0, training=False)
        np.testing.assert_array_equal(out.data, x.data)

    def test_dropout_mask_deterministic_and_scaled(self):
        x = Tensor(np.ones((100, 100)))
        a = T.dropout(x, 0.25, rng=42, training=True).data
        b = T.dropout(x, 0.25, rng=42, training=True).data
        np.testing.assert_array_equal(a, b)
        kept = a != 0.0
        np.testing.assert_allclose(a[kept], 1.0 / 0.75)
        assert abs(kept.mean() - 0.75) < 0.02

    def test_dropout_grad_uses_same_mask(self):
        rng = np.random.default_rng(8)
        x = Tensor(rng.standard_normal((4, 4)), requires_grad=True)
        fd_check([x], lambda: T.dropout(x, 0.5, rng=7, training=True).sum())

    def test_dropout_rate_validation(self):
        with pytest.raises(ValueError):
            T.dropout(Tensor([1.0]), 1.0, rng=0, training=True)


class TestLossesAndSoftmax:
    def test_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(9)
        x = Tensor(rng.standard_normal((6, 4)) * 10)
        s = T.softmax(x).data
        np.testing.assert_allclose(s.sum(axis=-1), 1.0, rtol=1e-12)
        assert (s > 0).all()

    def test_softmax_shift_invariance(self):
        x = np.array([[1.0, 2.0, 3.0]])
        a = T.softmax(Tensor(x)).data
        b = T.softmax(Tensor(x + 1000.0)).data
        np.testing.assert_allclose(a, b, rtol=1e-12)

    def test_softmax_grad(self):
        rng = np.random.default_rng(10)
        x = Tensor(rng.standard_normal((3, 5)), requires_grad=True)
        w = Tensor(rng.standard_normal((3, 5)))
        fd_check([x], lambda: (T.softmax(x) * w).sum())

    def test_cross_entropy_uniform_logits(self):
        logits = Tensor(np.zeros((4, 3)), requires_grad=True)
        loss = T.cross_entropy(logits, np.array([0, 1, 2, 0]))
        np.testing.assert_allclose(loss.data, np.log(3.0), rtol=1e-12)

    def test_cross_entropy_grad(self):
        rng = np.random.default_rng(11)
        logits = Tensor(rng.standard_normal((5, 3)), requires_grad=True)
        labels = np.array([0, 2, 1, 1, 0])
        fd_check([logits], lambda: T.cross_entropy(logits, labels))

    def test_cross_entropy_label_validation(self):
        logits = Tensor(np.zeros((2, 3)))
        with pytest.raises(ValueError):
            T.cross_entropy(logits, np.array([0, 3]))
        with pytest.raises(ValueError):
            T.cross_entropy(logits, np.array([0.5, 1.5]))
        with pytest.raises(ValueError):
            T.cross_entropy(logits, np.array([0]))

    def test_mse_loss_value_and_grad(self):
        pred = Tensor([[1.0, 2.0]], requires_grad=True)
        target = Tensor([[0.0, 0.0]])
        loss = T.mse_loss(pred, target)
        np.testing.assert_allclose(loss.data, 2.5)
        fd_check([pred], lambda: T.mse_loss(pred, target))

    def test_mse_shape_mismatch(self):
        with pytest.raises(ValueError):
            T.mse_loss(Tensor([1.0]), Tensor([[1.0]]))


class TestLinearAndConv:
    def test_linear_multidim_leading(self):
        rng = np.random.default_rng(12)
        x = Tensor(rng.standard_normal((2, 3, 4)), requires_grad=True)
        w = Tensor(rng.standard_normal((4, 5)), requires_grad=True)
        b = Tensor(rng.standard_normal(5), requires_grad=True)
        out = T.linear(x, w, b)
        assert out.shape == (2, 3, 5)
        fd_check([x, w, b], lambda: T.tanh(T.linear(x, w, b)).sum())

    @pytest.mark.parametrize("stride,padding", [(1, 0), (1, 1), (2, 0), (2, 1)])
    def test_conv2d_grads(self, stride, padding):
        rng = np.random.default_rng(13)
        x = Tensor(rng.standard_normal((2, 2, 5, 5)), requires_grad=True)
        w = Tensor(rng.standard_normal((3, 2, 3, 3)) * 0.5, requires_grad=True)
        b = Tensor(rng.standard_normal(3), requires_grad=True)
        fd_check(
            [x, w, b],
            lambda: T.tanh(T.conv2d(x, w, b, stride=stride, padding=padding)).sum(),
        )

    def test_conv2d_known_value(self):
        x = Tensor(np.arange(16.0).reshape(1, 1, 4, 4))
        w = Tensor(np.ones((1, 1, 2, 2)))
        b = Tensor(np.zeros(1))
        out = T.conv2d(x, w, b).data
        assert out.shape == (1, 1, 3, 3)
        np.testing.assert_allclose(out[0, 0, 0, 0], 0 + 1 + 4 + 5)

    def test_conv2d_validation(self):
        with pytest.raises(ValueError):
            T.conv2d(Tensor(np.zeros((1, 2, 4, 4))), Tensor(np.zeros((1, 3, 2, 2))),
                     Tensor(np.zeros(1)))


class TestGraphMechanics:
    def test_backward_requires_scalar(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with pytest.raises(ValueError):
            (x * 2.0).backward()

    def test_grad_accumulates_across_backwards(self):
        x = Tensor([2.0], requires_grad=True)
        loss = (x * x).sum()
        loss.backward()
        np.testing.assert_allclose(x.grad, [4.0])
        loss.backward()
        np.testing.assert_allclose(x.grad, [8.0])
        x.zero_grad()
        np.testing.assert_allclose(x.grad, [0.0])

    def test_diamond_graph_accumulation(self):
        x = Tensor([3.0], requires_grad=True)
        y = x * x        # used twice below
        loss = (y + y).sum()
        loss.backward()
        np.testing.assert_allclose(x.grad, [12.0])

    def test_no_grad_blocks_recording(self):
        x = Tensor([1.0], requires_grad=True)
        with T.no_grad():
            y = (x * 3.0).sum()
        assert y._backward is None and y._parents == ()

    def test_constant_inputs_skip_graph(self):
        a = Tensor([1.0])
        b = Tensor([2.0])
        out = a + b
        assert out._backward is None

    def test_ops_do_not_mutate_inputs(self):
        x = Tensor([-1.0, 2.0], requires_grad=True)
        before = x.data.copy()
        T.relu(x).sum().backward()
        np.testing.assert_array_equal(x.data, before)
