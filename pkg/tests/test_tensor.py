import numpy as np
import pytest
from pytest import approx

import adawavenet.tensor as T
from adawavenet.tensor import Tensor, TensorError

from conftest import check_grads


def conv1d_oracle(x, w, b):
    """Direct triple-loop cross-correlation with symmetric zero padding."""
    C_out, C_in, K = w.shape
    L = x.shape[1]
    pad = (K - 1) // 2
    out = np.zeros((C_out, L))
    for o in range(C_out):
        for t in range(L):
            acc = b[o]
            for i in range(C_in):
                for k in range(K):
                    src = t + k - pad
                    if 0 <= src < L:
                        acc += w[o, i, k] * x[i, src]
            out[o, t] = acc
    return out


def linear_oracle(x, w, b):
    out = np.zeros(x.shape[:-1] + (w.shape[1],))
    flat_x = x.reshape(-1, x.shape[-1])
    flat_out = out.reshape(-1, w.shape[1])
    for n in range(flat_x.shape[0]):
        for j in range(w.shape[1]):
            acc = b[j]
            for i in range(w.shape[0]):
                acc += flat_x[n, i] * w[i, j]
            flat_out[n, j] = acc
    return out


class TestConv1d:
    def test_identity_kernel(self):
        x = Tensor([[1.0, 1.0, 2.0, 3.0]])
        w = Tensor([[[1.0]]])
        b = Tensor([0.0])
        assert T.conv1d(x, w, b).data == approx(np.array([[1.0, 1.0, 2.0, 3.0]]))

    def test_zero_kernel_annihilates(self, rng):
        x = Tensor(rng.normal(size=(3, 10)))
        w = Tensor(np.zeros((2, 3, 3)))
        b = Tensor(np.zeros(2))
        assert np.all(T.conv1d(x, w, b).data == 0)

    def test_matches_triple_loop_oracle(self, rng):
        x = rng.normal(size=(2, 8))
        w = rng.normal(size=(3, 2, 3))
        b = rng.normal(size=3)
        got = T.conv1d(Tensor(x), Tensor(w), Tensor(b)).data
        assert got == approx(conv1d_oracle(x, w, b))

    def test_even_kernel_rejected(self):
        with pytest.raises(TensorError):
            T.conv1d(Tensor(np.zeros((1, 8))), Tensor(np.zeros((1, 1, 4))), None)

    def test_channel_mismatch_rejected(self):
        with pytest.raises(TensorError):
            T.conv1d(Tensor(np.zeros((2, 8))), Tensor(np.zeros((1, 3, 3))), None)

    def test_batched_agrees_with_single(self, rng):
        xs = rng.normal(size=(4, 2, 8))
        w = rng.normal(size=(3, 2, 5))
        b = rng.normal(size=3)
        batched = T.conv1d(Tensor(xs), Tensor(w), Tensor(b)).data
        for i in range(4):
            single = T.conv1d(Tensor(xs[i]), Tensor(w), Tensor(b)).data
            assert batched[i] == approx(single)


class TestConvTranspose1d:
    def test_identity_kernel(self, rng):
        x = rng.normal(size=(2, 6))
        w = np.zeros((2, 2, 1))
        w[0, 0, 0] = w[1, 1, 0] = 1.0
        assert T.conv_transpose1d(Tensor(x), Tensor(w)).data == approx(x)

    def test_adjoint_identity(self, rng):
        # <conv1d(x, W), y> == <x, conv_transpose1d(y, W)> for zero bias
        for _ in range(5):
            x = rng.normal(size=(3, 12))
            y = rng.normal(size=(2, 12))
            w = rng.normal(size=(2, 3, 5))
            lhs = (T.conv1d(Tensor(x), Tensor(w)).data * y).sum()
            rhs = (x * T.conv_transpose1d(Tensor(y), Tensor(w)).data).sum()
            assert lhs == approx(rhs, abs=1e-10)

    def test_zero_input_broadcasts_bias(self):
        x = Tensor(np.zeros((2, 7)))
        w = Tensor(np.zeros((2, 3, 3)))
        b = Tensor(np.array([1.0, -2.0, 0.5]))
        out = T.conv_transpose1d(x, w, b).data
        assert out == approx(np.tile([[1.0], [-2.0], [0.5]], (1, 7)))


class TestDepthwiseConv:
    def test_matches_full_conv_with_diagonal_kernels(self, rng):
        x = rng.normal(size=(3, 10))
        wd = rng.normal(size=(3, 5))
        b = rng.normal(size=3)
        wf = np.zeros((3, 3, 5))
        for c in range(3):
            wf[c, c] = wd[c]
        got = T.depthwise_conv1d(Tensor(x), Tensor(wd), Tensor(b)).data
        want = T.conv1d(Tensor(x), Tensor(wf), Tensor(b)).data
        assert got == approx(want)

    def test_even_kernel_supported(self, rng):
        x = rng.normal(size=(2, 8))
        w = rng.normal(size=(2, 4))
        out = T.depthwise_conv1d(Tensor(x), Tensor(w)).data
        assert out.shape == (2, 8)

    def test_transpose_is_adjoint(self, rng):
        for K in (3, 4, 7, 16):
            x = rng.normal(size=(2, 20))
            y = rng.normal(size=(2, 20))
            w = rng.normal(size=(2, K))
            lhs = (T.depthwise_conv1d(Tensor(x), Tensor(w)).data * y).sum()
            rhs = (x * T.depthwise_conv_transpose1d(Tensor(y), Tensor(w)).data).sum()
            assert lhs == approx(rhs, abs=1e-10)


class TestLinear:
    def test_identity(self, rng):
        x = rng.normal(size=(3, 4))
        out = T.linear(Tensor(x), Tensor(np.eye(4)), Tensor(np.zeros(4)))
        assert out.data == approx(x)

    def test_hand_arithmetic(self):
        out = T.linear(Tensor([1.0, 2.0]), Tensor(np.eye(2)), Tensor([3.0, 3.0]))
        assert out.data == approx([4.0, 5.0])

    def test_matches_oracle(self, rng):
        x = rng.normal(size=(2, 3, 4))
        w = rng.normal(size=(4, 5))
        b = rng.normal(size=5)
        assert T.linear(Tensor(x), Tensor(w), Tensor(b)).data == approx(
            linear_oracle(x, w, b))

    def test_dim_mismatch(self):
        with pytest.raises(TensorError):
            T.linear(Tensor(np.zeros(3)), Tensor(np.zeros((4, 2))), None)


class TestElementwise:
    def test_tanh_zero(self):
        assert T.tanh(Tensor(0.0)).item() == 0.0

    def test_softmax_uniform(self):
        out = T.softmax(Tensor([0.0, 0.0, 0.0]))
        assert out.data == approx([1 / 3] * 3)

    def test_softmax_rows_sum_to_one(self, rng):
        out = T.softmax(Tensor(rng.normal(size=(4, 6))), axis=-1)
        assert out.data.sum(axis=-1) == approx(np.ones(4))

    def test_relu(self):
        assert T.relu(Tensor([-1.0, 0.0, 2.0])).data == approx([0, 0, 2])

    def test_masked_mse_all_ones_equals_unmasked(self, rng):
        p = Tensor(rng.normal(size=(3, 5)))
        t = Tensor(rng.normal(size=(3, 5)))
        full = T.mse(p, t).item()
        masked = T.mse(p, t, mask=Tensor(np.ones((3, 5)))).item()
        assert masked == approx(full)

    def test_masked_mse_empty_mask_falls_back(self, rng):
        p = Tensor(rng.normal(size=(2, 4)))
        t = Tensor(rng.normal(size=(2, 4)))
        assert T.mse(p, t, mask=Tensor(np.zeros((2, 4)))).item() == approx(
            T.mse(p, t).item())

    def test_mse_rejects_nonbinary_mask(self, rng):
        p = Tensor(np.zeros((2, 2)))
        with pytest.raises(TensorError):
            T.mse(p, p, mask=Tensor(np.full((2, 2), 0.5)))

    def test_broadcast_mismatch_raises(self):
        with pytest.raises(ValueError):
            T.add(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 4))))


class TestBackward:
    def test_sum_grad_ones(self, rng):
        x = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
        T.tsum(x).backward()
        assert x.grad == approx(np.ones((3, 4)))

    def test_mse_closed_form(self, rng):
        xv = rng.normal(size=(2, 3))
        x = Tensor(xv, requires_grad=True)
        T.mse(x, Tensor(np.zeros((2, 3)))).backward()
        assert x.grad == approx(2 * xv / xv.size)

    def test_non_scalar_loss_rejected(self):
        x = Tensor(np.zeros((2, 2)), requires_grad=True)
        with pytest.raises(TensorError):
            T.add(x, x).backward()

    def test_backward_twice_rejected(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        loss = T.mse(x, Tensor([0.0, 0.0]))
        loss.backward()
        with pytest.raises(TensorError):
            loss.backward()

    def test_composite_graph_matches_finite_differences(self, rng):
        x = rng.normal(size=(2, 8))
        w = rng.normal(size=(2, 2, 3)) * 0.3
        wl = rng.normal(size=(8, 4)) * 0.3
        tgt = rng.normal(size=(2, 4))

        def loss(xt, wt, wlt):
            h = T.tanh(T.conv1d(xt, wt))
            return T.mse(T.linear(h, wlt), Tensor(tgt))

        check_grads(loss, [x, w, wl])

    def test_tape_topological_order(self, rng):
        x = Tensor(rng.normal(size=4), requires_grad=True)
        y = T.mse(T.tanh(x), Tensor(np.zeros(4)))
        tape = y.build_tape()
        pos = {id(t): i for i, t in enumerate(tape.nodes)}
        for t in tape.nodes:
            for p in t._parents:
                assert pos[id(p)] < pos[id(t)]


class TestGradChecks:
    """Per-op finite-difference checks at f64 precision."""

    def test_conv1d(self, rng):
        x = rng.normal(size=(2, 8))
        w = rng.normal(size=(3, 2, 5))
        b = rng.normal(size=3)
        check_grads(lambda *a: T.mse(T.conv1d(*a), Tensor(np.zeros((3, 8)))),
                    [x, w, b])

    def test_conv_transpose1d(self, rng):
        x = rng.normal(size=(3, 8))
        w = rng.normal(size=(3, 2, 5))
        b = rng.normal(size=2)
        check_grads(lambda *a: T.mse(T.conv_transpose1d(*a), Tensor(np.zeros((2, 8)))),
                    [x, w, b])

    @pytest.mark.parametrize("K", [3, 4, 7])
    def test_depthwise_conv1d(self, rng, K):
        x = rng.normal(size=(2, 10))
        w = rng.normal(size=(2, K))
        b = rng.normal(size=2)
        check_grads(lambda *a: T.mse(T.depthwise_conv1d(*a), Tensor(np.zeros((2, 10)))),
                    [x, w, b])

    @pytest.mark.parametrize("K", [3, 4])
    def test_depthwise_conv_transpose1d(self, rng, K):
        x = rng.normal(size=(2, 10))
        w = rng.normal(size=(2, K))
        check_grads(lambda *a: T.mse(T.depthwise_conv_transpose1d(*a),
                                     Tensor(np.zeros((2, 10)))), [x, w])

    def test_softmax(self, rng):
        x = rng.normal(size=(3, 5))
        t = rng.normal(size=(3, 5))
        check_grads(lambda xt: T.mse(T.softmax(xt, axis=-1), Tensor(t)), [x])

    def test_layer_norm(self, rng):
        x = rng.normal(size=(2, 6))
        s = rng.normal(size=6)
        h = rng.normal(size=6)
        t = rng.normal(size=(2, 6))
        check_grads(lambda *a: T.mse(T.layer_norm(*a), Tensor(t)), [x, s, h])

    def test_moving_average(self, rng):
        x = rng.normal(size=(2, 12))
        t = rng.normal(size=(2, 12))
        check_grads(lambda xt: T.mse(T.moving_average(xt, 5), Tensor(t)), [x])

    def test_interleave_and_splits(self, rng):
        x = rng.normal(size=(2, 8))
        t = rng.normal(size=(2, 8))
        check_grads(lambda xt: T.mse(T.interleave(T.take_odd(xt), T.take_even(xt)),
                                     Tensor(t)), [x])

    def test_pad_and_crop(self, rng):
        x = rng.normal(size=(2, 7))
        t = rng.normal(size=(2, 6))
        check_grads(lambda xt: T.mse(T.crop_last(T.pad_edge_last(xt, 3), 4),
                                     Tensor(t)), [x])

    def test_grouped_linear(self, rng):
        x = rng.normal(size=(2, 3, 6))
        w = rng.normal(size=(2, 6, 4))
        b = rng.normal(size=(2, 4))
        assign = np.array([0, 1, 0])
        t = rng.normal(size=(2, 3, 4))
        check_grads(lambda *a: T.mse(T.grouped_linear_op(a[0], a[1], a[2], assign),
                                     Tensor(t)), [x, w, b])

    def test_elementwise_suite(self, rng):
        x = rng.normal(size=(3, 4))
        y = rng.normal(size=(3, 4))
        t = rng.normal(size=(3, 4))
        check_grads(lambda a, b: T.mse(T.mul(T.tanh(a), T.add(b, a)), Tensor(t)),
                    [x, y])
        check_grads(lambda a: T.mse(T.div(a, Tensor(np.full((3, 4), 2.0))), Tensor(t)),
                    [x])


class TestDeterminism:
    def test_identical_seeds_bitwise_identical(self):
        def run():
            rng = np.random.default_rng(7)
            x = Tensor(rng.normal(size=(2, 16)), requires_grad=True)
            w = Tensor(rng.normal(size=(2, 5)), requires_grad=True)
            loss = T.mse(T.tanh(T.depthwise_conv1d(x, w)), Tensor(np.zeros((2, 16))))
            loss.backward()
            return loss.item(), x.grad.copy(), w.grad.copy()

        l1, gx1, gw1 = run()
        l2, gx2, gw2 = run()
        assert l1 == l2
        assert np.array_equal(gx1, gx2)
        assert np.array_equal(gw1, gw2)
