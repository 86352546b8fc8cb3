"""Per-op gradient checks and behavioral properties of the tensor tape."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mkedg import autodiff as ad
from mkedg.autodiff import Tensor, gradient_check
from mkedg.errors import ShapeError

TOL = 1e-6


def rnd(rng, *shape):
    return Tensor(rng.standard_normal(shape), requires_grad=True)


class TestGradients:
    """Every differentiable op against central finite differences."""

    def setup_method(self):
        self.rng = np.random.default_rng(7)

    def check(self, fn, params):
        err = gradient_check(fn, params)
        assert err < TOL, f"max relative gradient error {err:.3g}"

    def test_add_same_shape(self):
        a, b = rnd(self.rng, 3, 4), rnd(self.rng, 3, 4)
        self.check(lambda: ad.tsum(ad.add(a, b) * ad.add(a, b)), {"a": a, "b": b})

    def test_add_broadcast_row(self):
        a, b = rnd(self.rng, 3, 4), rnd(self.rng, 1, 4)
        self.check(lambda: ad.tsum(ad.tanh(ad.add(a, b))), {"a": a, "b": b})

    def test_add_broadcast_col(self):
        a, b = rnd(self.rng, 3, 4), rnd(self.rng, 3, 1)
        self.check(lambda: ad.tsum(ad.tanh(ad.add(a, b))), {"a": a, "b": b})

    def test_mul_broadcast(self):
        a, b = rnd(self.rng, 2, 5), rnd(self.rng, 2, 1)
        self.check(lambda: ad.tsum(ad.mul(a, b)), {"a": a, "b": b})

    def test_scale(self):
        a = rnd(self.rng, 4, 3)
        self.check(lambda: ad.tsum(ad.scale(a, -2.5)), {"a": a})

    def test_matmul_2d(self):
        a, b = rnd(self.rng, 3, 4), rnd(self.rng, 4, 2)
        self.check(lambda: ad.tsum(ad.tanh(a @ b)), {"a": a, "b": b})

    def test_matmul_vec_mat(self):
        a, b = rnd(self.rng, 4), rnd(self.rng, 4, 3)
        self.check(lambda: ad.tsum(ad.tanh(a @ b)), {"a": a, "b": b})

    def test_matmul_mat_vec(self):
        a, b = rnd(self.rng, 3, 4), rnd(self.rng, 4)
        self.check(lambda: ad.tsum(ad.tanh(a @ b)), {"a": a, "b": b})

    def test_matmul_dot(self):
        a, b = rnd(self.rng, 5), rnd(self.rng, 5)
        self.check(lambda: ad.tanh(a @ b), {"a": a, "b": b})

    def test_transpose(self):
        a = rnd(self.rng, 3, 5)
        self.check(lambda: ad.tsum(ad.tanh(ad.transpose(a))), {"a": a})

    def test_reshape(self):
        a = rnd(self.rng, 2, 6)
        self.check(lambda: ad.tsum(ad.tanh(ad.reshape(a, (3, 4)))), {"a": a})

    def test_concat_last_axis(self):
        a, b = rnd(self.rng, 2, 3), rnd(self.rng, 2, 4)
        self.check(lambda: ad.tsum(ad.tanh(ad.concat([a, b], axis=-1))),
                   {"a": a, "b": b})

    def test_concat_rows(self):
        a, b = rnd(self.rng, 2, 3), rnd(self.rng, 4, 3)
        self.check(lambda: ad.tsum(ad.tanh(ad.concat([a, b], axis=0))),
                   {"a": a, "b": b})

    def test_slice_cols(self):
        a = rnd(self.rng, 4, 8)
        self.check(lambda: ad.tsum(ad.tanh(ad.slice_cols(a, 2, 6))), {"a": a})

    def test_take_row(self):
        a = rnd(self.rng, 5, 3)
        self.check(lambda: ad.tsum(ad.tanh(ad.take_row(a, 2))), {"a": a})

    def test_repeat_rows(self):
        a = rnd(self.rng, 1, 4)
        self.check(lambda: ad.tsum(ad.tanh(ad.repeat_rows(a, 6))), {"a": a})

    def test_pick(self):
        a = rnd(self.rng, 7)
        self.check(lambda: ad.tanh(ad.pick(a, 3)), {"a": a})

    def test_log(self):
        a = Tensor(self.rng.uniform(0.5, 2.0, size=(3, 3)), requires_grad=True)
        self.check(lambda: ad.tsum(ad.log(a)), {"a": a})

    def test_log_eps(self):
        a = Tensor(self.rng.uniform(0.0, 1.0, size=(4,)), requires_grad=True)
        self.check(lambda: ad.tsum(ad.log(a, eps=1e-3)), {"a": a})

    def test_relu(self):
        # keep coordinates away from the kink so differences are clean
        data = self.rng.standard_normal((3, 4))
        data += np.sign(data) * 0.2
        a = Tensor(data, requires_grad=True)
        self.check(lambda: ad.tsum(ad.relu(a) * ad.relu(a)), {"a": a})

    def test_sigmoid(self):
        a = rnd(self.rng, 3, 3)
        self.check(lambda: ad.tsum(ad.sigmoid(a)), {"a": a})

    def test_tanh(self):
        a = rnd(self.rng, 2, 6)
        self.check(lambda: ad.tsum(ad.tanh(a) * ad.tanh(a)), {"a": a})

    def test_softmax(self):
        a = rnd(self.rng, 3, 5)
        w = Tensor(self.rng.standard_normal((3, 5)))
        self.check(lambda: ad.tsum(ad.softmax(a) * w), {"a": a})

    def test_softmax_axis0(self):
        a = rnd(self.rng, 4, 3)
        w = Tensor(self.rng.standard_normal((4, 3)))
        self.check(lambda: ad.tsum(ad.softmax(a, axis=0) * w), {"a": a})

    def test_layer_norm(self):
        a = rnd(self.rng, 4, 6)
        gain = Tensor(self.rng.uniform(0.5, 1.5, size=6), requires_grad=True)
        bias = rnd(self.rng, 6)
        self.check(lambda: ad.tsum(ad.tanh(ad.layer_norm(a, gain, bias))),
                   {"a": a, "gain": gain, "bias": bias})

    def test_embedding_lookup(self):
        table = rnd(self.rng, 6, 4)
        ids = [0, 3, 3, 5]  # a repeated id must accumulate both row grads
        self.check(lambda: ad.tsum(ad.tanh(ad.embedding_lookup(table, ids))),
                   {"table": table})

    def test_masked_fill(self):
        a = rnd(self.rng, 3, 4)
        mask = np.zeros((3, 4), dtype=bool)
        mask[0, 1] = mask[2, 3] = True
        w = Tensor(self.rng.standard_normal((3, 4)))
        self.check(
            lambda: ad.tsum(ad.softmax(ad.masked_fill(a, mask, -30.0)) * w),
            {"a": a})

    def test_cross_entropy(self):
        a = rnd(self.rng, 9)
        self.check(lambda: ad.cross_entropy(a, 4), {"a": a})

    def test_sum_axis(self):
        a = rnd(self.rng, 3, 4)
        w = Tensor(self.rng.standard_normal(4))
        self.check(lambda: ad.tsum(ad.tsum(a, axis=0) * w), {"a": a})

    def test_mean(self):
        a = rnd(self.rng, 5, 2)
        self.check(lambda: ad.tmean(a * a), {"a": a})

    def test_shared_subexpression(self):
        # the same tensor feeding two paths must accumulate both gradients
        a = rnd(self.rng, 3, 3)
        self.check(lambda: ad.tsum(ad.add(ad.tanh(a), ad.sigmoid(a)) * a),
                   {"a": a})

    def test_composite_attention_block(self):
        rng = self.rng
        x = rnd(rng, 4, 6)
        wq, wk, wv = rnd(rng, 6, 6), rnd(rng, 6, 6), rnd(rng, 6, 6)

        def loss():
            q, k, v = x @ wq, x @ wk, x @ wv
            att = ad.softmax(ad.scale(q @ ad.transpose(k), 6 ** -0.5))
            return ad.tmean(ad.tanh(att @ v))

        self.check(loss, {"x": x, "wq": wq, "wk": wk, "wv": wv})


class TestBehavior:

    def test_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(0)
        out = ad.softmax(Tensor(rng.standard_normal((20, 7)) * 5)).data
        assert np.allclose(out.sum(axis=-1), 1.0, atol=1e-12)
        assert (out > 0).all()

    def test_masked_softmax_exact_zero(self):
        rng = np.random.default_rng(1)
        mask = rng.random((6, 6)) < 0.4
        np.fill_diagonal(mask, False)
        logits = ad.masked_fill(Tensor(rng.standard_normal((6, 6))), mask)
        out = ad.softmax(logits).data
        assert (out[mask] == 0.0).all()
        assert np.allclose(out.sum(axis=-1), 1.0)

    def test_masked_position_gets_zero_gradient(self):
        rng = np.random.default_rng(2)
        a = Tensor(rng.standard_normal((4, 4)), requires_grad=True)
        mask = np.zeros((4, 4), dtype=bool)
        mask[1, 2] = True
        w = Tensor(rng.standard_normal((4, 4)))
        ad.tsum(ad.softmax(ad.masked_fill(a, mask)) * w).backward()
        assert a.grad[1, 2] == 0.0

    def test_sigmoid_stable_at_extremes(self):
        out = ad.sigmoid(Tensor([-1000.0, 0.0, 1000.0])).data
        assert out[0] == 0.0 and out[1] == 0.5 and out[2] == 1.0

    def test_layer_norm_constant_row_is_bias(self):
        a = Tensor(np.full((2, 5), 3.7))
        gain = Tensor(np.ones(5))
        bias = Tensor(np.arange(5, dtype=float))
        out = ad.layer_norm(a, gain, bias).data
        assert np.allclose(out, np.arange(5, dtype=float), atol=1e-3)

    def test_layer_norm_standardizes(self):
        rng = np.random.default_rng(3)
        a = Tensor(rng.standard_normal((8, 16)) * 4 + 2)
        out = ad.layer_norm(a, Tensor(np.ones(16)), Tensor(np.zeros(16))).data
        assert np.allclose(out.mean(axis=-1), 0.0, atol=1e-9)
        assert np.allclose(out.std(axis=-1), 1.0, atol=1e-4)

    def test_cross_entropy_matches_log_softmax(self):
        rng = np.random.default_rng(4)
        logits = rng.standard_normal(11)
        expected = -np.log(np.exp(logits) / np.exp(logits).sum())[6]
        got = ad.cross_entropy(Tensor(logits), 6).item()
        assert got == pytest.approx(expected, abs=1e-12)

    def test_backward_rejects_non_scalar(self):
        with pytest.raises(ShapeError):
            Tensor(np.zeros((2, 2)), requires_grad=True).backward()

    def test_matmul_shape_error(self):
        with pytest.raises(ShapeError):
            ad.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 2))))

    def test_embedding_id_out_of_range(self):
        with pytest.raises(ShapeError):
            ad.embedding_lookup(Tensor(np.zeros((3, 2))), [0, 3])

    def test_no_grad_tracking_for_constants(self):
        a = Tensor(np.ones((2, 2)))
        b = Tensor(np.ones((2, 2)))
        out = ad.add(a, b)
        assert not out.requires_grad and out._parents == ()

    def test_gradient_check_sampling_path(self):
        rng = np.random.default_rng(5)
        big = Tensor(rng.standard_normal((150, 100)), requires_grad=True)
        err = gradient_check(lambda: ad.tsum(ad.tanh(big)), {"big": big})
        assert err < TOL

    def test_float64_throughout(self):
        out = ad.softmax(Tensor(np.ones(4, dtype=np.float32)))
        assert out.data.dtype == np.float64

    @given(st.lists(st.floats(-30, 30), min_size=2, max_size=12))
    @settings(max_examples=60, deadline=None)
    def test_softmax_simplex_property(self, values):
        out = ad.softmax(Tensor(np.asarray(values))).data
        assert out.sum() == pytest.approx(1.0, abs=1e-9)
        assert (out >= 0).all()

    @given(st.integers(0, 2 ** 31 - 1))
    @settings(max_examples=30, deadline=None)
    def test_unbroadcast_roundtrip(self, seed):
        rng = np.random.default_rng(seed)
        a = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
        b = Tensor(rng.standard_normal((1, 4)), requires_grad=True)
        ad.tsum(ad.add(a, b)).backward()
        assert np.allclose(a.grad, 1.0)
        assert np.allclose(b.grad, 3.0)
