import numpy as np
import pytest

from core.exceptions import BackwardError, LabelError, ShapeError
from data.models import LayerKind, LayerSpec
from utilities.autodiff import (
    Trace,
    backward,
    conv1d_forward,
    dense_forward,
    forward,
    maxpool1d_forward,
    output_length,
    relu_forward,
    softmax,
    softmax_cross_entropy,
    softmax_cross_entropy_batch,
)


def naive_conv(x, w, b, stride):
    out_ch, in_ch, k = w.shape
    out_len = (x.shape[1] - k) // stride + 1
    out = np.zeros((out_ch, out_len))
    for o in range(out_ch):
        for t in range(out_len):
            out[o, t] = b[o] + sum(
                w[o, c, j] * x[c, t * stride + j] for c in range(in_ch) for j in range(k)
            )
    return out


def chain_loss(specs, params, x, labels):
    loss, _, _ = softmax_cross_entropy_batch(forward(specs, params, x).logits, labels)
    return loss


class TestKernels:
    def test_output_length(self):
        assert output_length(260, 50, 3) == 71
        assert output_length(71, 2, 3) == 24
        assert output_length(24, 7, 1) == 18
        assert output_length(18, 2, 2) == 9
        assert output_length(9, 9, 1) == 1

    def test_kernel_longer_than_input(self):
        with pytest.raises(ShapeError):
            output_length(5, 9, 1)

    def test_conv_matches_naive_loop(self, rng):
        x = rng.normal(size=(3, 20))
        w = rng.normal(size=(4, 3, 5))
        b = rng.normal(size=4)
        for stride in (1, 2, 3):
            np.testing.assert_allclose(conv1d_forward(x, w, b, stride), naive_conv(x, w, b, stride), atol=1e-12)

    def test_conv_batched_equals_single(self, rng):
        x = rng.normal(size=(2, 3, 20))
        w = rng.normal(size=(4, 3, 5))
        b = rng.normal(size=4)
        batched = conv1d_forward(x, w, b, 2)
        for i in range(2):
            np.testing.assert_allclose(batched[i], conv1d_forward(x[i], w, b, 2), atol=1e-12)

    def test_conv_channel_mismatch(self, rng):
        with pytest.raises(ShapeError):
            conv1d_forward(rng.normal(size=(2, 20)), rng.normal(size=(4, 3, 5)), np.zeros(4))

    def test_conv_identity_kernel(self):
        x = np.arange(10, dtype=float)[np.newaxis]
        out = conv1d_forward(x, np.array([[[1.0]]]), np.zeros(1))
        np.testing.assert_array_equal(out, x)

    def test_maxpool_drops_partial_window(self):
        x = np.array([[1.0, 5.0, 2.0, 4.0, 3.0]])
        np.testing.assert_array_equal(maxpool1d_forward(x, 2, 2), [[5.0, 4.0]])
        np.testing.assert_array_equal(maxpool1d_forward(x, 2, 3), [[5.0, 4.0]])

    def test_relu(self):
        np.testing.assert_array_equal(relu_forward(np.array([-1.0, 0.0, 2.0])), [0.0, 0.0, 2.0])

    def test_dense_width_mismatch(self, rng):
        with pytest.raises(ShapeError):
            dense_forward(rng.normal(size=5), rng.normal(size=(3, 4)), np.zeros(3))

    def test_softmax_is_stable_for_large_logits(self):
        probs = softmax(np.array([1000.0, 1000.0, -1000.0]))
        assert np.all(np.isfinite(probs))
        np.testing.assert_allclose(probs, [0.5, 0.5, 0.0], atol=1e-12)

    def test_cross_entropy_uniform_logits(self):
        loss, probs = softmax_cross_entropy(np.zeros(5), 2)
        assert loss == pytest.approx(np.log(5))
        np.testing.assert_allclose(probs, np.full(5, 0.2))

    def test_cross_entropy_rejects_bad_label(self):
        with pytest.raises(LabelError):
            softmax_cross_entropy(np.zeros(5), 5)
        with pytest.raises(LabelError):
            softmax_cross_entropy(np.zeros(5), -1)


class TestBackward:
    def test_requires_completed_forward(self, small_specs):
        with pytest.raises(BackwardError):
            backward(None, [0])
        with pytest.raises(BackwardError):
            backward(Trace(small_specs), [0])

    def test_gradients_match_finite_differences(self, small_specs, small_params, rng):
        x = rng.normal(size=(3, 1, 15))
        labels = np.array([0, 2, 1])
        grads = backward(forward(small_specs, small_params, x), labels)

        eps = 1e-6
        for name, p in small_params.items():
            numeric = np.zeros_like(p)
            for idx in np.ndindex(p.shape):
                original = p[idx]
                p[idx] = original + eps
                up = chain_loss(small_specs, small_params, x, labels)
                p[idx] = original - eps
                down = chain_loss(small_specs, small_params, x, labels)
                p[idx] = original
                numeric[idx] = (up - down) / (2 * eps)
            np.testing.assert_allclose(grads[name], numeric, rtol=1e-4, atol=1e-7, err_msg=name)

    def test_loss_is_reported(self, small_specs, small_params, rng):
        x = rng.normal(size=(2, 1, 15))
        trace = forward(small_specs, small_params, x)
        grads = backward(trace, [1, 1])
        assert grads.loss == pytest.approx(chain_loss(small_specs, small_params, x, np.array([1, 1])))

    def test_masked_weight_gradients_are_zero(self, small_specs, small_params, rng):
        mask = np.ones((2, 1, 3), dtype=bool)
        mask[0, 0, 1] = False
        mask[1, 0, :] = False
        grads = backward(forward(small_specs, small_params, rng.normal(size=(2, 1, 15))), [0, 1], {"c1": mask})
        assert np.all(grads["c1.weight"][~mask] == 0.0)

    def test_single_sample_input(self, small_specs, small_params, rng):
        trace = forward(small_specs, small_params, rng.normal(size=(1, 15)))
        assert trace.logits.shape == (1, 3)
        np.testing.assert_allclose(trace.probs.sum(axis=1), [1.0])


def naive_maxpool(x, k, stride):
    channels, length = x.shape
    out_len = (length - k) // stride + 1
    out = np.empty((channels, out_len))
    for c in range(channels):
        for t in range(out_len):
            out[c, t] = max(x[c, t * stride + j] for j in range(k))
    return out


def naive_dense(x, w, b):
    return np.array([b[i] + sum(w[i, j] * x[j] for j in range(w.shape[1])) for i in range(w.shape[0])])


def random_chain(kind, seed):
    """Small layer chain exercising `kind`, with random geometry and parameters."""
    r = np.random.default_rng(seed)
    in_ch, out_ch = int(r.integers(1, 4)), int(r.integers(1, 4))
    length = int(r.integers(8, 21))
    k, stride = int(r.integers(1, 6)), int(r.integers(1, 4))
    conv_len = (length - k) // stride + 1
    specs = [LayerSpec(name="c", kind=LayerKind.CONV, in_channels=in_ch, out_channels=out_ch, kernel=k, stride=stride)]
    features = out_ch * conv_len
    if kind == "relu":
        specs.append(LayerSpec(name="r", kind=LayerKind.ACTIVATION))
    elif kind == "pool":
        pk, ps = int(r.integers(1, min(4, conv_len) + 1)), int(r.integers(1, 4))
        specs.append(LayerSpec(name="p", kind=LayerKind.POOL, kernel=pk, stride=ps))
        features = out_ch * ((conv_len - pk) // ps + 1)
    specs.append(LayerSpec(name="f", kind=LayerKind.FLATTEN))
    params = {"c.weight": r.normal(size=(out_ch, in_ch, k)), "c.bias": r.normal(size=out_ch) * 0.1}
    if kind == "dense":
        hidden = int(r.integers(2, 6))
        specs.append(LayerSpec(name="h", kind=LayerKind.DENSE, in_channels=features, units=hidden, fused_relu=True))
        params["h.weight"] = r.normal(size=(hidden, features))
        params["h.bias"] = r.normal(size=hidden) * 0.1
        features = hidden
    specs.append(LayerSpec(name="o", kind=LayerKind.DENSE, in_channels=features, units=3))
    params["o.weight"] = r.normal(size=(3, features))
    params["o.bias"] = r.normal(size=3) * 0.1
    x = r.normal(size=(2, in_ch, length))
    labels = r.integers(0, 3, size=2)
    return specs, params, x, labels


def numeric_gradients(specs, params, x, labels, eps=1e-6):
    numeric = {}
    for name, p in params.items():
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            original = p[idx]
            p[idx] = original + eps
            up = chain_loss(specs, params, x, labels)
            p[idx] = original - eps
            down = chain_loss(specs, params, x, labels)
            p[idx] = original
            g[idx] = (up - down) / (2 * eps)
        numeric[name] = g
    return numeric


@pytest.mark.parametrize("kind", ["conv", "relu", "pool", "dense"])
@pytest.mark.parametrize("seed", range(100))
def test_random_chain_gradients(kind, seed):
    specs, params, x, labels = random_chain(kind, seed)
    grads = backward(forward(specs, params, x), labels)
    numeric = numeric_gradients(specs, params, x, labels)
    for name in params:
        np.testing.assert_allclose(grads[name], numeric[name], rtol=1e-4, atol=1e-7, err_msg=f"{kind}/{seed}/{name}")


class TestOracles:
    SHAPES = 200

    def test_conv_random_shapes(self):
        r = np.random.default_rng(20)
        for _ in range(self.SHAPES):
            in_ch, out_ch = int(r.integers(1, 4)), int(r.integers(1, 4))
            length = int(r.integers(1, 25))
            k, stride = int(r.integers(1, length + 1)), int(r.integers(1, 5))
            x, w, b = r.normal(size=(in_ch, length)), r.normal(size=(out_ch, in_ch, k)), r.normal(size=out_ch)
            np.testing.assert_allclose(conv1d_forward(x, w, b, stride), naive_conv(x, w, b, stride), atol=1e-12)

    def test_maxpool_random_shapes(self):
        r = np.random.default_rng(21)
        for _ in range(self.SHAPES):
            channels, length = int(r.integers(1, 5)), int(r.integers(1, 80))
            k, stride = int(r.integers(1, length + 1)), int(r.integers(1, 5))
            x = r.normal(size=(channels, length))
            np.testing.assert_array_equal(maxpool1d_forward(x, k, stride), naive_maxpool(x, k, stride))

    def test_maxpool_baseline_geometry(self, rng):
        x = rng.normal(size=(4, 71))
        out = maxpool1d_forward(x, 2, 3)
        assert out.shape == (4, 24)
        np.testing.assert_array_equal(out, naive_maxpool(x, 2, 3))

    def test_dense_random_shapes(self):
        r = np.random.default_rng(22)
        for _ in range(self.SHAPES):
            n, m = int(r.integers(1, 40)), int(r.integers(1, 20))
            x, w, b = r.normal(size=n), r.normal(size=(m, n)), r.normal(size=m)
            np.testing.assert_allclose(dense_forward(x, w, b), naive_dense(x, w, b), atol=1e-12)

    def test_dense_baseline_geometry(self, rng):
        x, w, b = rng.normal(size=32), rng.normal(size=(128, 32)), rng.normal(size=128)
        np.testing.assert_allclose(dense_forward(x, w, b), naive_dense(x, w, b), atol=1e-12)

    def test_relu_random_shapes(self):
        r = np.random.default_rng(23)
        for _ in range(self.SHAPES):
            x = r.normal(size=(int(r.integers(1, 5)), int(r.integers(1, 30))))
            expected = np.array([[v if v > 0 else 0.0 for v in row] for row in x])
            np.testing.assert_array_equal(relu_forward(x), expected)
