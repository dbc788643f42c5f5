"""
Tensor Kernels and Reverse-Mode Gradients
=========================================

Forward and backward kernels for the five layer kinds the baseline classifier
uses (valid 1D convolution, ReLU, 1D max pooling, flatten, dense) plus the
softmax cross-entropy head. Tensors are float64 numpy arrays; single-sample
inputs of shape [C, L] or [n] are accepted alongside batched [B, C, L] / [B, n].

`forward` records a `Trace` over a layer chain; `backward` walks it in reverse
and returns `Gradients` keyed like the parameter dict ("conv1.weight", ...).
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from core.exceptions import BackwardError, LabelError, ShapeError
from data.models import LayerKind, LayerSpec

DTYPE = np.float64


def output_length(length: int, kernel: int, stride: int) -> int:
    """floor((length - kernel) / stride) + 1, shared by conv and pool."""
    if stride < 1:
        raise ShapeError(f"stride must be >= 1, got {stride}")
    if kernel > length:
        raise ShapeError("kernel longer than input", expected=(f"len >= {kernel}",), actual=(length,))
    return (length - kernel) // stride + 1


def _batched(x: np.ndarray, rank: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=DTYPE)
    if x.ndim == rank - 1:
        return x[np.newaxis], True
    if x.ndim != rank:
        raise ShapeError(f"expected rank {rank - 1} or {rank} input", actual=x.shape)
    return x, False


def _windows(x: np.ndarray, kernel: int, stride: int) -> np.ndarray:
    # [B, C, L] -> [B, C, out_len, kernel]
    return sliding_window_view(x, kernel, axis=2)[:, :, ::stride, :]


# ---------------------------------------------------------------------------
# Convolution
# ---------------------------------------------------------------------------

def conv1d_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray, stride: int = 1) -> np.ndarray:
    """Valid (unpadded) cross-correlation of [C, L] or [B, C, L] with weight [O, C, k]."""
    xb, single = _batched(x, 3)
    out_ch, in_ch, kernel = weight.shape
    if xb.shape[1] != in_ch:
        raise ShapeError("conv input channels do not match weight", expected=weight.shape, actual=xb.shape)
    if bias.shape != (out_ch,):
        raise ShapeError("conv bias does not match output channels", expected=(out_ch,), actual=bias.shape)
    output_length(xb.shape[2], kernel, stride)

    out = np.tensordot(_windows(xb, kernel, stride), weight, axes=([1, 3], [1, 2]))  # [B, out_len, O]
    out = np.ascontiguousarray(out.transpose(0, 2, 1)) + bias[np.newaxis, :, np.newaxis]
    return out[0] if single else out


def conv1d_backward(
    grad_out: np.ndarray, x: np.ndarray, weight: np.ndarray, stride: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (grad_x, grad_weight, grad_bias) for a batched conv1d_forward."""
    kernel = weight.shape[2]
    out_len = grad_out.shape[2]
    grad_w = np.tensordot(grad_out, _windows(x, kernel, stride), axes=([0, 2], [0, 2]))  # [O, C, k]
    grad_b = grad_out.sum(axis=(0, 2))

    cols = np.tensordot(grad_out, weight, axes=([1], [0]))  # [B, out_len, C, k]
    grad_x = np.zeros_like(x)
    span = stride * (out_len - 1) + 1
    for t in range(kernel):
        grad_x[:, :, t:t + span:stride] += cols[:, :, :, t].transpose(0, 2, 1)
    return grad_x, grad_w, grad_b


# ---------------------------------------------------------------------------
# Activation / pooling / dense
# ---------------------------------------------------------------------------

def relu_forward(x: np.ndarray) -> np.ndarray:
    return np.maximum(np.asarray(x, dtype=DTYPE), 0.0)


def relu_backward(grad_out: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.where(x > 0.0, grad_out, 0.0)


def maxpool1d_forward(x: np.ndarray, kernel: int, stride: int) -> np.ndarray:
    """Max over windows of `kernel`; trailing samples without a full window are dropped."""
    out, _ = _maxpool(x, kernel, stride)
    return out


def _maxpool(x: np.ndarray, kernel: int, stride: int) -> tuple[np.ndarray, np.ndarray]:
    xb, single = _batched(x, 3)
    output_length(xb.shape[2], kernel, stride)
    windows = _windows(xb, kernel, stride)
    arg = windows.argmax(axis=3)  # first index wins ties
    out = np.take_along_axis(windows, arg[..., np.newaxis], axis=3)[..., 0]
    if single:
        return out[0], arg[0]
    return out, arg


def maxpool1d_backward(grad_out: np.ndarray, x_shape: tuple, arg: np.ndarray, stride: int) -> np.ndarray:
    grad_x = np.zeros(x_shape, dtype=DTYPE)
    b_idx, c_idx, j_idx = np.indices(arg.shape)
    np.add.at(grad_x, (b_idx, c_idx, j_idx * stride + arg), grad_out)
    return grad_x


def dense_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """weight @ x + bias for x of shape [n] or [B, n]."""
    xb, single = _batched(x, 2)
    if xb.shape[1] != weight.shape[1]:
        raise ShapeError("dense input width does not match weight", expected=weight.shape, actual=xb.shape)
    if bias.shape != (weight.shape[0],):
        raise ShapeError("dense bias does not match output units", expected=(weight.shape[0],), actual=bias.shape)
    out = xb @ weight.T + bias
    return out[0] if single else out


def dense_backward(
    grad_out: np.ndarray, x: np.ndarray, weight: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return grad_out @ weight, grad_out.T @ x, grad_out.sum(axis=0)


# ---------------------------------------------------------------------------
# Classification head
# ---------------------------------------------------------------------------

def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=DTYPE)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, label: int) -> tuple[float, np.ndarray]:
    """Stabilized softmax and -log p[label] for a single logit vector."""
    z = np.asarray(logits, dtype=DTYPE)
    if z.ndim != 1 or z.shape[0] < 2:
        raise ShapeError("logits must be a vector of at least 2 classes", actual=z.shape)
    loss, probs, _ = softmax_cross_entropy_batch(z[np.newaxis], np.array([label]))
    return loss, probs[0]


def softmax_cross_entropy_batch(
    logits: np.ndarray, labels: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy over a batch; returns (loss, probs, grad of the mean loss wrt logits)."""
    labels = np.asarray(labels, dtype=np.int64)
    batch, classes = logits.shape
    if labels.shape != (batch,):
        raise ShapeError("one label per logit row required", expected=(batch,), actual=labels.shape)
    if np.any(labels < 0) or np.any(labels >= classes):
        raise LabelError(f"label outside [0, {classes}): {labels[(labels < 0) | (labels >= classes)][:5].tolist()}")

    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    total = exp.sum(axis=1, keepdims=True)
    probs = exp / total
    rows = np.arange(batch)
    losses = np.log(total[:, 0]) - shifted[rows, labels]
    grad = probs.copy()
    grad[rows, labels] -= 1.0
    return float(losses.mean()), probs, grad / batch


# ---------------------------------------------------------------------------
# Chain forward / backward
# ---------------------------------------------------------------------------

class Gradients(dict):
    """Per-parameter gradients, keyed like the parameter dict, plus the loss they came from."""

    def __init__(self, *args, loss: float = 0.0, **kwargs):
        super().__init__(*args, **kwargs)
        self.loss = loss


class Trace:
    """Tape of one forward pass over a layer chain."""

    def __init__(self, specs: list[LayerSpec]):
        self.specs = specs
        self.entries: list[tuple[LayerSpec, dict]] = []
        self.logits: np.ndarray | None = None

    @property
    def completed(self) -> bool:
        return self.logits is not None

    @property
    def probs(self) -> np.ndarray:
        if self.logits is None:
            raise BackwardError("forward pass has not completed", context="trace")
        return softmax(self.logits)


def forward(specs: list[LayerSpec], params: dict[str, np.ndarray], x: np.ndarray) -> Trace:
    """Runs `x` ([C, L] or [B, C, L]) through the chain, recording what backward needs."""
    act, _ = _batched(x, 3)
    trace = Trace(specs)
    for spec in specs:
        cache: dict = {"input": act}
        if spec.kind == LayerKind.CONV:
            cache["weight"] = params[f"{spec.name}.weight"]
            act = conv1d_forward(act, cache["weight"], params[f"{spec.name}.bias"], spec.stride)
        elif spec.kind == LayerKind.DENSE:
            cache["weight"] = params[f"{spec.name}.weight"]
            act = dense_forward(act, cache["weight"], params[f"{spec.name}.bias"])
        elif spec.kind == LayerKind.ACTIVATION:
            act = relu_forward(act)
        elif spec.kind == LayerKind.POOL:
            act, cache["arg"] = _maxpool(act, spec.kernel, spec.stride)
        elif spec.kind == LayerKind.FLATTEN:
            act = act.reshape(act.shape[0], -1)
        if spec.fused_relu:
            cache["pre_activation"] = act
            act = relu_forward(act)
        trace.entries.append((spec, cache))
    trace.logits = act
    return trace


def backward(trace: Trace | None, labels, masks: dict[str, np.ndarray] | None = None) -> Gradients:
    """
    Gradients of the mean cross-entropy of a completed trace.

    Weight gradients of masked positions are exactly 0.0.
    """
    if trace is None or not trace.completed:
        raise BackwardError("backward requested without a completed forward pass", context="backward")

    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    loss, _, grad = softmax_cross_entropy_batch(trace.logits, labels)
    grads = Gradients(loss=loss)

    for spec, cache in reversed(trace.entries):
        if spec.fused_relu:
            grad = relu_backward(grad, cache["pre_activation"])
        x = cache["input"]
        if spec.kind == LayerKind.CONV:
            grad, gw, gb = conv1d_backward(grad, x, cache["weight"], spec.stride)
            grads[f"{spec.name}.weight"], grads[f"{spec.name}.bias"] = gw, gb
        elif spec.kind == LayerKind.DENSE:
            grad, gw, gb = dense_backward(grad, x, cache["weight"])
            grads[f"{spec.name}.weight"], grads[f"{spec.name}.bias"] = gw, gb
        elif spec.kind == LayerKind.ACTIVATION:
            grad = relu_backward(grad, x)
        elif spec.kind == LayerKind.POOL:
            grad = maxpool1d_backward(grad, x.shape, cache["arg"], spec.stride)
        elif spec.kind == LayerKind.FLATTEN:
            grad = grad.reshape(x.shape)

    for layer, mask in (masks or {}).items():
        key = f"{layer}.weight"
        if key in grads:
            grads[key] = np.where(mask, grads[key], 0.0)
    return grads
