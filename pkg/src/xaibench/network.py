"""Fixed layer set with clipped-ReLU activation: forward pass and
reverse-mode input gradients under pluggable ReLU backward rules.

Networks are immutable after construction and forward/gradient are pure,
so evaluation is safe to parallelize across examples.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from xaibench import kernels

STANDARD = "standard"
GUIDED = "guided"
DECONV = "deconv"

RELU_RULES = (STANDARD, GUIDED, DECONV)


class ShapeError(ValueError):
    """Input/layer shape mismatch; the message names the offending layer."""


@dataclass(frozen=True)
class MaxPool:
    kernel: tuple[int, int]
    stride: tuple[int, int]
    name: str = "MaxPool"


@dataclass(frozen=True)
class Conv2D:
    weights: np.ndarray  # (kh, kw, cin, cout)
    bias: np.ndarray  # (cout,)
    stride: tuple[int, int]
    name: str = "Conv2D"


@dataclass(frozen=True)
class Flatten:
    name: str = "Flatten"


@dataclass(frozen=True)
class Dense:
    weights: np.ndarray  # (nin, nout)
    bias: np.ndarray  # (nout,)
    name: str = "Dense"


Layer = MaxPool | Conv2D | Flatten | Dense


@dataclass(frozen=True)
class Network:
    layers: tuple[Layer, ...]
    input_shape: tuple[int, int, int]
    concept_id: int | None = None
    term_map: dict = field(default_factory=dict)


@dataclass
class ForwardTrace:
    """Per-layer intermediates: inputs, pre-activations, post-activations
    and max-pool argmax indices (flat y*w+x, row-major first-max ties)."""

    inputs: list
    pre: list
    post: list
    argmax: list

    def __len__(self):
        return len(self.post)


def clipped_relu(x):
    return np.clip(x, 0.0, 1.0)


def forward(net: Network, x: np.ndarray) -> tuple[np.ndarray, ForwardTrace]:
    """Runs the network; returns the final score vector and the full trace."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.shape != net.input_shape:
        raise ShapeError(
            f"input: expected shape {net.input_shape}, got {x.shape}"
        )
    trace = ForwardTrace(inputs=[], pre=[], post=[], argmax=[])
    cur = x
    for i, layer in enumerate(net.layers):
        trace.inputs.append(cur)
        if isinstance(layer, MaxPool):
            kh, kw = layer.kernel
            sh, sw = layer.stride
            if cur.ndim != 3 or cur.shape[0] < kh or cur.shape[1] < kw:
                raise ShapeError(f"layer {i} ({layer.name}): bad input shape {cur.shape}")
            out, argmax = kernels.maxpool_forward(cur, kh, kw, sh, sw)
            trace.pre.append(out)
            trace.post.append(out)
            trace.argmax.append(argmax)
            cur = out
        elif isinstance(layer, Conv2D):
            kh, kw, cin, _ = layer.weights.shape
            if cur.ndim != 3 or cur.shape[2] != cin or cur.shape[0] < kh or cur.shape[1] < kw:
                raise ShapeError(f"layer {i} ({layer.name}): bad input shape {cur.shape}")
            pre = kernels.conv2d_forward(
                cur, layer.weights, layer.bias, layer.stride[0], layer.stride[1]
            )
            post = clipped_relu(pre)
            trace.pre.append(pre)
            trace.post.append(post)
            trace.argmax.append(None)
            cur = post
        elif isinstance(layer, Flatten):
            out = cur.reshape(-1)
            trace.pre.append(out)
            trace.post.append(out)
            trace.argmax.append(None)
            cur = out
        elif isinstance(layer, Dense):
            nin, _ = layer.weights.shape
            if cur.ndim != 1 or cur.shape[0] != nin:
                raise ShapeError(f"layer {i} ({layer.name}): bad input shape {cur.shape}")
            pre = cur @ layer.weights + layer.bias
            post = clipped_relu(pre)
            trace.pre.append(pre)
            trace.post.append(post)
            trace.argmax.append(None)
            cur = post
        else:
            raise ShapeError(f"layer {i}: unknown layer type {layer!r}")
    if not np.all(np.isfinite(cur)):
        raise ShapeError("non-finite values in network output")
    return cur, trace


def _relu_backward(grad, pre, rule):
    # Boundary convention (0, 1]: a unit at pre-activation exactly 0 is off
    # and blocks gradient, one saturated at exactly 1 is on and passes it.
    # This matches composing max(x, 0) (zero subgradient at 0) with
    # min(x, 1) (gradient routed to x wherever x <= 1), and it matters here:
    # the compiled models put every active unit exactly on the upper kink.
    if rule == STANDARD:
        return grad * ((pre > 0.0) & (pre <= 1.0))
    if rule == DECONV:
        return np.where(grad > 0.0, grad, 0.0)
    if rule == GUIDED:
        return np.where(grad > 0.0, grad, 0.0) * ((pre > 0.0) & (pre <= 1.0))
    raise ValueError(f"unknown relu rule {rule!r}")


def _backward(net: Network, trace: ForwardTrace, grad_out: np.ndarray,
              rule: str, down_to: int = 0) -> np.ndarray:
    """Backpropagates grad_out from the output down to the input of layer
    ``down_to`` (0 = network input). grad_out is w.r.t. the final
    post-activation."""
    grad = grad_out
    for i in range(len(net.layers) - 1, down_to - 1, -1):
        layer = net.layers[i]
        if isinstance(layer, (Conv2D, Dense)):
            grad = _relu_backward(grad, trace.pre[i], rule)
        if isinstance(layer, MaxPool):
            h, w, _ = trace.inputs[i].shape
            grad = kernels.maxpool_backward(
                np.ascontiguousarray(grad), trace.argmax[i], h, w
            )
        elif isinstance(layer, Conv2D):
            h, w, _ = trace.inputs[i].shape
            grad = kernels.conv2d_backward_input(
                np.ascontiguousarray(grad), layer.weights,
                layer.stride[0], layer.stride[1], h, w,
            )
        elif isinstance(layer, Flatten):
            grad = grad.reshape(trace.inputs[i].shape)
        elif isinstance(layer, Dense):
            grad = layer.weights @ grad
    return grad


def _output_seed(net: Network, class_index: int) -> np.ndarray:
    n_out = net.layers[-1].bias.shape[0]
    if not 0 <= class_index < n_out:
        raise ValueError(f"class index {class_index} out of range [0, {n_out})")
    seed = np.zeros(n_out, dtype=np.float64)
    seed[class_index] = 1.0
    return seed


def input_gradient(net: Network, x: np.ndarray, class_index: int,
                   rule: str = STANDARD,
                   trace: ForwardTrace | None = None) -> np.ndarray:
    """d(score of class_index)/d(input) under the selected ReLU rule."""
    if trace is None:
        _, trace = forward(net, x)
    return _backward(net, trace, _output_seed(net, class_index), rule)


def layer_gradient(net: Network, trace: ForwardTrace, class_index: int,
                   layer_index: int, rule: str = STANDARD) -> np.ndarray:
    """d(score of class_index)/d(post-activation of layer_index)."""
    return _backward(net, trace, _output_seed(net, class_index), rule,
                     down_to=layer_index + 1)
