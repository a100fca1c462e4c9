"""Reference implementations of twelve attribution methods over the
compiled models, under a uniform interface.

2D methods return (h, w, 1) maps, 3D methods (h, w, 3) pixel-channel
maps. Sampled methods (the SmoothGrad family, RISE) own their RNG and
are deterministic under a fixed config seed.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from xaibench import gt
from xaibench.network import (DECONV, GUIDED, STANDARD, Network, forward,
                              input_gradient, layer_gradient)


class MethodError(ValueError):
    pass


@dataclass(frozen=True)
class MethodConfig:
    ig_steps: int = 64
    ig_baseline: np.ndarray | None = None  # defaults to the zero image
    sg_samples: int = 25
    sg_sigma: float = 0.15  # fraction of the input value range [0, 1]
    occlusion_patch: tuple[int, int] = (4, 4)
    occlusion_stride: tuple[int, int] = (2, 2)
    occlusion_fill: float = 0.0
    rise_masks: int = 2000
    rise_cell: int = 6
    rise_keep_prob: float = 0.5
    rng_seed: int = 0

    def validate(self):
        if min(self.ig_steps, self.sg_samples, self.rise_masks, self.rise_cell) < 1:
            raise MethodError("counts must be >= 1")
        if not 0.0 < self.rise_keep_prob < 1.0:
            raise MethodError("rise_keep_prob must lie in (0, 1)")


@dataclass(frozen=True)
class Explanation:
    values: np.ndarray  # normalized, (h, w, 1) or (h, w, 3)
    raw: np.ndarray  # pre-normalization output
    method: str
    dims: str  # "2D" | "3D"
    elapsed_ms: float


def _score(net: Network, x, class_index: int) -> float:
    out, _ = forward(net, x)
    return float(out[class_index])


def _saliency(net, x, class_index, cfg):
    grad = input_gradient(net, x, class_index, STANDARD)
    return np.max(np.abs(grad), axis=2, keepdims=True)


def _gradient_input(net, x, class_index, cfg):
    return input_gradient(net, x, class_index, STANDARD) * x


def _integrated_gradients(net, x, class_index, cfg):
    baseline = cfg.ig_baseline if cfg.ig_baseline is not None else np.zeros_like(x)
    steps = cfg.ig_steps
    total = np.zeros_like(x)
    # midpoint rule: on a piecewise-linear score the interior samples never
    # land exactly on a clip kink, which endpoint rules do at rational alphas
    for k in range(steps):
        alpha = (k + 0.5) / steps
        total += input_gradient(net, baseline + alpha * (x - baseline), class_index)
    return (x - baseline) * total / steps


def _noisy_grads(net, x, class_index, cfg):
    rng = np.random.default_rng(np.random.SeedSequence([cfg.rng_seed, 17]))
    sigma = cfg.sg_sigma * 1.0  # value range is [0, 1]
    for _ in range(cfg.sg_samples):
        noise = rng.normal(0.0, sigma, size=x.shape) if sigma > 0 else 0.0
        yield input_gradient(net, x + noise, class_index)


def _smoothgrad(net, x, class_index, cfg):
    acc = np.zeros_like(x)
    for g in _noisy_grads(net, x, class_index, cfg):
        acc += g
    return acc / cfg.sg_samples


def _squaregrad(net, x, class_index, cfg):
    acc = np.zeros_like(x)
    for g in _noisy_grads(net, x, class_index, cfg):
        acc += g * g
    return acc / cfg.sg_samples


def _vargrad(net, x, class_index, cfg):
    grads = list(_noisy_grads(net, x, class_index, cfg))
    return np.var(np.stack(grads), axis=0)


def _guided_backprop(net, x, class_index, cfg):
    return input_gradient(net, x, class_index, GUIDED)


def _deconvnet(net, x, class_index, cfg):
    return input_gradient(net, x, class_index, DECONV)


def _bilinear_upsample(src: np.ndarray, oh: int, ow: int) -> np.ndarray:
    """Half-pixel-centres bilinear resize of an (h, w) map."""
    h, w = src.shape
    ys = (np.arange(oh) + 0.5) * h / oh - 0.5
    xs = (np.arange(ow) + 0.5) * w / ow - 0.5
    y0 = np.clip(np.floor(ys).astype(int), 0, h - 1)
    x0 = np.clip(np.floor(xs).astype(int), 0, w - 1)
    y1 = np.clip(y0 + 1, 0, h - 1)
    x1 = np.clip(x0 + 1, 0, w - 1)
    wy = np.clip(ys - y0, 0.0, 1.0)[:, None]
    wx = np.clip(xs - x0, 0.0, 1.0)[None, :]
    a = src[np.ix_(y0, x0)]
    b = src[np.ix_(y0, x1)]
    c = src[np.ix_(y1, x0)]
    d = src[np.ix_(y1, x1)]
    return (a * (1 - wy) * (1 - wx) + b * (1 - wy) * wx
            + c * wy * (1 - wx) + d * wy * wx)


_CONV3_INDEX = 4  # last convolutional layer in the fixed stack


def _gradcam_core(net, x, class_index, plusplus: bool):
    _, trace = forward(net, x)
    acts = trace.post[_CONV3_INDEX]  # (3, 3, 5)
    grads = layer_gradient(net, trace, class_index, _CONV3_INDEX)
    if plusplus:
        g2 = grads * grads
        g3 = g2 * grads
        denom = 2.0 * g2 + np.sum(acts, axis=(0, 1), keepdims=True) * g3
        alpha = np.where(denom != 0.0, g2 / np.where(denom == 0.0, 1.0, denom), 0.0)
        weights = np.sum(alpha * np.maximum(grads, 0.0), axis=(0, 1))
    else:
        weights = np.mean(grads, axis=(0, 1))  # global average pooling
    cam = np.maximum(np.tensordot(acts, weights, axes=([2], [0])), 0.0)
    h, w, _ = x.shape
    return _bilinear_upsample(cam, h, w)[:, :, None]


def _gradcam(net, x, class_index, cfg):
    return _gradcam_core(net, x, class_index, plusplus=False)


def _gradcampp(net, x, class_index, cfg):
    return _gradcam_core(net, x, class_index, plusplus=True)


def _occlusion(net, x, class_index, cfg):
    ph, pw = cfg.occlusion_patch
    sh, sw = cfg.occlusion_stride
    h, w, _ = x.shape
    base = _score(net, x, class_index)
    total = np.zeros((h, w))
    count = np.zeros((h, w))
    for i in range(0, h - ph + 1, sh):
        for j in range(0, w - pw + 1, sw):
            patched = x.copy()
            patched[i:i + ph, j:j + pw, :] = cfg.occlusion_fill
            drop = base - _score(net, patched, class_index)
            total[i:i + ph, j:j + pw] += drop
            count[i:i + ph, j:j + pw] += 1.0
    out = np.where(count > 0, total / np.where(count == 0, 1.0, count), 0.0)
    return out[:, :, None]


def _rise(net, x, class_index, cfg):
    rng = np.random.default_rng(np.random.SeedSequence([cfg.rng_seed, 43]))
    h, w, _ = x.shape
    cell = cfg.rise_cell
    up_h = -(-h // cell) * cell  # pixels per mask cell, ceil
    cell_px = up_h // cell
    acc = np.zeros((h, w))
    weight_acc = np.zeros((h, w))
    for _ in range(cfg.rise_masks):
        grid = (rng.random((cell + 1, cell + 1)) < cfg.rise_keep_prob).astype(float)
        big = _bilinear_upsample(grid, (cell + 1) * cell_px, (cell + 1) * cell_px)
        oy = int(rng.integers(cell_px))
        ox = int(rng.integers(cell_px))
        mask = big[oy:oy + h, ox:ox + w]
        score = _score(net, x * mask[:, :, None], class_index)
        acc += score * mask
        weight_acc += mask
    sal = np.where(weight_acc > 0, acc / np.where(weight_acc == 0, 1.0, weight_acc), 0.0)
    # centre on the mean so the mask-coverage offset does not dominate
    return (sal - sal.mean())[:, :, None]


METHODS: dict[str, tuple[str, object]] = {
    "saliency": ("2D", _saliency),
    "gradient_input": ("3D", _gradient_input),
    "integrated_gradients": ("3D", _integrated_gradients),
    "smoothgrad": ("3D", _smoothgrad),
    "squaregrad": ("3D", _squaregrad),
    "vargrad": ("3D", _vargrad),
    "guided_backprop": ("3D", _guided_backprop),
    "deconvnet": ("3D", _deconvnet),
    "gradcam": ("2D", _gradcam),
    "gradcampp": ("2D", _gradcampp),
    "occlusion": ("2D", _occlusion),
    "rise": ("2D", _rise),
}


def attribute(method: str, net: Network, x: np.ndarray, class_index: int,
              config: MethodConfig | None = None) -> Explanation:
    """Runs one attribution method; elapsed covers only the computation."""
    if method not in METHODS:
        raise MethodError(f"unknown method {method!r}")
    cfg = config if config is not None else MethodConfig()
    cfg.validate()
    dims, fn = METHODS[method]
    start = time.perf_counter()
    raw = fn(net, x, class_index, cfg)
    elapsed_ms = (time.perf_counter() - start) * 1000.0
    if not np.all(np.isfinite(raw)):
        raise MethodError(f"{method}: non-finite attribution values")
    return Explanation(values=gt.normalize(raw), raw=raw, method=method,
                       dims=dims, elapsed_ms=elapsed_ms)
