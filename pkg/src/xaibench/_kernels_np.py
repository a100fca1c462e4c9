"""Pure-numpy reference kernels for the conv/pool hot loops.

Mirrors the compiled extension in ``_kernels_c``; the dispatcher in
``kernels`` picks whichever is available. All arrays are float64,
layout (h, w, c).
"""

import numpy as np

BACKEND = "numpy"


def conv2d_forward(x, weights, bias, sh, sw):
    """Valid-padding convolution. weights: (kh, kw, cin, cout)."""
    h, w, _ = x.shape
    kh, kw, _, cout = weights.shape
    oh = (h - kh) // sh + 1
    ow = (w - kw) // sw + 1
    # gather kh*kw*cin patches, then one matmul
    patches = np.empty((oh, ow, kh * kw * x.shape[2]), dtype=np.float64)
    for i in range(oh):
        for j in range(ow):
            patches[i, j] = x[i * sh : i * sh + kh, j * sw : j * sw + kw, :].ravel()
    out = patches.reshape(oh * ow, -1) @ weights.reshape(-1, cout)
    return out.reshape(oh, ow, cout) + bias


def conv2d_backward_input(grad, weights, sh, sw, h, w):
    """Gradient of a valid-padding convolution w.r.t. its input."""
    oh, ow, cout = grad.shape
    kh, kw, cin, _ = weights.shape
    dx = np.zeros((h, w, cin), dtype=np.float64)
    wk = weights.reshape(-1, cout)
    contrib = grad.reshape(oh * ow, cout) @ wk.T  # (oh*ow, kh*kw*cin)
    contrib = contrib.reshape(oh, ow, kh, kw, cin)
    for i in range(oh):
        for j in range(ow):
            dx[i * sh : i * sh + kh, j * sw : j * sw + kw, :] += contrib[i, j]
    return dx


def maxpool_forward(x, kh, kw, sh, sw):
    """Max pooling; returns (out, argmax) with argmax a flat (y*w + x) index.

    Ties break to the first position in row-major scan order.
    """
    h, w, c = x.shape
    oh = (h - kh) // sh + 1
    ow = (w - kw) // sw + 1
    out = np.empty((oh, ow, c), dtype=np.float64)
    argmax = np.empty((oh, ow, c), dtype=np.int64)
    for i in range(oh):
        for j in range(ow):
            window = x[i * sh : i * sh + kh, j * sw : j * sw + kw, :]
            flat = window.reshape(kh * kw, c)
            idx = np.argmax(flat, axis=0)  # first max in row-major order
            out[i, j] = flat[idx, np.arange(c)]
            ky, kx = np.divmod(idx, kw)
            argmax[i, j] = (i * sh + ky) * w + (j * sw + kx)
    return out, argmax


def maxpool_backward(grad, argmax, h, w):
    """Routes each output gradient to the recorded argmax position."""
    oh, ow, c = grad.shape
    dx = np.zeros((h * w, c), dtype=np.float64)
    flat_idx = argmax.reshape(-1, c)
    flat_grad = grad.reshape(-1, c)
    for ch in range(c):
        np.add.at(dx[:, ch], flat_idx[:, ch], flat_grad[:, ch])
    return dx.reshape(h, w, c)
