"""Pure-numpy network kernels.

Reference implementation of the hot kernels, and the fallback when the
compiled extension is unavailable.  All functions operate on ensembles:
``params`` has shape ``(n, P)`` and activations ``(n, B, d)``.  Hidden
activations are cached post-nonlinearity, which is enough to recover the
derivative of both relu and tanh.

The forward/backward pair is written with plain numpy operations and no
in-place updates, so it also runs on :class:`~csirl.diffnet.dual.Dual`
arrays (used for mixed second derivatives).
"""
import numpy as np

RELU = 0
TANH = 1

NAME = "python"


def _layers(params, sizes):
    off = 0
    n = params.shape[0]
    for d_in, d_out in zip(sizes[:-1], sizes[1:]):
        W = params[:, off:off + d_in * d_out].reshape(n, d_in, d_out)
        off += d_in * d_out
        b = params[:, off:off + d_out]
        off += d_out
        yield W, b


def _activate(z, act):
    if act == RELU:
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _act_deriv(h, act):
    if act == RELU:
        return h > 0.0
    return 1.0 - h * h


def forward(params, sizes, act, x):
    acts = [x]
    h = x
    layers = list(_layers(params, sizes))
    for i, (W, b) in enumerate(layers):
        z = h @ W + b[:, None, :]
        h = _activate(z, act) if i < len(layers) - 1 else z
        acts.append(h)
    return acts


def backward(params, sizes, act, acts, grad_out, need_input_grad=False):
    layers = list(_layers(params, sizes))
    pieces = []
    delta = grad_out
    grad_in = None
    for i in range(len(layers) - 1, -1, -1):
        W, _ = layers[i]
        h_prev = acts[i]
        gW = h_prev.swapaxes(1, 2) @ delta
        gb = delta.sum(axis=1)
        n = gW.shape[0]
        pieces.append(gb)
        pieces.append(gW.reshape(n, -1))
        if i > 0 or need_input_grad:
            delta = delta @ W.swapaxes(1, 2)
            if i > 0:
                delta = delta * _act_deriv(h_prev, act)
            else:
                grad_in = delta
    pieces.reverse()
    return np.concatenate(pieces, axis=1), grad_in


def adam(params, grad, m, v, lr, beta1, beta2, eps, step):
    """In-place Adam update with bias correction (``step`` counts from 1)."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    c1 = 1.0 - beta1 ** step
    c2 = 1.0 - beta2 ** step
    params -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def lerp(target, source, tau):
    """In place: target <- (1 - tau) * target + tau * source."""
    target *= 1.0 - tau
    target += tau * source
