"""Multilayer perceptrons over flat float64 parameter vectors.

Parameters for one network are a 1-D array laid out layer by layer as
``W_0 (in x out, row-major), b_0, W_1, b_1, ...``.  A stack of ``n`` networks
with the same :class:`MLPSpec` is a ``(n, P)`` array; every routine here
accepts either form and the ensemble form is evaluated member-by-member with
no cross-talk.

Second derivatives use forward-over-reverse: a first-order gradient routine
is re-run on :class:`~csirl.diffnet.dual.Dual` inputs, which gives the exact
directional derivative of that gradient.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import _pykernels
from .backend import kernels
from .dual import Dual, tangent

_ACT = {"relu": _pykernels.RELU, "tanh": _pykernels.TANH}


class NumericError(FloatingPointError):
    """A non-finite value showed up where a finite one is required."""


@dataclass(frozen=True)
class MLPSpec:
    input_dim: int
    hidden_dims: tuple[int, ...]
    output_dim: int
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.input_dim <= 0 or self.output_dim <= 0:
            raise ValueError("input_dim and output_dim must be positive")
        if not self.hidden_dims or min(self.hidden_dims) <= 0:
            raise ValueError("hidden_dims must be a non-empty list of positive ints")
        if self.activation not in _ACT:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_dims, self.output_dim)

    @property
    def n_params(self) -> int:
        s = self.sizes
        return sum((a + 1) * b for a, b in zip(s[:-1], s[1:]))

    @property
    def act_id(self) -> int:
        return _ACT[self.activation]

    def init(self, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
        """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases."""
        shape = () if n is None else (n,)
        chunks = []
        s = self.sizes
        for a, b in zip(s[:-1], s[1:]):
            bound = 1.0 / np.sqrt(a)
            chunks.append(rng.uniform(-bound, bound, size=shape + (a * b + b,)))
        return np.concatenate(chunks, axis=-1)

    def unpack(self, params: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        """Views ``(W, b)`` per layer of a single network."""
        params = np.asarray(params)
        check_params(self, params)
        out, off = [], 0
        s = self.sizes
        for a, b in zip(s[:-1], s[1:]):
            W = params[off:off + a * b].reshape(a, b)
            off += a * b
            out.append((W, params[off:off + b]))
            off += b
        return out

    def describe(self) -> str:
        return (f"{self.input_dim}:{','.join(map(str, self.hidden_dims))}:"
                f"{self.output_dim}:{self.activation}")

    @classmethod
    def parse(cls, text: str) -> "MLPSpec":
        i, h, o, act = text.strip().split(":")
        return cls(int(i), tuple(int(x) for x in h.split(",")), int(o), act)


def _arr(a):
    return a if isinstance(a, Dual) else np.asarray(a, dtype=np.float64)


def check_params(spec: MLPSpec, params) -> None:
    if params.shape[-1] != spec.n_params:
        raise ValueError(f"parameter vector has length {params.shape[-1]}, "
                         f"spec {spec.describe()} needs {spec.n_params}")


def _as_ensemble(spec, params, x):
    """Normalise to params (n, P) and x (n, B, in); return squeeze info."""
    params, x = _arr(params), _arr(x)
    check_params(spec, params)
    single_net = params.ndim == 1
    p2 = params[None, :] if single_net else params
    n = p2.shape[0]
    xd = x.ndim
    if x.shape[-1] != spec.input_dim:
        raise ValueError(f"input has trailing dim {x.shape[-1]}, expected {spec.input_dim}")
    if xd == 1:
        x3 = x[None, None, :]
    elif xd == 2:
        x3 = x[None, :, :]
    elif xd == 3:
        if single_net or x.shape[0] != n:
            raise ValueError("3-D input needs an ensemble with matching leading dim")
        x3 = x
    else:
        raise ValueError("input must be 1-, 2- or 3-D")
    if x3.shape[0] != n:
        x3 = np.broadcast_to(x3, (n,) + x3.shape[1:])
    return p2, x3, single_net, xd


def _squeeze(y, single_net, xd):
    if single_net:
        y = y[0]
        if xd == 1:
            y = y[0]
    elif xd == 1:
        y = y[:, 0]
    return y


def _kernels_for(*arrays):
    return _pykernels if any(isinstance(a, Dual) for a in arrays) else kernels


@dataclass
class Cache:
    acts: list
    single_net: bool
    xd: int


def forward_cache(spec: MLPSpec, params, x):
    """Forward pass keeping activations for :func:`backward`."""
    p2, x3, single_net, xd = _as_ensemble(spec, params, x)
    k = _kernels_for(p2, x3)
    if k is kernels and k is not _pykernels:
        p2 = np.ascontiguousarray(p2, dtype=np.float64)
        x3 = np.ascontiguousarray(x3, dtype=np.float64)
    acts = k.forward(p2, spec.sizes, spec.act_id, x3)
    return _squeeze(acts[-1], single_net, xd), Cache(acts, single_net, xd)


def mlp_forward(spec: MLPSpec, params, x):
    """Evaluate the network(s).  Output shape mirrors the inputs' batching."""
    return forward_cache(spec, params, x)[0]


def backward(spec: MLPSpec, params, cache: Cache, grad_out, input_grad: bool = False):
    """Reverse pass: gradient w.r.t. params (and inputs) given dLoss/dOutput.

    ``grad_out`` has the same shape as the forward output.  Returns
    ``(grad_params, grad_input)``; ``grad_input`` is ``None`` unless requested.
    """
    p2 = params[None, :] if cache.single_net else params
    g = grad_out
    if cache.single_net:
        g = g[None, None, :] if cache.xd == 1 else g[None]
    elif cache.xd == 1:
        g = g[:, None, :]
    k = _kernels_for(p2, g, *cache.acts)
    if k is not _pykernels:
        p2 = np.ascontiguousarray(p2)
        g = np.ascontiguousarray(g, dtype=np.float64)
    gp, gin = k.backward(p2, spec.sizes, spec.act_id, cache.acts, g, input_grad)
    if cache.single_net:
        gp = gp[0]
    if gin is not None:
        gin = _squeeze(gin, cache.single_net, cache.xd)
    return gp, gin


def require_finite(name: str, *arrays) -> None:
    for a in arrays:
        vals = a.primal if isinstance(a, Dual) else a
        if not np.all(np.isfinite(vals)):
            raise NumericError(f"non-finite values in {name}")


LossFn = Callable[[np.ndarray], tuple[float, np.ndarray]]


def backprop_grad(spec: MLPSpec, params, loss: LossFn, x):
    """Gradient of ``loss(output)`` w.r.t. ``params``.

    ``loss`` maps the network output (shape ``(B, out)`` for a batch) to
    ``(value, dvalue/doutput)``; averaging over the batch is the loss's job.
    """
    out, cache = forward_cache(spec, params, x)
    require_finite("forward output", out)
    value, g_out = loss(out)
    grad, _ = backward(spec, params, cache, np.asarray(g_out, dtype=np.float64)
                       if not isinstance(g_out, Dual) else g_out)
    require_finite("gradient", grad)
    return value, grad


def second_order_vjp(grad_b: Callable, params_a, params_b, v):
    """``v^T (d/da)(d/db) L`` as the derivative of ``grad_b`` along ``v`` in ``a``.

    ``grad_b(a, b)`` must return the gradient of the scalar loss w.r.t. ``b``
    using operations :class:`Dual` supports.  The result is aligned with
    ``params_b`` and is exact up to rounding.
    """
    params_a = np.asarray(params_a, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if v.shape != params_a.shape:
        raise ValueError(f"direction shape {v.shape} does not match params_a {params_a.shape}")
    g = grad_b(Dual(params_a, v), params_b)
    out = tangent(g)
    if np.shape(out) != np.shape(params_b):
        raise ValueError("grad_b must return an array aligned with params_b")
    out = np.array(out, dtype=np.float64)
    require_finite("mixed second derivative", out)
    return out


def sgd_step(params, grad, lr: float):
    """``params - lr * grad`` as a new array."""
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    if np.shape(params) != np.shape(grad):
        raise ValueError("params and grad are not aligned")
    return np.asarray(params) - lr * np.asarray(grad)


class Adam:
    """Adam state for one parameter array; :meth:`step` updates in place."""

    def __init__(self, params: np.ndarray, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros_like(params)
        self.v = np.zeros_like(params)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> None:
        require_finite("gradient", grad)
        self.t += 1
        kernels.adam(params, grad, self.m, self.v, self.lr, self.beta1,
                     self.beta2, self.eps, self.t)


def soft_update(target: np.ndarray, source: np.ndarray, tau: float) -> None:
    """In place: ``target <- (1 - tau) * target + tau * source``."""
    kernels.lerp(target, source, float(tau))


def fd_grad(f: Callable[[np.ndarray], float], x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function (test oracle helper)."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat, gf = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        fp = f(x)
        flat[i] = old - eps
        fm = f(x)
        flat[i] = old
        gf[i] = (fp - fm) / (2 * eps)
    return g


def concat_inputs(parts: Sequence):
    return np.concatenate(list(parts), axis=-1)
