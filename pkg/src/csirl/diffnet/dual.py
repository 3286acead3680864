"""Forward-mode dual arrays.

A :class:`Dual` carries a primal array and a tangent array of the same shape.
Running a numpy gradient routine on ``Dual(params, v)`` yields the directional
derivative of that gradient along ``v``, i.e. a forward-over-reverse mixed
partial.  Only the handful of operations used by the network code in this
package are supported; anything else raises ``TypeError`` instead of silently
dropping the tangent.
"""
from __future__ import annotations

import numpy as np


def primal(x):
    return x.primal if isinstance(x, Dual) else x


def tangent(x):
    """Tangent part of ``x``; zeros for plain arrays."""
    if isinstance(x, Dual):
        return x.tangent
    return np.zeros_like(np.asarray(x, dtype=np.float64))


def _split(x):
    if isinstance(x, Dual):
        return x.primal, x.tangent
    return x, None


class Dual:
    __slots__ = ("primal", "tangent")

    def __init__(self, primal, tangent=None):
        self.primal = np.asarray(primal, dtype=np.float64)
        if tangent is None:
            tangent = np.zeros_like(self.primal)
        self.tangent = np.broadcast_to(np.asarray(tangent, dtype=np.float64),
                                       self.primal.shape)

    # ---- array-like surface -------------------------------------------
    @property
    def shape(self):
        return self.primal.shape

    @property
    def ndim(self):
        return self.primal.ndim

    @property
    def size(self):
        return self.primal.size

    @property
    def T(self):
        return Dual(self.primal.T, self.tangent.T)

    def __len__(self):
        return len(self.primal)

    def __repr__(self):
        return f"Dual(primal={self.primal!r}, tangent={self.tangent!r})"

    def __getitem__(self, idx):
        return Dual(self.primal[idx], self.tangent[idx])

    def reshape(self, *shape):
        return Dual(self.primal.reshape(*shape), self.tangent.reshape(*shape))

    def swapaxes(self, a, b):
        return Dual(self.primal.swapaxes(a, b), self.tangent.swapaxes(a, b))

    def sum(self, axis=None, keepdims=False):
        return Dual(self.primal.sum(axis=axis, keepdims=keepdims),
                    self.tangent.sum(axis=axis, keepdims=keepdims))

    def mean(self, axis=None, keepdims=False):
        return Dual(self.primal.mean(axis=axis, keepdims=keepdims),
                    self.tangent.mean(axis=axis, keepdims=keepdims))

    # ---- arithmetic ------------------------------------------------------
    def __neg__(self):
        return Dual(-self.primal, -self.tangent)

    def __add__(self, other):
        p, t = _split(other)
        return Dual(self.primal + p, self.tangent if t is None else self.tangent + t)

    __radd__ = __add__

    def __sub__(self, other):
        p, t = _split(other)
        return Dual(self.primal - p, self.tangent if t is None else self.tangent - t)

    def __rsub__(self, other):
        return Dual(other - self.primal, -self.tangent)

    def __mul__(self, other):
        p, t = _split(other)
        tan = self.tangent * p
        if t is not None:
            tan = tan + self.primal * t
        return Dual(self.primal * p, tan)

    __rmul__ = __mul__

    def __truediv__(self, other):
        p, t = _split(other)
        tan = self.tangent / p
        if t is not None:
            tan = tan - self.primal * t / (p * p)
        return Dual(self.primal / p, tan)

    def __rtruediv__(self, other):
        p = self.primal
        return Dual(other / p, -other * self.tangent / (p * p))

    def __pow__(self, k):
        if isinstance(k, Dual):
            raise TypeError("Dual exponent not supported")
        return Dual(self.primal ** k, k * self.primal ** (k - 1) * self.tangent)

    def __matmul__(self, other):
        p, t = _split(other)
        tan = self.tangent @ p
        if t is not None:
            tan = tan + self.primal @ t
        return Dual(self.primal @ p, tan)

    def __rmatmul__(self, other):
        return Dual(other @ self.primal, other @ self.tangent)

    # comparisons act on the primal only
    def __gt__(self, other):
        return self.primal > primal(other)

    def __lt__(self, other):
        return self.primal < primal(other)

    def __ge__(self, other):
        return self.primal >= primal(other)

    def __le__(self, other):
        return self.primal <= primal(other)

    # ---- numpy protocol --------------------------------------------------
    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        if method != "__call__" or kwargs.get("out") is not None:
            return NotImplemented
        rule = _UFUNCS.get(ufunc)
        if rule is None:
            raise TypeError(f"ufunc {ufunc.__name__} not supported on Dual")
        return rule(*inputs)

    def __array_function__(self, func, types, args, kwargs):
        rule = _FUNCS.get(func)
        if rule is None:
            raise TypeError(f"{func.__name__} not supported on Dual")
        return rule(*args, **kwargs)


def _unary(f, df):
    def rule(x):
        p = x.primal
        return Dual(f(p), df(p) * x.tangent)
    return rule


def _tanh_rule(x):
    y = np.tanh(x.primal)
    return Dual(y, (1.0 - y * y) * x.tangent)


def _exp_rule(x):
    y = np.exp(x.primal)
    return Dual(y, y * x.tangent)


def _maximum_rule(a, b):
    pa, ta = _split(a)
    pb, tb = _split(b)
    pick_a = pa >= pb
    ta = 0.0 if ta is None else ta
    tb = 0.0 if tb is None else tb
    return Dual(np.maximum(pa, pb), np.where(pick_a, ta, tb))


def _binary(op):
    def rule(a, b):
        if isinstance(a, Dual):
            return op(a, b)
        return op(Dual(a), b)
    return rule


def _softplus(p):
    return np.logaddexp(0.0, p)


_UFUNCS = {
    np.add: _binary(lambda a, b: a + b),
    np.subtract: _binary(lambda a, b: a - b),
    np.multiply: _binary(lambda a, b: a * b),
    np.true_divide: _binary(lambda a, b: a / b),
    np.matmul: _binary(lambda a, b: a @ b),
    np.negative: lambda x: -x,
    np.tanh: _tanh_rule,
    np.exp: _exp_rule,
    np.log: _unary(np.log, lambda p: 1.0 / p),
    np.square: _unary(np.square, lambda p: 2.0 * p),
    np.sqrt: _unary(np.sqrt, lambda p: 0.5 / np.sqrt(p)),
    np.maximum: _maximum_rule,
    np.greater: lambda a, b: primal(a) > primal(b),
    np.less: lambda a, b: primal(a) < primal(b),
}


def _concatenate(arrays, axis=0):
    arrays = list(arrays)
    return Dual(np.concatenate([primal(a) for a in arrays], axis=axis),
                np.concatenate([tangent(a) if isinstance(a, Dual)
                                else np.zeros(np.shape(a)) for a in arrays], axis=axis))


def _where(cond, a, b):
    cond = primal(cond)
    pa, ta = _split(a)
    pb, tb = _split(b)
    ta = 0.0 if ta is None else ta
    tb = 0.0 if tb is None else tb
    return Dual(np.where(cond, pa, pb), np.where(cond, ta, tb))


def _clip(x, lo, hi):
    p = x.primal
    inside = (p >= lo) & (p <= hi)
    return Dual(np.clip(p, lo, hi), np.where(inside, x.tangent, 0.0))


def _logaddexp0(x):
    # softplus(x) = log(1 + e^x); d/dx = sigmoid(x)
    p = x.primal
    return Dual(_softplus(p), x.tangent / (1.0 + np.exp(-p)))


_FUNCS = {
    np.sum: lambda x, axis=None, keepdims=False: x.sum(axis=axis, keepdims=keepdims),
    np.mean: lambda x, axis=None, keepdims=False: x.mean(axis=axis, keepdims=keepdims),
    np.concatenate: _concatenate,
    np.where: _where,
    np.clip: _clip,
    np.reshape: lambda x, shape: x.reshape(shape),
    np.broadcast_to: lambda x, shape: Dual(np.broadcast_to(x.primal, shape),
                                           np.broadcast_to(x.tangent, shape)),
    np.swapaxes: lambda x, a, b: x.swapaxes(a, b),
    np.ascontiguousarray: lambda x: x,
}


def softplus(x):
    """log(1 + exp(x)), Dual-aware."""
    if isinstance(x, Dual):
        return _logaddexp0(x)
    return _softplus(x)
