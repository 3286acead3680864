# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled network kernels (same contract as ``_pykernels``).

Matrix products go through BLAS ``dgemm`` using the row-major/column-major
transpose identity; bias, activation and optimizer loops are fused here so a
full ensemble forward or backward pass is a single Python call.
"""
import numpy as np
from scipy.linalg.cython_blas cimport dgemm
from libc.math cimport sqrt, pow
from libc.string cimport memcpy

cdef enum:
    C_RELU = 0
    C_TANH = 1

RELU = C_RELU
TANH = C_TANH

NAME = "cython"


cdef inline void _gemm_nn_acc(int M, int N, int K, double* A, double* B, double* C) noexcept nogil:
    # row-major C[M,N] += A[M,K] @ B[K,N]
    cdef char tn = b'N'
    cdef double one = 1.0
    dgemm(&tn, &tn, &N, &M, &K, &one, B, &N, A, &K, &one, C, &N)


cdef inline void _gemm_tn(int M, int N, int K, double* A, double* B, double* C) noexcept nogil:
    # row-major C[M,N] = A[K,M]^T @ B[K,N]
    cdef char tn = b'N'
    cdef char tt = b'T'
    cdef double one = 1.0, zero = 0.0
    dgemm(&tn, &tt, &N, &M, &K, &one, B, &N, A, &M, &zero, C, &N)


cdef inline void _gemm_nt(int M, int N, int K, double* A, double* B, double* C) noexcept nogil:
    # row-major C[M,N] = A[M,K] @ B[N,K]^T
    cdef char tn = b'N'
    cdef char tt = b'T'
    cdef double one = 1.0, zero = 0.0
    dgemm(&tt, &tn, &N, &M, &K, &one, B, &K, A, &K, &zero, C, &N)


def forward(params, sizes, int act, x):
    cdef double[:, ::1] P = np.ascontiguousarray(params, dtype=np.float64)
    cdef int n = P.shape[0]
    cdef int nl = len(sizes) - 1
    x = np.ascontiguousarray(x, dtype=np.float64)
    cdef int B = x.shape[1]
    acts = [x]
    cdef double[:, :, ::1] h_prev = x
    cdef double[:, :, ::1] z
    cdef int l, m, i, j, d_in, d_out, off
    cdef double* w
    cdef double* bias
    cdef double* zp
    for l in range(nl):
        d_in = sizes[l]
        d_out = sizes[l + 1]
        off = 0
        for i in range(l):
            off += (sizes[i] + 1) * sizes[i + 1]
        out = np.empty((n, B, d_out))
        z = out
        with nogil:
            for m in range(n):
                w = &P[m, off]
                bias = &P[m, off + d_in * d_out]
                zp = &z[m, 0, 0]
                # seed every row with the bias and let dgemm accumulate into it
                for i in range(B):
                    memcpy(&zp[i * d_out], bias, d_out * sizeof(double))
                _gemm_nn_acc(B, d_out, d_in, &h_prev[m, 0, 0], w, zp)
                if l < nl - 1 and act == C_RELU:
                    for i in range(B * d_out):
                        zp[i] = zp[i] if zp[i] > 0.0 else 0.0
        if l < nl - 1 and act != C_RELU:
            np.tanh(out, out=out)
        acts.append(out)
        h_prev = z
    return acts


def backward(params, sizes, int act, acts, grad_out, bint need_input_grad=False):
    cdef double[:, ::1] P = np.ascontiguousarray(params, dtype=np.float64)
    cdef int n = P.shape[0]
    cdef int nl = len(sizes) - 1
    cdef int total = P.shape[1]
    grad = np.empty((n, total))
    cdef double[:, ::1] G = grad
    cdef double[:, :, ::1] delta = np.ascontiguousarray(grad_out, dtype=np.float64)
    cdef double[:, :, ::1] h
    cdef double[:, :, ::1] prev
    cdef int B = delta.shape[1]
    cdef int l, m, i, j, d_in, d_out, off
    cdef bint need_prev
    cdef double* gb
    cdef double* dp
    cdef double* hp
    cdef double* pp
    grad_in = None
    for l in range(nl - 1, -1, -1):
        d_in = sizes[l]
        d_out = sizes[l + 1]
        off = 0
        for i in range(l):
            off += (sizes[i] + 1) * sizes[i + 1]
        h = acts[l]
        need_prev = l > 0 or need_input_grad
        if need_prev:
            prev_arr = np.empty((n, B, d_in))
            prev = prev_arr
        with nogil:
            for m in range(n):
                dp = &delta[m, 0, 0]
                hp = &h[m, 0, 0]
                _gemm_tn(d_in, d_out, B, hp, dp, &G[m, off])
                gb = &G[m, off + d_in * d_out]
                for j in range(d_out):
                    gb[j] = 0.0
                for i in range(B):
                    for j in range(d_out):
                        gb[j] += dp[i * d_out + j]
                if need_prev:
                    pp = &prev[m, 0, 0]
                    _gemm_nt(B, d_in, d_out, dp, &P[m, off], pp)
                    if l > 0:
                        if act == C_RELU:
                            for i in range(B * d_in):
                                pp[i] = pp[i] if hp[i] > 0.0 else 0.0
                        else:
                            for i in range(B * d_in):
                                pp[i] *= 1.0 - hp[i] * hp[i]
        if need_prev:
            delta = prev
            if l == 0:
                grad_in = prev_arr
    return grad, grad_in


def adam(params, grad, m, v, double lr, double beta1, double beta2, double eps, long step):
    cdef double[::1] p = params.reshape(-1)
    cdef double[::1] g = np.ascontiguousarray(grad, dtype=np.float64).reshape(-1)
    cdef double[::1] mm = m.reshape(-1)
    cdef double[::1] vv = v.reshape(-1)
    cdef Py_ssize_t i, k = p.shape[0]
    cdef double c1 = 1.0 - pow(beta1, step)
    cdef double c2 = 1.0 - pow(beta2, step)
    cdef double gi
    with nogil:
        for i in range(k):
            gi = g[i]
            mm[i] = beta1 * mm[i] + (1.0 - beta1) * gi
            vv[i] = beta2 * vv[i] + (1.0 - beta2) * gi * gi
            p[i] -= lr * (mm[i] / c1) / (sqrt(vv[i] / c2) + eps)


def lerp(target, source, double tau):
    cdef double[::1] t = target.reshape(-1)
    cdef double[::1] s = np.ascontiguousarray(source, dtype=np.float64).reshape(-1)
    cdef Py_ssize_t i, k = t.shape[0]
    with nogil:
        for i in range(k):
            t[i] = (1.0 - tau) * t[i] + tau * s[i]
