"""Numba-jitted twin of the numpy kernel lane.

Same packed layout and semantics as `numpy_lane`; matmuls go through np.dot
(BLAS), everything elementwise is an explicit loop. Kernels are cached on
disk, so only the first process pays the compile cost.
"""

import numpy as np
from numba import njit

from .numpy_lane import (
    ACT_LINEAR,
    ACT_RELU,
    ACT_SIGMOID,
    ACT_TANH,
    OPT_ADAM,
    OPT_SGD,
)


@njit(cache=True, nogil=True)
def forward(params, in_sizes, out_sizes, acts, w_offs, b_offs, x_t):
    a = x_t
    for k in range(in_sizes.shape[0]):
        size = out_sizes[k] * in_sizes[k]
        W = params[w_offs[k]:w_offs[k] + size].reshape(out_sizes[k], in_sizes[k])
        b = params[b_offs[k]:b_offs[k] + out_sizes[k]]
        z = np.dot(W, a)
        act = acts[k]
        for i in range(z.shape[0]):
            bi = b[i]
            for j in range(z.shape[1]):
                val = z[i, j] + bi
                if act == ACT_RELU:
                    val = val if val > 0.0 else 0.0
                elif act == ACT_TANH:
                    val = np.tanh(val)
                elif act == ACT_SIGMOID:
                    val = 1.0 / (1.0 + np.exp(-val))
                z[i, j] = val
        a = z
    return a


@njit(cache=True, nogil=True)
def forward_collect(params, in_sizes, out_sizes, acts, w_offs, b_offs, u_offs, x_t):
    n = x_t.shape[1]
    buf = np.empty((u_offs[-1], n))
    a = x_t
    for k in range(in_sizes.shape[0]):
        size = out_sizes[k] * in_sizes[k]
        W = params[w_offs[k]:w_offs[k] + size].reshape(out_sizes[k], in_sizes[k])
        b = params[b_offs[k]:b_offs[k] + out_sizes[k]]
        z = np.dot(W, a)
        act = acts[k]
        for i in range(z.shape[0]):
            bi = b[i]
            for j in range(n):
                val = z[i, j] + bi
                if act == ACT_RELU:
                    val = val if val > 0.0 else 0.0
                elif act == ACT_TANH:
                    val = np.tanh(val)
                elif act == ACT_SIGMOID:
                    val = 1.0 / (1.0 + np.exp(-val))
                buf[u_offs[k] + i, j] = val
        a = buf[u_offs[k]:u_offs[k + 1]]
    return buf


@njit(cache=True, nogil=True)
def loss_and_backward(params, in_sizes, out_sizes, acts, w_offs, b_offs, u_offs,
                      x_t, y_t, buf, grads):
    L = in_sizes.shape[0]
    n = x_t.shape[1]
    m = out_sizes[L - 1]
    a_last = buf[u_offs[L - 1]:u_offs[L]]
    loss = 0.0
    delta = np.empty((m, n))
    scale = 2.0 / (n * m)
    act_last = acts[L - 1]
    for i in range(m):
        for j in range(n):
            d = a_last[i, j] - y_t[i, j]
            loss += d * d
            g = scale * d
            a = a_last[i, j]
            if act_last == ACT_RELU:
                g = g if a > 0.0 else 0.0
            elif act_last == ACT_TANH:
                g *= 1.0 - a * a
            elif act_last == ACT_SIGMOID:
                g *= a * (1.0 - a)
            delta[i, j] = g
    loss /= n * m
    for k in range(L - 1, -1, -1):
        size = out_sizes[k] * in_sizes[k]
        if k == 0:
            a_prev = x_t
        else:
            a_prev = buf[u_offs[k - 1]:u_offs[k]]
        dW = np.dot(delta, a_prev.T)
        flat = dW.ravel()
        base = w_offs[k]
        for p in range(size):
            grads[base + p] = flat[p]
        bbase = b_offs[k]
        for i in range(out_sizes[k]):
            s = 0.0
            for j in range(n):
                s += delta[i, j]
            grads[bbase + i] = s
        if k > 0:
            W = params[w_offs[k]:w_offs[k] + size].reshape(out_sizes[k], in_sizes[k])
            nd = np.dot(W.T, delta)
            act_prev = acts[k - 1]
            for i in range(nd.shape[0]):
                for j in range(n):
                    g = nd[i, j]
                    a = a_prev[i, j]
                    if act_prev == ACT_RELU:
                        g = g if a > 0.0 else 0.0
                    elif act_prev == ACT_TANH:
                        g *= 1.0 - a * a
                    elif act_prev == ACT_SIGMOID:
                        g *= a * (1.0 - a)
                    nd[i, j] = g
            delta = nd
    return loss


@njit(cache=True, nogil=True)
def batch_mse(params, in_sizes, out_sizes, acts, w_offs, b_offs, x_t, y_t):
    out = forward(params, in_sizes, out_sizes, acts, w_offs, b_offs, x_t)
    total = 0.0
    for i in range(out.shape[0]):
        for j in range(out.shape[1]):
            d = out[i, j] - y_t[i, j]
            total += d * d
    return total / (out.shape[0] * out.shape[1])


@njit(cache=True, nogil=True)
def fisher_diag(params, in_sizes, out_sizes, acts, w_offs, b_offs, u_offs, x_t, y_t):
    n = x_t.shape[1]
    P = params.shape[0]
    fisher = np.zeros(P)
    grads = np.empty(P)
    for s in range(n):
        xs = x_t[:, s:s + 1].copy()
        ys = y_t[:, s:s + 1].copy()
        buf = forward_collect(params, in_sizes, out_sizes, acts, w_offs, b_offs, u_offs, xs)
        loss_and_backward(params, in_sizes, out_sizes, acts, w_offs, b_offs, u_offs,
                          xs, ys, buf, grads)
        for p in range(P):
            fisher[p] += grads[p] * grads[p]
    for p in range(P):
        fisher[p] /= n
    return fisher


@njit(cache=True, nogil=True)
def train_loop(params, in_sizes, out_sizes, acts, w_offs, b_offs, u_offs,
               x_t, y_t, order, batch_size, opt_kind, lr, beta1, beta2, eps,
               fisher, anchor, lam):
    P = params.shape[0]
    epochs = order.shape[0]
    n = order.shape[1]
    d = x_t.shape[0]
    m_out = y_t.shape[0]
    losses = np.zeros(epochs)
    grads = np.empty(P)
    m = np.zeros(P)
    v = np.zeros(P)
    t = 0
    for e in range(epochs):
        total = 0.0
        nb = 0
        start = 0
        while start < n:
            end = min(start + batch_size, n)
            bs = end - start
            xb = np.empty((d, bs))
            yb = np.empty((m_out, bs))
            for j in range(bs):
                col = order[e, start + j]
                for i in range(d):
                    xb[i, j] = x_t[i, col]
                for i in range(m_out):
                    yb[i, j] = y_t[i, col]
            buf = forward_collect(params, in_sizes, out_sizes, acts, w_offs, b_offs,
                                  u_offs, xb)
            loss = loss_and_backward(params, in_sizes, out_sizes, acts, w_offs, b_offs,
                                     u_offs, xb, yb, buf, grads)
            if lam > 0.0:
                pen = 0.0
                for p in range(P):
                    disp = params[p] - anchor[p]
                    pen += fisher[p] * disp * disp
                    grads[p] += lam * fisher[p] * disp
                loss += 0.5 * lam * pen
            if not np.isfinite(loss):
                return losses, e
            t += 1
            if opt_kind == OPT_ADAM:
                bc1 = 1.0 - beta1 ** t
                bc2 = 1.0 - beta2 ** t
                for p in range(P):
                    g = grads[p]
                    m[p] = beta1 * m[p] + (1.0 - beta1) * g
                    v[p] = beta2 * v[p] + (1.0 - beta2) * g * g
                    params[p] -= lr * (m[p] / bc1) / (np.sqrt(v[p] / bc2) + eps)
            else:
                for p in range(P):
                    params[p] -= lr * grads[p]
            total += loss
            nb += 1
            start = end
        losses[e] = total / nb
    return losses, -1
