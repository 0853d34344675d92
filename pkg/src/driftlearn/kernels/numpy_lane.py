"""Pure-numpy training kernels, the fallback lane when numba is unavailable.

Both lanes share one packed layout: a network is a single float64 vector
holding, per layer, the weight matrix (row-major, shape out x in) followed by
the bias vector. Batches travel column-wise (features x samples) so per-layer
slices stay contiguous for the numba lane. Metadata arrays describe the
layers:

    in_sizes, out_sizes  -- int64, one entry per layer
    acts                 -- activation codes per layer (ACT_* below)
    w_offs, b_offs       -- offsets of each layer's weights/biases in params
    u_offs               -- cumulative output-unit offsets, length L+1
"""

import numpy as np

ACT_LINEAR = 0
ACT_RELU = 1
ACT_TANH = 2
ACT_SIGMOID = 3

OPT_SGD = 0
OPT_ADAM = 1


def _activate(z, act):
    if act == ACT_RELU:
        return np.maximum(z, 0.0)
    if act == ACT_TANH:
        return np.tanh(z)
    if act == ACT_SIGMOID:
        return 1.0 / (1.0 + np.exp(-z))
    return z


def _act_deriv(a, act):
    """Derivative of the activation expressed through its own output."""
    if act == ACT_RELU:
        return (a > 0.0).astype(np.float64)
    if act == ACT_TANH:
        return 1.0 - a * a
    if act == ACT_SIGMOID:
        return a * (1.0 - a)
    return np.ones_like(a)


def forward(params, in_sizes, out_sizes, acts, w_offs, b_offs, x_t):
    """Run the packed net on a column-wise batch; returns the last layer."""
    a = x_t
    for k in range(in_sizes.shape[0]):
        size = out_sizes[k] * in_sizes[k]
        W = params[w_offs[k]:w_offs[k] + size].reshape(out_sizes[k], in_sizes[k])
        b = params[b_offs[k]:b_offs[k] + out_sizes[k]]
        a = _activate(np.dot(W, a) + b[:, None], acts[k])
    return a


def forward_collect(params, in_sizes, out_sizes, acts, w_offs, b_offs, u_offs, x_t):
    """Forward pass that stores every layer's activations in one buffer."""
    n = x_t.shape[1]
    buf = np.empty((u_offs[-1], n))
    a = x_t
    for k in range(in_sizes.shape[0]):
        size = out_sizes[k] * in_sizes[k]
        W = params[w_offs[k]:w_offs[k] + size].reshape(out_sizes[k], in_sizes[k])
        b = params[b_offs[k]:b_offs[k] + out_sizes[k]]
        a = _activate(np.dot(W, a) + b[:, None], acts[k])
        buf[u_offs[k]:u_offs[k + 1]] = a
    return buf


def loss_and_backward(params, in_sizes, out_sizes, acts, w_offs, b_offs, u_offs,
                      x_t, y_t, buf, grads):
    """Batch MSE (mean over samples and output dims) and its gradient.

    Writes the flat gradient into `grads` and returns the loss value.
    """
    L = in_sizes.shape[0]
    n = x_t.shape[1]
    m = out_sizes[L - 1]
    a_last = buf[u_offs[L - 1]:u_offs[L]]
    diff = a_last - y_t
    loss = np.mean(diff * diff)
    delta = (2.0 / (n * m)) * diff * _act_deriv(a_last, acts[L - 1])
    for k in range(L - 1, -1, -1):
        size = out_sizes[k] * in_sizes[k]
        a_prev = x_t if k == 0 else buf[u_offs[k - 1]:u_offs[k]]
        grads[w_offs[k]:w_offs[k] + size] = np.dot(delta, a_prev.T).ravel()
        grads[b_offs[k]:b_offs[k] + out_sizes[k]] = delta.sum(axis=1)
        if k > 0:
            W = params[w_offs[k]:w_offs[k] + size].reshape(out_sizes[k], in_sizes[k])
            delta = np.dot(W.T, delta) * _act_deriv(a_prev, acts[k - 1])
    return loss


def batch_mse(params, in_sizes, out_sizes, acts, w_offs, b_offs, x_t, y_t):
    out = forward(params, in_sizes, out_sizes, acts, w_offs, b_offs, x_t)
    diff = out - y_t
    return np.mean(diff * diff)


def fisher_diag(params, in_sizes, out_sizes, acts, w_offs, b_offs, u_offs, x_t, y_t):
    """Diagonal empirical Fisher: mean of squared per-sample MSE gradients."""
    n = x_t.shape[1]
    fisher = np.zeros(params.shape[0])
    grads = np.empty(params.shape[0])
    for s in range(n):
        xs = np.ascontiguousarray(x_t[:, s:s + 1])
        ys = np.ascontiguousarray(y_t[:, s:s + 1])
        buf = forward_collect(params, in_sizes, out_sizes, acts, w_offs, b_offs, u_offs, xs)
        loss_and_backward(params, in_sizes, out_sizes, acts, w_offs, b_offs, u_offs,
                          xs, ys, buf, grads)
        fisher += grads * grads
    fisher /= n
    return fisher


def train_loop(params, in_sizes, out_sizes, acts, w_offs, b_offs, u_offs,
               x_t, y_t, order, batch_size, opt_kind, lr, beta1, beta2, eps,
               fisher, anchor, lam):
    """Mini-batch training with an optional quadratic anchor penalty.

    `order[e]` is the sample visit order for epoch e; batches are consecutive
    slices of it. Updates `params` in place. Returns (per-epoch mean training
    losses, index of the first epoch with a non-finite loss or -1).
    """
    P = params.shape[0]
    epochs = order.shape[0]
    n = order.shape[1]
    losses = np.zeros(epochs)
    grads = np.empty(P)
    m = np.zeros(P)
    v = np.zeros(P)
    t = 0
    for e in range(epochs):
        total = 0.0
        nb = 0
        for start in range(0, n, batch_size):
            idx = order[e, start:start + batch_size]
            xb = x_t[:, idx]
            yb = y_t[:, idx]
            buf = forward_collect(params, in_sizes, out_sizes, acts, w_offs, b_offs,
                                  u_offs, xb)
            loss = loss_and_backward(params, in_sizes, out_sizes, acts, w_offs, b_offs,
                                     u_offs, xb, yb, buf, grads)
            if lam > 0.0:
                disp = params - anchor
                loss += 0.5 * lam * np.sum(fisher * disp * disp)
                grads += lam * fisher * disp
            if not np.isfinite(loss):
                return losses, e
            t += 1
            if opt_kind == OPT_ADAM:
                m[:] = beta1 * m + (1.0 - beta1) * grads
                v[:] = beta2 * v + (1.0 - beta2) * grads * grads
                bc1 = 1.0 - beta1 ** t
                bc2 = 1.0 - beta2 ** t
                params -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
            else:
                params -= lr * grads
            total += loss
            nb += 1
        losses[e] = total / nb
    return losses, -1
