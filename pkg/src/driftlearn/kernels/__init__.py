"""Kernel lane selection.

The numba lane is the default; set DRIFTLEARN_DISABLE_NUMBA=1 to force the
pure-numpy fallback (or it kicks in automatically when numba cannot import).
Both lanes expose the same functions over the same packed-parameter layout;
`benchmarks/bench_kernels.py` compares them head to head.
"""

import os
import warnings

from . import numpy_lane
from .numpy_lane import (
    ACT_LINEAR,
    ACT_RELU,
    ACT_SIGMOID,
    ACT_TANH,
    OPT_ADAM,
    OPT_SGD,
)


def _numba_disabled() -> bool:
    return os.environ.get("DRIFTLEARN_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")


if _numba_disabled():
    BACKEND = "numpy"
    _impl = numpy_lane
else:
    try:
        from . import numba_lane as _impl
        BACKEND = "numba"
    except ImportError:
        warnings.warn("numba unavailable, falling back to the pure-numpy kernel lane")
        BACKEND = "numpy"
        _impl = numpy_lane

forward = _impl.forward
forward_collect = _impl.forward_collect
loss_and_backward = _impl.loss_and_backward
batch_mse = _impl.batch_mse
fisher_diag = _impl.fisher_diag
train_loop = _impl.train_loop


def warmup() -> None:
    """Trigger JIT compilation of every kernel on a tiny throwaway net."""
    import numpy as np

    in_sizes = np.array([2, 3], dtype=np.int64)
    out_sizes = np.array([3, 1], dtype=np.int64)
    acts = np.array([ACT_TANH, ACT_LINEAR], dtype=np.int64)
    w_offs = np.array([0, 9], dtype=np.int64)
    b_offs = np.array([6, 12], dtype=np.int64)
    u_offs = np.array([0, 3, 4], dtype=np.int64)
    params = np.linspace(-0.5, 0.5, 13)
    x = np.ascontiguousarray(np.random.default_rng(0).random((2, 4)))
    y = np.ascontiguousarray(np.random.default_rng(1).random((1, 4)))
    grads = np.empty(13)
    buf = forward_collect(params, in_sizes, out_sizes, acts, w_offs, b_offs, u_offs, x)
    forward(params, in_sizes, out_sizes, acts, w_offs, b_offs, x)
    loss_and_backward(params, in_sizes, out_sizes, acts, w_offs, b_offs, u_offs, x, y, buf, grads)
    batch_mse(params, in_sizes, out_sizes, acts, w_offs, b_offs, x, y)
    fisher_diag(params, in_sizes, out_sizes, acts, w_offs, b_offs, u_offs, x, y)
    order = np.tile(np.arange(4, dtype=np.int64), (2, 1))
    train_loop(params.copy(), in_sizes, out_sizes, acts, w_offs, b_offs, u_offs,
               x, y, order, 2, OPT_ADAM, 1e-3, 0.9, 0.999, 1e-8,
               np.zeros(13), np.zeros(13), 0.0)
