"""Dense feed-forward substrate: seeded nets, an autoencoder, and a
multi-head regressor that can grow new heads without touching old ones.

Parameters live in one flat float64 vector per net (per layer: weights
row-major, then biases), which is exactly what the training kernels and the
snapshot file format consume.
"""

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .errors import (
    ArgumentError,
    ConflictError,
    DivergenceError,
    IncompatibleSnapshotError,
    ShapeError,
)

ACTIVATIONS = {
    "linear": kernels.ACT_LINEAR,
    "relu": kernels.ACT_RELU,
    "tanh": kernels.ACT_TANH,
    "sigmoid": kernels.ACT_SIGMOID,
}
_ACT_NAMES = {v: k for k, v in ACTIVATIONS.items()}


@dataclass(frozen=True)
class LayerSpec:
    in_size: int
    out_size: int
    activation: str = "tanh"

    def __post_init__(self):
        if self.in_size < 1 or self.out_size < 1:
            raise ShapeError(f"layer sizes must be positive, got {self.in_size}x{self.out_size}")
        if self.activation not in ACTIVATIONS:
            raise ArgumentError(f"unknown activation {self.activation!r}")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "epochs", int(self.epochs))
        object.__setattr__(self, "batch_size", int(self.batch_size))
        object.__setattr__(self, "learning_rate", float(self.learning_rate))
        object.__setattr__(self, "seed", int(self.seed))
        if self.epochs < 0:
            raise ArgumentError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ArgumentError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ArgumentError("learning_rate must be > 0")
        if self.optimizer not in ("sgd", "adam"):
            raise ArgumentError(f"unknown optimizer {self.optimizer!r}")

    @property
    def opt_code(self) -> int:
        return kernels.OPT_ADAM if self.optimizer == "adam" else kernels.OPT_SGD


@dataclass
class TrainReport:
    final_loss: float
    elapsed_seconds: float
    epoch_losses: np.ndarray


class _Packed:
    """Metadata arrays describing a packed layer stack for the kernels."""

    __slots__ = ("in_sizes", "out_sizes", "acts", "w_offs", "b_offs", "u_offs", "n_params")

    def __init__(self, specs: Sequence[LayerSpec]):
        L = len(specs)
        self.in_sizes = np.array([s.in_size for s in specs], dtype=np.int64)
        self.out_sizes = np.array([s.out_size for s in specs], dtype=np.int64)
        self.acts = np.array([ACTIVATIONS[s.activation] for s in specs], dtype=np.int64)
        self.w_offs = np.zeros(L, dtype=np.int64)
        self.b_offs = np.zeros(L, dtype=np.int64)
        off = 0
        for k, s in enumerate(specs):
            self.w_offs[k] = off
            off += s.in_size * s.out_size
            self.b_offs[k] = off
            off += s.out_size
        self.n_params = off
        self.u_offs = np.zeros(L + 1, dtype=np.int64)
        np.cumsum(self.out_sizes, out=self.u_offs[1:])


def _as_batch(x, width: int, what: str = "input") -> np.ndarray:
    """Validate and convert a sample or row-major batch to column-wise layout."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != width:
        raise ShapeError(f"{what} width {arr.shape[-1] if arr.ndim else '?'} does not match expected {width}")
    return np.ascontiguousarray(arr.T)


class DenseNet:
    """A stack of dense layers stored as one flat parameter vector."""

    def __init__(self, layers: Sequence[LayerSpec], seed: int = 0,
                 zero_last_layer: bool = False):
        layers = list(layers)
        if not layers:
            raise ShapeError("a net needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if prev.out_size != nxt.in_size:
                raise ShapeError(
                    f"layer widths do not chain: {prev.out_size} -> {nxt.in_size}")
        self.layer_specs = tuple(layers)
        self.seed = int(seed)
        self.meta = _Packed(layers)
        self.params = np.empty(self.meta.n_params, dtype=np.float64)
        rng = np.random.default_rng(self.seed)
        for k, spec in enumerate(layers):
            last = k == len(layers) - 1
            bound = 1.0 / np.sqrt(spec.in_size)
            w = rng.uniform(-bound, bound, size=(spec.out_size, spec.in_size))
            b = rng.uniform(-bound, bound, size=spec.out_size)
            if zero_last_layer and last:
                w[:] = 0.0
                b[:] = 0.0
            self.weights(k)[...] = w
            self.biases(k)[...] = b

    @property
    def in_size(self) -> int:
        return int(self.meta.in_sizes[0])

    @property
    def out_size(self) -> int:
        return int(self.meta.out_sizes[-1])

    @property
    def n_params(self) -> int:
        return self.meta.n_params

    def weights(self, k: int) -> np.ndarray:
        m = self.meta
        size = int(m.out_sizes[k] * m.in_sizes[k])
        return self.params[m.w_offs[k]:m.w_offs[k] + size].reshape(
            int(m.out_sizes[k]), int(m.in_sizes[k]))

    def biases(self, k: int) -> np.ndarray:
        m = self.meta
        return self.params[m.b_offs[k]:m.b_offs[k] + int(m.out_sizes[k])]

    def arch(self) -> tuple:
        return tuple((s.in_size, s.out_size, s.activation) for s in self.layer_specs)

    def forward(self, x) -> np.ndarray:
        """Apply the net to a single sample (1D) or a row-major batch (2D)."""
        single = np.asarray(x).ndim == 1
        x_t = _as_batch(x, self.in_size)
        m = self.meta
        out = kernels.forward(self.params, m.in_sizes, m.out_sizes, m.acts,
                              m.w_offs, m.b_offs, x_t)
        return out[:, 0] if single else np.ascontiguousarray(out.T)

    def copy(self) -> "DenseNet":
        dup = DenseNet(self.layer_specs, seed=self.seed)
        dup.params[:] = self.params
        return dup

    def __repr__(self):
        sizes = [self.in_size] + [s.out_size for s in self.layer_specs]
        return f"DenseNet({'x'.join(map(str, sizes))}, seed={self.seed})"


class NetChain:
    """Several nets composed head-to-tail and trained as one parameter vector."""

    def __init__(self, nets: Sequence[DenseNet]):
        nets = list(nets)
        if not nets:
            raise ShapeError("empty chain")
        for prev, nxt in zip(nets, nets[1:]):
            if prev.out_size != nxt.in_size:
                raise ShapeError(f"nets do not chain: {prev.out_size} -> {nxt.in_size}")
        self.nets = nets
        specs = [s for net in nets for s in net.layer_specs]
        self.meta = _Packed(specs)

    @property
    def in_size(self) -> int:
        return self.nets[0].in_size

    @property
    def out_size(self) -> int:
        return self.nets[-1].out_size

    def pack(self) -> np.ndarray:
        return np.concatenate([net.params for net in self.nets])

    def write_back(self, params: np.ndarray) -> None:
        off = 0
        for net in self.nets:
            net.params[:] = params[off:off + net.n_params]
            off += net.n_params

    def forward(self, x) -> np.ndarray:
        single = np.asarray(x).ndim == 1
        x_t = _as_batch(x, self.in_size)
        m = self.meta
        out = kernels.forward(self.pack(), m.in_sizes, m.out_sizes, m.acts,
                              m.w_offs, m.b_offs, x_t)
        return out[:, 0] if single else np.ascontiguousarray(out.T)


class Autoencoder:
    """Encoder/decoder pair used both for representation and input-drift scoring."""

    def __init__(self, encoder: DenseNet, decoder: DenseNet):
        if encoder.out_size != decoder.in_size:
            raise ShapeError("encoder output width must equal decoder input width")
        if decoder.out_size != encoder.in_size:
            raise ShapeError("decoder must reconstruct the encoder's input width")
        self.encoder = encoder
        self.decoder = decoder

    @property
    def latent_dim(self) -> int:
        return self.encoder.out_size

    @property
    def in_size(self) -> int:
        return self.encoder.in_size

    @classmethod
    def default(cls, n_features: int, latent_dim: int = 8, hidden: int = 16,
                seed: int = 0) -> "Autoencoder":
        enc = DenseNet([LayerSpec(n_features, hidden, "tanh"),
                        LayerSpec(hidden, latent_dim, "linear")], seed=seed)
        dec = DenseNet([LayerSpec(latent_dim, hidden, "tanh"),
                        LayerSpec(hidden, n_features, "linear")], seed=seed + 1)
        return cls(enc, dec)

    def encode(self, x) -> np.ndarray:
        return self.encoder.forward(x)

    def reconstruct(self, x) -> np.ndarray:
        return self.decoder.forward(self.encoder.forward(x))

    def chain(self) -> NetChain:
        return NetChain([self.encoder, self.decoder])


@dataclass(frozen=True)
class HeadSpec:
    """Shape of a prediction head; input width is always the latent size."""

    hidden: tuple = (16,)
    activation: str = "tanh"
    in_size: int | None = None  # set to assert a specific latent width

    def layers(self, latent_dim: int) -> list[LayerSpec]:
        if self.in_size is not None and self.in_size != latent_dim:
            raise ShapeError(
                f"head input width {self.in_size} does not match latent dim {latent_dim}")
        sizes = [latent_dim, *self.hidden, 1]
        out = []
        for i, (a, b) in enumerate(zip(sizes, sizes[1:])):
            act = "linear" if i == len(sizes) - 2 else self.activation
            out.append(LayerSpec(a, b, act))
        return out


class MultiHeadRegressor:
    """Shared autoencoder plus one scalar head per prediction target."""

    def __init__(self, shared: Autoencoder, heads: dict[str, DenseNet] | None = None):
        self.shared = shared
        self.heads: dict[str, DenseNet] = {}
        for name, net in (heads or {}).items():
            self._check_head(net)
            self.heads[name] = net

    @classmethod
    def default(cls, n_features: int, targets: Sequence[str], latent_dim: int = 8,
                hidden: int = 16, seed: int = 0) -> "MultiHeadRegressor":
        shared = Autoencoder.default(n_features, latent_dim, hidden, seed)
        reg = cls(shared)
        for i, t in enumerate(targets):
            reg.add_head(t, HeadSpec(hidden=(hidden,)), init="seeded_random",
                         seed=seed + 100 + i)
        return reg

    def _check_head(self, net: DenseNet) -> None:
        if net.in_size != self.shared.latent_dim:
            raise ShapeError(
                f"head input width {net.in_size} does not match latent dim "
                f"{self.shared.latent_dim}")
        if net.out_size != 1:
            raise ShapeError("heads emit exactly one output")

    def add_head(self, target_id: str, head_spec: HeadSpec | Sequence[LayerSpec] | None = None,
                 init: str = "seeded_random", seed: int = 0) -> DenseNet:
        """Register a new head. Never touches existing parameters."""
        if target_id in self.heads:
            raise ConflictError(f"head {target_id!r} already exists")
        if init not in ("seeded_random", "zero_output_layer"):
            raise ArgumentError(f"unknown head init {init!r}")
        if head_spec is None:
            head_spec = HeadSpec()
        if isinstance(head_spec, HeadSpec):
            layers = head_spec.layers(self.shared.latent_dim)
        else:
            layers = list(head_spec)
        net = DenseNet(layers, seed=seed, zero_last_layer=(init == "zero_output_layer"))
        self._check_head(net)
        self.heads[target_id] = net
        return net

    def predict(self, x) -> dict[str, float]:
        """Predictions for one sample, keyed by target id."""
        latent = self.shared.encode(np.asarray(x, dtype=np.float64))
        return {t: float(net.forward(latent)[0]) for t, net in self.heads.items()}

    def predict_batch(self, x) -> dict[str, np.ndarray]:
        latent = self.shared.encode(np.asarray(x, dtype=np.float64))
        return {t: net.forward(latent)[:, 0] for t, net in self.heads.items()}

    def nets(self) -> dict[str, DenseNet]:
        out = {"encoder": self.shared.encoder, "decoder": self.shared.decoder}
        for t, net in self.heads.items():
            out[f"head:{t}"] = net
        return out


# --- module-level operations -------------------------------------------------

def forward(net: DenseNet | NetChain, x) -> np.ndarray:
    return net.forward(x)


def _xy_arrays(model, x, y):
    x_t = _as_batch(x, model.in_size)
    y_t = _as_batch(y, model.out_size, what="target")
    if x_t.shape[1] != y_t.shape[1]:
        raise ShapeError(f"{x_t.shape[1]} inputs vs {y_t.shape[1]} targets")
    return x_t, y_t


def gradients(net: DenseNet, x, y) -> list[tuple[np.ndarray, np.ndarray]]:
    """Mean-squared-error gradients over a batch, as (dW, db) per layer."""
    flat = gradients_flat(net, x, y)
    m = net.meta
    out = []
    for k in range(len(net.layer_specs)):
        size = int(m.out_sizes[k] * m.in_sizes[k])
        dw = flat[m.w_offs[k]:m.w_offs[k] + size].reshape(
            int(m.out_sizes[k]), int(m.in_sizes[k])).copy()
        db = flat[m.b_offs[k]:m.b_offs[k] + int(m.out_sizes[k])].copy()
        out.append((dw, db))
    return out


def gradients_flat(model: DenseNet | NetChain, x, y) -> np.ndarray:
    x_t, y_t = _xy_arrays(model, x, y)
    if x_t.shape[1] == 0:
        raise ArgumentError("empty batch")
    m = model.meta
    params = model.params if isinstance(model, DenseNet) else model.pack()
    grads = np.empty(m.n_params)
    buf = kernels.forward_collect(params, m.in_sizes, m.out_sizes, m.acts,
                                  m.w_offs, m.b_offs, m.u_offs, x_t)
    kernels.loss_and_backward(params, m.in_sizes, m.out_sizes, m.acts,
                              m.w_offs, m.b_offs, m.u_offs, x_t, y_t, buf, grads)
    return grads


def mse(model: DenseNet | NetChain, x, y) -> float:
    x_t, y_t = _xy_arrays(model, x, y)
    m = model.meta
    params = model.params if isinstance(model, DenseNet) else model.pack()
    return float(kernels.batch_mse(params, m.in_sizes, m.out_sizes, m.acts,
                                   m.w_offs, m.b_offs, x_t, y_t))


def train(model: DenseNet | NetChain, x, y, config: TrainConfig,
          fisher: np.ndarray | None = None, anchor: np.ndarray | None = None,
          lam: float = 0.0) -> TrainReport:
    """Mini-batch training, in place, deterministic for a fixed seed.

    Pass `fisher`/`anchor`/`lam` to add the quadratic anchor penalty
    (see strategies.penalized_loss) to every batch loss.
    """
    x_arr = np.asarray(x, dtype=np.float64)
    n = 0 if x_arr.size == 0 else (1 if x_arr.ndim == 1 else x_arr.shape[0])
    t0 = time.perf_counter()
    if n == 0:
        if config.epochs > 0:
            raise ArgumentError("cannot train on an empty dataset")
        return TrainReport(float("nan"), time.perf_counter() - t0, np.zeros(0))
    x_t, y_t = _xy_arrays(model, x, y)
    m = model.meta
    params = model.params if isinstance(model, DenseNet) else model.pack()
    if config.epochs == 0:
        loss = float(kernels.batch_mse(params, m.in_sizes, m.out_sizes, m.acts,
                                       m.w_offs, m.b_offs, x_t, y_t))
        return TrainReport(loss, time.perf_counter() - t0, np.zeros(0))

    if lam > 0.0:
        if fisher is None or anchor is None:
            raise ArgumentError("penalty requires fisher and anchor")
        if fisher.shape != params.shape or anchor.shape != params.shape:
            raise ShapeError("fisher/anchor shape does not match parameters")
    else:
        # kernels skip the penalty when lam == 0 but still expect arrays
        fisher = np.zeros_like(params)
        anchor = np.zeros_like(params)

    rng = np.random.default_rng(config.seed)
    order = np.empty((config.epochs, n), dtype=np.int64)
    for e in range(config.epochs):
        order[e] = rng.permutation(n)

    before = params.copy()
    losses, diverged = kernels.train_loop(
        params, m.in_sizes, m.out_sizes, m.acts, m.w_offs, m.b_offs, m.u_offs,
        x_t, y_t, order, int(config.batch_size), config.opt_code,
        float(config.learning_rate), float(config.beta1), float(config.beta2),
        float(config.eps), fisher, anchor, float(lam))
    if diverged >= 0:
        params[:] = before
        if isinstance(model, NetChain):
            model.write_back(params)
        raise DivergenceError(epoch=int(diverged))
    if isinstance(model, NetChain):
        model.write_back(params)
    final = float(kernels.batch_mse(params, m.in_sizes, m.out_sizes, m.acts,
                                    m.w_offs, m.b_offs, x_t, y_t))
    return TrainReport(final, time.perf_counter() - t0, losses)


# --- snapshots ----------------------------------------------------------------

@dataclass(frozen=True)
class SnapshotEntry:
    arch: tuple
    seed: int
    params: np.ndarray


@dataclass
class WeightSnapshot:
    """Bitwise copy of every parameter vector in a model."""

    entries: dict[str, SnapshotEntry] = field(default_factory=dict)

    def bitwise_equal(self, other: "WeightSnapshot") -> bool:
        if set(self.entries) != set(other.entries):
            return False
        return all(
            np.array_equal(e.params, other.entries[k].params)
            for k, e in self.entries.items()
        )


def _model_nets(model) -> dict[str, DenseNet]:
    if isinstance(model, DenseNet):
        return {"net": model}
    if isinstance(model, Autoencoder):
        return {"encoder": model.encoder, "decoder": model.decoder}
    if isinstance(model, MultiHeadRegressor):
        return model.nets()
    raise ArgumentError(f"cannot snapshot a {type(model).__name__}")


def snapshot(model) -> WeightSnapshot:
    return WeightSnapshot({
        name: SnapshotEntry(net.arch(), net.seed, net.params.copy())
        for name, net in _model_nets(model).items()
    })


def restore(model, snap: WeightSnapshot) -> None:
    """Write snapshot parameters back into the model, bitwise."""
    nets = _model_nets(model)
    if set(nets) != set(snap.entries):
        raise IncompatibleSnapshotError(
            f"snapshot components {sorted(snap.entries)} do not match model "
            f"components {sorted(nets)}")
    for name, net in nets.items():
        entry = snap.entries[name]
        if entry.arch != net.arch():
            raise IncompatibleSnapshotError(f"architecture mismatch for {name!r}")
        net.params[:] = entry.params
