"""Pluggable update strategies: naive fine-tuning, rehearsal replay with a
raw-sample familiarity pool, diagonal-Fisher weight consolidation, and
parameter isolation (frozen shared encoder, train only the head).

`update_block` never touches live weights: it trains a candidate copy and the
caller installs it if the update is accepted.
"""

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import nets
from .errors import ArgumentError, ConflictError, DivergenceError, ShapeError, StrategyError
from .metrics import forgetting_ratio
from .nets import DenseNet, NetChain, TrainConfig

KINDS = ("naive", "rehearsal", "ewc", "isolation")


@dataclass(frozen=True)
class StrategySpec:
    """Which continual-learning algorithm updates a block, and how."""

    kind: str = "rehearsal"
    train: TrainConfig = field(default_factory=TrainConfig)
    mix_ratio: float = 0.5            # rehearsal: novel fraction per batch
    familiar_sample_count: int = 512  # rehearsal pool / Fisher sample bound
    lam: float = 100.0                # ewc penalty strength
    freeze_shared: bool = True        # isolation: keep the encoder static

    def __post_init__(self):
        object.__setattr__(self, "mix_ratio", float(self.mix_ratio))
        object.__setattr__(self, "familiar_sample_count", int(self.familiar_sample_count))
        object.__setattr__(self, "lam", float(self.lam))
        if self.kind not in KINDS:
            raise ArgumentError(f"unknown strategy kind {self.kind!r}")
        if not 0.0 <= self.mix_ratio <= 1.0:
            raise ArgumentError("mix_ratio must lie in [0, 1]")
        if self.lam < 0:
            raise ArgumentError("lambda must be >= 0")
        if self.familiar_sample_count < 1:
            raise ArgumentError("familiar_sample_count must be >= 1")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "mix_ratio": self.mix_ratio,
            "familiar_sample_count": self.familiar_sample_count,
            "lambda": self.lam,
            "freeze_shared": self.freeze_shared,
            "train": {
                "epochs": self.train.epochs,
                "batch_size": self.train.batch_size,
                "learning_rate": self.train.learning_rate,
                "optimizer": self.train.optimizer,
                "seed": self.train.seed,
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StrategySpec":
        data = dict(data)
        train = TrainConfig(**data.pop("train", {}))
        if "lambda" in data:
            data["lam"] = data.pop("lambda")
        return cls(train=train, **data)


@dataclass(frozen=True)
class FisherInfo:
    """Diagonal importance weights plus the parameter vector they anchor to."""

    values: np.ndarray
    anchor: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.anchor.shape:
            raise ShapeError("fisher values and anchor must share a shape")
        if np.any(self.values < 0):
            raise ArgumentError("fisher entries must be >= 0")


def compute_fisher(model: DenseNet | NetChain, x, y) -> FisherInfo:
    """Empirical diagonal Fisher: mean over the batch of squared per-sample
    MSE gradients, anchored at the model's current weights."""
    x_arr = np.asarray(x, dtype=np.float64)
    if x_arr.size == 0:
        raise ArgumentError("fisher batch must be non-empty")
    from . import kernels

    x_t = np.ascontiguousarray(np.atleast_2d(x_arr).T
                               if x_arr.ndim == 1 else x_arr.T)
    y_arr = np.asarray(y, dtype=np.float64)
    if y_arr.ndim == 1:
        y_arr = y_arr.reshape(-1, 1)
    y_t = np.ascontiguousarray(y_arr.T)
    m = model.meta
    params = model.params if isinstance(model, DenseNet) else model.pack()
    values = kernels.fisher_diag(params, m.in_sizes, m.out_sizes, m.acts,
                                 m.w_offs, m.b_offs, m.u_offs, x_t, y_t)
    return FisherInfo(values, params.copy())


def penalized_loss(base_loss: float, params: np.ndarray, fisher: FisherInfo,
                   lam: float) -> float:
    """base + (lambda/2) * sum_i F_i * (theta_i - anchor_i)^2"""
    if params.shape != fisher.values.shape:
        raise ShapeError("parameter vector does not match fisher shape")
    if lam < 0:
        raise ArgumentError("lambda must be >= 0")
    disp = params - fisher.anchor
    return float(base_loss + 0.5 * lam * np.sum(fisher.values * disp * disp))


def compose_rehearsal_batch(novel, familiar, mix_ratio: float, batch_size: int,
                            seed: int) -> tuple[list, bool]:
    """One shuffled training batch of ceil(mix_ratio*batch_size) novel samples
    plus familiar ones drawn uniformly.

    Returns (batch, fell_back) where fell_back marks the all-novel fallback
    used when the familiarity pool is empty.
    """
    novel = list(novel)
    familiar = list(familiar)
    if not novel:
        raise ArgumentError("rehearsal needs at least one novel sample")
    if batch_size < 1:
        raise ArgumentError("batch_size must be >= 1")
    rng = np.random.default_rng(seed)
    n_novel = min(batch_size, math.ceil(mix_ratio * batch_size))
    if mix_ratio == 0.0:
        n_novel = 0 if familiar else batch_size
    n_familiar = batch_size - n_novel
    fell_back = False
    if not familiar and n_familiar > 0:
        n_novel = batch_size
        n_familiar = 0
        fell_back = True

    def draw(pool, k):
        if k == 0:
            return []
        replace_draw = len(pool) < k
        idx = rng.choice(len(pool), size=k, replace=replace_draw)
        return [pool[i] for i in idx]

    batch = draw(novel, n_novel) + draw(familiar, n_familiar)
    rng.shuffle(batch)
    return batch, fell_back


@dataclass
class UpdateResult:
    """Outcome of one block update, before and after the operator decision."""

    block_id: str
    novel_before: float
    novel_after: float
    retained_before: float
    retained_after: float
    forgetting_ratio: float
    training_time: float
    strategy: StrategySpec
    status: str = "proposed"
    warnings: list[str] = field(default_factory=list)
    candidate: object = None  # CandidateUpdate installed on accept

    def decide(self, status: str) -> None:
        if self.status != "proposed":
            raise ConflictError(f"update already {self.status}")
        if status not in ("accepted", "rejected"):
            raise ArgumentError(f"invalid decision status {status!r}")
        self.status = status

    def errors(self) -> dict[str, float]:
        return {
            "novel_before": self.novel_before,
            "novel_after": self.novel_after,
            "retained_before": self.retained_before,
            "retained_after": self.retained_after,
        }

    def to_payload(self) -> dict:
        return {
            "block": self.block_id,
            "errors": self.errors(),
            "forgetting_ratio": self.forgetting_ratio,
            "training_time": self.training_time,
            "strategy": self.strategy.to_dict(),
            "status": self.status,
            "warnings": list(self.warnings),
        }


def _rehearsal_training_set(novel, familiar, spec: StrategySpec, seed: int):
    """Concatenate composed batches until every novel sample is likely seen."""
    warnings = []
    rng = np.random.default_rng(seed)
    pool = list(familiar)
    if len(pool) > spec.familiar_sample_count:
        idx = rng.choice(len(pool), size=spec.familiar_sample_count, replace=False)
        pool = [pool[i] for i in sorted(idx)]
    bs = spec.train.batch_size
    n_novel_per_batch = max(1, math.ceil(spec.mix_ratio * bs)) if spec.mix_ratio > 0 else bs
    n_batches = max(1, math.ceil(len(novel) / n_novel_per_batch))
    out = []
    fell_back = False
    for i in range(n_batches):
        batch, fb = compose_rehearsal_batch(novel, pool, spec.mix_ratio, bs,
                                            seed=seed + 1 + i)
        fell_back = fell_back or fb
        out.extend(batch)
    if fell_back:
        warnings.append("familiarity buffer empty: rehearsal fell back to novel-only batches")
    return out, warnings


def update_block(block, spec: StrategySpec, novel, familiar, retained=(),
                 seed: int = 0) -> UpdateResult:
    """Train a candidate copy of the block under the given strategy.

    `block` supplies the model access (see engine.ModelBlock): an eval over
    live weights, and `make_candidate` returning a trainable copy. Errors are
    measured on the novel set and on the retained evaluation set.
    """
    novel = list(novel)
    familiar = list(familiar)
    retained = list(retained)
    if not novel:
        raise ArgumentError("update requires at least one novel sample")

    freeze = spec.kind == "isolation" and spec.freeze_shared
    cand = block.make_candidate(freeze_shared=freeze)
    novel_before = cand.mse(novel)
    retained_before = cand.mse(retained) if retained else 0.0

    warnings: list[str] = []
    status = "proposed"
    t0 = time.perf_counter()
    try:
        if spec.kind in ("naive", "isolation"):
            x, y = cand.prepare(novel)
            nets.train(cand.chain, x, y, spec.train)
        elif spec.kind == "rehearsal":
            train_set, warnings = _rehearsal_training_set(novel, familiar, spec, seed)
            x, y = cand.prepare(train_set)
            nets.train(cand.chain, x, y, spec.train)
        else:  # ewc
            if not familiar:
                raise StrategyError("ewc requires familiar data to estimate the Fisher")
            rng = np.random.default_rng(seed)
            k = min(len(familiar), spec.familiar_sample_count)
            idx = rng.choice(len(familiar), size=k, replace=False)
            fam = [familiar[i] for i in sorted(idx)]
            xf, yf = cand.prepare(fam)
            fisher = compute_fisher(cand.chain, xf, yf)
            x, y = cand.prepare(novel)
            nets.train(cand.chain, x, y, spec.train,
                       fisher=fisher.values, anchor=fisher.anchor, lam=spec.lam)
    except DivergenceError as err:
        status = "rejected"
        cand.reset()
        warnings.append(f"training diverged at epoch {err.epoch}; update auto-rejected")
    training_time = time.perf_counter() - t0

    novel_after = cand.mse(novel)
    retained_after = cand.mse(retained) if retained else 0.0
    result = UpdateResult(
        block_id=block.id,
        novel_before=novel_before,
        novel_after=novel_after,
        retained_before=retained_before,
        retained_after=retained_after,
        forgetting_ratio=forgetting_ratio(retained_before, retained_after),
        training_time=training_time,
        strategy=spec,
        warnings=warnings,
        candidate=cand,
    )
    if status == "rejected":
        result.decide("rejected")
    return result
