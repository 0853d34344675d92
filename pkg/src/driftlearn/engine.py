"""The ingest-driven continual-learning engine.

One `Engine` owns a preprocessing state, a growable multi-head regressor, and
one scoring block per sub-network (the autoencoder plus one per target).
Samples are scored and buffered per block; a full novelty buffer triggers a
strategy update whose result awaits an accept/reject decision from either the
auto policy or a human operator. Every state change is an event with a
monotonic sequence number; accepted updates become versions that can be
rolled back.

All mutations run on a single command path; updates train candidate copies so
live weights never change before an accept.
"""

import math
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Callable, Iterable, Sequence

import numpy as np

from . import kernels, metrics, nets, novelty
from .errors import (
    ArgumentError,
    ConflictError,
    NotFoundError,
    ShapeError,
    ValidationError,
)
from .nets import HeadSpec, MultiHeadRegressor, NetChain, TrainConfig
from .novelty import (
    NOVEL,
    FamiliarityBuffer,
    NoveltyBuffer,
    Sample,
    Threshold,
    adjust_threshold,
    classify,
)
from .strategies import StrategySpec, UpdateResult, update_block

WALL_CLOCK_KEYS = frozenset({"ts", "training_time", "created_at", "elapsed_seconds", "cl_score"})


def strip_wall_clock(obj):
    """Recursively drop wall-clock-derived fields for replay comparisons."""
    if isinstance(obj, dict):
        return {k: strip_wall_clock(v) for k, v in obj.items() if k not in WALL_CLOCK_KEYS}
    if isinstance(obj, list):
        return [strip_wall_clock(v) for v in obj]
    return obj


@dataclass
class Event:
    seq: int
    ts: str
    type: str
    payload: dict

    def to_dict(self) -> dict:
        return {"seq": self.seq, "ts": self.ts, "type": self.type, "payload": self.payload}


@dataclass
class AutoPolicy:
    """Unattended decision rule: accept only improving, low-forgetting updates."""

    enabled: bool = True
    rho_max: float = 0.1

    def __post_init__(self):
        self.enabled = bool(self.enabled)
        self.rho_max = float(self.rho_max)  # YAML configs may carry "1.0e9"
        if self.rho_max < 0:
            raise ValidationError("rho_max must be >= 0")

    def verdict(self, result: UpdateResult) -> str:
        ok = result.novel_after < result.novel_before and result.forgetting_ratio <= self.rho_max
        return "accept" if ok else "reject"


@dataclass(frozen=True)
class Decision:
    """Operator or auto-policy verdict on an update (or a version rollback)."""

    verdict: str  # accept | reject | rollback
    update_id: int | None = None
    version: int | None = None
    issued_by: str = "operator"
    note: str | None = None
    hyperparameter_edits: dict | None = None

    def __post_init__(self):
        if self.verdict not in ("accept", "reject", "rollback"):
            raise ValidationError(f"unknown verdict {self.verdict!r}")
        if self.verdict == "rollback" and self.version is None:
            raise ValidationError("rollback requires a version number")
        if self.verdict in ("accept", "reject") and self.update_id is None:
            raise ValidationError(f"{self.verdict} requires an update id")


@dataclass
class Version:
    number: int
    reason: str
    snapshot: nets.WeightSnapshot
    thresholds: dict[str, float]
    scaler_records: list[dict]
    buffer_state: dict[str, dict]
    created_at: str
    update_id: int | None = None


class CandidateUpdate:
    """Trainable copy of a block's nets; installed only on accept."""

    def __init__(self, block: "ModelBlock", freeze_shared: bool):
        self.block = block
        self.freeze_shared = freeze_shared
        reg = block.regressor
        if block.role == "autoencoder":
            self._live = [reg.shared.encoder, reg.shared.decoder]
        elif freeze_shared:
            self._live = [reg.heads[block.target_id]]
        else:
            self._live = [reg.shared.encoder, reg.heads[block.target_id]]
        self._copies = [n.copy() for n in self._live]
        self.chain = NetChain(self._copies)

    def prepare(self, samples: Sequence[Sample]) -> tuple[np.ndarray, np.ndarray]:
        """Chain inputs and targets for this block's training objective."""
        x = np.stack([s.x for s in samples])
        if self.block.role == "autoencoder":
            return x, x
        y = np.array([[s.y[self.block.target_id]] for s in samples])
        if self.freeze_shared:
            # the live encoder is static during an isolated update
            latents = self.block.regressor.shared.encode(x)
            return latents, y
        return x, y

    def mse(self, samples: Sequence[Sample]) -> float:
        if not samples:
            return 0.0
        x, y = self.prepare(samples)
        return nets.mse(self.chain, x, y)

    def install(self) -> None:
        for live, copy in zip(self._live, self._copies):
            live.params[:] = copy.params

    def reset(self) -> None:
        for live, copy in zip(self._live, self._copies):
            copy.params[:] = live.params


class ModelBlock:
    """One updatable sub-network with its threshold, buffers, and strategy."""

    def __init__(self, block_id: str, role: str, regressor: MultiHeadRegressor,
                 target_id: str | None = None, threshold: Threshold | None = None,
                 novelty_capacity: int = 64, familiarity_cap: int | None = None,
                 strategy: StrategySpec | None = None, retained_size: int = 256):
        if role not in ("autoencoder", "predictor"):
            raise ArgumentError(f"unknown block role {role!r}")
        if role == "predictor" and not target_id:
            raise ArgumentError("predictor blocks need a target id")
        self.id = block_id
        self.role = role
        self.target_id = target_id
        self.regressor = regressor
        self.threshold = threshold or Threshold()
        self.novelty_buffer = NoveltyBuffer(novelty_capacity)
        self.familiarity_buffer = FamiliarityBuffer(familiarity_cap)
        self.strategy = strategy or StrategySpec()
        self.retained: list[Sample] = []
        self.retained_size = retained_size
        self.trigger_pending = False
        self.updates_accepted = 0
        self.updates_rejected = 0
        self.training_time = 0.0
        self.fitting_error = 0.0
        self.last_result: UpdateResult | None = None
        self._stream_err_sum = 0.0
        self._stream_err_count = 0

    # scoring interface (novelty.ScorableBlock)
    def model_output(self, x: np.ndarray) -> np.ndarray:
        if self.role == "autoencoder":
            return self.regressor.shared.reconstruct(x)
        latent = self.regressor.shared.encode(x)
        return self.regressor.heads[self.target_id].forward(latent)

    def can_score(self, sample: Sample) -> bool:
        return self.role == "autoencoder" or (
            sample.y is not None and self.target_id in sample.y)

    def eval_mse(self, samples: Sequence[Sample]) -> float:
        """Mean squared error of this block over live weights."""
        if not samples:
            return 0.0
        x = np.stack([s.x for s in samples])
        if self.role == "autoencoder":
            recon = self.regressor.shared.reconstruct(x)
            return float(np.mean((recon - x) ** 2))
        preds = self.regressor.heads[self.target_id].forward(
            self.regressor.shared.encode(x))[:, 0]
        truth = np.array([s.y[self.target_id] for s in samples])
        return float(np.mean((preds - truth) ** 2))

    def make_candidate(self, freeze_shared: bool = False) -> CandidateUpdate:
        return CandidateUpdate(self, freeze_shared)

    def record_stream_score(self, score: float) -> None:
        self._stream_err_sum += score
        self._stream_err_count += 1

    def reset_stream_window(self) -> None:
        self._stream_err_sum = 0.0
        self._stream_err_count = 0

    @property
    def prediction_error(self) -> float:
        if self._stream_err_count == 0:
            return 0.0
        return self._stream_err_sum / self._stream_err_count


class Engine:
    """The continual-learning instance: single-writer command processing."""

    def __init__(self, n_features: int, targets: Sequence[str], *,
                 latent_dim: int = 8, hidden: int = 16, seed: int = 0,
                 novelty_capacity: int = 64, familiarity_cap: int | None = None,
                 threshold: Threshold | None = None,
                 strategy: StrategySpec | None = None,
                 auto_policy: AutoPolicy | None = None,
                 finetune_encoder: bool = True, upstream_first: bool = True,
                 clip_targets: bool = True, retained_size: int = 256,
                 compute_budget_seconds: float = 300.0, max_heads: int = 8,
                 scalers: dict | None = None,
                 log_sink: Callable[[dict], None] | None = None):
        if len(targets) > max_heads:
            raise ValidationError(f"{len(targets)} targets exceed max_heads={max_heads}")
        self.seed = seed
        self.regressor = MultiHeadRegressor.default(
            n_features, list(targets), latent_dim=latent_dim, hidden=hidden, seed=seed)
        self.finetune_encoder = finetune_encoder
        self.upstream_first = upstream_first
        self.clip_targets = clip_targets
        self.compute_budget_seconds = compute_budget_seconds
        self.max_heads = max_heads
        self.scalers = dict(scalers) if scalers else {}  # {"features": scaler}
        self.auto_policy = auto_policy or AutoPolicy()
        self.log_sink = log_sink

        self._default_threshold = threshold or Threshold()
        self._default_strategy = strategy or StrategySpec()
        self._novelty_capacity = novelty_capacity
        self._familiarity_cap = familiarity_cap
        self._retained_size = retained_size
        self._hidden = hidden

        self.blocks: dict[str, ModelBlock] = {}
        self._register_block("ae", "autoencoder", None)
        for t in targets:
            self._register_block(f"p_{t}", "predictor", t)

        self.events: list[Event] = []
        self._seq = 0
        self.updates: dict[int, UpdateResult] = {}
        self._update_counter = 0
        self.version_store: list[Version] = []
        self._next_version = 0
        self.mode: dict = {"state": "running", "block": None, "update_id": None}
        self._trigger_queue: list[str] = []
        self._rng = np.random.default_rng(seed)
        self.ingested = 0
        self._initial_param_count = self._param_count()

        self._store_version("initial")

    # --- plumbing -------------------------------------------------------------

    def _register_block(self, block_id: str, role: str, target_id: str | None) -> ModelBlock:
        block = ModelBlock(
            block_id, role, self.regressor, target_id,
            threshold=self._default_threshold,
            novelty_capacity=self._novelty_capacity,
            familiarity_cap=self._familiarity_cap,
            strategy=self._default_strategy,
            retained_size=self._retained_size)
        self.blocks[block_id] = block
        return block

    def _emit(self, event_type: str, payload: dict) -> Event:
        self._seq += 1
        event = Event(self._seq, datetime.now(timezone.utc).isoformat(), event_type, payload)
        self.events.append(event)
        if self.log_sink is not None:
            self.log_sink(event.to_dict())
        return event

    def _param_count(self) -> int:
        return sum(n.n_params for n in self.regressor.nets().values())

    def _store_version(self, reason: str, update_id: int | None = None) -> Version:
        version = Version(
            number=self._next_version,
            reason=reason,
            snapshot=nets.snapshot(self.regressor),
            thresholds={bid: b.threshold.value for bid, b in self.blocks.items()},
            scaler_records=[s.to_record() for s in self.scalers.values()],
            buffer_state={bid: {
                "novelty_fill": b.novelty_buffer.fill,
                "pending": len(b.novelty_buffer.pending),
                "familiarity_fill": b.familiarity_buffer.fill,
            } for bid, b in self.blocks.items()},
            created_at=datetime.now(timezone.utc).isoformat(),
            update_id=update_id)
        self._next_version += 1
        self.version_store.append(version)
        self._emit("version_created", {
            "version": version.number, "reason": reason, "update_id": update_id})
        return version

    def _preprocess(self, raw: Sample) -> Sample:
        x = np.asarray(raw.x, dtype=np.float64)
        if x.shape[0] != self.regressor.shared.in_size:
            raise ShapeError(
                f"sample has {x.shape[0]} features, model expects "
                f"{self.regressor.shared.in_size}")
        scaled = x
        if "features" in self.scalers:
            scaled = self.scalers["features"].transform(x.reshape(1, -1))[0]
        y = raw.y
        if y is not None and self.clip_targets:
            y = {t: float(np.clip(v, 0.0, 1.0)) for t, v in y.items()}
        return Sample(raw.timestamp, scaled, y, raw_x=x)

    def _ordered_blocks(self) -> list[ModelBlock]:
        blocks = list(self.blocks.values())
        if self.upstream_first:
            blocks.sort(key=lambda b: 0 if b.role == "autoencoder" else 1)
        return blocks

    # --- commands ----------------------------------------------------------------

    def ingest(self, raw: Sample) -> list[Event]:
        """Preprocess, predict, score, classify, buffer; fire triggers."""
        start = len(self.events)
        sample = self._preprocess(raw)
        for target, value in self.regressor.predict(sample.x).items():
            self._emit("prediction", {
                "target": target, "prediction": value,
                "sample_ts": sample.timestamp.isoformat()})
        for block in self._ordered_blocks():
            if not block.can_score(sample):
                continue
            score = novelty.score(block, sample)
            label = classify(score, block.threshold)
            block.record_stream_score(score)
            self._emit("score", {
                "block": block.id, "score": score, "label": label,
                "threshold": block.threshold.value,
                "sample_ts": sample.timestamp.isoformat()})
            if label == NOVEL:
                status = block.novelty_buffer.push(sample, score)
                if status.is_full and not block.trigger_pending:
                    self._fire_trigger(block)
            else:
                block.familiarity_buffer.push(sample, score)
        self.ingested += 1
        self._pump()
        return self.events[start:]

    def _fire_trigger(self, block: ModelBlock) -> None:
        block.trigger_pending = True
        self._trigger_queue.append(block.id)
        self._emit("update_triggered", {
            "block": block.id, "fill": block.novelty_buffer.fill,
            "capacity": block.novelty_buffer.capacity})

    def _pump(self) -> None:
        while self.mode["state"] == "running" and self._trigger_queue:
            if self.upstream_first:
                self._trigger_queue.sort(
                    key=lambda bid: 0 if self.blocks[bid].role == "autoencoder" else 1)
            bid = self._trigger_queue.pop(0)
            block = self.blocks.get(bid)
            if block is None or not block.novelty_buffer.is_full:
                continue  # stale trigger (capacity edits may have drained it)
            self.run_update(bid)

    def run_update(self, block_id: str) -> UpdateResult:
        """Train a candidate for the block whose novelty buffer is full."""
        block = self.blocks.get(block_id)
        if block is None:
            raise NotFoundError(f"no block {block_id!r}")
        if self.mode["state"] != "running":
            raise ConflictError(f"engine busy: {self.mode}")
        if not block.novelty_buffer.is_full:
            raise ArgumentError(f"novelty buffer of {block_id!r} is not full")
        self.mode = {"state": "updating", "block": block_id, "update_id": None}
        update_id = self._update_counter
        self._update_counter += 1
        novel = [e.sample for e in block.novelty_buffer.entries()]
        familiar = block.familiarity_buffer.samples()
        seed = int(self._rng.integers(2**31))
        result = update_block(block, block.strategy, novel, familiar,
                              retained=block.retained, seed=seed)
        result.update_id = update_id
        self.updates[update_id] = result
        for warning in result.warnings:
            self._emit("warning", {"block": block_id, "message": warning})
        self._emit("update_proposed", {"update_id": update_id, **result.to_payload()})
        self.mode = {"state": "awaiting_decision", "block": block_id, "update_id": update_id}
        if result.status == "rejected":  # divergence during training
            self._finalize_reject(block, result, issued_by="auto_policy",
                                  note="training diverged", already_decided=True)
        elif self.auto_policy.enabled:
            verdict = self.auto_policy.verdict(result)
            self.apply_decision(Decision(verdict, update_id=update_id,
                                         issued_by="auto_policy"))
        return result

    def apply_decision(self, decision: Decision) -> list[Event]:
        start = len(self.events)
        if decision.verdict == "rollback":
            if self.mode["state"] == "awaiting_decision":
                raise ConflictError("resolve the pending update before rolling back")
            self._rollback(decision)
        else:
            result = self.updates.get(decision.update_id)
            if result is None:
                raise NotFoundError(f"no update {decision.update_id!r}")
            if result.status != "proposed":
                raise ConflictError(f"update {decision.update_id} already {result.status}")
            block = self.blocks[result.block_id]
            if decision.verdict == "accept":
                self._finalize_accept(block, result, decision.issued_by, decision.note)
            else:
                self._finalize_reject(block, result, decision.issued_by, decision.note)
        if decision.hyperparameter_edits:
            self.set_hyperparameters(decision.hyperparameter_edits)
        self._pump()
        return self.events[start:]

    def _finalize_accept(self, block: ModelBlock, result: UpdateResult,
                         issued_by: str, note: str | None) -> None:
        result.decide("accepted")
        result.candidate.install()
        drained = block.novelty_buffer.drain()

        # refresh the frozen retained reservoir from familiarity, then empty it
        pool = block.familiarity_buffer
        if pool.fill:
            block.retained = pool.sample_uniform(block.retained_size, self._rng)
        block.familiarity_buffer.drain()

        self._update_scalers(block, drained)

        post_scores = [novelty.score(block, s) for s in drained]
        if post_scores:
            old = block.threshold
            block.threshold = adjust_threshold(old, post_scores)
            if block.threshold is not old:
                self._emit("threshold_adjusted", {
                    "block": block.id, "old": old.value, "new": block.threshold.value})
        else:
            self._emit("warning", {
                "block": block.id, "message": "no drained scores; threshold unchanged"})

        block.updates_accepted += 1
        block.training_time += result.training_time
        block.fitting_error = result.novel_after
        block.last_result = result
        block.reset_stream_window()
        block.trigger_pending = False
        self._emit("decision", {
            "update_id": result.update_id, "verdict": "accept",
            "issued_by": issued_by, "note": note, "block": block.id})
        self._store_version(f"update {result.update_id} accepted ({block.id})",
                            update_id=result.update_id)
        self.mode = {"state": "running", "block": None, "update_id": None}
        self._check_refill(block)

    def _finalize_reject(self, block: ModelBlock, result: UpdateResult,
                         issued_by: str, note: str | None,
                         already_decided: bool = False) -> None:
        if not already_decided:
            result.decide("rejected")
        # demote the refused novel evidence to familiarity (no re-trigger loop)
        entries = block.novelty_buffer.entries()
        block.novelty_buffer.drain()
        for entry in entries:
            block.familiarity_buffer.push(entry.sample, entry.score)
        block.updates_rejected += 1
        block.training_time += result.training_time
        block.last_result = result
        block.trigger_pending = False
        self._emit("decision", {
            "update_id": result.update_id, "verdict": "reject",
            "issued_by": issued_by, "note": note, "block": block.id})
        self.mode = {"state": "running", "block": None, "update_id": None}
        self._check_refill(block)

    def _check_refill(self, block: ModelBlock) -> None:
        if block.novelty_buffer.is_full and not block.trigger_pending:
            self._fire_trigger(block)

    def _update_scalers(self, block: ModelBlock, drained: list[Sample]) -> None:
        """Scaler versions advance only on accepted updates; buffered samples
        are re-scaled so model and scaler stay aligned."""
        scaler = self.scalers.get("features")
        raws = [s.raw_x for s in drained if s.raw_x is not None]
        if scaler is None or not raws:
            return
        updated = scaler.partial_update(np.stack(raws))
        if updated is scaler or updated.to_record() == scaler.to_record():
            return
        self.scalers["features"] = updated
        rescaled = 0
        for blk in self.blocks.values():
            for store in (blk.novelty_buffer.items, list(blk.novelty_buffer.pending),
                          blk.familiarity_buffer.items):
                for entry in store:
                    if entry.sample.raw_x is not None:
                        entry.sample = entry.sample.with_x(
                            updated.transform(entry.sample.raw_x.reshape(1, -1))[0])
                        rescaled += 1
            blk.retained = [
                s.with_x(updated.transform(s.raw_x.reshape(1, -1))[0])
                if s.raw_x is not None else s
                for s in blk.retained]
        self._emit("scaler_updated", {"rescaled": rescaled,
                                      "record": updated.to_record()})

    def _rollback(self, decision: Decision) -> None:
        number = decision.version
        match = [v for v in self.version_store if v.number == number]
        if not match:
            raise NotFoundError(f"no version {number!r}")
        version = match[0]
        current = self.regressor.nets()
        restored, skipped = [], []
        for name, entry in version.snapshot.entries.items():
            net = current.get(name)
            if net is not None and entry.arch == net.arch():
                net.params[:] = entry.params
                restored.append(name)
            else:
                skipped.append(name)
        for name in current:
            if name not in version.snapshot.entries:
                skipped.append(name)
        self._emit("decision", {
            "update_id": None, "verdict": "rollback", "version": number,
            "issued_by": decision.issued_by, "note": decision.note,
            "restored": sorted(restored), "skipped": sorted(skipped)})
        self._store_version(f"rollback to version {number}")

    def add_target(self, target_id: str, head_spec: HeadSpec | None = None,
                   strategy: StrategySpec | None = None,
                   warmup_samples: Iterable[Sample] = ()) -> ModelBlock:
        """Grow a new prediction head plus its block; warm up in isolation."""
        if len(self.regressor.heads) >= self.max_heads:
            raise ValidationError(f"head limit reached (max_heads={self.max_heads})")
        warmup = [self._preprocess(s) for s in warmup_samples]
        init = "seeded_random" if warmup else "zero_output_layer"
        seed = int(self._rng.integers(2**31))
        self.regressor.add_head(target_id, head_spec, init=init, seed=seed)
        block = self._register_block(f"p_{target_id}", "predictor", target_id)
        if strategy is not None:
            block.strategy = strategy
        warmup = [s for s in warmup if s.y is not None and target_id in s.y]
        if warmup:
            head = self.regressor.heads[target_id]
            x = np.stack([s.x for s in warmup])
            latents = self.regressor.shared.encode(x)
            y = np.array([[s.y[target_id]] for s in warmup])
            report = nets.train(head, latents, y, block.strategy.train)
            block.fitting_error = report.final_loss
            block.training_time += report.elapsed_seconds
            scores = []
            for s in warmup:
                score = novelty.score(block, s)
                block.familiarity_buffer.push(s, score)
                scores.append(score)
            block.threshold = adjust_threshold(block.threshold, scores)
            block.retained = block.familiarity_buffer.sample_uniform(
                block.retained_size, self._rng)
        self._emit("target_added", {
            "target": target_id, "block": block.id, "warmup_count": len(warmup),
            "init": init, "threshold": block.threshold.value})
        self._store_version(f"target {target_id} added")
        return block

    def set_hyperparameters(self, edits: dict) -> list[Event]:
        """Validate and apply edits atomically; log old->new values."""
        start = len(self.events)
        changes: dict[str, dict] = {}
        apply_ops: list[Callable[[], None]] = []

        def plan(path: str, old, new, op: Callable[[], None]) -> None:
            changes[path] = {"old": old, "new": new}
            apply_ops.append(op)

        for bid, block_edits in (edits.get("blocks") or {}).items():
            block = self.blocks.get(bid)
            if block is None:
                raise NotFoundError(f"no block {bid!r}")
            if not isinstance(block_edits, dict):
                raise ValidationError(f"edits for {bid!r} must be a mapping")
            for key, value in block_edits.items():
                if key == "threshold_value":
                    try:
                        new_threshold = Threshold(float(value), block.threshold.adaptation,
                                                  block.threshold.q, block.threshold.alpha)
                    except ArgumentError as err:
                        raise ValidationError(str(err)) from err
                    plan(f"{bid}.threshold_value", block.threshold.value, float(value),
                         lambda b=block, t=new_threshold: setattr(b, "threshold", t))
                elif key == "novelty_capacity":
                    cap = int(value)
                    if cap < 1:
                        raise ValidationError("novelty_capacity must be >= 1")
                    plan(f"{bid}.novelty_capacity", block.novelty_buffer.capacity, cap,
                         lambda b=block, c=cap: self._resize_novelty(b, c))
                elif key == "familiarity_cap":
                    cap = None if value is None else int(value)
                    if cap is not None and cap < 1:
                        raise ValidationError("familiarity_cap must be >= 1 or null")
                    plan(f"{bid}.familiarity_cap", block.familiarity_buffer.cap, cap,
                         lambda b=block, c=cap: self._recap_familiarity(b, c))
                elif key == "strategy":
                    if not isinstance(value, dict):
                        raise ValidationError("strategy edits must be a mapping")
                    merged = block.strategy.to_dict()
                    train = merged.pop("train")
                    train.update(value.get("train") or {})
                    merged.update({k: v for k, v in value.items() if k != "train"})
                    merged["train"] = train
                    try:
                        new_spec = StrategySpec.from_dict(merged)
                    except (ArgumentError, TypeError) as err:
                        raise ValidationError(str(err)) from err
                    plan(f"{bid}.strategy", block.strategy.to_dict(), new_spec.to_dict(),
                         lambda b=block, s=new_spec: setattr(b, "strategy", s))
                else:
                    raise ValidationError(f"unknown block hyperparameter {key!r}")

        for key, value in (edits.get("auto_policy") or {}).items():
            if key == "enabled":
                plan("auto_policy.enabled", self.auto_policy.enabled, bool(value),
                     lambda v=bool(value): setattr(self.auto_policy, "enabled", v))
            elif key == "rho_max":
                rho = float(value)
                if rho < 0:
                    raise ValidationError("rho_max must be >= 0")
                plan("auto_policy.rho_max", self.auto_policy.rho_max, rho,
                     lambda v=rho: setattr(self.auto_policy, "rho_max", v))
            else:
                raise ValidationError(f"unknown auto_policy field {key!r}")

        unknown = set(edits) - {"blocks", "auto_policy"}
        if unknown:
            raise ValidationError(f"unknown hyperparameter sections {sorted(unknown)}")
        if not changes:
            raise ValidationError("no edits supplied")

        for op in apply_ops:
            op()
        self._emit("hyperparameters_changed", {"changes": changes})
        for bid in edits.get("blocks") or {}:
            self._check_refill(self.blocks[bid])
        self._pump()
        return self.events[start:]

    def _resize_novelty(self, block: ModelBlock, capacity: int) -> None:
        buf = block.novelty_buffer
        if capacity < buf.capacity:
            buf.shrink_capacity(capacity)
        else:
            buf.capacity = capacity
            while buf.pending and not buf.is_full:
                buf.items.append(buf.pending.popleft())

    def _recap_familiarity(self, block: ModelBlock, cap: int | None) -> None:
        buf = block.familiarity_buffer
        buf.cap = cap
        while cap is not None and len(buf.items) > cap:
            buf.items.popleft()
            buf.evicted += 1

    # --- warm start and evaluation ---------------------------------------------------

    def fit_initial(self, samples: Iterable[Sample],
                    config: TrainConfig | None = None) -> None:
        """Offline warm start: fit the autoencoder and heads, seed familiarity
        buffers and retained reservoirs, and calibrate thresholds."""
        config = config or TrainConfig(epochs=100, seed=self.seed)
        processed = [self._preprocess(s) for s in samples]
        if not processed:
            raise ArgumentError("fit_initial needs at least one sample")
        x = np.stack([s.x for s in processed])
        ae_report = nets.train(self.regressor.shared.chain(), x, x, config)
        self.blocks["ae"].fitting_error = ae_report.final_loss
        self.blocks["ae"].training_time += ae_report.elapsed_seconds
        latents = self.regressor.shared.encode(x)
        for target, head in self.regressor.heads.items():
            rows = [i for i, s in enumerate(processed)
                    if s.y is not None and target in s.y]
            if not rows:
                continue
            y = np.array([[processed[i].y[target]] for i in rows])
            report = nets.train(head, latents[rows], y, config)
            block = self.blocks[f"p_{target}"]
            block.fitting_error = report.final_loss
            block.training_time += report.elapsed_seconds
        for block in self.blocks.values():
            scores = []
            for s in processed:
                if not block.can_score(s):
                    continue
                score = novelty.score(block, s)
                block.familiarity_buffer.push(s, score)
                scores.append(score)
            if scores:
                block.threshold = adjust_threshold(block.threshold, scores)
                block.retained = block.familiarity_buffer.sample_uniform(
                    block.retained_size, self._rng)
        self._emit("initial_fit", {
            "samples": len(processed),
            "thresholds": {bid: b.threshold.value for bid, b in self.blocks.items()}})
        self._store_version("initial fit")

    def eval_report(self) -> metrics.EvalReport:
        report = metrics.EvalReport()
        for block in self.blocks.values():
            last = block.last_result
            report.blocks.append(metrics.BlockReport(
                block_id=block.id,
                fitting_error=block.fitting_error,
                prediction_error=block.prediction_error,
                forgetting_ratio=last.forgetting_ratio if last else 0.0,
                training_time=block.training_time,
                updates_accepted=block.updates_accepted,
                updates_rejected=block.updates_rejected))
        accepted = [r for r in self.updates.values() if r.status == "accepted"]
        pred_errors = [b.prediction_error for b in self.blocks.values()
                       if b.role == "predictor"] or [0.0]
        improvements = [max(0.0, min(1.0, 1.0 - r.novel_after / r.novel_before))
                        for r in accepted if r.novel_before > 0]
        retention = [max(0.0, min(1.0, 1.0 - r.forgetting_ratio))
                     for r in accepted if math.isfinite(r.forgetting_ratio)]
        stored = sum(b.novelty_buffer.fill + len(b.novelty_buffer.pending)
                     + b.familiarity_buffer.fill for b in self.blocks.values())
        total_time = sum(b.training_time for b in self.blocks.values())
        components = {
            "accuracy": 1.0 / (1.0 + float(np.mean(pred_errors))),
            "forward_transfer": float(np.mean(improvements)) if improvements else 0.0,
            "backward_transfer": float(np.mean(retention)) if retention else 1.0,
            "model_size_efficiency": min(1.0, self._initial_param_count / self._param_count()),
            "sample_storage_efficiency":
                1.0 - min(1.0, stored / self.ingested) if self.ingested else 1.0,
            "compute_efficiency":
                min(1.0, self.compute_budget_seconds / total_time) if total_time > 0 else 1.0,
        }
        report.cl = metrics.cl_score(components, metrics.uniform_weights())
        return report

    def checkpoint(self, label: str) -> metrics.EvalReport:
        report = self.eval_report()
        self._emit("checkpoint", {"label": label, "report": report.to_dict()})
        return report

    def annotate(self, label: str, payload: dict) -> Event:
        """Record a scenario-level marker (segment/drift boundaries) in the log."""
        return self._emit(f"scenario_{label}", dict(payload))

    # --- introspection -----------------------------------------------------------------

    def pending_update(self) -> UpdateResult | None:
        uid = self.mode.get("update_id")
        if self.mode["state"] == "awaiting_decision" and uid is not None:
            return self.updates[uid]
        return None

    def state(self) -> dict:
        pending = self.pending_update()
        return {
            "mode": dict(self.mode),
            "seq": self._seq,
            "ingested": self.ingested,
            "backend": kernels.BACKEND,
            "version": self.version_store[-1].number if self.version_store else None,
            "version_count": len(self.version_store),
            "targets": list(self.regressor.heads),
            "auto_policy": {"enabled": self.auto_policy.enabled,
                            "rho_max": self.auto_policy.rho_max},
            "pending_update": None if pending is None else
                {"update_id": pending.update_id, **pending.to_payload()},
            "blocks": [{
                "id": b.id,
                "role": b.role,
                "target": b.target_id,
                "threshold": {"value": b.threshold.value,
                              "adaptation": b.threshold.adaptation,
                              "q": b.threshold.q, "alpha": b.threshold.alpha},
                "novelty": {"fill": b.novelty_buffer.fill,
                            "capacity": b.novelty_buffer.capacity,
                            "pending": len(b.novelty_buffer.pending)},
                "familiarity": {"fill": b.familiarity_buffer.fill,
                                "cap": b.familiarity_buffer.cap,
                                "evicted": b.familiarity_buffer.evicted},
                "strategy": b.strategy.to_dict(),
                "trigger_pending": b.trigger_pending,
                "updates_accepted": b.updates_accepted,
                "updates_rejected": b.updates_rejected,
                "prediction_error": b.prediction_error,
                "fitting_error": b.fitting_error,
            } for b in self.blocks.values()],
        }

    def events_since(self, seq: int) -> list[Event]:
        # event seq numbers are 1-based and dense: events[i].seq == i + 1
        if seq < 0:
            seq = 0
        return self.events[seq:]
