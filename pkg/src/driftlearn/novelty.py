"""Novelty detection and buffering: score samples per block against a dynamic
threshold, split them into novelty/familiarity buffers, and adapt thresholds
after accepted updates.

The deterministic detector is the squared-error score; `Detector` is the seam
where a probabilistic scorer could plug in.
"""

import csv
from collections import deque
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

from .errors import ArgumentError, InternalError, MissingTargetError, ShapeError

NOVEL = "novel"
FAMILIAR = "familiar"


@dataclass(frozen=True)
class Sample:
    """One timestamped observation: scaled features plus optional targets.

    `y` maps target id to value so a sample may label any subset of targets;
    `raw_x` keeps the unscaled features for scaler updates and re-scaling.
    """

    timestamp: datetime
    x: np.ndarray
    y: Mapping[str, float] | None = None
    raw_x: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        if x.ndim != 1 or x.size == 0:
            raise ShapeError("sample features must be a non-empty vector")
        if not np.all(np.isfinite(x)):
            raise ArgumentError("sample features must be finite")
        if self.y is not None:
            for t, v in self.y.items():
                if not np.isfinite(v):
                    raise ArgumentError(f"target {t!r} must be finite")
        object.__setattr__(self, "x", x)

    def with_x(self, x: np.ndarray) -> "Sample":
        return Sample(self.timestamp, x, self.y, self.raw_x)


class ScorableBlock(Protocol):
    """What the detector needs from a model block."""

    role: str  # "autoencoder" or "predictor"
    target_id: str | None

    def model_output(self, x: np.ndarray) -> np.ndarray: ...


def score(block: ScorableBlock, sample: Sample) -> float:
    """Squared-error novelty score of one sample under one block.

    Autoencoder blocks compare the reconstruction to the input; predictor
    blocks compare the prediction to the sample's target for that block.
    """
    if block.role == "autoencoder":
        truth = sample.x
    else:
        if sample.y is None or block.target_id not in sample.y:
            raise MissingTargetError(
                f"sample at {sample.timestamp} has no target {block.target_id!r}")
        truth = np.array([sample.y[block.target_id]], dtype=np.float64)
    out = np.asarray(block.model_output(sample.x), dtype=np.float64).ravel()
    diff = out - truth
    return float(np.mean(diff * diff))


@dataclass(frozen=True)
class Threshold:
    """Novelty cut-off with its adaptation rule."""

    value: float = 0.05
    adaptation: str = "quantile"  # or "fixed"
    q: float = 0.95
    alpha: float = 1.2

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "q", float(self.q))
        object.__setattr__(self, "alpha", float(self.alpha))
        if self.value < 0:
            raise ArgumentError("threshold value must be >= 0")
        if self.adaptation not in ("quantile", "fixed"):
            raise ArgumentError(f"unknown adaptation {self.adaptation!r}")
        if not 0.0 <= self.q <= 1.0:
            raise ArgumentError("quantile q must lie in [0, 1]")
        if self.alpha < 0:
            raise ArgumentError("alpha must be >= 0")


def classify(score_value: float, threshold: Threshold) -> str:
    """Novel iff the score strictly exceeds the threshold; ties are familiar."""
    if score_value < 0:
        raise InternalError(f"negative novelty score {score_value}")
    return NOVEL if score_value > threshold.value else FAMILIAR


def adjust_threshold(threshold: Threshold, post_update_scores: Sequence[float]) -> Threshold:
    """New threshold after an accepted update: alpha times the q-quantile of
    the drained samples' scores under the updated block.

    Empty score lists and fixed thresholds return the input unchanged (the
    caller logs the skip). Rejected updates must simply not call this.
    """
    scores = np.asarray(list(post_update_scores), dtype=np.float64)
    if threshold.adaptation == "fixed" or scores.size == 0:
        return threshold
    value = float(threshold.alpha * np.quantile(scores, threshold.q))
    return Threshold(max(value, 0.0), threshold.adaptation, threshold.q, threshold.alpha)


@dataclass(frozen=True)
class BufferStatus:
    fill: int
    is_full: bool


@dataclass
class _Entry:
    sample: Sample
    score: float


class NoveltyBuffer:
    """Capacity-bounded FIFO of novel samples; overflow goes to a pending
    queue (never dropped) until the buffer is drained."""

    def __init__(self, capacity: int = 64):
        if capacity < 1:
            raise ArgumentError("novelty buffer capacity must be >= 1")
        self.capacity = capacity
        self.items: list[_Entry] = []
        self.pending: deque[_Entry] = deque()

    @property
    def fill(self) -> int:
        return len(self.items)

    @property
    def is_full(self) -> bool:
        return len(self.items) >= self.capacity

    def push(self, sample: Sample, score_value: float = 0.0) -> BufferStatus:
        if self.is_full:
            self.pending.append(_Entry(sample, score_value))
        else:
            self.items.append(_Entry(sample, score_value))
        return BufferStatus(self.fill, self.is_full)

    def drain(self) -> list[Sample]:
        """Empty the buffer in arrival order, then promote pending overflow."""
        out = [e.sample for e in self.items]
        self.items = []
        while self.pending and not self.is_full:
            self.items.append(self.pending.popleft())
        return out

    def shrink_capacity(self, capacity: int) -> None:
        """Reduce capacity; the oldest overflow moves to the pending queue."""
        if capacity < 1:
            raise ArgumentError("novelty buffer capacity must be >= 1")
        overflow = len(self.items) - capacity
        if overflow > 0:
            moved = self.items[:overflow]
            self.items = self.items[overflow:]
            self.pending.extendleft(reversed(moved))
        self.capacity = capacity

    def entries(self) -> list[_Entry]:
        return list(self.items)


class FamiliarityBuffer:
    """Order-preserving store of familiar samples; unbounded unless a
    retention cap is set, in which case the oldest entries are evicted."""

    def __init__(self, cap: int | None = None):
        if cap is not None and cap < 1:
            raise ArgumentError("familiarity cap must be >= 1 or None")
        self.cap = cap
        self.items: deque[_Entry] = deque()
        self.evicted = 0

    @property
    def fill(self) -> int:
        return len(self.items)

    def push(self, sample: Sample, score_value: float = 0.0) -> BufferStatus:
        self.items.append(_Entry(sample, score_value))
        while self.cap is not None and len(self.items) > self.cap:
            self.items.popleft()
            self.evicted += 1
        return BufferStatus(self.fill, False)

    def drain(self) -> list[Sample]:
        out = [e.sample for e in self.items]
        self.items.clear()
        return out

    def samples(self) -> list[Sample]:
        return [e.sample for e in self.items]

    def sample_uniform(self, k: int, rng: np.random.Generator) -> list[Sample]:
        """Seeded uniform draw of at most k samples, without replacement."""
        pool = self.samples()
        if len(pool) <= k:
            return pool
        idx = rng.choice(len(pool), size=k, replace=False)
        return [pool[i] for i in sorted(idx)]

    def entries(self) -> list[_Entry]:
        return list(self.items)


def export_buffer_csv(buffer: NoveltyBuffer | FamiliarityBuffer, path,
                      feature_names: Iterable[str] | None = None,
                      target_id: str | None = None) -> None:
    """Audit export: timestamp, features..., target, score per buffered row."""
    entries = buffer.entries()
    width = entries[0].sample.x.size if entries else 0
    names = list(feature_names) if feature_names else [f"x{i}" for i in range(width)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", *names, "target", "score"])
        for e in entries:
            target = ""
            if e.sample.y:
                if target_id is not None:
                    target = e.sample.y.get(target_id, "")
                elif len(e.sample.y) == 1:
                    target = next(iter(e.sample.y.values()))
                else:
                    target = ";".join(f"{k}={v}" for k, v in e.sample.y.items())
            writer.writerow([e.sample.timestamp.isoformat(), *e.sample.x.tolist(),
                             target, e.score])
