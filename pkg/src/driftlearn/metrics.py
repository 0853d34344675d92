"""Evaluation of updates and whole runs: regression errors, forgetting ratio,
and the fused continual-learning score.

An undefined forgetting ratio (error appearing where there was none) is the
sentinel +inf so downstream accept rules treat it as maximal forgetting.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, ValidationError

UNDEFINED_RATIO = math.inf

CL_COMPONENTS = (
    "accuracy",
    "forward_transfer",
    "backward_transfer",
    "model_size_efficiency",
    "sample_storage_efficiency",
    "compute_efficiency",
)


def regression_errors(predictions, truths) -> dict[str, float]:
    """Standard mse/rmse/mae over equal-length prediction and truth vectors."""
    p = np.asarray(predictions, dtype=np.float64).ravel()
    t = np.asarray(truths, dtype=np.float64).ravel()
    if p.size == 0 or p.size != t.size:
        raise ArgumentError(
            f"predictions ({p.size}) and truths ({t.size}) must be equal-length and non-empty")
    diff = p - t
    mse = float(np.mean(diff * diff))
    return {"mse": mse, "rmse": math.sqrt(mse), "mae": float(np.mean(np.abs(diff)))}


def forgetting_ratio(retained_before: float, retained_after: float) -> float:
    """Relative error increase on the retained evaluation set.

    Negative values mean the update improved old data (backward transfer).
    """
    if retained_before < 0 or retained_after < 0:
        raise ArgumentError("retained errors must be >= 0")
    if retained_before == 0.0:
        return 0.0 if retained_after == 0.0 else UNDEFINED_RATIO
    return (retained_after - retained_before) / retained_before


@dataclass(frozen=True)
class CLScore:
    components: dict[str, float]
    weights: dict[str, float]
    fused: float


def cl_score(components: dict[str, float], weights: dict[str, float]) -> CLScore:
    """Weighted fusion of [0,1] desiderata into one ranking value."""
    if set(components) != set(weights):
        raise ValidationError(
            f"component keys {sorted(components)} != weight keys {sorted(weights)}")
    if not components:
        raise ValidationError("at least one component is required")
    total = sum(weights.values())
    if any(w < 0 for w in weights.values()) or abs(total - 1.0) > 1e-9:
        raise ValidationError(f"weights must be >= 0 and sum to 1 (got {total})")
    for k, c in components.items():
        if not 0.0 <= c <= 1.0:
            raise ValidationError(f"component {k!r}={c} outside [0, 1]")
    fused = sum(weights[k] * components[k] for k in components)
    return CLScore(dict(components), dict(weights), fused)


def uniform_weights(keys=CL_COMPONENTS) -> dict[str, float]:
    return {k: 1.0 / len(keys) for k in keys}


@dataclass
class BlockReport:
    block_id: str
    fitting_error: float
    prediction_error: float
    forgetting_ratio: float
    training_time: float
    updates_accepted: int = 0
    updates_rejected: int = 0


@dataclass
class EvalReport:
    blocks: list[BlockReport] = field(default_factory=list)
    cl: CLScore | None = None

    def to_dict(self) -> dict:
        return {
            "blocks": [vars(b) for b in self.blocks],
            "cl_score": None if self.cl is None else {
                "components": self.cl.components,
                "weights": self.cl.weights,
                "fused": self.cl.fused,
            },
        }


def report_table(report: EvalReport) -> str:
    """Fixed-width text rendering of an EvalReport."""
    header = f"{'block':<14}{'fit_err':>12}{'pred_err':>12}{'forget':>10}{'train_s':>10}{'acc':>5}{'rej':>5}"
    lines = [header, "-" * len(header)]
    for b in report.blocks:
        forget = f"{b.forgetting_ratio:.4f}" if math.isfinite(b.forgetting_ratio) else "inf"
        lines.append(
            f"{b.block_id:<14}{b.fitting_error:>12.6f}{b.prediction_error:>12.6f}"
            f"{forget:>10}{b.training_time:>10.3f}{b.updates_accepted:>5}{b.updates_rejected:>5}")
    if report.cl is not None:
        lines.append("")
        lines.append(f"fused CL score: {report.cl.fused:.4f}")
        for k in CL_COMPONENTS:
            if k in report.cl.components:
                lines.append(f"  {k:<26}{report.cl.components[k]:>8.4f}")
    return "\n".join(lines)


def report_csv(report: EvalReport) -> str:
    rows = ["block,fitting_error,prediction_error,forgetting_ratio,training_time,"
            "updates_accepted,updates_rejected"]
    for b in report.blocks:
        rows.append(f"{b.block_id},{b.fitting_error!r},{b.prediction_error!r},"
                    f"{b.forgetting_ratio!r},{b.training_time!r},"
                    f"{b.updates_accepted},{b.updates_rejected}")
    return "\n".join(rows) + "\n"
