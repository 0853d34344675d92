"""driftlearn: a continual-learning engine for streaming regression.

Samples flow through preprocessing into per-block novelty detection; novel
samples accumulate in capacity-bounded buffers whose filling triggers a model
update under a pluggable continual-learning strategy. Updates are proposed to
an operator (or an auto policy), versioned, and reversible.
"""

from .engine import AutoPolicy, Decision, Engine, strip_wall_clock
from .kernels import BACKEND
from .metrics import cl_score, forgetting_ratio, regression_errors
from .nets import (
    Autoencoder,
    DenseNet,
    HeadSpec,
    LayerSpec,
    MultiHeadRegressor,
    TrainConfig,
)
from .novelty import FamiliarityBuffer, NoveltyBuffer, Sample, Threshold
from .strategies import StrategySpec
from .streams import (
    DriftSpec,
    SyntheticStream,
    build_engine,
    generate,
    load_csv,
    load_scenario,
    replay,
)

__all__ = [
    "AutoPolicy",
    "Autoencoder",
    "BACKEND",
    "Decision",
    "DenseNet",
    "DriftSpec",
    "Engine",
    "FamiliarityBuffer",
    "HeadSpec",
    "LayerSpec",
    "MultiHeadRegressor",
    "NoveltyBuffer",
    "Sample",
    "StrategySpec",
    "SyntheticStream",
    "Threshold",
    "TrainConfig",
    "build_engine",
    "cl_score",
    "forgetting_ratio",
    "generate",
    "load_csv",
    "load_scenario",
    "regression_errors",
    "replay",
    "strip_wall_clock",
]

__version__ = "0.1.0"
