"""Data sources: a seeded synthetic non-stationary stream, CSV ingestion for
the three power-forecasting schemas, and scenario scripts that drive
drift/target-addition experiments against an engine.

Synthetic features are smooth seeded periodics plus noise in [0, 1]; targets
come from a power-curve-like mapping (monotone sigmoid in the "wind speed"
feature plus a squashed interaction term). Drift either shifts the feature
process or scales/flips the mapping, abruptly or along a linear ramp.
"""

import math
import zlib
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path

import csv as csv_mod

import numpy as np
import yaml

from .engine import AutoPolicy, Engine, Event
from .errors import (
    ArgumentError,
    ConflictError,
    DriftlearnError,
    RowError,
    ScenarioError,
    SchemaError,
)
from .nets import TrainConfig
from .novelty import Sample, Threshold
from .preprocess import ImputeRule, fill_missing, filter_malfunction
from .strategies import StrategySpec

DRIFT_KINDS = ("none", "abrupt_input", "gradual_input", "abrupt_mapping", "gradual_mapping")


@dataclass(frozen=True)
class DriftSpec:
    kind: str = "none"
    onset: int = 0
    ramp: int = 1
    magnitude: float = -1.0

    def __post_init__(self):
        if self.kind not in DRIFT_KINDS:
            raise ArgumentError(f"unknown drift kind {self.kind!r}")
        if self.onset < 0:
            raise ArgumentError("onset must be >= 0")
        if self.kind.startswith("gradual") and self.ramp < 1:
            raise ArgumentError("gradual drift needs ramp >= 1")

    @property
    def effective_ramp(self) -> int:
        return self.ramp if self.kind.startswith("gradual") else 1


def _sigmoid(z: float) -> float:
    return 1.0 / (1.0 + math.exp(-z))


class SyntheticStream:
    """Deterministic non-stationary stream; one rng per concern so adding a
    target never perturbs the feature noise sequence."""

    def __init__(self, features: int = 4, targets=("y0",), seed: int = 0,
                 resolution_minutes: int = 60, noise: float = 0.02,
                 start: datetime | None = None):
        if features < 1:
            raise ArgumentError("need at least one feature")
        self.n_features = features
        self.seed = seed
        self.noise = noise
        self.resolution = timedelta(minutes=resolution_minutes)
        self.start = start or datetime(2021, 1, 1)
        self.t = 0
        param_rng = np.random.default_rng(seed)
        self.periods = param_rng.integers(60, 240, size=features).astype(np.float64)
        self.phases = param_rng.uniform(0, 2 * math.pi, size=features)
        self._feature_rng = np.random.default_rng(seed + 1)
        self._drift_rng = np.random.default_rng(seed + 2)
        self._input_drifts: list[tuple[DriftSpec, int, np.ndarray]] = []
        self._mapping_drifts: list[tuple[DriftSpec, int]] = []
        self._targets: dict[str, dict] = {}
        for t in targets:
            self.add_target(t)

    def add_target(self, target_id: str) -> None:
        if target_id in self._targets:
            raise ConflictError(f"target {target_id!r} already generated")
        trg = np.random.default_rng(self.seed + zlib.crc32(target_id.encode()))
        self._targets[target_id] = {
            "w": trg.uniform(0.6, 0.9),
            "c": trg.uniform(0.2, 0.4),
            "rng": trg,
        }

    @property
    def targets(self) -> list[str]:
        return list(self._targets)

    def schedule_drift(self, spec: DriftSpec) -> None:
        """Arm a drift with onset relative to the current stream position."""
        if spec.kind == "none":
            return
        onset_abs = self.t + spec.onset
        if spec.kind.endswith("input"):
            direction = self._drift_rng.uniform(-0.5, 0.5, size=self.n_features)
            self._input_drifts.append((spec, onset_abs, direction))
        else:
            self._mapping_drifts.append((spec, onset_abs))

    def _progress(self, spec: DriftSpec, onset_abs: int, t: int) -> float:
        if t < onset_abs:
            return 0.0
        return min(1.0, (t - onset_abs + 1) / spec.effective_ramp)

    def _mapping_factor(self, t: int) -> float:
        factor = 1.0
        for spec, onset in self._mapping_drifts:
            p = self._progress(spec, onset, t)
            factor *= 1.0 + (spec.magnitude - 1.0) * p
        return factor

    def take(self, n: int) -> list[Sample]:
        if n < 1:
            raise ArgumentError("n must be >= 1")
        out = []
        d = self.n_features
        i1, i2 = 1 % d, 2 % d
        for _ in range(n):
            t = self.t
            x = 0.5 + 0.4 * np.sin(2 * math.pi * t / self.periods + self.phases)
            for spec, onset, direction in self._input_drifts:
                p = self._progress(spec, onset, t)
                if p > 0:
                    x = x + spec.magnitude * p * direction
            x = x + self._feature_rng.normal(0.0, self.noise, size=d)
            x = np.clip(x, 0.0, 1.0)
            factor = self._mapping_factor(t)
            y = {}
            for target_id, cfg in self._targets.items():
                base = (0.5
                        + factor * cfg["w"] * (_sigmoid(6.0 * (x[0] - 0.5)) - 0.5)
                        + factor * cfg["c"] * (x[i1] * x[i2] - 0.25))
                value = base + cfg["rng"].normal(0.0, self.noise)
                y[target_id] = float(np.clip(value, 0.0, 1.0))
            out.append(Sample(self.start + t * self.resolution, x, y))
            self.t += 1
        return out


def generate(spec: DriftSpec, n: int, seed: int, *, features: int = 4,
             targets=("y0",), resolution_minutes: int = 60,
             noise: float = 0.02) -> list[Sample]:
    """Fresh stream of n samples with one drift applied at its onset index."""
    stream = SyntheticStream(features=features, targets=targets, seed=seed,
                             resolution_minutes=resolution_minutes, noise=noise)
    stream.schedule_drift(spec)
    return stream.take(n)


# --- CSV ingestion ---------------------------------------------------------------

@dataclass(frozen=True)
class FeatureSpec:
    name: str
    lo: float = 0.0
    hi: float = 1.0


@dataclass(frozen=True)
class CsvSchema:
    name: str
    timestamp_column: str
    features: tuple[FeatureSpec, ...]
    target_columns: tuple[str, ...]
    resolution_minutes: int
    malfunction_filter_hours: float | None = None

    @property
    def feature_names(self) -> list[str]:
        return [f.name for f in self.features]


def _specs(names, lo=0.0, hi=1.0):
    return tuple(FeatureSpec(n, lo, hi) for n in names)


WIND_SCHEMA = CsvSchema(
    name="wind",
    timestamp_column="timestamp",
    features=_specs([
        "wind_speed_100m",
        "wind_speed_10m",
        "wind_dir_zonal_100m",
        "wind_dir_meridional_100m",
        "air_pressure",
        "air_temperature",
        "humidity",
    ]),
    target_columns=("power",),
    resolution_minutes=60,
    malfunction_filter_hours=24.0,
)

SOLAR_SCHEMA = CsvSchema(
    name="solar",
    timestamp_column="timestamp",
    features=_specs([
        "global_radiation",
        "direct_radiation",
        "diffuse_radiation",
        "cloud_cover",
        "temperature",
        "humidity",
        "wind_speed",
    ]) + _specs([
        "hour_sin", "hour_cos",
        "month_sin", "month_cos",
        "season_sin", "season_cos",
    ], lo=-1.0, hi=1.0),
    target_columns=("power",),
    resolution_minutes=180,
)

GRID_SCHEMA = CsvSchema(
    name="grid",
    timestamp_column="timestamp",
    features=_specs([
        "temperature_2m",
        "humidity",
        "pressure",
        "wind_speed_10m",
        "wind_speed_100m",
        "wind_dir_sin",
        "wind_dir_cos",
        "global_radiation",
        "direct_radiation",
        "diffuse_radiation",
        "cloud_cover",
        "precipitation",
        "snow_depth",
    ]),
    target_columns=("gen_wind_01", "gen_solar_01", "load_residential_01"),
    resolution_minutes=15,
)

SCHEMAS = {"wind": WIND_SCHEMA, "solar": SOLAR_SCHEMA, "grid": GRID_SCHEMA}


@dataclass
class CsvData:
    """Parsed rows in file order; NaN marks missing cells."""

    timestamps: np.ndarray
    features: np.ndarray
    targets: np.ndarray
    schema: CsvSchema
    warnings: list[str] = field(default_factory=list)

    def to_samples(self, impute: ImputeRule | None = None,
                   apply_malfunction_filter: bool = True) -> list[Sample]:
        """Impute feature gaps column-wise and build samples.

        Rows whose target cells are missing yield samples without that target;
        the 24h zero-production filter runs when the schema declares it.
        """
        impute = impute or ImputeRule("linear_interpolate")
        feats = self.features.copy()
        for j in range(feats.shape[1]):
            feats[:, j] = fill_missing(feats[:, j], impute)
        keep = np.ones(len(self.timestamps), dtype=bool)
        if apply_malfunction_filter and self.schema.malfunction_filter_hours is not None:
            production = np.nan_to_num(self.targets[:, 0], nan=1.0)
            keep = filter_malfunction(self.timestamps, production,
                                      self.schema.malfunction_filter_hours)
        samples = []
        for i in np.flatnonzero(keep):
            y = {t: float(self.targets[i, k])
                 for k, t in enumerate(self.schema.target_columns)
                 if not np.isnan(self.targets[i, k])}
            ts = self.timestamps[i].astype("datetime64[s]").item()
            samples.append(Sample(ts, feats[i], y or None))
        return samples


def load_csv(path, schema: CsvSchema, strict: bool = False) -> CsvData:
    """Parse a CSV against its schema, preserving row order.

    Missing cells become NaN for the preprocessing stage. Unparseable cells
    always raise; out-of-range values raise only under `strict`, otherwise
    they are recorded as warnings.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv_mod.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path} is empty") from None
        header = [h.strip() for h in header]
        wanted = [schema.timestamp_column, *schema.feature_names, *schema.target_columns]
        missing = [c for c in wanted if c not in header]
        if missing:
            raise SchemaError(f"{path} lacks column(s): {', '.join(missing)}")
        col = {name: header.index(name) for name in wanted}

        timestamps, feat_rows, target_rows, warnings = [], [], [], []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            raw_ts = row[col[schema.timestamp_column]].strip()
            try:
                ts = np.datetime64(datetime.fromisoformat(raw_ts))
            except ValueError:
                raise RowError(f"bad timestamp {raw_ts!r}", line_no) from None

            def cell(name):
                text = row[col[name]].strip()
                if not text:
                    return math.nan
                try:
                    return float(text)
                except ValueError:
                    raise RowError(f"unparseable value {text!r} in {name!r}",
                                   line_no) from None

            feats = [cell(f.name) for f in schema.features]
            for f, v in zip(schema.features, feats):
                if not math.isnan(v) and not f.lo <= v <= f.hi:
                    message = (f"line {line_no}: {f.name}={v} outside "
                               f"[{f.lo}, {f.hi}]")
                    if strict:
                        raise RowError(f"{f.name}={v} outside [{f.lo}, {f.hi}]", line_no)
                    warnings.append(message)
            timestamps.append(ts)
            feat_rows.append(feats)
            target_rows.append([cell(t) for t in schema.target_columns])

    return CsvData(
        timestamps=np.array(timestamps, dtype="datetime64[s]"),
        features=np.array(feat_rows, dtype=np.float64).reshape(len(feat_rows),
                                                               len(schema.features)),
        targets=np.array(target_rows, dtype=np.float64).reshape(len(target_rows),
                                                                len(schema.target_columns)),
        schema=schema,
        warnings=warnings,
    )


# --- scenario scripts ---------------------------------------------------------------

EVENT_KINDS = ("segment", "drift", "add_target", "checkpoint")


@dataclass
class ScenarioScript:
    """Replayable experiment: generator config, engine config, event list."""

    seed: int = 0
    generator: dict = field(default_factory=dict)
    engine: dict = field(default_factory=dict)
    warmup: int = 0
    events: list[tuple[str, dict]] = field(default_factory=list)
    base_dir: Path = field(default_factory=Path)

    def validate(self) -> None:
        if not any(kind == "segment" for kind, _ in self.events):
            raise ScenarioError("a scenario needs at least one segment event")
        for i, (kind, payload) in enumerate(self.events):
            if kind not in EVENT_KINDS:
                raise ScenarioError(f"unknown event kind {kind!r}", event_index=i)
            if kind == "segment" and "csv" not in payload and "count" not in payload:
                raise ScenarioError("segment needs a count (or a csv source)",
                                    event_index=i)
            if kind == "add_target" and not payload.get("target_id"):
                raise ScenarioError("add_target needs a target_id", event_index=i)


def load_scenario(path) -> ScenarioScript:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as err:
        raise ScenarioError(f"cannot read scenario {path}: {err}") from err
    if not isinstance(data, dict):
        raise ScenarioError(f"{path} must hold a mapping")
    events = []
    for i, entry in enumerate(data.get("events") or []):
        if not isinstance(entry, dict) or len(entry) != 1:
            raise ScenarioError("each event is a single-key mapping", event_index=i)
        kind, payload = next(iter(entry.items()))
        events.append((str(kind), payload or {}))
    script = ScenarioScript(
        seed=int(data.get("seed", 0)),
        generator=data.get("generator") or {},
        engine=data.get("engine") or {},
        warmup=int(data.get("warmup", 0)),
        events=events,
        base_dir=path.parent,
    )
    script.validate()
    return script


def build_engine(script: ScenarioScript, log_sink=None) -> tuple[Engine, SyntheticStream]:
    """Engine plus synthetic source configured and warm-started per script."""
    gen_cfg = dict(script.generator)
    stream = SyntheticStream(
        features=int(gen_cfg.get("features", 4)),
        targets=tuple(gen_cfg.get("targets", ("y0",))),
        seed=script.seed,
        resolution_minutes=int(gen_cfg.get("resolution_minutes", 60)),
        noise=float(gen_cfg.get("noise", 0.02)),
    )
    eng_cfg = dict(script.engine)
    threshold_cfg = eng_cfg.pop("threshold", None)
    strategy_cfg = eng_cfg.pop("strategy", None)
    policy_cfg = eng_cfg.pop("auto_policy", None)
    train_cfg = eng_cfg.pop("initial_train", None)
    kwargs = {}
    for key in ("latent_dim", "hidden", "novelty_capacity", "familiarity_cap",
                "finetune_encoder", "upstream_first", "clip_targets",
                "retained_size", "compute_budget_seconds", "max_heads"):
        if key in eng_cfg:
            kwargs[key] = eng_cfg.pop(key)
    if eng_cfg:
        raise ScenarioError(f"unknown engine settings {sorted(eng_cfg)}")
    engine = Engine(
        stream.n_features, stream.targets, seed=script.seed,
        threshold=Threshold(**threshold_cfg) if threshold_cfg else None,
        strategy=StrategySpec.from_dict(strategy_cfg) if strategy_cfg else None,
        auto_policy=AutoPolicy(**policy_cfg) if policy_cfg else None,
        log_sink=log_sink, **kwargs)
    if script.warmup:
        warmup = stream.take(script.warmup)
        engine.fit_initial(warmup, TrainConfig(**train_cfg) if train_cfg else None)
    return engine, stream


def replay(script: ScenarioScript, engine: Engine,
           stream: SyntheticStream) -> list[Event]:
    """Apply scenario events in order; the run log is the engine's event list."""
    start = len(engine.events)
    for i, (kind, payload) in enumerate(script.events):
        try:
            if kind == "segment":
                if "csv" in payload:
                    schema = SCHEMAS.get(str(payload.get("schema", "")).lower())
                    if schema is None:
                        raise ScenarioError(f"unknown csv schema {payload.get('schema')!r}",
                                            event_index=i)
                    data = load_csv(script.base_dir / payload["csv"], schema,
                                    strict=bool(payload.get("strict", False)))
                    samples = data.to_samples()
                    if "count" in payload:
                        samples = samples[: int(payload["count"])]
                else:
                    samples = stream.take(int(payload["count"]))
                engine.annotate("segment", {"index": i, "count": len(samples)})
                for sample in samples:
                    engine.ingest(sample)
            elif kind == "drift":
                spec = DriftSpec(
                    kind=str(payload.get("kind", "abrupt_mapping")),
                    onset=int(payload.get("onset", 0)),
                    ramp=int(payload.get("ramp", 1)),
                    magnitude=float(payload.get("magnitude", -1.0)))
                stream.schedule_drift(spec)
                engine.annotate("drift", {"index": i, **vars(spec)})
            elif kind == "add_target":
                target_id = str(payload["target_id"])
                stream.add_target(target_id)
                warmup_count = int(payload.get("warmup_count", 0))
                warmup = stream.take(warmup_count) if warmup_count else []
                strategy = payload.get("strategy")
                engine.add_target(
                    target_id,
                    strategy=StrategySpec.from_dict(strategy) if strategy else None,
                    warmup_samples=warmup)
            elif kind == "checkpoint":
                engine.checkpoint(str(payload.get("label", f"checkpoint-{i}")))
            else:
                raise ScenarioError(f"unknown event kind {kind!r}", event_index=i)
        except ScenarioError:
            raise
        except DriftlearnError as err:
            raise ScenarioError(f"event {i} ({kind}) failed: {err}",
                                event_index=i) from err
    return engine.events[start:]
