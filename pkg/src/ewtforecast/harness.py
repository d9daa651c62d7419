"""Experiment orchestration: hyper-parameter search, backtesting runs, persistence.

An experiment loads a series, splits it chronologically, builds features for
one of three pipelines (raw lags, walk-forward band decomposition, or the
deliberately leaky full-series decomposition), tunes hyper-parameters on the
validation span, refits on train+validation, and evaluates the test span.
Persistence and plain-ridge baselines are always evaluated alongside so
improvements stay interpretable. Test rows are assembled exactly once, after
tuning has finished.

Reports embed their fully-resolved configuration, so rerunning a report
reproduces its forecasts bit for bit.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from ewtforecast import edrvfl as edrvfl_mod
from ewtforecast import rvfl as rvfl_mod
from ewtforecast.ewt import EwtBoundaries
from ewtforecast.metrics import EvalSeries, compute_metrics
from ewtforecast.rvfl import RvflConfig, RvflModel
from ewtforecast.edrvfl import EdRvflConfig, EdRvflModel
from ewtforecast.series import (
    SplitSpec,
    TimeSeries,
    WindowedDataset,
    apply_scaler,
    embed,
    fit_scaler,
    load_csv,
    split_boundaries,
)
from ewtforecast.walkforward import (
    DEFAULT_WINDOW_FLOOR,
    MIN_WINDOW_MARGIN,
    WalkForwardConfig,
    build_walkforward_features,
    leaky_features,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1"
FAMILIES = ("rvfl", "edrvfl", "baseline_persistence", "baseline_linear")
PIPELINES = ("raw_lags", "walkforward_ewt", "leaky_ewt")
METRIC_NAMES = ("mae", "mse", "rmse", "mape", "mase", "dstat")
MIN_RELATIVE_GAIN = 1e-6  # layer acceptance threshold for the layer-wise search


class ConfigError(ValueError):
    """Invalid experiment configuration (bad value, unknown key, missing file)."""


class ModelVersionError(RuntimeError):
    """Persisted model uses an unsupported schema version."""


class CorruptModelError(RuntimeError):
    """Persisted model file is unreadable or fails its checksum."""


class ModelParams(NamedTuple):
    n_enhancement: int
    regularization: float
    activation: str
    input_scale: float
    direct_link: bool
    output_bias: bool
    seed: int

    def as_dict(self) -> dict:
        return dict(self._asdict())


def _require_non_empty(name: str, values) -> tuple:
    values = tuple(values)
    if not values:
        raise ConfigError(f"grid axis {name!r} must not be empty")
    return values


@dataclass(frozen=True)
class GridSpace:
    """Candidate values for every tunable axis; single-valued axes pin a choice.

    Model axes (nodes, regularization, activation, scale, links, bias, seed)
    are searched by :func:`grid_search`; pipeline axes (lags, bands, gamma,
    boundary mode) select feature builds and are iterated by
    :func:`run_experiment` around it.
    """

    n_enhancement: tuple = (50,)
    regularization: tuple = (1.0,)
    activation: tuple = ("sigmoid",)
    input_scale: tuple = (1.0,)
    lags: tuple = (8,)
    n_bands: tuple = (3,)
    gamma: tuple = (0.1,)
    direct_link: tuple = (True,)
    output_bias: tuple = (False,)
    boundary_mode: tuple = ("adaptive_per_step",)
    seeds: tuple = (0,)

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            object.__setattr__(self, name, _require_non_empty(name, getattr(self, name)))

    @property
    def model_size(self) -> int:
        return (len(self.n_enhancement) * len(self.regularization) * len(self.activation)
                * len(self.input_scale) * len(self.direct_link) * len(self.output_bias)
                * len(self.seeds))

    def pipeline_size(self, pipeline: str) -> int:
        if pipeline == "raw_lags":
            return len(set(self.lags))
        return (len(set(self.lags)) * len(set(self.n_bands)) * len(set(self.gamma))
                * len(set(self.boundary_mode)))

    def size(self, pipeline: str) -> int:
        return self.model_size * self.pipeline_size(pipeline)

    def model_candidates(self) -> list[ModelParams]:
        combos = itertools.product(
            sorted(set(self.n_enhancement)), sorted(set(self.regularization)),
            sorted(set(self.activation)), sorted(set(self.input_scale)),
            sorted(set(self.direct_link)), sorted(set(self.output_bias)),
            sorted(set(self.seeds)),
        )
        return [ModelParams(*c) for c in combos]

    def pipeline_candidates(self, pipeline: str) -> list[dict]:
        if pipeline == "raw_lags":
            return [{"lags": int(l)} for l in sorted(set(self.lags))]
        combos = itertools.product(
            sorted(set(self.lags)), sorted(set(self.n_bands)),
            sorted(set(self.gamma)), sorted(set(self.boundary_mode)),
        )
        return [
            {"lags": int(l), "n_bands": int(k), "gamma": float(g), "boundary_mode": m}
            for l, k, g, m in combos
        ]

    def to_dict(self) -> dict:
        return {name: list(getattr(self, name)) for name in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, raw: dict) -> "GridSpace":
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown grid keys: {sorted(unknown)}")
        return cls(**{k: tuple(v) for k, v in raw.items()})


@dataclass(frozen=True)
class ExperimentConfig:
    data_path: str
    split: SplitSpec
    family: str
    pipeline: str
    grid: GridSpace = field(default_factory=GridSpace)
    data_column: object = 0
    data_has_header: bool = False
    metrics: tuple = METRIC_NAMES
    output_dir: str = "runs"
    seed: int = 0
    horizon: int = 1
    max_layers: int = 3
    scaler: str = "none"
    window: object = "auto"
    refit_on_train_plus_validation: bool = True
    jobs: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if self.pipeline not in PIPELINES:
            raise ConfigError(f"pipeline must be one of {PIPELINES}, got {self.pipeline!r}")
        bad = set(self.metrics) - set(METRIC_NAMES)
        if bad:
            raise ConfigError(f"unknown metrics: {sorted(bad)}")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if self.max_layers < 1:
            raise ConfigError("max_layers must be >= 1")
        if self.scaler not in ("none", "zscore", "minmax"):
            raise ConfigError(f"unknown scaler {self.scaler!r}")
        if isinstance(self.window, str):
            if self.window not in ("auto", "all"):
                raise ConfigError(f"window must be an int, 'auto' or 'all', got {self.window!r}")
        elif int(self.window) < 2:
            raise ConfigError("explicit window must be >= 2")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        object.__setattr__(self, "metrics", tuple(self.metrics))

    def to_dict(self) -> dict:
        return {
            "data": {"path": self.data_path, "column": self.data_column,
                     "has_header": self.data_has_header},
            "split": {"train_fraction": self.split.train_fraction,
                      "validation_fraction": self.split.validation_fraction},
            "family": self.family,
            "pipeline": self.pipeline,
            "grid": self.grid.to_dict(),
            "metrics": list(self.metrics),
            "output_dir": self.output_dir,
            "seed": self.seed,
            "horizon": self.horizon,
            "max_layers": self.max_layers,
            "scaler": self.scaler,
            "window": self.window,
            "refit_on_train_plus_validation": self.refit_on_train_plus_validation,
            "jobs": self.jobs,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {"data", "split", "family", "pipeline", "grid", "metrics", "output_dir",
                 "seed", "horizon", "max_layers", "scaler", "window",
                 "refit_on_train_plus_validation", "jobs"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for required in ("data", "split", "family", "pipeline"):
            if required not in raw:
                raise ConfigError(f"missing config key {required!r}")
        data = dict(raw["data"])
        unknown = set(data) - {"path", "column", "has_header"}
        if unknown:
            raise ConfigError(f"unknown data keys: {sorted(unknown)}")
        if "path" not in data:
            raise ConfigError("missing data.path")
        split_raw = dict(raw["split"])
        unknown = set(split_raw) - {"train_fraction", "validation_fraction"}
        if unknown:
            raise ConfigError(f"unknown split keys: {sorted(unknown)}")
        try:
            split = SplitSpec(**split_raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid split: {exc}") from exc
        grid = GridSpace.from_dict(raw.get("grid", {}))
        try:
            return cls(
                data_path=data["path"],
                data_column=data.get("column", 0),
                data_has_header=bool(data.get("has_header", False)),
                split=split,
                family=raw["family"],
                pipeline=raw["pipeline"],
                grid=grid,
                metrics=tuple(raw.get("metrics", METRIC_NAMES)),
                output_dir=raw.get("output_dir", "runs"),
                seed=int(raw.get("seed", 0)),
                horizon=int(raw.get("horizon", 1)),
                max_layers=int(raw.get("max_layers", 3)),
                scaler=raw.get("scaler", "none"),
                window=raw.get("window", "auto"),
                refit_on_train_plus_validation=bool(raw.get("refit_on_train_plus_validation", True)),
                jobs=int(raw.get("jobs", 1)),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def load_experiment_config(path) -> ExperimentConfig:
    """Parse a config file; a report file is accepted via its embedded config."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"no such config file: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if "schema_version" in raw and "config" in raw:
        raw = raw["config"]
    return ExperimentConfig.from_dict(raw)


@dataclass
class CandidateOutcome:
    params: dict
    val_rmse: float | None
    error: str | None = None


@dataclass
class GridSearchResult:
    best: ModelParams
    best_rmse: float
    leaderboard: list


@dataclass
class LayerwiseResult:
    layer_nodes: tuple
    layer_regs: tuple
    shared: ModelParams
    best_rmse: float
    history: tuple
    leaderboard: list


def _rmse(pred: np.ndarray, target: np.ndarray) -> float:
    pred = np.asarray(pred).ravel()
    target = np.asarray(target).ravel()
    if target.size == 0:
        # Only reachable for single-candidate grids (no validation span).
        return 0.0
    return float(np.sqrt(np.mean((pred - target) ** 2)))


def _rvfl_config(p: ModelParams, base_seed: int) -> RvflConfig:
    return RvflConfig(
        n_enhancement=p.n_enhancement, activation=p.activation,
        regularization=p.regularization, input_scale=p.input_scale,
        direct_link=p.direct_link, output_bias=p.output_bias,
        seed=base_seed + p.seed,
    )


def grid_search(space: GridSpace, train: WindowedDataset, val: WindowedDataset,
                base_seed: int = 0, jobs: int = 1) -> GridSearchResult:
    """Exhaustive search of the model axes, scored by validation RMSE.

    Every combination is evaluated; failures are recorded on the leaderboard
    and skipped. Ties break on the lexicographic order of the candidate tuple,
    so permuting the axis lists cannot change the winner.
    """
    candidates = space.model_candidates()
    logger.info("grid search over %d model candidates", len(candidates))

    def evaluate(p: ModelParams) -> CandidateOutcome:
        try:
            model = rvfl_mod.fit(train.X, train.Y, _rvfl_config(p, base_seed))
            return CandidateOutcome(p.as_dict(), _rmse(rvfl_mod.predict(model, val.X), val.Y))
        except (ValueError, RuntimeError) as exc:
            return CandidateOutcome(p.as_dict(), None, str(exc))

    outcomes = _map_candidates(evaluate, candidates, jobs)
    best, best_rmse = _pick_winner(candidates, outcomes)
    return GridSearchResult(best, best_rmse, outcomes)


def _map_candidates(fn, candidates, jobs):
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, candidates))
    return [fn(c) for c in candidates]


def _pick_winner(candidates, outcomes):
    scored = [(o.val_rmse, tuple(c)) for c, o in zip(candidates, outcomes) if o.val_rmse is not None]
    if not scored:
        raise RuntimeError("every grid candidate failed; see the leaderboard for reasons")
    best_rmse, best_tuple = min(scored)
    return type(candidates[0])(*best_tuple), best_rmse


def layerwise_grid_search(space: GridSpace, train: WindowedDataset, val: WindowedDataset,
                          max_layers: int, base_seed: int = 0,
                          ensemble_rule: str = "median", jobs: int = 1) -> LayerwiseResult:
    """Greedy deep-network tuning: fix each layer's size/regularization in turn.

    Stage one searches the full model grid for a one-layer network. Each later
    stage searches nodes x regularization for the new layer while all earlier
    layers stay fixed, and the layer is kept only when validation RMSE improves
    by at least a relative ``1e-6``; otherwise the search stops early. Direct
    links are structural in this architecture, so that axis is ignored.
    """
    if max_layers < 1:
        raise ValueError("max_layers must be >= 1")

    def evaluate(nodes: tuple, regs: tuple, shared: ModelParams) -> CandidateOutcome:
        try:
            cfg = EdRvflConfig(
                n_layers=len(nodes), n_enhancement=nodes, regularization=regs,
                activation=shared.activation, input_scale=shared.input_scale,
                ensemble_rule=ensemble_rule, output_bias=shared.output_bias,
                seed=base_seed + shared.seed,
            )
            model = edrvfl_mod.fit_edrvfl(train.X, train.Y, cfg)
            rmse = _rmse(edrvfl_mod.ensemble_predict(model, val.X), val.Y)
            params = {"layer_nodes": list(nodes), "layer_regs": list(regs), **shared.as_dict()}
            return CandidateOutcome(params, rmse)
        except (ValueError, RuntimeError) as exc:
            params = {"layer_nodes": list(nodes), "layer_regs": list(regs), **shared.as_dict()}
            return CandidateOutcome(params, None, str(exc))

    stage1 = sorted({m._replace(direct_link=True) for m in space.model_candidates()})
    leaderboard = []
    outcomes = _map_candidates(lambda p: evaluate((p.n_enhancement,), (p.regularization,), p),
                               stage1, jobs)
    leaderboard.extend(outcomes)
    shared, best_rmse = _pick_winner(stage1, outcomes)
    nodes = (shared.n_enhancement,)
    regs = (shared.regularization,)
    history = [best_rmse]

    pairs = sorted(set(itertools.product(space.n_enhancement, space.regularization)))
    for _ in range(2, max_layers + 1):
        stage = [(nodes + (l,), regs + (c,)) for l, c in pairs]
        outcomes = _map_candidates(lambda nc: evaluate(nc[0], nc[1], shared), stage, jobs)
        leaderboard.extend(outcomes)
        scored = [(o.val_rmse, s) for s, o in zip(stage, outcomes) if o.val_rmse is not None]
        if not scored:
            break
        rmse_l, (nodes_l, regs_l) = min(scored)
        if rmse_l > best_rmse * (1.0 - MIN_RELATIVE_GAIN):
            break
        nodes, regs, best_rmse = nodes_l, regs_l, rmse_l
        history.append(best_rmse)
    return LayerwiseResult(nodes, regs, shared, best_rmse, tuple(history), leaderboard)


def extract_test_rows(dataset: WindowedDataset, indices: np.ndarray) -> WindowedDataset:
    """The single gate through which test rows leave a feature build."""
    return dataset.take(indices)


class _PipelineBuild:
    """Feature datasets for one pipeline candidate.

    Tuning rows (targets before the test span) are built eagerly; test rows
    are assembled only on request, so nothing downstream can touch them before
    tuning is over.
    """

    def __init__(self, ts: TimeSeries, pipeline: str, params: dict, horizon: int,
                 window_policy, i_train: int, i_val: int, jobs: int):
        self.ts = ts
        self.pipeline = pipeline
        self.params = params
        self.horizon = horizon
        self.jobs = jobs
        self.i_val = i_val
        n = len(ts)
        h = horizon
        lags = params["lags"]

        if pipeline == "raw_lags":
            self.wf_cfg = None
            self.start = lags - 1
        else:
            window = self._resolve_window(window_policy, lags, i_train, h)
            self.wf_cfg = WalkForwardConfig(
                n_bands=params["n_bands"], lags=lags, horizon=h, window=window,
                gamma=params["gamma"], boundary_mode=params["boundary_mode"],
            )
            self.start = (lags + MIN_WINDOW_MARGIN - 1) if window == "all" else window - 1
        self.tune_stop = i_val - h
        self.test_stop = n - h
        if self.tune_stop <= self.start:
            raise ValueError(
                f"no tuning rows: first origin {self.start} reaches past the validation span"
            )
        self.tune = self._build(self.start, self.tune_stop)
        targets = self.tune.origin_indices + h
        self.train_mask = targets < i_train
        self.val_mask = targets >= i_train
        if not self.train_mask.any():
            raise ValueError("no training rows inside the training span")
        self.frozen = None
        if self.tune.meta and self.tune.meta.get("frozen_boundaries") is not None:
            self.frozen = EwtBoundaries(np.asarray(self.tune.meta["frozen_boundaries"]),
                                        uniform_fallback=bool(self.tune.meta["fallback_count"]))

    @staticmethod
    def _resolve_window(policy, lags: int, i_train: int, horizon: int):
        if policy == "all":
            return "all"
        nominal = max(4 * lags, DEFAULT_WINDOW_FLOOR) if policy == "auto" else int(policy)
        if policy == "auto":
            nominal = min(nominal, i_train - horizon)  # keep at least one training row
        if nominal < lags + MIN_WINDOW_MARGIN:
            raise ValueError(f"window {nominal} too small for lags {lags}")
        return nominal

    def _build(self, start: int, stop: int, frozen: EwtBoundaries | None = None) -> WindowedDataset:
        if self.pipeline == "raw_lags":
            full = embed(self.ts, self.params["lags"], self.horizon)
            keep = (full.origin_indices >= start) & (full.origin_indices < stop)
            return full.take(np.flatnonzero(keep))
        if self.pipeline == "walkforward_ewt":
            return build_walkforward_features(self.ts, self.wf_cfg, start, stop,
                                              jobs=self.jobs, frozen_boundaries=frozen)
        return leaky_features(self.ts, self.wf_cfg, start, stop)

    def train_rows(self) -> WindowedDataset:
        return self.tune.take(np.flatnonzero(self.train_mask))

    def val_rows(self) -> WindowedDataset:
        return self.tune.take(np.flatnonzero(self.val_mask))

    def refit_rows(self, include_validation: bool) -> WindowedDataset:
        return self.tune if include_validation else self.train_rows()

    def test_rows(self) -> WindowedDataset:
        test = self._build(self.tune_stop, self.test_stop, self.frozen)
        return extract_test_rows(test, np.arange(test.n_samples))

    def fallback_count(self, *datasets) -> int:
        return sum(int(d.meta["fallback_count"]) for d in datasets
                   if d.meta and "fallback_count" in d.meta)


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    chosen: dict
    validation_metrics: dict | None
    test_metrics: dict
    origins: list
    actuals: list
    forecasts: dict
    leaderboard: list
    meta: dict

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "config": self.config.to_dict(),
            "chosen": self.chosen,
            "validation_metrics": self.validation_metrics,
            "test_metrics": self.test_metrics,
            "forecasts": {"origins": self.origins, "actuals": self.actuals,
                          "models": self.forecasts},
            "leaderboard": self.leaderboard,
            "meta": self.meta,
        }


def _scale_pair(kind: str, train: WindowedDataset, val: WindowedDataset):
    if kind == "none":
        return None, train, val
    scaler = fit_scaler(train.X, kind)
    scaled_train = WindowedDataset(apply_scaler(scaler, train.X), train.Y, train.lags,
                                   train.horizon, train.origin_indices, train.feature_names)
    scaled_val = WindowedDataset(apply_scaler(scaler, val.X), val.Y, val.lags,
                                 val.horizon, val.origin_indices, val.feature_names)
    return scaler, scaled_train, scaled_val


def _filter_metrics(metric_set, selection) -> dict:
    raw = metric_set.to_dict()
    out = {}
    for name in METRIC_NAMES:
        if name in selection:
            out["mape_pct" if name == "mape" else name] = (
                None if raw[name] is None
                else raw[name] * 100.0 if name == "mape"
                else raw[name]
            )
    return out


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """End-to-end run: load, split, tune, refit, evaluate, assemble the report."""
    started = time.perf_counter()
    try:
        ts = load_csv(cfg.data_path, cfg.data_column, cfg.data_has_header)
    except (FileNotFoundError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    n = len(ts)
    i_train, i_val = split_boundaries(n, cfg.split)
    n_val = i_val - i_train
    if i_train < 1 or n - i_val < 1:
        raise ConfigError(f"split leaves an empty train or test segment for n={n}")
    h = cfg.horizon
    if i_val - h < 0:
        raise ConfigError("horizon reaches past the start of the test span")

    needs_tuning = cfg.family in ("rvfl", "edrvfl", "baseline_linear")
    grid_size = cfg.grid.size(cfg.pipeline) if needs_tuning else 0
    if needs_tuning and grid_size > 1 and n_val < 1:
        raise ConfigError("tuning over more than one candidate requires a validation segment")
    logger.info("experiment %s/%s: grid size %d", cfg.family, cfg.pipeline, grid_size)

    leaderboard: list[dict] = []
    best = None  # (rmse, pipe_tuple, model_tuple, build, chosen dict)

    if cfg.family in ("rvfl", "edrvfl"):
        best = _tune_family(cfg, ts, i_train, i_val, leaderboard)
    fallbacks = 0

    # Test-span scaffolding shared by every model.
    test_origins = np.arange(i_val - h, n - h, dtype=np.int64)
    test_actuals = ts.values[test_origins + h]
    previous = ts.values[test_origins + h - 1]
    refit_span = i_val if cfg.refit_on_train_plus_validation else i_train
    train_series = ts.values[:refit_span]

    forecasts: dict[str, np.ndarray] = {}
    chosen: dict = {"family": cfg.family}
    validation_metrics = None

    if cfg.family in ("rvfl", "edrvfl"):
        rmse_val, pipe_params, build, model_info = best
        chosen.update({"pipeline_params": pipe_params, **model_info,
                       "validation_rmse": rmse_val})
        final_model, val_pred, val_rows = _refit_chosen(cfg, build, model_info)
        if val_rows is not None and val_rows.n_samples:
            ev = EvalSeries(val_rows.Y.ravel(), val_pred.ravel(),
                            ts.values[val_rows.origin_indices + h - 1], ts.values[:i_train])
            validation_metrics = _filter_metrics(compute_metrics(ev), cfg.metrics)
        test_ds = build.test_rows()
        if not np.array_equal(test_ds.origin_indices, test_origins):
            raise RuntimeError("test rows do not cover the expected origins")
        if cfg.family == "rvfl":
            pred = rvfl_mod.predict(final_model, test_ds.X)
        else:
            pred = edrvfl_mod.ensemble_predict(final_model, test_ds.X)
        forecasts[cfg.family] = pred.ravel()
        chosen_name = cfg.family
        fallbacks += build.fallback_count(build.tune, test_ds)
        lags_for_baseline = pipe_params["lags"]
    elif cfg.family == "baseline_persistence":
        chosen_name = "persistence"
        lags_for_baseline = min(cfg.grid.lags)
    else:
        chosen_name = "linear"
        lags_for_baseline = None  # tuned below

    # Baselines are always evaluated on the same test origins.
    forecasts["persistence"] = ts.values[test_origins].copy()
    linear_forecast, linear_info = _linear_baseline(
        cfg, ts, i_train, i_val, lags_for_baseline, leaderboard if cfg.family == "baseline_linear" else [],
    )
    forecasts["linear"] = linear_forecast
    if cfg.family == "baseline_linear":
        chosen.update(linear_info)
        chosen["validation_rmse"] = linear_info.get("validation_rmse")

    test_metrics = {}
    for name in sorted(forecasts):
        ev = EvalSeries(test_actuals, forecasts[name], previous, train_series)
        test_metrics[name] = _filter_metrics(compute_metrics(ev), cfg.metrics)

    report = ExperimentReport(
        config=cfg,
        chosen={**chosen, "name": chosen_name},
        validation_metrics=validation_metrics,
        test_metrics=test_metrics,
        origins=[int(t) for t in test_origins],
        actuals=[float(v) for v in test_actuals],
        forecasts={name: [float(v) for v in vals] for name, vals in sorted(forecasts.items())},
        leaderboard=leaderboard,
        meta={
            "schema_version": SCHEMA_VERSION,
            "series_name": ts.name,
            "series_length": n,
            "split_indices": {"train_end": i_train, "validation_end": i_val},
            "grid_size": grid_size,
            "fallback_count": fallbacks,
            "base_seed": cfg.seed,
            "wall_time_s": round(time.perf_counter() - started, 6),
        },
    )
    return report


def _tune_family(cfg: ExperimentConfig, ts: TimeSeries, i_train: int, i_val: int,
                 leaderboard: list):
    """Search pipeline x model candidates; return the winning build and params."""
    best = None
    for pipe_params in cfg.grid.pipeline_candidates(cfg.pipeline):
        try:
            build = _PipelineBuild(ts, cfg.pipeline, pipe_params, cfg.horizon,
                                   cfg.window, i_train, i_val, cfg.jobs)
        except ValueError as exc:
            leaderboard.append({"pipeline": pipe_params, "params": None,
                                "val_rmse": None, "error": f"feature build failed: {exc}"})
            continue
        train_rows, val_rows = build.train_rows(), build.val_rows()
        scaler, scaled_train, scaled_val = _scale_pair(cfg.scaler, train_rows, val_rows)
        if cfg.family == "rvfl":
            result = grid_search(cfg.grid, scaled_train, scaled_val,
                                 base_seed=cfg.seed, jobs=cfg.jobs)
            model_info = {"model_params": result.best.as_dict()}
            key = (result.best_rmse, tuple(sorted(pipe_params.items())), tuple(result.best))
        else:
            result = layerwise_grid_search(cfg.grid, scaled_train, scaled_val, cfg.max_layers,
                                           base_seed=cfg.seed, jobs=cfg.jobs)
            model_info = {
                "model_params": result.shared.as_dict(),
                "layer_nodes": list(result.layer_nodes),
                "layer_regs": list(result.layer_regs),
                "layerwise_history": list(result.history),
            }
            key = (result.best_rmse, tuple(sorted(pipe_params.items())),
                   tuple(result.layer_nodes), tuple(result.layer_regs), tuple(result.shared))
        for outcome in result.leaderboard:
            leaderboard.append({"pipeline": pipe_params, **outcome.__dict__})
        if best is None or key < best[0]:
            best = (key, pipe_params, build, model_info)
    if best is None:
        raise RuntimeError("every pipeline candidate failed; see the leaderboard")
    key, pipe_params, build, model_info = best
    return key[0], pipe_params, build, model_info


def _refit_chosen(cfg: ExperimentConfig, build: _PipelineBuild, model_info: dict):
    """Refit the winner on train(+validation) rows; also return its validation fit."""
    train_rows, val_rows = build.train_rows(), build.val_rows()
    refit_rows = build.refit_rows(cfg.refit_on_train_plus_validation)
    scaler = None if cfg.scaler == "none" else fit_scaler(refit_rows.X, cfg.scaler)
    tuning_scaler = None if cfg.scaler == "none" else fit_scaler(train_rows.X, cfg.scaler)

    params = ModelParams(**model_info["model_params"])
    if cfg.family == "rvfl":
        rvfl_cfg = _rvfl_config(params, cfg.seed)
        val_model = rvfl_mod.fit(train_rows.X, train_rows.Y, rvfl_cfg, tuning_scaler)
        val_pred = rvfl_mod.predict(val_model, val_rows.X) if val_rows.n_samples else np.empty((0, 1))
        final = rvfl_mod.fit(refit_rows.X, refit_rows.Y, rvfl_cfg, scaler)
        return final, val_pred, val_rows

    ed_cfg = EdRvflConfig(
        n_layers=len(model_info["layer_nodes"]),
        n_enhancement=tuple(model_info["layer_nodes"]),
        regularization=tuple(model_info["layer_regs"]),
        activation=params.activation, input_scale=params.input_scale,
        output_bias=params.output_bias, seed=cfg.seed + params.seed,
    )
    val_model = edrvfl_mod.fit_edrvfl(train_rows.X, train_rows.Y, ed_cfg, tuning_scaler)
    val_pred = (edrvfl_mod.ensemble_predict(val_model, val_rows.X)
                if val_rows.n_samples else np.empty((0, 1)))
    final = edrvfl_mod.fit_edrvfl(refit_rows.X, refit_rows.Y, ed_cfg, scaler)
    return final, val_pred, val_rows


def _linear_baseline(cfg: ExperimentConfig, ts: TimeSeries, i_train: int, i_val: int,
                     lags: int | None, leaderboard: list):
    """Ridge on raw lags: persistence's honest competitor.

    The lag budget follows the chosen model when one exists; regularization is
    tuned on the validation span. Features stay unscaled by definition.
    """
    h = cfg.horizon
    lag_candidates = [lags] if lags is not None else sorted(set(cfg.grid.lags))
    reg_candidates = sorted(set(cfg.grid.regularization))
    best = None
    for lag in lag_candidates:
        full = embed(ts, lag, h)
        targets = full.origin_indices + h
        train_idx = np.flatnonzero(targets < i_train)
        val_idx = np.flatnonzero((targets >= i_train) & (targets < i_val))
        if train_idx.size == 0:
            continue
        for reg in reg_candidates:
            ridge_cfg = RvflConfig(n_enhancement=0, regularization=reg, direct_link=True,
                                   output_bias=False, seed=0)
            try:
                model = rvfl_mod.fit(full.X[train_idx], full.Y[train_idx], ridge_cfg)
            except (ValueError, RuntimeError) as exc:
                leaderboard.append({"pipeline": None, "params": {"lags": lag, "regularization": reg},
                                    "val_rmse": None, "error": str(exc)})
                continue
            rmse = (_rmse(rvfl_mod.predict(model, full.X[val_idx]), full.Y[val_idx])
                    if val_idx.size else 0.0)
            leaderboard.append({"pipeline": None, "params": {"lags": lag, "regularization": reg},
                                "val_rmse": rmse, "error": None})
            key = (rmse, lag, reg)
            if best is None or key < best[0]:
                best = (key, lag, reg, full)
    if best is None:
        raise RuntimeError("linear baseline could not be fit on any lag candidate")
    (rmse, _, _), lag, reg, full = best
    targets = full.origin_indices + h
    refit_end = i_val if cfg.refit_on_train_plus_validation else i_train
    refit_idx = np.flatnonzero(targets < refit_end)
    test_idx = np.flatnonzero(targets >= i_val)
    ridge_cfg = RvflConfig(n_enhancement=0, regularization=reg, direct_link=True,
                           output_bias=False, seed=0)
    model = rvfl_mod.fit(full.X[refit_idx], full.Y[refit_idx], ridge_cfg)
    test_rows = extract_test_rows(full, test_idx)
    pred = rvfl_mod.predict(model, test_rows.X).ravel()
    info = {"model_params": {"lags": lag, "regularization": reg}, "validation_rmse": rmse}
    return pred, info


def save_model(model, path) -> None:
    """Persist a trained model as one JSON document with a payload checksum."""
    if isinstance(model, RvflModel):
        kind = "rvfl"
    elif isinstance(model, EdRvflModel):
        kind = "edrvfl"
    else:
        raise TypeError(f"cannot persist object of type {type(model).__name__}")
    payload = {"kind": kind, **model.to_dict()}
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    envelope = {
        "schema_version": SCHEMA_VERSION,
        "checksum": hashlib.sha256(canonical.encode("utf-8")).hexdigest(),
        "payload": payload,
    }
    Path(path).write_text(json.dumps(envelope, sort_keys=True), encoding="utf-8")


def load_model(path):
    """Inverse of :func:`save_model`; checksum and version are verified first."""
    try:
        envelope = json.loads(Path(path).read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptModelError(f"model file {path} failed checksum verification: "
                                f"unparseable content ({exc})") from exc
    if not isinstance(envelope, dict) or "payload" not in envelope:
        raise CorruptModelError(f"model file {path} has no payload")
    version = envelope.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ModelVersionError(f"model schema {version!r} unsupported, expected {SCHEMA_VERSION!r}")
    canonical = json.dumps(envelope["payload"], sort_keys=True, separators=(",", ":"))
    digest = hashlib.sha256(canonical.encode("utf-8")).hexdigest()
    if digest != envelope.get("checksum"):
        raise CorruptModelError(f"model file {path} failed checksum verification")
    payload = envelope["payload"]
    kind = payload.pop("kind", None)
    if kind == "rvfl":
        return RvflModel.from_dict(payload)
    if kind == "edrvfl":
        return EdRvflModel.from_dict(payload)
    raise CorruptModelError(f"model file {path} has unknown kind {kind!r}")


def write_report(report: ExperimentReport, out_dir) -> dict:
    """Emit report.json plus flat metrics.csv and forecasts.csv (plot-ready)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "report": out / "report.json",
        "metrics": out / "metrics.csv",
        "forecasts": out / "forecasts.csv",
    }
    paths["report"].write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True),
                               encoding="utf-8")

    selected = [m for m in METRIC_NAMES if m in report.config.metrics]
    columns = ["mape_pct" if m == "mape" else m for m in selected]
    series_name = report.meta["series_name"]
    horizon = report.config.horizon
    lines = ["model,series,horizon,n_test," + ",".join(columns)]
    for model in sorted(report.test_metrics):
        vals = report.test_metrics[model]
        cells = ["" if vals[c] is None else repr(vals[c]) for c in columns]
        lines.append(f"{model},{series_name},{horizon},{len(report.origins)}," + ",".join(cells))
    paths["metrics"].write_text("\n".join(lines) + "\n", encoding="utf-8")

    rows = ["model,origin,actual,forecast"]
    for model in sorted(report.forecasts):
        for origin, actual, pred in zip(report.origins, report.actuals, report.forecasts[model]):
            rows.append(f"{model},{origin},{repr(actual)},{repr(pred)}")
    paths["forecasts"].write_text("\n".join(rows) + "\n", encoding="utf-8")
    return paths
