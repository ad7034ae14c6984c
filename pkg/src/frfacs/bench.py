"""Experiment harness: stratified CV, repeated runs, ablations, nested grid search, reports.

All randomness derives from ``master_seed``:

* fold assignment of repeat ``r``: ``derive_seed(master, FOLD_STREAM, r)``
* train/test split of repeat ``r``: ``derive_seed(master, SPLIT_STREAM, r)``
* forest seed for (repeat ``r``, fold ``f``): ``derive_seed(master, JOB_STREAM, r, f)``

Forest seeds do not depend on the model variant, so ablation variants are
paired: same folds, same bootstrap streams.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from ._random import FOLD_STREAM, JOB_STREAM, SPLIT_STREAM, derive_seed, make_rng
from .errors import ConfigurationError, TrainingError
from .fdata import FunctionalDataset
from .forest import ForestConfig, fit_forest, fknn_baseline
from .metrics import MetricReport, evaluate

logger = logging.getLogger(__name__)

HOLDOUT = -1


def stratified_folds(labels, k: int, seed: int) -> np.ndarray:
    """Fold id per sample: seeded shuffle within each class, then round-robin.

    The round-robin position carries over from one class to the next, so
    total fold sizes also stay within one of each other.
    """
    y = np.asarray(labels, dtype=np.int64).ravel()
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > y.size:
        raise ValueError(f"k={k} exceeds the number of samples ({y.size})")
    rng = np.random.default_rng(seed)
    folds = np.empty(y.size, dtype=np.int64)
    offset = 0
    for c in np.unique(y):
        members = np.flatnonzero(y == c)
        if members.size < k:
            logger.warning("class %d has %d samples for %d folds; stratification is best-effort", c, members.size, k)
        members = members[rng.permutation(members.size)]
        folds[members] = (offset + np.arange(members.size)) % k
        offset = (offset + members.size) % k
    return folds


def stratified_split(labels, train_fraction: float, seed: int):
    """Seeded per-class split; returns (train_idx, test_idx), both sorted."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie in (0, 1)")
    y = np.asarray(labels, dtype=np.int64).ravel()
    rng = np.random.default_rng(seed)
    train = []
    for c in np.unique(y):
        members = np.flatnonzero(y == c)
        members = members[rng.permutation(members.size)]
        n_train = int(round(train_fraction * members.size))
        n_train = min(max(n_train, 1), members.size - 1) if members.size > 1 else members.size
        train.append(members[:n_train])
    train = np.sort(np.concatenate(train))
    test = np.setdiff1d(np.arange(y.size), train)
    return train, test


@dataclass(frozen=True)
class ModelSpec:
    """A named model: an FRF-ACS forest configuration or the fKNN baseline."""

    name: str
    kind: str = "frfacs"
    forest: ForestConfig = field(default_factory=ForestConfig)
    k: int = 5
    metric: str = "l2"

    def __post_init__(self):
        if self.kind not in ("frfacs", "fknn"):
            raise ConfigurationError(f"unknown model kind {self.kind!r}")

    def to_dict(self) -> dict:
        d = {"name": self.name, "kind": self.kind}
        if self.kind == "frfacs":
            d["forest"] = self.forest.to_dict()
        else:
            d.update(k=self.k, metric=self.metric)
        return d


@dataclass(frozen=True)
class CVConfig:
    cv_folds: int = 10
    repeats: int = 1
    master_seed: int = 0
    split: Optional[float] = None
    workers: int = 1

    def __post_init__(self):
        if self.cv_folds < 2:
            raise ConfigurationError("cv_folds must be >= 2")
        if self.repeats < 1:
            raise ConfigurationError("repeats must be >= 1")
        if self.split is not None and not 0 < self.split < 1:
            raise ConfigurationError("split must lie in (0, 1)")


@dataclass
class FoldRecord:
    variant: str
    repeat: int
    fold: int
    metrics: dict
    minority_class: int
    warnings: list = field(default_factory=list)
    skipped: bool = False

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "repeat": self.repeat,
            "fold": "holdout" if self.fold == HOLDOUT else self.fold,
            "metrics": self.metrics,
            "minority_class": self.minority_class,
            "warnings": self.warnings,
            "skipped": self.skipped,
        }


def _sample_sd(x) -> Optional[float]:
    x = np.asarray(x, dtype=float)
    return float(np.std(x, ddof=1)) if x.size > 1 else None


def summarize(records) -> dict:
    """Mean and sample SD (n - 1 denominator) of every metric over the given records."""
    by_metric: dict = {}
    for r in records:
        if r.skipped:
            continue
        for k, v in r.metrics.items():
            by_metric.setdefault(k, []).append(v)
    return {k: {"mean": float(np.mean(v)), "sd": _sample_sd(v), "n": len(v)} for k, v in sorted(by_metric.items())}


def _minority(labels, n_classes: int) -> int:
    counts = np.bincount(labels, minlength=n_classes).astype(float)
    counts[counts == 0] = np.inf
    return int(np.argmin(counts))


def fit_fold(data: FunctionalDataset, train_idx, spec: ModelSpec, seed: int):
    """Fit ``spec`` on the training indices only; returns the fitted model (None for fKNN)."""
    if spec.kind == "fknn":
        return None
    cfg = replace(spec.forest, seed=int(seed))
    return fit_forest(data.subset(train_idx), cfg)


def evaluate_fold(data: FunctionalDataset, train_idx, test_idx, spec: ModelSpec, seed: int):
    train, test = data.subset(train_idx), data.subset(test_idx)
    minority = _minority(train.labels, data.n_classes)
    warnings: list = []
    if np.count_nonzero(train.class_counts()) < 2:
        return None, minority, ["training fold holds a single class; fold skipped"]
    if spec.kind == "fknn":
        pred = fknn_baseline(train, test, min(spec.k, train.n), spec.metric)
        score = None
    else:
        model = fit_fold(data, train_idx, spec, seed)
        warnings.extend(model.metadata.get("warnings", []))
        pred, proba = model.predict(test)
        score = proba[:, minority] if data.n_classes == 2 else None
    rep = evaluate(test.labels, pred, data.n_classes, minority, score)
    return rep, minority, warnings


def _job(data, spec, repeat, fold, train_idx, test_idx, seed):
    try:
        rep, minority, warns = evaluate_fold(data, train_idx, test_idx, spec, seed)
    except TrainingError as exc:
        rep, minority, warns = None, -1, [f"training failed: {exc}"]
    if rep is None:
        return FoldRecord(spec.name, repeat, fold, {}, minority, warns, skipped=True)
    return FoldRecord(spec.name, repeat, fold, rep.scalars(), minority, warns)


def _plan(data: FunctionalDataset, cv: CVConfig):
    """(repeat, fold, train_idx, test_idx, seed) for every CV fold and optional holdout."""
    plan = []
    for r in range(cv.repeats):
        if cv.split is not None:
            outer_train, outer_test = stratified_split(data.labels, cv.split, derive_seed(cv.master_seed, SPLIT_STREAM, r))
        else:
            outer_train, outer_test = np.arange(data.n), None
        folds = stratified_folds(data.labels[outer_train], cv.cv_folds, derive_seed(cv.master_seed, FOLD_STREAM, r))
        for f in range(cv.cv_folds):
            seed = derive_seed(cv.master_seed, JOB_STREAM, r, f)
            plan.append((r, f, outer_train[folds != f], outer_train[folds == f], seed))
        if outer_test is not None:
            seed = derive_seed(cv.master_seed, JOB_STREAM, r, cv.cv_folds)
            plan.append((r, HOLDOUT, outer_train, outer_test, seed))
    return plan


def _execute(data, specs, cv: CVConfig) -> list:
    jobs = [(spec, *p) for spec in specs for p in _plan(data, cv)]
    if cv.workers == 1:
        out = [_job(data, *j) for j in jobs]
    else:
        from joblib import Parallel, delayed

        out = Parallel(n_jobs=cv.workers)(delayed(_job)(data, *j) for j in jobs)
    order = {s.name: i for i, s in enumerate(specs)}
    # assemble by job identity, not completion order
    return sorted(out, key=lambda r: (order[r.variant], r.repeat, r.fold if r.fold != HOLDOUT else 1 << 30))


@dataclass
class CVResult:
    variant: str
    records: list

    @property
    def folds(self) -> list:
        return [r for r in self.records if r.fold != HOLDOUT]

    @property
    def holdout(self) -> list:
        return [r for r in self.records if r.fold == HOLDOUT]

    def summary(self) -> dict:
        return summarize(self.folds)

    def holdout_summary(self) -> dict:
        return summarize(self.holdout)

    def values(self, metric: str) -> np.ndarray:
        return np.array([r.metrics[metric] for r in self.folds if not r.skipped and metric in r.metrics])

    def to_dict(self) -> dict:
        d = {"variant": self.variant, "summary": self.summary(), "records": [r.to_dict() for r in self.records]}
        if self.holdout:
            d["holdout_summary"] = self.holdout_summary()
        return d


def run_cv(data: FunctionalDataset, spec: ModelSpec, cv: CVConfig = CVConfig()) -> CVResult:
    """Repeated stratified k-fold CV; every model artefact is fitted on training folds only."""
    return CVResult(spec.name, _execute(data, [spec], cv))


def run_models(data: FunctionalDataset, specs, cv: CVConfig = CVConfig()) -> list:
    """``run_cv`` for several models sharing folds and seeds; one CVResult per spec."""
    specs = list(specs)
    records = _execute(data, specs, cv)
    return [CVResult(s.name, [r for r in records if r.variant == s.name]) for s in specs]


def ablation_specs(base: ForestConfig) -> list:
    """Plain RF, +dynamic node weights, +SMOTE, and full FRF-ACS built from ``base``."""
    plain = replace(base, tree=replace(base.tree, weight_scheme="uniform"), use_smote=False, use_cost_bootstrap=False)
    return [
        ModelSpec("plain_rf", forest=plain),
        ModelSpec("dynamic_weights", forest=replace(plain, tree=replace(plain.tree, weight_scheme="node_dynamic"))),
        ModelSpec("smote", forest=replace(plain, use_smote=True)),
        ModelSpec(
            "full",
            forest=replace(base, tree=replace(base.tree, weight_scheme="node_dynamic"), use_smote=True, use_cost_bootstrap=True),
        ),
    ]


@dataclass
class AblationResult:
    results: list
    reference: str = "plain_rf"

    def by_name(self, name: str) -> CVResult:
        for r in self.results:
            if r.variant == name:
                return r
        raise KeyError(name)

    def paired_differences(self, metric: str, variant: str, reference: Optional[str] = None) -> np.ndarray:
        """Per-fold ``variant - reference`` differences over folds valid in both."""
        ref = self.by_name(reference or self.reference)
        var = self.by_name(variant)
        a = {(r.repeat, r.fold): r.metrics.get(metric) for r in var.folds if not r.skipped}
        b = {(r.repeat, r.fold): r.metrics.get(metric) for r in ref.folds if not r.skipped}
        keys = sorted(k for k in a if k in b and a[k] is not None and b[k] is not None)
        return np.array([a[k] - b[k] for k in keys])

    def table(self) -> list:
        rows = []
        for res in self.results:
            summ = res.summary()
            for metric, s in summ.items():
                row = {"variant": res.variant, "metric": metric, "mean": s["mean"], "sd": s["sd"]}
                if res.variant != self.reference:
                    d = self.paired_differences(metric, res.variant)
                    row["paired_mean_diff"] = float(d.mean()) if d.size else None
                    row["paired_sd_diff"] = _sample_sd(d)
                rows.append(row)
        return rows

    def to_dict(self) -> dict:
        return {"reference": self.reference, "variants": [r.to_dict() for r in self.results], "table": self.table()}


def run_ablation(data: FunctionalDataset, base: ForestConfig, cv: CVConfig = CVConfig(), specs=None) -> AblationResult:
    """Evaluate ablation variants under identical folds and forest seeds."""
    specs = list(specs) if specs is not None else ablation_specs(base)
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ConfigurationError("variant names must be unique")
    records = _execute(data, specs, cv)
    results = [CVResult(s.name, [r for r in records if r.variant == s.name]) for s in specs]
    return AblationResult(results, reference=specs[0].name)


GRID_PARAMS = ("n_trees", "max_depth", "min_samples_leaf", "n_components", "target_ratio", "weight_scheme", "use_smote")


@dataclass(frozen=True)
class GridSpec:
    """Per-parameter candidate lists; see ``GRID_PARAMS`` for the accepted names."""

    params: dict

    def __post_init__(self):
        if not self.params:
            raise ValueError("grid is empty")
        for k, v in self.params.items():
            if k not in GRID_PARAMS:
                raise ConfigurationError(f"unknown grid parameter {k!r}")
            if not isinstance(v, (list, tuple)) or len(v) == 0:
                raise ValueError(f"grid parameter {k!r} needs a non-empty list")

    def combinations(self) -> list:
        """All combinations in canonical (lexicographic) order, independent of input list order."""
        names = sorted(self.params)
        values = [sorted(set(self.params[k]), key=_value_key) for k in names]
        return [dict(zip(names, combo)) for combo in itertools.product(*values)]


def _value_key(v):
    # None sorts last (e.g. max_depth=None means unlimited)
    return (v is None, v if v is not None else 0)


def apply_params(base: ForestConfig, params: dict) -> ForestConfig:
    tree_kw = {k: params[k] for k in ("max_depth", "min_samples_leaf", "weight_scheme") if k in params}
    cfg = replace(base, tree=replace(base.tree, **tree_kw))
    if "n_trees" in params:
        cfg = replace(cfg, n_trees=int(params["n_trees"]))
    if "n_components" in params:
        cfg = replace(cfg, n_components=int(params["n_components"]), variance_fraction=None)
    if "target_ratio" in params:
        cfg = replace(cfg, smote=replace(cfg.smote, target_ratio=float(params["target_ratio"])))
    if "use_smote" in params:
        cfg = replace(cfg, use_smote=bool(params["use_smote"]))
    return cfg


# Search grids recommended per dataset type (mtry defaults to ceil(sqrt(M))).
RECOMMENDED_GRIDS = {
    "ECG200": {"n_trees": [100, 200], "max_depth": [10, 20, None], "min_samples_leaf": [1, 3], "n_components": [5, 8, 10], "target_ratio": [0.33, 0.5]},
    "Phoneme": {"n_trees": [200, 400], "max_depth": [20, 40], "min_samples_leaf": [3, 5], "n_components": [8, 10, 15], "target_ratio": [0.25, 0.5]},
    "Spectrometric": {"n_trees": [200, 400], "max_depth": [None, 20], "min_samples_leaf": [1, 3, 5], "n_components": [10, 15, 20], "target_ratio": [0.33, 0.5]},
    "SensorTrajectories": {"n_trees": [200, 400], "max_depth": [20, 40], "min_samples_leaf": [3, 5, 10], "n_components": [8, 10, 15], "target_ratio": [0.25, 0.5]},
}


@dataclass
class GridResult:
    best_params: dict
    best_score: dict
    table: list
    holdout: Optional[dict]
    train_size: int
    test_size: int

    def to_dict(self) -> dict:
        return {
            "best_params": self.best_params,
            "best_score": self.best_score,
            "table": self.table,
            "holdout": self.holdout,
            "train_size": self.train_size,
            "test_size": self.test_size,
        }


def _grid_score(summary: dict) -> tuple:
    f1 = summary.get("minority_f1", {}).get("mean", -math.inf)
    ap = summary.get("auprc", {}).get("mean", -math.inf)
    return f1, ap


def grid_search(
    data: FunctionalDataset,
    grid: GridSpec,
    cv: CVConfig = CVConfig(),
    base: ForestConfig = ForestConfig(),
    train_fraction: float = 0.7,
) -> GridResult:
    """Nested model selection: stratified split, inner CV per combination, refit, holdout evaluation.

    Combinations are ranked by mean minority-class F1, then mean AUPRC;
    remaining ties go to the first combination in canonical order.
    """
    combos = grid.combinations()
    train_idx, test_idx = stratified_split(data.labels, train_fraction, derive_seed(cv.master_seed, SPLIT_STREAM, 0))
    train = data.subset(train_idx)
    inner = replace(cv, split=None)
    specs = [ModelSpec(f"combo{i:04d}", forest=apply_params(base, p)) for i, p in enumerate(combos)]
    records = _execute(train, specs, inner)
    table = []
    best_i, best_key = 0, None
    for i, (spec, params) in enumerate(zip(specs, combos)):
        summ = summarize(r for r in records if r.variant == spec.name)
        key = _grid_score(summ)
        table.append({"params": params, "summary": summ, "score": {"minority_f1": key[0], "auprc": key[1]}})
        if best_key is None or key > best_key:
            best_i, best_key = i, key
    best = combos[best_i]
    seed = derive_seed(cv.master_seed, JOB_STREAM, 1 << 20)
    holdout = None
    if test_idx.size:
        rep, _, _ = evaluate_fold(data, train_idx, test_idx, specs[best_i], seed)
        holdout = rep.scalars() if rep is not None else None
    return GridResult(best, {"minority_f1": best_key[0], "auprc": best_key[1]}, table, holdout, train_idx.size, test_idx.size)


CSV_FIELDS = ("scenario", "variant", "repeat", "fold", "metric", "value")


def csv_rows(records, scenario: str) -> list:
    rows = []
    for r in records:
        if r.skipped:
            continue
        fold = "holdout" if r.fold == HOLDOUT else str(r.fold)
        for metric in sorted(r.metrics):
            rows.append((scenario, r.variant, str(r.repeat), fold, metric, repr(float(r.metrics[metric]))))
    return rows


def write_reports(out_dir, scenario: str, payload: dict, records) -> dict:
    """Write ``<scenario>.json`` (full payload) and ``<scenario>.csv`` (flat metric rows)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    json_path = out / f"{scenario}.json"
    csv_path = out / f"{scenario}.csv"
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        w.writerows(csv_rows(records, scenario))
    return {"json": str(json_path), "csv": str(csv_path)}


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, MetricReport):
        return o.to_dict()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def shuffled(data: FunctionalDataset, seed: int) -> FunctionalDataset:
    """Row-permuted copy (utility for order-invariance checks)."""
    return data.subset(make_rng(seed).permutation(data.n))


@dataclass
class ExperimentConfig:
    """A JSON-described experiment.

    ``data`` is ``{"scenario": name}``, ``{"sim": {...SimConfig fields}}`` or
    ``{"csv": path}``. ``model`` holds ForestConfig fields (nested ``tree``
    and ``smote`` dicts allowed). ``fknn`` optionally adds the functional
    k-NN baseline (``{"k": 5, "metric": "l2"}``) to cv/ablate runs.
    """

    data: dict
    model: dict = field(default_factory=dict)
    fknn: Optional[dict] = None
    grid: Optional[dict] = None
    cv_folds: int = 10
    repeats: int = 1
    split: Optional[float] = None
    master_seed: int = 0
    output_dir: str = "runs"
    workers: int = 1
    name: Optional[str] = None

    def __post_init__(self):
        if not isinstance(self.data, dict) or len(self.data) != 1 or next(iter(self.data)) not in ("scenario", "sim", "csv"):
            raise ConfigurationError("data must be one of {'scenario': ...}, {'sim': {...}}, {'csv': ...}")
        self.cv_config()

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(f"unknown experiment keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        """Result-relevant fields; worker count and output location are left out so reports do not depend on them."""
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        del d["workers"], d["output_dir"]
        return d

    def cv_config(self) -> CVConfig:
        return CVConfig(self.cv_folds, self.repeats, self.master_seed, self.split, self.workers)

    @property
    def scenario_name(self) -> str:
        if self.name:
            return self.name
        kind, value = next(iter(self.data.items()))
        if kind == "scenario":
            return value
        if kind == "csv":
            return Path(value).stem
        return "sim"

    def load_data(self) -> FunctionalDataset:
        from .fdata import load_dataset
        from .simgen import SimConfig, generate, get_scenario

        kind, value = next(iter(self.data.items()))
        if kind == "scenario":
            return generate(get_scenario(value, seed=self.master_seed).sim)
        if kind == "sim":
            return generate(SimConfig(**value))
        return load_dataset(value)

    def forest_config(self) -> ForestConfig:
        model = dict(self.model)
        kind, value = next(iter(self.data.items()))
        if kind == "scenario":
            from .simgen import get_scenario

            sc = get_scenario(value)
            model.setdefault("n_components", sc.fpca_dim)
            if sc.variant == "baseline":
                cfg = ForestConfig.from_dict(model)
                return replace(cfg, tree=replace(cfg.tree, weight_scheme="uniform"), use_smote=False, use_cost_bootstrap=False)
        return ForestConfig.from_dict(model)

    def model_specs(self) -> list:
        specs = [ModelSpec("frfacs", forest=self.forest_config())]
        if self.fknn is not None:
            specs.append(ModelSpec("fknn", kind="fknn", k=int(self.fknn.get("k", 5)), metric=self.fknn.get("metric", "l2")))
        return specs
