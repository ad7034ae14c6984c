"""FRF-ACS ensemble: representation, hybrid sampling, tree loop and aggregation."""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from ._random import SMOTE_STREAM, make_rng
from .distance import DtwConfig, distance_matrix
from .errors import ConfigurationError, GridError, TrainingError
from .fdata import FunctionalDataset, fourier_basis, project_values
from .fpca import BasisRepresentation, ScoreDataset, fit_fpca, representation_from_dict
from .imbalance import SmoteConfig, bootstrap_probabilities, functional_smote
from .tree import Tree, TreeConfig, fit_tree, predict_tree, prototype_curves

FORMAT = "frfacs-forest"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class ForestConfig:
    """Ensemble settings; defaults give the full FRF-ACS model.

    ``n_components`` / ``variance_fraction`` select the FPCA dimension
    (``representation="basis"`` uses ``n_basis`` Fourier coefficients
    instead). ``smooth_basis`` optionally projects every curve onto a
    Fourier basis of that size before the representation is fitted.
    """

    n_trees: int = 300
    tree: TreeConfig = field(default_factory=TreeConfig)
    use_smote: bool = True
    smote: SmoteConfig = field(default_factory=SmoteConfig)
    use_cost_bootstrap: bool = True
    aggregation: str = "majority_vote"
    seed: int = 0
    representation: str = "fpca"
    n_components: Optional[int] = 10
    variance_fraction: Optional[float] = None
    n_basis: int = 11
    smooth_basis: Optional[int] = None

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigurationError("n_trees must be >= 1")
        if self.aggregation not in ("majority_vote", "probability_average"):
            raise ConfigurationError("aggregation must be 'majority_vote' or 'probability_average'")
        if self.representation not in ("fpca", "basis"):
            raise ConfigurationError("representation must be 'fpca' or 'basis'")
        if self.seed < 0:
            raise ConfigurationError("seed must be >= 0")

    @classmethod
    def plain_rf(cls, **kw) -> "ForestConfig":
        """Unweighted forest: uniform Gini, no SMOTE, uniform bootstrap."""
        tree = kw.pop("tree", TreeConfig())
        return cls(tree=replace(tree, weight_scheme="uniform"), use_smote=False, use_cost_bootstrap=False, **kw)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ForestConfig":
        d = dict(d)
        if "tree" in d and isinstance(d["tree"], dict):
            d["tree"] = TreeConfig(**d["tree"])
        if "smote" in d and isinstance(d["smote"], dict):
            d["smote"] = SmoteConfig(**d["smote"])
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown forest config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class ForestModel:
    trees: list
    representation: object
    config: ForestConfig
    n_classes: int
    label_names: list
    metadata: dict = field(default_factory=dict)
    _prototypes: Optional[list] = field(default=None, repr=False, compare=False)

    @property
    def grid(self):
        return self.representation.grid

    def _prepare(self, data) -> np.ndarray:
        if isinstance(data, FunctionalDataset):
            if data.grid != self.grid:
                raise GridError("dataset grid differs from the model grid")
            values = data.values
        else:
            values = np.atleast_2d(np.asarray(data, dtype=float))
            if values.shape[1] != len(self.grid):
                raise GridError(f"curves have {values.shape[1]} points, model grid has {len(self.grid)}")
        if self.config.smooth_basis:
            basis = fourier_basis(self.grid, self.config.smooth_basis)
            values = project_values(values, basis) @ basis.values.T
        return values

    def scores(self, data) -> np.ndarray:
        return self.representation.transform(self._prepare(data))

    def tree_distributions(self, data) -> np.ndarray:
        """Array (T, n, K) of per-tree leaf distributions."""
        cfg = self.config.tree
        if cfg.routing == "threshold":
            z = self.scores(data)
            return np.stack([t.predict_proba(z) for t in self.trees])
        values = self._prepare(data)
        if self._prototypes is None:
            self._prototypes = [prototype_curves(t, self.representation) for t in self.trees]
        return np.stack(
            [predict_tree(t, values, cfg, self.representation, p) for t, p in zip(self.trees, self._prototypes)]
        )

    def predict_proba(self, data) -> np.ndarray:
        dist = self.tree_distributions(data)
        if self.config.aggregation == "probability_average":
            return dist.mean(axis=0)
        votes = np.argmax(dist, axis=2)
        counts = np.stack([np.sum(votes == k, axis=0) for k in range(self.n_classes)], axis=1)
        return counts / len(self.trees)

    def predict(self, data):
        """Labels and per-class probability rows (vote shares or mean distributions)."""
        proba = self.predict_proba(data)
        return np.argmax(proba, axis=1), proba

    def apply(self, data) -> np.ndarray:
        """Leaf index of every curve in every tree, shape (n, T)."""
        z = self.scores(data)
        return np.column_stack([t.apply(z) for t in self.trees])

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "version": FORMAT_VERSION,
            "config": self.config.to_dict(),
            "n_classes": self.n_classes,
            "label_names": list(self.label_names),
            "representation": self.representation.to_dict(),
            "trees": [t.to_dict() for t in self.trees],
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def from_dict(cls, d: dict) -> "ForestModel":
        if d.get("format") != FORMAT:
            raise ValueError("not an frfacs forest bundle")
        return cls(
            [Tree.from_dict(t) for t in d["trees"]],
            representation_from_dict(d["representation"]),
            ForestConfig.from_dict(d["config"]),
            int(d["n_classes"]),
            list(d["label_names"]),
            d.get("metadata", {}),
        )

    @classmethod
    def load(cls, path) -> "ForestModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _fit_one(scores: ScoreDataset, cfg: ForestConfig, probs, t: int) -> Tree:
    rng = make_rng(cfg.seed, t)
    n = scores.n
    if probs is None:
        idx = rng.integers(0, n, size=n)
    else:
        idx = rng.choice(n, size=n, replace=True, p=probs)
    sample = ScoreDataset(scores.scores[idx], scores.labels[idx], scores.n_classes, scores.source)
    return fit_tree(sample, cfg.tree, rng)


def _fit_batch(scores, cfg, probs, ts):
    return [_fit_one(scores, cfg, probs, t) for t in ts]


def fit_representation(data: FunctionalDataset, cfg: ForestConfig):
    if cfg.representation == "basis":
        return BasisRepresentation(fourier_basis(data.grid, cfg.n_basis))
    if cfg.variance_fraction is not None:
        return fit_fpca(data, variance_fraction=cfg.variance_fraction)
    return fit_fpca(data, n_components=cfg.n_components)


def fit_forest(data: FunctionalDataset, cfg: ForestConfig = ForestConfig(), n_jobs: int = 1) -> ForestModel:
    """Fit FRF-ACS on ``data``.

    Steps: (optional smoothing) -> FPCA on the training curves -> scores ->
    SMOTE once (if enabled) -> for each tree t a bootstrap of size n drawn
    from a generator seeded by (seed, t), with inverse-class-frequency
    probabilities if ``use_cost_bootstrap`` -> weighted-Gini tree.
    Results do not depend on ``n_jobs``.
    """
    if data.n < 10:
        raise TrainingError(f"need at least 10 training curves, got {data.n}")
    present = np.count_nonzero(data.class_counts())
    if present < 2:
        raise TrainingError(f"need at least 2 classes in the training data, found {present}")

    meta: dict = {"n_train": data.n, "class_counts": data.class_counts().tolist(), "warnings": []}
    train = data
    if cfg.smooth_basis:
        basis = fourier_basis(data.grid, cfg.smooth_basis)
        train = data.with_values(project_values(data.values, basis) @ basis.values.T)

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rep = fit_representation(train, cfg)
    meta["warnings"].extend(str(w.message) for w in caught)
    if cfg.representation == "fpca" and not np.any(rep.all_eigenvalues > 0):
        raise TrainingError("degenerate FPCA: all eigenvalues are zero (curves are identical)")

    scores = rep.score_dataset(train)
    if cfg.use_smote:
        res = functional_smote(scores, cfg.smote, make_rng(cfg.seed, SMOTE_STREAM))
        scores = res.data
        meta["smote_synthetic"] = res.n_synthetic
        meta["warnings"].extend(res.warnings)
    meta["n_fit"] = scores.n
    meta["fit_class_counts"] = scores.class_counts().tolist()

    probs = bootstrap_probabilities(scores.labels, scores.n_classes) if cfg.use_cost_bootstrap else None
    ts = list(range(cfg.n_trees))
    if n_jobs == 1:
        trees = _fit_batch(scores, cfg, probs, ts)
    else:
        from joblib import Parallel, delayed

        chunks = [c.tolist() for c in np.array_split(np.array(ts), max(1, min(abs(n_jobs) * 4, len(ts))))]
        out = Parallel(n_jobs=n_jobs)(delayed(_fit_batch)(scores, cfg, probs, c) for c in chunks if c)
        trees = [t for batch in out for t in batch]
    return ForestModel(trees, rep, cfg, data.n_classes, list(data.label_names), meta)


def predict(model: ForestModel, data):
    return model.predict(data)


def proximity_matrix(model: ForestModel, data) -> np.ndarray:
    """Fraction of trees in which two curves share a terminal node (threshold routing)."""
    leaves = model.apply(data)
    n, T = leaves.shape
    prox = np.zeros((n, n))
    for t in range(T):
        col = leaves[:, t]
        prox += col[:, None] == col[None, :]
    return prox / T


def fknn_baseline(
    train: FunctionalDataset,
    test,
    k: int = 5,
    metric: str = "l2",
    dtw: DtwConfig = DtwConfig(),
) -> np.ndarray:
    """Functional k-NN: majority label among the k nearest training curves.

    Distance ties go to the lower training index, vote ties to the lower class.
    """
    if train.n == 0:
        raise ValueError("training set is empty")
    if not 1 <= k <= train.n:
        raise ValueError(f"k must lie in 1..{train.n}")
    if isinstance(test, FunctionalDataset):
        if test.grid != train.grid:
            raise GridError("train and test grids differ")
        q = test.values
    else:
        q = np.atleast_2d(np.asarray(test, dtype=float))
    d = distance_matrix(q, train.values, train.grid, metric, dtw)
    nearest = np.argsort(d, axis=1, kind="stable")[:, :k]
    votes = train.labels[nearest]
    counts = np.stack([np.sum(votes == c, axis=1) for c in range(train.n_classes)], axis=1)
    return np.argmax(counts, axis=1)
