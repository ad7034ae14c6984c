"""Class weights, score-space functional SMOTE and cost-sensitive bootstrap weights."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .fpca import ScoreDataset

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-6

UNIFORM = "uniform"
GLOBAL = "global_inverse_frequency"
NODE_DYNAMIC = "node_dynamic"


@dataclass(frozen=True)
class ClassWeights:
    weights: np.ndarray
    scheme: str

    def __len__(self):
        return len(self.weights)


def global_weights(labels, n_classes: int | None = None) -> ClassWeights:
    """Inverse-frequency weights ``w_k = n / n_k``.

    Raises if any of the ``n_classes`` classes has no samples; restrict
    ``n_classes`` (or relabel) to the classes actually present.
    """
    y = np.asarray(labels, dtype=np.int64).ravel()
    if y.size == 0:
        raise ValueError("labels are empty")
    k = int(y.max()) + 1 if n_classes is None else n_classes
    counts = np.bincount(y, minlength=k)
    if np.any(counts == 0):
        missing = np.flatnonzero(counts == 0).tolist()
        raise ValueError(f"classes {missing} have zero frequency; inverse-frequency weight undefined")
    freq = counts / y.size
    return ClassWeights(1.0 / freq, GLOBAL)


def node_weights(counts, epsilon: float = DEFAULT_EPSILON) -> ClassWeights:
    """Node-local weights ``w_k = max_j n_j / (n_k + epsilon)``."""
    c = np.asarray(counts, dtype=float)
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    if c.size == 0 or c.max() <= 0:
        raise ValueError("node has no samples")
    return ClassWeights(c.max() / (c + epsilon), NODE_DYNAMIC)


@dataclass(frozen=True)
class SmoteConfig:
    target_ratio: float = 0.5
    k_neighbors: int = 5

    def __post_init__(self):
        if not 0 < self.target_ratio <= 1:
            raise ValueError("target_ratio must lie in (0, 1]")
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")


@dataclass
class SmoteResult:
    """Augmented data plus a log of how each synthetic row was made.

    ``parents[i]`` holds the (a, b) row indices into the input scores and
    ``lambdas[i]`` the interpolation weight of synthetic row ``n_original + i``.
    """

    data: ScoreDataset
    n_original: int
    parents: np.ndarray
    lambdas: np.ndarray
    warnings: list = field(default_factory=list)

    @property
    def n_synthetic(self) -> int:
        return self.lambdas.size


def minority_neighbors(points: np.ndarray, k: int) -> np.ndarray:
    """k nearest neighbours (Euclidean, self excluded); ties go to the lower index."""
    d = np.sum((points[:, None, :] - points[None, :, :]) ** 2, axis=-1)
    np.fill_diagonal(d, np.inf)
    return np.argsort(d, axis=1, kind="stable")[:, :k]


def _note(msgs: list, msg: str) -> None:
    logger.warning(msg)
    msgs.append(msg)


def functional_smote(scores: ScoreDataset, cfg: SmoteConfig, rng: np.random.Generator) -> SmoteResult:
    """Oversample every non-majority class by interpolating score vectors.

    Each class ``c`` with ``n_c / n_max < target_ratio`` receives
    ``ceil(target_ratio * n_max) - n_c`` synthetic rows. A row is drawn as:
    parent ``a`` uniform over the class, ``b`` uniform over the k nearest
    same-class neighbours of ``a``, ``lam ~ U(0, 1)``, emit
    ``z_a + lam (z_b - z_a)``. Only call this on training data.
    """
    z, y = scores.scores, scores.labels
    counts = scores.class_counts()
    n_max = counts.max()
    msgs: list = []
    new_rows, new_labels, parents, lambdas = [], [], [], []
    for c in range(scores.n_classes):
        n_c = int(counts[c])
        if n_c == 0 or n_c == n_max:
            continue
        need = math.ceil(cfg.target_ratio * n_max - 1e-9) - n_c
        if need <= 0:
            continue
        if n_c < 2:
            _note(msgs, f"SMOTE skipped for class {c}: needs >= 2 samples, has {n_c}")
            continue
        k = cfg.k_neighbors
        if k >= n_c:
            _note(msgs, f"k_neighbors={k} clipped to {n_c - 1} for class {c}")
            k = n_c - 1
        members = np.flatnonzero(y == c)
        nbrs = minority_neighbors(z[members], k)
        a = rng.integers(0, n_c, size=need)
        pick = rng.integers(0, k, size=need)
        lam = rng.random(need)
        b = nbrs[a, pick]
        za, zb = z[members[a]], z[members[b]]
        new_rows.append(za + lam[:, None] * (zb - za))
        new_labels.append(np.full(need, c, dtype=np.int64))
        parents.append(np.column_stack([members[a], members[b]]))
        lambdas.append(lam)

    if new_rows:
        out = ScoreDataset(
            np.vstack([z] + new_rows), np.concatenate([y] + new_labels), scores.n_classes, scores.source
        )
        return SmoteResult(out, scores.n, np.vstack(parents), np.concatenate(lambdas), msgs)
    return SmoteResult(scores, scores.n, np.empty((0, 2), dtype=np.int64), np.empty(0), msgs)


def bootstrap_probabilities(labels, n_classes: int | None = None) -> np.ndarray:
    """Per-sample draw probabilities proportional to 1 / p_{y_i}.

    Every present class receives the same total probability mass.
    """
    y = np.asarray(labels, dtype=np.int64).ravel()
    if y.size == 0:
        raise ValueError("labels are empty")
    counts = np.bincount(y, minlength=n_classes or 0)
    present = np.count_nonzero(counts)
    if present < 2:
        warnings.warn("only one class present; using uniform bootstrap probabilities", stacklevel=2)
        return np.full(y.size, 1.0 / y.size)
    p = 1.0 / (present * counts[y])
    return p / p.sum()
