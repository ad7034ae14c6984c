"""CART classification tree on score vectors with class-weighted Gini splitting.

Growth protocol (relied on by the forest and by the reference oracles in the
test-suite):

* nodes are processed depth-first, left child before right;
* a node becomes a leaf without drawing features if it is pure, has fewer
  than ``min_samples_split`` or ``2 * min_samples_leaf`` samples, or sits at
  ``max_depth``;
* otherwise it is the j-th *split attempt* and its candidate features are
  the ``mtry`` smallest entries of row j of a key matrix drawn up front as
  ``rng.random((2 * n, M))``, taken in ascending feature order;
* candidate thresholds are midpoints between consecutive distinct values;
* the weight vector of the node is used for the parent and both children;
* the winner is the lowest (feature, threshold) whose gain is within
  ``TIE_TOL`` of the best gain; the node stays a leaf if that gain is
  ``<= MIN_GAIN``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from numba import njit

from .distance import DtwConfig, distance_matrix
from .errors import ConfigurationError
from .fpca import ScoreDataset
from .imbalance import DEFAULT_EPSILON, ClassWeights, global_weights, node_weights

MIN_GAIN = 1e-12
TIE_TOL = 1e-12

_SCHEMES = {"uniform": 0, "global": 1, "node_dynamic": 2}


@dataclass(frozen=True)
class NodeStats:
    counts: np.ndarray
    depth: int = 0

    @property
    def total(self) -> float:
        return float(np.sum(self.counts))


@dataclass(frozen=True)
class TreeConfig:
    max_depth: Optional[int] = None
    min_samples_leaf: int = 1
    min_samples_split: int = 2
    mtry: Optional[int] = None
    weight_scheme: str = "node_dynamic"
    epsilon: float = DEFAULT_EPSILON
    routing: str = "threshold"
    prototype_metric: str = "l2"
    dtw_band: Optional[int] = None

    def __post_init__(self):
        if self.min_samples_leaf < 1:
            raise ConfigurationError("min_samples_leaf must be >= 1")
        if self.min_samples_split < 2:
            raise ConfigurationError("min_samples_split must be >= 2")
        if self.max_depth is not None and self.max_depth < 0:
            raise ConfigurationError("max_depth must be >= 0")
        if self.mtry is not None and self.mtry < 1:
            raise ConfigurationError("mtry must be >= 1")
        if self.weight_scheme not in _SCHEMES:
            raise ConfigurationError(f"weight_scheme must be one of {sorted(_SCHEMES)}")
        if self.epsilon <= 0:
            raise ConfigurationError("epsilon must be > 0")
        if self.routing not in ("threshold", "prototype_distance"):
            raise ConfigurationError("routing must be 'threshold' or 'prototype_distance'")
        if self.prototype_metric not in ("l2", "dtw"):
            raise ConfigurationError("prototype_metric must be 'l2' or 'dtw'")

    def resolve_mtry(self, n_features: int) -> int:
        m = math.ceil(math.sqrt(n_features)) if self.mtry is None else self.mtry
        if m > n_features:
            raise ConfigurationError(f"mtry={m} exceeds the {n_features} available features")
        return m

    def to_dict(self) -> dict:
        return asdict(self)


def weighted_gini(counts, weights) -> float:
    """sum_k w_k p_k (1 - p_k) with p_k = n_k / n."""
    c = np.asarray(counts, dtype=float)
    w = np.asarray(weights.weights if isinstance(weights, ClassWeights) else weights, dtype=float)
    total = c.sum()
    if total <= 0:
        raise ValueError("node is empty")
    p = c / total
    return float(np.sum(w * p * (1.0 - p)))


def split_gain(parent: NodeStats, left: NodeStats, right: NodeStats, weights) -> float:
    """Weighted impurity decrease G(parent) - n_L/n G(left) - n_R/n G(right)."""
    if not np.allclose(np.asarray(left.counts) + np.asarray(right.counts), parent.counts):
        raise ValueError("child counts do not add up to the parent counts")
    n = parent.total
    g = weighted_gini(parent.counts, weights)
    if left.total > 0:
        g -= left.total / n * weighted_gini(left.counts, weights)
    if right.total > 0:
        g -= right.total / n * weighted_gini(right.counts, weights)
    return g


@njit(cache=True)
def _node_weights(counts, scheme, eps, gw):
    K = counts.shape[0]
    w = np.ones(K)
    if scheme == 1:
        w[:] = gw
    elif scheme == 2:
        mx = counts.max()
        for k in range(K):
            w[k] = mx / (counts[k] + eps)
    return w


@njit(cache=True)
def _gini(cnt, total, w):
    g = 0.0
    for k in range(cnt.shape[0]):
        p = cnt[k] / total
        g += w[k] * p * (1.0 - p)
    return g


@njit(cache=True)
def _grow(X, y, K, max_depth, min_split, min_leaf, mtry, scheme, eps, gw, keys, min_gain, tie_tol):
    n, M = X.shape
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    counts = np.zeros((cap, K))
    gains_out = np.zeros(cap)

    idx = np.arange(n)
    tmp = np.empty(n, dtype=np.int64)
    st_node = np.empty(cap, dtype=np.int64)
    st_start = np.empty(cap, dtype=np.int64)
    st_end = np.empty(cap, dtype=np.int64)
    st_depth = np.empty(cap, dtype=np.int64)
    gains = np.empty((mtry, n))
    thr = np.empty((mtry, n))
    cnt_left = np.zeros(K)
    cnt_right = np.zeros(K)
    vals = np.empty(n)
    labs = np.empty(n, dtype=np.int64)

    sp = 0
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = n
    st_depth[0] = 0
    sp = 1
    n_nodes = 1
    attempt = 0

    while sp > 0:
        sp -= 1
        node = st_node[sp]
        start = st_start[sp]
        end = st_end[sp]
        depth = st_depth[sp]
        nn = end - start
        for i in range(start, end):
            counts[node, y[idx[i]]] += 1.0
        nonzero = 0
        for k in range(K):
            if counts[node, k] > 0:
                nonzero += 1
        if nonzero <= 1 or nn < min_split or nn < 2 * min_leaf or (max_depth >= 0 and depth >= max_depth):
            continue

        w = _node_weights(counts[node], scheme, eps, gw)
        g_parent = _gini(counts[node], float(nn), w)
        order_f = np.argsort(keys[attempt])[:mtry]
        attempt += 1
        feats = np.sort(order_f)

        best = -np.inf
        for fi in range(mtry):
            f = feats[fi]
            for i in range(nn):
                vals[i] = X[idx[start + i], f]
            order = np.argsort(vals[:nn], kind="mergesort")
            for i in range(nn):
                labs[i] = y[idx[start + order[i]]]
            sv = vals[:nn][order]
            cnt_left[:] = 0.0
            for i in range(nn - 1):
                gains[fi, i] = -np.inf
                cnt_left[labs[i]] += 1.0
                if not sv[i] < sv[i + 1]:
                    continue
                nl = i + 1
                nr = nn - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                for k in range(K):
                    cnt_right[k] = counts[node, k] - cnt_left[k]
                g = g_parent - (nl / nn) * _gini(cnt_left, float(nl), w) - (nr / nn) * _gini(cnt_right, float(nr), w)
                gains[fi, i] = g
                t = 0.5 * (sv[i] + sv[i + 1])
                if not t < sv[i + 1]:
                    t = sv[i]
                thr[fi, i] = t
                if g > best:
                    best = g
        if not best > min_gain:
            continue
        cut = best - tie_tol * max(1.0, abs(best))
        bf = -1
        bi = -1
        for fi in range(mtry):
            for i in range(nn - 1):
                if gains[fi, i] >= cut:
                    bf = fi
                    bi = i
                    break
            if bf >= 0:
                break
        f = feats[bf]
        t = thr[bf, bi]

        # stable partition of idx[start:end]
        nl = 0
        for i in range(start, end):
            if X[idx[i], f] <= t:
                tmp[nl] = idx[i]
                nl += 1
        pos = nl
        for i in range(start, end):
            if not X[idx[i], f] <= t:
                tmp[pos] = idx[i]
                pos += 1
        for i in range(nn):
            idx[start + i] = tmp[i]

        feature[node] = f
        threshold[node] = t
        gains_out[node] = best
        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        left[node] = lc
        right[node] = rc
        # right pushed first so the left subtree is processed first
        st_node[sp] = rc
        st_start[sp] = start + nl
        st_end[sp] = end
        st_depth[sp] = depth + 1
        sp += 1
        st_node[sp] = lc
        st_start[sp] = start
        st_end[sp] = start + nl
        st_depth[sp] = depth + 1
        sp += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        counts[:n_nodes].copy(),
        gains_out[:n_nodes].copy(),
    )


@njit(cache=True)
def _apply(X, feature, threshold, left, right):
    out = np.empty(X.shape[0], dtype=np.int64)
    for r in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = node
    return out


@dataclass
class Tree:
    """Flat-array tree. ``feature[i] == -1`` marks a leaf.

    Leaves carry class ``counts`` and ``prototypes`` (mean training score
    vector of the leaf members); internal nodes carry ``feature`` and
    ``threshold`` (``x[feature] <= threshold`` goes left).
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray
    prototypes: np.ndarray
    n_features: int
    gains: Optional[np.ndarray] = None

    @property
    def n_classes(self) -> int:
        return self.counts.shape[1]

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    @property
    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.feature < 0)

    def distributions(self) -> np.ndarray:
        tot = self.counts.sum(axis=1, keepdims=True)
        return self.counts / np.where(tot > 0, tot, 1.0)

    def apply(self, scores) -> np.ndarray:
        x = np.ascontiguousarray(np.atleast_2d(scores), dtype=np.float64)
        if x.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {x.shape[1]}")
        return _apply(x, self.feature, self.threshold, self.left, self.right)

    def predict_proba(self, scores) -> np.ndarray:
        return self.distributions()[self.apply(scores)]

    def depth(self) -> int:
        d = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                d[self.left[i]] = d[i] + 1
                d[self.right[i]] = d[i] + 1
        return int(d.max())

    def to_dict(self) -> dict:
        nodes = []
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                nodes.append(
                    {
                        "id": i,
                        "feature": int(self.feature[i]),
                        "threshold": float(self.threshold[i]),
                        "left": int(self.left[i]),
                        "right": int(self.right[i]),
                        "counts": self.counts[i].tolist(),
                    }
                )
            else:
                nodes.append({"id": i, "counts": self.counts[i].tolist(), "prototype": self.prototypes[i].tolist()})
        return {"n_features": self.n_features, "n_classes": self.n_classes, "nodes": nodes}

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        nodes = d["nodes"]
        n, K, M = len(nodes), int(d["n_classes"]), int(d["n_features"])
        feature = np.full(n, -1, dtype=np.int64)
        threshold = np.zeros(n)
        left = np.full(n, -1, dtype=np.int64)
        right = np.full(n, -1, dtype=np.int64)
        counts = np.zeros((n, K))
        protos = np.full((n, M), np.nan)
        for rec in nodes:
            i = rec["id"]
            counts[i] = rec["counts"]
            if "feature" in rec:
                feature[i] = rec["feature"]
                threshold[i] = rec["threshold"]
                left[i] = rec["left"]
                right[i] = rec["right"]
            else:
                protos[i] = rec["prototype"]
        return cls(feature, threshold, left, right, counts, protos, M)


def _scheme_weights(cfg: TreeConfig, y: np.ndarray, K: int) -> np.ndarray:
    if cfg.weight_scheme != "global":
        return np.ones(K)
    present = np.bincount(y, minlength=K) > 0
    w = np.ones(K)
    # absent classes contribute p_k = 0, so their weight is irrelevant
    remap = np.cumsum(present) - 1
    w[present] = global_weights(remap[y], int(present.sum())).weights
    return w


def fit_tree(scores: ScoreDataset, cfg: TreeConfig, rng: np.random.Generator) -> Tree:
    """Grow one tree on ``scores`` following the module-level protocol."""
    X = np.ascontiguousarray(scores.scores, dtype=np.float64)
    y = np.ascontiguousarray(scores.labels, dtype=np.int64)
    n, M = X.shape
    K = scores.n_classes
    if n < 1:
        raise ValueError("cannot fit a tree on zero samples")
    mtry = cfg.resolve_mtry(M)
    keys = rng.random((2 * n, M))
    gw = _scheme_weights(cfg, y, K)
    feature, threshold, left, right, counts, gains = _grow(
        X,
        y,
        K,
        -1 if cfg.max_depth is None else int(cfg.max_depth),
        int(cfg.min_samples_split),
        int(cfg.min_samples_leaf),
        int(mtry),
        _SCHEMES[cfg.weight_scheme],
        float(cfg.epsilon),
        gw,
        keys,
        MIN_GAIN,
        TIE_TOL,
    )
    tree = Tree(feature, threshold, left, right, counts, np.full((feature.size, M), np.nan), M, gains)
    leaf_of = tree.apply(X)
    sums = np.zeros((feature.size, M))
    np.add.at(sums, leaf_of, X)
    sizes = np.bincount(leaf_of, minlength=feature.size)
    leaves = sizes > 0
    tree.prototypes[leaves] = sums[leaves] / sizes[leaves, None]
    return tree


def node_class_weights(counts, cfg: TreeConfig, global_w=None) -> ClassWeights:
    """Weights a node with class ``counts`` would use under ``cfg.weight_scheme``."""
    c = np.asarray(counts, dtype=float)
    if cfg.weight_scheme == "node_dynamic":
        return node_weights(c, cfg.epsilon)
    if cfg.weight_scheme == "global":
        return ClassWeights(np.asarray(global_w, dtype=float), "global_inverse_frequency")
    return ClassWeights(np.ones(c.size), "uniform")


def prototype_curves(tree: Tree, representation) -> np.ndarray:
    """Reconstructed prototype curve for every leaf, rows aligned with ``tree.leaves``."""
    return np.atleast_2d(representation.reconstruct(tree.prototypes[tree.leaves]))


def predict_tree(tree: Tree, queries, cfg: TreeConfig = TreeConfig(), representation=None, prototypes=None) -> np.ndarray:
    """Class distributions for a batch of queries.

    ``routing="threshold"`` expects score vectors. ``routing="prototype_distance"``
    expects curve values on the representation grid and returns the
    distribution of the leaf whose prototype curve is nearest under
    ``cfg.prototype_metric`` (ties: lowest leaf id).
    """
    if cfg.routing == "threshold":
        return tree.predict_proba(queries)
    if representation is None:
        raise ConfigurationError("prototype routing needs the fitted representation (FPCA model)")
    q = np.atleast_2d(np.asarray(queries, dtype=float))
    if prototypes is None:
        prototypes = prototype_curves(tree, representation)
    d = distance_matrix(q, prototypes, representation.grid, cfg.prototype_metric, DtwConfig(cfg.dtw_band))
    nearest = tree.leaves[np.argmin(d, axis=1)]
    return tree.distributions()[nearest]
