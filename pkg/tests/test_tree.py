import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from frfacs._random import make_rng
from frfacs.errors import ConfigurationError
from frfacs.fdata import FunctionalDataset, Grid
from frfacs.fpca import ScoreDataset, fit_fpca
from frfacs.tree import NodeStats, Tree, TreeConfig, fit_tree, node_class_weights, predict_tree, split_gain, weighted_gini

import oracles
from conftest import make_scores


class TestImpurity:
    def test_examples(self):
        assert weighted_gini([5, 5], [1, 1]) == pytest.approx(0.5)
        assert weighted_gini([10, 0], [3, 7]) == 0.0
        assert weighted_gini([90, 10], [1, 9]) == pytest.approx(0.9)

    def test_empty_node(self):
        with pytest.raises(ValueError):
            weighted_gini([0, 0], [1, 1])

    def test_gain_examples(self):
        assert split_gain(NodeStats([4, 4]), NodeStats([4, 0]), NodeStats([0, 4]), [1, 1]) == pytest.approx(0.5)
        assert split_gain(NodeStats([6, 2]), NodeStats([3, 2]), NodeStats([3, 0]), [1, 3]) == pytest.approx(0.15)
        assert split_gain(NodeStats([6, 2]), NodeStats([3, 1]), NodeStats([3, 1]), [2, 5]) == pytest.approx(0, abs=1e-12)

    def test_inconsistent_children(self):
        with pytest.raises(ValueError):
            split_gain(NodeStats([4, 4]), NodeStats([4, 0]), NodeStats([0, 3]), [1, 1])

    @settings(max_examples=300, deadline=None)
    @given(
        st.lists(st.tuples(st.integers(0, 20), st.integers(0, 20)), min_size=2, max_size=4),
        st.lists(st.floats(0.0, 50.0), min_size=4, max_size=4),
    )
    def test_gain_non_negative(self, pairs, weights):
        left = np.array([a for a, _ in pairs], dtype=float)
        right = np.array([b for _, b in pairs], dtype=float)
        if left.sum() == 0 or right.sum() == 0:
            return
        w = weights[: len(pairs)]
        assert split_gain(NodeStats(left + right), NodeStats(left), NodeStats(right), w) >= -1e-12

    def test_node_class_weights(self):
        np.testing.assert_allclose(node_class_weights([90, 10], TreeConfig()).weights, [1, 9], rtol=1e-6)
        np.testing.assert_array_equal(node_class_weights([90, 10], TreeConfig(weight_scheme="uniform")).weights, [1, 1])


class TestConfig:
    def test_mtry_default(self):
        assert TreeConfig().resolve_mtry(10) == math.ceil(math.sqrt(10))
        assert TreeConfig().resolve_mtry(1) == 1

    def test_mtry_too_large(self):
        with pytest.raises(ConfigurationError):
            TreeConfig(mtry=4).resolve_mtry(3)

    @pytest.mark.parametrize(
        "kw",
        [{"min_samples_leaf": 0}, {"min_samples_split": 1}, {"weight_scheme": "foo"}, {"routing": "x"}, {"epsilon": 0}],
    )
    def test_invalid(self, kw):
        with pytest.raises(ConfigurationError):
            TreeConfig(**kw)


class TestGrowth:
    def test_separable_depth_one(self):
        X = np.r_[np.linspace(0, 1, 10), np.linspace(2, 3, 5)][:, None]
        y = np.r_[np.zeros(10, int), np.ones(5, int)]
        tree = fit_tree(ScoreDataset(X, y, 2, None), TreeConfig(max_depth=1), make_rng(0))
        assert tree.depth() == 1
        assert np.all(np.argmax(tree.predict_proba(X), axis=1) == y)
        assert tree.threshold[0] == pytest.approx(1.5)

    def test_balanced_root_split_independent_of_scheme(self, rng):
        X = rng.standard_normal((40, 3))
        y = np.r_[np.zeros(20, int), np.ones(20, int)]
        s = ScoreDataset(X, y, 2, None)
        a = fit_tree(s, TreeConfig(weight_scheme="uniform", mtry=3), make_rng(1))
        b = fit_tree(s, TreeConfig(weight_scheme="node_dynamic", mtry=3), make_rng(1))
        assert (a.feature[0], a.threshold[0]) == (b.feature[0], b.threshold[0])

    def test_binary_weighting_rescales_gain_only(self, rng):
        # with two classes sum_k w_k p_k (1 - p_k) = (w_0 + w_1) p_0 p_1, so node weights
        # held fixed within a split cannot change which split wins
        for seed in range(5):
            s = make_scores(rng, n=80, M=4, K=2)
            a = fit_tree(s, TreeConfig(weight_scheme="uniform"), make_rng(seed))
            b = fit_tree(s, TreeConfig(weight_scheme="node_dynamic"), make_rng(seed))
            np.testing.assert_array_equal(a.feature, b.feature)
            np.testing.assert_array_equal(a.threshold, b.threshold)

    def test_weighting_matters_for_three_classes(self, rng):
        differ = 0
        for seed in range(5):
            s = make_scores(rng, n=80, M=4, K=3)
            a = fit_tree(s, TreeConfig(weight_scheme="uniform"), make_rng(seed))
            b = fit_tree(s, TreeConfig(weight_scheme="node_dynamic"), make_rng(seed))
            differ += not (np.array_equal(a.feature, b.feature) and np.array_equal(a.threshold, b.threshold))
        assert differ > 0

    def test_root_oracle_twenty_points(self, rng):
        X = rng.standard_normal((20, 2))
        y = (X[:, 0] + 0.3 * rng.standard_normal(20) > 0.4).astype(int)
        tree = fit_tree(ScoreDataset(X, y, 2, None), TreeConfig(mtry=2), make_rng(0))
        counts = np.bincount(y, minlength=2)
        w = counts.max() / (counts + 1e-6)
        f, t, _ = oracles.best_split(X, y, 2, range(2), lambda c: oracles.gini_weighted(c, w))
        assert (tree.feature[0], tree.threshold[0]) == (f, t)

    def test_feature_subsampling_protocol(self):
        # root candidates are the mtry smallest keys of the first key row
        for seed in range(20):
            r = np.random.default_rng(seed)
            X = r.integers(0, 4, size=(25, 5)).astype(float)
            y = r.integers(0, 2, size=25)
            tree = fit_tree(ScoreDataset(X, y, 2, None), TreeConfig(mtry=2, weight_scheme="uniform"), make_rng(seed))
            keys = make_rng(seed).random((50, 5))
            feats = sorted(np.argsort(keys[0])[:2].tolist())
            expected = oracles.best_split(X, y, 2, feats, oracles.gini_plain)
            got = None if tree.feature[0] < 0 else (tree.feature[0], tree.threshold[0])
            assert got == (None if expected is None else expected[:2])

    def test_consumes_one_key_block(self, rng):
        s = make_scores(rng, n=30, M=3)
        g = make_rng(5)
        fit_tree(s, TreeConfig(), g)
        ref = make_rng(5)
        ref.random((60, 3))
        assert g.random() == ref.random()

    def test_min_samples_leaf(self, rng):
        s = make_scores(rng, n=100, M=3)
        tree = fit_tree(s, TreeConfig(min_samples_leaf=7), make_rng(0))
        assert tree.counts[tree.leaves].sum(axis=1).min() >= 7

    def test_max_depth(self, rng):
        s = make_scores(rng, n=100, M=3)
        assert fit_tree(s, TreeConfig(max_depth=3), make_rng(0)).depth() <= 3

    def test_fully_grown_tree_is_pure_on_training_points(self, rng):
        X = rng.standard_normal((60, 3))
        y = rng.integers(0, 3, size=60)
        tree = fit_tree(ScoreDataset(X, y, 3, None), TreeConfig(mtry=3), make_rng(0))
        assert np.all(np.argmax(tree.predict_proba(X), axis=1) == y)

    def test_single_leaf(self):
        X = np.zeros((5, 2))
        y = np.array([0, 0, 1, 1, 1])
        tree = fit_tree(ScoreDataset(X, y, 2, None), TreeConfig(), make_rng(0))
        assert tree.n_nodes == 1
        np.testing.assert_allclose(tree.predict_proba(np.random.default_rng(0).random((4, 2))), [[0.4, 0.6]] * 4)

    def test_leaf_prototypes_are_member_means(self, rng):
        s = make_scores(rng, n=50, M=2)
        tree = fit_tree(s, TreeConfig(min_samples_leaf=5), make_rng(0))
        leaf_of = tree.apply(s.scores)
        for leaf in tree.leaves:
            np.testing.assert_allclose(tree.prototypes[leaf], s.scores[leaf_of == leaf].mean(axis=0))

    def test_round_trip(self, rng):
        s = make_scores(rng, n=50, M=3)
        tree = fit_tree(s, TreeConfig(), make_rng(0))
        back = Tree.from_dict(json.loads(json.dumps(tree.to_dict())))
        q = rng.standard_normal((30, 3))
        np.testing.assert_array_equal(back.predict_proba(q), tree.predict_proba(q))

    def test_wrong_width(self, rng):
        tree = fit_tree(make_scores(rng, M=3), TreeConfig(), make_rng(0))
        with pytest.raises(ValueError):
            tree.apply(np.zeros((2, 4)))


def test_prototype_routing_agrees_on_separated_clusters():
    r = np.random.default_rng(0)
    grid = Grid.uniform(41)
    t = grid.points
    y = np.repeat([0, 1, 2], 40)
    centres = np.stack([np.zeros_like(t), np.sin(2 * np.pi * t) * 3, np.full_like(t, 3.0)])
    values = centres[y] + 0.2 * r.standard_normal((120, 41))
    data = FunctionalDataset(grid, values, y, ["a", "b", "c"])
    rep = fit_fpca(data, n_components=3)
    tree = fit_tree(rep.score_dataset(data), TreeConfig(min_samples_leaf=5), make_rng(0))
    queries = centres[np.repeat([0, 1, 2], 20)] + 0.2 * r.standard_normal((60, 41))
    by_threshold = np.argmax(predict_tree(tree, rep.transform(queries)), axis=1)
    for metric in ("l2", "dtw"):
        cfg = TreeConfig(routing="prototype_distance", prototype_metric=metric)
        by_proto = np.argmax(predict_tree(tree, queries, cfg, rep), axis=1)
        assert np.mean(by_proto == by_threshold) >= 0.8


def test_prototype_routing_needs_representation(rng):
    tree = fit_tree(make_scores(rng), TreeConfig(), make_rng(0))
    with pytest.raises(ConfigurationError):
        predict_tree(tree, np.zeros((1, 5)), TreeConfig(routing="prototype_distance"))
