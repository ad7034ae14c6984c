import numpy as np
import pytest

from frfacs.fpca import ScoreDataset
from frfacs.imbalance import (
    SmoteConfig,
    bootstrap_probabilities,
    functional_smote,
    global_weights,
    minority_neighbors,
    node_weights,
)


class TestWeights:
    def test_global(self):
        w = global_weights(np.r_[np.zeros(90, int), np.ones(10, int)]).weights
        np.testing.assert_allclose(w, [1 / 0.9, 10.0])

    def test_global_balanced(self):
        np.testing.assert_allclose(global_weights([0, 1, 0, 1]).weights, [2.0, 2.0])

    def test_global_missing_class(self):
        with pytest.raises(ValueError, match="zero frequency"):
            global_weights([0, 0, 0], n_classes=2)

    def test_node(self):
        np.testing.assert_allclose(node_weights([90, 10]).weights, [1.0, 9.0], rtol=1e-6)
        np.testing.assert_allclose(node_weights([50, 50]).weights, [1.0, 1.0], rtol=1e-6)

    def test_node_empty_class(self):
        w = node_weights([10, 0], epsilon=1e-6).weights
        assert w[0] == pytest.approx(1.0) and w[1] == pytest.approx(1e7)

    def test_node_rejects_empty(self):
        with pytest.raises(ValueError):
            node_weights([0, 0])


def scores(n_major, n_minor, seed=0, M=2):
    r = np.random.default_rng(seed)
    z = np.vstack([r.standard_normal((n_major, M)), 3 + r.standard_normal((n_minor, M))])
    y = np.r_[np.zeros(n_major, int), np.ones(n_minor, int)]
    return ScoreDataset(z, y, 2, None)


class TestSmote:
    def test_counts_and_log(self):
        res = functional_smote(scores(100, 10), SmoteConfig(0.5, 3), np.random.default_rng(0))
        assert res.n_synthetic == 40
        assert np.sum(res.data.labels == 1) == 50
        assert res.parents.shape == (40, 2) and res.lambdas.shape == (40,)
        assert np.all(res.data.labels[res.n_original:] == 1)

    def test_rows_follow_the_log(self):
        s = scores(60, 8, seed=1)
        res = functional_smote(s, SmoteConfig(1.0, 3), np.random.default_rng(1))
        a, b = s.scores[res.parents[:, 0]], s.scores[res.parents[:, 1]]
        np.testing.assert_allclose(res.data.scores[res.n_original:], a + res.lambdas[:, None] * (b - a))

    def test_midpoint_and_endpoints(self):
        za, zb = np.array([0.0, 0.0]), np.array([2.0, 4.0])
        for lam, expected in [(0.5, [1, 2]), (0.0, za), (1.0, zb)]:
            np.testing.assert_array_equal(za + lam * (zb - za), expected)

    def test_parents_are_neighbours(self):
        s = scores(50, 12, seed=2)
        res = functional_smote(s, SmoteConfig(1.0, 2), np.random.default_rng(2))
        members = np.flatnonzero(s.labels == 1)
        nbrs = minority_neighbors(s.scores[members], 2)
        for a, b in res.parents:
            ia, ib = np.searchsorted(members, [a, b])
            assert ib in nbrs[ia]

    def test_original_rows_untouched(self):
        s = scores(30, 5)
        res = functional_smote(s, SmoteConfig(0.5, 2), np.random.default_rng(0))
        np.testing.assert_array_equal(res.data.scores[: s.n], s.scores)

    def test_single_minority_skipped_with_warning(self):
        res = functional_smote(scores(20, 1), SmoteConfig(), np.random.default_rng(0))
        assert res.n_synthetic == 0
        assert any("skipped" in w for w in res.warnings)

    def test_k_clipped(self):
        res = functional_smote(scores(20, 3), SmoteConfig(0.5, 5), np.random.default_rng(0))
        assert any("clipped" in w for w in res.warnings)
        assert res.n_synthetic == 7

    def test_already_balanced(self):
        res = functional_smote(scores(10, 10), SmoteConfig(), np.random.default_rng(0))
        assert res.n_synthetic == 0 and res.data.n == 20

    def test_multiclass(self):
        r = np.random.default_rng(3)
        y = np.r_[np.zeros(40, int), np.ones(10, int), np.full(6, 2)]
        res = functional_smote(ScoreDataset(r.standard_normal((56, 3)), y, 3, None), SmoteConfig(0.5, 3), r)
        np.testing.assert_array_equal(res.data.class_counts(), [40, 20, 20])

    def test_deterministic(self):
        s = scores(40, 6)
        a = functional_smote(s, SmoteConfig(), np.random.default_rng(9))
        b = functional_smote(s, SmoteConfig(), np.random.default_rng(9))
        np.testing.assert_array_equal(a.data.scores, b.data.scores)

    @pytest.mark.parametrize("ratio", [0.0, 1.5])
    def test_bad_ratio(self, ratio):
        with pytest.raises(ValueError):
            SmoteConfig(target_ratio=ratio)

    def test_neighbour_ties_go_to_lower_index(self):
        pts = np.array([[0.0], [1.0], [-1.0], [5.0]])
        np.testing.assert_array_equal(minority_neighbors(pts, 2)[0], [1, 2])


class TestBootstrap:
    def test_equal_class_mass(self):
        y = np.r_[np.zeros(90, int), np.ones(10, int)]
        p = bootstrap_probabilities(y)
        assert p.sum() == pytest.approx(1.0)
        assert p[y == 0].sum() == pytest.approx(0.5) and p[y == 1].sum() == pytest.approx(0.5)
        assert p[0] == pytest.approx(1 / 180) and p[-1] == pytest.approx(1 / 20)

    def test_balanced_is_uniform(self):
        np.testing.assert_allclose(bootstrap_probabilities([0, 1, 1, 0]), 0.25)

    def test_single_class_fallback(self):
        with pytest.warns(UserWarning):
            p = bootstrap_probabilities([1, 1, 1, 1], n_classes=2)
        np.testing.assert_allclose(p, 0.25)

    def test_three_classes(self):
        y = np.r_[np.zeros(6, int), np.ones(3, int), np.full(1, 2)]
        p = bootstrap_probabilities(y)
        for k in range(3):
            assert p[y == k].sum() == pytest.approx(1 / 3)
