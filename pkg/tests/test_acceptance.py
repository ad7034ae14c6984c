"""Acceptance suite: one test per criterion, each printing a pass/fail line in the summary.

Run alone with ``pytest tests/test_acceptance.py`` or ``python3 tests/test_acceptance.py``.
"""

import itertools
import json
import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from frfacs.bench import CVConfig, ablation_specs, run_ablation, run_cv, ModelSpec
from frfacs.distance import dtw_distance
from frfacs.forest import ForestConfig, fit_forest
from frfacs.fpca import ScoreDataset, fit_fpca
from frfacs.imbalance import SmoteConfig, bootstrap_probabilities, functional_smote
from frfacs.metrics import auprc, evaluate
from frfacs.simgen import SimConfig, generate
from frfacs.tree import TreeConfig, fit_tree, weighted_gini
from frfacs._random import make_rng

import oracles


def test_c01_truncation_identity(criterion):
    with criterion(1, "mean truncation error equals eigenvalue tail sum") as out:
        start = time.perf_counter()
        worst = 0.0
        for seed in range(5):
            data = generate(SimConfig(n=100, grid_size=101, seed=seed))
            model = fit_fpca(data, n_components=10)
            for m in range(11):
                err = model.truncation_error(data, m)
                tail = float(np.sum(model.all_eigenvalues[m:]))
                worst = max(worst, abs(err - tail) / tail)
        elapsed = time.perf_counter() - start
        out.detail = f"max rel gap {worst:.1e}, {elapsed:.2f}s"
        assert worst <= 1e-8
        assert elapsed < 5.0


def test_c02_weighted_gini_identity(criterion):
    with criterion(2, "weighted Gini = sum w p - sum w p^2") as out:
        rng = np.random.default_rng(2)
        cases = []
        for _ in range(10_000):
            K = int(rng.integers(2, 7))
            counts = rng.integers(0, 100, size=K)
            counts[rng.integers(K)] += 1
            cases.append((counts, rng.uniform(0, 10, size=K)))
        start = time.perf_counter()
        worst = 0.0
        for counts, w in cases:
            p = counts / counts.sum()
            worst = max(worst, abs(weighted_gini(counts, w) - (np.sum(w * p) - np.sum(w * p * p))))
        elapsed = time.perf_counter() - start
        out.detail = f"max abs gap {worst:.1e}, {elapsed:.2f}s"
        assert worst <= 1e-12
        assert elapsed < 1.0


def test_c03_plain_forest_matches_reference(criterion):
    with criterion(3, "uniform configuration reproduces a reference plain forest") as out:
        mismatches = 0
        for s in range(20):
            rng = np.random.default_rng(100 + s)
            n = int(rng.integers(40, 201))
            R = float(rng.choice([1.0, 2.0, 4.0]))
            train = generate(SimConfig(n=n, R=R, grid_size=41, noise_sd=0.1, seed=s))
            test = generate(SimConfig(n=60, R=R, grid_size=41, noise_sd=0.1, seed=1000 + s))
            cfg = ForestConfig.plain_rf(n_trees=8, n_components=int(rng.integers(2, 6)), seed=s)
            model = fit_forest(train, cfg)
            labels, _ = model.predict(test)
            ref = oracles.reference_forest_predict(
                model.scores(train), train.labels, 2, model.scores(test), cfg.n_trees, cfg.seed
            )
            mismatches += int(np.sum(labels != ref))
        out.detail = f"{mismatches} mismatching labels over 20 instances"
        assert mismatches == 0


def test_c04_root_split_oracle(criterion):
    with criterion(4, "root split equals exhaustive weighted-gain maximiser") as out:
        rng = np.random.default_rng(4)
        schemes = ["uniform", "global", "node_dynamic"]
        agree = 0
        for i in range(50):
            n = int(rng.integers(4, 31))
            M = int(rng.integers(1, 4))
            K = int(rng.integers(2, 4))
            X = rng.integers(0, 6, size=(n, M)).astype(float) if i % 2 else rng.standard_normal((n, M))
            y = rng.integers(0, K, size=n)
            scheme = schemes[i % 3]
            tree = fit_tree(ScoreDataset(X, y, K, None), TreeConfig(weight_scheme=scheme, mtry=M), make_rng(i))
            counts = [int(np.sum(y == k)) for k in range(K)]
            gw = [n / c if c else 1.0 for c in counts]
            w = oracles.scheme_weights(counts, scheme, gw)
            expected = None
            if sum(c > 0 for c in counts) > 1:
                expected = oracles.best_split(X, y, K, range(M), lambda c: oracles.gini_weighted(c, w))
            got = None if tree.feature[0] < 0 else (int(tree.feature[0]), float(tree.threshold[0]))
            agree += got == (None if expected is None else expected[:2])
        out.detail = f"{agree}/50 exact matches"
        assert agree == 50


def test_c05_dtw_oracle(criterion):
    with criterion(5, "DTW equals full path enumeration; identity and diagonal bound") as out:
        rng = np.random.default_rng(5)
        exact = 0
        for i in range(500):
            n, m = rng.integers(1, 7, size=2)
            if i % 2:
                x, y = rng.integers(-3, 4, size=n).astype(float), rng.integers(-3, 4, size=m).astype(float)
            else:
                x, y = rng.standard_normal(n), rng.standard_normal(m)
            exact += dtw_distance(x, y) == oracles.brute_dtw(x, y)
        bound_ok = 0
        for _ in range(1000):
            L = int(rng.integers(1, 40))
            x, y = rng.standard_normal(L), rng.standard_normal(L)
            bound_ok += dtw_distance(x, x) == 0.0 and dtw_distance(x, y) <= float(np.sum((x - y) ** 2))
        out.detail = f"{exact}/500 exact, {bound_ok}/1000 identity+bound"
        assert exact == 500 and bound_ok == 1000


def test_c06_smote_geometry(criterion):
    with criterion(6, "synthetic samples lie on their parent segments") as out:
        rng = np.random.default_rng(6)
        z = np.vstack([rng.standard_normal((2000, 4)), 2 + rng.standard_normal((100, 4))])
        y = np.r_[np.zeros(2000, int), np.ones(100, int)]
        res = functional_smote(ScoreDataset(z, y, 2, None), SmoteConfig(target_ratio=0.55, k_neighbors=5), rng)
        synth = res.data.scores[res.n_original :]
        za, zb = z[res.parents[:, 0]], z[res.parents[:, 1]]
        d = zb - za
        lam = np.sum((synth - za) * d, axis=1) / np.sum(d * d, axis=1)
        resid = np.max(np.abs(synth - (za + lam[:, None] * d)), axis=1)
        lo, hi = np.minimum(za, zb), np.maximum(za, zb)
        inside = np.all((synth >= lo - 1e-12) & (synth <= hi + 1e-12), axis=1)
        on_segment = (resid <= 1e-9) & inside & (lam >= -1e-12) & (lam <= 1 + 1e-12)
        final_minority = int(np.sum(res.data.labels == 1))
        out.detail = f"{int(on_segment.sum())}/{len(synth)} on segment, minority {final_minority} vs target {0.55 * 2000:g}"
        assert len(synth) == 1000
        assert on_segment.all()
        assert abs(final_minority - 0.55 * 2000) < 1


def test_c07_cost_bootstrap_balance(criterion):
    with criterion(7, "cost bootstrap draws both classes equally often") as out:
        y = np.r_[np.zeros(90, int), np.ones(10, int)]
        p = bootstrap_probabilities(y)
        idx = np.random.default_rng(7).choice(y.size, size=100_000, p=p)
        freq = np.bincount(y[idx], minlength=2) / idx.size
        out.detail = f"class frequencies {freq[0]:.4f} / {freq[1]:.4f}"
        assert np.all(np.abs(freq - 0.5) <= 0.01)


def test_c08_directional_reproduction(criterion):
    with criterion(8, "full model beats plain forest on minority F1 and balanced accuracy") as out:
        data = generate(SimConfig(n=500, R=5.0, noise_sd=0.05, seed=8))
        base = ForestConfig(n_trees=100, n_components=10)
        specs = [s for s in ablation_specs(base) if s.name in ("plain_rf", "full")]
        fit_forest(data.subset(np.r_[0:30, data.n - 10 : data.n]), ForestConfig(n_trees=2, n_components=3))  # JIT warm-up
        start = time.perf_counter()
        res = run_ablation(data, base, CVConfig(cv_folds=10, repeats=10, master_seed=8), specs)
        elapsed = time.perf_counter() - start
        d_f1 = res.paired_differences("minority_f1", "full")
        d_ba = res.paired_differences("balanced_accuracy", "full")
        full, plain = res.by_name("full").summary(), res.by_name("plain_rf").summary()
        out.detail = (
            f"F1 {full['minority_f1']['mean']:.3f} vs {plain['minority_f1']['mean']:.3f}, "
            f"BA {full['balanced_accuracy']['mean']:.3f} vs {plain['balanced_accuracy']['mean']:.3f}, "
            f"{d_f1.size} paired folds, {elapsed:.0f}s"
        )
        assert d_f1.size == 100 and d_ba.size == 100
        assert d_f1.mean() > 0 and d_ba.mean() > 0
        assert full["minority_f1"]["mean"] > plain["minority_f1"]["mean"]
        assert full["balanced_accuracy"]["mean"] > plain["balanced_accuracy"]["mean"]
        assert elapsed < 300


def test_c09_balanced_accuracy_trend(criterion):
    with criterion(9, "balanced accuracy non-decreasing in n within one pooled SD") as out:
        stats = []
        for n in (100, 300, 1000):
            data = generate(SimConfig(n=n, seed=9))
            res = run_cv(data, ModelSpec("full", forest=ForestConfig(n_trees=100)), CVConfig(cv_folds=5, repeats=2, master_seed=9))
            ba = res.values("balanced_accuracy")
            stats.append((n, ba.mean(), ba.std(ddof=1)))
        ok = True
        for (_, m1, s1), (_, m2, s2) in zip(stats, stats[1:]):
            ok &= m2 >= m1 - math.sqrt((s1 * s1 + s2 * s2) / 2)
        out.detail = ", ".join(f"n={n}: {m:.3f}+/-{s:.3f}" for n, m, s in stats)
        assert ok


def test_c10_metrics_oracle(criterion):
    with criterion(10, "AUPRC and MCC match brute force on all 4-sample cases") as out:
        worst_ap = worst_mcc = 0.0
        cases = 0
        for labels in itertools.product([0, 1], repeat=4):
            y = np.array(labels)
            for pred in itertools.product([0, 1], repeat=4):
                rep = evaluate(y, np.array(pred), 2, minority_class=1)
                worst_mcc = max(worst_mcc, abs(rep.mcc - oracles.brute_mcc(y, pred)))
                cases += 1
            if y.sum() == 0:
                continue
            for perm in itertools.permutations([0.1, 0.4, 0.7, 0.9]):
                worst_ap = max(worst_ap, abs(auprc(y, perm) - oracles.brute_auprc(y, perm)))
        y = np.r_[np.zeros(90, int), np.ones(10, int)]
        degenerate = evaluate(y, np.zeros(100, int), 2, minority_class=1)
        out.detail = f"{cases} label/prediction cases, AUPRC gap {worst_ap:.1e}, MCC gap {worst_mcc:.1e}"
        assert worst_ap <= 1e-12 and worst_mcc <= 1e-12
        assert degenerate.balanced_accuracy == 0.5
        assert degenerate.g_mean == 0.0
        assert degenerate.mcc == 0.0


def test_c11_worker_count_determinism(criterion, tmp_path):
    with criterion(11, "ablate CSV identical on 1 and 8 workers") as out:
        cfg = {
            "data": {"sim": {"n": 150, "R": 5.0, "seed": 11}},
            "model": {"n_trees": 20, "n_components": 6},
            "fknn": {"k": 5},
            "cv_folds": 5,
            "repeats": 2,
            "master_seed": 11,
            "name": "determinism",
        }
        path = tmp_path / "exp.json"
        path.write_text(json.dumps(cfg))
        env = dict(os.environ)
        env.pop("FRFACS_WORKERS", None)
        outputs = []
        for workers in (1, 8):
            out_dir = tmp_path / f"w{workers}"
            cmd = [sys.executable, "-m", "frfacs.cli", "ablate", "--config", str(path), "--out", str(out_dir), "--workers", str(workers)]
            subprocess.run(cmd, check=True, capture_output=True, env=env)
            outputs.append((out_dir / "determinism.csv").read_bytes())
        n_rows = outputs[0].count(b"\n") - 1
        out.detail = f"{n_rows} CSV rows, identical={outputs[0] == outputs[1]}"
        assert n_rows > 0
        assert outputs[0] == outputs[1]


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
