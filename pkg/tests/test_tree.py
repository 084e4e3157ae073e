import json
import math
from collections import Counter

import numpy as np
import pytest
from sklearn.model_selection import StratifiedKFold

from graphfkt.errors import DataError, SingleClassError, UsageError
from graphfkt.features import FeatureVector
from graphfkt.spectra import Label
from graphfkt.tree import DecisionTree, TreeNode, best_split, fit_tree, predict, tune_min_leaf

SCHEMA6 = ("ASD_dom1", "ASD_dom2", "ASD_dom3", "NT_dom1", "NT_dom2", "NT_dom3")

TWO_LEVEL_TREE = {
    "format_version": 1,
    "kind": "decision_tree",
    "min_leaf": 2,
    "schema": list(SCHEMA6),
    "root": {
        "counts": {"ASD": 10, "NT": 10},
        "feature": "ASD_dom1",
        "threshold": 0.04,
        "left": {"counts": {"ASD": 1, "NT": 7}},
        "right": {
            "counts": {"ASD": 9, "NT": 3},
            "feature": "NT_dom2",
            "threshold": 0.01,
            "left": {"counts": {"ASD": 8, "NT": 1}},
            "right": {"counts": {"ASD": 1, "NT": 2}},
        },
    },
}


def _vectors(X, schema=None):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    schema = schema or tuple(f"f{j}" for j in range(X.shape[1]))
    return [FeatureVector(row, schema) for row in X]


def _labels(is_asd):
    return [Label.ASD if a else Label.NT for a in is_asd]


def _entropy(pos, total):
    out = 0.0
    for count in (pos, total - pos):
        if count:
            p = count / total
            out -= p * math.log2(p)
    return out


def _ratio(X, y, feature, threshold):
    n = len(y)
    left = X[:, feature] <= threshold
    n_left = int(left.sum())
    gain = _entropy(int(y.sum()), n) - (
        n_left / n * _entropy(int(y[left].sum()), n_left)
        + (n - n_left) / n * _entropy(int(y[~left].sum()), n - n_left)
    )
    return gain / _entropy(n_left, n), gain, n_left


def _brute_force_best(X, y, min_leaf):
    best = None
    for j in range(X.shape[1]):
        values = sorted(set(X[:, j]))
        for lo, hi in zip(values, values[1:]):
            threshold = (lo + hi) / 2
            ratio, gain, n_left = _ratio(X, y, j, threshold)
            if n_left < min_leaf or len(y) - n_left < min_leaf or gain <= 1e-12:
                continue
            if best is None or ratio > best[2]:
                best = (j, threshold, ratio)
    return best


class TestBestSplit:
    def test_separable_one_dimensional(self):
        X = np.array([[0.0], [1.0], [10.0], [11.0]])
        y = np.array([True, True, False, False])
        feature, threshold, ratio = best_split(X, y, 2)
        assert feature == 0
        assert threshold == pytest.approx(5.5)
        assert ratio == pytest.approx(1.0)

    def test_interleaved_points_match_exhaustive_search(self):
        X = np.array([[0.1], [0.4], [0.5], [0.9], [1.3], [1.7], [2.0], [2.2]])
        y = np.array([True, False, True, True, False, False, True, False])
        feature, threshold, ratio = best_split(X, y, 1)
        expected = _brute_force_best(X, y, 1)
        assert ratio == pytest.approx(expected[2], abs=1e-12)
        assert _ratio(X, y, feature, threshold)[0] == pytest.approx(expected[2], abs=1e-12)

    def test_random_data_matches_exhaustive_search(self):
        rng = np.random.default_rng(0)
        for _ in range(40):
            n = int(rng.integers(6, 50))
            X = rng.standard_normal((n, 3))
            y = rng.random(n) < 0.5
            if y.all() or not y.any():
                continue
            min_leaf = int(rng.integers(1, 4))
            got = best_split(X, y, min_leaf)
            expected = _brute_force_best(X, y, min_leaf)
            if expected is None:
                assert got is None
                continue
            feature, threshold, ratio = got
            assert ratio == pytest.approx(expected[2], abs=1e-9)
            assert _ratio(X, y, feature, threshold)[0] == pytest.approx(expected[2], abs=1e-9)

    def test_tie_goes_to_first_feature(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
        y = np.array([True, True, False, False])
        assert best_split(X, y, 1)[0] == 0

    def test_no_positive_gain(self):
        X = np.array([[1.0], [1.0], [1.0], [1.0]])
        assert best_split(X, np.array([True, False, True, False]), 1) is None


class TestFitTree:
    def test_separable_tree_has_depth_one(self):
        tree = fit_tree(_vectors([[0.0], [1.0], [10.0], [11.0]]), _labels([1, 1, 0, 0]), 2)
        assert tree.depth == 1
        assert tree.root.threshold == pytest.approx(5.5)
        assert predict(tree, _vectors([[0.5]])[0]) is Label.ASD
        assert predict(tree, _vectors([[10.5]])[0]) is Label.NT

    def test_pure_training_set_is_single_leaf(self):
        tree = fit_tree(_vectors(np.arange(6.0)[:, None]), [Label.NT] * 6, 1)
        assert tree.n_leaves == 1
        assert tree.root.label is Label.NT

    def test_min_leaf_one_fits_training_data(self):
        rng = np.random.default_rng(1)
        for seed in range(10):
            X = rng.standard_normal((30, 3))
            y = rng.random(30) < 0.5
            tree = fit_tree(_vectors(X), _labels(y), 1)
            predicted = [predict(tree, v) is Label.ASD for v in _vectors(X)]
            assert predicted == list(y), f"seed {seed}"

    def test_every_leaf_holds_min_leaf_instances(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((60, 4))
        y = rng.random(60) < 0.4
        for min_leaf in (1, 3, 7):
            tree = fit_tree(_vectors(X), _labels(y), min_leaf)
            reached = Counter(id(tree.apply(v)) for v in _vectors(X))
            for leaf in tree.leaves():
                assert leaf.n >= min_leaf
                assert reached[id(leaf)] == leaf.n

    def test_monotone_transform_keeps_training_predictions(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((40, 2))
        y = rng.random(40) < 0.5
        warped = X.copy()
        warped[:, 0] = np.exp(3 * X[:, 0])
        a = fit_tree(_vectors(X), _labels(y), 2)
        b = fit_tree(_vectors(warped), _labels(y), 2)
        assert [predict(a, v) for v in _vectors(X)] == [predict(b, v) for v in _vectors(warped)]

    def test_min_leaf_below_one(self):
        with pytest.raises(UsageError):
            fit_tree(_vectors([[0.0], [1.0]]), _labels([1, 0]), 0)

    def test_needs_two_instances(self):
        with pytest.raises(DataError):
            fit_tree(_vectors([[0.0]]), _labels([1]), 1)

    def test_majority_tie_goes_to_nt(self):
        assert TreeNode(n_asd=2, n_nt=2).label is Label.NT
        assert TreeNode(n_asd=3, n_nt=2).errors == 2


class TestPredict:
    def test_two_level_tree(self):
        tree = DecisionTree.from_dict(TWO_LEVEL_TREE)
        values = np.array([0.05, 0.0, 0.0, 0.0, 0.005, 0.0])
        assert predict(tree, FeatureVector(values, SCHEMA6)) is Label.ASD
        values[0] = 0.04
        assert predict(tree, FeatureVector(values, SCHEMA6)) is Label.NT

    def test_single_leaf_predicts_its_majority(self):
        tree = DecisionTree(TreeNode(n_asd=5, n_nt=1), ("a",), 1)
        assert predict(tree, FeatureVector(np.array([123.0]), ("a",))) is Label.ASD

    def test_schema_mismatch(self):
        tree = DecisionTree.from_dict(TWO_LEVEL_TREE)
        with pytest.raises(DataError):
            predict(tree, FeatureVector(np.zeros(2), ("ASD_dom1", "NT_dom1")))

    def test_render(self):
        text = DecisionTree.from_dict(TWO_LEVEL_TREE).render()
        assert text.splitlines() == [
            "ASD_dom1 <= 0.04: NT (8/1)",
            "ASD_dom1 > 0.04",
            "|   NT_dom2 <= 0.01: ASD (9/1)",
            "|   NT_dom2 > 0.01: NT (3/1)",
        ]

    def test_document_round_trip_keeps_predictions(self):
        rng = np.random.default_rng(4)
        X = rng.standard_normal((40, 3))
        y = rng.random(40) < 0.5
        tree = fit_tree(_vectors(X), _labels(y), 2)
        restored = DecisionTree.from_dict(json.loads(json.dumps(tree.to_dict())))
        assert restored.to_dict() == tree.to_dict()
        samples = _vectors(rng.standard_normal((20, 3)))
        assert [predict(tree, v) for v in samples] == [predict(restored, v) for v in samples]

    def test_unknown_feature_in_document(self):
        data = json.loads(json.dumps(TWO_LEVEL_TREE))
        data["root"]["feature"] = "GFT_mode_1"
        with pytest.raises(DataError):
            DecisionTree.from_dict(data)


class TestTuneMinLeaf:
    def test_separable_data_picks_smallest(self):
        X = np.r_[np.linspace(0, 1, 20), np.linspace(10, 11, 20)][:, None]
        y = np.r_[np.ones(20, bool), np.zeros(20, bool)]
        assert tune_min_leaf(_vectors(X), _labels(y), [2, 5, 10], 5, seed=0) == 2

    def test_single_candidate(self):
        X = np.random.default_rng(5).standard_normal((10, 2))
        assert tune_min_leaf(_vectors(X), _labels([1, 0] * 5), [2], 5, seed=0) == 2

    def test_matches_manual_cross_validation(self):
        rng = np.random.default_rng(6)
        y = np.r_[np.ones(25, bool), np.zeros(25, bool)]
        X = rng.standard_normal((50, 2)) + 0.8 * y[:, None]
        grid = [1, 2, 5, 10]

        folds = list(StratifiedKFold(n_splits=5, shuffle=True, random_state=11).split(X, y))
        scores = []
        for min_leaf in grid:
            fold_scores = []
            for train, valid in folds:
                tree = fit_tree(_vectors(X[train]), _labels(y[train]), min_leaf)
                hits = [(predict(tree, v) is Label.ASD) == a for v, a in zip(_vectors(X[valid]), y[valid])]
                fold_scores.append(np.mean(hits))
            scores.append(np.mean(fold_scores))
        expected = grid[int(np.argmax(scores))]

        assert tune_min_leaf(_vectors(X), _labels(y), grid, 5, seed=11) == expected

    def test_single_class(self):
        with pytest.raises(SingleClassError):
            tune_min_leaf(_vectors(np.arange(6.0)[:, None]), [Label.ASD] * 6, [1, 2], 3, seed=0)

    @pytest.mark.parametrize("grid,folds", [([], 5), ([0, 2], 5), ([1, 2], 1)])
    def test_bad_parameters(self, grid, folds):
        X = np.arange(6.0)[:, None]
        with pytest.raises(UsageError):
            tune_min_leaf(_vectors(X), _labels([1, 0] * 3), grid, folds, seed=0)
