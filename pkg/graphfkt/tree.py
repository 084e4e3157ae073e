"""
Gain-ratio decision tree over numeric features

Binary splits at midpoints between consecutive distinct values, chosen by
information gain divided by split information. There is no subtree
pruning; capacity is controlled by the minimal number of training
instances per leaf, which is tuned by an inner stratified cross-validation.
"""

import logging
import warnings
from dataclasses import dataclass
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.model_selection import StratifiedKFold

from .config import JSON_FORMAT_VERSION
from .errors import DataError, SingleClassError, UsageError
from .features import FeatureVector, feature_matrix
from .spectra import Label

logger = logging.getLogger(__name__)

MIN_GAIN = 1e-12


@dataclass
class TreeNode:
    """Internal node when ``feature`` is set, leaf otherwise"""
    n_asd: int
    n_nt: int
    feature: Optional[int] = None
    threshold: Optional[float] = None
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    @property
    def n(self) -> int:
        return self.n_asd + self.n_nt

    @property
    def label(self) -> Label:
        # Majority ties go to NT
        return Label.ASD if self.n_asd > self.n_nt else Label.NT

    @property
    def errors(self) -> int:
        return self.n_nt if self.label is Label.ASD else self.n_asd


@dataclass
class DecisionTree:
    root: TreeNode
    schema: Tuple[str, ...]
    min_leaf: int

    def apply(self, features: FeatureVector) -> TreeNode:
        """Leaf reached by one feature vector"""
        if tuple(features.schema) != self.schema:
            raise DataError(f"feature schema {features.schema} does not match the tree's {self.schema}")
        node = self.root
        while not node.is_leaf:
            node = node.left if features.values[node.feature] <= node.threshold else node.right
        return node

    def leaves(self) -> Iterator[TreeNode]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                yield node
            else:
                stack.extend((node.right, node.left))

    @property
    def n_leaves(self) -> int:
        return sum(1 for _ in self.leaves())

    @property
    def depth(self) -> int:
        def _depth(node: TreeNode) -> int:
            if node.is_leaf:
                return 0
            return 1 + max(_depth(node.left), _depth(node.right))
        return _depth(self.root)

    def render(self) -> str:
        """Indented text rendering, one test per line, ``|`` per level"""
        if self.root.is_leaf:
            node = self.root
            return f": {node.label.value} ({node.n}/{node.errors})"

        lines: List[str] = []

        def _walk(node: TreeNode, level: int):
            name = self.schema[node.feature]
            prefix = "|   " * level
            for op, child in (("<=", node.left), (">", node.right)):
                test = f"{prefix}{name} {op} {node.threshold:.6g}"
                if child.is_leaf:
                    lines.append(f"{test}: {child.label.value} ({child.n}/{child.errors})")
                else:
                    lines.append(test)
                    _walk(child, level + 1)

        _walk(self.root, 0)
        return "\n".join(lines)

    def to_dict(self) -> Dict[str, Any]:
        def _node(node: TreeNode) -> Dict[str, Any]:
            out: Dict[str, Any] = {"counts": {"ASD": node.n_asd, "NT": node.n_nt}}
            if node.is_leaf:
                out["label"] = node.label.value
            else:
                out["feature"] = self.schema[node.feature]
                out["threshold"] = float(node.threshold)
                out["left"] = _node(node.left)
                out["right"] = _node(node.right)
            return out

        return {
            "format_version": JSON_FORMAT_VERSION,
            "kind": "decision_tree",
            "min_leaf": self.min_leaf,
            "schema": list(self.schema),
            "root": _node(self.root),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DecisionTree":
        if data.get("kind") != "decision_tree":
            raise DataError(f"not a decision tree document (kind={data.get('kind')!r})")
        schema = tuple(data["schema"])

        def _node(raw: Dict[str, Any]) -> TreeNode:
            counts = raw.get("counts", {})
            node = TreeNode(n_asd=int(counts.get("ASD", 0)), n_nt=int(counts.get("NT", 0)))
            if "feature" in raw:
                if raw["feature"] not in schema:
                    raise DataError(f"tree tests unknown feature {raw['feature']!r}")
                threshold = float(raw["threshold"])
                if not np.isfinite(threshold):
                    raise DataError("tree thresholds must be finite")
                node.feature = schema.index(raw["feature"])
                node.threshold = threshold
                node.left = _node(raw["left"])
                node.right = _node(raw["right"])
            return node

        return cls(root=_node(data["root"]), schema=schema, min_leaf=int(data.get("min_leaf", 1)))


def _entropy(n_pos: np.ndarray, n_total: np.ndarray) -> np.ndarray:
    """Binary entropy in bits of n_pos positives among n_total, elementwise"""
    n_pos = np.asarray(n_pos, dtype=float)
    n_total = np.asarray(n_total, dtype=float)
    out = np.zeros(np.broadcast(n_pos, n_total).shape)
    for counts in (n_pos, n_total - n_pos):
        with np.errstate(divide="ignore", invalid="ignore"):
            p = counts / n_total
            term = np.where(p > 0, -p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
        out = out + term
    return out


def best_split(X: np.ndarray, is_asd: np.ndarray, min_leaf: int) -> Optional[Tuple[int, float, float]]:
    """
    Highest gain-ratio split of one node's instances

    Ties go to the lower feature index, then to the lower threshold.

    Args:
        X: n x d feature matrix
        is_asd: Boolean labels (True for ASD)
        min_leaf: Minimal instances per child

    Returns:
        (feature, threshold, gain_ratio) or None when no split has positive gain
    """
    n = X.shape[0]
    parent_info = float(_entropy(is_asd.sum(), n))
    best = None

    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        values = X[order, j]
        cum_asd = np.cumsum(is_asd[order])

        # Position i puts sorted instances 0..i on the left
        positions = np.flatnonzero(values[:-1] < values[1:])
        n_left = positions + 1
        valid = (n_left >= min_leaf) & (n - n_left >= min_leaf)
        positions, n_left = positions[valid], n_left[valid]
        if positions.size == 0:
            continue

        n_right = n - n_left
        left_asd = cum_asd[positions]
        right_asd = cum_asd[-1] - left_asd
        child_info = (n_left * _entropy(left_asd, n_left) + n_right * _entropy(right_asd, n_right)) / n
        gain = parent_info - child_info
        split_info = _entropy(n_left, n)
        ratio = np.where(gain > MIN_GAIN, gain / split_info, -np.inf)

        k = int(np.argmax(ratio))
        if not np.isfinite(ratio[k]):
            continue
        if best is None or ratio[k] > best[2]:
            lo, hi = values[positions[k]], values[positions[k] + 1]
            threshold = (lo + hi) / 2.0
            if threshold >= hi:
                threshold = lo
            best = (j, float(threshold), float(ratio[k]))

    return best


def _grow(X: np.ndarray, is_asd: np.ndarray, min_leaf: int) -> TreeNode:
    n_asd = int(is_asd.sum())
    node = TreeNode(n_asd=n_asd, n_nt=len(is_asd) - n_asd)
    if node.n_asd == 0 or node.n_nt == 0 or node.n < 2 * min_leaf:
        return node

    split = best_split(X, is_asd, min_leaf)
    if split is None:
        return node

    feature, threshold, _ = split
    go_left = X[:, feature] <= threshold
    node.feature = feature
    node.threshold = threshold
    node.left = _grow(X[go_left], is_asd[go_left], min_leaf)
    node.right = _grow(X[~go_left], is_asd[~go_left], min_leaf)
    return node


def _as_training_arrays(features: Sequence[FeatureVector], labels: Sequence) -> Tuple[np.ndarray, np.ndarray, Tuple[str, ...]]:
    if len(features) != len(labels):
        raise DataError(f"{len(features)} feature vectors for {len(labels)} labels")
    X, schema = feature_matrix(features)
    is_asd = np.array([Label.parse(label) is Label.ASD for label in labels], dtype=bool)
    return X, is_asd, schema


def _fit_arrays(X: np.ndarray, is_asd: np.ndarray, schema: Tuple[str, ...], min_leaf: int) -> DecisionTree:
    if int(min_leaf) < 1:
        raise UsageError(f"min_leaf must be >= 1, got {min_leaf}")
    if X.shape[0] < 2:
        raise DataError(f"a tree needs at least 2 training instances, got {X.shape[0]}")
    return DecisionTree(root=_grow(X, is_asd, int(min_leaf)), schema=schema, min_leaf=int(min_leaf))


def fit_tree(features: Sequence[FeatureVector], labels: Sequence, min_leaf: int) -> DecisionTree:
    """
    Grow a gain-ratio tree top-down

    Args:
        features: Training feature vectors (shared schema)
        labels: Training labels
        min_leaf: Minimal training instances per leaf

    Returns:
        DecisionTree
    """
    X, is_asd, schema = _as_training_arrays(features, labels)
    tree = _fit_arrays(X, is_asd, schema, min_leaf)
    logger.debug("Grew tree: min_leaf=%d depth=%d leaves=%d", tree.min_leaf, tree.depth, tree.n_leaves)
    return tree


def _predict_array(tree: DecisionTree, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0], dtype=bool)
    for i, row in enumerate(X):
        node = tree.root
        while not node.is_leaf:
            node = node.left if row[node.feature] <= node.threshold else node.right
        out[i] = node.label is Label.ASD
    return out


def predict(tree: DecisionTree, features: FeatureVector) -> Label:
    """Descend from the root; values <= threshold go left"""
    return tree.apply(features).label


def tune_min_leaf(features: Sequence[FeatureVector], labels: Sequence, grid: Sequence[int],
                  folds: int, seed: int) -> int:
    """
    Pick the leaf size with the best stratified k-fold validation accuracy

    Args:
        features: Training feature vectors
        labels: Training labels
        grid: Candidate min_leaf values
        folds: Number of inner folds (>= 2)
        seed: Fold assignment seed

    Returns:
        Best grid value, ties to the smaller value
    """
    candidates = sorted(set(int(v) for v in grid))
    if not candidates:
        raise UsageError("tuning grid must not be empty")
    if candidates[0] < 1:
        raise UsageError(f"tuning grid values must be >= 1, got {candidates[0]}")
    if int(folds) < 2:
        raise UsageError(f"inner folds must be >= 2, got {folds}")

    X, is_asd, schema = _as_training_arrays(features, labels)
    if is_asd.all() or not is_asd.any():
        raise SingleClassError("both classes required to tune the tree")
    if len(candidates) == 1:
        return candidates[0]

    # StratifiedKFold rejects more folds than the larger class has members
    n_splits = min(int(folds), max(int(is_asd.sum()), int((~is_asd).sum())))
    if n_splits < 2:
        logger.debug("Too few instances for inner CV, keeping min_leaf=%d", candidates[0])
        return candidates[0]

    cv = StratifiedKFold(n_splits=n_splits, shuffle=True, random_state=seed)
    with warnings.catch_warnings():
        # A class smaller than the fold count is allowed
        warnings.simplefilter("ignore", UserWarning)
        fold_indices = list(cv.split(X, is_asd))

    best_value, best_accuracy = candidates[0], -1.0
    for min_leaf in candidates:
        hits = []
        for train_idx, valid_idx in fold_indices:
            tree = DecisionTree(_grow(X[train_idx], is_asd[train_idx], min_leaf), schema, min_leaf)
            hits.append(np.mean(_predict_array(tree, X[valid_idx]) == is_asd[valid_idx]))
        accuracy = float(np.mean(hits))
        logger.debug("min_leaf=%d inner accuracy %.4f", min_leaf, accuracy)
        if accuracy > best_accuracy:
            best_value, best_accuracy = min_leaf, accuracy

    return best_value
