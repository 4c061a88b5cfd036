"""Entropy-split decision trees and bagged random forests.

Both classifiers share one exact greedy grower: at every node each candidate
feature is scanned at the midpoints of consecutive distinct sorted values and
the split with the largest information gain (base-2 entropy) wins. Ties keep
the earliest candidate feature and the earliest threshold, which makes
fitting fully deterministic.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .errors import ParameterError
from .validation import as_labels, as_matrix, check_count, rng_stream

__all__ = ["entropy", "TreeNode", "DecisionTree", "RandomForest"]

_GAIN_EPS = 1e-12


def entropy(p) -> float:
    """Shannon entropy in bits of a probability vector, with 0*log(0) = 0."""
    p = np.asarray(p, dtype=np.float64).ravel()
    if np.any(p < 0):
        raise ParameterError("probabilities must be non-negative")
    total = p.sum()
    if abs(total - 1.0) > 1e-9:
        raise ParameterError(f"probabilities must sum to 1, got {total}")
    nz = p[p > 0]
    return float(-np.sum(nz * np.log2(nz))) + 0.0


def _entropy_rows(counts: np.ndarray, totals: np.ndarray) -> np.ndarray:
    """Entropy of each row of a class-count matrix (rows may not be empty)."""
    p = counts / totals[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log2(p), 0.0)
    return terms.sum(axis=1)


class TreeNode:
    """Binary tree node. A node is a leaf iff ``left`` is None.

    Classification leaves carry ``distribution`` (empirical class
    probabilities); regression leaves used by the boosted trees carry
    ``value``. Internal nodes route rows with ``x[feature] <= threshold`` to
    the left child.
    """

    __slots__ = ("feature_index", "threshold", "left", "right", "distribution", "value")

    def __init__(self, *, feature_index: int = -1, threshold: float = 0.0,
                 left: "TreeNode | None" = None, right: "TreeNode | None" = None,
                 distribution: np.ndarray | None = None, value: float | None = None):
        self.feature_index = feature_index
        self.threshold = threshold
        self.left = left
        self.right = right
        self.distribution = distribution
        self.value = value

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())

    def to_dict(self) -> dict:
        if self.is_leaf:
            if self.distribution is not None:
                return {"leaf": [float(v) for v in self.distribution]}
            return {"leaf_value": float(self.value)}
        return {
            "feature": int(self.feature_index),
            "threshold": float(self.threshold),
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TreeNode":
        if "leaf" in doc:
            return cls(distribution=np.asarray(doc["leaf"], dtype=np.float64))
        if "leaf_value" in doc:
            return cls(value=float(doc["leaf_value"]))
        return cls(
            feature_index=int(doc["feature"]),
            threshold=float(doc["threshold"]),
            left=cls.from_dict(doc["left"]),
            right=cls.from_dict(doc["right"]),
        )


def _leaf_distribution(y: np.ndarray, n_classes: int) -> TreeNode:
    counts = np.bincount(y, minlength=n_classes).astype(np.float64)
    return TreeNode(distribution=counts / counts.sum())


def _best_entropy_split(X: np.ndarray, y: np.ndarray, idx: np.ndarray,
                        features: np.ndarray, n_classes: int) -> tuple[float, int, float]:
    """Best (gain, feature, threshold) over the candidate features.

    Returns gain 0 when no split improves on the parent entropy.
    """
    n = idx.size
    y_sub = y[idx]
    parent_counts = np.bincount(y_sub, minlength=n_classes).astype(np.float64)
    parent_entropy = _entropy_rows(parent_counts[None, :], np.array([float(n)]))[0]

    best_gain, best_feat, best_thr = 0.0, -1, 0.0
    for f in features:
        x = X[idx, f]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        boundaries = np.flatnonzero(xs[:-1] != xs[1:])
        if boundaries.size == 0:
            continue
        ys = y_sub[order]
        left_counts = np.empty((boundaries.size, n_classes))
        for c in range(n_classes):
            left_counts[:, c] = np.cumsum(ys == c)[boundaries]
        n_left = (boundaries + 1).astype(np.float64)
        n_right = n - n_left
        right_counts = parent_counts[None, :] - left_counts
        weighted = (n_left * _entropy_rows(left_counts, n_left)
                    + n_right * _entropy_rows(right_counts, n_right)) / n
        gains = parent_entropy - weighted
        i = int(np.argmax(gains))
        if gains[i] > best_gain + _GAIN_EPS:
            b = boundaries[i]
            best_gain = float(gains[i])
            best_feat = int(f)
            best_thr = float((xs[b] + xs[b + 1]) / 2.0)
    return best_gain, best_feat, best_thr


def _first_boundary(X: np.ndarray, idx: np.ndarray, features: np.ndarray) -> tuple[int, float]:
    for f in features:
        x = X[idx, f]
        xs = np.sort(x)
        boundaries = np.flatnonzero(xs[:-1] != xs[1:])
        if boundaries.size:
            b = boundaries[0]
            return int(f), float((xs[b] + xs[b + 1]) / 2.0)
    return -1, 0.0


def _grow_classification_tree(X: np.ndarray, y: np.ndarray, idx: np.ndarray,
                              depth: int, max_depth: int, n_classes: int,
                              n_candidate_features: int | None,
                              rng: np.random.Generator | None) -> TreeNode:
    y_sub = y[idx]
    if depth >= max_depth or idx.size < 2 or np.all(y_sub == y_sub[0]):
        return _leaf_distribution(y_sub, n_classes)

    d = X.shape[1]
    if n_candidate_features is None or n_candidate_features >= d:
        features = np.arange(d)
    else:
        features = np.sort(rng.permutation(d)[:n_candidate_features])

    gain, feat, thr = _best_entropy_split(X, y, idx, features, n_classes)
    if feat < 0:
        # No strictly positive gain anywhere. An impure node with at least
        # one usable boundary still splits (first boundary of the first
        # candidate feature): parity-style patterns have exactly zero gain
        # at the top yet resolve one level down.
        feat, thr = _first_boundary(X, idx, features)
        if feat < 0:
            return _leaf_distribution(y_sub, n_classes)

    left_mask = X[idx, feat] <= thr
    left_idx = idx[left_mask]
    right_idx = idx[~left_mask]
    if left_idx.size == 0 or right_idx.size == 0:
        # Guards against a midpoint that rounded onto an observed value.
        return _leaf_distribution(y_sub, n_classes)

    node = TreeNode(feature_index=feat, threshold=thr)
    node.left = _grow_classification_tree(X, y, left_idx, depth + 1, max_depth,
                                          n_classes, n_candidate_features, rng)
    node.right = _grow_classification_tree(X, y, right_idx, depth + 1, max_depth,
                                           n_classes, n_candidate_features, rng)
    return node


def apply_tree(node: TreeNode, X: np.ndarray) -> np.ndarray:
    """Evaluate a tree on every row of ``X``.

    Classification trees yield an ``(n, k)`` distribution matrix, regression
    trees an ``(n,)`` value vector.
    """
    probe = node
    while not probe.is_leaf:
        probe = probe.left
    regression = probe.distribution is None

    n = X.shape[0]
    out = np.zeros(n) if regression else np.zeros((n, _leaf_width(node)))

    def fill(nd: TreeNode, rows: np.ndarray) -> None:
        if rows.size == 0:
            return
        if nd.is_leaf:
            out[rows] = nd.value if regression else nd.distribution
            return
        mask = X[rows, nd.feature_index] <= nd.threshold
        fill(nd.left, rows[mask])
        fill(nd.right, rows[~mask])

    fill(node, np.arange(n))
    return out


def _leaf_width(node: TreeNode) -> int:
    while not node.is_leaf:
        node = node.left
    return int(node.distribution.size)


class DecisionTree(BaseEstimator, ClassifierMixin):
    """Greedy entropy-split classification tree.

    Splitting stops on pure nodes, at ``max_depth``, or when the node has no
    usable threshold left. Strictly positive information gain always wins;
    an impure node whose best gain is exactly zero still splits at the first
    available boundary so parity-style patterns stay learnable. Leaves store
    the empirical class distribution of their training rows.
    """

    def __init__(self, max_depth: int = 8):
        self.max_depth = max_depth

    def fit(self, X, y):
        X = as_matrix(X)
        y = as_labels(y, X.shape[0])
        check_count("max_depth", self.max_depth)
        self.n_classes_ = max(int(y.max()) + 1, 2)
        self.classes_ = np.arange(self.n_classes_)
        self.n_features_in_ = X.shape[1]
        self.root_ = _grow_classification_tree(
            X, y, np.arange(X.shape[0]), 0, int(self.max_depth),
            self.n_classes_, None, None,
        )
        return self

    def predict_proba(self, X):
        X = self._check_predict_input(X)
        return apply_tree(self.root_, X)

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)

    def _check_predict_input(self, X):
        X = as_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise ParameterError(
                f"X has {X.shape[1]} features, model was trained with {self.n_features_in_}"
            )
        return X


class RandomForest(BaseEstimator, ClassifierMixin):
    """Bagged ensemble of entropy-split trees.

    Each tree trains on a same-size bootstrap resample (when ``bootstrap``)
    and considers a fresh uniform subsample of ``ceil(sqrt(d))`` features at
    every split (``max_features="sqrt"``). With one tree, no bootstrap, and
    ``max_features=None`` the forest reproduces :class:`DecisionTree`
    prediction-for-prediction.
    """

    def __init__(self, n_trees: int = 30, max_depth: int = 10,
                 bootstrap: bool = True, max_features: int | str | None = "sqrt",
                 random_state: int = 0, n_threads: int = 1):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.bootstrap = bootstrap
        self.max_features = max_features
        self.random_state = random_state
        self.n_threads = n_threads

    def _n_candidates(self, d: int) -> int | None:
        if self.max_features is None:
            return None
        if isinstance(self.max_features, str):
            if self.max_features != "sqrt":
                raise ParameterError(f"max_features must be 'sqrt', an int, or None, got {self.max_features!r}")
            return int(np.ceil(np.sqrt(d)))
        k = check_count("max_features", self.max_features)
        return min(k, d)

    def fit(self, X, y):
        X = as_matrix(X)
        y = as_labels(y, X.shape[0])
        check_count("n_trees", self.n_trees)
        check_count("max_depth", self.max_depth)
        self.n_classes_ = max(int(y.max()) + 1, 2)
        self.classes_ = np.arange(self.n_classes_)
        self.n_features_in_ = X.shape[1]
        n = X.shape[0]
        n_candidates = self._n_candidates(X.shape[1])

        def build(t: int) -> TreeNode:
            rng = rng_stream(self.random_state, 0xF07E57, t)
            idx = rng.integers(0, n, size=n) if self.bootstrap else np.arange(n)
            # Skip the subsample draw entirely when every feature is in play,
            # so the degenerate forest walks the identical code path as a tree.
            feat_rng = rng if n_candidates is not None and n_candidates < X.shape[1] else None
            return _grow_classification_tree(
                X, y, np.asarray(idx), 0, int(self.max_depth),
                self.n_classes_, n_candidates, feat_rng,
            )

        if int(self.n_threads) > 1:
            with ThreadPoolExecutor(max_workers=int(self.n_threads)) as pool:
                self.trees_ = list(pool.map(build, range(int(self.n_trees))))
        else:
            self.trees_ = [build(t) for t in range(int(self.n_trees))]
        return self

    def predict_proba(self, X):
        X = as_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise ParameterError(
                f"X has {X.shape[1]} features, model was trained with {self.n_features_in_}"
            )
        acc = np.zeros((X.shape[0], self.n_classes_))
        for tree in self.trees_:
            acc += apply_tree(tree, X)
        return acc / len(self.trees_)

    def predict(self, X):
        """Majority vote of the per-tree argmax labels (ties to lowest class)."""
        X = as_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise ParameterError(
                f"X has {X.shape[1]} features, model was trained with {self.n_features_in_}"
            )
        votes = np.zeros((X.shape[0], self.n_classes_), dtype=np.int64)
        for tree in self.trees_:
            labels = np.argmax(apply_tree(tree, X), axis=1)
            votes[np.arange(X.shape[0]), labels] += 1
        return np.argmax(votes, axis=1)
