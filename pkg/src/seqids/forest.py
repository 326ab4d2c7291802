"""Random forest classifier grown with Gini impurity, written from scratch.

Serves two roles: a per-step action classifier, and the feature ranker used
during preprocessing (normalized mean decrease in impurity).
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .validation import check_features, check_samples

LEAF = -1


class DecisionTree:
    """Array-backed binary tree. ``feature[k] == LEAF`` marks a leaf."""

    def __init__(self, feature, threshold, left, right, counts, importance):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.counts = counts
        self.importance = importance

    @property
    def n_nodes(self):
        return len(self.feature)

    def apply(self, X):
        node = np.zeros(len(X), dtype=int)
        active = self.feature[node] != LEAF
        while active.any():
            idx = np.flatnonzero(active)
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active[idx] = self.feature[node[idx]] != LEAF
        return node

    def predict(self, X):
        # argmax picks the lowest class index on ties
        return np.argmax(self.counts[self.apply(X)], axis=1)

    def to_dict(self):
        return {
            "feature": self.feature.tolist(),
            "threshold": [float(t) for t in self.threshold],
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "counts": self.counts.tolist(),
            "importance": [float(v) for v in self.importance],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            np.asarray(d["feature"], dtype=int),
            np.asarray(d["threshold"], dtype=float),
            np.asarray(d["left"], dtype=int),
            np.asarray(d["right"], dtype=int),
            np.asarray(d["counts"], dtype=float),
            np.asarray(d["importance"], dtype=float),
        )


def _best_split(x, y_onehot, n_node_counts):
    """Best Gini split on one feature; returns (weighted child impurity, threshold) or None."""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    valid = xs[:-1] < xs[1:]
    if not valid.any():
        return None
    left = np.cumsum(y_onehot[order], axis=0)[:-1]
    n = len(x)
    n_left = np.arange(1, n, dtype=float)
    n_right = n - n_left
    right = n_node_counts - left
    imp_left = n_left - (left * left).sum(axis=1) / n_left
    imp_right = n_right - (right * right).sum(axis=1) / n_right
    score = np.where(valid, imp_left + imp_right, np.inf)
    i = int(np.argmin(score))
    return score[i], 0.5 * (xs[i] + xs[i + 1])


def grow_tree(X, y, n_classes, max_features, rng, min_samples_split=2, max_depth=None):
    """Grow one CART tree on (X, y). ``y`` holds class indices."""
    n_features = X.shape[1]
    onehot = np.eye(n_classes)[y]
    feature, threshold, left, right, counts = [], [], [], [], []
    importance = np.zeros(n_features)

    def new_node(idx):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        counts.append(onehot[idx].sum(axis=0))
        return len(feature) - 1

    stack = [(new_node(np.arange(len(y))), np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        c = counts[node]
        n = len(idx)
        node_imp = n - (c * c).sum() / n  # n * gini
        if (
            n < min_samples_split
            or node_imp <= 1e-12
            or (max_depth is not None and depth >= max_depth)
        ):
            continue
        best = None
        # Keep drawing features past max_features until one admits a split.
        for visited, f in enumerate(rng.permutation(n_features)):
            if visited >= max_features and best is not None:
                break
            res = _best_split(X[idx, f], onehot[idx], c)
            if res is not None and (best is None or res[0] < best[0]):
                best = (res[0], res[1], f)
        if best is None:
            continue
        score, thr, f = best
        mask = X[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        importance[f] += node_imp - score
        feature[node] = int(f)
        threshold[node] = float(thr)
        ln, rn = new_node(li), new_node(ri)
        left[node], right[node] = ln, rn
        stack.append((rn, ri, depth + 1))
        stack.append((ln, li, depth + 1))

    return DecisionTree(
        np.asarray(feature, dtype=int),
        np.asarray(threshold, dtype=float),
        np.asarray(left, dtype=int),
        np.asarray(right, dtype=int),
        np.asarray(counts, dtype=float),
        importance,
    )


class RandomForest(ClassifierMixin, BaseEstimator):
    """Bagged CART ensemble with hard majority voting.

    Parameters
    ----------
    n_estimators : int
        Number of trees.
    max_features : int, "sqrt" or None
        Candidate attributes drawn per split; ``"sqrt"`` means ``ceil(sqrt(d))``.
    bootstrap : bool
        Grow each tree on a bootstrap resample instead of the full set.
    min_samples_split, max_depth :
        Usual CART stopping rules; ``max_depth=None`` grows until pure.
    random_state : int
        Seed for bootstrap draws and feature subsampling.
    """

    def __init__(self, n_estimators=100, max_features="sqrt", bootstrap=True,
                 min_samples_split=2, max_depth=None, random_state=0):
        self.n_estimators = n_estimators
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.min_samples_split = min_samples_split
        self.max_depth = max_depth
        self.random_state = random_state

    def _n_candidates(self, d):
        mf = self.max_features
        if mf is None:
            return d
        if mf == "sqrt":
            return max(1, math.ceil(math.sqrt(d)))
        mf = int(mf)
        if not 1 <= mf <= d:
            raise ValueError(f"max_features must lie in [1, {d}], got {mf}")
        return mf

    def fit(self, X, y, feature_names=None):
        X, y = check_samples(X, y)
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        self.n_features_in_ = X.shape[1]
        self.feature_names_ = list(feature_names) if feature_names is not None else [
            f"x{j}" for j in range(X.shape[1])
        ]
        max_features = self._n_candidates(X.shape[1])
        seeds = np.random.SeedSequence(self.random_state).spawn(self.n_estimators)
        n = len(y_idx)
        self.trees_ = []
        for ss in seeds:
            rng = np.random.default_rng(ss)
            rows = rng.integers(0, n, size=n) if self.bootstrap else np.arange(n)
            self.trees_.append(grow_tree(
                X[rows], y_idx[rows], len(self.classes_), max_features, rng,
                self.min_samples_split, self.max_depth,
            ))
        return self

    def _votes(self, X):
        check_is_fitted(self, "trees_")
        X = check_features(X, self.n_features_in_)
        votes = np.zeros((len(X), len(self.classes_)))
        rows = np.arange(len(X))
        for tree in self.trees_:
            votes[rows, tree.predict(X)] += 1
        return votes

    def predict(self, X):
        return self.classes_[np.argmax(self._votes(X), axis=1)]

    def predict_proba(self, X):
        return self._votes(X) / len(self.trees_)

    def predict_sequence(self, window):
        """Per-step prediction over a window of shape (T, d); steps are independent."""
        return self.predict(np.asarray(window, dtype=float))

    @property
    def feature_importances_(self):
        """Mean decrease in Gini impurity, normalized to sum to 1."""
        check_is_fitted(self, "trees_")
        total = np.zeros(self.n_features_in_)
        for tree in self.trees_:
            s = tree.importance.sum()
            if s > 0:
                total += tree.importance / s
        s = total.sum()
        return total / s if s > 0 else total

    def ranked_features(self):
        """(name, score) pairs by descending importance; ties keep manifest order."""
        imp = self.feature_importances_
        order = sorted(range(len(imp)), key=lambda j: (-imp[j], j))
        return [(self.feature_names_[j], float(imp[j])) for j in order]

    def to_dict(self):
        check_is_fitted(self, "trees_")
        return {
            "schema": "seqids.forest/1",
            "params": self.get_params(),
            "classes": self.classes_.tolist(),
            "feature_names": self.feature_names_,
            "trees": [t.to_dict() for t in self.trees_],
        }

    @classmethod
    def from_dict(cls, d):
        est = cls(**d["params"])
        est.classes_ = np.asarray(d["classes"])
        est.feature_names_ = list(d["feature_names"])
        est.n_features_in_ = len(est.feature_names_)
        est.trees_ = [DecisionTree.from_dict(t) for t in d["trees"]]
        return est
