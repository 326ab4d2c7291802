"""Observation-space reduction.

Three stages, each fitted on training data only:

1. drop attributes that never change, then one of every highly correlated pair;
2. rank the survivors with a forest that separates attack from rest steps;
3. (HMM only) cluster the top-ranked attributes with a diagonal Gaussian
   mixture and use the component index as the observation symbol.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .actions import AttackAction
from .forest import RandomForest

CONSTANT_TOL = 1e-12


def _steps(X):
    """Flatten (n, T, D) windows to (n*T, D) rows."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 3:
        X = X.reshape(-1, X.shape[-1])
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("dataset is empty")
    return X


def attack_labels(actions):
    """Per-step binary label: 1 while an attack action is ongoing."""
    return (np.asarray(actions).reshape(-1) != int(AttackAction.Continue)).astype(int)


@dataclass
class AttributeReport:
    attributes: list
    kept_attributes: list = field(default_factory=list)
    dropped_constant: list = field(default_factory=list)
    dropped_correlated: list = field(default_factory=list)  # (dropped, kept partner, r)
    ranking: list = field(default_factory=list)  # (attribute, importance)

    def top(self, k):
        if not self.ranking:
            raise ValueError("attributes have not been ranked")
        return [name for name, _ in self.ranking[:k]]

    def to_dict(self):
        return {
            "schema": "seqids.attribute-report/1",
            "attributes": list(self.attributes),
            "kept_attributes": list(self.kept_attributes),
            "dropped_constant": list(self.dropped_constant),
            "dropped_correlated": [[d, k, float(r)] for d, k, r in self.dropped_correlated],
            "ranking": [[n, float(s)] for n, s in self.ranking],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            list(d["attributes"]),
            list(d["kept_attributes"]),
            list(d["dropped_constant"]),
            [tuple(x) for x in d["dropped_correlated"]],
            [tuple(x) for x in d["ranking"]],
        )


def drop_constants(X, names):
    """Names of the attributes whose sample variance stays below ``CONSTANT_TOL``."""
    X = _steps(X)
    var = X.var(axis=0, ddof=1) if len(X) > 1 else np.zeros(X.shape[1])
    kept = [n for n, v in zip(names, var) if v >= CONSTANT_TOL]
    dropped = [n for n, v in zip(names, var) if v < CONSTANT_TOL]
    return kept, dropped


def drop_correlated(X, names, threshold=0.9):
    """Greedy pruning in manifest order; the later attribute of a pair goes.

    Returns the kept names and (dropped, kept partner, r) triples.
    """
    X = _steps(X)
    if X.shape[1] == 0:
        return [], []
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.corrcoef(X, rowvar=False)
    r = np.atleast_2d(r)
    kept, dropped = [], []
    for j in range(X.shape[1]):
        partner = None
        for i in kept:
            if np.isfinite(r[i, j]) and abs(r[i, j]) > threshold:
                partner = i
                break
        if partner is None:
            kept.append(j)
        else:
            dropped.append((names[j], names[partner], float(r[partner, j])))
    return [names[j] for j in kept], dropped


def rank_attributes(X, y, names, n_estimators=100, random_state=0):
    """Attributes sorted by forest importance for the attack/no-attack label."""
    forest = RandomForest(n_estimators=n_estimators, random_state=random_state)
    forest.fit(_steps(X), np.asarray(y).reshape(-1), feature_names=names)
    return forest.ranked_features()


class AttributeReducer(TransformerMixin, BaseEstimator):
    """Constant removal, correlation pruning and forest ranking in one transformer.

    ``fit`` takes windows (n, T, D) or steps (n, D) with per-step action labels;
    ``transform`` keeps the ``top_k`` ranked attributes (all kept ones if None).
    """

    def __init__(self, attribute_names=None, corr_threshold=0.9, top_k=None,
                 n_estimators=100, random_state=0):
        self.attribute_names = attribute_names
        self.corr_threshold = corr_threshold
        self.top_k = top_k
        self.n_estimators = n_estimators
        self.random_state = random_state

    def fit(self, X, y):
        steps = _steps(X)
        names = list(self.attribute_names) if self.attribute_names is not None else [
            f"x{j}" for j in range(steps.shape[1])
        ]
        if len(names) != steps.shape[1]:
            raise ValueError("attribute_names does not match the number of columns")
        col = {n: j for j, n in enumerate(names)}
        nonconst, dropped_const = drop_constants(steps, names)
        kept, dropped_corr = drop_correlated(steps[:, [col[n] for n in nonconst]], nonconst,
                                             self.corr_threshold)
        labels = attack_labels(y)
        if len(labels) != len(steps):
            raise ValueError("need one action label per step")
        ranking = rank_attributes(steps[:, [col[n] for n in kept]], labels, kept,
                                  self.n_estimators, self.random_state) if kept else []
        self.report_ = AttributeReport(names, kept, dropped_const, dropped_corr, ranking)
        k = len(ranking) if self.top_k is None else self.top_k
        self.selected_ = self.report_.top(k)
        self.selected_index_ = [col[n] for n in self.selected_]
        self.n_features_in_ = len(names)
        return self

    def transform(self, X):
        check_is_fitted(self, "selected_")
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} attributes, got {X.shape[-1]}")
        return X[..., self.selected_index_]


def _kmeanspp(X, k, rng):
    centers = [X[rng.integers(len(X))]]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            raise ValueError("not enough distinct points to seed the mixture")
        centers.append(X[rng.choice(len(X), p=d2 / total)])
        d2 = np.minimum(d2, ((X - centers[-1]) ** 2).sum(axis=1))
    return np.array(centers)


def _log_joint(X, weights, means, variances):
    """log w_k + log N(x | mu_k, diag var_k), shape (n, k)."""
    with np.errstate(divide="ignore"):
        logw = np.log(weights)
    diff = X[:, None, :] - means[None]
    ll = -0.5 * (np.log(2 * np.pi * variances)[None] + diff ** 2 / variances[None]).sum(axis=2)
    return ll + logw[None]


def fit_gmm(X, n_components, rng, tol=1e-6, max_iter=200, var_floor=1e-6):
    """Diagonal-covariance EM with k-means++ seeding.

    Returns (weights, means, variances, per-sample log-likelihood trace).
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    centers = _kmeanspp(X, n_components, rng)
    assign = np.argmin(((X[:, None, :] - centers[None]) ** 2).sum(axis=2), axis=1)
    weights = np.bincount(assign, minlength=n_components) / n
    means = centers.copy()
    variances = np.empty((n_components, d))
    for k in range(n_components):
        pts = X[assign == k]
        variances[k] = np.maximum(pts.var(axis=0) if len(pts) > 1 else 1.0, var_floor)
    trace = []
    for it in range(max_iter + 1):
        lj = _log_joint(X, weights, means, variances)
        lse = logsumexp(lj, axis=1)
        trace.append(float(lse.mean()))
        if it > 0 and trace[-1] - trace[-2] < tol:
            break
        if it == max_iter:
            break
        resp = np.exp(lj - lse[:, None])
        nk = resp.sum(axis=0)
        alive = nk > 0
        weights = nk / n
        safe = np.where(alive, nk, 1.0)[:, None]
        new_means = (resp.T @ X) / safe
        means = np.where(alive[:, None], new_means, means)
        sq = (X[:, None, :] - means[None]) ** 2
        new_var = np.einsum("nk,nkd->kd", resp, sq) / safe
        variances = np.where(alive[:, None], np.maximum(new_var, var_floor), variances)
    return weights, means, variances, trace


class Symbolizer(TransformerMixin, BaseEstimator):
    """Map reduced observation vectors to one of ``n_symbols`` mixture components.

    Symbols are numbered by the ascending first coordinate of the component
    means, so that indices do not depend on the EM run's internal order.
    """

    def __init__(self, n_symbols=6, tol=1e-6, max_iter=200, var_floor=1e-6, n_init=10,
                 random_state=0, attribute_names=None):
        self.n_symbols = n_symbols
        self.n_init = n_init
        self.tol = tol
        self.max_iter = max_iter
        self.var_floor = var_floor
        self.random_state = random_state
        self.attribute_names = attribute_names

    def fit(self, X, y=None):
        X = _steps(X)
        if self.n_symbols < 2:
            raise ValueError("need at least two symbols")
        if self.n_init < 1:
            raise ValueError("n_init must be at least 1")
        n_distinct = len(np.unique(X, axis=0))
        if self.n_symbols > n_distinct:
            raise ValueError(
                f"cannot fit {self.n_symbols} symbols to {n_distinct} distinct observations"
            )
        self.mean_ = X.mean(axis=0)
        scale = X.std(axis=0)
        self.scale_ = np.where(scale > 0, scale, 1.0)
        Z = (X - self.mean_) / self.scale_
        # several seeded starts, keep the best final log-likelihood
        best = None
        for child in np.random.SeedSequence(self.random_state).spawn(self.n_init):
            fit = fit_gmm(Z, self.n_symbols, np.random.default_rng(child), self.tol,
                          self.max_iter, self.var_floor)
            if best is None or fit[3][-1] > best[3][-1]:
                best = fit
        w, mu, var, trace = best
        order = np.argsort(mu[:, 0], kind="stable")
        self.weights_, self.means_, self.variances_ = w[order], mu[order], var[order]
        self.loglik_trace_ = trace
        self.n_samples_ = len(X)
        self.n_features_in_ = X.shape[1]
        if self.attribute_names is not None and len(self.attribute_names) != X.shape[1]:
            raise ValueError("attribute_names does not match the number of columns")
        return self

    def transform(self, X):
        """Symbol index for every row of ``X`` (any leading shape)."""
        check_is_fitted(self, "means_")
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} attributes, got {X.shape[-1]}")
        lead = X.shape[:-1]
        Z = (X.reshape(-1, X.shape[-1]) - self.mean_) / self.scale_
        sym = np.argmax(_log_joint(Z, self.weights_, self.means_, self.variances_), axis=1)
        return sym.reshape(lead)

    def symbolize(self, observation):
        """Symbol for a single observation given as a name -> value mapping."""
        check_is_fitted(self, "means_")
        if self.attribute_names is None:
            raise ValueError("symbolizer was fitted without attribute names")
        missing = [n for n in self.attribute_names if n not in observation]
        if missing:
            raise ValueError(f"observation is missing attribute(s) {missing}")
        x = np.array([float(observation[n]) for n in self.attribute_names])
        return int(self.transform(x[None])[0])

    def component_point(self, k):
        """The un-standardized mean of symbol ``k``."""
        return self.means_[k] * self.scale_ + self.mean_

    def to_dict(self):
        check_is_fitted(self, "means_")
        return {
            "schema": "seqids.symbolizer/1",
            "params": {k: v for k, v in self.get_params().items()},
            "mean": self.mean_.tolist(),
            "scale": self.scale_.tolist(),
            "weights": self.weights_.tolist(),
            "means": self.means_.tolist(),
            "variances": self.variances_.tolist(),
            "loglik_trace": self.loglik_trace_,
            "n_samples": self.n_samples_,
        }

    @classmethod
    def from_dict(cls, d):
        est = cls(**d["params"])
        est.mean_ = np.asarray(d["mean"])
        est.scale_ = np.asarray(d["scale"])
        est.weights_ = np.asarray(d["weights"])
        est.means_ = np.asarray(d["means"])
        est.variances_ = np.asarray(d["variances"])
        est.loglik_trace_ = list(d["loglik_trace"])
        est.n_samples_ = d["n_samples"]
        est.n_features_in_ = est.means_.shape[1]
        return est
