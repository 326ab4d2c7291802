"""Train/test protocol, offline and online evaluation, and report tables.

One *fold* is a seeded, per-attack-type 70/30 split together with the
preprocessing fitted on its training part. Every method is trained and
scored on the same folds so that seed-means are directly comparable.
"""

from __future__ import annotations

import csv
import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from .actions import AttackType
from .forest import RandomForest
from .hmm import (
    classify_attack_type,
    filter_current_state,
    fit_baum_welch_restarts,
    fit_label_mapping,
    fit_supervised,
    viterbi,
)
from .lstm import LSTMTagger
from .metrics import MetricSet, classify_by_similarity, compute_metrics
from .preprocess import AttributeReducer, Symbolizer

log = logging.getLogger(__name__)

METHODS = ("hmm-unsup", "hmm-sup", "lstm", "rfc")
METHOD_LABELS = {
    "hmm-unsup": "Unsupervised HMM",
    "hmm-sup": "Supervised HMM",
    "lstm": "LSTM",
    "rfc": "RFC",
}
DEFAULT_SEEDS = tuple(range(10))


@dataclass
class Settings:
    train_fraction: float = 0.7
    n_symbols: int = 6
    smoothing: float = 0.01
    mapping_pairs: int = 100
    bw_tol: float = 1e-6
    bw_max_iter: int = 100
    bw_restarts: int = 10
    forest_trees: int = 100
    lstm: dict = field(default_factory=dict)

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class WindowArrays:
    observations: np.ndarray  # (n, T, D)
    actions: np.ndarray  # (n, T)
    types: np.ndarray  # (n,)
    starts: np.ndarray  # (n,) 1-based start inside the window
    names: list

    @classmethod
    def from_dataset(cls, dataset):
        return cls(dataset.observations(), dataset.actions(), dataset.attack_types(),
                   dataset.t_start_local(), list(dataset.attribute_names))


def check_method(method):
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    return method


def stratified_split(types, seed, train_fraction=0.7):
    """Per-type uniform split into train and test index arrays."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 7001]))
    train, test = [], []
    for t in sorted(set(int(x) for x in types)):
        idx = np.flatnonzero(np.asarray(types) == t)
        idx = idx[rng.permutation(len(idx))]
        k = int(round(train_fraction * len(idx)))
        train.append(idx[:k])
        test.append(idx[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


class Fold:
    """One seeded split plus lazily fitted, train-only preprocessing."""

    def __init__(self, data, seed, settings=None):
        self.data = data
        self.seed = int(seed)
        self.settings = settings or Settings()
        self.train, self.test = stratified_split(data.types, seed, self.settings.train_fraction)
        self._reducer = None
        self._symbolizers = {}

    @property
    def reducer(self):
        if self._reducer is None:
            d = self.data
            self._reducer = AttributeReducer(
                attribute_names=d.names, n_estimators=self.settings.forest_trees,
                random_state=self.seed,
            ).fit(d.observations[self.train], d.actions[self.train])
        return self._reducer

    def selected(self, top_k):
        report = self.reducer.report_
        names = report.top(top_k)
        col = {n: j for j, n in enumerate(self.data.names)}
        return names, [col[n] for n in names]

    def features(self, top_k):
        _, cols = self.selected(top_k)
        X = self.data.observations[..., cols]
        return X[self.train], X[self.test]

    def symbolizer(self, top_k):
        if top_k not in self._symbolizers:
            names, _ = self.selected(top_k)
            Xtr, _ = self.features(top_k)
            self._symbolizers[top_k] = Symbolizer(
                n_symbols=self.settings.n_symbols, random_state=self.seed, attribute_names=names,
            ).fit(Xtr)
        return self._symbolizers[top_k]

    def symbols(self, top_k):
        sym = self.symbolizer(top_k)
        Xtr, Xte = self.features(top_k)
        return sym.transform(Xtr), sym.transform(Xte)


def _per_type(indices, types):
    return {t: [i for i in range(len(indices)) if types[indices[i]] == int(t)] for t in AttackType}


def train_hmm_models(fold, top_k, supervised):
    """One HMM per attack type, trained on that type's training windows."""
    d, s = fold.data, fold.settings
    Str, _ = fold.symbols(top_k)
    Atr = d.actions[fold.train]
    by_type = _per_type(fold.train, d.types)
    models, mappings = {}, {}
    for t in AttackType:
        rows = by_type[t]
        if supervised:
            models[t] = fit_supervised(zip(Atr[rows], Str[rows]), 7, s.n_symbols, s.smoothing)
            continue
        model, _ = fit_baum_welch_restarts(
            Str[rows], 7, s.n_symbols, seed=np.random.SeedSequence([fold.seed, 9100 + int(t)]),
            n_init=s.bw_restarts, tol=s.bw_tol, max_iter=s.bw_max_iter,
        )
        models[t] = model
        pairs = [(Atr[r], Str[r]) for r in rows[: s.mapping_pairs]]
        mappings[t] = fit_label_mapping(model, pairs)
    return models, mappings


def predict_hmm(models, mappings, symbol_seqs):
    preds, types = [], []
    for seq in symbol_seqs:
        t = classify_attack_type(models, seq)
        path = viterbi(models[t], seq)
        if mappings:
            path = mappings[t].apply(path)
        preds.append(path)
        types.append(t)
    return np.asarray(preds), np.asarray([int(t) for t in types])


def _lstm(fold):
    kw = {"random_state": fold.seed}
    kw.update(fold.settings.lstm)
    return LSTMTagger(**kw)


def run_method(fold, method, top_k):
    """Predicted action sequences and attack types for the fold's test windows."""
    check_method(method)
    d = fold.data
    if method in ("hmm-sup", "hmm-unsup"):
        models, mappings = train_hmm_models(fold, top_k, supervised=method == "hmm-sup")
        _, Ste = fold.symbols(top_k)
        return predict_hmm(models, mappings, Ste)
    Xtr, Xte = fold.features(top_k)
    Atr = d.actions[fold.train]
    if method == "lstm":
        pred = _lstm(fold).fit(Xtr, Atr).predict(Xte)
    else:
        forest = RandomForest(n_estimators=fold.settings.forest_trees, random_state=fold.seed)
        forest.fit(Xtr.reshape(-1, Xtr.shape[-1]), Atr.ravel())
        pred = forest.predict(Xte.reshape(-1, Xte.shape[-1])).reshape(Xte.shape[:2])
    types = np.asarray([int(classify_by_similarity(p)) for p in pred])
    return pred, types


def score_fold(fold, pred, pred_types):
    d = fold.data
    out = {}
    for t in AttackType:
        rows = [i for i, j in enumerate(fold.test) if d.types[j] == int(t)]
        if not rows:
            continue
        idx = fold.test[rows]
        out[t.name] = compute_metrics(d.actions[idx], pred[rows], d.types[idx],
                                      pred_types[rows], d.starts[idx])
    return out


@dataclass
class ExperimentReport:
    method: str
    top_k: int
    seeds: list
    per_seed: dict  # attack type name -> list of MetricSet, one per seed

    def mean(self, attack_type="Type1"):
        vals = np.array([m.values() for m in self.per_seed[attack_type]])
        return dict(zip(MetricSet.NAMES, vals.mean(axis=0).tolist()))

    def std(self, attack_type="Type1"):
        vals = np.array([m.values() for m in self.per_seed[attack_type]])
        return dict(zip(MetricSet.NAMES, vals.std(axis=0).tolist()))

    def to_dict(self):
        return {
            "method": self.method,
            "top_k": self.top_k,
            "seeds": list(self.seeds),
            "per_seed": {t: [m.to_dict() for m in ms] for t, ms in self.per_seed.items()},
            "mean": {t: self.mean(t) for t in self.per_seed},
            "std": {t: self.std(t) for t in self.per_seed},
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["method"], d["top_k"], list(d["seeds"]),
                   {t: [MetricSet.from_dict(m) for m in ms] for t, ms in d["per_seed"].items()})


@dataclass
class OnlineCurve:
    method: str
    top_k: int
    seeds: list
    per_seed: dict  # attack type name -> list (per seed) of accuracies at lengths 1..T

    def mean(self, attack_type="Type1"):
        return np.asarray(self.per_seed[attack_type]).mean(axis=0)

    def std(self, attack_type="Type1"):
        return np.asarray(self.per_seed[attack_type]).std(axis=0)

    def to_dict(self):
        return {"method": self.method, "top_k": self.top_k, "seeds": list(self.seeds),
                "per_seed": self.per_seed}

    @classmethod
    def from_dict(cls, d):
        return cls(d["method"], d["top_k"], list(d["seeds"]), d["per_seed"])


def _check_seeds(seeds):
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ValueError("need at least one seed")
    return seeds


def _check_dataset(data):
    counts = np.bincount(data.types, minlength=len(AttackType))
    if counts.min() < 10:
        raise ValueError("need at least 10 windows per attack type")


def evaluate(dataset, methods=METHODS, top_ks=(1, 4), seeds=DEFAULT_SEEDS, settings=None,
             online_methods=("hmm-sup", "rfc"), online_top_k=1):
    """Offline reports for every (method, top_k) and online curves, on shared folds."""
    data = dataset if isinstance(dataset, WindowArrays) else WindowArrays.from_dataset(dataset)
    _check_dataset(data)
    seeds = _check_seeds(seeds)
    methods = [check_method(m) for m in methods]
    online_methods = [check_method(m) for m in online_methods]
    for m in online_methods:
        if m not in ("hmm-sup", "rfc"):
            raise ValueError(f"online prediction is only defined for hmm-sup and rfc, not {m}")
    offline = {(m, k): {} for m in methods for k in top_ks}
    online = {m: {} for m in online_methods}
    for seed in seeds:
        fold = Fold(data, seed, settings)
        for k in top_ks:
            for m in methods:
                pred, types = run_method(fold, m, k)
                for t, ms in score_fold(fold, pred, types).items():
                    offline[(m, k)].setdefault(t, []).append(ms)
                log.info("seed %d top-%d %s: %s", seed, k, m,
                         offline[(m, k)]["Type1"][-1] if "Type1" in offline[(m, k)] else "-")
        for m in online_methods:
            for t, acc in online_accuracy(fold, m, online_top_k).items():
                online[m].setdefault(t, []).append(acc)
    reports = [ExperimentReport(m, k, seeds, offline[(m, k)]) for m in methods for k in top_ks]
    curves = [OnlineCurve(m, online_top_k, seeds, online[m]) for m in online_methods]
    return reports, curves


def run_offline_experiment(dataset, method, top_k, seeds=DEFAULT_SEEDS, settings=None):
    reports, _ = evaluate(dataset, [method], (top_k,), seeds, settings, online_methods=())
    return reports[0]


def online_accuracy(fold, method, top_k=1):
    """Accuracy of the current-action prediction after each prefix length."""
    d = fold.data
    A = d.actions[fold.test]
    T = A.shape[1]
    if method == "hmm-sup":
        models, _ = train_hmm_models(fold, top_k, supervised=True)
        _, Ste = fold.symbols(top_k)
        correct = np.zeros_like(A, dtype=bool)
        for i, seq in enumerate(Ste):
            for t in range(1, T + 1):
                prefix = seq[:t]
                model = models[classify_attack_type(models, prefix)]
                correct[i, t - 1] = filter_current_state(model, prefix) == A[i, t - 1]
    elif method == "rfc":
        pred, _ = run_method(fold, "rfc", top_k)
        correct = pred == A
    else:
        raise ValueError(f"online prediction is not defined for {method}")
    out = {}
    for t in AttackType:
        rows = d.types[fold.test] == int(t)
        if rows.any():
            out[t.name] = correct[rows].mean(axis=0).tolist()
    return out


def run_online_experiment(dataset, methods=("hmm-sup", "rfc"), seeds=DEFAULT_SEEDS, top_k=1,
                          settings=None):
    data = dataset if isinstance(dataset, WindowArrays) else WindowArrays.from_dataset(dataset)
    _check_dataset(data)
    _, curves = evaluate(data, [], (), seeds, settings, online_methods=methods,
                         online_top_k=top_k)
    return {c.method: c for c in curves}


def _fmt(v):
    return f"{v:.6f}"


def table_rows(reports, attack_type="Type1"):
    """Rows of a Table-III-shaped table: one per method, four metrics per attribute set."""
    top_ks = sorted({r.top_k for r in reports})
    header = ["method"] + [f"top{k}_{n}" for k in top_ks for n in MetricSet.NAMES]
    rows = []
    for m in METHODS:
        by_k = {r.top_k: r for r in reports if r.method == m}
        if not by_k:
            continue
        row = [METHOD_LABELS[m]]
        for k in top_ks:
            if k in by_k and attack_type in by_k[k].per_seed:
                mean = by_k[k].mean(attack_type)
                row += [_fmt(mean[n]) for n in MetricSet.NAMES]
            else:
                row += [""] * len(MetricSet.NAMES)
        rows.append(row)
    return header, rows


def emit_report(reports, out_dir, curves=()):
    """Write report.csv (Attack 1), report_attack2.csv, report.json and online_curve.csv."""
    if not reports and not curves:
        raise ValueError("nothing to report")
    for r in reports:
        if not r.seeds or not r.per_seed:
            raise ValueError(f"report for {r.method} has no seeds")
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    if reports:
        for t, name in (("Type1", "report.csv"), ("Type2", "report_attack2.csv")):
            header, rows = table_rows(reports, t)
            path = os.path.join(out_dir, name)
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(header)
                w.writerows(rows)
            paths.append(path)
    payload = {
        "schema": "seqids.report/1",
        "offline": [r.to_dict() for r in reports],
        "online": [c.to_dict() for c in curves],
    }
    path = os.path.join(out_dir, "report.json")
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")
    paths.append(path)
    if curves:
        path = os.path.join(out_dir, "online_curve.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["method", "attack_type", "length", "mean", "std"])
            for c in curves:
                for t in sorted(c.per_seed):
                    for i, (mu, sd) in enumerate(zip(c.mean(t), c.std(t)), 1):
                        w.writerow([c.method, t, i, _fmt(mu), _fmt(sd)])
        paths.append(path)
    return paths


def load_report(path):
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("schema") != "seqids.report/1":
        raise ValueError(f"{path}: not a report file")
    return ([ExperimentReport.from_dict(r) for r in payload["offline"]],
            [OnlineCurve.from_dict(c) for c in payload["online"]])
