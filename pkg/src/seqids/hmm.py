"""Categorical hidden Markov models.

Scoring and decoding are pure functions of an :class:`HmmModel`:
scaled forward recursion for likelihoods and filtering, log-space Viterbi for
decoding. Training comes in two flavours, counting (supervised) and
Baum-Welch (unsupervised). An unsupervised model's state labels are tied to
attack actions afterwards with :func:`fit_label_mapping`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .actions import N_ACTIONS, AttackAction, AttackType
from .validation import check_symbols

PARAM_FLOOR = 1e-10


@dataclass(frozen=True)
class HmmModel:
    A: np.ndarray
    B: np.ndarray
    pi: np.ndarray
    state_labels: list = field(default=None)

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        pi = np.asarray(self.pi, dtype=float)
        n = len(pi)
        if A.shape != (n, n) or B.ndim != 2 or B.shape[0] != n:
            raise ValueError(f"inconsistent shapes A{A.shape} B{B.shape} pi{pi.shape}")
        for name, arr in (("A", A), ("B", B), ("pi", pi[None])):
            if (arr < 0).any() or (arr > 1).any():
                raise ValueError(f"{name} has entries outside [0, 1]")
            if not np.allclose(arr.sum(axis=1), 1.0, atol=1e-9, rtol=0):
                raise ValueError(f"rows of {name} must sum to 1")
        labels = self.state_labels
        if labels is None:
            labels = [f"q{i}" for i in range(n)]
        if len(labels) != n:
            raise ValueError("need one label per state")
        for arr in (A, B, pi):
            arr.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "state_labels", list(labels))

    @property
    def n_states(self):
        return len(self.pi)

    @property
    def n_symbols(self):
        return self.B.shape[1]

    def to_dict(self):
        # repr() of a float is its shortest exact round-trip decimal
        return {
            "schema": "seqids.hmm/1",
            "N": self.n_states,
            "M": self.n_symbols,
            "state_labels": self.state_labels,
            "A": [repr(float(v)) for v in self.A.ravel()],
            "B": [repr(float(v)) for v in self.B.ravel()],
            "pi": [repr(float(v)) for v in self.pi],
        }

    @classmethod
    def from_dict(cls, d):
        n, m = int(d["N"]), int(d["M"])
        A = np.array([float(v) for v in d["A"]]).reshape(n, n)
        B = np.array([float(v) for v in d["B"]]).reshape(n, m)
        pi = np.array([float(v) for v in d["pi"]])
        return cls(A, B, pi, d.get("state_labels"))


def _log(x):
    with np.errstate(divide="ignore"):
        return np.log(x)


def forward(model, seq):
    """Scaled forward pass: normalized alphas (T, N) and per-step scale factors."""
    seq = check_symbols(seq, model.n_symbols)
    T, N = len(seq), model.n_states
    alpha = np.zeros((T, N))
    scale = np.zeros(T)
    a = model.pi * model.B[:, seq[0]]
    for t in range(T):
        if t > 0:
            a = (alpha[t - 1] @ model.A) * model.B[:, seq[t]]
        c = a.sum()
        scale[t] = c
        if c == 0.0:
            break
        alpha[t] = a / c
    return alpha, scale


def forward_log_likelihood(model, seq):
    """log P(O | model)."""
    _, scale = forward(model, seq)
    if (scale == 0).any():
        return -np.inf
    return float(np.log(scale).sum())


def filter_distribution(model, prefix):
    """P(s_t | o_1..o_t) at the last step of ``prefix``."""
    if len(prefix) == 0:
        raise ValueError("filtering needs a non-empty prefix")
    alpha, scale = forward(model, prefix)
    if scale[-1] == 0.0:
        return np.full(model.n_states, np.nan)
    return alpha[-1]


def filter_current_state(model, prefix):
    dist = filter_distribution(model, prefix)
    if np.isnan(dist).any():
        return 0
    return int(np.argmax(dist))


def viterbi(model, seq):
    """Most probable state path; ties resolve to the lowest state index."""
    seq = check_symbols(seq, model.n_symbols)
    logA, logB = _log(model.A), _log(model.B)
    T, N = len(seq), model.n_states
    delta = _log(model.pi) + logB[:, seq[0]]
    back = np.zeros((T, N), dtype=int)
    for t in range(1, T):
        cand = delta[:, None] + logA  # cand[i, j]: from i to j
        back[t] = np.argmax(cand, axis=0)
        delta = cand[back[t], np.arange(N)] + logB[:, seq[t]]
    path = np.empty(T, dtype=int)
    path[-1] = int(np.argmax(delta))
    for t in range(T - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path


def path_log_probability(model, states, seq):
    """log P(S, O | model) for a given state path."""
    states = np.asarray(states)
    seq = np.asarray(seq)
    lp = _log(model.pi[states[0]]) + _log(model.B[states[0], seq[0]])
    for t in range(1, len(seq)):
        lp += _log(model.A[states[t - 1], states[t]]) + _log(model.B[states[t], seq[t]])
    return float(lp)


def fit_supervised(pairs, n_states, n_symbols, smoothing=0.01, state_labels=None):
    """Estimate (A, B, pi) by counting transitions, emissions and initial states.

    ``pairs`` is an iterable of (state sequence, symbol sequence). Each count
    receives ``smoothing`` pseudo-observations; with ``smoothing=0`` this is
    the plain relative-frequency estimate.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("empty training set")
    A = np.zeros((n_states, n_states))
    B = np.zeros((n_states, n_symbols))
    pi = np.zeros(n_states)
    for states, symbols in pairs:
        states = np.asarray(states, dtype=int)
        symbols = check_symbols(symbols, n_symbols)
        if len(states) != len(symbols):
            raise ValueError("state and symbol sequences differ in length")
        if states.min() < 0 or states.max() >= n_states:
            raise ValueError(f"state index out of range [0, {n_states})")
        pi[states[0]] += 1
        np.add.at(A, (states[:-1], states[1:]), 1)
        np.add.at(B, (states, symbols), 1)
    return HmmModel(
        _normalize_rows(A + smoothing),
        _normalize_rows(B + smoothing),
        _normalize_rows((pi + smoothing)[None])[0],
        state_labels,
    )


def _normalize_rows(counts):
    counts = np.asarray(counts, dtype=float)
    tot = counts.sum(axis=1, keepdims=True)
    n = counts.shape[1]
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(tot > 0, counts / tot, 1.0 / n)
    return out


def floored_rows(counts, floor=PARAM_FLOOR):
    """Row-normalize expected counts subject to every entry being >= ``floor``.

    Solves max sum_k c_k log p_k over the floored simplex, i.e.
    p_k = max(floor, c_k / lam) with lam fixing the row sum to 1. Being the
    exact constrained maximizer it keeps Baum-Welch monotone.
    """
    counts = np.atleast_2d(np.asarray(counts, dtype=float))
    out = np.empty_like(counts)
    n = counts.shape[1]
    for r, c in enumerate(counts):
        if c.sum() <= 0:
            out[r] = 1.0 / n
            continue
        fixed = np.zeros(n, dtype=bool)
        while True:
            free = c[~fixed].sum()
            mass = 1.0 - floor * fixed.sum()
            p = np.where(fixed, floor, c * mass / free if free > 0 else floor)
            newly = (p < floor) & ~fixed
            if not newly.any():
                break
            fixed |= newly
        out[r] = p / p.sum()
    return out


def random_model(n_states, n_symbols, rng, state_labels=None):
    A = rng.dirichlet(np.ones(n_states), size=n_states)
    B = rng.dirichlet(np.ones(n_symbols), size=n_states)
    pi = rng.dirichlet(np.ones(n_states))
    return HmmModel(A, B, pi, state_labels)


def _batch_estep(model, obs):
    """Forward-backward over a batch of equal-length sequences (L, T)."""
    L, T = obs.shape
    N = model.n_states
    A, B = model.A, model.B
    emis = B[:, obs].transpose(1, 2, 0)  # (L, T, N)
    alpha = np.empty((L, T, N))
    scale = np.empty((L, T))
    a = model.pi[None, :] * emis[:, 0]
    for t in range(T):
        if t > 0:
            a = (alpha[:, t - 1] @ A) * emis[:, t]
        c = a.sum(axis=1)
        scale[:, t] = c
        alpha[:, t] = a / c[:, None]
    beta = np.empty((L, T, N))
    beta[:, -1] = 1.0
    for t in range(T - 2, -1, -1):
        beta[:, t] = ((emis[:, t + 1] * beta[:, t + 1]) @ A.T) / scale[:, t + 1, None]
    gamma = alpha * beta
    xi_sum = np.zeros((N, N))
    for t in range(T - 1):
        w = (emis[:, t + 1] * beta[:, t + 1]) / scale[:, t + 1, None]
        xi_sum += alpha[:, t].T @ w
    xi_sum *= A
    emit = np.zeros((N, B.shape[1]))
    for k in range(B.shape[1]):
        emit[:, k] = gamma[obs == k].sum(axis=0)
    return np.log(scale).sum(), gamma[:, 0].sum(axis=0), xi_sum, emit


def fit_baum_welch(sequences, n_states, n_symbols, init=None, tol=1e-6, max_iter=100,
                   rng=None, state_labels=None):
    """Multi-sequence Baum-Welch.

    Returns the fitted model and the log-likelihood trace; ``trace[i]`` is the
    total log-likelihood of the parameters at iteration ``i`` and the returned
    model is the one scored last.
    """
    if n_states < 1 or n_symbols < 1:
        raise ValueError("need at least one state and one symbol")
    seqs = [check_symbols(s, n_symbols) for s in sequences]
    if not seqs:
        raise ValueError("no training sequences")
    groups = {}
    for s in seqs:
        groups.setdefault(len(s), []).append(s)
    batches = [np.stack(g) for _, g in sorted(groups.items())]
    if init is None:
        rng = np.random.default_rng(rng)
        init = random_model(n_states, n_symbols, rng, state_labels)
    model = init
    trace = []
    for it in range(max_iter + 1):
        ll, pi_c, A_c, B_c = 0.0, 0.0, 0.0, 0.0
        for obs in batches:
            res = _batch_estep(model, obs)
            ll += res[0]
            pi_c = pi_c + res[1]
            A_c = A_c + res[2]
            B_c = B_c + res[3]
        trace.append(float(ll))
        if it > 0 and trace[-1] - trace[-2] < tol:
            break
        if it == max_iter:
            break
        model = HmmModel(
            floored_rows(A_c), floored_rows(B_c), floored_rows(pi_c)[0], model.state_labels
        )
    return model, trace


def fit_baum_welch_restarts(sequences, n_states, n_symbols, seed=0, n_init=10, tol=1e-6,
                            max_iter=100, state_labels=None):
    """Run Baum-Welch from ``n_init`` random starts and keep the best final likelihood.

    Each start draws from its own child of ``SeedSequence(seed)``.
    """
    if n_init < 1:
        raise ValueError("n_init must be at least 1")
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    best = None
    for child in root.spawn(n_init):
        model, trace = fit_baum_welch(sequences, n_states, n_symbols, tol=tol, max_iter=max_iter,
                                      rng=np.random.default_rng(child), state_labels=state_labels)
        if best is None or trace[-1] > best[1][-1]:
            best = (model, trace)
    return best


@dataclass(frozen=True)
class LabelMapping:
    """Bijection from learned state index to attack action index."""

    state_to_action: tuple
    continue_state: int
    n_candidates: int = 0
    accuracy: float = float("nan")

    def __post_init__(self):
        if sorted(self.state_to_action) != list(range(len(self.state_to_action))):
            raise ValueError("label mapping must be a bijection")
        if self.state_to_action[self.continue_state] != int(AttackAction.Continue):
            raise ValueError("the pinned state must map to Continue")

    def apply(self, states):
        return np.asarray(self.state_to_action)[np.asarray(states)]

    def to_dict(self):
        return {
            "state_to_action": list(self.state_to_action),
            "continue_state": self.continue_state,
            "n_candidates": self.n_candidates,
            "accuracy": self.accuracy,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["state_to_action"]), d["continue_state"], d.get("n_candidates", 0),
                   d.get("accuracy", float("nan")))


def candidate_mappings(model):
    """All mappings with the argmax-pi state pinned to Continue, in lexicographic order."""
    if model.n_states != N_ACTIONS:
        raise ValueError(f"label mapping needs {N_ACTIONS} states, model has {model.n_states}")
    pinned = int(np.argmax(model.pi))
    rest = [s for s in range(model.n_states) if s != pinned]
    attacks = [int(a) for a in AttackAction if a != AttackAction.Continue]
    for perm in itertools.permutations(attacks):
        mapping = [0] * model.n_states
        mapping[pinned] = int(AttackAction.Continue)
        for s, a in zip(rest, perm):
            mapping[s] = a
        yield pinned, tuple(mapping)


def score_mappings(model, labeled_pairs):
    """Acc_action of every candidate mapping over ``labeled_pairs``."""
    pairs = list(labeled_pairs)
    if not pairs:
        raise ValueError("need labeled pairs to fit a label mapping")
    paths = np.concatenate([viterbi(model, sym) for _, sym in pairs])
    truth = np.concatenate([np.asarray(act, dtype=int) for act, _ in pairs])
    out = []
    for pinned, mapping in candidate_mappings(model):
        acc = float(np.mean(np.asarray(mapping)[paths] == truth))
        out.append((pinned, mapping, acc))
    return out


def fit_label_mapping(model, labeled_pairs):
    scored = score_mappings(model, labeled_pairs)
    best = None
    for pinned, mapping, acc in scored:
        if best is None or acc > best[2]:
            best = (pinned, mapping, acc)
    return LabelMapping(best[1], best[0], len(scored), best[2])


def classify_attack_type(models, seq):
    """Attack type whose model gives ``seq`` the highest likelihood; ties -> Type1."""
    best, best_ll = None, -np.inf
    for attack_type in AttackType:
        ll = forward_log_likelihood(models[attack_type], seq)
        if best is None or ll > best_ll:
            best, best_ll = attack_type, ll
    return best


class SupervisedHMM(BaseEstimator):
    """Count-based HMM estimator over symbol sequences with known state paths."""

    def __init__(self, n_states=N_ACTIONS, n_symbols=6, smoothing=0.01):
        self.n_states = n_states
        self.n_symbols = n_symbols
        self.smoothing = smoothing

    def fit(self, X, y):
        if len(X) != len(y):
            raise ValueError("need one state sequence per symbol sequence")
        self.model_ = fit_supervised(zip(y, X), self.n_states, self.n_symbols, self.smoothing,
                                     [a.name for a in AttackAction][: self.n_states]
                                     if self.n_states == N_ACTIONS else None)
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        return np.stack([viterbi(self.model_, s) for s in X])

    def predict_online(self, prefix):
        check_is_fitted(self, "model_")
        return filter_current_state(self.model_, prefix)

    def score_samples(self, X):
        check_is_fitted(self, "model_")
        return np.array([forward_log_likelihood(self.model_, s) for s in X])


class BaumWelchHMM(BaseEstimator):
    """Unsupervised HMM; ``fit_mapping`` ties learned states to attack actions."""

    def __init__(self, n_states=N_ACTIONS, n_symbols=6, tol=1e-6, max_iter=100, n_init=10,
                 random_state=0):
        self.n_states = n_states
        self.n_symbols = n_symbols
        self.tol = tol
        self.max_iter = max_iter
        self.n_init = n_init
        self.random_state = random_state

    def fit(self, X, y=None):
        self.model_, self.loglik_trace_ = fit_baum_welch_restarts(
            X, self.n_states, self.n_symbols, seed=self.random_state, n_init=self.n_init,
            tol=self.tol, max_iter=self.max_iter,
        )
        return self

    def fit_mapping(self, X, y):
        check_is_fitted(self, "model_")
        self.mapping_ = fit_label_mapping(self.model_, list(zip(y, X)))
        return self

    def predict(self, X):
        check_is_fitted(self, ["model_", "mapping_"])
        return np.stack([self.mapping_.apply(viterbi(self.model_, s)) for s in X])

    def score_samples(self, X):
        check_is_fitted(self, "model_")
        return np.array([forward_log_likelihood(self.model_, s) for s in X])
