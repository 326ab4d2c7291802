"""Single-layer LSTM sequence tagger trained with BPTT and Adam (numpy only).

Maps a window of T numeric observation vectors to T action distributions.
The network is unidirectional, so the output at step t only sees inputs
up to step t.
"""

from __future__ import annotations

import logging

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .actions import N_ACTIONS
from .validation import check_windows

log = logging.getLogger(__name__)

PARAM_NAMES = ("Wx", "Wh", "b", "Wy", "by")


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def init_params(input_dim, hidden_size, n_out, rng):
    H = hidden_size
    lim_x = np.sqrt(6.0 / (input_dim + 4 * H))
    q, r = np.linalg.qr(rng.standard_normal((4 * H, H)))
    q = q * np.sign(np.diag(r))
    b = np.zeros(4 * H)
    b[H:2 * H] = 1.0  # forget gate starts open
    lim_y = np.sqrt(6.0 / (H + n_out))
    return {
        "Wx": rng.uniform(-lim_x, lim_x, size=(input_dim, 4 * H)),
        "Wh": q.T.copy(),
        "b": b,
        "Wy": rng.uniform(-lim_y, lim_y, size=(H, n_out)),
        "by": np.zeros(n_out),
    }


def forward(params, X, keep=False):
    """Output probabilities (B, T, N) for standardized inputs X (B, T, d)."""
    Wx, Wh, b, Wy, by = (params[k] for k in PARAM_NAMES)
    Bn, T, _ = X.shape
    H = Wh.shape[0]
    h = np.zeros((Bn, H))
    c = np.zeros((Bn, H))
    probs = np.empty((Bn, T, Wy.shape[1]))
    cache = []
    for t in range(T):
        z = X[:, t] @ Wx + h @ Wh + b
        i = _sigmoid(z[:, :H])
        f = _sigmoid(z[:, H:2 * H])
        o = _sigmoid(z[:, 2 * H:3 * H])
        g = np.tanh(z[:, 3 * H:])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        h_new = o * tc
        logits = h_new @ Wy + by
        logits -= logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        probs[:, t] = e / e.sum(axis=1, keepdims=True)
        if keep:
            cache.append((h, c, i, f, o, g, tc, h_new))
        h, c = h_new, c_new
    return probs, cache


def loss_and_grads(params, X, Y):
    """Mean per-step cross-entropy and its gradient with respect to every parameter."""
    Wx, Wh, b, Wy, by = (params[k] for k in PARAM_NAMES)
    Bn, T, _ = X.shape
    H = Wh.shape[0]
    probs, cache = forward(params, X, keep=True)
    rows = np.arange(Bn)
    picked = probs[rows[:, None], np.arange(T)[None], Y]
    loss = -np.log(np.maximum(picked, 1e-300)).mean()
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    dlogits = probs.copy()
    dlogits[rows[:, None], np.arange(T)[None], Y] -= 1.0
    dlogits /= Bn * T
    dh_next = np.zeros((Bn, H))
    dc_next = np.zeros((Bn, H))
    for t in range(T - 1, -1, -1):
        h_prev, c_prev, i, f, o, g, tc, h_t = cache[t]
        grads["Wy"] += h_t.T @ dlogits[:, t]
        grads["by"] += dlogits[:, t].sum(axis=0)
        dh = dlogits[:, t] @ Wy.T + dh_next
        do = dh * tc
        dc = dh * o * (1.0 - tc * tc) + dc_next
        di = dc * g
        dg = dc * i
        df = dc * c_prev
        dc_next = dc * f
        dz = np.concatenate(
            [di * i * (1 - i), df * f * (1 - f), do * o * (1 - o), dg * (1 - g * g)], axis=1
        )
        grads["Wx"] += X[:, t].T @ dz
        grads["Wh"] += h_prev.T @ dz
        grads["b"] += dz.sum(axis=0)
        dh_next = dz @ Wh.T
    return loss, grads


class LSTMTagger(BaseEstimator):
    """Same-length sequence-to-sequence tagger.

    A fitted model handles exactly one sequence length, the one it was
    trained on. Inputs are standardized per attribute with statistics from
    the training windows.
    """

    def __init__(self, hidden_size=32, n_actions=N_ACTIONS, learning_rate=5e-3, beta1=0.9,
                 beta2=0.999, epsilon=1e-8, epochs=200, batch_size=32, random_state=0):
        self.hidden_size = hidden_size
        self.n_actions = n_actions
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.epochs = epochs
        self.batch_size = batch_size
        self.random_state = random_state

    def _standardize(self, X):
        return (X - self.mean_) / self.scale_

    def fit(self, X, y):
        X = check_windows(X)
        y = np.asarray(y, dtype=int)
        if len(X) == 0:
            raise ValueError("empty training set")
        if y.shape != X.shape[:2]:
            raise ValueError(f"labels of shape {y.shape} do not match windows {X.shape[:2]}")
        if y.min() < 0 or y.max() >= self.n_actions:
            raise ValueError(f"labels must lie in [0, {self.n_actions})")
        if self.hidden_size < 1:
            raise ValueError("hidden_size must be >= 1")
        steps = X.reshape(-1, X.shape[-1])
        self.mean_ = steps.mean(axis=0)
        sd = steps.std(axis=0)
        self.scale_ = np.where(sd > 0, sd, 1.0)
        self.seq_len_ = X.shape[1]
        self.n_features_in_ = X.shape[2]
        Z = self._standardize(X)
        rng = np.random.default_rng(self.random_state)
        params = init_params(X.shape[2], self.hidden_size, self.n_actions, rng)
        m = {k: np.zeros_like(v) for k, v in params.items()}
        v = {k: np.zeros_like(v) for k, v in params.items()}
        step = 0
        self.loss_curve_ = [float(loss_and_grads(params, Z, y)[0])]
        for epoch in range(self.epochs):
            order = rng.permutation(len(Z))
            total = 0.0
            for start in range(0, len(Z), self.batch_size):
                idx = order[start:start + self.batch_size]
                loss, grads = loss_and_grads(params, Z[idx], y[idx])
                if not np.isfinite(loss):
                    raise FloatingPointError(f"LSTM loss became {loss} in epoch {epoch + 1}")
                total += loss * len(idx)
                step += 1
                lr = self.learning_rate * np.sqrt(1 - self.beta2 ** step) / (1 - self.beta1 ** step)
                for k in params:
                    m[k] = self.beta1 * m[k] + (1 - self.beta1) * grads[k]
                    v[k] = self.beta2 * v[k] + (1 - self.beta2) * grads[k] ** 2
                    params[k] = params[k] - lr * m[k] / (np.sqrt(v[k]) + self.epsilon)
            self.loss_curve_.append(total / len(Z))
            if epoch % 50 == 0:
                log.debug("lstm epoch %d loss %.4f", epoch + 1, self.loss_curve_[-1])
        self.params_ = params
        return self

    def predict_proba(self, X):
        """Per-step action distributions, shape (n, T, n_actions)."""
        check_is_fitted(self, "params_")
        X = check_windows(X, self.n_features_in_, self.seq_len_)
        return forward(self.params_, self._standardize(X))[0]

    def predict(self, X):
        # argmax resolves ties to the lowest action index (Continue)
        return np.argmax(self.predict_proba(X), axis=2)

    def to_dict(self):
        check_is_fitted(self, "params_")
        tensors = {k: {"shape": list(v.shape), "data": v.ravel().tolist()}
                   for k, v in self.params_.items()}
        tensors["mean"] = {"shape": list(self.mean_.shape), "data": self.mean_.tolist()}
        tensors["scale"] = {"shape": list(self.scale_.shape), "data": self.scale_.tolist()}
        return {"schema": "seqids.lstm/1", "params": self.get_params(),
                "seq_len": self.seq_len_, "tensors": tensors}

    @classmethod
    def from_dict(cls, d):
        est = cls(**d["params"])
        t = {k: np.asarray(v["data"], dtype=float).reshape(v["shape"]) for k, v in d["tensors"].items()}
        est.mean_ = t.pop("mean")
        est.scale_ = t.pop("scale")
        est.params_ = t
        est.seq_len_ = d["seq_len"]
        est.n_features_in_ = len(est.mean_)
        return est
