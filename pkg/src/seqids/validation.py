"""Input checks shared by the estimators."""

import numpy as np


def check_samples(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D sample matrix, got shape {X.shape}")
    if len(X) == 0:
        raise ValueError("empty training set")
    if y.shape != (len(X),):
        raise ValueError(f"labels of shape {y.shape} do not match {len(X)} samples")
    if not np.isfinite(X).all():
        raise ValueError("samples contain NaN or infinite values")
    return X, y


def check_features(X, n_features):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != n_features:
        raise ValueError(f"expected {n_features} attributes per sample, got shape {X.shape}")
    return X


def check_windows(X, n_features=None, length=None):
    """Validate a stack of windows of shape (n, T, d)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3:
        raise ValueError(f"expected windows of shape (n, T, d), got {X.shape}")
    if n_features is not None and X.shape[2] != n_features:
        raise ValueError(f"expected {n_features} attributes per step, got {X.shape[2]}")
    if length is not None and X.shape[1] != length:
        raise ValueError(f"expected sequences of length {length}, got {X.shape[1]}")
    return X


def check_symbols(seq, n_symbols):
    seq = np.asarray(seq)
    if seq.ndim != 1 or len(seq) == 0:
        raise ValueError("symbol sequence must be a non-empty 1-D sequence")
    if not np.issubdtype(seq.dtype, np.integer):
        if not np.all(seq == np.round(seq)):
            raise ValueError("symbols must be integers")
        seq = seq.astype(int)
    if seq.min() < 0 or seq.max() >= n_symbols:
        raise ValueError(f"symbol index out of range [0, {n_symbols})")
    return seq
