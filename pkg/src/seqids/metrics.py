"""The four accuracy metrics and the helpers that derive their inputs."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .actions import AttackAction, AttackType

CONTINUE = int(AttackAction.Continue)


def predict_start_time(actions):
    """1-based index of the first non-Continue action, or None when there is none."""
    nz = np.flatnonzero(np.asarray(actions) != CONTINUE)
    return int(nz[0]) + 1 if len(nz) else None


def type_similarity(actions, attack_type):
    """Fraction of post-start steps that match the attack script position by position."""
    actions = np.asarray(actions)
    start = predict_start_time(actions)
    if start is None:
        return 0.0
    tail = actions[start - 1:]
    script = np.asarray([int(a) for a in AttackType(attack_type).actions])[: len(tail)]
    return float(np.mean(tail[: len(script)] == script))


def classify_by_similarity(actions):
    """Attack type whose script best matches a predicted sequence; ties -> Type1."""
    best, best_sim = AttackType.Type1, -1.0
    for t in AttackType:
        sim = type_similarity(actions, t)
        if sim > best_sim:
            best, best_sim = t, sim
    return best


@dataclass(frozen=True)
class MetricSet:
    acc_start: float
    acc_type: float
    acc_action: float
    acc_sequence: float
    l: int

    NAMES = ("acc_start", "acc_type", "acc_action", "acc_sequence")

    def values(self):
        return [getattr(self, n) for n in self.NAMES]

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def compute_metrics(true_actions, pred_actions, true_types, pred_types, true_starts=None):
    """Indicator averages over ``l`` test sequences.

    ``true_starts`` defaults to the first non-Continue step of each true sequence.
    """
    S = np.asarray(true_actions)
    P = np.asarray(pred_actions)
    c = np.asarray([int(t) for t in true_types])
    c_hat = np.asarray([int(t) for t in pred_types])
    if S.shape != P.shape or S.ndim != 2:
        raise ValueError(f"prediction shape {P.shape} does not match truth {S.shape}")
    l = len(S)
    if len(c) != l or len(c_hat) != l:
        raise ValueError("type lists must have one entry per sequence")
    if true_starts is not None and len(true_starts) != l:
        raise ValueError("start list must have one entry per sequence")
    if l == 0:
        raise ValueError("no test sequences")
    starts = list(true_starts) if true_starts is not None else [predict_start_time(s) for s in S]
    hits = [predict_start_time(p) is not None and predict_start_time(p) == t
            for p, t in zip(P, starts)]
    step_ok = S == P
    return MetricSet(
        acc_start=float(np.mean(hits)),
        acc_type=float(np.mean(c == c_hat)),
        acc_action=float(step_ok.mean()),
        acc_sequence=float(step_ok.all(axis=1).mean()),
        l=int(l),
    )
