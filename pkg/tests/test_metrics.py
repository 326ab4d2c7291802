import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqids.actions import AttackType
from seqids.metrics import classify_by_similarity, compute_metrics, predict_start_time, type_similarity


def naive_metrics(S, P, c, c_hat):
    l = len(S)
    start = seq = act = typ = 0
    for i in range(l):
        t_true = next((j + 1 for j, a in enumerate(S[i]) if a != 0), None)
        t_pred = next((j + 1 for j, a in enumerate(P[i]) if a != 0), None)
        start += t_pred is not None and t_pred == t_true
        typ += c[i] == c_hat[i]
        same = [S[i][j] == P[i][j] for j in range(len(S[i]))]
        act += sum(same)
        seq += all(same)
    return start / l, typ / l, act / (l * len(S[0])), seq / l


class TestStart:
    def test_examples(self):
        assert predict_start_time([0, 0, 1, 2]) == 3
        assert predict_start_time([5, 0]) == 1
        assert predict_start_time([0, 0, 0]) is None

    def test_all_continue_prediction_is_a_miss(self):
        m = compute_metrics([[0, 1, 2]], [[0, 0, 0]], [0], [0])
        assert m.acc_start == 0.0 and m.acc_type == 1.0


class TestSimilarity:
    def test_exact_script(self):
        seq = [0, 0] + [int(a) for a in AttackType.Type2.actions[:8]]
        assert type_similarity(seq, AttackType.Type2) == 1.0
        assert classify_by_similarity(seq) == AttackType.Type2

    def test_no_start(self):
        assert type_similarity([0] * 5, AttackType.Type1) == 0.0
        assert classify_by_similarity([0] * 5) == AttackType.Type1

    def test_common_prefix_ties_to_type1(self):
        assert classify_by_similarity([0, 0, 0, 1]) == AttackType.Type1


class TestComputeMetrics:
    def test_hand_example(self):
        S = [[0, 1, 2], [1, 4, 3]]
        P = [[0, 1, 3], [1, 4, 3]]
        m = compute_metrics(S, P, [0, 1], [0, 0])
        assert m.values() == [1.0, 0.5, 5 / 6, 0.5]
        assert m.l == 2

    def test_explicit_starts_override(self):
        m = compute_metrics([[0, 1]], [[1, 1]], [0], [0], true_starts=[1])
        assert m.acc_start == 1.0

    @pytest.mark.parametrize("args", [
        ([[0, 1]], [[0, 1, 2]], [0], [0]),
        ([[0, 1]], [[0, 1]], [0, 1], [0]),
        (np.zeros((0, 3)), np.zeros((0, 3)), [], []),
    ])
    def test_invalid(self, args):
        with pytest.raises(ValueError):
            compute_metrics(*args)

    def test_against_naive_on_random_sets(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            l, T = int(rng.integers(1, 20)), int(rng.integers(1, 12))
            S = rng.integers(0, 7, (l, T)) * (rng.random((l, T)) < 0.7)
            P = np.where(rng.random((l, T)) < 0.6, S, rng.integers(0, 7, (l, T)))
            c, c_hat = rng.integers(0, 2, l), rng.integers(0, 2, l)
            got = compute_metrics(S, P, c, c_hat).values()
            assert np.allclose(got, naive_metrics(S.tolist(), P.tolist(), c, c_hat), atol=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 8), st.integers(1, 10), st.integers(0, 2**31))
    def test_bounds_and_perfect_prediction(self, l, T, seed):
        rng = np.random.default_rng(seed)
        S = rng.integers(0, 7, (l, T))
        c = rng.integers(0, 2, l)
        perfect = compute_metrics(S, S, c, c)
        assert perfect.acc_action == perfect.acc_sequence == perfect.acc_type == 1.0
        other = compute_metrics(S, rng.integers(0, 7, (l, T)), c, 1 - c)
        assert all(0.0 <= v <= 1.0 for v in other.values())
        assert other.acc_sequence <= other.acc_action
