import itertools
import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from dglasso import DegenerateClass, ZeroReference, cnmse, edge_scores, evaluate, make_dataset, rmse
from dglasso.metrics import rank_auc
from dglasso.solver import FitResult, Mode


def brute_auc(labels, scores):
    pos = [s for l, s in zip(labels, scores) if l]
    neg = [s for l, s in zip(labels, scores) if not l]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p, n in itertools.product(pos, neg))
    return wins / (len(pos) * len(neg))


def test_rmse_examples():
    M = np.eye(2)
    assert rmse(M, M) == 0.0
    assert rmse(M, np.zeros((2, 2))) == 1.0
    assert rmse(M, np.array([[1.0, 0], [0, 0]])) == 0.5
    with pytest.raises(ZeroReference):
        rmse(np.zeros((2, 2)), M)


def test_cnmse_examples(rng):
    ref = rng.standard_normal((10, 3))
    assert cnmse(ref, ref) == 0.0
    assert cnmse(ref, np.zeros_like(ref)) == 1.0
    assert cnmse(ref, 2 * ref) == pytest.approx(1.0)
    with pytest.raises(ZeroReference):
        cnmse(np.zeros((2, 2)), ref[:2, :2])


def test_rotation_invariance(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    A, B = rng.standard_normal((4, 4)), rng.standard_normal((4, 4))
    assert rmse(Q @ A, Q @ B) == pytest.approx(rmse(A, B))
    assert cnmse(A @ Q, B @ Q) == pytest.approx(cnmse(A, B))


def test_perfect_support():
    M = np.diag([1.0, 2.0, 3.0])
    s = edge_scores(M, 5 * M)
    assert (s.precision, s.recall, s.f1, s.auc) == (1.0, 1.0, 1.0, 1.0)


@pytest.mark.parametrize("seed", range(3))
def test_dense_estimate_f1(seed):
    gt, _, _ = make_dataset("A", seed=seed, K=5)
    dense = np.random.default_rng(seed).uniform(0.1, 1.0, (9, 9))
    for M in (gt.A_star, gt.P_star):
        s = edge_scores(M, dense)
        d = np.mean(np.abs(M) > 1e-10)
        assert s.recall == 1.0 and s.precision == pytest.approx(d)
        assert s.f1 == pytest.approx(2 * d / (1 + d))
    assert edge_scores(gt.P_star, dense).f1 == 0.5


def test_auc_brute_force(rng):
    for _ in range(50):
        labels = rng.random(12) < 0.4
        if labels.all() or not labels.any():
            continue
        scores = rng.integers(0, 4, 12).astype(float)  # many ties
        assert rank_auc(labels, scores) == pytest.approx(brute_auc(labels, scores))


def test_auc_ranking_all_true_first():
    M_star = np.diag([1.0, 1.0, 1.0])
    M_hat = np.full((3, 3), 0.1) + np.diag([0.5, 0.6, 0.7])
    assert edge_scores(M_star, M_hat).auc == 1.0


def test_degenerate_class():
    s = edge_scores(np.ones((2, 2)), np.ones((2, 2)))
    assert math.isnan(s.auc) and not s.auc_defined
    with pytest.raises(DegenerateClass):
        edge_scores(np.ones((2, 2)), np.ones((2, 2)), strict=True)


def test_diagonal_exclusion():
    M = np.eye(3)
    M[0, 1] = M[1, 0] = 0.5
    s = edge_scores(M, np.ones((3, 3)), include_diagonal=False)
    assert s.precision == pytest.approx(2 / 6)


@settings(max_examples=40, deadline=None)
@given(arrays(float, (3, 3), elements=st.floats(-2, 2)), st.floats(0.1, 10))
def test_f1_auc_invariances(M_hat, c):
    M_star = np.array([[1.0, 0, 0], [0.3, 1, 0], [0, 0, 1]])
    base = edge_scores(M_star, M_hat)
    assume(np.array_equal(np.abs(c * M_hat) > 1e-10, np.abs(M_hat) > 1e-10))
    scaled = edge_scores(M_star, c * M_hat)
    assert scaled.f1 == pytest.approx(base.f1)
    mono = edge_scores(M_star, np.sqrt(np.abs(M_hat)))
    assert mono.auc == pytest.approx(base.auc)
    for v in (base.auc, base.f1, base.precision, base.recall, base.specificity, base.accuracy):
        assert 0.0 <= v <= 1.0


def _truth_fit(gt):
    return FitResult(gt.A_star, gt.P_star, gt.Q_star, np.empty(0), 0, True, 0.0)


def test_evaluate_oracle_fit():
    gt, _, test = make_dataset("A", seed=4, K=100)
    rep = evaluate(gt, _truth_fit(gt), gt.spec.observation_model(), test)
    assert rep.rmse_A == rep.rmse_P == rep.rmse_Q == 0.0
    assert rep.cnmse_filter == rep.cnmse_smooth == rep.cnmse_pred == 0.0
    assert rep.edges_A.f1 == rep.edges_P.f1 == 1.0
    flat = rep.flat()
    assert "edges_P_f1" in flat and "test_negloglik" in flat


def test_evaluate_zero_transition_predictions():
    gt, _, test = make_dataset("A", seed=4, K=100)
    res = FitResult(np.zeros((9, 9)), gt.P_star, gt.Q_star, np.empty(0), 0, True, 0.0,
                    Mode.P_ONLY)
    rep = evaluate(gt, res, gt.spec.observation_model(), test)
    assert rep.cnmse_pred == 1.0
