"""Evaluation of fitted models against ground truth.

``rmse`` is the squared Frobenius error ratio (no square root). Edge
detection compares supports at a fixed threshold for precision/recall/F1
and ranks ``|M_hat|`` for the AUC. State-inference quality is measured by
running the filter and smoother on held-out data under both parameter sets
and comparing the mean sequences with ``cnmse``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import DegenerateClass, DimensionMismatch, ZeroReference
from .lgssm import ModelParams, ObservationModel, TimeSeries, kalman_filter, rts_smoother

EDGE_THRESHOLD = 1e-10


def rmse(M_star, M_hat) -> float:
    """``||M* - M_hat||_F^2 / ||M*||_F^2``."""
    M_star = np.asarray(M_star, dtype=float)
    M_hat = np.asarray(M_hat, dtype=float)
    if M_star.shape != M_hat.shape:
        raise DimensionMismatch(f"shapes differ: {M_star.shape} vs {M_hat.shape}")
    den = float(np.sum(M_star * M_star))
    if den == 0.0:
        raise ZeroReference("reference matrix is zero")
    D = M_star - M_hat
    return float(np.sum(D * D)) / den


@dataclass(frozen=True)
class EdgeScores:
    auc: float
    f1: float
    precision: float
    recall: float
    specificity: float
    accuracy: float
    threshold: float = EDGE_THRESHOLD
    auc_defined: bool = True


def _ratio(a, b):
    return a / b if b else 0.0


def rank_auc(labels, scores) -> float:
    """Mann-Whitney AUC with average ranks for ties.

    Raises
    ------
    DegenerateClass
        If ``labels`` are all positive or all negative.
    """
    labels = np.asarray(labels, dtype=bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateClass("AUC needs both positive and negative entries")
    ranks = rankdata(np.asarray(scores, dtype=float), method="average")
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def edge_scores(M_star, M_hat, threshold: float = EDGE_THRESHOLD,
                include_diagonal: bool = True, strict: bool = False) -> EdgeScores:
    """Support-recovery scores of ``M_hat`` against ``M_star``.

    With a degenerate ground truth the AUC is undefined: ``strict`` raises
    ``DegenerateClass``, otherwise ``auc`` is NaN and ``auc_defined`` False.
    """
    M_star = np.asarray(M_star, dtype=float)
    M_hat = np.asarray(M_hat, dtype=float)
    if M_star.shape != M_hat.shape:
        raise DimensionMismatch(f"shapes differ: {M_star.shape} vs {M_hat.shape}")
    keep = np.ones(M_star.shape, dtype=bool)
    if not include_diagonal:
        keep &= ~np.eye(*M_star.shape, dtype=bool)
    truth = np.abs(M_star[keep]) > threshold
    score = np.abs(M_hat[keep])
    pred = score > threshold
    tp = int(np.sum(truth & pred))
    fp = int(np.sum(~truth & pred))
    fn = int(np.sum(truth & ~pred))
    tn = int(np.sum(~truth & ~pred))
    prec = _ratio(tp, tp + fp)
    rec = _ratio(tp, tp + fn)
    f1 = _ratio(2 * prec * rec, prec + rec)
    try:
        auc, defined = rank_auc(truth, score), True
    except DegenerateClass:
        if strict:
            raise
        auc, defined = math.nan, False
    return EdgeScores(auc, f1, prec, rec, _ratio(tn, tn + fp), _ratio(tp + tn, truth.size),
                      threshold, defined)


def cnmse(ref_seq, est_seq) -> float:
    """``sum_k ||ref_k - est_k||^2 / sum_k ||ref_k||^2``."""
    ref = np.asarray(ref_seq, dtype=float)
    est = np.asarray(est_seq, dtype=float)
    if ref.shape != est.shape:
        raise DimensionMismatch(f"shapes differ: {ref.shape} vs {est.shape}")
    den = float(np.sum(ref * ref))
    if den == 0.0:
        raise ZeroReference("reference sequence is zero")
    D = ref - est
    return float(np.sum(D * D)) / den


@dataclass(frozen=True)
class MetricsReport:
    rmse_A: float
    rmse_P: float
    rmse_Q: float
    edges_A: EdgeScores
    edges_P: EdgeScores
    cnmse_filter: float
    cnmse_smooth: float
    cnmse_pred: float
    test_negloglik: float

    def flat(self) -> dict:
        """One-level dict (edge scores prefixed), for tables."""
        out = {}
        for k, v in asdict(self).items():
            if isinstance(v, dict):
                out.update({f"{k}_{kk}": vv for kk, vv in v.items()})
            else:
                out[k] = v
        return out


def _means(params: ModelParams, series: TimeSeries):
    filt = kalman_filter(params, series)
    sm = rts_smoother(params, filt)
    return filt.filtered_means[1:], sm.smoothed_means[1:], filt.innovation_means, filt.neg_loglik


def evaluate(gt, fit, obs: ObservationModel, test: TimeSeries,
             include_diagonal_A: bool = True, include_diagonal_P: bool = True) -> MetricsReport:
    """Compare ``fit`` (a ``FitResult``) with ``gt`` (a ``GroundTruth``) on ``test``."""
    mf_t, ms_t, nu_t, _ = _means(ModelParams(gt.A_star, gt.P_star, obs), test)
    mf_h, ms_h, nu_h, nll = _means(ModelParams(fit.A_hat, fit.P_hat, obs), test)
    return MetricsReport(
        rmse_A=rmse(gt.A_star, fit.A_hat),
        rmse_P=rmse(gt.P_star, fit.P_hat),
        rmse_Q=rmse(gt.Q_star, fit.Q_hat),
        edges_A=edge_scores(gt.A_star, fit.A_hat, include_diagonal=include_diagonal_A),
        edges_P=edge_scores(gt.P_star, fit.P_hat, include_diagonal=include_diagonal_P),
        cnmse_filter=cnmse(mf_t, mf_h),
        cnmse_smooth=cnmse(ms_t, ms_h),
        cnmse_pred=cnmse(nu_t, nu_h),
        test_negloglik=float(nll),
    )
