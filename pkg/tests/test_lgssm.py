import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dglasso import (
    ModelParams,
    NonSPD,
    DimensionMismatch,
    ObservationModel,
    TimeSeries,
    available_backends,
    kalman_filter,
    marginal_negloglik,
    rts_smoother,
    smoothing_stats,
)
from dglasso.lgssm import clip_spectral, stats_from_smoother

from conftest import BatchOracle, random_model, rel_err

BACKENDS = available_backends()


def scalar_params(A=1.0, P=1.0, H=1.0, R=1.0, mu0=0.0, S0=1.0):
    obs = ObservationModel([[H]], [[R]], [mu0], [[S0]])
    return ModelParams([[A]], [[P]], obs)


@pytest.mark.parametrize("backend", BACKENDS)
def test_scalar_filter_example(backend):
    f = kalman_filter(scalar_params(), TimeSeries([[0.0]]), backend)
    assert f.predicted(1).cov[0, 0] == pytest.approx(2.0)
    assert f.innovation_covs[0, 0, 0] == pytest.approx(3.0)
    assert f.gains[0, 0, 0] == pytest.approx(2 / 3)
    assert f.filtered(1).mean[0] == pytest.approx(0.0)
    assert f.filtered(1).cov[0, 0] == pytest.approx(2 / 3)


@pytest.mark.parametrize("backend", BACKENDS)
def test_scalar_negloglik(backend):
    # 0.5 log(6 pi) evaluates to 1.4682446775...
    nll = marginal_negloglik(scalar_params(), TimeSeries([[0.0]]), backend)
    assert nll == pytest.approx(0.5 * math.log(6 * math.pi), rel=1e-14)
    assert nll == pytest.approx(1.4682446775, abs=1e-10)


@pytest.mark.parametrize("backend", BACKENDS)
def test_zero_transition_predicts_noise_prior(backend, rng):
    params, series = random_model(rng, 3, 2, 6)
    params = ModelParams(np.zeros((3, 3)), params.P, params.obs)
    f = kalman_filter(params, series, backend)
    assert np.allclose(f.predicted_means, 0.0)
    for k in range(1, 7):
        assert np.allclose(f.predicted(k).cov, params.Q, atol=1e-12)


@pytest.mark.parametrize("backend", BACKENDS)
def test_last_smoothed_equals_last_filtered(backend, rng):
    params, series = random_model(rng, 2, 2, 5)
    f = kalman_filter(params, series, backend)
    s = rts_smoother(params, f, backend)
    assert np.array_equal(s.smoothed_means[-1], f.filtered_means[-1])
    assert np.array_equal(s.smoothed_covs[-1], f.filtered_covs[-1])
    sc = rts_smoother(scalar_params(), kalman_filter(scalar_params(), TimeSeries([[0.0]])))
    assert sc.smoothed(1).cov[0, 0] == pytest.approx(2 / 3)


def test_rigid_state_limit():
    obs = ObservationModel(np.eye(2), 0.5 * np.eye(2), np.zeros(2), np.eye(2))
    params = ModelParams(np.eye(2), 1e8 * np.eye(2), obs)
    Y = np.tile([1.0, -2.0], (8, 1))
    f = kalman_filter(params, TimeSeries(Y))
    s = rts_smoother(params, f)
    for k in range(9):
        assert np.allclose(s.smoothed_means[k], f.filtered_means[-1], atol=1e-6)


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("seed", range(5))
def test_batch_oracle(backend, seed):
    rng = np.random.default_rng(seed)
    params, series = random_model(rng, 2, 2, 5)
    orc = BatchOracle(params, series)
    f = kalman_filter(params, series, backend)
    s = rts_smoother(params, f, backend)
    for k in range(6):
        m, C = orc.filtered(k)
        assert rel_err(f.filtered_means[k], m) < 1e-8
        assert rel_err(f.filtered_covs[k], C) < 1e-8
        m, C = orc.smoothed(k)
        assert rel_err(s.smoothed_means[k], m) < 1e-8
        assert rel_err(s.smoothed_covs[k], C) < 1e-8
    for k in range(1, 6):
        m, C = orc.predicted(k)
        assert rel_err(f.predicted(k).mean, m) < 1e-8
        assert rel_err(f.predicted(k).cov, C) < 1e-8
    assert f.neg_loglik == pytest.approx(orc.neg_loglik(), rel=1e-10)


@pytest.mark.parametrize("seed", range(3))
def test_stats_match_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    params, series = random_model(rng, 2, 2, 6)
    st_ = smoothing_stats(params, series)
    Psi, Delta, Phi = BatchOracle(params, series).stats()
    assert rel_err(st_.Psi, Psi) < 1e-8
    assert rel_err(st_.Delta, Delta) < 1e-8
    assert rel_err(st_.Phi, Phi) < 1e-8
    assert np.array_equal(st_.Psi, st_.Psi.T) and np.array_equal(st_.Phi, st_.Phi.T)


def test_stats_deterministic_limit():
    obs = ObservationModel([[1.0]], [[1e-12]], [2.0], [[1e-12]])
    params = ModelParams([[1.5]], [[1e12]], obs)
    st_ = smoothing_stats(params, TimeSeries([[3.0]]))
    assert st_.Psi[0, 0] == pytest.approx(9.0, rel=1e-6)
    assert st_.Delta[0, 0] == pytest.approx(6.0, rel=1e-6)
    assert st_.Phi[0, 0] == pytest.approx(4.0, rel=1e-6)


def test_phi_index_shift_identity(rng):
    params, series = random_model(rng, 3, 2, 7)
    f = kalman_filter(params, series)
    s = rts_smoother(params, f)
    st_ = stats_from_smoother(s)
    ms, Ss = s.smoothed_means, s.smoothed_covs
    K = series.K
    second = lambda k: Ss[k] + np.outer(ms[k], ms[k])
    assert np.allclose(K * st_.Phi, K * st_.Psi - second(K) + second(0), atol=1e-12)


def test_likelihood_decomposition(rng):
    params, series = random_model(rng, 4, 3, 20)
    f = kalman_filter(params, series)
    assert f.recompute_neg_loglik() == pytest.approx(f.neg_loglik, rel=1e-10)


def test_determinism(rng):
    params, series = random_model(rng, 3, 3, 10)
    copy = TimeSeries(series.observations.copy())
    assert marginal_negloglik(params, series) == marginal_negloglik(params, copy)


def test_perturbed_transition_less_likely():
    from dglasso import make_dataset

    worse = 0
    for seed in range(20):
        gt, train, _ = make_dataset("A", seed=seed, K=300)
        obs = gt.spec.observation_model()
        base = marginal_negloglik(ModelParams(gt.A_star, gt.P_star, obs), train)
        A2 = gt.A_star.copy()
        A2[0, 1] += 0.5
        worse += marginal_negloglik(ModelParams(A2, gt.P_star, obs), train) > base
    assert worse == 20


def test_symmetry_preserved(rng):
    params, series = random_model(rng, 4, 2, 15)
    f = kalman_filter(params, series)
    s = rts_smoother(params, f)
    for S in list(f.filtered_covs) + list(s.smoothed_covs):
        assert np.linalg.norm(S - S.T) <= 1e-12 * np.linalg.norm(S)


def test_errors(rng):
    params, series = random_model(rng, 2, 2, 3)
    with pytest.raises(NonSPD):
        ModelParams(params.A, -np.eye(2), params.obs)
    with pytest.raises(DimensionMismatch):
        kalman_filter(params, TimeSeries(np.zeros((3, 3))))
    with pytest.raises(DimensionMismatch):
        ModelParams(np.eye(3), np.eye(3), params.obs)


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled kernels not built")
def test_backends_agree(rng):
    params, series = random_model(rng, 4, 3, 30)
    fp = kalman_filter(params, series, "python")
    fe = kalman_filter(params, series, "ext")
    assert rel_err(fe.filtered_covs, fp.filtered_covs) < 1e-12
    assert fe.neg_loglik == pytest.approx(fp.neg_loglik, rel=1e-12)
    sp = rts_smoother(params, fp, "python")
    se = rts_smoother(params, fe, "ext")
    assert rel_err(se.smoothed_means, sp.smoothed_means) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.1, 1.0))
def test_clip_spectral_bound(seed, cap):
    M = np.random.default_rng(seed).standard_normal((4, 4)) * 3
    C = clip_spectral(M, cap)
    assert np.linalg.norm(C, 2) <= cap + 1e-12
