import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_psd, spiked_spectrum
from rfiscrub.errors import Breakdown, DimensionMismatch, ZeroStartVector
from rfiscrub.lanczos import (
    default_start_vector,
    lanczos_init,
    lanczos_step,
    max_steps,
    ritz_pairs,
    run_lanczos,
)
from rfiscrub.linalg import CovarianceMatrix, eigh, frobenius_norm_sq


def diag(*v):
    return CovarianceMatrix(np.diag(np.array(v, dtype=float)))


def test_init_unit_start():
    st0 = lanczos_init(CovarianceMatrix(np.eye(4)), np.eye(4)[0])
    assert st0.beta[0] == pytest.approx(1.0)


def test_init_normalizes_start():
    R = diag(4, 3, 2, 1)
    st0 = lanczos_init(R, np.array([2.0, 0, 0, 0]))
    assert st0.beta[0] == pytest.approx(2.0)
    # e_1 is an eigenvector, so the first step also reaches an invariant subspace
    with pytest.raises(Breakdown) as exc:
        lanczos_step(st0, R)
    assert np.allclose(exc.value.state.basis[:, 0], [1, 0, 0, 0])


def test_default_start_is_deterministic():
    a = lanczos_init(CovarianceMatrix(np.eye(16)))
    b = lanczos_init(CovarianceMatrix(np.eye(16)))
    assert np.array_equal(a.residual, b.residual)
    assert a.beta[0] == pytest.approx(1.0)
    assert a.seed is not None
    assert not np.array_equal(default_start_vector(16, 1), default_start_vector(16, 2))


def test_zero_start_rejected():
    with pytest.raises(ZeroStartVector):
        lanczos_init(diag(1, 2), np.zeros(2))


def test_wrong_length_start_rejected():
    with pytest.raises(DimensionMismatch):
        lanczos_init(diag(1, 2), np.ones(3))


def test_first_alpha_is_rayleigh_quotient():
    R = diag(3, 2, 1)
    st1 = lanczos_step(lanczos_init(R, np.ones(3)), R)
    assert st1.alpha[0] == pytest.approx(2.0)


def test_scalar_matrix_breaks_down_immediately():
    R = CovarianceMatrix(5.0 * np.eye(6))
    with pytest.raises(Breakdown) as exc:
        lanczos_step(lanczos_init(R, np.arange(1.0, 7.0)), R)
    assert exc.value.state.alpha[0] == pytest.approx(5.0)
    assert exc.value.state.m == 1


def test_three_steps_recover_spectrum():
    R = diag(3, 2, 1)
    state = run_lanczos(R, 3, np.ones(3))
    assert np.allclose(ritz_pairs(state).theta, [3, 2, 1], atol=1e-10)


def test_single_step_ritz_value_is_alpha():
    R = diag(4, 3, 2, 1)
    state = run_lanczos(R, 1, np.ones(4))
    assert ritz_pairs(state).theta == pytest.approx(state.alpha)


def test_dominant_value_converges_in_two_steps():
    R = diag(10, 1, 1, 1, 1, 1, 1, 1)
    state = run_lanczos(R, 2)
    assert ritz_pairs(state).theta[0] == pytest.approx(10.0, abs=1e-8)


def test_full_run_matches_eigh(rng):
    R = random_psd(rng, 12)
    state = run_lanczos(R, 12)
    assert np.allclose(ritz_pairs(state).theta, eigh(R).values, atol=1e-9)


def test_max_steps():
    assert max_steps(64) == 64
    assert max_steps(512) == 128
    assert max_steps(512, d_expected=3) == 32
    assert max_steps(8, d_expected=3) == 8


@given(M=st.integers(8, 64), seed=st.integers(0, 2**31), reorth=st.booleans())
def test_basis_and_tridiagonal_structure(M, seed, reorth):
    rng = np.random.default_rng(seed)
    R = random_psd(rng, M)
    m = min(M - 1, 10)
    state = run_lanczos(R, m, reorthogonalize=reorth)
    P = state.basis
    if reorth:
        assert np.linalg.norm(P.conj().T @ P - np.eye(state.m)) <= 1e-8 * state.m
    T = P.conj().T @ R.entries @ P
    fro = math.sqrt(frobenius_norm_sq(R))
    assert np.abs(T - state.tridiagonal().dense()).max() <= 1e-8 * fro


@given(M=st.integers(8, 48), seed=st.integers(0, 2**31))
def test_interlacing_from_below(M, seed):
    R = random_psd(np.random.default_rng(seed), M)
    lam = eigh(R).values
    prev = None
    state = lanczos_init(R)
    for _ in range(6):
        state = lanczos_step(state, R)
        theta = ritz_pairs(state).theta
        assert np.all(theta <= lam[: theta.size] + 1e-9 * lam[0])
        if prev is not None:
            assert np.all(prev <= theta[: prev.size] + 1e-9 * lam[0])
        prev = theta


@given(d=st.integers(1, 6), seed=st.integers(0, 2**31))
def test_gapped_spectrum_converges_at_d_plus_3(d, seed):
    rng = np.random.default_rng(seed)
    R = random_psd(rng, 48, spiked_spectrum(rng, 48, d, spread=1.5))
    theta = ritz_pairs(run_lanczos(R, d + 3)).theta[:d]
    assert np.allclose(theta, eigh(R).values[:d], rtol=1e-6)


def test_ritz_residuals_match_direct(rng):
    R = random_psd(rng, 20)
    state = run_lanczos(R, 6)
    pairs = ritz_pairs(state)
    direct = np.linalg.norm(R.entries @ pairs.y - pairs.y * pairs.theta, axis=0)
    assert np.allclose(direct, pairs.residuals, atol=1e-10)


@given(d=st.integers(1, 8), seed=st.integers(0, 2**31))
def test_krylov_saturation(d, seed):
    rng = np.random.default_rng(seed)
    M = 32
    B = rng.standard_normal((M, d)) + 1j * rng.standard_normal((M, d))
    R = CovarianceMatrix(B @ B.conj().T + 0.5 * np.eye(M))
    state = lanczos_init(R)
    for _ in range(d):
        state = lanczos_step(state, R)
    with pytest.raises(Breakdown) as exc:
        lanczos_step(state, R)
    assert exc.value.state.m == d + 1
    assert exc.value.beta <= 1e-6 * math.sqrt(frobenius_norm_sq(R))
