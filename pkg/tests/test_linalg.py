import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_psd
from rfiscrub.errors import NonFinite
from rfiscrub.linalg import (
    CovarianceMatrix,
    Tridiagonal,
    eigh,
    eigh_call_count,
    frobenius_norm_sq,
    psd_clamped,
    trace,
    tridiag_eigh,
)


def test_constructor_symmetrizes_and_freezes():
    A = np.array([[1.0, 2.0 + 1j], [0.0, 3.0]])
    R = CovarianceMatrix(A)
    assert np.allclose(R.entries, R.entries.conj().T)
    assert R.entries[0, 1] == pytest.approx((2 + 1j) / 2)
    with pytest.raises(ValueError):
        R.entries[0, 0] = 5.0


def test_eigh_identity():
    ed = eigh(CovarianceMatrix(np.eye(3)))
    assert np.allclose(ed.values, 1.0)
    assert np.allclose(np.abs(ed.vectors), np.eye(3))


def test_eigh_diagonal_sorted_descending():
    ed = eigh(CovarianceMatrix(np.diag([5.0, 1.0, 2.0])))
    assert np.allclose(ed.values, [5, 2, 1])


def test_eigh_two_by_two():
    ed = eigh(CovarianceMatrix(np.array([[2.0, 1.0], [1.0, 2.0]])))
    assert np.allclose(ed.values, [3, 1])


def test_eigh_rejects_nonfinite():
    with pytest.raises(NonFinite):
        eigh(CovarianceMatrix(np.array([[np.nan, 0], [0, 1.0]])))


def test_eigh_counter_increments():
    before = eigh_call_count()
    eigh(CovarianceMatrix(np.eye(2)))
    assert eigh_call_count() == before + 1


@pytest.mark.parametrize(
    "alpha, beta, expected",
    [
        ([7.0], [], [7.0]),
        ([2.0, 2.0], [1.0], [3.0, 1.0]),
        ([0.0, 0.0, 0.0], [1.0, 1.0], [math.sqrt(2), 0.0, -math.sqrt(2)]),
    ],
)
def test_tridiag_closed_forms(alpha, beta, expected):
    vals, vecs = tridiag_eigh(Tridiagonal(np.array(alpha), np.array(beta)))
    assert np.allclose(vals, expected, atol=1e-12)
    assert np.allclose(vecs.T @ vecs, np.eye(len(alpha)), atol=1e-12)


def test_norms_on_diagonals():
    assert frobenius_norm_sq(CovarianceMatrix(np.eye(3))) == pytest.approx(3)
    assert frobenius_norm_sq(CovarianceMatrix(np.diag([4.0, 1, 1, 1]))) == pytest.approx(19)
    assert trace(CovarianceMatrix(np.eye(4))) == pytest.approx(4)
    assert trace(CovarianceMatrix(np.diag([5.0, 1, 2]))) == pytest.approx(8)


@given(M=st.integers(2, 64), seed=st.integers(0, 2**31))
def test_eigh_invariants(M, seed):
    R = random_psd(np.random.default_rng(seed), M)
    ed = eigh(R)
    fro = math.sqrt(frobenius_norm_sq(R))
    assert np.all(np.diff(ed.values) <= 0)
    assert np.linalg.norm(ed.vectors.conj().T @ ed.vectors - np.eye(M)) <= 1e-8 * M
    assert np.linalg.norm(R.entries @ ed.vectors - ed.vectors * ed.values, axis=0).max() <= 1e-8 * fro
    assert np.linalg.norm(R.entries - ed.reconstruct()) / fro <= 1e-8
    assert trace(R) == pytest.approx(ed.values.sum(), rel=1e-10)
    assert frobenius_norm_sq(R) == pytest.approx(np.sum(ed.values**2), rel=1e-10)


@given(m=st.integers(1, 30), seed=st.integers(0, 2**31))
def test_tridiag_matches_dense(m, seed):
    rng = np.random.default_rng(seed)
    T = Tridiagonal(rng.standard_normal(m), rng.uniform(0.1, 2.0, m - 1))
    vals, _ = tridiag_eigh(T)
    dense = eigh(CovarianceMatrix(T.dense())).values
    assert np.allclose(vals, dense, atol=1e-9)


def test_psd_clamp_removes_tiny_negatives(rng):
    R = random_psd(rng, 8, [3, 2, 1, 1, 1, 1, 1, -1e-13])
    assert not R.check_psd(rtol=0.0)
    # reconstruction round-off may leave ~1e-16 negatives, far above the -1e-13 we injected
    assert eigh(psd_clamped(R)).values[-1] >= -1e-15 * trace(R)
