"""Dense Hermitian linear algebra shared by the rest of the package.

Full eigendecompositions go through LAPACK ``zheev`` (Householder reduction to
tridiagonal form followed by implicit QL/QR), which is the O(M^3) baseline the
Lanczos path is measured against. Every call to :func:`eigh` bumps a
per-thread counter so pipelines can prove they never touched it.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NonFinite

_counter = threading.local()


def eigh_call_count() -> int:
    """Number of full eigendecompositions performed on the calling thread."""
    return getattr(_counter, "n", 0)


def _bump_eigh_count():
    _counter.n = getattr(_counter, "n", 0) + 1


def _readonly(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    """Hermitian array covariance for one narrow band.

    The constructor symmetrizes ``entries`` as ``(A + A^H) / 2`` and stores a
    read-only copy, so instances are safe to share.

    Parameters
    ----------
    entries : array_like, shape (M, M)
        Complex covariance estimate.
    freq_hz : float
        Band centre frequency.
    sample_count : int
        Number of snapshots averaged; 0 marks an exact (analytic) matrix.
    lst_seconds : float
        Local sidereal time tag, in sidereal seconds.
    """

    entries: np.ndarray
    freq_hz: float = 0.0
    sample_count: int = 0
    lst_seconds: float = 0.0

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=np.complex128)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"covariance must be square, got shape {a.shape}")
        if a.shape[0] < 1:
            raise DimensionMismatch("covariance must have M >= 1")
        if not np.all(np.isfinite(a)):
            raise NonFinite("covariance has NaN/Inf entries")
        a = 0.5 * (a + a.conj().T)
        object.__setattr__(self, "entries", _readonly(a))
        object.__setattr__(self, "sample_count", int(self.sample_count))
        object.__setattr__(self, "freq_hz", float(self.freq_hz))
        object.__setattr__(self, "lst_seconds", float(self.lst_seconds))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def replace(self, entries=None, **meta) -> "CovarianceMatrix":
        """Copy with new entries and/or metadata."""
        kw = dict(
            freq_hz=self.freq_hz,
            sample_count=self.sample_count,
            lst_seconds=self.lst_seconds,
        )
        kw.update(meta)
        return CovarianceMatrix(self.entries if entries is None else entries, **kw)

    def scaled(self, c: float) -> "CovarianceMatrix":
        return self.replace(self.entries * c)

    def check_psd(self, rtol: float = 1e-10) -> bool:
        """True if the smallest eigenvalue is >= -rtol * trace / M."""
        lam = eigh(self).values
        return bool(lam[-1] >= -rtol * max(trace(self), 0.0) / self.dim)


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    """Eigenpairs sorted by descending eigenvalue; column k of ``vectors`` is u_k."""

    values: np.ndarray
    vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.conj().T


@dataclass(frozen=True)
class Tridiagonal:
    """Symmetric tridiagonal matrix given by its diagonal and off-diagonal."""

    alpha: np.ndarray
    beta: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        if beta.size != max(alpha.size - 1, 0):
            raise DimensionMismatch(
                f"beta must have length {alpha.size - 1}, got {beta.size}"
            )
        object.__setattr__(self, "alpha", _readonly(alpha))
        object.__setattr__(self, "beta", _readonly(beta))

    @property
    def size(self) -> int:
        return self.alpha.size

    def dense(self) -> np.ndarray:
        return np.diag(self.alpha) + np.diag(self.beta, 1) + np.diag(self.beta, -1)


def _as_array(R):
    return R.entries if isinstance(R, CovarianceMatrix) else np.asarray(R)


def eigh(R) -> EigenDecomposition:
    """Full eigendecomposition of a Hermitian matrix, eigenvalues descending."""
    a = _as_array(R)
    if not np.all(np.isfinite(a)):
        raise NonFinite("matrix has NaN/Inf entries")
    _bump_eigh_count()
    w, v = scipy.linalg.eigh(a, driver="ev", check_finite=False)
    order = np.argsort(-w, kind="stable")
    return EigenDecomposition(_readonly(w[order]), _readonly(v[:, order]))


def tridiag_eigh(T: Tridiagonal):
    """Eigenpairs of a symmetric tridiagonal matrix.

    Returns
    -------
    values : ndarray, shape (m,)
        Descending eigenvalues.
    vectors : ndarray, shape (m, m)
        Real orthonormal eigenvectors as columns, matching ``values``.
    """
    if T.size < 1:
        raise DimensionMismatch("tridiagonal matrix must have m >= 1")
    if not (np.all(np.isfinite(T.alpha)) and np.all(np.isfinite(T.beta))):
        raise NonFinite("tridiagonal entries contain NaN/Inf")
    if T.size == 1:
        return T.alpha.copy(), np.ones((1, 1))
    w, v = scipy.linalg.eigh_tridiagonal(T.alpha, T.beta, check_finite=False)
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def frobenius_norm_sq(R) -> float:
    a = _as_array(R)
    return float(np.vdot(a, a).real)


def trace(R) -> float:
    return float(np.trace(_as_array(R)).real)


def psd_clamped(R: CovarianceMatrix, rtol: float = 1e-10) -> CovarianceMatrix:
    """Zero out slightly negative eigenvalues (>= -rtol * trace / M).

    Eigenvalues more negative than that are left alone; they point at a real
    problem upstream, not round-off.
    """
    ed = eigh(R)
    floor = -rtol * max(trace(R), 0.0) / R.dim
    lam = ed.values.copy()
    if lam[-1] >= 0:
        return R
    lam[(lam < 0) & (lam >= floor)] = 0.0
    return R.replace((ed.vectors * lam) @ ed.vectors.conj().T)
