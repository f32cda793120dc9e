"""Lanczos iteration and Rayleigh-Ritz extraction for Hermitian covariances.

Each step costs one O(M^2) matrix-vector product. With full
reorthogonalization (the default) an extra O(mM) per step keeps the basis
orthonormal in floating point; ``reorthogonalize=False`` runs the plain
three-term recurrence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import Breakdown, DimensionMismatch, ZeroStartVector
from .linalg import CovarianceMatrix, Tridiagonal, frobenius_norm_sq, tridiag_eigh

DEFAULT_START_SEED = 20130430
# Round-off alone leaves beta ~ 1e-12 ||R||_F at an exact invariant subspace
# once d approaches 10, so the breakdown test needs headroom above that.
BREAKDOWN_RTOL = 1e-10


def default_start_vector(M: int, seed: int = DEFAULT_START_SEED) -> np.ndarray:
    """Unit-norm complex Gaussian vector, deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    f = rng.standard_normal(M) + 1j * rng.standard_normal(M)
    return f / np.linalg.norm(f)


def max_steps(M: int, d_expected: int = 32) -> int:
    return min(M, max(32, 4 * d_expected))


@dataclass(frozen=True, eq=False)
class LanczosState:
    """Snapshot after ``m`` Lanczos steps.

    Attributes
    ----------
    basis : ndarray, shape (M, m)
        Orthonormal Krylov basis p_1..p_m.
    alpha : ndarray, shape (m,)
        Diagonal of T_m.
    beta : ndarray, shape (m + 1,)
        beta_0 = ||f|| followed by beta_1..beta_m; beta_1..beta_{m-1} are the
        off-diagonal of T_m and beta_m = ||residual||.
    residual : ndarray, shape (M,)
        Unnormalized next direction r_m.
    """

    basis: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    residual: np.ndarray
    reorthogonalize: bool = True
    breakdown_tol: float = 0.0
    seed: int | None = None
    broken: bool = False

    @property
    def m(self) -> int:
        return self.alpha.size

    @property
    def dim(self) -> int:
        return self.residual.size

    def tridiagonal(self) -> Tridiagonal:
        return Tridiagonal(self.alpha, self.beta[1 : self.m])


@dataclass(frozen=True, eq=False)
class RitzPairs:
    """Rayleigh-Ritz values (descending), vectors y_k = P z_k and residual norms."""

    theta: np.ndarray
    y: np.ndarray
    residuals: np.ndarray


def lanczos_init(
    R: CovarianceMatrix,
    f: np.ndarray | None = None,
    *,
    seed: int = DEFAULT_START_SEED,
    reorthogonalize: bool = True,
) -> LanczosState:
    """Prepare a Lanczos run on ``R`` starting from ``f``.

    When ``f`` is None a seeded complex Gaussian unit vector is used and the
    seed is kept on the state.
    """
    M = R.dim
    if f is None:
        f = default_start_vector(M, seed)
        used_seed = seed
    else:
        f = np.asarray(f, dtype=np.complex128).ravel()
        used_seed = None
        if f.size != M:
            raise DimensionMismatch(f"start vector has length {f.size}, matrix is {M}x{M}")
    beta0 = float(np.linalg.norm(f))
    if beta0 == 0.0:
        raise ZeroStartVector("starting vector has zero norm")
    tol = BREAKDOWN_RTOL * np.sqrt(frobenius_norm_sq(R))
    return LanczosState(
        basis=np.zeros((M, 0), dtype=np.complex128),
        alpha=np.zeros(0),
        beta=np.array([beta0]),
        residual=f.copy(),
        reorthogonalize=reorthogonalize,
        breakdown_tol=tol,
        seed=used_seed,
    )


def lanczos_step(state: LanczosState, R: CovarianceMatrix) -> LanczosState:
    """One Lanczos step; returns the extended state.

    Raises
    ------
    Breakdown
        If the new residual norm is at or below the breakdown tolerance (an
        invariant subspace was reached). The extended state rides on the
        exception as ``exc.state``.
    """
    if state.broken:
        raise Breakdown(float(state.beta[-1]), state.breakdown_tol, state)
    M, m = state.dim, state.m
    if R.dim != M:
        raise DimensionMismatch(f"state is for M={M}, matrix is {R.dim}x{R.dim}")
    if m >= M:
        raise ValueError(f"Krylov space already spans C^{M}")

    A = R.entries
    p = state.residual / state.beta[-1]
    v = A @ p
    if m > 0:
        v = v - state.basis[:, -1] * state.beta[-1]
    alpha = float(np.vdot(p, v).real)
    r = v - alpha * p
    P = np.column_stack([state.basis, p])
    if state.reorthogonalize:
        for _ in range(2):
            r = r - P @ (P.conj().T @ r)
    beta = float(np.linalg.norm(r))

    new = LanczosState(
        basis=P,
        alpha=np.append(state.alpha, alpha),
        beta=np.append(state.beta, beta),
        residual=r,
        reorthogonalize=state.reorthogonalize,
        breakdown_tol=state.breakdown_tol,
        seed=state.seed,
        broken=beta <= state.breakdown_tol or m + 1 == M,
    )
    if new.broken:
        raise Breakdown(beta, state.breakdown_tol, new)
    return new


def run_lanczos(R: CovarianceMatrix, steps: int, f=None, **kw) -> LanczosState:
    """Take up to ``steps`` Lanczos steps, stopping early on breakdown."""
    state = lanczos_init(R, f, **kw)
    for _ in range(min(steps, R.dim)):
        try:
            state = lanczos_step(state, R)
        except Breakdown as exc:
            return exc.state
    return state


def ritz_pairs(state: LanczosState) -> RitzPairs:
    """Rayleigh-Ritz pairs of the current Krylov subspace.

    Residual norms use the standard identity ||R y_k - theta_k y_k|| =
    beta_m |z_{m,k}|, which is exact up to the orthogonality of the basis.
    """
    if state.m < 1:
        raise ValueError("need at least one Lanczos step")
    theta, Z = tridiag_eigh(state.tridiagonal())
    y = state.basis @ Z
    residuals = abs(state.beta[-1]) * np.abs(Z[-1, :])
    return RitzPairs(theta=theta, y=y, residuals=residuals)
