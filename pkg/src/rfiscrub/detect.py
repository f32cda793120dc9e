"""Interferer-count detection.

Two families of statistics on the eigenvalue tail lambda_{d+1..M}:

* GMAM (geometric / arithmetic mean), used by the MDL baseline. Needs every
  eigenvalue, hence a full eigendecomposition.
* QMAM (quadratic / arithmetic mean). The tail sums can be rewritten with the
  trace, the squared Frobenius norm and the top Ritz values only, so the
  detector rides along a Lanczos run and never decomposes R.

A reference observation of the same sky supplies the correction factor
epsilon that maps the (colored) sky background onto the white-noise value 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BandMismatch,
    Breakdown,
    EmptyTail,
    NegativeRadicand,
    NoAcceptance,
    NonPositiveEigenvalue,
    ZeroMinEigenvalue,
)
from .lanczos import (
    DEFAULT_START_SEED,
    LanczosState,
    lanczos_init,
    lanczos_step,
    max_steps,
    ritz_pairs,
)
from .linalg import CovarianceMatrix, eigh, frobenius_norm_sq, trace

GMAM_CLAMP = 1e-15

QMAM = "QMAM"
MDL = "MDL"
GMAM_THRESHOLD = "GMAM-threshold"
ITERATIVE_SINR = "ITERATIVE-SINR"


@dataclass(frozen=True)
class DetectConfig:
    """Knobs for the QMAM detection loop.

    Attributes
    ----------
    m_max : int or None
        Lanczos step cap; None means ``min(M, max(32, 4 * d_expected))``.
    tau_phi : float
        Accept H0 when phi < tau_phi (+ ``phi_atol`` round-off allowance).
    guard : int
        Only trust phi for candidate d once m >= d + guard.
    floor : int
        First candidate evaluated. 0 allows the RFI-free answer; 1 starts
        where the published loop does.
    """

    m_max: int | None = None
    d_expected: int = 32
    reorthogonalize: bool = True
    start_vector: np.ndarray | None = None
    start_seed: int = DEFAULT_START_SEED
    tau_phi: float = 0.0
    phi_atol: float = 1e-10
    guard: int = 2
    floor: int = 0

    def step_cap(self, M: int) -> int:
        cap = self.m_max if self.m_max is not None else max_steps(M, self.d_expected)
        return max(1, min(cap, M))


@dataclass(frozen=True)
class EpsilonCalibration:
    """Sky-background correction factor for one band.

    ``constituents`` lists ``(lst_seconds, epsilon_t)`` for each reference
    used; when present, ``epsilon`` is their arithmetic mean.
    """

    epsilon: float
    constituents: tuple = ()
    freq_hz: float = 0.0
    source_d_ref: int = 0
    weights: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be positive and finite, got {self.epsilon}")
        cons = tuple((float(t), float(e)) for t, e in self.constituents)
        object.__setattr__(self, "constituents", cons)
        if cons:
            mean = sum(e for _, e in cons) / len(cons)
            if abs(mean - self.epsilon) > 1e-12 * max(1.0, abs(mean)):
                raise ValueError("epsilon must equal the mean of its constituents")

    @classmethod
    def combine(cls, cals) -> "EpsilonCalibration":
        """Average several single-LST calibrations (combined-QMAM)."""
        cals = list(cals)
        if not cals:
            raise ValueError("need at least one calibration")
        freq = cals[0].freq_hz
        for c in cals[1:]:
            if not _same_band(c.freq_hz, freq):
                raise BandMismatch(f"calibrations span bands {freq} and {c.freq_hz}")
        cons = []
        for c in cals:
            cons.extend(c.constituents or ((0.0, c.epsilon),))
        eps = sum(e for _, e in cons) / len(cons)
        return cls(
            epsilon=eps,
            constituents=tuple(cons),
            freq_hz=freq,
            source_d_ref=max(c.source_d_ref for c in cals),
        )


@dataclass(frozen=True)
class DetectionResult:
    d_hat: int
    statistic_trail: tuple
    method: str
    lanczos_steps_used: int = 0
    accepted: bool = True
    flags: tuple = ()


def _same_band(a: float, b: float) -> bool:
    if a == 0.0 or b == 0.0:
        return True
    return abs(a - b) <= 1e-9 * max(abs(a), abs(b))


def _tail(eigenvalues, d_hat):
    lam = np.asarray(eigenvalues, dtype=float)
    M = lam.size
    if not 0 <= d_hat <= M - 1:
        raise EmptyTail(f"d_hat={d_hat} leaves no tail of {M} eigenvalues")
    return lam[d_hat:]


def clamp_eigenvalues(eigenvalues):
    """Floor eigenvalues at 1e-15 * lambda_1; returns (values, clamped?)."""
    lam = np.asarray(eigenvalues, dtype=float)
    floor = GMAM_CLAMP * max(lam[0], 0.0)
    if floor <= 0:
        return lam, False
    bad = lam < floor
    if not bad.any():
        return lam, False
    lam = lam.copy()
    lam[bad] = floor
    return lam, True


def gmam(eigenvalues, d_hat: int, clamp: bool = False) -> float:
    """Geometric-to-arithmetic mean ratio of ``eigenvalues[d_hat:]``.

    Raises NonPositiveEigenvalue on a zero/negative tail value unless
    ``clamp`` is set, in which case values are floored at 1e-15 * lambda_1.
    """
    if clamp:
        eigenvalues, _ = clamp_eigenvalues(eigenvalues)
    tail = _tail(eigenvalues, d_hat)
    if np.any(tail <= 0):
        raise NonPositiveEigenvalue("geometric mean needs positive eigenvalues")
    log_gm = np.mean(np.log(tail))
    am = np.mean(tail)
    return float(np.exp(log_gm - np.log(am)))


def qmam_from_eigenvalues(eigenvalues, d_hat: int) -> float:
    """Quadratic-to-arithmetic mean ratio of ``eigenvalues[d_hat:]`` (>= 1)."""
    tail = _tail(eigenvalues, d_hat)
    am = np.mean(tail)
    if am <= 0:
        raise NonPositiveEigenvalue("tail arithmetic mean must be positive")
    return float(np.sqrt(np.mean(tail**2)) / am)


def qmam_from_ritz(trace_R, frob_sq_R, theta, d_hat: int, M: int, clamp: bool = False) -> float:
    """QMAM of the tail from trace, ||R||_F^2 and the top ``d_hat`` Ritz values.

    The tail sum uses first powers of the Ritz values and the tail sum of
    squares uses second powers, so this equals
    :func:`qmam_from_eigenvalues` once the Ritz values have converged.

    Raises
    ------
    NegativeRadicand
        If ``frob_sq_R - sum(theta^2)`` or the tail sum is not positive, which
        only happens when Ritz values overshoot. ``clamp=True`` floors the
        radicand at zero instead.
    """
    if not 0 <= d_hat <= M - 1:
        raise EmptyTail(f"d_hat={d_hat} leaves no tail of {M} eigenvalues")
    top = np.asarray(theta, dtype=float)[:d_hat]
    if top.size < d_hat:
        raise ValueError(f"need {d_hat} Ritz values, have {top.size}")
    n = M - d_hat
    sq = frob_sq_R - float(np.sum(top**2))
    lin = trace_R - float(np.sum(top))
    if lin <= 0:
        raise NegativeRadicand(f"tail sum {lin:.3e} is not positive")
    if sq < 0:
        if not clamp:
            raise NegativeRadicand(f"tail sum of squares {sq:.3e} is negative")
        sq = 0.0
    return math.sqrt(sq / n) / (lin / n)


def calibrate_epsilon(reference: CovarianceMatrix, d_ref: int = 0) -> EpsilonCalibration:
    """Epsilon from an RFI-free (or already cleaned) same-sky reference.

    The tail weights are w_k = lambda_k / lambda_M for k > d_ref and
    epsilon = AM(w) / QM(w).
    """
    M = reference.dim
    if not 0 <= d_ref < M:
        raise EmptyTail(f"d_ref={d_ref} leaves no tail of {M} eigenvalues")
    lam = np.maximum(eigh(reference).values, 0.0)
    if lam[-1] <= 0:
        raise ZeroMinEigenvalue("reference has a zero smallest eigenvalue")
    w = lam[d_ref:] / lam[-1]
    eps = float(np.mean(w) / np.sqrt(np.mean(w**2)))
    return EpsilonCalibration(
        epsilon=eps,
        constituents=((reference.lst_seconds, eps),),
        freq_hz=reference.freq_hz,
        source_d_ref=d_ref,
        weights=w,
    )


def phi_statistic(epsilon: float, eta: float) -> float:
    """phi = ln(epsilon * eta); negative means the tail looks like the reference."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    return math.log(epsilon * eta)


def qmam_search(R: CovarianceMatrix, cal: EpsilonCalibration, config: DetectConfig | None = None):
    """Run the coupled Lanczos / hypothesis-test loop.

    Returns ``(result, state)`` where ``state`` is the final Lanczos state, so a
    caller can lift Ritz vectors without repeating any steps. Does not raise
    on failure; ``result.accepted`` is False instead.
    """
    cfg = config or DetectConfig()
    if not _same_band(cal.freq_hz, R.freq_hz):
        raise BandMismatch(f"calibration is for {cal.freq_hz} Hz, data is {R.freq_hz} Hz")
    M = R.dim
    m_max = cfg.step_cap(M)
    tr, fro = trace(R), frobenius_norm_sq(R)
    state = lanczos_init(
        R, cfg.start_vector, seed=cfg.start_seed, reorthogonalize=cfg.reorthogonalize
    )
    broken = False
    theta_cache = {}

    def advance():
        nonlocal state, broken
        try:
            state = lanczos_step(state, R)
        except Breakdown as exc:
            state, broken = exc.state, True

    def theta():
        if state.m not in theta_cache:
            theta_cache.clear()
            theta_cache[state.m] = ritz_pairs(state).theta
        return theta_cache[state.m]

    trail, flags = [], []
    d_hat = cfg.floor
    while d_hat <= min(M - 1, m_max):
        target = max(1, min(d_hat + cfg.guard, m_max))
        while state.m < target and not broken:
            advance()
        if d_hat > state.m:
            break
        while True:
            try:
                eta = qmam_from_ritz(tr, fro, theta(), d_hat, M)
                break
            except NegativeRadicand:
                if not broken and state.m < m_max:
                    advance()
                    continue
                eta = qmam_from_ritz(tr, fro, theta(), d_hat, M, clamp=True)
                flags.append(f"unconverged:{d_hat}")
                break
        phi = phi_statistic(cal.epsilon, eta)
        trail.append((d_hat, phi))
        if phi < cfg.tau_phi + cfg.phi_atol:
            if broken:
                flags.append("breakdown")
            return DetectionResult(d_hat, tuple(trail), QMAM, state.m, True, tuple(flags)), state
        d_hat += 1

    flags.append("no-acceptance")
    last = trail[-1][0] if trail else cfg.floor
    return DetectionResult(last, tuple(trail), QMAM, state.m, False, tuple(flags)), state


def detect_qmam(R: CovarianceMatrix, cal: EpsilonCalibration, config: DetectConfig | None = None) -> DetectionResult:
    """Estimate the interferer count with the Lanczos/QMAM test.

    Raises NoAcceptance (with the flagged result attached) when no candidate
    up to the step cap passes.
    """
    result, _ = qmam_search(R, cal, config)
    if not result.accepted:
        raise NoAcceptance("QMAM accepted no candidate d_hat", result)
    return result


def mdl_criterion(eigenvalues, N: int) -> np.ndarray:
    """Wax-Kailath MDL value for every candidate k = 0..M-1."""
    lam = np.asarray(eigenvalues, dtype=float)
    M = lam.size
    k = np.arange(M)
    n_tail = M - k
    # suffix sums give every tail mean in O(M)
    log_sum = np.cumsum(np.log(lam)[::-1])[::-1]
    lin_sum = np.cumsum(lam[::-1])[::-1]
    log_L = log_sum / n_tail - np.log(lin_sum / n_tail)
    return -N * n_tail * log_L + 0.5 * k * (2 * M - k) * math.log(N)


def detect_mdl(R: CovarianceMatrix, ed=None) -> DetectionResult:
    """Minimum-description-length estimate from the full eigenvalue set.

    ``ed`` may pass in an existing eigendecomposition of ``R``.
    """
    N = R.sample_count
    if N <= 0:
        raise ValueError("MDL needs a sample covariance (sample_count > 0)")
    lam, clamped = clamp_eigenvalues((ed or eigh(R)).values)
    flags = []
    if clamped:
        flags.append("clamped")
    if N == 1:
        flags.append("degenerate-sample-count")
    if lam[0] <= 0:
        return DetectionResult(0, ((0, 0.0),), MDL, 0, True, tuple(flags + ["zero-matrix"]))
    crit = mdl_criterion(lam, N)
    d_hat = int(np.argmin(crit))
    trail = tuple((k, float(c)) for k, c in enumerate(crit))
    return DetectionResult(d_hat, trail, MDL, 0, True, tuple(flags))
