"""Synthetic sky and interference scenarios.

Stands in for real array recordings: celestial point sources enter through
equatorial steering vectors, terrestrial RFI through low-elevation
(azimuth, elevation) arrivals, plus white receiver noise. Everything is
driven by one seed so scenarios are reproducible bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .beamform import (
    ArrayGeometry,
    SkyDirection,
    azel_to_enu,
    steering_from_unit,
    steering_vector,
)
from .linalg import CovarianceMatrix

LWA1_LATITUDE_DEG = 34.07
LWA1_LONGITUDE_DEG = -107.63
CABLE_VELOCITY_FACTOR = 0.83
DEFAULT_SAMPLES = 4096

CAS_A = (58.8, 23 + 23 / 60)  # (declination deg, RA hours)
CYG_A = (41.0, 19 + 59 / 60)


@dataclass(frozen=True, eq=False)
class RFIEmitter:
    """Terrestrial interferer: arrival azimuth/elevation (radians) and power.

    ``steering`` overrides the geometric arrival model when given.
    """

    azimuth: float = 0.0
    elevation: float = 0.0
    power: float = 1.0
    steering: np.ndarray | None = None

    def __post_init__(self):
        if not (self.power >= 0 and math.isfinite(self.power)):
            raise ValueError(f"RFI power must be finite and >= 0, got {self.power}")


@dataclass(frozen=True, eq=False)
class SkyScenario:
    geometry: ArrayGeometry
    sources: tuple = ()  # of (SkyDirection, power)
    rfi: tuple = ()  # of RFIEmitter
    noise_power: float = 1.0
    freq_hz: float = 41e6
    lst_seconds: float = 0.0
    seed: int = 0
    rfi_kind: str = "gaussian"  # or "sinusoid"

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        object.__setattr__(self, "rfi", tuple(self.rfi))
        if not (self.noise_power >= 0 and math.isfinite(self.noise_power)):
            raise ValueError("noise power must be finite and >= 0")
        for _, q in self.sources:
            if not (q >= 0 and math.isfinite(q)):
                raise ValueError("source powers must be finite and >= 0")
        if not self.sources and not self.rfi and self.noise_power == 0:
            raise ValueError("scenario has no sources, RFI or noise")
        if self.rfi_kind not in ("gaussian", "sinusoid"):
            raise ValueError(f"unknown rfi_kind {self.rfi_kind!r}")

    @property
    def n_antennas(self) -> int:
        return self.geometry.n_antennas

    def without_rfi(self) -> "SkyScenario":
        return replace(self, rfi=())


@dataclass(frozen=True, eq=False)
class ScenarioTruth:
    d_true: int
    B: np.ndarray
    R_exact: CovarianceMatrix
    source_steering: np.ndarray = field(default=None)


def rfi_steering(geom: ArrayGeometry, emitter: RFIEmitter, freq_hz: float) -> np.ndarray:
    if emitter.steering is not None:
        a = np.asarray(emitter.steering, dtype=np.complex128)
        if a.size != geom.n_antennas:
            raise ValueError("RFI steering override has the wrong length")
        return a
    return steering_from_unit(geom, azel_to_enu(emitter.azimuth, emitter.elevation), freq_hz)


def _source_matrix(sc: SkyScenario) -> np.ndarray:
    cols = []
    for direction, _ in sc.sources:
        d = SkyDirection(direction.declination, direction.right_ascension, sc.lst_seconds)
        cols.append(steering_vector(sc.geometry, d, sc.freq_hz).entries)
    return np.array(cols).T.reshape(sc.n_antennas, len(cols))


def _rfi_matrix(sc: SkyScenario) -> np.ndarray:
    """B with columns sqrt(p_i) a_i for emitters with p_i > 0."""
    cols = [math.sqrt(e.power) * rfi_steering(sc.geometry, e, sc.freq_hz) for e in sc.rfi if e.power > 0]
    return np.array(cols).T.reshape(sc.n_antennas, len(cols))


def exact_covariance(sc: SkyScenario) -> ScenarioTruth:
    """R = B B^H + sum_j q_j a_j a_j^H + sigma^2 I."""
    M = sc.n_antennas
    B = _rfi_matrix(sc)
    S = _source_matrix(sc)
    q = np.array([p for _, p in sc.sources], dtype=float)
    R = B @ B.conj().T + (S * q) @ S.conj().T + sc.noise_power * np.eye(M)
    cov = CovarianceMatrix(R, freq_hz=sc.freq_hz, sample_count=0, lst_seconds=sc.lst_seconds)
    return ScenarioTruth(B.shape[1], B, cov, S)


def _cn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def sample_covariance(sc: SkyScenario, N: int = DEFAULT_SAMPLES, seed: int | None = None) -> CovarianceMatrix:
    """R_hat = X X^H / N for N simulated snapshots.

    Drives: RFI waveforms g (unit-power circular Gaussian, or unit-modulus
    tones with random frequency and phase when ``rfi_kind='sinusoid'``),
    source signals and receiver noise, all independent and drawn from
    ``seed`` (default: the scenario seed) in a fixed order.
    """
    if N < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(sc.seed if seed is None else seed)
    M = sc.n_antennas
    B = _rfi_matrix(sc)
    S = _source_matrix(sc)
    q = np.array([p for _, p in sc.sources], dtype=float)

    if sc.rfi_kind == "sinusoid":
        nu = rng.uniform(-0.5, 0.5, size=(B.shape[1], 1))
        ph = rng.uniform(0, 2 * np.pi, size=(B.shape[1], 1))
        g = np.exp(1j * (2 * np.pi * nu * np.arange(N) + ph))
    else:
        g = _cn(rng, (B.shape[1], N))
    s = _cn(rng, (S.shape[1], N))
    n = _cn(rng, (M, N))

    X = B @ g + (S * np.sqrt(q)) @ s + math.sqrt(sc.noise_power) * n
    R = (X @ X.conj().T) / N
    return CovarianceMatrix(R, freq_hz=sc.freq_hz, sample_count=N, lst_seconds=sc.lst_seconds)


def reference_pair(sc: SkyScenario, N: int, seed_a: int, seed_b: int, rfi_in_reference: bool = False):
    """Two independent realizations of the same sky.

    ``a`` is the calibration reference (RFI-free unless ``rfi_in_reference``),
    ``b`` the observation to clean (carries the scenario's RFI).
    """
    ref = sc if rfi_in_reference else sc.without_rfi()
    return sample_covariance(ref, N, seed_a), sample_covariance(sc, N, seed_b)


def lwa_like_geometry(M: int, seed: int = 0, latitude_deg: float = LWA1_LATITUDE_DEG) -> ArrayGeometry:
    """Compact pseudo-random station cluster plus one outrigger.

    M-1 stations are drawn uniformly in a 100 m diameter disk; the last
    antenna is an outrigger about 300 m away and serves as the phase
    reference. Cable delays are proportional to the distance from a hub at
    the disk edge.
    """
    if M < 2:
        raise ValueError("need at least two antennas")
    rng = np.random.default_rng(seed)
    n_core = M - 1
    r = 50.0 * np.sqrt(rng.uniform(0, 1, n_core))
    phi = rng.uniform(0, 2 * np.pi, n_core)
    core = np.column_stack([r * np.cos(phi), r * np.sin(phi), np.zeros(n_core)])
    ang = rng.uniform(0, 2 * np.pi)
    dist = 300.0 + rng.uniform(-10, 10)
    outrigger = np.array([[dist * np.cos(ang), dist * np.sin(ang), 0.0]])
    pos = np.vstack([core, outrigger])
    hub = np.array([0.0, -50.0, 0.0])
    cable_len = np.linalg.norm(pos - hub, axis=1) + 5.0
    delays = cable_len / (CABLE_VELOCITY_FACTOR * 299792458.0)
    return ArrayGeometry(
        positions=pos,
        cable_delays=delays,
        site_latitude=math.radians(latitude_deg),
        site_longitude=math.radians(LWA1_LONGITUDE_DEG),
        reference_index=M - 1,
    )


def random_rfi(rng, d: int, inr_db, max_elevation_deg: float = 10.0, noise_power: float = 1.0):
    """``d`` horizon emitters with per-antenna INR (dB) drawn from ``inr_db``.

    ``inr_db`` is a scalar or a (low, high) range.
    """
    lo, hi = (inr_db, inr_db) if np.isscalar(inr_db) else inr_db
    out = []
    for _ in range(d):
        az = rng.uniform(0, 2 * np.pi)
        el = math.radians(rng.uniform(0, max_elevation_deg))
        p = noise_power * 10 ** (rng.uniform(lo, hi) / 10)
        out.append(RFIEmitter(az, el, p))
    return tuple(out)


@dataclass(frozen=True)
class TrialDesign:
    """Seeded detection-trial family: one faint Cas-A-like source at transit
    plus ``d`` horizon interferers, observed against an RFI-free reference.

    ``source_power`` is per-antenna (relative to unit noise); the default
    keeps the source eigenvalue above the noise bulk but below the level an
    information criterion would count as a signal.
    """

    antennas: int = 64
    samples: int = DEFAULT_SAMPLES
    freq_hz: float = 41e6
    inr_db: tuple = (20.0, 30.0)
    source_power: float = 0.005
    geometry_seed: int = 1
    max_elevation_deg: float = 10.0

    def geometry(self) -> ArrayGeometry:
        return lwa_like_geometry(self.antennas, seed=self.geometry_seed)

    def source(self) -> SkyDirection:
        dec, ra = CAS_A
        return SkyDirection.from_degrees(dec, ra, ra)


def detection_trial(trial: int, d: int, design: TrialDesign = TrialDesign(), geom: ArrayGeometry | None = None):
    """Return ``(scenario, reference, observation)`` for one seeded trial."""
    geom = design.geometry() if geom is None else geom
    src = design.source()
    rng = np.random.default_rng(1000 + trial)
    rfi = random_rfi(rng, d, design.inr_db, design.max_elevation_deg)
    sc = SkyScenario(
        geometry=geom,
        sources=((src, design.source_power),),
        rfi=rfi,
        noise_power=1.0,
        freq_hz=design.freq_hz,
        lst_seconds=src.lst_seconds,
        seed=trial,
    )
    ref, obs = reference_pair(sc, design.samples, 2 * trial + 1, 2 * trial + 2)
    return sc, ref, obs
