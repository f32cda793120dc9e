"""Steering vectors, beamforming and the source-referenced quality metrics.

Geometry model: antenna positions live in a local east-north-up frame. A sky
direction (declination, right ascension, LST) becomes a topocentric unit
vector through the hour angle and the site latitude; the geometric delay of
antenna i relative to the reference is -(r_i - r_ref) . s / c, the cable delay
difference is added, and a_i = exp(-j 2 pi f tau_i).
"""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass

import numpy as np

from .detect import ITERATIVE_SINR
from .errors import DegenerateDenominator, DimensionMismatch
from .linalg import CovarianceMatrix, eigh, eigh_call_count, trace
from .mitigate import MitigationReport, subtract_subspace

C_LIGHT = 299792458.0
SIDEREAL_DAY_S = 86400.0
SINR_FLOOR_DB = -300.0
DEFAULT_DECL_GRID_DEG = np.arange(-30.0, 90.0 + 0.5, 1.0)


@dataclass(frozen=True, eq=False)
class ArrayGeometry:
    """Antenna layout.

    Attributes
    ----------
    positions : ndarray, shape (M, 3)
        East, north, up coordinates in metres.
    cable_delays : ndarray, shape (M,)
        Cable delays in seconds; only differences to the reference matter.
    site_latitude, site_longitude : float
        Radians.
    reference_index : int
        Antenna whose phase is defined as zero.
    """

    positions: np.ndarray
    cable_delays: np.ndarray
    site_latitude: float
    site_longitude: float = 0.0
    reference_index: int = 0

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        cab = np.array(self.cable_delays, dtype=float).ravel()
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise DimensionMismatch(f"positions must be (M, 3), got {pos.shape}")
        M = pos.shape[0]
        if M < 2:
            raise ValueError("an array needs at least two antennas")
        if cab.size != M:
            raise DimensionMismatch(f"{cab.size} cable delays for {M} antennas")
        if not 0 <= self.reference_index < M:
            raise ValueError(f"reference_index {self.reference_index} out of range")
        pos.setflags(write=False)
        cab.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "cable_delays", cab)

    @property
    def n_antennas(self) -> int:
        return self.positions.shape[0]

    def fingerprint(self) -> str:
        h = hashlib.sha1(self.positions.tobytes())
        h.update(self.cable_delays.tobytes())
        h.update(np.array([self.site_latitude, self.site_longitude, self.reference_index]).tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class SkyDirection:
    """Equatorial direction observed at a given LST (angles in radians)."""

    declination: float
    right_ascension: float
    lst_seconds: float = 0.0

    def __post_init__(self):
        if not -math.pi / 2 - 1e-12 <= self.declination <= math.pi / 2 + 1e-12:
            raise ValueError(f"declination {self.declination} outside [-pi/2, pi/2]")

    @classmethod
    def from_degrees(cls, dec_deg, ra_hours, lst_hours=0.0):
        return cls(math.radians(dec_deg), ra_hours * math.pi / 12.0, lst_hours * 3600.0)


@dataclass(frozen=True, eq=False)
class SteeringVector:
    entries: np.ndarray
    freq_hz: float
    direction: SkyDirection
    below_horizon: bool = False


@dataclass(frozen=True, eq=False)
class DriftScan:
    """Beamformed power along a declination cut at fixed right ascension."""

    declinations: np.ndarray
    powers: np.ndarray
    freq_hz: float = 0.0
    right_ascension: float = 0.0

    def __post_init__(self):
        dec = np.asarray(self.declinations, dtype=float)
        pw = np.asarray(self.powers, dtype=float)
        if dec.shape != pw.shape or dec.ndim != 1 or dec.size == 0:
            raise DimensionMismatch("declinations and powers must be equal-length 1-D")
        if np.any(np.diff(dec) <= 0):
            raise ValueError("declination grid must be strictly increasing")
        if not np.all(np.isfinite(pw)):
            raise ValueError("scan powers must be finite")
        object.__setattr__(self, "declinations", dec)
        object.__setattr__(self, "powers", pw)


def hour_angle(lst_seconds, right_ascension):
    return 2.0 * np.pi * np.asarray(lst_seconds) / SIDEREAL_DAY_S - np.asarray(right_ascension)


def equatorial_to_enu(declination, hour_angle_rad, latitude):
    """Topocentric (east, north, up) unit vectors; broadcasts over inputs."""
    dec = np.asarray(declination, dtype=float)
    H = np.asarray(hour_angle_rad, dtype=float)
    sd, cd = np.sin(dec), np.cos(dec)
    sl, cl = math.sin(latitude), math.cos(latitude)
    east = -cd * np.sin(H)
    north = sd * cl - cd * sl * np.cos(H)
    up = sd * sl + cd * cl * np.cos(H)
    return np.stack(np.broadcast_arrays(east, north, up), axis=-1)


def azel_to_enu(azimuth, elevation):
    """Unit vectors for azimuth (from north through east) and elevation."""
    az = np.asarray(azimuth, dtype=float)
    el = np.asarray(elevation, dtype=float)
    return np.stack(
        np.broadcast_arrays(np.cos(el) * np.sin(az), np.cos(el) * np.cos(az), np.sin(el)), axis=-1
    )


def steering_from_unit(geom: ArrayGeometry, s_hat, freq_hz: float) -> np.ndarray:
    """Steering vectors for unit direction(s) ``s_hat`` (..., 3) -> (..., M)."""
    s = np.asarray(s_hat, dtype=float)
    baselines = geom.positions - geom.positions[geom.reference_index]
    cable = geom.cable_delays - geom.cable_delays[geom.reference_index]
    tau = -(s @ baselines.T) / C_LIGHT + cable
    return np.exp(-2j * np.pi * freq_hz * tau)


def steering_vector(geom: ArrayGeometry, direction: SkyDirection, freq_hz: float) -> SteeringVector:
    s = equatorial_to_enu(
        direction.declination,
        hour_angle(direction.lst_seconds, direction.right_ascension),
        geom.site_latitude,
    )
    a = steering_from_unit(geom, s, freq_hz)
    a[geom.reference_index] = 1.0
    return SteeringVector(a, float(freq_hz), direction, bool(s[2] < 0))


def steering_grid(geom, decl_deg, ra, lst_seconds, freq_hz) -> np.ndarray:
    """Steering matrix with one row per declination (degrees) at fixed RA."""
    dec = np.radians(np.asarray(decl_deg, dtype=float))
    s = equatorial_to_enu(dec, hour_angle(lst_seconds, ra), geom.site_latitude)
    return steering_from_unit(geom, s, freq_hz)


def _vec(a):
    return a.entries if isinstance(a, SteeringVector) else np.asarray(a)


def beam_power(a, R: CovarianceMatrix) -> float:
    """Re(a^H R a), with round-off negatives (>= -1e-10 trace) clamped to 0."""
    v = _vec(a)
    if v.size != R.dim:
        raise DimensionMismatch(f"steering vector length {v.size} vs M={R.dim}")
    p = float(np.vdot(v, R.entries @ v).real)
    if p < 0 and p >= -1e-10 * abs(trace(R)):
        p = 0.0
    return p


def beam_powers(A, R) -> np.ndarray:
    """Re(a^H R a) for every row of ``A``; no clamping."""
    Rm = R.entries if isinstance(R, CovarianceMatrix) else np.asarray(R)
    return np.einsum("km,km->k", A.conj(), A @ Rm.T).real


def point_spread_function(geom, src: SkyDirection, decl_grid_deg, freq_hz) -> DriftScan:
    """|a_delta^H a_s|^2 along the declination cut through the source."""
    A = steering_grid(geom, decl_grid_deg, src.right_ascension, src.lst_seconds, freq_hz)
    a_s = steering_vector(geom, src, freq_hz).entries
    powers = np.abs(A.conj() @ a_s) ** 2
    return DriftScan(np.asarray(decl_grid_deg, dtype=float), powers, freq_hz, src.right_ascension)


def source_range(scan: DriftScan, contiguous: bool = True) -> np.ndarray:
    """Samples strictly above the scan mean.

    With ``contiguous`` (the default) only the run of above-mean samples that
    contains the scan maximum is kept; that run is the source declination
    range used by :func:`sinr`. Samples exactly at the mean count as
    background.
    """
    b = scan.powers
    h = b > b.mean()
    if not contiguous or not h.any():
        return h
    peak = int(np.argmax(b))
    lo = peak
    while lo > 0 and h[lo - 1]:
        lo -= 1
    hi = peak
    while hi < b.size - 1 and h[hi + 1]:
        hi += 1
    mask = np.zeros_like(h)
    mask[lo : hi + 1] = True
    return mask


def main_lobe(scan: DriftScan):
    """Index bounds (lo, hi) of the first local minima around the peak."""
    b = scan.powers
    peak = int(np.argmax(b))
    lo = peak
    while lo > 0 and b[lo - 1] < b[lo]:
        lo -= 1
    hi = peak
    while hi < b.size - 1 and b[hi + 1] < b[hi]:
        hi += 1
    return lo, hi


def main_lobe_halfwidth(scan: DriftScan) -> float:
    """Half the declination span between the first minima flanking the peak (degrees)."""
    lo, hi = main_lobe(scan)
    return 0.5 * (scan.declinations[hi] - scan.declinations[lo])


_mask_cache: dict = {}


def source_mask(geom, src: SkyDirection, decl_grid_deg, freq_hz) -> np.ndarray:
    """Source declination range from the ideal-source PSF, cached."""
    grid = np.asarray(decl_grid_deg, dtype=float)
    key = (geom.fingerprint(), float(freq_hz), src, hashlib.sha1(grid.tobytes()).hexdigest())
    mask = _mask_cache.get(key)
    if mask is None:
        mask = source_range(point_spread_function(geom, src, grid, freq_hz))
        mask.setflags(write=False)
        if len(_mask_cache) > 256:
            _mask_cache.clear()
        _mask_cache[key] = mask
    return mask


def _sinr_db(beams, mask, tr):
    num = beams[mask].mean() - tr
    den = beams.mean() - tr
    tol = 1e-12 * abs(tr)
    if num <= tol:
        return SINR_FLOOR_DB
    if den <= tol:
        raise DegenerateDenominator(f"background term {den:.3e} is not positive")
    return 10.0 * math.log10(num / den)


def sinr(R_d: CovarianceMatrix, geom, ra, decl_grid_deg, delta_s, freq_hz=None) -> float:
    """Source SINR in dB along the declination cut at right ascension ``ra``.

    Numerator: mean beam power over the source range minus trace(R_d).
    Denominator: mean beam power over the whole grid minus trace(R_d).
    A non-positive numerator returns the -300 dB floor.
    """
    mask = np.asarray(delta_s, dtype=bool)
    if not mask.any() or mask.all():
        raise ValueError("source range must be a non-empty strict subset of the grid")
    f = R_d.freq_hz if freq_hz is None else freq_hz
    A = steering_grid(geom, decl_grid_deg, ra, R_d.lst_seconds, f)
    if A.shape[0] != mask.size:
        raise DimensionMismatch("mask and declination grid differ in length")
    return _sinr_db(beam_powers(A, R_d), mask, trace(R_d))


def sinr_for_source(R_d: CovarianceMatrix, geom, source: SkyDirection, decl_grid_deg=None) -> float:
    """:func:`sinr` with the source range taken from the ideal PSF of ``source``."""
    grid = DEFAULT_DECL_GRID_DEG if decl_grid_deg is None else decl_grid_deg
    src = SkyDirection(source.declination, source.right_ascension, R_d.lst_seconds)
    mask = source_mask(geom, src, grid, R_d.freq_hz)
    return sinr(R_d, geom, source.right_ascension, grid, mask)


def iterative_sinr_clean(
    R: CovarianceMatrix,
    geom: ArrayGeometry,
    source: SkyDirection,
    decl_grid_deg=None,
    d_max: int | None = None,
    tie_db: float = 0.0,
):
    """Brute-force subtraction depth maximizing the source SINR.

    One eigendecomposition, then SINR(R_k) for k = 0..d_max using the
    incremental identity a^H R_k a = a^H R a - sum_{i<=k} lambda_i |a^H u_i|^2.
    The smallest k whose SINR is within ``tie_db`` of the best wins.

    Returns
    -------
    R_d : CovarianceMatrix
    report : MitigationReport
        ``sinr_curve`` holds (k, SINR dB) for every candidate; candidates with
        a degenerate background term carry NaN and are flagged.
    """
    calls0 = eigh_call_count()
    t0 = time.perf_counter_ns()
    M = R.dim
    grid = DEFAULT_DECL_GRID_DEG if decl_grid_deg is None else np.asarray(decl_grid_deg, float)
    d_max = min(M - 1, 32) if d_max is None else min(d_max, M)
    src = SkyDirection(source.declination, source.right_ascension, R.lst_seconds)
    mask = source_mask(geom, src, grid, R.freq_hz)
    A = steering_grid(geom, grid, source.right_ascension, R.lst_seconds, R.freq_hz)

    ed = eigh(R)
    lam, U = ed.values[:d_max], ed.vectors[:, :d_max]
    leak = np.abs(A.conj() @ U) ** 2 * lam
    beams = beam_powers(A, R)
    tr = trace(R)

    curve, flags = [], []
    for k in range(d_max + 1):
        if k:
            beams = beams - leak[:, k - 1]
            tr -= lam[k - 1]
        try:
            curve.append((k, _sinr_db(beams, mask, tr)))
        except DegenerateDenominator:
            curve.append((k, float("nan")))
            flags.append(f"degenerate:{k}")
    vals = np.array([s for _, s in curve])
    if np.all(np.isnan(vals)):
        best = 0
        flags.append("no-valid-sinr")
    else:
        top = np.nanmax(vals)
        best = int(np.flatnonzero(vals >= top - tie_db)[0])

    Rd, rep = subtract_subspace(R, U[:, :best], lam[:best], "iterative-sinr")
    elapsed = time.perf_counter_ns() - t0
    return Rd, MitigationReport(
        d_hat=best,
        method="iterative-sinr",
        removed_power=rep.removed_power,
        residual_trace=rep.residual_trace,
        wall_time_ns=elapsed,
        full_eigh_calls=eigh_call_count() - calls0,
        flags=tuple(flags),
        detection=ITERATIVE_SINR,
        sinr_curve=tuple(curve),
    )


def sky_image(R_d: CovarianceMatrix, geom, ra_grid, decl_grid_deg, freq_hz=None, normalize=False):
    """Beamformed power on a (declination x right ascension) grid.

    ``ra_grid`` is in radians, ``decl_grid_deg`` in degrees; row k is
    declination k.
    """
    f = R_d.freq_hz if freq_hz is None else freq_hz
    dec = np.radians(np.asarray(decl_grid_deg, dtype=float))
    ra = np.asarray(ra_grid, dtype=float)
    D, RA = np.meshgrid(dec, ra, indexing="ij")
    s = equatorial_to_enu(D, hour_angle(R_d.lst_seconds, RA), geom.site_latitude)
    A = steering_from_unit(geom, s.reshape(-1, 3), f)
    img = beam_powers(A, R_d).reshape(D.shape)
    if normalize:
        peak = np.max(np.abs(img))
        if peak > 0:
            img = img / peak
    return img


def image_projection_and_sdr(U_kept, geom, src: SkyDirection, decl_grid_deg, ra_grid, freq_hz):
    """Distortion of an ideal point-source image by a subspace projection.

    Image(k, l) = a_kl^H P R_A P a_kl / (tr(a a^H) tr(R_A)) with R_A = a_s a_s^H
    and P = U_kept U_kept^H, compared against P = I over the probe grid.

    Returns
    -------
    mse : float
    sdr : float
        1 / mse, or ``inf`` when mse < 1e-300.
    """
    U = np.asarray(U_kept, dtype=np.complex128)
    a_s = steering_vector(geom, src, freq_hz).entries
    dec = np.radians(np.asarray(decl_grid_deg, dtype=float))
    ra = np.asarray(ra_grid, dtype=float)
    D, RA = np.meshgrid(dec, ra, indexing="ij")
    s = equatorial_to_enu(D, hour_angle(src.lst_seconds, RA), geom.site_latitude)
    A = steering_from_unit(geom, s.reshape(-1, 3), freq_hz)
    norm = float(np.vdot(a_s, a_s).real) * np.sum(np.abs(A) ** 2, axis=1)
    # P R_A P = (P a_s)(P a_s)^H, so the image is |a^H P a_s|^2
    Pa_s = U @ (U.conj().T @ a_s)
    projected = np.abs(A.conj() @ Pa_s) ** 2 / norm
    raw = np.abs(A.conj() @ a_s) ** 2 / norm
    mse = float(np.mean((projected - raw) ** 2))
    sdr = math.inf if mse < 1e-300 else 1.0 / mse
    return mse, sdr
