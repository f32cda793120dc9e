"""File formats: binary covariance files plus small line-oriented text files.

RCOV layout (little-endian throughout)::

    magic    4s   b"RCOV"
    version  u16  1
    M        u32
    N        u64  sample count (0 for exact matrices)
    freq_hz  f64
    lst      f64  local sidereal time, seconds
    flags    u32  bit 0 = cleaned
    payload  M*M complex128, row-major, (re, im) pairs

Writers need exclusive access to their path; there is no locking.
"""

from __future__ import annotations

import io
import math
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .beamform import ArrayGeometry, DriftScan
from .detect import EpsilonCalibration
from .errors import ConfigError, FormatError, HermitianViolation, NonFinite
from .linalg import CovarianceMatrix

MAGIC = b"RCOV"
VERSION = 1
HEADER = struct.Struct("<4sHIQddI")
FLAG_CLEANED = 1
HERMITIAN_RTOL = 1e-9
TOOL_VERSION = "0.1.0"


@dataclass(frozen=True)
class CovarianceFileHeader:
    M: int
    N: int
    freq_hz: float
    lst_seconds: float
    flags: int = 0
    magic: bytes = MAGIC
    version: int = VERSION

    @property
    def cleaned(self) -> bool:
        return bool(self.flags & FLAG_CLEANED)

    @property
    def payload_bytes(self) -> int:
        return 16 * self.M * self.M


def encode_covariance(R: CovarianceMatrix, flags: int = 0) -> bytes:
    A = np.asarray(R.entries)
    if not np.all(np.isfinite(A)):
        raise NonFinite("refusing to write a covariance with non-finite entries")
    M = A.shape[0]
    head = HEADER.pack(MAGIC, VERSION, M, int(R.sample_count), float(R.freq_hz), float(R.lst_seconds), int(flags))
    return head + np.ascontiguousarray(A, dtype="<c16").tobytes(order="C")


def decode_header(buf: bytes) -> CovarianceFileHeader:
    if len(buf) < HEADER.size:
        raise FormatError("TruncatedHeader", f"{len(buf)} bytes < {HEADER.size}")
    magic, version, M, N, freq, lst, flags = HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise FormatError("BadMagic", repr(magic))
    if version != VERSION:
        raise FormatError("BadVersion", str(version))
    if M < 2:
        raise FormatError("BadDimension", f"M={M}")
    return CovarianceFileHeader(M, N, freq, lst, flags)


def decode_covariance(buf: bytes):
    """Parse an RCOV byte string into ``(header, CovarianceMatrix)``."""
    head = decode_header(buf)
    body = buf[HEADER.size:]
    if len(body) != head.payload_bytes:
        kind = "TruncatedPayload" if len(body) < head.payload_bytes else "TrailingBytes"
        raise FormatError(kind, f"expected {head.payload_bytes} payload bytes, got {len(body)}")
    A = np.frombuffer(body, dtype="<c16").reshape(head.M, head.M).astype(np.complex128)
    if not np.all(np.isfinite(A)):
        raise NonFinite("covariance file holds non-finite entries")
    scale = np.linalg.norm(A)
    asym = np.linalg.norm(A - A.conj().T) / scale if scale > 0 else 0.0
    if asym > HERMITIAN_RTOL:
        raise HermitianViolation(f"relative asymmetry {asym:.3e} exceeds {HERMITIAN_RTOL:g}")
    if asym > 0:
        warnings.warn(f"symmetrizing covariance with relative asymmetry {asym:.3e}", stacklevel=3)
    R = CovarianceMatrix(A, freq_hz=head.freq_hz, sample_count=head.N, lst_seconds=head.lst_seconds)
    return head, R


def write_covariance(path, R: CovarianceMatrix, flags: int = 0) -> None:
    Path(path).write_bytes(encode_covariance(R, flags))


def read_covariance_file(path):
    """Return ``(header, CovarianceMatrix)``."""
    return decode_covariance(Path(path).read_bytes())


def read_covariance(path) -> CovarianceMatrix:
    return read_covariance_file(path)[1]


# ---------------------------------------------------------------- key=value

def parse_key_values(text: str, source: str = "<config>", repeatable=()) -> dict:
    """Flat ``key = value`` text with ``#`` comments.

    Keys listed in ``repeatable`` collect into lists of ``(line_no, value)``;
    any other duplicated key is an error. Errors name the offending line.
    """
    out: dict = {}
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{no}: expected key = value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{no}: empty key")
        if key in repeatable:
            out.setdefault(key, []).append((no, value))
        elif key in out:
            raise ConfigError(f"{source}:{no}: duplicate key {key!r}")
        else:
            out[key] = value
    return out


def format_key_values(pairs) -> str:
    lines = []
    for k, v in pairs:
        if isinstance(v, float):
            v = repr(v)
        lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- calibration

def write_calibration(path, cal: EpsilonCalibration) -> None:
    pairs = [
        ("tool_version", TOOL_VERSION),
        ("freq_hz", float(cal.freq_hz)),
        ("epsilon", float(cal.epsilon)),
        ("source_d_ref", int(cal.source_d_ref)),
    ]
    pairs += [("constituent", f"{t!r},{e!r}") for t, e in cal.constituents]
    Path(path).write_text(format_key_values(pairs), encoding="utf-8")


def read_calibration(path) -> EpsilonCalibration:
    kv = parse_key_values(Path(path).read_text(encoding="utf-8"), str(path), repeatable=("constituent",))
    try:
        cons = []
        for no, v in kv.get("constituent", []):
            t, e = v.split(",")
            cons.append((float(t), float(e)))
        return EpsilonCalibration(
            epsilon=float(kv["epsilon"]),
            constituents=tuple(cons),
            freq_hz=float(kv.get("freq_hz", 0.0)),
            source_d_ref=int(kv.get("source_d_ref", 0)),
        )
    except KeyError as exc:
        raise ConfigError(f"{path}: missing key {exc.args[0]!r}") from None
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


# ---------------------------------------------------------------- geometry

def write_geometry(path, geom: ArrayGeometry) -> None:
    buf = io.StringIO()
    buf.write(f"# site_latitude_rad={float(geom.site_latitude)!r} site_longitude_rad={float(geom.site_longitude)!r} "
              f"reference_index={geom.reference_index}\n")
    buf.write("id,x_m,y_m,z_m,cable_delay_s\n")
    for i, (p, c) in enumerate(zip(geom.positions.tolist(), geom.cable_delays.tolist())):
        buf.write(f"{i},{p[0]!r},{p[1]!r},{p[2]!r},{c!r}\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_geometry(path) -> ArrayGeometry:
    meta = {"site_latitude_rad": 0.0, "site_longitude_rad": 0.0, "reference_index": 0}
    rows = []
    for no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for tok in line[1:].split():
                if "=" in tok:
                    k, v = tok.split("=", 1)
                    if k in meta:
                        meta[k] = float(v)
            continue
        if line.startswith("id,"):
            continue
        parts = line.split(",")
        if len(parts) != 5:
            raise ConfigError(f"{path}:{no}: expected 5 columns, got {len(parts)}")
        try:
            rows.append([float(x) for x in parts[1:]])
        except ValueError:
            raise ConfigError(f"{path}:{no}: non-numeric geometry row") from None
    arr = np.array(rows, dtype=float).reshape(-1, 4)
    return ArrayGeometry(
        positions=arr[:, :3],
        cable_delays=arr[:, 3],
        site_latitude=meta["site_latitude_rad"],
        site_longitude=meta["site_longitude_rad"],
        reference_index=int(meta["reference_index"]),
    )


# ---------------------------------------------------------------- grids, scans, reports

def write_image(path, image, decl_grid_deg, ra_grid_rad, freq_hz: float, label: str = "") -> None:
    img = np.asarray(image, dtype=float)
    buf = io.StringIO()
    buf.write(f"# freq_hz={float(freq_hz)!r}\n")
    if label:
        buf.write(f"# label={label}\n")
    buf.write("# decl_deg=" + ",".join(repr(float(x)) for x in decl_grid_deg) + "\n")
    buf.write("# ra_rad=" + ",".join(repr(float(x)) for x in ra_grid_rad) + "\n")
    for row in img:
        buf.write(",".join(repr(float(x)) for x in row) + "\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_image(path):
    """Return ``(image, decl_grid_deg, ra_grid_rad, freq_hz)``."""
    head, rows = {}, []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition("=")
            head[k] = v
        elif line.strip():
            rows.append([float(x) for x in line.split(",")])
    dec = np.array([float(x) for x in head["decl_deg"].split(",")])
    ra = np.array([float(x) for x in head["ra_rad"].split(",")])
    return np.array(rows), dec, ra, float(head["freq_hz"])


def write_drift_scan(path, scan: DriftScan) -> None:
    buf = io.StringIO()
    buf.write(f"# freq_hz={float(scan.freq_hz)!r} ra_rad={float(scan.right_ascension)!r}\n")
    buf.write("# declination_deg,power\n")
    for d, p in zip(scan.declinations, scan.powers):
        buf.write(f"{float(d)!r},{float(p)!r}\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_drift_scan(path) -> DriftScan:
    freq = ra = 0.0
    dec, pw = [], []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            for tok in line[1:].split():
                if tok.startswith("freq_hz="):
                    freq = float(tok.split("=", 1)[1])
                elif tok.startswith("ra_rad="):
                    ra = float(tok.split("=", 1)[1])
        elif line.strip():
            d, p = line.split(",")
            dec.append(float(d))
            pw.append(float(p))
    return DriftScan(np.array(dec), np.array(pw), freq, ra)


def format_cell(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def write_table(path, columns, rows) -> None:
    """Comma-separated table with a header row; floats written with ``repr``."""
    lines = [",".join(columns)]
    lines += [",".join(format_cell(r.get(c, "")) for c in columns) for r in rows]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_table(path) -> list[dict]:
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not lines:
        return []
    cols = lines[0].split(",")
    return [dict(zip(cols, ln.split(","))) for ln in lines[1:]]


def write_truth(path, d_true: int, freq_hz: float, eigenvalues) -> None:
    pairs = [("d_true", int(d_true)), ("freq_hz", float(freq_hz))]
    pairs += [("eigenvalues", ",".join(repr(float(x)) for x in eigenvalues))]
    Path(path).write_text(format_key_values(pairs), encoding="utf-8")


def read_truth(path) -> dict:
    kv = parse_key_values(Path(path).read_text(encoding="utf-8"), str(path))
    try:
        vals = [float(x) for x in kv.get("eigenvalues", "").split(",") if x]
        return {"d_true": int(kv["d_true"]), "freq_hz": float(kv["freq_hz"]), "eigenvalues": np.array(vals)}
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{path}: malformed truth file ({exc})") from None


@dataclass(frozen=True)
class ScenarioFile:
    """Parsed scenario description used by ``simulate``.

    Recognised keys: ``antennas``, ``geometry_seed``, ``latitude_deg``,
    ``freqs_hz`` (comma list), ``lst_hours``, ``samples``, ``noise_power``,
    ``seed``, ``rfi_kind``, repeatable ``rfi = az_deg, el_deg, inr_db`` and
    ``source = dec_deg, ra_hours, power``.
    """

    antennas: int = 64
    geometry_seed: int = 1
    latitude_deg: float = 34.07
    freqs_hz: tuple = (41e6,)
    lst_hours: float = 0.0
    samples: int = 4096
    noise_power: float = 1.0
    seed: int = 0
    rfi_kind: str = "gaussian"
    rfi: tuple = field(default=())  # (az_deg, el_deg, inr_db)
    sources: tuple = field(default=())  # (dec_deg, ra_hours, power)


_SCENARIO_CASTS = {
    "antennas": int,
    "geometry_seed": int,
    "latitude_deg": float,
    "lst_hours": float,
    "samples": int,
    "noise_power": float,
    "seed": int,
    "rfi_kind": str,
}


def parse_scenario(text: str, source: str = "<scenario>") -> ScenarioFile:
    kv = parse_key_values(text, source, repeatable=("rfi", "source"))
    kw = {}
    for key, value in kv.items():
        if key in ("rfi", "source"):
            continue
        if key == "freqs_hz":
            try:
                kw[key] = tuple(float(x) for x in value.split(","))
            except ValueError:
                raise ConfigError(f"{source}: freqs_hz must be a comma list of numbers") from None
            continue
        if key not in _SCENARIO_CASTS:
            raise ConfigError(f"{source}: unknown key {key!r}")
        try:
            kw[key] = _SCENARIO_CASTS[key](value)
        except ValueError:
            raise ConfigError(f"{source}: bad value for {key!r}: {value!r}") from None

    def triples(name):
        out = []
        for no, value in kv.get(name, []):
            try:
                t = tuple(float(x) for x in value.split(","))
            except ValueError:
                t = ()
            if len(t) != 3:
                raise ConfigError(f"{source}:{no}: {name} needs three comma-separated numbers")
            out.append(t)
        return tuple(out)

    kw["rfi"] = triples("rfi")
    kw["sources"] = triples("source")
    return ScenarioFile(**kw)


def read_scenario(path) -> ScenarioFile:
    return parse_scenario(Path(path).read_text(encoding="utf-8"), str(path))
