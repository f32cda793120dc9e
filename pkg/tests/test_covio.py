import hashlib
import struct
import warnings
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rfiscrub import covio
from rfiscrub.beamform import DriftScan
from rfiscrub.detect import EpsilonCalibration
from rfiscrub.errors import ConfigError, FormatError, HermitianViolation, NonFinite
from rfiscrub.linalg import CovarianceMatrix
from rfiscrub.skysim import lwa_like_geometry

DATA = Path(__file__).parent / "data"
GOLDEN = {
    "golden_m2.rcov": "2196c4601e95cfdf76f27273a66c9351c67f56b934f0bc05599bba5a5196148d",
    "golden_m4_cleaned.rcov": "734c6597029af397e890d0210496af69c8f364135e04c961502c86c7a77c6eb6",
}


def _golden4():
    def e(i, j):
        if i == j:
            return complex(4.0, 0.0)
        if j > i:
            return complex(0.125 * (j - i), 0.0625 * (i + j))
        return e(j, i).conjugate()

    return np.array([[e(i, j) for j in range(4)] for i in range(4)])


@pytest.mark.parametrize("name", sorted(GOLDEN))
def test_golden_files_unchanged(name):
    assert hashlib.sha256((DATA / name).read_bytes()).hexdigest() == GOLDEN[name]


def test_golden_m2_decodes():
    head, R = covio.read_covariance_file(DATA / "golden_m2.rcov")
    assert (head.M, head.N, head.freq_hz, head.lst_seconds, head.flags) == (2, 4096, 41e6, 84180.0, 0)
    assert not head.cleaned
    assert np.array_equal(R.entries, np.array([[2.0, 0.5 - 0.25j], [0.5 + 0.25j, 1.0]]))
    assert R.sample_count == 4096


def test_golden_m4_decodes_and_reencodes():
    raw = (DATA / "golden_m4_cleaned.rcov").read_bytes()
    head, R = covio.decode_covariance(raw)
    assert head.cleaned and head.M == 4 and head.freq_hz == 27e6
    assert np.array_equal(R.entries, _golden4())
    assert covio.encode_covariance(R, head.flags) == raw


def test_header_layout():
    R = CovarianceMatrix(np.eye(3), freq_hz=1.5e6, sample_count=7, lst_seconds=2.0)
    b = covio.encode_covariance(R, flags=1)
    assert b[:4] == b"RCOV"
    assert struct.unpack_from("<HIQddI", b, 4) == (1, 3, 7, 1.5e6, 2.0, 1)
    assert len(b) == 4 + 2 + 4 + 8 + 8 + 8 + 4 + 16 * 9


@given(M=st.integers(2, 12), seed=st.integers(0, 2**31), flags=st.integers(0, 3))
def test_round_trip_bitwise(M, seed, flags, tmp_path_factory):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((M, M)) + 1j * rng.standard_normal((M, M))
    R = CovarianceMatrix(X @ X.conj().T, freq_hz=rng.uniform(1e6, 1e8), sample_count=int(rng.integers(0, 2**40)),
                         lst_seconds=rng.uniform(0, 86400))
    path = tmp_path_factory.mktemp("rt") / "r.rcov"
    covio.write_covariance(path, R, flags)
    head, back = covio.read_covariance_file(path)
    assert back.entries.tobytes() == R.entries.tobytes()
    assert (head.flags, back.freq_hz, back.sample_count, back.lst_seconds) == \
        (flags, R.freq_hz, R.sample_count, R.lst_seconds)


def test_format_errors():
    good = (DATA / "golden_m2.rcov").read_bytes()
    with pytest.raises(FormatError) as e:
        covio.decode_covariance(b"XCOV" + good[4:])
    assert e.value.kind == "BadMagic"
    with pytest.raises(FormatError) as e:
        covio.decode_covariance(good[:4] + struct.pack("<H", 2) + good[6:])
    assert e.value.kind == "BadVersion"
    with pytest.raises(FormatError) as e:
        covio.decode_covariance(good[:-1])
    assert e.value.kind == "TruncatedPayload"
    with pytest.raises(FormatError) as e:
        covio.decode_covariance(good[:10])
    assert e.value.kind == "TruncatedHeader"
    with pytest.raises(FormatError) as e:
        covio.decode_covariance(good + b"\0")
    assert e.value.kind == "TrailingBytes"


def _patch_entry(raw, M, i, j, z):
    off = covio.HEADER.size + 16 * (i * M + j)
    return raw[:off] + struct.pack("<dd", z.real, z.imag) + raw[off + 16:]


def test_hermitian_checks():
    raw = (DATA / "golden_m4_cleaned.rcov").read_bytes()
    A = _golden4()
    bad = _patch_entry(raw, 4, 0, 1, A[0, 1] + 1e-3 * np.abs(A).max() * 4)
    with pytest.raises(HermitianViolation):
        covio.decode_covariance(bad)
    tiny = _patch_entry(raw, 4, 0, 1, A[0, 1] + 1e-12)
    with pytest.warns(UserWarning, match="symmetrizing"):
        _, R = covio.decode_covariance(tiny)
    assert np.allclose(R.entries, R.entries.conj().T)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        covio.decode_covariance(raw)


def test_nonfinite_rejected(tmp_path):
    A = np.eye(2, dtype=complex)
    A[0, 0] = np.inf
    with pytest.raises(NonFinite):
        covio.write_covariance(tmp_path / "x.rcov", CovarianceMatrix(A))


def test_calibration_round_trip(tmp_path):
    cal = EpsilonCalibration.combine([
        EpsilonCalibration(0.91234567890123, ((100.0, 0.91234567890123),), 41e6),
        EpsilonCalibration(0.87, ((7300.5, 0.87),), 41e6),
    ])
    covio.write_calibration(tmp_path / "c.txt", cal)
    back = covio.read_calibration(tmp_path / "c.txt")
    assert back == cal
    assert "tool_version" in (tmp_path / "c.txt").read_text()


def test_geometry_round_trip(tmp_path):
    g = lwa_like_geometry(16, seed=4)
    covio.write_geometry(tmp_path / "g.csv", g)
    back = covio.read_geometry(tmp_path / "g.csv")
    assert back.fingerprint() == g.fingerprint()
    assert (tmp_path / "g.csv").read_text().splitlines()[1] == "id,x_m,y_m,z_m,cable_delay_s"


def test_geometry_bad_row(tmp_path):
    p = tmp_path / "g.csv"
    p.write_text("id,x_m,y_m,z_m,cable_delay_s\n0,1,2,3,0\n1,1,2\n")
    with pytest.raises(ConfigError, match=":3:"):
        covio.read_geometry(p)


def test_key_value_parser():
    kv = covio.parse_key_values("# c\na = 1\nrfi = 1,2,3  # trailing\nrfi = 4,5,6\n", repeatable=("rfi",))
    assert kv == {"a": "1", "rfi": [(3, "1,2,3"), (4, "4,5,6")]}
    with pytest.raises(ConfigError, match=":2:"):
        covio.parse_key_values("a = 1\noops\n")
    with pytest.raises(ConfigError, match="duplicate"):
        covio.parse_key_values("a = 1\na = 2\n")


def test_scenario_parser():
    sf = covio.parse_scenario("antennas = 32\nfreqs_hz = 27e6, 41e6\nrfi = 10, 3, 30\nsource = 58.8, 23.38, 0.5\n")
    assert sf.antennas == 32 and sf.freqs_hz == (27e6, 41e6)
    assert sf.rfi == ((10.0, 3.0, 30.0),) and sf.sources == ((58.8, 23.38, 0.5),)
    with pytest.raises(ConfigError, match=":2:"):
        covio.parse_scenario("antennas = 8\nrfi = 1, 2\n")
    with pytest.raises(ConfigError, match="unknown key"):
        covio.parse_scenario("colour = blue\n")


def test_image_and_scan_round_trip(tmp_path):
    img = np.arange(12.0).reshape(3, 4) / 7
    covio.write_image(tmp_path / "i.txt", img, [1.0, 2.0, 3.0], [0.0, 0.1, 0.2, 0.3], 41e6, "after")
    back, dec, ra, f = covio.read_image(tmp_path / "i.txt")
    assert np.array_equal(back, img) and f == 41e6 and dec.tolist() == [1.0, 2.0, 3.0]
    scan = DriftScan(np.array([-1.0, 0.5]), np.array([3.25, 1.0 / 3]), 27e6, 1.25)
    covio.write_drift_scan(tmp_path / "s.txt", scan)
    s2 = covio.read_drift_scan(tmp_path / "s.txt")
    assert np.array_equal(s2.powers, scan.powers) and s2.freq_hz == 27e6 and s2.right_ascension == 1.25


def test_table_round_trip(tmp_path):
    rows = [{"a": 1, "b": 0.1, "c": "x"}, {"a": 2, "b": float("nan"), "c": ""}]
    covio.write_table(tmp_path / "t.csv", ("a", "b", "c"), rows)
    back = covio.read_table(tmp_path / "t.csv")
    assert back[0] == {"a": "1", "b": "0.1", "c": "x"} and back[1]["b"] == "nan"


def test_truth_round_trip(tmp_path):
    covio.write_truth(tmp_path / "t.txt", 3, 41e6, [5.0, 1.5])
    t = covio.read_truth(tmp_path / "t.txt")
    assert t["d_true"] == 3 and t["eigenvalues"].tolist() == [5.0, 1.5]
