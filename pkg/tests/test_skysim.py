import math

import numpy as np
import pytest

from rfiscrub.beamform import SkyDirection, main_lobe_halfwidth, point_spread_function
from rfiscrub.linalg import eigh, trace
from rfiscrub.skysim import (
    CAS_A,
    RFIEmitter,
    SkyScenario,
    TrialDesign,
    detection_trial,
    exact_covariance,
    lwa_like_geometry,
    random_rfi,
    reference_pair,
    sample_covariance,
)

GEOM = lwa_like_geometry(16, seed=2)


def test_noise_only_exact():
    t = exact_covariance(SkyScenario(GEOM, noise_power=2.0))
    assert t.d_true == 0
    assert np.allclose(t.R_exact.entries, 2.0 * np.eye(16))


def test_single_interferer_spectrum():
    sc = SkyScenario(GEOM, rfi=(RFIEmitter(0.3, 0.1, 5.0),), noise_power=1.0)
    lam = eigh(exact_covariance(sc).R_exact).values
    assert lam[0] == pytest.approx(5.0 * 16 + 1.0)
    assert np.allclose(lam[1:], 1.0)


def test_orthogonal_interferers_ground_truth():
    M = 16
    F = np.fft.fft(np.eye(M))  # orthogonal unit-modulus columns
    powers = [10.0, 4.0, 2.0]
    rfi = tuple(RFIEmitter(power=p, steering=F[:, i]) for i, p in enumerate(powers))
    lam = eigh(exact_covariance(SkyScenario(GEOM, rfi=rfi)).R_exact).values
    assert np.allclose(lam[:3], np.array(powers) * M + 1.0, rtol=1e-9)
    assert np.sum(lam > 1.0 + 1e-9) == 3


def test_sample_covariance_determinism_and_rank():
    sc = SkyScenario(GEOM, rfi=random_rfi(np.random.default_rng(0), 2, 20.0), seed=5)
    a, b = sample_covariance(sc, 256), sample_covariance(sc, 256)
    assert np.array_equal(a.entries, b.entries)
    one = sample_covariance(sc, 1)
    assert np.linalg.matrix_rank(one.entries) == 1 and trace(one) > 0


def test_sample_covariance_converges():
    sc = SkyScenario(GEOM, rfi=random_rfi(np.random.default_rng(1), 2, 10.0), seed=3)
    R = exact_covariance(sc).R_exact.entries
    N = 2**18
    err = np.linalg.norm(sample_covariance(sc, N).entries - R) / np.linalg.norm(R)
    assert err <= 5 / math.sqrt(N)


def test_sample_covariance_unbiased():
    sc = SkyScenario(lwa_like_geometry(4, seed=0), rfi=(RFIEmitter(0.2, 0.1, 3.0),), seed=0)
    R = exact_covariance(sc).R_exact.entries
    draws = np.array([sample_covariance(sc, 64, s).entries for s in range(200)])
    se = draws.std(axis=0) / math.sqrt(200)
    within = np.abs(draws.mean(axis=0) - R) <= 3 * se + 1e-12
    # ~99.7% of entries expected within 3 standard errors
    assert within.mean() >= 0.95


def test_sinusoid_rfi_option():
    sc = SkyScenario(GEOM, rfi=(RFIEmitter(1.0, 0.05, 100.0),), rfi_kind="sinusoid", seed=9)
    R = sample_covariance(sc, 4096)
    assert eigh(R).values[0] > 100 * 16 * 0.9


def test_reference_pair():
    sc = SkyScenario(GEOM, rfi=random_rfi(np.random.default_rng(4), 1, 30.0), seed=1)
    a, b = reference_pair(sc, 512, 7, 7, rfi_in_reference=True)
    assert np.array_equal(a.entries, b.entries)
    clean, dirty = reference_pair(sc, 512, 1, 2)
    assert eigh(dirty).values[0] > 100 * eigh(clean).values[0]


def test_geometry_contract():
    g2 = lwa_like_geometry(2, seed=0)
    assert np.linalg.norm(g2.positions[1] - g2.positions[0]) > 0
    a, b = lwa_like_geometry(256, seed=11), lwa_like_geometry(256, seed=11)
    assert np.array_equal(a.positions, b.positions) and a.fingerprint() == b.fingerprint()
    with pytest.raises(ValueError):
        lwa_like_geometry(1)


def test_psf_main_lobe_few_degrees():
    g = lwa_like_geometry(64, seed=1)
    src = SkyDirection.from_degrees(*CAS_A, CAS_A[1])
    grid = np.arange(-30, 90.01, 0.25)
    w41 = main_lobe_halfwidth(point_spread_function(g, src, grid, 41e6))
    w27 = main_lobe_halfwidth(point_spread_function(g, src, grid, 27e6))
    assert 0.5 < w41 < w27 < 15


def test_random_rfi_ranges():
    rfi = random_rfi(np.random.default_rng(0), 50, (20, 30), max_elevation_deg=10)
    assert all(0 <= e.elevation <= math.radians(10) for e in rfi)
    assert all(100 <= e.power <= 1000 for e in rfi)


def test_invalid_scenarios():
    with pytest.raises(ValueError):
        SkyScenario(GEOM, noise_power=0.0)
    with pytest.raises(ValueError):
        SkyScenario(GEOM, rfi_kind="chirp")
    with pytest.raises(ValueError):
        RFIEmitter(power=-1.0)


def test_detection_trial_is_reproducible():
    d = TrialDesign(antennas=16, samples=256)
    _, r1, o1 = detection_trial(3, 2, d)
    _, r2, o2 = detection_trial(3, 2, d)
    assert np.array_equal(o1.entries, o2.entries) and np.array_equal(r1.entries, r2.entries)
    assert not np.array_equal(r1.entries, o1.entries)
