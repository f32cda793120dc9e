"""Paired timing of the Lanczos/QMAM and full-eigendecomposition pipelines."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from .detect import MDL, DetectConfig, calibrate_epsilon
from .mitigate import clean_qmam, clean_with_eigh
from .skysim import SkyScenario, lwa_like_geometry, random_rfi, reference_pair


@dataclass(frozen=True)
class BenchRow:
    M: int
    d: int
    qmam_s: float
    ed_s: float
    qmam_d_hat: int
    ed_d_hat: int
    qmam_eigh_calls: int


def loglog_slope(x, y) -> float:
    """Least-squares slope of log(y) against log(x)."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    return float(np.polyfit(lx, ly, 1)[0])


def bench_case(M: int, d: int, seed: int = 0, samples: int = 4096, inr_db: float = 30.0):
    """Build one (observation, calibration) pair at array size M."""
    geom = lwa_like_geometry(M, seed=seed)
    rng = np.random.default_rng(seed + 17)
    sc = SkyScenario(geom, (), random_rfi(rng, d, inr_db), 1.0, 41e6, 0.0, seed=seed)
    ref, obs = reference_pair(sc, samples, 2 * seed + 1, 2 * seed + 2)
    return obs, calibrate_epsilon(ref)


def _time(fn, trials):
    times, out = [], None
    for _ in range(trials):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times)), out


def run_bench(sizes=(64, 128, 256, 512), d: int = 3, trials: int = 11, seed: int = 0,
              config: DetectConfig | None = None, threads: int = 1):
    """Median wall time of each pipeline per array size.

    BLAS is pinned to ``threads`` threads so both paths pay the same
    per-flop price.
    """
    config = config or DetectConfig(tau_phi=0.01)
    rows = []
    with threadpool_limits(limits=threads):
        for M in sizes:
            R, cal = bench_case(M, d, seed)
            clean_qmam(R, cal, config)  # warm-up
            clean_with_eigh(R, MDL)
            tq, (_, rq) = _time(lambda: clean_qmam(R, cal, config), trials)
            te, (_, re) = _time(lambda: clean_with_eigh(R, MDL), trials)
            rows.append(BenchRow(M, d, tq, te, rq.d_hat, re.d_hat, rq.full_eigh_calls))
    return rows
