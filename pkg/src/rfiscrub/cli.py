"""Command-line entry point: ``rfiscrub <subcommand> ...``.

Configuration precedence, lowest to highest: built-in defaults, the
``--config`` key=value file, the ``RFI_SCRUB_SEED`` environment variable
(seed only), explicit command-line flags.

Every command exits 0 when no band reported an error; otherwise it exits 1
and prints a JSON error summary on stderr. Usage and configuration errors
exit 2, also with a JSON summary.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import covio
from .beamform import (
    SkyDirection,
    iterative_sinr_clean,
    point_spread_function,
    sinr_for_source,
    sky_image,
)
from .bench import loglog_slope, run_bench
from .detect import DetectConfig, EpsilonCalibration, calibrate_epsilon
from .errors import BandMismatch, ConfigError, RfiScrubError
from .linalg import eigh, trace
from .mitigate import MitigationReport, clean_qmam, clean_with_eigh
from .skysim import RFIEmitter, SkyScenario, exact_covariance, lwa_like_geometry, sample_covariance

METHODS = ("qmam", "combined-qmam", "mdl", "iterative-sinr", "none")
SEED_ENV = "RFI_SCRUB_SEED"
REPORT_COLUMNS = (
    "band_hz", "file", "method", "d_hat", "sinr_before_db", "sinr_after_db",
    "lanczos_steps", "full_eigh_calls", "flags", "status",
)


@dataclass(frozen=True)
class RunConfig:
    """Options shared by the processing subcommands."""

    method: str = "qmam"
    calibration: tuple = ()
    bands: tuple = ()  # empty: every input band
    geometry: str = ""
    source: tuple = ()  # (dec_deg, ra_hours)
    m_max: int = 0  # 0: automatic
    reorthogonalize: bool = True
    seed: int = 20130430
    tau_phi: float = 0.01
    guard: int = 2
    floor: int = 0
    tie_db: float = 0.0
    decl_min: float = -30.0
    decl_max: float = 90.0
    decl_step: float = 1.0
    ra_step_hours: float = 0.25
    out_dir: str = "."
    jobs: int = 1

    def validate(self) -> "RunConfig":
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {', '.join(METHODS)}, got {self.method!r}")
        if self.source and len(self.source) != 2:
            raise ConfigError("source must be 'dec_deg,ra_hours'")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.decl_step <= 0 or self.decl_max < self.decl_min:
            raise ConfigError("bad declination grid")
        return self

    def require_method_inputs(self) -> "RunConfig":
        """Check the fields the selected method cannot run without."""
        if self.method in ("qmam", "combined-qmam") and not self.calibration:
            raise ConfigError(f"method {self.method} requires --calibration")
        if self.method == "iterative-sinr" and not (self.geometry and self.source):
            raise ConfigError("method iterative-sinr requires --geometry and --source")
        return self

    def detect_config(self) -> DetectConfig:
        return DetectConfig(
            m_max=self.m_max or None,
            reorthogonalize=self.reorthogonalize,
            start_seed=self.seed,
            tau_phi=self.tau_phi,
            guard=self.guard,
            floor=self.floor,
        )

    def decl_grid(self) -> np.ndarray:
        n = int(round((self.decl_max - self.decl_min) / self.decl_step)) + 1
        return self.decl_min + self.decl_step * np.arange(n)

    def ra_grid(self) -> np.ndarray:
        n = int(round(24.0 / self.ra_step_hours))
        return np.arange(n) * self.ra_step_hours * np.pi / 12.0

    def sky_source(self):
        return SkyDirection.from_degrees(*self.source) if self.source else None


def _bool(v: str) -> bool:
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _floats(v) -> tuple:
    if isinstance(v, (tuple, list)):
        return tuple(float(x) for x in v)
    return tuple(float(x) for x in str(v).split(",") if x.strip())


def _strs(v) -> tuple:
    if isinstance(v, (tuple, list)):
        return tuple(str(x) for x in v)
    return tuple(x.strip() for x in str(v).split(",") if x.strip())


_CASTS = {
    "method": str, "calibration": _strs, "bands": _floats, "geometry": str, "source": _floats,
    "m_max": int, "reorthogonalize": _bool, "seed": int, "tau_phi": float, "guard": int,
    "floor": int, "tie_db": float, "decl_min": float, "decl_max": float, "decl_step": float,
    "ra_step_hours": float, "out_dir": str, "jobs": int,
}


def load_run_config(config_path=None, env=None, overrides=None) -> RunConfig:
    """Merge defaults, config file, environment and flag overrides."""
    values = {}
    if config_path:
        kv = covio.parse_key_values(Path(config_path).read_text(encoding="utf-8"), str(config_path))
        for k, v in kv.items():
            if k not in _CASTS:
                raise ConfigError(f"{config_path}: unknown key {k!r}")
            values[k] = v
    env = os.environ if env is None else env
    if env.get(SEED_ENV):
        values["seed"] = env[SEED_ENV]
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = v
    kw = {}
    for k, v in values.items():
        try:
            kw[k] = _CASTS[k](v)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {k!r}: {exc}") from None
    return RunConfig(**kw).validate()


# ---------------------------------------------------------------- helpers

def _band_tag(freq_hz: float) -> str:
    return f"{freq_hz / 1e6:.6g}MHz"


def _derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def _select_calibration(cals, freq_hz):
    for c in cals:
        if abs(c.freq_hz - freq_hz) <= 1e-6 * max(1.0, abs(freq_hz)):
            return c
    raise BandMismatch(f"no calibration for band {freq_hz} Hz")


def clean_one(R, cfg: RunConfig, cals=(), geom=None):
    """Apply the configured method to one band; returns ``(R_d, report)``."""
    if cfg.method == "none":
        return R, MitigationReport(0, "none", 0.0, trace(R))
    if cfg.method in ("qmam", "combined-qmam"):
        cal = _select_calibration(cals, R.freq_hz)
        return clean_qmam(R, cal, cfg.detect_config())
    if cfg.method == "mdl":
        return clean_with_eigh(R, "MDL")
    grid = cfg.decl_grid()
    return iterative_sinr_clean(R, geom, cfg.sky_source(), grid, tie_db=cfg.tie_db)


def _sinr_or_nan(R, geom, src, grid):
    if geom is None or src is None:
        return float("nan")
    try:
        return sinr_for_source(R, geom, src, grid)
    except RfiScrubError:
        return float("nan")


def _load_calibrations(cfg: RunConfig):
    cals = [covio.read_calibration(p) for p in cfg.calibration]
    if cfg.method == "combined-qmam":
        by_band = {}
        for c in cals:
            by_band.setdefault(round(c.freq_hz), []).append(c)
        cals = [EpsilonCalibration.combine(v) for _, v in sorted(by_band.items())]
    return cals


def _emit_errors(errors) -> int:
    if not errors:
        return 0
    print(json.dumps({"status": "error", "errors": errors}, sort_keys=True), file=sys.stderr)
    return 1


def _map(fn, items, jobs):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- commands

def cmd_simulate(args, cfg: RunConfig) -> int:
    sf = covio.read_scenario(args.scenario)
    seed = cfg.seed if args.seed_from_config else sf.seed
    if os.environ.get(SEED_ENV):
        seed = int(os.environ[SEED_ENV])
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    geom = lwa_like_geometry(sf.antennas, seed=sf.geometry_seed, latitude_deg=sf.latitude_deg)
    covio.write_geometry(out / "geometry.csv", geom)
    lst = sf.lst_hours * 3600.0
    rfi = tuple(
        RFIEmitter(np.radians(az), np.radians(el), sf.noise_power * 10 ** (inr / 10))
        for az, el, inr in sf.rfi
    )
    sources = tuple((SkyDirection.from_degrees(dec, ra, sf.lst_hours), q) for dec, ra, q in sf.sources)
    bands = sorted(sf.freqs_hz)
    if cfg.bands:
        bands = [f for f in bands if any(abs(f - b) < 1e-6 * f for b in cfg.bands)]

    def one(item):
        k, f = item
        sc = SkyScenario(geom, sources, rfi, sf.noise_power, f, lst, seed=seed, rfi_kind=sf.rfi_kind)
        tag = _band_tag(f)
        truth = exact_covariance(sc)
        obs = sample_covariance(sc, sf.samples, _derive_seed(seed, k, 1))
        ref = sample_covariance(sc.without_rfi(), sf.samples, _derive_seed(seed, k, 2))
        covio.write_covariance(out / f"obs_{tag}.rcov", obs)
        covio.write_covariance(out / f"ref_{tag}.rcov", ref)
        covio.write_covariance(out / f"exact_{tag}.rcov", truth.R_exact)
        vals = eigh(truth.R_exact).values
        covio.write_truth(out / f"obs_{tag}.truth.txt", truth.d_true, f, vals)
        covio.write_truth(out / f"ref_{tag}.truth.txt", 0, f, ())
        return tag

    tags = _map(one, list(enumerate(bands)), cfg.jobs)
    print(f"simulated {len(tags)} band(s) into {out}")
    return 0


def cmd_calibrate(args, cfg: RunConfig) -> int:
    geom = covio.read_geometry(cfg.geometry) if cfg.geometry else None
    cals = []
    for path in args.references:
        R = covio.read_covariance(path)
        if args.d_ref is not None:
            d_ref = args.d_ref
        elif args.d_ref_source == "truth":
            truth = Path(str(path)[: -len(".rcov")] + ".truth.txt") if str(path).endswith(".rcov") else None
            if truth is None or not truth.exists():
                raise ConfigError(f"no truth sidecar for {path}; pass --d-ref")
            d_ref = covio.read_truth(truth)["d_true"]
        else:
            if geom is None or not cfg.source:
                raise ConfigError("d-ref-source iterative-sinr needs --geometry and --source")
            _, rep = iterative_sinr_clean(R, geom, cfg.sky_source(), cfg.decl_grid(), tie_db=cfg.tie_db)
            d_ref = rep.d_hat
        cals.append(calibrate_epsilon(R, d_ref))
    combined = EpsilonCalibration.combine(cals)
    covio.write_calibration(args.out, combined)
    print(f"epsilon={combined.epsilon!r} from {len(cals)} reference(s)")
    return 0


def _clean_band(path, cfg, cals, geom):
    row = {"file": Path(path).name, "method": cfg.method, "status": "ok"}
    try:
        R = covio.read_covariance(path)
        row["band_hz"] = float(R.freq_hz)
        src, grid = cfg.sky_source(), cfg.decl_grid()
        row["sinr_before_db"] = _sinr_or_nan(R, geom, src, grid)
        Rd, rep = clean_one(R, cfg, cals, geom)
        row.update(
            d_hat=rep.d_hat,
            sinr_after_db=_sinr_or_nan(Rd, geom, src, grid),
            lanczos_steps=rep.lanczos_steps,
            full_eigh_calls=rep.full_eigh_calls,
            flags=";".join(rep.flags),
        )
        out = Path(cfg.out_dir) / (Path(path).stem + f".{cfg.method}.rcov")
        covio.write_covariance(out, Rd, flags=covio.FLAG_CLEANED if cfg.method != "none" else 0)
        return row, rep.wall_time_ns, None
    except RfiScrubError as exc:
        row["status"] = type(exc).__name__
        return row, 0, {"file": str(path), "error": type(exc).__name__, "message": str(exc)}


def cmd_clean(args, cfg: RunConfig) -> int:
    cfg.require_method_inputs()
    cals = _load_calibrations(cfg)
    geom = covio.read_geometry(cfg.geometry) if cfg.geometry else None
    Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
    results = _map(lambda p: _clean_band(p, cfg, cals, geom), list(args.inputs), cfg.jobs)
    results.sort(key=lambda r: (r[0].get("band_hz", float("inf")), r[0]["file"]))
    rows = [r for r, _, _ in results]
    covio.write_table(Path(cfg.out_dir) / "report.csv", REPORT_COLUMNS, rows)
    # wall times vary run to run, so they live apart from the reproducible report
    covio.write_table(
        Path(cfg.out_dir) / "timing.csv", ("file", "wall_time_ns"),
        [{"file": r["file"], "wall_time_ns": t} for r, t, _ in results],
    )
    for r in rows:
        print(",".join(covio.format_cell(r.get(c, "")) for c in REPORT_COLUMNS))
    return _emit_errors([e for _, _, e in results if e])


def cmd_sinr_curve(args, cfg: RunConfig) -> int:
    if not (cfg.geometry and cfg.source):
        raise ConfigError("sinr-curve needs --geometry and --source")
    geom = covio.read_geometry(cfg.geometry)
    methods = _strs(args.methods)
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}")
    src, grid = cfg.sky_source(), cfg.decl_grid()
    bands = sorted((covio.read_covariance(p) for p in args.inputs), key=lambda R: R.freq_hz)
    rows, errors = [], []
    per_method = {m: [] for m in methods}
    oracle = []
    for R in bands:
        _, orep = iterative_sinr_clean(R, geom, src, grid, tie_db=cfg.tie_db)
        best = max((s for _, s in orep.sinr_curve if np.isfinite(s)), default=float("nan"))
        oracle.append(best)
        for m in methods:
            mcfg = replace(cfg, method=m)
            if m in ("qmam", "combined-qmam") and not cfg.calibration:
                raise ConfigError(f"method {m} requires --calibration")
            cals = _load_calibrations(mcfg) if m in ("qmam", "combined-qmam") else ()
            try:
                Rd, rep = clean_one(R, mcfg, cals, geom)
                s = _sinr_or_nan(Rd, geom, src, grid)
                rows.append({"freq_hz": float(R.freq_hz), "method": m, "d_hat": rep.d_hat, "sinr_db": s})
            except RfiScrubError as exc:
                s = float("nan")
                rows.append({"freq_hz": float(R.freq_hz), "method": m, "d_hat": "", "sinr_db": s})
                errors.append({"band_hz": float(R.freq_hz), "method": m, "error": type(exc).__name__,
                               "message": str(exc)})
            per_method[m].append(s)
    covio.write_table(args.out, ("freq_hz", "method", "d_hat", "sinr_db"), rows)
    summary = []
    for m in methods:
        diff = np.array(per_method[m]) - np.array(oracle)
        ok = np.isfinite(diff)
        mse = float(np.mean(diff[ok] ** 2)) if ok.any() else float("nan")
        summary.append({"method": m, "mse_vs_oracle_db2": mse, "bands": int(ok.sum())})
    covio.write_table(str(args.out) + ".summary.csv", ("method", "mse_vs_oracle_db2", "bands"), summary)
    return _emit_errors(errors)


def cmd_bench(args, cfg: RunConfig) -> int:
    sizes = tuple(int(x) for x in _strs(args.sizes))
    rows = run_bench(sizes, args.d, args.trials, seed=cfg.seed % (2**31), config=cfg.detect_config())
    table = [
        {"M": r.M, "d": r.d, "qmam_s": r.qmam_s, "ed_s": r.ed_s, "ratio": r.qmam_s / r.ed_s,
         "qmam_d_hat": r.qmam_d_hat, "ed_d_hat": r.ed_d_hat, "qmam_full_eigh_calls": r.qmam_eigh_calls}
        for r in rows
    ]
    cols = ("M", "d", "qmam_s", "ed_s", "ratio", "qmam_d_hat", "ed_d_hat", "qmam_full_eigh_calls")
    if args.out:
        covio.write_table(args.out, cols, table)
    for r in table:
        print(",".join(covio.format_cell(r[c]) for c in cols))
    if len(rows) >= 2:
        Ms = [r.M for r in rows]
        print(f"slope_qmam={loglog_slope(Ms, [r.qmam_s for r in rows]):.3f}")
        print(f"slope_ed={loglog_slope(Ms, [r.ed_s for r in rows]):.3f}")
    return 0


def cmd_image(args, cfg: RunConfig) -> int:
    if not cfg.geometry:
        raise ConfigError("image needs --geometry")
    cfg.require_method_inputs()
    geom = covio.read_geometry(cfg.geometry)
    R = covio.read_covariance(args.input)
    cals = _load_calibrations(cfg) if cfg.method in ("qmam", "combined-qmam") else ()
    Rd, rep = clean_one(R, cfg, cals, geom)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dec, ra = cfg.decl_grid(), cfg.ra_grid()
    stem = Path(args.input).stem
    for label, M in (("before", R), ("after", Rd)):
        img = sky_image(M, geom, ra, dec, normalize=args.normalize)
        covio.write_image(out / f"{stem}.{label}.txt", img, dec, ra, R.freq_hz, label)
    print(f"method={cfg.method} d_hat={rep.d_hat} full_eigh_calls={rep.full_eigh_calls}")
    return 0


def cmd_psf(args, cfg: RunConfig) -> int:
    if not (cfg.geometry and cfg.source):
        raise ConfigError("psf needs --geometry and --source")
    geom = covio.read_geometry(cfg.geometry)
    dec, ra_h = cfg.source
    src = SkyDirection.from_degrees(dec, ra_h, ra_h)
    scan = point_spread_function(geom, src, cfg.decl_grid(), args.freq)
    covio.write_drift_scan(args.out, scan)
    return 0


# ---------------------------------------------------------------- parser

def _add_common(p):
    p.add_argument("--config", help="key=value configuration file")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--calibration", action="append", help="calibration file (repeatable)")
    p.add_argument("--bands", help="comma list of band centre frequencies (Hz)")
    p.add_argument("--geometry", help="array geometry CSV")
    p.add_argument("--source", help="reference source as 'dec_deg,ra_hours'")
    p.add_argument("--m-max", dest="m_max", type=int)
    p.add_argument("--no-reorth", dest="reorthogonalize", action="store_const", const=False)
    p.add_argument("--seed", type=int)
    p.add_argument("--tau-phi", dest="tau_phi", type=float)
    p.add_argument("--guard", type=int)
    p.add_argument("--floor", type=int, choices=(0, 1))
    p.add_argument("--tie-db", dest="tie_db", type=float)
    p.add_argument("--decl-min", dest="decl_min", type=float)
    p.add_argument("--decl-max", dest="decl_max", type=float)
    p.add_argument("--decl-step", dest="decl_step", type=float)
    p.add_argument("--ra-step-hours", dest="ra_step_hours", type=float)
    p.add_argument("-o", "--out-dir", dest="out_dir")
    p.add_argument("--jobs", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rfiscrub", description="RFI subspace removal for array covariances")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="synthesize covariance files from a scenario file")
    _add_common(p)
    p.add_argument("scenario")
    p.add_argument("--seed-from-config", action="store_true",
                   help="use the run seed instead of the scenario's own seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", help="estimate epsilon from reference covariances")
    _add_common(p)
    p.add_argument("references", nargs="+")
    p.add_argument("--d-ref-source", choices=("truth", "iterative-sinr"), default="truth")
    p.add_argument("--d-ref", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("clean", help="remove RFI subspaces band by band")
    _add_common(p)
    p.add_argument("inputs", nargs="+")
    p.set_defaults(func=cmd_clean)

    p = sub.add_parser("sinr-curve", help="SINR per band and method")
    _add_common(p)
    p.add_argument("inputs", nargs="+")
    p.add_argument("--methods", default="none,qmam,mdl,iterative-sinr")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sinr_curve)

    p = sub.add_parser("bench", help="time QMAM against full eigendecomposition")
    _add_common(p)
    p.add_argument("--sizes", default="64,128,256,512")
    p.add_argument("-d", type=int, default=3)
    p.add_argument("--trials", type=int, default=11)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("image", help="sky images before and after cleaning")
    _add_common(p)
    p.add_argument("input")
    p.add_argument("--normalize", action="store_true")
    p.set_defaults(func=cmd_image)

    p = sub.add_parser("psf", help="ideal point-spread drift scan")
    _add_common(p)
    p.add_argument("--freq", type=float, default=41e6)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_psf)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides = {f.name: getattr(args, f.name, None) for f in fields(RunConfig)}
    try:
        cfg = load_run_config(args.config, overrides=overrides)
        return args.func(args, cfg)
    except (RfiScrubError, OSError) as exc:
        print(json.dumps({"status": "error", "errors": [{"error": type(exc).__name__, "message": str(exc)}]}),
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
