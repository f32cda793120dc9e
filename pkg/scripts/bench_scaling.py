"""Timing of the Lanczos/QMAM pipeline against full eigendecomposition.

    python3 scripts/bench_scaling.py --sizes 64,128,256,512 --trials 11
"""

import argparse
import csv

from rfiscrub.bench import loglog_slope, run_bench


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="64,128,256,512")
    ap.add_argument("-d", type=int, default=3)
    ap.add_argument("--trials", type=int, default=11)
    ap.add_argument("--out", default="bench.csv")
    args = ap.parse_args()

    sizes = tuple(int(s) for s in args.sizes.split(","))
    rows = run_bench(sizes, d=args.d, trials=args.trials)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("M", "d", "qmam_s", "ed_s", "qmam_d_hat", "ed_d_hat"))
        for r in rows:
            w.writerow((r.M, r.d, f"{r.qmam_s:.6g}", f"{r.ed_s:.6g}", r.qmam_d_hat, r.ed_d_hat))
            print(f"M={r.M:4d}  qmam {r.qmam_s * 1e3:8.2f} ms  ed {r.ed_s * 1e3:8.2f} ms  ratio {r.qmam_s / r.ed_s:.3f}")
    Ms = [r.M for r in rows]
    print(f"slope_qmam={loglog_slope(Ms, [r.qmam_s for r in rows]):.3f}")
    print(f"slope_ed={loglog_slope(Ms, [r.ed_s for r in rows]):.3f}")


if __name__ == "__main__":
    main()
