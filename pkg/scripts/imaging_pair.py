"""Before/after sky images around Cas-A and Cyg-A under strong RFI.

Writes ``<prefix>.raw.txt`` and ``<prefix>.qmam.txt`` image grids and prints
the percentile rank of each source cell in both images.

    python3 scripts/imaging_pair.py --prefix image_41MHz
"""

import argparse
import math

import numpy as np

from rfiscrub import covio
from rfiscrub.beamform import SkyDirection, sky_image
from rfiscrub.detect import DetectConfig, calibrate_epsilon
from rfiscrub.mitigate import clean_qmam
from rfiscrub.skysim import RFIEmitter, SkyScenario, lwa_like_geometry, reference_pair


def rank_pct(img, i, j):
    return 100.0 * np.mean(img < img[i, j])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--prefix", default="image")
    ap.add_argument("--freq-mhz", type=float, default=41.0)
    ap.add_argument("--antennas", type=int, default=64)
    args = ap.parse_args()

    f = args.freq_mhz * 1e6
    geom = lwa_like_geometry(args.antennas, seed=1)
    lst = 21.5
    cas = SkyDirection.from_degrees(58.8, 23 + 23 / 60, lst)
    cyg = SkyDirection.from_degrees(41.0, 19 + 59 / 60, lst)
    rfi = tuple(RFIEmitter(math.radians(az), math.radians(el), 1000.0) for az, el in ((40, 3), (150, 6), (280, 2)))
    sc = SkyScenario(geom, ((cas, 1.0), (cyg, 1.0)), rfi, 1.0, f, cas.lst_seconds, seed=0)
    ref, obs = reference_pair(sc, 4096, 1, 2)
    clean, rep = clean_qmam(obs, calibrate_epsilon(ref), DetectConfig(tau_phi=0.01))
    print(f"QMAM d_hat={rep.d_hat}")

    decl = np.arange(20.0, 80.01, 1.0)
    ra = np.radians(np.arange(18.0, 25.01, 0.1) * 15.0)
    for label, R in (("raw", obs), ("qmam", clean)):
        img = sky_image(R, geom, ra, decl, f)
        covio.write_image(f"{args.prefix}.{label}.txt", img, decl, ra, f, label)
        for name, s in (("Cas-A", cas), ("Cyg-A", cyg)):
            i = int(np.argmin(np.abs(decl - math.degrees(s.declination))))
            j = int(np.argmin(np.abs(ra - s.right_ascension)))
            print(f"{label:5s} {name}: cell percentile {rank_pct(img, i, j):6.2f}")


if __name__ == "__main__":
    main()
