"""Dip visibility against pair probability per pulse, for a few coupler phases.

Writes a CSV with one visibility column per phase.
"""
import argparse
import csv

import numpy as np

from mmisim.elements import lossy_mmi, minimum_loss_for_phase
from mmisim.experiments import visibility_vs_pair_probability


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha-ov", type=float, default=0.955)
    ap.add_argument("--phi", type=float, nargs="+", default=[np.pi, 3.047, 2.74])
    ap.add_argument("--points", type=int, default=40)
    ap.add_argument("--out", default="visibility_vs_pair_probability.csv")
    args = ap.parse_args()

    xi = np.sqrt(np.linspace(0.0, 0.3, args.points))
    cols = []
    for phi in args.phi:
        mmi = lossy_mmi(0.5, minimum_loss_for_phase(phi), phi)[1]
        cols.append(visibility_vs_pair_probability(xi, mmi=mmi, alpha_ov=args.alpha_ov).visibility)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["pair_probability"] + [f"V_phi_{p:.4g}" for p in args.phi])
        for k, x in enumerate(xi ** 2):
            w.writerow(["%.12g" % x] + ["%.12g" % c[k] for c in cols])
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
