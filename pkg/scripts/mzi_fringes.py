"""Single- and two-photon fringes against heater voltage, with the FFT
period ratio and the two-photon visibility against the metrology threshold."""
import argparse
import csv

import numpy as np

from mmisim.experiments import (PhaseCalibration, exceeds_metrology_threshold,
                                fringe_period_ratio, overlap_for_fringe_visibility,
                                single_photon_fringe, two_photon_fringe)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--target-visibility", type=float, default=0.818)
    ap.add_argument("--points", type=int, default=451)
    ap.add_argument("--out", default="mzi_fringes.csv")
    args = ap.parse_args()

    cal = PhaseCalibration()
    volts = np.linspace(0.0, 4.5, args.points)
    alpha = overlap_for_fringe_visibility(args.target_visibility)
    single = single_photon_fringe(volts, cal)
    double = two_photon_fringe(volts, cal, alpha_ov=alpha)
    ratio = fringe_period_ratio(single.phase, single.probability, double.probability)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["voltage", "phase", "p_single", "p_two"])
        for row in zip(volts, single.phase, single.probability, double.probability):
            w.writerow(["%.12g" % x for x in row])
    v = double.visibility
    print(f"overlap {alpha:.4f}: two-photon visibility {v:.4f}, "
          f"above 1/sqrt(2): {exceeds_metrology_threshold(v)}, period ratio {ratio:.3f}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
