"""Regenerate the bundled synthetic data files used by the fit subcommands."""
import numpy as np

from mmisim.calibration import synthetic_records
from mmisim.elements import LossyMmiParams, minimum_loss_for_phase
from mmisim.experiments import LossChannelSet, hom_pair_resolved
from mmisim.source import REPETITION_RATE
from pathlib import Path

DATA = Path(__file__).resolve().parents[1] / "src" / "mmisim" / "data"

ETA1, ETA2 = 0.05, 0.15
XI_SQ = [0.005, 0.01, 0.02, 0.05, 0.1]
INTENSITY = [2.5, 5.0, 10.0, 25.0, 50.0]  # mW

PHI, ALPHA_OV, SIGMA = 2.74, 0.955, 0.005
VIS_XI_SQ = np.linspace(0.01, 0.3, 10)


def counts():
    recs = synthetic_records(ETA1, ETA2, XI_SQ, REPETITION_RATE, intensities=INTENSITY)
    lines = [f"# eta1={ETA1}", f"# eta2={ETA2}",
             "# xi_sq=" + ";".join(str(x) for x in XI_SQ),
             f"# repetition_rate={REPETITION_RATE:g}", "# noise=0",
             "intensity,c1,c2,cc"]
    lines += [f"{r.intensity:.12g},{r.c1:.12g},{r.c2:.12g},{r.cc:.12g}" for r in recs]
    (DATA / "counts_fixture.csv").write_text("\n".join(lines) + "\n")


def visibilities():
    mmi = LossyMmiParams(0.5, minimum_loss_for_phase(PHI), PHI)
    p_i, p_d = hom_pair_resolved(LossChannelSet(), mmi, 9).probabilities(VIS_XI_SQ)
    v = ALPHA_OV * (1 - p_i / p_d)
    v = v + SIGMA * np.random.default_rng(7).standard_normal(len(v))
    lines = [f"# alpha_ov={ALPHA_OV}", f"# mmi_phi={PHI}", "# mmi_alpha_loss=minimum for phi",
             f"# noise_sigma={SIGMA}", "xi_sq,v,sigma_v"]
    lines += [f"{x:.12g},{y:.12g},{SIGMA:g}" for x, y in zip(VIS_XI_SQ, v)]
    (DATA / "visibility_fixture.csv").write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    counts()
    visibilities()
