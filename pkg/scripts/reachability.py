"""Evaluate the bundled reachability configurations and the loss that
explains a given nominal visibility."""
from importlib import resources

from mmisim.calibration import scan_loss_explanations
from mmisim.cli import run_fringe, run_vis_vs_power
from mmisim.config import parse_config


def main():
    base = resources.files("mmisim") / "data" / "configs"
    dip = run_vis_vs_power(parse_config((base / "reach_dip_080.yaml").read_text()))[0]
    xi, p, v = dip.rows[0]
    print(f"dip: pair probability {p:.3f} -> visibility {v:.4f}")
    fr = run_fringe(parse_config((base / "reach_fringe_0818.yaml").read_text()))[1]
    print(f"fringe: two-photon visibility {fr.metadata['visibility']:.4f}")
    for target, alpha_ov in ((0.88, 0.955), (0.995, 1.0)):
        r = scan_loss_explanations(target, alpha_ov)
        print(f"nominal {target} at overlap {alpha_ov}: {r.loss_db:.3f} dB, phi = {r.phi:.4f}")


if __name__ == "__main__":
    main()
