"""Command-line front end.

Every subcommand reads a YAML config (``--config``), applies flag overrides,
and writes tables as CSV (``# key=value`` metadata, header, rows) or JSON.
Exit codes: 0 success, 1 self-test failure, 2 bad config or input data,
3 physically infeasible parameters.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .calibration import (CountRecord, VisibilityRecord, fit_efficiencies, fit_overlap,
                          model_rates, raw_visibility)
from .config import ConfigError, RunConfig, load_config
from .elements import InfeasiblePhaseError, db_to_loss_fraction, phase_bound_min_phi
from .experiments import (dip_fwhm, exceeds_metrology_threshold, fringe_period_ratio,
                          hom_delay_scan, nominal_visibility, single_photon_fringe,
                          two_photon_fringe, visibility, visibility_vs_pair_probability)

log = logging.getLogger("mmisim")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 1, 2, 3


class InputDataError(ValueError):
    pass


@dataclass
class Table:
    columns: list[str]
    rows: list[Sequence]
    metadata: dict = field(default_factory=dict)
    suffix: str = ""


# --------------------------------------------------------------------------
# data files
# --------------------------------------------------------------------------

COUNT_COLUMNS = ["intensity", "c1", "c2", "cc"]
VISIBILITY_COLUMNS = ["xi_sq", "v", "sigma_v"]


def _data_text(path: str | None, bundled: str) -> tuple[str, str]:
    if path is None:
        ref = resources.files("mmisim") / "data" / bundled
        return ref.read_text(), f"bundled:{bundled}"
    try:
        return Path(path).read_text(), path
    except OSError as exc:
        raise InputDataError(f"cannot read {path}: {exc.strerror}") from None


def _read_rows(text: str, columns: list[str], name: str, optional=()) -> list[dict]:
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.DictReader(lines)
    header = [h.strip() for h in (reader.fieldnames or [])]
    required = [c for c in columns if c not in optional]
    if not set(required) <= set(header) or not set(header) <= set(columns):
        raise InputDataError(f"{name}: expected columns {','.join(columns)}, got {','.join(header)}")
    out = []
    for k, row in enumerate(reader, start=2):
        parsed = {}
        for key, value in row.items():
            key = key.strip()
            value = (value or "").strip()
            if value == "" and key in optional:
                parsed[key] = None
                continue
            try:
                parsed[key] = float(value)
            except ValueError:
                raise InputDataError(f"{name} data row {k - 1}: {key}={value!r} is not a number") from None
        out.append(parsed)
    if not out:
        raise InputDataError(f"{name}: no data rows")
    return out


def read_count_records(path: str | None) -> tuple[list[CountRecord], str]:
    text, name = _data_text(path, "counts_fixture.csv")
    try:
        return [CountRecord(**r) for r in _read_rows(text, COUNT_COLUMNS, name)], name
    except ValueError as exc:
        raise InputDataError(f"{name}: {exc}") from None


def read_visibility_records(path: str | None) -> tuple[list[VisibilityRecord], str]:
    text, name = _data_text(path, "visibility_fixture.csv")
    try:
        rows = _read_rows(text, VISIBILITY_COLUMNS, name, optional=("sigma_v",))
        return [VisibilityRecord(r["xi_sq"], r["v"], r.get("sigma_v")) for r in rows], name
    except ValueError as exc:
        raise InputDataError(f"{name}: {exc}") from None


# --------------------------------------------------------------------------
# experiments
# --------------------------------------------------------------------------

def _deficit(xi_sq_max: float, n_max_pairs: int) -> float:
    return float(xi_sq_max) ** (n_max_pairs + 1)


def run_hom_dip(cfg: RunConfig) -> list[Table]:
    h = cfg.hom_dip
    mmi = cfg.mmi_params()
    tau = np.linspace(-h.tau_max, h.tau_max, h.points)
    scan = hom_delay_scan(tau, h.xi, cfg.loss_set(), mmi, cfg.alpha_ov, h.tau_c, cfg.n_max_pairs)
    rows = [(t, a, c, c / scan.p_d) for t, a, c in zip(scan.tau, scan.overlap, scan.coincidence)]
    meta = {"p_i": scan.p_i, "p_d": scan.p_d, "fwhm_s": dip_fwhm(h.tau_c),
            "dip_visibility": visibility(scan.coincidence.min(), scan.p_d),
            "truncation_deficit": _deficit(h.xi ** 2, cfg.n_max_pairs)}
    return [Table(["tau_s", "overlap", "p_coincidence", "normalized"], rows, meta)]


def run_vis_vs_power(cfg: RunConfig) -> list[Table]:
    v = cfg.vis_vs_power
    mmi = cfg.mmi_params()
    xi_sq = np.linspace(v.xi_sq_start, v.xi_sq_stop, v.points)
    curve = visibility_vs_pair_probability(np.sqrt(xi_sq), cfg.loss_set(), mmi, cfg.alpha_ov,
                                           cfg.n_max_pairs)
    rows = list(zip(curve.xi, curve.pair_probability, curve.visibility))
    meta = {"nominal_visibility": nominal_visibility(mmi, cfg.alpha_ov),
            "truncation_deficit": _deficit(v.xi_sq_stop, cfg.n_max_pairs)}
    return [Table(["xi", "pair_probability", "visibility"], rows, meta)]


def run_fringe(cfg: RunConfig) -> list[Table]:
    fr = cfg.fringe
    mmi = cfg.mmi_params()
    losses = cfg.loss_set()
    cal = cfg.phase_calibration()
    volts = np.linspace(fr.v_start, fr.v_stop, fr.points)
    single = single_photon_fringe(volts, cal, mmi, losses)
    double = two_photon_fringe(volts, cal, mmi, cfg.alpha_ov, fr.xi, losses,
                               n_max_pairs=cfg.n_max_pairs if fr.xi is not None else 1)
    try:
        ratio = fringe_period_ratio(single.phase, single.probability, double.probability)
    except ValueError:
        ratio = float("nan")
    v2 = double.visibility
    shared = {"period_ratio": ratio,
              "truncation_deficit": 0.0 if fr.xi is None else _deficit(fr.xi ** 2, cfg.n_max_pairs)}
    cols = ["voltage", "phase", "probability"]
    return [
        Table(cols, list(zip(*single)), {**shared, "visibility": single.visibility}, "_single"),
        Table(cols, list(zip(*double)), {**shared, "visibility": v2,
                                         "exceeds_threshold": exceeds_metrology_threshold(v2)}, "_two"),
    ]


def run_bound(cfg: RunConfig) -> list[Table]:
    rows = []
    for db in cfg.bound.loss_db:
        alpha = db_to_loss_fraction(db)
        if alpha >= 1.0:
            raise ConfigError(f"bound.loss_db: {db} dB loses all power")
        rows.append((db, alpha, phase_bound_min_phi(alpha)))
    return [Table(["loss_db", "alpha_loss", "phi_min_rad"], rows,
                  {"eta": cfg.bound.eta, "truncation_deficit": 0.0})]


def run_fit_counts(cfg: RunConfig) -> list[Table]:
    fc = cfg.fit_counts
    records, source = read_count_records(fc.data)
    res = fit_efficiencies(records, fc.repetition_rate, seed=cfg.seed, restarts=fc.restarts)
    if not res.converged:
        log.warning("count fit flagged as not converged: %s", res.message)
    pred = model_rates(res.eta1, res.eta2, np.array(res.xi_sq_per_power), fc.repetition_rate)
    rows = [(r.intensity, x, r.c1, p[0], r.c2, p[1], r.cc, p[2])
            for r, x, p in zip(records, res.xi_sq_per_power, pred)]
    meta = {"data": source, "eta1": res.eta1, "eta2": res.eta2, "residual": res.residual,
            "converged": res.converged, "condition_estimate": res.condition_estimate,
            "truncation_deficit": 0.0}
    cols = ["intensity", "xi_sq", "c1", "c1_fit", "c2", "c2_fit", "cc", "cc_fit"]
    return [Table(cols, rows, meta)]


def run_fit_visibility(cfg: RunConfig) -> list[Table]:
    fv = cfg.fit_visibility
    records, source = read_visibility_records(fv.data)
    mmi = cfg.mmi_params()
    losses = cfg.loss_set()
    fit = fit_overlap(records, losses, mmi, cfg.n_max_pairs, fv.bootstrap, cfg.seed)
    xi_sq = np.array([r.xi_sq for r in records])
    model = fit.alpha_ov * raw_visibility(xi_sq, losses, mmi, cfg.n_max_pairs)
    rows = [(r.xi_sq, r.v, math.nan if r.sigma_v is None else r.sigma_v, m)
            for r, m in zip(records, model)]
    meta = {"data": source, "alpha_ov": fit.alpha_ov, "v_nominal": fit.v_nominal,
            "v_nominal_halfwidth": fit.v_nominal_halfwidth, "residual": fit.residual,
            "truncation_deficit": _deficit(xi_sq.max(), cfg.n_max_pairs)}
    return [Table(["xi_sq", "v", "sigma_v", "v_model"], rows, meta)]


RUNNERS = {
    "hom-dip": run_hom_dip,
    "vis-vs-power": run_vis_vs_power,
    "fringe": run_fringe,
    "bound": run_bound,
    "fit-counts": run_fit_counts,
    "fit-visibility": run_fit_visibility,
}


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.12g" % x
    return str(x)


def _json_value(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return float("%.12g" % x) if math.isfinite(x) else None
    return x


def render(table: Table, header: dict, fmt: str) -> str:
    meta = {**header, **table.metadata}
    if fmt == "json":
        doc = {"metadata": {k: _json_value(v) for k, v in meta.items()},
               "columns": table.columns,
               "rows": [[_json_value(x) for x in row] for row in table.rows]}
        return json.dumps(doc, indent=1) + "\n"
    buf = io.StringIO()
    for k, v in meta.items():
        buf.write(f"# {k}={_fmt(v)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def _target(out: str, suffix: str, fmt: str) -> Path:
    p = Path(out)
    if not suffix:
        return p
    ext = p.suffix or f".{fmt}"
    return p.with_name(p.stem + suffix + ext)


def emit(tables: list[Table], header: dict, fmt: str, out: str | None) -> list[Path]:
    written = []
    for t in tables:
        text = render(t, header, fmt)
        if out is None:
            if t.suffix:
                sys.stdout.write(f"# table={t.suffix.lstrip('_')}\n")
            sys.stdout.write(text)
        else:
            path = _target(out, t.suffix, fmt)
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text)
            written.append(path)
    return written


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

# flag -> (dotted config path, type)
OVERRIDES = {
    "hom-dip": {"xi": ("hom_dip.xi", float), "points": ("hom_dip.points", int),
                "tau_max": ("hom_dip.tau_max", float), "alpha_ov": ("alpha_ov", float)},
    "vis-vs-power": {"xi_sq_start": ("vis_vs_power.xi_sq_start", float),
                     "xi_sq_stop": ("vis_vs_power.xi_sq_stop", float),
                     "points": ("vis_vs_power.points", int), "alpha_ov": ("alpha_ov", float)},
    "fringe": {"points": ("fringe.points", int), "xi": ("fringe.xi", float),
               "alpha_ov": ("alpha_ov", float)},
    "bound": {"loss_db": ("bound.loss_db", float)},
    "fit-counts": {"data": ("fit_counts.data", str), "restarts": ("fit_counts.restarts", int)},
    "fit-visibility": {"data": ("fit_visibility.data", str),
                       "bootstrap": ("fit_visibility.bootstrap", int)},
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--out", help="output file (stdout if omitted)")
    common.add_argument("--seed", type=int, help="seed for restarts and bootstrap")
    common.add_argument("--format", choices=("csv", "json"), help="output format")
    common.add_argument("--n-max-pairs", type=int, help="photon-pair truncation")

    parser = argparse.ArgumentParser(prog="mmisim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "hom-dip": "coincidences against relative photon delay",
        "vis-vs-power": "dip visibility against pair probability",
        "fringe": "single- and two-photon MZI fringes (two tables)",
        "bound": "minimum internal MMI phase against loss",
        "fit-counts": "fit efficiencies and squeezing to count rates",
        "fit-visibility": "fit photon overlap and extrapolate the nominal visibility",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, parents=[common], help=text)
        for flag, (_, tp) in OVERRIDES[name].items():
            opt = "--" + flag.replace("_", "-")
            if name == "bound" and flag == "loss_db":
                p.add_argument(opt, dest=flag, type=tp, nargs="+")
            else:
                p.add_argument(opt, dest=flag, type=tp)
    st = sub.add_parser("selftest", help="run the acceptance checks")
    st.add_argument("--only", type=int, nargs="+", help="criterion numbers to run")
    return parser


def _overrides(args) -> dict:
    out = {}
    for flag, (path, _) in OVERRIDES.get(args.command, {}).items():
        value = getattr(args, flag, None)
        if value is not None:
            out[path] = value
    for flag, path in (("seed", "seed"), ("format", "output.format"), ("out", "output.path"),
                       ("n_max_pairs", "n_max_pairs")):
        value = getattr(args, flag, None)
        if value is not None:
            out[path] = value
    return out


def run_selftest(only=None) -> int:
    from .acceptance import run_all
    results = run_all(only)
    for r in results:
        print(r.line())
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed")
    return EXIT_OK if passed == len(results) else EXIT_FAIL


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    if args.command == "selftest":
        return run_selftest(args.only)
    try:
        cfg = load_config(args.config, _overrides(args))
        tables = RUNNERS[args.command](cfg)
    except (ConfigError, InputDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasiblePhaseError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    header = {"command": args.command, "version": __version__, "config_hash": cfg.digest(),
              "seed": cfg.seed, "n_max_pairs": cfg.n_max_pairs}
    for path in emit(tables, header, cfg.output.format, cfg.output.path):
        log.info("wrote %s", path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
