"""Run configuration: a YAML file parsed into dataclasses with strict keys.

Every error names the offending field and, when it came from a file, the
line it sits on.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .elements import LossyMmiParams, db_to_loss_fraction, lossy_mmi, minimum_loss_for_phase
from .experiments import DEFAULT_PHASE_K, DEFAULT_TAU_C, LossChannelSet, PhaseCalibration
from .source import REPETITION_RATE


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# schema
# --------------------------------------------------------------------------

@dataclass
class MmiConfig:
    """Lossy coupler. With neither ``alpha_loss`` nor ``loss_db`` given, the
    smallest loss compatible with ``phi`` is used."""
    phi: float = math.pi
    eta: float = 0.5
    alpha_loss: float | None = None
    loss_db: float | None = None


@dataclass
class LossConfig:
    eta_A: float = 1.0
    eta_B: float = 1.0
    eta_C: float = 1.0
    eta_D: float = 1.0


@dataclass
class HomDipConfig:
    xi: float = 0.1
    tau_c: float = DEFAULT_TAU_C
    tau_max: float = 3 * DEFAULT_TAU_C
    points: int = 121


@dataclass
class VisVsPowerConfig:
    xi_sq_start: float = 0.01
    xi_sq_stop: float = 0.3
    points: int = 10


@dataclass
class FringeConfig:
    v_start: float = 0.0
    v_stop: float = 4.5
    points: int = 451
    k: float = DEFAULT_PHASE_K
    phi0: float = 0.0
    xi: float | None = None


@dataclass
class BoundConfig:
    loss_db: list[float] = field(default_factory=lambda: [0.2, 0.5, 0.8])
    eta: float = 0.5


@dataclass
class FitCountsConfig:
    data: str | None = None
    repetition_rate: float = REPETITION_RATE
    restarts: int = 5


@dataclass
class FitVisibilityConfig:
    data: str | None = None
    bootstrap: int = 200


@dataclass
class OutputConfig:
    path: str | None = None
    format: str = "csv"


@dataclass
class RunConfig:
    seed: int = 0
    n_max_pairs: int = 9
    alpha_ov: float = 1.0
    mmi: MmiConfig | None = None
    losses: LossConfig = field(default_factory=LossConfig)
    hom_dip: HomDipConfig = field(default_factory=HomDipConfig)
    vis_vs_power: VisVsPowerConfig = field(default_factory=VisVsPowerConfig)
    fringe: FringeConfig = field(default_factory=FringeConfig)
    bound: BoundConfig = field(default_factory=BoundConfig)
    fit_counts: FitCountsConfig = field(default_factory=FitCountsConfig)
    fit_visibility: FitVisibilityConfig = field(default_factory=FitVisibilityConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    # domain objects ------------------------------------------------------

    def mmi_params(self) -> LossyMmiParams | None:
        """Coupler parameters; raises InfeasiblePhaseError off the bound."""
        m = self.mmi
        if m is None:
            return None
        if m.alpha_loss is not None:
            alpha = m.alpha_loss
        elif m.loss_db is not None:
            alpha = db_to_loss_fraction(m.loss_db)
        else:
            alpha = minimum_loss_for_phase(m.phi)
        return lossy_mmi(m.eta, alpha, m.phi)[1]

    def loss_set(self) -> LossChannelSet:
        return LossChannelSet(**dataclasses.asdict(self.losses))

    def phase_calibration(self) -> PhaseCalibration:
        return PhaseCalibration(self.fringe.k, self.fringe.phi0)

    def digest(self) -> str:
        """Hash of every physical setting (output location excluded)."""
        d = dataclasses.asdict(self)
        d.pop("output")
        blob = json.dumps(d, sort_keys=True, default=repr)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


# --------------------------------------------------------------------------
# parsing
# --------------------------------------------------------------------------

class _Mapping(dict):
    """dict that remembers the source line of every key."""
    lines: dict

    def line(self, key) -> int | None:
        return getattr(self, "lines", {}).get(key)


class _Loader(yaml.SafeLoader):
    pass


def _construct_mapping(loader, node):
    loader.flatten_mapping(node)
    out = _Mapping()
    out.lines = {}
    for key_node, value_node in node.value:
        key = loader.construct_object(key_node, deep=True)
        line = key_node.start_mark.line + 1
        if key in out:
            raise ConfigError(f"line {line}: duplicate key {key!r}")
        out[key] = loader.construct_object(value_node, deep=True)
        out.lines[key] = line
    return out


_Loader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)


def _where(path: str, line: int | None) -> str:
    return f"line {line}: {path}" if line else path


def _coerce(value: Any, tp, path: str, line: int | None):
    origin = typing.get_origin(tp)
    if origin is typing.Union or type(tp).__name__ == "UnionType":
        args = typing.get_args(tp)
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(value, inner[0], path, line)
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"{_where(path, line)}: expected a mapping")
        return _build(tp, value, path)
    if origin is list:
        if not isinstance(value, list):
            raise ConfigError(f"{_where(path, line)}: expected a list")
        (item,) = typing.get_args(tp)
        return [_coerce(v, item, f"{path}[{k}]", line) for k, v in enumerate(value)]
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{_where(path, line)}: expected a number, got {value!r}")
        return float(value)
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{_where(path, line)}: expected an integer, got {value!r}")
        return value
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{_where(path, line)}: expected a string, got {value!r}")
        return value
    raise TypeError(f"unsupported field type {tp}")


def _build(cls, data: dict, prefix: str = ""):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    line_of = data.line if isinstance(data, _Mapping) else (lambda k: None)
    kwargs = {}
    for key, value in data.items():
        path = f"{prefix}.{key}" if prefix else str(key)
        if key not in names:
            raise ConfigError(f"{_where(path, line_of(key))}: unknown key "
                              f"(allowed: {', '.join(sorted(names))})")
        kwargs[key] = _coerce(value, hints[key], path, line_of(key))
    return cls(**kwargs)


def parse_config(text: str, overrides: dict | None = None) -> RunConfig:
    """Parse YAML text, apply dotted-path ``overrides`` and validate."""
    try:
        raw = yaml.load(text, Loader=_Loader) if text.strip() else None
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML: {exc}") from None
    if raw is None:
        raw = _Mapping()
    if not isinstance(raw, dict):
        raise ConfigError("top level of the config must be a mapping")
    for dotted, value in (overrides or {}).items():
        node = raw
        *parents, leaf = dotted.split(".")
        for p in parents:
            if node.get(p) is None:
                node[p] = {}
            node = node[p]
        node[leaf] = value
    cfg = _build(RunConfig, raw)
    validate(cfg)
    return cfg


def load_config(path: str | Path | None, overrides: dict | None = None) -> RunConfig:
    text = "" if path is None else Path(path).read_text()
    try:
        return parse_config(text, overrides)
    except ConfigError as exc:
        where = f"{path}: " if path else ""
        raise ConfigError(f"{where}{exc}") from None


def _check(ok: bool, path: str, message: str):
    if not ok:
        raise ConfigError(f"{path}: {message}")


def validate(cfg: RunConfig) -> None:
    """Physical boxes and grid sanity. The MMI phase bound is left to the
    run, which reports it as infeasible physics rather than a config error."""
    _check(cfg.seed >= 0, "seed", "must be >= 0")
    _check(0 <= cfg.n_max_pairs <= 20, "n_max_pairs", "must be in [0, 20]")
    _check(0.0 <= cfg.alpha_ov <= 1.0, "alpha_ov", "must be in [0, 1]")
    try:
        cfg.loss_set()
    except ValueError as exc:
        raise ConfigError(f"losses: {exc}") from None
    if cfg.mmi is not None:
        m = cfg.mmi
        _check(0.0 <= m.eta <= 1.0, "mmi.eta", "must be in [0, 1]")
        _check(m.alpha_loss is None or m.loss_db is None, "mmi",
               "give alpha_loss or loss_db, not both")
        _check(m.alpha_loss is None or 0.0 <= m.alpha_loss < 1.0, "mmi.alpha_loss",
               "must be in [0, 1)")
        _check(m.loss_db is None or m.loss_db >= 0.0, "mmi.loss_db", "must be >= 0")
    h = cfg.hom_dip
    _check(0.0 <= h.xi < 1.0, "hom_dip.xi", "must be in [0, 1)")
    _check(h.tau_c > 0 and h.tau_max > 0, "hom_dip", "tau_c and tau_max must be positive")
    _check(h.points >= 2, "hom_dip.points", "must be >= 2")
    v = cfg.vis_vs_power
    _check(0.0 <= v.xi_sq_start <= v.xi_sq_stop < 1.0, "vis_vs_power",
           "need 0 <= xi_sq_start <= xi_sq_stop < 1")
    _check(v.points >= 1, "vis_vs_power.points", "must be >= 1")
    fr = cfg.fringe
    _check(fr.points >= 2 and fr.v_stop > fr.v_start, "fringe", "need points >= 2 and v_stop > v_start")
    _check(fr.k >= 0, "fringe.k", "must be >= 0")
    _check(fr.xi is None or 0.0 <= fr.xi < 1.0, "fringe.xi", "must be in [0, 1)")
    _check(len(cfg.bound.loss_db) > 0 and all(x >= 0 for x in cfg.bound.loss_db),
           "bound.loss_db", "need a non-empty list of non-negative values")
    _check(0.0 <= cfg.bound.eta <= 1.0, "bound.eta", "must be in [0, 1]")
    _check(cfg.fit_counts.repetition_rate > 0, "fit_counts.repetition_rate", "must be positive")
    _check(cfg.fit_counts.restarts >= 0, "fit_counts.restarts", "must be >= 0")
    _check(cfg.fit_visibility.bootstrap >= 0, "fit_visibility.bootstrap", "must be >= 0")
    _check(cfg.output.format in ("csv", "json"), "output.format", "must be csv or json")
