"""Recover efficiencies, squeezing and photon overlap from measured data."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq, minimize
from scipy.stats import qmc

from .elements import (LossyMmiParams, loss_fraction_to_db, lossy_mmi, phase_bound_min_phi)
from .experiments import LossChannelSet, hom_pair_resolved, nominal_visibility
from .source import REPETITION_RATE, p_coincidence, p_single

log = logging.getLogger(__name__)

RATE_FLOOR = 1.0  # counts/s, relative-residual denominator floor
XI_SQ_MAX = 1.0 - 1e-9


@dataclass(frozen=True)
class CountRecord:
    intensity: float
    c1: float
    c2: float
    cc: float

    def __post_init__(self):
        if min(self.c1, self.c2, self.cc) < 0:
            raise ValueError(f"count rates must be non-negative: {self}")


@dataclass(frozen=True)
class VisibilityRecord:
    xi_sq: float
    v: float
    sigma_v: float | None = None

    def __post_init__(self):
        if not -1.0 <= self.v <= 1.0:
            raise ValueError(f"visibility must lie in [-1, 1], got {self.v}")
        if self.sigma_v is not None and self.sigma_v <= 0:
            raise ValueError(f"sigma_v must be positive, got {self.sigma_v}")
        if not 0.0 <= self.xi_sq < 1.0:
            raise ValueError(f"xi_sq must lie in [0, 1), got {self.xi_sq}")


@dataclass(frozen=True)
class FitResult:
    eta1: float
    eta2: float
    xi_sq_per_power: tuple[float, ...]
    residual: float
    converged: bool
    iterations: int
    condition_estimate: float = float("nan")
    message: str = ""


# --------------------------------------------------------------------------
# count-rate fit
# --------------------------------------------------------------------------

def model_rates(eta1: float, eta2: float, xi_sq, f: float = REPETITION_RATE) -> np.ndarray:
    """(K, 3) array of C1, C2, CC."""
    xi_sq = np.asarray(xi_sq, dtype=float)
    return f * np.stack([p_single(xi_sq, eta1), p_single(xi_sq, eta2),
                         p_coincidence(xi_sq, eta1, eta2)], axis=-1)


def _project(x: np.ndarray) -> np.ndarray:
    # box [0,1] x [0,1) plus xi^2 non-decreasing in intensity (records pre-sorted)
    y = np.clip(x, 0.0, 1.0)
    y[2:] = np.maximum.accumulate(np.clip(y[2:], 0.0, XI_SQ_MAX))
    return y


def _rates_unchecked(eta1, eta2, xi_sq, f):
    # closed form without validation, for the inner loop of the fit
    def g(survive):
        return (1.0 - xi_sq) / (1.0 - xi_sq * survive)
    g1, g2, g12 = g(1.0 - eta1), g(1.0 - eta2), g((1.0 - eta1) * (1.0 - eta2))
    return f * np.stack([1.0 - g1, 1.0 - g2, 1.0 - g1 - g2 + g12], axis=-1)


def count_objective(params: np.ndarray, observed: np.ndarray, f: float) -> float:
    """Relative least squares over C1, C2, CC for every pump power."""
    p = _project(np.asarray(params, dtype=float))
    pred = _rates_unchecked(p[0], p[1], p[2:], f)
    scale = np.maximum(observed, RATE_FLOOR)
    return float((((pred - observed) / scale) ** 2).sum())


def _log_objective(y: np.ndarray, observed: np.ndarray, f: float) -> float:
    return count_objective(np.exp(y), observed, f)


def initial_guess(observed: np.ndarray, f: float) -> np.ndarray:
    """Low-squeezing inversion: C1 ~ f xi^2 eta1, C2 ~ f xi^2 eta2, CC ~ f xi^2 eta1 eta2."""
    c1, c2, cc = np.maximum(observed, RATE_FLOOR).T
    eta1 = float(np.clip(np.median(cc / c2), 1e-6, 1.0))
    eta2 = float(np.clip(np.median(cc / c1), 1e-6, 1.0))
    xi_sq = np.clip(0.5 * (c1 / (f * eta1) + c2 / (f * eta2)), 1e-9, 0.9)
    return _project(np.concatenate([[eta1, eta2], xi_sq]))


def _nelder_mead(x0, observed, f, max_rounds=4):
    """Nelder-Mead on log-parameters, restarted from its own optimum until the
    objective stops improving. Working in logs puts eta ~ 0.05 and xi^2 ~ 0.01
    on the same footing as parameters of order one."""
    best = None
    total = 0
    y = np.log(np.maximum(np.asarray(x0, dtype=float), 1e-12))
    for _ in range(max_rounds):
        res = minimize(_log_objective, y, args=(observed, f), method="Nelder-Mead",
                       options={"xatol": 1e-7, "fatol": 1e-12, "adaptive": True,
                                "maxfev": 1000 * len(y)})
        total += res.nit
        improved = best is None or res.fun < best.fun * (1 - 1e-6)
        if best is None or res.fun < best.fun:
            best = res
        y = res.x
        if not improved:
            break
    return best, total


def fit_efficiencies(records: Sequence[CountRecord], f: float = REPETITION_RATE,
                     seed: int = 0, restarts: int = 5, spread: float = 0.5) -> FitResult:
    """Fit eta1, eta2 and one xi^2 per pump power to measured count rates.

    Derivative-free simplex search with ``restarts`` Latin-hypercube starts
    scattered by a factor ``1 +- spread`` around the low-squeezing inversion
    (plus the inversion itself). Bounds and the xi^2 ordering are enforced
    by projection. Results do not depend on record order.
    """
    if len(records) < 2:
        raise ValueError(
            "need at least two pump powers: a single record leaves the efficiencies and "
            "squeezing degenerate")
    if f <= 0:
        raise ValueError(f"repetition rate must be positive, got {f}")
    keys = [(r.intensity, r.c1, r.c2, r.cc) for r in records]
    order = sorted(range(len(records)), key=lambda k: keys[k])
    observed = np.array([[records[k].c1, records[k].c2, records[k].cc] for k in order])

    x0 = initial_guess(observed, f)
    starts = [x0]
    if restarts > 0:
        lhs = qmc.LatinHypercube(d=len(x0), seed=seed).random(restarts)
        starts += [_project(x0 * (1 + spread * (2 * u - 1))) for u in lhs]

    best, iterations = None, 0
    for start in starts:
        res, nit = _nelder_mead(start, observed, f)
        iterations += nit
        if best is None or res.fun < best.fun:
            best = res
    p = _project(np.exp(best.x))
    simplex = best.final_simplex[0]
    edges = simplex[1:] - simplex[0]  # log-space, i.e. relative spread
    sv = np.linalg.svd(edges, compute_uv=False)
    condition = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")

    xi_sorted = p[2:]
    xi = np.empty_like(xi_sorted)
    xi[order] = xi_sorted
    if not best.success:
        log.warning("count fit did not converge: %s", best.message)
    return FitResult(float(p[0]), float(p[1]), tuple(float(x) for x in xi), float(best.fun),
                     bool(best.success), int(iterations), condition, str(best.message))


def synthetic_records(eta1: float, eta2: float, xi_sq: Sequence[float],
                      f: float = REPETITION_RATE, noise: float = 0.0,
                      rng: np.random.Generator | None = None,
                      intensities: Sequence[float] | None = None) -> list[CountRecord]:
    """Count records generated from the closed-form model, with optional
    multiplicative Gaussian noise."""
    rates = model_rates(eta1, eta2, xi_sq, f)
    if noise:
        rng = rng or np.random.default_rng(0)
        rates = rates * (1 + noise * rng.standard_normal(rates.shape))
    intensities = list(intensities) if intensities is not None else list(range(1, len(xi_sq) + 1))
    return [CountRecord(float(i), *map(float, np.maximum(r, 0.0)))
            for i, r in zip(intensities, rates)]


# --------------------------------------------------------------------------
# overlap fit
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class OverlapFit:
    alpha_ov: float
    v_nominal: float
    residual: float
    v_nominal_halfwidth: float = float("nan")
    bootstrap: tuple[float, ...] = field(default=(), repr=False)


def _weighted_alpha(raw: np.ndarray, v: np.ndarray, w: np.ndarray) -> float:
    # mixture visibility is alpha_ov * raw; weighted LS in closed form
    denom = float((w * raw * raw).sum())
    if denom == 0:
        return 0.0
    return float(np.clip((w * raw * v).sum() / denom, 0.0, 1.0))


def overlap_residual(alpha_ov: float, raw: np.ndarray, v: np.ndarray, w: np.ndarray) -> float:
    return float((w * (alpha_ov * raw - v) ** 2).sum())


def raw_visibility(xi_sq, losses: LossChannelSet, mmi: LossyMmiParams | None,
                   n_max_pairs: int = 9) -> np.ndarray:
    """1 - P_I/P_D for perfectly overlapping photons."""
    p_i, p_d = hom_pair_resolved(losses, mmi, n_max_pairs).probabilities(xi_sq)
    return 1.0 - p_i / p_d


def fit_overlap(vis_records: Sequence[VisibilityRecord], losses: LossChannelSet = LossChannelSet(),
                mmi: LossyMmiParams | None = None, n_max_pairs: int = 9,
                bootstrap: int = 200, seed: int = 0) -> OverlapFit:
    """Fit the overlap alpha_ov to measured visibilities and extrapolate to
    vanishing pump power.

    Records with ``sigma_v`` are weighted by 1/sigma^2, others by 1. The
    nominal visibility is the analytic single-pair limit. Its uncertainty is
    the half-width of the central 95% of ``bootstrap`` resampled refits.
    """
    if len(vis_records) < 2:
        raise ValueError("need at least two visibility records")
    xi_sq = np.array([r.xi_sq for r in vis_records])
    if np.ptp(xi_sq) == 0:
        raise ValueError("visibility records must span distinct xi^2 values")
    v = np.array([r.v for r in vis_records])
    w = np.array([1.0 if r.sigma_v is None else r.sigma_v ** -2 for r in vis_records])
    raw = raw_visibility(xi_sq, losses, mmi, n_max_pairs)
    alpha = _weighted_alpha(raw, v, w)
    v0 = nominal_visibility(mmi, 1.0)

    samples: list[float] = []
    if bootstrap:
        rng = np.random.default_rng(seed)
        for _ in range(bootstrap):
            idx = rng.integers(0, len(v), len(v))
            samples.append(_weighted_alpha(raw[idx], v[idx], w[idx]) * v0)
    half = float(np.subtract(*np.percentile(samples, [97.5, 2.5])) / 2) if samples else float("nan")
    return OverlapFit(alpha, alpha * v0, overlap_residual(alpha, raw, v, w), half, tuple(samples))


# --------------------------------------------------------------------------
# loss explanations
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LossExplanation:
    alpha_loss: float
    loss_db: float
    phi: float


def bound_visibility(alpha_loss: float, alpha_ov: float, eta: float = 0.5) -> float:
    """Nominal visibility of an MMI sitting on the phase bound for ``alpha_loss``."""
    phi = phase_bound_min_phi(alpha_loss)
    _, params = lossy_mmi(eta, alpha_loss, phi)
    return nominal_visibility(params, alpha_ov)


def scan_loss_explanations(v_nominal_target: float, alpha_ov: float,
                           eta: float = 0.5) -> LossExplanation:
    """Smallest MMI loss whose bound-limited phase pulls the nominal visibility
    down to ``v_nominal_target``."""
    if not 0.0 <= alpha_ov <= 1.0:
        raise ValueError(f"alpha_ov must be in [0, 1], got {alpha_ov}")
    if v_nominal_target <= 0:
        raise ValueError(f"target visibility must be positive, got {v_nominal_target}")
    top = bound_visibility(0.0, alpha_ov, eta)
    if v_nominal_target >= top:
        raise ValueError(
            f"target {v_nominal_target} not below the lossless visibility {top:.6g}: "
            "a phase error cannot raise visibility above the overlap ceiling")
    hi = 0.5 - 1e-12
    if v_nominal_target <= bound_visibility(hi, alpha_ov, eta):
        raise ValueError(f"target {v_nominal_target} unreachable for alpha_loss < 0.5")
    alpha = brentq(lambda a: bound_visibility(a, alpha_ov, eta) - v_nominal_target,
                   0.0, hi, xtol=1e-14)
    return LossExplanation(alpha, loss_fraction_to_db(alpha), phase_bound_min_phi(alpha))
