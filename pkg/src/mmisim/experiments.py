"""HOM and MZI experiments on the lossy Fock-space pipeline.

Ports: inputs a, b are modes 0 and 1; the HOM detectors watch output modes
0 and 1. In the MZI the single-photon fringe is recorded at the output
opposite to the input port (mode 1 for a photon entering mode 0).

Distinguishable photons are modelled with two time bins: the spatial
circuit acts on each bin separately and a detector clicks when it receives
any photon from either bin.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np
from scipy import constants
from scipy.optimize import brentq

from . import fock
from .elements import (LossyMmiParams, ScatteringMatrix, loss_beamsplitter, mmi_matrix,
                       mzi, signal_block)
from .source import SqueezedSource, pair_weights, squeezed_state

COHERENCE_LENGTH = 100e-6  # m, free space
DEFAULT_TAU_C = COHERENCE_LENGTH / constants.c
DEFAULT_PHASE_K = 3 * math.pi / 4.5 ** 2  # 1.5 single-photon fringes over 0-4.5 V
METROLOGY_THRESHOLD = 1 / math.sqrt(2)


@dataclass(frozen=True)
class LossChannelSet:
    """Transmissions of the virtual beamsplitters at inputs a, b and outputs c, d."""
    eta_A: float = 1.0
    eta_B: float = 1.0
    eta_C: float = 1.0
    eta_D: float = 1.0

    def __post_init__(self):
        for name in ("eta_A", "eta_B", "eta_C", "eta_D"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")


@dataclass(frozen=True)
class OverlapModel:
    alpha_ov: float = 1.0
    tau_c: float = DEFAULT_TAU_C

    def __post_init__(self):
        if not 0.0 <= self.alpha_ov <= 1.0:
            raise ValueError(f"alpha_ov must be in [0, 1], got {self.alpha_ov}")
        if self.tau_c <= 0:
            raise ValueError(f"tau_c must be positive, got {self.tau_c}")

    def at_delay(self, tau):
        return self.alpha_ov * np.exp(-(np.asarray(tau, dtype=float) / self.tau_c) ** 2)


@dataclass(frozen=True)
class PhaseCalibration:
    """Heater voltage to MZI phase: phi = k V^2 + phi0."""
    k: float = DEFAULT_PHASE_K
    phi0: float = 0.0

    def __post_init__(self):
        if self.k < 0:
            raise ValueError(f"k must be >= 0, got {self.k}")

    def phase(self, voltage):
        return self.k * np.asarray(voltage, dtype=float) ** 2 + self.phi0


# --------------------------------------------------------------------------
# circuits
# --------------------------------------------------------------------------

Element = tuple[ScatteringMatrix, tuple[int, ...]]


def _loss(eta: float, mode: int) -> list[Element]:
    return [] if eta == 1.0 else [(loss_beamsplitter(eta), (mode,))]


def hom_circuit(losses: LossChannelSet, mmi: LossyMmiParams | None) -> list[Element]:
    """Input losses, coupler, output losses."""
    return (_loss(losses.eta_A, 0) + _loss(losses.eta_B, 1)
            + [(mmi_matrix(mmi), (0, 1))]
            + _loss(losses.eta_C, 0) + _loss(losses.eta_D, 1))


def mzi_circuit(phase: float, mmi: LossyMmiParams | None = None,
                losses: LossChannelSet | None = None) -> list[Element]:
    losses = losses or LossChannelSet()
    return (_loss(losses.eta_A, 0) + _loss(losses.eta_B, 1)
            + [(mzi(phase, mmi), (0, 1))]
            + _loss(losses.eta_C, 0) + _loss(losses.eta_D, 1))


def propagate(rho: fock.DensityMatrix, circuit: Sequence[Element],
              bins: int = 1) -> fock.DensityMatrix:
    """Run ``rho`` through ``circuit``, tracing loss modes after every element.

    With ``bins > 1`` the state carries ``2 * bins`` modes (time bin major) and
    every element acts on each bin in turn.
    """
    for S, modes in circuit:
        for b in range(bins):
            rho = fock.apply_with_loss_modes(rho, S, tuple(m + 2 * b for m in modes))
    return rho


class Detection(NamedTuple):
    p_c: float
    p_d: float
    p_cc: float


def detection_probabilities(rho: fock.DensityMatrix) -> Detection:
    """Threshold-detector click probabilities for outputs c (mode 0) and d
    (mode 1), combining time bins when the state has more than two modes."""
    if rho.num_modes % 2:
        raise ValueError("expected an even number of modes (2 per time bin)")
    occ = fock._occupation_array(rho.num_modes, rho.max_total_photons)
    nc = occ[:, 0::2].sum(axis=1)
    nd = occ[:, 1::2].sum(axis=1)
    diag = np.real(np.diag(rho.matrix))
    return Detection(float(diag[nc > 0].sum()), float(diag[nd > 0].sum()),
                     float(diag[(nc > 0) & (nd > 0)].sum()))


# --------------------------------------------------------------------------
# pair-number resolved statistics
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PairResolved:
    """Click statistics per pair number n = 0..n_max (inputs |n, n>).

    Passive optics conserves photon number and the detectors are diagonal in
    the Fock basis, so coherences between pair numbers never reach the
    counts: any pair distribution w_n gives probabilities sum_n w_n x_n.
    """
    indist: np.ndarray  # (n_max + 1, 3): p_c, p_d, p_cc
    dist: np.ndarray

    @property
    def n_max_pairs(self) -> int:
        return len(self.indist) - 1

    def probabilities(self, xi_sq) -> tuple[np.ndarray, np.ndarray]:
        """(P_I, P_D) coincidence probabilities for squared squeezing ``xi_sq``."""
        xi_sq = np.atleast_1d(np.asarray(xi_sq, dtype=float))
        w = np.stack([pair_weights(x, self.n_max_pairs) for x in xi_sq])
        return w @ self.indist[:, 2], w @ self.dist[:, 2]

    def singles(self, xi_sq) -> tuple[np.ndarray, np.ndarray]:
        xi_sq = np.atleast_1d(np.asarray(xi_sq, dtype=float))
        w = np.stack([pair_weights(x, self.n_max_pairs) for x in xi_sq])
        return w @ self.indist[:, :2], w @ self.dist[:, :2]


def _output_distribution(occupations: tuple[int, int], circuit) -> np.ndarray:
    rho = fock.PureState.fock(occupations).to_density()
    return fock.photon_number_distribution(propagate(rho, circuit))


def pair_resolved(circuit: Sequence[Element], n_max_pairs: int) -> PairResolved:
    indist = np.zeros((n_max_pairs + 1, 3))
    dist = np.zeros((n_max_pairs + 1, 3))
    for n in range(1, n_max_pairs + 1):
        rho = propagate(fock.PureState.fock((n, n)).to_density(), circuit)
        indist[n] = detection_probabilities(rho)
        p1 = _output_distribution((n, 0), circuit)
        p2 = _output_distribution((0, n), circuit)
        # no-click probabilities per bin, combined as independent bins
        none_c = p1[0, :].sum() * p2[0, :].sum()
        none_d = p1[:, 0].sum() * p2[:, 0].sum()
        none_both = p1[0, 0] * p2[0, 0]
        dist[n] = (1 - none_c, 1 - none_d, 1 - none_c - none_d + none_both)
    return PairResolved(indist, dist)


def _mmi_key(mmi: LossyMmiParams | None):
    return None if mmi is None else (mmi.eta, mmi.alpha_loss, mmi.phi)


@lru_cache(maxsize=32)
def _hom_pair_resolved(losses: LossChannelSet, mmi_key, n_max_pairs: int) -> PairResolved:
    mmi = None if mmi_key is None else LossyMmiParams(*mmi_key)
    return pair_resolved(hom_circuit(losses, mmi), n_max_pairs)


def hom_pair_resolved(losses: LossChannelSet, mmi: LossyMmiParams | None,
                      n_max_pairs: int = 9) -> PairResolved:
    return _hom_pair_resolved(losses, _mmi_key(mmi), n_max_pairs)


# --------------------------------------------------------------------------
# HOM
# --------------------------------------------------------------------------

class HomProbabilities(NamedTuple):
    p_i: float
    p_d: float
    truncation_deficit: float


def hom_probabilities(xi: float, losses: LossChannelSet = LossChannelSet(),
                      mmi: LossyMmiParams | None = None, n_max_pairs: int = 9) -> HomProbabilities:
    """Coincidence probabilities for indistinguishable and distinguishable pairs.

    P_I comes from propagating the full squeezed-state density matrix. P_D
    runs the same circuit on each time bin of the distinguishable state.
    """
    source = SqueezedSource(xi, n_max_pairs)
    circuit = hom_circuit(losses, mmi)
    rho = propagate(squeezed_state(source).to_density(), circuit)
    p_i = fock.coincidence_probability(rho, 0, 1).probability
    _, p_d = hom_pair_resolved(losses, mmi, n_max_pairs).probabilities(source.xi_sq)
    return HomProbabilities(p_i, float(p_d[0]), source.truncation_deficit)


def visibility(p_i, p_d):
    """Dip visibility 1 - P_I / P_D (negative for an anti-dip)."""
    p_d = np.asarray(p_d, dtype=float)
    if np.any(p_d <= 0):
        raise ValueError("visibility undefined for P_D = 0")
    v = 1.0 - np.asarray(p_i, dtype=float) / p_d
    return float(v) if v.ndim == 0 else v


def mixture(p_i, p_d, alpha_ov):
    """Coincidence probability of a pair with overlap ``alpha_ov``."""
    return alpha_ov * np.asarray(p_i) + (1.0 - alpha_ov) * np.asarray(p_d)


def mixture_visibility(xi: float, losses: LossChannelSet = LossChannelSet(),
                       mmi: LossyMmiParams | None = None, alpha_ov: float = 1.0,
                       n_max_pairs: int = 9) -> float:
    if not 0.0 <= alpha_ov <= 1.0:
        raise ValueError(f"alpha_ov must be in [0, 1], got {alpha_ov}")
    if xi * xi == 0:  # single-pair limit
        return nominal_visibility(mmi, alpha_ov)
    p_i, p_d = hom_pair_resolved(losses, mmi, n_max_pairs).probabilities(xi * xi)
    return float(1.0 - mixture(p_i[0], p_d[0], alpha_ov) / p_d[0])


def two_photon_visibility(transfer: np.ndarray) -> float:
    """Single-pair limit of 1 - P_I/P_D for a 2x2 signal transfer matrix."""
    A = np.asarray(transfer)
    p_i = abs(A[0, 0] * A[1, 1] + A[0, 1] * A[1, 0]) ** 2
    p_d = abs(A[0, 0] * A[1, 1]) ** 2 + abs(A[0, 1] * A[1, 0]) ** 2
    return 1.0 - p_i / p_d


def nominal_visibility(mmi: LossyMmiParams | None, alpha_ov: float = 1.0) -> float:
    """Visibility at vanishing pump power.

    Only single pairs survive; the input and output losses scale P_I and P_D
    alike, so only the coupler's signal block matters.
    """
    return alpha_ov * two_photon_visibility(signal_block(mmi))


class VisibilityCurve(NamedTuple):
    xi: np.ndarray
    pair_probability: np.ndarray
    visibility: np.ndarray


def pair_probability(xi):
    """Probability per pulse of at least one pair, P(n >= 1) = xi^2."""
    return np.asarray(xi, dtype=float) ** 2


def visibility_vs_pair_probability(xi_grid, losses: LossChannelSet = LossChannelSet(),
                                   mmi: LossyMmiParams | None = None, alpha_ov: float = 1.0,
                                   n_max_pairs: int = 9) -> VisibilityCurve:
    xi = np.asarray(xi_grid, dtype=float)
    p_i, p_d = hom_pair_resolved(losses, mmi, n_max_pairs).probabilities(xi ** 2)
    v = np.empty_like(xi)
    zero = xi ** 2 == 0
    v[zero] = nominal_visibility(mmi, alpha_ov)
    v[~zero] = 1.0 - mixture(p_i[~zero], p_d[~zero], alpha_ov) / p_d[~zero]
    return VisibilityCurve(xi, pair_probability(xi), v)


class DelayScan(NamedTuple):
    tau: np.ndarray
    overlap: np.ndarray
    coincidence: np.ndarray
    p_i: float
    p_d: float


def hom_delay_scan(tau_grid, xi: float, losses: LossChannelSet = LossChannelSet(),
                   mmi: LossyMmiParams | None = None, alpha_ov_max: float = 1.0,
                   tau_c: float = DEFAULT_TAU_C, n_max_pairs: int = 9) -> DelayScan:
    """Coincidence probability per pulse against relative delay (Gaussian overlap)."""
    model = OverlapModel(alpha_ov_max, tau_c)
    tau = np.asarray(tau_grid, dtype=float)
    p_i, p_d = hom_pair_resolved(losses, mmi, n_max_pairs).probabilities(xi * xi)
    overlap = model.at_delay(tau)
    return DelayScan(tau, overlap, mixture(p_i[0], p_d[0], overlap), float(p_i[0]), float(p_d[0]))


def dip_fwhm(tau_c: float = DEFAULT_TAU_C) -> float:
    return 2.0 * tau_c * math.sqrt(math.log(2.0))


# --------------------------------------------------------------------------
# MZI fringes
# --------------------------------------------------------------------------

class Fringe(NamedTuple):
    voltage: np.ndarray
    phase: np.ndarray
    probability: np.ndarray

    @property
    def visibility(self) -> float:
        return fringe_visibility(self.probability)


def fringe_visibility(values) -> float:
    values = np.asarray(values, dtype=float)
    hi, lo = values.max(), values.min()
    return float((hi - lo) / (hi + lo))


def single_photon_fringe_analytic(phase):
    return 0.5 * (1.0 - np.cos(phase))


def two_photon_fringe_analytic(phase):
    """Coincidence probability of |1,1> through the ideal MZI.

    Equals 1/2 [1 - cos(2 phase')] with phase' = phase + pi/2: same period,
    origin shifted by a quarter of the single-photon period.
    """
    return 0.5 * (1.0 + np.cos(2.0 * np.asarray(phase)))


def single_photon_fringe(voltage_grid, cal: PhaseCalibration = PhaseCalibration(),
                         mmi: LossyMmiParams | None = None,
                         losses: LossChannelSet | None = None) -> Fringe:
    """Probability of finding a photon launched into port a at the cross output."""
    v = np.asarray(voltage_grid, dtype=float)
    phase = cal.phase(v)
    rho0 = fock.PureState.fock((1, 0)).to_density()
    prob = np.array([detection_probabilities(propagate(rho0, mzi_circuit(p, mmi, losses))).p_d
                     for p in phase])
    return Fringe(v, phase, prob)


def _mzi_pair_resolved(phase: float, mmi, losses, n_max_pairs: int) -> PairResolved:
    return pair_resolved(mzi_circuit(phase, mmi, losses), n_max_pairs)


def two_photon_fringe(voltage_grid, cal: PhaseCalibration = PhaseCalibration(),
                      mmi: LossyMmiParams | None = None, alpha_ov: float = 1.0,
                      xi: float | None = None, losses: LossChannelSet | None = None,
                      n_max_pairs: int = 3) -> Fringe:
    """Coincidence probability of a photon pair against heater voltage.

    With ``xi=None`` the input is the pair |1,1>. Otherwise the squeezed
    source with ``n_max_pairs`` pairs is used, and probabilities are per
    pulse.
    """
    v = np.asarray(voltage_grid, dtype=float)
    phase = cal.phase(v)
    prob = np.empty_like(phase)
    for k, p in enumerate(phase):
        if xi is None:
            pr = _mzi_pair_resolved(p, mmi, losses, 1)
            p_i, p_d = pr.indist[1, 2], pr.dist[1, 2]
        else:
            pr = _mzi_pair_resolved(p, mmi, losses, n_max_pairs)
            p_i, p_d = (x[0] for x in pr.probabilities(xi * xi))
        prob[k] = mixture(p_i, p_d, alpha_ov)
    return Fringe(v, phase, prob)


def overlap_for_fringe_visibility(target: float, mmi: LossyMmiParams | None = None,
                                  points: int = 257) -> float:
    """Overlap alpha_ov at which the |1,1> fringe reaches visibility ``target``."""
    phase = np.linspace(0.0, math.pi, points)
    p_i, p_d = np.array([_pair_terms(p, mmi) for p in phase]).T

    def vis(alpha):
        return fringe_visibility(mixture(p_i, p_d, alpha))

    lo, hi = vis(0.0), vis(1.0)
    if not lo <= target <= hi:
        raise ValueError(f"target visibility {target} outside reachable range [{lo:.4f}, {hi:.4f}]")
    return brentq(lambda a: vis(a) - target, 0.0, 1.0, xtol=1e-12)


def _pair_terms(phase: float, mmi) -> tuple[float, float]:
    pr = _mzi_pair_resolved(phase, mmi, None, 1)
    return pr.indist[1, 2], pr.dist[1, 2]


def exceeds_metrology_threshold(v: float) -> bool:
    return v > METROLOGY_THRESHOLD


def fringe_period_ratio(phase, single, double) -> float:
    """Ratio of single- to two-photon fringe periods from FFT peaks.

    Both curves are resampled on a uniform phase grid spanning the largest
    whole number of single-photon periods in the scan.
    """
    phase = np.asarray(phase, dtype=float)
    order = np.argsort(phase)
    phase = phase[order]
    periods = math.floor((phase[-1] - phase[0]) / (2 * math.pi) + 1e-9)
    if periods < 1:
        raise ValueError("scan must cover at least one single-photon period")
    n = 256 * periods
    grid = phase[0] + np.arange(n) * (2 * math.pi * periods / n)
    peaks = []
    for y in (np.asarray(single)[order], np.asarray(double)[order]):
        yy = np.interp(grid, phase, y)
        spectrum = np.abs(np.fft.rfft(yy - yy.mean()))
        peaks.append(int(np.argmax(spectrum[1:]) + 1))
    return peaks[1] / peaks[0]
