"""Pair source and threshold-detector statistics.

Probabilities are parameterised by ``xi_sq`` (the squared squeezing
parameter), which is the quantity the count-rate fits recover.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .fock import PureState

REPETITION_RATE = 8.0e7  # Hz
SERIES_TAIL_TOL = 1e-17


@dataclass(frozen=True)
class SqueezedSource:
    xi: float
    n_max_pairs: int = 9

    def __post_init__(self):
        if not 0.0 <= self.xi < 1.0:
            raise ValueError(f"squeezing parameter must satisfy 0 <= xi < 1, got {self.xi}")
        if self.n_max_pairs < 0:
            raise ValueError(f"n_max_pairs must be >= 0, got {self.n_max_pairs}")

    @classmethod
    def from_xi_sq(cls, xi_sq: float, n_max_pairs: int = 9) -> "SqueezedSource":
        if not 0.0 <= xi_sq < 1.0:
            raise ValueError(f"xi^2 must be in [0, 1), got {xi_sq}")
        return cls(math.sqrt(xi_sq), n_max_pairs)

    @property
    def xi_sq(self) -> float:
        return self.xi ** 2

    def pair_weights(self) -> np.ndarray:
        return pair_weights(self.xi_sq, self.n_max_pairs)

    @property
    def truncation_deficit(self) -> float:
        return self.xi_sq ** (self.n_max_pairs + 1)


@dataclass(frozen=True)
class DetectorModel:
    """Overall efficiencies of the two channels (collection, transmission, detection)."""
    eta1: float
    eta2: float

    def __post_init__(self):
        for name in ("eta1", "eta2"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")


@dataclass(frozen=True)
class PumpMap:
    intensities: tuple[float, ...]
    xi_sq: tuple[float, ...]
    repetition_rate: float = REPETITION_RATE

    def __post_init__(self):
        if len(self.intensities) != len(self.xi_sq):
            raise ValueError("intensities and xi_sq differ in length")
        if any(not 0.0 <= x < 1.0 for x in self.xi_sq):
            raise ValueError("xi_sq values must lie in [0, 1)")
        order = np.argsort(self.intensities, kind="stable")
        if np.any(np.diff(np.asarray(self.xi_sq)[order]) < 0):
            raise ValueError("xi_sq must be non-decreasing in pump intensity")
        if self.repetition_rate <= 0:
            raise ValueError("repetition rate must be positive")

    def __call__(self, intensity: float) -> float:
        return float(self.xi_sq[self.intensities.index(intensity)])


def pair_weights(xi_sq: float, n_max_pairs: int) -> np.ndarray:
    """Born weights (1 - xi^2) xi^(2n) for n = 0..n_max_pairs."""
    n = np.arange(n_max_pairs + 1)
    return (1.0 - xi_sq) * xi_sq ** n


def squeezed_state(source: SqueezedSource) -> PureState:
    """Two-mode state sqrt(1 - xi^2) sum_n xi^n |n, n>, truncated at n_max_pairs."""
    xi = source.xi
    norm = math.sqrt(1.0 - xi * xi)
    amps = {(n, n): norm * xi ** n for n in range(source.n_max_pairs + 1) if n == 0 or xi > 0}
    return PureState(2, 2 * source.n_max_pairs, amps)


def distinguishable_squeezed_state(source: SqueezedSource) -> PureState:
    """Same pair statistics with the two arms in orthogonal time bins.

    Modes are ordered (a@t1, b@t1, a@t2, b@t2); the pair occupies a@t1 and b@t2.
    """
    xi = source.xi
    norm = math.sqrt(1.0 - xi * xi)
    amps = {(n, 0, 0, n): norm * xi ** n
            for n in range(source.n_max_pairs + 1) if n == 0 or xi > 0}
    return PureState(4, 2 * source.n_max_pairs, amps)


def click_probability(n, eta):
    """Threshold-detector click probability for ``n`` incident photons."""
    return 1.0 - (1.0 - np.asarray(eta, dtype=float)) ** np.asarray(n)


def _check(xi_sq, *etas):
    xi_sq = np.asarray(xi_sq, dtype=float)
    if np.any((xi_sq < 0) | (xi_sq >= 1)):
        raise ValueError("xi^2 must lie in [0, 1)")
    for eta in etas:
        eta = np.asarray(eta, dtype=float)
        if np.any((eta < 0) | (eta > 1)):
            raise ValueError("efficiencies must lie in [0, 1]")


def series_cutoff(xi_sq: float, tol: float = SERIES_TAIL_TOL) -> int:
    """Smallest n_max with tail weight xi^(2(n_max+1)) below ``tol``."""
    xi_sq = float(np.max(xi_sq))
    if xi_sq <= 0.0:
        return 0
    return max(0, math.ceil(math.log(tol) / math.log(xi_sq)) - 1)


def _geometric(xi_sq, survive):
    # sum_n (1 - xi^2) xi^(2n) survive^n
    return (1.0 - xi_sq) / (1.0 - xi_sq * survive)


def p_single(xi_sq, eta, method: str = "closed", n_max: int | None = None):
    """Per-pulse click probability of one detector."""
    _check(xi_sq, eta)
    xi_sq = np.asarray(xi_sq, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if method == "closed":
        return 1.0 - _geometric(xi_sq, 1.0 - eta)
    if method != "series":
        raise ValueError(f"unknown method {method!r}")
    if n_max is None:
        n_max = series_cutoff(xi_sq)
    n = np.arange(1, n_max + 1).reshape((-1,) + (1,) * np.broadcast(xi_sq, eta).ndim)
    return ((1.0 - xi_sq) * xi_sq ** n * click_probability(n, eta)).sum(axis=0)


def p_coincidence(xi_sq, eta1, eta2, method: str = "closed", n_max: int | None = None):
    """Per-pulse probability that both detectors click."""
    _check(xi_sq, eta1, eta2)
    xi_sq = np.asarray(xi_sq, dtype=float)
    eta1 = np.asarray(eta1, dtype=float)
    eta2 = np.asarray(eta2, dtype=float)
    if method == "closed":
        return (1.0 - _geometric(xi_sq, 1.0 - eta1) - _geometric(xi_sq, 1.0 - eta2)
                + _geometric(xi_sq, (1.0 - eta1) * (1.0 - eta2)))
    if method != "series":
        raise ValueError(f"unknown method {method!r}")
    if n_max is None:
        n_max = series_cutoff(xi_sq)
    shape = (-1,) + (1,) * np.broadcast(xi_sq, eta1, eta2).ndim
    n = np.arange(1, n_max + 1).reshape(shape)
    terms = (1.0 - xi_sq) * xi_sq ** n * click_probability(n, eta1) * click_probability(n, eta2)
    return terms.sum(axis=0)


class CountRates(NamedTuple):
    c1: np.ndarray
    c2: np.ndarray
    cc: np.ndarray


def count_rates(xi_sq, detector: DetectorModel, f: float = REPETITION_RATE) -> CountRates:
    """Singles and coincidence rates (counts/s) at repetition rate ``f``."""
    if f <= 0:
        raise ValueError(f"repetition rate must be positive, got {f}")
    return CountRates(
        f * p_single(xi_sq, detector.eta1),
        f * p_single(xi_sq, detector.eta2),
        f * p_coincidence(xi_sq, detector.eta1, detector.eta2),
    )

