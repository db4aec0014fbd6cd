"""Scattering matrices for the circuit elements.

Mode order convention for the lossy MMI: signal modes 0 and 1 (ports a, b),
then its two loss modes. ``S[j, i]`` is the amplitude for input mode ``i``
to reach output mode ``j``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space

UNITARY_TOL = 1e-9


class InfeasiblePhaseError(ValueError):
    """Raised when (eta, alpha_loss, phi) violates the unitarity bound."""

    def __init__(self, phi: float, alpha_loss: float):
        self.phi = phi
        self.alpha_loss = alpha_loss
        self.lhs = abs(math.cos(phi / 2))
        self.rhs = alpha_loss / (1 - alpha_loss)
        super().__init__(
            f"infeasible MMI phase: |cos(phi/2)| = {self.lhs:.6g} > "
            f"alpha/(1 - alpha) = {self.rhs:.6g} (phi = {phi:.6g} rad, alpha = {alpha_loss:.6g}); "
            f"minimum phase for this loss is {phase_bound_min_phi(alpha_loss):.6g} rad")


@dataclass(frozen=True, eq=False)
class ScatteringMatrix:
    entries: np.ndarray

    def __post_init__(self):
        m = np.array(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"scattering matrix must be square, got shape {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)
        defect = float(np.max(np.abs(m @ m.conj().T - np.eye(m.shape[0]))))
        object.__setattr__(self, "unitarity_defect", defect)
        object.__setattr__(self, "is_unitary", defect < UNITARY_TOL)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __matmul__(self, other: "ScatteringMatrix") -> "ScatteringMatrix":
        return ScatteringMatrix(self.entries @ as_scattering_matrix(other).entries)


def as_scattering_matrix(S) -> ScatteringMatrix:
    return S if isinstance(S, ScatteringMatrix) else ScatteringMatrix(np.asarray(S))


@dataclass(frozen=True)
class LossyMmiParams:
    """Reflectivity, lost power fraction, internal phase and loss-mode phases."""
    eta: float
    alpha_loss: float
    phi: float
    theta: float = 0.0
    beta: float = 0.0

    @property
    def eta_bar(self) -> float:
        return 1.0 - self.eta

    @property
    def alpha_bar(self) -> float:
        return 1.0 - self.alpha_loss

    def orthogonality_residual(self) -> complex:
        """Inner product of the first two rows of the embedding; zero when unitary."""
        e, a = self.eta, self.alpha_loss
        return math.sqrt(e * (1 - e)) * (
            (1 - a) * (1 + np.exp(-1j * self.phi))
            + a * (np.exp(-1j * self.theta) + np.exp(-1j * self.beta)))


def db_to_loss_fraction(loss_db: float) -> float:
    if loss_db < 0:
        raise ValueError(f"loss in dB must be >= 0, got {loss_db}")
    return 1.0 - 10.0 ** (-loss_db / 10.0)


def loss_fraction_to_db(alpha_loss: float) -> float:
    return -10.0 * math.log10(1.0 - alpha_loss)


def phase_bound_min_phi(alpha_loss: float) -> float:
    """Smallest internal phase in [0, pi] allowed by the unitarity bound.

    Returns pi for a lossless coupler and 0 once alpha/(1-alpha) >= 1.
    """
    if not 0.0 <= alpha_loss < 1.0:
        raise ValueError(f"alpha_loss must be in [0, 1), got {alpha_loss}")
    ratio = alpha_loss / (1.0 - alpha_loss)
    return 2.0 * math.acos(min(1.0, ratio))


def minimum_loss_for_phase(phi: float) -> float:
    """Smallest alpha_loss for which an MMI with internal phase ``phi`` is
    unitary (balanced splitting)."""
    r = abs(math.cos(phi / 2))
    return r / (1.0 + r)


def ideal_mmi() -> ScatteringMatrix:
    return ScatteringMatrix(np.array([[1, 1], [1, np.exp(1j * np.pi).real]]) / math.sqrt(2))


def _solve_loss_phases(eta: float, alpha_loss: float, phi: float) -> tuple[float, float]:
    # theta + beta = phi and cos((theta - beta)/2) = -(alpha_bar/alpha) cos(phi/2)
    # zero the row inner product; branch theta >= beta.
    if alpha_loss == 0.0 or eta in (0.0, 1.0):
        return (phi + math.pi) / 2, (phi - math.pi) / 2
    c = -(1 - alpha_loss) / alpha_loss * math.cos(phi / 2)
    delta = 2.0 * math.acos(max(-1.0, min(1.0, c)))
    return (phi + delta) / 2, (phi - delta) / 2


def _complete_rows(top: np.ndarray, left: np.ndarray) -> np.ndarray:
    """Rows 2-3 of a unitary with first rows ``top`` whose first two columns
    reproduce ``left``.

    Rows 2-3 span the orthogonal complement of rows 0-1; the 2x2 rotation
    inside that complement is the Procrustes fit to ``left``. At the
    feasibility boundary ``left`` is rank one and rounding leaves the fit
    off by up to ~1e-9; the rows stay exactly orthonormal.
    """
    K = null_space(top.conj()).T
    P, _, Qh = np.linalg.svd(left @ K[:, :2].conj().T)
    return (P @ Qh) @ K


def lossy_mmi(eta: float, alpha_loss: float, phi: float,
              tol: float = 1e-12) -> tuple[ScatteringMatrix, LossyMmiParams]:
    """Four-mode unitary embedding of a lossy 2x2 MMI.

    Raises :class:`InfeasiblePhaseError` when ``|cos(phi/2)| > alpha/(1 - alpha)``
    for a coupler that actually splits (0 < eta < 1).
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must be in [0, 1], got {eta}")
    if not 0.0 <= alpha_loss < 1.0:
        raise ValueError(f"alpha_loss must be in [0, 1), got {alpha_loss}")
    splits = 0.0 < eta < 1.0
    if splits and abs(math.cos(phi / 2)) > alpha_loss / (1 - alpha_loss) + tol:
        raise InfeasiblePhaseError(phi, alpha_loss)

    theta, beta = _solve_loss_phases(eta, alpha_loss, phi)
    e, eb, a, ab = eta, 1 - eta, alpha_loss, 1 - alpha_loss
    s = math.sqrt
    top = np.array([
        [s(e * ab), s(eb * ab), s(e * a), s(eb * a)],
        [s(eb * ab), np.exp(1j * phi) * s(e * ab),
         np.exp(1j * theta) * s(eb * a), np.exp(1j * beta) * s(e * a)],
    ], dtype=complex)
    U = np.zeros((4, 4), dtype=complex)
    U[:2] = top
    if alpha_loss == 0.0:
        U[2:, 2:] = np.eye(2)
    else:
        U[2:] = _complete_rows(top, top[:, 2:].T)
    return ScatteringMatrix(U), LossyMmiParams(eta, alpha_loss, phi, theta, beta)


def mmi_matrix(mmi: LossyMmiParams | None) -> ScatteringMatrix:
    """Scattering matrix for coupler parameters; ``None`` is the ideal coupler."""
    if mmi is None:
        return ideal_mmi()
    return lossy_mmi(mmi.eta, mmi.alpha_loss, mmi.phi)[0]


def signal_block(mmi: LossyMmiParams | None) -> np.ndarray:
    """2x2 transfer between the signal ports."""
    return mmi_matrix(mmi).entries[:2, :2]


def phase_shifter(phi: float) -> ScatteringMatrix:
    return ScatteringMatrix(np.diag([1.0, np.exp(1j * phi)]))


def loss_beamsplitter(transmission: float) -> ScatteringMatrix:
    """Virtual beamsplitter coupling a signal mode (0) to a loss mode (1)."""
    if not 0.0 <= transmission <= 1.0:
        raise ValueError(f"transmission must be in [0, 1], got {transmission}")
    t, r = math.sqrt(transmission), math.sqrt(1.0 - transmission)
    return ScatteringMatrix(np.array([[t, -r], [r, t]]))


def embed(S: ScatteringMatrix, modes: list[int], dim: int) -> ScatteringMatrix:
    out = np.eye(dim, dtype=complex)
    out[np.ix_(modes, modes)] = as_scattering_matrix(S).entries
    return ScatteringMatrix(out)


def mzi(phi: float, mmi: LossyMmiParams | None = None) -> ScatteringMatrix:
    """Second MMI . phase shifter . first MMI.

    Ideal couplers give a 2x2 matrix. Lossy couplers give a 6x6 matrix with the
    arms as modes 0 and 1, the first coupler's loss modes as 2-3 and the
    second's as 4-5.
    """
    ps = phase_shifter(phi)
    if mmi is None:
        B = ideal_mmi()
        return B @ ps @ B
    B = mmi_matrix(mmi)
    first = embed(B, [0, 1, 2, 3], 6)
    shift = embed(ps, [0, 1], 6)
    second = embed(B, [0, 1, 4, 5], 6)
    return second @ shift @ first
