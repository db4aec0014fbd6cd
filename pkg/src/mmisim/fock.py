"""Truncated multimode Fock space.

Basis states are tuples of occupation numbers. The basis of ``num_modes``
modes holding at most ``max_total_photons`` photons is ordered sector-major
(total photon number ascending), lexicographically ascending within a
sector, so every passive linear-optical operator is block diagonal.

Scattering matrices act on mode amplitudes: a photon entering mode ``i``
leaves in mode ``j`` with amplitude ``S[j, i]``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .elements import ScatteringMatrix, as_scattering_matrix

FockBasisState = tuple[int, ...]

HERMITIAN_TOL = 1e-10
EIGENVALUE_TOL = 1e-9
UNITARY_TOL = 1e-9


# --------------------------------------------------------------------------
# basis enumeration
# --------------------------------------------------------------------------

@lru_cache(maxsize=None)
def sector_basis(num_modes: int, n_photons: int) -> tuple[FockBasisState, ...]:
    """All occupation tuples of ``num_modes`` modes with exactly ``n_photons``."""
    if num_modes < 1:
        raise ValueError(f"num_modes must be >= 1, got {num_modes}")
    if n_photons < 0:
        raise ValueError(f"n_photons must be >= 0, got {n_photons}")
    if num_modes == 1:
        return ((n_photons,),)
    states = []
    for first in range(n_photons + 1):
        for rest in sector_basis(num_modes - 1, n_photons - first):
            states.append((first,) + rest)
    return tuple(states)


@lru_cache(maxsize=None)
def enumerate_basis(num_modes: int, max_total_photons: int) -> tuple[FockBasisState, ...]:
    """Sector-major, lexicographic list of every state with total <= max_total_photons."""
    if max_total_photons < 0:
        raise ValueError(f"max_total_photons must be >= 0, got {max_total_photons}")
    return tuple(itertools.chain.from_iterable(
        sector_basis(num_modes, n) for n in range(max_total_photons + 1)))


def basis_size(num_modes: int, max_total_photons: int) -> int:
    # sum_{N<=K} C(N+m-1, m-1) = C(K+m, m)
    return math.comb(max_total_photons + num_modes, num_modes)


@lru_cache(maxsize=None)
def _basis_index(num_modes: int, max_total_photons: int) -> dict[FockBasisState, int]:
    return {s: i for i, s in enumerate(enumerate_basis(num_modes, max_total_photons))}


@lru_cache(maxsize=None)
def _occupation_array(num_modes: int, max_total_photons: int) -> np.ndarray:
    arr = np.array(enumerate_basis(num_modes, max_total_photons), dtype=np.int64)
    arr.setflags(write=False)
    return arr.reshape(-1, num_modes)


@lru_cache(maxsize=None)
def _sector_offsets(num_modes: int, max_total_photons: int) -> tuple[int, ...]:
    return tuple(basis_size(num_modes, n - 1) if n > 0 else 0
                 for n in range(max_total_photons + 2))


@lru_cache(maxsize=None)
def _lowering_maps(num_modes: int, n_photons: int) -> tuple[np.ndarray, np.ndarray]:
    """For each state m of sector N and mode j: index of m - e_j in sector N-1
    (or -1), and sqrt(m_j)."""
    states = sector_basis(num_modes, n_photons)
    lower = {s: i for i, s in enumerate(sector_basis(num_modes, n_photons - 1))}
    idx = np.full((num_modes, len(states)), -1, dtype=np.int64)
    amp = np.zeros((num_modes, len(states)))
    for k, s in enumerate(states):
        for j in range(num_modes):
            if s[j] > 0:
                t = s[:j] + (s[j] - 1,) + s[j + 1:]
                idx[j, k] = lower[t]
                amp[j, k] = math.sqrt(s[j])
    return idx, amp


# --------------------------------------------------------------------------
# states
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PureState:
    num_modes: int
    max_total_photons: int
    amplitudes: Mapping[FockBasisState, complex] = field(default_factory=dict)

    def __post_init__(self):
        for s in self.amplitudes:
            if len(s) != self.num_modes:
                raise ValueError(f"state {s} does not have {self.num_modes} modes")
            if min(s) < 0:
                raise ValueError(f"negative occupation in {s}")
            if sum(s) > self.max_total_photons:
                raise ValueError(f"state {s} exceeds truncation {self.max_total_photons}")

    @property
    def norm_sq(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    @property
    def truncation_deficit(self) -> float:
        """Probability weight lost to the photon-number cutoff."""
        return max(0.0, 1.0 - self.norm_sq)

    def to_vector(self) -> np.ndarray:
        index = _basis_index(self.num_modes, self.max_total_photons)
        vec = np.zeros(len(index), dtype=complex)
        for s, a in self.amplitudes.items():
            vec[index[tuple(s)]] = a
        return vec

    def to_density(self) -> "DensityMatrix":
        vec = self.to_vector()
        return DensityMatrix(self.num_modes, self.max_total_photons, np.outer(vec, vec.conj()))

    @classmethod
    def fock(cls, occupations: Sequence[int], max_total_photons: int | None = None) -> "PureState":
        occ = tuple(int(n) for n in occupations)
        cap = sum(occ) if max_total_photons is None else max_total_photons
        return cls(len(occ), cap, {occ: 1.0})


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    num_modes: int
    max_total_photons: int
    matrix: np.ndarray

    def __post_init__(self):
        dim = basis_size(self.num_modes, self.max_total_photons)
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (dim, dim):
            raise ValueError(f"matrix shape {m.shape} does not match basis size {dim}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def basis(self) -> tuple[FockBasisState, ...]:
        return enumerate_basis(self.num_modes, self.max_total_photons)

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    @property
    def truncation_deficit(self) -> float:
        return max(0.0, 1.0 - self.trace)

    @property
    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T)).min())

    def check(self) -> None:
        """Raise if Hermiticity, trace or positivity are violated."""
        if self.hermiticity_defect > HERMITIAN_TOL:
            raise ValueError(f"not Hermitian: defect {self.hermiticity_defect:.3e}")
        tr = self.trace
        if not 0.0 < tr <= 1.0 + HERMITIAN_TOL:
            raise ValueError(f"trace {tr} outside (0, 1]")
        lam = self.min_eigenvalue()
        if lam < -EIGENVALUE_TOL:
            raise ValueError(f"negative eigenvalue {lam:.3e}")

    def populations(self) -> dict[FockBasisState, float]:
        diag = np.real(np.diag(self.matrix))
        return {s: float(p) for s, p in zip(self.basis, diag)}

    def element(self, bra: FockBasisState, ket: FockBasisState) -> complex:
        index = _basis_index(self.num_modes, self.max_total_photons)
        return complex(self.matrix[index[tuple(bra)], index[tuple(ket)]])


def product_density(*factors: DensityMatrix) -> DensityMatrix:
    """Tensor product of density matrices, truncated at the summed cutoffs."""
    modes = [f.num_modes for f in factors]
    cap = sum(f.max_total_photons for f in factors)
    total = sum(modes)
    basis = enumerate_basis(total, cap)
    index_sets = []
    offsets = np.cumsum([0] + modes)
    for f, lo, hi in zip(factors, offsets[:-1], offsets[1:]):
        lookup = _basis_index(f.num_modes, f.max_total_photons)
        index_sets.append(np.array([lookup.get(s[lo:hi], -1) for s in basis]))
    valid = np.all([ix >= 0 for ix in index_sets], axis=0)
    out = np.ones((len(basis), len(basis)), dtype=complex)
    for f, ix in zip(factors, index_sets):
        safe = np.where(ix >= 0, ix, 0)
        out *= f.matrix[np.ix_(safe, safe)]
    out *= np.outer(valid, valid)
    return DensityMatrix(total, cap, out)


# --------------------------------------------------------------------------
# multiphoton lift
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FockOperator:
    source: ScatteringMatrix
    max_total_photons: int
    blocks: tuple[np.ndarray, ...]

    @property
    def num_modes(self) -> int:
        return self.source.dim

    def matrix(self, max_total_photons: int | None = None) -> np.ndarray:
        """Dense block-diagonal matrix over the basis up to the given cutoff."""
        cap = self.max_total_photons if max_total_photons is None else max_total_photons
        if cap > self.max_total_photons:
            raise ValueError(f"operator truncated at {self.max_total_photons} < {cap}")
        dim = basis_size(self.num_modes, cap)
        out = np.zeros((dim, dim), dtype=complex)
        offsets = _sector_offsets(self.num_modes, cap)
        for n in range(cap + 1):
            lo, hi = offsets[n], offsets[n + 1]
            out[lo:hi, lo:hi] = self.blocks[n]
        return out


def _lift_columns(S: np.ndarray, max_total_photons: int,
                  frozen_modes: frozenset[int] = frozenset()) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per-sector columns of the lifted operator.

    Only input states with zero photons in ``frozen_modes`` are computed.
    Returns, per sector N, ``(col_index, block)`` where ``col_index`` indexes
    the sector-N basis and ``block`` has one column per selected input state.

    Uses U|n> = (1/sqrt(n_i)) (sum_j S[j, i] b_j^dag) U|n - e_i>, with i the
    first occupied mode of n.
    """
    m = S.shape[0]
    out = [(np.array([0]), np.ones((1, 1), dtype=complex))]
    for n in range(1, max_total_photons + 1):
        states = sector_basis(m, n)
        prev_states = sector_basis(m, n - 1)
        prev_pos = {c: k for k, c in enumerate(out[-1][0])}
        prev_lookup = {s: i for i, s in enumerate(prev_states)}
        cols, parents, first, norm = [], [], [], []
        for k, s in enumerate(states):
            if any(s[f] for f in frozen_modes):
                continue
            i = next(j for j, v in enumerate(s) if v)
            parent = s[:i] + (s[i] - 1,) + s[i + 1:]
            cols.append(k)
            parents.append(prev_pos[prev_lookup[parent]])
            first.append(i)
            norm.append(1.0 / math.sqrt(s[i]))
        cols_a = np.array(cols, dtype=np.int64)
        X = out[-1][1][:, parents]
        coeff = S[:, first] * np.array(norm)[None, :]
        lower, amp = _lowering_maps(m, n)
        block = np.zeros((len(states), len(cols)), dtype=complex)
        for j in range(m):
            ok = lower[j] >= 0
            block[ok] += (amp[j, ok][:, None] * X[lower[j, ok]]) * coeff[j][None, :]
        out.append((cols_a, block))
    return out


def _check_unitary(S: ScatteringMatrix) -> None:
    if not S.is_unitary:
        raise ValueError(
            f"scattering matrix is not unitary: max|SS^dag - I| = {S.unitarity_defect:.3e} "
            f"(tolerance {UNITARY_TOL:g})")


def lift_scattering(S, max_total_photons: int) -> FockOperator:
    """Lift a unitary single-photon scattering matrix to every photon-number
    sector up to ``max_total_photons``."""
    S = as_scattering_matrix(S)
    _check_unitary(S)
    cols = _lift_columns(S.entries, max_total_photons)
    blocks = []
    for col_index, block in cols:
        block.setflags(write=False)
        blocks.append(block)
    return FockOperator(S, max_total_photons, tuple(blocks))


# --------------------------------------------------------------------------
# evolution, partial trace, detection
# --------------------------------------------------------------------------

def apply_to_density(op: FockOperator, rho: DensityMatrix) -> DensityMatrix:
    if op.num_modes != rho.num_modes:
        raise ValueError(f"operator acts on {op.num_modes} modes, state has {rho.num_modes}")
    if rho.max_total_photons > op.max_total_photons:
        raise ValueError(
            f"state truncation {rho.max_total_photons} exceeds operator truncation "
            f"{op.max_total_photons}")
    U = op.matrix(rho.max_total_photons)
    return DensityMatrix(rho.num_modes, rho.max_total_photons, U @ rho.matrix @ U.conj().T)


def apply_to_pure(op: FockOperator, psi: PureState) -> PureState:
    if op.num_modes != psi.num_modes or psi.max_total_photons > op.max_total_photons:
        raise ValueError("operator and state dimensions do not match")
    vec = op.matrix(psi.max_total_photons) @ psi.to_vector()
    basis = enumerate_basis(psi.num_modes, psi.max_total_photons)
    amps = {s: complex(a) for s, a in zip(basis, vec) if a != 0}
    return PureState(psi.num_modes, psi.max_total_photons, amps)


def partial_trace(rho: DensityMatrix, traced_modes: Iterable[int]) -> DensityMatrix:
    """Trace out ``traced_modes``; remaining modes keep their relative order."""
    traced = sorted(set(int(t) for t in traced_modes))
    if not traced:
        raise ValueError("traced_modes must be nonempty")
    if traced[0] < 0 or traced[-1] >= rho.num_modes:
        raise ValueError(f"mode index out of range for {rho.num_modes} modes: {traced}")
    kept = [k for k in range(rho.num_modes) if k not in traced]
    if not kept:
        raise ValueError("cannot trace out every mode")
    occ = _occupation_array(rho.num_modes, rho.max_total_photons)
    red_index = _basis_index(len(kept), rho.max_total_photons)
    kept_idx = np.array([red_index[tuple(r)] for r in occ[:, kept]])
    groups: dict[tuple[int, ...], list[int]] = {}
    for i, t in enumerate(map(tuple, occ[:, traced])):
        groups.setdefault(t, []).append(i)
    dim = basis_size(len(kept), rho.max_total_photons)
    out = np.zeros((dim, dim), dtype=complex)
    for members in groups.values():
        full = np.array(members)
        red = kept_idx[full]
        out[np.ix_(red, red)] += rho.matrix[np.ix_(full, full)]
    return DensityMatrix(len(kept), rho.max_total_photons, out)


@lru_cache(maxsize=16)
def _loss_kraus(key: bytes, dim: int, num_modes: int, signal_modes: tuple[int, ...],
                max_total_photons: int) -> tuple[tuple[int, int, np.ndarray], ...]:
    """Kraus operators of ``S`` acting on ``signal_modes`` plus fresh vacuum
    loss modes that are traced out afterwards.

    One entry per loss-mode occupation l with |l| = s photons lost:
    ``(s, n_in_lo, K)`` where K maps the system basis from sector s upwards
    onto the basis up to sector ``max_total_photons - s``.
    """
    S = np.frombuffer(key, dtype=complex).reshape(dim, dim)
    n_loss = dim - len(signal_modes)
    total = num_modes + n_loss
    full = np.eye(total, dtype=complex)
    where = list(signal_modes) + list(range(num_modes, total))
    full[np.ix_(where, where)] = S
    cols = _lift_columns(full, max_total_photons, frozenset(range(num_modes, total)))

    sys_index = _basis_index(num_modes, max_total_photons)
    offsets = _sector_offsets(num_modes, max_total_photons)
    dim_sys = len(sys_index)
    loss_configs = enumerate_basis(n_loss, max_total_photons) if n_loss else ((),)
    kraus = {c: np.zeros((offsets[max_total_photons - sum(c) + 1],
                          dim_sys - offsets[sum(c)]), dtype=complex)
             for c in loss_configs}
    for n, (col_index, block) in enumerate(cols):
        states = sector_basis(total, n)
        in_idx = np.array([sys_index[states[c][:num_modes]] for c in col_index])
        for r, s in enumerate(states):
            c = s[num_modes:]
            kraus[c][sys_index[s[:num_modes]], in_idx - offsets[sum(c)]] = block[r]
    out = []
    for c, K in kraus.items():
        if np.any(K):
            K.setflags(write=False)
            out.append((sum(c), offsets[sum(c)], K))
    return tuple(out)


def apply_with_loss_modes(rho: DensityMatrix, S, signal_modes: Sequence[int]) -> DensityMatrix:
    """Apply a scattering matrix whose first ``len(signal_modes)`` modes are
    ``signal_modes`` of ``rho`` and whose remaining modes are fresh vacuum
    loss modes, then trace the loss modes out.

    Equivalent to embedding, ``lift_scattering``, ``apply_to_density`` and
    ``partial_trace`` on the enlarged space, without ever building it.
    """
    S = as_scattering_matrix(S)
    _check_unitary(S)
    signal_modes = tuple(int(m) for m in signal_modes)
    if len(set(signal_modes)) != len(signal_modes) or len(signal_modes) > S.dim:
        raise ValueError(f"bad signal modes {signal_modes} for a {S.dim}-mode element")
    if any(m < 0 or m >= rho.num_modes for m in signal_modes):
        raise ValueError(f"signal modes {signal_modes} out of range for {rho.num_modes} modes")
    entries = np.ascontiguousarray(S.entries, dtype=complex)
    kraus = _loss_kraus(entries.tobytes(), S.dim, rho.num_modes, signal_modes,
                        rho.max_total_photons)
    out = np.zeros_like(rho.matrix)
    for _, lo, K in kraus:
        sub = rho.matrix[lo:, lo:]
        rows = K.shape[0]
        out[:rows, :rows] += K @ sub @ K.conj().T
    return DensityMatrix(rho.num_modes, rho.max_total_photons, out)


class CoincidenceResult(NamedTuple):
    probability: float
    truncation_deficit: float


def coincidence_probability(rho: DensityMatrix, mode_c: int = 0, mode_d: int = 1) -> CoincidenceResult:
    """Probability that both detected modes hold at least one photon."""
    if rho.num_modes != 2:
        raise ValueError(
            f"coincidence_probability needs a two-mode state, got {rho.num_modes} modes; "
            "trace out loss modes first")
    if {mode_c, mode_d} != {0, 1}:
        raise ValueError(f"detected modes must be 0 and 1, got {mode_c}, {mode_d}")
    occ = _occupation_array(2, rho.max_total_photons)
    mask = (occ[:, mode_c] >= 1) & (occ[:, mode_d] >= 1)
    p = float(np.real(np.diag(rho.matrix))[mask].sum())
    return CoincidenceResult(p, rho.truncation_deficit)


def photon_number_distribution(rho: DensityMatrix) -> np.ndarray:
    """Joint occupation probabilities of a two-mode state as a square array
    ``P[k, l]``."""
    if rho.num_modes != 2:
        raise ValueError("photon_number_distribution needs a two-mode state")
    occ = _occupation_array(2, rho.max_total_photons)
    out = np.zeros((rho.max_total_photons + 1,) * 2)
    out[occ[:, 0], occ[:, 1]] = np.real(np.diag(rho.matrix))
    return out
