import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from mmisim import fock
from mmisim.elements import (InfeasiblePhaseError, LossyMmiParams, ScatteringMatrix,
                             db_to_loss_fraction, embed, ideal_mmi, loss_beamsplitter,
                             loss_fraction_to_db, lossy_mmi, minimum_loss_for_phase, mzi,
                             phase_bound_min_phi, phase_shifter, signal_block)


def test_ideal_mmi_matrix():
    B = ideal_mmi()
    assert np.allclose(B.entries, np.array([[1, 1], [1, -1]]) / math.sqrt(2), atol=1e-15)
    assert B.is_unitary and B.unitarity_defect < 1e-12


def test_back_to_back_couplers_are_bar():
    T = mzi(0.0).entries
    assert np.allclose(np.abs(T) ** 2, np.eye(2), atol=1e-15)


def test_scattering_matrix_rejects_non_square():
    with pytest.raises(ValueError):
        ScatteringMatrix(np.ones((2, 3)))


def test_non_unitary_flagged():
    assert not ScatteringMatrix(np.diag([1.0, 0.9])).is_unitary


def test_lossless_embedding_is_block_diagonal():
    S, p = lossy_mmi(0.5, 0.0, math.pi)
    assert np.allclose(S.entries[:2, :2], ideal_mmi().entries, atol=1e-12)
    assert np.allclose(S.entries[2:, 2:], np.eye(2))
    assert np.allclose(S.entries[:2, 2:], 0) and np.allclose(S.entries[2:, :2], 0)


def test_boundary_coupler_is_unitary():
    alpha = db_to_loss_fraction(0.8)
    phi = phase_bound_min_phi(alpha)
    assert phi == pytest.approx(2.74, abs=0.01)
    S, p = lossy_mmi(0.5, alpha, phi)
    assert S.unitarity_defect < 1e-9
    S, _ = lossy_mmi(0.5, 0.168, 2.74)
    assert S.unitarity_defect < 1e-9


def test_infeasible_phase_rejected_with_bound():
    with pytest.raises(InfeasiblePhaseError) as err:
        lossy_mmi(0.5, 0.1, math.pi / 2)
    e = err.value
    assert e.lhs == pytest.approx(math.cos(math.pi / 4))
    assert e.rhs == pytest.approx(0.1 / 0.9)
    assert "0.707" in str(e) and "0.111" in str(e)


@pytest.mark.parametrize("eta", [0.0, 1.0])
def test_degenerate_splitting_ratios(eta):
    S, _ = lossy_mmi(eta, 0.0, 1.0)
    assert S.is_unitary
    T = np.abs(signal_block(LossyMmiParams(eta, 0.0, 1.0))) ** 2
    expected = np.eye(2) if eta == 1.0 else np.array([[0, 1], [1, 0]])
    assert np.allclose(T, expected)


def test_first_rows_as_displayed():
    e, a, phi = 0.3, 0.2, 2.9
    S, p = lossy_mmi(e, a, phi)
    s = math.sqrt
    row0 = [s(e * (1 - a)), s((1 - e) * (1 - a)), s(e * a), s((1 - e) * a)]
    row1 = [s((1 - e) * (1 - a)), np.exp(1j * phi) * s(e * (1 - a)),
            np.exp(1j * p.theta) * s((1 - e) * a), np.exp(1j * p.beta) * s(e * a)]
    assert np.allclose(S.entries[0], row0) and np.allclose(S.entries[1], row1)
    assert p.theta >= p.beta
    assert p.theta + p.beta == pytest.approx(phi)


def feasible_triples():
    return st.tuples(st.floats(0.01, 0.99), st.floats(0.0, 0.7), st.floats(0, 1)).map(
        lambda t: (t[0], t[1], phase_bound_min_phi(t[1])
                   + t[2] * (2 * math.pi - 2 * phase_bound_min_phi(t[1]))))


@given(feasible_triples())
def test_every_feasible_coupler_unitary(triple):
    eta, alpha, phi = triple
    S, p = lossy_mmi(eta, alpha, phi)
    assert S.unitarity_defect < 1e-9
    assert abs(p.orthogonality_residual()) < 1e-10


@given(st.floats(0.01, 0.99), st.floats(0.01, 0.45), st.floats(0, 2 * math.pi))
def test_infeasible_region_always_rejected(eta, alpha, phi):
    assume(abs(math.cos(phi / 2)) > alpha / (1 - alpha) + 1e-9)
    with pytest.raises(InfeasiblePhaseError):
        lossy_mmi(eta, alpha, phi)


@given(st.floats(0.0, 0.499), st.floats(0.0, 0.499))
def test_phase_bound_monotone(a, b):
    lo, hi = sorted((a, b))
    assert phase_bound_min_phi(hi) <= phase_bound_min_phi(lo)


def test_phase_bound_values():
    assert phase_bound_min_phi(0.0) == math.pi
    assert phase_bound_min_phi(0.168) == pytest.approx(2.74, abs=0.01)
    assert phase_bound_min_phi(db_to_loss_fraction(0.2)) == pytest.approx(3.047, abs=1e-3)
    assert phase_bound_min_phi(0.6) == 0.0
    with pytest.raises(ValueError):
        phase_bound_min_phi(1.0)


@given(st.floats(0.0, 2 * math.pi))
def test_minimum_loss_sits_on_bound(phi):
    a = minimum_loss_for_phase(phi)
    S, _ = lossy_mmi(0.5, a, phi)
    assert S.unitarity_defect < 1e-9
    if a > 1e-6:
        with pytest.raises(InfeasiblePhaseError):
            lossy_mmi(0.5, a * (1 - 1e-6), phi)


def test_db_conversions():
    assert db_to_loss_fraction(0) == 0
    assert db_to_loss_fraction(0.8) == pytest.approx(0.168236, abs=1e-6)
    assert db_to_loss_fraction(3.0103) == pytest.approx(0.5, abs=1e-5)
    assert loss_fraction_to_db(db_to_loss_fraction(0.37)) == pytest.approx(0.37)
    with pytest.raises(ValueError):
        db_to_loss_fraction(-1)


def test_phase_shifter():
    assert np.allclose(phase_shifter(0).entries, np.eye(2))
    two = fock.lift_scattering(phase_shifter(0.4), 2).blocks[2]
    states = fock.sector_basis(2, 2)
    d = np.diag(two)
    assert d[states.index((0, 2))] / d[states.index((2, 0))] == pytest.approx(np.exp(0.8j))


def test_mzi_routes_at_pi():
    assert abs(mzi(math.pi).entries[1, 0]) ** 2 == pytest.approx(1.0)


def test_mzi_cross_port_probability_grid():
    for phi in np.linspace(0, 2 * math.pi, 64):
        p = abs(mzi(phi).entries[1, 0]) ** 2
        assert p == pytest.approx(0.5 * (1 - math.cos(phi)), abs=1e-10)
    assert abs(mzi(math.pi / 2).entries[1, 0]) ** 2 == pytest.approx(0.5)


def test_lossy_mzi_layout():
    p = LossyMmiParams(0.5, 0.2, 2.8)
    M = mzi(1.0, p)
    assert M.dim == 6 and M.unitarity_defect < 1e-9
    # light reaching the signal outputs is attenuated twice by the coupler loss
    power = (np.abs(M.entries[:2, 0]) ** 2).sum()
    assert power <= (1 - 0.2) + 1e-12


def test_loss_beamsplitter_and_embed():
    L = loss_beamsplitter(0.36)
    assert L.is_unitary and abs(L.entries[0, 0]) ** 2 == pytest.approx(0.36)
    with pytest.raises(ValueError):
        loss_beamsplitter(1.5)
    E = embed(ideal_mmi(), [1, 2], 3)
    assert E.is_unitary and E.entries[0, 0] == 1
