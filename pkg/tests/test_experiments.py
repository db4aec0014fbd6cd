import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mmisim import fock
from mmisim.elements import LossyMmiParams, lossy_mmi, minimum_loss_for_phase
from mmisim.experiments import (DEFAULT_PHASE_K, LossChannelSet, OverlapModel,
                                PhaseCalibration, detection_probabilities, dip_fwhm,
                                exceeds_metrology_threshold, fringe_period_ratio,
                                fringe_visibility, hom_circuit, hom_delay_scan,
                                hom_pair_resolved, hom_probabilities, mixture_visibility,
                                mzi_circuit, nominal_visibility, overlap_for_fringe_visibility,
                                pair_resolved, propagate, single_photon_fringe,
                                single_photon_fringe_analytic, two_photon_fringe,
                                two_photon_fringe_analytic, two_photon_visibility, visibility,
                                visibility_vs_pair_probability)
from mmisim.source import SqueezedSource, distinguishable_squeezed_state, squeezed_state

LOSSES = LossChannelSet(0.8, 0.7, 0.9, 0.6)


def boundary_mmi(phi=2.74, eta=0.5):
    return lossy_mmi(eta, minimum_loss_for_phase(phi), phi)[1]


# pair-resolved fast path vs full density propagation -----------------------

@pytest.mark.parametrize("mmi", [None, boundary_mmi(), lossy_mmi(0.4, 0.25, 2.5)[1]])
def test_indistinguishable_fast_path_matches_density(mmi):
    xi, n = 0.35, 4
    src = SqueezedSource(xi, n)
    rho = propagate(squeezed_state(src).to_density(), hom_circuit(LOSSES, mmi))
    full = detection_probabilities(rho)
    pr = hom_pair_resolved(LOSSES, mmi, n)
    p_i, _ = pr.probabilities(xi ** 2)
    (singles_i, _), = [x for x in [pr.singles(xi ** 2)]]
    assert p_i[0] == pytest.approx(full.p_cc, abs=1e-12)
    assert singles_i[0] == pytest.approx([full.p_c, full.p_d], abs=1e-12)


@pytest.mark.parametrize("mmi", [None, boundary_mmi()])
def test_distinguishable_fast_path_matches_time_bin_density(mmi):
    xi, n = 0.4, 2
    src = SqueezedSource(xi, n)
    rho = propagate(distinguishable_squeezed_state(src).to_density(),
                    hom_circuit(LOSSES, mmi), bins=2)
    full = detection_probabilities(rho)
    pr = hom_pair_resolved(LOSSES, mmi, n)
    _, p_d = pr.probabilities(xi ** 2)
    _, singles_d = pr.singles(xi ** 2)
    assert p_d[0] == pytest.approx(full.p_cc, abs=1e-12)
    assert singles_d[0] == pytest.approx([full.p_c, full.p_d], abs=1e-12)


def test_hom_probabilities_report_deficit():
    res = hom_probabilities(0.3, LOSSES, None, n_max_pairs=5)
    assert res.truncation_deficit == pytest.approx(0.09 ** 6)
    assert 0 <= res.p_i <= res.p_d <= 1


def _mean_photons(rho):
    occ = fock._occupation_array(rho.num_modes, rho.max_total_photons)
    diag = np.real(np.diag(rho.matrix))
    return diag @ occ[:, 0::2].sum(axis=1), diag @ occ[:, 1::2].sum(axis=1)


def test_mean_photon_number_blind_to_distinguishability():
    src = SqueezedSource(0.3, 2)
    circuit = hom_circuit(LossChannelSet(), None)
    ind = propagate(squeezed_state(src).to_density(), circuit)
    dis = propagate(distinguishable_squeezed_state(src).to_density(), circuit, bins=2)
    assert np.allclose(_mean_photons(ind), _mean_photons(dis), atol=1e-9)


def test_threshold_singles_see_bunching():
    # |1,1> bunches: detector c fires with probability 1/2, against 3/4 for
    # distinguishable photons split independently
    pr = hom_pair_resolved(LossChannelSet(), None, 1)
    assert pr.indist[1, 0] == pytest.approx(0.5)
    assert pr.dist[1, 0] == pytest.approx(0.75)


def test_time_bins_keep_photon_statistics():
    src = SqueezedSource(0.3, 3)
    a = fock.photon_number_distribution(squeezed_state(src).to_density())
    b = distinguishable_squeezed_state(src).to_density()
    occ = fock._occupation_array(4, b.max_total_photons)
    diag = np.real(np.diag(b.matrix))
    for k in range(4):
        na, nb = occ[:, 0] + occ[:, 2], occ[:, 1] + occ[:, 3]
        assert diag[(na == k) & (nb == k)].sum() == pytest.approx(a[k, k])


@given(st.floats(0.05, 0.95), st.floats(0.0, 0.6))
@settings(max_examples=15)
def test_loss_moves_through_balanced_coupler(t, xi):
    n = 3
    before = pair_resolved(hom_circuit(LossChannelSet(eta_A=t, eta_B=t), None), n)
    after = pair_resolved(hom_circuit(LossChannelSet(eta_C=t, eta_D=t), None), n)
    assert np.allclose(before.indist, after.indist, atol=1e-9)
    assert np.allclose(before.dist, after.dist, atol=1e-9)


# HOM ----------------------------------------------------------------------

def test_perfect_dip_at_low_pump():
    res = hom_probabilities(1e-3, LossChannelSet(), None)
    assert res.p_i / res.p_d < 1e-5
    w1 = (1 - 1e-6) * 1e-6
    assert res.p_d == pytest.approx(0.5 * w1, rel=1e-3)


def test_phase_error_visibility_low_pump():
    res = hom_probabilities(1e-3, LossChannelSet(), boundary_mmi())
    assert visibility(res.p_i, res.p_d) == pytest.approx(0.920, abs=0.005)
    # amplitude oracle for balanced splitting: 1 - 2 cos^2(phi/2)
    assert two_photon_visibility(
        np.array([[1, 1], [1, np.exp(2.74j)]]) / math.sqrt(2)) == pytest.approx(-math.cos(2.74))


def test_visibility_examples():
    assert visibility(0, 0.5) == 1
    assert visibility(0.25, 0.5) == 0.5
    assert visibility(0.3, 0.3) == 0
    assert visibility(0.6, 0.3) < 0
    with pytest.raises(ValueError):
        visibility(0.1, 0.0)


def test_mixture_visibility_examples():
    xi = 1e-3
    assert mixture_visibility(xi, alpha_ov=0.0) == pytest.approx(0.0, abs=1e-15)
    assert mixture_visibility(xi, alpha_ov=0.955) == pytest.approx(0.955, abs=1e-5)
    assert mixture_visibility(xi, mmi=boundary_mmi(), alpha_ov=0.955) == pytest.approx(0.88, abs=0.01)
    with pytest.raises(ValueError):
        mixture_visibility(xi, alpha_ov=1.5)


@given(st.floats(0.0, 1.0), st.floats(0.0, 0.7))
@settings(max_examples=20)
def test_mixture_visibility_affine_in_overlap(alpha, xi):
    mmi = boundary_mmi()
    v1 = mixture_visibility(xi, mmi=mmi, alpha_ov=1.0)
    assert mixture_visibility(xi, mmi=mmi, alpha_ov=alpha) == pytest.approx(alpha * v1, abs=1e-12)


def test_nominal_matches_low_pump_limit_with_losses():
    mmi = boundary_mmi(2.9)
    v = mixture_visibility(1e-5, LOSSES, mmi, 0.9)
    assert v == pytest.approx(nominal_visibility(mmi, 0.9), abs=1e-6)


@pytest.mark.parametrize("mmi,alpha", [(None, 1.0), (None, 0.5), (boundary_mmi(), 0.955),
                                       (boundary_mmi(2.9), 0.3)])
def test_visibility_decreases_with_pair_probability(mmi, alpha):
    xi = np.linspace(0.01, 0.6, 30)
    curve = visibility_vs_pair_probability(xi, mmi=mmi, alpha_ov=alpha)
    assert np.all(np.diff(curve.visibility) < 0)
    assert np.allclose(curve.pair_probability, xi ** 2)


def test_curve_origin_is_nominal():
    curve = visibility_vs_pair_probability([0.0, 0.1], mmi=boundary_mmi(), alpha_ov=0.955)
    assert curve.visibility[0] == nominal_visibility(boundary_mmi(), 0.955)


def test_dip_reaches_080_at_elevated_pump():
    xi = np.sqrt(np.linspace(0.01, 0.3, 10))
    v = visibility_vs_pair_probability(xi, mmi=boundary_mmi(), alpha_ov=0.955).visibility
    assert np.min(np.abs(v - 0.80)) <= 0.01


def test_delay_scan_shape():
    tau_c = 3e-13
    tau = np.linspace(-20 * tau_c, 20 * tau_c, 2001)
    scan = hom_delay_scan(tau, 0.1, alpha_ov_max=0.9, tau_c=tau_c)
    k0 = np.argmin(scan.coincidence)
    assert tau[k0] == pytest.approx(0, abs=1e-20)
    assert scan.coincidence[0] == pytest.approx(scan.p_d, rel=1e-12)
    depth = 1 - scan.coincidence[k0] / scan.p_d
    assert depth == pytest.approx(mixture_visibility(0.1, alpha_ov=0.9), abs=1e-12)
    half = scan.coincidence[k0] + 0.5 * (scan.p_d - scan.coincidence[k0])
    inside = tau[scan.coincidence < half]
    assert inside.max() - inside.min() == pytest.approx(dip_fwhm(tau_c), rel=0.02)


def test_overlap_model():
    m = OverlapModel(0.8, 1.0)
    assert m.at_delay(0) == 0.8
    assert m.at_delay(1.0) == pytest.approx(0.8 / math.e)
    with pytest.raises(ValueError):
        OverlapModel(1.2)
    with pytest.raises(ValueError):
        LossChannelSet(eta_A=-0.1)


# fringes --------------------------------------------------------------------

def test_default_calibration_spans_one_and_a_half_fringes():
    cal = PhaseCalibration()
    assert cal.k == DEFAULT_PHASE_K
    assert cal.phase(4.5) / (2 * math.pi) == pytest.approx(1.5)


def test_single_photon_fringe_matches_analytic():
    volts = np.linspace(0, 4.5, 101)
    fr = single_photon_fringe(volts)
    assert np.allclose(fr.probability, single_photon_fringe_analytic(fr.phase), atol=1e-9)
    assert fr.probability[0] == pytest.approx(0, abs=1e-15)
    v_pi = math.sqrt(math.pi / DEFAULT_PHASE_K)
    assert single_photon_fringe([v_pi]).probability[0] == pytest.approx(1.0)


def test_two_photon_fringe_matches_shifted_analytic():
    volts = np.linspace(0, 4.5, 101)
    fr = two_photon_fringe(volts)
    assert np.allclose(fr.probability, two_photon_fringe_analytic(fr.phase), atol=1e-9)
    shifted = 0.5 * (1 - np.cos(2 * (fr.phase + math.pi / 2)))
    assert np.allclose(fr.probability, shifted, atol=1e-9)
    assert fr.visibility == pytest.approx(1.0, abs=1e-3)


def test_squeezed_fringe_tracks_pair_fringe_at_low_pump():
    volts = np.linspace(0, 3.0, 25)
    xi_sq = 1e-4
    fr = two_photon_fringe(volts, xi=math.sqrt(xi_sq), n_max_pairs=3)
    ref = (1 - xi_sq) * xi_sq * two_photon_fringe_analytic(fr.phase)
    assert np.allclose(fr.probability, ref, rtol=0, atol=1e-3 * xi_sq)


def test_period_ratio_is_two():
    cal = PhaseCalibration()
    volts = np.sqrt(np.linspace(0, 2 * math.pi, 300) / cal.k)
    s, d = single_photon_fringe(volts), two_photon_fringe(volts)
    assert fringe_period_ratio(s.phase, s.probability, d.probability) == pytest.approx(2.0, abs=0.01)
    with pytest.raises(ValueError):
        fringe_period_ratio(s.phase[:10], s.probability[:10], d.probability[:10])


def test_lossy_fringe_period_ratio():
    volts = np.linspace(0, 4.5, 301)
    mmi = boundary_mmi()
    s = single_photon_fringe(volts, mmi=mmi, losses=LOSSES)
    d = two_photon_fringe(volts, mmi=mmi, alpha_ov=0.9, losses=LOSSES)
    assert fringe_period_ratio(s.phase, s.probability, d.probability) == pytest.approx(2.0, abs=0.01)


def test_fringe_visibility_from_overlap():
    for alpha in (0.0, 0.5, 0.8, 1.0):
        phase = np.linspace(0, math.pi, 129)
        v = two_photon_fringe(np.sqrt(phase / DEFAULT_PHASE_K), alpha_ov=alpha).visibility
        assert v == pytest.approx((1 + alpha) / (3 - alpha), abs=1e-9)
    a = overlap_for_fringe_visibility(0.818)
    assert (1 + a) / (3 - a) == pytest.approx(0.818, abs=1e-9)
    with pytest.raises(ValueError):
        overlap_for_fringe_visibility(0.2)


def test_metrology_threshold():
    assert exceeds_metrology_threshold(0.818)
    assert not exceeds_metrology_threshold(0.7)
    assert not exceeds_metrology_threshold(1 / math.sqrt(2))
    assert fringe_visibility([0.2, 0.8]) == pytest.approx(0.6)


@given(st.floats(0.0, 0.7), st.floats(0.0, 1.0), st.floats(0.1, 1.0), st.floats(0.1, 1.0),
       st.floats(0, 2 * math.pi))
@settings(max_examples=20)
def test_probabilities_in_unit_interval(xi, alpha, ta, td, phase):
    losses = LossChannelSet(ta, 1.0, 1.0, td)
    pr = hom_pair_resolved(losses, None, 6)
    for arr in (*pr.probabilities(xi ** 2), *pr.singles(xi ** 2)):
        assert np.all((arr >= -1e-15) & (arr <= 1 + 1e-12))
    fr = two_photon_fringe([1.0], PhaseCalibration(k=0, phi0=phase), alpha_ov=alpha,
                           losses=losses)
    assert 0 <= fr.probability[0] <= 1


def test_full_pipeline_matches_analytic_low_pump():
    xi = 1e-2
    src = SqueezedSource(xi, 2)
    rho = propagate(squeezed_state(src).to_density(), mzi_circuit(1.1))
    w1 = (1 - xi ** 2) * xi ** 2
    assert detection_probabilities(rho).p_cc / w1 == pytest.approx(
        two_photon_fringe_analytic(1.1), rel=1e-3)
