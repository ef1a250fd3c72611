import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from classevo import kerr
from classevo.errors import DomainError
from classevo.manifold import evolve_constrained
from classevo.phasespace import (
    WIGNER_BOUND,
    CatWigner,
    GridGeometry,
    coherent_fock,
    mean_from_grid,
)

P = kerr.KerrParams(1.0, 0.1)
finite = st.floats(-4, 4, allow_nan=False)


def test_params_derived_ratio():
    p = kerr.KerrParams(2.5, 0.3)
    assert abs(p.chi * p.omega - p.kappa) <= 1e-15 * p.kappa
    for bad in (dict(omega=0.0), dict(omega=-1.0), dict(kappa=-0.1), dict(omega=math.inf)):
        with pytest.raises(DomainError):
            kerr.KerrParams(**bad)


# -- classical flow ----------------------------------------------------------


def test_free_rotation_half_turn():
    assert abs(kerr.classical_flow(3.0, kerr.KerrParams(1.0, 0.0), math.pi) + 3) < 1e-14


def test_flow_at_half_kerr_period():
    assert abs(kerr.classical_flow(3.0, P, math.pi / P.kappa) + 3) < 1e-12


@settings(max_examples=50, deadline=None)
@given(re=finite, im=finite, t=st.floats(-50, 50), kappa=st.floats(0, 1))
def test_flow_conserves_modulus(re, im, t, kappa):
    a0 = complex(re, im)
    a = kerr.classical_flow(a0, kerr.KerrParams(1.0, kappa), t)
    assert abs(abs(a) - abs(a0)) <= 1e-14 * max(1.0, abs(a0))


@settings(max_examples=30, deadline=None)
@given(re=finite, im=finite, t=st.floats(-50, 50))
def test_flow_map_round_trip(re, im, t):
    fm = kerr.kerr_flow_map(P)
    a = complex(re, im)
    assert abs(fm.inverse(fm.forward(a, t), t) - a) < 1e-10 * max(1, abs(a))


def test_flow_is_vectorized():
    a = np.array([1.0, 2j, -3.0])
    out = kerr.classical_flow(a, P, 2.0)
    assert out.shape == (3,)
    assert out[1] == kerr.classical_flow(2j, P, 2.0)


def test_flow_matches_generic_engine():
    t = np.linspace(0, 20, 41)
    rec = evolve_constrained(kerr.kerr_model(P), kerr.kerr_parameter(3.0), t)
    assert np.max(np.abs(rec.states[:, 0] - kerr.classical_flow(3.0, P, t))) < 1e-8


# -- quantum mean ------------------------------------------------------------


def test_mean_without_kerr_is_classical():
    p = kerr.KerrParams(1.3, 0.0)
    for t in (0.0, 0.7, 5.0):
        assert abs(kerr.quantum_mean_coherent(2 - 1j, p, t) - kerr.classical_flow(2 - 1j, p, t)) < 1e-14


def test_mean_revival():
    t = 2 * math.pi / P.kappa
    assert abs(kerr.quantum_mean_coherent(3.0, P, t) - np.exp(-1j * P.omega * t) * 3) < 1e-12


def test_mean_collapse_magnitude():
    t = (math.pi / 2) / P.kappa
    assert abs(abs(kerr.quantum_mean_coherent(3.0, P, t)) - 3 * math.exp(-9)) < 1e-16


def test_small_time_agreement_is_quadratic():
    def gap(kt):
        t = kt / P.kappa
        return abs(kerr.classical_flow(3.0, P, t) - kerr.quantum_mean_coherent(3.0, P, t))

    for kt in (1e-2, 3e-3):
        assert 80 <= gap(kt) / gap(kt / 10) <= 120


# -- Fock propagation --------------------------------------------------------


def test_one_photon_phase():
    phases = kerr.kerr_phases(P, 2.3, 5)
    assert abs(phases[1] - np.exp(-1j * P.omega * 2.3)) < 1e-15
    assert phases[0] == 1


def test_kerr_phases_vanish_at_full_period():
    state = coherent_fock(3.0, 60)
    t = 2 * math.pi / P.kappa
    evolved = kerr.quantum_evolve_fock(state, P, t)
    free = kerr.free_rotation(state, P.omega, t)
    np.testing.assert_allclose(evolved.coeffs, free.coeffs, atol=1e-12)


@pytest.mark.parametrize("kt", [0.1, 1.0, math.pi / 2])
def test_fock_mean_matches_closed_form(kt):
    t = kt / P.kappa
    evolved = kerr.quantum_evolve_fock(coherent_fock(3.0, 60), P, t)
    assert abs(evolved.mean_annihilation() - kerr.quantum_mean_coherent(3.0, P, t)) < 1e-8


def test_norm_preserved():
    state = coherent_fock(2 + 2j, 60)
    for t in (0.3, 17.0, 1e3):
        assert abs(kerr.quantum_evolve_fock(state, P, t).norm() - state.norm()) < 1e-14


# -- structural identity -----------------------------------------------------


def test_heisenberg_coefficients():
    p = kerr.KerrParams(1.7, 0.4)
    coeffs = kerr.heisenberg_coefficients(p)
    assert coeffs == {(1, 1): p.omega, (2, 2): p.omega * p.chi / 2}


@settings(max_examples=40, deadline=None)
@given(re=finite, im=finite)
def test_normally_ordered_symbol_is_classical_field(re, im):
    a = complex(re, im)
    coeffs = kerr.heisenberg_coefficients(P)
    lhs = kerr.normally_ordered_rhs(coeffs, a)
    assert abs(lhs - kerr.classical_vector_field(a, P)) < 1e-12 * max(1, abs(a) ** 3)
    assert abs(lhs - kerr.kerr_model(P).grad(np.array([a]))[0]) < 1e-12 * max(1, abs(a) ** 3)


# -- panels ------------------------------------------------------------------


def test_panel_labels_and_validation():
    assert kerr.panel_spec("qc", 1.0).label == "QC"
    assert kerr.panel_spec("CQ", 1.0).label == "CQ"
    with pytest.raises(DomainError):
        kerr.panel_spec("xx", 1.0)
    with pytest.raises(DomainError):
        kerr.PanelSpec(("coherent",), "classical", 1.0)
    with pytest.raises(DomainError):
        kerr.PanelSpec(("coherent", 1.0), "semi", 1.0)
    with pytest.raises(DomainError):
        kerr.render_panel(kerr.panel_spec("cc", 1.0), P, transport="teleport")


def test_cc_panel(fig1_panels):
    panel = fig1_panels["cc"]
    assert panel.wigner.min >= -1e-9
    assert abs(panel.wigner.integral() - 1) < 1e-3
    # co-rotating frame: the free rotation is removed, the Kerr shift of
    # 0.9 pi per unit time remains, so the packet sits at -3
    assert abs(mean_from_grid(panel.wigner) + 3) < 1e-3


def test_cq_panel_goes_negative(fig1_panels):
    w = fig1_panels["cq"].wigner
    assert w.min < -0.01 * WIGNER_BOUND
    assert abs(w.integral() - 1) < 1e-3


def test_qq_panel_interference(fig1_panels):
    w = fig1_panels["qq"].wigner
    assert w.min < -0.01 * WIGNER_BOUND
    assert abs(w.integral() - 1) < 1e-3
    # sign changes along the imaginary axis between the branches
    i0 = int(np.argmin(np.abs(w.geometry.xs)))
    signs = np.sign(w.values[i0][np.abs(w.values[i0]) > 1e-3])
    assert np.count_nonzero(np.diff(signs)) >= 4


def test_qc_panel_keeps_cat_shape(fig1_panels):
    w = fig1_panels["qc"].wigner
    assert w.min < -0.01 * WIGNER_BOUND
    assert abs(w.integral() - 1) < 1e-3
    # each branch moved by a common phase: the panel is the initial cat rotated by pi
    a1, a2, s = kerr.DEFAULT_CAT
    rotated = CatWigner(-a1, -a2, s)(w.geometry.alphas())
    assert np.max(np.abs(w.values - rotated)) < 1e-9


def test_mean_trajectories(fig1_panels):
    t_end = math.pi / P.kappa
    for mode, panel in fig1_panels.items():
        assert panel.times.size == kerr.TRAJECTORY_SAMPLES
        assert panel.times[0] == 0 and panel.times[-1] == t_end
    cc, cq = fig1_panels["cc"], fig1_panels["cq"]
    rot = np.exp(1j * P.omega * cc.times)
    np.testing.assert_allclose(cc.means, kerr.classical_flow(3.0, P, cc.times) * rot, atol=1e-12)
    expected = np.array([kerr.quantum_mean_coherent(3.0, P, t) for t in cq.times]) * rot
    np.testing.assert_allclose(cq.means, expected, atol=1e-8)


def test_cat_mean_by_manifold_and_by_grid(fig1_panels):
    qc = fig1_panels["qc"]
    assert abs(qc.means[-1] - mean_from_grid(qc.wigner)) < 1e-3
    qq = fig1_panels["qq"]
    assert abs(qq.means[-1] - mean_from_grid(qq.wigner)) < 1e-3


def test_quantum_and_classical_agree_at_start():
    g = GridGeometry((-5, 5), (-5, 5), 61, 61)
    qc = kerr.render_panel(kerr.panel_spec("qc", 0.0), P, g)
    qq = kerr.render_panel(kerr.panel_spec("qq", 0.0), P, g)
    assert np.max(np.abs(qc.wigner.values - qq.wigner.values)) < 1e-8


def test_liouville_transport_option():
    g = GridGeometry((-5, 5), (-5, 5), 101, 101)
    t = 2.0
    spec = kerr.panel_spec("cc", t)
    liou = kerr.render_panel(spec, P, g, transport="liouville")
    assert liou.wigner.min >= -1e-9
    assert abs(liou.wigner.integral() - 1) < 1e-3
    # mean via the transported ensemble equals the grid quadrature
    assert abs(liou.means[-1] - mean_from_grid(liou.wigner)) < 1e-3
    cat = kerr.render_panel(kerr.panel_spec("qc", t), P, g, transport="liouville")
    assert abs(cat.wigner.integral() - 1) < 1e-3


def test_lab_frame_panel():
    g = GridGeometry((-5, 5), (-5, 5), 41, 41)
    t = math.pi  # free rotation of pi plus Kerr phase 0.9 pi
    spec = kerr.panel_spec("cc", t, corotating=False)
    panel = kerr.render_panel(spec, P, g)
    expected = kerr.classical_flow(3.0, P, t)
    assert abs(panel.means[-1] - expected) < 1e-12
