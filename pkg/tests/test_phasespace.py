import json
import math

import numpy as np
import pytest
from scipy.linalg import expm

from classevo import kerr
from classevo.errors import (
    DegenerateStateError,
    DomainError,
    FlowConsistencyError,
    TruncationError,
)
from classevo.phasespace import (
    THREADS_ENV,
    WIGNER_BOUND,
    CatWigner,
    CoherentWigner,
    FlowMap,
    FockDensity,
    FockVector,
    GridGeometry,
    WignerGrid,
    cat_fock,
    coherent_fock,
    coherent_overlap,
    mean_from_grid,
    required_cutoff,
    wigner_direct,
    wigner_of_density,
    wigner_points,
    wigner_pullback,
)

DEFAULT_CAT = kerr.DEFAULT_CAT


def parity_oracle(rho, alphas, dim=80):
    """W = (2/pi) Tr[rho D(a) P D(a)^dag] with D from a matrix exponential."""
    a = np.diag(np.sqrt(np.arange(1, dim)), 1)
    parity = np.diag((-1.0) ** np.arange(dim))
    big = np.zeros((dim, dim), dtype=complex)
    big[: rho.shape[0], : rho.shape[0]] = rho
    out = []
    for al in alphas:
        D = expm(al * a.conj().T - np.conj(al) * a)
        out.append(WIGNER_BOUND * np.trace(big @ D @ parity @ D.conj().T).real)
    return np.array(out)


def random_density(rng, dim, rank=3):
    X = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = X @ X.conj().T
    return rho / np.trace(rho).real


# -- Fock states -------------------------------------------------------------


def test_vacuum_coefficients():
    c = coherent_fock(0.0, 10).coeffs
    assert c[0] == 1 and np.all(c[1:] == 0)


def test_coherent_three():
    v = coherent_fock(3.0, 60)
    assert abs(v.norm() - 1) < 1e-12
    probs = np.abs(v.coeffs) ** 2
    # For integer |alpha|^2 the Poisson weights at 8 and 9 tie exactly.
    assert probs[9] >= probs.max() * (1 - 1e-12)
    assert probs[9] > probs[10] and probs[8] > probs[7]
    assert abs(v.mean_annihilation() - 3.0) < 1e-10
    assert abs(v.mean_number() - 9.0) < 1e-9


def test_coherent_phase_and_mean():
    al = 1.2 * np.exp(0.7j)
    assert abs(coherent_fock(al, 40).mean_annihilation() - al) < 1e-10


def test_truncation_error_reports_cutoff():
    with pytest.raises(TruncationError) as info:
        coherent_fock(5.0, 20)
    need = info.value.required_cutoff
    assert need > 20
    coherent_fock(5.0, need)
    with pytest.raises(DomainError):
        coherent_fock(1.0, -1)


def test_required_cutoff_default_is_enough_for_three():
    assert required_cutoff(3.0) <= 60
    assert required_cutoff(0.0) == 0


def test_cat_identical_branches():
    a = 1.5 - 0.5j
    np.testing.assert_allclose(cat_fock(a, a, 1, 40).coeffs, coherent_fock(a, 40).coeffs,
                               atol=1e-14)


def test_cat_degenerate():
    with pytest.raises(DegenerateStateError):
        cat_fock(2.0, 2.0, -1, 40)
    with pytest.raises(DegenerateStateError):
        CatWigner(2.0, 2.0, -1)
    with pytest.raises(DomainError):
        cat_fock(1.0, -1.0, 0, 40)


def test_default_cat_norm_and_overlap():
    a1, a2, s = DEFAULT_CAT
    assert abs(cat_fock(a1, a2, s, 60).norm() - 1) < 1e-12
    assert abs(abs(coherent_overlap(a1, a2)) - math.exp(-9)) < 1e-18
    # <a1|a2> = e^{-9} e^{9i} for these branches
    assert abs(coherent_overlap(a1, a2) - math.exp(-9) * np.exp(9j)) < 1e-17


def test_cat_truncation_guard():
    with pytest.raises(TruncationError):
        cat_fock(5.0, -5.0, 1, 20)


def test_density_validation():
    with pytest.raises(DomainError):
        FockDensity([[0.5, 0.1], [0.2, 0.5]])
    with pytest.raises(DomainError):
        FockDensity(np.eye(2))
    with pytest.raises(DomainError):
        FockDensity([[1.5, 0], [0, -0.5]])
    with pytest.raises(DomainError):
        FockDensity(np.ones(3))
    rho = FockDensity(np.diag([0.25, 0.75]))
    assert rho.cutoff == 1


# -- Wigner of densities -----------------------------------------------------


def test_vacuum_and_one_photon_at_origin():
    assert abs(wigner_points(coherent_fock(0, 5), [0.0])[0] - 2 / math.pi) < 1e-10
    one = FockVector([0, 1, 0])
    assert abs(wigner_points(one, [0.0])[0] + 2 / math.pi) < 1e-10


def test_kernel_matches_displaced_parity_oracle():
    rng = np.random.default_rng(7)
    rho = random_density(rng, 6)
    pts = rng.normal(scale=0.8, size=12) + 1j * rng.normal(scale=0.8, size=12)
    np.testing.assert_allclose(wigner_points(rho, pts), parity_oracle(rho, pts), atol=1e-10)


def test_coherent_matches_gaussian(default_geometry):
    a0 = 2.0 - 1.0j
    grid = wigner_of_density(coherent_fock(a0, 60), default_geometry)
    exact = CoherentWigner(a0)(default_geometry.alphas())
    assert np.max(np.abs(grid.values - exact)) < 1e-8
    i, j = np.unravel_index(np.argmax(grid.values), grid.values.shape)
    g = default_geometry
    assert abs(g.xs[i] - a0.real) <= g.dx and abs(g.ps[j] - a0.imag) <= g.dp
    assert abs(grid.integral() - 1) < 1e-3


def test_cat_closed_form_matches_fock_evaluation():
    w = CatWigner(*DEFAULT_CAT)
    rng = np.random.default_rng(3)
    pts = rng.uniform(-4, 4, 40) + 1j * rng.uniform(-4, 4, 40)
    np.testing.assert_allclose(w(pts), wigner_points(w.fock(60), pts), atol=1e-10)


def test_mixed_state_integral_and_bounds():
    rng = np.random.default_rng(11)
    rho = random_density(rng, 8, rank=4)
    g = GridGeometry((-6, 6), (-6, 6), 121, 121)
    grid = wigner_of_density(FockDensity(rho), g)
    assert abs(grid.integral() - 1) < 1e-3
    assert grid.min >= -WIGNER_BOUND - 1e-9 and grid.max <= WIGNER_BOUND + 1e-9


@pytest.mark.parametrize("n", [1, 2, 5, 12])
def test_fock_states_saturate_bound(n):
    c = np.zeros(n + 1)
    c[n] = 1
    val = wigner_points(FockVector(c), [0.0])[0]
    assert abs(val - (-1) ** n * WIGNER_BOUND) < 1e-10


def test_far_window_warns():
    g = GridGeometry((-20, 20), (-1, 1), 5, 3)
    with pytest.warns(RuntimeWarning):
        wigner_of_density(coherent_fock(0, 3), g)


def test_threaded_evaluation_is_identical(monkeypatch):
    g = GridGeometry((-4, 4), (-4, 4), 41, 37)
    state = cat_fock(*DEFAULT_CAT, 60)
    monkeypatch.setenv(THREADS_ENV, "1")
    serial = wigner_of_density(state, g)
    monkeypatch.setenv(THREADS_ENV, "4")
    threaded = wigner_of_density(state, g)
    assert serial.values.tobytes() == threaded.values.tobytes()


# -- grid container ----------------------------------------------------------


def test_grid_shape_guard():
    with pytest.raises(DomainError):
        WignerGrid(GridGeometry((-1, 1), (-1, 1), 3, 3), np.zeros((3, 2)))


def test_csv_round_trip(tmp_path):
    g = GridGeometry((-2, 2), (-1, 3), 9, 7)
    grid = wigner_direct(CatWigner(1 + 1j, -1 + 0.5j, 1), g)
    path = tmp_path / "w.csv"
    grid.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,p,w" and len(lines) == 1 + 63
    x, p, _ = lines[2].split(",")
    assert float(x) == g.xs[0] and float(p) == g.ps[1]
    back = WignerGrid.from_csv(path)
    assert back.values.tobytes() == grid.values.tobytes()


def test_json_envelope():
    g = GridGeometry((-1, 1), (-2, 2), 3, 5)
    grid = wigner_direct(CoherentWigner(0.2), g)
    doc = json.loads(grid.to_json())
    assert doc["nx"] == 3 and doc["np"] == 5 and doc["p_range"] == [-2, 2]
    assert doc["values"] == [float(v) for v in grid.values.ravel()]


# -- transport ---------------------------------------------------------------


def test_pullback_at_time_zero_is_direct(default_geometry):
    w0 = CatWigner(*DEFAULT_CAT)
    flow = kerr.kerr_flow_map(kerr.KerrParams())
    pulled = wigner_pullback(w0, flow, 0.0, default_geometry)
    direct = wigner_direct(w0, default_geometry)
    assert pulled.values.tobytes() == direct.values.tobytes()


def test_pullback_of_gaussian_is_nonnegative_and_keeps_peak(default_geometry):
    flow = kerr.kerr_flow_map(kerr.KerrParams(1.0, 0.1))
    w0 = CoherentWigner(3.0)
    before = wigner_direct(w0, default_geometry)
    for t in (1.0, 10.0, 20.0, math.pi / 0.1):
        after = wigner_pullback(w0, flow, t, default_geometry)
        assert after.min >= -1e-9
        assert abs(after.max - before.max) < 1e-3


@pytest.mark.parametrize("t", [0.0, 5.0, 17.3, math.pi / 0.1])
def test_pullback_peak_travels_with_flow(t):
    flow = kerr.kerr_flow_map(kerr.KerrParams(1.0, 0.1))
    peak = flow.forward(np.array([3.0 + 0j]), t)
    g = GridGeometry((peak[0].real, peak[0].real + 1), (peak[0].imag, peak[0].imag + 1), 2, 2)
    after = wigner_pullback(CoherentWigner(3.0), flow, t, g)
    assert abs(after.values[0, 0] - WIGNER_BOUND) < 1e-12


def test_pullback_integral_at_moderate_time(default_geometry):
    flow = kerr.kerr_flow_map(kerr.KerrParams(1.0, 0.1))
    after = wigner_pullback(CoherentWigner(3.0), flow, 5.0, default_geometry)
    assert abs(after.integral() - 1) < 1e-3


def test_inconsistent_flow_is_rejected():
    bad = FlowMap(forward=lambda a, t: a * np.exp(-1j * t), inverse=lambda a, t: a)
    with pytest.raises(FlowConsistencyError):
        wigner_pullback(CoherentWigner(1.0), bad, 0.5, GridGeometry((-1, 1), (-1, 1), 3, 3))


# -- means -------------------------------------------------------------------


def test_mean_of_vacuum_grid(default_geometry):
    grid = wigner_direct(CoherentWigner(0.0), default_geometry)
    assert abs(mean_from_grid(grid)) < 1e-6


def test_mean_of_coherent_grid(default_geometry):
    grid = wigner_of_density(coherent_fock(3.0, 60), default_geometry)
    assert abs(mean_from_grid(grid) - 3.0) < 1e-3


def test_cat_mean_three_ways(default_geometry):
    w = CatWigner(*DEFAULT_CAT)
    fock_mean = w.fock(60).mean_annihilation()
    assert abs(w.mean() - fock_mean) < 1e-10
    assert abs(mean_from_grid(wigner_direct(w, default_geometry)) - fock_mean) < 1e-3
