import json
import math
from pathlib import Path

import numpy as np
import pytest

from toroton import torus as T
from toroton.errors import GeometryError
from toroton.medium import MediumParams, WaveParams
from toroton.radial import solve_profile

FIXTURE = json.loads((Path(__file__).parent / "fixtures" / "torus_reference.json").read_text())
SAT = MediumParams(d_eps=0.2, i_sat=1.0)
W = WaveParams.from_k0(1.0, SAT)


@pytest.fixture(scope="module")
def prof():
    return solve_profile(2.0, SAT, W)


# -- Cartesian embedding oracle ------------------------------------------------
# X = rho cos(alpha), Y = -rho sin(alpha), Z = r sin(theta), rho = R + r cos(theta)

def _frame(R, r, theta, alpha):
    rho = R + r * np.cos(theta)
    rho_hat = np.stack([np.cos(alpha), -np.sin(alpha), np.zeros_like(alpha)])
    z_hat = np.stack([np.zeros_like(alpha), np.zeros_like(alpha), np.ones_like(alpha)])
    a_hat = np.stack([-np.sin(alpha), -np.cos(alpha), np.zeros_like(alpha)])
    r_hat = np.cos(theta) * rho_hat + np.sin(theta) * z_hat
    t_hat = -np.sin(theta) * rho_hat + np.cos(theta) * z_hat
    pos = rho * rho_hat + r * np.sin(theta) * z_hat
    return pos, r_hat, t_hat, a_hat


def _local(R, X):
    rho = np.hypot(X[0], X[1])
    alpha = np.arctan2(-X[1], X[0])
    r = np.hypot(rho - R, X[2])
    theta = np.arctan2(X[2], rho - R)
    return r, theta, alpha


def _cartesian_curl(field, R, X, h=1e-4):
    """Central-difference curl of ``field(r, theta, s)`` pushed to Cartesian components."""

    def F(Xp):
        r, th, a = _local(R, Xp)
        _, rh, th_hat, ah = _frame(R, r, th, a)
        er, et, ea = field(r, th, R * a)
        return er * rh + et * th_hat + ea * ah

    J = np.empty((3, 3) + X.shape[1:])
    for j in range(3):
        d = np.zeros_like(X)
        d[j] = h
        J[:, j] = (F(X + d) - F(X - d)) / (2 * h)
    return np.stack([J[2, 1] - J[1, 2], J[0, 2] - J[2, 0], J[1, 0] - J[0, 1]])


def _check_embedding(field, C, r, theta, s, sel):
    R = 1.0 / C
    rr, tt, ss = np.meshgrid(r, theta, s, indexing="ij")
    comps = T.curl_components_curved(*field(rr, tt, ss), r, theta, s, C)
    pts = (rr[sel], tt[sel], ss[sel] / R)
    pos, rh, th_hat, ah = _frame(R, *pts)
    ref = _cartesian_curl(field, R, pos)
    scale = np.max(np.abs(ref))
    for got, basis in zip(comps, (rh, th_hat, ah)):
        want = np.sum(ref * basis, axis=0)
        assert np.max(np.abs(got[sel] - want)) < 1e-6 * scale


def test_curl_matches_cartesian_embedding_theta_dependence():
    C = 0.05

    def field(r, th, s):
        return 0.3 + 0.2 * r * np.cos(th), 0.5 * r + 0 * th, 0.7 + 0 * r

    r = np.linspace(0.5, 2.0, 7)
    theta = 2 * np.pi * np.arange(8192) / 8192
    s = np.arange(4) * 0.5
    sel = (slice(None), slice(None, None, 512), slice(0, 1))
    _check_embedding(field, C, r, theta, s, sel)


def test_curl_matches_cartesian_embedding_axial_dependence():
    C = 0.05
    k = 2 * np.pi / (2 * np.pi / C)  # one period around the loop

    def field(r, th, s):
        return 0.4 * np.cos(3 * k * s) + 0 * r, 0.6 * r * np.sin(2 * k * s) + 0 * th, 0 * r + 0 * s

    r = np.linspace(0.5, 2.0, 7)
    theta = 2 * np.pi * np.arange(8) / 8
    s = np.arange(8192) * (2 * np.pi / C) / 8192
    sel = (slice(None), slice(None), slice(None, None, 512))
    _check_embedding(field, C, r, theta, s, sel)


def test_constant_radial_field_is_curl_free():
    r = np.linspace(0.5, 2.0, 5)
    theta = 2 * np.pi * np.arange(16) / 16
    s = np.arange(4.0)
    er = np.ones((5, 16, 4))
    for c in T.curl_components_curved(er, 0 * er, 0 * er, r, theta, s, 0.1):
        assert np.max(np.abs(c)) < 1e-12


def _smooth_profile():
    # analytic profile on a very fine grid so interpolation does not pollute the stencil
    from toroton.radial import RadialProfile

    r = np.linspace(0.0, 8.0, 800001)
    e = np.exp(-r**2 / 4)
    return RadialProfile(r, e, -r / 2 * e, 1.04, 0.3, 0.0)


def _richardson_curl_sq(prof, i, C, n):
    r = prof.r_grid[i - 1:i + 2]
    period = 2 * np.pi / prof.beta
    out = []
    for m in (n, 2 * n):
        theta = 2 * np.pi * np.arange(m) / m
        s = np.arange(m) * period / m
        out.append(T.curl_sq_curved_grid(prof, r, theta, s, C)[1, ::m // n, 0])
    coarse, fine = out
    return r[1], (4 * fine - coarse) / 3, 2 * np.pi * np.arange(n) / n


@pytest.mark.parametrize("C", [0.0, 0.05])
def test_closed_form_matches_finite_differences(C):
    smooth = _smooth_profile()
    for i in (70000, 200000, 400000):
        r0, fd, theta = _richardson_curl_sq(smooth, i, C, 256)
        exact = T.curl_sq_curved(smooth, W, r0, theta, C)
        assert np.max(np.abs(fd - exact)) < 1e-6 * np.max(exact)


def test_longitudinal_term(prof):
    r = np.array([0.0, 1.0, 3.0])
    got = T.curl_sq_straight(prof, W, r, 0.3, "longitudinal")
    assert np.allclose(got, prof.beta**2 * prof(r) ** 2 / 2, rtol=1e-15)
    full = T.curl_sq_straight(prof, W, r, 0.0)
    assert np.allclose(full, got, rtol=1e-15)


def test_zero_field_has_zero_curl(prof):
    from toroton.radial import RadialProfile

    z = RadialProfile(prof.r_grid, 0 * prof.e_t, 0 * prof.de_t, prof.beta, prof.kappa, 0.0)
    assert np.all(T.curl_sq_curved(z, W, prof.r_grid[:50], 0.4, 0.02) == 0.0)


def test_reduction_constant_stable_under_refinement(prof):
    for C in (1e-3, 1e-2, 1e-1):
        ks = []
        for n in (64, 128):
            r = np.linspace(0.2, 4.0, n)
            theta = 2 * np.pi * np.arange(n) / n
            s = np.arange(n) * (2 * np.pi / prof.beta) / n
            ks.append(T.reduction_constant(prof, r, theta, s, C))
        assert abs(ks[1] / ks[0] - 1) < 0.1


def test_geometry_guards():
    with pytest.raises(GeometryError):
        T.TorusGeometry(0.0)
    with pytest.raises(GeometryError):
        T.TorusGeometry.from_curvature(10.0).check(1.0)


# -- index asymmetry and gamma ---------------------------------------------------

def test_odd_moment_of_index(prof):
    p = MediumParams(d_eps=0.2, i_sat=1.0, mu1=0.05, u_sat=1.0)
    grid = T.PolarGrid(prof.core_radius(1e-2), 100, 64)
    _, _, n0 = T.delta_index_field(prof, p, W, 0.0, grid)
    assert abs(T.odd_moment(n0, grid)) < 1e-12
    _, _, n1 = T.delta_index_field(prof, p, W, 0.02, grid)
    assert T.odd_moment(n1, grid) < 0
    _, _, a = T.delta_index_field(prof, SAT, W, 0.0, grid)
    _, _, b = T.delta_index_field(prof, SAT, W, 0.02, grid)
    assert np.array_equal(a, b)


def test_gamma_vanishes_without_magnetic_response(prof):
    grid = T.PolarGrid(prof.core_radius(1e-2), 100, 64)
    assert T.gamma_zero(prof, SAT, W, grid) == 0.0
    assert abs(T.gamma_of_c(prof, SAT, W, 0.01, grid)) < 1e-12


def test_gamma_flat_for_linear_response(prof):
    p = MediumParams(d_eps=0.2, i_sat=1.0, mu1=0.05, u_sat=math.inf)
    grid = T.PolarGrid(prof.core_radius(1e-2), 200, 64)
    g = [T.gamma_of_c(prof, p, W, c, grid) for c in (0.0, 1e-3, 1e-2)]
    assert g[0] > 0
    assert max(g) / min(g) - 1 < 0.01


def test_gamma_rejects_negative_curvature(prof):
    with pytest.raises(GeometryError):
        T.gamma_of_c(prof, SAT, W, -1e-3)


# -- crossings -------------------------------------------------------------------

C_HAT = 0.0123


def test_synthetic_stable_crossing():
    scan = T.scan_crossings(lambda c: 2 / (1 + c / C_HAT), np.linspace(1e-3, 0.05, 30))
    assert scan.stability and len(scan.crossings) == 1
    assert scan.c0 == pytest.approx(C_HAT, rel=1e-8)
    assert abs(2 / (1 + scan.c0 / C_HAT) - 1) < 1e-9
    assert scan.r0 == pytest.approx(1 / C_HAT, rel=1e-8)


def test_synthetic_unstable_crossing():
    scan = T.scan_crossings(lambda c: c / C_HAT, np.linspace(1e-3, 0.05, 30))
    assert not scan.stability and scan.c0 is None
    (cr,) = scan.crossings
    assert not cr.stable and abs(cr.gamma - 1) < 1e-9


def test_crossing_on_grid_point_counted_once():
    scan = T.scan_crossings(lambda c: 2 - c, [0.0, 0.5, 1.0, 1.5, 2.0])
    assert [cr.c for cr in scan.crossings] == [1.0]


def test_find_fixed_point_rejects_axis_inside_core(prof):
    grid = T.PolarGrid(5.0, 20, 16)
    with pytest.raises(GeometryError):
        T.find_fixed_point(prof, SAT, W, (1e-3, 0.3), 5, grid)


# -- quantization ----------------------------------------------------------------

HALF = WaveParams.from_k0(4 * math.pi, MediumParams())  # lambda_med = 0.5


def test_quantize_nearest_example():
    assert HALF.lambda_med == pytest.approx(0.5, rel=1e-15)
    (sol,) = T.quantize(1.0, HALF)
    assert sol.m == 13
    assert sol.lambda_adj == pytest.approx(2 * math.pi / 13, abs=1e-10)
    assert sol.lambda_adj == pytest.approx(0.48332, abs=1e-5)
    assert sol.freq_shift == pytest.approx(1.03451, abs=1e-5)
    assert sol.freq_shift == pytest.approx(0.5 * 13 / (2 * math.pi), abs=1e-10)


def test_quantize_all_within_example():
    sols = T.quantize(1.0, HALF, "all-within", 0.1)
    assert [s.m for s in sols] == [12, 13]
    assert [round(s.freq_shift, 5) for s in sols] == [0.95493, 1.03451]


@pytest.mark.parametrize("r0", [3.0, 12.9, 40.0, 101.7])
def test_quantize_exact(r0):
    for sol in T.quantize(r0, W, "all-within", 0.2):
        assert abs(2 * math.pi * r0 - sol.m * sol.lambda_adj) <= 1e-10 * 2 * math.pi * r0
        assert sol.freq_shift == pytest.approx(W.lambda_med / sol.lambda_adj, rel=1e-15)


def test_quantize_commensurate_radius():
    r0 = 7 * W.lambda_med / (2 * math.pi)
    (sol,) = T.quantize(r0, W)
    assert sol.m == 7
    assert sol.freq_shift == pytest.approx(1.0, abs=1e-12)


def test_quantize_policies_and_errors():
    r0 = 12.5 * W.lambda_med / (2 * math.pi)
    sols = T.quantize(r0, W, "all-within", 0.1)
    assert [s.m for s in sols] == [12, 13]
    assert sols[0].freq_shift == pytest.approx(12 / 12.5)
    assert sols[1].freq_shift == pytest.approx(13 / 12.5)
    with pytest.raises(T.NoTorusError):
        T.quantize(0.1, W)
    with pytest.raises(T.NoTorusError):
        T.quantize(-1.0, W)
    with pytest.raises(ValueError):
        T.quantize(5.0, W, "any")


def test_torus_energy():
    unit = T.TorusSolution(1.0, 1, 2 * math.pi, 0.0, 1.0)
    assert T.torus_energy(1.0, unit, 1.0) == pytest.approx(2 * math.pi, rel=1e-15)
    (sol,) = T.quantize(7 * W.lambda_med / (2 * math.pi), W)
    assert T.torus_energy(1.0, sol) == pytest.approx(7 * sol.lambda_adj)
    assert T.torus_energy(2.0, sol, eps_lin=4.0) == pytest.approx(4 * T.torus_energy(1.0, sol))
    big = T.TorusSolution(sol.r0, 2 * sol.m, sol.lambda_adj, 0.0, sol.freq_shift)
    assert T.torus_energy(1.0, big) == pytest.approx(2 * T.torus_energy(1.0, sol))


# -- sweeps ----------------------------------------------------------------------

def test_expand_grid_order():
    cells = T.expand_grid({"a": [1, 2], "b": [3]})
    assert cells == [{"a": 1, "b": 3}, {"a": 2, "b": 3}]
    assert T.expand_grid({}) == [{}]
    assert T.expand_grid([]) == []


def test_sweep_reports_errors_and_no_crossing_without_mu():
    cells = T.sweep_gamma({"mu1": [0.0], "i_sat": [1.0, -1.0]}, (1e-3, 0.02), SAT, e0=2.0,
                          n_scan=4, grid_fraction=1e-2, nr=60, ntheta=32)
    assert len(cells) == 2
    assert not cells[0].has_crossing and cells[0].error is None
    assert cells[0].gamma_max == pytest.approx(0.0, abs=1e-12)
    assert "i_sat" in cells[1].error
    assert T.sweep_gamma([], (1e-3, 0.02), SAT) == []


def test_fixture_cell_reproduces_pinned_crossing():
    med = MediumParams(**FIXTURE["medium"])
    res = FIXTURE["resolutions"][0]
    (cell,) = T.sweep_gamma([{}], tuple(FIXTURE["c_range"]), med, e0=FIXTURE["e0"], n_scan=FIXTURE["n_scan"],
                            grid_fraction=FIXTURE["core_fraction"], nr=res["nr"], ntheta=res["ntheta"])
    assert cell.has_crossing
    assert cell.stable == res["crossings"][0]["stable"]
