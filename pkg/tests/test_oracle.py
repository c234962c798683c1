import numpy as np
import pytest
import scipy.linalg as sla

from plateopt.errors import DegenerateMask, ResolutionTooCoarse
from plateopt.geometry import MaterialParams, sitka_spruce
from plateopt.oracle import (
    DEFAULT_RESOLUTION,
    assemble,
    bending_stiffnesses,
    discretize,
    dump_coordinate_format,
    rigid_body_count,
    solve_modes,
)

from support import barbell_boundary, geometry_from_boundary, isotropic, uniform_rect

RES = 150.0  # rectangle tests run a bit below the production default


@pytest.fixture(scope="module")
def rect_plate():
    return discretize(uniform_rect(0.45, 0.30, 3e-3, sitka_spruce()), RES)


@pytest.fixture(scope="module")
def rect_modes(rect_plate):
    return solve_modes(rect_plate)


# -------------------------------------------------------------- discretize

def test_discretize_rectangle_covers_area(rect_plate):
    covered = rect_plate.weights.sum() * rect_plate.h**2
    assert covered == pytest.approx(0.45 * 0.30, rel=1e-3)
    assert rect_plate.n_dof == 3 * len(rect_plate.nodes)
    assert len(rect_plate.boundary_nodes) > 0


def test_discretize_too_coarse():
    sq = geometry_from_boundary(
        np.array([[0, 0], [0.3, 0], [0.3, 0.3], [0, 0.3]], dtype=float)
    )
    with pytest.raises(ResolutionTooCoarse):
        discretize(sq, 100.0)


def test_discretize_disconnected_mask():
    with pytest.raises(DegenerateMask):
        discretize(geometry_from_boundary(barbell_boundary()), RES)


def test_stiffness_cubic_in_thickness():
    th = np.array([2.5e-3, 3.0e-3])
    d11a, d22a, d12a, d66a = bending_stiffnesses(sitka_spruce(), th)
    d11b, d22b, d12b, d66b = bending_stiffnesses(sitka_spruce(), 2 * th)
    for a, b in zip((d11a, d22a, d12a, d66a), (d11b, d22b, d12b, d66b)):
        np.testing.assert_allclose(b, 8 * a, rtol=1e-12)
    # orthotropy: grain direction much stiffer than cross-grain
    assert np.all(d11a > d22a)


# ---------------------------------------------------------------- assembly

def test_matrices_symmetric(rect_plate):
    K, M = assemble(rect_plate)
    assert abs(K - K.T).max() == 0.0
    assert abs(M - M.T).max() == 0.0


def test_stiffness_nullity_exactly_three():
    plate = discretize(
        geometry_from_boundary(
            np.array([[0, 0], [0.28, 0], [0.28, 0.14], [0, 0.14]], dtype=float)
        ),
        145.0,
    )
    K, M = assemble(plate)
    w = sla.eigh(K.toarray(), M.toarray(), eigvals_only=True,
                 subset_by_index=[0, 11])
    rigid_cut = (2 * np.pi * 1.0) ** 2
    assert int((w < rigid_cut).sum()) == 3
    assert w[3] > rigid_cut * 1e3        # clear spectral gap to elastic modes


def test_node_numbering_invariance():
    plate = discretize(
        geometry_from_boundary(
            np.array([[0, 0], [0.28, 0], [0.28, 0.14], [0, 0.14]], dtype=float)
        ),
        145.0,
    )
    K, M = assemble(plate)
    Kd, Md = K.toarray(), M.toarray()
    w = sla.eigh(Kd, Md, eigvals_only=True, subset_by_index=[0, 12])
    perm = np.random.default_rng(0).permutation(K.shape[0])
    wp = sla.eigh(Kd[np.ix_(perm, perm)], Md[np.ix_(perm, perm)],
                  eigvals_only=True, subset_by_index=[0, 12])
    np.testing.assert_allclose(wp[3:], w[3:], rtol=1e-8)


# -------------------------------------------------------------- solve_modes

def test_modal_result_contract(rect_modes):
    f = rect_modes.freqs
    assert f.shape == (10,)
    assert np.all(f > 0)
    assert np.all(np.diff(f) >= 0)
    assert rect_modes.rigid_count == 3
    assert rect_modes.residuals.max() < 1e-8
    d = rect_modes.to_json_dict()
    assert len(d["freqs_hz"]) == 10 and d["resolution"] == RES


def test_isotropic_free_square_mode_ratio():
    # classical free square, nu = 0.3: f2/f1 close to 1.46
    sq = uniform_rect(0.35, 0.35, 3e-3, isotropic(nu=0.3))
    f = solve_modes(discretize(sq, RES)).freqs
    assert f[1] / f[0] == pytest.approx(1.46, abs=0.02)


def test_thickness_scaling_law(rect_modes):
    f_scaled = solve_modes(
        discretize(uniform_rect(0.45, 0.30, 3.3e-3, sitka_spruce()), RES)
    ).freqs
    np.testing.assert_allclose(f_scaled, 1.1 * rect_modes.freqs, rtol=0.002)


def test_density_scaling_law(rect_modes):
    m = sitka_spruce()
    m4 = MaterialParams(rho=4 * m.rho, e_long=m.e_long, e_rad=m.e_rad,
                        e_tan=m.e_tan, nu_lr=m.nu_lr, nu_lt=m.nu_lt, nu_rt=m.nu_rt)
    f_scaled = solve_modes(discretize(uniform_rect(0.45, 0.30, 3e-3, m4), RES)).freqs
    np.testing.assert_allclose(f_scaled, 0.5 * rect_modes.freqs, rtol=0.001)


def test_modulus_scaling_law(rect_modes):
    k, m = 1.5, sitka_spruce()
    mk = MaterialParams(rho=m.rho, e_long=k * m.e_long, e_rad=k * m.e_rad,
                        e_tan=k * m.e_tan, nu_lr=m.nu_lr, nu_lt=m.nu_lt, nu_rt=m.nu_rt)
    f_scaled = solve_modes(discretize(uniform_rect(0.45, 0.30, 3e-3, mk), RES)).freqs
    np.testing.assert_allclose(f_scaled, np.sqrt(k) * rect_modes.freqs, rtol=0.002)


def test_rigid_body_counts(rect_plate):
    assert rigid_body_count(rect_plate) == 3
    assert rigid_body_count(rect_plate, clamped=True) == 0


def test_clamped_plate_has_no_rigid_modes(rect_plate):
    modal = solve_modes(rect_plate, clamped=True)
    assert modal.rigid_count == 0
    assert modal.freqs[0] > 0


def test_coordinate_dump(rect_plate):
    K, _ = assemble(rect_plate)
    lines = dump_coordinate_format(K[:6, :6]).splitlines()
    assert all(len(line.split()) == 3 for line in lines)


@pytest.mark.slow
def test_reference_plate_default_resolution(reference_geometry):
    modal = solve_modes(discretize(reference_geometry, DEFAULT_RESOLUTION))
    assert modal.rigid_count == 3
    assert modal.residuals.max() < 1e-8
    assert np.all(np.diff(modal.freqs) >= 0) and modal.freqs[0] > 50.0
