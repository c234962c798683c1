import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plateopt.errors import PerturbationInfeasible, SelfIntersectingOutline
from plateopt.geometry import (
    BODY_LENGTH,
    MATERIAL_KEYS,
    N_OUTLINE,
    N_PARAMS,
    N_THICKNESS,
    MaterialParams,
    OutlineParams,
    PlateParams,
    ThicknessParams,
    _points_inside,
    perturb,
    realize,
    reference_params,
    shoelace_area,
    sitka_spruce,
)


def params_with(p=None, t=None, m=None):
    base = reference_params()
    return PlateParams(
        outline=OutlineParams(np.ones(N_OUTLINE) if p is None else p),
        thickness=ThicknessParams(np.ones(N_THICKNESS) if t is None else t),
        material=m or base.material,
    )


# ---------------------------------------------------------------- validation

def test_outline_length_and_range_validated():
    with pytest.raises(ValueError):
        OutlineParams(np.ones(19))
    with pytest.raises(ValueError):
        OutlineParams(np.full(N_OUTLINE, 2.0))
    with pytest.raises(ValueError):
        OutlineParams(np.zeros(N_OUTLINE))


def test_thickness_params_validated():
    with pytest.raises(ValueError):
        ThicknessParams(np.ones(7))
    with pytest.raises(ValueError):
        ThicknessParams(np.array([1.0] * 7 + [0.0]))


def test_material_params_validated():
    good = sitka_spruce()
    with pytest.raises(ValueError):
        MaterialParams(rho=-1, e_long=1e9, e_rad=1e8, e_tan=1e8,
                       nu_lr=0.3, nu_lt=0.3, nu_rt=0.3)
    with pytest.raises(ValueError):
        MaterialParams(rho=400, e_long=1e9, e_rad=1e8, e_tan=1e8,
                       nu_lr=0.6, nu_lt=0.3, nu_rt=0.3)
    # positive-definiteness of the in-plane stiffness relations
    with pytest.raises(ValueError):
        MaterialParams(rho=400, e_long=1e8, e_rad=4.9e9, e_tan=1e8,
                       nu_lr=0.49, nu_lt=0.3, nu_rt=0.3)
    assert good.rho == 400.0 and good.e_long == 10.8e9


def test_vector_round_trip():
    x = reference_params().to_vector()
    assert x.shape == (N_PARAMS,)
    assert np.array_equal(PlateParams.from_vector(x).to_vector(), x)
    with pytest.raises(ValueError):
        PlateParams.from_vector(np.ones(34))


def test_json_round_trip():
    p = reference_params()
    d = json.loads(p.dumps())
    assert set(d) == {"p", "t", "m"}
    assert len(d["p"]) == N_OUTLINE and len(d["t"]) == N_THICKNESS
    assert set(d["m"]) == set(MATERIAL_KEYS)
    assert np.array_equal(PlateParams.loads(p.dumps()).to_vector(), p.to_vector())


# ------------------------------------------------------------------- realize

def test_identity_reproduces_control_points(ref_plate):
    # 640 boundary samples put one sample exactly at each control station
    geom = realize(reference_params(), ref_plate, n_boundary=640)
    dev = np.abs(geom.boundary[::32] - ref_plate.control_points()).max()
    assert dev < 1e-9


def test_reference_dimensions(ref_plate, reference_geometry):
    b = reference_geometry.boundary
    # spline through the control stations may overshoot by a hair
    assert b[:, 0].max() - b[:, 0].min() == pytest.approx(BODY_LENGTH, rel=1e-3)
    assert reference_geometry.area > 0


def test_reference_thickness_range(reference_geometry):
    b = reference_geometry.boundary
    xs = np.linspace(b[:, 0].min(), b[:, 0].max(), 80)
    ys = np.linspace(b[:, 1].min(), b[:, 1].max(), 60)
    pts = np.array([[x, y] for x in xs for y in ys])
    th = reference_geometry.thickness_at(pts[_points_inside(b, pts)])
    assert th.min() >= 2.0e-3 and th.max() <= 5.0e-3


def test_uniform_radial_scaling_scales_area_quadratically(ref_plate, reference_geometry):
    a0 = reference_geometry.area
    for k in (1.1, 1.05, 0.9):
        ak = realize(params_with(p=np.full(N_OUTLINE, k)), ref_plate).area
        assert ak / a0 == pytest.approx(k**2, rel=1e-9)


def test_single_point_shrink_reduces_area(ref_plate, reference_geometry):
    p = np.ones(N_OUTLINE)
    p[5] = 0.8
    geom = realize(params_with(p=p), ref_plate)
    assert geom.area < reference_geometry.area
    # independent shoelace evaluation on a denser sampling of the same spline
    dense = realize(params_with(p=p), ref_plate, n_boundary=4096)
    assert geom.area == pytest.approx(shoelace_area(dense.boundary), rel=1e-3)


def test_area_self_convergence(ref_plate):
    a256 = realize(reference_params(), ref_plate, n_boundary=256).area
    a1024 = realize(reference_params(), ref_plate, n_boundary=1024).area
    assert abs(a256 - a1024) / a1024 < 1e-3


def test_self_intersecting_outline_rejected(ref_plate):
    p = np.ones(N_OUTLINE)
    p[::2], p[1::2] = 0.25, 1.9
    with pytest.raises(SelfIntersectingOutline):
        realize(params_with(p=p), ref_plate)


def test_thickness_linearity(ref_plate, reference_geometry, rng):
    b = reference_geometry.boundary
    pts = reference_geometry.ref.centroid + 0.5 * (b[::37] - reference_geometry.ref.centroid)
    t = rng.uniform(0.5, 1.5, N_THICKNESS)
    g1 = realize(params_with(t=t), ref_plate)
    g2 = realize(params_with(t=2 * t), ref_plate)
    np.testing.assert_allclose(g2.thickness_at(pts), 2 * g1.thickness_at(pts), rtol=1e-12)
    # additivity in the coefficients
    u = rng.uniform(0.5, 1.5, N_THICKNESS)
    ga = realize(params_with(t=u), ref_plate)
    gsum = realize(params_with(t=t + u), ref_plate)
    np.testing.assert_allclose(
        gsum.thickness_at(pts),
        g1.thickness_at(pts) + ga.thickness_at(pts),
        rtol=1e-12,
    )


def test_geometry_json_export(reference_geometry):
    d = reference_geometry.to_json_dict(thickness_grid=16)
    assert d["area_m2"] == pytest.approx(reference_geometry.area)
    grid = d["thickness_grid"]
    assert len(grid["x"]) == 16 and len(grid["thickness_m"]) == 16
    vals = np.asarray(grid["thickness_m"], dtype=float)
    assert np.isnan(vals).any()          # corners outside the outline
    assert np.nanmin(vals) > 0


# ------------------------------------------------------------------- perturb

def test_perturb_sigma_zero_is_identity(rng):
    p = reference_params()
    out = perturb(p, {"outline", "thickness", "material"}, 0.0, rng)
    assert np.array_equal(out.to_vector(), p.to_vector())


def test_perturb_touches_only_selected_family(rng):
    p = reference_params()
    out = perturb(p, {"outline"}, 0.05, rng)
    assert not np.array_equal(out.outline.p, p.outline.p)
    assert np.array_equal(out.thickness.t, p.thickness.t)
    assert np.array_equal(out.material.as_vector(), p.material.as_vector())


def test_perturb_deterministic_given_seed():
    p = reference_params()
    a = perturb(p, {"outline", "material"}, 0.05, np.random.default_rng(42))
    b = perturb(p, {"outline", "material"}, 0.05, np.random.default_rng(42))
    assert np.array_equal(a.to_vector(), b.to_vector())


def test_perturb_rejects_unknown_family(rng):
    with pytest.raises(ValueError):
        perturb(reference_params(), {"bogus"}, 0.05, rng)
    with pytest.raises(ValueError):
        perturb(reference_params(), {"outline"}, -0.1, rng)


def test_perturb_statistics():
    rng = np.random.default_rng(2024)
    p = reference_params()
    deltas = []
    for _ in range(1250):
        out = perturb(p, {"thickness"}, 0.05, rng)
        deltas.extend(out.thickness.t - 1.0)
    deltas = np.asarray(deltas)
    assert deltas.size == 10000
    assert abs(deltas.mean()) < 0.002
    assert 0.048 < deltas.std() < 0.052


def test_perturb_infeasible_raises():
    # outline component already at 1.99 with huge sigma cannot stay in (0, 2)
    p = np.ones(N_OUTLINE)
    p[0] = 1.99
    start = params_with(p=p)
    with pytest.raises(PerturbationInfeasible):
        perturb(start, {"outline"}, 50.0, np.random.default_rng(0), max_redraws=5)


# ---------------------------------------------------------------- properties

@given(st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_perturbed_vectors_stay_valid(seed):
    rng = np.random.default_rng(seed)
    out = perturb(reference_params(), {"outline", "thickness", "material"}, 0.05, rng)
    x = out.to_vector()
    back = PlateParams.from_vector(x)       # would raise on invariant break
    assert np.array_equal(back.to_vector(), x)
    assert np.all((x[:N_OUTLINE] > 0) & (x[:N_OUTLINE] < 2))
    assert np.all(x[N_OUTLINE:N_OUTLINE + N_THICKNESS] > 0)


@given(st.floats(min_value=0.7, max_value=1.4))
@settings(max_examples=20, deadline=None)
def test_shoelace_scales_quadratically(k):
    square = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    assert shoelace_area(k * square) == pytest.approx(k**2, rel=1e-12)


def test_shoelace_unit_square():
    square = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    assert shoelace_area(square) == 1.0
    assert shoelace_area(square[::-1]) == 1.0   # winding-independent
