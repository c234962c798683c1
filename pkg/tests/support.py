"""Shared helpers for the test suite: simple geometries and a handmade model."""

from __future__ import annotations

import numpy as np

from plateopt.geometry import (
    THICKNESS_FLOOR,
    MaterialParams,
    PlateGeometry,
    ReferencePlate,
    reference_params,
    sitka_spruce,
)
from plateopt.surrogate import SurrogateModel


def rect_boundary(lx: float, ly: float, n_per_side: int = 200) -> np.ndarray:
    """Dense closed polyline around an axis-aligned lx x ly rectangle."""
    t = np.linspace(0.0, 1.0, n_per_side, endpoint=False)
    return np.vstack(
        [
            np.column_stack([t * lx, np.zeros(n_per_side)]),
            np.column_stack([np.full(n_per_side, lx), t * ly]),
            np.column_stack([(1 - t) * lx, np.full(n_per_side, ly)]),
            np.column_stack([np.zeros(n_per_side), (1 - t) * ly]),
        ]
    )


def geometry_from_boundary(
    boundary: np.ndarray,
    thickness: float = 3e-3,
    material: MaterialParams | None = None,
) -> PlateGeometry:
    """Uniform-thickness plate over an arbitrary boundary polyline."""
    material = material or sitka_spruce()
    ref = ReferencePlate(
        centroid=boundary.mean(axis=0),
        control_angles=np.linspace(0.0, 2 * np.pi, 20, endpoint=False),
        control_radii=np.full(20, 0.1),
        bump_centers=np.zeros((8, 2)),
        bump_sigma=np.array([1.0, 1.0]),
        bump_amps=np.zeros(8),
        material=material,
    )
    return PlateGeometry(
        boundary=boundary,
        ref=ref,
        thickness_coeffs=np.full(8, thickness / THICKNESS_FLOOR),
        material=material,
    )


def uniform_rect(
    lx: float, ly: float, thickness: float, material: MaterialParams
) -> PlateGeometry:
    return geometry_from_boundary(rect_boundary(lx, ly), thickness, material)


def isotropic(e: float = 10e9, rho: float = 400.0, nu: float = 0.3) -> MaterialParams:
    return MaterialParams(
        rho=rho, e_long=e, e_rad=e, e_tan=e, nu_lr=nu, nu_lt=nu, nu_rt=nu
    )


def barbell_boundary(neck: float = 1e-3) -> np.ndarray:
    """Two squares joined by a neck far thinner than any sane grid cell."""
    pts = [
        (0.0, 0.0), (0.2, 0.0), (0.2, 0.1 - neck / 2), (0.3, 0.1 - neck / 2),
        (0.3, 0.0), (0.5, 0.0), (0.5, 0.2), (0.3, 0.2),
        (0.3, 0.1 + neck / 2), (0.2, 0.1 + neck / 2), (0.2, 0.2), (0.0, 0.2),
    ]
    out = []
    for i in range(len(pts)):
        a = np.array(pts[i])
        b = np.array(pts[(i + 1) % len(pts)])
        for t in np.linspace(0.0, 1.0, 60, endpoint=False):
            out.append(a + t * (b - a))
    return np.array(out)


def handmade_model(seed: int = 7, hidden: int = 8) -> SurrogateModel:
    """Small deterministic model with positive, parameter-sensitive outputs.

    Predictions stay within roughly +-20 Hz of an ascending 120..700 Hz
    baseline for any input, so downstream loss specs always see positive
    spectra.
    """
    rng = np.random.default_rng(seed)
    x_mean = reference_params().to_vector()
    x_std = 0.05 * np.abs(x_mean)
    y_mean = np.linspace(120.0, 700.0, 10)
    y_std = np.full(10, 8.0)
    model = SurrogateModel(
        w1=rng.uniform(-0.6, 0.6, (hidden, 35)),
        b1=rng.uniform(-0.2, 0.2, hidden),
        w2=rng.uniform(-0.3, 0.3, (10, hidden)),
        b2=np.zeros(10),
        x_mean=x_mean,
        x_std=x_std,
        y_mean=y_mean,
        y_std=y_std,
        fit_report={
            "trained": True,
            "r2_test_aggregate": 0.97,
            "loss_trace": [1.0, 0.4, 0.1],
            "epochs": 2,
        },
    )
    return model


def ungated_model() -> SurrogateModel:
    m = handmade_model()
    m.fit_report = dict(m.fit_report, r2_test_aggregate=0.42)
    return m
