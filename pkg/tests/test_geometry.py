from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noncollapse_lab.geometry import (
    AXIS,
    OPEN,
    GeometryError,
    curvature_polyline,
    curvature_revolution,
    enclosed_measure,
    ensure_quasi_uniform,
    is_embedded,
    laplace_beltrami,
    parse_slice,
    resample,
    tangential_gradient,
    write_slice,
)
from noncollapse_lab.models import ellipse
from noncollapse_lab.studies import curvature_study, fit_order


def circle_points(N, rho=1.0, center=(0.0, 0.0)):
    th = 2 * np.pi * np.arange(N) / N
    return rho * np.stack([np.cos(th), np.sin(th)], axis=1) + np.asarray(center)


def cross2(u, v):
    return u[0] * v[1] - u[1] * v[0]


def sphere_profile(N, rho=1.0):
    th = (np.arange(N) + 0.5) * np.pi / N
    return rho * np.stack([np.sin(th), -np.cos(th)], axis=1)


def test_regular_polygon_curvature():
    sl = curvature_polyline(circle_points(1000))
    assert np.max(np.abs(sl.profile_curvature - 1.0)) < 1e-5
    assert np.allclose(np.linalg.norm(sl.normals, axis=1), 1.0, atol=1e-12)
    # outward normal of a counter-clockwise circle is the position
    assert np.allclose(sl.normals, sl.points, atol=1e-10)


def test_tangent_normal_orthogonal():
    sl = ellipse(2.0, 1.0, 300)
    assert np.max(np.abs(np.einsum("ij,ij->i", sl.tangents, sl.normals))) < 1e-10


def test_collinear_vertex_has_zero_curvature():
    # stadium: two straight sides joined by unit half-circles
    top = np.stack([np.linspace(1, -1, 9), np.ones(9)], axis=1)[:-1]
    th = np.linspace(np.pi / 2, 3 * np.pi / 2, 17)[:-1]
    left = np.stack([-1 + np.cos(th), np.sin(th)], axis=1)
    bottom = -top
    right = -left
    sl = curvature_polyline(np.vstack([bottom, right, top, left]))
    assert abs(sl.profile_curvature[3]) < 1e-12


def test_ellipse_vertex_curvature():
    sl = ellipse(2.0, 1.0, 4096)
    assert abs(sl.profile_curvature[0] - 2.0) < 1e-3


def test_degenerate_and_self_intersecting():
    pts = circle_points(16)
    pts[3] = pts[2]
    with pytest.raises(GeometryError, match="degenerate vertex"):
        curvature_polyline(pts)
    th = 2 * np.pi * np.arange(64) / 64
    figure_eight = np.stack([np.sin(th), np.sin(th) * np.cos(th)], axis=1)
    with pytest.raises(GeometryError, match="not embedded"):
        curvature_polyline(figure_eight)
    with pytest.raises(GeometryError):
        curvature_polyline(circle_points(5))


def test_embedding_test_agrees_with_brute_force():
    rng = np.random.default_rng(3)
    for _ in range(20):
        pts = rng.normal(size=(12, 2))
        n = len(pts)
        a, b = pts, np.roll(pts, -1, axis=0)
        crossing = False
        for i in range(n):
            for j in range(i + 2, n):
                if i == 0 and j == n - 1:
                    continue
                p, q, r, s = a[i], b[i], a[j], b[j]
                d1 = cross2(q - p, r - p)
                d2 = cross2(q - p, s - p)
                d3 = cross2(s - r, p - r)
                d4 = cross2(s - r, q - r)
                crossing |= (d1 * d2 < 0) and (d3 * d4 < 0)
        assert is_embedded(pts, True) == (not crossing)


def test_sphere_profile_curvatures():
    sl = curvature_revolution(sphere_profile(512))
    assert np.max(np.abs(sl.principal - 1.0)) < 1e-4
    assert np.max(np.abs(sl.mean_curvature - 2.0)) < 1e-4


def test_cylinder_profile_curvatures():
    z = np.linspace(-3, 3, 50)
    sl = curvature_revolution(np.stack([np.full_like(z, 2.0), z], axis=1), ends=(OPEN, OPEN))
    assert np.allclose(sl.principal, [0.0, 0.5], atol=1e-12)
    assert np.allclose(sl.mean_curvature, 0.5, atol=1e-12)


def test_plane_disk_profile_curvatures():
    r = (np.arange(40) + 0.5) / 10
    sl = curvature_revolution(np.stack([r, np.zeros_like(r)], axis=1), ends=(AXIS, OPEN))
    assert np.allclose(sl.principal, 0.0, atol=1e-12)


def test_axis_touch():
    prof = sphere_profile(32)
    prof[5, 0] = 0.0
    with pytest.raises(GeometryError, match="axis touch"):
        curvature_revolution(prof)


def test_laplacian_examples():
    circ = curvature_polyline(circle_points(1024))
    assert np.allclose(laplace_beltrami(circ, np.ones(1024)), 0.0, atol=1e-9)
    x1 = circ.points[:, 0]
    assert np.max(np.abs(laplace_beltrami(circ, x1) + x1)) < 1e-4
    sph = curvature_revolution(sphere_profile(512))
    lap = laplace_beltrami(sph, sph.radius_sq)
    assert np.max(np.abs(lap)) < 1e-3
    with pytest.raises(GeometryError):
        laplace_beltrami(_two_point_slice(), np.ones(2))


def _two_point_slice():
    sl = curvature_revolution(sphere_profile(8))
    from dataclasses import replace

    return replace(
        sl,
        points=sl.points[:2],
        tangents=sl.tangents[:2],
        normals=sl.normals[:2],
        profile_curvature=sl.profile_curvature[:2],
        rotational_curvature=sl.rotational_curvature[:2],
    )


def test_gradient_examples():
    circ = curvature_polyline(circle_points(2048))
    assert np.allclose(tangential_gradient(circ, np.ones(2048)), 0.0, atol=1e-9)
    # arclength along the circle, away from the wrap-around
    s = 2 * np.pi * np.arange(2048) / 2048
    g = tangential_gradient(circ, s)[:, 0]
    assert np.max(np.abs(g[1:-1] - 1.0)) < 1e-6
    big = curvature_polyline(circle_points(256, rho=2.0))
    assert np.max(np.abs(tangential_gradient(big, big.radius_sq))) < 1e-9
    sph = curvature_revolution(sphere_profile(64))
    assert tangential_gradient(sph, sph.points[:, 1]).shape == (64, 2)
    assert np.all(tangential_gradient(sph, sph.points[:, 1])[:, 1] == 0)


def test_circle_curvature_is_exact_at_every_resolution():
    # circumscribed circles of any circle sample are the circle itself
    for N in (64, 128, 256, 512, 1024):
        sl = curvature_polyline(circle_points(N, rho=1.7))
        assert np.max(np.abs(sl.profile_curvature - 1 / 1.7)) < 1e-10


def test_curvature_order_on_ellipse():
    study = curvature_study()
    assert 1.8 <= study.slope <= 2.2


def test_laplacian_of_radius_squared_converges():
    hs, errs = [], []
    for N in (64, 128, 256, 512, 1024):
        sl = ellipse(2.0, 1.0, N)
        ex = ellipse(2.0, 1.0, N, exact=True)
        exact = 2 - 2 * ex.mean_curvature * np.einsum("ij,ij->i", ex.points, ex.normals)
        errs.append(np.max(np.abs(laplace_beltrami(sl, sl.radius_sq) - exact)))
        hs.append(sl.edge_lengths().max())
    assert fit_order(hs, errs) >= 1.8


def test_laplacian_of_radius_squared_on_spheroid_profile():
    a, b = 1.5, 1.0
    hs, errs = [], []
    for N in (64, 128, 256, 512):
        th = (np.arange(N) + 0.5) * np.pi / N
        sl = curvature_revolution(np.stack([a * np.sin(th), -b * np.cos(th)], axis=1))
        w = np.sqrt(a**2 * np.cos(th) ** 2 + b**2 * np.sin(th) ** 2)
        H = a * b / w**3 + b / (a * w)
        exact = 4 - 2 * H * (a * b / w)
        errs.append(np.max(np.abs(laplace_beltrami(sl, sl.radius_sq) - exact)))
        hs.append(sl.edge_lengths().max())
    assert fit_order(hs, errs) >= 1.8


@settings(max_examples=30, deadline=None)
@given(a=st.floats(1.0, 3.0), b=st.floats(0.5, 1.0), N=st.integers(32, 200))
def test_orientation_flip_preserves_curvature_vector(a, b, N):
    forward = ellipse(a, b, N)
    backward = curvature_polyline(forward.points[::-1].copy())
    assert np.allclose(backward.normals[::-1], -forward.normals, atol=1e-12)
    assert np.allclose(backward.profile_curvature[::-1], -forward.profile_curvature, atol=1e-9)
    hv_f = forward.mean_curvature[:, None] * forward.normals
    hv_b = (backward.mean_curvature[:, None] * backward.normals)[::-1]
    assert np.allclose(hv_f, hv_b, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(a=st.floats(0.5, 3.0), b=st.floats(0.5, 3.0), N=st.integers(16, 128))
def test_surface_sample_invariants(a, b, N):
    th = (np.arange(N) + 0.5) * np.pi / N
    sl = curvature_revolution(np.stack([a * np.sin(th), -b * np.cos(th)], axis=1))
    for s in (sl.sample(0), sl.sample(N // 2), sl.sample(N - 1)):
        assert abs(np.linalg.norm(s.normal) - 1) < 1e-12
        lam = np.array(s.principal_curvatures)
        assert np.all(np.diff(lam) >= 0)
        assert math.isclose(s.mean_curvature, lam.sum(), rel_tol=1e-10)
        assert math.isclose(s.second_form_norm**2, (lam**2).sum(), rel_tol=1e-10)


def test_enclosed_measures():
    assert enclosed_measure(curvature_polyline(circle_points(2000))) == pytest.approx(np.pi, rel=1e-5)
    assert enclosed_measure(curvature_revolution(sphere_profile(1000))) == pytest.approx(4 * np.pi / 3, rel=1e-4)


def test_resampling_equidistributes():
    th = 2 * np.pi * (np.arange(200) / 200) ** 1.5
    pts = np.stack([np.cos(th), np.sin(th)], axis=1)
    sl = curvature_polyline(pts)
    assert sl.edge_ratio() > 4
    new, did = ensure_quasi_uniform(sl)
    assert did and new.edge_ratio() < 1.01
    assert np.allclose(np.linalg.norm(new.points, axis=1), 1.0, atol=1e-4)
    sph = curvature_revolution(sphere_profile(100))
    assert np.allclose(resample(sph).points, sph.points, atol=1e-12)


def test_slice_round_trip(tmp_path):
    sl = ellipse(2.0, 1.0, 64, t=-0.5)
    back = parse_slice(write_slice(sl))
    assert np.array_equal(back.points, sl.points) and back.time == -0.5
    text = write_slice(sl)
    assert text.startswith("# n=1 t=-0.5 count=64")
    prof = curvature_revolution(sphere_profile(40), time=-0.25)
    path = tmp_path / "p.txt"
    write_slice(prof, path)
    back = parse_slice(path.read_text())
    assert np.array_equal(back.points, prof.points) and back.ends == (AXIS, AXIS)
    assert "# index z r" in path.read_text()
    with pytest.raises(GeometryError):
        parse_slice("# n=1 t=0 count=3\n0 1 0\n")
