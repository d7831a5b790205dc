import math

import numpy as np
import pytest

from ddcauchy.geometry import PhaseField
from ddcauchy.mesh import (MeshError, TriMesh, band_triangles,
                           build_background, mesh_annulus, quadrature,
                           refine_band)


def test_background_counts():
    m = build_background(1.5)
    assert m.num_vertices == 9
    assert m.num_triangles == 8
    assert m.metadata["variant"] == "2-split"
    # vertex count (ceil(3/h0)+1)^2, triangle count 2 ceil(3/h0)^2
    for h0 in (3.0, 0.7, 0.31):
        n = math.ceil(3.0 / h0)
        m = build_background(h0)
        assert m.num_vertices == (n + 1) ** 2
        assert m.num_triangles == 2 * n * n
        assert m.total_area() == pytest.approx(9.0, abs=1e-12)


def test_background_vertex_budget():
    with pytest.raises(MeshError):
        build_background(1e-4, max_vertices=10_000)
    with pytest.raises(MeshError):
        build_background(-1.0)


def test_refine_band_identity_at_zero_levels(geometry):
    m = build_background(0.3)
    field = PhaseField(geometry, 0.125)
    assert refine_band(m, field, 0) is m


def test_refine_band_preserves_area_and_conformity(geometry):
    m = build_background(0.15)
    for eps, levels in ((0.125, 1), (2.0 ** -5, 3)):
        field = PhaseField(geometry, eps)
        out = refine_band(m, field, levels)
        assert out.total_area() == pytest.approx(9.0, abs=1e-12)
        out.check_conforming()
        assert out.min_angle() >= 20.0
        assert (out.signed_areas() > 0).all()


def test_refine_band_diameter_bound(geometry):
    h0 = 0.1
    m = build_background(h0)
    field = PhaseField(geometry, 2.0 ** -4)
    out = refine_band(m, field, 2)
    hit = band_triangles(out.vertices, out.triangles, field,
                         2.0 * field.epsilon)
    # criss-cross diameter h0*sqrt(2) quartered by two red levels
    bound = h0 * math.sqrt(2.0) / 4.0 + 1e-12
    assert out.diameters()[hit].max() <= bound


def test_refine_band_non_band_vertices_untouched(geometry):
    m = build_background(0.15)
    field = PhaseField(geometry, 0.0625)
    out = refine_band(m, field, 2)
    assert np.array_equal(out.vertices[:m.num_vertices], m.vertices)


def test_refine_band_deterministic(geometry):
    m = build_background(0.12)
    field = PhaseField(geometry, 0.0625)
    a = refine_band(m, field, 2).dump()
    b = refine_band(m, field, 2).dump()
    assert a == b


def test_refine_refined_mesh(geometry):
    m = build_background(0.15)
    first = refine_band(m, PhaseField(geometry, 0.0625), 2)
    second = refine_band(first, PhaseField(geometry, 0.03125), 3)
    second.check_conforming()
    assert second.total_area() == pytest.approx(9.0, abs=1e-12)
    assert second.min_angle() >= 20.0


def test_quality_floor_signal(geometry):
    m = build_background(0.3)
    field = PhaseField(geometry, 0.125)
    with pytest.raises(MeshError):
        refine_band(m, field, 1, quality_floor_deg=80.0)


def test_mesh_annulus_counts(geometry):
    m = mesh_annulus(geometry, 8, 2)
    assert m.num_vertices == 24
    assert m.num_triangles == 32
    m.check_conforming()
    assert (m.signed_areas() > 0).all()
    with pytest.raises(MeshError):
        mesh_annulus(geometry, 4, 2)


def test_mesh_annulus_area_convergence(geometry):
    exact = 0.91 * np.pi
    areas = [mesh_annulus(geometry, n, 8).total_area()
             for n in (16, 32, 64)]
    assert areas[0] < areas[1] < areas[2] < exact
    # O(n^-2) deficit
    assert exact - areas[2] < (exact - areas[0]) / 10


def test_mesh_annulus_boundary(geometry):
    m = mesh_annulus(geometry, 64, 8)
    inner = [e for e in m.boundary_edges if e[2] == "inner"]
    length = sum(np.linalg.norm(m.vertices[i] - m.vertices[j])
                 for i, j, _ in inner)
    assert length == pytest.approx(2 * np.pi * 0.3, rel=2e-3)
    for i, j, _ in inner:
        assert np.hypot(*m.vertices[i]) == pytest.approx(0.3, abs=1e-15)


def test_dump_load_roundtrip(geometry):
    m = refine_band(build_background(0.4), PhaseField(geometry, 0.125), 1)
    text = m.dump()
    m2 = TriMesh.load(text)
    assert np.array_equal(m2.vertices, m.vertices)
    assert np.array_equal(m2.triangles, m.triangles)
    assert np.array_equal(m2.green, m.green)
    assert m2.dump() == text


def test_quadrature_examples():
    r1 = quadrature(1)
    assert len(r1.weights) == 1
    assert r1.weights[0] == pytest.approx(1.0)
    assert r1.points[0] == pytest.approx([1 / 3, 1 / 3, 1 / 3])
    r2 = quadrature(2)
    assert len(r2.weights) == 3
    assert r2.weights == pytest.approx([1 / 3] * 3)
    assert sorted(r2.points.ravel()) == pytest.approx([0] * 3 + [0.5] * 6)
    with pytest.raises(ValueError):
        quadrature(5)
    with pytest.raises(ValueError):
        quadrature(2, 0)


@pytest.mark.parametrize("degree", [1, 2, 3, 4])
def test_quadrature_declared_degree_exact(degree):
    rule = quadrature(degree, 1)
    x, y = rule.points[:, 1], rule.points[:, 2]
    for i in range(degree + 1):
        for j in range(degree + 1 - i):
            got = 0.5 * np.dot(rule.weights, x ** i * y ** j)
            exact = (math.factorial(i) * math.factorial(j)
                     / math.factorial(i + j + 2))
            assert got == pytest.approx(exact, abs=1e-15)


def test_quadrature_quartic_monomial():
    # int over the reference triangle of x^3 y = 1/120 (x^2 y = 1/60)
    rule = quadrature(4, 1)
    x, y = rule.points[:, 1], rule.points[:, 2]
    assert 0.5 * np.dot(rule.weights, x ** 3 * y) == pytest.approx(
        1.0 / 120.0, abs=1e-15)
    assert 0.5 * np.dot(rule.weights, x ** 2 * y) == pytest.approx(
        1.0 / 60.0, abs=1e-15)


def test_quadrature_subdivision_partition():
    for s in (2, 3, 4):
        rule = quadrature(2, s)
        assert rule.weights.sum() == pytest.approx(1.0, abs=1e-13)
        assert (rule.points >= -1e-15).all()
        # subdivided rule still integrates quadratics exactly
        x, y = rule.points[:, 1], rule.points[:, 2]
        assert 0.5 * np.dot(rule.weights, x * y) == pytest.approx(
            1.0 / 24.0, abs=1e-14)
