import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdflow.boundary import distance_field, distance_to_boundary, segment_distance
from pdflow.mesh import MeshError, build_mesh, mesh_from_arrays, read_mesh, write_mesh
from pdflow.quadrature import collapsed_rule, line_rule, triangle_rule


@pytest.mark.parametrize("rule,deg", [(triangle_rule(4), 4), (triangle_rule(5), 5), (collapsed_rule(6), 10)])
def test_triangle_rules_integrate_monomials(rule, deg):
    pts, w = rule
    x, y = pts.T
    # int_T x^a y^b = a! b! / (a + b + 2)!, weights normalized to area 1/2
    from math import factorial

    for a in range(deg + 1):
        for b in range(deg + 1 - a):
            exact = factorial(a) * factorial(b) / factorial(a + b + 2)
            assert 0.5 * np.sum(w * x**a * y**b) == pytest.approx(exact, rel=1e-12, abs=1e-15)


def test_line_rule():
    s, w = line_rule(5)
    for k in range(10):
        assert np.sum(w * s**k) == pytest.approx(1.0 / (k + 1), rel=1e-13)


def test_square_resolution_two():
    m = build_mesh("unit-square", 2)
    assert (m.n_nodes, m.n_triangles, len(m.boundary_edges)) == (9, 8, 8)
    assert m.area == pytest.approx(1.0)
    assert m.perimeter == pytest.approx(4.0)
    assert sorted(m.corner_nodes.tolist()) == [0, 2, 6, 8]


@pytest.mark.parametrize("domain,area", [("unit-square", 1.0), ("disc", np.pi), ("annulus", 0.75 * np.pi)])
def test_orientation_and_area(domain, area):
    m = build_mesh(domain, 6)
    assert np.all(m.areas > 0)
    assert m.area == pytest.approx(area, rel=0.05)
    # outward normals: pointing away from the domain at edge midpoints
    mid = m.nodes[m.boundary_edges].mean(axis=1)
    probe = mid + 1e-3 * m.normals
    inside = mid - 1e-3 * m.normals
    r_probe, r_in = np.hypot(*probe.T), np.hypot(*inside.T)
    if domain == "unit-square":
        assert np.all(np.any((probe < 0) | (probe > 1), axis=1))
    else:
        # outward on the outer circle means larger radius, on the inner circle smaller
        outer = np.hypot(*mid.T) > 0.75
        assert np.all((r_probe > r_in)[outer])
        assert np.all((r_probe < r_in)[~outer])


def test_markers():
    assert set(build_mesh("disc", 5).markers.tolist()) == {1}
    ann = build_mesh("annulus", 5)
    assert set(ann.markers.tolist()) == {1, 2}
    outer = ann.markers == 1
    mid = ann.nodes[ann.boundary_edges].mean(axis=1)
    assert np.all(np.hypot(*mid[outer].T) > 0.9)


def test_round_trip(tmp_path, annulus8):
    path = tmp_path / "m.txt"
    write_mesh(annulus8, path)
    m = read_mesh(path)
    assert np.array_equal(m.nodes, annulus8.nodes)
    assert np.array_equal(np.sort(m.markers), np.sort(annulus8.markers))
    assert m.area == pytest.approx(annulus8.area, rel=1e-14)


def test_read_errors(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("NODES 2\n0 0 0\n")
    with pytest.raises(MeshError):
        read_mesh(bad)
    with pytest.raises(MeshError):
        build_mesh("torus", 4)
    with pytest.raises(MeshError):
        build_mesh("unit-square", 1)


def test_mesh_from_arrays_fixes_orientation():
    nodes = [[0, 0], [1, 0], [0, 1]]
    m = mesh_from_arrays(nodes, [[0, 2, 1]])
    assert m.areas[0] == pytest.approx(0.5)


def test_distance_examples(square8):
    d = distance_field(square8)
    center = np.argmin(np.hypot(*(square8.nodes - 0.5).T))
    assert d.dofs[center] == pytest.approx(0.5)
    assert np.all(d.dofs[square8.boundary_nodes] == 0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99))
def test_distance_against_brute_force(x, y):
    m = build_mesh("unit-square", 4)
    got = distance_to_boundary(m, np.array([[x, y]]))[0]
    assert got == pytest.approx(min(x, y, 1 - x, 1 - y), abs=1e-12)
    a = m.nodes[m.boundary_edges[:, 0]]
    b = m.nodes[m.boundary_edges[:, 1]]
    brute = min(
        np.hypot(*(np.array([x, y]) - (a[k] + t * (b[k] - a[k]))))
        for k in range(len(a))
        for t in np.linspace(0, 1, 2001)
    )
    assert got <= brute + 1e-12
    assert segment_distance(np.array([[x, y]]), a, b).shape == (1, len(a))
