import math

import numpy as np
import pytest

from memflow.mesh import (CONTRACTION_AREA, INFLOW, MeshConformityError, MeshError,
                          MeshFormatError, MeshIndexError, MeshOrientationError,
                          MeshTagError, OUTFLOW, SYMMETRY, WALL, boundary_edges,
                          contraction_mesh, make_mesh, read_mesh, refine_uniform,
                          triangle_areas, unit_square_mesh, validate_mesh, write_mesh,
                          all_edges, _edge_lengths)


def test_unit_square_smallest():
    m = unit_square_mesh(1)
    assert m.n_vertices == 4
    assert m.n_triangles == 2
    assert math.isclose(m.h_max, math.sqrt(2.0), rel_tol=1e-15)


def test_unit_square_counts():
    m = unit_square_mesh(4)
    assert m.n_vertices == 25
    assert m.n_triangles == 32


def test_unit_square_table_row():
    m = unit_square_mesh(16)
    assert math.isclose(m.h_max, math.sqrt(2.0) / 16.0, rel_tol=1e-14)
    assert (m.vertex_tags[np.unique(boundary_edges(m))] == WALL).all()


def test_unit_square_rejects_zero():
    with pytest.raises(MeshError):
        unit_square_mesh(0)


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8])
def test_unit_square_invariants(n):
    m = unit_square_mesh(n)
    validate_mesh(m)
    assert math.isclose(triangle_areas(m).sum(), 1.0, rel_tol=1e-9)


def test_contraction_uniform_area():
    m = contraction_mesh(1.0, 1.0)
    validate_mesh(m)
    assert math.isclose(triangle_areas(m).sum(), CONTRACTION_AREA, rel_tol=1e-9)
    assert CONTRACTION_AREA == 110.0


def test_contraction_grading_contract():
    m = contraction_mesh(0.1, 0.5)
    d = m.vertices - np.array([0.0, 1.0])
    near = np.hypot(d[:, 0], d[:, 1]) <= 0.5
    tri_near = near[m.triangles].all(axis=1)
    diam = _edge_lengths(m.vertices, m.triangles).max(axis=1)
    assert diam[tri_near].min() <= 0.1 * 0.5


def test_contraction_conforming():
    m = contraction_mesh(0.25, 0.5)
    validate_mesh(m)
    assert math.isclose(triangle_areas(m).sum(), 110.0, rel_tol=1e-9)


def test_contraction_tags():
    m = contraction_mesh(0.5, 1.0)
    x, y = m.vertices[:, 0], m.vertices[:, 1]
    assert (m.vertex_tags[np.isclose(x, -20) & (y < 4 - 1e-9)] == INFLOW).all()
    assert (m.vertex_tags[np.isclose(x, 30) & (y < 1 - 1e-9)] == OUTFLOW).all()
    sym = np.isclose(y, 0) & (x > -20 + 1e-9) & (x < 30 - 1e-9)
    assert (m.vertex_tags[sym] == SYMMETRY).all()
    # wall beats inflow at the top inflow corner
    corner = np.isclose(x, -20) & np.isclose(y, 4)
    assert (m.vertex_tags[corner] == WALL).all()


def test_contraction_rejects_bad_args():
    with pytest.raises(MeshError):
        contraction_mesh(0.0, 0.5)
    with pytest.raises(MeshError):
        contraction_mesh(0.5, -1.0)
    with pytest.raises(MeshError):
        contraction_mesh(1.5, 0.5)


def test_refine_counts():
    m = refine_uniform(unit_square_mesh(1))
    assert m.n_vertices == 9
    assert m.n_triangles == 8


def test_refine_vertex_count_is_vertices_plus_edges():
    m = contraction_mesh(0.5, 2.0)
    n_edges = len(np.unique(all_edges(m.triangles), axis=0))
    r = refine_uniform(m)
    assert r.n_vertices == m.n_vertices + n_edges


def test_refine_matches_finer_structured_mesh():
    r = refine_uniform(unit_square_mesh(4))
    m8 = unit_square_mesh(8)
    a = np.array(sorted(map(tuple, np.round(r.vertices, 13))))
    b = np.array(sorted(map(tuple, np.round(m8.vertices, 13))))
    assert np.allclose(a, b, atol=1e-12)


def test_refine_halves_h_and_preserves_area():
    m = contraction_mesh(0.5, 2.0)
    r = refine_uniform(m)
    assert math.isclose(r.h_max, m.h_max / 2.0, rel_tol=1e-12)
    assert math.isclose(triangle_areas(r).sum(), triangle_areas(m).sum(), rel_tol=1e-12)
    validate_mesh(r)


def test_roundtrip(tmp_path):
    m = unit_square_mesh(4)
    path = tmp_path / "mesh.txt"
    write_mesh(m, path)
    back = read_mesh(path)
    assert np.array_equal(back.triangles, m.triangles)
    assert np.array_equal(back.vertex_tags, m.vertex_tags)
    assert np.allclose(back.vertices, m.vertices, rtol=0, atol=0)


def test_read_ignores_comments(tmp_path):
    path = tmp_path / "mesh.txt"
    path.write_text("# header comment\n3 1\n0 0 1\n# interlude\n1 0 1\n0 1 1\n0 1 2\n")
    m = read_mesh(path)
    assert m.n_vertices == 3
    assert m.n_triangles == 1


def test_read_rejects_out_of_range_index(tmp_path):
    path = tmp_path / "mesh.txt"
    path.write_text("3 1\n0 0 1\n1 0 1\n0 1 1\n0 1 7\n")
    with pytest.raises(MeshIndexError):
        read_mesh(path)


def test_read_rejects_negative_area_naming_triangle(tmp_path):
    path = tmp_path / "mesh.txt"
    path.write_text("4 2\n0 0 1\n1 0 1\n0 1 1\n1 1 1\n0 1 2\n1 2 3\n")
    with pytest.raises(MeshOrientationError, match="triangle 1"):
        read_mesh(path)


def test_read_rejects_malformed_header(tmp_path):
    path = tmp_path / "mesh.txt"
    path.write_text("3\n")
    with pytest.raises(MeshFormatError):
        read_mesh(path)


def test_read_rejects_wrong_line_count(tmp_path):
    path = tmp_path / "mesh.txt"
    path.write_text("3 1\n0 0 1\n1 0 1\n")
    with pytest.raises(MeshFormatError):
        read_mesh(path)


def test_nonconforming_edge_rejected():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, -1.0]])
    tris = np.array([[0, 1, 2], [1, 3, 2], [0, 1, 4], [1, 0, 4]])
    with pytest.raises((MeshConformityError, MeshOrientationError)):
        make_mesh(verts, tris, np.array([1, 1, 1, 1, 1]))


def test_duplicate_vertices_rejected():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
    tris = np.array([[0, 1, 2], [0, 3, 2]])
    with pytest.raises(MeshConformityError):
        make_mesh(verts, tris, np.array([1, 1, 1, 1]))


def test_tag_invariants_enforced():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    tris = np.array([[0, 1, 2]])
    with pytest.raises(MeshTagError):
        make_mesh(verts, tris, np.array([1, 1, 0]))
