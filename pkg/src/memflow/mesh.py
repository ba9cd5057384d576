"""Conforming triangle meshes: unit square, four-to-one contraction, refinement, file I/O.

Boundary tags: 0 interior, 1 no-slip wall, 2 inflow, 3 outflow, 4 symmetry.
At geometric corners the smallest nonzero tag wins, so Dirichlet data
dominates outflow/symmetry conditions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

INTERIOR, WALL, INFLOW, OUTFLOW, SYMMETRY = 0, 1, 2, 3, 4

# contraction geometry: upstream channel joined to a narrow downstream channel
UPSTREAM_LENGTH = 20.0
DOWNSTREAM_LENGTH = 30.0
UPSTREAM_HEIGHT = 4.0
DOWNSTREAM_HEIGHT = 1.0
CONTRACTION_AREA = UPSTREAM_LENGTH * UPSTREAM_HEIGHT + DOWNSTREAM_LENGTH * DOWNSTREAM_HEIGHT


class MeshError(ValueError):
    """Base class for mesh construction/validation failures."""


class MeshFormatError(MeshError):
    """Malformed counts or unparseable mesh file content."""


class MeshIndexError(MeshError):
    """A triangle references a vertex index outside the vertex table."""


class MeshOrientationError(MeshError):
    """A triangle has non-positive signed area."""


class MeshConformityError(MeshError):
    """Duplicate vertices or an edge shared by more than two triangles."""


class MeshTagError(MeshError):
    """Boundary/interior tag assignment violates the tagging contract."""


@dataclass(frozen=True)
class TriMesh:
    """Immutable conforming triangulation with per-vertex boundary tags."""

    vertices: np.ndarray  # (nv, 2) float64
    triangles: np.ndarray  # (nt, 3) int64, counterclockwise
    vertex_tags: np.ndarray  # (nv,) int64
    h_max: float

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]


def signed_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p0 = vertices[triangles[:, 0]]
    p1 = vertices[triangles[:, 1]]
    p2 = vertices[triangles[:, 2]]
    return 0.5 * ((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
                  - (p1[:, 1] - p0[:, 1]) * (p2[:, 0] - p0[:, 0]))


def triangle_areas(mesh: TriMesh) -> np.ndarray:
    return signed_areas(mesh.vertices, mesh.triangles)


def _edge_lengths(vertices, triangles):
    # (nt, 3): lengths of edges opposite local vertices 0, 1, 2
    p = vertices[triangles]  # (nt, 3, 2)
    out = np.empty((triangles.shape[0], 3))
    for k in range(3):
        d = p[:, (k + 1) % 3, :] - p[:, (k + 2) % 3, :]
        out[:, k] = np.hypot(d[:, 0], d[:, 1])
    return out


def max_diameter(vertices: np.ndarray, triangles: np.ndarray) -> float:
    if triangles.shape[0] == 0:
        return 0.0
    return float(_edge_lengths(vertices, triangles).max())


def all_edges(triangles: np.ndarray) -> np.ndarray:
    """Sorted vertex pairs of every triangle edge, 3 per triangle (duplicates kept)."""
    e = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    return np.sort(e, axis=1)


def boundary_edges(mesh: TriMesh) -> np.ndarray:
    """(nb, 2) vertex pairs of edges that belong to exactly one triangle."""
    edges = all_edges(mesh.triangles)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    return uniq[counts == 1]


def make_mesh(vertices, triangles, vertex_tags, validate: bool = True) -> TriMesh:
    vertices = np.ascontiguousarray(vertices, dtype=np.float64)
    triangles = np.ascontiguousarray(triangles, dtype=np.int64)
    vertex_tags = np.ascontiguousarray(vertex_tags, dtype=np.int64)
    if triangles.size and (triangles.min() < 0 or triangles.max() >= len(vertices)):
        bad = np.argwhere((triangles < 0) | (triangles >= len(vertices)))[0]
        raise MeshIndexError(
            f"triangle {bad[0]} references vertex {triangles[bad[0], bad[1]]} "
            f"outside [0, {len(vertices)})")
    mesh = TriMesh(vertices, triangles, vertex_tags, max_diameter(vertices, triangles))
    if validate:
        validate_mesh(mesh)
    for arr in (mesh.vertices, mesh.triangles, mesh.vertex_tags):
        arr.setflags(write=False)
    return mesh


def validate_mesh(mesh: TriMesh) -> None:
    """Check every TriMesh invariant; raise a specific MeshError on the first failure."""
    nv = mesh.n_vertices
    tri = mesh.triangles
    if mesh.vertices.ndim != 2 or mesh.vertices.shape[1] != 2:
        raise MeshFormatError("vertex array must have shape (nv, 2)")
    if tri.ndim != 2 or tri.shape[1] != 3:
        raise MeshFormatError("triangle array must have shape (nt, 3)")
    if mesh.vertex_tags.shape != (nv,):
        raise MeshFormatError("vertex tag array must have shape (nv,)")
    if not np.isfinite(mesh.vertices).all():
        raise MeshFormatError("non-finite vertex coordinate")

    if tri.size and (tri.min() < 0 or tri.max() >= nv):
        bad = np.argwhere((tri < 0) | (tri >= nv))[0]
        raise MeshIndexError(
            f"triangle {bad[0]} references vertex {tri[bad[0], bad[1]]} outside [0, {nv})")

    areas = signed_areas(mesh.vertices, tri)
    bad = np.nonzero(areas <= 0.0)[0]
    if bad.size:
        raise MeshOrientationError(
            f"triangle {bad[0]} has non-positive signed area {areas[bad[0]]:.3e}")

    _, inverse, counts = np.unique(
        np.round(mesh.vertices, 14), axis=0, return_inverse=True, return_counts=True)
    if (counts > 1).any():
        dup = np.nonzero(counts[inverse] > 1)[0][:2]
        raise MeshConformityError(f"duplicate vertex coordinates (e.g. vertices {dup.tolist()})")

    edges = all_edges(tri)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    if (counts > 2).any():
        e = uniq[np.argmax(counts > 2)]
        raise MeshConformityError(f"edge {tuple(e)} is shared by more than two triangles")

    on_boundary = np.zeros(nv, dtype=bool)
    be = uniq[counts == 1]
    on_boundary[be.ravel()] = True
    if (mesh.vertex_tags[on_boundary] == 0).any():
        v = np.nonzero(on_boundary & (mesh.vertex_tags == 0))[0][0]
        raise MeshTagError(f"boundary vertex {v} has interior tag 0")
    if (mesh.vertex_tags[~on_boundary] != 0).any():
        v = np.nonzero(~on_boundary & (mesh.vertex_tags != 0))[0][0]
        raise MeshTagError(f"interior vertex {v} has nonzero tag {mesh.vertex_tags[v]}")

    h = max_diameter(mesh.vertices, tri)
    if not math.isclose(h, mesh.h_max, rel_tol=1e-12):
        raise MeshFormatError(f"stored h_max {mesh.h_max} != recomputed {h}")


def unit_square_mesh(n: int) -> TriMesh:
    """Structured mesh of [0,1]^2: (n+1)^2 vertices, 2 n^2 triangles.

    Each cell is split along the fixed lower-left-to-upper-right diagonal.
    All boundary vertices are tagged as walls.
    """
    if n < 1:
        raise MeshError(f"unit_square_mesh requires n >= 1, got {n}")
    coords = np.arange(n + 1) / n
    xx, yy = np.meshgrid(coords, coords, indexing="xy")
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    ix, iy = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    a = (iy * (n + 1) + ix).ravel()
    b = a + 1
    c = b + (n + 1)
    d = a + (n + 1)
    triangles = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])

    tags = np.zeros((n + 1) ** 2, dtype=np.int64)
    onb = (xx == 0) | (xx == 1) | (yy == 0) | (yy == 1)
    tags[onb.ravel()] = WALL
    return make_mesh(vertices, triangles, tags)


def _graded_steps(length: float, h_far: float, h_near: float, growth: float = 1.2) -> np.ndarray:
    """Cell sizes along [0, length], starting at h_near and growing geometrically
    until capped at h_far, then rescaled (downward only) to fit exactly."""
    steps = []
    h = min(h_near, h_far, length)
    total = 0.0
    while total < length - 1e-12 * length:
        s = min(h, h_far)
        steps.append(s)
        total += s
        h *= growth
    steps = np.asarray(steps)
    return steps * (length / steps.sum())


def _graded_grid(a: float, b: float, h_far: float, h_near: float, refine_at: str) -> np.ndarray:
    """Ascending grid over [a, b] with cells shrinking toward one or both endpoints."""
    if refine_at == "both":
        mid = 0.5 * (a + b)
        left = _graded_grid(a, mid, h_far, h_near, "a")
        right = _graded_grid(mid, b, h_far, h_near, "b")
        return np.concatenate([left, right[1:]])
    p = np.concatenate([[0.0], np.cumsum(_graded_steps(b - a, h_far, h_near))])
    grid = a + p if refine_at == "a" else (b - p)[::-1]
    grid[0], grid[-1] = a, b
    return grid


def _tensor_triangles(nx, ny, vid):
    """Split each cell of an (nx+1) x (ny+1) vertex grid along its ll-ur diagonal.

    vid[i, j] is the global vertex id of grid node (i, j); i runs along x.
    """
    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    a = vid[ii, jj].ravel()
    b = vid[ii + 1, jj].ravel()
    c = vid[ii + 1, jj + 1].ravel()
    d = vid[ii, jj + 1].ravel()
    return np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])


def contraction_mesh(grading: float, base_h: float) -> TriMesh:
    """Block-structured mesh of the half contraction channel.

    Upstream rectangle [-20,0]x[0,4] joined to downstream [0,30]x[0,1] with a
    reentrant corner at (0,1); cell sizes shrink geometrically toward the
    corner so element diameters there stay below grading*base_h.
    Tags: inflow at x=-20, outflow at x=30, symmetry at y=0, walls elsewhere.
    """
    if not (0.0 < grading <= 1.0):
        raise MeshError(f"grading must be in (0, 1], got {grading}")
    if base_h <= 0.0:
        raise MeshError(f"base_h must be positive, got {base_h}")

    # diameters near the corner are cell diagonals, so keep per-axis sizes
    # at grading*base_h/2 (diagonal factor sqrt(2) plus margin); the wall
    # section is graded at both ends to resolve the stagnant corner eddy
    h_near = 0.5 * grading * base_h
    x_up = _graded_grid(-UPSTREAM_LENGTH, 0.0, base_h, h_near, refine_at="b")
    x_dn = _graded_grid(0.0, DOWNSTREAM_LENGTH, base_h, h_near, refine_at="a")
    y_low = _graded_grid(0.0, DOWNSTREAM_HEIGHT, base_h, h_near, refine_at="b")
    y_wall = _graded_grid(DOWNSTREAM_HEIGHT, UPSTREAM_HEIGHT, base_h, h_near, refine_at="both")
    y_up = np.concatenate([y_low, y_wall[1:]])

    # upstream block, including the column at x = 0
    nxu, nyu = len(x_up) - 1, len(y_up) - 1
    vid_up = np.arange((nxu + 1) * (nyu + 1)).reshape(nxu + 1, nyu + 1)
    xx = np.repeat(x_up, nyu + 1)
    yy = np.tile(y_up, nxu + 1)
    verts = [np.column_stack([xx, yy])]
    tris = [_tensor_triangles(nxu, nyu, vid_up)]

    # downstream block reuses the upstream vertices on the shared column x = 0
    nxd, nyd = len(x_dn) - 1, len(y_low) - 1
    offset = (nxu + 1) * (nyu + 1)
    vid_dn = np.empty((nxd + 1, nyd + 1), dtype=np.int64)
    vid_dn[0, :] = vid_up[nxu, : nyd + 1]
    vid_dn[1:, :] = offset + np.arange(nxd * (nyd + 1)).reshape(nxd, nyd + 1)
    xx = np.repeat(x_dn[1:], nyd + 1)
    yy = np.tile(y_low, nxd)
    verts.append(np.column_stack([xx, yy]))
    tris.append(_tensor_triangles(nxd, nyd, vid_dn))

    vertices = np.concatenate(verts)
    triangles = np.concatenate(tris)

    # tag boundary vertices; smallest nonzero tag wins at corners
    edges = all_edges(triangles)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    bverts = np.unique(uniq[counts == 1].ravel())
    tags = np.zeros(len(vertices), dtype=np.int64)
    x, y = vertices[:, 0], vertices[:, 1]
    tol = 1e-9
    tags[bverts] = WALL
    onb = np.zeros(len(vertices), dtype=bool)
    onb[bverts] = True
    tags[onb & (np.abs(y) < tol)] = SYMMETRY
    tags[onb & (np.abs(x - DOWNSTREAM_LENGTH) < tol) & (y < DOWNSTREAM_HEIGHT - tol)] = OUTFLOW
    tags[onb & (np.abs(x + UPSTREAM_LENGTH) < tol) & (y < UPSTREAM_HEIGHT - tol)] = INFLOW
    # corner precedence: (-20,0) inflow beats symmetry, (30,0) outflow beats symmetry
    tags[onb & (np.abs(x + UPSTREAM_LENGTH) < tol) & (np.abs(y) < tol)] = INFLOW
    tags[onb & (np.abs(x - DOWNSTREAM_LENGTH) < tol) & (np.abs(y) < tol)] = OUTFLOW
    return make_mesh(vertices, triangles, tags)


def refine_uniform(mesh: TriMesh) -> TriMesh:
    """Split every triangle into four via edge midpoints; halves h_max.

    Midpoints of boundary edges inherit the smaller nonzero endpoint tag;
    interior midpoints are tagged 0.
    """
    tri = mesh.triangles
    nv = mesh.n_vertices
    edges = all_edges(tri)
    uniq, inverse, counts = np.unique(edges, axis=0, return_inverse=True, return_counts=True)
    mid = 0.5 * (mesh.vertices[uniq[:, 0]] + mesh.vertices[uniq[:, 1]])
    vertices = np.concatenate([mesh.vertices, mid])

    mid_tags = np.zeros(len(uniq), dtype=np.int64)
    onb = counts == 1
    t0 = mesh.vertex_tags[uniq[onb, 0]]
    t1 = mesh.vertex_tags[uniq[onb, 1]]
    mid_tags[onb] = np.minimum(t0, t1)
    tags = np.concatenate([mesh.vertex_tags, mid_tags])

    nt = tri.shape[0]
    m01 = nv + inverse[:nt]
    m12 = nv + inverse[nt:2 * nt]
    m20 = nv + inverse[2 * nt:]
    v0, v1, v2 = tri[:, 0], tri[:, 1], tri[:, 2]
    triangles = np.concatenate([
        np.column_stack([v0, m01, m20]),
        np.column_stack([v1, m12, m01]),
        np.column_stack([v2, m20, m12]),
        np.column_stack([m01, m12, m20]),
    ])
    return make_mesh(vertices, triangles, tags)


def write_mesh(mesh: TriMesh, path) -> None:
    """Line-oriented text format: header `nv nt`, then `x y tag` rows, then `i j k` rows."""
    with open(path, "w") as fh:
        fh.write(f"{mesh.n_vertices} {mesh.n_triangles}\n")
        for (x, y), t in zip(mesh.vertices, mesh.vertex_tags):
            fh.write(f"{x:.17g} {y:.17g} {t}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"{i} {j} {k}\n")


def read_mesh(path) -> TriMesh:
    """Parse and fully validate a mesh file written by write_mesh."""
    with open(path) as fh:
        rows = [ln.strip() for ln in fh]
    rows = [r for r in rows if r and not r.startswith("#")]
    if not rows:
        raise MeshFormatError(f"{path}: empty mesh file")
    head = rows[0].split()
    if len(head) != 2:
        raise MeshFormatError(f"{path}: header must be 'nv nt', got {rows[0]!r}")
    try:
        nv, nt = int(head[0]), int(head[1])
    except ValueError as exc:
        raise MeshFormatError(f"{path}: non-integer header counts: {rows[0]!r}") from exc
    if nv < 0 or nt < 0 or len(rows) != 1 + nv + nt:
        raise MeshFormatError(
            f"{path}: expected {1 + max(nv, 0) + max(nt, 0)} data lines, got {len(rows)}")

    vertices = np.empty((nv, 2))
    tags = np.empty(nv, dtype=np.int64)
    for i, row in enumerate(rows[1:1 + nv]):
        parts = row.split()
        if len(parts) != 3:
            raise MeshFormatError(f"{path}: vertex line {i} must be 'x y tag', got {row!r}")
        try:
            vertices[i] = (float(parts[0]), float(parts[1]))
            tags[i] = int(parts[2])
        except ValueError as exc:
            raise MeshFormatError(f"{path}: unparseable vertex line {i}: {row!r}") from exc

    triangles = np.empty((nt, 3), dtype=np.int64)
    for i, row in enumerate(rows[1 + nv:]):
        parts = row.split()
        if len(parts) != 3:
            raise MeshFormatError(f"{path}: triangle line {i} must be 'i j k', got {row!r}")
        try:
            triangles[i] = [int(p) for p in parts]
        except ValueError as exc:
            raise MeshFormatError(f"{path}: unparseable triangle line {i}: {row!r}") from exc

    return make_mesh(vertices, triangles, tags)
