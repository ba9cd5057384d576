"""Mini-element spaces on triangle meshes.

Velocity: per-component continuous P1 enriched with one cubic bubble per
triangle; pressure: continuous P1 with zero mean. One symmetric quadrature
rule of polynomial degree 6 is used for all integrals.

Velocity DOF layout: [x at vertices | x bubbles | y at vertices | y bubbles],
so n_vel_dofs = 2*(n_vertices + n_triangles). Pressure DOFs are vertex values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mesh import INFLOW, OUTFLOW, SYMMETRY, TriMesh, WALL, signed_areas

VELOCITY, PRESSURE, SCALAR = "velocity", "pressure", "scalar"


class FieldError(ValueError):
    pass


class PointLocationError(FieldError):
    """Requested evaluation point lies outside the triangulation."""


def _dunavant_degree6():
    """12-point symmetric triangle rule, exact for polynomials of degree 6.

    Returns barycentric coordinates (12, 3) and weights summing to the
    reference-triangle area 1/2.
    """
    groups = [
        (0.501426509658179, 0.249286745170910, 0.116786275726379),
        (0.873821971016996, 0.063089014491502, 0.050844906370207),
    ]
    bary = []
    w = []
    for a, b, wt in groups:
        bary += [(a, b, b), (b, a, b), (b, b, a)]
        w += [wt] * 3
    a, b = 0.053145049844816, 0.310352451033785
    c = 1.0 - a - b
    for perm in [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]:
        bary.append(perm)
        w.append(0.082851075618374)
    bary = np.asarray(bary)
    w = 0.5 * np.asarray(w)
    w *= 0.5 / w.sum()
    return bary, w


QUAD_BARY, QUAD_WEIGHTS = _dunavant_degree6()
N_QUAD = len(QUAD_WEIGHTS)


def shape_values(bary: np.ndarray) -> np.ndarray:
    """(nq, 4) values of [lambda1, lambda2, lambda3, bubble] at barycentric points."""
    bary = np.atleast_2d(bary)
    bub = 27.0 * bary[:, 0] * bary[:, 1] * bary[:, 2]
    return np.column_stack([bary, bub])


@dataclass
class MiniSpace:
    """DOF layout, Dirichlet masks and precomputed quadrature data for one mesh."""

    mesh: TriMesh
    n_vel_dofs: int = field(init=False)
    n_pre_dofs: int = field(init=False)
    dirichlet_mask: np.ndarray = field(init=False)

    def __post_init__(self):
        mesh = self.mesh
        nv, nt = mesh.n_vertices, mesh.n_triangles
        self.n_scalar = nv + nt  # one velocity component
        self.n_vel_dofs = 2 * self.n_scalar
        self.n_pre_dofs = nv

        self.area = signed_areas(mesh.vertices, mesh.triangles)
        self.domain_area = float(self.area.sum())

        # constant P1 gradients per element
        p = mesh.vertices[mesh.triangles]  # (nt, 3, 2)
        g = np.empty((nt, 3, 2))
        twoA = (2.0 * self.area)[:, None]
        for k in range(3):
            a = p[:, (k + 1) % 3, :]
            b = p[:, (k + 2) % 3, :]
            g[:, k, 0] = (a[:, 1] - b[:, 1]) / twoA[:, 0]
            g[:, k, 1] = (b[:, 0] - a[:, 0]) / twoA[:, 0]
        self.grad_p1 = g

        # quadrature: physical points, shape values, shape gradients
        self.quad_bary = QUAD_BARY
        self.quad_weights = QUAD_WEIGHTS
        self.shape_vals = shape_values(QUAD_BARY)  # (nq, 4)
        self.quad_points = np.einsum("qk,ekx->eqx", QUAD_BARY, p)  # (nt, nq, 2)

        nq = N_QUAD
        G = np.empty((nt, nq, 4, 2))
        G[:, :, :3, :] = g[:, None, :, :]
        lam = QUAD_BARY
        bub_grad = (lam[None, :, 1, None] * lam[None, :, 2, None] * g[:, None, 0, :]
                    + lam[None, :, 0, None] * lam[None, :, 2, None] * g[:, None, 1, :]
                    + lam[None, :, 0, None] * lam[None, :, 1, None] * g[:, None, 2, :])
        G[:, :, 3, :] = 27.0 * bub_grad
        self.shape_grads = G

        # local-to-global velocity dof maps per component
        ldof = np.empty((nt, 4), dtype=np.int64)
        ldof[:, :3] = mesh.triangles
        ldof[:, 3] = nv + np.arange(nt)
        self.ldof_x = ldof
        self.ldof_y = ldof + self.n_scalar

        # Dirichlet mask: walls/inflow clamp both components, outflow and
        # symmetry clamp only the y component; bubbles are never clamped
        tags = mesh.vertex_tags
        mask = np.zeros(self.n_vel_dofs, dtype=bool)
        both = (tags == WALL) | (tags == INFLOW)
        yonly = (tags == OUTFLOW) | (tags == SYMMETRY)
        mask[:nv][both] = True
        mask[self.n_scalar:self.n_scalar + nv][both | yonly] = True
        self.dirichlet_mask = mask

        # exact integrals of P1 pressure basis functions
        self.pressure_integrals = np.bincount(
            mesh.triangles.ravel(), weights=np.repeat(self.area / 3.0, 3), minlength=nv)

        self._neighbors = None
        self._last_tri = 0

    # -- gather/evaluate helpers -------------------------------------------------

    def velocity_local(self, coeffs: np.ndarray):
        """Per-element local coefficients (wx, wy), each (nt, 4)."""
        return coeffs[self.ldof_x], coeffs[self.ldof_y]

    def velocity_at_quad(self, coeffs: np.ndarray) -> np.ndarray:
        wx, wy = self.velocity_local(coeffs)
        vals = np.empty((self.mesh.n_triangles, N_QUAD, 2))
        vals[:, :, 0] = np.einsum("ei,qi->eq", wx, self.shape_vals)
        vals[:, :, 1] = np.einsum("ei,qi->eq", wy, self.shape_vals)
        return vals

    def velocity_grad_at_quad(self, coeffs: np.ndarray) -> np.ndarray:
        """(nt, nq, 2, 2) with entry [..., c, d] = d u_c / d x_d."""
        wx, wy = self.velocity_local(coeffs)
        out = np.empty((self.mesh.n_triangles, N_QUAD, 2, 2))
        out[:, :, 0, :] = np.einsum("ei,eqix->eqx", wx, self.shape_grads)
        out[:, :, 1, :] = np.einsum("ei,eqix->eqx", wy, self.shape_grads)
        return out

    def scalar_at_quad(self, coeffs: np.ndarray) -> np.ndarray:
        return np.einsum("ei,qi->eq", coeffs[self.mesh.triangles], self.shape_vals[:, :3])

    def scalar_grad_at_quad(self, coeffs: np.ndarray) -> np.ndarray:
        g = np.einsum("ei,eix->ex", coeffs[self.mesh.triangles], self.grad_p1)
        return np.repeat(g[:, None, :], N_QUAD, axis=1)

    def cell_integrals(self, values_at_quad: np.ndarray) -> np.ndarray:
        """Integrate a per-quad-point scalar over each element."""
        return 2.0 * self.area * (values_at_quad @ self.quad_weights)

    def integrate(self, values_at_quad: np.ndarray) -> float:
        return float(self.cell_integrals(values_at_quad).sum())

    # -- point location ----------------------------------------------------------

    def _neighbor_map(self):
        if self._neighbors is None:
            tri = self.mesh.triangles
            nt = tri.shape[0]
            nbr = -np.ones((nt, 3), dtype=np.int64)
            owner: dict[tuple[int, int], tuple[int, int]] = {}
            for e in range(nt):
                for k in range(3):
                    key = tuple(sorted((tri[e, (k + 1) % 3], tri[e, (k + 2) % 3])))
                    if key in owner:
                        oe, ok = owner[key]
                        nbr[e, k] = oe
                        nbr[oe, ok] = e
                    else:
                        owner[key] = (e, k)
            self._neighbors = nbr
        return self._neighbors

    def barycentric(self, elem: int, point) -> np.ndarray:
        tri = self.mesh.triangles[elem]
        p = self.mesh.vertices[tri]
        lam = np.empty(3)
        d = point - p[0]
        m = np.column_stack([p[1] - p[0], p[2] - p[0]])
        sol = np.linalg.solve(m, d)
        lam[1], lam[2] = sol
        lam[0] = 1.0 - lam[1] - lam[2]
        return lam

    def locate(self, point, start: int | None = None) -> tuple[int, np.ndarray]:
        """Walk from a cached triangle toward the point; linear scan fallback."""
        nbr = self._neighbor_map()
        elem = self._last_tri if start is None else start
        for _ in range(2 * self.mesh.n_triangles):
            lam = self.barycentric(elem, point)
            k = int(np.argmin(lam))
            if lam[k] >= -1e-12:
                self._last_tri = elem
                return elem, lam
            nxt = nbr[elem, k]
            if nxt < 0:
                break
            elem = nxt
        for elem in range(self.mesh.n_triangles):
            lam = self.barycentric(elem, point)
            if lam.min() >= -1e-10:
                self._last_tri = elem
                return elem, lam
        raise PointLocationError(f"point {tuple(point)} lies outside the mesh")


@dataclass
class DiscreteField:
    """Coefficient vector of a velocity, pressure or plain P1 scalar field."""

    space: MiniSpace
    kind: str
    coeffs: np.ndarray

    def __post_init__(self):
        expected = self.space.n_vel_dofs if self.kind == VELOCITY else self.space.n_pre_dofs
        if self.coeffs.shape != (expected,):
            raise FieldError(
                f"{self.kind} field needs {expected} coefficients, got {self.coeffs.shape}")

    def copy(self) -> "DiscreteField":
        return DiscreteField(self.space, self.kind, self.coeffs.copy())


def field_mean(space: MiniSpace, coeffs: np.ndarray) -> float:
    """Integral mean of a P1 scalar coefficient vector."""
    return float(space.pressure_integrals @ coeffs) / space.domain_area


def remove_mean(space: MiniSpace, coeffs: np.ndarray) -> np.ndarray:
    return coeffs - field_mean(space, coeffs)


def interpolate(space: MiniSpace, kind: str, fn) -> DiscreteField:
    """Vertex interpolation; bubble DOFs zero; pressure fields mean-corrected.

    fn maps coordinate arrays (x, y) to one scalar array (pressure/scalar)
    or a pair of component arrays (velocity).
    """
    x, y = space.mesh.vertices[:, 0], space.mesh.vertices[:, 1]
    if kind == VELOCITY:
        fx, fy = fn(x, y)
        fx = np.broadcast_to(np.asarray(fx, dtype=float), x.shape)
        fy = np.broadcast_to(np.asarray(fy, dtype=float), x.shape)
        for comp in (fx, fy):
            bad = ~np.isfinite(comp)
            if bad.any():
                i = int(np.nonzero(bad)[0][0])
                raise FieldError(f"non-finite velocity sample at vertex {i} ({x[i]}, {y[i]})")
        coeffs = np.zeros(space.n_vel_dofs)
        nv = space.mesh.n_vertices
        coeffs[:nv] = fx
        coeffs[space.n_scalar:space.n_scalar + nv] = fy
        return DiscreteField(space, VELOCITY, coeffs)
    vals = np.broadcast_to(np.asarray(fn(x, y), dtype=float), x.shape).copy()
    bad = ~np.isfinite(vals)
    if bad.any():
        i = int(np.nonzero(bad)[0][0])
        raise FieldError(f"non-finite {kind} sample at vertex {i} ({x[i]}, {y[i]})")
    if kind == PRESSURE:
        vals = remove_mean(space, vals)
    return DiscreteField(space, kind, vals)


def eval_field(fld: DiscreteField, point):
    """Exact finite-element evaluation at one point, bubble included."""
    space = fld.space
    elem, lam = space.locate(np.asarray(point, dtype=float))
    if fld.kind == VELOCITY:
        sv = shape_values(lam)[0]
        wx = fld.coeffs[space.ldof_x[elem]]
        wy = fld.coeffs[space.ldof_y[elem]]
        return np.array([wx @ sv, wy @ sv])
    return float(fld.coeffs[space.mesh.triangles[elem]] @ lam)


def norms(fld: DiscreteField, exact=None, exact_grad=None):
    """(L2 norm, H1 seminorm) of the field, or of (field - exact) when given.

    exact(x, y) and exact_grad(x, y) take flat coordinate arrays; for velocity
    they return shapes (..., 2) and (..., 2, 2), for scalars (...,) and (..., 2).
    """
    space = fld.space
    xq = space.quad_points.reshape(-1, 2)
    nq_shape = space.quad_points.shape[:2]
    if fld.kind == VELOCITY:
        vals = space.velocity_at_quad(fld.coeffs)
        grads = space.velocity_grad_at_quad(fld.coeffs)
        if exact is not None:
            vals = vals - np.asarray(exact(xq[:, 0], xq[:, 1])).reshape(*nq_shape, 2)
        if exact_grad is not None:
            grads = grads - np.asarray(exact_grad(xq[:, 0], xq[:, 1])).reshape(*nq_shape, 2, 2)
        l2 = space.integrate((vals ** 2).sum(axis=-1))
        h1 = space.integrate((grads ** 2).sum(axis=(-2, -1)))
    else:
        vals = space.scalar_at_quad(fld.coeffs)
        grads = space.scalar_grad_at_quad(fld.coeffs)
        if exact is not None:
            vals = vals - np.asarray(exact(xq[:, 0], xq[:, 1])).reshape(nq_shape)
        if exact_grad is not None:
            grads = grads - np.asarray(exact_grad(xq[:, 0], xq[:, 1])).reshape(*nq_shape, 2)
        l2 = space.integrate(vals ** 2)
        h1 = space.integrate((grads ** 2).sum(axis=-1))
    return float(np.sqrt(max(l2, 0.0))), float(np.sqrt(max(h1, 0.0)))
