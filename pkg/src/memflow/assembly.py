"""Sparse operators of the variational problem on a MiniSpace.

All operators are assembled unconstrained with the space's quadrature rule;
Dirichlet elimination happens at solve time (sparsela). Convection is built
in the exactly skew-symmetrized form 0.5*[a1(w,v,z) - a1(w,z,v)] so that
(N(w) v, v) vanishes to machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .femspace import DiscreteField, MiniSpace, VELOCITY


class AssemblyError(ValueError):
    pass


class SpaceMismatchError(AssemblyError):
    pass


class LoadEvaluationError(AssemblyError):
    pass


@dataclass
class OperatorSet:
    """Static operators: velocity mass M, velocity stiffness K, divergence
    coupling B (pressure rows x velocity columns), pressure mass Mp, plus the
    scalar one-component blocks they are built from."""

    M: sp.csr_matrix
    K: sp.csr_matrix
    B: sp.csr_matrix
    Mp: sp.csr_matrix
    M_scalar: sp.csr_matrix
    K_scalar: sp.csr_matrix
    assembled_on: int

    def check_space(self, space: MiniSpace):
        if self.assembled_on != id(space):
            raise SpaceMismatchError("operators were assembled on a different space")


def _scatter_square(rows, cols, vals, n):
    m = sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n))
    m = m.tocsr()
    m.sum_duplicates()
    m.sort_indices()
    return m


def assemble_static(space: MiniSpace) -> OperatorSet:
    nt = space.mesh.n_triangles
    ns = space.n_scalar
    S = space.shape_vals
    w = space.quad_weights
    G = space.shape_grads
    area = space.area

    m_ref = 2.0 * (S.T * w) @ S  # element mass per unit area
    m_el = area[:, None, None] * m_ref[None, :, :]
    k_el = np.einsum("q,eqix,eqjx->eij", w, G, G) * (2.0 * area)[:, None, None]

    ldof = space.ldof_x
    rows = np.broadcast_to(ldof[:, :, None], (nt, 4, 4))
    cols = np.broadcast_to(ldof[:, None, :], (nt, 4, 4))
    M_s = _scatter_square(rows, cols, m_el, ns)
    K_s = _scatter_square(rows, cols, k_el, ns)
    M = sp.block_diag((M_s, M_s), format="csr")
    K = sp.block_diag((K_s, K_s), format="csr")

    lam = S[:, :3]
    bx = np.einsum("q,qi,eqj->eij", w, lam, G[:, :, :, 0]) * (2.0 * area)[:, None, None]
    by = np.einsum("q,qi,eqj->eij", w, lam, G[:, :, :, 1]) * (2.0 * area)[:, None, None]
    prow = np.broadcast_to(space.mesh.triangles[:, :, None], (nt, 3, 4))
    bx_cols = np.broadcast_to(space.ldof_x[:, None, :], (nt, 3, 4))
    by_cols = np.broadcast_to(space.ldof_y[:, None, :], (nt, 3, 4))
    B = sp.coo_matrix(
        (np.concatenate([bx.ravel(), by.ravel()]),
         (np.concatenate([prow.ravel(), prow.ravel()]),
          np.concatenate([bx_cols.ravel(), by_cols.ravel()]))),
        shape=(space.n_pre_dofs, space.n_vel_dofs)).tocsr()
    B.sum_duplicates()
    B.sort_indices()

    mp_el = area[:, None, None] / 12.0 * (np.ones((3, 3)) + np.eye(3))[None, :, :]
    tri = space.mesh.triangles
    Mp = _scatter_square(np.broadcast_to(tri[:, :, None], (nt, 3, 3)),
                         np.broadcast_to(tri[:, None, :], (nt, 3, 3)),
                         mp_el, space.n_pre_dofs)

    return OperatorSet(M=M, K=K, B=B, Mp=Mp, M_scalar=M_s, K_scalar=K_s,
                       assembled_on=id(space))


def convection_values(space: MiniSpace, w_coeffs: np.ndarray) -> np.ndarray:
    """(nt, 4, 4) skew element matrices of the scalar convection block."""
    wx, wy = space.velocity_local(w_coeffs)
    return kernels.convection_element_values(
        np.ascontiguousarray(wx), np.ascontiguousarray(wy),
        space.shape_vals, space.shape_grads, space.quad_weights, space.area)


def assemble_convection(space: MiniSpace, w) -> sp.csr_matrix:
    """Skew-symmetrized convection operator N(w) on the full velocity space."""
    if isinstance(w, DiscreteField):
        if w.space is not space:
            raise SpaceMismatchError("convecting field lives on a different space")
        if w.kind != VELOCITY:
            raise SpaceMismatchError("convecting field must be a velocity")
        w = w.coeffs
    c_el = convection_values(space, w)
    nt = space.mesh.n_triangles
    vals = np.concatenate([c_el.ravel(), c_el.ravel()])
    rows = np.concatenate([
        np.broadcast_to(space.ldof_x[:, :, None], (nt, 4, 4)).ravel(),
        np.broadcast_to(space.ldof_y[:, :, None], (nt, 4, 4)).ravel()])
    cols = np.concatenate([
        np.broadcast_to(space.ldof_x[:, None, :], (nt, 4, 4)).ravel(),
        np.broadcast_to(space.ldof_y[:, None, :], (nt, 4, 4)).ravel()])
    return _scatter_square(rows, cols, vals, space.n_vel_dofs)


def _eval_vector_fn(space: MiniSpace, f):
    xq = space.quad_points.reshape(-1, 2)
    out = f(xq[:, 0], xq[:, 1])
    if isinstance(out, (tuple, list)) and len(out) == 2:
        fx, fy = out
    else:
        out = np.asarray(out, dtype=float)
        fx, fy = out[..., 0], out[..., 1]
    fx = np.broadcast_to(np.asarray(fx, dtype=float), xq[:, 0].shape)
    fy = np.broadcast_to(np.asarray(fy, dtype=float), xq[:, 0].shape)
    for comp in (fx, fy):
        bad = ~np.isfinite(comp)
        if bad.any():
            i = int(np.nonzero(bad)[0][0])
            raise LoadEvaluationError(
                f"non-finite load value at quadrature point ({xq[i, 0]}, {xq[i, 1]})")
    shape = space.quad_points.shape[:2]
    return fx.reshape(shape), fy.reshape(shape)


def assemble_load(space: MiniSpace, f) -> np.ndarray:
    """Load vector with entries integral(f . phi_i); f maps (x, y) arrays to
    the two component arrays."""
    fx, fy = _eval_vector_fn(space, f)
    out = np.zeros(space.n_vel_dofs)
    scale = (2.0 * space.area)[:, None]
    lx = np.einsum("q,eq,qi->ei", space.quad_weights, fx, space.shape_vals) * scale
    ly = np.einsum("q,eq,qi->ei", space.quad_weights, fy, space.shape_vals) * scale
    out += kernels.scatter_accumulate(space.ldof_x.ravel(), lx.ravel(), space.n_vel_dofs)
    out += kernels.scatter_accumulate(space.ldof_y.ravel(), ly.ravel(), space.n_vel_dofs)
    return out


def assemble_gradient_load(space: MiniSpace, grad_fn) -> np.ndarray:
    """Entries integral(Gr : grad phi_i) for a prescribed 2x2 gradient field
    Gr(x, y); realizes a(u_exact, phi) against the velocity basis."""
    xq = space.quad_points.reshape(-1, 2)
    gr = np.asarray(grad_fn(xq[:, 0], xq[:, 1]), dtype=float)
    gr = gr.reshape(*space.quad_points.shape[:2], 2, 2)
    out = np.zeros(space.n_vel_dofs)
    scale = (2.0 * space.area)[:, None]
    for comp, ldof in ((0, space.ldof_x), (1, space.ldof_y)):
        contrib = np.einsum("q,eqx,eqix->ei", space.quad_weights, gr[:, :, comp, :],
                            space.shape_grads) * scale
        out += kernels.scatter_accumulate(ldof.ravel(), contrib.ravel(), space.n_vel_dofs)
    return out


def assemble_divergence_load(space: MiniSpace, p_fn) -> np.ndarray:
    """Entries integral(p * div phi_i) = d(phi_i, p) for a scalar field p(x, y)."""
    xq = space.quad_points.reshape(-1, 2)
    pv = np.broadcast_to(np.asarray(p_fn(xq[:, 0], xq[:, 1]), dtype=float), xq[:, 0].shape)
    pv = pv.reshape(space.quad_points.shape[:2])
    out = np.zeros(space.n_vel_dofs)
    scale = (2.0 * space.area)[:, None]
    for comp, ldof in ((0, space.ldof_x), (1, space.ldof_y)):
        contrib = np.einsum("q,eq,eqi->ei", space.quad_weights, pv,
                            space.shape_grads[:, :, :, comp]) * scale
        out += kernels.scatter_accumulate(ldof.ravel(), contrib.ravel(), space.n_vel_dofs)
    return out


def assemble_p1_load(space: MiniSpace, values_at_quad: np.ndarray) -> np.ndarray:
    """P1 scalar load from per-quad-point samples (nt, nq)."""
    contrib = np.einsum("q,eq,qi->ei", space.quad_weights, values_at_quad,
                        space.shape_vals[:, :3]) * (2.0 * space.area)[:, None]
    return kernels.scatter_accumulate(
        space.mesh.triangles.ravel(), contrib.ravel(), space.n_pre_dofs)


def needs_pressure_pin(space: MiniSpace, ops: OperatorSet) -> bool:
    """True when constant pressures lie in the null space of the constrained
    divergence operator (pure Dirichlet velocity data), so one pressure DOF
    must be pinned; with a natural outflow no pin is needed (and pinning
    would inject a spurious point source)."""
    w = ops.B.T @ np.ones(space.n_pre_dofs)
    w[space.dirichlet_mask] = 0.0
    return bool(np.abs(w).max() <= 1e-10 * np.abs(ops.B.data).max())


@dataclass
class InfSupResult:
    value: float
    converged: bool
    iterations: int


def inf_sup_estimate(space: MiniSpace, ops: OperatorSet, tol: float = 1e-8,
                     max_iter: int = 200, seed: int = 0) -> InfSupResult:
    """Empirical discrete inf-sup constant.

    Smallest nontrivial generalized singular value of B measured in the
    K-norm on velocities and the L2 norm on pressures: inverse iteration on
    the pressure Schur complement S = B K^-1 B^T against the pressure mass,
    with the constant-pressure null vector projected out.
    """
    ops.check_space(space)
    free = ~space.dirichlet_mask
    n_u, n_p = space.n_vel_dofs, space.n_pre_dofs

    d_free = sp.diags(free.astype(float))
    K_elim = (d_free @ ops.K @ d_free + sp.diags((~free).astype(float))).tocsc()
    B_free = (ops.B @ d_free).tocsr()
    K_lu = spla.splu(K_elim)

    mp_lumped = np.asarray(ops.Mp.sum(axis=1)).ravel()
    ones = np.ones(n_p)
    wgt = space.pressure_integrals

    def deflate(q):
        return q - (wgt @ q) / (wgt @ ones) * ones

    def s_apply(q):
        v = ops.B.T @ q
        v[~free] = 0.0
        z = K_lu.solve(v)
        z[~free] = 0.0
        return B_free @ z

    s_op = spla.LinearOperator((n_p, n_p), matvec=s_apply)
    rng = np.random.default_rng(seed)
    q = deflate(rng.standard_normal(n_p))
    q /= np.sqrt(q @ (ops.Mp @ q))
    lam = np.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        rhs = ops.Mp @ q
        z, info = spla.cg(s_op, rhs, x0=q, rtol=1e-10, atol=0.0,
                          maxiter=4 * n_p, M=sp.diags(1.0 / mp_lumped))
        if info != 0:
            return InfSupResult(float(np.sqrt(max(lam, 0.0))) if np.isfinite(lam) else 0.0,
                                False, it)
        z = deflate(z)
        lam_new = (z @ rhs) / (z @ (ops.Mp @ z))
        q = z / np.sqrt(z @ (ops.Mp @ z))
        if np.isfinite(lam) and abs(lam_new - lam) <= tol * abs(lam_new):
            lam = lam_new
            converged = True
            break
        lam = lam_new
    return InfSupResult(float(np.sqrt(max(lam, 0.0))), converged, it)


def dump_matrix(matrix, path) -> None:
    """Coordinate text dump `i j value`, zero-based, for debugging."""
    coo = sp.coo_matrix(matrix)
    with open(path, "w") as fh:
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i} {j} {v:.17g}\n")
