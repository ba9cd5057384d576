import numpy as np
import pytest
import scipy.sparse as sp

from memflow import sparsela as sla
from memflow.assembly import assemble_static, needs_pressure_pin
from memflow.femspace import MiniSpace, remove_mean
from memflow.mesh import unit_square_mesh


def test_make_csr_canonical(rng):
    rows = np.array([1, 0, 1, 1])
    cols = np.array([0, 0, 0, 2])
    vals = np.array([2.0, 1.0, 3.0, 0.0])
    m = sla.make_csr(rows, cols, vals, (2, 3))
    assert m[1, 0] == 5.0
    assert m.nnz == 2  # duplicate summed, explicit zero pruned
    assert (np.diff(m.indptr) >= 0).all()


def test_spmv_matches_dense(rng):
    a = sp.random(50, 50, density=0.1, random_state=7, format="csr")
    x = rng.standard_normal(50)
    assert np.abs(sla.spmv(a, x) - a.toarray() @ x).max() <= 1e-12


def test_spmv_shape_mismatch(rng):
    a = sp.eye(4, format="csr")
    with pytest.raises(sla.ShapeMismatchError):
        sla.spmv(a, np.zeros(5))


def test_add_scaled_identity():
    a = sp.random(20, 20, density=0.2, random_state=3, format="csr")
    b = sp.random(20, 20, density=0.2, random_state=4, format="csr")
    c = sla.add_scaled(a, 0.0, b)
    assert np.abs((c - a).toarray()).max() == 0.0


def test_axpy():
    y = np.array([1.0, 2.0])
    x = np.array([3.0, 4.0])
    assert np.array_equal(sla.axpy(y, 2.0, x), np.array([7.0, 10.0]))
    with pytest.raises(sla.ShapeMismatchError):
        sla.axpy(y, 1.0, np.zeros(3))


def test_convection_symmetric_part_vanishes(space8, rng):
    from memflow.assembly import assemble_convection

    w = rng.standard_normal(space8.n_vel_dofs)
    n_op = assemble_convection(space8, w)
    sym = 0.5 * abs(n_op + n_op.T)
    assert sym.max() <= 1e-12 * max(abs(n_op).max(), 1e-30)


def test_factorize_identity():
    f = sla.factorize(sp.eye(5, format="csc"))
    b = np.arange(5.0)
    assert np.array_equal(sla.solve(f, b), b)


def test_factorize_small_spd():
    a = sp.csc_matrix(np.array([[2.0, 1.0], [1.0, 2.0]]))
    x = sla.factorize(a).solve(np.array([1.0, 1.0]))
    assert np.abs(x - np.array([1.0 / 3.0, 1.0 / 3.0])).max() <= 1e-14


def test_residual_contract(rng):
    a = sp.random(80, 80, density=0.1, random_state=11, format="csc") + 4 * sp.eye(80)
    b = rng.standard_normal(80)
    x = sla.factorize(a).solve(b)
    res = np.linalg.norm(a @ x - b)
    norm_a = abs(a).sum(axis=1).max()
    assert res <= 1e-10 * (norm_a * np.linalg.norm(x) + np.linalg.norm(b))


def test_structural_singularity_reports_index():
    a = sp.csc_matrix(np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 2.0]]))
    with pytest.raises(sla.SingularSystemError) as err:
        sla.factorize(a)
    assert err.value.index == 1


def test_numerical_singularity_raises():
    a = sp.csc_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(sla.SingularSystemError):
        sla.factorize(a)


def test_non_finite_rhs_rejected():
    f = sla.factorize(sp.eye(3, format="csc"))
    with pytest.raises(sla.NonFiniteError):
        f.solve(np.array([1.0, np.nan, 0.0]))


def test_factorization_reusable(rng):
    a = sp.eye(6, format="csc") * 3.0
    f = sla.factorize(a)
    for _ in range(3):
        b = rng.standard_normal(6)
        assert np.abs(f.solve(b) - b / 3.0).max() <= 1e-14


def _dense_saddle_reference(a, b_mat, constrained, pin, rhs_u, rhs_p, g):
    n_u = a.shape[0]
    n_p = b_mat.shape[0]
    n = n_u + n_p
    full = np.zeros((n, n))
    full[:n_u, :n_u] = a.toarray()
    full[:n_u, n_u:] = -b_mat.toarray().T
    full[n_u:, :n_u] = b_mat.toarray()
    cons = np.zeros(n, dtype=bool)
    cons[:n_u] = constrained
    if pin is not None:
        cons[n_u + pin] = True
    gfull = np.zeros(n)
    gfull[:n_u][constrained] = g[constrained]
    rhs = np.concatenate([rhs_u, rhs_p]) - full @ gfull
    rhs[cons] = gfull[cons]
    full[cons, :] = 0.0
    full[:, cons] = 0.0
    full[cons, cons] = 1.0
    x = np.linalg.solve(full, rhs)
    return x[:n_u], x[n_u:]


def test_saddle_matches_dense_oracle(rng):
    space = MiniSpace(unit_square_mesh(8))
    ops = assemble_static(space)
    pin = 0 if needs_pressure_pin(space, ops) else None
    a = (ops.M + ops.K).tocsr()
    a.sort_indices()
    solver = sla.SaddleSolver(a, ops.B, space.dirichlet_mask, pin_index=pin)
    solver.factor(a)
    rhs_u = rng.standard_normal(space.n_vel_dofs)
    g = np.zeros(space.n_vel_dofs)
    g[space.dirichlet_mask] = rng.standard_normal(space.dirichlet_mask.sum()) * 0.1
    u, p = solver.solve(rhs_u, np.zeros(space.n_pre_dofs), boundary_values=g)
    u_ref, p_ref = _dense_saddle_reference(a, ops.B, space.dirichlet_mask, pin,
                                           rhs_u, np.zeros(space.n_pre_dofs), g)
    assert np.abs(u - u_ref).max() <= 1e-8 * max(np.abs(u_ref).max(), 1.0)
    assert np.abs(remove_mean(space, p) - remove_mean(space, p_ref)).max() <= \
        1e-8 * max(np.abs(p_ref).max(), 1.0)
    assert np.abs(u[space.dirichlet_mask] - g[space.dirichlet_mask]).max() <= 1e-14


def test_saddle_deterministic(rng):
    space = MiniSpace(unit_square_mesh(4))
    ops = assemble_static(space)
    a = (ops.M + ops.K).tocsr()
    a.sort_indices()
    rhs = rng.standard_normal(space.n_vel_dofs)

    def solve_once():
        s = sla.SaddleSolver(a, ops.B, space.dirichlet_mask, pin_index=0)
        s.factor(a)
        return s.solve(rhs, np.zeros(space.n_pre_dofs))

    u1, p1 = solve_once()
    u2, p2 = solve_once()
    assert np.array_equal(u1, u2)
    assert np.array_equal(p1, p2)


def test_saddle_pattern_change_rejected():
    space = MiniSpace(unit_square_mesh(4))
    ops = assemble_static(space)
    a = (ops.M + ops.K).tocsr()
    a.sort_indices()
    solver = sla.SaddleSolver(a, ops.B, space.dirichlet_mask, pin_index=0)
    with pytest.raises(sla.ShapeMismatchError):
        solver.factor(np.zeros(3))


def test_dump_matrix_roundtrip(tmp_path):
    a = sp.csr_matrix(np.array([[1.5, 0.0], [0.25, -2.0]]))
    path = tmp_path / "mat.txt"
    sla.dump_matrix(a, path)
    rows = [ln.split() for ln in path.read_text().splitlines()]
    entries = {(int(r[0]), int(r[1])): float(r[2]) for r in rows}
    assert entries == {(0, 0): 1.5, (1, 0): 0.25, (1, 1): -2.0}
