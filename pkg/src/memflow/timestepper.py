"""Time integration of the memory-flow model and the Volterra-Stokes projection.

Scheme per step (backward Euler in time):
  viscous term implicit; convection linearized semi-implicitly as N(u^n) u^{n+1}
  in exactly skew form; memory term split into the SOE history (explicit) and
  the exact singular first-interval weight kappa0. The kappa0 weight can sit
  implicitly in the matrix (default, unconditionally stable) or explicitly on
  the right-hand side; both are first-order consistent.

The saddle system [[M/tau + mu K (+ rho kappa0 K) + N(u^n), -B^T], [B, 0]] is
refactorized each step because N changes; freezing convection reuses one
factorization (Stokes-Volterra mode).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import kernels
from .assembly import (OperatorSet, assemble_divergence_load, assemble_gradient_load,
                       assemble_load, assemble_static, convection_values,
                       needs_pressure_pin)
from .femspace import (DiscreteField, MiniSpace, PRESSURE, VELOCITY, interpolate,
                       norms, remove_mean)
from .memory_kernel import (HistoryState, KernelSOE, TemperedKernel, build_soe,
                            history_advance, history_eval, history_tail, new_history)
from .sparsela import SaddleSolver


class TimeSteppingError(RuntimeError):
    pass


@dataclass
class SchemeConfig:
    tau: float
    t_final: float
    kernel: TemperedKernel
    mu: float = 1.0
    soe_tol: float = 1e-9
    freeze_convection: bool = False
    local_memory_implicit: bool = True
    check_energy: bool = False

    def __post_init__(self):
        if self.tau <= 0.0 or self.t_final < self.tau:
            raise ValueError("need tau > 0 and t_final >= tau")
        if self.mu <= 0.0:
            raise ValueError("viscosity mu must be positive")

    @property
    def n_steps(self) -> int:
        return max(1, math.ceil(self.t_final / self.tau - 1e-9))


@dataclass
class FlowProblem:
    """Boundary data, forcing and initial condition for one run.

    boundary_velocity(x, y, tag, t) returns per-vertex (gx, gy) arrays; only
    masked components are used. forcing(x, y, t) returns the two body-force
    component arrays. forcing_terms is the separable fast path: a list of
    (time_coefficient(t), load_vector) pairs replacing per-step assembly.
    """

    boundary_velocity: Callable | None = None
    forcing: Callable | None = None
    forcing_terms: list | None = None
    initial_velocity: Callable | None = None


@dataclass
class FlowState:
    t: float
    n: int
    u: np.ndarray
    p: np.ndarray
    history: HistoryState


@dataclass
class RunResult:
    times: np.ndarray
    err_u_l2: np.ndarray | None
    err_u_h1: np.ndarray | None
    err_p_l2: np.ndarray | None
    final: FlowState
    energy: np.ndarray | None = None


class Stepper:
    """Holds the assembled operators, the SOE history and the saddle solver."""

    def __init__(self, space: MiniSpace, config: SchemeConfig, problem: FlowProblem,
                 ops: OperatorSet | None = None, soe: KernelSOE | None = None):
        self.space = space
        self.config = config
        self.problem = problem
        self.ops = ops if ops is not None else assemble_static(space)
        self.ops.check_space(space)
        kernel = config.kernel
        horizon = max(config.t_final, 2.0 * config.tau)
        self.soe = soe if soe is not None else build_soe(
            kernel, config.tau, horizon, config.soe_tol)
        self.kappa0 = None  # set via history state

        state0 = new_history(self.soe, config.tau, space.n_vel_dofs)
        self.kappa0 = state0.kappa0
        self._state0 = state0
        # M and K share one sparsity pattern (same element scatter), so the
        # base matrix is built by aligned data addition; this keeps exact-zero
        # entries in place and the convection slot map valid
        m, k = self.ops.M, self.ops.K
        if not np.array_equal(m.indices, k.indices):
            raise TimeSteppingError("mass/stiffness patterns unexpectedly differ")
        coef = config.mu
        if config.local_memory_implicit and kernel.rho > 0.0:
            coef += kernel.rho * self.kappa0
        base = sp.csr_matrix((m.data / config.tau + coef * k.data,
                              m.indices.copy(), m.indptr.copy()), shape=m.shape)
        self.base = base

        # map each element convection entry to its slot in base.data
        n = space.n_vel_dofs
        keys = np.repeat(np.arange(n, dtype=np.int64), np.diff(base.indptr)) * n \
            + base.indices
        nt = space.mesh.n_triangles
        maps = []
        for ldof in (space.ldof_x, space.ldof_y):
            rows = np.broadcast_to(ldof[:, :, None], (nt, 4, 4)).ravel().astype(np.int64)
            cols = np.broadcast_to(ldof[:, None, :], (nt, 4, 4)).ravel().astype(np.int64)
            maps.append(np.searchsorted(keys, rows * n + cols))
        self.conv_map = np.concatenate(maps)

        pin = 0 if needs_pressure_pin(space, self.ops) else None
        self.solver = SaddleSolver(base, self.ops.B, space.dirichlet_mask, pin_index=pin)
        self._factored_frozen = False

        # constrained vertex data for boundary evaluation
        nv = space.mesh.n_vertices
        tags = space.mesh.vertex_tags
        self._bverts = np.nonzero(tags > 0)[0]
        self._bx = space.mesh.vertices[self._bverts, 0]
        self._by = space.mesh.vertices[self._bverts, 1]
        self._btags = tags[self._bverts]
        self._nv = nv

    def boundary_values(self, t: float) -> np.ndarray:
        g = np.zeros(self.space.n_vel_dofs)
        if self.problem.boundary_velocity is not None and len(self._bverts):
            gx, gy = self.problem.boundary_velocity(self._bx, self._by, self._btags, t)
            g[self._bverts] = gx
            g[self.space.n_scalar + self._bverts] = gy
        return g

    def load_vector(self, t: float) -> np.ndarray:
        if self.problem.forcing_terms is not None:
            out = np.zeros(self.space.n_vel_dofs)
            for coef_fn, vec in self.problem.forcing_terms:
                c = coef_fn(t)
                if c != 0.0:
                    out += c * vec
            return out
        if self.problem.forcing is not None:
            f = self.problem.forcing
            return assemble_load(self.space, lambda x, y: f(x, y, t))
        return np.zeros(self.space.n_vel_dofs)

    def initial_state(self) -> FlowState:
        if self.problem.initial_velocity is not None:
            u0 = interpolate(self.space, VELOCITY, self.problem.initial_velocity).coeffs.copy()
        else:
            u0 = np.zeros(self.space.n_vel_dofs)
        g = self.boundary_values(0.0)
        mask = self.space.dirichlet_mask
        u0[mask] = g[mask]
        return FlowState(t=0.0, n=0, u=u0, p=np.zeros(self.space.n_pre_dofs),
                         history=self._state0)

    def step(self, state: FlowState) -> FlowState:
        cfg = self.config
        space = self.space
        kernel = cfg.kernel
        t_new = (state.n + 1) * cfg.tau

        need_factor = True
        if cfg.freeze_convection:
            a_data = self.base.data
            if self._factored_frozen:
                need_factor = False
        else:
            c_el = convection_values(space, state.u).ravel()
            vals = np.concatenate([c_el, c_el])
            a_data = self.base.data + kernels.scatter_accumulate(
                self.conv_map, vals, self.base.nnz)

        rhs_u = self.ops.M @ state.u / cfg.tau + self.load_vector(t_new)
        if kernel.rho > 0.0:
            mem = history_tail(state.history)
            if not cfg.local_memory_implicit:
                mem = mem + self.kappa0 * state.u
            rhs_u -= kernel.rho * (self.ops.K @ mem)

        if need_factor:
            try:
                self.solver.factor(a_data)
            except Exception as exc:
                raise TimeSteppingError(f"factorization failed at step {state.n + 1}: {exc}") \
                    from exc
            if cfg.freeze_convection:
                self._factored_frozen = True

        g = self.boundary_values(t_new)
        u_new, p_new = self.solver.solve(rhs_u, np.zeros(space.n_pre_dofs),
                                         boundary_values=g)
        if not (np.isfinite(u_new).all() and np.isfinite(p_new).all()):
            raise TimeSteppingError(f"non-finite solution at step {state.n + 1} "
                                    f"(t = {t_new:.6g})")
        p_new = remove_mean(space, p_new)
        history_advance(state.history, state.u)
        return FlowState(t=t_new, n=state.n + 1, u=u_new, p=p_new, history=state.history)


def run(space: MiniSpace, config: SchemeConfig, problem: FlowProblem,
        exact=None, record_stride: int = 1, snapshot_cb=None,
        ops: OperatorSet | None = None, soe: KernelSOE | None = None) -> RunResult:
    """March ceil(t_final/tau) steps; record error norms every record_stride
    steps when an exact solution (velocity/velocity_grad/pressure) is given."""
    stepper = Stepper(space, config, problem, ops=ops, soe=soe)
    state = stepper.initial_state()
    n_steps = config.n_steps

    times, e_l2, e_h1, e_p = [], [], [], []
    energies = [] if config.check_energy else None

    def record(st: FlowState):
        times.append(st.t)
        if exact is not None:
            uf = DiscreteField(space, VELOCITY, st.u)
            l2, h1 = norms(uf, exact=lambda x, y: exact.velocity(x, y, st.t),
                           exact_grad=lambda x, y: exact.velocity_grad(x, y, st.t))
            pf = DiscreteField(space, PRESSURE, st.p)
            pl2, _ = norms(pf, exact=lambda x, y: exact.pressure(x, y, st.t))
            e_l2.append(l2)
            e_h1.append(h1)
            e_p.append(pl2)
        if snapshot_cb is not None:
            snapshot_cb(st)

    for k in range(1, n_steps + 1):
        state = stepper.step(state)
        if energies is not None:
            energies.append(float(state.u @ (stepper.ops.M @ state.u)))
        if k % record_stride == 0 or k == n_steps:
            record(state)

    return RunResult(
        times=np.asarray(times),
        err_u_l2=np.asarray(e_l2) if exact is not None else None,
        err_u_h1=np.asarray(e_h1) if exact is not None else None,
        err_p_l2=np.asarray(e_p) if exact is not None else None,
        final=state,
        energy=np.asarray(energies) if energies is not None else None)


@dataclass
class ProjectionResult:
    times: np.ndarray
    err_l2: np.ndarray
    err_h1: np.ndarray


def divfree_l2_projection(space: MiniSpace, ops: OperatorSet, exact_velocity_at,
                          ) -> np.ndarray:
    """L2 projection onto the discretely divergence-free subspace (saddle form)."""
    pin = 0 if needs_pressure_pin(space, ops) else None
    solver = SaddleSolver(ops.M, ops.B, space.dirichlet_mask, pin_index=pin)
    solver.factor(ops.M)
    rhs = assemble_load(space, exact_velocity_at)
    u, _ = solver.solve(rhs, np.zeros(space.n_pre_dofs))
    return u


def volterra_stokes_project(space: MiniSpace, kernel: TemperedKernel, exact,
                            tau: float, T: float, mu: float = 1.0,
                            soe_tol: float = 1e-9,
                            ops: OperatorSet | None = None) -> ProjectionResult:
    """Error series of the history-aware Stokes projection of an exact solution.

    At each t_n the mixed problem  mu a(w, phi) - d(phi, r) = mu a(u, phi)
    - d(phi, p) + rho [conv of a(u, .) history - conv of a(w, .) history],
    d(w, q) = 0 is solved with the same product-integration split as the time
    stepper, the sub-tau weight sitting implicitly on w^n (an explicit local
    weight is unstable whenever rho kappa0 > mu). Starts from the
    divergence-free L2 projection.
    """
    if ops is None:
        ops = assemble_static(space)
    ops.check_space(space)
    n_steps = max(1, math.ceil(T / tau - 1e-9))
    soe = build_soe(kernel, tau, max(T, 2 * tau), soe_tol)

    hist_w = new_history(soe, tau, space.n_vel_dofs)
    hist_g = new_history(soe, tau, space.n_vel_dofs)
    coef = mu + kernel.rho * hist_w.kappa0

    pin = 0 if needs_pressure_pin(space, ops) else None
    stokes = SaddleSolver(coef * ops.K, ops.B, space.dirichlet_mask, pin_index=pin)
    stokes.factor((coef * ops.K).tocsr())

    def vel_at(t):
        return lambda x, y: exact.velocity(x, y, t)

    def grad_at(t):
        return lambda x, y: exact.velocity_grad(x, y, t)

    def pres_at(t):
        return lambda x, y: exact.pressure(x, y, t)

    w = divfree_l2_projection(space, ops, vel_at(0.0))
    times = [0.0]
    errs = [norms(DiscreteField(space, VELOCITY, w), exact=vel_at(0.0),
                  exact_grad=grad_at(0.0))]

    for n in range(1, n_steps + 1):
        t = n * tau
        ga_t = assemble_gradient_load(space, grad_at(t))
        rhs = mu * ga_t - assemble_divergence_load(space, pres_at(t))
        if kernel.rho > 0.0:
            # both convolutions sample at interval right endpoints: the local
            # kappa0 g(t_n) term is explicit data, the kappa0 w^n term sits in
            # the matrix through coef
            rhs += kernel.rho * (hist_w.kappa0 * ga_t + history_tail(hist_g))
            rhs -= kernel.rho * (ops.K @ history_tail(hist_w))
        w, _ = stokes.solve(rhs, np.zeros(space.n_pre_dofs))
        if kernel.rho > 0.0:
            history_advance(hist_g, ga_t)
            history_advance(hist_w, w)
        times.append(t)
        errs.append(norms(DiscreteField(space, VELOCITY, w), exact=vel_at(t),
                          exact_grad=grad_at(t)))

    errs = np.asarray(errs)
    return ProjectionResult(times=np.asarray(times), err_l2=errs[:, 0], err_h1=errs[:, 1])
