"""Planar four-to-one contraction flow: driver, stream function, vortex metric.

Half of the symmetric channel is simulated: upstream [-20,0]x[0,4] joined to
downstream [0,30]x[0,1], symmetry line at y=0, reentrant corner at (0,1). The
prescribed inflow profile u = (3/8 (1 - ((4-y)/4)^2), 0) carries unit flux and
is ramped over [0, ramp_time] because the model starts from rest.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .assembly import OperatorSet, assemble_p1_load, assemble_static
from .femspace import DiscreteField, MiniSpace, SCALAR
from .memory_kernel import TemperedKernel
from .mesh import (DOWNSTREAM_LENGTH, INFLOW, OUTFLOW, SYMMETRY, UPSTREAM_HEIGHT,
                   UPSTREAM_LENGTH, WALL, contraction_mesh)
from .sparsela import Factorization
from .timestepper import FlowProblem, SchemeConfig, run

VORTEX_BOX = (-6.0, 0.0, 3.0, 4.0)  # corner region probed for recirculation
PSI_EXCESS = 1e-6  # recirculation indicator: psi above the wall streamline


def inflow_profile(y):
    """Prescribed inflow x-velocity; integrates to unit flux over [0, 4]."""
    return 0.375 * (1.0 - ((UPSTREAM_HEIGHT - y) / UPSTREAM_HEIGHT) ** 2)


def inflow_profile_integral(y):
    """Antiderivative of the profile with value 0 at y = 0 and 1 at y = 4."""
    h = UPSTREAM_HEIGHT
    return 0.375 * (y + (h - y) ** 3 / (3.0 * h * h) - h / 3.0)


def prescribed_flux() -> float:
    return float(inflow_profile_integral(UPSTREAM_HEIGHT))


@dataclass
class ContractionParams:
    mu: float = 1.0
    rho: float = 16.0
    beta: float = 0.5
    delta: float = 10.0
    tau: float = 1e-3
    t_final: float = 5.0
    ramp_time: float = 0.1
    grading: float = 0.2
    base_h: float = 0.6
    soe_tol: float = 1e-7
    local_memory_implicit: bool = True

    @property
    def kernel(self) -> TemperedKernel:
        return TemperedKernel(self.beta, self.delta, self.rho)

    def ramp(self, t: float) -> float:
        return min(t / self.ramp_time, 1.0) if self.ramp_time > 0 else 1.0


@dataclass
class Snapshot:
    t: float
    u: np.ndarray
    p: np.ndarray


@dataclass
class ContractionRun:
    params: ContractionParams
    space: MiniSpace
    ops: OperatorSet
    snapshots: list
    influx_discrete: float
    outflux_discrete: float
    influx_prescribed: float

    @property
    def final(self) -> Snapshot:
        return self.snapshots[-1]

    def flux_balance_error(self) -> float:
        return abs(self.outflux_discrete - self.influx_discrete) / max(
            abs(self.influx_discrete), 1e-30)

    def stream_function(self, snapshot: Snapshot | None = None) -> DiscreteField:
        snapshot = snapshot if snapshot is not None else self.final
        flux = self.params.ramp(snapshot.t) * prescribed_flux()
        psi_b = contraction_psi_boundary(self.space, snapshot.u, flux,
                                         self.params.ramp(snapshot.t))
        return stream_function(self.space, self.ops, snapshot.u, psi_b)

    def vortex_metric(self, snapshot: Snapshot | None = None) -> float:
        snapshot = snapshot if snapshot is not None else self.final
        psi = self.stream_function(snapshot)
        flux = self.params.ramp(snapshot.t) * prescribed_flux()
        return vortex_metric(self.space, psi, wall_value=flux)


def _boundary_edge_integral(space: MiniSpace, u_coeffs, keep_vertex) -> float:
    """Trapezoid integral of u_x over boundary edges whose endpoints both
    satisfy keep_vertex (only P1 traces are nonzero on element boundaries)."""
    from .mesh import boundary_edges

    mesh = space.mesh
    edges = boundary_edges(mesh)
    sel = keep_vertex[edges[:, 0]] & keep_vertex[edges[:, 1]]
    edges = edges[sel]
    ux = u_coeffs[:mesh.n_vertices]
    dy = np.abs(mesh.vertices[edges[:, 1], 1] - mesh.vertices[edges[:, 0], 1])
    return float(np.sum(0.5 * (ux[edges[:, 0]] + ux[edges[:, 1]]) * dy))


def run_contraction(params: ContractionParams, space: MiniSpace | None = None,
                    ops: OperatorSet | None = None, snapshot_stride: int | None = None,
                    ) -> ContractionRun:
    """Time-march the contraction problem from rest and collect snapshots."""
    if space is None:
        space = MiniSpace(contraction_mesh(params.grading, params.base_h))
    if ops is None:
        ops = assemble_static(space)

    def boundary_velocity(x, y, tags, t):
        gx = np.where(tags == INFLOW, params.ramp(t) * inflow_profile(y), 0.0)
        return gx, np.zeros_like(gx)

    problem = FlowProblem(boundary_velocity=boundary_velocity)
    config = SchemeConfig(tau=params.tau, t_final=params.t_final,
                          kernel=params.kernel, mu=params.mu,
                          soe_tol=params.soe_tol,
                          local_memory_implicit=params.local_memory_implicit)
    snapshots = []
    stride = snapshot_stride if snapshot_stride is not None else config.n_steps

    def grab(state):
        snapshots.append(Snapshot(t=state.t, u=state.u.copy(), p=state.p.copy()))

    run(space, config, problem, record_stride=stride, snapshot_cb=grab, ops=ops)

    tags = space.mesh.vertex_tags
    u_final = snapshots[-1].u
    influx = _boundary_edge_integral(
        space, u_final, (tags == INFLOW) | (np.abs(space.mesh.vertices[:, 0]
                                                   + UPSTREAM_LENGTH) < 1e-9))
    outflux = _boundary_edge_integral(
        space, u_final, np.abs(space.mesh.vertices[:, 0] - DOWNSTREAM_LENGTH) < 1e-9)
    return ContractionRun(params=params, space=space, ops=ops, snapshots=snapshots,
                          influx_discrete=influx, outflux_discrete=outflux,
                          influx_prescribed=params.ramp(snapshots[-1].t) * prescribed_flux())


def contraction_psi_boundary(space: MiniSpace, u_coeffs, flux: float,
                             ramp: float) -> np.ndarray:
    """Boundary stream-function values: 0 on the symmetry line, the running
    inflow integral on the inflow, the full flux on walls, and the cumulative
    discrete velocity integral on the outflow."""
    mesh = space.mesh
    tags = mesh.vertex_tags
    y = mesh.vertices[:, 1]
    psi = np.full(mesh.n_vertices, np.nan)
    psi[tags == SYMMETRY] = 0.0
    psi[tags == WALL] = flux
    psi[tags == INFLOW] = ramp * inflow_profile_integral(y[tags == INFLOW])

    out = np.nonzero(tags == OUTFLOW)[0]
    if out.size:
        order = np.argsort(y[out])
        out = out[order]
        ux = u_coeffs[:mesh.n_vertices]
        yy = np.concatenate([[0.0], y[out]])
        uu = np.concatenate([[ux[out[0]]], ux[out]])  # symmetry-line value by evenness
        psi[out] = np.cumsum(0.5 * (uu[1:] + uu[:-1]) * np.diff(yy))
        # bottom outflow vertex sits on the symmetry line when tags collide
        psi[out[np.abs(y[out]) < 1e-12]] = 0.0
    return psi


def stream_function(space: MiniSpace, ops: OperatorSet, u_coeffs,
                    boundary_psi: np.ndarray) -> DiscreteField:
    """P1 Poisson solve -Lap(psi) = curl(u_h) with Dirichlet data boundary_psi
    (NaN marks unconstrained vertices)."""
    nv = space.mesh.n_vertices
    grads = space.velocity_grad_at_quad(u_coeffs)
    omega = grads[:, :, 1, 0] - grads[:, :, 0, 1]
    rhs = assemble_p1_load(space, omega)

    kp1 = ops.K_scalar[:nv, :nv].tocsr()
    constrained = ~np.isnan(boundary_psi)
    g = np.where(constrained, boundary_psi, 0.0)
    free = sp.diags((~constrained).astype(float))
    fixed = sp.diags(constrained.astype(float))
    a_elim = (free @ kp1 @ free + fixed).tocsc()
    rhs_eff = rhs - kp1 @ g
    rhs_eff[constrained] = g[constrained]
    psi = Factorization(a_elim).solve(rhs_eff)
    return DiscreteField(space, SCALAR, psi)


def vortex_metric(space: MiniSpace, psi: DiscreteField, wall_value: float = None,
                  box=VORTEX_BOX, excess: float = PSI_EXCESS) -> float:
    """Area of the recirculation region: quadrature of the indicator
    psi > wall_value + excess inside the corner box."""
    wall_value = prescribed_flux() if wall_value is None else wall_value
    vals = space.scalar_at_quad(psi.coeffs)
    xq = space.quad_points
    inside = ((xq[:, :, 0] >= box[0]) & (xq[:, :, 0] <= box[1])
              & (xq[:, :, 1] >= box[2]) & (xq[:, :, 1] <= box[3]))
    indicator = (vals > wall_value + excess) & inside
    return float(space.integrate(indicator.astype(float)))


@dataclass
class SweepRow:
    beta: float
    rho: float
    vortex_area: float
    max_speed: float
    error: str = ""


@dataclass
class SweepResult:
    rows: list = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["beta,rho,vortex_area,max_speed"]
        for r in self.rows:
            lines.append(f"{r.beta:.17g},{r.rho:.17g},{r.vortex_area:.17g},{r.max_speed:.17g}")
        return "\n".join(lines) + "\n"


def max_speed(space: MiniSpace, u_coeffs) -> float:
    nv = space.mesh.n_vertices
    ux = u_coeffs[:nv]
    uy = u_coeffs[space.n_scalar:space.n_scalar + nv]
    return float(np.hypot(ux, uy).max())


def beta_sweep(betas, params: ContractionParams, include_navier_stokes: bool = False,
               progress=None, on_case=None) -> SweepResult:
    """Run each beta on one shared mesh; per-case failures are isolated.

    Rows are (beta, rho) cases: optionally a rho=0 Navier-Stokes baseline,
    then the given betas at the shared rho. Duplicate betas are dropped."""
    if not len(list(betas)):
        raise ValueError("beta list must be nonempty")
    seen = set()
    uniq = []
    for b in betas:
        if b in seen:
            warnings.warn(f"duplicate beta {b} ignored")
            continue
        seen.add(b)
        uniq.append(b)

    space = MiniSpace(contraction_mesh(params.grading, params.base_h))
    ops = assemble_static(space)
    cases = ([(0.0, 0.0)] if include_navier_stokes else []) + \
        [(b, params.rho) for b in uniq]
    result = SweepResult()
    for beta, rho in cases:
        from dataclasses import replace

        p = replace(params, beta=beta, rho=rho)
        try:
            r = run_contraction(p, space=space, ops=ops)
            row = SweepRow(beta=beta, rho=rho, vortex_area=r.vortex_metric(),
                           max_speed=max_speed(space, r.final.u))
            if on_case is not None:
                on_case(row, r)
        except Exception as exc:  # isolate per-case failures, keep sweeping
            row = SweepRow(beta=beta, rho=rho, vortex_area=math.nan,
                           max_speed=math.nan, error=str(exc))
        result.rows.append(row)
        if progress is not None:
            progress(row)
    return result
