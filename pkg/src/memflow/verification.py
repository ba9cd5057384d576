"""Manufactured-solution verification: forcing, convergence tables, decay fits.

The exact solution is separable, u = u_sp(x) e^(-delta t) with a divergence-free
polynomial u_sp, so the memory convolution has the closed form
Q * (Lap u) = Lap(u_sp) e^(-delta t) t^(1-beta)/(1-beta) and the forcing splits
into three time-coefficient x load-vector pairs that the stepper reuses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .assembly import assemble_load, assemble_static
from .femspace import MiniSpace
from .memory_kernel import TemperedKernel, build_soe
from .mesh import unit_square_mesh
from .timestepper import FlowProblem, SchemeConfig, run


class VerificationError(ValueError):
    pass


def _g(s):
    return s * s * (s - 1.0) ** 2


def _dg(s):
    return 2.0 * s * (s - 1.0) * (2.0 * s - 1.0)


def _ddg(s):
    return 12.0 * s * s - 12.0 * s + 2.0


def _q(s):
    return s * (s - 1.0) * (2.0 * s - 1.0)


def _dq(s):
    return 6.0 * s * s - 6.0 * s + 1.0


def _ddq(s):
    return 12.0 * s - 6.0


@dataclass(frozen=True)
class ManufacturedCase:
    """Exact velocity/pressure pair on the unit square with its closed-form forcing."""

    mu: float = 1.0
    rho: float = 16.0
    beta: float = 0.5
    delta: float = 10.0

    @property
    def kernel(self) -> TemperedKernel:
        return TemperedKernel(self.beta, self.delta, self.rho)

    # spatial factors (time factor removed)

    def velocity_spatial(self, x, y):
        return 10.0 * _g(x) * _q(y), -10.0 * _q(x) * _g(y)

    def velocity_grad_spatial(self, x, y):
        d11 = 20.0 * _q(x) * _q(y)
        d12 = 10.0 * _g(x) * _dq(y)
        d21 = -10.0 * _dq(x) * _g(y)
        d22 = -20.0 * _q(x) * _q(y)
        return d11, d12, d21, d22

    def laplacian_spatial(self, x, y):
        l1 = 10.0 * (_ddg(x) * _q(y) + _g(x) * _ddq(y))
        l2 = -10.0 * (_ddq(x) * _g(y) + _q(x) * _ddg(y))
        return l1, l2

    def pressure_spatial(self, x, y):
        return 10.0 * (2.0 * x - 1.0) * (2.0 * y - 1.0)

    def pressure_grad_spatial(self, x, y):
        return 20.0 * (2.0 * y - 1.0), 20.0 * (2.0 * x - 1.0)

    def convective_spatial(self, x, y):
        u1, u2 = self.velocity_spatial(x, y)
        d11, d12, d21, d22 = self.velocity_grad_spatial(x, y)
        return u1 * d11 + u2 * d12, u1 * d21 + u2 * d22

    # exact fields

    def velocity(self, x, y, t):
        u1, u2 = self.velocity_spatial(x, y)
        e = math.exp(-self.delta * t)
        return np.stack([u1 * e, u2 * e], axis=-1)

    def velocity_grad(self, x, y, t):
        d11, d12, d21, d22 = self.velocity_grad_spatial(x, y)
        e = math.exp(-self.delta * t)
        out = np.stack([np.stack([d11, d12], axis=-1),
                        np.stack([d21, d22], axis=-1)], axis=-2)
        return out * e

    def pressure(self, x, y, t):
        return self.pressure_spatial(x, y) * math.exp(-self.delta * t)

    def memory_coefficient(self, t) -> float:
        """Closed form of Q * e^(-delta s) at time t: e^(-delta t) t^(1-beta)/(1-beta)."""
        if t == 0.0:
            return 0.0
        return math.exp(-self.delta * t) * t ** (1.0 - self.beta) / (1.0 - self.beta)

    def forcing(self, x, y, t):
        """Body force making (velocity, pressure) an exact solution."""
        if np.any(np.asarray(t) < 0.0):
            raise VerificationError(f"forcing requires t >= 0, got {t}")
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        e = math.exp(-self.delta * t)
        u1, u2 = self.velocity_spatial(x, y)
        l1, l2 = self.laplacian_spatial(x, y)
        px, py = self.pressure_grad_spatial(x, y)
        c1, c2 = self.convective_spatial(x, y)
        mem = self.rho * self.memory_coefficient(t)
        f1 = e * (-self.delta * u1 - self.mu * l1 + px) + e * e * c1 - mem * l1
        f2 = e * (-self.delta * u2 - self.mu * l2 + py) + e * e * c2 - mem * l2
        return f1, f2

    def divergence_at(self, x, y):
        """Pointwise divergence of the spatial velocity (analytically zero)."""
        d11, _, _, d22 = self.velocity_grad_spatial(x, y)
        return d11 + d22

    def forcing_terms(self, space: MiniSpace) -> list:
        """Separable forcing as (time coefficient, load vector) pairs."""
        delta, mu, rho, beta = self.delta, self.mu, self.rho, self.beta

        def linear_part(x, y):
            u1, u2 = self.velocity_spatial(x, y)
            l1, l2 = self.laplacian_spatial(x, y)
            px, py = self.pressure_grad_spatial(x, y)
            return (-delta * u1 - mu * l1 + px, -delta * u2 - mu * l2 + py)

        load_lin = assemble_load(space, linear_part)
        load_conv = assemble_load(space, self.convective_spatial)
        load_lap = assemble_load(space, self.laplacian_spatial)
        return [
            (lambda t: math.exp(-delta * t), load_lin),
            (lambda t: math.exp(-2.0 * delta * t), load_conv),
            (lambda t: -rho * self.memory_coefficient(t), load_lap),
        ]

    def problem(self, space: MiniSpace) -> FlowProblem:
        return FlowProblem(
            forcing_terms=self.forcing_terms(space),
            initial_velocity=lambda x, y: self.velocity_spatial(x, y))


@dataclass
class ConvergenceRow:
    n: int
    h: float
    err_u_l2: float
    err_u_h1: float
    err_p_l2: float
    rate_u_l2: float | None = None
    rate_u_h1: float | None = None
    rate_p_l2: float | None = None


@dataclass
class ConvergenceResult:
    rows: list

    def last_rates(self):
        r = self.rows[-1]
        return r.rate_u_l2, r.rate_u_h1, r.rate_p_l2

    def to_csv(self) -> str:
        def fmt(v):
            return "" if v is None else f"{v:.17g}"

        lines = ["n,h,err_u_L2,rate_u_L2,err_u_H1,rate_u_H1,err_p_L2,rate_p_L2"]
        for r in self.rows:
            lines.append(",".join([str(r.n), f"{r.h:.17g}",
                                   f"{r.err_u_l2:.17g}", fmt(r.rate_u_l2),
                                   f"{r.err_u_h1:.17g}", fmt(r.rate_u_h1),
                                   f"{r.err_p_l2:.17g}", fmt(r.rate_p_l2)]))
        return "\n".join(lines) + "\n"


def convergence_study(n_list, tau: float, T: float, case: ManufacturedCase,
                      soe_tol: float = 1e-9, local_memory_implicit: bool = True,
                      progress=None) -> ConvergenceResult:
    """Final-time errors and log2 rates over a sequence of doubling meshes."""
    n_list = list(n_list)
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise VerificationError("mesh list must be strictly increasing")
    soe = build_soe(case.kernel, tau, max(T, 2 * tau), soe_tol)
    rows = []
    for n in n_list:
        space = MiniSpace(unit_square_mesh(n))
        config = SchemeConfig(tau=tau, t_final=T, kernel=case.kernel, mu=case.mu,
                              soe_tol=soe_tol, local_memory_implicit=local_memory_implicit)
        result = run(space, config, case.problem(space), exact=case,
                     record_stride=max(1, config.n_steps), soe=soe)
        rows.append(ConvergenceRow(n=n, h=space.mesh.h_max,
                                   err_u_l2=float(result.err_u_l2[-1]),
                                   err_u_h1=float(result.err_u_h1[-1]),
                                   err_p_l2=float(result.err_p_l2[-1])))
        if progress is not None:
            progress(rows[-1])
    for prev, cur in zip(rows, rows[1:]):
        cur.rate_u_l2 = math.log2(prev.err_u_l2 / cur.err_u_l2)
        cur.rate_u_h1 = math.log2(prev.err_u_h1 / cur.err_u_h1)
        cur.rate_p_l2 = math.log2(prev.err_p_l2 / cur.err_p_l2)
    return ConvergenceResult(rows=rows)


@dataclass
class DecayFit:
    slope: float
    intercept: float
    r_squared: float


@dataclass
class DecayResult:
    times: np.ndarray
    err_u_l2: np.ndarray
    err_u_h1: np.ndarray
    err_p_l2: np.ndarray
    fits: dict
    fit_window: tuple

    def to_csv(self) -> str:
        lines = ["t,err_u_L2,err_u_H1,err_p_L2"]
        for t, a, b, c in zip(self.times, self.err_u_l2, self.err_u_h1, self.err_p_l2):
            lines.append(f"{t:.17g},{a:.17g},{b:.17g},{c:.17g}")
        return "\n".join(lines) + "\n"


def fit_log_linear(times, values) -> DecayFit:
    """Least-squares fit of log(values) against time."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(times) < 3:
        raise VerificationError("need at least 3 samples for a decay fit")
    if np.any(values <= 0.0):
        raise VerificationError("decay fit requires positive error values")
    logv = np.log(values)
    if np.ptp(logv) < 1e-12:
        raise VerificationError("degenerate fit: error series is flat (rounding floor)")
    a = np.column_stack([times, np.ones_like(times)])
    coef, *_ = np.linalg.lstsq(a, logv, rcond=None)
    fitted = a @ coef
    ss_res = float(np.sum((logv - fitted) ** 2))
    ss_tot = float(np.sum((logv - logv.mean()) ** 2))
    return DecayFit(slope=float(coef[0]), intercept=float(coef[1]),
                    r_squared=1.0 - ss_res / ss_tot)


def decay_study(n: int, tau: float, T: float, case: ManufacturedCase,
                stride: int = 10, t_fit_min: float = 0.1,
                soe_tol: float = 1e-9) -> DecayResult:
    """Error series over time plus log-linear decay fits on [t_fit_min, T]."""
    if T < t_fit_min + 20 * stride * tau:
        raise VerificationError(
            f"T = {T} leaves fewer than 20 samples above t = {t_fit_min}")
    space = MiniSpace(unit_square_mesh(n))
    config = SchemeConfig(tau=tau, t_final=T, kernel=case.kernel, mu=case.mu,
                          soe_tol=soe_tol)
    result = run(space, config, case.problem(space), exact=case, record_stride=stride)
    sel = result.times >= t_fit_min - 1e-12
    fits = {
        "u_l2": fit_log_linear(result.times[sel], result.err_u_l2[sel]),
        "u_h1": fit_log_linear(result.times[sel], result.err_u_h1[sel]),
        "p_l2": fit_log_linear(result.times[sel], result.err_p_l2[sel]),
    }
    return DecayResult(times=result.times, err_u_l2=result.err_u_l2,
                       err_u_h1=result.err_u_h1, err_p_l2=result.err_p_l2,
                       fits=fits, fit_window=(t_fit_min, T))
