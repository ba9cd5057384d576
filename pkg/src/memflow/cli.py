"""Command-line entry point: every study as a subcommand with a flat config.

Configuration comes from an optional `--config PATH` file of `key = value`
lines plus positional `key=value` overrides (overrides win). Each run writes a
`run-manifest` file echoing the fully resolved configuration, CSV results at
17 significant digits, and VTK snapshots where applicable.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .assembly import assemble_static, dump_matrix
from .benchmark import (ContractionParams, SweepResult, beta_sweep, max_speed,
                        run_contraction)
from .femspace import MiniSpace
from .memory_kernel import (RegimeParams, TemperedKernel, build_soe,
                            convolve_direct_series, gronwall_verify, history_advance,
                            history_eval, new_history, positivity_check, regime_report)
from .mesh import TriMesh, contraction_mesh, read_mesh, refine_uniform, unit_square_mesh, write_mesh
from .timestepper import volterra_stokes_project
from .verification import ManufacturedCase, convergence_study, decay_study

SUBCOMMANDS = ("convergence", "decay", "contraction", "sweep", "project",
               "kernel-check", "regime", "gronwall", "mesh-gen")


class ConfigError(ValueError):
    pass


def _parse_bool(s: str) -> bool:
    if s.lower() in ("1", "true", "yes", "on"):
        return True
    if s.lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_int_list(s: str):
    return tuple(int(p) for p in s.split(",") if p.strip())


def _parse_float_list(s: str):
    return tuple(float(p) for p in s.split(",") if p.strip())


@dataclass
class StudyConfig:
    """Resolved parameters of one CLI run; single source of truth."""

    # physical
    mu: float = 1.0
    rho: float = 16.0
    beta: float = 0.5
    delta: float = 10.0
    lambda1: float | None = None
    lambda2: float | None = None
    alpha: float = 0.0
    gamma0: float = 1.0
    c_star: float = 1.0
    # discretization
    n: int = 16
    n_list: tuple = (4, 8, 16, 32)
    tau: float | None = None
    t_final: float | None = None
    mesh_path: str | None = None
    grading: float = 0.25
    base_h: float = 0.55
    ramp_time: float = 0.1
    # kernel / memory
    soe_tol: float | None = None
    n_steps: int = 1000
    # gronwall
    big_c: float = 0.5
    c0: float = 1.0
    beta_hat: float = 0.5
    delta_hat: float = 10.0
    alpha_hat: float = 0.0
    # study knobs
    beta_list: tuple = (0.0, 0.25, 0.5, 0.75)
    include_ns: bool = True
    stride: int = 10
    trials: int = 1000
    seed: int = 0
    out: str | None = None
    kind: str = "unit_square"
    refine: int = 0
    dump_matrices: bool = False


_PARSERS = {
    int: int,
    float: float,
    str: str,
    bool: _parse_bool,
}

_FIELD_ALIASES = {"T": "t_final", "C": "big_c", "C0": "c0", "mesh": "mesh_path"}

_LIST_FIELDS = {"n_list": _parse_int_list, "beta_list": _parse_float_list}

_OPTIONAL_FLOATS = {"tau", "t_final", "soe_tol", "lambda1", "lambda2"}
_OPTIONAL_STRS = {"mesh_path", "out"}


def _coerce(key: str, raw: str):
    key = _FIELD_ALIASES.get(key, key)
    valid = {f.name for f in fields(StudyConfig)}
    if key not in valid:
        raise ConfigError(f"unknown key: {key}")
    if key in _LIST_FIELDS:
        parser = _LIST_FIELDS[key]
    elif key in _OPTIONAL_FLOATS:
        parser = float
    elif key in _OPTIONAL_STRS:
        parser = str
    else:
        default = getattr(StudyConfig(), key)
        parser = _PARSERS[type(default)]
    try:
        return key, parser(raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r} ({exc})") from exc


def read_config_file(path) -> dict:
    items = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path} ({exc})") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value, got {line!r}")
        key, raw = (p.strip() for p in line.split("=", 1))
        k, v = _coerce(key, raw)
        items[k] = v
    return items


def resolve_config(file_items: dict, overrides: list) -> tuple[StudyConfig, set]:
    items = dict(file_items)
    for ov in overrides:
        if "=" not in ov:
            raise ConfigError(f"override must be key=value, got {ov!r}")
        key, raw = (p.strip() for p in ov.split("=", 1))
        k, v = _coerce(key, raw)
        items[k] = v
    explicit = set(items)
    cfg = replace(StudyConfig(), **items)

    if (cfg.lambda1 is None) != (cfg.lambda2 is None):
        raise ConfigError("lambda1: lambda1 and lambda2 must be given together")
    if cfg.lambda1 is not None:
        if {"rho", "delta"} & explicit:
            raise ConfigError("rho: rho/delta conflict with lambda1/lambda2 "
                              "(they are derived from the time constants)")
        if not 0.0 < cfg.lambda2 <= cfg.lambda1:
            raise ConfigError("lambda2: need 0 < lambda2 <= lambda1")
        cfg = replace(cfg, delta=1.0 / cfg.lambda1,
                      rho=(cfg.mu / cfg.lambda1) * (cfg.lambda1 / cfg.lambda2 - 1.0))
    if not 0.0 <= cfg.beta < 1.0:
        raise ConfigError(f"beta: must lie in [0, 1), got {cfg.beta}")
    for key in ("tau", "t_final", "soe_tol"):
        v = getattr(cfg, key)
        if v is not None and v <= 0.0:
            raise ConfigError(f"{key}: must be positive, got {v}")
    return cfg, explicit


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return f"{v:.17g}"
    if isinstance(v, tuple):
        return ",".join(_fmt(x) for x in v)
    return str(v)


def make_outdir(cfg: StudyConfig, subcommand: str) -> Path:
    name = cfg.out if cfg.out else f"{subcommand}-{time.strftime('%Y%m%d-%H%M%S')}"
    out = Path(name)
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_manifest(out: Path, subcommand: str, cfg: StudyConfig) -> None:
    lines = [f"subcommand={subcommand}", f"version={__version__}"]
    for f in fields(StudyConfig):
        v = getattr(cfg, f.name)
        lines.append(f"{f.name}=" + ("" if v is None else _fmt(v)))
    (out / "run-manifest").write_text("\n".join(lines) + "\n")


def write_key_values(path: Path, pairs) -> None:
    path.write_text("".join(f"{k}={v}\n" for k, v in pairs))


def write_vtk(path, mesh: TriMesh, point_data: dict) -> None:
    """Legacy ASCII VTK: triangle (cell type 5) unstructured grid with
    per-vertex scalars and 2D vectors (zero-padded to 3D)."""
    nv, nt = mesh.n_vertices, mesh.n_triangles
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\nmemflow snapshot\nASCII\n")
        fh.write("DATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {nv} double\n")
        for x, y in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g} 0\n")
        fh.write(f"CELLS {nt} {4 * nt}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"3 {i} {j} {k}\n")
        fh.write(f"CELL_TYPES {nt}\n")
        fh.write("5\n" * nt)
        if point_data:
            fh.write(f"POINT_DATA {nv}\n")
        for name, arr in point_data.items():
            arr = np.asarray(arr)
            if arr.ndim == 2:
                fh.write(f"VECTORS {name} double\n")
                for vx, vy in arr:
                    fh.write(f"{vx:.17g} {vy:.17g} 0\n")
            else:
                fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                for v in arr:
                    fh.write(f"{v:.17g}\n")


def _vertex_fields(space, u, p, psi=None) -> dict:
    nv = space.mesh.n_vertices
    vel = np.column_stack([u[:nv], u[space.n_scalar:space.n_scalar + nv]])
    data = {"velocity": vel, "pressure": p}
    if psi is not None:
        data["psi"] = psi
    return data


# -- subcommand handlers ---------------------------------------------------------


def _case(cfg: StudyConfig) -> ManufacturedCase:
    return ManufacturedCase(mu=cfg.mu, rho=cfg.rho, beta=cfg.beta, delta=cfg.delta)


def _cmd_convergence(cfg: StudyConfig, out: Path) -> int:
    tau = cfg.tau if cfg.tau is not None else 1e-4
    T = cfg.t_final if cfg.t_final is not None else 0.5
    tol = cfg.soe_tol if cfg.soe_tol is not None else 1e-9
    res = convergence_study(cfg.n_list, tau, T, _case(cfg), soe_tol=tol)
    (out / "convergence.csv").write_text(res.to_csv())
    for r in res.rows:
        print(f"n={r.n} err_u_L2={r.err_u_l2:.6e} rate={r.rate_u_l2} "
              f"err_u_H1={r.err_u_h1:.6e} rate={r.rate_u_h1} "
              f"err_p_L2={r.err_p_l2:.6e} rate={r.rate_p_l2}")
    return 0


def _cmd_decay(cfg: StudyConfig, out: Path) -> int:
    tau = cfg.tau if cfg.tau is not None else 1e-4
    T = cfg.t_final if cfg.t_final is not None else 1.0
    tol = cfg.soe_tol if cfg.soe_tol is not None else 1e-9
    res = decay_study(cfg.n, tau, T, _case(cfg), stride=cfg.stride, soe_tol=tol)
    (out / "decay.csv").write_text(res.to_csv())
    pairs = []
    for name, fit in res.fits.items():
        pairs += [(f"slope_{name}", _fmt(fit.slope)), (f"r2_{name}", _fmt(fit.r_squared))]
        print(f"{name}: slope={fit.slope:.4f} R^2={fit.r_squared:.6f}")
    write_key_values(out / "decay.kv", pairs)
    return 0


def _contraction_params(cfg: StudyConfig) -> ContractionParams:
    return ContractionParams(
        mu=cfg.mu, rho=cfg.rho, beta=cfg.beta, delta=cfg.delta,
        tau=cfg.tau if cfg.tau is not None else 1e-3,
        t_final=cfg.t_final if cfg.t_final is not None else 5.0,
        ramp_time=cfg.ramp_time, grading=cfg.grading, base_h=cfg.base_h,
        soe_tol=cfg.soe_tol if cfg.soe_tol is not None else 1e-7)


def _cmd_contraction(cfg: StudyConfig, out: Path) -> int:
    params = _contraction_params(cfg)
    run = run_contraction(params)
    psi = run.stream_function()
    area = run.vortex_metric()
    if cfg.dump_matrices:
        for name, mat in (("M", run.ops.M), ("K", run.ops.K), ("B", run.ops.B)):
            dump_matrix(mat, out / f"operator-{name}.txt")
    write_vtk(out / "final.vtk", run.space.mesh,
              _vertex_fields(run.space, run.final.u, run.final.p, psi.coeffs))
    pairs = [("vortex_area", _fmt(area)),
             ("max_speed", _fmt(max_speed(run.space, run.final.u))),
             ("influx_prescribed", _fmt(run.influx_prescribed)),
             ("influx_discrete", _fmt(run.influx_discrete)),
             ("outflux_discrete", _fmt(run.outflux_discrete)),
             ("flux_balance_error", _fmt(run.flux_balance_error()))]
    write_key_values(out / "contraction.kv", pairs)
    for k, v in pairs:
        print(f"{k}={v}")
    return 0


def _cmd_sweep(cfg: StudyConfig, out: Path) -> int:
    params = _contraction_params(cfg)
    runs = {}

    def keep(row, run):
        runs[(row.beta, row.rho)] = run

    res = beta_sweep(cfg.beta_list, params, include_navier_stokes=cfg.include_ns,
                     on_case=keep)
    (out / "sweep.csv").write_text(res.to_csv())
    for row in res.rows:
        run = runs.get((row.beta, row.rho))
        if run is not None:
            psi = run.stream_function()
            write_vtk(out / f"sweep-beta{row.beta:g}-rho{row.rho:g}.vtk",
                      run.space.mesh,
                      _vertex_fields(run.space, run.final.u, run.final.p, psi.coeffs))
        status = row.error if row.error else "ok"
        print(f"beta={row.beta:g} rho={row.rho:g} vortex_area={row.vortex_area:.6g} "
              f"max_speed={row.max_speed:.6g} [{status}]")
    return 0 if all(not r.error for r in res.rows) else 1


def _cmd_project(cfg: StudyConfig, out: Path) -> int:
    tau = cfg.tau if cfg.tau is not None else 1e-3
    T = cfg.t_final if cfg.t_final is not None else 0.5
    tol = cfg.soe_tol if cfg.soe_tol is not None else 1e-9
    case = _case(cfg)
    rows = []
    for n in cfg.n_list:
        space = MiniSpace(unit_square_mesh(n))
        res = volterra_stokes_project(space, case.kernel, case, tau, T, mu=case.mu,
                                      soe_tol=tol)
        rows.append((n, space.mesh.h_max, float(res.err_l2[-1]), float(res.err_h1[-1])))
    lines = ["n,h,err_L2,rate_L2,err_H1,rate_H1"]
    prev = None
    for n, h, el2, eh1 in rows:
        r2 = "" if prev is None else f"{math.log2(prev[0] / el2):.17g}"
        r1 = "" if prev is None else f"{math.log2(prev[1] / eh1):.17g}"
        lines.append(f"{n},{h:.17g},{el2:.17g},{r2},{eh1:.17g},{r1}")
        print(f"n={n} err_L2={el2:.6e} rate={r2 or '-'} err_H1={eh1:.6e} rate={r1 or '-'}")
        prev = (el2, eh1)
    (out / "projection.csv").write_text("\n".join(lines) + "\n")
    return 0


def _cmd_kernel_check(cfg: StudyConfig, out: Path) -> int:
    tau = cfg.tau if cfg.tau is not None else 1e-3
    T = cfg.t_final if cfg.t_final is not None else 1.0
    tol = cfg.soe_tol if cfg.soe_tol is not None else 1e-8
    kernel = TemperedKernel(cfg.beta, cfg.delta, cfg.rho)
    soe = build_soe(kernel, tau, T, tol)
    pos = positivity_check(kernel, tau, n=64, trials=cfg.trials, seed=cfg.seed)

    n_hist = min(cfg.n_steps, int(round(T / tau)))
    rng = np.random.default_rng(cfg.seed)
    coef = rng.standard_normal(3) * [0.3, 0.2, 0.1]
    tt = tau * np.arange(n_hist)
    u = 1.5 + coef[0] * np.sin(3 * tt) + coef[1] * np.cos(17 * tt) + coef[2] * np.sin(7 * tt)
    direct = convolve_direct_series(kernel, u, tau)
    state = new_history(soe, tau, 1)
    dev = 0.0
    for j in range(n_hist):
        approx = history_eval(state, u[j])[0]
        dev = max(dev, abs(approx - direct[j]) / abs(direct[j]))
        history_advance(state, u[j])

    cert_pass = soe.certified_rel_err <= tol
    pairs = [("modes", str(soe.n_modes)),
             ("certified_rel_err", _fmt(soe.certified_rel_err)),
             ("soe_tol", _fmt(tol)),
             ("certification", "PASS" if cert_pass else "FAIL"),
             ("positivity_min_normalized", _fmt(pos.min_normalized)),
             ("positivity", "PASS" if pos.passed else "FAIL"),
             ("history_vs_direct_max_rel", _fmt(dev)),
             ("history_steps", str(n_hist))]
    write_key_values(out / "kernel-check.kv", pairs)
    lines = ["metric,value"] + [f"{k},{v}" for k, v in pairs]
    (out / "kernel-check.csv").write_text("\n".join(lines) + "\n")
    for k, v in pairs:
        print(f"{k}={v}")
    return 0 if cert_pass and pos.passed else 1


def _cmd_regime(cfg: StudyConfig, out: Path) -> int:
    params = RegimeParams(mu=cfg.mu, rho=cfg.rho, beta=cfg.beta, delta=cfg.delta,
                          alpha=cfg.alpha, gamma0=cfg.gamma0, c_star=cfg.c_star)
    rep = regime_report(params)
    pairs = rep.key_values()
    write_key_values(out / "regime.kv", pairs)
    (out / "regime.csv").write_text(
        "metric,value\n" + "\n".join(f"{k},{v}" for k, v in pairs) + "\n")
    print(f"basic condition: {'PASS' if rep.basic_passes else 'FAIL'} "
          f"(lhs={rep.lhs_basic:.6g}, rhs={rep.rhs:.6g})")
    print(f"projection condition: {'PASS' if rep.projection_passes else 'FAIL'} "
          f"(lhs={rep.lhs_projection:.6g}, rhs={rep.rhs:.6g})")
    print(f"theta={rep.theta:.6g}")
    return 0


def _cmd_gronwall(cfg: StudyConfig, out: Path) -> int:
    tau = cfg.tau if cfg.tau is not None else 1e-3
    T = cfg.t_final if cfg.t_final is not None else 2.0
    rep = gronwall_verify(cfg.big_c, cfg.c0, cfg.beta_hat, cfg.delta_hat,
                          cfg.alpha_hat, tau, T)
    write_key_values(out / "gronwall.kv", rep.key_values())
    if rep.times is not None:
        lines = ["t,y,bound"]
        for t, yv, bv in zip(rep.times, rep.y, rep.bound):
            lines.append(f"{t:.17g},{yv:.17g},{bv:.17g}")
        (out / "gronwall.csv").write_text("\n".join(lines) + "\n")
    for k, v in rep.key_values():
        print(f"{k}={v}")
    return 0 if rep.passed or not rep.regime_ok else 1


def _cmd_mesh_gen(cfg: StudyConfig, out: Path) -> int:
    if cfg.kind == "unit_square":
        mesh = unit_square_mesh(cfg.n)
    elif cfg.kind == "contraction":
        mesh = contraction_mesh(cfg.grading, cfg.base_h)
    else:
        raise ConfigError(f"kind: unknown mesh kind {cfg.kind!r}")
    for _ in range(cfg.refine):
        mesh = refine_uniform(mesh)
    path = out / "mesh.txt"
    write_mesh(mesh, path)
    back = read_mesh(path)
    print(f"wrote {path}: {back.n_vertices} vertices, {back.n_triangles} triangles, "
          f"h_max={back.h_max:.6g}")
    return 0


_HANDLERS = {
    "convergence": _cmd_convergence,
    "decay": _cmd_decay,
    "contraction": _cmd_contraction,
    "sweep": _cmd_sweep,
    "project": _cmd_project,
    "kernel-check": _cmd_kernel_check,
    "regime": _cmd_regime,
    "gronwall": _cmd_gronwall,
    "mesh-gen": _cmd_mesh_gen,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="memflow",
        description="Finite-element studies of incompressible flow with "
                    "tempered power-law memory")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("overrides", nargs="*", help="key=value overrides")
    parser.add_argument("--config", default=None, help="flat key=value config file")
    args = parser.parse_args(argv)

    try:
        file_items = read_config_file(args.config) if args.config else {}
        cfg, _ = resolve_config(file_items, args.overrides)
        out = make_outdir(cfg, args.subcommand)
        write_manifest(out, args.subcommand, cfg)
        return _HANDLERS[args.subcommand](cfg, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
