"""Scenario runs: time loop with diagnostics, snapshots and final errors."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .config import ConfigError, RunConfig, parse_mesh_entry
from .dec import compute_dt, dec_scheme, integrate
from .mesh import Mesh, generate_mesh, read_mesh
from .oracle import (ConvergenceTable, assemble_mass, error_norm, mesh_size,
                     reference_stepper)
from .residual import Periodic, SpatialOperator, WeakInflow
from .scenarios import make_scenario
from .space import ApproximationSpace, ElementKind, basis, build_space, init_field

log = logging.getLogger(__name__)

CSV_COLUMNS = ("step", "t", "min", "max", "l2", "mass")


@dataclass
class RunResult:
    space: ApproximationSpace
    field: np.ndarray
    steps: int
    dt: float
    diagnostics: list
    error: Optional[float]
    oracle_error: Optional[float] = None
    oracle_difference: Optional[float] = None
    output_dir: Optional[Path] = None


def load_mesh(entry: str, base_dir: str = ".") -> Mesh:
    spec = parse_mesh_entry(entry)
    if spec is not None:
        return generate_mesh(spec)
    path = Path(entry)
    if not path.is_absolute():
        path = Path(base_dir) / path
    if not path.exists():
        raise ConfigError(f"mesh file not found: {path}")
    return read_mesh(path)


def _boundary_condition(cfg: RunConfig, scenario, mesh: Mesh):
    if cfg.bc == "periodic":
        return Periodic()
    if cfg.bc == "inflow":
        return WeakInflow(scenario.exact)
    return scenario.bc(mesh)


def build_operator(cfg: RunConfig, mesh: Mesh, scenario=None):
    scenario = scenario or make_scenario(cfg.scenario, **cfg.scenario_params())
    space = build_space(mesh, ElementKind.parse(cfg.elements))
    op = SpatialOperator(space, scenario.velocity(), cfg.scheme,
                         _boundary_condition(cfg, scenario, mesh),
                         tau_basis=cfg.tau_basis, jump_scale=cfg.jump_scale,
                         pg_mass=cfg.pg_mass)
    return scenario, space, op


def diagnostics_row(step: int, t: float, space: ApproximationSpace, u: np.ndarray) -> tuple:
    l2 = error_norm(space, u, lambda x: np.zeros(len(x)))
    return (step, t, float(u.min()), float(u.max()), l2, float(space.lumped @ u))


def write_diagnostics(rows, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for step, t, lo, hi, l2, mass in rows:
            w.writerow([step, repr(float(t)), repr(lo), repr(hi), repr(l2), repr(mass)])


def write_vtk(space: ApproximationSpace, u: np.ndarray, path, title: str = "massfree field") -> None:
    """Legacy ASCII VTK of the field.

    P1 cells are written as they are.  Quadratic elements are split into four
    linear triangles whose point values come from evaluating the field (the
    control values of a Bezier field are not point values).
    """
    mesh = space.mesh
    if mesh.dim != 2:
        raise ValueError("VTK output needs a 2D space")
    u = np.asarray(u, dtype=float)
    if space.degree == 1:
        points = mesh.vertices
        values = u[mesh.vertex_rep]
        cells = mesh.elements
    else:
        nv = len(mesh.vertices)
        mid_ids: dict = {}
        pts = [p for p in mesh.vertices]
        alphas = space.local_indices
        vals, _ = basis(space.kind, 2, alphas / 2.0)
        node_vals = u[space.element_dofs] @ vals.T  # (ne, 6)
        values = np.zeros(nv + 3 * mesh.n_elements)
        cells = []
        for k, el in enumerate(mesh.elements):
            ids = []
            for i, a in enumerate(alphas):
                nz = np.flatnonzero(a)
                if len(nz) == 1:
                    pid = int(el[nz[0]])
                else:
                    key = tuple(sorted((int(el[nz[0]]), int(el[nz[1]]))))
                    if key not in mid_ids:
                        mid_ids[key] = len(pts)
                        pts.append(0.5 * (mesh.vertices[key[0]] + mesh.vertices[key[1]]))
                        values[mid_ids[key]] = node_vals[k, i]
                    pid = mid_ids[key]
                if len(nz) == 1:
                    values[pid] = node_vals[k, i]
                ids.append(pid)
            v0, e01, v1, e12, v2, e20 = ids
            cells += [(v0, e01, e20), (e01, v1, e12), (e20, e12, v2), (e01, e12, e20)]
        points = np.array(pts)
        values = values[:len(points)]
        cells = np.array(cells)
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {len(points)} double"]
    lines += [f"{p[0]:.17g} {p[1]:.17g} 0" for p in points]
    lines.append(f"CELLS {len(cells)} {4 * len(cells)}")
    lines += [f"3 {a} {b} {c}" for a, b, c in cells]
    lines.append(f"CELL_TYPES {len(cells)}")
    lines += ["5"] * len(cells)
    lines += [f"POINT_DATA {len(points)}", "SCALARS u double 1", "LOOKUP_TABLE default"]
    lines += [f"{v:.17g}" for v in values]
    path = Path(path)
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write VTK file {path}: {exc}") from exc


def write_profile(space: ApproximationSpace, u: np.ndarray, path) -> None:
    """1D snapshot: field values at vertices and element midpoints, CSV ``x,u``."""
    mesh = space.mesh
    lam = np.array([[1.0, 0.0], [0.5, 0.5]])
    vals, _ = basis(space.kind, 1, lam)
    node = u[space.element_dofs] @ vals.T
    xs = mesh.element_coords()[:, :, 0]
    rows = []
    for k in range(mesh.n_elements):
        rows.append((xs[k, 0], node[k, 0]))
        rows.append((0.5 * (xs[k, 0] + xs[k, 1]), node[k, 1]))
    last = mesh.n_elements - 1
    rows.append((xs[last, 1], float(u[space.element_dofs[last]] @ basis(space.kind, 1, np.array([[0.0, 1.0]]))[0][0])))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "u"])
        for x, v in rows:
            w.writerow([repr(float(x)), repr(float(v))])


def _snapshot(space, u, out_dir: Path, step: int) -> None:
    if space.dim == 2:
        write_vtk(space, u, out_dir / f"field_{step:06d}.vtk")
    else:
        write_profile(space, u, out_dir / f"field_{step:06d}.csv")


def run(cfg: RunConfig, *, write: bool = True) -> RunResult:
    """Execute one configured run, writing CSV/VTK output when ``write``."""
    mesh = load_mesh(cfg.mesh, cfg.base_dir)
    scenario, space, op = build_operator(cfg, mesh)
    vel = scenario.velocity()
    u0 = init_field(space, scenario.u0)
    dt = compute_dt(mesh, vel, cfg.cfl)
    scheme = dec_scheme(cfg.time_order, cfg.corrections)
    out_dir = cfg.output_dir() if write else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    rows = [diagnostics_row(0, 0.0, space, u0)]

    def callback(step, t, u):
        rows.append(diagnostics_row(step, t, space, u))
        if out_dir is not None and cfg.snapshot_every and step % cfg.snapshot_every == 0:
            _snapshot(space, u, out_dir, step)

    log.info("run %s: %d dofs, dt=%.6g", cfg.scenario, space.n_dofs, dt)
    u, steps = integrate(op, scheme, u0, cfg.t_final, dt, variant=cfg.l1_variant,
                         callback=callback)
    exact = lambda x: scenario.exact(x, cfg.t_final)  # noqa: E731
    err = error_norm(space, u, exact)

    result = RunResult(space, u, steps, dt, rows, err, output_dir=out_dir)
    if cfg.oracle:
        ur, _ = integrate(op, scheme, u0, cfg.t_final, dt,
                          stepper=reference_stepper(op, assemble_mass(space), dt))
        result.oracle_error = error_norm(space, ur, exact)
        result.oracle_difference = error_norm(space, u - ur, lambda x: np.zeros(len(x)))

    if out_dir is not None:
        write_diagnostics(rows, out_dir / "diagnostics.csv")
        _snapshot(space, u, out_dir, steps)
        lines = [f"dofs {space.n_dofs}", f"steps {steps}", f"dt {dt!r}",
                 f"min {float(u.min())!r}", f"max {float(u.max())!r}",
                 f"l2_error {err!r}"]
        if cfg.oracle:
            lines += [f"oracle_l2_error {result.oracle_error!r}",
                      f"oracle_difference {result.oracle_difference!r}"]
        (out_dir / "summary.txt").write_text("\n".join(lines) + "\n")
    return result


def run_convergence(cfg: RunConfig, *, write: bool = True) -> ConvergenceTable:
    """Convergence table over ``cfg.meshes`` using the configured scheme."""
    if len(cfg.meshes) < 3:
        raise ConfigError("'meshes' must list at least three meshes for a convergence study")
    scenario = make_scenario(cfg.scenario, **cfg.scenario_params())
    table = ConvergenceTable()
    for entry in cfg.meshes:
        mesh = load_mesh(entry, cfg.base_dir)
        _, space, op = build_operator(cfg, mesh, scenario)
        dt = compute_dt(mesh, scenario.velocity(), cfg.cfl)
        try:
            u, _ = integrate(op, dec_scheme(cfg.time_order, cfg.corrections),
                             init_field(space, scenario.u0), cfg.t_final, dt,
                             variant=cfg.l1_variant)
        except FloatingPointError as exc:
            raise type(exc)(f"mesh {entry}: {exc}") from exc
        table.add(mesh_size(mesh), error_norm(space, u, lambda x: scenario.exact(x, cfg.t_final)))
    if write:
        out = cfg.output_dir()
        out.mkdir(parents=True, exist_ok=True)
        (out / "convergence.csv").write_text(table.to_csv())
    return table
