"""Verification path: consistent mass matrix, SSP-RK3 with an iterative mass
solve, L2 errors and mesh convergence tables."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .dec import compute_dt, dec_scheme, integrate
from .mesh import Mesh, generate_mesh, quadrature_rule
from .residual import SpatialOperator
from .space import ApproximationSpace, ElementKind, basis, build_space, init_field


class SolverStagnationError(RuntimeError):
    pass


def assemble_mass(space: ApproximationSpace) -> sp.csr_array:
    """M_st = int phi_s phi_t, exact quadrature (degree 2r)."""
    rule = quadrature_rule(space.dim, 2 * space.degree)
    vals, _ = basis(space.kind, space.dim, rule.points)
    ref = np.einsum("q,qi,qj->ij", rule.weights, vals, vals)
    local = space.mesh.geometry.measure[:, None, None] * ref[None]
    dofs = space.element_dofs
    n = dofs.shape[1]
    rows = np.repeat(dofs, n, axis=1).ravel()
    cols = np.tile(dofs, (1, n)).ravel()
    M = sp.coo_array((local.ravel(), (rows, cols)), shape=(space.n_dofs, space.n_dofs))
    M = M.tocsr()
    M.sum_duplicates()
    M.sort_indices()
    return M


def pcg(A, b: np.ndarray, *, rtol: float = 1e-12, x0: Optional[np.ndarray] = None,
        max_iter: Optional[int] = None) -> np.ndarray:
    """Jacobi-preconditioned conjugate gradients for SPD ``A``."""
    n = len(b)
    max_iter = 10 * n if max_iter is None else max_iter
    dinv = 1.0 / A.diagonal()
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n)
    z = dinv * r
    p = z.copy()
    rz = r @ z
    for _ in range(max_iter):
        if np.linalg.norm(r) <= rtol * bnorm:
            return x
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    if np.linalg.norm(r) <= rtol * bnorm:
        return x
    raise SolverStagnationError(f"CG did not reach rtol={rtol} in {max_iter} iterations")


def smallest_eigenvalue(A, *, iters: int = 200, seed: int = 0) -> float:
    """Inverse power iteration estimate of the smallest eigenvalue of SPD ``A``."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(A.shape[0])
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(iters):
        y = pcg(A, x, rtol=1e-13)
        lam_new = 1.0 / np.linalg.norm(y)
        x = y * lam_new
        if abs(lam_new - lam) <= 1e-12 * lam_new:
            lam = lam_new
            break
        lam = lam_new
    return float(x @ (A @ x))


def reference_step(operator: SpatialOperator, mass, u_n: np.ndarray, dt: float,
                   t: float = 0.0) -> np.ndarray:
    """One SSP-RK3 step of M du/dt = -Phi(u, t) with CG mass solves."""

    def rate(u, s):
        return -pcg(mass, operator.residual(u, s))

    u1 = u_n + dt * rate(u_n, t)
    u2 = 0.75 * u_n + 0.25 * (u1 + dt * rate(u1, t + dt))
    return u_n / 3.0 + (2.0 / 3.0) * (u2 + dt * rate(u2, t + 0.5 * dt))


def spectral_radius(operator: SpatialOperator, mass, *, iters: int = 40, seed: int = 0) -> float:
    """Power-iteration estimate of the largest |eigenvalue| of M^-1 A (A the linear part of Phi)."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(operator.n_dofs)
    x /= np.linalg.norm(x)
    shift = operator.inflow_source(0.0)
    rho = 0.0
    for _ in range(iters):
        y = pcg(mass, operator.residual(x) - shift, rtol=1e-8)
        rho = float(np.linalg.norm(y))
        if rho == 0.0:
            return 0.0
        x = y / rho
    return rho


def reference_substeps(operator: SpatialOperator, mass, dt: float, *, safety: float = 0.8) -> int:
    """RK3 substeps per dt keeping dt * rho inside the imaginary stability interval sqrt(3)."""
    rho = spectral_radius(operator, mass)
    return max(1, math.ceil(dt * rho / (safety * math.sqrt(3.0))))


def reference_stepper(operator: SpatialOperator, mass, dt: float):
    """``stepper(u, h, t, step)`` for :func:`massfree.dec.integrate` using SSP-RK3 substeps."""
    n_sub = reference_substeps(operator, mass, dt)

    def stepper(u, h, t, step):
        k = h / n_sub
        for j in range(n_sub):
            u = reference_step(operator, mass, u, k, t + j * k)
        return u
    stepper.substeps = n_sub
    return stepper


def error_norm(space: ApproximationSpace, u: np.ndarray, exact: Callable) -> float:
    """L2 norm of u^h - exact, quadrature of degree 2r + 2."""
    rule = quadrature_rule(space.dim, 2 * space.degree + 2)
    vals, _ = basis(space.kind, space.dim, rule.points)
    geo = space.mesh.geometry
    uh = np.asarray(u, dtype=float)[space.element_dofs] @ vals.T  # (ne, nq)
    x = np.einsum("qj,ejd->eqd", rule.points, geo.coords)
    ex = np.asarray(exact(x.reshape(-1, space.dim)), dtype=float).reshape(uh.shape)
    err2 = np.einsum("q,eq->e", rule.weights, (uh - ex) ** 2) * geo.measure
    return float(math.sqrt(err2.sum()))


@dataclass
class ConvergenceTable:
    h: list = field(default_factory=list)
    error: list = field(default_factory=list)
    order: list = field(default_factory=list)

    def add(self, h: float, error: float) -> None:
        if self.h and not h < self.h[-1]:
            raise ValueError("mesh sizes must decrease down the table")
        if self.h:
            self.order.append(math.log(self.error[-1] / error) / math.log(self.h[-1] / h))
        else:
            self.order.append(float("nan"))
        self.h.append(h)
        self.error.append(error)

    def rows(self):
        return list(zip(self.h, self.error, self.order))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["h", "error", "order"])
        for h, e, o in self.rows():
            w.writerow([repr(h), repr(e), "" if math.isnan(o) else repr(o)])
        return buf.getvalue()


def mesh_size(mesh: Mesh) -> float:
    return float(mesh.geometry.h_min.max())


def solve_scenario(scenario, mesh: Mesh, kind, scheme, time_order: int, t_final: float,
                   cfl: float, *, corrections=None, method: str = "dec",
                   variant: str = "faithful", callback=None, **options):
    """Run one scenario on one mesh; returns (space, final field, steps)."""
    space = build_space(mesh, kind)
    vel = scenario.velocity()
    op = SpatialOperator(space, vel, scheme, scenario.bc(mesh), **options)
    u0 = init_field(space, scenario.u0)
    dt = compute_dt(mesh, vel, cfl)
    stepper = None
    if method == "rk3":
        stepper = reference_stepper(op, assemble_mass(space), dt)
    elif method != "dec":
        raise ValueError(f"unknown method {method!r}")
    u, steps = integrate(op, dec_scheme(time_order, corrections), u0, t_final, dt,
                         variant=variant, stepper=stepper, callback=callback)
    return space, u, steps


def convergence_study(scenario, kind, scheme, time_order: int, meshes: Sequence,
                      *, t_final: float = 1.0, cfl: float = 0.5, method: str = "dec",
                      **options) -> ConvergenceTable:
    """L2 errors against the exact solution over a sequence of meshes."""
    if len(meshes) < 3:
        raise ValueError("a convergence study needs at least three meshes")
    table = ConvergenceTable()
    for spec in meshes:
        mesh = spec if isinstance(spec, Mesh) else generate_mesh(spec)
        try:
            space, u, _ = solve_scenario(scenario, mesh, kind, scheme, time_order, t_final,
                                         cfl, method=method, **options)
        except FloatingPointError as exc:
            raise type(exc)(f"mesh {spec!r}: {exc}") from exc
        err = error_norm(space, u, lambda x: scenario.exact(x, t_final))
        table.add(mesh_size(mesh), err)
    return table
