"""Stabilized steady residuals for linear transport, f(x, u) = a(x) u.

Two schemes: SUPG and Galerkin with gradient-jump (continuous interior
penalty) stabilization.  Sign convention: the semi-discrete problem is
``C du/dt + Phi(u) = 0`` with ``Phi_sigma ~ int phi_sigma div(a u)``.

The per-element and per-facet functions below evaluate the residual
directly by quadrature.  :class:`SpatialOperator` precomputes the same
integrals as small dense local matrices (the flux is linear) and applies them
with the gather/scatter kernels; it is what the time integrators call.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import kernels
from .mesh import Mesh, element_geometry, facet_rule, quadrature_rule
from .space import ApproximationSpace, basis


class NonFiniteInputError(FloatingPointError):
    pass


class ContractError(ValueError):
    pass


# --------------------------------------------------------------------------
# velocity fields


class VelocityField:
    def __call__(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(VelocityField):
    vector: tuple

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self.vector, dtype=float), x.shape).copy()


@dataclass(frozen=True)
class Rotation(VelocityField):
    """Solid-body rotation a(x, y) = omega (-y, x)."""

    omega: float = 2.0 * math.pi

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.omega * np.stack([-x[..., 1], x[..., 0]], axis=-1)


class Scheme(str, enum.Enum):
    SUPG = "supg"
    JUMP = "jump"

    @classmethod
    def parse(cls, value) -> "Scheme":
        if isinstance(value, cls):
            return value
        v = str(value).strip().lower()
        return cls.JUMP if v in ("galerkin-jump", "galerkinjump", "cip") else cls(v)


class Periodic:
    def __repr__(self):
        return "Periodic()"


@dataclass(frozen=True)
class WeakInflow:
    """u = g imposed through the upwind boundary flux where a.n < 0.

    ``g(x, t)`` receives an ``(n, dim)`` point array; ``None`` means g = 0.
    """

    g: Optional[Callable] = None


JUMP_PENALTY = 0.1


def default_jump_scale(degree: int) -> float:
    """Penalty factor multiplying Gamma h_e^2: 0.1 / degree**3.5.

    Without a factor (i.e. 1) the penalty is far too stiff for the explicit
    corrector at CFL ~ 0.5; the degree scaling is the usual hp one for
    gradient-jump penalties.
    """
    return JUMP_PENALTY / degree ** 3.5


# --------------------------------------------------------------------------
# direct (per-entity) evaluation


def stabilization_scale(coords, velocity: VelocityField, *, kind="p1",
                        tau_basis: str = "geometric") -> float:
    """The product h_K * tau = 1 / sum_sigma |a_K . grad phi_sigma|.

    ``a_K`` is the velocity at the centroid.  With ``tau_basis="geometric"``
    the sum runs over the P1 barycentric gradients; ``"native"`` uses the
    element's own basis evaluated at the centroid.  Returns 0 when the sum
    vanishes (stabilization switched off on that element).
    """
    geo = element_geometry(coords)
    return float(_tau_scales(geo, velocity, kind, tau_basis)[0])


def _tau_scales(geo, velocity, kind, tau_basis) -> np.ndarray:
    a_bar = velocity(geo.centroid)  # (ne, d)
    if tau_basis == "geometric":
        grads = geo.grad_lambda
    elif tau_basis == "native":
        d = geo.coords.shape[2]
        _, dl = basis(kind, d, np.full((1, d + 1), 1.0 / (d + 1)))
        grads = np.einsum("ij,ejd->eid", dl[0], geo.grad_lambda)
    else:
        raise ValueError(f"unknown tau basis {tau_basis!r}")
    s = np.abs(np.einsum("ed,eid->ei", a_bar, grads)).sum(axis=1)
    out = np.zeros_like(s)
    nz = s > 0.0
    out[nz] = 1.0 / s[nz]
    return out


def _quad_degrees(space: ApproximationSpace) -> tuple[int, int]:
    r = space.degree
    return 2 * r, 2 * r


def _facet_points(nloc_vertices: int, opposite: int, rule) -> np.ndarray:
    """Barycentric coordinates (in the element) of facet quadrature points."""
    nq = len(rule)
    lam = np.zeros((nq, nloc_vertices))
    others = [j for j in range(nloc_vertices) if j != opposite]
    lam[:, others] = rule.points
    return lam


def element_residual(space: ApproximationSpace, u: np.ndarray, velocity: VelocityField,
                     scheme, element: int, *, tau_basis: str = "geometric") -> np.ndarray:
    """Local contributions Phi_sigma^K for the DOFs of one element.

    Includes the full boundary flux over dK (no upwinding) plus the SUPG term
    when ``scheme`` is SUPG.
    """
    scheme = Scheme.parse(scheme)
    mesh = space.mesh
    d = mesh.dim
    X = mesh.element_coords(element)
    geo = element_geometry(X)
    gl = geo.grad_lambda[0]
    uK = np.asarray(u, dtype=float)[space.element_dofs[element]]
    qv, qf = _quad_degrees(space)

    rule = quadrature_rule(d, qv)
    vals, dl = basis(space.kind, d, rule.points)
    grads = dl @ gl  # (nq, nloc, d)
    x = rule.points @ X
    a = velocity(x)
    uh = vals @ uK
    guh = np.einsum("qid,i->qd", grads, uK)
    w = rule.weights * geo.measure[0]
    out = -np.einsum("q,qid,qd->i", w * uh, grads, a)

    frule = facet_rule(d, qf)
    for opp in range(d + 1):
        lam = _facet_points(d + 1, opp, frule)
        fv, _ = basis(space.kind, d, lam)
        xf = lam @ X
        n = -gl[opp] / np.linalg.norm(gl[opp])
        length = 1.0 if d == 1 else float(np.linalg.norm(np.diff(X[[j for j in range(3) if j != opp]], axis=0)))
        an = velocity(xf) @ n
        out += np.einsum("q,qi->i", frule.weights * length * an * (fv @ uK), fv)

    if scheme is Scheme.SUPG:
        ht = float(_tau_scales(geo, velocity, space.kind, tau_basis)[0])
        if ht > 0.0:
            adphi = np.einsum("qd,qid->qi", a, grads)
            adu = np.einsum("qd,qd->q", a, guh)
            out += ht * np.einsum("q,qi->i", w * adu, adphi)
    return out


def _facet_sides(mesh: Mesh, key: tuple, k: int):
    """Barycentric map of a facet into element ``k``: local indices of its vertices."""
    topo = mesh.topo_elements[k]
    loc = [int(np.flatnonzero(topo == v)[0]) for v in key]
    opp = ({0, 1, 2} if mesh.dim == 2 else {0, 1}).difference(loc).pop()
    return loc, opp


def _facet_lambda(mesh: Mesh, key: tuple, k: int, rule) -> np.ndarray:
    loc, _ = _facet_sides(mesh, key, k)
    lam = np.zeros((len(rule), mesh.dim + 1))
    lam[:, loc] = rule.points
    return lam


def _facet_size(mesh: Mesh, key: tuple, k: int, kp: int) -> float:
    """h_e: facet length in 2D, mean adjacent element length in 1D."""
    if mesh.dim == 1:
        return 0.5 * float(mesh.geometry.measure[k] + mesh.geometry.measure[kp])
    loc, _ = _facet_sides(mesh, key, k)
    X = mesh.element_coords(k)
    return float(np.linalg.norm(X[loc[0]] - X[loc[1]]))


def facet_jump_residual(space: ApproximationSpace, u: np.ndarray, facet: int,
                        velocity: VelocityField, *, jump_scale: Optional[float] = None):
    """Gradient-jump contributions of one interior facet.

    Returns ``(dofs, values)`` with the DOFs of K followed by those of K+.
    """
    mesh = space.mesh
    if not 0 <= facet < len(mesh.interior_facets):
        raise ContractError(f"facet {facet} is not an interior facet")
    key, k, kp = mesh.interior_facets[facet]
    d = mesh.dim
    _, qf = _quad_degrees(space)
    rule = facet_rule(d, qf)
    he = _facet_size(mesh, key, k, kp)
    length = 1.0 if d == 1 else he
    geo = mesh.geometry
    a_bar = velocity(geo.centroid[[k, kp]])
    if jump_scale is None:
        jump_scale = default_jump_scale(space.degree)
    gamma = jump_scale * float(np.max(np.linalg.norm(a_bar, axis=1)))

    traces = []
    for e in (k, kp):
        lam = _facet_lambda(mesh, key, e, rule)
        _, dl = basis(space.kind, d, lam)
        traces.append(dl @ geo.grad_lambda[e])  # (nq, nloc, d)
    u = np.asarray(u, dtype=float)
    du = [np.einsum("qid,i->qd", g, u[space.element_dofs[e]]) for g, e in zip(traces, (k, kp))]
    jump = du[0] - du[1]
    w = rule.weights * length * gamma * he ** 2
    vk = np.einsum("q,qd,qid->i", w, jump, traces[0])
    vkp = -np.einsum("q,qd,qid->i", w, jump, traces[1])
    dofs = np.concatenate([space.element_dofs[k], space.element_dofs[kp]])
    return dofs, np.concatenate([vk, vkp])


def assemble_residual(space: ApproximationSpace, u: np.ndarray, velocity: VelocityField,
                      scheme, bc, t: float = 0.0, **options) -> np.ndarray:
    """Global residual Phi(u) at time ``t`` (builds a throwaway operator)."""
    return SpatialOperator(space, velocity, scheme, bc, **options).residual(u, t)


# --------------------------------------------------------------------------
# precomputed operator


class SpatialOperator:
    """Residual and mass action of one space/velocity/scheme/bc combination.

    Options: ``tau_basis`` ("geometric" or "native"), ``jump_scale`` (factor
    on the jump penalty, default :func:`default_jump_scale`), ``pg_mass``
    (SUPG test functions in the mass action; default off).
    """

    def __init__(self, space: ApproximationSpace, velocity: VelocityField, scheme,
                 bc=None, *, tau_basis: str = "geometric", jump_scale: Optional[float] = None,
                 pg_mass: bool = False):
        self.space = space
        self.velocity = velocity
        self.scheme = Scheme.parse(scheme)
        self.bc = Periodic() if bc is None else bc
        self.tau_basis = tau_basis
        self.jump_scale = float(default_jump_scale(space.degree) if jump_scale is None
                                else jump_scale)
        self.pg_mass = bool(pg_mass)
        mesh = space.mesh
        if isinstance(self.bc, Periodic) and mesh.boundary_facets:
            raise ContractError("periodic boundary condition on a mesh with boundary facets")
        self.lumped = space.lumped
        self._build_elements()
        self._build_facets()
        self._build_boundary()

    @property
    def n_dofs(self) -> int:
        return self.space.n_dofs

    # -- construction ------------------------------------------------------

    def _build_elements(self):
        space, vel = self.space, self.velocity
        mesh = space.mesh
        d = mesh.dim
        geo = mesh.geometry
        qv, qf = _quad_degrees(space)
        rule = quadrature_rule(d, qv)
        vals, grads = space.tabulate(rule.points)  # (nq, n), (ne, nq, n, d)
        x = np.einsum("qj,ejd->eqd", rule.points, geo.coords)
        a = vel(x)  # (ne, nq, d)
        w = rule.weights[None, :] * geo.measure[:, None]  # (ne, nq)

        adphi = np.einsum("eqd,eqid->eqi", a, grads)
        E = -np.einsum("eq,eqi,qj->eij", w, adphi, vals)
        frule = facet_rule(d, qf)
        for opp in range(d + 1):
            lam = _facet_points(d + 1, opp, frule)
            fv, _ = basis(space.kind, d, lam)
            xf = np.einsum("qj,ejd->eqd", lam, geo.coords)
            g = geo.grad_lambda[:, opp]
            n = -g / np.linalg.norm(g, axis=1)[:, None]
            if d == 1:
                length = np.ones(len(geo.coords))
            else:
                others = [j for j in range(3) if j != opp]
                length = np.linalg.norm(geo.coords[:, others[0]] - geo.coords[:, others[1]], axis=1)
            an = np.einsum("eqd,ed->eq", vel(xf), n)
            c = frule.weights[None, :] * length[:, None] * an
            E += np.einsum("eq,qi,qj->eij", c, fv, fv)

        M = np.einsum("eq,qi,qj->eij", w, vals, vals)
        self.tau = _tau_scales(geo, vel, space.kind, self.tau_basis)
        if self.scheme is Scheme.SUPG:
            E += self.tau[:, None, None] * np.einsum("eq,eqi,eqj->eij", w, adphi, adphi)
            if self.pg_mass:
                M += self.tau[:, None, None] * np.einsum("eq,eqi,qj->eij", w, adphi, vals)
        self.element_mats = np.ascontiguousarray(E)
        self.mass_mats = np.ascontiguousarray(M)
        self.element_dofs = np.ascontiguousarray(space.element_dofs, dtype=np.int64)

    def _build_facets(self):
        space = self.space
        mesh = space.mesh
        n = self.element_dofs.shape[1]
        nf = len(mesh.interior_facets)
        if self.scheme is not Scheme.JUMP or nf == 0:
            self.facet_mats = np.zeros((0, 2 * n, 2 * n))
            self.facet_dofs = np.zeros((0, 2 * n), dtype=np.int64)
            return
        d = mesh.dim
        geo = mesh.geometry
        _, qf = _quad_degrees(space)
        rule = facet_rule(d, qf)
        speed = np.linalg.norm(self.velocity(geo.centroid), axis=1)
        mats = np.empty((nf, 2 * n, 2 * n))
        dofs = np.empty((nf, 2 * n), dtype=np.int64)
        for f, (key, k, kp) in enumerate(mesh.interior_facets):
            he = _facet_size(mesh, key, k, kp)
            length = 1.0 if d == 1 else he
            gamma = self.jump_scale * max(speed[k], speed[kp])
            G = np.empty((len(rule), 2 * n, d))
            for side, e in enumerate((k, kp)):
                lam = _facet_lambda(mesh, key, e, rule)
                _, dl = basis(space.kind, d, lam)
                G[:, side * n:(side + 1) * n] = (dl @ geo.grad_lambda[e]) * (1.0 if side == 0 else -1.0)
            w = rule.weights * length * gamma * he ** 2
            mats[f] = np.einsum("q,qid,qjd->ij", w, G, G)
            dofs[f, :n] = space.element_dofs[k]
            dofs[f, n:] = space.element_dofs[kp]
        self.facet_mats = mats
        self.facet_dofs = dofs

    def _build_boundary(self):
        space = self.space
        mesh = space.mesh
        n = self.element_dofs.shape[1]
        nb = len(mesh.boundary_facets)
        d = mesh.dim
        _, qf = _quad_degrees(space)
        rule = facet_rule(d, qf)
        nq = len(rule) if d == 1 else 2 * len(rule)
        mats = np.zeros((nb, n, n))
        dofs = np.empty((nb, n), dtype=np.int64)
        self._bnd_points = np.empty((nb, nq, d))
        self._bnd_coef = np.empty((nb, nq))
        self._bnd_phi = np.empty((nb, nq, n))
        for b, (key, k, normal) in enumerate(mesh.boundary_facets):
            X = mesh.element_coords(k)
            if d == 1:
                lam, w = _facet_lambda(mesh, key, k, rule), rule.weights
            else:
                lam, w = self._split_facet_rule(key, k, X, normal, rule)
            fv, _ = basis(space.kind, d, lam)
            xq = lam @ X
            length = 1.0 if d == 1 else _facet_size(mesh, key, k, k)
            an = self.velocity(xq) @ normal
            c = w * length * np.minimum(an, 0.0)
            mats[b] = -np.einsum("q,qi,qj->ij", c, fv, fv)
            dofs[b] = space.element_dofs[k]
            self._bnd_points[b] = xq
            self._bnd_coef[b] = c
            self._bnd_phi[b] = fv
        self.boundary_mats = mats
        self.boundary_dofs = dofs

    def _split_facet_rule(self, key, k, X, normal, rule):
        """Facet rule split in two at the zero of a.n (midpoint if none).

        (a.n)^- has a kink where the flow turns from inflow to outflow; with
        a velocity that is linear along the facet the split rule stays exact.
        """
        loc, _ = _facet_sides(self.space.mesh, key, k)
        ends = self.velocity(X[loc]) @ normal
        split = 0.5
        if ends[0] * ends[1] < 0.0:
            split = float(ends[0] / (ends[0] - ends[1]))
        t = rule.points[:, 1]
        ts = np.concatenate([split * t, split + (1.0 - split) * t])
        w = np.concatenate([split * rule.weights, (1.0 - split) * rule.weights])
        lam = np.zeros((len(ts), 3))
        lam[:, loc[0]] = 1.0 - ts
        lam[:, loc[1]] = ts
        return lam, w

    # -- evaluation --------------------------------------------------------

    def inflow_source(self, t: float) -> np.ndarray:
        """Contribution of the inflow data g at time ``t``."""
        out = np.zeros(self.n_dofs)
        g = getattr(self.bc, "g", None)
        if g is None or len(self.boundary_dofs) == 0:
            return out
        pts = self._bnd_points.reshape(-1, self.space.dim)
        gv = np.asarray(g(pts, t), dtype=float).reshape(self._bnd_coef.shape)
        local = np.einsum("bq,bqi->bi", self._bnd_coef * gv, self._bnd_phi)
        kernels.scatter_add(np.ascontiguousarray(local), self.boundary_dofs, out)
        return out

    def residual(self, u: np.ndarray, t: float = 0.0) -> np.ndarray:
        u = np.ascontiguousarray(u, dtype=float)
        if u.shape != (self.n_dofs,):
            raise ContractError(f"field has shape {u.shape}, expected ({self.n_dofs},)")
        if not np.all(np.isfinite(u)):
            raise NonFiniteInputError("residual evaluated on a non-finite field")
        out = np.zeros(self.n_dofs)
        kernels.scatter_apply(self.element_mats, self.element_dofs, u, out)
        if len(self.facet_dofs):
            kernels.scatter_apply(self.facet_mats, self.facet_dofs, u, out)
        if len(self.boundary_dofs):
            kernels.scatter_apply(self.boundary_mats, self.boundary_dofs, u, out)
            out += self.inflow_source(t)
        return out

    def mass_action(self, v: np.ndarray) -> np.ndarray:
        """Consistent-mass product: (M v)_sigma = int phi_sigma v^h."""
        out = np.zeros(self.n_dofs)
        kernels.scatter_apply(self.mass_mats, self.element_dofs,
                              np.ascontiguousarray(v, dtype=float), out)
        return out
