"""Approximation spaces: P1 Lagrange, quadratic Bernstein-Bezier (B2), and the
quadratic Lagrange element kept only to show why it cannot be lumped.

Local DOF ordering follows the multi-indices in :data:`LOCAL_INDICES`; in 2D
that is ``(200, 110, 020, 011, 002, 101)`` for the quadratic families, i.e.
vertex, edge, vertex, edge, vertex, edge going round the triangle.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .mesh import Mesh, SingularGeometryError, quadrature_rule


class ElementKind(str, enum.Enum):
    P1 = "p1"
    B2 = "b2"
    P2 = "p2"

    @property
    def degree(self) -> int:
        return 1 if self is ElementKind.P1 else 2

    @classmethod
    def parse(cls, value) -> "ElementKind":
        if isinstance(value, cls):
            return value
        return cls(str(value).strip().lower())


class NonPositiveLumping(ValueError):
    """Raised when some lumped coefficient C_sigma is not strictly positive."""

    def __init__(self, dofs, values):
        self.dofs = np.asarray(dofs)
        self.values = np.asarray(values)
        super().__init__(
            f"{len(self.dofs)} DOF(s) with C_sigma <= 0, e.g. {self.dofs[:5].tolist()} "
            f"(values {self.values[:5].tolist()})")


LOCAL_INDICES = {
    (1, 1): [(1, 0), (0, 1)],
    (1, 2): [(2, 0), (1, 1), (0, 2)],
    (2, 1): [(1, 0, 0), (0, 1, 0), (0, 0, 1)],
    (2, 2): [(2, 0, 0), (1, 1, 0), (0, 2, 0), (0, 1, 1), (0, 0, 2), (1, 0, 1)],
}


def local_indices(dim: int, degree: int) -> np.ndarray:
    return np.array(LOCAL_INDICES[dim, degree])


def _multinomial(alpha) -> float:
    return math.factorial(sum(alpha)) / math.prod(math.factorial(a) for a in alpha)


def basis(kind: ElementKind, dim: int, lam: np.ndarray):
    """Values and barycentric derivatives of the local basis.

    ``lam`` has shape ``(nq, dim+1)``.  Returns ``values`` ``(nq, nloc)`` and
    ``dlam`` ``(nq, nloc, dim+1)`` with ``dlam[q, i, j] = d phi_i / d lambda_j``.
    """
    kind = ElementKind.parse(kind)
    lam = np.atleast_2d(np.asarray(lam, dtype=float))
    alphas = local_indices(dim, kind.degree)
    nq, nb = lam.shape
    nloc = len(alphas)
    vals = np.empty((nq, nloc))
    dl = np.zeros((nq, nloc, nb))
    if kind is ElementKind.P2:
        for i, a in enumerate(alphas):
            nz = np.flatnonzero(a)
            if len(nz) == 1:  # vertex: l (2l - 1)
                j = nz[0]
                vals[:, i] = lam[:, j] * (2.0 * lam[:, j] - 1.0)
                dl[:, i, j] = 4.0 * lam[:, j] - 1.0
            else:  # edge: 4 l_j l_k
                j, k = nz
                vals[:, i] = 4.0 * lam[:, j] * lam[:, k]
                dl[:, i, j] = 4.0 * lam[:, k]
                dl[:, i, k] = 4.0 * lam[:, j]
        return vals, dl
    # Bernstein polynomials (P1 is the degree-1 case)
    for i, a in enumerate(alphas):
        theta = _multinomial(a)
        vals[:, i] = theta * np.prod(lam ** a, axis=1)
        for j in range(nb):
            if a[j] == 0:
                continue
            b = a.copy()
            b[j] -= 1
            dl[:, i, j] = theta * a[j] * np.prod(lam ** b, axis=1)
    return vals, dl


def shape_values_and_gradients(kind, coords, lam):
    """Basis values and physical gradients at barycentric point(s) ``lam``.

    ``coords`` are the element's vertex coordinates ``(dim+1, dim)``.  With a
    single point the leading axis is dropped.
    """
    coords = np.asarray(coords, dtype=float)
    if coords.ndim == 1:
        coords = coords[:, None]
    dim = coords.shape[1]
    jac = (coords[1:] - coords[:1]).T
    det = np.linalg.det(jac)
    if abs(det) <= 1e-14 * max(1.0, np.abs(coords).max()) ** dim:
        raise SingularGeometryError("element has (near) zero measure")
    inv = np.linalg.inv(jac)
    gl = np.vstack([-inv.sum(axis=0), inv])
    lam = np.asarray(lam, dtype=float)
    single = lam.ndim == 1
    vals, dl = basis(kind, dim, np.atleast_2d(lam))
    grads = dl @ gl
    if single:
        return vals[0], grads[0]
    return vals, grads


@dataclass(frozen=True, eq=False)
class ApproximationSpace:
    mesh: Mesh
    kind: ElementKind
    element_dofs: np.ndarray  # (ne, nloc)
    dof_locations: np.ndarray  # (ndofs, dim)
    lumped: np.ndarray  # (ndofs,)
    n_vertex_dofs: int
    edge_vertices: np.ndarray = field(repr=False)  # (nedge, 2) topological

    @property
    def n_dofs(self) -> int:
        return len(self.dof_locations)

    @property
    def dim(self) -> int:
        return self.mesh.dim

    @property
    def degree(self) -> int:
        return self.kind.degree

    @property
    def local_indices(self) -> np.ndarray:
        return local_indices(self.dim, self.degree)

    def tabulate(self, lam: np.ndarray):
        """Values ``(nq, nloc)`` and gradients ``(ne, nq, nloc, dim)`` on all elements."""
        vals, dl = basis(self.kind, self.dim, lam)
        grads = np.einsum("qij,ejd->eqid", dl, self.mesh.geometry.grad_lambda)
        return vals, grads


def _dof_map(mesh: Mesh, degree: int):
    topo = mesh.topo_elements
    nv = mesh.n_vertices
    alphas = local_indices(mesh.dim, degree)
    ne, nloc = len(topo), len(alphas)
    dofs = np.empty((ne, nloc), dtype=np.int64)
    vertex_slots = [int(np.flatnonzero(a)[0]) if a.max() == degree else -1 for a in alphas]
    edge_slots = [tuple(np.flatnonzero(a)) if a.max() < degree else None for a in alphas]

    edge_index: dict = {}
    if degree == 2:
        keys = []
        for k, t in enumerate(topo):
            for slot in edge_slots:
                if slot is None:
                    continue
                pair = tuple(sorted((int(t[slot[0]]), int(t[slot[1]]))))
                # 1D edge DOFs live inside elements and are never shared
                keys.append(pair + (k,) if mesh.dim == 1 else pair)
        for n, key in enumerate(sorted(set(keys))):
            edge_index[key] = nv + n
    for k, t in enumerate(topo):
        for i in range(nloc):
            if vertex_slots[i] >= 0:
                dofs[k, i] = t[vertex_slots[i]]
            else:
                a, b = edge_slots[i]
                pair = tuple(sorted((int(t[a]), int(t[b]))))
                dofs[k, i] = edge_index[pair + (k,) if mesh.dim == 1 else pair]
    edges = np.array([key[:2] for key in sorted(edge_index, key=edge_index.get)],
                     dtype=np.int64).reshape(-1, 2)
    return dofs, edges


def _dof_locations(mesh: Mesh, dofs: np.ndarray, degree: int) -> np.ndarray:
    alphas = local_indices(mesh.dim, degree)
    coords = mesh.element_coords()
    # Bernstein/Lagrange nodes sit at lambda = alpha / degree
    pts = np.einsum("ij,ejd->eid", alphas / degree, coords)
    loc = np.empty((int(dofs.max()) + 1, mesh.dim))
    # first occurrence wins (periodic copies)
    order = np.argsort(dofs.ravel(), kind="stable")
    flat = dofs.ravel()[order]
    first = np.concatenate([[True], flat[1:] != flat[:-1]])
    loc[flat[first]] = pts.reshape(-1, mesh.dim)[order][first]
    return loc


def basis_integrals(mesh: Mesh, kind: ElementKind, element_dofs: np.ndarray) -> np.ndarray:
    """C_sigma = integral of phi_sigma over the domain."""
    rule = quadrature_rule(mesh.dim, max(kind.degree, 1))
    vals, _ = basis(kind, mesh.dim, rule.points)
    local = rule.weights @ vals  # (nloc,) reference averages
    contrib = mesh.geometry.measure[:, None] * local[None, :]
    return np.bincount(element_dofs.ravel(), weights=contrib.ravel(),
                       minlength=int(element_dofs.max()) + 1)


def build_space(mesh: Mesh, kind, *, check_lumping: bool = True) -> ApproximationSpace:
    kind = ElementKind.parse(kind)
    dofs, edges = _dof_map(mesh, kind.degree)
    lumped = basis_integrals(mesh, kind, dofs)
    if check_lumping:
        tol = 1e-14 * mesh.total_measure()
        bad = np.flatnonzero(lumped <= tol)
        if len(bad):
            raise NonPositiveLumping(bad, lumped[bad])
    locs = _dof_locations(mesh, dofs, kind.degree)
    return ApproximationSpace(mesh, kind, dofs, locs, lumped, mesh.n_vertices, edges)


def _sample(u0: Callable, x: np.ndarray) -> np.ndarray:
    vals = np.asarray(u0(x), dtype=float).reshape(len(x))
    if not np.all(np.isfinite(vals)):
        raise ValueError("initial data is not finite at some DOF location")
    return vals


def init_field(space: ApproximationSpace, u0: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Control values of the interpolant of ``u0``.

    ``u0`` is called with an ``(n, dim)`` array of points.  For B2, the edge
    control value ``2 u0(m) - (u0(v1) + u0(v2)) / 2`` makes the Bezier
    representation interpolate ``u0`` at vertices and edge midpoints.
    """
    kind = space.kind
    if kind is not ElementKind.B2:
        return _sample(u0, space.dof_locations)
    out = _sample(u0, space.dof_locations)
    # samples come from each element's own geometry so periodic copies agree
    coords = space.mesh.element_coords()
    for i, a in enumerate(space.local_indices):
        if a.max() == 2:
            continue
        j, k = np.flatnonzero(a)
        ne = len(coords)
        s = _sample(u0, np.concatenate([
            0.5 * (coords[:, j] + coords[:, k]), coords[:, j], coords[:, k]]))
        out[space.element_dofs[:, i]] = 2.0 * s[:ne] - 0.5 * (s[ne:2 * ne] + s[2 * ne:])
    return out


def eval_field(space: ApproximationSpace, u: np.ndarray, element: int, lam) -> np.ndarray | float:
    lam = np.asarray(lam, dtype=float)
    vals, _ = basis(space.kind, space.dim, np.atleast_2d(lam))
    out = vals @ u[space.element_dofs[element]]
    return float(out[0]) if lam.ndim == 1 else out
