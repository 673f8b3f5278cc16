"""Conforming simplicial meshes (intervals and triangles) and quadrature rules.

Meshes are stored with *geometric* vertices: a periodic mesh keeps the
duplicated vertices on the identified boundaries so every element has its
true coordinates, and ``vertex_rep`` maps each geometric vertex to a compact
topological index shared by identified copies.  Facet adjacency and all DOF
numbering downstream work on the topological indices.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np


class MeshError(ValueError):
    """Invalid mesh specification or inconsistent mesh data."""


class UnsupportedRuleError(ValueError):
    pass


class SingularGeometryError(ValueError):
    pass


# --------------------------------------------------------------------------
# mesh specifications


@dataclass(frozen=True)
class Interval:
    n: int
    periodic: bool = False
    length: float = 1.0


@dataclass(frozen=True)
class Rectangle:
    nx: int
    ny: int
    periodic_x: bool = False
    periodic_y: bool = False
    lx: float = 1.0
    ly: float = 1.0


@dataclass(frozen=True)
class Disk:
    """Structured radial triangulation of the unit disk.

    ``level`` rings, ring ``k`` carrying ``6k`` vertices at radius ``k/level``.
    ``split`` applies that many uniform 1-to-4 refinements afterwards (the
    refined mesh covers the same polygon, so P1 on ``Disk(L, split=1)`` uses
    the same DOF locations as B2 on ``Disk(L)``).
    """

    level: int
    split: int = 0


MeshSpec = Union[Interval, Rectangle, Disk]


# --------------------------------------------------------------------------
# mesh


@dataclass(frozen=True, eq=False)
class Mesh:
    dim: int
    vertices: np.ndarray  # (nv, dim)
    elements: np.ndarray  # (ne, dim + 1), geometric vertex indices
    vertex_rep: np.ndarray  # (nv,), topological vertex index
    # interior facets: topological vertex tuple, K, K+
    interior_facets: tuple = field(repr=False)
    # boundary facets: topological vertex tuple, owning element, outward normal
    boundary_facets: tuple = field(repr=False)

    @property
    def n_vertices(self) -> int:
        """Number of topological (distinct) vertices."""
        return int(self.vertex_rep.max()) + 1 if len(self.vertex_rep) else 0

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def n_facets(self) -> int:
        return len(self.interior_facets) + len(self.boundary_facets)

    @property
    def periodic(self) -> bool:
        return self.n_vertices < len(self.vertices)

    @property
    def topo_elements(self) -> np.ndarray:
        return self.vertex_rep[self.elements]

    def element_coords(self, k: int | None = None) -> np.ndarray:
        if k is None:
            return self.vertices[self.elements]
        return self.vertices[self.elements[k]]

    @property
    def geometry(self) -> "ElementGeometry":
        geo = self.__dict__.get("_geometry")
        if geo is None:
            geo = ElementGeometry.from_coords(self.element_coords())
            object.__setattr__(self, "_geometry", geo)
        return geo

    def total_measure(self) -> float:
        return float(self.geometry.measure.sum())

    def topological_location(self) -> np.ndarray:
        """Coordinates of each topological vertex (first geometric copy)."""
        out = np.empty((self.n_vertices, self.dim))
        seen = np.zeros(self.n_vertices, dtype=bool)
        for g, t in enumerate(self.vertex_rep):
            if not seen[t]:
                out[t] = self.vertices[g]
                seen[t] = True
        return out


@dataclass(frozen=True, eq=False)
class ElementGeometry:
    """Per-element affine data, vectorized over the element axis."""

    coords: np.ndarray  # (ne, d+1, d)
    measure: np.ndarray  # (ne,)
    grad_lambda: np.ndarray  # (ne, d+1, d), gradients of barycentric coords
    centroid: np.ndarray  # (ne, d)
    h_min: np.ndarray  # (ne,), shortest edge length

    @classmethod
    def from_coords(cls, coords: np.ndarray) -> "ElementGeometry":
        coords = np.asarray(coords, dtype=float)
        ne, nv, d = coords.shape
        jac = (coords[:, 1:, :] - coords[:, :1, :]).transpose(0, 2, 1)  # (ne, d, d)
        det = np.linalg.det(jac)
        if np.any(np.abs(det) <= 1e-300):
            bad = np.flatnonzero(np.abs(det) <= 1e-300)
            raise SingularGeometryError(f"degenerate element(s) {bad[:5].tolist()}")
        inv = np.linalg.inv(jac)  # rows: gradients of lambda_1..lambda_d
        grad = np.empty((ne, nv, d))
        grad[:, 1:, :] = inv
        grad[:, 0, :] = -inv.sum(axis=1)
        measure = np.abs(det) / math.factorial(d)
        if d == 1:
            h_min = np.abs(coords[:, 1, 0] - coords[:, 0, 0])
        else:
            edges = [np.linalg.norm(coords[:, i] - coords[:, j], axis=1)
                     for i in range(nv) for j in range(i + 1, nv)]
            h_min = np.min(edges, axis=0)
        return cls(coords, measure, grad, coords.mean(axis=1), h_min)


def element_geometry(coords: Sequence[Sequence[float]]) -> ElementGeometry:
    """Geometry of a single element given its vertex coordinates."""
    return ElementGeometry.from_coords(np.asarray(coords, dtype=float)[None])


# --------------------------------------------------------------------------
# construction


def build_mesh(vertices, elements, vertex_rep=None, boundary=None) -> Mesh:
    """Assemble a :class:`Mesh` from raw arrays, deriving facets and normals.

    ``boundary`` optionally lists the expected boundary facets (vertex index
    tuples); a mismatch with the derived set raises :class:`MeshError`.
    """
    vertices = np.asarray(vertices, dtype=float)
    if vertices.ndim == 1:
        vertices = vertices[:, None]
    dim = vertices.shape[1]
    if dim not in (1, 2):
        raise MeshError(f"unsupported dimension {dim}")
    elements = np.array(elements, dtype=np.int64).reshape(-1, dim + 1)
    if len(elements) == 0:
        raise MeshError("mesh has no elements")
    if elements.min() < 0 or elements.max() >= len(vertices):
        raise MeshError("element references a vertex out of range")
    if vertex_rep is None:
        vertex_rep = np.arange(len(vertices))
    vertex_rep = np.asarray(vertex_rep, dtype=np.int64)

    # orientation: positive signed measure
    coords = vertices[elements]
    if dim == 1:
        signed = coords[:, 1, 0] - coords[:, 0, 0]
    else:
        e1 = coords[:, 1] - coords[:, 0]
        e2 = coords[:, 2] - coords[:, 0]
        signed = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    if np.any(signed == 0.0):
        raise SingularGeometryError(
            f"zero-measure element(s) {np.flatnonzero(signed == 0.0)[:5].tolist()}")
    flip = signed < 0
    elements[flip, 0], elements[flip, 1] = elements[flip, 1], elements[flip, 0].copy()

    topo = vertex_rep[elements]
    for k, t in enumerate(topo):
        if len(set(t.tolist())) != dim + 1:
            raise MeshError(f"element {k} has identified (coincident) vertices")

    owners: dict[tuple, list[tuple[int, int]]] = {}
    nloc = dim + 1
    for k, t in enumerate(topo):
        for opp in range(nloc):
            key = tuple(sorted(int(t[j]) for j in range(nloc) if j != opp))
            owners.setdefault(key, []).append((k, opp))

    interior, bnd = [], []
    for key in sorted(owners):
        own = owners[key]
        if len(own) == 2:
            interior.append((key, own[0][0], own[1][0]))
        elif len(own) == 1:
            k, opp = own[0]
            bnd.append((key, k, _outward_normal(vertices[elements[k]], opp)))
        else:
            raise MeshError(f"facet {key} shared by {len(own)} elements (non-conforming)")

    if boundary is not None:
        expected = sorted(tuple(sorted(int(vertex_rep[v]) for v in f)) for f in boundary)
        if expected != [b[0] for b in bnd]:
            raise MeshError("listed boundary facets do not match the derived boundary")

    return Mesh(dim, vertices, elements, vertex_rep, tuple(interior), tuple(bnd))


def _outward_normal(coords: np.ndarray, opposite: int) -> np.ndarray:
    # normal of the facet opposite local vertex `opposite`
    geo = ElementGeometry.from_coords(coords[None])
    g = geo.grad_lambda[0, opposite]
    return -g / np.linalg.norm(g)


def generate_mesh(spec: MeshSpec) -> Mesh:
    if isinstance(spec, Interval):
        return _interval(spec)
    if isinstance(spec, Rectangle):
        return _rectangle(spec)
    if isinstance(spec, Disk):
        return _disk(spec)
    raise MeshError(f"unknown mesh specification {spec!r}")


def _interval(spec: Interval) -> Mesh:
    n = spec.n
    if n <= 0 or spec.length <= 0:
        raise MeshError(f"interval needs n > 0, got {n}")
    if spec.periodic and n < 2:
        raise MeshError("a periodic interval needs at least 2 cells")
    x = np.linspace(0.0, spec.length, n + 1)
    elements = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    rep = np.arange(n + 1)
    if spec.periodic:
        rep[-1] = 0
    return build_mesh(x, elements, rep)


def _rectangle(spec: Rectangle) -> Mesh:
    nx, ny = spec.nx, spec.ny
    if nx <= 0 or ny <= 0 or spec.lx <= 0 or spec.ly <= 0:
        raise MeshError(f"rectangle needs positive cell counts, got {nx}x{ny}")
    if (spec.periodic_x and nx < 3) or (spec.periodic_y and ny < 3):
        raise MeshError("periodic directions need at least 3 cells")
    xs = np.linspace(0.0, spec.lx, nx + 1)
    ys = np.linspace(0.0, spec.ly, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    verts = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    elements = []
    for j in range(ny):
        for i in range(nx):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            elements.append((a, b, c))
            elements.append((a, c, d))
    ii, jj = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="xy")
    ri = np.where(spec.periodic_x & (ii == nx), 0, ii)
    rj = np.where(spec.periodic_y & (jj == ny), 0, jj)
    key = (rj * (nx + 1) + ri).ravel()
    _, rep = np.unique(key, return_inverse=True)
    return build_mesh(verts, elements, rep)


def _disk(spec: Disk) -> Mesh:
    L = spec.level
    if L <= 0 or spec.split < 0:
        raise MeshError(f"disk needs level > 0, got {L}")
    verts = [(0.0, 0.0)]
    rings = [[0]]
    for k in range(1, L + 1):
        r = k / L
        ids = []
        for j in range(6 * k):
            th = 2.0 * math.pi * j / (6 * k)
            ids.append(len(verts))
            verts.append((r * math.cos(th), r * math.sin(th)))
        rings.append(ids)
    elements = []
    for k in range(1, L + 1):
        elements.extend(_zip_rings(rings[k - 1], rings[k], k))
    mesh = build_mesh(np.array(verts), elements)
    for _ in range(spec.split):
        mesh = refine(mesh)
    return mesh


def _zip_rings(inner: list[int], outer: list[int], k: int) -> list[tuple]:
    if k == 1:
        return [(inner[0], outer[j], outer[(j + 1) % 6]) for j in range(6)]
    # advance along whichever ring has the smaller next angle
    ni, no = len(inner), len(outer)
    tris = []
    i = j = 0
    while i < ni or j < no:
        ai = (i + 1) / ni
        ao = (j + 1) / no
        if j < no and (i >= ni or ao <= ai):
            tris.append((inner[i % ni], outer[j], outer[(j + 1) % no]))
            j += 1
        else:
            tris.append((inner[i], outer[j % no], inner[(i + 1) % ni]))
            i += 1
    return tris


def refine(mesh: Mesh) -> Mesh:
    """Uniform red refinement (1 -> 2 intervals, 1 -> 4 triangles)."""
    if mesh.periodic:
        raise MeshError("refinement of periodic meshes is not supported")
    verts = [tuple(v) for v in mesh.vertices]
    mids: dict[tuple[int, int], int] = {}

    def mid(a, b):
        key = (min(a, b), max(a, b))
        if key not in mids:
            mids[key] = len(verts)
            verts.append(tuple((mesh.vertices[a] + mesh.vertices[b]) / 2))
        return mids[key]

    new = []
    for el in mesh.elements.tolist():
        if mesh.dim == 1:
            a, b = el
            m = mid(a, b)
            new += [(a, m), (m, b)]
        else:
            a, b, c = el
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
    return build_mesh(np.array(verts), new)


# --------------------------------------------------------------------------
# ASCII mesh files


def read_mesh(path: Union[str, Path]) -> Mesh:
    """Read the ``dim nv ne nb`` ASCII format; facets are derived."""
    path = Path(path)
    tokens = [ln.split() for ln in path.read_text().splitlines()
              if ln.strip() and not ln.lstrip().startswith("#")]
    try:
        dim, nv, ne, nb = (int(t) for t in tokens[0])
        body = tokens[1:]
        if len(body) != nv + ne + nb:
            raise MeshError(f"{path}: expected {nv + ne + nb} data lines, found {len(body)}")
        verts = np.array([[float(x) for x in ln] for ln in body[:nv]])
        elems = [[int(x) for x in ln] for ln in body[nv:nv + ne]]
        bnd = [[int(x) for x in ln] for ln in body[nv + ne:]]
    except (ValueError, IndexError) as exc:
        raise MeshError(f"{path}: malformed mesh file ({exc})") from exc
    if verts.shape != (nv, dim):
        raise MeshError(f"{path}: vertex lines must carry {dim} coordinate(s)")
    return build_mesh(verts, elems, boundary=bnd)


def write_mesh(mesh: Mesh, path: Union[str, Path]) -> None:
    if mesh.periodic:
        raise MeshError("periodic meshes cannot be written in the ASCII format")
    lines = [f"{mesh.dim} {len(mesh.vertices)} {mesh.n_elements} {len(mesh.boundary_facets)}"]
    lines += [" ".join(repr(float(x)) for x in v) for v in mesh.vertices]
    lines += [" ".join(str(int(i)) for i in el) for el in mesh.elements]
    lines += [" ".join(str(i) for i in f[0]) for f in mesh.boundary_facets]
    Path(path).write_text("\n".join(lines) + "\n")


def mesh_info(mesh: Mesh) -> dict:
    geo = mesh.geometry
    return {
        "dim": mesh.dim,
        "vertices": mesh.n_vertices,
        "elements": mesh.n_elements,
        "interior_facets": len(mesh.interior_facets),
        "boundary_facets": len(mesh.boundary_facets),
        "measure": mesh.total_measure(),
        "h_min": float(geo.h_min.min()),
        "h_max": float(geo.h_min.max()),
    }


# --------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    points: np.ndarray  # (nq, dim+1) barycentric
    weights: np.ndarray  # (nq,), sum to 1
    exactness_degree: int

    @property
    def dim(self) -> int:
        return self.points.shape[1] - 1

    def __len__(self) -> int:
        return len(self.weights)


MAX_DEGREE = 20


def quadrature_rule(dim: int, degree: int) -> QuadratureRule:
    """Rule on the reference simplex exact for polynomials of ``degree``.

    Weights are normalized to sum to one; scale by the element measure.
    """
    if dim not in (1, 2):
        raise UnsupportedRuleError(f"no quadrature for dimension {dim}")
    if not 1 <= degree <= MAX_DEGREE:
        raise UnsupportedRuleError(f"degree {degree} outside 1..{MAX_DEGREE}")
    return _rule(dim, degree)


_RULES: dict[tuple[int, int], QuadratureRule] = {}


def _rule(dim: int, degree: int) -> QuadratureRule:
    key = (dim, degree)
    if key not in _RULES:
        if dim == 1:
            _RULES[key] = _gauss_interval(degree)
        elif degree == 1:
            _RULES[key] = QuadratureRule(np.full((1, 3), 1.0 / 3.0), np.ones(1), 1)
        elif degree == 2:
            a, b = 2.0 / 3.0, 1.0 / 6.0
            pts = np.array([[a, b, b], [b, a, b], [b, b, a]])
            _RULES[key] = QuadratureRule(pts, np.full(3, 1.0 / 3.0), 2)
        elif degree <= 5:
            _RULES[key] = _radon7()
        else:
            _RULES[key] = _conical(degree)
        _RULES[key].points.flags.writeable = False
        _RULES[key].weights.flags.writeable = False
    return _RULES[key]


def _gauss_interval(degree: int) -> QuadratureRule:
    n = degree // 2 + 1
    x, w = np.polynomial.legendre.leggauss(n)
    t = (x + 1.0) / 2.0
    return QuadratureRule(np.column_stack([1.0 - t, t]), w / 2.0, 2 * n - 1)


def _radon7() -> QuadratureRule:
    # 7-point degree-5 rule, closed form
    s = math.sqrt(15.0)
    a1, a2 = (6.0 - s) / 21.0, (6.0 + s) / 21.0
    w1, w2 = (155.0 - s) / 1200.0, (155.0 + s) / 1200.0
    pts = [(1 / 3, 1 / 3, 1 / 3)]
    wts = [9.0 / 40.0]
    for a, w in ((a1, w1), (a2, w2)):
        b = 1.0 - 2.0 * a
        pts += [(b, a, a), (a, b, a), (a, a, b)]
        wts += [w, w, w]
    return QuadratureRule(np.array(pts), np.array(wts), 5)


def _conical(degree: int) -> QuadratureRule:
    # collapsed Gauss-Jacobi x Gauss-Legendre product
    from scipy.special import roots_jacobi

    n = degree // 2 + 1
    xj, wj = roots_jacobi(n, 1.0, 0.0)  # weight (1 - x)
    xl, wl = np.polynomial.legendre.leggauss(n)
    s = (xj + 1.0) / 2.0  # lambda_1-direction collapse
    ws = wj / 4.0
    t = (xl + 1.0) / 2.0
    wt = wl / 2.0
    pts, wts = [], []
    for si, wsi in zip(s, ws):
        for ti, wti in zip(t, wt):
            l1 = si
            l2 = (1.0 - si) * ti
            pts.append((1.0 - l1 - l2, l1, l2))
            wts.append(wsi * wti)
    w = np.array(wts)
    return QuadratureRule(np.array(pts), w / w.sum(), 2 * n - 1)


def facet_rule(dim: int, degree: int) -> QuadratureRule:
    """Rule on a facet: a point in 1D, an interval in 2D."""
    if dim == 1:
        return QuadratureRule(np.ones((1, 1)), np.ones(1), MAX_DEGREE)
    return quadrature_rule(1, degree)


def barycentric_monomial_integral(exponents: Iterable[int], measure: float) -> float:
    """Closed form of the integral of prod(lambda_i^a_i) over a simplex."""
    exps = list(exponents)
    d = len(exps) - 1
    num = math.prod(math.factorial(a) for a in exps)
    return num * math.factorial(d) / math.factorial(sum(exps) + d) * measure
