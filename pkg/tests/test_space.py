import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from massfree.mesh import Disk, Interval, Rectangle, build_mesh, generate_mesh
from massfree.space import (ElementKind, NonPositiveLumping, basis, build_space, eval_field,
                            init_field, shape_values_and_gradients)

REF = build_mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]])
MESHES = [Interval(6), Interval(5, periodic=True), Rectangle(3, 2), Rectangle(4, 3, True, True), Disk(3)]


def test_p1_reference_lumping():
    s = build_space(REF, "p1")
    assert np.allclose(s.lumped, 1 / 6, atol=1e-15)


def test_b2_reference_lumping():
    s = build_space(REF, "b2")
    assert s.n_dofs == 6
    assert np.allclose(s.lumped, 1 / 12, atol=1e-15)


@pytest.mark.parametrize("spec", MESHES, ids=repr)
@pytest.mark.parametrize("kind", ["p1", "b2"])
def test_lumping_positive_and_partition_of_unity(spec, kind):
    m = generate_mesh(spec)
    s = build_space(m, kind)
    assert np.all(s.lumped > 0)
    assert abs(s.lumped.sum() - m.total_measure()) < 1e-12


@pytest.mark.parametrize("spec", [Rectangle(2, 2), Disk(2), Rectangle(3, 3, True, True)], ids=repr)
def test_p2_lagrange_is_rejected(spec):
    m = generate_mesh(spec)
    with pytest.raises(NonPositiveLumping) as info:
        build_space(m, "p2")
    unchecked = build_space(m, "p2", check_lumping=False)
    assert abs(unchecked.lumped.sum() - m.total_measure()) < 1e-12
    # every vertex function integrates to zero
    nv = unchecked.n_vertex_dofs
    assert np.all(np.abs(unchecked.lumped[:nv]) < 1e-14)
    assert set(info.value.dofs.tolist()) == set(range(nv))


def test_p2_lagrange_lumps_positively_in_1d():
    # vertex integral h/6, midpoint 2h/3: the failure is a 2D phenomenon
    s = build_space(generate_mesh(Interval(4)), "p2")
    assert np.allclose(np.sort(s.lumped)[:2], 0.25 / 6)


def test_shape_values_examples():
    X = [[0, 0], [1, 0], [0, 1]]
    v, _ = shape_values_and_gradients("p1", X, [1, 0, 0])
    assert np.array_equal(v, [1, 0, 0])
    v, _ = shape_values_and_gradients("b2", X, [0.5, 0.5, 0])
    assert np.allclose(v, [0.25, 0.5, 0.25, 0, 0, 0], atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(kind=st.sampled_from(list(ElementKind)), dim=st.sampled_from([1, 2]),
       w=st.lists(st.floats(0.01, 1.0), min_size=3, max_size=3),
       shift=st.floats(-2, 2))
def test_partition_of_unity(kind, dim, w, shift):
    lam = np.array(w[:dim + 1]) / sum(w[:dim + 1])
    X = np.array([[0.0, 0.0], [1.3, 0.2], [0.1, 0.9]])[:dim + 1, :dim] + shift
    v, g = shape_values_and_gradients(kind, X, lam)
    assert abs(v.sum() - 1) < 1e-13
    assert np.abs(g.sum(axis=0)).max() < 1e-12


def test_gradients_against_finite_differences():
    X = np.array([[0.1, 0.2], [1.1, 0.3], [0.4, 1.2]])
    lam = np.array([0.2, 0.3, 0.5])
    x0 = lam @ X
    T = np.vstack([X.T, np.ones(3)])
    for kind in ElementKind:
        _, g = shape_values_and_gradients(kind, X, lam)
        for d in range(2):
            e = np.zeros(2)
            e[d] = 1e-6
            lp = np.linalg.solve(T, np.append(x0 + e, 1))
            lm = np.linalg.solve(T, np.append(x0 - e, 1))
            fd = (shape_values_and_gradients(kind, X, lp)[0]
                  - shape_values_and_gradients(kind, X, lm)[0]) / 2e-6
            assert np.allclose(fd, g[:, d], atol=1e-8)


def test_init_constant_and_linear():
    s = build_space(generate_mesh(Disk(2)), "b2")
    assert np.allclose(init_field(s, lambda x: np.full(len(x), 3.5)), 3.5)
    lin = lambda x: 1 + 2 * x[:, 0] - x[:, 1]  # noqa: E731
    u = init_field(s, lin)
    for e, (a, b) in enumerate(s.edge_vertices):
        va, vb = s.mesh.vertices[a], s.mesh.vertices[b]
        assert u[s.n_vertex_dofs + e] == pytest.approx(0.5 * (lin(va[None]) + lin(vb[None]))[0])


def test_init_quadratic_on_unit_edge():
    m = generate_mesh(Interval(1))
    s = build_space(m, "b2")
    u = init_field(s, lambda x: x[:, 0] ** 2)
    # vertices first then the edge
    assert np.allclose(u, [0, 1, 0], atol=1e-15)
    for t in np.linspace(0, 1, 7):
        assert eval_field(s, u, 0, [1 - t, t]) == pytest.approx(t * t, abs=1e-15)


def test_eval_field_examples():
    s = build_space(REF, "b2")
    u = np.zeros(6)
    u[s.element_dofs[0, 2]] = 1.0
    assert eval_field(s, u, 0, [0.5, 0.5, 0]) == pytest.approx(0.25)
    p = build_space(REF, "p1")
    up = np.array([1.0, 2.0, 3.0])
    assert eval_field(p, up, 0, [0, 1, 0]) == pytest.approx(up[p.element_dofs[0, 1]])


@pytest.mark.parametrize("kind,deg", [("p1", 1), ("b2", 2)])
@pytest.mark.parametrize("spec", [Rectangle(3, 2), Disk(2), Interval(4)], ids=repr)
def test_polynomial_reproduction(kind, deg, spec):
    m = generate_mesh(spec)
    s = build_space(m, kind)
    rng = np.random.default_rng(7)
    c = rng.standard_normal(6)

    def poly(x):
        x0 = x[:, 0]
        x1 = x[:, 1] if x.shape[1] > 1 else 0 * x0
        p = c[0] + c[1] * x0 + c[2] * x1
        if deg == 2:
            p = p + c[3] * x0 ** 2 + c[4] * x0 * x1 + c[5] * x1 ** 2
        return p

    u = init_field(s, poly)
    coords = m.element_coords()
    for k in range(m.n_elements):
        lam = rng.dirichlet(np.ones(m.dim + 1), size=20)
        assert np.allclose(eval_field(s, u, k, lam), poly(lam @ coords[k]), atol=1e-13)


@pytest.mark.parametrize("kind", ["p1", "b2"])
def test_global_continuity_across_facets(kind):
    m = generate_mesh(Disk(3))
    s = build_space(m, kind)
    u = np.random.default_rng(3).standard_normal(s.n_dofs)
    rng = np.random.default_rng(4)
    for key, k, kp in m.interior_facets[::5]:
        t = rng.random(5)
        vals = []
        for e in (k, kp):
            loc = [int(np.flatnonzero(m.topo_elements[e] == v)[0]) for v in key]
            lam = np.zeros((5, 3))
            lam[:, loc[0]] = t
            lam[:, loc[1]] = 1 - t
            vals.append(eval_field(s, u, e, lam))
        assert np.allclose(vals[0], vals[1], atol=1e-13)


def test_periodic_b2_identifies_dofs():
    m = generate_mesh(Interval(4, periodic=True))
    s = build_space(m, "b2")
    assert s.n_dofs == 8
    u = init_field(s, lambda x: np.sin(2 * np.pi * x[:, 0]))
    assert np.all(np.isfinite(u))


def test_basis_rejects_unknown_kind():
    with pytest.raises(ValueError):
        ElementKind.parse("p3")
    v, _ = basis(ElementKind.B2, 1, np.array([[0.5, 0.5]]))
    assert np.allclose(v, [[0.25, 0.5, 0.25]])
