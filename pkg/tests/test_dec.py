from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from massfree.dec import (BlowUpError, InfiniteTimeStepError, apply_l2, compute_dt, dec_scheme,
                          dec_step, dec_update, integrate, interpolation_weights, l1_minus_l2)
from massfree.mesh import Disk, Interval, Rectangle, build_mesh, generate_mesh
from massfree.residual import Constant, Periodic, Rotation, SpatialOperator
from massfree.space import build_space, init_field


def _periodic_op(kind="b2", n=16, scheme="jump"):
    s = build_space(generate_mesh(Interval(n, periodic=True)), kind)
    return SpatialOperator(s, Constant((1.0,)), scheme, Periodic())


def test_order3_weights_exact():
    sc = dec_scheme(3)
    assert sc.subnodes == (F(0), F(1, 2), F(1))
    assert sc.weights == ((F(5, 24), F(1, 3), F(-1, 24)), (F(1, 6), F(4, 6), F(1, 6)))
    assert sc.alpha == (F(0), F(1, 2), F(1, 2))
    assert sc.corrections == 3


def test_order2_trapezoid():
    sc = dec_scheme(2)
    assert sc.weights == ((F(1, 2), F(1, 2)),)


@pytest.mark.parametrize("order", [2, 3])
def test_row_sums_are_subnodes(order):
    sc = dec_scheme(order)
    for xi, row in zip(sc.subnodes[1:], sc.weights):
        assert sum(row) == xi
    assert sum(sc.alpha) == 1


@settings(max_examples=30, deadline=None)
@given(st.lists(st.fractions(min_value=F(1, 50), max_value=1, max_denominator=50),
                min_size=1, max_size=4, unique=True))
def test_interpolation_weights_integrate_polynomials(nodes):
    xi = [F(0)] + sorted(nodes)
    W = interpolation_weights(xi)
    for p in range(len(xi)):
        for i, row in enumerate(W, start=1):
            assert sum(w * x ** p for w, x in zip(row, xi)) == xi[i] ** (p + 1) / (p + 1)


def test_invalid_scheme():
    with pytest.raises(ValueError):
        dec_scheme(4)
    with pytest.raises(ValueError):
        dec_scheme(3, 0)


def test_compute_dt_examples():
    m = build_mesh([[0, 0], [0.1, 0], [0, 0.1]], [[0, 1, 2]])
    v = Constant((2 * np.pi, 0.0))
    assert compute_dt(m, v, 0.3) == pytest.approx(0.3 * 0.1 / (2 * np.pi))
    m2 = build_mesh([[0.0], [0.1], [0.3]], [[0, 1], [1, 2]])
    assert compute_dt(m2, Constant((1.0,)), 1.0) == pytest.approx(0.1)
    with pytest.raises(InfiniteTimeStepError):
        compute_dt(m, Constant((0.0, 0.0)), 0.5)
    with pytest.raises(ValueError):
        compute_dt(m, v, 0.0)


def test_compute_dt_disk_controlled_by_outer_ring():
    m = generate_mesh(Disk(6))
    geo = m.geometry
    speed = np.linalg.norm(Rotation()(geo.centroid), axis=1)
    k = int(np.argmin(geo.h_min / speed))
    assert np.linalg.norm(geo.centroid[k]) > 5 / 6
    assert compute_dt(m, Rotation(), 0.5) == pytest.approx(0.5 * geo.h_min[k] / speed[k])


def test_apply_l2_examples():
    op = _periodic_op()
    sc = dec_scheme(3)
    n = op.n_dofs
    V = [np.zeros(n)] * 3
    assert np.all(apply_l2(op, sc, V, [np.zeros(n)] * 3, 0.1, 2) == 0)
    V = [np.zeros(n), np.full(n, 2.0), np.full(n, 2.0)]
    assert np.allclose(apply_l2(op, sc, V, [np.zeros(n)] * 3, 0.1, 1), 2.0 * op.lumped)
    phi = np.random.default_rng(0).standard_normal(n)
    V = [np.zeros(n)] * 3
    for i, xi in ((1, 0.5), (2, 1.0)):
        assert np.allclose(apply_l2(op, sc, V, [phi] * 3, 0.01, i), 0.01 * xi * phi, atol=1e-16)


def test_constant_state_is_fixed():
    for kind in ("p1", "b2"):
        op = _periodic_op(kind)
        u = np.full(op.n_dofs, 0.75)
        for variant in ("faithful", "mass-only"):
            # residuals of a constant vanish up to roundoff in the element sums
            assert np.abs(dec_step(op, dec_scheme(3), u, 0.01, variant=variant) - u).max() < 1e-14


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 1000), kind=st.sampled_from(["p1", "b2"]),
       variant=st.sampled_from(["faithful", "mass-only"]))
def test_lumped_mass_conserved(seed, kind, variant):
    op = _periodic_op(kind, n=12)
    u = np.random.default_rng(seed).standard_normal(op.n_dofs)
    before = op.lumped @ u
    scale = op.lumped @ np.abs(u)
    for _ in range(5):
        u = dec_step(op, dec_scheme(3), u, 0.02, variant=variant)
    assert abs(op.lumped @ u - before) < 1e-12 * scale


def _scalar_dec(lam, y0, dt, xi, W, M):
    # textbook explicit DeC for y' = lam*y, written independently
    S = len(xi)
    y = [y0] * S
    for _ in range(M):
        new = [y0]
        for i in range(1, S):
            new.append(y0 + dt * sum(W[i - 1][l] * lam * y[l] for l in range(S)))
        y = new
    return y[-1]


@pytest.mark.parametrize("order", [2, 3])
@pytest.mark.parametrize("M", [1, 2, 3, 5])
def test_scalar_ode_matches_independent_dec(order, M):
    lam, y0, dt = -1.3, 0.8, 0.2
    sc = dec_scheme(order, M)
    W = [[float(w) for w in row] for row in sc.weights]
    res = lambda u, t: -lam * u  # noqa: E731
    one = np.ones(1)
    # identity mass action: C = 1 and M = I, so the L1 Phi differences cancel exactly
    got = dec_update(res, one, lambda v: v, y0 * one, dt, sc, variant="mass-only")
    want = _scalar_dec(lam, y0, dt, [float(x) for x in sc.subnodes], W, M)
    assert got[0] == pytest.approx(want, rel=1e-15, abs=1e-16)


def test_scalar_ode_order():
    lam = -1.0
    errs = []
    for n in (10, 20, 40):
        y = np.ones(1)
        for _ in range(n):
            y = dec_update(lambda u, t: -lam * u, np.ones(1), lambda v: v, y, 1.0 / n, dec_scheme(3))
        errs.append(abs(y[0] - np.exp(lam)))
    assert np.log2(errs[0] / errs[1]) > 2.8 and np.log2(errs[1] / errs[2]) > 2.8


def test_renumbering_equivariance():
    m = generate_mesh(Rectangle(3, 3, True, True))
    s = build_space(m, "b2")
    op = SpatialOperator(s, Constant((1.0, 0.4)), "jump", Periodic())
    perm = np.random.default_rng(5).permutation(s.n_dofs)
    inv = np.argsort(perm)

    class Permuted:
        lumped = op.lumped[perm]

        def residual(self, v, t=0.0):
            return op.residual(v[inv], t)[perm]

        def mass_action(self, v):
            return op.mass_action(v[inv])[perm]

    u = np.random.default_rng(6).standard_normal(s.n_dofs)
    a = dec_step(op, dec_scheme(3), u, 0.01)
    b = dec_step(Permuted(), dec_scheme(3), u[perm], 0.01)
    assert np.allclose(a[perm], b, atol=1e-14)


def _self_convergence(kind, corrections, n_steps=(10, 20, 40, 80)):
    op = _periodic_op(kind, n=16)
    u0 = init_field(op.space, lambda x: np.sin(2 * np.pi * x[:, 0]))
    sols = [integrate(op, dec_scheme(3, corrections), u0, 0.25, 0.25 / n)[0] for n in n_steps]
    d = [np.abs(sols[i] - sols[i + 1]).max() for i in range(len(sols) - 1)]
    return np.log2(np.array(d[:-1]) / d[1:])


@pytest.mark.parametrize("kind,corrections", [("p1", 12), ("b2", 150)])
def test_richardson_temporal_order(kind, corrections):
    # with the sweep converged the step is the 3-node collocation method
    assert np.all(_self_convergence(kind, corrections) >= 2.7)


def test_default_corrections_leave_first_order_floor_on_fixed_mesh():
    # the lumped sweep contracts the high-frequency B2 branch only by ~0.9,
    # so at fixed h and few corrections an O(dt) term remains
    rates = _self_convergence("b2", 3, n_steps=(40, 80, 160, 320))
    assert np.all(rates < 1.5)


def test_l1_minus_l2_linear_in_dt():
    op = _periodic_op("b2", n=16)
    rng = np.random.default_rng(1234)
    u0 = rng.standard_normal(op.n_dofs)
    Z = rng.standard_normal((2, op.n_dofs))
    dts = np.logspace(-2, -5, 7)
    norms = [np.abs(l1_minus_l2(op, dec_scheme(3), [u0, u0 + dt * Z[0], u0 + dt * Z[1]], dt)).max()
             for dt in dts]
    slope = np.polyfit(np.log(dts), np.log(norms), 1)[0]
    assert abs(slope - 1.0) < 0.1


def test_fixed_point_of_correction_solves_l2():
    op = _periodic_op("p1", n=8)
    sc = dec_scheme(3, 80)
    u0 = init_field(op.space, lambda x: np.cos(2 * np.pi * x[:, 0]))
    dt = 0.01
    seen = []

    def res(v, t):
        seen.append((t, v.copy()))
        return op.residual(v, t)
    V2 = dec_update(res, op.lumped, op.mass_action, u0, dt, sc)
    V1 = [v for t, v in seen if abs(t - 0.005) < 1e-15][-1]
    R = [op.residual(v) for v in (u0, V1, V2)]
    for i in (1, 2):
        assert np.abs(apply_l2(op, sc, [u0, V1, V2], R, dt, i)).max() < 1e-13


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_blowup_reported():
    op = _periodic_op("b2", n=16)
    u = np.random.default_rng(0).standard_normal(op.n_dofs)
    with pytest.raises(BlowUpError) as info:
        integrate(op, dec_scheme(3), u, 1e6, 5.0)
    assert info.value.step is not None


def test_integrate_lands_on_final_time():
    op = _periodic_op("p1", n=8)
    times = []
    _, n = integrate(op, dec_scheme(2), np.zeros(op.n_dofs), 1.0, 0.3,
                     callback=lambda k, t, u: times.append(t))
    assert n == 4 and times[-1] == 1.0
    assert np.all(np.diff(times) > 0)
