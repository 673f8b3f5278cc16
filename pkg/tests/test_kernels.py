import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from massfree import kernels
from massfree.kernels import _pykernels

compiled = pytest.mark.skipif(kernels.compiled_backend is None, reason="extension not built")


def _problem(seed, ne=40, n=6, ndof=50):
    rng = np.random.default_rng(seed)
    mats = rng.standard_normal((ne, n, n))
    dofs = np.stack([rng.choice(ndof, n, replace=False) for _ in range(ne)]).astype(np.int64)
    return mats, dofs, rng.standard_normal(ndof)


def test_python_scatter_apply_against_loop():
    mats, dofs, u = _problem(0)
    out = np.zeros(len(u))
    _pykernels.scatter_apply(mats, dofs, u, out)
    want = np.zeros(len(u))
    for e in range(len(mats)):
        want[dofs[e]] += mats[e] @ u[dofs[e]]
    assert np.allclose(out, want, atol=1e-13)


@compiled
@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10 ** 6), n=st.sampled_from([2, 3, 6, 12]))
def test_backends_agree(seed, n):
    mats, dofs, u = _problem(seed, n=n)
    a, b = np.zeros(len(u)), np.zeros(len(u))
    _pykernels.scatter_apply(mats, dofs, u, a)
    kernels.compiled_backend.scatter_apply(mats, dofs, u, b)
    assert np.allclose(a, b, atol=1e-13)
    loc = mats[:, :, 0].copy()
    a[:], b[:] = 0, 0
    _pykernels.scatter_add(loc, dofs, a)
    kernels.compiled_backend.scatter_add(loc, dofs, b)
    assert np.allclose(a, b, atol=1e-13)


def test_use_backend_switch():
    before = kernels.BACKEND
    try:
        kernels.use_backend("python")
        assert kernels.BACKEND == "python"
        with pytest.raises(ValueError):
            kernels.use_backend("fortran")
    finally:
        kernels.use_backend(before)


@compiled
def test_compiled_is_default_when_built():
    import os
    if os.environ.get("MASSFREE_BACKEND", "").lower() != "python":
        assert kernels.BACKEND == "cython"
