"""Pure numpy versions of the compiled kernels (same contracts)."""
import numpy as np


def scatter_apply(mats, dofs, u, out):
    """out[dofs[e, i]] += sum_j mats[e, i, j] * u[dofs[e, j]], e ascending."""
    local = np.einsum("eij,ej->ei", mats, u[dofs])
    out += np.bincount(dofs.ravel(), weights=local.ravel(), minlength=len(out))


def scatter_add(local, dofs, out):
    out += np.bincount(dofs.ravel(), weights=local.ravel(), minlength=len(out))
