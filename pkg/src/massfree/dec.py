"""Explicit deferred-correction (DeC) time stepping without mass inversion.

The low-order operator L1 uses the lumped coefficients C_sigma and a
left-endpoint (forward Euler) quadrature of the residual; the high-order
operator L2 uses the consistent mass action and interpolatory quadrature on
the subnodes.  Each correction solves ``L1(V^{k+1}) = L1(V^k) - L2(V^k)``,
which only divides by C_sigma.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .mesh import Mesh
from .residual import VelocityField


class BlowUpError(FloatingPointError):
    def __init__(self, message, step=None, iterate=None):
        super().__init__(message)
        self.step = step
        self.iterate = iterate


class InfiniteTimeStepError(ValueError):
    pass


@dataclass(frozen=True)
class DecScheme:
    subnodes: tuple  # Fractions, 0 = xi_0 < ... < xi_{S-1} = 1
    weights: tuple  # rows i = 1..S-1, W[i][l] = int_0^{xi_i} l_l
    corrections: int

    @property
    def n_subnodes(self) -> int:
        return len(self.subnodes)

    @property
    def alpha(self) -> tuple:
        """Forward-Euler increments; ``alpha[0]`` is 0 by convention."""
        xi = self.subnodes
        return (Fraction(0),) + tuple(xi[l] - xi[l - 1] for l in range(1, len(xi)))

    def weight_matrix(self) -> np.ndarray:
        """Float array of shape (S, S); row 0 is zero."""
        S = self.n_subnodes
        W = np.zeros((S, S))
        for i, row in enumerate(self.weights, start=1):
            W[i] = [float(w) for w in row]
        return W


def interpolation_weights(subnodes: Sequence[Fraction]) -> tuple:
    """Exact integrals of the Lagrange cardinal polynomials from 0 to each node."""
    xi = [Fraction(x) for x in subnodes]
    S = len(xi)
    rows = []
    for i in range(1, S):
        row = []
        for l in range(S):
            # cardinal polynomial l_l as coefficient list (ascending powers)
            coef = [Fraction(1)]
            for m in range(S):
                if m == l:
                    continue
                den = xi[l] - xi[m]
                coef = [(c_prev - xi[m] * c) / den for c, c_prev in
                        zip(coef + [Fraction(0)], [Fraction(0)] + coef)]
            row.append(sum(c * xi[i] ** (p + 1) / (p + 1) for p, c in enumerate(coef)))
        rows.append(tuple(row))
    return tuple(rows)


def dec_scheme(time_order: int, corrections: Optional[int] = None) -> DecScheme:
    """Equispaced DeC tables: order 2 uses (0, 1), order 3 uses (0, 1/2, 1)."""
    if time_order not in (2, 3):
        raise ValueError(f"unsupported DeC time order {time_order} (use 2 or 3)")
    nodes = tuple(Fraction(j, time_order - 1) for j in range(time_order))
    m = time_order if corrections is None else int(corrections)
    if m < 1:
        raise ValueError("at least one correction is required")
    return DecScheme(nodes, interpolation_weights(nodes), m)


def compute_dt(mesh: Mesh, velocity: VelocityField, cfl: float) -> float:
    """min_K cfl * h_K / |a(centroid_K)|, h_K the shortest edge of K."""
    if not cfl > 0:
        raise ValueError(f"cfl must be positive, got {cfl}")
    geo = mesh.geometry
    speed = np.linalg.norm(velocity(geo.centroid), axis=1)
    moving = speed > 0.0
    if not np.any(moving):
        raise InfiniteTimeStepError("velocity vanishes at every element centroid")
    return float(np.min(cfl * geo.h_min[moving] / speed[moving]))


def apply_l2(operator, scheme: DecScheme, V: Sequence[np.ndarray], residuals: Sequence[np.ndarray],
             dt: float, i: int) -> np.ndarray:
    """L2 at subnode ``i``: mass action on V_i - V_0 plus dt * sum_l W[i][l] Phi(V_l)."""
    W = scheme.weight_matrix()
    out = operator.mass_action(V[i] - V[0])
    for l in range(scheme.n_subnodes):
        out += dt * W[i, l] * residuals[l]
    return out


def dec_update(residual: Callable, lumped, mass_action: Callable, u_n: np.ndarray,
               dt: float, scheme: DecScheme, t: float = 0.0, *,
               variant: str = "faithful", step: Optional[int] = None) -> np.ndarray:
    """One DeC step for ``C du/dt + Phi(u, t) = 0`` given plain callables.

    ``variant="mass-only"`` drops the residual differences from the L1 side
    (only the lumped mass remains on the left).
    """
    if variant not in ("faithful", "mass-only"):
        raise ValueError(f"unknown DeC variant {variant!r}")
    C = np.asarray(lumped, dtype=float)
    S = scheme.n_subnodes
    xi = [float(x) for x in scheme.subnodes]
    alpha = [float(a) for a in scheme.alpha]
    W = scheme.weight_matrix()
    times = [t + x * dt for x in xi]

    u_n = np.asarray(u_n, dtype=float)
    V = [u_n.copy() for _ in range(S)]
    R = [residual(u_n, tl) for tl in times]

    for k in range(scheme.corrections):
        last = k + 1 == scheme.corrections
        Vn = [V[0]] + [None] * (S - 1)
        Rn = [R[0]] + [None] * (S - 1)
        for i in range(1, S):
            rhs = C * V[i] - mass_action(V[i] - V[0])
            for l in range(S):
                rhs -= dt * W[i, l] * R[l]
            if variant == "faithful":
                # the l = 1 difference vanishes since subnode 0 is frozen
                for l in range(2, i + 1):
                    rhs -= dt * alpha[l] * (Rn[l - 1] - R[l - 1])
            Vn[i] = rhs / C
            if not np.all(np.isfinite(Vn[i])):
                raise BlowUpError(f"non-finite state at step {step}, correction {k + 1}",
                                  step=step, iterate=k + 1)
            if not last or (variant == "faithful" and i < S - 1):
                Rn[i] = residual(Vn[i], times[i])
        V, R = Vn, Rn
    return V[-1]


def dec_step(operator, scheme: DecScheme, u_n: np.ndarray, dt: float, t: float = 0.0, *,
             variant: str = "faithful", step: Optional[int] = None) -> np.ndarray:
    """Advance ``u_n`` by ``dt`` with a :class:`~massfree.residual.SpatialOperator`."""
    return dec_update(operator.residual, operator.lumped, operator.mass_action,
                      u_n, dt, scheme, t, variant=variant, step=step)


def l1_minus_l2(operator, scheme: DecScheme, V: Sequence[np.ndarray], dt: float,
                t: float = 0.0) -> np.ndarray:
    """Stacked (L1 - L2)(V) over subnodes 1..S-1, shape (S-1, n)."""
    C = np.asarray(operator.lumped)
    S = scheme.n_subnodes
    xi = [float(x) for x in scheme.subnodes]
    alpha = [float(a) for a in scheme.alpha]
    R = [operator.residual(V[l], t + xi[l] * dt) for l in range(S)]
    rows = []
    for i in range(1, S):
        l1 = C * (V[i] - V[0]) + dt * sum(alpha[l] * R[l - 1] for l in range(1, i + 1))
        rows.append(l1 - apply_l2(operator, scheme, V, R, dt, i))
    return np.array(rows)


def integrate(operator, scheme: DecScheme, u0: np.ndarray, t_final: float, dt: float, *,
              t0: float = 0.0, variant: str = "faithful", stepper=None, callback=None):
    """March from ``t0`` to ``t_final``; the last step is clipped to land on it.

    ``stepper(u, dt, t, step)`` overrides the DeC step (used by the oracle).
    ``callback(step, t, u)`` is called after every step.  Returns the final
    field and the number of steps taken.
    """
    if not t_final > t0:
        raise ValueError("t_final must exceed the start time")
    if not dt > 0:
        raise ValueError("dt must be positive")
    n_steps = max(1, int(np.ceil((t_final - t0) / dt - 1e-9)))
    u = np.array(u0, dtype=float)
    t = t0
    for n in range(1, n_steps + 1):
        h = dt if n < n_steps else t_final - t
        if stepper is None:
            u = dec_step(operator, scheme, u, h, t, variant=variant, step=n)
        else:
            u = stepper(u, h, t, n)
        t = t_final if n == n_steps else t + h
        if callback is not None:
            callback(n, t, u)
    return u, n_steps
