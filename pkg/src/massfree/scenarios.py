"""Named test problems: initial data, velocity, boundary data, exact solution."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mesh import Disk, Interval, Mesh
from .residual import Constant, Periodic, Rotation, WeakInflow


@dataclass(frozen=True)
class Advection1D:
    """Periodic transport on (0, L) at constant speed."""

    wave: str = "sine"
    speed: float = 1.0
    length: float = 1.0
    dim = 1

    def velocity(self):
        return Constant((self.speed,))

    def u0(self, x):
        s = np.asarray(x, dtype=float)[..., 0] / self.length
        if self.wave == "sine":
            return np.sin(2.0 * math.pi * s)
        if self.wave == "gaussian":
            d = s - 0.5
            return np.exp(-100.0 * d * d)
        if self.wave == "zero":
            return np.zeros_like(s)
        if self.wave == "constant":
            return np.ones_like(s)
        raise ValueError(f"unknown wave {self.wave!r}")

    def exact(self, x, t):
        x = np.asarray(x, dtype=float)
        shifted = np.mod(x - self.speed * t, self.length)
        return self.u0(shifted)

    def bc(self, mesh: Mesh):
        return Periodic() if not mesh.boundary_facets else WeakInflow(self.exact)

    def default_mesh(self):
        return Interval(64, periodic=True, length=self.length)


@dataclass(frozen=True)
class RotatingGaussian:
    """exp(-exponent |x - center|^2) carried by a(x, y) = omega (-y, x) on the unit disk.

    One time unit is one full turn when ``omega = 2 pi``.
    """

    omega: float = 2.0 * math.pi
    exponent: float = 40.0
    center: tuple = (0.0, 0.0)
    amplitude: float = 1.0
    dim = 2

    def velocity(self):
        return Rotation(self.omega)

    def u0(self, x):
        x = np.asarray(x, dtype=float)
        d2 = (x[..., 0] - self.center[0]) ** 2 + (x[..., 1] - self.center[1]) ** 2
        return self.amplitude * np.exp(-self.exponent * d2)

    def exact(self, x, t):
        # back-rotate the sample points
        x = np.asarray(x, dtype=float)
        c, s = math.cos(self.omega * t), math.sin(self.omega * t)
        xb = np.stack([c * x[..., 0] + s * x[..., 1], -s * x[..., 0] + c * x[..., 1]], axis=-1)
        return self.u0(xb)

    def bc(self, mesh: Mesh):
        return WeakInflow(self.exact)

    def default_mesh(self):
        return Disk(24)


def make_scenario(name: str, **params):
    key = name.strip().lower().replace("_", "-")
    if key in ("advection1d", "advection-1d", "advection"):
        return Advection1D(**params)
    if key in ("rotating-gaussian", "rotatinggaussian", "rotation"):
        return RotatingGaussian(**params)
    raise ValueError(f"unknown scenario {name!r}")
