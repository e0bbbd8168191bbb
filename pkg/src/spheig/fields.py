"""Discrete carriers for eigenfunctions: colatitude profiles and mesh fields."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.integrate import simpson

from .geometry import sphere_surface_measure


class Branch(str, Enum):
    SINGULAR = "singular"   # beta > 0, solution singular at the cone vertex
    REGULAR = "regular"     # beta < 0, solution vanishing at the cone vertex

    @property
    def sign(self) -> float:
        return 1.0 if self is Branch.SINGULAR else -1.0


@dataclass
class ColatGrid:
    """A profile w(theta) sampled on [0, alpha], with its derivative.

    For arcs (dim_N = 2) theta is arc length from one endpoint and the
    surface measure is d(theta); for caps theta is colatitude and the measure
    is |S^(N-2)| sin(theta)^(N-2) d(theta).
    """

    alpha: float
    nodes: np.ndarray
    values: np.ndarray
    derivative: np.ndarray
    dim_N: int

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.derivative = np.asarray(self.derivative, dtype=float)
        if not (self.nodes[0] == 0.0 and abs(self.nodes[-1] - self.alpha) < 1e-12):
            raise ValueError("nodes must span [0, alpha]")
        if np.any(np.diff(self.nodes) <= 0.0):
            raise ValueError("nodes must be strictly increasing")

    def measure_density(self) -> np.ndarray:
        if self.dim_N == 2:
            return np.ones_like(self.nodes)
        const = sphere_surface_measure(self.dim_N - 2)
        return const * np.sin(self.nodes) ** (self.dim_N - 2)

    def integral_abs(self) -> float:
        return float(simpson(np.abs(self.values) * self.measure_density(), x=self.nodes))

    def scaled(self, factor: float) -> "ColatGrid":
        return ColatGrid(self.alpha, self.nodes, factor * self.values,
                         factor * self.derivative, self.dim_N)

    def interp(self, theta):
        """Linear interpolation of the profile (zero outside [0, alpha])."""
        return np.interp(theta, self.nodes, self.values, left=0.0, right=0.0)


@dataclass
class DiscreteField:
    """Nodal P1 field on a surface or interval mesh."""

    mesh: object
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if len(self.values) != self.mesh.n_vertices:
            raise ValueError("value vector does not match the mesh")

    @property
    def interior(self) -> np.ndarray:
        return ~self.mesh.boundary_flags

    def integral_abs(self) -> float:
        return float(self.mesh.lumped_mass() @ np.abs(self.values))

    def scaled(self, factor: float) -> "DiscreteField":
        return DiscreteField(self.mesh, factor * self.values)


@dataclass
class Eigenpair:
    """A solved exponent beta with its positive eigenfunction.

    ``omega`` is a ColatGrid (shooting) or DiscreteField (FEM), normalized so
    that the integral of |omega| over the domain equals 1.  residual_norm is
    solver-specific: the first-zero mismatch for shooting, the discrete dual
    norm of the weak residual for FEM.
    """

    beta: float
    omega: object
    branch: Branch
    residual_norm: float
    iterations: int

    def __post_init__(self):
        self.branch = Branch(self.branch)
        if self.branch is Branch.SINGULAR and self.beta <= 0.0:
            raise ValueError("singular branch requires beta > 0")
        if self.branch is Branch.REGULAR and self.beta >= 0.0:
            raise ValueError("regular branch requires beta < 0")
