"""Discrete Hammerstein bilinear form, its norm, and fixed-point residuals.

The bilinear form (b(u, v))(t) = integral of G(t, s) u(s) v(s) ds is
discretized by quadrature at the grid nodes.  On an annulus the volume
element contributes a radial factor r^(d-1), folded into the operator
weights at assembly time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cones import ConeParams
from .kernels import AnnulusRadial, Grid, KernelMatrix

__all__ = [
    "BilinearOperator",
    "ProblemInstance",
    "effective_weights",
    "assemble",
    "bilinear_apply",
    "compute_u0",
    "build_problem",
    "residual",
]


def effective_weights(kernel: KernelMatrix, grid: Grid) -> np.ndarray:
    """Quadrature weights with the radial volume factor folded in where needed."""
    weights = grid.weights
    if isinstance(kernel.spec, AnnulusRadial):
        weights = weights * grid.nodes ** (kernel.spec.dim - 1)
    return weights


@dataclass(frozen=True)
class BilinearOperator:
    """Weighted kernel with its sup-norm bound B; immutable after assembly."""

    kernel: KernelMatrix
    weights: np.ndarray
    norm_B: float

    def __post_init__(self):
        weights = np.array(self.weights, dtype=float)
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)

    @property
    def grid(self) -> Grid:
        return self.kernel.grid


def assemble(kernel: KernelMatrix, grid: Grid) -> BilinearOperator:
    """Build the operator and its norm bound (max weighted absolute row sum).

    For nonnegative kernels the bound is attained at the constant-one pair, so
    it is the exact operator norm on the cone; in general it is an upper bound.
    """
    if kernel.grid.n != grid.n or not np.array_equal(kernel.grid.nodes, grid.nodes):
        raise ValueError("kernel grid does not match the assembly grid")
    weights = effective_weights(kernel, grid)
    norm_B = float(np.max(np.abs(kernel.values) @ weights)) if grid.n else 0.0
    return BilinearOperator(kernel, weights, norm_B)


def _as_grid_function(b: BilinearOperator, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (b.grid.n,):
        raise ValueError(f"expected a grid function of length {b.grid.n}, got shape {u.shape}")
    return u


def bilinear_apply(b: BilinearOperator, u, v) -> np.ndarray:
    """Evaluate b(u, v) at every node: kernel row dotted with w * u * v."""
    u = _as_grid_function(b, u)
    v = _as_grid_function(b, v)
    return b.kernel.values @ (b.weights * u * v)


def compute_u0(kernel: KernelMatrix, grid: Grid, f) -> np.ndarray:
    """Image of the source term under the weighted kernel."""
    f = np.asarray(f, dtype=float)
    if f.shape != (grid.n,):
        raise ValueError(f"expected a grid function of length {grid.n}, got shape {f.shape}")
    weights = effective_weights(kernel, grid)
    return kernel.values @ (weights * f)


@dataclass(frozen=True)
class ProblemInstance:
    """Assembled fixed-point problem u = b(u, u) + u0 with its cone."""

    b: BilinearOperator
    u0: np.ndarray
    f: np.ndarray
    cone: ConeParams

    def __post_init__(self):
        u0 = np.array(self.u0, dtype=float)
        f = np.array(self.f, dtype=float)
        u0.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "u0", u0)
        object.__setattr__(self, "f", f)

    @property
    def grid(self) -> Grid:
        return self.b.grid


def build_problem(kernel: KernelMatrix, grid: Grid, f, cone: ConeParams) -> ProblemInstance:
    """Assemble the operator and inhomogeneity from a kernel and source term."""
    b = assemble(kernel, grid)
    u0 = compute_u0(kernel, grid, f)
    return ProblemInstance(b, u0, np.asarray(f, dtype=float), cone)


def residual(p: ProblemInstance, u) -> float:
    """Sup-norm defect of the fixed-point equation at u."""
    u = _as_grid_function(p.b, u)
    return float(np.max(np.abs(u - bilinear_apply(p.b, u, u) - p.u0)))
