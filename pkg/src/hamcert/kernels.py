"""Quadrature grids and discretized Green kernels.

Two kernels are constructed in closed form: the two-point kernel on the unit
interval with zero boundary values, and the radially reduced kernel of
-(r^(d-1) u')' on an annulus (d >= 2, zero boundary values).  Arbitrary
kernels can be loaded from a simple CSV format with a one-line grid header.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .serialize import format_float, write_text_atomic

__all__ = [
    "Grid",
    "IntervalDirichlet",
    "AnnulusRadial",
    "FromFile",
    "KernelSpec",
    "KernelMatrix",
    "KernelFormatError",
    "make_grid",
    "interval_green",
    "annulus_radial_green",
    "kernel_matrix",
    "load_kernel",
    "save_kernel",
    "fd_delta_defect",
]

SYMMETRY_TOL = 1e-10
NONNEG_TOL = 1e-12

QUADRATURE_RULES = ("trapezoid", "simpson")


class KernelFormatError(ValueError):
    """Raised when a kernel file does not match the documented format."""


@dataclass(frozen=True)
class Grid:
    """Strictly increasing nodes with nonnegative quadrature weights."""

    nodes: np.ndarray
    weights: np.ndarray
    rule: str = "custom"

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        weights = np.array(self.weights, dtype=float)
        if nodes.ndim != 1 or weights.shape != nodes.shape:
            raise ValueError("nodes and weights must be 1-D arrays of equal length")
        if nodes.size == 0:
            raise ValueError("grid needs at least one node")
        if nodes.size > 1 and not np.all(np.diff(nodes) > 0):
            raise ValueError("grid nodes must be strictly increasing")
        if np.any(weights < 0):
            raise ValueError("quadrature weights must be nonnegative")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def lo(self) -> float:
        return float(self.nodes[0])

    @property
    def hi(self) -> float:
        return float(self.nodes[-1])

    def spacing(self) -> float:
        """Node spacing of a uniform grid; raises when spacing varies."""
        if self.n < 2:
            raise ValueError("spacing needs at least two nodes")
        steps = np.diff(self.nodes)
        h = float(steps[0])
        if not np.allclose(steps, h, rtol=1e-12, atol=0.0):
            raise ValueError("grid is not uniform")
        return h


def make_grid(n: int, lo: float, hi: float, rule: str = "trapezoid") -> Grid:
    """Uniform grid on [lo, hi] with composite trapezoid or Simpson weights."""
    if n < 2:
        raise ValueError(f"need at least 2 nodes, got {n}")
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    if rule not in QUADRATURE_RULES:
        raise ValueError(f"unknown quadrature rule {rule!r}")
    nodes = np.linspace(lo, hi, n)
    h = (hi - lo) / (n - 1)
    if rule == "trapezoid":
        weights = np.full(n, h)
        weights[0] = weights[-1] = h / 2
    else:
        if n % 2 == 0:
            raise ValueError("simpson rule needs an odd number of nodes")
        weights = np.full(n, 2 * h / 3)
        weights[1::2] = 4 * h / 3
        weights[0] = weights[-1] = h / 3
    return Grid(nodes, weights, rule)


@dataclass(frozen=True)
class IntervalDirichlet:
    """Kernel of -u'' on [0, 1] with u(0) = u(1) = 0."""


@dataclass(frozen=True)
class AnnulusRadial:
    """Kernel of the radial operator -(r^(d-1) u')' on [inner, outer], zero at both ends."""

    inner: float
    outer: float
    dim: int

    def __post_init__(self):
        if not 0 < self.inner < self.outer:
            raise ValueError(f"need 0 < inner < outer, got ({self.inner}, {self.outer})")
        if self.dim < 2:
            raise ValueError(f"need dim >= 2, got {self.dim}")


@dataclass(frozen=True)
class FromFile:
    """Kernel loaded from a CSV file (see load_kernel for the format)."""

    path: str


KernelSpec = Union[IntervalDirichlet, AnnulusRadial, FromFile]


@dataclass(frozen=True)
class KernelMatrix:
    """Kernel sampled at node pairs, with symmetry/nonnegativity flags."""

    values: np.ndarray
    grid: Grid
    symmetric: bool
    nonnegative: bool
    spec: KernelSpec | None = None

    @classmethod
    def build(cls, values, grid: Grid, spec: KernelSpec | None = None) -> "KernelMatrix":
        """Construct from raw values, computing the flags by scanning entries."""
        values = np.array(values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValueError(f"kernel matrix must be square, got shape {values.shape}")
        if values.shape[0] != grid.n:
            raise ValueError(
                f"kernel size {values.shape[0]} does not match grid with {grid.n} nodes"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("kernel matrix contains non-finite entries")
        values.setflags(write=False)
        symmetric = bool(np.max(np.abs(values - values.T), initial=0.0) <= SYMMETRY_TOL)
        nonnegative = bool(np.min(values, initial=0.0) >= -NONNEG_TOL)
        return cls(values, grid, symmetric, nonnegative, spec)


def interval_green(t: float, s: float) -> float:
    """Unit-interval kernel value; symmetric, zero when t or s hits the boundary."""
    if not (0.0 <= t <= 1.0 and 0.0 <= s <= 1.0):
        raise ValueError(f"arguments ({t}, {s}) outside the unit square")
    return t * (1.0 - s) if t <= s else s * (1.0 - t)


def _phi(r, dim: int):
    # Increasing solution of (r^(d-1) phi')' = 0; phi' = r^(1-d) in every dimension.
    if dim == 2:
        return np.log(r)
    return r ** (2.0 - dim) / (2.0 - dim)


def _phi_prime(r, dim: int):
    return r ** (1.0 - dim)


def _annulus_factors(spec: AnnulusRadial):
    """Homogeneous solutions vanishing at each endpoint and the Wronskian constant."""
    a, b, d = spec.inner, spec.outer, spec.dim

    def u1(r):
        return _phi(r, d) - _phi(a, d)

    def u2(r):
        return _phi(b, d) - _phi(r, d)

    # Weighted Wronskian p*(u1*u2' - u1'*u2); constant in r, evaluated at the midpoint.
    m = 0.5 * (a + b)
    pw = m ** (d - 1.0) * (u1(m) * (-_phi_prime(m, d)) - _phi_prime(m, d) * u2(m))
    return u1, u2, -pw


def annulus_radial_green(r: float, rho: float, spec: AnnulusRadial) -> float:
    """Radial annulus kernel value; symmetric, zero at inner and outer radii."""
    a, b = spec.inner, spec.outer
    if not (a <= r <= b and a <= rho <= b):
        raise ValueError(f"arguments ({r}, {rho}) outside [{a}, {b}]")
    u1, u2, denom = _annulus_factors(spec)
    return float(u1(min(r, rho)) * u2(max(r, rho)) / denom)


def _check_domain(grid: Grid, lo: float, hi: float) -> None:
    scale = max(1.0, abs(lo), abs(hi))
    if abs(grid.lo - lo) > 1e-12 * scale or abs(grid.hi - hi) > 1e-12 * scale:
        raise ValueError(
            f"grid spans [{grid.lo}, {grid.hi}] but kernel domain is [{lo}, {hi}]"
        )


def kernel_matrix(spec: KernelSpec, grid: Grid) -> KernelMatrix:
    """Evaluate the kernel at all node pairs of the grid."""
    if isinstance(spec, IntervalDirichlet):
        _check_domain(grid, 0.0, 1.0)
        t = grid.nodes[:, None]
        s = grid.nodes[None, :]
        values = np.where(t <= s, t * (1.0 - s), s * (1.0 - t))
        return KernelMatrix.build(values, grid, spec)
    if isinstance(spec, AnnulusRadial):
        _check_domain(grid, spec.inner, spec.outer)
        u1, u2, denom = _annulus_factors(spec)
        lo_r = np.minimum(grid.nodes[:, None], grid.nodes[None, :])
        hi_r = np.maximum(grid.nodes[:, None], grid.nodes[None, :])
        values = u1(lo_r) * u2(hi_r) / denom
        return KernelMatrix.build(values, grid, spec)
    if isinstance(spec, FromFile):
        kernel = load_kernel(spec.path)
        if kernel.grid.n != grid.n or not np.allclose(
            kernel.grid.nodes, grid.nodes, rtol=0.0, atol=1e-9
        ):
            raise ValueError(f"grid in {spec.path} does not match the requested grid")
        return kernel
    raise TypeError(f"unknown kernel spec {spec!r}")


_HEADER_RE = re.compile(
    r"^#\s*grid:\s*lo=(?P<lo>\S+)\s+hi=(?P<hi>\S+)\s+n=(?P<n>\d+)\s+rule=(?P<rule>\S+)\s*$"
)


def load_kernel(path) -> KernelMatrix:
    """Load a kernel file: a `# grid: ...` header line, then an n-by-n CSV matrix."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as handle:
        header = handle.readline()
        match = _HEADER_RE.match(header.strip())
        if match is None:
            raise KernelFormatError(f"{path}: malformed grid header {header.strip()!r}")
        try:
            lo = float(match["lo"])
            hi = float(match["hi"])
        except ValueError:
            raise KernelFormatError(f"{path}: non-numeric grid bounds in header") from None
        n = int(match["n"])
        rule = match["rule"]
        try:
            grid = make_grid(n, lo, hi, rule)
        except ValueError as exc:
            raise KernelFormatError(f"{path}: bad grid header: {exc}") from None
        rows = []
        for lineno, line in enumerate(handle, start=2):
            if not line.strip():
                continue
            parts = line.split(",")
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                raise KernelFormatError(f"{path}:{lineno}: non-numeric matrix entry") from None
    if len(rows) != n or any(len(row) != n for row in rows):
        raise KernelFormatError(
            f"{path}: expected a {n}x{n} matrix, got {len(rows)} rows of lengths "
            f"{sorted({len(row) for row in rows})}"
        )
    values = np.asarray(rows, dtype=float)
    if np.any(np.isnan(values)):
        raise KernelFormatError(f"{path}: matrix contains NaN entries")
    if not np.all(np.isfinite(values)):
        raise KernelFormatError(f"{path}: matrix contains non-finite entries")
    return KernelMatrix.build(values, grid, FromFile(str(path)))


def save_kernel(kernel: KernelMatrix, path) -> None:
    """Write a kernel in the format accepted by load_kernel."""
    grid = kernel.grid
    if grid.rule not in QUADRATURE_RULES:
        raise ValueError(f"cannot save kernel on a grid with rule {grid.rule!r}")
    lines = [
        f"# grid: lo={format_float(grid.lo)} hi={format_float(grid.hi)} "
        f"n={grid.n} rule={grid.rule}"
    ]
    for row in kernel.values:
        lines.append(",".join(format_float(v) for v in row))
    write_text_atomic(path, "\n".join(lines) + "\n")


def fd_delta_defect(kernel: KernelMatrix) -> float:
    """Deviation of the difference-operator image of each column from a discrete delta.

    Applies the conservative second-order difference approximation of
    -(r^e u')' (e = dim-1 on an annulus, e = 0 on the interval) to each
    interior kernel column, scales by the node spacing h, and returns the
    maximum deviation from the Kronecker delta over interior node pairs.
    Shrinks like O(h) for a correctly constructed kernel.
    """
    if isinstance(kernel.spec, AnnulusRadial):
        exponent = kernel.spec.dim - 1.0
    elif isinstance(kernel.spec, IntervalDirichlet):
        exponent = 0.0
    else:
        raise ValueError("defect check requires an interval or annulus kernel")
    grid = kernel.grid
    if grid.n < 3:
        raise ValueError("defect check needs at least 3 nodes")
    h = grid.spacing()
    r = grid.nodes
    p_plus = ((r[1:-1] + r[2:]) / 2.0) ** exponent
    p_minus = ((r[:-2] + r[1:-1]) / 2.0) ** exponent
    v = kernel.values
    image = -(
        p_plus[:, None] * (v[2:, :] - v[1:-1, :])
        - p_minus[:, None] * (v[1:-1, :] - v[:-2, :])
    ) / h**2
    scaled = h * image[:, 1:-1]
    target = np.eye(grid.n)[1:-1, 1:-1]
    return float(np.max(np.abs(scaled - target)))
