"""Cone membership, kernel Harnack ratios, coercivity bounds, and certificates.

The cone is the set of nonnegative grid functions whose minimum over a fixed
subregion dominates gamma times their sup norm.  A problem instance earns a
certificate when the smallness condition 4*B*|u0| < 1 and a positive
coercivity lower bound both hold; the certificate carries explicit radii
rho1 < rho2 < rho3 at which the fixed-point map crosses the identity in norm,
verified by direct substitution.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .kernels import Grid, KernelMatrix
    from .operators import BilinearOperator, ProblemInstance

__all__ = [
    "MEMBERSHIP_TOL",
    "ConeParams",
    "InvarianceReport",
    "RadiiSelection",
    "Certificate",
    "subregion_mask",
    "cone_margin",
    "cone_membership",
    "lift_into_cone",
    "sample_cone_functions",
    "harnack_gamma",
    "cone_invariance_check",
    "coercivity_lower_bound",
    "coercivity_estimate",
    "select_radii",
    "build_certificate",
]

MEMBERSHIP_TOL = 1e-10


@dataclass(frozen=True)
class ConeParams:
    """Subinterval [lo, hi] and ratio gamma defining the cone."""

    lo: float
    hi: float
    gamma: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"need lo < hi, got [{self.lo}, {self.hi}]")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"need gamma in (0, 1], got {self.gamma}")

    @property
    def subregion(self) -> tuple[float, float]:
        return (self.lo, self.hi)


def subregion_mask(grid: Grid, lo: float, hi: float) -> np.ndarray:
    """Boolean mask of the grid nodes lying in [lo, hi] (tiny float slack)."""
    tol = 1e-12 * max(1.0, abs(lo), abs(hi))
    return (grid.nodes >= lo - tol) & (grid.nodes <= hi + tol)


def _mask_or_raise(grid: Grid, lo: float, hi: float) -> np.ndarray:
    mask = subregion_mask(grid, lo, hi)
    if not mask.any():
        raise ValueError(f"subregion [{lo}, {hi}] contains no grid nodes")
    return mask


def cone_margin(u, grid: Grid, cone: ConeParams) -> float:
    """Signed membership margin: nonnegative iff u lies in the cone exactly.

    Returns the smaller of (pointwise minimum of u) and
    (min over subregion of u) - gamma * (max of u).
    """
    u = np.asarray(u, dtype=float)
    mask = _mask_or_raise(grid, cone.lo, cone.hi)
    return float(min(u.min(), u[mask].min() - cone.gamma * u.max()))


def cone_membership(u, grid: Grid, cone: ConeParams, tol: float = MEMBERSHIP_TOL) -> bool:
    """Whether u is nonnegative and subregion-dominated up to tolerance."""
    return cone_margin(u, grid, cone) >= -tol


def lift_into_cone(u, grid: Grid, cone: ConeParams) -> np.ndarray:
    """Smallest pointwise increase of max(u, 0) that enforces cone membership.

    Subregion nodes are raised to gamma times the sup norm; the sup norm is
    unchanged because gamma <= 1.
    """
    u = np.maximum(np.asarray(u, dtype=float), 0.0)
    mask = _mask_or_raise(grid, cone.lo, cone.hi)
    floor = cone.gamma * u.max()
    lifted = u.copy()
    lifted[mask] = np.maximum(lifted[mask], floor)
    return lifted


def sample_cone_functions(grid: Grid, cone: ConeParams, n_samples: int, seed: int) -> np.ndarray:
    """Random nonnegative functions lifted into the cone, one per row."""
    rng = np.random.default_rng(seed)
    samples = rng.uniform(0.0, 1.0, size=(n_samples, grid.n))
    return np.array([lift_into_cone(row, grid, cone) for row in samples]).reshape(
        n_samples, grid.n
    )


def harnack_gamma(kernel: KernelMatrix, subregion: tuple[float, float]) -> float:
    """Largest columnwise ratio min-over-subregion / global-max of the kernel.

    This is the best gamma for which every kernel column satisfies the
    subregion lower bound, hence the best cone ratio the discrete kernel can
    certify.  Identically zero columns carry no information and are skipped;
    an all-zero kernel yields 0.0 with a warning.
    """
    lo, hi = subregion
    if lo > hi:
        raise ValueError(f"bad subregion [{lo}, {hi}]")
    grid = kernel.grid
    tol = 1e-12 * max(1.0, abs(lo), abs(hi))
    mask = (grid.nodes >= lo - tol) & (grid.nodes <= hi + tol)
    if not mask.any():
        raise ValueError(f"subregion [{lo}, {hi}] contains no grid nodes")
    col_max = kernel.values.max(axis=0)
    live = col_max > 0.0
    if not live.any():
        warnings.warn("kernel has no positive column; Harnack ratio is zero")
        return 0.0
    sub_min = kernel.values[mask][:, live].min(axis=0)
    return float(max(0.0, np.min(sub_min / col_max[live])))


@dataclass(frozen=True)
class InvarianceReport:
    """Sampled check that the bilinear image stays in the cone."""

    samples: int
    passes: int
    fails: int
    worst_margin: float

    @property
    def pass_rate(self) -> float:
        return self.passes / self.samples if self.samples else 1.0


def cone_invariance_check(
    b: BilinearOperator,
    u0,
    cone: ConeParams,
    n_samples: int,
    seed: int,
    tol: float = MEMBERSHIP_TOL,
) -> InvarianceReport:
    """Sample cone pairs (u, v) and test b(u, v) and b(u, v) + u0 for membership.

    Failures are reported, not raised.  The worst margin over all tested
    images is returned for diagnostics (negative beyond tol means a failure).
    """
    from .operators import bilinear_apply

    grid = b.kernel.grid
    u0 = np.asarray(u0, dtype=float)
    us = sample_cone_functions(grid, cone, n_samples, seed)
    vs = sample_cone_functions(grid, cone, n_samples, seed + 1)
    passes = fails = 0
    worst = math.inf
    for u, v in zip(us, vs):
        image = bilinear_apply(b, u, v)
        margin = min(cone_margin(image, grid, cone), cone_margin(image + u0, grid, cone))
        worst = min(worst, margin)
        if margin >= -tol:
            passes += 1
        else:
            fails += 1
    return InvarianceReport(n_samples, passes, fails, worst)


def _restricted_weights(b: BilinearOperator, mask: np.ndarray) -> np.ndarray:
    """Subregion quadrature weights never exceeding the operator's own weights.

    Composite trapezoid over the subregion nodes (with any radial factor the
    operator carries), clipped entrywise at the operator weights.  Keeping the
    weights dominated by the operator's preserves the coercivity bound for
    every cone function.
    """
    grid = b.kernel.grid
    nodes = grid.nodes[mask]
    trap = np.zeros(nodes.size)
    if nodes.size >= 2:
        gaps = np.diff(nodes)
        trap[:-1] += gaps / 2.0
        trap[1:] += gaps / 2.0
    radial = b.weights[mask] / np.where(grid.weights[mask] > 0, grid.weights[mask], 1.0)
    return np.minimum(trap * radial, b.weights[mask])


def coercivity_lower_bound(b: BilinearOperator, cone: ConeParams) -> float:
    """Certified lower bound for sup|b(u, u)| over cone functions of unit sup norm.

    Any cone function with sup norm 1 is at least gamma on the subregion, so
    the image at a subregion node t dominates gamma^2 times the subregion row
    sum of the weighted kernel.  Requires a nonnegative kernel (otherwise
    dropped terms could be negative) and returns 0.0 when nothing can be
    certified.
    """
    if not b.kernel.nonnegative:
        return 0.0
    grid = b.kernel.grid
    mask = subregion_mask(grid, cone.lo, cone.hi)
    if not mask.any():
        return 0.0
    sub_w = _restricted_weights(b, mask)
    row_sums = b.kernel.values[np.ix_(mask, mask)] @ sub_w
    return float(cone.gamma**2 * max(0.0, row_sums.max()))


def coercivity_estimate(
    b: BilinearOperator, cone: ConeParams, n_samples: int, seed: int
) -> float:
    """Monte-Carlo upper estimate of the coercivity infimum over the cone sphere."""
    grid = b.kernel.grid
    from .operators import bilinear_apply

    best = math.inf
    for u in sample_cone_functions(grid, cone, n_samples, seed):
        top = u.max()
        if top <= 0.0:
            continue
        u = u / top
        best = min(best, float(np.max(np.abs(bilinear_apply(b, u, u)))))
    return best


@dataclass(frozen=True)
class RadiiSelection:
    """Outcome of the radii search: feasible triple, degenerate, or infeasible."""

    status: str  # "feasible" | "degenerate" | "infeasible"
    rho1: float = 0.0
    rho2: float = 0.0
    rho3: float = 0.0
    violated: str | None = None

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"


def _expansion_radius(coercivity: float, u0_norm: float) -> float:
    # Positive root of C*rho^2 - rho - |u0| = 0, doubled; grown further until
    # the expansion inequality holds strictly.
    rho = 2.0 * (1.0 + math.sqrt(1.0 + 4.0 * coercivity * u0_norm)) / (2.0 * coercivity)
    for _ in range(200):
        if coercivity * rho**2 - rho > u0_norm:
            return rho
        rho *= 2.0
    raise ArithmeticError("expansion radius search failed to terminate")


def select_radii(norm_B: float, u0_norm: float, coercivity: float) -> RadiiSelection:
    """Radii at which compression (rho1, rho2) and expansion (rho2, rho3) hold.

    The returned triple satisfies, strictly:
      B*rho1^2 + rho1 < |u0|,   |u0| + B*rho2^2 < rho2,   C*rho3^2 - rho3 > |u0|.
    A zero inhomogeneity is degenerate (the zero function already solves the
    equation); rho2 and rho3 are still produced for the nontrivial branch.
    """
    if norm_B <= 0.0:
        return RadiiSelection("infeasible", violated="operator norm bound B is not positive")
    if coercivity <= 0.0:
        return RadiiSelection("infeasible", violated="coercivity constant C is not positive")
    rho2 = 1.0 / (2.0 * norm_B)
    if u0_norm == 0.0:
        return RadiiSelection(
            "degenerate", rho1=0.0, rho2=rho2, rho3=_expansion_radius(coercivity, 0.0)
        )
    gap = 4.0 * norm_B * u0_norm
    if gap >= 1.0:
        return RadiiSelection("infeasible", violated=f"4*B*|u0| = {gap:.6g} >= 1")
    if not u0_norm + norm_B * rho2**2 < rho2:
        return RadiiSelection(
            "infeasible", violated="|u0| + B*rho2^2 < rho2 fails at rho2 = 1/(2B)"
        )
    rho1 = u0_norm / 2.0
    for _ in range(200):
        if norm_B * rho1**2 + rho1 < u0_norm:
            break
        rho1 /= 2.0
    else:
        return RadiiSelection("infeasible", violated="no rho1 with B*rho1^2 + rho1 < |u0|")
    rho3 = _expansion_radius(coercivity, u0_norm)
    if not rho1 < rho2 < rho3:
        return RadiiSelection(
            "infeasible", violated=f"radii not ordered: {rho1}, {rho2}, {rho3}"
        )
    return RadiiSelection("feasible", rho1=rho1, rho2=rho2, rho3=rho3)


@dataclass(frozen=True)
class Certificate:
    """Machine-checkable record of the two-solution hypotheses for one instance."""

    norm_B: float
    u0_norm: float
    coercivity_C: float
    rho1: float
    rho2: float
    rho3: float
    condition_ok: bool
    coercive_ok: bool
    u0_in_cone: bool
    invariance_pass_rate: float
    degenerate: bool

    @property
    def accepted(self) -> bool:
        """Both verified hypotheses hold: smallness condition and coercivity."""
        return self.condition_ok and self.coercive_ok

    def to_dict(self) -> dict:
        return {
            "norm_B": self.norm_B,
            "u0_norm": self.u0_norm,
            "coercivity_C": self.coercivity_C,
            "rho1": self.rho1,
            "rho2": self.rho2,
            "rho3": self.rho3,
            "condition_ok": self.condition_ok,
            "coercive_ok": self.coercive_ok,
            "u0_in_cone": self.u0_in_cone,
            "invariance_pass_rate": self.invariance_pass_rate,
            "degenerate": self.degenerate,
        }


def build_certificate(p: ProblemInstance, n_samples: int = 200, seed: int = 0) -> Certificate:
    """Compute norms, coercivity, radii, and sampled cone checks for an instance.

    Never raises on a failing hypothesis; every failure is recorded in the
    returned certificate.
    """
    grid = p.b.kernel.grid
    norm_B = p.b.norm_B
    u0_norm = float(np.max(np.abs(p.u0)))
    coercivity = coercivity_lower_bound(p.b, p.cone)
    selection = select_radii(norm_B, u0_norm, coercivity)
    report = cone_invariance_check(p.b, p.u0, p.cone, n_samples, seed)
    return Certificate(
        norm_B=norm_B,
        u0_norm=u0_norm,
        coercivity_C=coercivity,
        rho1=selection.rho1,
        rho2=selection.rho2,
        rho3=selection.rho3,
        condition_ok=4.0 * norm_B * u0_norm < 1.0,
        coercive_ok=coercivity > 0.0,
        u0_in_cone=cone_membership(p.u0, grid, p.cone),
        invariance_pass_rate=report.pass_rate,
        degenerate=u0_norm == 0.0,
    )
