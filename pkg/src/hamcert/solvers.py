"""Dual solvers for u = b(u, u) + u0: monotone Picard for the small branch,
Newton with deflation for the large branch, and a combined driver that
validates both branches against a certificate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cones import Certificate, cone_membership, lift_into_cone
from .operators import ProblemInstance, bilinear_apply, residual

__all__ = [
    "NonConvergenceError",
    "SingularJacobianError",
    "Solution",
    "TwoBranchResult",
    "picard",
    "newton",
    "deflated_newton",
    "find_two",
]


class NonConvergenceError(ArithmeticError):
    """Iteration exhausted its budget; carries the best iterate seen."""

    def __init__(self, message: str, best=None, iterations: int = 0):
        super().__init__(message)
        self.best = best
        self.iterations = iterations


class SingularJacobianError(ArithmeticError):
    """Linear solve produced no usable Newton step."""

    def __init__(self, message: str, rcond: float = 0.0):
        super().__init__(message)
        self.rcond = rcond


@dataclass(frozen=True)
class Solution:
    """One computed branch with its independently recomputed residual."""

    u: np.ndarray
    branch: str  # "small" | "large"
    residual: float
    sup_norm: float
    in_cone: bool
    iterations: int

    def __post_init__(self):
        u = np.array(self.u, dtype=float)
        u.setflags(write=False)
        object.__setattr__(self, "u", u)

    def summary(self) -> dict:
        return {
            "branch": self.branch,
            "sup_norm": self.sup_norm,
            "residual": self.residual,
            "in_cone": self.in_cone,
            "iterations": self.iterations,
        }


def _default_rho2(p: ProblemInstance) -> float:
    return 1.0 / (2.0 * p.b.norm_B) if p.b.norm_B > 0 else math.inf


def _make_solution(
    p: ProblemInstance,
    u: np.ndarray,
    iterations: int,
    branch: str | None = None,
    rho2: float | None = None,
) -> Solution:
    sup = float(np.max(np.abs(u)))
    if branch is None:
        split = rho2 if rho2 is not None else _default_rho2(p)
        branch = "small" if sup < split else "large"
    return Solution(
        u=u,
        branch=branch,
        residual=residual(p, u),
        sup_norm=sup,
        in_cone=cone_membership(u, p.grid, p.cone),
        iterations=iterations,
    )


def picard(p: ProblemInstance, tol: float = 1e-10, max_iter: int = 500) -> Solution:
    """Fixed-point iteration u <- b(u, u) + u0 from zero.

    For a nonnegative kernel and source the iterates increase monotonically,
    so the limit is the minimal fixed point (the small branch).  Divergence is
    expected when 4*B*|u0| >= 1.
    """
    if not tol > 0:
        raise ValueError(f"need tol > 0, got {tol}")
    u = np.zeros(p.grid.n)
    for k in range(max_iter):
        nxt = bilinear_apply(p.b, u, u) + p.u0
        if not np.all(np.isfinite(nxt)):
            raise NonConvergenceError(
                f"iterates diverged after {k + 1} iterations", best=u, iterations=k + 1
            )
        if float(np.max(np.abs(nxt - u))) < tol:
            return _make_solution(p, nxt, k + 1, branch="small")
        u = nxt
    raise NonConvergenceError(
        f"no convergence after {max_iter} iterations", best=u, iterations=max_iter
    )


def _newton_system(p: ProblemInstance, u: np.ndarray):
    # F(u) = u - b(u, u) - u0; by symmetry of the form the Jacobian is
    # I - 2 * G * diag(w * u).
    F = u - bilinear_apply(p.b, u, u) - p.u0
    J = np.eye(u.size) - 2.0 * p.b.kernel.values * (p.b.weights * u)[None, :]
    return F, J


def _solve_step(J: np.ndarray, F: np.ndarray) -> np.ndarray:
    try:
        step = np.linalg.solve(J, F)
    except np.linalg.LinAlgError:
        raise SingularJacobianError("Jacobian is singular", rcond=0.0) from None
    defect = float(np.max(np.abs(J @ step - F)))
    if not np.all(np.isfinite(step)) or defect > 1e-6 * (1.0 + float(np.max(np.abs(F)))):
        rcond = 1.0 / float(np.linalg.cond(J, 1))
        raise SingularJacobianError(
            f"Jacobian is numerically singular (rcond ~ {rcond:.2e})", rcond=rcond
        )
    return step


def newton(
    p: ProblemInstance,
    init,
    tol: float = 1e-10,
    max_iter: int = 50,
    rho2: float | None = None,
) -> Solution:
    """Newton iteration on u - b(u, u) - u0 = 0 with the exact dense Jacobian.

    Stops when both the step and the recomputed residual fall below tol.  The
    branch label is assigned by comparing the sup norm against rho2 (defaults
    to 1/(2B)).
    """
    if not tol > 0:
        raise ValueError(f"need tol > 0, got {tol}")
    u = np.array(init, dtype=float)
    if u.shape != (p.grid.n,):
        raise ValueError(f"init must be a grid function of length {p.grid.n}")
    for k in range(max_iter):
        F, J = _newton_system(p, u)
        step = _solve_step(J, F)
        u = u - step
        if float(np.max(np.abs(step))) < tol and residual(p, u) < tol:
            return _make_solution(p, u, k + 1, rho2=rho2)
    raise NonConvergenceError(
        f"no convergence after {max_iter} iterations", best=u, iterations=max_iter
    )


def deflated_newton(
    p: ProblemInstance,
    known: list[Solution],
    init,
    tol: float = 1e-10,
    max_iter: int = 100,
    rho2: float | None = None,
) -> Solution:
    """Newton iteration repelled from already-known solutions.

    The residual map is multiplied by prod_k (1/\\|u - u_k\\|^2 + 1) in the sup
    norm; the resulting Newton step is the plain step rescaled by 1/(1 - tau)
    where tau collects the deflation gradient along the step, so each
    iteration costs one linear solve.  The returned solution satisfies the
    original equation (the residual is recomputed without the deflation
    factor) and differs from every known solution by more than 10*tol.
    """
    if not tol > 0:
        raise ValueError(f"need tol > 0, got {tol}")
    anchors = [np.asarray(s.u, dtype=float) for s in known]
    u = np.array(init, dtype=float)
    if u.shape != (p.grid.n,):
        raise ValueError(f"init must be a grid function of length {p.grid.n}")
    for k in range(max_iter):
        F, J = _newton_system(p, u)
        step = -_solve_step(J, F)
        tau = 0.0
        for anchor in anchors:
            gap = u - anchor
            idx = int(np.argmax(np.abs(gap)))
            dist = abs(gap[idx])
            if dist == 0.0:
                raise NonConvergenceError(
                    "iterate coincides with a known solution", best=u, iterations=k
                )
            # factor eta = 1 + 1/dist^2; d(dist)/du = sign(gap) at the peak node
            grad_dot_step = (-2.0 / dist**3) * math.copysign(1.0, gap[idx]) * step[idx]
            tau += grad_dot_step / (1.0 + 1.0 / dist**2)
        if abs(1.0 - tau) < 1e-14:
            raise NonConvergenceError("deflation stalled the step", best=u, iterations=k)
        scaled = step / (1.0 - tau)
        u = u + scaled
        if float(np.max(np.abs(scaled))) < tol and residual(p, u) < tol:
            for anchor in anchors:
                if float(np.max(np.abs(u - anchor))) <= 10.0 * tol:
                    raise NonConvergenceError(
                        "reconverged to a known solution", best=u, iterations=k + 1
                    )
            return _make_solution(p, u, k + 1, rho2=rho2)
    raise NonConvergenceError(
        f"no convergence after {max_iter} iterations", best=u, iterations=max_iter
    )


@dataclass(frozen=True)
class TwoBranchResult:
    """Both branches (when found) plus certificate-implied checks and diagnostics."""

    small: Solution | None
    large: Solution | None
    certified: bool
    ok: bool
    diagnostics: tuple[str, ...]

    @property
    def complete(self) -> bool:
        return self.small is not None and self.large is not None


def find_two(
    p: ProblemInstance,
    cert: Certificate,
    tol: float = 1e-10,
    max_iter: int = 500,
) -> TwoBranchResult:
    """Find the small branch by Picard and the large branch by (deflated) Newton.

    The large branch is sought from constant initial heights rho2, 2*rho2, and
    rho3, each lifted into the cone, with deflation away from the small branch
    tried first.  Under an accepted certificate the result is validated: both
    residuals below tol, both solutions in the cone, and sup norms strictly
    straddling rho2.  Failures are reported as diagnostics, never raised.
    """
    diagnostics: list[str] = []
    certified = cert.accepted
    n = p.grid.n

    if cert.degenerate:
        zero = np.zeros(n)
        small = _make_solution(p, zero, 0, branch="small")
    else:
        try:
            small = picard(p, tol, max_iter)
        except NonConvergenceError as exc:
            small = None
            diagnostics.append(f"small branch: {exc}")

    rho2 = cert.rho2 if cert.rho2 > 0 else _default_rho2(p)
    known = [small] if small is not None else []
    ladder: list[tuple[str, float]] = [
        ("deflated", rho2),
        ("deflated", 2.0 * rho2),
        ("newton", 2.0 * rho2),
    ]
    if cert.rho3 > 0:
        ladder.append(("newton", cert.rho3))

    large = None
    attempts: list[str] = []
    for method, height in ladder:
        if not math.isfinite(height):
            continue
        init = lift_into_cone(np.full(n, height), p.grid, p.cone)
        try:
            if method == "deflated" and known:
                candidate = deflated_newton(p, known, init, tol, max_iter, rho2=rho2)
            else:
                candidate = newton(p, init, tol, max_iter, rho2=rho2)
        except (NonConvergenceError, SingularJacobianError) as exc:
            attempts.append(f"{method} from height {height:.6g}: {exc}")
            continue
        if small is not None and float(np.max(np.abs(candidate.u - small.u))) <= 10.0 * tol:
            attempts.append(f"{method} from height {height:.6g}: found the small branch again")
            continue
        if certified and not (candidate.in_cone and candidate.sup_norm > rho2):
            attempts.append(
                f"{method} from height {height:.6g}: solution outside the certified region"
            )
            continue
        large = candidate
        break
    if large is None:
        diagnostics.append("large branch not found: " + "; ".join(attempts) if attempts
                           else "large branch not found")

    ok = small is not None and large is not None
    if certified and ok:
        if small.residual >= tol or large.residual >= tol:
            diagnostics.append("residual tolerance violated")
            ok = False
        if not (small.in_cone and large.in_cone):
            diagnostics.append("a computed solution left the cone")
            ok = False
        if not (small.sup_norm < rho2 < large.sup_norm):
            diagnostics.append(
                f"sup norms {small.sup_norm:.6g}, {large.sup_norm:.6g} do not straddle "
                f"rho2 = {rho2:.6g}"
            )
            ok = False
    return TwoBranchResult(small, large, certified, ok, tuple(diagnostics))
