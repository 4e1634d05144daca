"""Closed-form reference for the scalar quadratic fixed-point equation u = a*u^2 + u0.

Used as the ground truth for every higher-dimensional solver test: on a
one-node grid with unit weight the discrete problem reduces exactly to this
equation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

__all__ = ["ScalarProblem", "RootPair", "discriminant_ok", "roots", "picard"]


@dataclass(frozen=True)
class ScalarProblem:
    """Quadratic coefficient a > 0 and nonnegative inhomogeneity u0."""

    a: float
    u0: float

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"need a > 0, got {self.a}")
        if not self.u0 >= 0:
            raise ValueError(f"need u0 >= 0, got {self.u0}")


class RootPair(NamedTuple):
    small: float
    large: float
    degenerate: bool


def discriminant_ok(p: ScalarProblem) -> bool:
    """Strict smallness condition 4*a*u0 < 1 guaranteeing two positive roots."""
    return 4.0 * p.a * p.u0 < 1.0


def roots(p: ScalarProblem) -> RootPair | None:
    """Both fixed points of u = a*u^2 + u0, or None when no real root exists.

    The small root is computed from the product of roots (u- * u+ = u0/a) to
    avoid cancellation when 4*a*u0 is close to 1.  At 4*a*u0 == 1 the double
    root is returned twice with the degenerate flag set.
    """
    disc = 1.0 - 4.0 * p.a * p.u0
    if disc < 0.0:
        return None
    sqrt_disc = math.sqrt(disc)
    large = (1.0 + sqrt_disc) / (2.0 * p.a)
    small = 2.0 * p.u0 / (1.0 + sqrt_disc)
    return RootPair(small, large, disc == 0.0)


def picard(p: ScalarProblem, tol: float, max_iter: int = 10_000) -> float:
    """Iterate u <- a*u^2 + u0 from zero until the update is below tol.

    Converges monotonically to the small root whenever 4*a*u0 < 1.
    """
    if not tol > 0:
        raise ValueError(f"need tol > 0, got {tol}")
    u = 0.0
    for _ in range(max_iter):
        nxt = p.a * u * u + p.u0
        if abs(nxt - u) < tol:
            return nxt
        u = nxt
    raise ArithmeticError(
        f"no convergence after {max_iter} iterations (last iterate {u:.6g})"
    )
