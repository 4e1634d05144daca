"""Batch command-line front end.

Subcommands: `scalar` (closed-form reference), `certify` (build and write the
existence certificate), `solve` (certify, then compute both branches), and
`kernel-check` (kernel symmetry/positivity, Harnack ratio, cone invariance).

Exit codes: 0 success, 1 bad arguments/config/files, 2 scalar condition
failed, 3 certificate rejected, 4 partial or uncertified solve, 5 kernel
check failed.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import scalar as scalar_mod
from .cones import ConeParams, cone_invariance_check, harnack_gamma
from .kernels import (
    AnnulusRadial,
    FromFile,
    IntervalDirichlet,
    KernelFormatError,
    KernelSpec,
    fd_delta_defect,
    kernel_matrix,
    load_kernel,
    make_grid,
)
from .operators import build_problem
from .cones import build_certificate
from .solvers import find_two
from .serialize import (
    format_float,
    read_grid_function_csv,
    to_json_text,
    write_grid_function_csv,
    write_text_atomic,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NO_ROOTS = 2
EXIT_CERT_FAILED = 3
EXIT_PARTIAL = 4
EXIT_KERNEL_FAILED = 5

INVARIANCE_SAMPLES = 200
KERNEL_CHECK_SAMPLES = 500


class UsageError(Exception):
    """Invalid flags, config values, or input files."""


@dataclass
class RunConfig:
    """Flat run configuration; JSON config keys match these field names."""

    problem: str = "interval"
    source_const: float | None = None
    source_file: str | None = None
    grid_n: int = 201
    rule: str = "trapezoid"
    cone_lo: float | None = None
    cone_hi: float | None = None
    tol: float = 1e-10
    max_iter: int = 500
    seed: int = 0
    output_dir: str = "."


_CONFIG_KEYS = {f.name for f in fields(RunConfig)}

_ANNULUS_RE = re.compile(r"^annulus\(\s*([^,()]+)\s*,\s*([^,()]+)\s*,\s*([^,()]+)\s*\)$")
_FILE_RE = re.compile(r"^kernel-file\(\s*(.+?)\s*\)$")


def parse_problem(text: str) -> KernelSpec:
    """Parse `interval`, `annulus(inner,outer,dim)`, or `kernel-file(path)`."""
    text = text.strip()
    if text == "interval":
        return IntervalDirichlet()
    match = _ANNULUS_RE.match(text)
    if match:
        try:
            inner, outer = float(match[1]), float(match[2])
            dim = int(match[3])
        except ValueError:
            raise UsageError(f"bad annulus parameters in {text!r}") from None
        try:
            return AnnulusRadial(inner, outer, dim)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    match = _FILE_RE.match(text)
    if match:
        return FromFile(match[1])
    raise UsageError(
        f"cannot parse problem {text!r}; expected interval, "
        "annulus(inner,outer,dim), or kernel-file(path)"
    )


def load_config(args) -> RunConfig:
    """Defaults, overlaid by the config file, overlaid by explicit CLI flags."""
    config = RunConfig()
    if getattr(args, "config", None):
        path = Path(args.config)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError(f"config {path} must be a JSON object")
        unknown = set(data) - _CONFIG_KEYS
        if unknown:
            raise UsageError(f"config {path} has unknown keys: {sorted(unknown)}")
        for key, value in data.items():
            setattr(config, key, value)
    overrides = {
        "problem": args.problem,
        "source_const": args.source_const,
        "source_file": args.source_file,
        "grid_n": args.n,
        "rule": args.rule,
        "cone_lo": args.cone_lo,
        "cone_hi": args.cone_hi,
        "tol": args.tol,
        "max_iter": args.max_iter,
        "seed": args.seed,
        "output_dir": args.out,
    }
    for key, value in overrides.items():
        if value is not None:
            setattr(config, key, value)
    _validate_config(config)
    return config


def _validate_config(config: RunConfig) -> None:
    if config.grid_n < 3:
        raise UsageError(f"grid_n must be >= 3, got {config.grid_n}")
    if not config.tol > 0:
        raise UsageError(f"tol must be positive, got {config.tol}")
    if config.max_iter < 1:
        raise UsageError(f"max_iter must be >= 1, got {config.max_iter}")
    if config.source_const is not None and config.source_file is not None:
        raise UsageError("source_const and source_file are mutually exclusive")
    if (config.cone_lo is None) != (config.cone_hi is None):
        raise UsageError("cone_lo and cone_hi must be given together")


@dataclass
class BuiltProblem:
    spec: KernelSpec
    grid: object
    kernel: object
    cone: ConeParams
    gamma: float
    problem: object


def _build(config: RunConfig) -> BuiltProblem:
    spec = parse_problem(config.problem)
    try:
        if isinstance(spec, FromFile):
            kernel = load_kernel(spec.path)
            grid = kernel.grid
        else:
            if isinstance(spec, IntervalDirichlet):
                lo, hi = 0.0, 1.0
            else:
                lo, hi = spec.inner, spec.outer
            grid = make_grid(config.grid_n, lo, hi, config.rule)
            kernel = kernel_matrix(spec, grid)
    except (OSError, KernelFormatError, ValueError) as exc:
        raise UsageError(str(exc)) from None

    if config.cone_lo is None:
        length = grid.hi - grid.lo
        cone_lo = grid.lo + 0.25 * length
        cone_hi = grid.lo + 0.75 * length
    else:
        cone_lo, cone_hi = config.cone_lo, config.cone_hi
    if not grid.lo < cone_lo < cone_hi < grid.hi:
        raise UsageError(
            f"cone subregion [{cone_lo}, {cone_hi}] must lie strictly inside "
            f"the domain [{grid.lo}, {grid.hi}]"
        )
    gamma = harnack_gamma(kernel, (cone_lo, cone_hi))
    # gamma <= 0 means the kernel cannot certify any cone ratio; fall back to
    # the strictest cone so nothing downstream passes spuriously.
    cone = ConeParams(cone_lo, cone_hi, min(gamma, 1.0) if gamma > 0 else 1.0)

    if config.source_file is not None:
        try:
            nodes, values = read_grid_function_csv(config.source_file)
        except (OSError, ValueError) as exc:
            raise UsageError(str(exc)) from None
        if nodes.size != grid.n or not np.allclose(nodes, grid.nodes, rtol=0, atol=1e-9):
            raise UsageError(f"source file nodes do not match the {grid.n}-node grid")
        f = values
    else:
        f = np.full(grid.n, 1.0 if config.source_const is None else config.source_const)
    if not np.all(np.isfinite(f)):
        raise UsageError("source term contains non-finite values")

    problem = build_problem(kernel, grid, f, cone)
    return BuiltProblem(spec, grid, kernel, cone, gamma, problem)


def _out_dir(config: RunConfig) -> Path:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_scalar(args) -> int:
    if args.a is None or args.u0 is None:
        raise UsageError("scalar requires --a and --u0")
    try:
        problem = scalar_mod.ScalarProblem(args.a, args.u0)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    product = 4.0 * problem.a * problem.u0
    ok = scalar_mod.discriminant_ok(problem)
    print(f"condition 4*a*u0 = {format_float(product)} ({'<' if ok else '>='} 1)")
    pair = scalar_mod.roots(problem)
    if pair is None:
        print("no real roots")
    else:
        print(f"small root = {format_float(pair.small)}")
        print(f"large root = {format_float(pair.large)}")
        if pair.degenerate:
            print("roots are a degenerate double root")
    if ok:
        value = scalar_mod.picard(problem, tol=args.tol if args.tol else 1e-12)
        print(f"picard from 0 = {format_float(value)}")
        return EXIT_OK
    print("picard skipped (condition fails)")
    return EXIT_NO_ROOTS


def cmd_certify(args) -> int:
    config = load_config(args)
    built = _build(config)
    cert = build_certificate(built.problem, n_samples=INVARIANCE_SAMPLES, seed=config.seed)
    out = _out_dir(config)
    write_text_atomic(out / "certificate.json", to_json_text(cert.to_dict()))
    for key, value in cert.to_dict().items():
        text = format_float(value) if isinstance(value, float) else str(value)
        print(f"{key} = {text}")
    print(f"certificate {'ACCEPTED' if cert.accepted else 'REJECTED'}")
    return EXIT_OK if cert.accepted else EXIT_CERT_FAILED


def cmd_solve(args) -> int:
    config = load_config(args)
    built = _build(config)
    cert = build_certificate(built.problem, n_samples=INVARIANCE_SAMPLES, seed=config.seed)
    result = find_two(built.problem, cert, tol=config.tol, max_iter=config.max_iter)
    out = _out_dir(config)
    write_text_atomic(out / "certificate.json", to_json_text(cert.to_dict()))
    if result.small is not None:
        write_grid_function_csv(out / "small.csv", built.grid.nodes, result.small.u)
    if result.large is not None:
        write_grid_function_csv(out / "large.csv", built.grid.nodes, result.large.u)
    summary = {
        "certified": result.certified,
        "ok": result.ok,
        "small": result.small.summary() if result.small is not None else None,
        "large": result.large.summary() if result.large is not None else None,
        "diagnostics": list(result.diagnostics),
    }
    write_text_atomic(out / "summary.json", to_json_text(summary))
    for branch, solution in (("small", result.small), ("large", result.large)):
        if solution is None:
            print(f"{branch} branch: not found")
        else:
            print(
                f"{branch} branch: sup_norm = {format_float(solution.sup_norm)}, "
                f"residual = {format_float(solution.residual)}, "
                f"in_cone = {solution.in_cone}, iterations = {solution.iterations}"
            )
    for note in result.diagnostics:
        print(f"diagnostic: {note}")
    if result.certified and result.ok:
        print("solve COMPLETE (certified)")
        return EXIT_OK
    print("solve PARTIAL or UNCERTIFIED")
    return EXIT_PARTIAL


def cmd_kernel_check(args) -> int:
    config = load_config(args)
    built = _build(config)
    kernel = built.kernel
    report = cone_invariance_check(
        built.problem.b,
        built.problem.u0,
        built.cone,
        KERNEL_CHECK_SAMPLES,
        config.seed,
    )
    if isinstance(built.spec, IntervalDirichlet):
        analytic_gamma = min(built.cone.lo, 1.0 - built.cone.hi)
    else:
        analytic_gamma = None
    if isinstance(built.spec, (IntervalDirichlet, AnnulusRadial)):
        defect = fd_delta_defect(kernel)
    else:
        defect = None
    payload = {
        "symmetric": kernel.symmetric,
        "nonnegative": kernel.nonnegative,
        "harnack_gamma": built.gamma,
        "gamma_analytic_bound": analytic_gamma,
        "fd_delta_defect": defect,
        "invariance_samples": report.samples,
        "invariance_passes": report.passes,
        "invariance_fails": report.fails,
        "invariance_worst_margin": report.worst_margin,
    }
    out = _out_dir(config)
    write_text_atomic(out / "kernel_report.json", to_json_text(payload))
    for key, value in payload.items():
        text = format_float(value) if isinstance(value, float) else str(value)
        print(f"{key} = {text}")
    ok = kernel.symmetric and kernel.nonnegative and built.gamma > 0
    print(f"kernel check {'PASSED' if ok else 'FAILED'}")
    return EXIT_OK if ok else EXIT_KERNEL_FAILED


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hamcert", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_scalar = sub.add_parser("scalar", help="closed-form scalar reference")
    p_scalar.add_argument("--a", type=float, required=True)
    p_scalar.add_argument("--u0", type=float, required=True)
    p_scalar.add_argument("--tol", type=float, default=None)
    p_scalar.set_defaults(func=cmd_scalar)

    for name, func, help_text in (
        ("certify", cmd_certify, "build and write the existence certificate"),
        ("solve", cmd_solve, "certify, then compute both solution branches"),
        ("kernel-check", cmd_kernel_check, "kernel symmetry, positivity, Harnack ratio"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=str, default=None, help="JSON config file")
        p.add_argument("--problem", type=str, default=None)
        p.add_argument("--source-const", dest="source_const", type=float, default=None)
        p.add_argument("--source-file", dest="source_file", type=str, default=None)
        p.add_argument("--n", type=int, default=None)
        p.add_argument("--rule", type=str, default=None, choices=("trapezoid", "simpson"))
        p.add_argument("--cone-lo", dest="cone_lo", type=float, default=None)
        p.add_argument("--cone-hi", dest="cone_hi", type=float, default=None)
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--max-iter", dest="max_iter", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", type=str, default=None)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (KernelFormatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
