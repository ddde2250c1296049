"""Command-line front end.

Subcommands: ``synth``, ``fit``, ``density``, ``kw-cert`` and
``bench-oracle``. Exit status is 0 on success, 2 when a fit hits the
outer-iteration cap and 1 on usage, parse or domain errors.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import basis as bs
from . import io
from . import kw
from . import objective as obj
from . import polytope as pt
from . import synth
from .cubic_newton import SolverConfig, fit_unimodal, minimize
from .exceptions import ShapemixError

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CAPPED = 2

CONSTRAINT_CHOICES = (
    "none", "decreasing", "increasing", "concave", "convex",
    "concave-increasing", "concave-decreasing", "convex-increasing",
    "convex-decreasing", "unimodal", "unimodal-fixed",
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    """Everything a run depends on. Equal configs give byte-identical output."""

    command: str
    input: Optional[str] = None
    output: Optional[str] = None
    basis: str = "bernstein"
    M: Optional[int] = None
    sigma: Optional[float] = None
    constraint: str = "none"
    mode: Optional[int] = None
    seed: int = 0
    solver: dict = field(default_factory=dict)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(**self.solver)

    def shape(self, M: int) -> pt.ShapeConstraint:
        return parse_constraint(self.constraint, M, self.mode)


def parse_constraint(name: str, M: int, mode: Optional[int] = None) -> pt.ShapeConstraint:
    """Map a flag value to a constraint (``unimodal`` is handled by the caller)."""
    if name == "none":
        return pt.ShapeConstraint("simplex", M)
    if name == "unimodal-fixed":
        if mode is None:
            raise UsageError("unimodal-fixed needs a mode index K")
        if not 1 <= mode <= M:
            raise UsageError(f"mode K={mode} must lie in 1..{M}")
        return pt.ShapeConstraint.unimodal(M, mode)
    kind = name.replace("-", "_")
    if kind not in pt.FAMILIES or kind == "unimodal_fixed":
        raise UsageError(f"unknown constraint {name!r}")
    return pt.ShapeConstraint(kind, M)


def _solver_flags(p):
    g = p.add_argument_group("solver")
    g.add_argument("--gap-tol", type=float)
    g.add_argument("--outer-tol", type=float)
    g.add_argument("--max-outer", type=int)
    g.add_argument("--L0", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--subproblem-max-iter", type=int)
    g.add_argument("--shorter-step-iters", type=int)
    g.add_argument("--shorter-step-factor", type=float)
    g.add_argument("--subproblem-criterion", choices=("gap", "relative"))


_SOLVER_FIELDS = {
    "gap_tol": "gap_tol", "outer_tol": "outer_tol", "max_outer": "max_outer",
    "L0": "L0", "beta": "beta", "subproblem_max_iter": "subproblem_max_iter",
    "shorter_step_iters": "shorter_step_iters",
    "shorter_step_factor": "shorter_step_factor",
    "subproblem_criterion": "subproblem_criterion",
}


def _basis_flags(p, need_M=True):
    p.add_argument("--basis", choices=("bernstein", "gaussian"), default="bernstein")
    p.add_argument("--M", type=int, required=need_M)
    p.add_argument("--sigma", type=float,
                   help="kernel scale; required for the gaussian basis")
    p.add_argument("--atoms", help="file of gaussian centres (default: M points spanning the samples)")


def _sample_flags(p, required=True):
    p.add_argument("--input", required=required, help="sample file")
    p.add_argument("--column", help="comma-separated column, by 1-based number or header name")
    p.add_argument("--normalize", action="store_true", help="min-max scale samples to [0, 1]")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="shapemix", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="draw synthetic samples")
    p.add_argument("--profile", required=True, choices=synth.PROFILES)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)

    p = sub.add_parser("fit", help="fit mixture weights")
    _sample_flags(p)
    _basis_flags(p)
    p.add_argument("--constraint", nargs="+", default=["none"], metavar="NAME [K]",
                   help="one of: " + ", ".join(CONSTRAINT_CHOICES))
    p.add_argument("--output", required=True, help="weights file")
    p.add_argument("--trace", help="trace CSV (default: OUTPUT.trace.csv)")
    p.add_argument("--reference-f", help="file holding a reference objective value")
    p.add_argument("--seed", type=int, default=0)
    _solver_flags(p)

    p = sub.add_parser("density", help="evaluate a fitted density on a grid")
    p.add_argument("--weights", required=True)
    _basis_flags(p, need_M=False)
    _sample_flags(p, required=False)
    p.add_argument("--grid", type=int, default=bs.DEFAULT_GRID_SIZE)
    p.add_argument("--output", required=True)

    p = sub.add_parser("kw-cert", help="discretisation certificate for a unit-variance gaussian fit")
    _sample_flags(p)
    p.add_argument("--weights", help="fitted weights (default: fit here)")
    p.add_argument("--M", type=int)
    p.add_argument("--atoms")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--output", required=True)
    _solver_flags(p)

    p = sub.add_parser("bench-oracle", help="check the linear oracle against enumeration")
    p.add_argument("--family", required=True)
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--mode", type=int, help="mode index for unimodal (default M // 2)")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _locations(args, samples, M):
    if args.atoms:
        locs = io.read_values(args.atoms)
        if M is not None and locs.size != M:
            raise UsageError(f"--atoms has {locs.size} entries but --M is {M}")
        return locs
    if samples is None or M is None:
        raise UsageError("gaussian basis needs --atoms, or --input together with --M")
    return bs.uniform_location_grid(samples, M)


def _basis_for(args, samples, M):
    if args.basis == "bernstein":
        if M is None:
            raise UsageError("--M is required")
        return bs.BasisSpec.bernstein(M)
    if args.sigma is None:
        raise UsageError("--sigma is required for the gaussian basis")
    if not args.sigma > 0:
        raise UsageError("--sigma must be positive")
    return bs.BasisSpec.gaussian(_locations(args, samples, M), args.sigma)


def _problem(spec, samples):
    if spec.family == "bernstein":
        return bs.bernstein_matrix(samples, spec.M)
    return bs.gaussian_location_matrix(samples, spec.locations, spec.sigma)


def _run_config(args) -> RunConfig:
    solver = {dst: getattr(args, src) for src, dst in _SOLVER_FIELDS.items()
              if getattr(args, src, None) is not None}
    constraint = getattr(args, "constraint", ["none"])
    mode = None
    name = constraint[0]
    if name == "unimodal-fixed":
        if len(constraint) != 2:
            raise UsageError("usage: --constraint unimodal-fixed K")
        try:
            mode = int(constraint[1])
        except ValueError:
            raise UsageError(f"mode K must be an integer, got {constraint[1]!r}") from None
    elif len(constraint) != 1:
        raise UsageError(f"unexpected value after --constraint {name}")
    if name not in CONSTRAINT_CHOICES:
        raise UsageError(f"unknown constraint {name!r}; choose from {', '.join(CONSTRAINT_CHOICES)}")
    try:
        SolverConfig(**solver)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return RunConfig(
        command=args.command, input=getattr(args, "input", None), output=args.output,
        basis=getattr(args, "basis", "bernstein"), M=getattr(args, "M", None),
        sigma=getattr(args, "sigma", None), constraint=name, mode=mode,
        seed=getattr(args, "seed", 0), solver=solver,
    )


def cmd_synth(args, out) -> int:
    if args.N < 1:
        raise UsageError("--N must be at least 1")
    io.write_values(args.output, synth.sample(args.profile, args.N, args.seed))
    return EXIT_OK


def cmd_fit(args, out) -> int:
    rc = _run_config(args)
    if rc.M is None or rc.M < 1:
        raise UsageError("--M must be a positive integer")
    samples = io.read_samples(args.input, args.column, args.normalize)
    spec = _basis_for(args, samples, rc.M)
    problem = _problem(spec, samples)
    cfg = rc.solver_config()
    mode_line = None
    if rc.constraint == "unimodal":
        k_star, w, _, traces = fit_unimodal(problem, cfg, return_traces=True)
        trace = traces[k_star - 1]
        mode_line = f"mode {k_star}"
    else:
        w, trace = minimize(problem, rc.shape(problem.M), cfg)
    io.write_weights(args.output, w)
    io.write_trace(args.trace or args.output + ".trace.csv", trace)
    fin = trace.final
    f_final = obj.f(problem, w)
    print(f"{trace.status} {io.fmt(f_final)} {io.fmt(fin.fw_gap)} {trace.outer_iters}", file=out)
    if mode_line:
        print(mode_line, file=out)
    if args.reference_f:
        ref = io.read_values(args.reference_f)
        if ref.size != 1:
            raise UsageError("--reference-f file must hold exactly one number")
        f_star = float(ref[0])
        print(f"relative_error {io.fmt((f_final - f_star) / max(1.0, abs(f_star)))}", file=out)
    return EXIT_CAPPED if trace.status == "iteration-capped" else EXIT_OK


def cmd_density(args, out) -> int:
    w = io.read_weights(args.weights)
    if args.M is not None and args.M != w.size:
        raise UsageError(f"weights file has {w.size} entries but --M is {args.M}")
    if args.grid < 1:
        raise UsageError("--grid must be positive")
    samples = None
    if args.input:
        samples = io.read_samples(args.input, args.column, args.normalize)
    spec = _basis_for(args, samples, w.size)
    lo, hi = spec.support()
    grid = np.linspace(lo, hi, args.grid)
    dens = bs.density_eval(spec, w, grid)
    with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("x,density\n")
        for x, d in zip(grid, dens):
            fh.write(f"{io.fmt(x)},{io.fmt(d)}\n")
    return EXIT_OK


KW_SOLVER_DEFAULTS = {"gap_tol": 1e-10, "outer_tol": 0.0}

CERT_FIELDS = ("nu_min", "nu_max", "feasibility_margin", "gamma",
               "bound17", "bound18", "dual_distance_bound")


def cmd_kw_cert(args, out) -> int:
    if args.sigma != 1.0:
        raise UsageError("certificates are only defined for unit-variance kernels (--sigma 1)")
    samples = io.read_samples(args.input, args.column, args.normalize)
    if args.atoms:
        atoms = io.read_values(args.atoms)
    elif args.M:
        atoms = bs.uniform_location_grid(samples, args.M)
    else:
        raise UsageError("kw-cert needs --atoms or --M")
    kw.check_bracketing(samples, atoms)
    problem = bs.gaussian_location_matrix(samples, atoms, 1.0)
    if args.weights:
        w = io.read_weights(args.weights)
        if w.size != atoms.size:
            raise UsageError(f"weights file has {w.size} entries for {atoms.size} atoms")
    else:
        # certificates want a gap-certified fit, so the relative-change stop is off
        solver = dict(KW_SOLVER_DEFAULTS, **_run_config(args).solver)
        w, _ = minimize(problem, pt.ShapeConstraint("simplex", problem.M), SolverConfig(**solver))
    cert = kw.certificate(problem, w)
    vals = (cert.nu.min(), cert.nu.max(), cert.feasibility_margin, cert.gamma,
            cert.gap_bound_17, cert.gap_bound_18, cert.dual_distance_bound)
    with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(" ".join(CERT_FIELDS) + "\n")
        fh.write(" ".join(io.fmt(v) for v in vals) + "\n")
        for v in cert.nu:
            fh.write(io.fmt(v) + "\n")
    print(" ".join(f"{k}={io.fmt(v)}" for k, v in zip(CERT_FIELDS, vals)), file=out)
    return EXIT_OK


# Enumerating more entries than this is skipped in favour of the catalog check.
_ENUMERATION_LIMIT = 5_000_000


def cmd_bench_oracle(args, out) -> int:
    family = args.family.replace("-", "_")
    if family in ("none",):
        family = "simplex"
    if family == "unimodal":
        family = "unimodal_fixed"
    M = args.M
    if M < 1 or args.trials < 0:
        raise UsageError("--M must be positive and --trials nonnegative")
    mode = None
    if family == "unimodal_fixed":
        mode = args.mode if args.mode is not None else max(1, M // 2)
    try:
        c = pt.ShapeConstraint(family, M, mode)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rng = synth.make_rng(args.seed)
    n_cat = pt.catalog_size(c)
    enumerate_ok = n_cat * M <= _ENUMERATION_LIMIT
    V = np.array(pt.enumerate_vertices(c)) if enumerate_ok else None
    worst = 0.0
    for _ in range(args.trials):
        g = rng.standard_normal(M)
        _, val = pt.lp_oracle(c, g)
        ref = float((V @ g).min()) if enumerate_ok else float(pt.catalog_values(c, g).min())
        worst = max(worst, abs(val - ref) / max(1.0, abs(ref)))
    how = "enumeration" if enumerate_ok else "catalog"
    print(f"{c} trials={args.trials} max_discrepancy={io.fmt(worst)} reference={how}", file=out)

    def ops(cc):
        pt.OPS.reset()
        pt.catalog_values(cc, rng.standard_normal(cc.M))
        return pt.OPS.count

    base = ops(c)
    line = f"op_count M={M} count={base} per_coordinate={io.fmt(base / M)}"
    if family == "unimodal_fixed":
        expect = mode * (M - mode + 1)
        line += f" k(M-k+1)={expect} ratio={io.fmt(base / expect)}"
    else:
        c2 = pt.ShapeConstraint(family, 2 * M)
        twice = ops(c2)
        line += f" count_at_2M={twice} growth={io.fmt(twice / base)}"
        if abs(twice / base - 2.0) <= 0.25:
            line += " scaling=linear"
    print(line, file=out)
    return EXIT_OK


_COMMANDS = {
    "synth": cmd_synth,
    "fit": cmd_fit,
    "density": cmd_density,
    "kw-cert": cmd_kw_cert,
    "bench-oracle": cmd_bench_oracle,
}


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(f"shapemix: usage error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ShapemixError, ValueError, OSError) as exc:
        print(f"shapemix: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
