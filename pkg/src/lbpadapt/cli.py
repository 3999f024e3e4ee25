"""Command-line front end.

Subcommands: ``ibm`` (individual-based runs), ``fixation`` (exact two-type
solve plus invasion fitness), ``invasibility`` (g and a coefficients at a
point), ``curves`` (a_hat sweep, reference-figure CSVs), ``tss`` (trait
substitution sequence), ``diffusion`` (canonical diffusion runs and the
large-K comparison) and ``verify`` (acceptance suite).

Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 verification
failure.  Every output directory receives a ``manifest.json`` whose argv
reproduces the run (and all its CSVs) byte for byte.  All CSVs use '.'
decimals and no locale; plotting is left to external tools.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__
from .errors import ConfigError, ExpressionError, LbpError, ModelError, SolverError, TableRangeError
from .fixation import chi_for_rates, chi_neutral
from .invasibility import AhatTable, a_coeffs, curve_sweep, default_ahat_table, invasibility_g
from .model import ModelSpec, TwoTypeRates, parse_model
from .tss import run_tss, write_tss_csv


@dataclass
class RunManifest:
    """Reproduction record dropped next to every file-producing run."""

    subcommand: str
    config: str | None
    seed: int | None
    out_dir: str
    version: str
    wall_clock_s: float
    argv: list


def _write_manifest(out_dir, manifest: RunManifest):
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(asdict(manifest), fh, indent=2)
        fh.write("\n")


def _load_model(args) -> ModelSpec:
    if args.config is None:
        raise ConfigError("this subcommand requires --config")
    with open(args.config) as fh:
        return parse_model(fh.read())


def _parse_coords(text):
    return np.array([float(p) for p in text.split(",")])


def _out_dir(args):
    from pathlib import Path

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _finish(args, argv, t0, extra=None):
    out = _out_dir(args)
    _write_manifest(
        out,
        RunManifest(
            subcommand=args.command,
            config=getattr(args, "config", None),
            seed=getattr(args, "seed", None),
            out_dir=str(out),
            version=__version__,
            wall_clock_s=round(time.time() - t0, 3),
            argv=list(argv),
        ),
    )


# --- subcommand handlers ---------------------------------------------------

def _cmd_fixation(args, argv, t0):
    if args.b is not None and args.c is not None:
        rates = TwoTypeRates(args.b, args.b, args.c, args.c, args.c, args.c)
    elif args.config is not None:
        from .model import eval_rates

        m = _load_model(args)
        rates = eval_rates(m, _parse_coords(args.x), _parse_coords(args.y))
    else:
        raise ConfigError("fixation needs either --b and --c, or --config with --x and --y")

    chi_val, table = chi_for_rates(
        rates, tol_trunc=args.tol_trunc, tol_resid=args.tol_resid, method=args.method
    )
    u = table.prob(args.n, args.m)
    print(f"u_{{{args.n},{args.m}}} = {u:.12g}")
    print(f"chi = {chi_val:.12g}")
    print(f"chi_neutral(theta={rates.theta:.6g}) = {chi_neutral(rates.theta):.12g}")
    print(f"n_max = {table.n_max}, residual = {table.residual:.3e}, trunc_error = {table.trunc_error:.3e}")
    if args.out is not None:
        out = _out_dir(args)
        table.to_csv(out / "fixation_table.csv")
        _finish(args, argv, t0)
    return 0


def _cmd_invasibility(args, argv, t0):
    co = invasibility_g(args.b, args.c, args.total_size,
                        tol_trunc=args.tol_trunc, tol_resid=args.tol_resid)
    print(f"N = {co.total_size} at (b, c) = ({args.b}, {args.c}):")
    print(f"g_lambda = {co.g_lambda:.10g}")
    print(f"g_delta  = {co.g_delta:.10g}")
    print(f"g_alpha  = {co.g_alpha:.10g}")
    print(f"g_epsilon = {'n/a (single split has p = 1/2)' if co.g_epsilon is None else format(co.g_epsilon, '.10g')}")
    print(f"split spread = {co.spread:.3e}")
    a = a_coeffs(args.b, args.c, tol_trunc=args.tol_trunc, tol_resid=args.tol_resid)
    print(f"a_lambda = {a[0]:.10g}, a_delta = {a[1]:.10g}, a_alpha = {a[2]:.10g}")
    if args.out is not None:
        _finish(args, argv, t0)
    return 0


def _cmd_curves(args, argv, t0):
    grid = np.geomspace(args.theta_min, args.theta_max, args.points)
    curve = curve_sweep(grid, base_c=args.base_c, jobs=args.jobs,
                        tol_trunc=args.tol_trunc, tol_resid=args.tol_resid)
    out = _out_dir(args)
    curve.to_csv(out / "ahat_curves.csv")

    with open(out / "fig1_ahat.csv", "w") as fh:
        fh.write("theta,a_hat_lambda,a_hat_delta,a_hat_alpha\n")
        for i, th in enumerate(curve.theta_grid):
            fh.write(f"{th:.17g},{curve.a_hat_lambda[i]:.17g},"
                     f"{curve.a_hat_delta[i]:.17g},{curve.a_hat_alpha[i]:.17g}\n")
    with open(out / "fig2_theta_ahat.csv", "w") as fh:
        fh.write("theta,theta_a_hat_lambda,theta_a_hat_alpha\n")
        for i, th in enumerate(curve.theta_grid):
            fh.write(f"{th:.17g},{th * curve.a_hat_lambda[i]:.17g},"
                     f"{th * curve.a_hat_alpha[i]:.17g}\n")
    print(f"wrote {out / 'ahat_curves.csv'}, {out / 'fig1_ahat.csv'}, {out / 'fig2_theta_ahat.csv'}")
    _finish(args, argv, t0)
    return 0


def _cmd_ibm(args, argv, t0):
    from .ibm import PopulationState, SimConfig, run_ibm

    m = _load_model(args)
    groups = {}
    for spec_str in args.group:
        coords, _, count = spec_str.partition(":")
        groups[tuple(_parse_coords(coords))] = int(count)
    if not groups:
        raise ConfigError("ibm needs at least one --group x1[,x2...]:count")
    init = PopulationState(time=0.0, groups=groups)
    cfg = SimConfig(gamma=args.gamma, t_end=args.t_end, seed=args.seed,
                    record=args.record, record_dt=args.record_dt)
    path = run_ibm(m, cfg, init)

    out = _out_dir(args)
    with open(out / "ibm_path.csv", "w") as fh:
        fh.write("time,total_size,num_types\n")
        for s in path:
            fh.write(f"{s.time:.17g},{s.total_size()},{s.num_types()}\n")
    if args.dump_groups:
        with open(out / "ibm_groups.csv", "w") as fh:
            fh.write("time," + ",".join(f"x{i+1}" for i in range(m.k)) + ",count\n")
            for s in path:
                for trait, count in s.groups.items():
                    fh.write(f"{s.time:.17g}," + ",".join(f"{c:.17g}" for c in trait)
                             + f",{count}\n")
    print(f"{len(path)} records; final size {path[-1].total_size()}, "
          f"{path[-1].num_types()} types; wrote {out / 'ibm_path.csv'}")
    _finish(args, argv, t0)
    return 0


def _cmd_tss(args, argv, t0):
    m = _load_model(args)
    path = run_tss(m, _parse_coords(args.x0), args.t_end, args.seed, eps=args.eps,
                   emit_sizes=args.emit_sizes,
                   tol_trunc=args.tol_trunc, tol_resid=args.tol_resid)
    if args.clock == "rescaled":
        # small-mutation convention: steps were scaled by eps, time runs eps^2 slower
        path.jump_times = path.jump_times * args.eps**2
    out = _out_dir(args)
    write_tss_csv(path, m.k, out / "tss_path.csv")
    print(f"{path.n_jumps()} jumps from {path.n_candidates} candidates; "
          f"wrote {out / 'tss_path.csv'}")
    _finish(args, argv, t0)
    return 0


def _cmd_diffusion(args, argv, t0):
    from .diffusion import (DiffusionConfig, ensemble_summary_csv, large_k_drift,
                            run_diffusion, run_ensemble)
    from .invasibility import fitness_gradient

    m = _load_model(args)
    z0 = _parse_coords(args.z0)

    if args.large_k:
        limit = large_k_drift(m, z0)
        print(f"large-K drift limit at z0: {limit}")
        base_c_expr = m.comp.text
        for k_div in (1, 10, 100):
            scaled = parse_model(
                f"k={m.k}; b = {m.birth.text}; c = ({base_c_expr})/{float(k_div)!r}; "
                f"mu = {m.mut_prob.text}"
            )
            grad = fitness_gradient(scaled, z0)
            err = np.linalg.norm(grad - limit) / max(np.linalg.norm(limit), 1e-300)
            print(f"K={k_div:>4}: grad_2 chi_K = {grad}  rel_err = {err:.3%}")
        return 0

    table = AhatTable.load_csv(args.table) if args.table else default_ahat_table()
    cfg = DiffusionConfig(dt=args.dt, t_end=args.t_end, seed=args.seed,
                          coeff_source=args.source)
    out = _out_dir(args)
    if args.paths > 1:
        paths = run_ensemble(m, z0, cfg, args.paths, table=table)
        ensemble_summary_csv(paths, out / "diffusion_ensemble.csv")
        paths[0].to_csv(out / "diffusion_path.csv")
        print(f"{args.paths} paths; wrote {out / 'diffusion_ensemble.csv'}")
    else:
        path = run_diffusion(m, z0, cfg, table=table)
        path.to_csv(out / "diffusion_path.csv")
        print(f"wrote {out / 'diffusion_path.csv'}")
    _finish(args, argv, t0)
    return 0


def _cmd_verify(args, argv, t0):
    from .acceptance import run_criteria

    ids = None
    if args.criteria:
        ids = sorted({int(p) for p in args.criteria.split(",")})
    results = run_criteria(ids, jobs=args.jobs)
    failed = [r for r in results if not r.passed]
    return 3 if failed else 0


# --- parser ------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="lbpadapt",
        description="Adaptive dynamics of logistic branching populations.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True, out_default="."):
        p.add_argument("--config", help="model configuration file")
        p.add_argument("--out", default=out_default,
                       help="output directory" + ("" if out_default else " (omit for print-only)"))
        p.add_argument("--jobs", type=int, default=1, help="parallel workers")
        p.add_argument("--tol-trunc", type=float, default=1e-8, dest="tol_trunc")
        p.add_argument("--tol-resid", type=float, default=1e-12, dest="tol_resid")
        if seed:
            p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("fixation", help="exact fixation probabilities and invasion fitness")
    common(p, seed=False, out_default=None)
    p.add_argument("--b", type=float, help="resident birth rate (with --c: neutral rates)")
    p.add_argument("--c", type=float, help="resident competition rate")
    p.add_argument("--x", default="0", help="resident trait coords, comma separated")
    p.add_argument("--y", default="0", help="mutant trait coords")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--method", choices=["direct", "gauss-seidel"], default="direct")
    p.set_defaults(func=_cmd_fixation)

    p = sub.add_parser("invasibility", help="invasibility coefficients at a point")
    common(p, seed=False, out_default=None)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--total-size", type=int, default=4, dest="total_size")
    p.set_defaults(func=_cmd_invasibility)

    p = sub.add_parser("curves", help="a_hat(theta) sweep (reference-figure data)")
    common(p, seed=False)
    p.add_argument("--theta-min", type=float, default=0.5, dest="theta_min")
    p.add_argument("--theta-max", type=float, default=40.0, dest="theta_max")
    p.add_argument("--points", type=int, default=20)
    p.add_argument("--base-c", type=float, default=1.0, dest="base_c")
    p.set_defaults(func=_cmd_curves)

    p = sub.add_parser("ibm", help="individual-based stochastic simulation")
    common(p)
    p.add_argument("--group", action="append", default=[],
                   help="initial group 'x1[,x2...]:count' (repeatable)")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--t-end", type=float, required=True, dest="t_end")
    p.add_argument("--record", choices=["full", "sampled", "final"], default="sampled")
    p.add_argument("--record-dt", type=float, default=1.0, dest="record_dt")
    p.add_argument("--dump-groups", action="store_true", dest="dump_groups")
    p.set_defaults(func=_cmd_ibm)

    p = sub.add_parser("tss", help="trait substitution sequence by thinning")
    common(p)
    p.add_argument("--x0", default="0", help="initial trait coords")
    p.add_argument("--t-end", type=float, required=True, dest="t_end")
    p.add_argument("--eps", type=float, default=1.0, help="mutation-step scale")
    p.add_argument("--emit-sizes", action="store_true", dest="emit_sizes")
    p.add_argument("--clock", choices=["tss", "rescaled"], default="tss",
                   help="'rescaled' multiplies jump times by eps^2")
    p.set_defaults(func=_cmd_tss)

    p = sub.add_parser("diffusion", help="canonical diffusion integration")
    common(p)
    p.add_argument("--z0", default="0", help="initial trait coords")
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--t-end", type=float, default=1.0, dest="t_end")
    p.add_argument("--paths", type=int, default=1)
    p.add_argument("--source", choices=["interp-table", "direct-solve"], default="interp-table")
    p.add_argument("--table", help="a_hat table CSV (default: packaged)")
    p.add_argument("--large-k", action="store_true", dest="large_k",
                   help="compare grad_2 chi_K against the classical limit for K in {1,10,100}")
    p.set_defaults(func=_cmd_diffusion)

    p = sub.add_parser("verify", help="run the acceptance suite")
    common(p, seed=False)
    p.add_argument("--criteria", help="comma-separated subset, e.g. 1,2,7")
    p.set_defaults(func=_cmd_verify)

    return parser


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1

    t0 = time.time()
    try:
        return args.func(args, argv, t0)
    except (ConfigError, ExpressionError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ModelError, SolverError, TableRangeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except LbpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
