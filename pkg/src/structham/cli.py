"""Command-line harness: run / sweep / drift / coeffs subcommands.

Exit codes: 0 success, 2 configuration error, 3 solver non-convergence or
divergence.
"""

from __future__ import annotations

import argparse
import json
import sys

from .blocksolver import DivergenceError, NonConvergenceError
from .harness import RunConfig, drift_series, run, sweep, SweepResult, _report_row
from .numerics import PRECISIONS
from .problems import PROBLEM_NAMES
from .secoeff import ConfigurationError, Formulation, coeff_table, dump_coeff_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _add_run_args(p, with_n=True):
    p.add_argument("--problem", required=True, choices=sorted(PROBLEM_NAMES))
    p.add_argument("--scheme", required=True,
                   choices=["zd", "zds", "sv2", "sv4", "sv6", "sv8"])
    p.add_argument("--R", type=int, default=None, help="block size (structural schemes)")
    if with_n:
        p.add_argument("--N", type=int, required=True, help="number of time steps")
    p.add_argument("--T", type=float, required=True, help="final time")
    p.add_argument("--tol", type=float, default=None,
                   help="fixed-point tolerance (default 1e-14 double / 1e-30 ddouble)")
    p.add_argument("--precision", choices=sorted(PRECISIONS), default="double")
    p.add_argument("--project-lrl", action="store_true",
                   help="project onto the LRL invariant manifold (kepler only)")
    p.add_argument("--out", default=None, help="CSV output path")
    p.add_argument("--manifest", default=None, help="write a JSON run manifest here")


def _config_from_args(args, N=None) -> RunConfig:
    return RunConfig(
        problem=args.problem,
        scheme=args.scheme,
        N=args.N if N is None else N,
        T=args.T,
        R=args.R,
        tol=args.tol,
        precision=args.precision,
        project_lrl=args.project_lrl,
    )


def _write_manifest(args, config):
    if args.manifest:
        with open(args.manifest, "w") as fh:
            fh.write(config.manifest() + "\n")


def _cmd_run(args) -> int:
    config = _config_from_args(args).validated()
    _write_manifest(args, config)
    report = run(config)
    parts = [f"problem={config.problem}", f"scheme={config.scheme}"]
    if config.R is not None:
        parts.append(f"R={config.R}")
    parts += [f"N={config.N}", f"T={config.T}", f"dt={report.dt:.5e}"]
    for q in ("x", "H", "L", "A"):
        if q in report.errors:
            parts.append(f"e{q}={report.errors[q]:.5e}")
    parts += [
        f"total_iter={report.total_iter}",
        f"nb_iter_avg={report.nb_iter_avg:.5e}",
        f"nb_call_avg={report.nb_call_avg:.5e}",
    ]
    print(" ".join(parts))
    if args.out:
        SweepResult([_report_row(config, report)]).write_csv(args.out)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    Ns = [int(v) for v in args.Ns.split(",") if v.strip()]
    config = _config_from_args(args, N=Ns[0]).validated()
    _write_manifest(args, config)
    result = sweep(config, Ns)
    text = result.to_csv()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_drift(args) -> int:
    config = _config_from_args(args).validated()
    _write_manifest(args, config)
    series = drift_series(config, args.quantity, samples=args.samples)
    lines = ["t,deviation"] + [f"{t:.5e},{dev:.5e}" for t, dev in series]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_coeffs(args) -> int:
    table = coeff_table(args.R, Formulation.parse(args.formulation), args.dt,
                        PRECISIONS[args.precision])
    if args.out:
        with open(args.out, "w") as fh:
            dump_coeff_csv(table, fh)
    else:
        dump_coeff_csv(table, sys.stdout)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="structham",
        description="Block-implicit structural schemes for Hamiltonian systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="integrate one configuration and report errors")
    _add_run_args(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="error/order table over a list of N")
    _add_run_args(p_sweep, with_n=False)
    p_sweep.add_argument("--Ns", required=True, help="comma-separated ascending step counts")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_drift = sub.add_parser("drift", help="invariant deviation over time")
    _add_run_args(p_drift)
    p_drift.add_argument("--quantity", default="H", choices=["H", "L", "A"])
    p_drift.add_argument("--samples", type=int, default=200)
    p_drift.set_defaults(func=_cmd_drift)

    p_coeffs = sub.add_parser("coeffs", help="dump a structural coefficient table as CSV")
    p_coeffs.add_argument("--formulation", required=True, choices=["zd", "zds"])
    p_coeffs.add_argument("--R", type=int, required=True)
    p_coeffs.add_argument("--dt", type=float, default=1.0)
    p_coeffs.add_argument("--precision", choices=sorted(PRECISIONS), default="double")
    p_coeffs.add_argument("--out", default=None)
    p_coeffs.set_defaults(func=_cmd_coeffs)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, ValueError) as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonConvergenceError, DivergenceError) as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
