"""Command-line entry point: `plhr-tools solve | bench | spectrum`.

Exit codes: 0 when every run converged, 2 when some run did not, 1 on usage or
configuration errors.
"""

import argparse
import sys
from logging import DEBUG, Logger

from .exceptions import ConfigError, NonHermitianError
from .experiments import (
    PROBLEMS,
    SOLVER_NAMES,
    TABLES,
    ExperimentConfig,
    RunReport,
    reproduce_figure,
    reproduce_table,
    run_experiment,
)
from .loaders import FdLoader, FeLoader, MatrixMarketLoader
from .processors import PRECONDITIONERS
from .solvers import EXTRACTIONS, S_VECTORS
from .utils import get_logger

EXIT_CONVERGED = 0
EXIT_USAGE = 1
EXIT_PARTIAL = 2

FIGURES = ("figure1", "figure2", "figure3")

# Flag destinations that map onto differently named configuration fields
_RENAMED = {"prec": "preconditioner", "eps": "epsilon"}


def _add_problem_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--problem", choices=PROBLEMS)
    parser.add_argument("--omega", type=int)
    parser.add_argument("--ne", type=int)
    parser.add_argument("--matrix-a", dest="matrix_a")
    parser.add_argument("--matrix-b", dest="matrix_b")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plhr-tools",
        description="Interior eigenpairs of Hermitian pencils with PLHR-type solvers",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    subparsers = parser.add_subparsers(dest="command")

    solve = subparsers.add_parser("solve", help="run one experiment")
    solve.add_argument("--config", help="JSON experiment configuration")
    _add_problem_flags(solve)
    solve.add_argument("--sigma", type=float, nargs="+")
    solve.add_argument("--k", type=int)
    solve.add_argument("--n-track", dest="n_track", type=int)
    solve.add_argument("--tol", type=float)
    solve.add_argument("--maxit", type=int)
    solve.add_argument("--solver", choices=SOLVER_NAMES)
    solve.add_argument("--extraction", choices=EXTRACTIONS)
    solve.add_argument("--s-vector", dest="s_vector", choices=S_VECTORS)
    solve.add_argument("--prec", choices=PRECONDITIONERS)
    solve.add_argument("--eps", type=float)
    solve.add_argument("--seed", type=int)
    solve.add_argument("--seeds", type=int, nargs="+")
    solve.add_argument("--out")
    solve.add_argument("--jobs", type=int)
    solve.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    bench = subparsers.add_parser("bench", help="reproduce a published table or figure")
    bench.add_argument("which", choices=tuple(TABLES) + FIGURES)
    bench.add_argument("--seeds", type=int, nargs="+")
    bench.add_argument("--maxit", type=int)
    bench.add_argument("--omega", type=int, nargs="+", help="grid levels (table3)")
    bench.add_argument("--sigma", type=float, nargs="+", help="shifts (table1, table2)")
    bench.add_argument("--out", default="results")
    bench.add_argument("--jobs", type=int, default=1)
    bench.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    spectrum = subparsers.add_parser("spectrum", help="eigenvalues nearest a shift")
    _add_problem_flags(spectrum)
    spectrum.add_argument("--near", type=float, required=True)
    spectrum.add_argument("--count", type=int, default=1)
    spectrum.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    return parser


def _solve_config(args: argparse.Namespace) -> ExperimentConfig:
    flags = {
        _RENAMED.get(name, name): value
        for name, value in vars(args).items()
        if name not in ("command", "config", "verbose", "seed", "sigma") and value is not None
    }
    if args.seed is not None:
        flags["seeds"] = [args.seed]
    if args.sigma is not None:
        flags["sigma"] = args.sigma[0] if len(args.sigma) == 1 else args.sigma
    if args.config is not None:
        return ExperimentConfig.from_json(args.config, **flags)
    return ExperimentConfig.from_dict(flags)


def _print_report(report: RunReport) -> None:
    for row, cells in report.table().items():
        line = "  ".join(f"{column}:{value}" for column, value in cells.items())
        print(f"{row}  {line}")
    print(f"summary {report.summary_path}")


def _spectrum(args: argparse.Namespace) -> int:
    problem = args.problem or "fd"
    if problem == "fd":
        loader = FdLoader(args.omega if args.omega is not None else 7)
    elif problem == "fe":
        loader = FeLoader(args.ne if args.ne is not None else 50)
    else:
        if args.matrix_a is None:
            raise ConfigError("--matrix-a is required for a matrix-market problem")
        loader = MatrixMarketLoader(args.matrix_a, args.matrix_b)
    for value in loader.spectrum().nearest(args.near, args.count):
        print(f"{value:.17g}")
    return EXIT_CONVERGED


def _run(args: argparse.Namespace, logger: Logger) -> int:
    if args.command == "spectrum":
        return _spectrum(args)

    if args.command == "solve":
        report = run_experiment(_solve_config(args), logger=logger)
    elif args.which in TABLES:
        report = reproduce_table(
            args.which,
            seeds=args.seeds if args.seeds is not None else (0, 1, 2),
            shifts=args.sigma,
            omegas=args.omega,
            maxit=args.maxit,
            out=args.out,
            jobs=args.jobs,
            logger=logger,
        )
    else:
        report = reproduce_figure(
            args.which,
            seeds=args.seeds,
            maxit=args.maxit,
            out=args.out,
            jobs=args.jobs,
            logger=logger,
        )
    _print_report(report)
    return EXIT_CONVERGED if report.converged else EXIT_PARTIAL


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = _parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONVERGED if e.code == 0 else EXIT_USAGE
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE

    logger = get_logger("plhr-tools", "plhr_tools")
    if getattr(args, "verbose", False):
        logger.setLevel(DEBUG)

    try:
        return _run(args, logger)
    except (ConfigError, NonHermitianError, ValueError, FileNotFoundError) as e:
        logger.error(["cli", "configuration error", e])
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
