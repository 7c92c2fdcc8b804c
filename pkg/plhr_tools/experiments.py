"""Declarative experiments and the published convergence studies.

An experiment is a grid of (row, column) cells, each solved for several seeds.
Rows are solver/preconditioner/extraction schemes, columns are shifts or grid
levels. Iteration counts are aggregated per cell over the seeds.
"""

import json
from dataclasses import asdict, dataclass, field, fields
from logging import Logger, getLogger
from pathlib import Path
from time import perf_counter
from typing import Literal

import numpy as np

from .exceptions import ConfigError
from .grids import DEFAULT_COARSE_OMEGA, unknowns
from .loaders import FdLoader, FeLoader, Loader, MatrixMarketLoader
from .multigrid import DEFAULT_DEGREE, DEFAULT_DELTA, DEFAULT_NU
from .namers import RunPath
from .operators import DENSE_LIMIT
from .processors import (
    MULTIGRID,
    PRECONDITIONERS,
    SOLVERS,
    BaseNullProcessor,
    EigenProcessor,
    Processor,
    is_indefinite,
)
from .solvers import EXTRACTIONS, S_VECTORS, bplhr_storage_vectors
from .task import MultiSolveTask, RunRecord, SolveTask
from .utils import environment_stamp, to_jsonable, write_to_local_storage
from .writers import RunWriter, SummaryJsonWriter, run_log_frame

ProblemName = Literal["fd", "fe", "matrix-market"]
PROBLEMS = ("fd", "fe", "matrix-market")
SOLVER_NAMES = tuple(SOLVERS) + ("base_null",)
NOT_CONVERGED = "-"


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    problem: ProblemName = "fd"
    omega: int = 7
    ne: int = 50
    matrix_a: str | None = None
    matrix_b: str | None = None
    sigma: float | list[float] = 400.0
    solver: str = "bplhr_real"
    extraction: str = "t_harmonic"
    preconditioner: str = "av_mg"
    epsilon: float = 0.0
    flavor: Literal["abs", "plain"] = "abs"
    prec_seed: int = 0
    k: int = 1
    n_track: int | None = None
    tol: float = 1e-6
    maxit: int = 1000
    seeds: list[int] = field(default_factory=lambda: [0])
    s_vector: str = "rayleigh"
    locking: bool = True
    relative_tol: bool = False
    m_max: int | None = None
    omega_coarse: int = DEFAULT_COARSE_OMEGA
    poly_degree: int = DEFAULT_DEGREE
    nu: int = DEFAULT_NU
    delta: float = DEFAULT_DELTA
    mode: Literal["two_term", "three_term"] = "three_term"
    lambda_q: float | None = None
    jobs: int = 1
    fail_on_error: bool = False
    out: str = "results"

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem '{self.problem}', expected one of {PROBLEMS}")
        if self.problem == "matrix-market" and self.matrix_a is None:
            raise ConfigError("a matrix-market problem needs matrix_a")
        if self.solver not in SOLVER_NAMES:
            raise ConfigError(f"unknown solver '{self.solver}', expected one of {SOLVER_NAMES}")
        if self.preconditioner not in PRECONDITIONERS:
            raise ConfigError(
                f"unknown preconditioner '{self.preconditioner}', expected one of {PRECONDITIONERS}"
            )
        if self.extraction not in EXTRACTIONS:
            raise ConfigError(f"unknown extraction '{self.extraction}'")
        if self.s_vector not in S_VECTORS:
            raise ConfigError(f"unknown s-vector rule '{self.s_vector}'")
        if self.flavor not in ("abs", "plain"):
            raise ConfigError(f"unknown flavor '{self.flavor}'")
        if self.mode not in ("two_term", "three_term"):
            raise ConfigError(f"unknown BASE-NULL mode '{self.mode}'")

        if self.preconditioner in MULTIGRID and self.problem != "fd":
            raise ConfigError(
                f"preconditioner '{self.preconditioner}' is only available for the fd problem"
            )
        if self.preconditioner.startswith("dense") or self.preconditioner == "perturbed":
            size = self._known_size()
            if size is not None and size > DENSE_LIMIT:
                raise ConfigError(
                    f"preconditioner '{self.preconditioner}' needs a dense solve, "
                    f"n = {size} exceeds {DENSE_LIMIT}"
                )
        if (
            is_indefinite(self.preconditioner, self.flavor)
            and self.solver not in ("bgd", "base_null")
            and self.extraction != "harmonic"
        ):
            raise ConfigError(
                f"the indefinite preconditioner '{self.preconditioner}' needs extraction 'harmonic'"
            )
        if self.solver == "base_null" and is_indefinite(self.preconditioner, self.flavor):
            raise ConfigError("BASE-NULL needs a positive definite preconditioner")
        if self.solver in ("plhr", "base_null") and self.k != 1:
            raise ConfigError(f"solver '{self.solver}' computes one pair, got k = {self.k}")
        if self.extraction == "refined" and self.solver != "plhr":
            raise ConfigError("refined extraction is only available with the plhr solver")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be at least 1, got {self.jobs}")
        if not self.sigmas:
            raise ConfigError("at least one shift is required")

    def _known_size(self) -> int | None:
        if self.problem == "fd":
            return unknowns(self.omega)
        if self.problem == "fe":
            return (self.ne - 1) ** 2
        return None

    @property
    def sigmas(self) -> list[float]:
        return list(np.atleast_1d(self.sigma).astype(float))

    @property
    def row(self) -> str:
        return f"{self.solver}/{self.preconditioner}/{self.extraction}"

    @classmethod
    def from_dict(cls, values: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        return cls(**values)

    @classmethod
    def from_json(cls, path: str | Path, **overrides) -> "ExperimentConfig":
        with open(path) as src:
            values = json.load(src)
        if not isinstance(values, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(values)

    def to_dict(self) -> dict:
        return asdict(self)

    def loader(self) -> Loader:
        if self.problem == "fd":
            return FdLoader(self.omega)
        if self.problem == "fe":
            return FeLoader(self.ne)
        return MatrixMarketLoader(self.matrix_a, self.matrix_b)

    def solver_kwargs(self, sigma: float) -> dict:
        return dict(
            sigma=sigma,
            k=self.k,
            tol=self.tol,
            maxit=self.maxit,
            extraction=self.extraction,
            locking=self.locking,
            n_track=self.n_track,
            s_vector=self.s_vector,
            relative_tol=self.relative_tol,
            m_max=self.m_max,
        )

    def preconditioner_kwargs(self, sigma: float) -> dict:
        return dict(
            name=self.preconditioner,
            sigma=sigma,
            omega=self.omega if self.problem == "fd" else None,
            epsilon=self.epsilon,
            flavor=self.flavor,
            seed=self.prec_seed,
            omega_coarse=self.omega_coarse,
            poly_degree=self.poly_degree,
            nu=self.nu,
            delta=self.delta,
        )

    def processor(
        self, sigma: float, loader: Loader, logger: Logger = getLogger()
    ) -> Processor:
        if self.solver != "base_null":
            return EigenProcessor(
                self.solver,
                self.solver_kwargs(sigma),
                self.preconditioner_kwargs(sigma),
                logger=logger,
            )
        lambda_q = self.lambda_q
        if lambda_q is None:
            lambda_q = float(loader.spectrum().nearest(sigma, 1)[0])
        return BaseNullProcessor(
            lambda_q,
            self.mode,
            self.tol,
            self.maxit,
            self.preconditioner_kwargs(sigma),
            logger=logger,
        )


@dataclass
class Cell:
    row: str
    column: str
    config: ExperimentConfig
    sigma: float


@dataclass
class RunReport:
    name: str
    config: dict
    records: list[RunRecord]
    wall_time: float
    environment: dict
    rows: list[str] = field(default_factory=list)
    columns: list[str] = field(default_factory=list)
    maxit: int = 1000
    published: dict = field(default_factory=dict)
    storage: dict = field(default_factory=dict)
    summary_path: str | None = None
    log_path: str | None = None

    @property
    def converged(self) -> bool:
        return all(record.converged for record in self.records)

    def cell_records(self, row: str, column: str) -> list[RunRecord]:
        return [r for r in self.records if r.row == row and r.column == column]

    def bands(self) -> dict:
        """min / median / max iteration counts of the converged seeds per cell."""
        bands = {}
        for row in self.rows:
            bands[row] = {}
            for column in self.columns:
                records = self.cell_records(row, column)
                counts = [r.iterations for r in records if r.converged]
                bands[row][column] = dict(
                    seeds=len(records),
                    converged=len(counts),
                    min=min(counts) if counts else None,
                    median=float(np.median(counts)) if counts else None,
                    max=max(counts) if counts else None,
                )
        return bands

    def table(self) -> dict:
        """Median iteration count per cell, or "-" when fewer than half of the
        seeds converged."""
        table = {}
        for row, cells in self.bands().items():
            table[row] = {
                column: (
                    band["median"]
                    if band["converged"] and 2 * band["converged"] >= band["seeds"]
                    else NOT_CONVERGED
                )
                for column, band in cells.items()
            }
        return table

    def summary(self) -> dict:
        return dict(
            name=self.name,
            converged=self.converged,
            wall_time=self.wall_time,
            config=self.config,
            environment=self.environment,
            rows=self.rows,
            columns=self.columns,
            table=self.table(),
            bands=self.bands(),
            published=self.published,
            storage=self.storage,
            runs=[record.to_dict() for record in self.records],
        )


def _run_cells(
    name: str,
    cells: list[Cell],
    out: str,
    jobs: int = 1,
    fail_on_error: bool = False,
    echo: dict | None = None,
    published: dict | None = None,
    logger: Logger = getLogger(),
) -> RunReport:
    start = perf_counter()
    itempath = RunPath(name, folder=out)
    writer = RunWriter(itempath)
    loaders: dict[tuple, Loader] = {}

    tasks = []
    for cell in cells:
        config = cell.config
        key = (config.problem, config.omega, config.ne, config.matrix_a, config.matrix_b)
        loader = loaders.setdefault(key, config.loader())
        processor = config.processor(cell.sigma, loader, logger=logger)
        for seed in config.seeds:
            tasks.append(
                SolveTask(
                    (cell.row, cell.column, seed), seed, loader, processor, writer, logger
                )
            )

    records = MultiSolveTask(
        tasks, logger=logger, fail_on_error=fail_on_error, jobs=jobs, progress=jobs > 1
    ).run()

    rows = list(dict.fromkeys(cell.row for cell in cells))
    columns = list(dict.fromkeys(cell.column for cell in cells))
    storage = {
        cell.row: bplhr_storage_vectors(cell.config.k, cell.config.problem == "fd")
        for cell in cells
        if cell.config.solver in ("bplhr", "bplhr_real")
    }
    report = RunReport(
        name=name,
        config=echo if echo is not None else {},
        records=records,
        wall_time=perf_counter() - start,
        environment=environment_stamp(),
        rows=rows,
        columns=columns,
        maxit=max(cell.config.maxit for cell in cells),
        published=published or {},
        storage=storage,
    )
    report.summary_path = SummaryJsonWriter(itempath).write(report.summary())
    report.log_path = itempath.log_path()
    write_to_local_storage(run_log_frame(records), report.log_path)
    logger.info([name, "complete", report.summary_path])
    return report


def _column_label(value: float) -> str:
    return f"{value:g}"


def run_experiment(
    config: ExperimentConfig, logger: Logger = getLogger()
) -> RunReport:
    """Solve every shift of the configuration for every seed."""
    cells = [
        Cell(config.row, _column_label(sigma), config, sigma) for sigma in config.sigmas
    ]
    return _run_cells(
        config.name,
        cells,
        config.out,
        jobs=config.jobs,
        fail_on_error=config.fail_on_error,
        echo=to_jsonable(config.to_dict()),
        logger=logger,
    )


# Solver, preconditioner and extraction of the scheme rows
TABLE_ROWS = {
    "BPLHR/AV/T-harm": dict(solver="bplhr_real", preconditioner="av_mg", extraction="t_harmonic"),
    "BPLHR/AV/harm": dict(solver="bplhr_real", preconditioner="av_mg", extraction="harmonic"),
    "BPLHR/Indef/harm": dict(solver="bplhr_real", preconditioner="inv_mg", extraction="harmonic"),
    "BGD/AV/harm": dict(solver="bgd", preconditioner="av_mg", extraction="harmonic"),
    "BGD/Indef/harm": dict(solver="bgd", preconditioner="inv_mg", extraction="harmonic"),
}

TABLES = {
    "table1": dict(
        k=11, n_track=10, tol=1e-6, maxit=1000, omegas=(7,),
        shifts=(400, 450, 500, 550, 600, 650, 700), rows=tuple(TABLE_ROWS),
    ),
    "table2": dict(
        k=21, n_track=20, tol=1e-6, maxit=1000, omegas=(7,),
        shifts=(800, 900, 1000, 1100, 1200, 1300, 1400), rows=tuple(TABLE_ROWS),
    ),
    "table3": dict(
        k=5, n_track=4, tol=1e-4, maxit=1000, omegas=(6, 7, 8, 9),
        shifts=(400,), rows=("BPLHR/AV/T-harm",),
    ),
}

# Iteration counts reported for the published runs
PUBLISHED_COUNTS = {
    "table1": {
        "BPLHR/AV/T-harm": [57, 81, 68, 133, 117, 190, 278],
        "BGD/AV/harm": [None, "-", None, "-", None, "-", "-"],
        "BGD/Indef/harm": [36, None, None, None, None, None, None],
    },
    "table2": {"BPLHR/AV/T-harm": [270, 168, 177, 344, 365, 363, 192]},
    "table3": {"BPLHR/AV/T-harm": [41, 42, 43, 42]},
}


def reproduce_table(
    which: Literal["table1", "table2", "table3"],
    seeds: list[int] = (0, 1, 2),
    shifts: list[float] | None = None,
    rows: list[str] | None = None,
    omegas: list[int] | None = None,
    maxit: int | None = None,
    out: str = "results",
    jobs: int = 1,
    logger: Logger = getLogger(),
) -> RunReport:
    """Run the scheme rows of a table over its shifts (tables 1 and 2) or
    grid levels (table 3). Every row at a given column uses the same seeds."""
    if which not in TABLES:
        raise ConfigError(f"unknown table '{which}', expected one of {tuple(TABLES)}")
    setup = TABLES[which]
    shifts = setup["shifts"] if shifts is None else shifts
    omegas = setup["omegas"] if omegas is None else omegas
    rows = setup["rows"] if rows is None else rows
    unknown = set(rows) - set(TABLE_ROWS)
    if unknown:
        raise ConfigError(f"unknown table rows {sorted(unknown)}")

    cells = []
    for row in rows:
        for omega in omegas:
            for sigma in shifts:
                config = ExperimentConfig(
                    name=which,
                    problem="fd",
                    omega=omega,
                    sigma=sigma,
                    k=setup["k"],
                    n_track=setup["n_track"],
                    tol=setup["tol"],
                    maxit=setup["maxit"] if maxit is None else maxit,
                    seeds=list(seeds),
                    out=out,
                    **TABLE_ROWS[row],
                )
                column = f"omega={omega}" if which == "table3" else _column_label(sigma)
                cells.append(Cell(row, column, config, sigma))

    echo = dict(which=which, seeds=list(seeds), shifts=list(shifts), omegas=list(omegas))
    return _run_cells(
        which, cells, out, jobs=jobs, echo=echo,
        published=PUBLISHED_COUNTS[which], logger=logger,
    )


FIGURE_SHIFTS = (497.0, 980.0)


def _figure_cells(which: str, seeds: list[int], maxit: int | None) -> list[Cell]:
    def fe(row: str, column: str, sigma: float, default_maxit: int, **kwargs) -> Cell:
        config = ExperimentConfig(
            name=which,
            problem="fe",
            ne=50,
            sigma=sigma,
            k=1,
            tol=1e-8,
            maxit=default_maxit if maxit is None else maxit,
            seeds=list(seeds),
            preconditioner="perturbed",
            **kwargs,
        )
        return Cell(row, column, config, sigma)

    if which == "figure1":
        return [
            cell
            for sigma in FIGURE_SHIFTS
            for cell in (
                fe("PLHR", _column_label(sigma), sigma, 500, solver="plhr", epsilon=1e-5),
                fe("BASE-NULL", _column_label(sigma), sigma, 500, solver="base_null",
                   epsilon=1e-5, mode="three_term"),
            )
        ]
    if which == "figure2":
        return [
            cell
            for sigma in FIGURE_SHIFTS
            for cell in (
                fe("PLHR", _column_label(sigma), sigma, 500, solver="plhr", epsilon=1e-5),
                fe("PLHR-noS", _column_label(sigma), sigma, 500, solver="plhr",
                   epsilon=1e-5, s_vector="none"),
            )
        ]
    if which == "figure3":
        variants = {
            "PLHR/AV/T-harm": dict(flavor="abs", extraction="t_harmonic"),
            "PLHR/AV/harm": dict(flavor="abs", extraction="harmonic"),
            "PLHR/Indef/harm": dict(flavor="plain", extraction="harmonic"),
        }
        return [
            fe(row, f"eps={epsilon:g}", 980.0, 2000, solver="plhr", epsilon=epsilon, **kwargs)
            for epsilon in (1e-4, 1e-3)
            for row, kwargs in variants.items()
        ]
    raise ConfigError(f"unknown figure '{which}', expected figure1, figure2 or figure3")


def reproduce_figure(
    which: Literal["figure1", "figure2", "figure3"],
    seeds: list[int] | None = None,
    maxit: int | None = None,
    out: str = "results",
    jobs: int = 1,
    logger: Logger = getLogger(),
) -> RunReport:
    """Histories of the finite-element studies; one CSV per run."""
    if seeds is None:
        seeds = list(range(10)) if which == "figure2" else [0]
    cells = _figure_cells(which, seeds, maxit)
    echo = dict(which=which, seeds=list(seeds))
    return _run_cells(which, cells, out, jobs=jobs, echo=echo, logger=logger)
