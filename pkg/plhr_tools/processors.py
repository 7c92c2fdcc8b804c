from abc import ABC, abstractmethod
from logging import Logger, getLogger
from threading import Lock
from typing import Literal

from .exceptions import ConfigError
from .grids import DEFAULT_COARSE_OMEGA
from .multigrid import (
    DEFAULT_DEGREE,
    DEFAULT_DELTA,
    DEFAULT_NU,
    av_mg_preconditioner,
    build_hierarchy,
    inv_mg_preconditioner,
)
from .operators import BlockOperator, Pencil, dense_av_inverse, perturbed_preconditioner
from .solvers import (
    BaseNullResult,
    EigenResult,
    NullMode,
    SolverConfig,
    base_null_solve,
    bgd_solve,
    bplhr_real_solve,
    bplhr_solve,
    plhr_solve,
)
from .utils import initial_block

PreconditionerName = Literal[
    "av_mg", "inv_mg", "dense_abs", "dense_plain", "perturbed", "identity"
]
PRECONDITIONERS = ("av_mg", "inv_mg", "dense_abs", "dense_plain", "perturbed", "identity")
# Multigrid preconditioners only exist for the finite-difference Laplacian
MULTIGRID = ("av_mg", "inv_mg")

SOLVERS = {
    "plhr": plhr_solve,
    "bplhr": bplhr_solve,
    "bplhr_real": bplhr_real_solve,
    "bgd": bgd_solve,
}


def is_indefinite(preconditioner: str, flavor: str = "abs") -> bool:
    return preconditioner in ("inv_mg", "dense_plain") or (
        preconditioner == "perturbed" and flavor == "plain"
    )


def build_preconditioner(
    pencil: Pencil,
    name: PreconditionerName,
    sigma: float,
    omega: int | None = None,
    epsilon: float = 0.0,
    flavor: Literal["abs", "plain"] = "abs",
    seed: int = 0,
    omega_coarse: int = DEFAULT_COARSE_OMEGA,
    poly_degree: int = DEFAULT_DEGREE,
    nu: int = DEFAULT_NU,
    delta: float = DEFAULT_DELTA,
    logger: Logger = getLogger(),
) -> BlockOperator | None:
    """The preconditioner T of a run; None stands for the identity."""
    if name == "identity":
        return None
    if name in MULTIGRID:
        if omega is None:
            raise ConfigError(f"preconditioner '{name}' needs a finite-difference problem")
        hierarchy = build_hierarchy(
            omega, min(omega_coarse, omega), sigma, poly_degree, nu, delta, logger=logger
        )
        if name == "av_mg":
            return av_mg_preconditioner(hierarchy)
        return inv_mg_preconditioner(hierarchy)
    if name == "dense_abs":
        return dense_av_inverse(pencil, sigma, "abs")
    if name == "dense_plain":
        return dense_av_inverse(pencil, sigma, "plain")
    if name == "perturbed":
        return perturbed_preconditioner(pencil, sigma, epsilon, seed, flavor)
    raise ConfigError(f"unknown preconditioner '{name}'")


class Processor(ABC):
    def __init__(self, logger: Logger = getLogger()):
        self.logger = logger

    @abstractmethod
    def process(self, pencil: Pencil, seed: int):
        pass


class _PreconditionedProcessor(Processor):
    def __init__(self, preconditioner_kwargs: dict, logger: Logger = getLogger()):
        super().__init__(logger)
        self._preconditioner_kwargs = preconditioner_kwargs
        self._preconditioner = None
        self._built_for = None
        self._lock = Lock()

    def preconditioner(self, pencil: Pencil) -> BlockOperator | None:
        # Built once per pencil and shared by every seed
        with self._lock:
            if self._built_for is not pencil:
                self._preconditioner = build_preconditioner(
                    pencil, logger=self.logger, **self._preconditioner_kwargs
                )
                self._built_for = pencil
            return self._preconditioner


class EigenProcessor(_PreconditionedProcessor):
    def __init__(
        self,
        solver: str,
        solver_kwargs: dict,
        preconditioner_kwargs: dict,
        logger: Logger = getLogger(),
    ):
        if solver not in SOLVERS:
            raise ConfigError(f"unknown solver '{solver}'")
        super().__init__(preconditioner_kwargs, logger)
        self.solver = solver
        self._solver_kwargs = solver_kwargs

    def process(self, pencil: Pencil, seed: int) -> EigenResult:
        config = SolverConfig(seed=seed, **self._solver_kwargs)
        T = self.preconditioner(pencil)
        return SOLVERS[self.solver](pencil, T, config, logger=self.logger)


class BaseNullProcessor(_PreconditionedProcessor):
    def __init__(
        self,
        lambda_q: float,
        mode: NullMode,
        tol: float,
        maxit: int,
        preconditioner_kwargs: dict,
        logger: Logger = getLogger(),
    ):
        super().__init__(preconditioner_kwargs, logger)
        self.lambda_q = lambda_q
        self.mode = mode
        self.tol = tol
        self.maxit = maxit

    def process(self, pencil: Pencil, seed: int) -> BaseNullResult:
        v0 = initial_block(pencil.n, 1, seed)[:, 0]
        return base_null_solve(
            pencil,
            self.preconditioner(pencil),
            self.lambda_q,
            v0,
            mode=self.mode,
            tol=self.tol,
            maxit=self.maxit,
            logger=self.logger,
        )
