"""Interior eigensolvers for Hermitian pencils A v = lambda B v near a shift sigma.

PLHR and its block form BPLHR share one recurrence: the trial subspace
[V, W, S, P] with W = T(AV - BV Lambda) and S = T(AW - BW Lambda) is projected
with the T-harmonic pencil, the k solutions of smallest |xi| become the new V
and the part of them outside V becomes the new conjugate directions P.
"""

from dataclasses import dataclass, field, replace
from logging import Logger, getLogger
from typing import Literal

import numpy as np
import scipy.linalg as sla
import xarray as xr

from .dense import (
    DROP_TOL,
    SmallEigenSolution,
    _b_orthonormalize,
    apply_operator,
    b_normalize,
    conjugate_column_layout,
    rayleigh_quotients,
    rayleigh_ritz_hermitian,
    solve_projected_pencil,
    split_conjugate_basis,
)
from .exceptions import ConfigError, DegenerateProjectionError
from .operators import Pencil
from .utils import check_finite, column_norms, initial_block

Extraction = Literal["t_harmonic", "harmonic", "refined"]
SVector = Literal["rayleigh", "theta", "sigma", "none"]
Status = Literal["converged", "maxit", "breakdown"]
NullMode = Literal["two_term", "three_term"]

EXTRACTIONS = ("t_harmonic", "harmonic", "refined")
S_VECTORS = ("rayleigh", "theta", "sigma", "none")
# Basis reductions tried, in order, when the projected problem degenerates
_SHRINK_ORDER = ((), ("P",), ("P", "S"))
# Relative T-residual decrease below which BASE-NULL is considered stuck
_STAGNATION = 1e-12


@dataclass
class SolverConfig:
    sigma: float
    k: int = 1
    tol: float = 1e-6
    maxit: int = 1000
    seed: int = 0
    extraction: Extraction = "t_harmonic"
    locking: bool = True
    record_history: bool = True
    n_track: int | None = None
    s_vector: SVector = "rayleigh"
    relative_tol: bool = False
    drop_tol: float = DROP_TOL
    m_max: int | None = None

    def __post_init__(self):
        if not np.isfinite(self.sigma):
            raise ConfigError(f"sigma must be finite, got {self.sigma}")
        if self.k < 1:
            raise ConfigError(f"k must be at least 1, got {self.k}")
        if not self.tol > 0:
            raise ConfigError(f"tol must be positive, got {self.tol}")
        if self.maxit < 0:
            raise ConfigError(f"maxit must be non-negative, got {self.maxit}")
        if self.extraction not in EXTRACTIONS:
            raise ConfigError(f"unknown extraction '{self.extraction}'")
        if self.s_vector not in S_VECTORS:
            raise ConfigError(f"unknown s-vector rule '{self.s_vector}'")
        if self.extraction == "refined" and self.k != 1:
            raise ConfigError("refined extraction is only defined for k = 1")
        if not 0 <= self.drop_tol < 1:
            raise ConfigError(f"drop_tol must lie in [0, 1), got {self.drop_tol}")

        if self.n_track is None:
            self.n_track = self.k
        if not 1 <= self.n_track <= self.k:
            raise ConfigError(f"n_track must lie in [1, {self.k}], got {self.n_track}")
        if self.m_max is None:
            self.m_max = 6 * self.k
        if self.m_max < 2 * self.k:
            raise ConfigError(f"m_max must be at least 2k = {2 * self.k}, got {self.m_max}")


@dataclass
class SolverState:
    V: np.ndarray
    AV: np.ndarray
    BV: np.ndarray
    Lambda: np.ndarray
    P: np.ndarray | None = None
    W: np.ndarray | None = None
    S: np.ndarray | None = None
    locked: np.ndarray | None = None
    residual_norms: np.ndarray | None = None
    theta: np.ndarray | None = None
    iteration: int = 0

    def __post_init__(self):
        if self.locked is None:
            self.locked = np.zeros(self.k, dtype=bool)

    @property
    def k(self) -> int:
        return self.V.shape[1]

    @property
    def active(self) -> np.ndarray:
        return np.flatnonzero(~self.locked)

    def residuals(self) -> np.ndarray:
        return self.AV - self.BV * self.Lambda


@dataclass
class EigenResult:
    values: np.ndarray
    vectors: np.ndarray
    residual_norms: np.ndarray
    iterations: int
    status: Status
    history: xr.Dataset
    solver: str
    seed: int
    message: str = ""
    n_conjugate_pairs: int = 0
    subspace_dims: list[int] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def summary(self) -> dict:
        return dict(
            solver=self.solver,
            status=self.status,
            converged=self.converged,
            iterations=self.iterations,
            seed=self.seed,
            values=self.values,
            residual_norms=self.residual_norms,
            n_conjugate_pairs=self.n_conjugate_pairs,
            subspace_dims=self.subspace_dims,
            message=self.message,
        )


@dataclass
class BaseNullResult:
    vector: np.ndarray
    value: float
    residual_norms: np.ndarray
    t_residual_norms: np.ndarray
    iterations: int
    status: Literal["converged", "maxit", "stagnated"]
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def history(self) -> xr.Dataset:
        steps = np.arange(len(self.residual_norms))
        return xr.Dataset(
            {
                "residual_norm": ("iter", self.residual_norms),
                "t_residual_norm": ("iter", self.t_residual_norms),
            },
            coords={"iter": steps},
        )

    def summary(self) -> dict:
        return dict(
            solver="base_null",
            status=self.status,
            converged=self.converged,
            iterations=self.iterations,
            values=[self.value],
            residual_norms=self.residual_norms[-1:],
            message=self.message,
        )


class _HistoryRecorder:
    def __init__(self, k: int, enabled: bool = True):
        self.k = k
        self.enabled = enabled
        self._residuals = []
        self._quotients = []

    def add(self, residual_norms: np.ndarray, quotients: np.ndarray) -> None:
        if self.enabled:
            self._residuals.append(np.array(residual_norms, dtype=float))
            self._quotients.append(np.array(quotients, dtype=float))

    def to_dataset(self, **attrs) -> xr.Dataset:
        rows = len(self._residuals)
        residuals = np.array(self._residuals, dtype=float).reshape(rows, self.k)
        quotients = np.array(self._quotients, dtype=float).reshape(rows, self.k)
        return xr.Dataset(
            {
                "residual_norm": (("iter", "pair_index"), residuals),
                "rayleigh_quotient": (("iter", "pair_index"), quotients),
                "max_residual": ("iter", residuals.max(axis=1)),
            },
            coords={"iter": np.arange(1, rows + 1), "pair_index": np.arange(self.k)},
            attrs=attrs,
        )


def _effective_residuals(
    residual_norms: np.ndarray, Lambda: np.ndarray, relative: bool
) -> np.ndarray:
    if not relative:
        return residual_norms
    scale = np.abs(Lambda)
    return residual_norms / np.where(scale > 0, scale, 1.0)


def _tracked(Lambda: np.ndarray, sigma: float, n_track: int) -> np.ndarray:
    return np.argsort(np.abs(Lambda - sigma), kind="stable")[:n_track]


def _initial_state(
    pencil: Pencil, k: int, seed: int, dtype, X0: np.ndarray | None = None
) -> SolverState:
    V = initial_block(pencil.n, k, seed) if X0 is None else np.asarray(X0)
    if V.ndim == 1:
        V = V[:, None]
    if V.shape != (pencil.n, k):
        raise ValueError(f"initial block has shape {V.shape}, expected {(pencil.n, k)}")
    check_finite(V, "initial block")
    if not np.issubdtype(dtype, np.complexfloating) and np.iscomplexobj(V):
        raise ValueError("complex initial block given to a real-arithmetic solver")

    V, BV = b_normalize(V.astype(dtype), B=pencil.B)
    AV = pencil.apply_a(V)
    return SolverState(V, AV, BV, rayleigh_quotients(V, AV, BV))


def _check_preconditioner(T, pencil: Pencil, extraction: str) -> None:
    if T is None:
        return
    if T.shape != (pencil.n, pencil.n):
        raise ConfigError(f"preconditioner of shape {T.shape} does not fit n = {pencil.n}")
    if getattr(T, "definite", True) is False and extraction != "harmonic":
        raise ConfigError(
            f"an indefinite preconditioner requires extraction 'harmonic', got '{extraction}'"
        )


def soft_lock_update(
    state: SolverState, tol: float, relative: bool = False
) -> SolverState:
    """Lock the columns whose residual is below tol.

    Locked columns stay in V and in the projection but generate no W, S or P
    columns. Locks are recomputed from the current residuals, so a column whose
    residual grows again is released.
    """
    if state.residual_norms is None:
        return state
    effective = _effective_residuals(state.residual_norms, state.Lambda, relative)
    return replace(state, locked=effective <= tol)


def trial_blocks(
    state: SolverState,
    pencil: Pencil,
    T,
    sigma: float,
    s_vector: SVector = "rayleigh",
) -> tuple[np.ndarray, np.ndarray | None]:
    """Preconditioned residuals W and the second-order directions S of the
    unlocked columns. S is None for the s_vector = "none" variant."""
    active = state.active
    n = state.V.shape[0]
    if len(active) == 0:
        empty = np.empty((n, 0), dtype=state.V.dtype)
        return empty, None if s_vector == "none" else empty

    Lambda = state.Lambda[active]
    W = apply_operator(T, state.AV[:, active] - state.BV[:, active] * Lambda)
    if s_vector == "none":
        return W, None

    if s_vector == "rayleigh":
        shifts = Lambda
    elif s_vector == "theta":
        shifts = Lambda if state.theta is None else state.theta[active]
    else:
        shifts = np.full(len(active), sigma)
    S = apply_operator(T, pencil.apply_a(W) - pencil.apply_b(W) * shifts)
    return W, S


def t_harmonic_extract(
    Zhat: np.ndarray,
    pencil: Pencil,
    T,
    sigma: float,
    k: int | None = None,
    AZ: np.ndarray | None = None,
    BZ: np.ndarray | None = None,
) -> tuple[np.ndarray, SmallEigenSolution]:
    """T-harmonic Rayleigh-Ritz on span(Zhat).

    Solves Z*(A - sigma B) T (A - sigma B) Z y = xi Z*(A - sigma B) T B Z y and
    returns theta = xi + sigma together with the pairs, ordered by |xi|. With
    T = None the projection is the standard harmonic Rayleigh-Ritz.
    """
    AZ = pencil.apply_a(Zhat) if AZ is None else AZ
    BZ = pencil.apply_b(Zhat) if BZ is None else BZ
    CZ = AZ - sigma * BZ
    G = apply_operator(T, CZ)
    L = CZ.conj().T @ G
    M = G.conj().T @ BZ
    solution = solve_projected_pencil(L, M)
    if k is not None:
        solution = solution.select(k)
    return solution.values + sigma, solution


def _refined_coefficients(
    Zhat: np.ndarray,
    pencil: Pencil,
    T,
    lambda_tilde: float,
    AZ: np.ndarray | None = None,
    BZ: np.ndarray | None = None,
) -> tuple[float, np.ndarray]:
    AZ = pencil.apply_a(Zhat) if AZ is None else AZ
    BZ = pencil.apply_b(Zhat) if BZ is None else BZ
    CZ = AZ - lambda_tilde * BZ
    H = CZ.conj().T @ apply_operator(T, CZ)
    gram = Zhat.conj().T @ BZ
    try:
        values, Y = sla.eigh((H + H.conj().T) / 2, (gram + gram.conj().T) / 2)
    except sla.LinAlgError as e:
        raise DegenerateProjectionError(f"refined projection failed: {e}") from e
    return values[0], Y[:, 0]


def refined_extract(
    Zhat: np.ndarray,
    pencil: Pencil,
    T,
    lambda_tilde: float,
    AZ: np.ndarray | None = None,
    BZ: np.ndarray | None = None,
) -> tuple[float, np.ndarray]:
    """The B-unit vector of span(Zhat) minimizing ||Av - lambda_tilde Bv||_T,
    with the minimal squared T-norm."""
    theta_sq, y = _refined_coefficients(Zhat, pencil, T, lambda_tilde, AZ, BZ)
    v, _ = b_normalize((Zhat @ y)[:, None], B=pencil.B)
    return theta_sq, v[:, 0]


def _extract(
    blocks: dict[str, np.ndarray],
    pencil: Pencil,
    T,
    config: SolverConfig,
    state: SolverState,
    real: bool,
) -> tuple[SolverState, int, np.ndarray]:
    k = state.k
    labels = np.concatenate([np.full(b.shape[1], name) for name, b in blocks.items()])
    Q, BQ, kept = _b_orthonormalize(
        np.concatenate(list(blocks.values()), axis=1), pencil.B, config.drop_tol
    )
    if Q.shape[1] < k:
        raise DegenerateProjectionError(
            f"trial basis of rank {Q.shape[1]} cannot hold {k} vectors"
        )
    labels = labels[kept]
    AQ = pencil.apply_a(Q)

    pairing, n_pairs = [], 0
    if config.extraction == "refined":
        _, y = _refined_coefficients(Q, pencil, T, state.Lambda[0], AQ, BQ)
        Y, theta = y[:, None], None
    else:
        projection = T if config.extraction == "t_harmonic" else None
        thetas, solution = t_harmonic_extract(
            Q, pencil, projection, config.sigma, AZ=AQ, BZ=BQ
        )
        if len(solution) < k:
            raise DegenerateProjectionError("projected problem lost eigenpairs")
        if real:
            Y, pairing, _ = split_conjugate_basis(solution.vectors, k)
            real_columns, pairs, tail = conjugate_column_layout(solution.vectors, k)
            tail = [] if tail is None else [tail]
            theta = thetas[real_columns + pairs + tail + pairs].real
            n_pairs = len(pairing)
        else:
            Y = solution.vectors[:, :k]
            theta = thetas[:k].real

    directions = labels != "V"
    V, AV, BV = Q @ Y, AQ @ Y, BQ @ Y
    P = Q[:, directions] @ Y[directions]

    # Paired quotients need the relative scale of the real and imaginary parts
    Lambda = rayleigh_quotients(V, AV, BV, pairing)
    norms = np.sqrt(np.real(np.sum(V.conj() * BV, axis=0)))
    if np.any(norms == 0):
        raise DegenerateProjectionError("extracted vector vanished")
    new_state = SolverState(
        V / norms,
        AV / norms,
        BV / norms,
        Lambda,
        P=P,
        W=blocks.get("W"),
        S=blocks.get("S"),
        locked=state.locked,
        theta=theta,
        iteration=state.iteration + 1,
    )
    return new_state, n_pairs, Q


def _step(
    pencil: Pencil, T, config: SolverConfig, state: SolverState, real: bool
) -> tuple[SolverState, int]:
    W, S = trial_blocks(state, pencil, T, config.sigma, config.s_vector)
    P = None if state.P is None else state.P[:, state.active]
    candidates = {"V": state.V, "W": W, "S": S, "P": P}
    available = {
        name: b for name, b in candidates.items() if b is not None and b.shape[1]
    }

    tried, error = [], None
    for dropped in _SHRINK_ORDER:
        blocks = {name: b for name, b in available.items() if name not in dropped}
        if list(blocks) in tried:
            continue
        tried.append(list(blocks))
        try:
            new_state, n_pairs, _ = _extract(blocks, pencil, T, config, state, real)
            return new_state, n_pairs
        except DegenerateProjectionError as e:
            error = e
    raise error


def _final_pairs(
    pencil: Pencil, V: np.ndarray, config: SolverConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    values, X = rayleigh_ritz_hermitian(
        V, pencil.A, pencil.B, config.sigma, config.drop_tol, allow_rank_loss=True
    )
    values, X = values[: config.n_track], X[:, : config.n_track]
    R = pencil.apply_a(X) - pencil.apply_b(X) * values
    return values, X, column_norms(R)


def _iterate(
    pencil: Pencil,
    T,
    config: SolverConfig,
    X0: np.ndarray | None,
    real: bool,
    name: str,
    logger: Logger,
) -> EigenResult:
    _check_preconditioner(T, pencil, config.extraction)
    dtype = np.float64 if real else np.complex128
    state = _initial_state(pencil, config.k, config.seed, dtype, X0)
    recorder = _HistoryRecorder(config.k, config.record_history)
    status, message, n_pairs = "maxit", "", 0

    while True:
        state.residual_norms = column_norms(state.residuals())
        if state.iteration > 0:
            recorder.add(state.residual_norms, state.Lambda)

        tracked = _tracked(state.Lambda, config.sigma, config.n_track)
        effective = _effective_residuals(
            state.residual_norms, state.Lambda, config.relative_tol
        )
        if np.all(effective[tracked] <= config.tol):
            status = "converged"
            break
        if state.iteration >= config.maxit:
            break

        if config.locking:
            state = soft_lock_update(state, config.tol, config.relative_tol)
        try:
            state, pairs = _step(pencil, T, config, state, real)
        except DegenerateProjectionError as e:
            status, message = "breakdown", str(e)
            logger.warning(f"{name} breakdown at iteration {state.iteration}: {e}")
            break
        n_pairs += pairs
        logger.debug(
            f"{name} iteration {state.iteration}: "
            f"max residual {effective.max():.3e}, locked {int(state.locked.sum())}"
        )

    values, vectors, residual_norms = _final_pairs(pencil, state.V, config)
    logger.info(f"{name} {status} after {state.iteration} iterations, sigma {config.sigma}")
    return EigenResult(
        values=values,
        vectors=vectors,
        residual_norms=residual_norms,
        iterations=state.iteration,
        status=status,
        history=recorder.to_dataset(solver=name, sigma=config.sigma, seed=config.seed),
        solver=name,
        seed=config.seed,
        message=message,
        n_conjugate_pairs=n_pairs,
    )


def plhr_solve(
    pencil: Pencil,
    T,
    config: SolverConfig,
    X0: np.ndarray | None = None,
    logger: Logger = getLogger(),
) -> EigenResult:
    """Single-vector PLHR in complex arithmetic.

    With extraction "refined" the T-harmonic selection is replaced by the
    minimizer of ||Av - lambda Bv||_T for the current Rayleigh quotient lambda.
    """
    if config.k != 1:
        raise ConfigError(f"plhr_solve computes one pair, got k = {config.k}")
    return _iterate(pencil, T, config, X0, real=False, name="plhr", logger=logger)


def bplhr_solve(
    pencil: Pencil,
    T,
    config: SolverConfig,
    X0: np.ndarray | None = None,
    logger: Logger = getLogger(),
) -> EigenResult:
    """Block PLHR in complex arithmetic."""
    return _iterate(pencil, T, config, X0, real=False, name="bplhr", logger=logger)


def bplhr_real_solve(
    pencil: Pencil,
    T,
    config: SolverConfig,
    X0: np.ndarray | None = None,
    logger: Logger = getLogger(),
) -> EigenResult:
    """Block PLHR for real pencils in real arithmetic.

    Conjugate pairs of projected eigenvectors are replaced by their real and
    imaginary parts, which then share one Rayleigh quotient. A complex vector at
    the end of the selection keeps only its real part, so running with one column
    more than the number of tracked pairs is recommended.
    """
    if not pencil.is_real:
        raise ConfigError("bplhr_real_solve needs a real pencil")
    if T is not None and np.issubdtype(T.dtype, np.complexfloating):
        raise ConfigError("bplhr_real_solve needs a real preconditioner")
    return _iterate(pencil, T, config, X0, real=True, name="bplhr_real", logger=logger)


def bgd_solve(
    pencil: Pencil,
    T,
    config: SolverConfig,
    X0: np.ndarray | None = None,
    real: bool | None = None,
    logger: Logger = getLogger(),
) -> EigenResult:
    """Block generalized Davidson with harmonic Rayleigh-Ritz.

    The search space grows by the preconditioned residuals of the unlocked
    columns and collapses to the current approximations once it would exceed
    config.m_max. `subspace_dims` records the dimension of every projection.
    The preconditioner only needs to be Hermitian.
    """
    if T is not None and T.shape != (pencil.n, pencil.n):
        raise ConfigError(f"preconditioner of shape {T.shape} does not fit n = {pencil.n}")
    real = pencil.is_real if real is None else real
    config = replace(config, extraction="harmonic")
    dtype = np.float64 if real else np.complex128
    state = _initial_state(pencil, config.k, config.seed, dtype, X0)
    recorder = _HistoryRecorder(config.k, config.record_history)
    status, message, n_pairs, dims = "maxit", "", 0, []
    X = state.V

    while True:
        state.residual_norms = column_norms(state.residuals())
        if state.iteration > 0:
            recorder.add(state.residual_norms, state.Lambda)

        tracked = _tracked(state.Lambda, config.sigma, config.n_track)
        effective = _effective_residuals(
            state.residual_norms, state.Lambda, config.relative_tol
        )
        if np.all(effective[tracked] <= config.tol):
            status = "converged"
            break
        if state.iteration >= config.maxit:
            break

        if config.locking:
            state = soft_lock_update(state, config.tol, config.relative_tol)
        W, _ = trial_blocks(state, pencil, T, config.sigma, "none")
        if X.shape[1] + W.shape[1] > config.m_max:
            X = state.V

        try:
            try:
                state, pairs, X = _extract(
                    {"V": X, "W": W}, pencil, None, config, state, real
                )
            except DegenerateProjectionError:
                if X is state.V:
                    raise
                state, pairs, X = _extract(
                    {"V": state.V, "W": W}, pencil, None, config, state, real
                )
        except DegenerateProjectionError as e:
            status, message = "breakdown", str(e)
            logger.warning(f"bgd breakdown at iteration {state.iteration}: {e}")
            break

        n_pairs += pairs
        dims.append(X.shape[1])
        logger.debug(
            f"bgd iteration {state.iteration}: max residual {effective.max():.3e}, "
            f"subspace {dims[-1]}"
        )

    values, vectors, residual_norms = _final_pairs(pencil, state.V, config)
    logger.info(f"bgd {status} after {state.iteration} iterations, sigma {config.sigma}")
    return EigenResult(
        values=values,
        vectors=vectors,
        residual_norms=residual_norms,
        iterations=state.iteration,
        status=status,
        history=recorder.to_dataset(solver="bgd", sigma=config.sigma, seed=config.seed),
        solver="bgd",
        seed=config.seed,
        message=message,
        n_conjugate_pairs=n_pairs,
        subspace_dims=dims,
    )


def _t_norm(T, r: np.ndarray) -> tuple[float, np.ndarray]:
    Tr = apply_operator(T, r)
    return float(np.sqrt(max(np.real(np.vdot(r, Tr)), 0.0))), Tr


def base_null_solve(
    pencil: Pencil,
    T,
    lambda_q: float,
    v0: np.ndarray,
    mode: NullMode = "two_term",
    tol: float = 1e-8,
    maxit: int = 1000,
    logger: Logger = getLogger(),
) -> BaseNullResult:
    """Idealized null-space iteration for a known eigenvalue lambda_q.

    Each step minimizes ||r - C u||_T, C = A - lambda_q B, over u in
    span{Tr, TCTr} (two-term) or span{Tr, TCTr, v - v_prev} (three-term; the
    first step is two-term). The eigen residual is measured for the Rayleigh
    quotient of the B-normalized iterate.
    """
    if mode not in ("two_term", "three_term"):
        raise ConfigError(f"unknown BASE-NULL mode '{mode}'")
    if maxit < 0:
        raise ConfigError(f"maxit must be non-negative, got {maxit}")

    C = pencil.shifted(lambda_q)
    v = np.asarray(v0).reshape(-1)
    check_finite(v, "v0")
    initial_norm = np.linalg.norm(v)
    if initial_norm == 0:
        raise ValueError("v0 must be non-zero")
    r = -(C @ v)
    v_prev = None
    residuals, t_residuals = [], []
    status, message = "maxit", ""

    for step in range(maxit + 1):
        t_norm, Tr = _t_norm(T, r)
        t_residuals.append(t_norm)

        vn, Bvn = b_normalize(v[:, None], B=pencil.B)
        Avn = pencil.apply_a(vn)
        value = rayleigh_quotients(vn, Avn, Bvn)[0]
        residuals.append(np.linalg.norm(Avn[:, 0] - value * Bvn[:, 0]))

        if residuals[-1] <= tol:
            status = "converged"
            break
        if np.linalg.norm(v) <= 1e-14 * initial_norm:
            status, message = "stagnated", "iterate collapsed to zero"
            break
        if step > 0 and t_norm >= (1 - _STAGNATION) * t_residuals[-2]:
            status, message = "stagnated", "T-norm residual stopped decreasing"
            break
        if step == maxit:
            break

        TCTr = apply_operator(T, C @ Tr)
        directions = [Tr, TCTr]
        if mode == "three_term" and v_prev is not None:
            directions.append(v - v_prev)
        U = np.stack(directions, axis=1)
        CU = C @ U
        TCU = apply_operator(T, CU)
        gram = CU.conj().T @ TCU
        rhs = TCU.conj().T @ r
        c = sla.lstsq(gram, rhs)[0]

        v_prev = v
        v = v + U @ c
        r = r - CU @ c

    if status == "stagnated":
        logger.warning(f"base_null stagnated at step {step}: {message}")
    vn, _ = b_normalize(v[:, None], B=pencil.B)
    return BaseNullResult(
        vector=vn[:, 0],
        value=float(value),
        residual_norms=np.array(residuals),
        t_residual_norms=np.array(t_residuals),
        iterations=step,
        status=status,
        message=message,
    )


def null_space_convergence_bound(
    mu: np.ndarray, q: int | None = None
) -> tuple[float, float]:
    """Worst-case T-norm residual reduction of the two-term null-space step.

    Args:
        mu: ascending eigenvalues of the preconditioned shifted operator with a
            single zero, negative values before it and positive values after.
        q: 0-based position of the zero; located automatically when omitted.

    Returns:
        (kappa, (kappa - 1) / (kappa + 1)).
    """
    mu = np.asarray(mu, dtype=float)
    if np.any(np.diff(mu) < 0):
        raise ValueError("mu must be sorted ascending")
    if q is None:
        zeros = np.flatnonzero(mu == 0)
        if len(zeros) != 1:
            raise ValueError(f"mu must contain exactly one zero, found {len(zeros)}")
        q = int(zeros[0])
    if mu[q] != 0:
        raise ValueError(f"mu[{q}] = {mu[q]} is not zero")
    if q == 0 or q == len(mu) - 1:
        raise ValueError("the zero must have negative and positive values on both sides")

    left, right = abs(mu[0]) - abs(mu[q - 1]), mu[-1] - mu[q + 1]
    if left <= right:
        kappa = (mu[-1] / mu[q + 1]) * (1 + right / abs(mu[q - 1]))
    else:
        kappa = (mu[0] / mu[q - 1]) * (1 + left / mu[q + 1])
    return kappa, (kappa - 1) / (kappa + 1)


def bplhr_storage_vectors(k: int, standard: bool) -> int:
    """Vectors of length n kept by the block recurrence: V, W, S, P and their
    A- and B-images, without the B-images for a standard problem."""
    return 12 * k if standard else 16 * k
