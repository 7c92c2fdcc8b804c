"""Geometric multigrid preconditioners for the shifted finite-difference Laplacian.

`av_mg_apply` approximates |L - sigma I|^{-1} with a symmetric positive definite
V-cycle, `inv_mg_apply` is the textbook V-cycle for (L - sigma I) w = r and is
indefinite for interior shifts. Both use one Richardson sweep per phase and an
exact solve in the eigenbasis of the coarsest grid.
"""

from dataclasses import dataclass, field
from functools import partial
from logging import Logger, getLogger
from typing import Callable, Literal

import numpy as np
import scipy.linalg as sla
from numpy.polynomial import chebyshev

from .grids import (
    DEFAULT_COARSE_OMEGA,
    apply_laplacian,
    laplacian_bounds,
    mesh_width,
    prolong_bilinear,
    restrict_full_weighting,
    unknowns,
)
from .operators import DENSE_LIMIT, BlockOperator, fd_laplacian_matrix, shifted_inverse_weights

DEFAULT_DEGREE = 6
DEFAULT_NU = 1
DEFAULT_DELTA = 0.5
# Richardson steps are tau = damping / rho with rho bounding the smoothed operator
DEFAULT_DAMPING = 1.6
# Interpolation points used to resolve the kink of |x| before truncation
_INTERPOLATION_POINTS = 512
_SAMPLES = 1000
_POSITIVITY_MARGIN = 1e-3

CycleMode = Literal["abs", "plain"]


@dataclass(frozen=True)
class AbsPolynomial:
    """Chebyshev series approximating |x| on [a, b], plus a positivity shift."""

    coefficients: np.ndarray
    a: float
    b: float
    shift: float = 0.0

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def _to_reference(self, x):
        return (2 * x - (self.a + self.b)) / (self.b - self.a)

    def evaluate(self, x: np.ndarray, shifted: bool = True) -> np.ndarray:
        values = chebyshev.chebval(self._to_reference(np.asarray(x)), self.coefficients)
        return values + self.shift if shifted else values

    def apply(self, operator: Callable[[np.ndarray], np.ndarray], X: np.ndarray):
        """p(M) X for a Hermitian M given by `operator`, via the Chebyshev
        three-term recurrence in t(M) = (2M - (a + b)) / (b - a)."""

        def reference(Y):
            return (2 * operator(Y) - (self.a + self.b) * Y) / (self.b - self.a)

        previous = X
        result = self.coefficients[0] * X + self.shift * X
        if self.degree == 0:
            return result
        current = reference(X)
        result = result + self.coefficients[1] * current
        for c in self.coefficients[2:]:
            previous, current = current, 2 * reference(current) - previous
            result = result + c * current
        return result


def chebyshev_abs_poly(m: int, a: float, b: float) -> AbsPolynomial:
    """Degree m Chebyshev approximation of |x| on [a, b], shifted so that it is
    strictly positive on a dense sample of the interval.

    Args:
        m: polynomial degree, at least 1.
        a: left end of the interval.
        b: right end of the interval, b > a.
    """
    if m < 1:
        raise ValueError(f"polynomial degree must be at least 1, got {m}")
    if not (np.isfinite(a) and np.isfinite(b)) or b <= a:
        raise ValueError(f"degenerate interval [{a}, {b}]")

    centre, half = (a + b) / 2, (b - a) / 2
    series = chebyshev.chebinterpolate(
        lambda t: np.abs(centre + half * t), _INTERPOLATION_POINTS
    )
    polynomial = AbsPolynomial(series[: m + 1].copy(), a, b)

    samples = polynomial.evaluate(np.linspace(a, b, _SAMPLES), shifted=False)
    shift = max(0.0, -samples.min()) + _POSITIVITY_MARGIN * np.abs(samples).max()
    return AbsPolynomial(polynomial.coefficients, a, b, shift)


def richardson_smooth(
    apply_b: Callable[[np.ndarray], np.ndarray],
    r: np.ndarray,
    w0: np.ndarray,
    tau: float,
    nu: int = DEFAULT_NU,
) -> np.ndarray:
    """nu steps of w <- w + tau (r - B w)."""
    w = np.array(w0, copy=True)
    for _ in range(nu):
        w = w + tau * (r - apply_b(w))
    return w


@dataclass(frozen=True)
class LevelData:
    omega: int
    h: float
    sigma: float
    tau: float
    tau_inv: float
    polynomial: AbsPolynomial | None = None

    @property
    def n(self) -> int:
        return unknowns(self.omega)

    @property
    def uses_polynomial(self) -> bool:
        return self.polynomial is not None

    def apply_l(self, X: np.ndarray) -> np.ndarray:
        return apply_laplacian(X, self.omega)

    def apply_shifted(self, X: np.ndarray) -> np.ndarray:
        return self.apply_l(X) - self.sigma * X

    def apply_b(self, X: np.ndarray) -> np.ndarray:
        if self.polynomial is None:
            return self.apply_l(X)
        return self.polynomial.apply(self.apply_shifted, X)


@dataclass(frozen=True)
class GridHierarchy:
    """Levels from the coarsest (index 0) to the finest grid."""

    levels: list[LevelData]
    sigma: float
    nu: int
    m: int
    delta: float
    coarse_eigenvectors: np.ndarray = field(repr=False)
    coarse_weights: dict[str, np.ndarray] = field(repr=False)

    @property
    def finest(self) -> LevelData:
        return self.levels[-1]

    @property
    def n(self) -> int:
        return self.finest.n

    def coarse_solve(self, r: np.ndarray, mode: CycleMode) -> np.ndarray:
        weights = self.coarse_weights[mode]
        Q = self.coarse_eigenvectors
        coefficients = Q.T @ r
        coefficients = (weights * coefficients.T).T
        return Q @ coefficients


def _make_level(
    omega: int, sigma: float, m: int, delta: float, damping: float
) -> LevelData:
    h = mesh_width(omega)
    rho_inv = abs(4 / h**2 - sigma) + 4 / h**2

    if np.sqrt(sigma) * h < delta:
        return LevelData(omega, h, sigma, tau=damping / (8 / h**2), tau_inv=damping / rho_inv)

    lower, upper = laplacian_bounds(omega)
    polynomial = chebyshev_abs_poly(m, lower - sigma, upper - sigma)
    sample = polynomial.evaluate(np.linspace(lower - sigma, upper - sigma, _SAMPLES))
    return LevelData(
        omega,
        h,
        sigma,
        tau=damping / sample.max(),
        tau_inv=damping / rho_inv,
        polynomial=polynomial,
    )


def _check_positive(level: LevelData, probes: int = 5, seed: int = 0) -> None:
    X = np.random.default_rng(seed).standard_normal((level.n, probes))
    energies = np.sum(X * level.apply_b(X), axis=0)
    if np.any(energies <= 0):
        raise ValueError(
            f"polynomial smoother operator on level {level.omega} is not positive definite"
        )


def build_hierarchy(
    omega_fine: int,
    omega_coarse: int = DEFAULT_COARSE_OMEGA,
    sigma: float = 0.0,
    m: int = DEFAULT_DEGREE,
    nu: int = DEFAULT_NU,
    delta: float = DEFAULT_DELTA,
    damping: float = DEFAULT_DAMPING,
    logger: Logger = getLogger(),
) -> GridHierarchy:
    """Set up the levels omega_coarse..omega_fine for a shift sigma.

    A level keeps B_l = L_l while sqrt(sigma) h_l < delta and otherwise smooths
    with a positive polynomial approximation of |L_l - sigma I|. Both cycles
    take Richardson steps damping / rho, rho bounding the smoothed operator.
    The coarsest level is solved exactly from a dense eigendecomposition.
    """
    if omega_coarse < 1:
        raise ValueError(f"omega_coarse must be at least 1, got {omega_coarse}")
    if omega_coarse > omega_fine:
        raise ValueError(
            f"omega_coarse = {omega_coarse} is finer than omega_fine = {omega_fine}"
        )
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    if nu < 1:
        raise ValueError(f"nu must be at least 1, got {nu}")
    if not 0 < damping < 2:
        raise ValueError(f"damping must lie in (0, 2), got {damping}")
    if unknowns(omega_coarse) > DENSE_LIMIT:
        raise ValueError(
            f"coarse grid with {unknowns(omega_coarse)} unknowns is too large for a dense solve"
        )

    levels = [
        _make_level(omega, sigma, m, delta, damping)
        for omega in range(omega_coarse, omega_fine + 1)
    ]
    for level in levels[1:]:
        if level.uses_polynomial:
            _check_positive(level)

    eigenvalues, eigenvectors = sla.eigh(fd_laplacian_matrix(omega_coarse).toarray())
    weights = {
        mode: shifted_inverse_weights(eigenvalues - sigma, mode)
        for mode in ("abs", "plain")
    }
    logger.debug(
        f"hierarchy levels {omega_coarse}..{omega_fine}, sigma {sigma}, "
        f"polynomial levels {[l.omega for l in levels if l.uses_polynomial]}"
    )
    return GridHierarchy(levels, sigma, nu, m, delta, eigenvectors, weights)


def _v_cycle(
    hierarchy: GridHierarchy, r: np.ndarray, level: int, mode: CycleMode
) -> np.ndarray:
    if level == 0:
        return hierarchy.coarse_solve(r, mode)

    data = hierarchy.levels[level]
    if mode == "abs":
        apply_b, tau = data.apply_b, data.tau
    else:
        apply_b, tau = data.apply_shifted, data.tau_inv

    w = richardson_smooth(apply_b, r, np.zeros_like(r), tau, hierarchy.nu)
    coarse = restrict_full_weighting(r - apply_b(w), data.omega)
    w = w + prolong_bilinear(_v_cycle(hierarchy, coarse, level - 1, mode), data.omega)
    return richardson_smooth(apply_b, r, w, tau, hierarchy.nu)


def _checked_level(hierarchy: GridHierarchy, level: int | None) -> int:
    if level is None:
        return len(hierarchy.levels) - 1
    if not 0 <= level < len(hierarchy.levels):
        raise ValueError(
            f"level {level} out of range for a hierarchy of {len(hierarchy.levels)} levels"
        )
    return level


def av_mg_apply(
    hierarchy: GridHierarchy, r: np.ndarray, level: int | None = None
) -> np.ndarray:
    """One absolute-value V-cycle, an SPD approximation of |L - sigma I|^{-1} r."""
    return _v_cycle(hierarchy, r, _checked_level(hierarchy, level), "abs")


def inv_mg_apply(
    hierarchy: GridHierarchy, r: np.ndarray, level: int | None = None
) -> np.ndarray:
    """One V-cycle for (L - sigma I) w = r."""
    return _v_cycle(hierarchy, r, _checked_level(hierarchy, level), "plain")


def av_mg_preconditioner(hierarchy: GridHierarchy) -> BlockOperator:
    return BlockOperator(
        hierarchy.n,
        partial(av_mg_apply, hierarchy),
        definite=True,
        name=f"av-mg-{hierarchy.finest.omega}",
    )


def inv_mg_preconditioner(hierarchy: GridHierarchy) -> BlockOperator:
    return BlockOperator(
        hierarchy.n,
        partial(inv_mg_apply, hierarchy),
        definite=False,
        name=f"inv-mg-{hierarchy.finest.omega}",
    )
