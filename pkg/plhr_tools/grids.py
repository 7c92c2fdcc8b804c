"""Uniform grids of the unit square used by the finite-difference model problem
and its multigrid hierarchy.

A level omega has mesh width h = 2**-omega and (2**omega - 1)**2 interior
unknowns ordered row by row. Every function accepts a single vector of length
n or an (n, m) block and acts column by column.
"""

from typing import Literal

import numpy as np

# The coarsest grid of the published runs holds 15 x 15 unknowns
DEFAULT_COARSE_OMEGA = 4


def mesh_width(omega: int) -> float:
    return 2.0**-omega


def grid_points(omega: int) -> int:
    """Interior points along one side of the square."""
    if omega < 1:
        raise ValueError(f"omega must be at least 1, got {omega}")
    return 2**omega - 1


def unknowns(omega: int) -> int:
    return grid_points(omega) ** 2


def as_grid(x: np.ndarray, omega: int) -> np.ndarray:
    """Reshape a vector or block to (N, N, m)."""
    N = grid_points(omega)
    if x.shape[0] != N * N:
        raise ValueError(
            f"vector of length {x.shape[0]} does not live on a level {omega} grid"
        )
    return x.reshape(N, N, -1)


def from_grid(u: np.ndarray, like: np.ndarray) -> np.ndarray:
    return u.reshape(like.shape[0], -1) if like.ndim == 2 else u.reshape(-1)


def _padded(u: np.ndarray) -> np.ndarray:
    return np.pad(u, ((1, 1), (1, 1), (0, 0)))


def apply_laplacian(x: np.ndarray, omega: int) -> np.ndarray:
    """Five-point Dirichlet Laplacian, (4 u_ij - neighbours) / h**2."""
    u = _padded(as_grid(x, omega))
    h = mesh_width(omega)
    lu = (
        4 * u[1:-1, 1:-1]
        - u[:-2, 1:-1]
        - u[2:, 1:-1]
        - u[1:-1, :-2]
        - u[1:-1, 2:]
    ) / h**2
    return from_grid(lu, x)


def laplacian_bounds(omega: int) -> tuple[float, float]:
    """Exact smallest and largest eigenvalue of the five-point Laplacian."""
    h = mesh_width(omega)
    return (
        8 / h**2 * np.sin(np.pi * h / 2) ** 2,
        8 / h**2 * np.cos(np.pi * h / 2) ** 2,
    )


def laplacian_eigenvalues(
    omega: int, return_type: Literal["sorted", "grid"] = "sorted"
) -> np.ndarray:
    """All eigenvalues (4/h^2)(sin^2(p pi h/2) + sin^2(q pi h/2)).

    With return_type "grid" the (p, q) table is returned unsorted.
    """
    h = mesh_width(omega)
    p = np.arange(1, grid_points(omega) + 1)
    one_dimensional = 4 / h**2 * np.sin(p * np.pi * h / 2) ** 2
    table = one_dimensional[:, None] + one_dimensional[None, :]
    return {
        "sorted": lambda: np.sort(table, axis=None),
        "grid": lambda: table,
    }[return_type]()


def restrict_full_weighting(fine: np.ndarray, omega: int) -> np.ndarray:
    """Full weighting from level omega to omega - 1, i.e. R = P^T / 4."""
    if omega < 2:
        raise ValueError("level 1 has no coarser grid")
    f = _padded(as_grid(fine, omega))
    centre, minus, plus = slice(2, -1, 2), slice(1, -2, 2), slice(3, None, 2)
    coarse = (
        4 * f[centre, centre]
        + 2 * (f[minus, centre] + f[plus, centre] + f[centre, minus] + f[centre, plus])
        + f[minus, minus]
        + f[minus, plus]
        + f[plus, minus]
        + f[plus, plus]
    ) / 16
    return coarse.reshape(-1) if fine.ndim == 1 else coarse.reshape(-1, fine.shape[1])


def prolong_bilinear(coarse: np.ndarray, omega: int) -> np.ndarray:
    """Bilinear interpolation from level omega - 1 to level omega."""
    if omega < 2:
        raise ValueError("level 1 has no coarser grid")
    c = _padded(as_grid(coarse, omega - 1))
    f = np.zeros((2**omega + 1, 2**omega + 1, c.shape[2]), dtype=c.dtype)
    f[2:-1:2, 2:-1:2] = c[1:-1, 1:-1]
    f[1::2, 2:-1:2] = 0.5 * (c[:-1, 1:-1] + c[1:, 1:-1])
    f[2:-1:2, 1::2] = 0.5 * (c[1:-1, :-1] + c[1:-1, 1:])
    f[1::2, 1::2] = 0.25 * (c[:-1, :-1] + c[:-1, 1:] + c[1:, :-1] + c[1:, 1:])
    fine = f[1:-1, 1:-1]
    return fine.reshape(-1) if coarse.ndim == 1 else fine.reshape(-1, coarse.shape[1])
