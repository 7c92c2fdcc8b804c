"""Small dense linear algebra shared by every solver: block B-orthonormalization,
the projected (T-harmonic) pencil, Rayleigh-Ritz and Rayleigh quotients, and the
real splitting of conjugate eigenvector pairs."""

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .exceptions import ConjugateOrderingError, DegenerateProjectionError
from .utils import check_finite

# Columns whose B-norm falls below this fraction of their initial norm are dropped
DROP_TOL = 1e-8
# Projected right-hand matrices beyond this condition number are degenerate
COND_LIMIT = 1e12
# Relative tolerance deciding whether an eigenvalue is real / two are conjugate
CONJUGATE_TOL = 1e-12
# Cancellation ratio after which B z is recomputed instead of updated
_RECOMPUTE_RATIO = 0.1

Pairing = list[tuple[int, int]]


@dataclass
class SmallEigenSolution:
    """Eigenpairs of a projected pencil, sorted by ascending |xi| with every
    complex value immediately followed by its conjugate (when present)."""

    values: np.ndarray
    vectors: np.ndarray

    def __len__(self) -> int:
        return len(self.values)

    def select(self, k: int) -> "SmallEigenSolution":
        return SmallEigenSolution(self.values[:k], self.vectors[:, :k])


def apply_operator(op, X: np.ndarray) -> np.ndarray:
    """Apply `op` to a vector or block; `None` stands for the identity."""
    if op is None:
        return np.array(X, copy=True)
    return op @ X


def _b_orthonormalize(
    Z: np.ndarray, B, drop_tol: float = DROP_TOL, BZ: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    Z = np.asarray(Z)
    check_finite(Z, "Z")
    if not 0 <= drop_tol < 1:
        raise ValueError(f"drop_tol must lie in [0, 1), got {drop_tol}")

    n, m = Z.shape
    dtype = np.result_type(Z.dtype, np.float64)
    if BZ is None and B is not None:
        BZ = apply_operator(B, Z)
    Q = np.empty((n, m), dtype=dtype)
    BQ = np.empty((n, m), dtype=dtype)
    kept = []
    rank = 0

    for j in range(m):
        z = np.array(Z[:, j], dtype=dtype)
        bz = z if B is None else np.array(BZ[:, j], dtype=dtype)
        initial = np.sqrt(max(np.real(np.vdot(z, bz)), 0.0))
        if initial == 0.0:
            continue

        # Classical Gram-Schmidt, applied twice
        norm = initial
        for _ in range(2):
            if rank:
                coefficients = Q[:, :rank].conj().T @ bz
                z = z - Q[:, :rank] @ coefficients
                bz = z if B is None else bz - BQ[:, :rank] @ coefficients
            previous = norm
            norm = np.sqrt(max(np.real(np.vdot(z, bz)), 0.0))
            if B is not None and norm < _RECOMPUTE_RATIO * previous:
                bz = apply_operator(B, z[:, None])[:, 0]
                norm = np.sqrt(max(np.real(np.vdot(z, bz)), 0.0))

        if norm <= drop_tol * initial or norm == 0.0:
            continue
        Q[:, rank] = z / norm
        BQ[:, rank] = bz / norm
        kept.append(j)
        rank += 1

    return Q[:, :rank], BQ[:, :rank], np.array(kept, dtype=int)


def b_orthonormalize(
    Z: np.ndarray, B, drop_tol: float = DROP_TOL
) -> tuple[np.ndarray, int, np.ndarray]:
    """B-orthonormalize the columns of Z in order.

    Each column is orthogonalized against the columns already accepted, so a
    block layout [V, W, S, P] is processed V first, then W, S and P. Columns
    whose B-norm after projection drops below `drop_tol` times their initial
    B-norm are discarded.

    Args:
        Z: (n, m) block of columns.
        B: Hermitian positive definite operator, or None for the identity.
        drop_tol: relative drop threshold in [0, 1).

    Returns:
        The B-orthonormal block Q, its rank and the indices of the kept columns.
    """
    Q, _, kept = _b_orthonormalize(Z, B, drop_tol)
    return Q, Q.shape[1], kept


def b_normalize(
    V: np.ndarray, BV: np.ndarray | None = None, B=None
) -> tuple[np.ndarray, np.ndarray]:
    """Scale each column of V to unit B-norm; returns (V, BV)."""
    if BV is None:
        BV = apply_operator(B, V)
    norms = np.sqrt(np.real(np.sum(V.conj() * BV, axis=0)))
    if np.any(norms == 0):
        raise ValueError("cannot B-normalize a zero column")
    return V / norms, BV / norms


def _snap_near_real_pairs(
    values: np.ndarray, vectors: np.ndarray, tolerance: np.ndarray
) -> None:
    """Replace every conjugate pair (y, conj(y)) of a real matrix whose
    eigenvalues are real up to `tolerance` by an orthonormal real basis of
    span{Re y, Im y}, in place. A repeated real eigenvalue that LAPACK splits
    into a +- eps i keeps its two-dimensional eigenspace this way."""
    for i in np.flatnonzero((values.imag > 0) & (values.imag <= tolerance)):
        partners = np.flatnonzero(values.imag < 0)
        if len(partners) == 0:
            break
        j = partners[np.argmin(np.abs(values[partners] - np.conj(values[i])))]
        basis, _ = np.linalg.qr(np.column_stack([vectors[:, i].real, vectors[:, i].imag]))
        vectors[:, [i, j]] = basis
        values[[i, j]] = values[i].real


def _conjugate_adjacent(
    values: np.ndarray, vectors: np.ndarray, real_input: bool
) -> tuple[np.ndarray, np.ndarray]:
    tolerance = CONJUGATE_TOL * (1 + np.abs(values))
    if real_input:
        _snap_near_real_pairs(values, vectors, tolerance)
    is_real = np.abs(values.imag) <= tolerance
    values = np.where(is_real, values.real + 0j, values)
    if real_input:
        vectors[:, is_real] = vectors[:, is_real].real

    # Ties in |xi| are broken by ascending real part
    order = np.lexsort((values.real, np.abs(values)))
    placed = np.zeros(len(values), dtype=bool)
    arranged = []
    for i in order:
        if placed[i]:
            continue
        placed[i] = True
        arranged.append(i)
        if is_real[i]:
            continue
        for j in order:
            if (
                not placed[j]
                and not is_real[j]
                and abs(values[j] - np.conj(values[i])) <= tolerance[i]
            ):
                placed[j] = True
                arranged.append(j)
                if real_input:
                    vectors[:, j] = vectors[:, i].conj()
                    values[j] = np.conj(values[i])
                break

    arranged = np.array(arranged, dtype=int)
    return values[arranged], vectors[:, arranged]


def solve_projected_pencil(
    L: np.ndarray, M: np.ndarray, cond_limit: float = COND_LIMIT
) -> SmallEigenSolution:
    """Solve L y = xi M y for all eigenpairs.

    M is LU factorized and the standard problem M^{-1} L is handed to LAPACK.
    Raises DegenerateProjectionError if M is numerically singular, so the
    caller can shrink its basis instead of regularizing silently.
    """
    L = np.asarray(L)
    M = np.asarray(M)
    if L.ndim != 2 or L.shape[0] != L.shape[1] or L.shape != M.shape:
        raise ValueError(
            f"L and M must be square and of equal size, got {L.shape} and {M.shape}"
        )
    check_finite(L, "L")
    check_finite(M, "M")

    if np.iscomplexobj(L) and not np.any(L.imag) and not np.any(M.imag):
        L, M = L.real, M.real
    elif np.iscomplexobj(M) and not np.any(M.imag) and not np.iscomplexobj(L):
        M = M.real

    m = L.shape[0]
    if m == 0:
        return SmallEigenSolution(np.empty(0, dtype=complex), np.empty((0, 0), complex))

    condition = np.linalg.cond(M)
    if not np.isfinite(condition) or condition > cond_limit:
        raise DegenerateProjectionError(
            f"projected matrix M is numerically singular (cond {condition:.3e})"
        )

    C = sla.lu_solve(sla.lu_factor(M), L)
    try:
        values, vectors = sla.eig(C)
    except sla.LinAlgError as e:
        raise DegenerateProjectionError(f"dense eigensolver failed: {e}") from e
    if not (np.all(np.isfinite(values)) and np.all(np.isfinite(vectors))):
        raise DegenerateProjectionError("dense eigensolver returned non-finite pairs")

    values = values.astype(complex)
    vectors = vectors.astype(complex)
    values, vectors = _conjugate_adjacent(values, vectors, not np.iscomplexobj(C))
    vectors = vectors / np.linalg.norm(vectors, axis=0)
    return SmallEigenSolution(values, vectors)


def rayleigh_ritz_hermitian(
    V: np.ndarray,
    A,
    B,
    sigma: float | None = None,
    drop_tol: float = DROP_TOL,
    allow_rank_loss: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Standard Rayleigh-Ritz for the pencil (A, B) on span(V).

    Returns Ritz values (sorted by distance to sigma, or ascending) and the
    B-orthonormal Ritz vectors.
    """
    Q, _, kept = _b_orthonormalize(V, B, drop_tol)
    if len(kept) == 0 or (len(kept) < V.shape[1] and not allow_rank_loss):
        raise DegenerateProjectionError(
            f"rank collapse: {len(kept)} of {V.shape[1]} columns are independent"
        )

    H = Q.conj().T @ apply_operator(A, Q)
    H = (H + H.conj().T) / 2
    values, U = sla.eigh(H)
    if sigma is None:
        order = np.arange(len(values))
    else:
        order = np.argsort(np.abs(values - sigma), kind="stable")
    return values[order], Q @ U[:, order]


def rayleigh_quotients(
    V: np.ndarray, AV: np.ndarray, BV: np.ndarray, pairing: Sequence[tuple[int, int]] = ()
) -> np.ndarray:
    numerators = np.real(np.sum(V.conj() * AV, axis=0))
    denominators = np.real(np.sum(V.conj() * BV, axis=0))
    if np.any(denominators <= 0):
        raise ValueError("Rayleigh quotient of a column with zero B-norm")

    values = numerators / denominators
    for i, j in pairing:
        # Real and imaginary parts of one complex vector share its quotient
        values[i] = values[j] = (numerators[i] + numerators[j]) / (
            denominators[i] + denominators[j]
        )
    return values


def rayleigh_quotient_block(
    V: np.ndarray, A, B, pairing: Sequence[tuple[int, int]] = ()
) -> np.ndarray:
    """Rayleigh quotients of the columns of V.

    Each pair (i, j) in `pairing` names the real and imaginary parts of one
    complex vector; both receive (v_R*Av_R + v_I*Av_I)/(v_R*Bv_R + v_I*Bv_I).
    Paired columns must keep the relative scaling they had as parts of the
    complex vector.
    """
    return rayleigh_quotients(V, apply_operator(A, V), apply_operator(B, V), pairing)


def conjugate_column_layout(
    Y: np.ndarray, k: int
) -> tuple[list[int], list[int], int | None]:
    """Classify the first k columns of a conjugate-adjacent Y.

    Returns the indices of the real columns, the first index of every
    conjugate pair and the index of an unpaired complex last column (or None).
    """
    Y = np.asarray(Y)
    if k > Y.shape[1]:
        raise ValueError(f"cannot select {k} columns from {Y.shape[1]}")

    norms = np.linalg.norm(Y[:, :k], axis=0)
    tolerance = CONJUGATE_TOL * (1 + norms)
    imaginary = np.linalg.norm(Y[:, :k].imag, axis=0) if np.iscomplexobj(Y) else 0 * norms
    is_real = imaginary <= tolerance

    real_columns, pairs, tail = [], [], None
    j = 0
    while j < k:
        if is_real[j]:
            real_columns.append(j)
            j += 1
        elif j + 1 < k and np.linalg.norm(Y[:, j + 1] - Y[:, j].conj()) <= tolerance[j]:
            pairs.append(j)
            j += 2
        elif j == k - 1:
            tail = j
            j += 1
        else:
            raise ConjugateOrderingError(
                f"complex column {j} is not followed by its conjugate"
            )
    return real_columns, pairs, tail


def split_conjugate_basis(Y: np.ndarray, k: int) -> tuple[np.ndarray, Pairing, bool]:
    """Replace the first k (conjugate-adjacent) columns of Y by a real basis.

    Real columns go to Y0, each conjugate pair (y, conj(y)) contributes its real
    part to Y_R and its imaginary part to Y_I. A complex last column whose
    conjugate lies outside the selection keeps only its real part.

    Returns:
        Y' = [Y0, Y_R, y~_R, Y_I] with exactly k real columns, the (R, I)
        column pairing within Y' and whether a tail column was truncated.
    """
    Y = np.asarray(Y)
    real_columns, pairs, tail = conjugate_column_layout(Y, k)

    blocks = [Y[:, real_columns].real, Y[:, pairs].real]
    if tail is not None:
        blocks.append(Y[:, [tail]].real)
    blocks.append(Y[:, pairs].imag)
    Yprime = np.concatenate(blocks, axis=1).astype(np.float64)

    first_imaginary = len(real_columns) + len(pairs) + int(tail is not None)
    pairing = [
        (len(real_columns) + i, first_imaginary + i) for i in range(len(pairs))
    ]
    return Yprime, pairing, tail is not None
