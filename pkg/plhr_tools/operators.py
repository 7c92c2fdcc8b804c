"""Matrix-free operators, Hermitian pencils and the model problems.

Operators follow the `scipy.sparse.linalg.LinearOperator` protocol so `op @ x`
works for single vectors and for (n, m) blocks alike.
"""

import warnings
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from typing import Callable, Literal

import numpy as np
import scipy.io
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from .exceptions import NonHermitianError
from .grids import apply_laplacian, laplacian_eigenvalues, mesh_width, unknowns
from .utils import PINV_THRESHOLD

# Largest dimension for which dense eigendecompositions are attempted
DENSE_LIMIT = 4000
# Finest finite-difference level we agree to build
MAX_OMEGA = 12
# Relative asymmetry tolerated when checking Hermitian structure
HERMITIAN_TOL = 1e-10


class BlockOperator(LinearOperator):
    """A linear map applied to vectors or to (n, m) blocks of columns."""

    def __init__(
        self,
        n: int,
        apply: Callable[[np.ndarray], np.ndarray],
        dtype=np.float64,
        hermitian: bool = True,
        definite: bool = False,
        matrix=None,
        name: str = "",
    ):
        super().__init__(dtype=np.dtype(dtype), shape=(n, n))
        self._apply = apply
        self.hermitian = hermitian
        self.definite = definite
        self.matrix = matrix
        self.name = name

    @property
    def n(self) -> int:
        return self.shape[0]

    def _matmat(self, X):
        return self._apply(X)

    def _matvec(self, x):
        return self._apply(x.reshape(-1, 1)).reshape(-1)

    def _adjoint(self):
        if self.hermitian:
            return self
        if self.matrix is not None:
            return dense_operator(
                self.to_dense().conj().T, hermitian=False, name=f"{self.name}^*"
            )
        raise NotImplementedError("adjoint of a non-Hermitian matrix-free operator")

    def to_dense(self) -> np.ndarray:
        if self.matrix is not None:
            if sp.issparse(self.matrix):
                return self.matrix.toarray()
            return np.array(self.matrix)
        return self._apply(np.eye(self.n, dtype=self.dtype))


def dense_operator(
    matrix: np.ndarray, hermitian: bool = True, definite: bool = False, name: str = ""
) -> BlockOperator:
    matrix = np.asarray(matrix)
    return BlockOperator(
        matrix.shape[0],
        lambda X: matrix @ X,
        dtype=matrix.dtype,
        hermitian=hermitian,
        definite=definite,
        matrix=matrix,
        name=name,
    )


def sparse_operator(matrix, definite: bool = False, name: str = "") -> BlockOperator:
    matrix = sp.csr_matrix(matrix)
    return BlockOperator(
        matrix.shape[0],
        lambda X: matrix @ X,
        dtype=matrix.dtype,
        hermitian=True,
        definite=definite,
        matrix=matrix,
        name=name,
    )


@dataclass(frozen=True)
class Pencil:
    """The Hermitian pencil A - lambda B; B = None marks the identity."""

    A: BlockOperator
    B: BlockOperator | None = None
    name: str = "pencil"

    def __post_init__(self):
        if self.A.shape[0] != self.A.shape[1]:
            raise ValueError(f"A must be square, got {self.A.shape}")
        if self.B is not None:
            if self.B.shape != self.A.shape:
                raise ValueError(
                    f"dimension mismatch between A {self.A.shape} and B {self.B.shape}"
                )
            if not self.B.definite:
                raise ValueError("B must be Hermitian positive definite")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def is_standard(self) -> bool:
        return self.B is None

    @property
    def dtype(self) -> np.dtype:
        if self.B is None:
            return self.A.dtype
        return np.result_type(self.A.dtype, self.B.dtype)

    @property
    def is_real(self) -> bool:
        return not np.issubdtype(self.dtype, np.complexfloating)

    def apply_a(self, X: np.ndarray) -> np.ndarray:
        return self.A @ X

    def apply_b(self, X: np.ndarray) -> np.ndarray:
        if self.B is None:
            return np.array(X, copy=True)
        return self.B @ X

    def shifted(self, sigma: float) -> BlockOperator:
        """A - sigma B as a Hermitian (generally indefinite) operator."""
        return BlockOperator(
            self.n,
            lambda X: self.apply_a(X) - sigma * self.apply_b(X),
            dtype=self.dtype,
            name=f"{self.name} - {sigma} B",
        )

    def dense(self) -> tuple[np.ndarray, np.ndarray]:
        if self.n > DENSE_LIMIT:
            raise ValueError(
                f"dense representation refused for n = {self.n} > {DENSE_LIMIT}"
            )
        A = self.A.to_dense()
        B = np.eye(self.n) if self.B is None else self.B.to_dense()
        return A, B


@dataclass(frozen=True)
class SpectrumOracle:
    eigenvalues: np.ndarray
    source: Literal["analytic", "dense"]

    def nearest(self, sigma: float, count: int = 1) -> np.ndarray:
        """The `count` eigenvalues closest to sigma, sorted by |lambda - sigma|."""
        order = np.argsort(np.abs(self.eigenvalues - sigma), kind="stable")
        return self.eigenvalues[order[:count]]


def fd_laplacian_2d(omega: int) -> Pencil:
    """Matrix-free five-point Laplacian on the unit square, h = 2**-omega."""
    if omega < 1:
        raise ValueError(f"omega must be at least 1, got {omega}")
    if omega > MAX_OMEGA:
        raise ValueError(f"omega = {omega} exceeds the supported maximum {MAX_OMEGA}")
    A = BlockOperator(
        unknowns(omega),
        partial(apply_laplacian, omega=omega),
        definite=True,
        name=f"fd-laplacian-{omega}",
    )
    return Pencil(A=A, B=None, name=f"fd{omega}")


def fd_laplacian_matrix(omega: int) -> sp.csr_matrix:
    """Explicit sparse version of the five-point Laplacian."""
    N = 2**omega - 1
    h = mesh_width(omega)
    one_dimensional = sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(N, N)) / h**2
    identity = sp.identity(N)
    return sp.csr_matrix(
        sp.kron(identity, one_dimensional) + sp.kron(one_dimensional, identity)
    )


def fd_laplacian_spectrum(omega: int) -> SpectrumOracle:
    if omega < 1:
        raise ValueError(f"omega must be at least 1, got {omega}")
    return SpectrumOracle(laplacian_eigenvalues(omega), "analytic")


def dense_spectrum(pencil: Pencil) -> SpectrumOracle:
    A, B = pencil.dense()
    return SpectrumOracle(sla.eigh(A, B, eigvals_only=True), "dense")


def _q1_element_matrices(h: float) -> tuple[np.ndarray, np.ndarray]:
    """Bilinear stiffness and mass matrices of a square element of side h,
    integrated with the 2 x 2 Gauss rule. Local nodes run counterclockwise
    from the lower left corner."""
    corners = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]], dtype=float)
    gauss = np.array([-1.0, 1.0]) / np.sqrt(3.0)
    jacobian = h / 2
    stiffness = np.zeros((4, 4))
    mass = np.zeros((4, 4))
    for xi in gauss:
        for eta in gauss:
            shape = 0.25 * (1 + corners[:, 0] * xi) * (1 + corners[:, 1] * eta)
            gradient = np.stack(
                [
                    0.25 * corners[:, 0] * (1 + corners[:, 1] * eta),
                    0.25 * corners[:, 1] * (1 + corners[:, 0] * xi),
                ],
                axis=1,
            ) / jacobian
            stiffness += gradient @ gradient.T * jacobian**2
            mass += np.outer(shape, shape) * jacobian**2
    return stiffness, mass


def fe_laplacian_q1(ne: int) -> Pencil:
    """Q1 finite elements on an ne x ne mesh of the unit square with Dirichlet
    boundary: stiffness A and mass B on the (ne - 1)**2 interior nodes."""
    if ne < 2:
        raise ValueError(f"ne must be at least 2, got {ne}")

    h = 1.0 / ne
    stiffness, mass = _q1_element_matrices(h)
    nodes = np.arange((ne + 1) ** 2).reshape(ne + 1, ne + 1)
    element_nodes = np.stack(
        [
            nodes[:-1, :-1].ravel(),
            nodes[:-1, 1:].ravel(),
            nodes[1:, 1:].ravel(),
            nodes[1:, :-1].ravel(),
        ],
        axis=1,
    )
    rows = np.repeat(element_nodes, 4, axis=1).ravel()
    cols = np.tile(element_nodes, (1, 4)).ravel()
    size = (ne + 1) ** 2

    def assemble(element_matrix: np.ndarray) -> sp.csr_matrix:
        data = np.tile(element_matrix.ravel(), len(element_nodes))
        return sp.csr_matrix(sp.coo_matrix((data, (rows, cols)), shape=(size, size)))

    interior = nodes[1:-1, 1:-1].ravel()
    A = assemble(stiffness)[interior][:, interior]
    B = assemble(mass)[interior][:, interior]
    return Pencil(
        A=sparse_operator(A, definite=True, name=f"fe-stiffness-{ne}"),
        B=sparse_operator(B, definite=True, name=f"fe-mass-{ne}"),
        name=f"fe{ne}",
    )


def _read_hermitian(path: str | Path) -> sp.csr_matrix:
    if not Path(path).is_file():
        raise FileNotFoundError(f"no Matrix Market file at {path}")
    rows, cols, _, _, field, symmetry = scipy.io.mminfo(str(path))
    if rows != cols:
        raise ValueError(f"{path}: matrix is {rows} x {cols}, expected square")
    if symmetry not in ("symmetric", "hermitian"):
        raise NonHermitianError(
            f"{path}: storage qualifier '{symmetry}' is not symmetric or hermitian"
        )
    if field == "pattern":
        raise ValueError(f"{path}: pattern matrices carry no values")

    matrix = sp.csr_matrix(scipy.io.mmread(str(path)))
    if field == "integer":
        matrix = matrix.astype(np.float64)
    asymmetry = abs(matrix - matrix.conj().T).max() if matrix.nnz else 0.0
    scale = abs(matrix).max() if matrix.nnz else 1.0
    if asymmetry > HERMITIAN_TOL * scale:
        raise NonHermitianError(f"{path}: relative asymmetry {asymmetry / scale:.3e}")
    return matrix


def load_matrix_market(path_a: str | Path, path_b: str | Path | None = None) -> Pencil:
    A = _read_hermitian(path_a)
    B = None
    if path_b is not None:
        B = _read_hermitian(path_b)
        if B.shape != A.shape:
            raise ValueError(f"dimension mismatch between A {A.shape} and B {B.shape}")
        if np.any(B.diagonal().real <= 0):
            raise ValueError(f"{path_b}: B is not positive definite")
        if B.shape[0] <= DENSE_LIMIT:
            smallest = sla.eigvalsh(B.toarray(), subset_by_index=[0, 0])[0]
            if smallest <= 0:
                raise ValueError(f"{path_b}: B is not positive definite")
        B = sparse_operator(B, definite=True, name=Path(path_b).stem)

    return Pencil(
        A=sparse_operator(A, name=Path(path_a).stem), B=B, name=Path(path_a).stem
    )


def write_matrix_market(
    pencil: Pencil, path_a: str | Path, path_b: str | Path | None = None
) -> None:
    for op, path in ((pencil.A, path_a), (pencil.B, path_b)):
        if op is None or path is None:
            continue
        matrix = op.matrix if op.matrix is not None else op.to_dense()
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        scipy.io.mmwrite(
            str(path),
            sp.coo_matrix(matrix),
            symmetry="hermitian" if np.iscomplexobj(matrix) else "symmetric",
        )


def shifted_inverse_weights(
    eigenvalues: np.ndarray, mode: Literal["abs", "plain"]
) -> np.ndarray:
    """1/|lambda| or 1/lambda, with eigenvalues below PINV_THRESHOLD times the
    largest magnitude pseudo-inverted to zero."""
    if mode not in ("abs", "plain"):
        raise ValueError(f"mode must be 'abs' or 'plain', got {mode}")
    magnitude = np.abs(eigenvalues)
    singular = magnitude <= PINV_THRESHOLD * magnitude.max()
    if np.any(singular):
        warnings.warn(
            f"shift coincides with {singular.sum()} eigenvalue(s); using the pseudo-inverse"
        )
    divisor = magnitude if mode == "abs" else eigenvalues
    weights = np.zeros_like(eigenvalues, dtype=float)
    weights[~singular] = 1.0 / divisor[~singular]
    return weights


def _shifted_eigendecomposition(pencil: Pencil, sigma: float):
    A, B = pencil.dense()
    shifted = A - sigma * B
    return sla.eigh((shifted + shifted.conj().T) / 2)


def dense_av_inverse(
    pencil: Pencil, sigma: float, mode: Literal["abs", "plain"] = "abs"
) -> BlockOperator:
    """|A - sigma B|^{-1} (mode "abs") or (A - sigma B)^{-1} (mode "plain")
    from a dense eigendecomposition of the shifted matrix."""
    eigenvalues, Q = _shifted_eigendecomposition(pencil, sigma)
    weights = shifted_inverse_weights(eigenvalues, mode)
    T = (Q * weights) @ Q.conj().T
    return dense_operator(
        (T + T.conj().T) / 2,
        definite=mode == "abs" and bool(np.all(weights > 0)),
        name=f"dense-{mode}",
    )


def perturbed_preconditioner(
    pencil: Pencil,
    sigma: float,
    epsilon: float,
    seed: int = 0,
    flavor: Literal["abs", "plain"] = "abs",
) -> BlockOperator:
    """|A - sigma B|^{-1} + E or (A - sigma B)^{-1} + E with the same seeded
    SPD perturbation E = epsilon ||(A - sigma B)^{-1}|| G*G / ||G*G||."""
    if epsilon < 0:
        raise ValueError(f"epsilon must be non-negative, got {epsilon}")

    eigenvalues, Q = _shifted_eigendecomposition(pencil, sigma)
    weights = shifted_inverse_weights(eigenvalues, flavor)
    T = (Q * weights) @ Q.conj().T
    T = (T + T.conj().T) / 2

    if epsilon > 0:
        n = pencil.n
        G = np.random.default_rng(seed).standard_normal((n, n))
        gram = G.T @ G
        gram /= sla.eigvalsh(gram, subset_by_index=[n - 1, n - 1])[0]
        T = T + epsilon * np.abs(weights).max() * gram

    return dense_operator(
        T,
        definite=flavor == "abs" and bool(np.all(weights > 0)),
        name=f"perturbed-{flavor}-{epsilon:g}",
    )


def hermitian_defect(op: LinearOperator, probes: int = 10, seed: int = 0) -> float:
    """Largest relative |(x, Ay) - (Ax, y)| over random probe pairs."""
    rng = np.random.default_rng(seed)
    n = op.shape[0]
    complex_probe = np.issubdtype(op.dtype, np.complexfloating)
    worst = 0.0
    for _ in range(probes):
        x, y = rng.standard_normal(n), rng.standard_normal(n)
        if complex_probe:
            x = x + 1j * rng.standard_normal(n)
            y = y + 1j * rng.standard_normal(n)
        Ax, Ay = op @ x, op @ y
        scale = max(np.linalg.norm(Ax) / np.linalg.norm(x), np.linalg.norm(Ay) / np.linalg.norm(y))
        defect = abs(np.vdot(x, Ay) - np.vdot(Ax, y))
        worst = max(worst, defect / (np.linalg.norm(x) * np.linalg.norm(y) * scale))
    return worst
