from abc import ABC, abstractmethod
from pathlib import Path
from threading import Lock

from .grids import unknowns
from .operators import (
    DENSE_LIMIT,
    Pencil,
    SpectrumOracle,
    dense_spectrum,
    fd_laplacian_2d,
    fd_laplacian_spectrum,
    fe_laplacian_q1,
    load_matrix_market,
)


class Loader(ABC):
    """A loader builds the pencil of a run, once, and hands out the same
    immutable object to every run that shares it."""

    def __init__(self):
        self._pencil = None
        self._spectrum = None
        self._lock = Lock()

    @abstractmethod
    def _build(self) -> Pencil:
        pass

    @property
    @abstractmethod
    def n(self) -> int:
        pass

    def load(self) -> Pencil:
        with self._lock:
            if self._pencil is None:
                self._pencil = self._build()
            return self._pencil

    def spectrum(self) -> SpectrumOracle:
        """All eigenvalues of the pencil, from a dense solve unless a closed
        form is known."""
        if self._spectrum is None:
            if self.n > DENSE_LIMIT:
                raise ValueError(
                    f"no spectrum oracle for n = {self.n} beyond the dense limit {DENSE_LIMIT}"
                )
            self._spectrum = dense_spectrum(self.load())
        return self._spectrum


class FdLoader(Loader):
    def __init__(self, omega: int):
        super().__init__()
        self.omega = omega

    @property
    def n(self) -> int:
        return unknowns(self.omega)

    def _build(self) -> Pencil:
        return fd_laplacian_2d(self.omega)

    def spectrum(self) -> SpectrumOracle:
        return fd_laplacian_spectrum(self.omega)


class FeLoader(Loader):
    def __init__(self, ne: int):
        super().__init__()
        self.ne = ne

    @property
    def n(self) -> int:
        return (self.ne - 1) ** 2

    def _build(self) -> Pencil:
        return fe_laplacian_q1(self.ne)


class MatrixMarketLoader(Loader):
    def __init__(self, path_a: str | Path, path_b: str | Path | None = None):
        super().__init__()
        self.path_a = path_a
        self.path_b = path_b

    @property
    def n(self) -> int:
        return self.load().n

    def _build(self) -> Pencil:
        return load_matrix_market(self.path_a, self.path_b)
