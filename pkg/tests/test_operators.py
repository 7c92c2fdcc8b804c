import numpy as np
import pytest
import scipy.linalg as sla
from numpy import isclose
from scipy.sparse.linalg import eigsh

from plhr_tools.exceptions import NonHermitianError
from plhr_tools.operators import (
    Pencil,
    dense_av_inverse,
    dense_operator,
    dense_spectrum,
    fd_laplacian_2d,
    fd_laplacian_matrix,
    fd_laplacian_spectrum,
    fe_laplacian_q1,
    hermitian_defect,
    load_matrix_market,
    perturbed_preconditioner,
    write_matrix_market,
)

TOLERANCE = 1e-12


def _q1_eigenvalue(ne: int, p: int, q: int) -> float:
    """Closed form of the tensor-product Q1 eigenvalue with consistent mass."""
    h = 1.0 / ne

    def one_dimensional(j):
        c = np.cos(j * np.pi * h)
        return 6 / h**2 * (1 - c) / (2 + c)

    return one_dimensional(p) + one_dimensional(q)


@pytest.fixture()
def small_pencil():
    rng = np.random.default_rng(11)
    G = rng.standard_normal((40, 40))
    return Pencil(A=dense_operator((G + G.T) / 2), B=None)


def test_fd_dimensions_and_zero():
    pencil = fd_laplacian_2d(7)
    assert pencil.n == 16129
    assert pencil.is_standard
    assert (pencil.apply_a(np.zeros(pencil.n)) == 0).all()


def test_fd_rejects_bad_level():
    with pytest.raises(ValueError):
        fd_laplacian_2d(0)
    with pytest.raises(ValueError):
        fd_laplacian_2d(13)


def test_fd_spectrum_matches_dense():
    dense = sla.eigvalsh(fd_laplacian_matrix(2).toarray())
    assert isclose(fd_laplacian_spectrum(2).eigenvalues, dense, rtol=TOLERANCE).all()
    assert isclose(dense[0], 128 * np.sin(np.pi / 8) ** 2)


def test_fd_has_enough_eigenvalues_in_window():
    values = fd_laplacian_spectrum(7).eigenvalues
    assert np.count_nonzero((values >= 400) & (values <= 700)) >= 10


def test_oracle_nearest_sorted_by_distance():
    nearest = fd_laplacian_spectrum(5).nearest(400.0, 6)
    assert len(nearest) == 6
    assert (np.diff(np.abs(nearest - 400.0)) >= 0).all()


@pytest.mark.parametrize("pencil", [fd_laplacian_2d(5), fe_laplacian_q1(20)])
def test_model_problems_are_hermitian(pencil):
    assert hermitian_defect(pencil.A) <= TOLERANCE
    if pencil.B is not None:
        assert hermitian_defect(pencil.B) <= TOLERANCE


def test_fe_dimensions():
    pencil = fe_laplacian_q1(50)
    assert pencil.n == 2401
    assert not pencil.is_standard
    assert pencil.B.definite


def test_fe_spectrum_matches_closed_form():
    values = dense_spectrum(fe_laplacian_q1(10)).eigenvalues
    expected = np.sort(
        [_q1_eigenvalue(10, p, q) for p in range(1, 10) for q in range(1, 10)]
    )
    assert isclose(values, expected, rtol=1e-9).all()


@pytest.mark.parametrize(
    "sigma,expected,modes",
    [(497.0, 497.5521, (5, 5)), (980.0, 979.7072, (4, 9))],
)
def test_fe_interior_eigenvalues(sigma, expected, modes):
    pencil = fe_laplacian_q1(50)
    value = eigsh(pencil.A.matrix, k=1, M=pencil.B.matrix, sigma=sigma, which="LM")[0][0]
    assert isclose(value, _q1_eigenvalue(50, *modes), rtol=1e-9)
    assert abs(value - expected) < 1e-4


def test_pencil_rejects_mismatch():
    with pytest.raises(ValueError):
        Pencil(A=dense_operator(np.eye(3)), B=dense_operator(np.eye(2), definite=True))


def test_pencil_rejects_indefinite_b():
    with pytest.raises(ValueError):
        Pencil(A=dense_operator(np.eye(3)), B=dense_operator(np.eye(3)))


def test_pencil_refuses_large_dense():
    with pytest.raises(ValueError):
        fd_laplacian_2d(7).dense()


def test_operators_are_linear():
    pencil = fe_laplacian_q1(8)
    rng = np.random.default_rng(0)
    x, y = rng.standard_normal((2, pencil.n))
    assert isclose(pencil.apply_b(2 * x + y), 2 * pencil.apply_b(x) + pencil.apply_b(y)).all()


def test_matrix_market_minimal(tmp_path):
    path = tmp_path / "a.mtx"
    path.write_text(
        "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1.0\n2 2 2.0\n"
    )
    pencil = load_matrix_market(path)
    assert pencil.is_standard
    assert isclose(pencil.apply_a(np.ones(2)), [1.0, 2.0]).all()


def test_matrix_market_general_is_rejected(tmp_path):
    path = tmp_path / "a.mtx"
    path.write_text(
        "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n2 1 2.0\n"
    )
    with pytest.raises(NonHermitianError):
        load_matrix_market(path)


def test_matrix_market_general_storage_of_symmetric_matrix_is_rejected(tmp_path):
    path = tmp_path / "a.mtx"
    path.write_text(
        "%%MatrixMarket matrix coordinate real general\n2 2 4\n"
        "1 1 1.0\n1 2 2.0\n2 1 2.0\n2 2 3.0\n"
    )
    with pytest.raises(NonHermitianError, match="general"):
        load_matrix_market(path)


def test_matrix_market_indefinite_b_is_rejected(tmp_path):
    a, b = tmp_path / "a.mtx", tmp_path / "b.mtx"
    a.write_text("%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1.0\n2 2 1.0\n")
    b.write_text("%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n1 1 1.0\n2 1 2.0\n2 2 1.0\n")
    with pytest.raises(ValueError):
        load_matrix_market(a, b)


def test_matrix_market_round_trip(tmp_path):
    pencil = fe_laplacian_q1(10)
    a, b = tmp_path / "a.mtx", tmp_path / "b.mtx"
    write_matrix_market(pencil, a, b)
    loaded = load_matrix_market(a, b)

    x = np.random.default_rng(1).standard_normal((pencil.n, 2))
    for original, reloaded in ((pencil.apply_a, loaded.apply_a), (pencil.apply_b, loaded.apply_b)):
        expected = original(x)
        assert np.abs(reloaded(x) - expected).max() <= 1e-14 * np.abs(expected).max()


def test_dense_inverse_of_diagonal():
    pencil = Pencil(A=dense_operator(np.diag([1.0, 3.0])))
    T = dense_av_inverse(pencil, 2.0)
    assert isclose(T.to_dense(), np.eye(2)).all()
    assert T.definite


def test_dense_inverse_squares_to_identity(small_pencil):
    sigma = 0.1
    A, _ = small_pencil.dense()
    C = A - sigma * np.eye(small_pencil.n)
    T = dense_av_inverse(small_pencil, sigma).to_dense()
    TC = T @ C
    assert isclose(TC @ TC, np.eye(small_pencil.n), atol=1e-9).all()

    plain = dense_av_inverse(small_pencil, sigma, mode="plain").to_dense()
    assert isclose(plain @ C, np.eye(small_pencil.n), atol=1e-9).all()


def test_dense_inverse_at_eigenvalue_warns():
    pencil = Pencil(A=dense_operator(np.diag([1.0, 2.0, 3.0])))
    with pytest.warns(UserWarning):
        T = dense_av_inverse(pencil, 2.0)
    assert isclose(np.diag(T.to_dense()), [1.0, 0.0, 1.0]).all()
    assert not T.definite


def test_perturbation_size(small_pencil):
    sigma, epsilon = 0.1, 1e-2
    exact = dense_av_inverse(small_pencil, sigma).to_dense()
    T = perturbed_preconditioner(small_pencil, sigma, epsilon, seed=3).to_dense()
    assert isclose(np.linalg.norm(T - exact, 2), epsilon * np.linalg.norm(exact, 2), rtol=1e-8)
    assert sla.eigvalsh(T)[0] > 0


def test_zero_perturbation_is_exact(small_pencil):
    exact = dense_av_inverse(small_pencil, 0.1).to_dense()
    assert isclose(perturbed_preconditioner(small_pencil, 0.1, 0.0).to_dense(), exact).all()


def test_perturbation_is_seeded(small_pencil):
    first = perturbed_preconditioner(small_pencil, 0.1, 0.1, seed=5).to_dense()
    second = perturbed_preconditioner(small_pencil, 0.1, 0.1, seed=5).to_dense()
    assert np.array_equal(first, second)


def test_negative_perturbation(small_pencil):
    with pytest.raises(ValueError):
        perturbed_preconditioner(small_pencil, 0.1, -1.0)
