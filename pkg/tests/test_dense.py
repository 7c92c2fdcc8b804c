import numpy as np
import pytest
import scipy.linalg as sla
from numpy import isclose

from plhr_tools.dense import (
    b_normalize,
    b_orthonormalize,
    rayleigh_quotient_block,
    rayleigh_ritz_hermitian,
    solve_projected_pencil,
    split_conjugate_basis,
)
from plhr_tools.exceptions import ConjugateOrderingError, DegenerateProjectionError
from plhr_tools.operators import fd_laplacian_matrix, fd_laplacian_spectrum, fe_laplacian_q1

TOLERANCE = 1e-10


@pytest.fixture()
def rng():
    return np.random.default_rng(42)


def _spd(rng, n: int) -> np.ndarray:
    G = rng.standard_normal((n, n))
    return G @ G.T / n + np.eye(n)


def _symmetric(rng, n: int) -> np.ndarray:
    G = rng.standard_normal((n, n))
    return (G + G.T) / 2


def test_orthonormalize_orthonormal_input():
    Z = np.eye(6)[:, :3]
    Q, rank, kept = b_orthonormalize(Z, None)
    assert rank == 3
    assert list(kept) == [0, 1, 2]
    assert isclose(np.abs(Q), Z).all()


def test_orthonormalize_drops_duplicate(rng):
    Z = rng.standard_normal((20, 3))
    Z = np.concatenate([Z, Z[:, [1]]], axis=1)
    Q, rank, kept = b_orthonormalize(Z, None)
    assert rank == 3
    assert 3 not in kept


def test_orthonormalize_fe_mass(rng):
    B = fe_laplacian_q1(11).B
    Z = rng.standard_normal((100, 8))
    Q, rank, _ = b_orthonormalize(Z, B)
    assert rank == 8
    assert np.abs(Q.T @ (B @ Q) - np.eye(8)).max() <= 1e-12


def test_orthonormalize_is_idempotent(rng):
    B = _spd(rng, 30)
    Q, _, _ = b_orthonormalize(rng.standard_normal((30, 5)), B)
    Q2, rank, _ = b_orthonormalize(Q, B)
    assert rank == 5
    assert (np.abs(np.sum(Q * (B @ Q2), axis=0)) >= 1 - TOLERANCE).all()


def test_orthonormalize_keeps_block_order(rng):
    V = rng.standard_normal((15, 2))
    W = rng.standard_normal((15, 2))
    Q, _, _ = b_orthonormalize(np.concatenate([V, W], axis=1), None)
    # The first columns span V exactly
    projector = Q[:, :2] @ Q[:, :2].T
    assert isclose(projector @ V, V, atol=TOLERANCE).all()


def test_orthonormalize_rejects_non_finite():
    Z = np.ones((4, 2))
    Z[0, 0] = np.nan
    with pytest.raises(ValueError):
        b_orthonormalize(Z, None)


def test_b_normalize_scales_columns(rng):
    B = _spd(rng, 10)
    V, BV = b_normalize(rng.standard_normal((10, 3)), B=B)
    assert isclose(np.sum(V * BV, axis=0), 1.0).all()
    assert isclose(BV, B @ V).all()


def test_projected_pencil_diagonal():
    solution = solve_projected_pencil(np.diag([2.0, -1.0]), np.eye(2))
    assert isclose(solution.values, [-1.0, 2.0]).all()
    assert isclose(np.abs(solution.vectors), [[0, 1], [1, 0]]).all()


def test_projected_pencil_rotation_is_conjugate_adjacent():
    solution = solve_projected_pencil(np.array([[0.0, 1.0], [-1.0, 0.0]]), np.eye(2))
    assert isclose(np.abs(solution.values), 1.0).all()
    assert isclose(solution.values[0], np.conj(solution.values[1]))
    assert isclose(solution.vectors[:, 1], solution.vectors[:, 0].conj()).all()


def test_projected_pencil_ties_sorted_by_real_part():
    solution = solve_projected_pencil(np.diag([1.0, -1.0]), np.eye(2))
    assert isclose(solution.values, [-1.0, 1.0]).all()


def test_projected_pencil_near_real_pair_keeps_both_directions():
    # LAPACK returns the double eigenvalue 2 as 2 +- 1e-14 i
    L = np.array([[2.0, 1e-14, 0.0], [-1e-14, 2.0, 0.0], [0.0, 0.0, 5.0]])
    solution = solve_projected_pencil(L, np.eye(3))
    assert np.all(solution.values.imag == 0)
    assert isclose(solution.values.real, [2.0, 2.0, 5.0]).all()
    assert np.all(solution.vectors.imag == 0)

    pair = solution.vectors[:, :2].real
    assert isclose(pair.T @ pair, np.eye(2), atol=TOLERANCE).all()
    assert np.abs(pair[2]).max() <= TOLERANCE
    for xi, y in zip(solution.values, solution.vectors.T):
        assert np.linalg.norm(L @ y - xi * y) <= TOLERANCE


def test_projected_pencil_double_eigenvalue_spans_eigenspace(rng):
    S = rng.standard_normal((6, 6))
    L = S @ np.diag([3.0, 3.0, 7.0, -8.0, 9.0, 12.0]) @ np.linalg.inv(S)
    M = np.eye(6) + 0.1 * _symmetric(rng, 6)
    solution = solve_projected_pencil(M @ L, M)

    pair = solution.vectors[:, :2]
    assert isclose(solution.values[:2], 3.0, atol=1e-9).all()
    assert np.linalg.svd(pair, compute_uv=False).min() >= 1e-3
    Q, _ = np.linalg.qr(S[:, :2])
    assert isclose(Q @ (Q.T @ pair), pair, atol=1e-8).all()


def test_projected_pencil_residuals(rng):
    L = rng.standard_normal((8, 8))
    M = np.eye(8) + 0.1 * _symmetric(rng, 8)
    solution = solve_projected_pencil(L, M)
    assert len(solution) == 8
    assert (np.abs(np.diff(np.abs(solution.values))) >= -1e-12).all()
    for xi, y in zip(solution.values, solution.vectors.T):
        residual = np.linalg.norm(L @ y - xi * (M @ y))
        scale = np.linalg.norm(L, 2) + abs(xi) * np.linalg.norm(M, 2)
        assert residual <= TOLERANCE * scale
        assert isclose(np.linalg.norm(y), 1.0)


def test_projected_pencil_matches_characteristic_roots(rng):
    L = rng.standard_normal((3, 3))
    M = np.eye(3) + 0.1 * _symmetric(rng, 3)
    expected = np.roots(np.poly(np.linalg.solve(M, L)))
    values = solve_projected_pencil(L, M).values
    assert isclose(np.sort_complex(values), np.sort_complex(expected), atol=1e-9).all()


def test_projected_pencil_singular_m():
    with pytest.raises(DegenerateProjectionError):
        solve_projected_pencil(np.eye(3), np.zeros((3, 3)))


def test_projected_pencil_shape_mismatch():
    with pytest.raises(ValueError):
        solve_projected_pencil(np.eye(3), np.eye(2))


def test_rayleigh_ritz_invariant_subspace(rng):
    A = fd_laplacian_matrix(4).toarray()
    values, vectors = sla.eigh(A)
    nearest = np.argsort(np.abs(values - 400))[:3]
    mixing, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    V = vectors[:, nearest] @ mixing

    ritz_values, ritz_vectors = rayleigh_ritz_hermitian(V, A, None, sigma=400)
    expected = fd_laplacian_spectrum(4).nearest(400, 3)
    assert isclose(np.sort(ritz_values), np.sort(expected), rtol=TOLERANCE, atol=0).all()
    assert isclose(ritz_vectors.T @ ritz_vectors, np.eye(3), atol=TOLERANCE).all()
    assert (np.diff(np.abs(ritz_values - 400)) >= 0).all()


def test_rayleigh_ritz_single_column(rng):
    A = _symmetric(rng, 12)
    B = _spd(rng, 12)
    v = rng.standard_normal((12, 1))
    values, _ = rayleigh_ritz_hermitian(v, A, B)
    assert isclose(values[0], (v.T @ A @ v).item() / (v.T @ B @ v).item())


def test_rayleigh_ritz_rank_collapse(rng):
    v = rng.standard_normal((10, 1))
    with pytest.raises(DegenerateProjectionError):
        rayleigh_ritz_hermitian(np.concatenate([v, v], axis=1), np.eye(10), None)


def test_rayleigh_quotient_of_eigenvector(rng):
    A = _symmetric(rng, 10)
    B = _spd(rng, 10)
    values, vectors = sla.eigh(A, B)
    quotients = rayleigh_quotient_block(vectors[:, :3], A, B)
    assert isclose(quotients, values[:3]).all()


def test_rayleigh_quotient_scaling(rng):
    A = _symmetric(rng, 10)
    v = rng.standard_normal((10, 1))
    assert isclose(rayleigh_quotient_block(2 * v, A, None), rayleigh_quotient_block(v, A, None))


def test_paired_rayleigh_quotient_matches_complex(rng):
    A = _symmetric(rng, 10)
    B = _spd(rng, 10)
    v = rng.standard_normal(10) + 1j * rng.standard_normal(10)
    expected = np.real(np.vdot(v, A @ v) / np.vdot(v, B @ v))

    V = np.stack([v.real, v.imag], axis=1)
    quotients = rayleigh_quotient_block(V, A, B, pairing=[(0, 1)])
    assert isclose(quotients, expected, rtol=1e-12, atol=0).all()


def test_rayleigh_quotient_zero_column():
    with pytest.raises(ValueError):
        rayleigh_quotient_block(np.zeros((4, 1)), np.eye(4), None)


def test_split_all_real(rng):
    Y = rng.standard_normal((6, 3)).astype(complex)
    Yprime, pairing, tail = split_conjugate_basis(Y, 3)
    assert isclose(Yprime, Y.real).all()
    assert pairing == []
    assert not tail


def test_split_conjugate_pair(rng):
    y = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    Y = np.stack([y, y.conj()], axis=1)
    Yprime, pairing, tail = split_conjugate_basis(Y, 2)
    assert isclose(Yprime, np.stack([y.real, y.imag], axis=1)).all()
    assert pairing == [(0, 1)]
    assert not tail
    assert np.linalg.matrix_rank(Yprime.astype(complex)) == np.linalg.matrix_rank(Y) == 2


def test_split_truncated_tail(rng):
    r0, r1 = rng.standard_normal((2, 6))
    c = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    Y = np.stack([r0, r1, c, c.conj()], axis=1).astype(complex)
    Yprime, pairing, tail = split_conjugate_basis(Y, 3)
    assert Yprime.shape == (6, 3)
    assert tail
    assert pairing == []
    assert isclose(Yprime[:, 2], c.real).all()


def test_split_orders_real_pairs_tail_imaginary(rng):
    r = rng.standard_normal(6)
    c, d = rng.standard_normal((2, 6)) + 1j * rng.standard_normal((2, 6))
    Y = np.stack([c, c.conj(), r, d, d.conj()], axis=1)
    Yprime, pairing, tail = split_conjugate_basis(Y, 4)
    assert tail
    assert pairing == [(1, 3)]
    expected = np.stack([r, c.real, d.real, c.imag], axis=1)
    assert isclose(Yprime, expected).all()


def test_split_preserves_span(rng):
    c = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    r = rng.standard_normal(8)
    Y = np.stack([r, c, c.conj()], axis=1)
    Yprime, _, tail = split_conjugate_basis(Y, 3)
    assert not tail

    def projector(X):
        Q, _ = np.linalg.qr(X)
        return Q @ Q.conj().T

    assert isclose(projector(Y), projector(Yprime.astype(complex)), atol=TOLERANCE).all()


def test_split_ordering_violation(rng):
    c = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    r = rng.standard_normal(5)
    with pytest.raises(ConjugateOrderingError):
        split_conjugate_basis(np.stack([c, r], axis=1), 2)
