import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from specoa.linalg import (
    DimensionMismatchError,
    InvalidInputError,
    NotSimultaneouslyDiagonalizableError,
    commutator_norm,
    is_psd,
    min_eig,
    pack,
    simultaneous_diagonalizer,
    sym_eigen,
    unpack,
)

from conftest import random_sym

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def _random_orthogonal(rng, n):
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    return Q * np.sign(np.diag(R))


def _offdiag(M):
    return np.abs(M - np.diag(np.diag(M))).max()


# -- sym_eigen ------------------------------------------------------------------

def test_identity_reconstructs():
    dec = sym_eigen(np.eye(2))
    assert np.allclose(dec.values, [1.0, 1.0])
    assert np.linalg.norm(dec.reconstruct() - np.eye(2)) <= 1e-12
    assert np.linalg.norm(dec.vectors.T @ dec.vectors - np.eye(2)) <= 1e-12


def test_diagonal_input():
    dec = sym_eigen(np.diag([3.0, 1.0]))
    assert np.array_equal(dec.values, [3.0, 1.0])
    assert np.allclose(dec.vectors, np.eye(2))


def test_swap_matrix_eigenpairs():
    A = np.array([[0.0, 1.0], [1.0, 0.0]])
    dec = sym_eigen(A)
    assert np.allclose(dec.values, [1.0, -1.0])
    for lam, v in zip(dec.values, dec.vectors.T):
        assert np.allclose(A @ v, lam * v, atol=1e-12)
    assert np.allclose(dec.vectors[:, 0], np.array([1, 1]) / np.sqrt(2))
    assert np.allclose(dec.vectors[:, 1], np.array([1, -1]) / np.sqrt(2))


def test_non_finite_rejected():
    with pytest.raises(InvalidInputError):
        sym_eigen(np.array([[1.0, np.nan], [np.nan, 1.0]]))
    with pytest.raises(InvalidInputError):
        min_eig(np.array([[np.inf]]))


def test_asymmetric_rejected():
    with pytest.raises(InvalidInputError):
        sym_eigen(np.array([[1.0, 2.0], [0.0, 1.0]]))


@given(seed=seeds, n=st.integers(1, 30))
def test_reconstruction_and_orthogonality(seed, n):
    rng = np.random.default_rng(seed)
    A = random_sym(rng, n, scale=10.0 ** rng.uniform(-3, 3))
    dec = sym_eigen(A)
    assert np.linalg.norm(A - dec.reconstruct()) <= 1e-9 * max(np.linalg.norm(A), 1e-300)
    assert np.linalg.norm(dec.vectors.T @ dec.vectors - np.eye(n)) <= 1e-9
    assert np.all(np.diff(dec.values) <= 0)
    assert np.all(np.isfinite(dec.values))


@given(seed=seeds, n=st.integers(1, 12))
def test_sign_convention_and_determinism(seed, n):
    rng = np.random.default_rng(seed)
    A = random_sym(rng, n)
    d1, d2 = sym_eigen(A), sym_eigen(A.copy())
    assert np.array_equal(d1.values, d2.values)
    assert np.array_equal(d1.vectors, d2.vectors)
    for v in d1.vectors.T:
        first = v[np.flatnonzero(np.abs(v) > 1e-12)[0]]
        assert first > 0


@given(seed=seeds, n=st.integers(2, 10))
def test_repeated_eigenvalues(seed, n):
    rng = np.random.default_rng(seed)
    Q = _random_orthogonal(rng, n)
    vals = rng.integers(-2, 3, n).astype(float)
    A = (Q * vals) @ Q.T
    A = 0.5 * (A + A.T)
    dec = sym_eigen(A)
    assert np.allclose(dec.values, np.sort(vals)[::-1], atol=1e-9)
    assert np.linalg.norm(A - dec.reconstruct()) <= 1e-9 * max(1.0, np.linalg.norm(A))


# -- min_eig ----------------------------------------------------------------------

def test_min_eig_identity():
    lam, w = min_eig(np.eye(3))
    assert lam == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.norm(w) == pytest.approx(1.0)


def test_min_eig_diagonal():
    lam, w = min_eig(np.diag([2.0, -5.0]))
    assert lam == pytest.approx(-5.0, abs=1e-12)
    assert np.allclose(np.abs(w), [0.0, 1.0])


def test_min_eig_closed_form_2x2():
    a, b, c = 1.0, 2.0, 1.0
    expected = (a + c - np.sqrt((a - c) ** 2 + 4 * b * b)) / 2
    lam, w = min_eig(np.array([[a, b], [b, c]]))
    assert lam == pytest.approx(expected, abs=1e-12)
    assert np.allclose(w, np.array([1.0, -1.0]) / np.sqrt(2))


@given(seed=seeds, n=st.integers(1, 20))
def test_min_eig_residual_and_agreement(seed, n):
    rng = np.random.default_rng(seed)
    A = random_sym(rng, n)
    scale = max(1.0, np.linalg.norm(A))
    lam, w = min_eig(A)
    assert np.linalg.norm(A @ w - lam * w) <= 1e-8 * scale
    assert abs(np.linalg.norm(w) - 1.0) <= 1e-12
    assert abs(lam - np.linalg.eigvalsh(A)[0]) <= 1e-10 * scale
    assert abs(lam - sym_eigen(A).values[-1]) <= 1e-10 * scale


# -- commutator_norm --------------------------------------------------------------

def test_commutator_identity_and_diagonal():
    rng = np.random.default_rng(0)
    A = random_sym(rng, 4)
    assert commutator_norm(np.eye(4), A) <= 1e-12
    assert commutator_norm(np.diag([1.0, 2.0]), np.diag([3.0, 4.0])) == 0.0


def test_commutator_by_hand():
    A = np.array([[0.0, 1.0], [1.0, 0.0]])
    B = np.diag([1.0, 2.0])
    by_hand = np.array([[0.0, 1.0], [-1.0, 0.0]])     # AB - BA
    assert np.array_equal(A @ B - B @ A, by_hand)
    assert commutator_norm(A, B) == pytest.approx(np.sqrt(2.0), abs=1e-15)


def test_commutator_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        commutator_norm(np.eye(2), np.eye(3))


# -- simultaneous_diagonalizer ------------------------------------------------------

def test_diagonal_pair_gives_permutation():
    U = simultaneous_diagonalizer(np.diag([1.0, 2.0]), np.diag([5.0, 6.0]))
    assert np.allclose(np.abs(U) @ np.abs(U).T, np.eye(2))
    assert np.allclose(np.sort(np.abs(U).ravel()), [0, 0, 1, 1])


def test_zero_partner_gives_eigenvectors_of_c():
    rng = np.random.default_rng(1)
    C = random_sym(rng, 5)
    U = simultaneous_diagonalizer(C, np.zeros((5, 5)))
    assert _offdiag(U.T @ C @ U) <= 1e-9 * np.linalg.norm(C)
    assert np.allclose(U, sym_eigen(C).vectors)


def test_constructed_pair():
    rng = np.random.default_rng(12345)
    U0 = _random_orthogonal(rng, 3)
    C = U0 @ np.diag([1.0, 2.0, 3.0]) @ U0.T
    B = U0 @ np.diag([9.0, 4.0, 7.0]) @ U0.T
    C, B = 0.5 * (C + C.T), 0.5 * (B + B.T)
    U = simultaneous_diagonalizer(C, B)
    assert _offdiag(U.T @ C @ U) <= 1e-8
    assert _offdiag(U.T @ B @ U) <= 1e-8
    assert np.linalg.norm(U.T @ U - np.eye(3)) <= 1e-10


def test_non_commuting_rejected():
    with pytest.raises(NotSimultaneouslyDiagonalizableError):
        simultaneous_diagonalizer(np.array([[0.0, 1.0], [1.0, 0.0]]), np.diag([1.0, 2.0]))


@given(seed=seeds, n=st.integers(1, 12), degenerate=st.booleans())
def test_simultaneous_diagonalization_property(seed, n, degenerate):
    rng = np.random.default_rng(seed)
    U0 = _random_orthogonal(rng, n)
    if degenerate:
        # Shared repeated eigenvalues defeat a single random combination.
        c = rng.integers(0, 2, n).astype(float)
        b = rng.integers(0, 2, n).astype(float)
    else:
        c, b = rng.standard_normal(n), rng.standard_normal(n)
    C = U0 @ np.diag(c) @ U0.T
    B = U0 @ np.diag(b) @ U0.T
    C, B = 0.5 * (C + C.T), 0.5 * (B + B.T)
    U = simultaneous_diagonalizer(C, B)
    assert np.linalg.norm(U.T @ U - np.eye(n)) <= 1e-9
    assert _offdiag(U.T @ C @ U) <= 1e-7 * max(1.0, np.linalg.norm(C))
    assert _offdiag(U.T @ B @ U) <= 1e-7 * max(1.0, np.linalg.norm(B))


# -- is_psd, packing -------------------------------------------------------------------

def test_is_psd_examples():
    assert is_psd(np.eye(4), 1e-9)
    assert not is_psd(np.diag([1.0, -1e-3]), 1e-9)


@given(seed=seeds, n=st.integers(1, 15))
def test_rank_one_gram_is_psd(seed, n):
    x = np.random.default_rng(seed).standard_normal(n)
    assert is_psd(np.outer(x, x), 1e-9 * max(1.0, x @ x))


@given(seed=seeds, n=st.integers(1, 15))
def test_pack_round_trip(seed, n):
    A = random_sym(np.random.default_rng(seed), n)
    v = pack(A)
    assert v.size == n * (n + 1) // 2
    B = unpack(v)
    assert np.array_equal(B, B.T)
    assert np.allclose(B, A, rtol=0, atol=1e-15)


def test_unpack_length_mismatch():
    with pytest.raises(DimensionMismatchError):
        unpack(np.zeros(4), 2)
