"""Dense symmetric linear algebra.

Symmetric matrices are plain ``numpy`` arrays of shape ``(n, n)``; every
public function validates its input with :func:`as_sym`, which rejects
non-square, non-finite or visibly asymmetric input and returns the exactly
symmetrized copy.  :func:`pack` / :func:`unpack` convert to the packed lower
triangle used by the file format and the conic engine.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "InvalidInputError",
    "DimensionMismatchError",
    "NotSimultaneouslyDiagonalizableError",
    "EigenDecomposition",
    "as_sym",
    "pack",
    "unpack",
    "sym_eigen",
    "min_eig",
    "commutator_norm",
    "simultaneous_diagonalizer",
    "is_psd",
]

SIGN_TOL = 1e-12
_MAX_SWEEPS = 100
_MU_SEED = 0x5DEECE66D


class InvalidInputError(ValueError):
    """Raised for non-finite, non-square or asymmetric matrix input."""


class DimensionMismatchError(ValueError):
    pass


class NotSimultaneouslyDiagonalizableError(ValueError):
    pass


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenpairs sorted by decreasing eigenvalue; ``vectors[:, i]`` pairs
    with ``values[i]``."""

    values: np.ndarray
    vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        V = self.vectors
        return (V * self.values) @ V.T


def as_sym(A, *, name: str = "matrix", sym_tol: float = 1e-9) -> np.ndarray:
    A = np.array(A, dtype=float, copy=True)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise InvalidInputError(f"{name} must be a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError(f"{name} has non-finite entries")
    asym = np.abs(A - A.T).max()
    if asym > sym_tol * max(1.0, np.abs(A).max()):
        raise InvalidInputError(f"{name} is not symmetric (max |A - A^T| = {asym:.3g})")
    return 0.5 * (A + A.T)


def pack(A) -> np.ndarray:
    """Row-major packed lower triangle: A00, A10, A11, A20, A21, A22, ..."""
    A = as_sym(A)
    return A[np.tril_indices(A.shape[0])].copy()


def unpack(v, n: int | None = None) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if n is None:
        n = int(round((np.sqrt(8 * v.size + 1) - 1) / 2))
    if v.size != n * (n + 1) // 2:
        raise DimensionMismatchError(f"packed length {v.size} does not match n={n}")
    A = np.zeros((n, n))
    A[np.tril_indices(n)] = v
    return A + np.tril(A, -1).T


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Disjoint index pairs for each step of a parallel Jacobi sweep."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = [(players[k], players[m - 1 - k]) for k in range(m // 2)]
        pairs = [(min(p, q), max(p, q)) for p, q in pairs if p < n and q < n]
        if pairs:
            p, q = np.array(pairs).T
            rounds.append((p, q))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _jacobi(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = A.shape[0]
    V = np.eye(n)
    if n == 1:
        return A.diagonal().copy(), V
    scale = np.linalg.norm(A)
    if scale == 0.0:
        return np.zeros(n), V
    stop = 1e-16 * scale
    rounds = _round_robin(n)
    for _ in range(_MAX_SWEEPS):
        if np.linalg.norm(A - np.diag(A.diagonal())) <= stop:
            break
        for P, Q in rounds:
            apq = A[P, Q]
            live = np.abs(apq) > 1e-300
            if not live.any():
                continue
            P, Q, apq = P[live], Q[live], apq[live]
            tau = (A[Q, Q] - A[P, P]) / (2.0 * apq)
            t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.hypot(1.0, tau))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            rp, rq = A[P, :].copy(), A[Q, :].copy()
            A[P, :] = c[:, None] * rp - s[:, None] * rq
            A[Q, :] = s[:, None] * rp + c[:, None] * rq
            cp, cq = A[:, P].copy(), A[:, Q].copy()
            A[:, P] = cp * c - cq * s
            A[:, Q] = cp * s + cq * c
            A[P, Q] = 0.0
            A[Q, P] = 0.0
            vp, vq = V[:, P].copy(), V[:, Q].copy()
            V[:, P] = vp * c - vq * s
            V[:, Q] = vp * s + vq * c
    return A.diagonal().copy(), V


def _fix_signs(V: np.ndarray) -> np.ndarray:
    for j in range(V.shape[1]):
        big = np.flatnonzero(np.abs(V[:, j]) > SIGN_TOL)
        if big.size and V[big[0], j] < 0:
            V[:, j] = -V[:, j]
    return V


def sym_eigen(A) -> EigenDecomposition:
    """Eigendecomposition by cyclic (round-robin parallel) Jacobi rotations.

    Values come back in non-increasing order; each eigenvector has its first
    entry of magnitude above ``1e-12`` positive so that output is
    reproducible for identical input.
    """
    A = as_sym(A)
    w, V = _jacobi(A.copy())
    order = np.argsort(-w, kind="stable")
    return EigenDecomposition(w[order], _fix_signs(V[:, order]))


def min_eig(A) -> tuple[float, np.ndarray]:
    dec = sym_eigen(A)
    return float(dec.values[-1]), dec.vectors[:, -1].copy()


def commutator_norm(A, B) -> float:
    A, B = as_sym(A), as_sym(B)
    if A.shape != B.shape:
        raise DimensionMismatchError(f"shapes {A.shape} and {B.shape} differ")
    return float(np.linalg.norm(A @ B - B @ A))


def _distinct(values: np.ndarray, gap: float) -> bool:
    return values.size < 2 or float(np.min(-np.diff(values))) > gap


def simultaneous_diagonalizer(C, B, tol: float = 1e-8) -> np.ndarray:
    """Orthogonal ``U`` with ``U.T @ C @ U`` and ``U.T @ B @ U`` diagonal.

    Tries ``C + mu * B`` for a few pseudorandom ``mu`` until its spectrum is
    simple; otherwise diagonalizes ``B`` inside each eigenspace of ``C``.
    """
    C, B = as_sym(C, name="C"), as_sym(B, name="B")
    if C.shape != B.shape:
        raise DimensionMismatchError(f"shapes {C.shape} and {B.shape} differ")
    nc, nb = np.linalg.norm(C), np.linalg.norm(B)
    comm = commutator_norm(C, B)
    if comm > tol * max(1.0, nc * nb):
        raise NotSimultaneouslyDiagonalizableError(
            f"commutator norm {comm:.3g} exceeds {tol:g} * scale"
        )
    if nb == 0.0:
        return sym_eigen(C).vectors
    rng = np.random.default_rng(_MU_SEED)
    ratio = nc / nb if nc > 0 else 1.0
    for _ in range(5):
        mu = ratio * rng.uniform(0.5, 1.5) * rng.choice([-1.0, 1.0])
        M = C + mu * B
        dec = sym_eigen(M)
        if _distinct(dec.values, 1e-9 * max(1.0, np.linalg.norm(M))):
            return dec.vectors
    return _blockwise(C, B)


def _blockwise(C: np.ndarray, B: np.ndarray) -> np.ndarray:
    dec = sym_eigen(C)
    gap = 1e-9 * max(1.0, np.linalg.norm(C))
    n = C.shape[0]
    U = np.empty((n, n))
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and dec.values[stop - 1] - dec.values[stop] <= gap:
            stop += 1
        Q = dec.vectors[:, start:stop]
        inner = sym_eigen(Q.T @ B @ Q)
        U[:, start:stop] = Q @ inner.vectors
        start = stop
    return _fix_signs(U)


def is_psd(A, tol: float = 1e-9) -> bool:
    lam, _ = min_eig(A)
    return lam >= -tol
