"""Valid inequalities for the lifted PSD constraint and a deduplicating pool.

All cuts are stated on the lifted matrix ``M = [[X, x], [x', 1]]`` (or on
``X`` itself for a general ISDP):

* :class:`LinearCut` ``<T, M> >= 0`` with ``T`` PSD;
* :class:`SocCut` ``v'Xv >= (v'x)^2``, i.e. ``(v'Xv, 1/2, v'x)`` in the
  rotated cone ``{(r, s, t): 2rs >= t^2, r, s >= 0}``;
* :class:`KkCut` ``(M_ii, w'M'w, sqrt(2) w'u)`` in the rotated cone, where
  ``M'`` drops row/column ``i`` and ``u`` is column ``i`` without ``M_ii``;
* :class:`NoGoodCut` excluding one binary assignment.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import as_sym, commutator_norm, simultaneous_diagonalizer, sym_eigen
from .model import IsdpInstance

__all__ = [
    "LinearCut",
    "SocCut",
    "KkCut",
    "NoGoodCut",
    "CutPool",
    "CutValidityError",
    "AggregationNotFoundError",
    "Aggregation",
    "initial_polyhedral",
    "identity_aggregation",
    "commuting_aggregation",
    "spectral_seed",
    "disaggregate_linear",
    "disaggregate_soc",
    "kk_cuts",
    "eigen_cut",
    "cut_pool_insert",
    "LAMBDA_TOL",
]

LAMBDA_TOL = 1e-8
PSD_TOL = 1e-9
DUP_TOL = 1e-8
W_TOL = 1e-10


class CutValidityError(ValueError):
    pass


class AggregationNotFoundError(LookupError):
    pass


@dataclass(frozen=True, eq=False)
class LinearCut:
    """``<T, M> >= 0``; ``T`` is stored with unit Frobenius norm."""

    T: np.ndarray

    def __post_init__(self):
        T = as_sym(self.T, name="cut matrix")
        nrm = np.linalg.norm(T)
        if nrm == 0.0:
            raise CutValidityError("zero cut matrix")
        T = T / nrm
        T.setflags(write=False)
        object.__setattr__(self, "T", T)

    @property
    def dim(self) -> int:
        return self.T.shape[0]

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.T)[0])

    def value(self, M) -> float:
        return float(np.sum(self.T * M))


@dataclass(frozen=True, eq=False)
class SocCut:
    """``v'Xv >= (v'x)^2`` with unit ``v``."""

    v: np.ndarray

    def __post_init__(self):
        v = np.array(self.v, dtype=float).reshape(-1)
        nrm = np.linalg.norm(v)
        if not np.isfinite(nrm) or nrm == 0.0:
            raise CutValidityError("SOC cut needs a nonzero finite vector")
        v = v / nrm
        v.setflags(write=False)
        object.__setattr__(self, "v", v)

    @property
    def dim(self) -> int:
        return self.v.size

    def triple(self, X, x) -> tuple[float, float, float]:
        v = self.v
        return float(v @ X @ v), 0.5, float(v @ x)

    def slack(self, X, x) -> float:
        v = self.v
        return float(v @ X @ v - (v @ x) ** 2)


@dataclass(frozen=True, eq=False)
class KkCut:
    """Rotated-cone cut on the 2x2 compression of ``M`` onto ``e_i`` and ``w``.

    ``w`` is a vector of the lifted dimension with ``w[pivot] == 0`` and unit
    norm (or zero, which leaves ``M_ii >= 0``).
    """

    pivot: int
    w: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=float).reshape(-1)
        if not 0 <= self.pivot < w.size:
            raise CutValidityError(f"pivot {self.pivot} out of range")
        w[self.pivot] = 0.0
        nrm = np.linalg.norm(w)
        if nrm > W_TOL:
            w = w / nrm
        else:
            w[:] = 0.0
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @property
    def dim(self) -> int:
        return self.w.size

    def triple(self, M) -> tuple[float, float, float]:
        i, w = self.pivot, self.w
        return float(M[i, i]), float(w @ M @ w), float(np.sqrt(2.0) * (w @ M[:, i]))

    def slack(self, M) -> float:
        r, s, t = self.triple(M)
        return min(r, s, 2.0 * r * s - t * t)


@dataclass(frozen=True, eq=False)
class NoGoodCut:
    """``sum_{x0_i = 1} (1 - x_i) + sum_{x0_i = 0} x_i >= 1``."""

    point: np.ndarray

    def __post_init__(self):
        p = np.round(np.asarray(self.point, float).reshape(-1))
        p.setflags(write=False)
        object.__setattr__(self, "point", p)

    def row(self) -> tuple[np.ndarray, float]:
        """``(a, b)`` with the cut written as ``a @ x <= b``."""
        a = np.where(self.point > 0.5, 1.0, -1.0)
        return a, float(self.point.sum() - 1.0)

    def value(self, x) -> float:
        x = np.asarray(x, float)
        return float(np.sum(np.where(self.point > 0.5, 1.0 - x, x)))


@dataclass
class CutPool:
    linear: list = field(default_factory=list)
    soc: list = field(default_factory=list)
    kk: list = field(default_factory=list)
    nogood: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.linear) + len(self.soc) + len(self.kk) + len(self.nogood)

    def copy(self) -> "CutPool":
        return CutPool(list(self.linear), list(self.soc), list(self.kk), list(self.nogood))


def cut_pool_insert(pool: CutPool, cut) -> bool:
    """Add ``cut`` unless an equivalent one is present; returns whether it was added.

    Raises :class:`CutValidityError` for a linear cut whose matrix is not PSD.
    """
    if isinstance(cut, LinearCut):
        lam = cut.min_eigenvalue()
        if lam < -PSD_TOL:
            raise CutValidityError(f"cut matrix has eigenvalue {lam:.3g}")
        for old in pool.linear:
            if old.dim == cut.dim and np.sum(old.T * cut.T) > 1.0 - DUP_TOL:
                return False
        pool.linear.append(cut)
        return True
    if isinstance(cut, SocCut):
        for old in pool.soc:
            if abs(old.v @ cut.v) > 1.0 - DUP_TOL:
                return False
        pool.soc.append(cut)
        return True
    if isinstance(cut, KkCut):
        for old in pool.kk:
            if old.pivot != cut.pivot:
                continue
            if not cut.w.any() and not old.w.any():
                return False
            if abs(old.w @ cut.w) > 1.0 - DUP_TOL:
                return False
        pool.kk.append(cut)
        return True
    if isinstance(cut, NoGoodCut):
        for old in pool.nogood:
            if np.array_equal(old.point, cut.point):
                return False
        pool.nogood.append(cut)
        return True
    raise TypeError(f"not a cut: {type(cut).__name__}")


def initial_polyhedral(n: int) -> list[LinearCut]:
    """``M_ii >= 0`` and ``M_ii + M_jj +- 2 M_ij >= 0`` on the ``(n+1)``-lifting."""
    if n < 1:
        raise ValueError("n must be at least 1")
    m = n + 1
    I = np.eye(m)
    cuts = [LinearCut(np.outer(I[i], I[i])) for i in range(m)]
    for i in range(m):
        for j in range(i + 1, m):
            for sgn in (1.0, -1.0):
                u = I[i] + sgn * I[j]
                cuts.append(LinearCut(np.outer(u, u)))
    return cuts


@dataclass(frozen=True)
class Aggregation:
    """Weights over the instance's constraint list.

    For a binary-lifted instance the list is the ``n`` diagonal links
    ``X_ii - x_i = 0`` followed by the quadratic constraints; for an ISDP it
    is the equality list.  ``matrix`` is the aggregated X-space matrix.
    """

    weights: np.ndarray
    matrix: np.ndarray

    @property
    def support(self) -> frozenset:
        return frozenset(int(k) for k in np.flatnonzero(self.weights))


def _constraint_matrices(inst) -> list[np.ndarray]:
    if isinstance(inst, IsdpInstance):
        return [A for A, _ in inst.equalities]
    n = inst.n
    diag = [np.diag(np.eye(n)[i]) for i in range(n)]
    return diag + [c.A for c in inst.constraints]


def identity_aggregation(inst) -> Aggregation:
    mats = _constraint_matrices(inst)
    n = inst.n
    if not isinstance(inst, IsdpInstance):
        w = np.zeros(len(mats))
        w[:n] = 1.0
        return Aggregation(w, np.eye(n))
    if not mats:
        raise AggregationNotFoundError("instance has no equality constraints")
    F = np.array([A.ravel() for A in mats]).T
    target = np.eye(n).ravel()
    w, *_ = np.linalg.lstsq(F, target, rcond=None)
    w[np.abs(w) < 1e-12] = 0.0
    agg = (F @ w).reshape(n, n)
    if np.linalg.norm(agg - np.eye(n)) > 1e-9 * np.sqrt(n):
        raise AggregationNotFoundError("the identity is not a combination of the constraint matrices")
    return Aggregation(w, agg)


def _fix_sign(y: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(y) > 1e-12)
    return -y if nz.size and y[nz[0]] < 0 else y


def commuting_aggregation(inst, q1_support=frozenset()) -> Aggregation:
    """Largest-norm aggregation (``||y||_inf <= 1``) commuting with ``C``.

    The candidates are the constraint matrices outside ``q1_support`` (for a
    binary-lifted instance: the quadratic constraints).  The direction is the
    top right singular vector of the aggregation map restricted to the null
    space of ``y -> C A(y) - A(y) C``; zero when that space carries no
    nonzero aggregation.
    """
    mats = _constraint_matrices(inst)
    n = inst.n
    C = inst.C
    if isinstance(inst, IsdpInstance):
        allowed = [k for k in range(len(mats)) if k not in q1_support]
    else:
        allowed = [k for k in range(n, len(mats)) if k not in q1_support]
    zero = Aggregation(np.zeros(len(mats)), np.zeros((n, n)))
    if not allowed:
        return zero
    F = np.array([mats[k].ravel() for k in allowed]).T
    K = np.array([(C @ mats[k] - mats[k] @ C).ravel() for k in allowed]).T
    _, sv, Vt = np.linalg.svd(K, full_matrices=True)
    scale = max(1.0, np.linalg.norm(C) * max(np.linalg.norm(F, axis=0).max(), 1.0))
    rank = int(np.sum(sv > 1e-10 * scale))
    null = Vt[rank:].T
    if null.shape[1] == 0:
        return zero
    FN = F @ null
    if np.linalg.norm(FN) <= 1e-12 * max(1.0, np.linalg.norm(F)):
        return zero
    _, _, Wt = np.linalg.svd(FN, full_matrices=False)
    y = null @ Wt[0]
    y = _fix_sign(y / np.abs(y).max())
    y[np.abs(y) < 1e-12] = 0.0
    w = np.zeros(len(mats))
    w[allowed] = y
    agg = (F @ y).reshape(n, n)
    agg = 0.5 * (agg + agg.T)
    if commutator_norm(C, agg) > 1e-8 * max(1.0, np.linalg.norm(C) * np.linalg.norm(agg)):
        return zero
    return Aggregation(w, agg)


def spectral_seed(inst) -> list[SocCut]:
    """One SOC cut per column of a common eigenbasis of ``C`` and the commuting
    aggregation."""
    q1 = identity_aggregation(inst)
    q2 = commuting_aggregation(inst, q1.support)
    U = simultaneous_diagonalizer(inst.C, q2.matrix)
    return [SocCut(U[:, j]) for j in range(U.shape[1])]


def _retained(S, lam_tol: float):
    S = as_sym(S, name="certificate")
    dec = sym_eigen(S)
    if dec.values[-1] < -PSD_TOL * max(1.0, np.linalg.norm(S)):
        raise CutValidityError(f"certificate has eigenvalue {dec.values[-1]:.3g}")
    top = dec.values[0]
    if top <= 0.0:
        return []
    keep = dec.values > lam_tol * top
    return [(dec.values[j], dec.vectors[:, j]) for j in np.flatnonzero(keep)]


def disaggregate_linear(S, lam_tol: float = LAMBDA_TOL) -> list[LinearCut]:
    """Rank-one cuts ``v_j v_j'`` from the significant eigenpairs of ``S``."""
    return [LinearCut(np.outer(v, v)) for _, v in _retained(S, lam_tol)]


def disaggregate_soc(S, lam_tol: float = LAMBDA_TOL) -> list[SocCut]:
    """SOC cuts from the X-parts ``w_j`` of the eigenvectors ``(w_j; z_j)`` of a
    lifted certificate ``S``."""
    cuts = []
    for _, v in _retained(S, lam_tol):
        w = v[:-1]
        if np.linalg.norm(w) > W_TOL:
            cuts.append(SocCut(w))
    return cuts


def kk_cuts(S=None, mode: str = "certificate", *, dim: int | None = None,
            lam_tol: float = LAMBDA_TOL) -> list[KkCut]:
    """``pairs``: every 2x2 principal minor of a ``dim``-matrix (``dim`` taken
    from ``S`` when omitted).  ``certificate``: one cut per significant
    eigenvector ``v`` of ``S``, pivoting on its largest entry."""
    if mode == "pairs":
        m = dim if dim is not None else as_sym(S).shape[0]
        I = np.eye(m)
        return [KkCut(i, I[j]) for i in range(m) for j in range(i + 1, m)]
    if mode != "certificate":
        raise ValueError(f"unknown kk mode {mode!r}")
    if S is None:
        raise ValueError("certificate mode needs a certificate")
    cuts = []
    for _, v in _retained(S, lam_tol):
        i = int(np.argmax(np.abs(v)))
        cuts.append(KkCut(i, v))
    return cuts


def eigen_cut(M) -> tuple[float, LinearCut]:
    """``(lambda_min, w w')`` for the lowest eigenpair of ``M``."""
    dec = sym_eigen(M)
    w = dec.vectors[:, -1]
    return float(dec.values[-1]), LinearCut(np.outer(w, w))
