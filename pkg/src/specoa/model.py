"""Problem data: binary QCQPs, their lifted binary SDPs, and general ISDPs.

Conventions
-----------
* Everything is stored in minimization form.  A maximization problem keeps
  ``sense="max"`` and stores the negated objective; :meth:`user_value` maps
  an internal objective value back to the caller's orientation.
* The objective is ``x'Cx + 2 d0'x`` (lifted: ``<C, X> + 2 d0'x``).
* A quadratic constraint is ``x'Ax + d'x  (<= | =)  b`` (lifted:
  ``<A, X> + d'x``); its linear term is not doubled, so the lifting copies
  the data unchanged.
* Linear equalities ``D x = t`` are kept separately.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import as_sym

__all__ = [
    "Constraint",
    "BqcqpInstance",
    "BsdpInstance",
    "IsdpInstance",
    "IntegerEntry",
    "bqcqp_to_bsdp",
    "lift",
    "unlift",
    "LiftError",
]

RELATIONS = ("le", "eq")


class LiftError(ValueError):
    pass


def _frozen(a, shape=None) -> np.ndarray:
    a = np.array(a, dtype=float)
    if shape is not None:
        a = a.reshape(shape)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Constraint:
    A: np.ndarray
    d: np.ndarray
    b: float
    relation: str = "le"

    def __post_init__(self):
        if self.relation not in RELATIONS:
            raise ValueError(f"unknown relation {self.relation!r}")
        A = as_sym(self.A, name="constraint matrix")
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "d", _frozen(self.d, (A.shape[0],)))
        object.__setattr__(self, "b", float(self.b))

    def __eq__(self, other):
        if not isinstance(other, Constraint):
            return NotImplemented
        return (
            self.relation == other.relation
            and self.b == other.b
            and np.array_equal(self.A, other.A)
            and np.array_equal(self.d, other.d)
        )

    @property
    def is_linear(self) -> bool:
        return not np.any(self.A)

    def lhs(self, X, x) -> float:
        return float(np.sum(self.A * X) + self.d @ x)

    def violation(self, X, x) -> float:
        r = self.lhs(X, x) - self.b
        return abs(r) if self.relation == "eq" else max(r, 0.0)


@dataclass(frozen=True, eq=False)
class _QuadraticData:
    C: np.ndarray
    d0: np.ndarray
    constraints: tuple = ()
    D: np.ndarray = None
    t: np.ndarray = None
    sense: str = "min"
    name: str = ""

    def __post_init__(self):
        C = as_sym(self.C, name="C")
        n = C.shape[0]
        object.__setattr__(self, "C", _frozen(C))
        object.__setattr__(self, "d0", _frozen(self.d0, (n,)))
        cons = tuple(self.constraints)
        for c in cons:
            if c.A.shape != (n, n):
                raise ValueError("constraint dimension does not match C")
        object.__setattr__(self, "constraints", cons)
        D = np.zeros((0, n)) if self.D is None else np.atleast_2d(np.asarray(self.D, float))
        if D.size == 0:
            D = np.zeros((0, n))
        t = np.zeros(D.shape[0]) if self.t is None else np.asarray(self.t, float).reshape(-1)
        if D.shape[1] != n or t.shape[0] != D.shape[0]:
            raise ValueError("D must be q x n and t of length q")
        object.__setattr__(self, "D", _frozen(D))
        object.__setattr__(self, "t", _frozen(t))
        if self.sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {self.sense!r}")

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return (
            self.sense == other.sense
            and np.array_equal(self.C, other.C)
            and np.array_equal(self.d0, other.d0)
            and self.constraints == other.constraints
            and np.array_equal(self.D, other.D)
            and np.array_equal(self.t, other.t)
        )

    @property
    def n(self) -> int:
        return self.C.shape[0]

    @property
    def r(self) -> int:
        return len(self.constraints)

    @property
    def q(self) -> int:
        return self.D.shape[0]

    def user_value(self, value: float) -> float:
        """Internal (minimization) objective value in the caller's sense."""
        return -value if self.sense == "max" else value

    def user_data(self) -> tuple[np.ndarray, np.ndarray]:
        """``(C, d0)`` in the caller's orientation."""
        s = -1.0 if self.sense == "max" else 1.0
        return s * self.C, s * self.d0

    def objective(self, x) -> float:
        x = np.asarray(x, float)
        return float(x @ self.C @ x + 2.0 * self.d0 @ x)

    def is_feasible(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, float)
        X = np.outer(x, x)
        if any(c.violation(X, x) > tol * max(1.0, abs(c.b)) for c in self.constraints):
            return False
        if self.q and np.abs(self.D @ x - self.t).max() > tol * max(1.0, np.abs(self.t).max()):
            return False
        return True


class BqcqpInstance(_QuadraticData):
    """``min x'Cx + 2 d0'x`` over binary ``x`` with quadratic constraints and
    ``Dx = t``."""

    @classmethod
    def create(cls, C, d0=None, constraints=(), D=None, t=None, sense="min", name=""):
        """Build from data in the caller's orientation (negates for ``max``)."""
        C = as_sym(C, name="C")
        d0 = np.zeros(C.shape[0]) if d0 is None else np.asarray(d0, float)
        s = -1.0 if sense == "max" else 1.0
        return cls(s * C, s * d0, tuple(constraints), D, t, sense, name)


class BsdpInstance(_QuadraticData):
    """Lifted problem over ``(X, x)`` with ``Diag(X) = x`` and
    ``[[X, x], [x', 1]]`` PSD, binary ``x``."""

    def lifted_objective(self) -> np.ndarray:
        """Matrix ``Ĉ`` with ``<Ĉ, lift(X, x)> = <C, X> + 2 d0'x``."""
        n = self.n
        M = np.zeros((n + 1, n + 1))
        M[:n, :n] = self.C
        M[:n, n] = M[n, :n] = self.d0
        return M

    def sdp_objective(self, X, x) -> float:
        return float(np.sum(self.C * X) + 2.0 * self.d0 @ x)


def bqcqp_to_bsdp(p: BqcqpInstance) -> BsdpInstance:
    return BsdpInstance(p.C, p.d0, p.constraints, p.D, p.t, p.sense, p.name)


@dataclass(frozen=True)
class IntegerEntry:
    i: int
    j: int
    lower: int
    upper: int

    def __post_init__(self):
        if self.i > self.j:
            raise ValueError("integer entries must be upper-triangle (i <= j)")
        if self.lower > self.upper:
            raise ValueError("integer entry lower bound exceeds upper bound")


@dataclass(frozen=True, eq=False)
class IsdpInstance:
    """``min <C, X>`` s.t. ``<A_k, X> = b_k``, ``X`` PSD, and integer bounded
    entries ``X_ij`` for ``(i, j)`` in ``integers`` (0-based, ``i <= j``)."""

    C: np.ndarray
    equalities: tuple = ()
    integers: tuple = ()
    name: str = ""
    sense: str = field(default="min", init=False)

    def __post_init__(self):
        C = as_sym(self.C, name="C")
        object.__setattr__(self, "C", _frozen(C))
        eqs = []
        for A, b in self.equalities:
            A = as_sym(A, name="equality matrix")
            if A.shape != C.shape:
                raise ValueError("equality dimension does not match C")
            eqs.append((_frozen(A), float(b)))
        object.__setattr__(self, "equalities", tuple(eqs))
        ints = tuple(self.integers)
        n = C.shape[0]
        seen = set()
        for e in ints:
            if not (0 <= e.i <= e.j < n):
                raise ValueError(f"integer entry {(e.i, e.j)} out of range")
            if (e.i, e.j) in seen:
                raise ValueError(f"duplicate integer entry {(e.i, e.j)}")
            seen.add((e.i, e.j))
        object.__setattr__(self, "integers", ints)

    def __eq__(self, other):
        if not isinstance(other, IsdpInstance):
            return NotImplemented
        return (
            np.array_equal(self.C, other.C)
            and len(self.equalities) == len(other.equalities)
            and all(
                b1 == b2 and np.array_equal(A1, A2)
                for (A1, b1), (A2, b2) in zip(self.equalities, other.equalities)
            )
            and self.integers == other.integers
        )

    @property
    def n(self) -> int:
        return self.C.shape[0]

    def user_value(self, value: float) -> float:
        return value


def lift(X, x) -> np.ndarray:
    X = as_sym(X, name="X")
    x = np.asarray(x, float).reshape(-1)
    n = X.shape[0]
    if x.shape[0] != n:
        raise LiftError(f"x has length {x.shape[0]}, X is {n}x{n}")
    M = np.empty((n + 1, n + 1))
    M[:n, :n] = X
    M[:n, n] = M[n, :n] = x
    M[n, n] = 1.0
    return M


def unlift(M, tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    M = as_sym(M, name="lifted matrix")
    n = M.shape[0] - 1
    if n < 1:
        raise LiftError("lifted matrix must be at least 2x2")
    if abs(M[n, n] - 1.0) > tol:
        raise LiftError(f"corner entry {M[n, n]!r} is not 1")
    return M[:n, :n].copy(), M[:n, n].copy()
