"""Seeded benchmark generators and a brute-force oracle.

Random numbers come from numpy's counter-based Philox generator keyed by
``(seed, family tag)``, so an instance is a pure function of its arguments.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .model import BqcqpInstance, Constraint

__all__ = [
    "FAMILIES",
    "GeneratorSpec",
    "BruteForceResult",
    "gen_bls",
    "gen_qkp",
    "brute_force",
    "BRUTE_FORCE_CAP",
]

FAMILIES = ("bls_normal", "bls_binary", "qkp")
BRUTE_FORCE_CAP = 25
BLS_ROWS = 10
_TAGS = {"bls_normal": 1, "bls_binary": 2, "qkp": 3}


def _rng(seed: int, family: str) -> np.random.Generator:
    key = np.array([int(seed) & 0xFFFFFFFFFFFFFFFF, _TAGS[family]], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def gen_bls(n: int, k: int, dist: str = "normal", seed: int = 0,
            card_relation: str = "eq") -> BqcqpInstance:
    """``min x'(A'A)x`` over binary ``x`` with ``sum(x) = k`` (or ``<= k``)."""
    if n < 1:
        raise ValueError("n must be positive")
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got k={k}, n={n}")
    if dist not in ("normal", "binary"):
        raise ValueError(f"dist must be 'normal' or 'binary', got {dist!r}")
    rng = _rng(seed, f"bls_{dist}")
    if dist == "normal":
        A = rng.standard_normal((BLS_ROWS, n))
    else:
        A = rng.integers(0, 2, size=(BLS_ROWS, n)).astype(float)
    C = A.T @ A
    card = Constraint(np.zeros((n, n)), np.ones(n), float(k), card_relation)
    return BqcqpInstance.create(C, None, [card], sense="min",
                                name=f"bls_{dist}_n{n}_k{k}_s{seed}")


def gen_qkp(n: int, density: float, seed: int = 0) -> BqcqpInstance:
    """Quadratic knapsack: ``max x'Cx`` s.t. ``w'x <= floor(sum(w) / 2)``."""
    if n < 1:
        raise ValueError("n must be positive")
    if not 0.0 < density <= 1.0:
        raise ValueError("density must lie in (0, 1]")
    rng = _rng(seed, "qkp")
    w = rng.integers(1, 51, size=n).astype(float)
    iu = np.triu_indices(n)
    live = rng.random(iu[0].size) < density
    vals = rng.integers(1, 101, size=iu[0].size).astype(float)
    C = np.zeros((n, n))
    C[iu] = np.where(live, vals, 0.0)
    C = C + np.triu(C, 1).T
    cap = float(np.floor(0.5 * w.sum()))
    knap = Constraint(np.zeros((n, n)), w, cap, "le")
    return BqcqpInstance.create(C, None, [knap], sense="max",
                                name=f"qkp_n{n}_d{density:g}_s{seed}")


@dataclass(frozen=True)
class GeneratorSpec:
    family: str
    n: int
    param: float
    seed: int = 0
    card_relation: str = "eq"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.family == "qkp":
            if not 0.0 < self.param <= 1.0:
                raise ValueError("density must lie in (0, 1]")
        elif not (float(self.param).is_integer() and 0 <= self.param <= self.n):
            raise ValueError("k must be an integer in [0, n]")

    @property
    def name(self) -> str:
        if self.family == "qkp":
            return f"qkp_n{self.n}_d{self.param:g}_s{self.seed}"
        return f"{self.family}_n{self.n}_k{int(self.param)}_s{self.seed}"

    def generate(self) -> BqcqpInstance:
        if self.family == "qkp":
            return gen_qkp(self.n, self.param, self.seed)
        dist = self.family.split("_", 1)[1]
        return gen_bls(self.n, int(self.param), dist, self.seed, self.card_relation)


class BruteForceResult(NamedTuple):
    """``value`` in the instance's sense; ``x`` is ``None`` when infeasible."""

    value: float
    x: np.ndarray | None

    @property
    def feasible(self) -> bool:
        return self.x is not None


def brute_force(p: BqcqpInstance, chunk: int = 1 << 15) -> BruteForceResult:
    """Enumerate all binary points; ties go to the lexicographically smallest."""
    n = p.n
    if n > BRUTE_FORCE_CAP:
        raise ValueError(f"brute force is capped at n={BRUTE_FORCE_CAP}, got {n}")
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    best_val = np.inf
    best_x = None
    total = 1 << n
    ftol = 1e-9
    for start in range(0, total, chunk):
        k = np.arange(start, min(start + chunk, total), dtype=np.int64)
        X = ((k[:, None] >> shifts) & 1).astype(float)
        ok = np.ones(k.size, dtype=bool)
        for con in p.constraints:
            lhs = X @ con.d
            if not con.is_linear:
                lhs = lhs + np.einsum("ki,ij,kj->k", X, con.A, X)
            tol = ftol * max(1.0, abs(con.b))
            if con.relation == "eq":
                ok &= np.abs(lhs - con.b) <= tol
            else:
                ok &= lhs <= con.b + tol
        if p.q:
            resid = np.abs(X @ p.D.T - p.t).max(axis=1)
            ok &= resid <= ftol * max(1.0, np.abs(p.t).max())
        if not ok.any():
            continue
        Xf = X[ok]
        vals = np.einsum("ki,ij,kj->k", Xf, p.C, Xf) + 2.0 * Xf @ p.d0
        j = int(np.argmin(vals))
        if vals[j] < best_val:
            best_val = float(vals[j])
            best_x = Xf[j].copy()
    if best_x is None:
        return BruteForceResult(p.user_value(np.inf), None)
    return BruteForceResult(p.user_value(best_val), best_x)
