"""Branch and bound over the integer part of an outer-approximation master.

A :class:`MasterProblem` couples an instance with a :class:`CutPool`.  Its
variables ``z`` are, for a binary-lifted instance, ``x`` followed by the
strict upper triangle of ``X`` (the diagonal is ``x`` itself), and for a
general ISDP the full upper triangle of ``X``.  PSD-ness is represented only
through the pooled cuts, so every node relaxation is an LP or SOCP solved by
:mod:`specoa.conic`.
"""
from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field
from typing import Callable

import highspy
import numpy as np
from scipy.optimize import linprog

from .conic import ROT, Cone, ConeLP, solve_cone_lp
from .cuts import CutPool, KkCut, LinearCut, NoGoodCut, SocCut
from .model import IsdpInstance

__all__ = [
    "MasterProblem",
    "Limits",
    "LazyHook",
    "HookDecision",
    "NodeSolution",
    "MasterResult",
    "Node",
    "branch",
    "solve_master",
]

INT_TOL = 1e-6
CUT_TOL = 1e-7
DIVE_EVERY = 8
MAX_LAZY_ROUNDS = 60


@dataclass
class Limits:
    time_limit: float = np.inf
    node_limit: int = 10**9
    cutoff: float = np.inf
    rel_gap: float = 1e-7
    deadline: float | None = None

    def resolve_deadline(self) -> float | None:
        if self.deadline is not None:
            return self.deadline
        if np.isfinite(self.time_limit):
            return time.monotonic() + self.time_limit
        return None


@dataclass
class NodeSolution:
    x: np.ndarray          # integer part, rounded
    X: np.ndarray
    M: np.ndarray
    z: np.ndarray
    value: float


@dataclass
class HookDecision:
    accept: bool
    cuts: list = field(default_factory=list)
    value: float | None = None
    X: np.ndarray | None = None


class LazyHook:
    """Base class: override :meth:`check`; the default accepts everything."""

    def check(self, sol: NodeSolution, master: "MasterProblem") -> HookDecision:
        return HookDecision(True)

    def __call__(self, sol, master):
        return self.check(sol, master)


@dataclass
class MasterResult:
    x: np.ndarray | None
    X: np.ndarray | None
    value: float
    bound: float
    node_count: int
    status: str
    lazy_cuts: int = 0
    relaxations: int = 0
    bound_trace: list = field(default_factory=list)

    def __iter__(self):
        return iter((self.x, self.X, self.value, self.bound, self.node_count, self.status))


class _Layout:
    """Affine map ``z -> M(z)`` stored as an index array plus constants."""

    def __init__(self, inst):
        self.isdp = isinstance(inst, IsdpInstance)
        n = inst.n
        self.n = n
        if self.isdp:
            m = n
            iu = np.triu_indices(n)
            idx = -np.ones((n, n), dtype=int)
            idx[iu] = np.arange(iu[0].size)
            idx.T[iu] = np.arange(iu[0].size)
            self.p = iu[0].size
            self.const = np.zeros((n, n))
            self.int_vars = np.array([idx[e.i, e.j] for e in inst.integers], dtype=int)
            self.lo = np.full(self.p, -np.inf)
            self.hi = np.full(self.p, np.inf)
            for k, e in zip(self.int_vars, inst.integers):
                self.lo[k], self.hi[k] = e.lower, e.upper
            self.x_cols = None
        else:
            m = n + 1
            iu = np.triu_indices(n, 1)
            idx = -np.ones((m, m), dtype=int)
            idx[np.arange(n), np.arange(n)] = np.arange(n)
            idx[np.arange(n), n] = idx[n, np.arange(n)] = np.arange(n)
            off = n + np.arange(iu[0].size)
            idx[iu] = off
            idx.T[iu] = off
            self.p = n + iu[0].size
            self.const = np.zeros((m, m))
            self.const[n, n] = 1.0
            self.int_vars = np.arange(n)
            self.lo = np.full(self.p, -np.inf)
            self.hi = np.full(self.p, np.inf)
            self.lo[:n], self.hi[:n] = 0.0, 1.0
            self.x_cols = np.arange(n)
        self.m = m
        self.idx = idx
        self._mask = idx >= 0

    def matrix(self, z) -> np.ndarray:
        M = self.const.copy()
        M[self._mask] += z[self.idx[self._mask]]
        return M

    def inner(self, T) -> tuple[np.ndarray, float]:
        """``(a, a0)`` with ``<T, M(z)> = a @ z + a0``."""
        a = np.zeros(self.p)
        np.add.at(a, self.idx[self._mask], T[self._mask])
        return a, float(np.sum(T * self.const))

    def column(self, w, i) -> tuple[np.ndarray, float]:
        """``(a, a0)`` with ``w @ M(z)[:, i] = a @ z + a0``."""
        a = np.zeros(self.p)
        col = self.idx[:, i]
        live = col >= 0
        np.add.at(a, col[live], w[live])
        return a, float(w @ self.const[:, i])

    def lifted(self, A) -> np.ndarray:
        """Embed an X-space matrix into the layout's matrix space."""
        if self.isdp:
            return A
        T = np.zeros((self.m, self.m))
        T[: self.n, : self.n] = A
        return T


class MasterProblem:
    """Master over ``inst`` with the cuts in ``pool``.

    ``use_soc`` switches SOC and KK cuts on (off for the MILP master of pure
    outer approximation).  ``incumbent`` holds ``(value, x, X)`` once known.
    """

    def __init__(self, inst, pool: CutPool | None = None, *, use_soc: bool = True):
        self.inst = inst
        self.pool = pool if pool is not None else CutPool()
        self.use_soc = use_soc
        self.layout = _Layout(inst)
        self.incumbent: tuple | None = None
        self.global_bound = -np.inf
        self._rows: dict = {}
        self._base = self._compile_base()

    # -- compilation -------------------------------------------------------
    def _compile_base(self):
        L = self.layout
        inst = self.inst
        if L.isdp:
            c, c0 = L.inner(inst.C)
            eq = [L.inner(A) + (b,) for A, b in inst.equalities]
            ub = []
            self._lin_only = None
        else:
            c, c0 = L.inner(inst.lifted_objective() if hasattr(inst, "lifted_objective")
                            else _lifted_objective(inst))
            eq, ub = [], []
            for con in inst.constraints:
                a, a0 = L.inner(L.lifted(con.A))
                a = a.copy()
                a[L.x_cols] += con.d
                (ub if con.relation == "le" else eq).append((a, a0, con.b))
            for row, t in zip(inst.D, inst.t):
                a = np.zeros(L.p)
                a[L.x_cols] = row
                eq.append((a, 0.0, t))
        A_eq = np.array([a for a, _, _ in eq]).reshape(-1, L.p)
        b_eq = np.array([b - a0 for _, a0, b in eq], float)
        A_ub = np.array([a for a, _, _ in ub]).reshape(-1, L.p)
        b_ub = np.array([b - a0 for _, a0, b in ub], float)
        return c, c0, A_ub, b_ub, A_eq, b_eq

    def _row(self, cut):
        key = id(cut)
        hit = self._rows.get(key)
        if hit is not None and hit[0] is cut:
            return hit[1]
        L = self.layout
        if isinstance(cut, LinearCut):
            a, a0 = L.inner(cut.T)
            out = ("lin", -a, a0)                      # -a z <= a0
        elif isinstance(cut, NoGoodCut):
            a = np.zeros(L.p)
            ra, rb = cut.row()
            a[L.int_vars] = ra
            out = ("lin", a, rb)
        elif isinstance(cut, SocCut):
            v = np.zeros(L.m)
            v[: cut.v.size] = cut.v
            r, r0 = L.inner(np.outer(v, v))
            if L.isdp:
                out = ("lin", -r, r0)                  # v'Xv >= 0
            else:
                t = np.zeros(L.p)
                t[L.x_cols] = cut.v
                out = ("soc", np.array([r, np.zeros(L.p), t]), np.array([r0, 0.5, 0.0]))
        elif isinstance(cut, KkCut):
            i, w = cut.pivot, cut.w
            r, r0 = L.inner(np.outer(np.eye(L.m)[i], np.eye(L.m)[i]))
            s, s0 = L.inner(np.outer(w, w))
            t, t0 = L.column(w, i)
            out = ("soc", np.array([r, s, np.sqrt(2.0) * t]), np.array([r0, s0, np.sqrt(2.0) * t0]))
        else:
            raise TypeError(f"not a cut: {type(cut).__name__}")
        self._rows[key] = (cut, out)
        return out

    def compiled(self):
        """``(c, c0, A_ub, b_ub, A_eq, b_eq, F, g)``; SOC triples are ``F z + g``."""
        c, c0, A_ub, b_ub, A_eq, b_eq = self._base
        lin_a, lin_b, socF, socg = [A_ub], [b_ub], [], []
        cuts = list(self.pool.linear) + list(self.pool.nogood)
        if self.use_soc or self.layout.isdp:
            cuts += list(self.pool.soc)
        if self.use_soc:
            cuts += list(self.pool.kk)
        for cut in cuts:
            kind, a, b = self._row(cut)
            if kind == "lin":
                lin_a.append(a[None, :])
                lin_b.append([b])
            else:
                socF.append(a)
                socg.append(b)
        p = self.layout.p
        F = np.array(socF).reshape(-1, 3, p)
        g = np.array(socg).reshape(-1, 3)
        return c, c0, np.vstack(lin_a), np.concatenate(lin_b), A_eq, b_eq, F, g

    # -- evaluation --------------------------------------------------------
    def split(self, z):
        """``(X, x, M)`` for a variable vector ``z``."""
        M = self.layout.matrix(z)
        if self.layout.isdp:
            return M, z[self.layout.int_vars], M
        n = self.layout.n
        return M[:n, :n].copy(), M[:n, n].copy(), M

    def objective(self, z) -> float:
        c, c0 = self._base[0], self._base[1]
        return float(c @ z + c0)

    def cut_violation(self, z) -> float:
        """Largest violation of any pooled (active) cut at ``z``."""
        X, x, M = self.split(z)
        worst = 0.0
        for cut in self.pool.linear:
            worst = max(worst, -cut.value(M))
        for cut in self.pool.nogood:
            worst = max(worst, 1.0 - cut.value(z[self.layout.int_vars]))
        if self.use_soc or self.layout.isdp:
            for cut in self.pool.soc:
                worst = max(worst, -cut.slack(X, x) if not self.layout.isdp
                            else -float(cut.v @ X @ cut.v))
        if self.use_soc:
            for cut in self.pool.kk:
                worst = max(worst, -cut.slack(M))
        return worst

    def cuts_satisfied_at(self, x) -> bool:
        """Whether binary ``x`` with ``X = xx'`` survives the pool.  PSD cuts
        always hold there, so only no-good cuts can exclude it."""
        return all(cut.value(x) >= 1.0 - 1e-9 for cut in self.pool.nogood)

    def linear_precheck_rows(self):
        """x-only rows ``(A_ub, b_ub, A_eq, b_eq, exact)``: linear constraints and
        no-good cuts.  ``exact`` says their feasibility decides the relaxation's
        (every pooled cut is PSD-valid, and any box point lifts to a PSD matrix)."""
        if self.layout.isdp:
            return None
        inst = self.inst
        n = self.layout.n
        ub, ubb, eq, eqb = [], [], [], []
        exact = True
        for con in inst.constraints:
            if not con.is_linear:
                exact = False
                continue
            (ub if con.relation == "le" else eq).append(con.d)
            (ubb if con.relation == "le" else eqb).append(con.b)
        for row, t in zip(inst.D, inst.t):
            eq.append(row)
            eqb.append(t)
        for cut in self.pool.nogood:
            a, b = cut.row()
            ub.append(a)
            ubb.append(b)
        return (np.array(ub).reshape(-1, n), np.array(ubb, float),
                np.array(eq).reshape(-1, n), np.array(eqb, float), exact)


def _lifted_objective(inst) -> np.ndarray:
    n = inst.n
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = inst.C
    M[:n, n] = M[n, :n] = inst.d0
    return M


@dataclass(order=True)
class Node:
    bound: float
    seq: int
    lo: np.ndarray = field(compare=False)
    hi: np.ndarray = field(compare=False)
    depth: int = field(default=0, compare=False)


def _most_fractional(vals) -> int:
    vals = np.asarray(vals, float)
    frac = vals - np.floor(vals)
    live = np.minimum(frac, 1.0 - frac) > INT_TOL
    if not live.any():
        raise ValueError("branching requires a fractional value")
    score = np.where(live, np.abs(frac - 0.5), np.inf)
    best = score.min()
    return int(np.flatnonzero(score <= best + 1e-12)[0])


def branch(node: Node, values, seq: tuple[int, int] = (0, 0)) -> tuple[Node, Node]:
    """Split ``node`` on its most fractional integer variable.

    ``values`` are the integer variables' relaxation values (same order as
    ``node.lo``); ties go to the smallest index.
    """
    k = _most_fractional(values)
    v = float(values[k])
    lo_hi = node.hi.copy()
    lo_hi[k] = np.floor(v)
    hi_lo = node.lo.copy()
    hi_lo[k] = np.ceil(v)
    down = Node(node.bound, seq[0], node.lo.copy(), lo_hi, node.depth + 1)
    up = Node(node.bound, seq[1], hi_lo, node.hi.copy(), node.depth + 1)
    return down, up


# -- node relaxation ----------------------------------------------------------

@dataclass
class _Relax:
    status: str
    z: np.ndarray | None = None
    value: float = np.inf
    bound: float = np.inf


def _relax(master: MasterProblem, lo_int, hi_int, deadline) -> _Relax:
    L = master.layout
    c, c0, A_ub, b_ub, A_eq, b_eq, F, g = master.compiled()
    lo, hi = L.lo.copy(), L.hi.copy()
    lo[L.int_vars], hi[L.int_vars] = lo_int, hi_int
    fixed = lo == hi
    free = ~fixed
    zf = lo[fixed]
    tol = 1e-9

    def reduce(A, b):
        Ar = A[:, free]
        br = b - A[:, fixed] @ zf
        live = np.abs(Ar).max(axis=1, initial=0.0) > 0
        return Ar[live], br[live], br[~live]

    Aub, bub, const_ub = reduce(A_ub, b_ub)
    if np.any(const_ub < -tol * np.maximum(1.0, np.abs(b_ub).max(initial=1.0))):
        return _Relax("infeasible")
    Aeq, beq, const_eq = reduce(A_eq, b_eq)
    if np.any(np.abs(const_eq) > tol * max(1.0, np.abs(b_eq).max(initial=1.0))):
        return _Relax("infeasible")
    pf = int(free.sum())
    Fr = F[:, :, free]
    gr = g + F[:, :, fixed] @ zf if F.shape[0] else g
    soc_live = np.abs(Fr).reshape(Fr.shape[0], 3 * pf).max(axis=1, initial=0.0) > 0
    for r_, s_, t_ in gr[~soc_live]:
        if min(r_, s_) < -tol or 2 * r_ * s_ - t_ * t_ < -tol:
            return _Relax("infeasible")
    Fr, gr = Fr[soc_live], gr[soc_live]
    cr = c[free]
    base = c0 + c[fixed] @ zf
    z = lo.copy()
    if pf == 0:
        val = float(base)
        return _Relax("optimal", z, val, val)

    flo, fhi = lo[free], hi[free]
    if Fr.shape[0] == 0:
        return _relax_lp(cr, base, Aub, bub, Aeq, beq, flo, fhi, z, free)
    bl = np.isfinite(flo)
    bh = np.isfinite(fhi)
    I = np.eye(pf)
    rows = [Aub, I[bh], -I[bl]]
    hs = [bub, fhi[bh], -flo[bl]]
    G_l = np.vstack(rows)
    h_l = np.concatenate(hs)
    G_q = -np.einsum("ij,kjp->kip", ROT, Fr).reshape(-1, pf)
    h_q = (gr @ ROT.T).reshape(-1)
    cone = Cone(G_l.shape[0], Fr.shape[0], ())
    prob = ConeLP(cr, np.vstack([G_l, G_q]), np.concatenate([h_l, h_q]), cone, Aeq, beq)
    res = solve_cone_lp(prob, deadline=deadline)
    if res.status == "primal_infeasible":
        return _Relax("infeasible")
    if res.status == "dual_infeasible":
        return _Relax("unbounded")
    ok = res.status == "optimal" or (res.pres <= 1e-6 and res.dres <= 1e-6 and np.isfinite(res.pcost))
    if not ok:
        return _Relax("failed")
    z[free] = res.x
    val = float(res.pcost + base)
    bnd = float(min(res.pcost, res.dcost) + base)
    if res.status != "optimal":
        bnd -= abs(res.gap)
    return _Relax("optimal", z, val, bnd)


def _relax_lp(c, base, Aub, bub, Aeq, beq, lo, hi, z, free) -> _Relax:
    res = linprog(c, A_ub=Aub if Aub.shape[0] else None, b_ub=bub if Aub.shape[0] else None,
                  A_eq=Aeq if Aeq.shape[0] else None, b_eq=beq if Aeq.shape[0] else None,
                  bounds=np.column_stack([np.where(np.isfinite(lo), lo, -np.inf),
                                          np.where(np.isfinite(hi), hi, np.inf)]),
                  method="highs")
    if res.status == 2:
        return _Relax("infeasible")
    if res.status == 3:
        return _Relax("unbounded")
    if res.status != 0:
        return _Relax("failed")
    z[free] = res.x
    val = float(res.fun + base)
    return _Relax("optimal", z, val, val)


class _LpNodes:
    """Persistent HiGHS model of an LP master; nodes only change column bounds,
    so each solve warm-starts dual simplex from the previous basis."""

    def __init__(self, master: MasterProblem):
        c, c0, A_ub, b_ub, A_eq, b_eq, F, g = master.compiled()
        self.ok = F.shape[0] == 0
        self.size = len(master.pool)
        if not self.ok:
            return
        L = master.layout
        self.cols = L.int_vars
        self.c0 = c0
        A = np.vstack([A_ub, A_eq])
        lp = highspy.HighsLp()
        lp.num_col_ = L.p
        lp.num_row_ = A.shape[0]
        lp.col_cost_ = c
        lp.col_lower_ = L.lo
        lp.col_upper_ = L.hi
        lp.row_lower_ = np.r_[np.full(A_ub.shape[0], -np.inf), b_eq]
        lp.row_upper_ = np.r_[b_ub, b_eq]
        nz = A != 0
        lp.a_matrix_.format_ = highspy.MatrixFormat.kRowwise
        lp.a_matrix_.start_ = np.r_[0, np.cumsum(nz.sum(axis=1))]
        lp.a_matrix_.index_ = np.nonzero(nz)[1]
        lp.a_matrix_.value_ = A[nz]
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("presolve", "off")
        h.passModel(lp)
        self.h = h

    def solve(self, lo_int, hi_int) -> _Relax:
        h = self.h
        h.changeColsBounds(self.cols.size, self.cols, np.asarray(lo_int, float),
                           np.asarray(hi_int, float))
        h.run()
        st = h.getModelStatus()
        S = highspy.HighsModelStatus
        if st == S.kOptimal:
            z = np.array(h.getSolution().col_value)
            val = float(h.getInfo().objective_function_value + self.c0)
            return _Relax("optimal", z, val, val)
        if st == S.kInfeasible:
            return _Relax("infeasible")
        if st in (S.kUnbounded, S.kUnboundedOrInfeasible):
            return _Relax("unbounded" if st == S.kUnbounded else "failed")
        return _Relax("failed")


def _precheck(master: MasterProblem, lo_int, hi_int):
    """``False`` if the x-only system is infeasible, ``True`` if it is feasible and
    decides the node, ``None`` if feasible but not decisive."""
    rows = master.linear_precheck_rows()
    if rows is None:
        return None
    A_ub, b_ub, A_eq, b_eq, exact = rows
    if A_ub.shape[0] == 0 and A_eq.shape[0] == 0:
        return True if exact else None
    n = master.layout.n
    res = linprog(np.zeros(n), A_ub=A_ub if A_ub.size else None, b_ub=b_ub if A_ub.size else None,
                  A_eq=A_eq if A_eq.size else None, b_eq=b_eq if A_eq.size else None,
                  bounds=list(zip(lo_int, hi_int)), method="highs")
    if res.status == 2:
        return False
    return True if exact else None


# -- tree search ---------------------------------------------------------------

def solve_master(master: MasterProblem, hook: Callable | None = None,
                 limits: Limits | None = None) -> MasterResult:
    """Best-bound branch and bound with periodic depth-first dives.

    ``hook`` (a :class:`LazyHook` or callable returning :class:`HookDecision`)
    sees each integer-feasible node solution and may reject it with new cuts,
    which are added to the master's pool for the rest of the search.
    """
    limits = limits or Limits()
    deadline = limits.resolve_deadline()
    L = master.layout
    lo0, hi0 = L.lo[L.int_vars].copy(), L.hi[L.int_vars].copy()
    if np.any(~np.isfinite(lo0)) or np.any(~np.isfinite(hi0)):
        raise ValueError("integer variables need finite bounds")
    seq = 0
    heap: list[Node] = []
    pool_nodes: dict[int, Node] = {}

    def push(node):
        heapq.heappush(heap, node)
        pool_nodes[node.seq] = node

    push(Node(-np.inf, seq, lo0, hi0, 0))
    seq += 1
    inc_val = np.inf
    inc = None
    if master.incumbent is not None:
        inc_val, ix, iX = master.incumbent
        inc = (np.asarray(ix, float), np.asarray(iX, float))
    cutoff = limits.cutoff
    nodes = 0
    lazy = 0
    relaxations = 0
    status = None
    failed_bound = np.inf   # lower bounds of subtrees given up on numerically
    # LP nodes detect infeasibility themselves; the precheck pays off only for SOCP nodes.
    lp_master = not master.use_soc and not master.layout.isdp
    lp_nodes = None

    def prune_level():
        ref = min(inc_val, cutoff)
        return ref - limits.rel_gap * max(1.0, abs(ref)) if np.isfinite(ref) else np.inf

    trace = []    # global lower bound before each node is taken
    while heap:
        trace.append(min(heap[0].bound, inc_val))
        if deadline is not None and time.monotonic() > deadline:
            status = "time_limit"
            break
        if nodes >= limits.node_limit:
            status = "node_limit"
            break
        if nodes % DIVE_EVERY == DIVE_EVERY - 1:
            node = max(pool_nodes.values(), key=lambda nd: (nd.depth, nd.seq))
            heap.remove(node)
            heapq.heapify(heap)
        else:
            node = heapq.heappop(heap)
        del pool_nodes[node.seq]
        if node.bound >= prune_level():
            continue
        nodes += 1

        pre = _precheck(master, node.lo, node.hi) if lp_master is False else None
        if pre is False:
            continue
        rounds = 0
        while True:
            if lp_nodes is None or lp_nodes.size != len(master.pool):
                lp_nodes = _LpNodes(master)
            if lp_nodes.ok:
                r = lp_nodes.solve(node.lo, node.hi)
                if r.status == "failed":
                    r = _relax(master, node.lo, node.hi, deadline)
            else:
                r = _relax(master, node.lo, node.hi, deadline)
            relaxations += 1
            if r.status != "optimal":
                break
            vals = r.z[L.int_vars]
            integral = np.all(np.abs(vals - np.round(vals)) <= INT_TOL)
            if not integral or hook is None or r.bound >= prune_level():
                break
            xr = np.round(vals)
            X, _, M = master.split(r.z)
            dec = hook(NodeSolution(xr, X, M, r.z, r.value), master)
            if dec.accept:
                r.hook_value = dec.value
                r.hook_X = dec.X
                break
            added = 0
            for cut in dec.cuts:
                from .cuts import cut_pool_insert
                added += cut_pool_insert(master.pool, cut)
            lazy += added
            rounds += 1
            if added == 0 or rounds >= MAX_LAZY_ROUNDS:
                r.status = "stuck"
                break

        if r.status == "infeasible":
            if pre is True:
                failed_bound = min(failed_bound, node.bound)
            continue
        if r.status == "unbounded":
            raise RuntimeError("master relaxation is unbounded; add bounding cuts")
        if r.status in ("failed", "stuck"):
            # Numerical trouble or a lazy loop that stopped improving: split the
            # box without a new bound, or give up when nothing is left to split.
            free = np.flatnonzero(node.lo < node.hi)
            if free.size == 0:
                if not L.isdp or hook is not None:
                    cand = _single_point_value(master, hook, node, r)
                    if cand is not None and cand[0] < inc_val:
                        inc_val, inc = cand[0], (cand[1], cand[2])
                    continue
                failed_bound = min(failed_bound, node.bound)
                continue
            k = int(free[0])
            mid = np.floor(0.5 * (node.lo[k] + node.hi[k]))
            a_hi = node.hi.copy()
            a_hi[k] = mid
            b_lo = node.lo.copy()
            b_lo[k] = mid + 1
            bnd = node.bound if r.status == "failed" else max(node.bound, r.bound)
            push(Node(bnd, seq, node.lo.copy(), a_hi, node.depth + 1))
            push(Node(bnd, seq + 1, b_lo, node.hi.copy(), node.depth + 1))
            seq += 2
            continue

        bound = max(node.bound, r.bound)
        if bound >= prune_level():
            continue
        vals = r.z[L.int_vars]
        if np.all(np.abs(vals - np.round(vals)) <= INT_TOL):
            xr = np.round(vals)
            X, _, _ = master.split(r.z)
            val = r.value
            if getattr(r, "hook_value", None) is not None:
                val = r.hook_value
            if getattr(r, "hook_X", None) is not None:
                X = r.hook_X
            if val < inc_val:
                inc_val, inc = val, (xr, X)
            continue
        node.bound = bound
        down, up = branch(node, vals, (seq, seq + 1))
        seq += 2
        push(down)
        push(up)

    open_bound = min([nd.bound for nd in heap], default=np.inf)
    if status is None:
        if inc is None:
            status = "cutoff" if np.isfinite(cutoff) and failed_bound == np.inf else "infeasible"
        else:
            status = "optimal"
        if failed_bound < np.inf and inc is None:
            status = "numerical"
    bound = min(open_bound, failed_bound, inc_val)
    if status == "cutoff":
        bound = cutoff
    elif status == "optimal" and np.isfinite(cutoff):
        bound = min(bound, cutoff) if inc_val > cutoff else bound
    master.global_bound = bound
    if inc is not None:
        master.incumbent = (inc_val, inc[0], inc[1])
    x, X = (inc if inc is not None else (None, None))
    trace.append(float(bound))
    return MasterResult(x, X, float(inc_val), float(bound), nodes, status, lazy, relaxations,
                        trace)


def _single_point_value(master, hook, node, r):
    """Value of a box that is a single binary point whose relaxation could not
    be settled.  For a lifted binary instance ``X = xx'`` is forced there, so
    the exact objective is the leaf's value."""
    xr = node.lo.copy()
    if hook is not None and hasattr(hook, "final_value"):
        return hook.final_value(xr, master)
    if master.layout.isdp:
        return None
    inst = master.inst
    if not inst.is_feasible(xr) or not master.cuts_satisfied_at(xr):
        return None
    return inst.objective(xr), xr, np.outer(xr, xr)
