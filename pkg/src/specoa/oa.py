"""Outer-approximation drivers.

* :func:`run_oa`: polyhedral outer approximation.  A MILP master over
  linear PSD cuts alternates with an SDP at the master's integer point; the
  SDP's dual slack becomes the next cut.
* :func:`run_oa_soc`: the same loop with a MISOCP master seeded by spectral
  SOC cuts, adding certificate cuts in the chosen ``cut_mode``.
* :func:`run_lazy_soc`: one branch-and-bound tree over the spectral master,
  adding eigenvector cuts lazily whenever an integer node is not PSD.

All three return a :class:`SolveReport` in the instance's own sense and log
one ``iter,lb,ub,gap,new_cuts,nodes,elapsed`` line per iteration to the
``specoa.oa`` logger.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .bb import HookDecision, LazyHook, Limits, MasterProblem, solve_master
from .conic import CertificateError, extract_dual_certificate, solve_inner_isdp, solve_inner_sdp
from .cuts import (
    CutPool,
    CutValidityError,
    KkCut,
    LinearCut,
    NoGoodCut,
    SocCut,
    cut_pool_insert,
    disaggregate_linear,
    disaggregate_soc,
    initial_polyhedral,
    kk_cuts,
    spectral_seed,
)
from .linalg import min_eig
from .model import BqcqpInstance, BsdpInstance, IsdpInstance, bqcqp_to_bsdp, lift

__all__ = [
    "OaLimits",
    "OaState",
    "IterationRecord",
    "SolveReport",
    "CUT_MODES",
    "gap_test",
    "anti_cycle_guard",
    "run_oa",
    "run_oa_soc",
    "run_lazy_soc",
    "continuous_relaxation",
]

log = logging.getLogger("specoa.oa")

CUT_MODES = ("aggregate", "linear", "soc", "kk")


@dataclass
class OaLimits:
    time_limit: float = 3600.0
    max_iterations: int = 10_000
    node_limit: int = 10**9


@dataclass
class IterationRecord:
    iteration: int
    lb: float
    ub: float
    gap: float
    new_cuts: int
    nodes: int
    elapsed: float
    master_value: float = np.nan
    inner_value: float = np.nan
    x: tuple | None = None

    def line(self) -> str:
        return (f"{self.iteration},{self.lb:.12g},{self.ub:.12g},{self.gap:.6g},"
                f"{self.new_cuts},{self.nodes},{self.elapsed:.3f}")


@dataclass
class OaState:
    pool: CutPool
    iteration: int = 0
    ub: float = np.inf
    lb: float = -np.inf
    best_x: np.ndarray | None = None
    best_X: np.ndarray | None = None
    seen: set = field(default_factory=set)
    records: list = field(default_factory=list)
    visits: dict = field(default_factory=dict)
    nodes: int = 0
    cuts_added: int = 0

    def offer(self, value, x, X) -> None:
        if value < self.ub:
            self.ub = float(value)
            self.best_x = np.array(x, float)
            self.best_X = np.array(X, float)
            self.lb = min(self.lb, self.ub)    # a bound past a known value is round-off

    def raise_lb(self, value) -> None:
        self.lb = max(self.lb, min(float(value), self.ub))


@dataclass
class SolveReport:
    status: str
    value: float
    bound: float
    gap: float
    x: np.ndarray | None
    X: np.ndarray | None
    iterations: int
    cuts: int
    nodes: int
    time_s: float
    algo: str = ""
    records: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "status": self.status,
            "value": self.value,
            "bound": self.bound,
            "gap": self.gap,
            "x": None if self.x is None else self.x.tolist(),
            "iterations": self.iterations,
            "cuts": self.cuts,
            "nodes": self.nodes,
            "time_s": self.time_s,
            "algo": self.algo,
        }


def gap_test(lb: float, ub: float, eps: float) -> bool:
    """Relative gap ``ub - lb <= eps * max(1, |ub|)``."""
    return ub - lb <= eps * max(1.0, abs(ub))


def _rel_gap(lb, ub) -> float:
    if not (np.isfinite(lb) and np.isfinite(ub)):
        return np.inf
    return max(ub - lb, 0.0) / max(1.0, abs(ub))


def _key(x) -> tuple:
    return tuple(int(v) for v in np.round(np.asarray(x, float)))


def anti_cycle_guard(state: OaState, x, gap_closed: bool = False) -> NoGoodCut | None:
    """Record ``x``; on a repeat with the gap still open, return a no-good cut."""
    k = _key(x)
    state.visits[k] = state.visits.get(k, 0) + 1
    if k not in state.seen:
        state.seen.add(k)
        return None
    if gap_closed:
        return None
    log.warning("integer assignment %s revisited with an open gap; adding a no-good cut", k)
    return NoGoodCut(np.asarray(k, float))


# -- helpers -------------------------------------------------------------------

def _prepare(inst):
    if isinstance(inst, BqcqpInstance):
        return bqcqp_to_bsdp(inst)
    if isinstance(inst, (BsdpInstance, IsdpInstance)):
        return inst
    raise TypeError(f"unsupported instance type {type(inst).__name__}")


def _polyhedral(inst) -> list[LinearCut]:
    if isinstance(inst, IsdpInstance):
        n = inst.n
        return initial_polyhedral(n - 1) if n > 1 else [LinearCut(np.ones((1, 1)))]
    return initial_polyhedral(inst.n)


def _insert_all(pool, cuts) -> int:
    added = 0
    for cut in cuts:
        try:
            added += bool(cut_pool_insert(pool, cut))
        except CutValidityError as exc:
            log.debug("cut rejected: %s", exc)
    return added


def _certificate_cuts(S, mode: str, is_isdp: bool) -> list:
    if mode == "aggregate" or (is_isdp and mode == "soc"):
        return [LinearCut(S)] if mode == "aggregate" else disaggregate_linear(S)
    if mode == "linear":
        return disaggregate_linear(S)
    if mode == "soc":
        return disaggregate_soc(S)
    if mode == "kk":
        return kk_cuts(S, "certificate")
    raise ValueError(f"unknown cut mode {mode!r}; choose from {CUT_MODES}")


def _vector_cut(w, mode: str, n: int, is_isdp: bool):
    """The eigenvector cut ``w w'`` in the requested form."""
    if mode == "soc" and not is_isdp and np.linalg.norm(w[:n]) > 1e-10:
        return SocCut(w[:n])
    if mode == "kk":
        return KkCut(int(np.argmax(np.abs(w))), w)
    return LinearCut(np.outer(w, w))


def _lifted(inst, X, x):
    if isinstance(inst, IsdpInstance):
        return np.asarray(X, float)
    return lift(X, x)


def _inner(inst, master: MasterProblem, x, X, deadline):
    if isinstance(inst, IsdpInstance):
        fixed = {(e.i, e.j): float(v) for e, v in zip(inst.integers, x)}
        return solve_inner_isdp(inst, fixed, deadline=deadline)
    return solve_inner_sdp(inst, x, deadline=deadline)


def _report(inst, state: OaState, status, algo, t0) -> SolveReport:
    lb, ub = min(state.lb, state.ub), state.ub    # round-off can lift lb past ub
    if status == "infeasible":
        value = bound = np.inf
    else:
        value, bound = ub, lb
    gap = _rel_gap(lb, ub)
    if inst.sense == "max":
        value, bound = -value, -bound
    return SolveReport(status, float(value), float(bound), float(gap), state.best_x, state.best_X,
                       state.iteration, state.cuts_added, state.nodes, time.monotonic() - t0,
                       algo, state.records)


def _log_iteration(state: OaState, new_cuts, nodes, t0, inst, master_value=np.nan,
                   inner_value=np.nan, x=None):
    rec = IterationRecord(state.iteration, state.lb, state.ub, _rel_gap(state.lb, state.ub),
                          new_cuts, nodes, time.monotonic() - t0, float(master_value),
                          float(inner_value), None if x is None else _key(x))
    state.records.append(rec)
    log.info(rec.line())


# -- iterative outer approximation ----------------------------------------------

def _run_loop(inst, eps, limits, *, use_soc, cut_mode, algo) -> SolveReport:
    t0 = time.monotonic()
    limits = limits or OaLimits()
    deadline = t0 + limits.time_limit
    inst = _prepare(inst)
    is_isdp = isinstance(inst, IsdpInstance)
    pool = CutPool()
    _insert_all(pool, _polyhedral(inst))
    if use_soc:
        _insert_all(pool, spectral_seed(inst))
    state = OaState(pool)
    state.cuts_added = len(pool)
    master = MasterProblem(inst, pool, use_soc=use_soc)
    n = inst.n
    L = master.layout
    binary = bool(np.all(L.lo[L.int_vars] == 0) and np.all(L.hi[L.int_vars] == 1))
    status = None

    while True:
        if time.monotonic() >= deadline:
            status = "time_limit"
            break
        if state.iteration >= limits.max_iterations:
            status = "iteration_limit"
            break
        state.iteration += 1
        master.incumbent = None
        cutoff = state.ub - 0.5 * eps * max(1.0, abs(state.ub)) if np.isfinite(state.ub) else np.inf
        res = solve_master(master, None, Limits(deadline=deadline, cutoff=cutoff,
                                                node_limit=limits.node_limit))
        state.nodes += res.node_count
        if res.status in ("time_limit", "node_limit", "numerical") and res.x is None:
            if res.status != "numerical" and np.isfinite(res.bound):
                state.raise_lb(res.bound)
            _log_iteration(state, 0, res.node_count, t0, inst)
            status = "time_limit" if res.status == "time_limit" else "iteration_limit"
            break
        if res.x is None:
            # Nothing left below the cutoff: the incumbent is optimal (or the
            # instance is infeasible when there is none).
            if np.isfinite(state.ub):
                state.raise_lb(state.ub)
                status = "optimal"
            else:
                status = "infeasible"
            _log_iteration(state, 0, res.node_count, t0, inst)
            break
        state.raise_lb(res.bound)
        x_hat, X_hat = res.x, res.X
        inner = _inner(inst, master, x_hat, X_hat, deadline)
        new_cuts = []
        if inner.status == "optimal" or (inner.status in ("slow_progress", "iteration_limit")
                                          and np.isfinite(inner.value) and inner.S is not None):
            state.offer(inner.value, x_hat, inner.X)
        closed = gap_test(state.lb, state.ub, eps)
        point = dict(master_value=res.value, inner_value=inner.value, x=x_hat)
        if closed:
            anti_cycle_guard(state, x_hat, closed)
            _log_iteration(state, 0, res.node_count, t0, inst, **point)
            status = "optimal"
            break
        try:
            S = extract_dual_certificate(inner)
            new_cuts += _certificate_cuts(S, cut_mode, is_isdp)
        except (CertificateError, CutValidityError) as exc:
            log.debug("certificate refused (%s)", exc)
        if inner.status == "primal_infeasible" and binary:
            new_cuts.append(NoGoodCut(x_hat))
        added = _insert_all(pool, new_cuts)
        M_hat = _lifted(inst, X_hat, x_hat)
        if added == 0 or master.cut_violation(_master_point(master, res)) <= 1e-9:
            lam, w = min_eig(M_hat)
            if lam < -1e-9:
                added += _insert_all(pool, [_vector_cut(w, cut_mode, n, is_isdp)])
        guard = anti_cycle_guard(state, x_hat, closed)
        if guard is not None and binary:
            added += _insert_all(pool, [guard])
        if added == 0 and binary:
            # No cut separates the master point and it is not new: the point is
            # PSD-feasible, so exclude it (its value is already in ub).
            added += _insert_all(pool, [NoGoodCut(x_hat)])
        state.cuts_added += added
        _log_iteration(state, added, res.node_count, t0, inst, **point)
    return _report(inst, state, status, algo, t0)


def _master_point(master, res):
    """Variable vector for the master's integer solution ``(x, X)``."""
    L = master.layout
    z = np.zeros(L.p)
    M = _lifted(master.inst, res.X, res.x)
    z[L.idx[L._mask]] = (M - L.const)[L._mask]
    return z


def run_oa(inst, eps: float = 1e-6, limits: OaLimits | None = None,
           cut_mode: str = "aggregate") -> SolveReport:
    """Outer approximation with a MILP master over linear PSD cuts."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if cut_mode not in ("aggregate", "linear"):
        raise ValueError("run_oa adds linear cuts only (cut_mode aggregate or linear)")
    return _run_loop(inst, eps, limits, use_soc=False, cut_mode=cut_mode, algo="oa")


def run_oa_soc(inst, eps: float = 1e-6, limits: OaLimits | None = None,
               cut_mode: str = "soc") -> SolveReport:
    """Outer approximation with a spectrally seeded MISOCP master."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if cut_mode not in CUT_MODES:
        raise ValueError(f"unknown cut mode {cut_mode!r}")
    inst = _prepare(inst)
    if isinstance(inst, IsdpInstance):
        raise TypeError("run_oa_soc needs a binary-lifted instance")
    return _run_loop(inst, eps, limits, use_soc=True, cut_mode=cut_mode, algo="oa_soc")


# -- lazy branch and cut -------------------------------------------------------------

class _PsdHook(LazyHook):
    def __init__(self, inst, eps, cut_mode, state):
        self.inst = inst
        self.eps = eps
        self.mode = cut_mode
        self.state = state

    def check(self, sol, master) -> HookDecision:
        inst = self.inst
        x = sol.x
        n = inst.n
        M = lift(sol.X, x)
        lam, w = min_eig(M)
        f = inst.objective(x) if inst.is_feasible(x) else np.inf
        tol = self.eps * max(1.0, abs(sol.value))
        # A relaxation value matching f(x) proves x optimal within the node,
        # whatever the unconstrained part of X looks like.
        if f - sol.value <= tol:
            self.state.offer(f, x, np.outer(x, x))
            return HookDecision(True, value=f, X=np.outer(x, x))
        cuts = [_vector_cut(w, self.mode, n, False)]
        if self.mode != "aggregate" and lam < 0:
            cuts.append(LinearCut(np.outer(w, w)))
        if not np.isfinite(f) and lam >= -self.eps:
            cuts.append(NoGoodCut(x))
        return HookDecision(False, cuts)

    def final_value(self, x, master):
        if not self.inst.is_feasible(x):
            return None
        f = self.inst.objective(x)
        self.state.offer(f, x, np.outer(x, x))
        return f, np.asarray(x, float), np.outer(x, x)


def run_lazy_soc(inst, eps: float = 1e-6, limits: OaLimits | None = None,
                 cut_mode: str = "soc") -> SolveReport:
    """Single-tree branch and cut with lazy eigenvector cuts."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if cut_mode not in CUT_MODES:
        raise ValueError(f"unknown cut mode {cut_mode!r}")
    t0 = time.monotonic()
    limits = limits or OaLimits()
    inst = _prepare(inst)
    if isinstance(inst, IsdpInstance):
        raise TypeError("run_lazy_soc needs a binary-lifted instance")
    pool = CutPool()
    _insert_all(pool, _polyhedral(inst))
    _insert_all(pool, spectral_seed(inst))
    state = OaState(pool)
    seeded = len(pool)
    master = MasterProblem(inst, pool, use_soc=True)
    hook = _PsdHook(inst, eps, cut_mode, state)
    res = solve_master(master, hook, Limits(time_limit=limits.time_limit, rel_gap=0.5 * eps,
                                            node_limit=limits.node_limit))
    state.iteration = 1
    state.nodes = res.node_count
    state.cuts_added = seeded + res.lazy_cuts
    if res.x is not None:
        state.offer(res.value, res.x, res.X)
    if res.status == "optimal":
        state.raise_lb(res.bound)
        status = "optimal"
    elif res.status in ("time_limit", "node_limit"):
        if np.isfinite(res.bound):
            state.raise_lb(res.bound)
        status = "time_limit" if res.status == "time_limit" else "iteration_limit"
    elif res.x is None and res.status in ("infeasible", "cutoff"):
        status = "infeasible"
    else:
        status = "iteration_limit" if res.x is None else "optimal"
        if res.x is not None:
            state.raise_lb(res.bound)
    _log_iteration(state, res.lazy_cuts, res.node_count, t0, inst, res.value, res.value, res.x)
    return _report(inst, state, status, "lazy_soc", t0)


# -- relaxations -------------------------------------------------------------------

def continuous_relaxation(inst, *, spectral: bool = True, polyhedral: bool = True):
    """Value of the master's continuous relaxation (integrality dropped)."""
    from .bb import _relax  # local: internal solver entry point

    inst = _prepare(inst)
    pool = CutPool()
    if polyhedral:
        _insert_all(pool, _polyhedral(inst))
    if spectral:
        _insert_all(pool, spectral_seed(inst))
    master = MasterProblem(inst, pool, use_soc=True)
    L = master.layout
    r = _relax(master, L.lo[L.int_vars], L.hi[L.int_vars], None)
    if r.status != "optimal":
        raise RuntimeError(f"relaxation ended with status {r.status}")
    return inst.user_value(r.value)
