"""Primal-dual interior-point solver for small dense conic programs.

The engine works on the inequality form

    minimize    c'x
    subject to  G x + s = h,   A x = b,   s in K

with ``x`` free and ``K`` a product of a nonnegative orthant, three-dimensional
second-order cones ``{(u, v, w): u >= ||(v, w)||}`` and PSD cones (stored as
``svec``: lower triangle, off-diagonals scaled by sqrt(2)).  Its dual is

    maximize    -h'z - b'y
    subject to  G'z + A'y + c = 0,   z in K.

Iterations are infeasible-start path following with Nesterov-Todd scaling and
Mehrotra's predictor-corrector.  The Newton system is kept in augmented form
with the scaled rows ``W^{-T} G``, so its blocks stay well scaled near the
boundary; one LU factorization per iteration serves both steps.

:class:`ConicProblem` provides the block standard form (free, nonneg,
rotated-SOC and PSD blocks tied together by equality rows) on top of it.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

__all__ = [
    "Cone",
    "ConeLP",
    "ConicProblem",
    "ConicSolution",
    "EngineResult",
    "solve_cone_lp",
    "solve_conic",
    "svec",
    "smat",
    "svec_dim",
    "ROT",
    "InnerResult",
    "CertificateError",
    "solve_inner_sdp",
    "solve_inner_isdp",
    "extract_dual_certificate",
]

SQRT2 = np.sqrt(2.0)

# (r, s, t) in the rotated cone 2rs >= t^2, r, s >= 0  <=>  ROT @ (r, s, t) in SOC.
ROT = np.array([[1.0, 1.0, 0.0], [1.0, -1.0, 0.0], [0.0, 0.0, SQRT2]])

FEASTOL = 1e-8
GAPTOL = 1e-8
MAXITERS = 200


def svec_dim(m: int) -> int:
    return m * (m + 1) // 2


def svec(M) -> np.ndarray:
    """Lower triangle in row-major order, off-diagonals times sqrt(2)."""
    M = np.asarray(M, float)
    m = M.shape[-1]
    r, c = np.tril_indices(m)
    v = M[..., r, c].copy()
    v[..., r != c] *= SQRT2
    return v


def smat(v, m: int | None = None) -> np.ndarray:
    v = np.asarray(v, float)
    if m is None:
        m = int(round((np.sqrt(8 * v.shape[-1] + 1) - 1) / 2))
    r, c = np.tril_indices(m)
    w = v.copy()
    w[..., r != c] /= SQRT2
    M = np.zeros(v.shape[:-1] + (m, m))
    M[..., r, c] = w
    M[..., c, r] = w
    return M


@dataclass(frozen=True)
class Cone:
    """Cone layout: ``l`` nonnegative rows, ``q`` SOC(3) blocks, PSD sizes ``s``."""

    l: int = 0
    q: int = 0
    s: tuple = ()

    @property
    def dim(self) -> int:
        return self.l + 3 * self.q + sum(svec_dim(m) for m in self.s)

    @property
    def degree(self) -> int:
        return self.l + self.q + sum(self.s)

    def split(self, v):
        o = self.l + 3 * self.q
        out = [v[: self.l], v[self.l : o].reshape(self.q, 3)]
        for m in self.s:
            k = svec_dim(m)
            out.append(v[o : o + k])
            o += k
        return out

    def identity(self) -> np.ndarray:
        parts = [np.ones(self.l), np.tile([1.0, 0.0, 0.0], self.q)]
        parts += [svec(np.eye(m)) for m in self.s]
        return np.concatenate(parts)

    def max_step(self, v, dv) -> float:
        """Largest ``a >= 0`` keeping ``v + a dv`` in the cone (``inf`` if unbounded);
        ``v`` must lie in the interior."""
        a = np.inf
        vl, vq, *vs = self.split(v)
        dl, dq, *ds = self.split(dv)
        neg = dl < 0
        if neg.any():
            a = min(a, float(np.min(-vl[neg] / dl[neg])))
        if self.q:
            a = min(a, _soc_step(vq, dq))
        for m, V, D in zip(self.s, vs, ds):
            L = np.linalg.cholesky(smat(V, m))
            Li = sla.solve_triangular(L, np.eye(m), lower=True)
            top = np.linalg.eigvalsh(-Li @ smat(D, m) @ Li.T)[-1]
            if top > 0:
                a = min(a, 1.0 / top)
        return a

    def margin(self, v) -> float:
        """Smallest 'eigenvalue' of ``v`` over all blocks (positive iff interior)."""
        vl, vq, *vs = self.split(v)
        vals = [np.inf]
        if self.l:
            vals.append(vl.min())
        if self.q:
            vals.append(np.min(vq[:, 0] - np.linalg.norm(vq[:, 1:], axis=1)))
        for m, V in zip(self.s, vs):
            vals.append(np.linalg.eigvalsh(smat(V, m))[0])
        return float(min(vals))

    def shift_into(self, v) -> np.ndarray:
        a = self.margin(v)
        if a >= 1e-8 * max(1.0, np.linalg.norm(v)) and np.isfinite(a):
            return v
        return v + (1.0 - a) * self.identity()


def _soc_step(v, dv) -> float:
    # max a with v0 + a d0 >= ||v1 + a d1||, per cone, assuming v strictly inside.
    a = dv[:, 0] ** 2 - np.sum(dv[:, 1:] ** 2, axis=1)
    b = 2.0 * (v[:, 0] * dv[:, 0] - np.sum(v[:, 1:] * dv[:, 1:], axis=1))
    c = v[:, 0] ** 2 - np.sum(v[:, 1:] ** 2, axis=1)
    v0, d0 = v[:, 0], dv[:, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        quad = np.abs(a) > 1e-300
        disc = b * b - 4.0 * a * c
        real = quad & (disc >= 0)
        q = -0.5 * (b + np.copysign(np.sqrt(np.where(real, disc, 0.0)), b))
        r1 = np.where(real & (q != 0), q / a, np.where(real, -b / (2.0 * a), np.inf))
        r2 = np.where(real & (q != 0), c / q, np.inf)
        r3 = np.where(~quad & (np.abs(b) > 1e-300), -c / b, np.inf)
        roots = np.stack([r1, r2, r3])
        ok = (roots > 0) & (v0 + roots * d0 >= -1e-300) & np.isfinite(roots)
        best = np.where(ok, roots, np.inf).min(axis=0)
        best = np.where(d0 < 0, np.minimum(best, -v0 / d0), best)
    return float(best.min(initial=np.inf))


def _jnorm(u):
    r = np.linalg.norm(u[:, 1:], axis=1)
    return np.sqrt(np.maximum((u[:, 0] - r) * (u[:, 0] + r), 1e-300))


class _Scaling:
    """Nesterov-Todd scaling ``W`` with ``W s = W^{-T} z = lam``.

    The solver calls it as ``_Scaling(cone, z, s)`` to obtain the usual
    ``W z = W^{-T} s = lam``; the construction is symmetric in its arguments.
    """

    def __init__(self, cone: Cone, s, z):
        self.cone = cone
        sl, sq, *ss = cone.split(s)
        zl, zq, *zs = cone.split(z)
        self.dl = np.sqrt(sl / zl)
        lam = [np.sqrt(sl * zl)]
        # SOC blocks: W = eta (2 v v' - J), W^{-1} = (2 J v v' J - J) / eta, where
        # v is the Householder vector of the normalized NT point.
        if cone.q:
            J = np.array([1.0, -1.0, -1.0])
            sn, zn = _jnorm(sq), _jnorm(zq)
            sb, zb = sq / sn[:, None], zq / zn[:, None]
            gam = np.sqrt(0.5 * (1.0 + np.sum(sb * zb, axis=1)))
            w = (zb + sb * J) / (2.0 * gam[:, None])
            v = w.copy()
            v[:, 0] += 1.0
            v /= np.sqrt(2.0 * (w[:, 0] + 1.0))[:, None]
            eta = np.sqrt(zn / sn)
            Jm = np.diag(J)
            self.Wq = eta[:, None, None] * (2.0 * np.einsum("ki,kj->kij", v, v) - Jm)
            vj = v * J
            self.Wqi = (2.0 * np.einsum("ki,kj->kij", vj, vj) - Jm) / eta[:, None, None]
            lam.append(np.einsum("kij,kj->ki", self.Wq, sq).reshape(-1))
        else:
            self.Wq = self.Wqi = np.zeros((0, 3, 3))
            lam.append(np.zeros(0))
        # PSD blocks: W(U) = R^{-1} U R^{-T}, with R' Z R = R^{-1} S R^{-T} = diag(lam).
        self.R, self.Ri = [], []
        for m, S, Z in zip(cone.s, ss, zs):
            Ls = np.linalg.cholesky(smat(S, m))
            Lz = np.linalg.cholesky(smat(Z, m))
            U, lv, Vt = np.linalg.svd(Lz.T @ Ls)
            R = Ls @ Vt.T / np.sqrt(lv)
            self.R.append(R)
            self.Ri.append(np.linalg.inv(R))
            lam.append(svec(np.diag(lv)))
        self.lam = np.concatenate(lam)

    def _apply(self, v, which):
        cone = self.cone
        vl, vq, *vs = cone.split(v)
        if which in ("W", "WT"):
            out = [vl / self.dl, np.einsum("kij,kj->ki", self.Wq, vq).reshape(-1)]
        else:
            out = [vl * self.dl, np.einsum("kij,kj->ki", self.Wqi, vq).reshape(-1)]
        for m, R, Ri, V in zip(cone.s, self.R, self.Ri, vs):
            Vm = smat(V, m)
            if which == "W":
                out.append(svec(Ri @ Vm @ Ri.T))
            elif which == "WT":
                out.append(svec(Ri.T @ Vm @ Ri))
            elif which == "Winv":
                out.append(svec(R @ Vm @ R.T))
            else:  # W^{-T}
                out.append(svec(R.T @ Vm @ R))
        return np.concatenate(out)

    def W(self, v):
        return self._apply(v, "W")

    def WT(self, v):
        return self._apply(v, "WT")

    def Winv(self, v):
        return self._apply(v, "Winv")

    def WinvT(self, v):
        # LP and SOC blocks are symmetric, so only the PSD part differs from W^{-1}.
        return self._apply(v, "WinvT")

    def winvT_cols(self, G):
        """``W^{-T} G`` for a dense ``G`` (rows indexed by the cone)."""
        cone = self.cone
        out = np.empty_like(G)
        l, nq = cone.l, cone.q
        out[:l] = G[:l] * self.dl[:, None]
        if nq:
            Gq = G[l : l + 3 * nq].reshape(nq, 3, -1)
            out[l : l + 3 * nq] = np.einsum("kij,kjp->kip", self.Wqi, Gq).reshape(3 * nq, -1)
        o = l + 3 * nq
        for m, R in zip(cone.s, self.R):
            k = svec_dim(m)
            mats = smat(G[o : o + k].T, m)
            out[o : o + k] = svec(R.T @ mats @ R).T
            o += k
        return out

    def hinv_cols(self, G):
        """``W^{-1} W^{-T} G`` for a dense ``G`` (rows indexed by the cone)."""
        cone = self.cone
        out = np.empty_like(G)
        l, nq = cone.l, cone.q
        out[:l] = G[:l] * (self.dl**2)[:, None]
        if nq:
            Gq = G[l : l + 3 * nq].reshape(nq, 3, -1)
            W2 = np.einsum("kij,kjl->kil", self.Wqi, self.Wqi)
            out[l : l + 3 * nq] = np.einsum("kij,kjp->kip", W2, Gq).reshape(3 * nq, -1)
        o = l + 3 * nq
        for m, R in zip(cone.s, self.R):
            k = svec_dim(m)
            P = R @ R.T
            mats = smat(G[o : o + k].T, m)
            out[o : o + k] = svec(P @ mats @ P).T
            o += k
        return out


def _jordan(cone: Cone, u, v):
    ul, uq, *us = cone.split(u)
    vl, vq, *vs = cone.split(v)
    out = [ul * vl]
    q0 = np.sum(uq * vq, axis=1)
    q1 = uq[:, :1] * vq[:, 1:] + vq[:, :1] * uq[:, 1:]
    out.append(np.column_stack([q0, q1]).reshape(-1))
    for m, U, V in zip(cone.s, us, vs):
        Um, Vm = smat(U, m), smat(V, m)
        out.append(svec(0.5 * (Um @ Vm + Vm @ Um)))
    return np.concatenate(out)


def _lam_div(cone: Cone, lam, d):
    """Solve ``lam o x = d`` where ``lam`` is the scaled point (PSD part diagonal)."""
    ll, lq, *ls = cone.split(lam)
    dl, dq, *ds = cone.split(d)
    out = [dl / ll]
    if cone.q:
        den = _jnorm(lq) ** 2
        x0 = (lq[:, 0] * dq[:, 0] - np.sum(lq[:, 1:] * dq[:, 1:], axis=1)) / den
        x1 = (dq[:, 1:] - x0[:, None] * lq[:, 1:]) / lq[:, :1]
        out.append(np.column_stack([x0, x1]).reshape(-1))
    else:
        out.append(np.zeros(0))
    for m, L, D in zip(cone.s, ls, ds):
        lv = np.diag(smat(L, m))
        out.append(svec(smat(D, m) * 2.0 / (lv[:, None] + lv[None, :])))
    return np.concatenate(out)


@dataclass
class ConeLP:
    """Data of the inequality-form conic program solved by :func:`solve_cone_lp`."""

    c: np.ndarray
    G: np.ndarray
    h: np.ndarray
    cone: Cone
    A: np.ndarray = None
    b: np.ndarray = None

    def __post_init__(self):
        self.c = np.asarray(self.c, float)
        p = self.c.size
        self.G = np.asarray(self.G, float).reshape(-1, p)
        self.h = np.asarray(self.h, float)
        if self.A is None:
            self.A = np.zeros((0, p))
            self.b = np.zeros(0)
        self.A = np.asarray(self.A, float).reshape(-1, p)
        self.b = np.asarray(self.b, float).reshape(-1)
        if self.G.shape[0] != self.cone.dim or self.h.size != self.cone.dim:
            raise ValueError("G/h rows do not match the cone dimension")
        if self.A.shape[0] != self.b.size:
            raise ValueError("A rows do not match b")


@dataclass
class EngineResult:
    status: str
    x: np.ndarray
    s: np.ndarray
    z: np.ndarray
    y: np.ndarray
    pcost: float
    dcost: float
    pres: float
    dres: float
    gap: float
    iterations: int
    trace: list = field(default_factory=list)


def _reduce_rows(A, b):
    """Drop linearly dependent equality rows; ``None`` if they are inconsistent."""
    if A.shape[0] == 0:
        return A, b, np.arange(0)
    Q, R, piv = sla.qr(A.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(A.shape) * np.finfo(float).eps * (diag[0] if diag.size else 0.0) * 10
    rank = int(np.sum(diag > tol))
    keep = np.sort(piv[:rank])
    Ak, bk = A[keep], b[keep]
    if rank < A.shape[0]:
        sol = np.linalg.lstsq(A, b, rcond=None)[0]
        if np.linalg.norm(A @ sol - b) > 1e-9 * max(1.0, np.linalg.norm(b)):
            return None
    return Ak, bk, keep


PHASE1_TOL = 1e-6
STALL_ITERS = 12


def solve_cone_lp(
    prob: ConeLP,
    *,
    feastol: float = FEASTOL,
    gaptol: float = GAPTOL,
    maxiters: int = MAXITERS,
    deadline: float | None = None,
    keep_trace: bool = False,
) -> EngineResult:
    """Solve ``prob``; see the module docstring for the formulation.

    Without an optimal point the outcome is settled by two auxiliary problems
    that are strictly feasible by construction: the smallest shift ``theta``
    of the constraints along the cone identity that makes the primal (resp.
    the dual) feasible.  A clearly positive shift is reported as
    ``primal_infeasible`` (resp. ``dual_infeasible``), with the auxiliary
    dual supplying the certificate; otherwise the status stays
    ``slow_progress`` / ``iteration_limit`` with the best iterate.
    """
    kw = dict(feastol=feastol, gaptol=gaptol, maxiters=maxiters, deadline=deadline)
    res = _ipm(prob, keep_trace=keep_trace, **kw)
    if res.status == "optimal" or (deadline is not None and time.monotonic() > deadline):
        return res
    cert = _primal_phase1(prob, **kw)
    if cert is not None:
        z, y = cert
        res.status, res.z, res.y = "primal_infeasible", z, y
        return res
    if _dual_phase1_positive(prob, **kw):
        res.status = "dual_infeasible"
    elif res.status in ("primal_infeasible", "dual_infeasible"):
        res.status = "slow_progress"
    return res


def _primal_phase1(prob: ConeLP, **kw):
    """Farkas pair ``(z, y)`` if no shift below ``PHASE1_TOL`` makes the primal feasible."""
    cone, G, h = prob.cone, prob.G, prob.h
    p = prob.c.size
    e = cone.identity()
    # variables (x, theta):  G x + (h - e) theta + s = h,  0 <= theta <= 2,  A x + b theta = b
    top = np.zeros((2, p + 1))
    top[0, p], top[1, p] = -1.0, 1.0
    G1 = np.vstack([top, np.column_stack([G, h - e])])
    h1 = np.concatenate([[0.0, 2.0], h])
    A1 = np.column_stack([prob.A, prob.b])
    aux = ConeLP(np.r_[np.zeros(p), 1.0], G1, h1, Cone(cone.l + 2, cone.q, cone.s), A1, prob.b)
    r = _ipm(aux, **kw)
    if r.status != "optimal" or r.pcost <= PHASE1_TOL:
        return None
    return r.z[2:], r.y


def _dual_phase1_positive(prob: ConeLP, **kw) -> bool:
    cone, G, c = prob.cone, prob.G, prob.c
    N, meq = cone.dim, prob.A.shape[0]
    e = cone.identity()
    # variables (z, y, theta):  z in K,  G'z + A'y - (c + G'e) theta = -c,  0 <= theta <= 2
    nv = N + meq + 1
    rows = np.zeros((2 + N, nv))
    rows[0, -1], rows[1, -1] = -1.0, 1.0
    rows[2:, :N] = -np.eye(N)
    h2 = np.r_[0.0, 2.0, np.zeros(N)]
    A2 = np.column_stack([G.T, prob.A.T, -(c + G.T @ e)])
    aux = ConeLP(np.r_[np.zeros(N + meq), 1.0], rows, h2, Cone(cone.l + 2, cone.q, cone.s), A2, -c)
    r = _ipm(aux, **kw)
    return r.status == "optimal" and r.pcost > PHASE1_TOL


def _ipm(
    prob: ConeLP,
    *,
    feastol: float = FEASTOL,
    gaptol: float = GAPTOL,
    maxiters: int = MAXITERS,
    deadline: float | None = None,
    keep_trace: bool = False,
) -> EngineResult:
    cone = prob.cone
    c, G, h = prob.c, prob.G, prob.h
    p = c.size
    red = _reduce_rows(prob.A, prob.b)
    if red is None:
        nan = np.full(p, np.nan)
        return EngineResult("primal_infeasible", nan, np.full(cone.dim, np.nan),
                            np.zeros(cone.dim), np.zeros(prob.A.shape[0]),
                            np.inf, np.inf, np.inf, 0.0, np.nan, 0)
    A, b, keep = red
    meq = A.shape[0]
    nu = max(cone.degree, 1)
    e = cone.identity()
    resx0 = max(1.0, np.linalg.norm(c))
    resy0 = max(1.0, np.linalg.norm(b))
    resz0 = max(1.0, np.linalg.norm(h))

    def kkt_factor(Hg):
        K = np.zeros((p + meq, p + meq))
        K[:p, :p] = G.T @ Hg
        K[:p, p:] = A.T
        K[p:, :p] = A
        # Tiny static regularization keeps the factorization defined when G, A
        # leave a direction unconstrained; any effect is removed by refinement.
        reg = 1e-13 * max(1.0, np.abs(K[:p, :p]).max())
        Kr = K.copy()
        Kr[:p, :p] += reg * np.eye(p)
        Kr[p:, p:] -= reg * np.eye(meq)
        return K, sla.lu_factor(Kr, check_finite=False)

    def kkt_solve(fac, K, rhs):
        sol = sla.lu_solve(fac, rhs, check_finite=False)
        for _ in range(2):
            sol += sla.lu_solve(fac, rhs - K @ sol, check_finite=False)
        return sol

    # Starting point: least-squares primal/dual with W = I, shifted into the cone.
    K0, f0 = kkt_factor(G)
    sol = kkt_solve(f0, K0, np.concatenate([G.T @ h, b]))
    x = sol[:p]
    s = cone.shift_into(h - G @ x)
    sol = kkt_solve(f0, K0, np.concatenate([-c, np.zeros(meq)]))
    z = cone.shift_into(G @ sol[:p])
    y = np.zeros(meq)

    trace = []
    status = "iteration_limit"
    best = None
    it = 0
    for it in range(maxiters + 1):
        rx = G.T @ z + A.T @ y + c
        ry = A @ x - b
        rz = G @ x + s - h
        gap = float(s @ z)
        pcost = float(c @ x)
        dcost = float(-h @ z - b @ y)
        pres = max(np.linalg.norm(ry) / resy0, np.linalg.norm(rz) / resz0)
        dres = np.linalg.norm(rx) / resx0
        relgap = max(gap, abs(pcost - dcost)) / max(1.0, min(abs(pcost), abs(dcost)))
        if keep_trace:
            trace.append(dict(it=it, pcost=pcost, dcost=dcost, pres=pres, dres=dres, gap=gap,
                              residual_term=float(rx @ x - z @ rz - y @ ry)))
        score = max(pres, dres, relgap)
        if not np.isfinite(score):
            status = "slow_progress"
            break
        if best is None or score < best[0]:
            if best is None or score < 0.5 * best[0]:
                last_progress = it
            best = (score, x.copy(), s.copy(), z.copy(), y.copy(), it)
        if pres <= feastol and dres <= feastol and (gap <= gaptol or relgap <= gaptol):
            status = "optimal"
            break
        # Infeasibility certificates.
        hz_by = -dcost
        if hz_by < 0:
            pinf = np.linalg.norm(G.T @ z + A.T @ y) / resx0 / (-hz_by)
            if pinf <= feastol:
                status = "primal_infeasible"
                break
        if pcost < 0:
            dinf = max(np.linalg.norm(G @ x + s) / resz0, np.linalg.norm(A @ x) / resy0) / (-pcost)
            if dinf <= feastol:
                status = "dual_infeasible"
                break
        if it == maxiters:
            break
        if it - last_progress >= STALL_ITERS:
            status = "slow_progress"
            break
        if deadline is not None and time.monotonic() > deadline:
            break

        mu = gap / nu
        try:
            W = _Scaling(cone, z, s)
        except np.linalg.LinAlgError:
            status = "slow_progress"
            break
        lam = W.lam
        Gs = W.winvT_cols(G)
        m_c = cone.dim
        Kaug = np.zeros((p + meq + m_c, p + meq + m_c))
        Kaug[:p, p : p + meq] = A.T
        Kaug[:p, p + meq :] = Gs.T
        Kaug[p : p + meq, :p] = A
        Kaug[p + meq :, :p] = Gs
        Kaug[p + meq :, p + meq :] = -np.eye(m_c)
        Kreg = Kaug.copy()
        Kreg[np.arange(p), np.arange(p)] += 1e-12
        Kreg[np.arange(p, p + meq), np.arange(p, p + meq)] -= 1e-12
        try:
            fac = sla.lu_factor(Kreg, check_finite=False)
        except (np.linalg.LinAlgError, ValueError):
            status = "slow_progress"
            break
        if not np.all(np.isfinite(fac[0])) or np.any(np.diag(fac[0]) == 0.0):
            status = "slow_progress"
            break

        def base(bx, by, bz, bu):
            # G'dz + A'dy = bx,  A dx = by,  G dx + ds = bz,  W^{-T} ds + W dz = bu,
            # solved in the scaled unknown u = W dz:  W^{-T} G dx - u = W^{-T} bz - bu.
            rhs = np.concatenate([bx, by, W.WinvT(bz) - bu])
            sol = kkt_solve(fac, Kaug, rhs)
            dx, dy = sol[:p], sol[p : p + meq]
            return dx, bz - G @ dx, W.Winv(sol[p + meq :]), dy

        def newton(ds_rhs):
            # Linearized KKT with complementarity lam o (W^{-T} ds + W dz) = ds_rhs,
            # refined against the unreduced system.
            bx, by, bz, bu = -rx, -ry, -rz, _lam_div(cone, lam, ds_rhs)
            d = base(bx, by, bz, bu)
            for _ in range(2):
                dx, ds, dz, dy = d
                ex = bx - G.T @ dz - A.T @ dy
                ey = by - A @ dx
                ez = bz - G @ dx - ds
                eu = bu - W.WinvT(ds) - W.W(dz)
                if max(np.abs(ex).max(initial=0), np.abs(ey).max(initial=0),
                       np.abs(ez).max(initial=0), np.abs(eu).max(initial=0)) == 0.0:
                    break
                c_ = base(ex, ey, ez, eu)
                d = tuple(u + v for u, v in zip(d, c_))
            return d

        lam2 = _jordan(cone, lam, lam)
        dx, ds, dz, dy = newton(-lam2)
        a_aff = min(1.0, cone.max_step(s, ds), cone.max_step(z, dz))
        sigma = (max(0.0, (s + a_aff * ds) @ (z + a_aff * dz)) / max(gap, 1e-300)) ** 3
        sigma = min(1.0, sigma)
        corr = _jordan(cone, W.WinvT(ds), W.W(dz))
        dx, ds, dz, dy = newton(-lam2 - corr + sigma * mu * e)
        amax = min(cone.max_step(s, ds), cone.max_step(z, dz))
        step = min(1.0, 0.99 * amax)
        if not np.isfinite(step) or step < 1e-12:
            status = "slow_progress"
            break
        x = x + step * dx
        s = s + step * ds
        z = z + step * dz
        y = y + step * dy

    if status in ("iteration_limit", "slow_progress") and best is not None:
        _, x, s, z, y, _ = best
    yfull = np.zeros(prob.A.shape[0])
    yfull[keep] = y
    rx = G.T @ z + A.T @ y + c
    rz = G @ x + s - h
    ry = A @ x - b
    return EngineResult(
        status, x, s, z, yfull, float(c @ x), float(-h @ z - b @ y),
        float(max(np.linalg.norm(ry) / resy0, np.linalg.norm(rz) / resz0)),
        float(np.linalg.norm(rx) / resx0), float(s @ z), it, trace,
    )


# --------------------------------------------------------------------------
# Block standard form
# --------------------------------------------------------------------------

_BLOCK_KINDS = ("free", "nonneg", "rsoc", "psd")


def _block_len(kind: str, size: int) -> int:
    if kind == "psd":
        return svec_dim(size)
    if kind == "rsoc" and size != 3:
        raise ValueError("rsoc blocks have exactly three slots (r, s, t)")
    return size


@dataclass
class ConicProblem:
    """``min c'v`` s.t. ``A v = b`` and each block of ``v`` in its cone.

    ``blocks`` is a list of ``(kind, size)`` with kind one of ``free``,
    ``nonneg``, ``rsoc`` (size 3, ``2 r s >= t^2``) or ``psd`` (size ``m``; the
    block holds ``svec`` of an ``m x m`` matrix so that ``svec(C) @ svec(X)``
    is ``<C, X>``).
    """

    blocks: list
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.blocks = [(str(k), int(m)) for k, m in self.blocks]
        if not self.blocks:
            raise ValueError("at least one block is required")
        for k, m in self.blocks:
            if k not in _BLOCK_KINDS:
                raise ValueError(f"unknown block kind {k!r}")
        self.c = np.asarray(self.c, float).reshape(-1)
        self.A = np.asarray(self.A, float).reshape(-1, self.c.size)
        self.b = np.asarray(self.b, float).reshape(-1)
        if sum(_block_len(k, m) for k, m in self.blocks) != self.c.size:
            raise ValueError("objective length does not match the blocks")
        if self.A.shape[0] != self.b.size:
            raise ValueError("constraint matrix row count must equal rhs length")

    def offsets(self):
        o = 0
        for k, m in self.blocks:
            yield k, m, o, o + _block_len(k, m)
            o += _block_len(k, m)


@dataclass
class ConicSolution:
    status: str
    primal: list
    y: np.ndarray
    dual_slack: list
    pobj: float
    dobj: float
    pres: float
    dres: float
    iterations: int
    trace: list = field(default_factory=list)

    def psd_slack(self, index: int = 0) -> np.ndarray:
        """Dual slack matrix of the ``index``-th PSD block."""
        mats = [s for s in self.dual_slack if isinstance(s, np.ndarray) and s.ndim == 2]
        if len(mats) <= index:
            raise ValueError("solution has no PSD block")
        return mats[index]


def solve_conic(p: ConicProblem, *, keep_trace: bool = False, **kw) -> ConicSolution:
    """Solve a block standard-form problem with :func:`solve_cone_lp`."""
    nv = p.c.size
    rows, hs = [], []
    l_idx, q_idx, s_list = [], [], []
    for kind, m, a, b in p.offsets():
        if kind == "nonneg":
            l_idx.extend(range(a, b))
        elif kind == "rsoc":
            q_idx.append((a, b))
        elif kind == "psd":
            s_list.append((m, a, b))
    G = []
    Gl = np.zeros((len(l_idx), nv))
    Gl[np.arange(len(l_idx)), l_idx] = -1.0
    G.append(Gl)
    for a, b in q_idx:
        Gq = np.zeros((3, nv))
        Gq[:, a:b] = -ROT
        G.append(Gq)
    for m, a, b in s_list:
        Gs = np.zeros((b - a, nv))
        Gs[:, a:b] = -np.eye(b - a)
        G.append(Gs)
    G = np.vstack(G)
    cone = Cone(len(l_idx), len(q_idx), tuple(m for m, _, _ in s_list))
    res = solve_cone_lp(ConeLP(p.c, G, np.zeros(cone.dim), cone, p.A, p.b),
                        keep_trace=keep_trace, **kw)
    zl, zq, *zs = cone.split(res.z)
    primal, slack = [], []
    li = qi = si = 0
    for kind, m, a, b in p.offsets():
        v = res.x[a:b]
        if kind == "psd":
            primal.append(smat(v, m))
            slack.append(smat(zs[si], m))
            si += 1
        elif kind == "nonneg":
            primal.append(v.copy())
            slack.append(zl[li : li + m].copy())
            li += m
        elif kind == "rsoc":
            primal.append(v.copy())
            slack.append(ROT.T @ zq[qi])
            qi += 1
        else:
            primal.append(v.copy())
            slack.append(np.zeros(m))
    return ConicSolution(res.status, primal, -res.y, slack, res.pcost, res.dcost,
                         res.pres, res.dres, res.iterations, res.trace)


# --------------------------------------------------------------------------
# Inner SDP with the integer part fixed
# --------------------------------------------------------------------------

INNER_ETA = 1e-7
CERT_PSD_TOL = 1e-9


class CertificateError(ValueError):
    pass


@dataclass
class InnerResult:
    """Outcome of an inner SDP.  Unpacks as ``(X, value, S, status)``.

    For a binary-lifted instance ``X`` and ``value`` are the exact optimum
    (``x x'`` and the objective at ``x``), because the fixed diagonal forces
    it; ``raw_value`` keeps what the interior-point method reported on the
    slightly relaxed problem.  ``S`` is the PSD dual slack of the lifted
    matrix (a Farkas-type matrix when ``status`` is ``primal_infeasible``),
    or ``None`` when no conic certificate exists.
    """

    X: np.ndarray
    value: float
    S: np.ndarray | None
    status: str
    raw_value: float = np.nan
    engine: EngineResult | None = None

    def __iter__(self):
        return iter((self.X, self.value, self.S, self.status))


def _tril_index(r: int, c: int) -> int:
    if r < c:
        r, c = c, r
    return r * (r + 1) // 2 + c


def _entry_row(N: int, r: int, c: int) -> np.ndarray:
    """Row ``a`` with ``a @ svec(M) == M[r, c]``."""
    a = np.zeros(N)
    a[_tril_index(r, c)] = 1.0 if r == c else 1.0 / SQRT2
    return a


def _psd_block(N: int, extra: int = 0) -> np.ndarray:
    G = np.zeros((N, N + extra))
    G[:, :N] = -np.eye(N)
    return G


def solve_inner_sdp(inst, x_fixed, *, eta: float = INNER_ETA, deadline=None) -> InnerResult:
    """SDP over the lifted matrix with ``x`` (and hence ``Diag(X)``) fixed.

    ``inst`` is a BQCQP/BSDP instance in minimization form.  The diagonal
    fixing and every constraint with a quadratic part are relaxed by ``eta``
    so that the problem keeps an interior; linear-only constraints are
    constants once ``x`` is fixed and are checked directly.

    With ``x`` binary the lifted matrix is PSD iff ``Y = X - x x'`` is, and
    the relaxed fixing reads ``0 <= Y_ii <= eta``.  The solve is carried out
    in ``Y / eta``, which is well scaled, and the dual slack ``S_Y`` maps back
    to the lifted certificate ``B' S_Y B`` with ``B = [I, -x]``.
    """
    x = np.asarray(x_fixed, float).reshape(-1)
    n = inst.n
    if x.size != n:
        raise ValueError(f"x_fixed has length {x.size}, expected {n}")
    if np.abs(x - np.round(x)).max() > 1e-9 or np.any((x < -1e-9) | (x > 1 + 1e-9)):
        raise ValueError("x_fixed must be binary")
    x = np.round(x)
    N = svec_dim(n)
    B = np.hstack([np.eye(n), -x[:, None]])
    base = inst.objective(x)

    rows = [_entry_row(N, i, i) for i in range(n)]
    hs = [1.0] * n
    quad = []  # (svec(A), scaled rhs) for  <A, Y'> <= rhs
    for con in inst.constraints:
        if con.is_linear:
            continue
        a = svec(con.A)
        room = (con.b - con.lhs(np.outer(x, x), x)) / eta
        slack = max(1.0, abs(con.b))
        quad.append((a, room + slack))
        if con.relation == "eq":
            quad.append((-a, slack - room))
    feasible = inst.is_feasible(x)
    if not feasible and not quad:
        return InnerResult(np.outer(x, x), np.inf, None, "primal_infeasible")

    if feasible:
        c = svec(inst.C)
        rows += [a for a, _ in quad]
        hs += [r for _, r in quad]
        G = np.vstack([np.array(rows), _psd_block(N)])
    else:
        # Elastic problem: smallest uniform violation tau of the quadratic rows.
        c = np.r_[np.zeros(N), 1.0]
        rows = [np.r_[a, 0.0] for a in rows] + [np.r_[a, -1.0] for a, _ in quad]
        hs += [r for _, r in quad]
        tau_row = np.zeros(N + 1)
        tau_row[-1] = -1.0
        rows.append(tau_row)
        hs.append(0.0)
        G = np.vstack([np.array(rows), _psd_block(N, 1)])
    cone = Cone(len(rows), 0, (n,))
    h = np.concatenate([hs, np.zeros(N)])
    res = solve_cone_lp(ConeLP(c, G, h, cone), deadline=deadline)
    S = None
    if res.status in ("optimal", "slow_progress", "iteration_limit"):
        S = B.T @ smat(cone.split(res.z)[2], n) @ B
    if feasible:
        return InnerResult(np.outer(x, x), base, S, res.status, base + eta * res.pcost, res)
    status = "primal_infeasible" if res.status == "optimal" else res.status
    return InnerResult(np.outer(x, x), np.inf, S, status, np.inf, res)


def solve_inner_isdp(inst, fixed: dict, *, eta: float = INNER_ETA, deadline=None) -> InnerResult:
    """SDP over ``X`` (``n x n``) with the entries in ``fixed`` pinned to
    within ``eta``; ``fixed`` maps ``(i, j)`` with ``i <= j`` to a value."""
    n = inst.n
    N = svec_dim(n)
    c = svec(inst.C)
    A_eq = np.array([svec(A) for A, _ in inst.equalities]).reshape(-1, N)
    b_eq = np.array([b for _, b in inst.equalities], float)
    fix_rows, fix_h = [], []
    for (i, j), val in sorted(fixed.items()):
        a = _entry_row(N, j, i)
        fix_rows += [a, -a]
        fix_h += [val + eta, eta - val]
    cone = Cone(len(fix_rows), 0, (n,))
    G = np.vstack([np.array(fix_rows).reshape(-1, N), _psd_block(N)])
    h = np.concatenate([fix_h, np.zeros(N)])
    res = solve_cone_lp(ConeLP(c, G, h, cone, A_eq, b_eq), deadline=deadline)
    if res.status != "primal_infeasible":
        S = smat(cone.split(res.z)[2], n)
        return InnerResult(smat(res.x, n), res.pcost, S, res.status, res.pcost, res)
    # Elastic: shift every fixing and equality by a common tau >= 0.
    nv = N + 1
    rows = [np.r_[a, -1.0] for a in fix_rows]
    rows += [np.r_[a, -1.0] for a in A_eq] + [np.r_[-a, -1.0] for a in A_eq]
    tau_row = np.zeros(nv)
    tau_row[-1] = -1.0
    rows.append(tau_row)
    hs = fix_h + list(b_eq) + list(-b_eq) + [0.0]
    cone = Cone(len(rows), 0, (n,))
    G = np.vstack([np.array(rows), _psd_block(N, 1)])
    h = np.concatenate([hs, np.zeros(N)])
    r2 = solve_cone_lp(ConeLP(np.r_[np.zeros(N), 1.0], G, h, cone), deadline=deadline)
    S = smat(cone.split(r2.z)[2], n) if r2.status == "optimal" else None
    return InnerResult(smat(res.x, n), np.inf, S, "primal_infeasible", np.inf, r2)


def extract_dual_certificate(sol) -> np.ndarray:
    """Unit-Frobenius PSD dual slack from a :class:`ConicSolution` or
    :class:`InnerResult` (optimal or primal-infeasible)."""
    status = sol.status
    if status not in ("optimal", "primal_infeasible"):
        raise CertificateError(f"no certificate from a solve with status {status!r}")
    if isinstance(sol, InnerResult):
        S = sol.S
    else:
        try:
            S = sol.psd_slack()
        except ValueError:
            S = None
    if S is None:
        raise CertificateError("solution carries no PSD block")
    S = 0.5 * (S + S.T)
    nrm = np.linalg.norm(S)
    if nrm == 0.0:
        raise CertificateError("certificate is zero")
    S = S / nrm
    lam = np.linalg.eigvalsh(S)[0]
    if lam < -CERT_PSD_TOL:
        raise CertificateError(f"certificate has eigenvalue {lam:.3g} below -{CERT_PSD_TOL:g}")
    return S
