import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from specoa.model import BqcqpInstance, Constraint

settings.register_profile(
    "default",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

# One summary line per acceptance criterion, printed at the end of the run.
CRITERIA: dict = {}


def record_criterion(number: int, passed: bool, detail: str, *, gated: bool = True) -> None:
    CRITERIA[number] = (passed, detail, gated)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        passed, detail, gated = CRITERIA[k]
        tag = "PASS" if passed else "FAIL"
        if not gated:
            tag += " (soft)"
        terminalreporter.write_line(f"criterion {k:2d}: {tag}  {detail}")


@pytest.fixture(autouse=True)
def _quiet_numpy():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        yield


def rel_close(a, b, rtol=1e-6) -> bool:
    return abs(a - b) <= rtol * max(1.0, abs(b))


def random_sym(rng, n, scale=1.0):
    A = rng.standard_normal((n, n)) * scale
    return 0.5 * (A + A.T)


def random_psd(rng, n, rank=None):
    rank = n if rank is None else rank
    P = rng.standard_normal((n, rank))
    return P @ P.T


def witness(rng, n, x=None, spread=1.0):
    """Feasible lifted point: binary ``x`` and ``X = xx' + PP'``."""
    if x is None:
        x = rng.integers(0, 2, n).astype(float)
    P = rng.standard_normal((n, int(rng.integers(0, n + 1)))) * spread
    X = np.outer(x, x) + P @ P.T
    M = np.empty((n + 1, n + 1))
    M[:n, :n] = X
    M[:n, n] = M[n, :n] = x
    M[n, n] = 1.0
    return X, x, M


def qkp(C, w, cap, name=""):
    C = np.asarray(C, float)
    n = C.shape[0]
    return BqcqpInstance.create(C, None, [Constraint(np.zeros((n, n)), w, cap, "le")],
                                sense="max", name=name)


def all_binary(n):
    k = np.arange(1 << n)
    return ((k[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(float)


def sdp_relaxation(b):
    """Shor relaxation of a lifted binary instance, solved by the conic engine.

    Variables are svec of the lifted matrix and one slack per inequality;
    returns the min-form value.
    """
    from specoa.conic import ConicProblem, solve_conic, svec

    n = b.n
    m = n + 1
    rows, rhs = [], []

    def lifted(A, d):
        L = np.zeros((m, m))
        L[:n, :n] = A
        L[:n, n] = L[n, :n] = 0.5 * np.asarray(d, float)
        return svec(L)

    corner = np.zeros((m, m))
    corner[n, n] = 1.0
    rows.append(svec(corner))
    rhs.append(1.0)
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        rows.append(lifted(np.diag(e), -e))
        rhs.append(0.0)
    ineq = [c for c in b.constraints if c.relation == "le"]
    for c in b.constraints:
        if c.relation == "eq":
            rows.append(lifted(c.A, c.d))
            rhs.append(c.b)
    for Drow, t in zip(b.D, b.t):
        rows.append(lifted(np.zeros((n, n)), 2.0 * Drow))
        rhs.append(t)
    k = len(ineq)
    A = np.zeros((len(rows) + k, svec(corner).size + k))
    for r, a in enumerate(rows):
        A[r, :a.size] = a
    for j, c in enumerate(ineq):
        a = lifted(c.A, c.d)
        A[len(rows) + j, :a.size] = a
        A[len(rows) + j, a.size + j] = 1.0
    rhs += [c.b for c in ineq]
    cost = np.r_[svec(b.lifted_objective()), np.zeros(k)]
    blocks = [("psd", m)] + ([("nonneg", k)] if k else [])
    sol = solve_conic(ConicProblem(blocks, cost, A, np.array(rhs)))
    assert sol.status == "optimal", sol.status
    return sol.pobj
