import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specoa.cuts import CutPool, NoGoodCut
from specoa.instances import brute_force, gen_bls, gen_qkp
from specoa.model import BqcqpInstance, Constraint, bqcqp_to_bsdp
from specoa.oa import (
    OaLimits,
    OaState,
    anti_cycle_guard,
    continuous_relaxation,
    gap_test,
    run_lazy_soc,
    run_oa,
    run_oa_soc,
)

from conftest import all_binary, qkp, rel_close, sdp_relaxation

ALGOS = [run_oa, run_oa_soc, run_lazy_soc]
seeds = st.integers(min_value=0, max_value=2**32 - 1)


def _min_form(p, v):
    return -v if p.sense == "max" else v


def _scale(*vals):
    return max([1.0] + [abs(v) for v in vals if np.isfinite(v)])


# -- gap_test / anti_cycle_guard -------------------------------------------------------

def test_gap_test_examples():
    assert gap_test(3.0, 3.0, 1e-6)
    assert not gap_test(0.0, 1.0, 1e-6)
    assert gap_test(99.9999999, 100.0, 1e-6)


def test_gap_test_uses_unit_floor():
    assert gap_test(-5e-7, 0.0, 1e-6)
    assert not gap_test(-2e-6, 0.0, 1e-6)


def test_anti_cycle_guard():
    state = OaState(CutPool())
    x = np.array([1.0, 0.0, 1.0])
    assert anti_cycle_guard(state, x) is None
    assert (1, 0, 1) in state.seen
    cut = anti_cycle_guard(state, x)
    assert isinstance(cut, NoGoodCut)
    for y in all_binary(3):
        # the cut excludes exactly the repeated point
        assert (cut.value(y) >= 1) == (not np.array_equal(y, x))
    assert anti_cycle_guard(state, x, gap_closed=True) is None
    assert state.visits[(1, 0, 1)] == 3


# -- examples -----------------------------------------------------------------------

@pytest.mark.parametrize("algo", ALGOS)
def test_root_already_exact(algo):
    # separable objective, no constraints: the first master point is optimal
    p = BqcqpInstance.create(np.diag([-1.0, 2.0, -0.5]))
    rep = algo(p)
    assert rep.status == "optimal" and rep.iterations == 1
    assert rep.gap == 0.0 or rep.gap <= 1e-12
    assert rep.value == pytest.approx(-1.5, abs=1e-7)
    assert np.array_equal(rep.x, [1.0, 0.0, 1.0])


@pytest.mark.parametrize("algo", ALGOS)
def test_single_item_that_does_not_fit(algo):
    rep = algo(qkp([[5.0]], [1.0], 0.0))
    assert rep.status == "optimal"
    assert rep.value == pytest.approx(0.0, abs=1e-7)
    assert np.array_equal(rep.x, [0.0])


@pytest.mark.parametrize("algo", ALGOS)
def test_bls_n10_matches_enumeration(algo):
    p = gen_bls(10, 3, "normal", 5)
    rep = algo(p)
    assert rep.status == "optimal"
    assert rel_close(rep.value, brute_force(p).value, 1e-6)
    assert np.count_nonzero(rep.x) == 3


@pytest.mark.parametrize("algo", [run_oa_soc, run_lazy_soc])
def test_diagonal_qkp(algo):
    rng = np.random.default_rng(8)
    n = 8
    p = qkp(np.diag(rng.integers(1, 100, n).astype(float)), rng.integers(1, 50, n), 60.0)
    rep = algo(p)
    assert rep.status == "optimal"
    assert rel_close(rep.value, brute_force(p).value, 1e-6)
    assert rep.iterations <= 2


@pytest.mark.parametrize("algo", ALGOS)
def test_planted_dominant_item(algo):
    # item 0 is worth far more than anything else and fits alone
    n = 6
    C = np.ones((n, n))
    C[0, 0] = 1000.0
    w = np.r_[10.0, np.full(n - 1, 6.0)]
    p = qkp(C, w, 10.0)
    xs = np.r_[1.0, np.zeros(n - 1)]
    assert np.array_equal(brute_force(p).x, xs)
    rep = algo(p)
    assert np.array_equal(rep.x, xs)
    assert rep.value == pytest.approx(1000.0, rel=1e-6)


def test_lazy_adds_no_cuts_when_nodes_are_exact():
    p = BqcqpInstance.create(np.diag([-1.0, 2.0, -0.5]))
    rep = run_lazy_soc(p)
    seeded = run_lazy_soc(p).cuts
    assert rep.cuts == seeded
    # cut count is just the seeds: (n+1)^2 polyhedral plus n spectral
    assert rep.cuts == 16 + 3


@pytest.mark.parametrize("algo", ALGOS)
def test_infeasible_instance(algo):
    card = Constraint(np.zeros((3, 3)), np.ones(3), -1.0, "le")
    rep = algo(BqcqpInstance.create(np.eye(3), None, [card]))
    assert rep.status == "infeasible"
    assert rep.x is None


def test_argument_checks():
    p = BqcqpInstance.create(np.eye(2))
    with pytest.raises(ValueError):
        run_oa(p, eps=0.0)
    with pytest.raises(ValueError):
        run_oa(p, cut_mode="soc")
    with pytest.raises(ValueError):
        run_oa_soc(p, cut_mode="bogus")
    with pytest.raises(ValueError):
        run_lazy_soc(p, eps=-1.0)


def test_time_limit_report():
    rep = run_oa(gen_qkp(12, 0.8, 0), limits=OaLimits(time_limit=0.0))
    assert rep.status == "time_limit"
    assert rep.value == -np.inf         # max instance with no incumbent


def test_iteration_limit_report():
    rep = run_oa(gen_qkp(10, 0.8, 1), limits=OaLimits(max_iterations=1))
    assert rep.status in ("iteration_limit", "optimal")
    assert rep.iterations == 1


def test_report_dict():
    d = run_oa_soc(gen_bls(6, 2, "normal", 0)).as_dict()
    assert {"status", "value", "bound", "gap", "x", "iterations", "cuts", "nodes",
            "time_s", "algo"} <= set(d)
    assert d["algo"] == "oa_soc" and isinstance(d["x"], list)


# -- properties over seeded corpora ----------------------------------------------------

def _corpus(seed, n):
    kind = seed % 3
    if kind == 0:
        return gen_bls(n, min(3, n), "normal", seed)
    if kind == 1:
        return gen_bls(n, min(4, n), "binary", seed)
    return gen_qkp(n, 0.3 + 0.5 * (seed % 2), seed)


@settings(max_examples=12)
@given(seed=seeds, n=st.integers(2, 8), algo=st.sampled_from(ALGOS))
def test_sandwich_and_monotone_bounds(seed, n, algo):
    p = _corpus(seed, n)
    opt = _min_form(p, brute_force(p).value)
    rep = algo(p)
    assert rep.status == "optimal"
    assert rel_close(rep.value, brute_force(p).value, 1e-6)
    s = _scale(opt, *[r.ub for r in rep.records])
    lbs = np.array([r.lb for r in rep.records])
    ubs = np.array([r.ub for r in rep.records])
    assert np.all(np.diff(lbs[np.isfinite(lbs)]) >= -1e-9 * s)
    assert np.all(np.diff(ubs[np.isfinite(ubs)]) <= 1e-9 * s)
    for r in rep.records:
        assert r.lb <= r.ub + 1e-9 * s
        assert r.lb <= opt + 1e-6 * s
        assert r.ub >= opt - 1e-6 * s
        if np.isfinite(r.master_value):
            assert r.master_value <= opt + 1e-6 * s
        if np.isfinite(r.inner_value):
            assert r.inner_value >= opt - 1e-6 * s


@settings(max_examples=12)
@given(seed=seeds, n=st.integers(3, 8), soc=st.booleans())
def test_revisit_closes_gap(seed, n, soc):
    p = _corpus(seed, n)
    rep = (run_oa_soc if soc else run_oa)(p)
    s = _scale(*[r.ub for r in rep.records])
    prev = None
    for r in rep.records:
        if prev is not None and r.x is not None and r.x == prev.x:
            assert r.master_value >= prev.inner_value - 1e-6 * s
        prev = r


def test_anti_cycle_bounds_iterations():
    # every binary point is feasible; iterations cannot exceed 2^n + 1
    rng = np.random.default_rng(2)
    n = 4
    C = rng.standard_normal((n, n))
    p = BqcqpInstance.create(C + C.T, rng.standard_normal(n))
    for algo in (run_oa, run_oa_soc):
        rep = algo(p)
        assert rep.status == "optimal"
        assert rep.iterations <= 2**n + 1
        xs = [r.x for r in rep.records if r.x is not None]
        assert all(xs.count(k) <= 2 for k in set(xs))


@pytest.mark.parametrize("seed", range(3))
def test_algorithms_agree(seed):
    p = gen_qkp(10, 0.5, seed)
    vals = [algo(p).value for algo in ALGOS]
    assert all(rel_close(v, vals[0], 1e-6) for v in vals)


# -- continuous relaxation -----------------------------------------------------------

def test_relaxation_bounds_optimum():
    for p in (gen_bls(8, 3, "normal", 1), gen_qkp(8, 0.5, 1)):
        opt = _min_form(p, brute_force(p).value)
        plain = _min_form(p, continuous_relaxation(p, spectral=False))
        full = _min_form(p, continuous_relaxation(p))
        assert plain <= full + 1e-7 * _scale(plain)
        assert full <= opt + 1e-7 * _scale(opt)


def test_relaxation_dominated_by_sdp():
    # the SDP relaxation implies every cut, so it is at least as tight
    for p in (gen_bls(6, 2, "normal", 3), gen_qkp(6, 0.8, 3)):
        b = bqcqp_to_bsdp(p)
        relax = _min_form(p, continuous_relaxation(p))
        assert relax <= sdp_relaxation(b) + 1e-6 * _scale(relax)


def test_relaxation_exact_for_diagonal_family():
    rng = np.random.default_rng(0)
    n = 5
    C = np.diag(rng.standard_normal(n))
    A = np.diag(rng.uniform(0.5, 2.0, n))
    p = BqcqpInstance.create(C, rng.standard_normal(n), [Constraint(A, np.zeros(n), 2.0)])
    assert rel_close(continuous_relaxation(p), sdp_relaxation(bqcqp_to_bsdp(p)), 1e-6)
