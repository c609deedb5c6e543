import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from specoa.bsdp1 import (
    DimensionError,
    DuplicateEntryError,
    HeaderError,
    IndexRangeError,
    ParseError,
    RelationError,
    SyntaxFormatError,
    emit_instance,
    parse_instance,
    read_instance,
    write_instance,
)
from specoa.instances import GeneratorSpec, gen_bls
from specoa.linalg import is_psd
from specoa.model import (
    BqcqpInstance,
    BsdpInstance,
    Constraint,
    IntegerEntry,
    IsdpInstance,
    LiftError,
    bqcqp_to_bsdp,
    lift,
    unlift,
)

from conftest import qkp, random_psd, random_sym

seeds = st.integers(min_value=0, max_value=2**32 - 1)


# -- reformulation ------------------------------------------------------------------

def test_qkp_becomes_min_form_bsdp():
    C = np.array([[3.0, 1.0], [1.0, 2.0]])
    p = qkp(C, [1.0, 1.0], 2.0)
    b = bqcqp_to_bsdp(p)
    assert isinstance(b, BsdpInstance)
    assert b.sense == "max"
    assert np.array_equal(b.C, -C)
    assert b.constraints[0].is_linear
    assert np.array_equal(b.constraints[0].d, [1.0, 1.0])
    x = np.array([1.0, 1.0])
    X = np.outer(x, x)
    assert b.sdp_objective(X, x) == pytest.approx(-7.0)
    assert b.user_value(b.sdp_objective(X, x)) == pytest.approx(7.0)


def test_bls_lifting_keeps_gram_objective():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((10, 6))
    card = Constraint(np.zeros((6, 6)), np.ones(6), 3.0, "eq")
    p = BqcqpInstance.create(A.T @ A, None, [card])
    b = bqcqp_to_bsdp(p)
    assert np.allclose(b.C, A.T @ A)
    assert np.array_equal(b.d0, np.zeros(6))
    assert b.sense == "min"


def test_unconstrained_lifting():
    b = bqcqp_to_bsdp(BqcqpInstance.create(np.eye(3)))
    assert b.r == 0 and b.q == 0


@given(seed=seeds, n=st.integers(1, 8))
def test_lifted_objective_matches_quadratic_form(seed, n):
    rng = np.random.default_rng(seed)
    p = BqcqpInstance.create(random_sym(rng, n), rng.standard_normal(n))
    b = bqcqp_to_bsdp(p)
    x = rng.integers(0, 2, n).astype(float)
    M = lift(np.outer(x, x), x)
    assert np.sum(b.lifted_objective() * M) == pytest.approx(p.objective(x), abs=1e-10)
    assert b.sdp_objective(np.outer(x, x), x) == pytest.approx(p.objective(x), abs=1e-10)


def test_instances_are_immutable():
    p = BqcqpInstance.create(np.eye(2))
    with pytest.raises(ValueError):
        p.C[0, 0] = 5.0


def test_isdp_validation():
    with pytest.raises(ValueError):
        IntegerEntry(1, 0, 0, 1)
    with pytest.raises(ValueError):
        IntegerEntry(0, 1, 2, 1)
    with pytest.raises(ValueError):
        IsdpInstance(np.eye(2), (), (IntegerEntry(0, 2, 0, 1),))


# -- lift / unlift ------------------------------------------------------------------

def test_lift_zero():
    M = lift(np.zeros((2, 2)), np.zeros(2))
    E = np.zeros((3, 3))
    E[2, 2] = 1.0
    assert np.array_equal(M, E)
    assert is_psd(M)


def test_lift_rank_one():
    x = np.array([1.0, 0.0])
    M = lift(np.outer(x, x), x)
    y = np.r_[x, 1.0]
    assert np.array_equal(M, np.outer(y, y))
    assert np.linalg.matrix_rank(M) == 1


def test_lift_not_psd():
    M = lift(np.zeros((2, 2)), np.array([1.0, 0.0]))
    minor = M[np.ix_([0, 2], [0, 2])]
    assert np.linalg.det(minor) == pytest.approx(-1.0)
    assert np.linalg.eigvalsh(M)[0] < 0
    assert not is_psd(M)


def test_unlift_rejects_bad_corner():
    M = np.eye(3)
    M[2, 2] = 1.1
    with pytest.raises(LiftError):
        unlift(M)
    with pytest.raises(LiftError):
        lift(np.eye(2), np.ones(3))


@given(seed=seeds, n=st.integers(1, 8))
def test_lift_round_trip(seed, n):
    rng = np.random.default_rng(seed)
    X, x = random_sym(rng, n), rng.standard_normal(n)
    X2, x2 = unlift(lift(X, x))
    assert np.array_equal(X2, X) and np.array_equal(x2, x)


@given(seed=seeds, n=st.integers(1, 6), shift=st.floats(-1.0, 1.0))
def test_schur_complement(seed, n, shift):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    Y = random_psd(rng, n) + shift * np.eye(n)
    lam_y = np.linalg.eigvalsh(Y)[0]
    if abs(lam_y) < 1e-6:
        return
    M = lift(np.outer(x, x) + Y, x)
    assert (np.linalg.eigvalsh(M)[0] >= -1e-9) == (lam_y >= 0)


@given(seed=seeds, n=st.integers(1, 8))
def test_binary_witness_is_feasible(seed, n):
    x = np.random.default_rng(seed).integers(0, 2, n).astype(float)
    X = np.outer(x, x)
    assert is_psd(lift(X, x))
    assert np.array_equal(np.diag(X), x)


# -- BSDP1 format ---------------------------------------------------------------------

QKP2 = """bsdp1 n=2 r=1 q=0 sense=max
C 1 1 3
C 1 2 1
C 2 2 2
con 1 d 1 1
con 1 d 2 1
con 1 rhs 2 le
"""


def test_parse_documented_example():
    p = parse_instance(QKP2)
    assert isinstance(p, BqcqpInstance)
    assert p.sense == "max"
    C, _ = p.user_data()
    assert np.array_equal(C, [[3.0, 1.0], [1.0, 2.0]])
    assert p.constraints[0].b == 2.0 and p.constraints[0].relation == "le"


def test_empty_constraint_section():
    p = parse_instance("bsdp1 n=2 r=0 q=0 sense=min\nC 1 1 1\n")
    assert p.r == 0


def test_qkp_round_trip():
    p = qkp([[3.0, 1.0], [1.0, 2.0]], [1.0, 1.0], 2.0)
    assert parse_instance(emit_instance(p)) == p


def test_index_out_of_range_reports_line():
    text = "bsdp1 n=3 r=0 q=0 sense=min\nC 1 1 2\n# comment\nC 1 4 5\n"
    with pytest.raises(IndexRangeError) as info:
        parse_instance(text)
    assert info.value.line == 4


@pytest.mark.parametrize("text, error, line", [
    ("bsdp n=2 r=0 q=0 sense=min\n", HeaderError, 1),
    ("bsdp1 n=2 r=0 sense=min\n", HeaderError, 1),
    ("bsdp1 n=2 r=0 q=0 sense=up\n", HeaderError, 1),
    ("bsdp1 n=2 r=1 q=0 sense=min\ncon 1 rhs 1 ge\n", RelationError, 2),
    ("bsdp1 n=2 r=0 q=0 sense=min\nC 1 1 1\nC 1 1 2\n", DuplicateEntryError, 3),
    ("bsdp1 n=2 r=0 q=0 sense=min\nC 2 1 1\n", IndexRangeError, 2),
    ("bsdp1 n=2 r=1 q=0 sense=min\ncon 2 rhs 1 le\n", IndexRangeError, 2),
    ("bsdp1 n=2 r=1 q=0 sense=min\nC 1 1 1\n", DimensionError, 2),
    ("bsdp1 n=2 r=0 q=0 sense=min\nC 1 1 one\n", SyntaxFormatError, 2),
    ("bsdp1 n=2 r=0 q=0 sense=min\nfoo 1\n", SyntaxFormatError, 2),
    ("bsdp1 n=2 r=0 q=0 sense=min\nC 1 1\n", SyntaxFormatError, 2),
])
def test_parse_errors(text, error, line):
    with pytest.raises(error) as info:
        parse_instance(text)
    assert isinstance(info.value, ParseError)
    assert info.value.line == line


def test_error_kinds_are_distinct():
    kinds = {HeaderError, SyntaxFormatError, IndexRangeError, DimensionError,
             RelationError, DuplicateEntryError}
    assert len(kinds) == 6
    assert all(issubclass(k, ParseError) for k in kinds)


@given(seed=seeds, n=st.integers(1, 6), r=st.integers(0, 3), q=st.integers(0, 2),
       sense=st.sampled_from(["min", "max"]))
def test_round_trip_exact_floats(seed, n, r, q, sense):
    rng = np.random.default_rng(seed)
    cons = []
    for _ in range(r):
        A = random_sym(rng, n) * (rng.random() < 0.7)
        d = rng.standard_normal(n) * 1e3 ** rng.uniform(-1, 1)
        cons.append(Constraint(A, d, float(rng.standard_normal()), rng.choice(["le", "eq"])))
    D = rng.standard_normal((q, n))
    t = rng.standard_normal(q)
    p = BqcqpInstance.create(random_sym(rng, n) / 3.0, rng.standard_normal(n) / 7.0,
                             cons, D, t, sense=sense)
    p2 = parse_instance(emit_instance(p))
    assert p2 == p
    assert emit_instance(p2) == emit_instance(p)


def test_seeded_corpus_round_trip(tmp_path):
    specs = [GeneratorSpec(f, n, prm, s)
             for s in range(10)
             for f, n, prm in [("bls_normal", 8, 3), ("bls_binary", 10, 4), ("qkp", 8, 0.3),
                               ("qkp", 12, 0.8), ("bls_normal", 5, 2)]]
    assert len(specs) == 50
    for spec in specs:
        p = spec.generate()
        path = tmp_path / f"{spec.name}.bsdp1"
        write_instance(p, path)
        assert read_instance(path) == p


def test_isdp_round_trip():
    A = np.array([[1.0, 0.5], [0.5, 0.0]])
    inst = IsdpInstance(np.diag([1.0, 2.0]), ((A, 1.0), (np.eye(2), 3.0)),
                        (IntegerEntry(0, 1, -2, 2), IntegerEntry(1, 1, 0, 5)))
    back = parse_instance(emit_instance(inst))
    assert isinstance(back, IsdpInstance)
    assert back == inst


def test_isdp_rejects_inequalities():
    text = "bsdp1 n=2 r=1 q=0 sense=min\nC 1 1 1\ncon 1 rhs 1 le\nint 1 2 0 1\n"
    with pytest.raises(RelationError):
        parse_instance(text)


def test_scientific_notation_and_comments():
    text = "bsdp1 n=1 r=0 q=0 sense=min  # header\nC 1 1 -2.5e-3 # entry\nd0 1 1E2\n"
    p = parse_instance(text)
    assert p.C[0, 0] == -2.5e-3 and p.d0[0] == 100.0


def test_bls_generator_file_is_stable():
    p = gen_bls(6, 2, "normal", 9)
    assert emit_instance(p) == emit_instance(gen_bls(6, 2, "normal", 9))
