"""Reader and writer for the line-oriented BSDP1 instance format.

Example (quadratic knapsack with two items, maximization)::

    bsdp1 n=2 r=1 q=0 sense=max
    C 1 1 3
    C 1 2 1
    C 2 2 2
    con 1 d 1 1
    con 1 d 2 1
    con 1 rhs 2 le

Indices are 1-based; ``C`` and ``A`` entries are upper-triangle (``i <= j``)
with off-diagonal values being the matrix entry itself.  A file containing
``int i j lower upper`` lines (or ``kind=isdp`` in the header) describes a
general ISDP, whose ``con`` rows must be equalities.
"""
from __future__ import annotations

import re

import numpy as np

from .model import BqcqpInstance, Constraint, IntegerEntry, IsdpInstance

__all__ = [
    "ParseError",
    "HeaderError",
    "SyntaxFormatError",
    "IndexRangeError",
    "DimensionError",
    "RelationError",
    "DuplicateEntryError",
    "parse_instance",
    "emit_instance",
    "read_instance",
    "write_instance",
]


class ParseError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class HeaderError(ParseError):
    pass


class SyntaxFormatError(ParseError):
    pass


class IndexRangeError(ParseError):
    pass


class DimensionError(ParseError):
    pass


class RelationError(ParseError):
    pass


class DuplicateEntryError(ParseError):
    pass


_HEADER = re.compile(r"^bsdp1((?:\s+\w+=\S+)+)\s*$")


def _num(tok: str, line: int) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise SyntaxFormatError(f"not a number: {tok!r}", line) from None
    if not np.isfinite(v):
        raise SyntaxFormatError(f"non-finite value {tok!r}", line)
    return v


def _int(tok: str, line: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise SyntaxFormatError(f"not an integer: {tok!r}", line) from None


def _fmt(v: float) -> str:
    v = float(v)
    if v.is_integer() and abs(v) < 2**53:
        return str(int(v))
    return repr(v)


def _parse_header(text: str, line: int) -> dict:
    m = _HEADER.match(text)
    if not m:
        raise HeaderError("expected 'bsdp1 n=<int> r=<int> q=<int> sense=<min|max>'", line)
    fields = dict(kv.split("=", 1) for kv in m.group(1).split())
    out = {}
    for key in ("n", "r", "q"):
        if key not in fields:
            raise HeaderError(f"missing {key}=", line)
        try:
            out[key] = int(fields.pop(key))
        except ValueError:
            raise HeaderError(f"{key} must be an integer", line) from None
        if out[key] < 0 or (key == "n" and out[key] < 1):
            raise HeaderError(f"invalid {key}={out[key]}", line)
    out["sense"] = fields.pop("sense", None)
    if out["sense"] not in ("min", "max"):
        raise HeaderError("sense must be min or max", line)
    out["kind"] = fields.pop("kind", None)
    if out["kind"] not in (None, "bqcqp", "isdp"):
        raise HeaderError(f"unknown kind {out['kind']!r}", line)
    if fields:
        raise HeaderError(f"unknown header fields {sorted(fields)}", line)
    return out


class _Reader:
    def __init__(self, n: int, r: int, q: int):
        self.n, self.r, self.q = n, r, q
        self.C = np.zeros((n, n))
        self.d0 = np.zeros(n)
        self.A = [np.zeros((n, n)) for _ in range(r)]
        self.d = [np.zeros(n) for _ in range(r)]
        self.rhs: list = [None] * r
        self.D = np.zeros((q, n))
        self.t = np.zeros(q)
        self.ints: list[IntegerEntry] = []
        self.seen: set = set()
        self.linear_seen = False

    def once(self, key, line):
        if key in self.seen:
            raise DuplicateEntryError(f"duplicate entry {key}", line)
        self.seen.add(key)

    def index(self, tok, line, hi=None, what="index"):
        hi = self.n if hi is None else hi
        k = _int(tok, line)
        if not 1 <= k <= hi:
            raise IndexRangeError(f"{what} {k} out of range 1..{hi}", line)
        return k - 1

    def pair(self, ti, tj, line):
        i, j = self.index(ti, line), self.index(tj, line)
        if i > j:
            raise IndexRangeError(f"entry ({i + 1},{j + 1}) is below the diagonal; use i <= j", line)
        return i, j

    def need(self, toks, count, line):
        if len(toks) != count:
            raise SyntaxFormatError(f"expected {count} fields, got {len(toks)}", line)

    def feed(self, toks: list[str], line: int):
        tag = toks[0]
        if tag == "C":
            self.need(toks, 4, line)
            i, j = self.pair(toks[1], toks[2], line)
            self.once(("C", i, j), line)
            self.C[i, j] = self.C[j, i] = _num(toks[3], line)
        elif tag == "d0":
            self.need(toks, 3, line)
            i = self.index(toks[1], line)
            self.once(("d0", i), line)
            self.d0[i] = _num(toks[2], line)
            self.linear_seen = True
        elif tag == "con":
            if len(toks) < 3:
                raise SyntaxFormatError("truncated con line", line)
            k = self.index(toks[1], line, self.r, "constraint")
            kind = toks[2]
            if kind == "A":
                self.need(toks, 6, line)
                i, j = self.pair(toks[3], toks[4], line)
                self.once(("A", k, i, j), line)
                self.A[k][i, j] = self.A[k][j, i] = _num(toks[5], line)
            elif kind == "d":
                self.need(toks, 5, line)
                i = self.index(toks[3], line)
                self.once(("d", k, i), line)
                self.d[k][i] = _num(toks[4], line)
                self.linear_seen = True
            elif kind == "rhs":
                self.need(toks, 5, line)
                self.once(("rhs", k), line)
                if toks[4] not in ("le", "eq"):
                    raise RelationError(f"unknown relation {toks[4]!r}", line)
                self.rhs[k] = (_num(toks[3], line), toks[4], line)
            else:
                raise SyntaxFormatError(f"unknown con field {kind!r}", line)
        elif tag == "lin":
            self.need(toks, 4, line)
            row = self.index(toks[1], line, self.q, "row")
            i = self.index(toks[2], line)
            self.once(("lin", row, i), line)
            self.D[row, i] = _num(toks[3], line)
            self.linear_seen = True
        elif tag == "lint":
            self.need(toks, 3, line)
            row = self.index(toks[1], line, self.q, "row")
            self.once(("lint", row), line)
            self.t[row] = _num(toks[2], line)
            self.linear_seen = True
        elif tag == "int":
            self.need(toks, 5, line)
            i, j = self.pair(toks[1], toks[2], line)
            self.once(("int", i, j), line)
            lo, hi = _int(toks[3], line), _int(toks[4], line)
            if lo > hi:
                raise DimensionError(f"integer bounds {lo} > {hi}", line)
            self.ints.append(IntegerEntry(i, j, lo, hi))
        else:
            raise SyntaxFormatError(f"unknown record type {tag!r}", line)


def parse_instance(text: str) -> BqcqpInstance | IsdpInstance:
    header = None
    reader = None
    last = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        last = lineno
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        if header is None:
            header = _parse_header(body, lineno)
            reader = _Reader(header["n"], header["r"], header["q"])
            continue
        reader.feed(body.split(), lineno)
    if header is None:
        raise HeaderError("missing bsdp1 header", max(last, 1))
    for k, rhs in enumerate(reader.rhs):
        if rhs is None:
            raise DimensionError(f"constraint {k + 1} has no rhs line", last)
    isdp = header["kind"] == "isdp" or (header["kind"] is None and reader.ints)
    if isdp:
        if header["kind"] == "bqcqp":
            raise DimensionError("int lines are not allowed in a bqcqp instance", last)
        if reader.linear_seen or header["q"]:
            raise DimensionError("an ISDP has no x variables (d0/d/lin/lint, q>0)", last)
        if header["sense"] != "min":
            raise HeaderError("ISDP instances are minimization problems", 1)
        for b, rel, line in reader.rhs:
            if rel != "eq":
                raise RelationError("ISDP constraints must be equalities", line)
        eqs = [(reader.A[k], reader.rhs[k][0]) for k in range(header["r"])]
        return IsdpInstance(reader.C, tuple(eqs), tuple(reader.ints))
    cons = tuple(
        Constraint(reader.A[k], reader.d[k], reader.rhs[k][0], reader.rhs[k][1])
        for k in range(header["r"])
    )
    return BqcqpInstance.create(
        reader.C, reader.d0, cons, reader.D, reader.t, sense=header["sense"]
    )


def _upper(M, prefix: str):
    n = M.shape[0]
    for i in range(n):
        for j in range(i, n):
            if M[i, j] != 0.0:
                yield f"{prefix}{i + 1} {j + 1} {_fmt(M[i, j])}"


def emit_instance(inst) -> str:
    if isinstance(inst, IsdpInstance):
        lines = [f"bsdp1 n={inst.n} r={len(inst.equalities)} q=0 sense=min kind=isdp"]
        lines += _upper(inst.C, "C ")
        for k, (A, b) in enumerate(inst.equalities, start=1):
            lines += _upper(A, f"con {k} A ")
            lines.append(f"con {k} rhs {_fmt(b)} eq")
        for e in inst.integers:
            lines.append(f"int {e.i + 1} {e.j + 1} {e.lower} {e.upper}")
        return "\n".join(lines) + "\n"
    C, d0 = inst.user_data()
    lines = [f"bsdp1 n={inst.n} r={inst.r} q={inst.q} sense={inst.sense}"]
    if inst.name:
        lines.append(f"# {inst.name}")
    lines += _upper(C, "C ")
    lines += [f"d0 {i + 1} {_fmt(v)}" for i, v in enumerate(d0) if v != 0.0]
    for k, con in enumerate(inst.constraints, start=1):
        lines += _upper(con.A, f"con {k} A ")
        lines += [f"con {k} d {i + 1} {_fmt(v)}" for i, v in enumerate(con.d) if v != 0.0]
        lines.append(f"con {k} rhs {_fmt(con.b)} {con.relation}")
    for row in range(inst.q):
        lines += [f"lin {row + 1} {i + 1} {_fmt(v)}" for i, v in enumerate(inst.D[row]) if v != 0.0]
        lines.append(f"lint {row + 1} {_fmt(inst.t[row])}")
    return "\n".join(lines) + "\n"


def read_instance(path):
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh.read())


def write_instance(inst, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(emit_instance(inst))
