"""Sparse linear algebra over the rationals.

Matrices are stored as an int64 CSR numerator together with one positive
integer denominator, so products and Kronecker products run through
scipy.sparse while staying exact.  Row reduction, ranks and kernels are done
with gmpy2 rationals on sparse dict vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

try:
    from gmpy2 import mpq
except ImportError:  # pragma: no cover
    mpq = Fraction

# Products whose entries could exceed this bound are refused rather than
# silently wrapping in int64.
_INT_BOUND = 2**62

Vector = dict  # sparse vector: index -> rational


def q(x) -> "mpq":
    """Coerce an int, Fraction, mpq or "p/q" string into an exact rational."""
    if isinstance(x, str):
        return mpq(Fraction(x))
    if isinstance(x, float):
        raise TypeError("floats are not accepted in exact contexts")
    if isinstance(x, Fraction):
        return mpq(x.numerator, x.denominator)
    return mpq(x)


def to_fraction(x) -> Fraction:
    return Fraction(int(x.numerator), int(x.denominator))


def format_rational(x) -> str:
    x = to_fraction(q(x))
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


class ShapeError(ValueError):
    """Raised when linear maps or vectors have incompatible shapes."""


def _normalize(num: sp.csr_matrix, den: int) -> tuple[sp.csr_matrix, int]:
    num = num.tocsr()
    num.eliminate_zeros()
    num.sort_indices()
    if num.nnz == 0:
        return num, 1
    g = int(np.gcd.reduce(np.abs(num.data)))
    g = math.gcd(g, den)
    if g > 1:
        num = sp.csr_matrix((num.data // g, num.indices, num.indptr), shape=num.shape)
        den //= g
    return num, den


@dataclass(frozen=True, eq=False)
class LinearMap:
    """Exact rational matrix ``num / den`` with optional space descriptors."""

    rows: int
    cols: int
    num: sp.csr_matrix
    den: int = 1
    domain: str = ""
    codomain: str = ""

    def __post_init__(self):
        if self.num.shape != (self.rows, self.cols):
            raise ShapeError(f"numerator shape {self.num.shape} != {(self.rows, self.cols)}")
        if self.den <= 0:
            raise ValueError("denominator must be positive")

    # -- construction -------------------------------------------------
    @classmethod
    def from_entries(cls, rows: int, cols: int, entries: Mapping[tuple[int, int], object],
                     domain: str = "", codomain: str = "") -> "LinearMap":
        vals = {}
        for (r, c), x in entries.items():
            if not (0 <= r < rows and 0 <= c < cols):
                raise ShapeError(f"entry {(r, c)} outside {rows}x{cols}")
            x = q(x)
            if x:
                vals[r, c] = x
        den = 1
        for x in vals.values():
            den = den * int(x.denominator) // math.gcd(den, int(x.denominator))
        rr, cc, dd = [], [], []
        for (r, c), x in vals.items():
            n = int(x.numerator) * (den // int(x.denominator))
            if abs(n) >= _INT_BOUND:
                raise ArithmeticError("entry too large for the int64 numerator store")
            rr.append(r)
            cc.append(c)
            dd.append(n)
        num = sp.csr_matrix((np.array(dd, dtype=np.int64), (rr, cc)), shape=(rows, cols))
        num, den = _normalize(num, den)
        return cls(rows, cols, num, den, domain, codomain)

    @classmethod
    def from_int(cls, num, den: int = 1, domain: str = "", codomain: str = "") -> "LinearMap":
        num = sp.csr_matrix(num, dtype=np.int64)
        num, den = _normalize(num, int(den))
        return cls(num.shape[0], num.shape[1], num, den, domain, codomain)

    @classmethod
    def zero(cls, rows: int, cols: int, domain: str = "", codomain: str = "") -> "LinearMap":
        return cls(rows, cols, sp.csr_matrix((rows, cols), dtype=np.int64), 1, domain, codomain)

    @classmethod
    def identity(cls, n: int, tag: str = "") -> "LinearMap":
        return cls(n, n, sp.identity(n, dtype=np.int64, format="csr"), 1, tag, tag)

    # -- inspection ---------------------------------------------------
    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def nnz(self) -> int:
        return int(self.num.nnz)

    @property
    def entries(self) -> dict[tuple[int, int], Fraction]:
        coo = self.num.tocoo()
        return {(int(r), int(c)): Fraction(int(v), self.den)
                for r, c, v in zip(coo.row, coo.col, coo.data)}

    def entry(self, r: int, c: int) -> Fraction:
        return Fraction(int(self.num[r, c]), self.den)

    def is_zero(self) -> bool:
        return self.num.nnz == 0

    def max_abs(self) -> int:
        return int(np.abs(self.num.data).max()) if self.num.nnz else 0

    def to_dense(self) -> list[list[Fraction]]:
        dense = self.num.toarray()
        return [[Fraction(int(v), self.den) for v in row] for row in dense]

    def column(self, j: int) -> Vector:
        csc = self._csc()
        lo, hi = csc.indptr[j], csc.indptr[j + 1]
        return {int(i): mpq(int(v), self.den) for i, v in zip(csc.indices[lo:hi], csc.data[lo:hi])}

    def columns(self) -> list[Vector]:
        csc = self._csc()
        out = []
        for j in range(self.cols):
            lo, hi = csc.indptr[j], csc.indptr[j + 1]
            out.append({int(i): mpq(int(v), self.den)
                        for i, v in zip(csc.indices[lo:hi], csc.data[lo:hi])})
        return out

    def row_vectors(self) -> list[Vector]:
        m = self.num
        out = []
        for i in range(self.rows):
            lo, hi = m.indptr[i], m.indptr[i + 1]
            out.append({int(j): mpq(int(v), self.den) for j, v in zip(m.indices[lo:hi], m.data[lo:hi])})
        return out

    def _csc(self):
        return self.num.tocsc()

    # -- arithmetic ---------------------------------------------------
    def __eq__(self, other) -> bool:
        if not isinstance(other, LinearMap) or self.shape != other.shape:
            return NotImplemented if not isinstance(other, LinearMap) else False
        return (self.num != other.num).nnz == 0 and self.den == other.den

    __hash__ = None

    def __neg__(self) -> "LinearMap":
        return LinearMap(self.rows, self.cols, -self.num, self.den, self.domain, self.codomain)

    def _common(self, other: "LinearMap"):
        if self.shape != other.shape:
            raise ShapeError(f"cannot add {self.shape} and {other.shape}")
        den = self.den * other.den // math.gcd(self.den, other.den)
        a, b = den // self.den, den // other.den
        bound = self.max_abs() * a + other.max_abs() * b
        if bound >= _INT_BOUND:
            raise ArithmeticError("sum exceeds int64 numerator store")
        return self.num * a, other.num * b, den

    def __add__(self, other: "LinearMap") -> "LinearMap":
        x, y, den = self._common(other)
        num, den = _normalize(x + y, den)
        return LinearMap(self.rows, self.cols, num, den, self.domain or other.domain,
                         self.codomain or other.codomain)

    def __sub__(self, other: "LinearMap") -> "LinearMap":
        return self + (-other)

    def scale(self, c) -> "LinearMap":
        c = q(c)
        n, d = int(c.numerator), int(c.denominator)
        if self.max_abs() * abs(n) >= _INT_BOUND:
            raise ArithmeticError("scaling exceeds int64 numerator store")
        num, den = _normalize(self.num * n, self.den * d)
        return LinearMap(self.rows, self.cols, num, den, self.domain, self.codomain)

    def __matmul__(self, other: "LinearMap") -> "LinearMap":
        """Composition ``self ∘ other``."""
        if self.cols != other.rows:
            raise ShapeError(f"cannot compose {self.shape} after {other.shape}")
        if self.domain and other.codomain and self.domain != other.codomain:
            raise ShapeError(f"space mismatch: {self.domain!r} vs {other.codomain!r}")
        inner = min(self.cols, _max_row_nnz(self.num), _max_col_nnz(other.num)) or 1
        if self.max_abs() * other.max_abs() * inner >= _INT_BOUND:
            raise ArithmeticError("product exceeds int64 numerator store")
        num, den = _normalize(self.num @ other.num, self.den * other.den)
        return LinearMap(self.rows, other.cols, num, den, other.domain, self.codomain)

    @property
    def T(self) -> "LinearMap":
        return LinearMap(self.cols, self.rows, self.num.T.tocsr(), self.den, self.codomain, self.domain)

    def apply(self, vec: Mapping[int, object]) -> Vector:
        out: Vector = {}
        csc = self._csc()
        for j, x in vec.items():
            lo, hi = csc.indptr[j], csc.indptr[j + 1]
            for i, v in zip(csc.indices[lo:hi], csc.data[lo:hi]):
                i = int(i)
                y = out.get(i, 0) + x * mpq(int(v), self.den)
                if y:
                    out[i] = y
                else:
                    out.pop(i, None)
        return out

    def with_tags(self, domain: str, codomain: str) -> "LinearMap":
        return LinearMap(self.rows, self.cols, self.num, self.den, domain, codomain)


def _max_row_nnz(m: sp.csr_matrix) -> int:
    return int(np.diff(m.indptr).max()) if m.shape[0] else 0


def _max_col_nnz(m: sp.csr_matrix) -> int:
    return _max_row_nnz(m.tocsc().T.tocsr()) if m.shape[1] else 0


# interface name used for maps between cochain spaces
LinearMapData = LinearMap


def kron(a: LinearMap, b: LinearMap) -> LinearMap:
    if a.max_abs() * b.max_abs() >= _INT_BOUND:
        raise ArithmeticError("Kronecker product exceeds int64 numerator store")
    num = sp.kron(a.num, b.num, format="csr").astype(np.int64)
    num, den = _normalize(num, a.den * b.den)
    return LinearMap(num.shape[0], num.shape[1], num, den)


def block(blocks: list[list[LinearMap | None]], row_dims: list[int], col_dims: list[int]) -> LinearMap:
    """Assemble a block matrix; ``None`` blocks are zero."""
    den = 1
    for row in blocks:
        for m in row:
            if m is not None:
                den = den * m.den // math.gcd(den, m.den)
    grid = []
    for i, row in enumerate(blocks):
        line = []
        for j, m in enumerate(row):
            if m is None:
                line.append(sp.csr_matrix((row_dims[i], col_dims[j]), dtype=np.int64))
            else:
                if m.shape != (row_dims[i], col_dims[j]):
                    raise ShapeError(f"block ({i},{j}) has shape {m.shape}")
                f = den // m.den
                if m.max_abs() * f >= _INT_BOUND:
                    raise ArithmeticError("block assembly exceeds int64 numerator store")
                line.append(m.num * f)
        grid.append(line)
    rows, cols = sum(row_dims), sum(col_dims)
    if rows == 0 or cols == 0:
        return LinearMap.zero(rows, cols)
    num = sp.bmat(grid, format="csr").astype(np.int64)
    num, den = _normalize(num, den)
    return LinearMap(rows, cols, num, den)


def direct_sum(maps: Iterable[LinearMap]) -> LinearMap:
    maps = list(maps)
    n = len(maps)
    grid = [[maps[i] if i == j else None for j in range(n)] for i in range(n)]
    return block(grid, [m.rows for m in maps], [m.cols for m in maps])


# -- row reduction -------------------------------------------------------

def _axpy(v: Vector, a, p: Mapping) -> None:
    """v -= a * p, in place, dropping zeros."""
    for k, x in p.items():
        y = v.get(k, 0) - a * x
        if y:
            v[k] = y
        else:
            v.pop(k, None)


class Echelon:
    """Incrementally built echelon basis of a subspace of Q^N.

    Every stored row is normalized to 1 at its pivot, the leftmost nonzero
    coordinate.  With ``track=True`` each row also carries a tag vector
    recording it as a combination of the inserted generators.
    """

    def __init__(self, track: bool = False):
        self.track = track
        self._rows: dict[int, Vector] = {}
        self._tags: dict[int, Vector] = {}

    def __len__(self) -> int:
        return len(self._rows)

    @property
    def pivots(self) -> list[int]:
        return sorted(self._rows)

    def row(self, pivot: int) -> Vector:
        return self._rows[pivot]

    def tag(self, pivot: int) -> Vector:
        return self._tags[pivot]

    def reduce(self, vec: Mapping, tag: Mapping | None = None) -> tuple[Vector, Vector]:
        v = {k: q(x) for k, x in vec.items() if x}
        t = {k: q(x) for k, x in tag.items() if x} if tag is not None else {}
        rows, tags = self._rows, self._tags
        while v:
            c = min(v)
            p = rows.get(c)
            if p is None:
                break
            a = v[c]
            _axpy(v, a, p)
            if self.track:
                _axpy(t, a, tags[c])
        return v, t

    def insert(self, vec: Mapping, tag: Mapping | None = None) -> int | None:
        """Add a vector; return its new pivot, or None if it was dependent."""
        v, t = self.reduce(vec, tag)
        if not v:
            return None
        c = min(v)
        inv = 1 / v[c]
        self._rows[c] = {k: x * inv for k, x in v.items()}
        if self.track:
            self._tags[c] = {k: x * inv for k, x in t.items()}
        return c

    def contains(self, vec: Mapping) -> bool:
        return not self.reduce(vec)[0]


def rank(m: LinearMap) -> int:
    if m.rows == 0 or m.cols == 0 or m.nnz == 0:
        return 0
    vectors = m.row_vectors() if m.rows <= m.cols else m.columns()
    ech = Echelon()
    for v in vectors:
        if v:
            ech.insert(v)
    return len(ech)


def kernel(m: LinearMap) -> list[Vector]:
    """Basis of the null space, one vector per dependent column (in order)."""
    ech = Echelon(track=True)
    out = []
    for j, col in enumerate(m.columns()):
        res, t = ech.reduce(col, {j: 1})
        if res:
            _store(ech, res, t)
        else:
            out.append(t)
    return out


def _store(ech: Echelon, v: Vector, t: Vector) -> None:
    # v is already reduced against ech
    c = min(v)
    inv = 1 / v[c]
    ech._rows[c] = {k: x * inv for k, x in v.items()}
    ech._tags[c] = {k: x * inv for k, x in t.items()}


def image_echelon(m: LinearMap, track: bool = False) -> Echelon:
    ech = Echelon(track=track)
    for j, col in enumerate(m.columns()):
        if col:
            ech.insert(col, {j: 1} if track else None)
    return ech


def vec_add(a: Mapping, b: Mapping, scale=1) -> Vector:
    out = dict(a)
    _axpy(out, -q(scale), b)
    return out


def vec_shift(v: Mapping, offset: int) -> Vector:
    return {k + offset: x for k, x in v.items()}


def vectors_independent(vectors: Iterable[Mapping]) -> bool:
    ech = Echelon()
    for v in vectors:
        if ech.insert(v) is None:
            return False
    return True
