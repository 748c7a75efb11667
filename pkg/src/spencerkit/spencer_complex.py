"""Symmetric powers, the Spencer operator, Chevalley-Eilenberg complexes and their cohomology."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations, combinations_with_replacement
from math import comb

from .errors import InputError, InvariantViolation, UnsupportedAlgebraError
from .exact import Echelon, LinearMap, ShapeError, block, image_echelon, kernel, q, rank
from .liealg import LieAlgebraData, killing_dual_basis, killing_form

PAIRING_MODES = ("raw", "killing_dual")


@dataclass(frozen=True)
class SymBasis:
    """Monomial basis of Sym^k: sorted index multisets in lexicographic order."""

    dim: int
    k: int
    elements: tuple[tuple[int, ...], ...]

    @cached_property
    def index(self) -> dict[tuple[int, ...], int]:
        return {m: i for i, m in enumerate(self.elements)}

    def __len__(self) -> int:
        return len(self.elements)


def sym_power_basis(alg: LieAlgebraData | int, k: int) -> SymBasis:
    if k < 0:
        raise InputError("symmetric degree must be nonnegative")
    dim = alg if isinstance(alg, int) else alg.dim
    return SymBasis(dim, k, tuple(combinations_with_replacement(range(dim), k)))


def sym_dim(dim: int, k: int) -> int:
    return comb(dim + k - 1, k)


@dataclass(frozen=True)
class CochainComplexData:
    """Graded spaces ``dims`` with differentials ``d_q: dims[q] -> dims[q+1]``."""

    dims: tuple[int, ...]
    differentials: tuple[LinearMap, ...]

    def __post_init__(self):
        if len(self.differentials) != max(len(self.dims) - 1, 0):
            raise ShapeError("need exactly one differential between consecutive degrees")
        for qd, d in enumerate(self.differentials):
            if d.shape != (self.dims[qd + 1], self.dims[qd]):
                raise ShapeError(f"d_{qd} has shape {d.shape}, expected {(self.dims[qd + 1], self.dims[qd])}")

    @classmethod
    def build(cls, dims, differentials) -> "CochainComplexData":
        return cls(tuple(int(x) for x in dims), tuple(differentials))

    @property
    def euler(self) -> int:
        return sum((-1) ** i * d for i, d in enumerate(self.dims))


# -- the Spencer operator ----------------------------------------------------

def _pairing_vectors(alg: LieAlgebraData, pairing_mode: str) -> list[dict[int, object]]:
    if pairing_mode == "raw":
        return [{i: 1} for i in range(alg.dim)]
    if pairing_mode == "killing_dual":
        inv = killing_dual_basis(alg)
        return [{a: x for a, x in enumerate(row) if x} for row in inv]
    raise InputError(f"pairing_mode must be one of {PAIRING_MODES}, got {pairing_mode!r}")


def default_pairing(alg: LieAlgebraData) -> str:
    """killing_dual when the Killing form is nondegenerate, raw otherwise."""
    return "raw" if killing_form(alg).degenerate else "killing_dual"


def spencer_differential(alg: LieAlgebraData, k: int, pairing_mode: str = "killing_dual") -> LinearMap:
    """Matrix of X_1...X_k -> sum_i sum_j e'_i . X_1 ... [e_i, X_j] ... X_k  (Sym^k -> Sym^{k+1}).

    ``e'_i`` is e_i itself in raw mode and the Killing-dual of e_i otherwise.
    """
    if pairing_mode == "killing_dual" and killing_form(alg).degenerate:
        raise UnsupportedAlgebraError("killing_dual pairing needs a nondegenerate Killing form")
    pair = _pairing_vectors(alg, pairing_mode)
    src, dst = sym_power_basis(alg, k), sym_power_basis(alg, k + 1)
    c = alg.c
    entries: dict[tuple[int, int], object] = {}
    for col, m in enumerate(src.elements):
        for j, a in enumerate(m):
            rest = m[:j] + m[j + 1:]
            for i in range(alg.dim):
                for l, cl in enumerate(c[i][a]):
                    if not cl:
                        continue
                    for b, w in pair[i].items():
                        row = dst.index[tuple(sorted(rest + (l, b)))]
                        entries[row, col] = entries.get((row, col), 0) + q(cl) * q(w)
    return LinearMap.from_entries(len(dst), len(src), entries, f"Sym^{k}", f"Sym^{k + 1}")


def spencer_differential_oracle(alg: LieAlgebraData, k: int, pairing_mode: str = "killing_dual"):
    """Same operator computed on sympy polynomials; used as an independent check.

    Sym(g) is identified with polynomials in x_0..x_{n-1}; the inner sum over
    j is the adjoint action of e_i acting as a derivation.
    """
    import sympy

    xs = sympy.symbols(f"x0:{alg.dim}")
    pair = _pairing_vectors(alg, pairing_mode)
    c = alg.c

    def delta(poly):
        total = 0
        for i in range(alg.dim):
            deriv = sum(sympy.diff(poly, xs[l]) * sum(sympy.Rational(c[i][l][m]) * xs[m] for m in range(alg.dim))
                        for l in range(alg.dim))
            left = sum(sympy.Rational(q(w).numerator, q(w).denominator) * xs[b] for b, w in pair[i].items())
            total += left * deriv
        return sympy.expand(total)

    src, dst = sym_power_basis(alg, k), sym_power_basis(alg, k + 1)
    return _poly_matrix(xs, src, dst, delta)


def _poly_matrix(xs, src: SymBasis, dst: SymBasis, op) -> LinearMap:
    import sympy
    from fractions import Fraction

    entries = {}
    for col, m in enumerate(src.elements):
        mono = sympy.Mul(*[xs[a] for a in m]) if m else sympy.Integer(1)
        image = op(mono)
        if image == 0:
            continue
        for exps, coeff in sympy.Poly(image, *xs).terms():
            key = tuple(a for a, e in enumerate(exps) for _ in range(e))
            entries[dst.index[key], col] = Fraction(int(coeff.p), int(coeff.q))
    return LinearMap.from_entries(len(dst), len(src), entries)


@dataclass
class NilpotencyReport:
    failing_degrees: list[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failing_degrees

    @property
    def max_failing_degree(self) -> int | None:
        return max(self.failing_degrees) if self.failing_degrees else None


def nilpotency_check(maps, start: int = 0) -> NilpotencyReport:
    """Check d_{q+1} o d_q = 0 for consecutive maps; ``maps[i]`` is d_{start+i}."""
    rep = NilpotencyReport()
    maps = list(maps)
    for i in range(len(maps) - 1):
        a, b = maps[i], maps[i + 1]
        if b.cols != a.rows:
            raise InputError(f"d_{start + i + 1} cannot follow d_{start + i}: shapes {b.shape} after {a.shape}")
        if not (b @ a).is_zero():
            rep.failing_degrees.append(start + i)
    return rep


def spencer_chain(alg: LieAlgebraData, kmax: int, pairing_mode: str = "killing_dual") -> list[LinearMap]:
    """delta on Sym^0 -> Sym^1 -> ... -> Sym^kmax (the last map lands in Sym^kmax)."""
    return [spencer_differential(alg, k, pairing_mode) for k in range(kmax)]


@dataclass
class SpencerNilpotencyFinding:
    algebra: str
    pairing_mode: str
    kmax: int
    matrix_failures: list[int]
    oracle_failures: list[int]

    @property
    def verdict(self) -> str:
        if self.matrix_failures != self.oracle_failures:
            return "implementation bug"
        return "holds" if not self.matrix_failures else "paper claim violated"

    def as_dict(self) -> dict:
        return {"algebra": self.algebra, "pairing_mode": self.pairing_mode, "kmax": self.kmax,
                "matrix_failures": self.matrix_failures, "oracle_failures": self.oracle_failures,
                "verdict": self.verdict}


def spencer_nilpotency_finding(alg: LieAlgebraData, kmax: int, pairing_mode: str) -> SpencerNilpotencyFinding:
    """Compare delta^2 = 0 on Sym^1..Sym^kmax by matrices and by polynomial algebra."""
    mats = [spencer_differential(alg, k, pairing_mode) for k in range(1, kmax + 1)]
    oracle = [spencer_differential_oracle(alg, k, pairing_mode) for k in range(1, kmax + 1)]
    return SpencerNilpotencyFinding(alg.name, pairing_mode, kmax,
                                    nilpotency_check(mats, start=1).failing_degrees,
                                    nilpotency_check(oracle, start=1).failing_degrees)


# -- Chevalley-Eilenberg complexes -------------------------------------------

def sym_action(alg: LieAlgebraData, i: int, k: int, dual: bool = False) -> LinearMap:
    """Action of e_i on Sym^k(g) (adjoint) or Sym^k(g*) (coadjoint), as a derivation."""
    basis = sym_power_basis(alg, k)
    c, d = alg.c, alg.dim
    entries: dict[tuple[int, int], object] = {}
    for col, m in enumerate(basis.elements):
        for j, a in enumerate(m):
            rest = m[:j] + m[j + 1:]
            if dual:
                image = {b: -c[i][b][a] for b in range(d) if c[i][b][a]}
            else:
                image = {l: c[i][a][l] for l in range(d) if c[i][a][l]}
            for l, v in image.items():
                row = basis.index[tuple(sorted(rest + (l,)))]
                entries[row, col] = entries.get((row, col), 0) + q(v)
    return LinearMap.from_entries(len(basis), len(basis), entries)


def ce_differential(alg: LieAlgebraData, qdeg: int, k: int, dual: bool = False,
                    actions: list[LinearMap] | None = None) -> LinearMap:
    """Chevalley-Eilenberg coboundary Lambda^q g* (x) V -> Lambda^{q+1} g* (x) V, V = Sym^k."""
    d = alg.dim
    if actions is None:
        actions = [sym_action(alg, i, k, dual) for i in range(d)]
    nS = sym_dim(d, k)
    src = list(combinations(range(d), qdeg))
    dst = list(combinations(range(d), qdeg + 1))
    src_index = {I: n for n, I in enumerate(src)}
    entries: dict[tuple[int, int], object] = {}

    def add(rowblock, colblock, s, v=None):
        r0, c0 = rowblock * nS, colblock * nS
        if v is None:
            for t in range(nS):
                key = (r0 + t, c0 + t)
                entries[key] = entries.get(key, 0) + s
        else:
            for (r, cc), x in v.items():
                key = (r0 + r, c0 + cc)
                entries[key] = entries.get(key, 0) + s * x

    action_entries = [a.entries for a in actions]
    for rb, J in enumerate(dst):
        for pos, ji in enumerate(J):
            I = J[:pos] + J[pos + 1:]
            add(rb, src_index[I], (-1) ** pos, action_entries[ji])
        for a in range(len(J)):
            for b in range(a + 1, len(J)):
                rest = J[:a] + J[a + 1:b] + J[b + 1:]
                for m, cm in enumerate(alg.c[J[a]][J[b]]):
                    if not cm or m in rest:
                        continue
                    I = tuple(sorted(rest + (m,)))
                    sign = (-1) ** (a + b) * (-1) ** sum(1 for x in rest if x < m)
                    add(rb, src_index[I], sign * cm)
    return LinearMap.from_entries(len(dst) * nS, len(src) * nS, entries,
                                  f"CE^{qdeg}(Sym^{k})", f"CE^{qdeg + 1}(Sym^{k})")


def ce_complex(alg: LieAlgebraData, k: int, coefficients: str = "adjoint") -> CochainComplexData:
    """Cochains Lambda^q g* (x) Sym^k, coefficients Sym^k(g) ("adjoint") or Sym^k(g*) ("coadjoint")."""
    if k < 0:
        raise InputError("k must be nonnegative")
    if coefficients not in ("adjoint", "coadjoint"):
        raise InputError(f"coefficients must be 'adjoint' or 'coadjoint', got {coefficients!r}")
    dual = coefficients == "coadjoint"
    d = alg.dim
    actions = [sym_action(alg, i, k, dual) for i in range(d)]
    nS = sym_dim(d, k)
    dims = tuple(comb(d, qd) * nS for qd in range(d + 1))
    diffs = tuple(ce_differential(alg, qd, k, dual, actions) for qd in range(d))
    if not nilpotency_check(diffs).ok:
        raise InvariantViolation(f"CE differential of {alg.name} with Sym^{k} is not nilpotent")
    return CochainComplexData(dims, diffs)


# -- cohomology --------------------------------------------------------------

@dataclass
class CohomologyGroup:
    degree: int
    dim: int
    representatives: list[dict] | None = None


def cohomology(cx: CochainComplexData, representatives: bool = False) -> list[CohomologyGroup]:
    """dim H^q = dims[q] - rank d_q - rank d_{q-1}; optional cocycle representatives."""
    rep = nilpotency_check(cx.differentials)
    if not rep.ok:
        raise InputError(f"not a complex: d^2 != 0 at degree {rep.max_failing_degree}")
    ranks = [rank(d) for d in cx.differentials]
    out = []
    for qd, n in enumerate(cx.dims):
        r_out = ranks[qd] if qd < len(ranks) else 0
        r_in = ranks[qd - 1] if qd > 0 else 0
        h = n - r_out - r_in
        reps = None
        if representatives:
            reps = _representatives(cx, qd)
            if len(reps) != h:
                raise InvariantViolation(f"representative count {len(reps)} != dim H^{qd} = {h}")
        out.append(CohomologyGroup(qd, h, reps))
    return out


def _representatives(cx: CochainComplexData, qd: int) -> list[dict]:
    n = cx.dims[qd]
    if qd < len(cx.differentials):
        cycles = kernel(cx.differentials[qd])
    else:
        cycles = [{i: q(1)} for i in range(n)]
    ech = image_echelon(cx.differentials[qd - 1]) if qd > 0 else Echelon()
    reps = []
    for z in cycles:
        if ech.insert(z) is not None:
            reps.append(z)
    return reps


def betti(cx: CochainComplexData) -> tuple[int, ...]:
    return tuple(g.dim for g in cohomology(cx))


def invariants_dimension(alg: LieAlgebraData, j: int) -> int:
    """dim (Sym^j g*)^g: the joint kernel of the coadjoint-induced actions."""
    if j < 0:
        raise InputError("degree must be nonnegative")
    n = sym_dim(alg.dim, j)
    if j == 0:
        return 1
    stacked = block([[sym_action(alg, i, j, dual=True)] for i in range(alg.dim)], [n] * alg.dim, [n])
    return n - rank(stacked)


def cohomology_report(mode: str, k: int, cx: CochainComplexData) -> dict:
    H = [g.dim for g in cohomology(cx)]
    return {"mode": mode, "k": k, "H": H, "euler": cx.euler}
