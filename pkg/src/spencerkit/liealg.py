"""Finite-dimensional Lie algebras given by exact structure constants."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import InputError, UnsupportedAlgebraError
from .exact import format_rational


def _frac(x) -> Fraction:
    if isinstance(x, float):
        raise InputError("structure constants must be exact (int, Fraction or 'p/q')")
    return Fraction(x)


@dataclass(frozen=True)
class LieAlgebraData:
    """Structure constants ``c[i][j][k]``: ``[e_i, e_j] = sum_k c[i][j][k] e_k``."""

    dim: int
    basis_labels: tuple[str, ...]
    c: tuple[tuple[tuple[Fraction, ...], ...], ...]
    name: str = ""

    def __post_init__(self):
        if self.dim < 1:
            raise InputError("dim must be positive")
        if len(self.basis_labels) != self.dim:
            raise InputError("need one label per basis vector")
        if len(self.c) != self.dim or any(len(r) != self.dim or any(len(s) != self.dim for s in r) for r in self.c):
            raise InputError("structure constant array must be dim x dim x dim")

    @classmethod
    def from_brackets(cls, dim: int, brackets: dict[tuple[int, int], dict[int, object]],
                      labels=None, name: str = "") -> "LieAlgebraData":
        """Build from ``{(i, j): {k: coeff}}`` with i < j; antisymmetry is filled in."""
        c = [[[Fraction(0)] * dim for _ in range(dim)] for _ in range(dim)]
        for (i, j), coeffs in brackets.items():
            if not (0 <= i < dim and 0 <= j < dim) or i == j:
                raise InputError(f"bad bracket index pair {(i, j)}")
            for k, v in coeffs.items():
                if not 0 <= k < dim:
                    raise InputError(f"bad bracket output index {k}")
                v = _frac(v)
                c[i][j][k] = v
                c[j][i][k] = -v
        labels = tuple(labels) if labels is not None else tuple(f"e{i + 1}" for i in range(dim))
        return cls(dim, labels, _freeze(c), name)

    def to_float(self) -> np.ndarray:
        return np.array([[[float(x) for x in s] for s in r] for r in self.c], dtype=float)

    def ad(self, i: int) -> list[list[Fraction]]:
        """Matrix of ad(e_i): column j holds the coefficients of [e_i, e_j]."""
        return [[self.c[i][j][k] for j in range(self.dim)] for k in range(self.dim)]

    def with_basis_order(self, perm) -> "LieAlgebraData":
        """Relabel the basis: new e_a is old e_{perm[a]}."""
        d = self.dim
        c = [[[self.c[perm[a]][perm[b]][perm[k]] for k in range(d)] for b in range(d)] for a in range(d)]
        return LieAlgebraData(d, tuple(self.basis_labels[p] for p in perm), _freeze(c), self.name)


def _freeze(c):
    return tuple(tuple(tuple(s) for s in r) for r in c)


@dataclass(frozen=True)
class AlgebraVector:
    coeffs: tuple
    flavor: str = "algebra"


@dataclass(frozen=True)
class CoVector:
    coeffs: tuple
    flavor: str = "dual"


def vector(*coeffs) -> AlgebraVector:
    return AlgebraVector(tuple(Fraction(x) if not isinstance(x, float) else x for x in coeffs))


def covector(*coeffs) -> CoVector:
    return CoVector(tuple(Fraction(x) if not isinstance(x, float) else x for x in coeffs))


def basis_vector(alg: LieAlgebraData, i: int, dual: bool = False):
    coeffs = tuple(Fraction(int(a == i)) for a in range(alg.dim))
    return CoVector(coeffs) if dual else AlgebraVector(coeffs)


def _check(alg, v, flavor):
    if getattr(v, "flavor", None) != flavor:
        raise InputError(f"expected a {flavor} vector, got {type(v).__name__}")
    if len(v.coeffs) != alg.dim:
        raise InputError(f"vector has length {len(v.coeffs)}, algebra has dim {alg.dim}")


def bracket(alg: LieAlgebraData, x: AlgebraVector, y: AlgebraVector) -> AlgebraVector:
    _check(alg, x, "algebra")
    _check(alg, y, "algebra")
    d = alg.dim
    out = [0] * d
    for i in range(d):
        if not x.coeffs[i]:
            continue
        for j in range(d):
            if not y.coeffs[j]:
                continue
            w = x.coeffs[i] * y.coeffs[j]
            for k, ck in enumerate(alg.c[i][j]):
                if ck:
                    out[k] += w * ck
    return AlgebraVector(tuple(Fraction(v) if not isinstance(v, float) else v for v in out))


def pairing(lam: CoVector, x: AlgebraVector):
    return sum(a * b for a, b in zip(lam.coeffs, x.coeffs))


def coadjoint_apply(alg: LieAlgebraData, xi: AlgebraVector, lam: CoVector) -> CoVector:
    """``ad*_xi lam``, defined by ``<ad*_xi lam, Y> = -<lam, [xi, Y]>``."""
    _check(alg, xi, "algebra")
    _check(alg, lam, "dual")
    d = alg.dim
    out = []
    for b in range(d):
        s = 0
        for i in range(d):
            if not xi.coeffs[i]:
                continue
            for a in range(d):
                if alg.c[i][b][a] and lam.coeffs[a]:
                    s -= xi.coeffs[i] * alg.c[i][b][a] * lam.coeffs[a]
        out.append(Fraction(s) if not isinstance(s, float) else s)
    return CoVector(tuple(out))


@dataclass
class StructureReport:
    antisymmetry: list[tuple[int, int, int]] = field(default_factory=list)
    jacobi: list[tuple[int, int, int, int]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.antisymmetry and not self.jacobi


def check_structure(alg: LieAlgebraData) -> StructureReport:
    d, c = alg.dim, alg.c
    rep = StructureReport()
    for i in range(d):
        for j in range(d):
            for k in range(d):
                if c[i][j][k] != -c[j][i][k]:
                    rep.antisymmetry.append((i, j, k))
    for i in range(d):
        for j in range(d):
            for k in range(d):
                for l in range(d):
                    s = sum(c[i][j][m] * c[m][k][l] + c[j][k][m] * c[m][i][l] + c[k][i][m] * c[m][j][l]
                            for m in range(d))
                    if s:
                        rep.jacobi.append((i, j, k, l))
    return rep


@dataclass(frozen=True)
class KillingForm:
    matrix: tuple[tuple[Fraction, ...], ...]
    rank: int

    @property
    def degenerate(self) -> bool:
        return self.rank < len(self.matrix)


def killing_form(alg: LieAlgebraData) -> KillingForm:
    d, c = alg.dim, alg.c
    K = [[sum(c[i][b][a] * c[j][a][b] for a in range(d) for b in range(d)) for j in range(d)]
         for i in range(d)]
    return KillingForm(tuple(tuple(Fraction(x) for x in row) for row in K), _rank(K))


def _rank(rows) -> int:
    m = [list(map(Fraction, r)) for r in rows]
    rank, ncols = 0, len(m[0]) if m else 0
    for col in range(ncols):
        piv = next((r for r in range(rank, len(m)) if m[r][col]), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        for r in range(len(m)):
            if r != rank and m[r][col]:
                f = m[r][col] / m[rank][col]
                m[r] = [a - f * b for a, b in zip(m[r], m[rank])]
        rank += 1
    return rank


def inverse_matrix(rows) -> list[list[Fraction]]:
    n = len(rows)
    m = [list(map(Fraction, r)) + [Fraction(int(i == j)) for j in range(n)] for i, r in enumerate(rows)]
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col]), None)
        if piv is None:
            raise UnsupportedAlgebraError("matrix is singular")
        m[col], m[piv] = m[piv], m[col]
        p = m[col][col]
        m[col] = [x / p for x in m[col]]
        for r in range(n):
            if r != col and m[r][col]:
                f = m[r][col]
                m[r] = [a - f * b for a, b in zip(m[r], m[col])]
    return [row[n:] for row in m]


def killing_dual_basis(alg: LieAlgebraData) -> list[list[Fraction]]:
    """Coefficients of the Killing-dual basis: K(dual_i, e_j) = delta_ij."""
    kf = killing_form(alg)
    if kf.degenerate:
        raise UnsupportedAlgebraError(f"Killing form of {alg.name or 'algebra'} is degenerate")
    inv = inverse_matrix(kf.matrix)
    # dual_i = sum_j inv[i][j] e_j  (K symmetric)
    return inv


# -- orthonormal bases -------------------------------------------------------

@dataclass(frozen=True)
class OrthonormalizedAlgebra:
    """Algebra in a Killing-orthonormal basis, kept exact.

    ``change`` lists an orthogonal rational basis f_i in old coordinates;
    the orthonormal basis is u_i = f_i / sqrt(norms[i]).  ``rational`` holds
    the structure constants in the f basis, so the orthonormal constants are
    ``rational.c[i][j][k] * sqrt(norms[k] / (norms[i] * norms[j]))``.
    """

    original: LieAlgebraData
    change: tuple[tuple[Fraction, ...], ...]
    norms: tuple[Fraction, ...]
    sign: int
    rational: LieAlgebraData

    def structure_constant(self, i: int, j: int, k: int):
        import sympy
        n = self.norms
        return sympy.Rational(self.rational.c[i][j][k]) * sympy.sqrt(
            sympy.Rational(n[k]) / (sympy.Rational(n[i]) * sympy.Rational(n[j])))

    def structure_constants_exact(self):
        d = self.original.dim
        return [[[self.structure_constant(i, j, k) for k in range(d)] for j in range(d)] for i in range(d)]

    def to_float(self) -> np.ndarray:
        d = self.original.dim
        n = np.array([float(x) for x in self.norms])
        base = self.rational.to_float()
        scale = np.sqrt(n[None, None, :] / (n[:, None, None] * n[None, :, None]))
        return base * scale if d else base

    def killing_exact(self):
        """Killing form in the orthonormal basis, as sympy numbers."""
        import sympy
        c = self.structure_constants_exact()
        d = self.original.dim
        return [[sympy.nsimplify(sympy.simplify(sum(c[i][b][a] * c[j][a][b] for a in range(d) for b in range(d))))
                 for j in range(d)] for i in range(d)]


def orthonormalize_basis(alg: LieAlgebraData) -> OrthonormalizedAlgebra:
    kf = killing_form(alg)
    if kf.degenerate:
        raise UnsupportedAlgebraError("Killing form is degenerate; no orthonormal basis")
    K = kf.matrix
    d = alg.dim

    def form(u, v):
        return sum(u[i] * K[i][j] * v[j] for i in range(d) for j in range(d))

    fs, norms = [], []
    for i in range(d):
        f = [Fraction(int(a == i)) for a in range(d)]
        for g, ng in zip(fs, norms):
            t = form(f, g) / ng
            f = [a - t * b for a, b in zip(f, g)]
        n = form(f, f)
        if n == 0:
            raise UnsupportedAlgebraError("Killing form is indefinite (isotropic vector found)")
        fs.append(f)
        norms.append(n)
    signs = {1 if n > 0 else -1 for n in norms}
    if len(signs) != 1:
        raise UnsupportedAlgebraError("Killing form is indefinite; only definite forms are supported")
    sign = signs.pop()
    norms = [sign * n for n in norms]
    # structure constants in the f basis: [f_i, f_j] = sum_k x_k f_k
    inv = inverse_matrix([[fs[k][a] for k in range(d)] for a in range(d)])
    cf = [[[Fraction(0)] * d for _ in range(d)] for _ in range(d)]
    for i in range(d):
        for j in range(d):
            br = bracket(alg, AlgebraVector(tuple(fs[i])), AlgebraVector(tuple(fs[j]))).coeffs
            for k in range(d):
                cf[i][j][k] = sum(inv[k][a] * br[a] for a in range(d))
    rational = LieAlgebraData(d, tuple(f"f{i + 1}" for i in range(d)), _freeze(cf), alg.name + "-orth")
    return OrthonormalizedAlgebra(alg, tuple(tuple(f) for f in fs), tuple(norms), sign, rational)


# -- catalog and files -------------------------------------------------------

def abelian(d: int) -> LieAlgebraData:
    if d < 1:
        raise InputError("abelian(d) needs d >= 1")
    return LieAlgebraData.from_brackets(d, {}, name=f"abelian({d})")


def su2() -> LieAlgebraData:
    return LieAlgebraData.from_brackets(3, {(0, 1): {2: 1}, (1, 2): {0: 1}, (2, 0): {1: 1}}, name="su2")


def sl2() -> LieAlgebraData:
    # basis (h, e, f)
    return LieAlgebraData.from_brackets(3, {(0, 1): {1: 2}, (0, 2): {2: -2}, (1, 2): {0: 1}},
                                        labels=("h", "e", "f"), name="sl2")


def heisenberg3() -> LieAlgebraData:
    return LieAlgebraData.from_brackets(3, {(0, 1): {2: 1}}, name="heisenberg3")


SL3_LABELS = ("h1", "h2", "E12", "E13", "E23", "E21", "E31", "E32")


def sl3_basis_matrices() -> list[list[list[int]]]:
    """Traceless 3x3 basis: h1 = E11-E22, h2 = E22-E33, then E_ij off the diagonal."""
    def E(i, j):
        m = [[0] * 3 for _ in range(3)]
        m[i][j] = 1
        return m

    h1 = [[1, 0, 0], [0, -1, 0], [0, 0, 0]]
    h2 = [[0, 0, 0], [0, 1, 0], [0, 0, -1]]
    return [h1, h2, E(0, 1), E(0, 2), E(1, 2), E(1, 0), E(2, 0), E(2, 1)]


def sl3_from_matrices() -> LieAlgebraData:
    """Structure constants of sl3 by brute-force matrix commutators."""
    mats = sl3_basis_matrices()

    def mul(a, b):
        return [[sum(a[i][k] * b[k][j] for k in range(3)) for j in range(3)] for i in range(3)]

    # coordinates of a traceless matrix in the basis above
    def coords(m):
        x = [Fraction(0)] * 8
        x[0] = Fraction(m[0][0])
        x[1] = Fraction(m[0][0] + m[1][1])
        for idx, (i, j) in zip(range(2, 8), [(0, 1), (0, 2), (1, 2), (1, 0), (2, 0), (2, 1)]):
            x[idx] = Fraction(m[i][j])
        return x

    brackets = {}
    for i in range(8):
        for j in range(i + 1, 8):
            ab, ba = mul(mats[i], mats[j]), mul(mats[j], mats[i])
            comm = [[ab[r][s] - ba[r][s] for s in range(3)] for r in range(3)]
            assert sum(comm[r][r] for r in range(3)) == 0
            x = coords(comm)
            brackets[i, j] = {k: v for k, v in enumerate(x) if v}
    return LieAlgebraData.from_brackets(8, brackets, labels=SL3_LABELS, name="sl3")


def algebra_to_dict(alg: LieAlgebraData) -> dict:
    brackets = []
    for i in range(alg.dim):
        for j in range(i + 1, alg.dim):
            coeffs = {str(k): format_rational(v) for k, v in enumerate(alg.c[i][j]) if v}
            if coeffs:
                brackets.append({"i": i, "j": j, "coeffs": coeffs})
    return {"dim": alg.dim, "labels": list(alg.basis_labels), "brackets": brackets}


def algebra_from_dict(data: dict, name: str = "") -> LieAlgebraData:
    try:
        dim = int(data["dim"])
        labels = data.get("labels")
        brackets = {}
        for entry in data["brackets"]:
            i, j = int(entry["i"]), int(entry["j"])
            if i >= j:
                raise InputError(f"bracket entries must have i < j, got {(i, j)}")
            brackets[i, j] = {int(k): Fraction(v) for k, v in entry["coeffs"].items()}
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"malformed algebra file: {exc}") from exc
    return LieAlgebraData.from_brackets(dim, brackets, labels, name or data.get("name", ""))


def load_algebra(path) -> LieAlgebraData:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read algebra file {path}: {exc}") from exc
    return algebra_from_dict(data, name=path.stem)


def dump_algebra(alg: LieAlgebraData) -> str:
    return json.dumps(algebra_to_dict(alg), indent=1, sort_keys=True) + "\n"


def _bundled(name: str) -> dict:
    return json.loads(resources.files("spencerkit.data").joinpath(name).read_text())


_ABELIAN = re.compile(r"^abelian\((\d+)\)$")


def catalog(name: str, *params) -> LieAlgebraData:
    """Preset algebras: abelian(d), su2, so3, sl2, sl3, heisenberg3."""
    key = name.strip().lower()
    m = _ABELIAN.match(key)
    if m:
        return abelian(int(m.group(1)))
    if key == "abelian":
        if len(params) != 1:
            raise InputError("abelian needs its dimension")
        return abelian(int(params[0]))
    if key in ("su2", "so3"):
        return su2()
    if key == "sl2":
        return sl2()
    if key == "heisenberg3":
        return heisenberg3()
    if key == "sl3":
        return algebra_from_dict(_bundled("sl3.json"), name="sl3")
    raise InputError(f"unknown algebra preset {name!r}")


def resolve_algebra(spec: str) -> LieAlgebraData:
    """Preset name or path to a JSON algebra file."""
    if spec.endswith(".json") or Path(spec).is_file():
        return load_algebra(spec)
    return catalog(spec)
