"""Finite cochain models of base manifolds."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from fractions import Fraction
from importlib import resources
from itertools import combinations
from pathlib import Path

from .errors import InputError
from .exact import LinearMap, block, format_rational, kron
from .spencer_complex import CochainComplexData, betti as complex_betti

# ring table: (deg_a, a, deg_b, b) -> {c: coeff} in degree deg_a + deg_b
RingTable = dict


@dataclass(frozen=True)
class BaseModel:
    complex: CochainComplexData
    n: int
    betti: tuple[int, ...]
    ring: RingTable | None = None
    curvature_class: tuple[Fraction, ...] | None = None
    name: str = ""

    @property
    def formal(self) -> bool:
        return all(d.is_zero() for d in self.complex.differentials)

    def with_curvature_class(self, coeffs) -> "BaseModel":
        if self.ring is None:
            raise InputError("a curvature class needs a ring table (formal model)")
        coeffs = tuple(Fraction(x) for x in coeffs)
        if len(self.betti) < 3 or len(coeffs) != self.betti[2]:
            raise InputError(f"curvature class needs {self.betti[2] if len(self.betti) > 2 else 0} coefficients in H^2")
        return replace(self, curvature_class=coeffs)

    def poincare_symmetric(self) -> bool:
        b = self.betti
        return all(b[k] == b[self.n - k] for k in range(self.n + 1))


def _model(cx: CochainComplexData, n: int, name: str, ring=None, curvature_class=None) -> BaseModel:
    return BaseModel(cx, n, complex_betti(cx), ring, curvature_class, name)


def circle_complex(m: int) -> BaseModel:
    """Simplicial cochains of the m-gon: vertices 0..m-1, edge i runs from i to i+1."""
    if m < 3:
        raise InputError(f"circle needs at least 3 vertices, got m={m}")
    entries = {}
    for i in range(m):
        entries[i, (i + 1) % m] = 1
        entries[i, i] = -1
    d0 = LinearMap.from_entries(m, m, entries, "C^0", "C^1")
    return _model(CochainComplexData((m, m), (d0,)), 1, f"circle({m})")


def tensor_complex(a: BaseModel, b: BaseModel) -> BaseModel:
    """Total complex of A (x) B with d(x (x) y) = dx (x) y + (-1)^|x| x (x) dy."""
    A, B = a.complex, b.complex
    n = a.n + b.n
    blocks = [[(i, k - i) for i in range(len(A.dims)) if 0 <= k - i < len(B.dims)] for k in range(n + 1)]
    dims = tuple(sum(A.dims[i] * B.dims[j] for i, j in bl) for bl in blocks)
    diffs = []
    for k in range(n):
        src, dst = blocks[k], blocks[k + 1]
        grid = [[None] * len(src) for _ in dst]
        for cidx, (i, j) in enumerate(src):
            for ridx, (i2, j2) in enumerate(dst):
                if (i2, j2) == (i + 1, j):
                    grid[ridx][cidx] = kron(A.differentials[i], LinearMap.identity(B.dims[j]))
                elif (i2, j2) == (i, j + 1):
                    grid[ridx][cidx] = kron(LinearMap.identity(A.dims[i]), B.differentials[j]).scale((-1) ** i)
        diffs.append(block(grid, [A.dims[i] * B.dims[j] for i, j in dst],
                           [A.dims[i] * B.dims[j] for i, j in src]))
    ring = None
    if a.ring is not None and b.ring is not None:
        ring = _tensor_ring(a, b, blocks)
    return _model(CochainComplexData(dims, tuple(diffs)), n, f"{a.name}x{b.name}", ring)


def _tensor_ring(a: BaseModel, b: BaseModel, blocks) -> RingTable:
    """Graded tensor product of two formal rings (Koszul sign on the middle swap)."""
    da, db = a.complex.dims, b.complex.dims
    offset = {}
    for k, bl in enumerate(blocks):
        pos = 0
        for i, j in bl:
            offset[i, j] = pos
            pos += da[i] * db[j]

    def idx(i, x, j, y):
        return offset[i, j] + x * db[j] + y

    table: RingTable = {}
    for (i, j) in offset:
        for (i2, j2) in offset:
            deg = i + i2 + j + j2
            if deg > a.n + b.n:
                continue
            for x in range(da[i]):
                for y in range(db[j]):
                    for x2 in range(da[i2]):
                        for y2 in range(db[j2]):
                            left = _mul_basis(a, i, x, i2, x2)
                            right = _mul_basis(b, j, y, j2, y2)
                            if not left or not right:
                                continue
                            sign = (-1) ** (j * i2)
                            out = {}
                            for u, cu in left.items():
                                for v, cv in right.items():
                                    out[idx(i + i2, u, j + j2, v)] = sign * cu * cv
                            out = {k: v for k, v in out.items() if v}
                            if out and not (i + j == 0 or i2 + j2 == 0):
                                table[i + j, idx(i, x, j, y), i2 + j2, idx(i2, x2, j2, y2)] = out
    return table


def _mul_basis(model: BaseModel, da: int, a: int, db: int, b: int) -> dict:
    if da == 0 and a == 0:
        return {b: Fraction(1)}
    if db == 0 and b == 0:
        return {a: Fraction(1)}
    return dict(model.ring.get((da, a, db, b), {})) if model.ring else {}


def formal_model(betti, n: int, ring: RingTable | None = None, curvature_class=None,
                 name: str = "") -> BaseModel:
    """Zero-differential model with dims = betti and an optional cup-product table."""
    betti = tuple(int(x) for x in betti)
    if len(betti) != n + 1:
        raise InputError(f"betti sequence has length {len(betti)}, expected n+1 = {n + 1}")
    if betti[0] < 1:
        raise InputError("b_0 must be at least 1 (connected manifold)")
    if any(x < 0 for x in betti):
        raise InputError("Betti numbers must be nonnegative")
    if ring is not None:
        ring = _validate_ring(ring, betti, n)
    diffs = tuple(LinearMap.zero(betti[k + 1], betti[k]) for k in range(n))
    model = BaseModel(CochainComplexData(betti, diffs), n, betti, ring, None,
                      name or "formal:" + ",".join(map(str, betti)))
    if curvature_class is not None:
        model = model.with_curvature_class(curvature_class)
    return model


def _validate_ring(ring, betti, n) -> RingTable:
    out = {}
    for key, prod in ring.items():
        try:
            da, a, db, b = (int(x) for x in key)
        except (TypeError, ValueError) as exc:
            raise InputError(f"bad ring key {key!r}") from exc
        for deg, idx in ((da, a), (db, b)):
            if not (0 <= deg <= n and 0 <= idx < betti[deg]):
                raise InputError(f"ring entry refers to missing class ({deg}, {idx})")
        target = da + db
        clean = {int(c): Fraction(v) for c, v in prod.items() if Fraction(v)}
        if clean and target > n:
            raise InputError(f"product of degrees {da}+{db} exceeds the top degree {n}")
        for c in clean:
            if not 0 <= c < betti[target]:
                raise InputError(f"product index {c} out of range in degree {target}")
        if clean:
            out[da, a, db, b] = clean
    return out


def torus_ring_model(n: int) -> BaseModel:
    """Formal model of T^n with its exterior-algebra cup product.

    H^k has basis the k-subsets of {0..n-1} in lexicographic order.  When n is
    even the curvature class is preset to the Kahler-type sum x0x1 + x2x3 + ...
    """
    if n < 1:
        raise InputError("torus dimension must be positive")
    subsets = [list(combinations(range(n), k)) for k in range(n + 1)]
    index = [{s: i for i, s in enumerate(ss)} for ss in subsets]
    ring = {}
    for da in range(1, n + 1):
        for db in range(1, n + 1 - da):
            for a, A in enumerate(subsets[da]):
                for b, B in enumerate(subsets[db]):
                    if set(A) & set(B):
                        continue
                    merged = A + B
                    inversions = sum(1 for x in range(len(merged)) for y in range(x + 1, len(merged))
                                     if merged[x] > merged[y])
                    ring[da, a, db, b] = {index[da + db][tuple(sorted(merged))]: (-1) ** inversions}
    betti = tuple(len(s) for s in subsets)
    model = formal_model(betti, n, ring, name=f"torus-ring:{n}")
    if n >= 2:
        cls = [Fraction(0)] * betti[2]
        for i in range(0, n - 1, 2):
            cls[index[2][(i, i + 1)]] = Fraction(1)
        model = model.with_curvature_class(cls)
    return model


# -- cup products ------------------------------------------------------------

def ring_multiply(model: BaseModel, da: int, x: dict, db: int, y: dict) -> tuple[int, dict]:
    """Product of classes x in H^da and y in H^db (sparse coefficient dicts)."""
    if model.ring is None:
        raise InputError("ring mode requested but the base model has no ring table")
    deg = da + db
    out: dict = {}
    if deg > model.n:
        return deg, out
    for a, ca in x.items():
        for b, cb in y.items():
            for c, v in _mul_basis(model, da, a, db, b).items():
                out[c] = out.get(c, 0) + ca * cb * v
    return deg, {c: v for c, v in out.items() if v}


@dataclass(frozen=True)
class CupPower:
    j: int
    degree: int
    coeffs: dict | None  # None in formal mode: the class is kept symbolically

    @property
    def nonzero(self) -> bool:
        return self.coeffs is None or bool(self.coeffs)


def cup_power(model: BaseModel, j: int, mode: str = "ring") -> CupPower:
    """j-th cup power of the curvature class (ring mode) or the formal marker."""
    if j < 0:
        raise InputError("power must be nonnegative")
    if mode == "formal":
        return CupPower(j, 2 * j, None)
    if mode != "ring":
        raise InputError(f"mode must be 'formal' or 'ring', got {mode!r}")
    if model.ring is None:
        raise InputError("ring mode needs a base model with a ring table")
    if model.curvature_class is None:
        raise InputError("ring mode needs a curvature class in H^2")
    deg, acc = 0, {0: Fraction(1)}
    cls = {i: v for i, v in enumerate(model.curvature_class) if v}
    for _ in range(j):
        deg, acc = ring_multiply(model, deg, acc, 2, cls)
        if not acc:
            break
    return CupPower(j, 2 * j, acc)


# -- presets and files -------------------------------------------------------

def torus_model(n: int, m: int = 3) -> BaseModel:
    if n < 1:
        raise InputError("torus dimension must be positive")
    model = circle_complex(m)
    for _ in range(n - 1):
        model = tensor_complex(model, circle_complex(m))
    return replace(model, name=f"torus:{n}:{m}")


def quintic_model() -> BaseModel:
    data = json.loads(resources.files("spencerkit.data").joinpath("quintic.json").read_text())
    h11, h21 = int(data["h11"]), int(data["h21"])
    betti = (1, 0, h11, 2 * (1 + h21), h11, 0, 1)
    return formal_model(betti, 6, name="quintic")


def model_from_dict(data: dict, name: str = "") -> BaseModel:
    try:
        n = int(data["n"])
        betti = [int(x) for x in data["betti"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed base-model file: {exc}") from exc
    ring = None
    if data.get("ring") is not None:
        ring = {}
        for entry in data["ring"]:
            try:
                key = (*entry["left"], *entry["right"])
                ring[tuple(int(x) for x in key)] = {int(k): Fraction(v) for k, v in entry["product"].items()}
            except (KeyError, TypeError, ValueError) as exc:
                raise InputError(f"malformed ring entry {entry!r}") from exc
    cls = data.get("curvature_class")
    return formal_model(betti, n, ring, [Fraction(x) for x in cls] if cls is not None else None,
                        name=name or data.get("name", ""))


def model_to_dict(model: BaseModel) -> dict:
    out = {"n": model.n, "betti": list(model.betti)}
    if model.ring is not None:
        out["ring"] = [{"left": [da, a], "right": [db, b],
                        "product": {str(c): format_rational(v) for c, v in prod.items()}}
                       for (da, a, db, b), prod in sorted(model.ring.items())]
    if model.curvature_class is not None:
        out["curvature_class"] = [format_rational(x) for x in model.curvature_class]
    return out


def resolve_base(spec: str) -> BaseModel:
    """Preset string ("torus:n:m", "torus-ring:n", "formal:b0,b1,...", "quintic") or a JSON file."""
    s = spec.strip()
    if s.startswith("torus:"):
        parts = s.split(":")
        if len(parts) != 3:
            raise InputError(f"torus preset must look like torus:n:m, got {spec!r}")
        return torus_model(int(parts[1]), int(parts[2]))
    if s.startswith("torus-ring:"):
        return torus_ring_model(int(s.split(":", 1)[1]))
    if s.startswith("formal:"):
        try:
            betti = [int(x) for x in s.split(":", 1)[1].split(",")]
        except ValueError as exc:
            raise InputError(f"bad formal preset {spec!r}") from exc
        return formal_model(betti, len(betti) - 1)
    if s == "quintic":
        return quintic_model()
    path = Path(s)
    if path.is_file():
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise InputError(f"cannot parse base-model file {path}: {exc}") from exc
        return model_from_dict(data, name=path.stem)
    raise InputError(f"unknown base preset {spec!r}")
