"""Spectral sequence of a double complex, filtered by column degree p, over Q.

Total-complex coordinates order the blocks K^{p,m-p} by increasing p, so the
filtration F^a of the degree-m total space is the set of coordinates from the
first index of block a onward.  One right-to-left column reduction of each
total differential D_m (with leftmost pivots) yields a basis of every F^p in
which images have distinct pivots; all Z_r, B_r and page dimensions are then
counts of (origin block, pivot block) pairs, and representatives are read off
the same reduction.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field

from .derham import BaseModel
from .errors import ConstructionError, InputError, InvariantViolation
from .exact import Echelon, LinearMap, block, direct_sum, kron, rank
from .liealg import LieAlgebraData
from .spencer_complex import (CochainComplexData, betti, ce_complex, default_pairing,
                              spencer_differential, sym_dim)

VERTICAL_MODES = ("spencer", "ce")


@dataclass(frozen=True)
class DoubleComplexData:
    pmax: int
    qmax: int
    dims: dict            # (p, q) -> int
    d_h: dict             # (p, q) -> LinearMap K^{p,q} -> K^{p+1,q}
    d_v: dict             # (p, q) -> LinearMap K^{p,q} -> K^{p,q+1}
    mode: str = ""
    k: int | None = None
    label: str = ""

    def dim(self, p: int, q: int) -> int:
        return self.dims.get((p, q), 0)

    def blocks(self, m: int) -> list[int]:
        """Column degrees p present in total degree m, ascending."""
        return [p for p in range(self.pmax + 1) if 0 <= m - p <= self.qmax]

    @property
    def total_degrees(self) -> range:
        return range(self.pmax + self.qmax + 1)

    def offsets(self, m: int) -> dict[int, int]:
        out, pos = {}, 0
        for p in self.blocks(m):
            out[p] = pos
            pos += self.dim(p, m - p)
        out[None] = pos
        return out

    def total_dim(self, m: int) -> int:
        return sum(self.dim(p, m - p) for p in self.blocks(m))

    def total_differential(self, m: int) -> LinearMap:
        """D = d_h + d_v from Tot^m to Tot^{m+1}."""
        src, dst = self.blocks(m), self.blocks(m + 1)
        grid = [[None] * len(src) for _ in dst]
        for c, p in enumerate(src):
            qd = m - p
            for r, p2 in enumerate(dst):
                if p2 == p + 1 and (p, qd) in self.d_h:
                    grid[r][c] = self.d_h[p, qd]
                elif p2 == p and (p, qd) in self.d_v:
                    grid[r][c] = self.d_v[p, qd]
        return block(grid, [self.dim(p, m + 1 - p) for p in dst], [self.dim(p, m - p) for p in src])

    def total_complex(self) -> CochainComplexData:
        degs = list(self.total_degrees)
        dims = [self.total_dim(m) for m in degs]
        return CochainComplexData.build(dims, [self.total_differential(m) for m in degs[:-1]])

    def summary(self) -> dict:
        return {"mode": self.mode, "k": self.k, "pmax": self.pmax, "qmax": self.qmax,
                "dims": {f"{p},{q}": d for (p, q), d in sorted(self.dims.items())}}


def double_from_complexes(base: CochainComplexData, vertical: CochainComplexData, *,
                          koszul_sign: bool = True, mode: str = "", k: int | None = None,
                          label: str = "") -> DoubleComplexData:
    """K^{p,q} = base^p (x) vertical^q, d_h = d (x) id, d_v = (-1)^p id (x) delta.

    ``koszul_sign=False`` drops the (-1)^p and exists to build failing examples.
    """
    pmax, qmax = len(base.dims) - 1, len(vertical.dims) - 1
    dims, dh, dv = {}, {}, {}
    for p in range(pmax + 1):
        for qd in range(qmax + 1):
            dims[p, qd] = base.dims[p] * vertical.dims[qd]
            if p < pmax:
                dh[p, qd] = kron(base.differentials[p], LinearMap.identity(vertical.dims[qd]))
            if qd < qmax:
                m = kron(LinearMap.identity(base.dims[p]), vertical.differentials[qd])
                dv[p, qd] = m.scale(-1) if koszul_sign and p % 2 else m
    return DoubleComplexData(pmax, qmax, dims, dh, dv, mode, k, label)


def spencer_vertical(alg: LieAlgebraData, kmax: int, pairing_mode: str | None = None) -> CochainComplexData:
    """Sym^0 -> Sym^1 -> ... -> Sym^kmax with the Spencer operator (not checked here)."""
    mode = pairing_mode or default_pairing(alg)
    dims = [sym_dim(alg.dim, j) for j in range(kmax + 1)]
    return CochainComplexData.build(dims, [spencer_differential(alg, j, mode) for j in range(kmax)])


@dataclass
class BicomplexReport:
    ok: bool
    failures: list = field(default_factory=list)   # (identity, (p, q))
    checked: int = 0

    @property
    def first_failure(self):
        return self.failures[0] if self.failures else None

    def as_dict(self) -> dict:
        return {"ok": self.ok, "checked": self.checked,
                "failures": [{"identity": i, "bidegree": list(b)} for i, b in self.failures]}


def check_bicomplex(K: DoubleComplexData) -> BicomplexReport:
    """Exact check of d_h^2 = 0, d_v^2 = 0 and d_h d_v + d_v d_h = 0 at every bidegree."""
    fails, checked = [], 0
    for (p, qd) in sorted(K.dims):
        if (p, qd) in K.d_h and (p + 1, qd) in K.d_h:
            checked += 1
            if not (K.d_h[p + 1, qd] @ K.d_h[p, qd]).is_zero():
                fails.append(("d_h^2", (p, qd)))
        if (p, qd) in K.d_v and (p, qd + 1) in K.d_v:
            checked += 1
            if not (K.d_v[p, qd + 1] @ K.d_v[p, qd]).is_zero():
                fails.append(("d_v^2", (p, qd)))
        if (p, qd) in K.d_h and (p, qd) in K.d_v:
            checked += 1
            anti = K.d_v[p + 1, qd] @ K.d_h[p, qd] + K.d_h[p, qd + 1] @ K.d_v[p, qd]
            if not anti.is_zero():
                fails.append(("d_h d_v + d_v d_h", (p, qd)))
    return BicomplexReport(not fails, fails, checked)


def build_spencer_double(base: BaseModel, alg: LieAlgebraData, kmax: int, vertical_mode: str = "spencer",
                         k: int | None = None, pairing_mode: str | None = None) -> DoubleComplexData:
    """Spencer double complex over a base model.

    spencer: K^{p,q} = C^p (x) Sym^q g for q <= kmax, vertical = Spencer operator.
    ce:      K^{p,q} = C^p (x) Lambda^q g* (x) Sym^k g, vertical = Chevalley-Eilenberg.
             With ``k`` given this is the single slice; otherwise the direct sum of
             the slices k = 0..kmax (block diagonal in the vertical direction).
    """
    mode = vertical_mode.lower()
    if mode not in VERTICAL_MODES:
        raise InputError(f"vertical_mode must be one of {VERTICAL_MODES}, got {vertical_mode!r}")
    if kmax < 1:
        raise InputError(f"kmax must be at least 1, got {kmax}")
    if mode == "spencer":
        vertical = spencer_vertical(alg, kmax, pairing_mode)
        K = double_from_complexes(base.complex, vertical, mode=mode, label=f"{base.name}|{alg.name}")
    else:
        if k is not None:
            if not 0 <= k <= kmax:
                raise InputError(f"slice k={k} outside 0..kmax={kmax}")
            vertical = ce_complex(alg, k)
        else:
            slices = [ce_complex(alg, j) for j in range(kmax + 1)]
            vertical = CochainComplexData.build(
                [sum(s.dims[i] for s in slices) for i in range(alg.dim + 1)],
                [direct_sum([s.differentials[i] for s in slices]) for i in range(alg.dim)])
        K = double_from_complexes(base.complex, vertical, mode=mode, k=k, label=f"{base.name}|{alg.name}")
    rep = check_bicomplex(K)
    if not rep.ok:
        ident, bideg = rep.first_failure
        raise ConstructionError(f"double complex fails {ident} = 0 at bidegree {bideg}")
    return K


# -- filtered reduction --------------------------------------------------------

@dataclass
class _Reduction:
    """Column reduction of D_m processed from the last column to the first."""
    m: int
    origin_block: list      # per reduced element: column degree of its origin column
    pivot_block: list       # column degree (in degree m+1) of its image pivot, or None (cycle)
    tags: list              # element as a vector in Tot^m (leading coordinate = origin)
    images: list            # its normalized image D(tag) in Tot^{m+1} (None for cycles)


def _reduce(K: DoubleComplexData, m: int, tags_needed: bool) -> _Reduction:
    src_off = K.offsets(m)
    src_starts = [src_off[p] for p in K.blocks(m)]
    src_ps = K.blocks(m)
    n = K.total_dim(m)
    if m + 1 in K.total_degrees and K.total_dim(m + 1):
        D = K.total_differential(m)
        cols = D.columns()
        dst_ps = K.blocks(m + 1)
        dst_starts = [K.offsets(m + 1)[p] for p in dst_ps]
    else:
        cols, dst_ps, dst_starts = [{} for _ in range(n)], [], []
    ech = Echelon(track=True)
    ob, pb, tags, imgs = [], [], [], []
    for j in range(n - 1, -1, -1):
        res, t = ech.reduce(cols[j], {j: 1})
        ob.append(src_ps[bisect_right(src_starts, j) - 1])
        if res:
            c = min(res)
            inv = 1 / res[c]
            row = {i: x * inv for i, x in res.items()}
            tg = {i: x * inv for i, x in t.items()}
            ech._rows[c], ech._tags[c] = row, tg
            pb.append(dst_ps[bisect_right(dst_starts, c) - 1])
            tags.append(tg if tags_needed else None)
            imgs.append(row)
        else:
            pb.append(None)
            tags.append(t if tags_needed else None)
            imgs.append(None)
    return _Reduction(m, ob, pb, tags, imgs)


@dataclass
class SpectralPage:
    r: int
    dims: dict                     # (p, q) -> int
    dr_ranks: dict                 # (p, q) -> rank of d_r out of (p, q)
    representatives: dict | None = None   # (p, q) -> list of Tot vectors
    dr: dict | None = None         # (p, q) -> LinearMap E_r^{p,q} -> E_r^{p+r,q-r+1}

    @property
    def all_dr_zero(self) -> bool:
        return not any(self.dr_ranks.values())

    def as_dict(self) -> dict:
        return {"r": self.r,
                "dims": {f"{p},{q}": d for (p, q), d in sorted(self.dims.items())},
                "dr_ranks": {f"{p},{q}": d for (p, q), d in sorted(self.dr_ranks.items())}}


class _Engine:
    def __init__(self, K: DoubleComplexData, representatives: bool):
        self.K = K
        self.reps = representatives
        self.red = {m: _reduce(K, m, representatives) for m in K.total_degrees}

    def z_count(self, m: int, p: int, r: int) -> int:
        """dim Z_r^p - dim Z_{r-1}^{p+1}: cycles mod F^{p+r} with origin in block p."""
        R = self.red[m]
        return sum(1 for o, b in zip(R.origin_block, R.pivot_block)
                   if o == p and (b is None or b >= p + r))

    def b_count(self, m: int, p: int, r: int) -> int:
        """dim B_{r-1}^p - dim (B_{r-1}^p cap F^{p+1})."""
        if m - 1 not in self.red:
            return 0
        R = self.red[m - 1]
        return sum(1 for o, b in zip(R.origin_block, R.pivot_block)
                   if b == p and o >= p - r + 1)

    def dims(self, r: int) -> dict:
        K = self.K
        return {(p, m - p): self.z_count(m, p, r) - self.b_count(m, p, r)
                for m in K.total_degrees for p in K.blocks(m)}

    def dr_ranks(self, r: int) -> dict:
        out = {}
        for m in self.K.total_degrees:
            R = self.red[m]
            for p in self.K.blocks(m):
                out[p, m - p] = sum(1 for o, b in zip(R.origin_block, R.pivot_block)
                                    if o == p and b == p + r)
        return out

    # representatives ----------------------------------------------------------

    def _block_range(self, m: int, p: int) -> tuple[int, int]:
        off = self.K.offsets(m)
        return off[p], off[p] + self.K.dim(p, m - p)

    def _project(self, v: dict, lo: int, hi: int) -> dict:
        return {i: x for i, x in v.items() if lo <= i < hi}

    def boundary_echelon(self, m: int, p: int, r: int) -> Echelon:
        """Projection to block p of B_{r-1}^p, in echelon form with zero tags."""
        lo, hi = self._block_range(m, p)
        ech = Echelon(track=True)
        if m - 1 in self.red:
            R = self.red[m - 1]
            for o, b, img in zip(R.origin_block, R.pivot_block, R.images):
                if b == p and o >= p - r + 1:
                    ech.insert(self._project(img, lo, hi), {})
        return ech

    def page_reps(self, r: int):
        reps, quot = {}, {}
        K = self.K
        for m in K.total_degrees:
            R = self.red[m]
            for p in K.blocks(m):
                lo, hi = self._block_range(m, p)
                ech = self.boundary_echelon(m, p, r)
                chosen = []
                for o, b, t in zip(R.origin_block, R.pivot_block, R.tags):
                    if o == p and (b is None or b >= p + r):
                        if ech.insert(self._project(t, lo, hi), {len(chosen): 1}) is not None:
                            chosen.append(t)
                reps[p, m - p] = chosen
                quot[p, m - p] = ech
        return reps, quot

    def dr_maps(self, r: int, reps: dict, quot: dict) -> dict:
        """d_r[x] = [D x] expressed in the chosen basis of E_r^{p+r, q-r+1}."""
        K = self.K
        out = {}
        for m in K.total_degrees:
            if m + 1 not in K.total_degrees:
                continue
            D = None
            for p in K.blocks(m):
                qd = m - p
                src = reps[p, qd]
                tgt = (p + r, qd - r + 1)
                if tgt not in reps:
                    continue
                ntgt = len(reps[tgt])
                entries = {}
                if src and ntgt:
                    D = D or K.total_differential(m)
                    lo, hi = self._block_range(m + 1, p + r)
                    for c, x in enumerate(src):
                        y = D.apply(x)
                        if any(i < lo for i in y):
                            raise InvariantViolation(f"D of an E_{r} representative leaves F^{p + r}")
                        res, t = quot[tgt].reduce(self._project(y, lo, hi), {})
                        if res:
                            raise InvariantViolation(f"d_{r} image at {tgt} is not a class on the page")
                        for i, v in t.items():
                            entries[i, c] = v
                out[p, qd] = LinearMap.from_entries(ntgt, len(src), entries)
        return out


def compute_pages(K: DoubleComplexData, representatives: bool = True, max_pages: int | None = None,
                  check: bool = True) -> list[SpectralPage]:
    """Pages E_1, E_2, ..., E_N where N is the first r >= 2 with every d_r = 0."""
    if check:
        rep = check_bicomplex(K)
        if not rep.ok:
            ident, bideg = rep.first_failure
            raise InputError(f"not a double complex: {ident} != 0 at bidegree {bideg}")
    eng = _Engine(K, representatives)
    limit = max_pages or (K.pmax + 2)
    pages = []
    r = 1
    while True:
        dims = eng.dims(r)
        ranks = eng.dr_ranks(r)
        page = SpectralPage(r, dims, ranks)
        if representatives:
            reps, quot = eng.page_reps(r)
            for key, vs in reps.items():
                if len(vs) != dims[key]:
                    raise InvariantViolation(f"E_{r}{key}: {len(vs)} representatives for dimension {dims[key]}")
            page.representatives = reps
            page.dr = eng.dr_maps(r, reps, quot)
            for key, mp in page.dr.items():
                if rank(mp) != ranks[key]:
                    raise InvariantViolation(f"rank of d_{r} at {key} disagrees with the filtration count")
        pages.append(page)
        if r >= 2 and page.all_dr_zero:
            return pages
        if r > limit:
            raise InvariantViolation(f"spectral sequence did not stabilise by r={r}")
        r += 1


# -- independent rank-formula path --------------------------------------------------

def page_dims_by_ranks(K: DoubleComplexData, r: int) -> dict:
    """dim E_r^{p,q} from ranks of filtered pieces of D (no shared reduction)."""
    cache = {}

    def f(m, a, b):
        """rank of D_m restricted to columns F^a and rows in blocks < b."""
        key = (m, a, b)
        if key in cache:
            return cache[key]
        if m < 0 or m + 1 not in K.total_degrees:
            cache[key] = 0
            return 0
        D = K.total_differential(m)
        c0 = _first_at_least(K.offsets(m), K.blocks(m), a)
        r1 = _first_at_least(K.offsets(m + 1), K.blocks(m + 1), b)
        sub = {(i, j - c0): v for (i, j), v in D.entries.items() if j >= c0 and i < r1}
        val = rank(LinearMap.from_entries(r1, D.cols - c0, sub))
        cache[key] = val
        return val

    def fdim(m, a):
        return sum(K.dim(p, m - p) for p in K.blocks(m) if p >= a)

    inf = K.pmax + K.qmax + 10

    def Z(m, p, rr):
        return fdim(m, p) - f(m, p, p + rr)

    def B(m, p, rr):
        return f(m - 1, p - rr, inf) - f(m - 1, p - rr, p)

    return {(p, m - p): Z(m, p, r) - Z(m, p + 1, r - 1) - B(m, p, r - 1) + B(m, p + 1, r)
            for m in K.total_degrees for p in K.blocks(m)}


def _first_at_least(off: dict, blocks: list, b: int) -> int:
    for p in blocks:
        if p >= b:
            return off[p]
    return off[None]


# -- convergence -------------------------------------------------------------------

def total_cohomology(K: DoubleComplexData) -> list[int]:
    """dim H^m of the total complex, computed directly (independent oracle)."""
    return list(betti(K.total_complex()))


def infinity_by_total_degree(page: SpectralPage) -> dict:
    out = {}
    for (p, qd), d in page.dims.items():
        out[p + qd] = out.get(p + qd, 0) + d
    return out


def convergence_report(pages: list[SpectralPage], n_manifold: int, K: DoubleComplexData | None = None,
                       total: list[int] | None = None) -> dict:
    """Stable index N, the bound N <= n+1, E_2 degeneracy and the induced filtration."""
    last = pages[-1]
    N = last.r
    e2 = next((pg for pg in pages if pg.r == 2), None)
    degenerate = all(pg.all_dr_zero for pg in pages if pg.r >= 2)
    e2_equals_inf = e2 is not None and e2.dims == last.dims
    degs = sorted({p + qd for (p, qd) in last.dims})
    filtration = {}
    for m in degs:
        ps = sorted(p for (p, qd) in last.dims if p + qd == m)
        filtration[m] = {p: sum(last.dims[i, m - i] for i in ps if i >= p) for p in ps}
    barrier_ok = True
    for pg in pages:
        for (p, qd), rk in pg.dr_ranks.items():
            if rk and (p + pg.r > (K.pmax if K else n_manifold) or qd - pg.r + 1 < 0):
                barrier_ok = False
    out = {"N": N, "N_le_n_plus_1": N <= n_manifold + 1,
           "E2_degenerate": degenerate and e2_equals_inf,
           "E2_degenerate_required": n_manifold <= 4,
           "dimensional_barrier_ok": barrier_ok,
           "filtration": {str(m): {str(p): v for p, v in f.items()} for m, f in filtration.items()}}
    if total is not None:
        inf = infinity_by_total_degree(last)
        out["oracle_ok"] = all(inf.get(m, 0) == total[m] for m in range(len(total)))
    return out


def page_report(K: DoubleComplexData, pages: list[SpectralPage], n_manifold: int,
                total: list[int]) -> dict:
    conv = convergence_report(pages, n_manifold, K, total)
    return {"mode": K.mode, "k": K.k,
            "pages": [pg.as_dict() for pg in pages],
            "N": conv["N"],
            "bounds": {"N_le_n_plus_1": conv["N_le_n_plus_1"], "E2_degenerate": conv["E2_degenerate"]},
            "total_cohomology": list(total),
            "oracle_ok": conv["oracle_ok"],
            "filtration": conv["filtration"]}
