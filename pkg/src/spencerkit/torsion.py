"""Torsion terms of Spencer cohomology: closed form, filtration form, weights."""

from __future__ import annotations

from dataclasses import dataclass, field

from .derham import BaseModel, cup_power
from .errors import InputError
from .liealg import LieAlgebraData
from .specseq import SpectralPage
from .spencer_complex import ce_complex, cohomology, invariants_dimension

TORSION_MODES = ("formal", "ring")


@dataclass(frozen=True)
class TorsionTerm:
    i: int
    j: int
    b_i: int
    inv_dim_j: int
    marker_nonzero: bool

    @property
    def contribution(self) -> int:
        return self.b_i * self.inv_dim_j * (1 if self.marker_nonzero else 0)

    def as_dict(self) -> dict:
        return {"i": self.i, "j": self.j, "b_i": self.b_i, "inv_dim_j": self.inv_dim_j,
                "marker_nonzero": self.marker_nonzero, "contribution": self.contribution}


@dataclass(frozen=True)
class TorsionReport:
    k: int
    mode: str
    terms: tuple[TorsionTerm, ...]
    classical_dim: int
    proof_form_terms: tuple[tuple[int, int, int], ...] = field(default=())  # (p, b_p, inv_dim(k-p))

    @property
    def total_dim(self) -> int:
        return sum(t.contribution for t in self.terms)

    @property
    def proof_form_total(self) -> int:
        return sum(b * inv for _, b, inv in self.proof_form_terms)

    @property
    def discrepancy(self) -> int:
        """proof-form sum minus the (i + 2j = k) sum."""
        return self.proof_form_total - self.total_dim

    def as_dict(self) -> dict:
        return {"k": self.k, "mode": self.mode, "terms": [t.as_dict() for t in self.terms],
                "total_dim": self.total_dim, "classical_dim": self.classical_dim,
                "proof_form": {"terms": [{"p": p, "b_p": b, "inv_dim": inv} for p, b, inv in self.proof_form_terms],
                               "total": self.proof_form_total},
                "discrepancy": self.discrepancy,
                "weights": {str(j): v for j, v in weight_decomposition(self).items()}}


def classical_part(base: BaseModel, k: int) -> int:
    if not 0 <= k <= base.n:
        raise InputError(f"degree k={k} outside 0..{base.n}")
    return base.betti[k]


def torsion_case1(base: BaseModel, alg: LieAlgebraData, k: int, mode: str = "formal") -> TorsionReport:
    """Sum over i + 2j = k, j >= 1, of b_i * dim (Sym^j g*)^g * [class^j != 0].

    The proof-form sum  sum_{p<k} b_p * dim (Sym^{k-p} g*)^g  is computed alongside.
    """
    if k < 0:
        raise InputError("k must be nonnegative")
    if mode not in TORSION_MODES:
        raise InputError(f"curvature mode must be one of {TORSION_MODES}, got {mode!r}")
    if mode == "ring" and (base.ring is None or base.curvature_class is None):
        raise InputError("ring mode needs a base with a ring table and a curvature class")
    inv_cache: dict[int, int] = {}

    def inv(j):
        if j not in inv_cache:
            inv_cache[j] = invariants_dimension(alg, j)
        return inv_cache[j]

    terms = []
    for j in range(1, k // 2 + 1):
        i = k - 2 * j
        if i > base.n:
            continue
        marker = cup_power(base, j, mode).nonzero
        terms.append(TorsionTerm(i, j, base.betti[i], inv(j), marker))
    proof = tuple((p, base.betti[p], inv(k - p)) for p in range(min(k, base.n + 1)))
    classical = base.betti[k] if k <= base.n else 0
    return TorsionReport(k, mode, tuple(terms), classical, proof)


def weight_decomposition(report: TorsionReport) -> dict[int, int]:
    out: dict[int, int] = {}
    for t in report.terms:
        out[t.j] = out.get(t.j, 0) + t.contribution
    return out


def _stable_dims(pages) -> dict:
    if isinstance(pages, SpectralPage):
        return pages.dims
    return pages[-1].dims


def torsion_case2(pages, k: int) -> int:
    """sum_{p<k} dim E_inf^{p,k-p} from the stable page."""
    dims = _stable_dims(pages)
    top = max(p + qd for (p, qd) in dims)
    if not 0 <= k <= top:
        raise InputError(f"degree k={k} outside the available total degrees 0..{top}")
    return sum(d for (p, qd), d in dims.items() if p + qd == k and p < k)


def infinity_total(pages, k: int) -> int:
    return sum(d for (p, qd), d in _stable_dims(pages).items() if p + qd == k)


def e2_torsion_prediction(base: BaseModel, alg: LieAlgebraData, kslice: int, k: int) -> int:
    """sum_{p<k} b_p * dim H^{k-p}(g, Sym^kslice g): the degenerate-case value of torsion_case2."""
    H = [g.dim for g in cohomology(ce_complex(alg, kslice))]
    return sum(base.betti[p] * H[k - p] for p in range(min(k, base.n + 1)) if 0 <= k - p < len(H))


def partition_check(base: BaseModel, pages, k: int) -> dict:
    """Compare classical_part(k) + torsion_case2(k) with the E_inf total in degree k.

    The two agree exactly when E_inf^{k,0} equals b_k; the report carries that
    bottom-row value so a mismatch can be attributed.
    """
    dims = _stable_dims(pages)
    bottom = dims.get((k, 0), 0)
    classical = base.betti[k] if k <= base.n else 0
    lhs = classical + torsion_case2(pages, k)
    rhs = infinity_total(pages, k)
    return {"k": k, "classical": classical, "torsion": lhs - classical, "E_inf_total": rhs,
            "E_inf_bottom": bottom, "holds": lhs == rhs, "bottom_is_classical": bottom == classical}
