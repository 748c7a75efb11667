"""Compatible pairs on a discretized trivial bundle over a periodic lattice torus.

Field layout (numpy arrays, float64 unless an exact dtype is passed in):

* connection ``omega``:  shape (n, *grid, dim)   -- omega[d] is the value on axis d
* curvature  ``Omega``:  shape (npairs, *grid, dim), pairs in itertools.combinations order
* co-moment  ``lam``:    shape (*grid, dim)
* p-cochains in general: shape (C(n, p), *grid, *rest)

``grid`` is (N,)*n with spacing h = 1/N; site index i along an axis sits at i*h.
Differences are forward differences with periodic wrap, so d∘d = 0 exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm, null_space
from scipy.sparse.linalg import cg

from .errors import DegenerateConstraintError, InputError
from .liealg import LieAlgebraData


@dataclass(frozen=True)
class LatticeSpec:
    n: int
    N: int
    alg: LieAlgebraData

    def __post_init__(self):
        if not 1 <= self.n <= 4:
            raise InputError(f"lattice dimension n must be in 1..4, got {self.n}")
        if self.N < 4:
            raise InputError(f"lattice size N must be at least 4, got {self.N}")

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def grid(self) -> tuple[int, ...]:
        return (self.N,) * self.n

    @property
    def sites(self) -> int:
        return self.N ** self.n

    @property
    def dim(self) -> int:
        return self.alg.dim

    @property
    def volume(self) -> float:
        return self.h ** self.n

    @cached_property
    def C(self) -> np.ndarray:
        """Structure constants: [e_i, e_j] = sum_k C[i, j, k] e_k."""
        return self.alg.to_float()

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return list(combinations(range(self.n), 2))

    def coords(self) -> np.ndarray:
        """Site coordinates, shape (n, *grid)."""
        axes = [np.arange(self.N) * self.h] * self.n
        return np.array(np.meshgrid(*axes, indexing="ij"))


# -- pointwise algebra on arrays ---------------------------------------------------

def bracket_field(spec: LatticeSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("...i,...j,ijk->...k", a, b, spec.C)


def coadjoint_field(spec: LatticeSpec, xi: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """(ad*_xi lam)_b = -sum_{i,a} xi_i C[i,b,a] lam_a, so <ad*_xi lam, Y> = -<lam, [xi, Y]>."""
    return -np.einsum("...i,...a,iba->...b", xi, lam, spec.C)


def coadjoint_matrices(spec: LatticeSpec, xi: np.ndarray) -> np.ndarray:
    """M[..., b, a] with (ad*_xi lam)_b = sum_a M[b, a] lam_a."""
    return -np.einsum("...i,iba->...ba", xi, spec.C)


def shift(field_: np.ndarray, axis: int, steps: int = 1) -> np.ndarray:
    """Value at x + steps*e_axis (periodic); ``axis`` counts grid axes of a (*grid, ...) array."""
    return np.roll(field_, -steps, axis=axis)


# -- exterior derivative -----------------------------------------------------------

def discrete_d(spec: LatticeSpec, cochain: np.ndarray, p: int) -> np.ndarray:
    """Forward-difference d from p-cochains (C(n,p), *grid, ...) to (p+1)-cochains."""
    if not 0 <= p < spec.n:
        raise InputError(f"cannot apply d to a {p}-cochain on an {spec.n}-dimensional lattice")
    src = list(combinations(range(spec.n), p))
    if cochain.shape[0] != len(src) or cochain.shape[1:1 + spec.n] != spec.grid:
        raise InputError(f"{p}-cochain has shape {cochain.shape}, expected ({len(src)}, *{spec.grid}, ...)")
    index = {s: i for i, s in enumerate(src)}
    inv_h = spec.N
    out = []
    for J in combinations(range(spec.n), p + 1):
        acc = None
        for m, d in enumerate(J):
            comp = cochain[index[J[:m] + J[m + 1:]]]
            term = (shift(comp, d) - comp) * inv_h
            term = term if m % 2 == 0 else -term
            acc = term if acc is None else acc + term
        out.append(acc)
    return np.stack(out)


def d0(spec: LatticeSpec, f: np.ndarray) -> np.ndarray:
    """Gradient of a 0-cochain given as (*grid, ...): returns (n, *grid, ...)."""
    return discrete_d(spec, f[None], 0)


# -- curvature, residuals, obstruction ---------------------------------------------

def _check_omega(spec: LatticeSpec, omega: np.ndarray):
    if omega.shape != (spec.n, *spec.grid, spec.dim):
        raise InputError(f"connection has shape {omega.shape}, expected {(spec.n, *spec.grid, spec.dim)}")


def _check_lam(spec: LatticeSpec, lam: np.ndarray, name: str = "co-moment"):
    if lam.shape != (*spec.grid, spec.dim):
        raise InputError(f"{name} has shape {lam.shape}, expected {(*spec.grid, spec.dim)}")


def curvature(spec: LatticeSpec, omega: np.ndarray) -> np.ndarray:
    """Omega_{d1 d2} = (d omega)_{d1 d2} + [omega_{d1}, omega_{d2}] for d1 < d2."""
    _check_omega(spec, omega)
    if spec.n < 2:
        return np.zeros((0, *spec.grid, spec.dim))
    d_omega = discrete_d(spec, omega, 1)
    brk = np.stack([bracket_field(spec, omega[a], omega[b]) for a, b in spec.pairs])
    return d_omega + brk


def curvature_component(spec: LatticeSpec, Omega: np.ndarray, a: int, b: int) -> np.ndarray:
    """Omega_{ab} for any ordered pair, using antisymmetry of the stored d1 < d2 entries."""
    if a == b:
        return np.zeros_like(Omega[0]) if len(Omega) else np.zeros((*spec.grid, spec.dim))
    idx = {pr: i for i, pr in enumerate(spec.pairs)}
    return Omega[idx[a, b]] if a < b else -Omega[idx[b, a]]


def cartan_residual(spec: LatticeSpec, omega: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """R_d = (d lam)_d + ad*_{omega_d} lam, shape (n, *grid, dim)."""
    _check_omega(spec, omega)
    _check_lam(spec, lam)
    return d0(spec, lam) + coadjoint_field(spec, omega, lam[None])


@dataclass
class ObstructionReport:
    pairing: np.ndarray          # s(x) = max_pairs |<lam, Omega_pair>|
    coadjoint: np.ndarray        # max_pairs |ad*_{Omega_pair} lam|
    transport: np.ndarray        # max_pairs |K_pair lam| (plaquette transport defect)
    tol: float

    @property
    def max(self) -> float:
        return float(self.pairing.max()) if self.pairing.size else 0.0

    @property
    def mean(self) -> float:
        return float(self.pairing.mean()) if self.pairing.size else 0.0

    @property
    def coadjoint_max(self) -> float:
        return float(self.coadjoint.max()) if self.coadjoint.size else 0.0

    @property
    def transport_max(self) -> float:
        return float(self.transport.max()) if self.transport.size else 0.0

    @property
    def holonomic(self) -> bool:
        return self.max < self.tol

    def summary(self) -> dict:
        return {"max": self.max, "mean": self.mean, "holonomic": self.holonomic,
                "coadjoint_max": self.coadjoint_max, "transport_max": self.transport_max, "tol": self.tol}


def transport_defect(spec: LatticeSpec, omega: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """K_{ab} lam with K = (T_b(x+e_a) T_a(x) - T_a(x+e_b) T_b(x)) / h^2 and T_d = 1 - h ad*_{omega_d}.

    K lam vanishes wherever lam is transported consistently around the plaquette,
    in particular wherever the Cartan residual vanishes; K = -ad*_Omega + O(h).
    """
    h = spec.h
    M = coadjoint_matrices(spec, omega)
    eye = np.eye(spec.dim)
    T = eye - h * M
    out = []
    for a, b in spec.pairs:
        Ta, Tb = T[a], T[b]
        left = np.einsum("...ij,...jk,...k->...i", shift(Tb, a), Ta, lam)
        right = np.einsum("...ij,...jk,...k->...i", shift(Ta, b), Tb, lam)
        out.append((left - right) / h**2)
    return np.stack(out) if out else np.zeros((0, *spec.grid, spec.dim))


def transport_defect_from_residual(spec: LatticeSpec, omega: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Same quantity written through the residual: -(dR)_{ab} + M_b(x+e_a) R_a - M_a(x+e_b) R_b."""
    R = cartan_residual(spec, omega, lam)
    M = coadjoint_matrices(spec, omega)
    dR = discrete_d(spec, R, 1)
    out = []
    for i, (a, b) in enumerate(spec.pairs):
        out.append(-dR[i] + np.einsum("...ij,...j->...i", shift(M[b], a), R[a])
                   - np.einsum("...ij,...j->...i", shift(M[a], b), R[b]))
    return np.stack(out) if out else np.zeros((0, *spec.grid, spec.dim))


def integrability_obstruction(spec: LatticeSpec, omega: np.ndarray, lam: np.ndarray,
                              tol: float = 1e-10) -> ObstructionReport:
    Omega = curvature(spec, omega)
    if len(Omega) == 0:
        z = np.zeros(spec.grid)
        return ObstructionReport(z, z, z, tol)
    pair = np.abs(np.einsum("...i,...i->...", Omega, lam[None])).max(axis=0)
    coad = np.linalg.norm(coadjoint_field(spec, Omega, lam[None]), axis=-1).max(axis=0)
    trans = np.linalg.norm(transport_defect(spec, omega, lam), axis=-1).max(axis=0)
    return ObstructionReport(pair, coad, trans, tol)


# -- forward construction ----------------------------------------------------------

@dataclass
class ConstraintSubspaceReport:
    site: tuple[int, ...]
    basis: np.ndarray            # rows: orthonormal basis of D inside R^n + g
    dim_D: int
    dim_D_cap_V: int
    dim_D_plus_V: int
    ambient: int

    @property
    def spans_tangent(self) -> bool:
        return self.dim_D_plus_V == self.ambient

    def as_dict(self) -> dict:
        return {"site": list(self.site), "dim_D": self.dim_D, "dim_D_cap_V": self.dim_D_cap_V,
                "dim_D_plus_V": self.dim_D_plus_V, "ambient": self.ambient,
                "spans_tangent": self.spans_tangent}


def constraint_distribution(spec: LatticeSpec, omega: np.ndarray, lam: np.ndarray, x,
                            rtol: float = 1e-12) -> ConstraintSubspaceReport:
    """Kernel of (v, xi) -> <lam(x), sum_d v_d omega_d(x) + xi> in R^n + g."""
    x = tuple(int(i) % spec.N for i in x)
    if len(x) != spec.n:
        raise InputError(f"site needs {spec.n} indices, got {len(x)}")
    lx = lam[x]
    if not np.any(lx):
        raise DegenerateConstraintError(f"co-moment vanishes at site {x}; the nullifier is the whole tangent space")
    wx = omega[(slice(None), *x)]                      # (n, dim)
    functional = np.concatenate([wx @ lx, lx])[None, :]
    basis = null_space(functional, rcond=rtol).T
    ambient = spec.n + spec.dim
    vertical = np.hstack([np.zeros((spec.dim, spec.n)), np.eye(spec.dim)])
    dim_sum = int(np.linalg.matrix_rank(np.vstack([basis, vertical]), tol=rtol * ambient))
    dim_cap = basis.shape[0] + spec.dim - dim_sum
    return ConstraintSubspaceReport(x, basis, basis.shape[0], dim_cap, dim_sum, ambient)


# -- variational inverse construction ----------------------------------------------

def residual_operator(spec: LatticeSpec, omega: np.ndarray) -> sp.csr_matrix:
    """Sparse L with L @ lam.ravel() == cartan_residual(spec, omega, lam).ravel()."""
    _check_omega(spec, omega)
    S, g, n = spec.sites, spec.dim, spec.n
    site = np.arange(S).reshape(spec.grid)
    M = coadjoint_matrices(spec, omega)            # (n, *grid, g, g)
    rows, cols, vals = [], [], []
    bidx = np.arange(g)
    for d in range(n):
        here = site.ravel()
        nxt = shift(site, d).ravel()
        r = (d * S + here)[:, None] * g + bidx[None, :]
        # difference quotient
        rows += [r.ravel(), r.ravel()]
        cols += [(nxt[:, None] * g + bidx[None, :]).ravel(), (here[:, None] * g + bidx[None, :]).ravel()]
        vals += [np.full(r.size, float(spec.N)), np.full(r.size, -float(spec.N))]
        # coadjoint block M_d(x)[b, a]
        Md = M[d].reshape(S, g, g)
        rr = np.broadcast_to(r[:, :, None], (S, g, g))
        cc = np.broadcast_to((here[:, None] * g)[:, None, :] + bidx[None, None, :], (S, g, g))
        rows.append(rr.ravel())
        cols.append(cc.ravel())
        vals.append(Md.ravel())
    L = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n * S * g, S * g))
    L = L.tocsr()
    L.eliminate_zeros()
    return L


def compatibility_functional(spec: LatticeSpec, omega: np.ndarray, lam: np.ndarray,
                             lam_anchor: np.ndarray | None = None, alpha: float = 0.0) -> float:
    """1/2 h^n sum |R|^2 + alpha h^n sum |lam - anchor|^2."""
    if alpha < 0:
        raise InputError(f"alpha must be nonnegative, got {alpha}")
    R = cartan_residual(spec, omega, lam)
    val = 0.5 * spec.volume * float(np.sum(R * R))
    if alpha:
        _check_lam(spec, lam_anchor, "anchor")
        diff = lam - lam_anchor
        val += alpha * spec.volume * float(np.sum(diff * diff))
    return val


def functional_gradient(spec: LatticeSpec, omega: np.ndarray, lam: np.ndarray,
                        lam_anchor: np.ndarray | None = None, alpha: float = 0.0,
                        L: sp.spmatrix | None = None) -> np.ndarray:
    """h^n L^T L lam + 2 alpha h^n (lam - anchor), as a co-moment field."""
    L = residual_operator(spec, omega) if L is None else L
    g = spec.volume * (L.T @ (L @ lam.ravel()))
    if alpha:
        g = g + 2 * alpha * spec.volume * (lam - lam_anchor).ravel()
    return g.reshape(lam.shape)


# relative slack for round-off when comparing consecutive functional values
MONOTONE_RTOL = 1e-13


@dataclass
class SolveResult:
    lam: np.ndarray
    history: list[float]
    converged: bool
    iterations: int
    normal_residual: float
    cartan_residual_max: float
    functional: float
    pinned_site: tuple | None = None
    message: str = ""

    @property
    def monotone(self) -> bool:
        """Nonincreasing history, allowing float round-off in evaluating the functional."""
        return all(b <= a + MONOTONE_RTOL * abs(a) for a, b in zip(self.history, self.history[1:]))

    def summary(self) -> dict:
        return {"converged": self.converged, "iterations": self.iterations,
                "normal_residual": self.normal_residual, "cartan_residual_max": self.cartan_residual_max,
                "functional": self.functional, "functional_initial": self.history[0] if self.history else None,
                "monotone": self.monotone, "pinned_site": list(self.pinned_site) if self.pinned_site else None,
                "message": self.message}


def solve_lambda(spec: LatticeSpec, omega: np.ndarray, lam0: np.ndarray, lam_anchor: np.ndarray | None = None,
                 alpha: float = 0.0, tol: float = 1e-10, maxiter: int = 2000,
                 pin_site=None) -> SolveResult:
    """Minimize the compatibility functional by conjugate gradients on the normal equations.

    With alpha > 0 the system (L^T L + 2 alpha) lam = 2 alpha anchor is positive definite.
    With alpha = 0 the zero field is a trivial minimizer, so lam is pinned at one site
    (default: the origin) to its value in lam0 and the remaining unknowns are solved for.
    Reaching maxiter returns a report with converged=False rather than raising.
    """
    if tol <= 0:
        raise InputError(f"tol must be positive, got {tol}")
    if alpha < 0:
        raise InputError(f"alpha must be nonnegative, got {alpha}")
    _check_lam(spec, lam0, "initial co-moment")
    if alpha > 0:
        _check_lam(spec, lam_anchor, "anchor")
    L = residual_operator(spec, omega)
    LtL = (L.T @ L).tocsr()
    g = spec.dim
    size = spec.sites * g
    history: list[float] = []

    def record(flat):
        history.append(compatibility_functional(spec, omega, flat.reshape(lam0.shape), lam_anchor, alpha))

    pinned = None
    if alpha > 0:
        A = LtL + 2 * alpha * sp.identity(size, format="csr")
        b = 2 * alpha * lam_anchor.ravel()
        x0 = lam0.ravel().astype(float)
        record(x0)
        x, info = cg(A, b, x0=x0, rtol=tol, atol=0.0, maxiter=maxiter, callback=record)
        res = float(np.linalg.norm(A @ x - b))
        scale = float(np.linalg.norm(b)) or 1.0
    else:
        pinned = tuple(int(i) for i in (pin_site if pin_site is not None else (0,) * spec.n))
        start = int(np.ravel_multi_index(pinned, spec.grid)) * g
        fixed = np.zeros(size)
        fixed[start:start + g] = lam0[pinned]
        if not np.any(fixed):
            raise DegenerateConstraintError(f"pinned value at site {pinned} is zero")
        free = np.setdiff1d(np.arange(size), np.arange(start, start + g))
        A = LtL[free][:, free]
        b = -(LtL[free] @ fixed)
        x0 = lam0.ravel()[free].astype(float)

        def full(xf):
            out = fixed.copy()
            out[free] = xf
            return out

        record(full(x0))
        xf, info = cg(A, b, x0=x0, rtol=tol, atol=0.0, maxiter=maxiter, callback=lambda xk: record(full(xk)))
        x = full(xf)
        res = float(np.linalg.norm(A @ xf - b))
        scale = float(np.linalg.norm(b)) or 1.0
    lam = x.reshape(lam0.shape)
    converged = info == 0
    R = cartan_residual(spec, omega, lam)
    msg = "converged" if converged else (f"maximum iterations ({maxiter}) reached" if info > 0 else "breakdown")
    return SolveResult(lam, history, converged, len(history) - 1, res / scale,
                       float(np.abs(R).max()), compatibility_functional(spec, omega, lam, lam_anchor, alpha),
                       pinned, msg)


# -- symplectic decomposition and Frobenius identity -------------------------------

@dataclass
class SymplecticReport:
    error: np.ndarray            # E(x) per pair
    cartan_residual_max: float

    @property
    def max_error(self) -> float:
        return float(np.abs(self.error).max()) if self.error.size else 0.0

    def summary(self) -> dict:
        return {"max_error": self.max_error, "cartan_residual_max": self.cartan_residual_max}


def symplectic_check(spec: LatticeSpec, omega: np.ndarray, lam: np.ndarray) -> SymplecticReport:
    """Defect of d theta = <lam, Omega> + <lam, [omega_a, omega_b]> for theta_d = <lam, omega_d>.

    The discrete product rule contributes <R_a, omega_b(x+e_a)> - <R_b, omega_a(x+e_b)>,
    which is subtracted so the remaining defect is the O(h) bracket-shift term
    (identically zero for abelian algebras).
    """
    theta = np.einsum("...i,...i->...", omega, lam[None])              # (n, *grid)
    dtheta = discrete_d(spec, theta, 1)
    Omega = curvature(spec, omega)
    R = cartan_residual(spec, omega, lam)
    errs = []
    for i, (a, b) in enumerate(spec.pairs):
        brk = bracket_field(spec, omega[a], omega[b])
        corr = (np.einsum("...i,...i->...", R[a], shift(omega[b], a))
                - np.einsum("...i,...i->...", R[b], shift(omega[a], b)))
        errs.append(dtheta[i] - np.einsum("...i,...i->...", lam, Omega[i] + brk) - corr)
    err = np.stack(errs) if errs else np.zeros((0, *spec.grid))
    return SymplecticReport(np.abs(err), float(np.abs(R).max()))


def horizontal_commutator(spec: LatticeSpec, omega: np.ndarray, a: int, b: int) -> np.ndarray:
    """omega([H_a, H_b]) for the horizontal lifts H_d = (e_d, -omega_d) on the lattice.

    Vertical directions are right-invariant fields, whose bracket is minus the Lie
    bracket; the base parts commute, so only the vertical part survives.
    """
    da = (shift(omega[b], a) - omega[b]) * spec.N
    db = (shift(omega[a], b) - omega[a]) * spec.N
    return -da + db - bracket_field(spec, omega[a], omega[b])


@dataclass
class SmoothField:
    """Trigonometric field f_c(x) = sum_t amp_t sin(2 pi k_t . x + phi_t), one sum per component."""
    amps: np.ndarray      # (components, terms)
    waves: np.ndarray     # (components, terms, n) integer wave vectors
    phases: np.ndarray    # (components, terms)

    @classmethod
    def random(cls, rng: np.random.Generator, components: int, n: int, amp: float, terms: int = 1,
               kmax: int = 1) -> "SmoothField":
        return cls(amp * rng.uniform(-1, 1, (components, terms)),
                   rng.integers(-kmax, kmax + 1, (components, terms, n)),
                   rng.uniform(0, 2 * math.pi, (components, terms)))

    def _arg(self, X):
        # X: (n, *grid) -> (components, terms, *grid)
        return 2 * math.pi * np.einsum("ctn,n...->ct...", self.waves, X) + self.phases[(..., *([None] * (X.ndim - 1)))]

    def value(self, X) -> np.ndarray:
        s = np.sin(self._arg(X)) * self.amps[(..., *([None] * (X.ndim - 1)))]
        return np.moveaxis(s.sum(axis=1), 0, -1)           # (*grid, components)

    def derivative(self, X, axis: int) -> np.ndarray:
        k = self.waves[..., axis]
        c = np.cos(self._arg(X)) * (2 * math.pi * k * self.amps)[(..., *([None] * (X.ndim - 1)))]
        return np.moveaxis(c.sum(axis=1), 0, -1)


@dataclass
class SmoothConnection:
    """Analytic connection omega_d = F_d(x) sampled on lattices of any size."""
    parts: list[SmoothField]   # one per axis, each with dim components

    @classmethod
    def random(cls, n: int, dim: int, amp: float, seed: int) -> "SmoothConnection":
        rng = np.random.default_rng(seed)
        return cls([SmoothField.random(rng, dim, n, amp) for _ in range(n)])

    def sample(self, spec: LatticeSpec) -> np.ndarray:
        X = spec.coords()
        return np.stack([f.value(X) for f in self.parts])

    def curvature_exact(self, spec: LatticeSpec) -> np.ndarray:
        X = spec.coords()
        vals = [f.value(X) for f in self.parts]
        out = []
        for a, b in spec.pairs:
            d = self.parts[b].derivative(X, a) - self.parts[a].derivative(X, b)
            out.append(d + bracket_field(spec, vals[a], vals[b]))
        return np.stack(out)


def frobenius_defect(spec: LatticeSpec, conn: SmoothConnection, sign: int = -1) -> float:
    """max |omega([H_a, H_b]) - sign * Omega_ab| against the analytic curvature."""
    omega = conn.sample(spec)
    Om = conn.curvature_exact(spec)
    worst = 0.0
    for i, (a, b) in enumerate(spec.pairs):
        worst = max(worst, float(np.abs(horizontal_commutator(spec, omega, a, b) - sign * Om[i]).max()))
    return worst


def refinement_order(sizes, errors) -> float:
    """Least-squares slope of log(error) against log(h)."""
    h = np.log([1.0 / s for s in sizes])
    e = np.log(errors)
    return float(np.polyfit(h, e, 1)[0])


# -- identities --------------------------------------------------------------------

def step4_identity_sample(alg: LieAlgebraData, trials: int = 1000, seed: int = 0) -> float:
    """max |<ad*_X lam, Y> - <ad*_Y lam, X> + 2 <lam, [X, Y]>| over random samples."""
    if trials < 1:
        raise InputError("trials must be at least 1")
    C = alg.to_float()
    rng = np.random.default_rng(seed)
    lam = rng.standard_normal((trials, alg.dim))
    X = rng.standard_normal((trials, alg.dim))
    Y = rng.standard_normal((trials, alg.dim))
    coad = lambda xi, la: -np.einsum("ti,ta,iba->tb", xi, la, C)
    brk = np.einsum("ti,tj,ijk->tk", X, Y, C)
    err = (np.einsum("tb,tb->t", coad(X, lam), Y) - np.einsum("tb,tb->t", coad(Y, lam), X)
           + 2 * np.einsum("tk,tk->t", lam, brk))
    return float(np.abs(err).max())


def gauge_shift(spec: LatticeSpec, omega: np.ndarray, lam: np.ndarray, xi: np.ndarray, dt: float):
    """First-order infinitesimal gauge transformation by a 0-cochain xi."""
    new_omega = omega + dt * (bracket_field(spec, omega, xi[None]) - d0(spec, xi))
    new_lam = lam - dt * coadjoint_field(spec, xi, lam)
    return new_omega, new_lam


def gauge_equivariance_slope(spec: LatticeSpec, omega: np.ndarray, lam: np.ndarray, xi: np.ndarray,
                             dts=(1e-2, 5e-3, 2.5e-3)) -> tuple[float, list[float]]:
    """Log-slope of |I(shifted) - I| against dt (alpha = 0)."""
    base = compatibility_functional(spec, omega, lam)
    diffs = []
    for dt in dts:
        o, l = gauge_shift(spec, omega, lam, xi, dt)
        diffs.append(abs(compatibility_functional(spec, o, l) - base))
    slope = float(np.polyfit(np.log(dts), np.log(diffs), 1)[0])
    return slope, diffs


# -- evolution ---------------------------------------------------------------------

EVOLUTION_METHODS = ("euler", "rk4")


def evolution_rhs(spec: LatticeSpec, omega: np.ndarray, xi: np.ndarray, X: np.ndarray) -> np.ndarray:
    """d^omega xi - iota_X Omega:  (d xi)_d + [omega_d, xi] - sum_e X_e Omega_{e d}."""
    out = d0(spec, xi) + bracket_field(spec, omega, xi[None])
    if spec.n >= 2 and np.any(X):
        Omega = curvature(spec, omega)
        for d in range(spec.n):
            for e in range(spec.n):
                if e != d:
                    out[d] -= X[e][..., None] * curvature_component(spec, Omega, e, d)
    return out


@dataclass
class EvolutionResult:
    times: list[float]
    trajectory: list[np.ndarray]
    curvature_norms: list[float]
    blowup_step: int | None = None

    @property
    def ok(self) -> bool:
        return self.blowup_step is None

    def summary(self) -> dict:
        return {"steps": len(self.trajectory) - 1, "final_time": self.times[-1],
                "curvature_norms": self.curvature_norms, "blowup_step": self.blowup_step}


def evolve_connection(spec: LatticeSpec, omega0: np.ndarray, xi: np.ndarray, X: np.ndarray | None,
                      dt: float, steps: int, method: str = "rk4") -> EvolutionResult:
    if method not in EVOLUTION_METHODS:
        raise InputError(f"method must be one of {EVOLUTION_METHODS}, got {method!r}")
    if not dt > 0:
        raise InputError(f"dt must be positive, got {dt}")
    if steps < 0:
        raise InputError("steps must be nonnegative")
    _check_omega(spec, omega0)
    _check_lam(spec, xi, "xi")
    X = np.zeros((spec.n, *spec.grid)) if X is None else np.asarray(X, dtype=float)
    if X.shape != (spec.n, *spec.grid):
        raise InputError(f"vector field has shape {X.shape}, expected {(spec.n, *spec.grid)}")
    F = lambda w: evolution_rhs(spec, w, xi, X)

    def curv_norm(w):
        Om = curvature(spec, w)
        with np.errstate(over="ignore", invalid="ignore"):
            return float(np.sqrt(spec.volume * np.sum(Om * Om))) if Om.size else 0.0

    omega = omega0.astype(float).copy()
    times, traj, norms = [0.0], [omega.copy()], [curv_norm(omega)]
    for step in range(1, steps + 1):
        if method == "euler":
            omega = omega + dt * F(omega)
        else:
            k1 = F(omega)
            k2 = F(omega + 0.5 * dt * k1)
            k3 = F(omega + 0.5 * dt * k2)
            k4 = F(omega + dt * k3)
            omega = omega + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        norm = curv_norm(omega) if np.all(np.isfinite(omega)) else math.inf
        if not math.isfinite(norm):
            return EvolutionResult(times, traj, norms, step)
        times.append(step * dt)
        traj.append(omega.copy())
        norms.append(norm)
    return EvolutionResult(times, traj, norms, None)


def gauge_rotation(spec: LatticeSpec, omega0: np.ndarray, xi_const: np.ndarray, t: float) -> np.ndarray:
    """Closed form exp(-t ad_xi) omega0 of the flat, constant-xi evolution."""
    ad = np.einsum("i,ijk->kj", xi_const, spec.C)      # ad_xi[k, j] = [xi, e_j]_k
    U = expm(-t * ad)
    return np.einsum("kj,...j->...k", U, omega0)


# -- field generation and files ----------------------------------------------------

FIELD_KINDS = ("connection", "comoment", "curvature", "vector")


def _kv(text: str, kind: str) -> dict:
    out = {}
    for part in text.split(":")[1:]:
        key, _, val = part.partition("=")
        if key not in ("seed", "amp"):
            raise InputError(f"unknown key {key!r} in {kind} spec {text!r}")
        try:
            out[key] = int(val) if key == "seed" else float(val)
        except ValueError as exc:
            raise InputError(f"bad value for {key!r} in {kind} spec {text!r}") from exc
    return out


def _coeffs(text: str, count: int, what: str) -> np.ndarray:
    try:
        vals = [float(x) for x in text.split(":", 1)[1].split(",")]
    except (IndexError, ValueError) as exc:
        raise InputError(f"bad constant {what} spec {text!r}") from exc
    if len(vals) != count:
        raise InputError(f"constant {what} needs {count} values, got {len(vals)}")
    return np.asarray(vals)


def connection_from_spec(spec: LatticeSpec, text: str) -> np.ndarray:
    """zero | random:seed=S:amp=A | smooth:seed=S:amp=A | constant-curvature:a | file path."""
    if text == "zero":
        return np.zeros((spec.n, *spec.grid, spec.dim))
    if text.startswith("random"):
        kv = _kv(text, "connection")
        return random_connection(spec, kv.get("seed", 0), kv.get("amp", 1.0))
    if text.startswith("smooth"):
        kv = _kv(text, "connection")
        return SmoothConnection.random(spec.n, spec.dim, kv.get("amp", 1.0), kv.get("seed", 0)).sample(spec)
    if text.startswith("constant-curvature"):
        try:
            a = float(text.split(":", 1)[1])
        except (IndexError, ValueError) as exc:
            raise InputError(f"bad constant-curvature spec {text!r}") from exc
        return constant_curvature_connection(spec, a)
    return _field_file(spec, text, "connection")


def comoment_from_spec(spec: LatticeSpec, text: str) -> np.ndarray:
    """zero | random:seed=S:amp=A | smooth:seed=S:amp=A | const:c1,...,c_dim | file path."""
    if text == "zero":
        return np.zeros((*spec.grid, spec.dim))
    if text.startswith("random"):
        kv = _kv(text, "co-moment")
        return random_comoment(spec, kv.get("seed", 0), kv.get("amp", 1.0))
    if text.startswith("smooth"):
        kv = _kv(text, "co-moment")
        rng = np.random.default_rng(kv.get("seed", 0))
        return SmoothField.random(rng, spec.dim, spec.n, kv.get("amp", 1.0)).value(spec.coords())
    if text.startswith("const:"):
        return constant_comoment(spec, _coeffs(text, spec.dim, "co-moment"))
    return _field_file(spec, text, "comoment")


def vector_field_from_spec(spec: LatticeSpec, text: str) -> np.ndarray:
    """zero | random:seed=S:amp=A | const:v1,...,v_n | file path (base vector field, shape (n, *grid))."""
    if text == "zero":
        return np.zeros((spec.n, *spec.grid))
    if text.startswith("random"):
        kv = _kv(text, "vector field")
        return kv.get("amp", 1.0) * np.random.default_rng(kv.get("seed", 0)).standard_normal((spec.n, *spec.grid))
    if text.startswith("const:"):
        v = _coeffs(text, spec.n, "vector field")
        return np.broadcast_to(v[(...,) + (None,) * spec.n], (spec.n, *spec.grid)).copy()
    return _field_file(spec, text, "vector")


def _field_file(spec: LatticeSpec, text: str, kind: str) -> np.ndarray:
    try:
        with open(text) as fh:
            content = fh.read()
    except OSError as exc:
        raise InputError(f"unknown {kind} spec or unreadable file {text!r}") from exc
    return field_from_json(spec, content, kind)


def constant_curvature_connection(spec: LatticeSpec, a: float) -> np.ndarray:
    """omega_0 = a e_0, omega_1 = a e_1 (constant); for su2 the curvature is a^2 e_2 everywhere."""
    if spec.n < 2 or spec.dim < 2:
        raise InputError("constant-curvature connection needs n >= 2 and dim g >= 2")
    omega = np.zeros((spec.n, *spec.grid, spec.dim))
    omega[0, ..., 0] = a
    omega[1, ..., 1] = a
    return omega


def random_connection(spec: LatticeSpec, seed: int, amp: float) -> np.ndarray:
    return amp * np.random.default_rng(seed).standard_normal((spec.n, *spec.grid, spec.dim))


def random_comoment(spec: LatticeSpec, seed: int, amp: float = 1.0) -> np.ndarray:
    return amp * np.random.default_rng(seed).standard_normal((*spec.grid, spec.dim))


def constant_comoment(spec: LatticeSpec, coeffs) -> np.ndarray:
    c = np.asarray(coeffs, dtype=float)
    if c.shape != (spec.dim,):
        raise InputError(f"constant co-moment needs {spec.dim} coefficients")
    return np.broadcast_to(c, (*spec.grid, spec.dim)).copy()


def normalize_comoment(spec: LatticeSpec, lam: np.ndarray) -> np.ndarray:
    """Rescale lam to unit Euclidean norm at every site."""
    _check_lam(spec, lam)
    norms = np.linalg.norm(lam, axis=-1, keepdims=True)
    if not np.all(norms > 0):
        site = tuple(int(i) for i in np.argwhere(norms[..., 0] == 0)[0])
        raise DegenerateConstraintError(f"co-moment vanishes at site {site}; cannot normalize")
    return lam / norms


def field_to_json(spec: LatticeSpec, arr: np.ndarray, kind: str) -> str:
    if kind not in FIELD_KINDS:
        raise InputError(f"field kind must be one of {FIELD_KINDS}")
    return json.dumps({"n": spec.n, "N": spec.N, "alg_dim": spec.dim, "field_kind": kind,
                       "shape": list(arr.shape), "data": arr.ravel().tolist()})


def field_from_json(spec: LatticeSpec, text: str, kind: str) -> np.ndarray:
    try:
        data = json.loads(text)
        header = (int(data["n"]), int(data["N"]), int(data["alg_dim"]), data["field_kind"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed field file: {exc}") from exc
    if header != (spec.n, spec.N, spec.dim, kind):
        raise InputError(f"field header {header} does not match lattice {(spec.n, spec.N, spec.dim, kind)}")
    arr = np.asarray(data["data"], dtype=float)
    try:
        return arr.reshape(data["shape"])
    except ValueError as exc:
        raise InputError("field data length does not match its shape") from exc
