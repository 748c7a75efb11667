"""The invariant suite run by ``spencerkit selftest``.

Every check returns {"name", "ok", "details"}; the suite result is deterministic
for a fixed seed (no timings or paths are recorded).
"""

from __future__ import annotations

import numpy as np

from .derham import resolve_base
from .liealg import catalog, check_structure
from .spencer_complex import (ce_complex, cohomology, nilpotency_check, spencer_chain,
                              spencer_nilpotency_finding)
from .specseq import (build_spencer_double, check_bicomplex, compute_pages, convergence_report,
                      infinity_by_total_degree, page_dims_by_ranks, total_cohomology)
from .torsion import e2_torsion_prediction, partition_check, torsion_case1, torsion_case2

STRUCTURE_PRESETS = ["su2", "sl2", "sl3", "heisenberg3"] + [f"abelian({d})" for d in range(1, 7)]
RAW_FINDING_ALGEBRAS = ["abelian(2)", "su2", "sl2", "heisenberg3", "sl3"]


def _check(name, ok, **details):
    return {"name": name, "ok": bool(ok), "details": details}


def check_structures():
    bad = {}
    for name in STRUCTURE_PRESETS:
        rep = check_structure(catalog(name))
        if not rep.ok:
            bad[name] = {"antisymmetry": len(rep.antisymmetry), "jacobi": len(rep.jacobi)}
    return _check("structure", not bad, presets=STRUCTURE_PRESETS, violations=bad)


def bicomplex_cases():
    for base in ["torus:2:3", "torus:4:3", "formal:1,2,1"]:
        for alg in ["su2", "sl2", "abelian(2)"]:
            for mode in ["spencer", "ce"]:
                yield base, alg, mode


def check_bicomplexes():
    failures, count = [], 0
    for base, alg, mode in bicomplex_cases():
        K = build_spencer_double(resolve_base(base), catalog(alg), 2, mode)
        rep = check_bicomplex(K)
        count += rep.checked
        if not rep.ok:
            failures.append({"base": base, "algebra": alg, "mode": mode, **rep.as_dict()})
    return _check("bicomplex_identities", not failures, identities_checked=count, failures=failures)


def check_spencer_nilpotency():
    killing = {}
    for name in ["su2", "sl2"]:
        rep = nilpotency_check(spencer_chain(catalog(name), 5, "killing_dual"))
        killing[name] = rep.failing_degrees
    findings = [spencer_nilpotency_finding(catalog(a), 4, "raw").as_dict() for a in RAW_FINDING_ALGEBRAS]
    ok = all(not v for v in killing.values()) and all(f["verdict"] != "implementation bug" for f in findings)
    return _check("spencer_nilpotency", ok, killing_dual_failures=killing, raw_findings=findings)


def check_whitehead():
    table = {}
    ok = True
    for name in ["su2", "sl2"]:
        for k in range(4):
            H = [g.dim for g in cohomology(ce_complex(catalog(name), k))]
            table[f"{name}:k={k}"] = H
            ok &= H[1] == 0 and H[2] == 0
    heis = [g.dim for g in cohomology(ce_complex(catalog("heisenberg3"), 0))]
    ok &= heis[1] >= 1
    return _check("whitehead", ok, cohomology=table, heisenberg3_trivial=heis)


def spectral_cases():
    for base in ["torus:2:3", "formal:1,2,1"]:
        for alg in ["su2", "sl2", "abelian(2)"]:
            yield base, alg, "spencer", None
            for k in range(3):
                yield base, alg, "ce", k
    yield "torus:4:3", "su2", "spencer", None


def run_spectral(base_name, alg_name, mode, k, representatives=True):
    base, alg = resolve_base(base_name), catalog(alg_name)
    K = build_spencer_double(base, alg, 2, mode, k=k)
    pages = compute_pages(K, representatives=representatives)
    total = total_cohomology(K)
    return base, alg, K, pages, total


def check_spectral():
    runs, ok = [], True
    for base_name, alg_name, mode, k in spectral_cases():
        big = base_name == "torus:4:3"
        base, alg, K, pages, total = run_spectral(base_name, alg_name, mode, k, representatives=not big)
        conv = convergence_report(pages, base.n, K, total)
        inf = infinity_by_total_degree(pages[-1])
        oracle = all(inf.get(m, 0) == total[m] for m in range(len(total)))
        monotone = all(pages[i + 1].dims[key] <= pages[i].dims[key]
                       for i in range(len(pages) - 1) for key in pages[i].dims)
        kunneth = True
        if mode == "ce":
            H = [g.dim for g in cohomology(ce_complex(alg, k))]
            e2 = next(pg for pg in pages if pg.r == 2)
            kunneth = all(e2.dims[p, q] == base.betti[p] * H[q] for (p, q) in e2.dims)
        ranks_agree = big or all(page_dims_by_ranks(K, pg.r) == pg.dims for pg in pages)
        good = (oracle and conv["N_le_n_plus_1"] and conv["E2_degenerate"] and conv["dimensional_barrier_ok"]
                and monotone and kunneth and ranks_agree)
        ok &= good
        runs.append({"base": base_name, "algebra": alg_name, "mode": mode, "k": k, "N": conv["N"],
                     "total_cohomology": total, "oracle": oracle, "E2_degenerate": conv["E2_degenerate"],
                     "kunneth_E2": kunneth, "rank_formula_agrees": ranks_agree, "monotone": monotone})
    return _check("spectral_sequences", ok, runs=runs)


def check_torsion():
    t2 = resolve_base("torus:2:3")
    su2 = catalog("su2")
    r4, r2 = torsion_case1(t2, su2, 4, "formal"), torsion_case1(t2, su2, 2, "formal")
    ring = torsion_case1(resolve_base("torus-ring:2"), su2, 4, "ring")
    consistency, partitions = [], []
    ok = r4.total_dim == 1 and r2.total_dim == 0 and ring.total_dim <= r4.total_dim
    for kslice in range(3):
        K = build_spencer_double(t2, su2, 2, "ce", k=kslice)
        pages = compute_pages(K, representatives=False)
        for k in range(len(total_cohomology(K))):
            c2, pred = torsion_case2(pages, k), e2_torsion_prediction(t2, su2, kslice, k)
            consistency.append({"slice": kslice, "k": k, "case2": c2, "e2_prediction": pred})
            ok &= c2 == pred
            if k <= t2.n:
                part = partition_check(t2, pages, k)
                partitions.append({"slice": kslice, **part})
                ok &= part["holds"] == part["bottom_is_classical"]
    return _check("torsion", ok, case1_k4=r4.as_dict(), case1_k2=r2.as_dict(), ring_k4=ring.total_dim,
                  statement_vs_proof={"k4": r4.discrepancy, "k2": r2.discrepancy},
                  case2_consistency=consistency, partition=partitions)


def check_lattice(seed: int = 0):
    from . import lattice as L
    su2 = catalog("su2")
    out = []
    step = {"su2": L.step4_identity_sample(su2, 1000, seed),
            "sl3": L.step4_identity_sample(catalog("sl3"), 1000, seed)}
    out.append(_check("coadjoint_pairing_identity", max(step.values()) < 1e-11, max_error=step))

    spec = L.LatticeSpec(2, 8, su2)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for cfg in range(3):
        om = L.random_connection(spec, seed + 10 + cfg, 0.5)
        lam = L.random_comoment(spec, seed + 20 + cfg)
        anc = L.random_comoment(spec, seed + 30 + cfg)
        alpha = 0.1 * (cfg + 1)
        G = L.functional_gradient(spec, om, lam, anc, alpha)
        for _ in range(20):
            v = rng.standard_normal(lam.shape)
            eps = 1e-5
            fd = (L.compatibility_functional(spec, om, lam + eps * v, anc, alpha)
                  - L.compatibility_functional(spec, om, lam - eps * v, anc, alpha)) / (2 * eps)
            an = float(np.sum(G * v))
            worst = max(worst, abs(fd - an) / abs(an))
    out.append(_check("gradient", worst < 1e-6, max_relative_error=worst))

    out.append(inverse_construction_check(spec))

    es, fs, sizes = [], [], [8, 16, 32]
    rng2 = np.random.default_rng(seed + 100)
    conn = L.SmoothConnection([L.SmoothField.random(rng2, 3, 2, 0.5) for _ in range(2)])
    lamf = L.SmoothField.random(rng2, 3, 2, 1.0)
    for N in sizes:
        s = L.LatticeSpec(2, N, su2)
        es.append(L.symplectic_check(s, conn.sample(s), lamf.value(s.coords())).max_error)
        fs.append(L.frobenius_defect(s, conn))
    o1, o2 = L.refinement_order(sizes, es), L.refinement_order(sizes, fs)
    out.append(_check("refinement_orders", o1 >= 0.7 and o2 >= 0.7, symplectic_errors=es, symplectic_order=o1,
                      frobenius_errors=fs, frobenius_order=o2))

    out.append(evolution_check(spec))
    return out


def inverse_construction_check(spec):
    from . import lattice as L
    zero = np.zeros((spec.n, *spec.grid, spec.dim))
    anchor = L.constant_comoment(spec, [0.3, -0.2, 0.5])
    flat = L.solve_lambda(spec, zero, L.random_comoment(spec, 9), anchor, 1.0, tol=1e-13)
    flat_err = float(np.abs(flat.lam - anchor).max())
    om = L.random_connection(spec, 7, 0.05)
    small = L.solve_lambda(spec, om, L.random_comoment(spec, 9), anchor, 0.1, tol=1e-10)
    strong_om = L.constant_curvature_connection(spec, 1.0)
    e3 = L.constant_comoment(spec, [0, 0, 1])
    strong = L.solve_lambda(spec, strong_om, e3, e3, 0.1, tol=1e-10)
    obs = L.integrability_obstruction(spec, strong_om, strong.lam)
    strong_ok = strong.converged and strong.cartan_residual_max > 1e-3 and obs.max > 1e-3
    ok = flat_err < 1e-10 and small.converged and small.monotone and small.functional < small.history[0] and strong_ok
    return _check("inverse_construction", ok, flat_anchor_error=flat_err, small=small.summary(),
                  strong=strong.summary(), strong_obstruction=obs.summary())


def evolution_check(spec):
    from . import lattice as L
    rng = np.random.default_rng(5)
    f = rng.standard_normal(spec.grid)
    omega0 = np.zeros((spec.n, *spec.grid, spec.dim))
    omega0[..., 0] = L.d0(spec, f) + 0.3          # flat: gradient times a fixed generator
    xi_c = np.array([0.4, -0.7, 0.2])
    xi = np.broadcast_to(xi_c, (*spec.grid, spec.dim)).copy()
    X = rng.standard_normal((spec.n, *spec.grid))
    dt, steps = 1e-3, 50
    res = L.evolve_connection(spec, omega0, xi, X, dt, steps, "rk4")
    worst = 0.0
    for i in range(1, steps + 1):
        exact_prev = L.gauge_rotation(spec, omega0, xi_c, (i - 1) * dt)
        one = L.evolve_connection(spec, exact_prev, xi, X, dt, 1, "rk4").trajectory[-1]
        worst = max(worst, float(np.abs(one - L.gauge_rotation(spec, omega0, xi_c, i * dt)).max()))
    global_err = float(np.abs(res.trajectory[-1] - L.gauge_rotation(spec, omega0, xi_c, steps * dt)).max())
    still = L.evolve_connection(spec, L.random_connection(spec, 3, 1.0), np.zeros((*spec.grid, spec.dim)),
                                None, dt, 20, "rk4")
    stationary = all(np.array_equal(w, still.trajectory[0]) for w in still.trajectory)
    return _check("evolution", worst < 1e-8 and stationary and res.ok, per_step_error=worst,
                  global_error=global_err, zero_input_stationary=stationary)


def run_suite(seed: int = 0) -> dict:
    checks = [check_structures(), check_bicomplexes(), check_spencer_nilpotency(), check_whitehead(),
              check_spectral(), check_torsion(), *check_lattice(seed)]
    return {"checks": checks, "ok": all(c["ok"] for c in checks), "seed": seed}
