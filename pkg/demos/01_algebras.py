"""Tour of the algebra layer: structure checks, Killing forms, Lie algebra cohomology.

Run:  python3 demos/01_algebras.py
"""

from spencerkit.liealg import catalog, check_structure, killing_form
from spencerkit.spencer_complex import (ce_complex, cohomology, invariants_dimension, nilpotency_check,
                                        spencer_chain, spencer_nilpotency_finding)

print("== Structure constants, checked exactly ==")
for name in ["su2", "sl2", "sl3", "heisenberg3", "abelian(3)"]:
    alg = catalog(name)
    rep, kf = check_structure(alg), killing_form(alg)
    print(f"  {name:12s} dim={alg.dim}  Jacobi/antisymmetry ok={rep.ok}  Killing rank={kf.rank}")

print("\n== Chevalley-Eilenberg cohomology H^q(g, Sym^k g) ==")
for name in ["su2", "sl2", "heisenberg3"]:
    for k in range(3):
        H = [g.dim for g in cohomology(ce_complex(catalog(name), k))]
        print(f"  {name:12s} k={k}: {H}")
print("  semisimple rows have H^1 = H^2 = 0; the nilpotent heisenberg3 does not.")

print("\n== Invariant polynomials dim (Sym^j g*)^g ==")
for name in ["su2", "sl3"]:
    print(f"  {name}: {[invariants_dimension(catalog(name), j) for j in range(5)]}")

print("\n== The Spencer operator on Sym(g) ==")
for name in ["su2", "sl2"]:
    ok = nilpotency_check(spencer_chain(catalog(name), 5, "killing_dual")).ok
    print(f"  {name}: killing_dual pairing, delta^2 = 0 up to Sym^5: {ok}")
for name in ["abelian(2)", "sl2", "heisenberg3"]:
    f = spencer_nilpotency_finding(catalog(name), 3, "raw")
    print(f"  {name}: raw pairing, failing degrees {f.matrix_failures} "
          f"(polynomial oracle: {f.oracle_failures}) -> {f.verdict}")
