"""Spectral sequence of the Spencer double complex over a simplicial torus.

Run:  python3 demos/02_spectral_sequence.py
"""

from spencerkit.derham import resolve_base
from spencerkit.exact import LinearMap
from spencerkit.liealg import catalog
from spencerkit.specseq import (DoubleComplexData, build_spencer_double, compute_pages, convergence_report,
                                total_cohomology)

base, alg = resolve_base("torus:2:3"), catalog("su2")
print(f"base {base.name}: cochain dims {base.complex.dims}, Betti numbers {base.betti}")

for k in range(3):
    K = build_spencer_double(base, alg, 2, "ce", k=k)
    pages = compute_pages(K)
    total = total_cohomology(K)
    conv = convergence_report(pages, base.n, K, total)
    print(f"\nCE slice Sym^{k}: total cohomology {total}")
    for pg in pages:
        nz = {key: d for key, d in sorted(pg.dims.items()) if d}
        print(f"  E_{pg.r}: nonzero entries {nz}; d_{pg.r} ranks {sum(pg.dr_ranks.values())}")
    print(f"  stable index N={conv['N']}, E_2 degenerate={conv['E2_degenerate']}, "
          f"sum of E_inf matches total: {conv['oracle_ok']}")

print("\nA hand-made double complex where d_2 is nonzero:")
one = LinearMap.from_entries(1, 1, {(0, 0): 1})
z = LinearMap.zero
K = DoubleComplexData(2, 1, {(0, 0): 0, (0, 1): 1, (1, 0): 1, (1, 1): 1, (2, 0): 1, (2, 1): 0},
                      {(0, 0): z(1, 0), (0, 1): one, (1, 0): one, (1, 1): z(0, 1)},
                      {(0, 0): z(1, 0), (1, 0): one, (2, 0): z(0, 1)})
pages = compute_pages(K)
for pg in pages:
    print(f"  E_{pg.r}: {dict(sorted((k, v) for k, v in pg.dims.items() if v))}  d_{pg.r} ranks "
          f"{ {k: v for k, v in pg.dr_ranks.items() if v} }")
print(f"  N = {convergence_report(pages, 2, K, total_cohomology(K))['N']}")
