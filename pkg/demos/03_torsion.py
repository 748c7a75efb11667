"""Torsion terms: the closed-form count, its filtration counterpart, and the cup-product refinement.

Run:  python3 demos/03_torsion.py
"""

from spencerkit.derham import resolve_base
from spencerkit.liealg import catalog
from spencerkit.specseq import build_spencer_double, compute_pages
from spencerkit.torsion import e2_torsion_prediction, partition_check, torsion_case1, torsion_case2

t2, su2 = resolve_base("torus:2:3"), catalog("su2")
for k in [2, 3, 4, 6]:
    r = torsion_case1(t2, su2, k)
    print(f"k={k}: i+2j=k sum = {r.total_dim}, sum over p<k = {r.proof_form_total}, "
          f"difference {r.discrepancy}; terms {[(t.i, t.j, t.contribution) for t in r.terms]}")

print("\nWith an actual cup-product ring the curvature powers can vanish:")
for spec in ["torus-ring:2", "torus-ring:4"]:
    print(f"  {spec}: k=4 ring-mode torsion = {torsion_case1(resolve_base(spec), su2, 4, 'ring').total_dim}")

print("\nFiltration count from E_inf versus the E_2 prediction, slice by slice:")
for kslice in range(3):
    pages = compute_pages(build_spencer_double(t2, su2, 2, "ce", k=kslice), representatives=False)
    row = [(torsion_case2(pages, k), e2_torsion_prediction(t2, su2, kslice, k)) for k in range(6)]
    part = [partition_check(t2, pages, k)["holds"] for k in range(3)]
    print(f"  Sym^{kslice}: (case2, prediction) by degree {row}; classical+torsion=total for k=0..2: {part}")
