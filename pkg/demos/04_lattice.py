"""Lattice lab: curvature, the integrability obstruction, and the variational inverse construction.

Run:  python3 demos/04_lattice.py
"""

import numpy as np

from spencerkit import lattice as L
from spencerkit.liealg import catalog

su2 = catalog("su2")
spec = L.LatticeSpec(2, 8, su2)

print("== Constant curvature omega = a e1 dx + a e2 dy ==")
om = L.constant_curvature_connection(spec, 1.0)
for name, c in [("e3*", [0, 0, 1]), ("e1*", [1, 0, 0])]:
    obs = L.integrability_obstruction(spec, om, L.constant_comoment(spec, c))
    print(f"  lam = {name}: <lam, Omega> max {obs.max:.3f}, |ad*_Omega lam| max {obs.coadjoint_max:.3f}")

print("\n== Inverse construction by conjugate gradients ==")
anchor = L.constant_comoment(spec, [0.3, -0.2, 0.5])
zero = np.zeros((2, *spec.grid, 3))
flat = L.solve_lambda(spec, zero, L.random_comoment(spec, 9), anchor, 1.0, tol=1e-13)
print(f"  flat:   anchor recovered to {np.abs(flat.lam - anchor).max():.1e}")
small = L.solve_lambda(spec, L.random_connection(spec, 7, 0.05), L.random_comoment(spec, 9), anchor, 0.1)
print(f"  small:  {small.iterations} iterations, functional {small.history[0]:.3f} -> {small.functional:.2e}, "
      f"monotone {small.monotone}")
e3 = L.constant_comoment(spec, [0, 0, 1])
strong = L.solve_lambda(spec, om, e3, e3, 0.1)
obs = L.integrability_obstruction(spec, om, strong.lam)
print(f"  strong: residual floor {strong.cartan_residual_max:.3f}, obstruction {obs.max:.3f}")

print("\n== Mesh refinement on smooth fields ==")
rng = np.random.default_rng(1)
conn = L.SmoothConnection([L.SmoothField.random(rng, 3, 2, 0.5) for _ in range(2)])
lamf = L.SmoothField.random(rng, 3, 2, 1.0)
sizes = [8, 16, 32]
sym = [L.symplectic_check(L.LatticeSpec(2, N, su2), conn.sample(L.LatticeSpec(2, N, su2)),
                          lamf.value(L.LatticeSpec(2, N, su2).coords())).max_error for N in sizes]
frob = [L.frobenius_defect(L.LatticeSpec(2, N, su2), conn) for N in sizes]
frob_plus = [L.frobenius_defect(L.LatticeSpec(2, N, su2), conn, +1) for N in sizes]
print(f"  symplectic defect {['%.2e' % e for e in sym]}  order {L.refinement_order(sizes, sym):.2f}")
print(f"  omega([H_a,H_b]) + Omega: {['%.2e' % e for e in frob]}  order {L.refinement_order(sizes, frob):.2f}")
print(f"  omega([H_a,H_b]) - Omega: {['%.2e' % e for e in frob_plus]}  (does not converge)")

print("\n== Evolution: flat case against the closed-form gauge rotation ==")
f = rng.standard_normal(spec.grid)
omega0 = np.zeros((2, *spec.grid, 3))
omega0[..., 0] = L.d0(spec, f) + 0.3
xi = np.array([0.4, -0.7, 0.2])
res = L.evolve_connection(spec, omega0, np.broadcast_to(xi, (*spec.grid, 3)).copy(), None, 1e-3, 100)
err = np.abs(res.trajectory[-1] - L.gauge_rotation(spec, omega0, xi, 0.1)).max()
print(f"  rk4, 100 steps of dt=1e-3: max deviation {err:.1e}")
