import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spencerkit import lattice as L
from spencerkit.errors import DegenerateConstraintError, InputError
from spencerkit.liealg import catalog


@pytest.fixture
def su2_8():
    return L.LatticeSpec(2, 8, catalog("su2"))


def test_spec_validation():
    with pytest.raises(InputError):
        L.LatticeSpec(5, 8, catalog("su2"))
    with pytest.raises(InputError):
        L.LatticeSpec(2, 3, catalog("su2"))


@pytest.mark.parametrize("n", [2, 3, 4])
def test_d_squared_is_exactly_zero(n):
    spec = L.LatticeSpec(n, 4, catalog("abelian(1)"))
    rng = np.random.default_rng(n)
    f = np.vectorize(lambda v: Fraction(int(v), 7), otypes=[object])(rng.integers(-9, 9, spec.grid))
    for p in range(n - 1):
        from math import comb
        c = np.vectorize(lambda v: Fraction(int(v), 3), otypes=[object])(rng.integers(-9, 9, (comb(n, p), *spec.grid)))
        dd = L.discrete_d(spec, L.discrete_d(spec, c, p), p + 1)
        assert all(x == 0 for x in dd.ravel())
    assert all(x == 0 for x in L.discrete_d(spec, L.d0(spec, f), 1).ravel())


def test_d_consistency_with_derivative():
    spec = L.LatticeSpec(1, 64, catalog("abelian(1)"))
    x = spec.coords()[0]
    err = np.abs(L.d0(spec, np.sin(2 * np.pi * x))[0] - 2 * np.pi * np.cos(2 * np.pi * x)).max()
    assert err < 2 * np.pi**2 * spec.h


def test_constant_curvature_su2(su2_8):
    a = 0.7
    om = L.constant_curvature_connection(su2_8, a)
    Om = L.curvature(su2_8, om)
    np.testing.assert_allclose(Om[0][..., 2], a * a)
    np.testing.assert_allclose(Om[0][..., :2], 0)
    obs = L.integrability_obstruction(su2_8, om, L.constant_comoment(su2_8, [0, 0, 1]))
    assert obs.max == pytest.approx(a * a) and not obs.holonomic
    assert obs.coadjoint_max == pytest.approx(0, abs=1e-15)
    obs1 = L.integrability_obstruction(su2_8, om, L.constant_comoment(su2_8, [1, 0, 0]))
    assert obs1.max == 0 and obs1.coadjoint_max == pytest.approx(a * a)


def test_flat_connection_is_holonomic(su2_8):
    rng = np.random.default_rng(0)
    om = np.zeros((2, 8, 8, 3))
    om[..., 1] = L.d0(su2_8, rng.standard_normal((8, 8)))    # abelian direction: flat
    assert np.abs(L.curvature(su2_8, om)).max() < 1e-12
    assert L.integrability_obstruction(su2_8, om, L.random_comoment(su2_8, 1)).holonomic


def test_zero_residual_does_not_bound_pairing(su2_8):
    """omega = f(y) e3, lam = e3*: the Cartan residual vanishes but <lam, Omega> does not."""
    X = su2_8.coords()
    om = np.zeros((2, 8, 8, 3))
    om[0, ..., 2] = np.sin(2 * np.pi * X[1])
    lam = L.constant_comoment(su2_8, [0, 0, 1])
    assert np.abs(L.cartan_residual(su2_8, om, lam)).max() == 0
    obs = L.integrability_obstruction(su2_8, om, lam)
    assert obs.max > 1 and obs.transport_max == 0


@pytest.mark.parametrize("alg", ["su2", "sl3", "heisenberg3"])
def test_transport_identity(alg):
    spec = L.LatticeSpec(2, 6, catalog(alg))
    om, lam = L.random_connection(spec, 4, 0.8), L.random_comoment(spec, 5)
    K1 = L.transport_defect(spec, om, lam)
    K2 = L.transport_defect_from_residual(spec, om, lam)
    assert np.abs(K1 - K2).max() < 1e-13 * max(1.0, np.abs(K1).max())


def test_residual_operator_matches(su2_8):
    om, lam = L.random_connection(su2_8, 1, 0.5), L.random_comoment(su2_8, 2)
    Lop = L.residual_operator(su2_8, om)
    np.testing.assert_allclose(Lop @ lam.ravel(), L.cartan_residual(su2_8, om, lam).ravel(), atol=1e-12)


def test_functional_shapes_and_errors(su2_8):
    om, lam = L.random_connection(su2_8, 1, 0.5), L.random_comoment(su2_8, 2)
    with pytest.raises(InputError):
        L.compatibility_functional(su2_8, om, lam, lam, -1.0)
    with pytest.raises(InputError):
        L.cartan_residual(su2_8, om[:1], lam)
    with pytest.raises(InputError):
        L.solve_lambda(su2_8, om, lam, lam, 0.1, tol=0)


def test_constant_gauge_invariance(su2_8):
    om, lam = L.random_connection(su2_8, 1, 0.3), L.random_comoment(su2_8, 2)
    slope, _ = L.gauge_equivariance_slope(su2_8, om, lam, L.constant_comoment(su2_8, [0.3, -0.5, 0.2]))
    assert slope == pytest.approx(2.0, abs=0.05)


def test_solve_alpha_zero_pins_site(su2_8):
    om = L.random_connection(su2_8, 3, 0.05)
    lam0 = L.random_comoment(su2_8, 4)
    res = L.solve_lambda(su2_8, om, lam0, alpha=0.0, tol=1e-12, maxiter=5000)
    assert res.pinned_site == (0, 0)
    np.testing.assert_array_equal(res.lam[0, 0], lam0[0, 0])
    assert res.monotone and res.functional <= res.history[0]
    with pytest.raises(DegenerateConstraintError):
        L.solve_lambda(su2_8, om, np.zeros_like(lam0), alpha=0.0)


def test_solve_reports_non_convergence(su2_8):
    om = L.random_connection(su2_8, 3, 0.5)
    res = L.solve_lambda(su2_8, om, L.random_comoment(su2_8, 4), L.random_comoment(su2_8, 5), 0.01,
                         tol=1e-14, maxiter=3)
    assert not res.converged and "maximum iterations" in res.message


def test_constraint_distribution(su2_8):
    om, lam = L.random_connection(su2_8, 1, 0.5), L.random_comoment(su2_8, 2)
    rep = L.constraint_distribution(su2_8, om, lam, (1, 2))
    assert rep.dim_D == 4 and rep.dim_D_cap_V == 2 and rep.spans_tangent
    with pytest.raises(DegenerateConstraintError):
        L.constraint_distribution(su2_8, om, np.zeros_like(lam), (0, 0))


def test_symplectic_exact_for_abelian():
    spec = L.LatticeSpec(3, 6, catalog("abelian(3)"))
    rep = L.symplectic_check(spec, L.random_connection(spec, 1, 1.0), L.random_comoment(spec, 2))
    assert rep.max_error < 1e-12


def test_frobenius_sign():
    su2 = catalog("su2")
    conn = L.SmoothConnection.random(2, 3, 0.5, seed=3)
    sizes = [8, 16, 32]
    minus = [L.frobenius_defect(L.LatticeSpec(2, N, su2), conn, -1) for N in sizes]
    plus = [L.frobenius_defect(L.LatticeSpec(2, N, su2), conn, +1) for N in sizes]
    assert minus[-1] < minus[0] / 3
    assert min(plus) > 10 * minus[-1]


def test_coadjoint_pairing_identity_abelian_is_zero():
    assert L.step4_identity_sample(catalog("abelian(4)"), 100, 0) == 0.0
    with pytest.raises(InputError):
        L.step4_identity_sample(catalog("su2"), 0)


def test_evolution_methods_and_errors(su2_8):
    om = L.random_connection(su2_8, 1, 0.2)
    xi = L.random_comoment(su2_8, 2, 0.1)
    X = L.vector_field_from_spec(su2_8, "const:1,0")
    e = L.evolve_connection(su2_8, om, xi, X, 1e-3, 5, "euler")
    r = L.evolve_connection(su2_8, om, xi, X, 1e-3, 5, "rk4")
    assert e.ok and r.ok and len(r.trajectory) == 6
    assert np.abs(e.trajectory[-1] - r.trajectory[-1]).max() < 1e-3
    with pytest.raises(InputError):
        L.evolve_connection(su2_8, om, xi, X, 1e-3, 5, "leapfrog")
    with pytest.raises(InputError):
        L.evolve_connection(su2_8, om, xi, X, -1.0, 5)


def test_evolution_blowup_is_reported(su2_8):
    om = L.random_connection(su2_8, 1, 1.0)
    xi = L.random_comoment(su2_8, 2, 1e3)
    res = L.evolve_connection(su2_8, om, xi, L.vector_field_from_spec(su2_8, "random:seed=1:amp=1e3"), 10.0, 200,
                              "euler")
    assert not res.ok and res.blowup_step is not None


def test_field_specs_and_files(su2_8, tmp_path):
    assert L.connection_from_spec(su2_8, "zero").shape == (2, 8, 8, 3)
    assert L.connection_from_spec(su2_8, "smooth:seed=1:amp=0.5").shape == (2, 8, 8, 3)
    lam = L.comoment_from_spec(su2_8, "const:1,2,3")
    p = tmp_path / "lam.json"
    p.write_text(L.field_to_json(su2_8, lam, "comoment"))
    np.testing.assert_array_equal(L.comoment_from_spec(su2_8, str(p)), lam)
    with pytest.raises(InputError):
        L.connection_from_spec(su2_8, str(p))                 # wrong kind in header
    for bad in ["random:sed=1", "const:1,2", "constant-curvature:x", "no/such/file.json"]:
        with pytest.raises(InputError):
            (L.comoment_from_spec if bad.startswith("const:") else L.connection_from_spec)(su2_8, bad)
    p.write_text(json.dumps({"n": 2}))
    with pytest.raises(InputError):
        L.comoment_from_spec(su2_8, str(p))


@given(st.integers(0, 10_000))
@settings(max_examples=10, deadline=None)
def test_gradient_matches_finite_differences(seed):
    spec = L.LatticeSpec(2, 4, catalog("su2"))
    rng = np.random.default_rng(seed)
    om, lam, anc = (L.random_connection(spec, seed, 0.5), L.random_comoment(spec, seed + 1),
                    L.random_comoment(spec, seed + 2))
    G = L.functional_gradient(spec, om, lam, anc, 0.3)
    v = rng.standard_normal(lam.shape)
    eps = 1e-5
    fd = (L.compatibility_functional(spec, om, lam + eps * v, anc, 0.3)
          - L.compatibility_functional(spec, om, lam - eps * v, anc, 0.3)) / (2 * eps)
    assert abs(fd - np.sum(G * v)) <= 1e-6 * abs(fd)


def test_curvature_independence_of_pointwise_quantities(su2_8):
    """Two connections agreeing at a probed site give bit-identical pointwise outputs there."""
    om1 = L.random_connection(su2_8, 11, 0.4)
    om2 = om1 + L.constant_curvature_connection(su2_8, 2.0)
    site = (3, 5)
    om2[(slice(None), *site)] = om1[(slice(None), *site)]
    lam = L.random_comoment(su2_8, 12)
    R1, R2 = L.cartan_residual(su2_8, om1, lam), L.cartan_residual(su2_8, om2, lam)
    assert np.array_equal(R1[(slice(None), *site)], R2[(slice(None), *site)])
    d1, d2 = (L.constraint_distribution(su2_8, om, lam, site) for om in (om1, om2))
    assert np.array_equal(d1.basis, d2.basis)
    assert np.abs(L.curvature(su2_8, om1) - L.curvature(su2_8, om2)).max() > 1


def test_constraint_distribution_examples():
    spec = L.LatticeSpec(2, 4, catalog("su2"))
    rep = L.constraint_distribution(spec, np.zeros((2, 4, 4, 3)), L.constant_comoment(spec, [0, 0, 1]), (0, 0))
    assert rep.dim_D == 4 and rep.dim_D_cap_V == 2
    ab = L.LatticeSpec(2, 4, catalog("abelian(1)"))
    rep = L.constraint_distribution(ab, np.zeros((2, 4, 4, 1)), L.constant_comoment(ab, [1]), (0, 0))
    assert rep.dim_D == 2 and rep.dim_D_cap_V == 0 and rep.spans_tangent


def test_exact_solution_has_zero_functional_and_gradient(su2_8):
    zero = np.zeros((2, 8, 8, 3))
    lam = L.constant_comoment(su2_8, [1, 2, 3])
    assert L.compatibility_functional(su2_8, zero, lam, lam, 1.0) == 0
    assert not np.any(L.functional_gradient(su2_8, zero, lam))
    assert not np.any(L.cartan_residual(L.LatticeSpec(2, 8, catalog("abelian(3)")),
                                        L.random_connection(su2_8, 1, 1.0), lam))


def test_abelian_gradient_is_discrete_laplacian():
    spec = L.LatticeSpec(2, 6, catalog("abelian(2)"))
    om, lam = L.random_connection(spec, 1, 1.0), L.random_comoment(spec, 2)
    g = L.functional_gradient(spec, om, lam)
    dl = L.d0(spec, lam)
    lap = sum(spec.N * (L.shift(dl[d], d, -1) - dl[d]) for d in range(2))   # d^T d lam
    np.testing.assert_allclose(g, spec.volume * lap, atol=1e-10)


def test_solved_runs_transport_bounded_by_residual(su2_8):
    anchor = L.random_comoment(su2_8, 4)
    om = L.random_connection(su2_8, 7, 0.05)
    res = L.solve_lambda(su2_8, om, anchor, anchor, 0.1)
    assert res.converged
    obs = L.integrability_obstruction(su2_8, om, res.lam)
    M = np.abs(L.coadjoint_matrices(su2_8, om)).sum(axis=-1).max()
    bound = (2 * su2_8.N + 2 * M) * np.sqrt(su2_8.dim) * np.abs(L.cartan_residual(su2_8, om, res.lam)).max()
    assert obs.transport_max <= bound


def test_abelian_evolution_matches_matrix_exponential():
    from scipy.linalg import expm
    spec = L.LatticeSpec(2, 4, catalog("abelian(1)"))
    rng = np.random.default_rng(3)
    om0 = rng.standard_normal((2, 4, 4, 1))
    xi = rng.standard_normal((4, 4, 1))
    X = rng.standard_normal((2, 4, 4))
    size = om0.size
    # affine flow omega' = A omega + b, assembled column by column
    b = L.evolution_rhs(spec, np.zeros_like(om0), xi, X).ravel()
    A = np.stack([L.evolution_rhs(spec, np.eye(size)[i].reshape(om0.shape), xi, X).ravel() - b
                  for i in range(size)], axis=1)
    aug = np.zeros((size + 1, size + 1))
    aug[:size, :size], aug[:size, size] = A, b
    dt, steps = 1e-3, 20
    exact = (expm(dt * steps * aug) @ np.append(om0.ravel(), 1.0))[:size]
    res = L.evolve_connection(spec, om0, xi, X, dt, steps, "rk4")
    assert np.abs(res.trajectory[-1].ravel() - exact).max() < 1e-8


def test_zero_connection_symplectic_defect_vanishes(su2_8):
    rep = L.symplectic_check(su2_8, np.zeros((2, 8, 8, 3)), L.random_comoment(su2_8, 1))
    assert rep.max_error == 0


def test_normalize_comoment(su2_8):
    lam = L.normalize_comoment(su2_8, L.random_comoment(su2_8, 1))
    np.testing.assert_allclose(np.linalg.norm(lam, axis=-1), 1.0)
    with pytest.raises(DegenerateConstraintError):
        L.normalize_comoment(su2_8, np.zeros((8, 8, 3)))
