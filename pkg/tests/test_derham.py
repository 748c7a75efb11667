import json
from fractions import Fraction

import pytest

from spencerkit.derham import (circle_complex, cup_power, formal_model, model_from_dict, model_to_dict,
                               quintic_model, resolve_base, ring_multiply, tensor_complex, torus_model,
                               torus_ring_model)
from spencerkit.errors import InputError
from spencerkit.spencer_complex import betti, nilpotency_check


@pytest.mark.parametrize("m", [3, 4, 7])
def test_circle_betti(m):
    c = circle_complex(m)
    assert c.betti == (1, 1) and c.n == 1 and not c.formal


def test_torus_betti_and_dims():
    t = torus_model(4, 3)
    assert t.betti == (1, 4, 6, 4, 1)
    assert t.complex.dims == (81, 324, 486, 324, 81)
    assert nilpotency_check(t.complex.differentials).ok
    assert t.poincare_symmetric()
    assert torus_model(2, 4).betti == (1, 2, 1)


def test_tensor_is_kunneth():
    a, b = circle_complex(3), formal_model([1, 0, 1], 2)
    t = tensor_complex(a, b)
    assert t.betti == betti(t.complex) == (1, 1, 1, 1)


def test_torus_ring_products():
    t = torus_ring_model(2)
    deg, prod = ring_multiply(t, 1, {0: 1}, 1, {1: 1})
    assert deg == 2 and prod == {0: 1}
    assert ring_multiply(t, 1, {1: 1}, 1, {0: 1})[1] == {0: -1}
    assert ring_multiply(t, 1, {0: 1}, 1, {0: 1})[1] == {}


def test_cup_powers_torus_ring():
    for n in [2, 4, 6]:
        t = torus_ring_model(n)
        for j in range(n // 2 + 2):
            assert cup_power(t, j, "ring").nonzero == (j <= n // 2), (n, j)
    # omega^2 on T^4 is 2 x0x1x2x3
    assert cup_power(torus_ring_model(4), 2, "ring").coeffs == {0: Fraction(2)}


def test_formal_marker_is_always_nonzero():
    assert cup_power(torus_model(2, 3), 5, "formal").nonzero


def test_ring_mode_requires_ring():
    with pytest.raises(InputError):
        cup_power(torus_model(2, 3), 1, "ring")
    with pytest.raises(InputError):
        cup_power(torus_ring_model(2), 1, "complex")


def test_quintic():
    q = quintic_model()
    assert q.betti == (1, 0, 1, 204, 1, 0, 1) and q.n == 6 and q.formal


def test_model_round_trip(tmp_path):
    t = torus_ring_model(4)
    p = tmp_path / "t4.json"
    p.write_text(json.dumps(model_to_dict(t)))
    again = resolve_base(str(p))
    assert again.betti == t.betti and again.ring == t.ring and again.curvature_class == t.curvature_class


@pytest.mark.parametrize("spec", ["torus:2", "formal:0,1", "formal:1,x", "sphere", "torus:0:3", "torus:2:2"])
def test_bad_presets(spec):
    with pytest.raises(InputError):
        resolve_base(spec)


def test_bad_models():
    with pytest.raises(InputError):
        formal_model([1, 2], 2)
    with pytest.raises(InputError):
        formal_model([1, 1, 1], 2, ring={(1, 0, 1, 0): {5: 1}})
    with pytest.raises(InputError):
        model_from_dict({"n": 2})
    with pytest.raises(InputError):
        formal_model([1, 0, 1], 2).with_curvature_class([1])      # no ring table
    with pytest.raises(InputError):
        torus_ring_model(2).with_curvature_class([1, 1])


def test_circle_coboundary_rank():
    from spencerkit.exact import rank
    assert rank(circle_complex(3).complex.differentials[0]) == 2
    with pytest.raises(InputError):
        circle_complex(2)


def test_formal_point_is_tensor_unit():
    X = torus_model(2, 3)
    unit = formal_model([1], 0)
    assert tensor_complex(unit, X).complex.dims == X.complex.dims
    assert tensor_complex(X, unit).betti == X.betti


def test_cup_power_zero_and_degree_bound():
    t2 = torus_ring_model(2)
    assert cup_power(t2, 0, "ring").nonzero
    assert cup_power(t2, 1, "ring").nonzero
    assert not cup_power(t2, 2, "ring").nonzero


def test_formal_round_trip_cohomology():
    for b in [(1, 2, 1), (1, 0, 1, 204, 1, 0, 1), (3, 1)]:
        m = formal_model(b, len(b) - 1)
        assert betti(m.complex) == b
