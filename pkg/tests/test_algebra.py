import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from newton_atlas.algebra import (INF, AffineMap, Indeterminate, MobiusMap, Polynomial,
                                  RationalMap, chordal, expand_roots, is_inf,
                                  mobius_conjugate_check, poly_derivative, poly_eval,
                                  poly_roots, rational_eval, rational_reduce)

CUBIC = RationalMap(Polynomial([0, 0, 0, 2]), Polynomial([-1, 0, 3]), True)

finite = st.floats(-3, 3, allow_nan=False).map(lambda x: 0.0 if abs(x) < 1e-6 else x)
cpx = st.builds(complex, finite, finite)


def close(a, b, tol=1e-12):
    return abs(complex(a) - complex(b)) <= tol


# -- spec examples -----------------------------------------------------------------

def test_poly_eval_examples():
    assert poly_eval(Polynomial([2, 0, 1]), 0) == 2
    assert poly_eval(Polynomial([0, -1, 0, 1]), 1) == 0
    assert close(poly_eval(Polynomial([-0.25, 0, 1]), 0.5), 0)


def test_poly_derivative_examples():
    assert poly_derivative(Polynomial([0, -1, 0, 1])) == Polynomial([-1, 0, 3])
    d = poly_derivative(Polynomial([7]))
    assert d.is_zero() and d.degree == -1
    assert poly_derivative(Polynomial([-0.25, 0, 1])) == Polynomial([0, 2])


def test_poly_roots_examples():
    r = poly_roots(Polynomial([2, 0, 1]))
    assert sorted((round(z.imag, 12), m) for z, m in r) == [(-round(math.sqrt(2), 12), 1),
                                                           (round(math.sqrt(2), 12), 1)]
    r = poly_roots(Polynomial([0, -1, 0, 1]))
    assert sorted(round(z.real, 12) for z, _ in r) == [-1, 0, 1]
    assert all(m == 1 for _, m in r)
    r = poly_roots(Polynomial([0.25, -1, 1]))
    assert len(r) == 1 and r[0][1] == 2 and close(r[0][0], 0.5, 1e-8)


def test_poly_roots_needs_degree():
    with pytest.raises(ValueError):
        poly_roots(Polynomial([3]))


def test_rational_reduce_examples():
    f = rational_reduce(Polynomial([-1, 0, 1]), Polynomial([-1, 1]))
    assert f.reduced and f.den.degree == 0
    assert np.allclose((f.num / f.den.lead).coeffs, [1, 1])
    g = rational_reduce(Polynomial([0, 0, 0, 2]), Polynomial([-1, 0, 3]))
    assert g.degree == 3 and g.num.degree == 3 and g.den.degree == 2
    # boundary case: roots 2 and 2 - 1e-6 are not matched at tol 1e-12 (a 1e-30
    # offset is below double precision, so the boundary is probed at 1e-6)
    h = rational_reduce(Polynomial([0, -2, 1]), Polynomial([-2 + 1e-6, 1]), tol=1e-12)
    assert h.num.degree == 2 and h.den.degree == 1


def test_rational_eval_examples():
    assert close(rational_eval(CUBIC, 1), 1)
    assert is_inf(rational_eval(CUBIC, 1 / math.sqrt(3)))
    assert is_inf(rational_eval(CUBIC, INF))


def test_rational_eval_indeterminate():
    f = RationalMap(Polynomial([-1, 1]), Polynomial([-1, 1]))
    with pytest.raises(Indeterminate):
        rational_eval(f, 1)


def test_mobius_cubic_to_odd_cubic():
    M = MobiusMap(0, 1j / math.sqrt(2), 1, 0)
    g = RationalMap(Polynomial([0, 1.5, 0, 1]), Polynomial([1]), True)
    assert mobius_conjugate_check(M, CUBIC, g, samples=1000, tol=1e-10) < 1e-10


def test_mobius_identity_residual_zero():
    I = MobiusMap(1, 0, 0, 1)
    assert mobius_conjugate_check(I, CUBIC, CUBIC) == 0.0


def test_mobius_quarter_to_cubic(quarter):
    # holds in the direction f o M = M o g with f the c = -1/4 map
    M = MobiusMap(-0.5, 1j, 1, 0)
    g = RationalMap(Polynomial([0, 1, -1j, 1]), Polynomial([1]), True)
    assert mobius_conjugate_check(M, g, quarter.map, samples=1000, tol=1e-10) < 1e-10


def test_mobius_rejects_zero_samples():
    with pytest.raises(ValueError):
        mobius_conjugate_check(MobiusMap(1, 0, 0, 1), CUBIC, CUBIC, samples=0)


def test_chordal_handles_infinity():
    assert chordal(INF, INF) == 0
    assert close(chordal(0, INF), 2)
    assert close(chordal(1, -1), 2)


def test_affine_compose_inverse():
    T = AffineMap(2 - 1j, 0.5j)
    assert T.compose(T.inverse()).is_identity()
    with pytest.raises(ValueError):
        AffineMap(0, 1)


def test_polynomial_json_round_trip():
    p = Polynomial([1 + 2j, 0, -3])
    assert Polynomial.from_json(p.to_json()) == p
    with pytest.raises(ValueError):
        Polynomial.from_json([[1, 2, 3]])


# -- properties --------------------------------------------------------------------

@given(st.lists(cpx, min_size=2, max_size=9), cpx)
def test_derivative_matches_finite_differences(coeffs, z):
    p = Polynomial(coeffs)
    h = 1e-4 * (1 + abs(z))
    fd = (p(z + h) - p(z - h)) / (2 * h)
    # Richardson step cancels the h^2 error term
    fd2 = (p(z + h / 2) - p(z - h / 2)) / h
    fd = (4 * fd2 - fd) / 3
    exact = poly_eval(poly_derivative(p), z)
    scale = p.deriv().abs_bound(z) + 1e-300
    assert abs(fd - exact) <= 1e-6 * max(abs(exact), scale)


@given(st.integers(1, 8), st.integers(0, 10_000))
def test_roots_round_trip(d, seed):
    rng = np.random.default_rng(seed)
    # well separated: jittered points on a circle
    base = np.exp(2j * np.pi * (np.arange(d) + 0.2 * rng.random(d)) / d)
    roots = base * rng.uniform(0.5, 2.0)
    found = [r for r, _ in poly_roots(expand_roots(roots))]
    assert len(found) == d
    for r in roots:
        assert min(abs(r - f) for f in found) < 1e-8


@given(st.lists(cpx, min_size=1, max_size=4), cpx, cpx)
def test_reduce_commutes_with_eval(coeffs, r, z):
    a = Polynomial(coeffs + [1])
    lin = Polynomial([-r, 1])
    other = Polynomial([1, 0.3, 1])
    unreduced = RationalMap(a * lin, other * lin)
    reduced = rational_reduce(a * lin, other * lin)
    if abs(z - r) < 1e-3 or abs(other(z)) < 1e-3:
        return
    u, v = unreduced.evaluate(np.array([z]))[0], reduced.evaluate(np.array([z]))[0]
    assert chordal(u, v) < 1e-8


@given(st.integers(0, 1000))
def test_mobius_check_symmetry(seed):
    rng = np.random.default_rng(seed)
    M = MobiusMap(0, 1j / math.sqrt(2), 1, 0)
    # a perturbed g is not conjugate: both directions must fail together
    eps = rng.choice([0.0, 1e-3])
    gg = RationalMap(Polynomial([0, 1.5 + eps, 0, 1]), Polynomial([1]), True)
    fwd = mobius_conjugate_check(M, CUBIC, gg, seed=seed) <= 1e-10
    back = mobius_conjugate_check(M.inverse(), gg, CUBIC, seed=seed) <= 1e-10
    assert fwd == back
    assert fwd == (eps == 0.0)
