import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from newton_atlas.algebra import Polynomial
from newton_atlas.dynamics import iterate_orbit
from newton_atlas.newton import (ConstantMap, DegreeTooLow, NotParabolic, blaschke_model,
                                 build_newton, classify_infinity, critical_multiplicity,
                                 critical_points, fixed_points, numeric_multiplier_at_infinity,
                                 petal_directions)
from newton_atlas.suites import random_spec


def finite_fixed(spec):
    return [f for f in fixed_points(spec) if np.isfinite(f.location)]


# -- build_newton ---------------------------------------------------------------------

def test_build_quadratic_family_member():
    c = 0.3 - 0.2j
    spec = build_newton(Polynomial([c, 0, 1]), Polynomial([0, 1]))
    assert spec.d == 3 and (spec.m, spec.n) == (2, 1) and not spec.degenerate
    z = np.array([0.7 + 0.1j, -1.3 + 2j, 4j])
    direct = z - (z ** 2 + c) / (z ** 2 + 2 * z + c)
    assert np.allclose(spec.map.evaluate(z), direct, rtol=1e-13)


def test_build_cubic():
    spec = build_newton(Polynomial([0, -1, 0, 1]))
    f = spec.map
    lead = f.den.lead / 3
    assert np.allclose((f.num / lead).coeffs, [0, 0, 0, 2])
    assert np.allclose((f.den / lead).coeffs, [-1, 0, 3])
    assert spec.d == 3


def test_build_linear_is_constant():
    with pytest.raises(ConstantMap):
        build_newton(Polynomial([0, 1]))


def test_build_low_degree():
    with pytest.raises(DegreeTooLow):
        build_newton(Polynomial([-1, 0, 1]))


def test_degenerate_cancellation_flagged():
    # a double root of p is shared with p' + p q', so the map loses a degree
    spec = build_newton(Polynomial.from_roots([1, 1, -1, 2]), check_degree=False)
    assert spec.degenerate and spec.d == spec.expected_degree - 1


# -- fixed points -----------------------------------------------------------------------

def test_fixed_points_cubic(cubic):
    fps = finite_fixed(cubic)
    assert sorted(round(f.location.real, 10) for f in fps) == [-1, 0, 1]
    assert all(abs(f.multiplier) < 1e-12 and f.kind == "superattracting" for f in fps)


def test_fixed_points_quarter(quarter):
    fps = finite_fixed(quarter)
    assert sorted(round(f.location.real, 10) for f in fps) == [-0.5, 0.5]
    assert all(f.kind == "superattracting" for f in fps)


@given(st.integers(0, 10_000))
def test_fixed_points_are_fixed(seed):
    rng = np.random.default_rng(seed)
    spec = random_spec(rng, int(rng.integers(2, 6)), int(rng.integers(0, 3)))
    for f in finite_fixed(spec):
        assert abs(spec(f.location) - f.location) < 1e-8 * (1 + abs(f.location))


@given(st.integers(0, 10_000))
def test_fixed_point_completeness(seed):
    rng = np.random.default_rng(seed)
    spec = random_spec(rng, int(rng.integers(2, 7)), int(rng.integers(0, 4)))
    fps = [f.location for f in finite_fixed(spec)]
    roots = list(spec.root_points)
    assert len(fps) == len(roots)
    for r in roots:
        assert min(abs(r - z) for z in fps) < 1e-8 * (1 + abs(r))


# -- infinity ----------------------------------------------------------------------------

def test_classify_infinity_repelling(cubic):
    rep = classify_infinity(cubic)
    assert rep.kind == "repelling" and abs(rep.multiplier - 1.5) < 1e-15
    assert abs(numeric_multiplier_at_infinity(cubic) - 1.5) < 1e-8


def test_classify_infinity_parabolic(quarter):
    rep = classify_infinity(quarter)
    assert rep.kind == "parabolic" and rep.multiplicity == 2 and rep.petal_count == 1


def test_classify_infinity_four_petals():
    spec = build_newton(Polynomial([1, 0, 0, 0, 1]), Polynomial([0, 0, 0, 0, 0.25]))
    rep = classify_infinity(spec)
    assert (rep.kind, rep.multiplicity, rep.petal_count) == ("parabolic", 5, 4)
    assert spec.d == 8


# -- critical points -----------------------------------------------------------------------

def test_critical_points_cubic(cubic):
    cps = {round(c.location.real, 8): c.local_degree for c in critical_points(cubic)}
    assert cps == {0.0: 3, 1.0: 2, -1.0: 2}


def test_critical_points_c_two(two):
    cps = [c for c in critical_points(two) if np.isfinite(c.location)]
    roots = two.root_points
    free = [c for c in cps if min(abs(c.location - roots)) > 1e-8]
    # the free critical multiplicity 2 sits at one point of local degree 3
    assert critical_multiplicity(free) == 2
    assert len(free) == 1 and free[0].local_degree == 3
    assert iterate_orbit(two, free[0].location).fate.kind == "Petal"
    assert all(c.local_degree == 2 for c in cps if c not in free)


def test_roots_are_critical(cubic):
    spec = build_newton(Polynomial.from_roots([1, 2j, -1.5, 0.3 + 0.4j]))
    cps = [c.location for c in critical_points(spec)]
    for r in spec.root_points:
        assert min(abs(r - z) for z in cps) < 1e-8


@given(st.integers(0, 10_000))
def test_riemann_hurwitz(seed):
    rng = np.random.default_rng(seed)
    m, n = int(rng.integers(1, 7)), int(rng.integers(0, 5))
    if m == 1 and n == 0:
        return
    spec = random_spec(rng, m, n)
    assert critical_multiplicity(critical_points(spec)) == 2 * spec.d - 2


@given(st.integers(0, 10_000))
def test_degree_law(seed):
    rng = np.random.default_rng(seed)
    m, n = int(rng.integers(1, 7)), int(rng.integers(0, 5))
    if m == 1 and n == 0:
        return
    spec = random_spec(rng, m, n)
    assert spec.d == (m + n if n >= 1 else m)
    assert not spec.degenerate


# -- petals ----------------------------------------------------------------------------------

@pytest.mark.parametrize("n,expected", [(1, [math.pi]), (2, [math.pi / 2, 3 * math.pi / 2]),
                                        (4, [math.pi / 4 + k * math.pi / 2 for k in range(4)])])
def test_petal_directions(n, expected):
    q = Polynomial.monomial(n, 1.0 / n)   # q' = z^(n-1) is monic
    spec = build_newton(Polynomial([-1, 0, 1]), q)
    got = petal_directions(spec)
    assert np.allclose(got, expected)
    # orbits launched far out along each direction stay in that petal
    for j, th in enumerate(got):
        rec = iterate_orbit(spec, 30 * np.exp(1j * th))
        assert str(rec.fate) == f"Petal({j})"


def test_petal_directions_need_parabolic(cubic):
    with pytest.raises(NotParabolic):
        petal_directions(cubic)


def test_petal_directions_need_monic():
    spec = build_newton(Polynomial([-1, 0, 1]), Polynomial([0, 3]))
    with pytest.raises(ValueError):
        petal_directions(spec)


# -- Blaschke models ------------------------------------------------------------------------

def test_blaschke_k2():
    B = blaschke_model(2)
    assert B.a == pytest.approx(1 / 3)
    assert np.allclose(B.map.num.coeffs, [1 / 3, 0, 1])
    assert np.allclose(B.map.den.coeffs, [1, 0, 1 / 3])
    rep = B.check()
    assert abs(complex(B.map(1.0)) - 1) < 1e-15 and abs(rep["multiplier"] - 1) < 1e-8


def test_blaschke_k3_circle():
    B = blaschke_model(3)
    th = np.linspace(0, 2 * np.pi, 100, endpoint=False)
    assert np.max(np.abs(np.abs(B.map.evaluate(np.exp(1j * th))) - 1)) < 1e-12


@pytest.mark.parametrize("k", range(2, 7))
def test_blaschke_invariants(k):
    rep = blaschke_model(k).check(tol=1e-10)
    assert all(rep[key] for key in ("fixes_one", "multiplier_one", "circle_invariant",
                                    "critical_zero_degree"))


def test_blaschke_rejects_k1():
    with pytest.raises(ValueError):
        blaschke_model(1)


def test_spec_json_round_trip(two):
    from newton_atlas.newton import NewtonSpec
    again = NewtonSpec.from_json(two.to_json())
    assert again.p == two.p and again.q == two.q and again.d == two.d
