import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from newton_atlas.algebra import AffineMap, Polynomial
from newton_atlas.classify import (DuplicateBasin, UnknownRay, _cyclic_shifts,
                                   access_count_parabolic, affine_conjugacy_test,
                                   boettcher_ray, channel_diagram, check_pcf, check_pcm,
                                   conjugacy_residual, correspondence_audit, make_marking,
                                   normalize, petal_angle)
from newton_atlas.newton import build_newton
from newton_atlas.suites import random_spec


@pytest.fixture(scope="module")
def diagram(cubic):
    return channel_diagram(cubic)


def basin_of(diagram, x):
    return next(i for i, b in enumerate(diagram.basins) if abs(b.fixed_point - x) < 1e-9)


# -- rays and diagrams ------------------------------------------------------------------

def test_ray_of_simple_root_is_invariant(cubic):
    ray = boettcher_ray(cubic, 1.0, 0)
    assert ray.invariance_error <= 1e-3
    assert abs(ray.points[0] - 1) < 1e-12 and abs(ray.points[-1]) > 100
    # the basin of 1 reaches infinity along the positive real axis
    assert abs(ray.angle_at_infinity) < 0.1


def test_rays_of_the_centre_are_opposite(cubic):
    a, b = boettcher_ray(cubic, 0.0, 0), boettcher_ray(cubic, 0.0, 1)
    gap = abs(a.angle_at_infinity - b.angle_at_infinity)
    assert abs(gap - math.pi) < 0.1
    assert max(a.invariance_error, b.invariance_error) <= 1e-3


def test_ray_index_out_of_range(cubic):
    with pytest.raises(ValueError):
        boettcher_ray(cubic, 1.0, 1)


def test_ray_needs_fixed_point(cubic):
    with pytest.raises(ValueError):
        boettcher_ray(cubic, 0.5, 0)


def test_cubic_diagram(diagram):
    assert diagram.ray_count == 4 and diagram.complete and diagram.connected
    census = {round(b.fixed_point.real): len(b.rays) for b in diagram.basins}
    assert census == {1: 1, -1: 1, 0: 2}
    assert len(diagram.graph["edges"]) == 4


def test_roots_of_unity_diagram():
    # z^3 - 1: three simple roots, one ray each
    D = channel_diagram(build_newton(Polynomial([-1, 0, 0, 1])))
    assert D.census() == [1, 1, 1] and D.connected


def test_diagram_rejects_attracting_root():
    # a double root is attracting with multiplier 1/2, not superattracting
    spec = build_newton(Polynomial.from_roots([1, 1, -1, 2]), check_degree=False)
    with pytest.raises(ValueError):
        channel_diagram(spec)


def test_diagram_needs_polynomial_case(quarter):
    with pytest.raises(ValueError):
        channel_diagram(quarter)


# -- markings --------------------------------------------------------------------------

def test_marking(diagram):
    i0 = basin_of(diagram, 0)
    m = make_marking(diagram, [(i0, 1)])
    assert m.n == 1 and m.marked_pairs() == [(i0, 1)]


def test_empty_marking(diagram):
    assert make_marking(diagram, []).n == 0


def test_marking_duplicate_basin(diagram):
    i0 = basin_of(diagram, 0)
    with pytest.raises(DuplicateBasin):
        make_marking(diagram, [(i0, 0), (i0, 1)])


@pytest.mark.parametrize("choice", [(0, 5), (9, 0), (-1, 0)])
def test_marking_unknown_ray(diagram, choice):
    with pytest.raises(UnknownRay):
        make_marking(diagram, [choice])


# -- PCF / PCM ----------------------------------------------------------------------------

def test_pcf_two_cycle_polynomial():
    # z^3 - 2z + 2: the critical point 0 of N lands on a superattracting 2-cycle {0, 1}
    assert check_pcf(build_newton(Polynomial([2, -2, 0, 1]))).verdict == "ConsistentWithPCF"


def test_pcf_perturbed_is_violation():
    rep = check_pcf(build_newton(Polynomial([2.1, -2, 0, 1])))
    assert rep.verdict == "Violation" and "(a)" in rep.detail


def test_pcf_cubic(cubic):
    rep = check_pcf(cubic)
    assert rep.verdict == "ConsistentWithPCF"
    assert all(ev["preperiod"] is not None for ev in rep.evidence)


def test_pcf_rejects_parabolic(quarter):
    with pytest.raises(ValueError):
        check_pcf(quarter)


def test_pcm_rejects_polynomial_case(cubic):
    with pytest.raises(ValueError):
        check_pcm(cubic)


def test_pcm_generic_member_is_not_pcm():
    rep = check_pcm(build_newton(Polynomial([1 + 1j, 0, 1]), Polynomial([0, 1])))
    assert rep.verdict in ("Violation", "Inconclusive")


def test_pcm_family_members(quarter, two):
    a, b = check_pcm(quarter), check_pcm(two)
    assert a.verdict == b.verdict == "ConsistentWithPCM"
    assert [len(v) for v in b.census.values()] == [1]
    assert access_count_parabolic(quarter, 0) == 1
    assert access_count_parabolic(two, 0) == 2


def test_petal_angle_any_lead():
    spec = build_newton(Polynomial([-1, 0, 1]), Polynomial([0, 2j]))
    th = petal_angle(spec, 0)
    # far out N(z) ~ z - 1/q' = z + i/2, so orbits drift upwards
    assert abs(np.exp(1j * th) - 1j) < 1e-12


# -- normal forms and conjugacy ----------------------------------------------------------

def test_normalize_examples():
    p, q, T = normalize(Polynomial([2, 0, 2]))
    assert p == Polynomial([-1, 0, 1]) and q.is_zero()
    p, q, T = normalize(Polynomial([-1, 0, 1]), Polynomial([0, 3]))
    assert q == Polynomial([0, 1]) and p == Polynomial([-9, 0, 1])
    assert abs(T.scale - 1 / 3) < 1e-15


def test_normalize_is_a_conjugacy():
    rng = np.random.default_rng(11)
    spec = random_spec(rng, 3, 2)
    p, q, T = normalize(spec.p, spec.q)
    # N for (p~, q~) equals T^{-1} o N o T
    g = build_newton(p, q, check_degree=False)
    assert conjugacy_residual(spec.map, g.map, T.inverse()) < 1e-10


@given(st.integers(0, 10_000))
def test_normalize_idempotent(seed):
    rng = np.random.default_rng(seed)
    s = random_spec(rng, int(rng.integers(2, 6)), int(rng.integers(0, 4)))
    p1, q1, _ = normalize(s.p, s.q)
    p2, q2, T = normalize(p1, q1)
    assert T.is_identity(1e-9)
    assert np.allclose(p1.coeffs, p2.coeffs, atol=1e-9)
    assert np.allclose(q1.coeffs, q2.coeffs, atol=1e-9)


def test_normalize_rejects_constant():
    with pytest.raises(ValueError):
        normalize(Polynomial([1]))


@given(st.integers(0, 10_000))
def test_scaling_pairs_are_conjugate(seed):
    rng = np.random.default_rng(seed)
    f = random_spec(rng, int(rng.integers(2, 5)), int(rng.integers(0, 3)))
    a = complex(rng.normal(), rng.normal())
    b = complex(rng.normal(), rng.normal())
    g = build_newton(f.p.compose_affine(a, b), f.q.compose_affine(a, b), check_degree=False)
    res = affine_conjugacy_test(f, g)
    assert res.conjugate and res.residual < 1e-8
    assert conjugacy_residual(f.map, g.map, res.witness) < 1e-8
    # g(w) comes from f(a w + b), so the witness is T(z) = (z - b) / a; a quadratic
    # Newton map also commutes with the swap of its roots, so skip that case
    if (f.m, f.n) != (2, 0):
        W = res.witness
        assert abs(W.scale - 1 / a) < 1e-6 * abs(1 / a)
        assert abs(W.offset + b / a) < 1e-6 * (1 + abs(b / a))


def test_conjugacy_symmetry_with_inverse_witness():
    rng = np.random.default_rng(5)
    f = random_spec(rng, 3, 1)
    a, b = 0.7 - 1.1j, 0.4 + 0.2j
    g = build_newton(f.p.compose_affine(a, b), f.q.compose_affine(a, b), check_degree=False)
    fg, gf = affine_conjugacy_test(f, g), affine_conjugacy_test(g, f)
    assert fg.conjugate and gf.conjugate
    assert fg.witness.compose(gf.witness).is_identity(1e-8)


def test_family_members_refuted(quarter, two):
    res = affine_conjugacy_test(quarter, two)
    assert not res.conjugate and res.candidates_tried >= 1 and res.residual > 1e-8


def test_degree_mismatch_refuted(cubic, quarter):
    assert not affine_conjugacy_test(cubic, quarter).conjugate


def test_identity_residual(cubic):
    assert conjugacy_residual(cubic.map, cubic.map, AffineMap(1, 0)) == 0


# -- audit --------------------------------------------------------------------------------

def test_audit_pairings(cubic, diagram, quarter, two):
    one = make_marking(diagram, [(basin_of(diagram, 1), 0)])
    zero = make_marking(diagram, [(basin_of(diagram, 0), 0)])
    assert correspondence_audit(cubic, one, quarter, diagram).passed
    assert correspondence_audit(cubic, zero, two, diagram).passed
    crossed = correspondence_audit(cubic, one, two, diagram)
    assert not crossed.passed and not crossed.checks["local_degrees"]["ok"]


def test_audit_petal_count_mismatch(cubic, diagram, quarter):
    m = make_marking(diagram, [(basin_of(diagram, 1), 0), (basin_of(diagram, -1), 0)])
    rep = correspondence_audit(cubic, m, quarter, diagram)
    assert not rep.passed and not rep.checks["petal_count"]["ok"]


def test_cyclic_shift_ties():
    assert _cyclic_shifts([0.0], [1.0]) == [0]
    assert _cyclic_shifts([0, math.pi], [0, math.pi]) == [0]
    # four rays midway between four petals: two shifts tie
    a = [k * math.pi / 2 for k in range(4)]
    b = [math.pi / 4 + k * math.pi / 2 for k in range(4)]
    assert _cyclic_shifts(a, b) == [0, 3]
