"""Bundled verification suites behind ``newton-atlas verify``.

Each suite returns a list of Check rows; a suite passes when all rows pass.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .algebra import MobiusMap, Polynomial, RationalMap
from .classify import (access_count_parabolic, affine_conjugacy_test, channel_diagram,
                       check_pcm, correspondence_audit, make_marking, normalize)
from .dynamics import (Viewport, basin_grid, estimate_basin_area, quadratic_family, param_scan)
from .newton import (blaschke_model, build_newton, critical_multiplicity, critical_points,
                     classify_infinity, numeric_multiplier_at_infinity)


@dataclass
class Check:
    name: str
    ok: bool
    detail: str = ""


def cubic_spec():
    """z^3 - z, whose Newton map is 2z^3 / (3z^2 - 1)."""
    return build_newton(Polynomial([0, -1, 0, 1]))


def family_member(c: complex):
    return quadratic_family().spec(c)


def random_spec(rng: np.random.Generator, m: int, n: int):
    """Generic (p, q): random complex roots for p, random coefficients for q."""
    roots = rng.normal(size=m) + 1j * rng.normal(size=m)
    p = Polynomial.from_roots(roots, lead=complex(rng.normal(), rng.normal()))
    if n == 0:
        q = Polynomial([0])
    else:
        c = rng.normal(size=n + 1) + 1j * rng.normal(size=n + 1)
        q = Polynomial(c)
    return build_newton(p, q, check_degree=False)


def random_specs(seed: int = 0, count: int = 50):
    """count specs with n = 0 (2 <= m <= 8) and count with n >= 1."""
    rng = np.random.default_rng(seed)
    zero = [random_spec(rng, int(rng.integers(2, 9)), 0) for _ in range(count)]
    para = [random_spec(rng, int(rng.integers(1, 7)), int(rng.integers(1, 5)))
            for _ in range(count)]
    return zero, para


# -- suites --------------------------------------------------------------------

def suite_mobius(seed: int = 0) -> list[Check]:
    out = []
    s2 = math.sqrt(2)
    M1 = MobiusMap(0, 1j / s2, 1, 0)
    g1 = RationalMap(Polynomial([0, 1.5, 0, 1]), Polynomial([1]), True)
    t0 = time.perf_counter()
    r1 = _mobius_residual(M1, cubic_spec().map, g1, seed)
    out.append(Check("i/(sqrt2 z): cubic -> w^3 + 3w/2", r1 < 1e-10,
                     f"residual {r1:.2e} in {time.perf_counter() - t0:.2f}s"))
    # holds as f o M = M o g with f the c = -1/4 map and g = w^3 - i w^2 + w
    M2 = MobiusMap(-0.5, 1j, 1, 0)
    g2 = RationalMap(Polynomial([0, 1, -1j, 1]), Polynomial([1]), True)
    t0 = time.perf_counter()
    r2 = _mobius_residual(M2, g2, family_member(-0.25).map, seed)
    out.append(Check("i/z - 1/2: c = -1/4 map <-> w^3 - i w^2 + w", r2 < 1e-10,
                     f"residual {r2:.2e} in {time.perf_counter() - t0:.2f}s"))
    return out


def _mobius_residual(M, f, g, seed):
    from .algebra import mobius_conjugate_check
    return mobius_conjugate_check(M, f, g, samples=1000, tol=1e-10, seed=seed)


def suite_blaschke(seed: int = 0) -> list[Check]:
    out = []
    for k in range(2, 7):
        try:
            rep = blaschke_model(k).check()
            out.append(Check(f"P_{k}", True, f"multiplier {abs(rep['multiplier']):.12f}, "
                                             f"circle error {rep['circle_error']:.1e}"))
        except ArithmeticError as exc:
            out.append(Check(f"P_{k}", False, str(exc)))
    return out


def suite_multipliers(seed: int = 0) -> list[Check]:
    zero, para = random_specs(seed)
    worst0 = max(abs(numeric_multiplier_at_infinity(s) - classify_infinity(s).multiplier)
                 for s in zero)
    worst1 = max(abs(numeric_multiplier_at_infinity(s) - 1) for s in para)
    sup = max(float(np.max(np.abs(s.derivative(s.root_points)))) for s in zero + para)
    deg = all(s.d == s.expected_degree and not s.degenerate for s in zero + para)
    rh = all(critical_multiplicity(critical_points(s)) == 2 * s.d - 2 for s in zero + para)
    return [Check("analytic m/(m-1) vs chart derivative", worst0 < 1e-6, f"max error {worst0:.1e}"),
            Check("parabolic multiplier 1", worst1 < 1e-6, f"max error {worst1:.1e}"),
            Check("superattracting roots", sup < 1e-8, f"max |N'| {sup:.1e}"),
            Check("degree law", deg),
            Check("Riemann-Hurwitz", rh)]


def suite_rays(seed: int = 0) -> list[Check]:
    t0 = time.perf_counter()
    D = channel_diagram(cubic_spec())
    census = {round(b.fixed_point.real): len(b.rays) for b in D.basins}
    worst = max(r.invariance_error for b in D.basins for r in b.rays)
    return [Check("4 rays, census (1, 1, 2) over (+1, -1, 0)",
                  D.ray_count == 4 and census == {1: 1, -1: 1, 0: 2}, str(census)),
            Check("forward invariance within 1e-3", worst <= 1e-3, f"worst {worst:.1e}"),
            Check("connected at infinity", D.connected,
                  f"{time.perf_counter() - t0:.1f}s")]


def suite_members(seed: int = 0) -> list[Check]:
    a, b = family_member(-0.25), family_member(2)
    out = [Check("c = -1/4 PCM", check_pcm(a).verdict == "ConsistentWithPCM"),
           Check("c = 2 PCM", check_pcm(b).verdict == "ConsistentWithPCM"),
           Check("accesses 1 and 2", (access_count_parabolic(a, 0),
                                      access_count_parabolic(b, 0)) == (1, 2))]
    D = channel_diagram(cubic_spec())
    idx = {round(bb.fixed_point.real): i for i, bb in enumerate(D.basins)}
    one = make_marking(D, [(idx[1], 0)])
    zero = make_marking(D, [(idx[0], 0)])
    out += [Check("audit basin +1 with c = -1/4", correspondence_audit(cubic_spec(), one, a, D).passed),
            Check("audit basin 0 with c = 2", correspondence_audit(cubic_spec(), zero, b, D).passed),
            Check("crossed audit fails", not correspondence_audit(cubic_spec(), one, b, D).passed)]
    return out


def suite_scan(seed: int = 0) -> list[Check]:
    t0 = time.perf_counter()
    r = param_scan(quadratic_family(), (-1, 3, -1, 1), (200, 200))
    flags = r.flagged_cells()
    hit = {c: any(r.cell_contains(i, j, c) for i, j in flags) for c in (-0.25, 2)}
    return [Check("flags cell of c = -1/4", hit[-0.25]),
            Check("flags cell of c = 2", hit[2], f"{len(flags)} flagged, "
                                                 f"{time.perf_counter() - t0:.0f}s")]


def finite_area_spec():
    """p = z - 1, q = z^3."""
    return build_newton(Polynomial([-1, 1]), Polynomial([0, 0, 0, 1]))


def suite_area(seed: int = 0) -> list[Check]:
    radii = [5, 10, 20, 40]
    h = estimate_basin_area(finite_area_spec(), 0, radii)
    cub = cubic_spec()
    i1 = int(np.argmin(np.abs(cub.root_points - 1)))
    c = estimate_basin_area(cub, i1, radii)
    return [Check("deg q = 3 saturates", h.saturated, str([round(a, 3) for a in h.areas])),
            Check("cubic does not saturate", not c.saturated, str([round(a, 2) for a in c.areas]))]


def suite_determinism(seed: int = 0) -> list[Check]:
    from .export import colourize
    out = []
    for name, spec, vp in (("cubic", cubic_spec(), Viewport(0j, 4, 4)),
                           ("c = -1/4", family_member(-0.25), Viewport(-0.5 + 0j, 5, 4))):
        a = colourize(basin_grid(spec, vp, (200, 200), workers=1))
        b = colourize(basin_grid(spec, vp, (200, 200), workers=4))
        out.append(Check(f"{name} byte-identical across workers", a.tobytes() == b.tobytes()))
    return out


def suite_conjugacy(seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    ok_pairs = True
    for _ in range(5):
        f = random_spec(rng, int(rng.integers(2, 5)), int(rng.integers(1, 3)))
        a = complex(rng.normal(), rng.normal())
        g = build_newton(f.p.compose_affine(a, 0), f.q.compose_affine(a, 0), check_degree=False)
        res = affine_conjugacy_test(f, g)
        ok_pairs &= bool(res.conjugate and abs(res.witness.scale - 1 / a) < 1e-6 * abs(1 / a)
            and abs(res.witness.offset) < 1e-6)
    refuted = not affine_conjugacy_test(family_member(-0.25), family_member(2)).conjugate
    idem = True
    for _ in range(100):
        s = random_spec(rng, int(rng.integers(2, 6)), int(rng.integers(0, 4)))
        p1, q1, _ = normalize(s.p, s.q)
        p2, q2, T = normalize(p1, q1)
        idem &= T.is_identity(1e-9) and np.allclose(p1.coeffs, p2.coeffs, atol=1e-9) \
            and np.allclose(q1.coeffs, q2.coeffs, atol=1e-9)
    return [Check("scaling pairs conjugate with witness z/a", ok_pairs),
            Check("c = -1/4 vs c = 2 refuted", refuted),
            Check("normalize idempotent on 100 specs", idem)]


SUITES: dict[str, Callable[[int], list[Check]]] = {
    "mobius": suite_mobius,
    "multipliers": suite_multipliers,
    "rays": suite_rays,
    "members": suite_members,
    "scan": suite_scan,
    "blaschke": suite_blaschke,
    "area": suite_area,
    "determinism": suite_determinism,
    "conjugacy": suite_conjugacy,
}
