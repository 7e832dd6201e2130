"""Invariant rays, channel diagrams, PCF/PCM checks, normal forms and conjugacy.

Accesses are identified with fixed internal rays (k - 1 per basin whose
centre has local degree k); homotopy classes themselves are never computed.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .algebra import AffineMap, Polynomial, RationalMap, poly_roots
from .dynamics import (CaptureParams, Fate, NoCenter, default_budget, find_center,
                       in_immediate_basin, iterate_orbit, orbit_prefix, petal_radius)
from .newton import (NewtonSpec, build_newton, critical_points, fixed_points,
                     local_expansion)

TAU_RAY = 1e-3
TAU_LAND = 1e-8
TAU_CONJ = 1e-8
RAY_ESCAPE = 100.0

ACCESS_NOTE = ("accesses are counted as fixed internal rays (k - 1 per centre of "
               "local degree k); homotopy classes are not computed")


class BranchAmbiguity(RuntimeError):
    pass


class BudgetExhausted(RuntimeError):
    pass


class DuplicateBasin(ValueError):
    pass


class UnknownRay(ValueError):
    pass


class AlignmentFailure(RuntimeError):
    pass


def _local_degree(spec: NewtonSpec, z: complex, tol: float = 1e-6) -> int:
    for c in critical_points(spec):
        if np.isfinite(c.location) and abs(c.location - z) <= tol * (1 + abs(z)):
            return c.local_degree
    return 1


def _chordal_scale(z):
    return 2.0 / (1.0 + np.abs(z) ** 2)


def _point_to_polyline(points: np.ndarray, line: np.ndarray) -> np.ndarray:
    """Euclidean distance from each point to the polyline."""
    a, b = line[:-1], line[1:]
    ab = b - a
    L2 = np.abs(ab) ** 2
    out = np.full(points.size, np.inf)
    for s in range(0, points.size, 512):
        p = points[s:s + 512, None]
        with np.errstate(invalid="ignore", divide="ignore"):
            t = np.where(L2 > 0, ((p - a) * np.conj(ab)).real / L2, 0.0)
        t = np.clip(t, 0.0, 1.0)
        out[s:s + 512] = np.min(np.abs(p - (a + t * ab)), axis=1)
    return out


# -- rays ---------------------------------------------------------------------

@dataclass
class Ray:
    basin: int
    index: int
    points: np.ndarray
    invariance_error: float = math.nan

    @property
    def angle_at_infinity(self) -> float:
        return float(np.angle(self.points[-1]))

    def to_json(self) -> dict:
        return {"basin": self.basin, "index": self.index,
                "points": [[float(z.real), float(z.imag)] for z in self.points],
                "angle_at_infinity": self.angle_at_infinity,
                "invariance_error": self.invariance_error}


def ray_invariance_error(spec: NewtonSpec, pts: np.ndarray) -> float:
    """Chordal Hausdorff-type distance between N(R) and R on the part where
    they overlap (N maps the outermost segment beyond the truncation)."""
    dense = np.empty(2 * pts.size - 1, dtype=complex)
    dense[0::2] = pts
    dense[1::2] = (pts[:-1] + pts[1:]) / 2
    img = spec.step(dense)
    ok = np.isfinite(img)
    fwd = _point_to_polyline(img[ok], pts) * _chordal_scale(img[ok])
    # points of R that should be covered by N(R): those no farther out than
    # the image reaches
    reach = np.max(np.abs(img[ok]))
    inner = pts[np.abs(pts) <= reach]
    back = _point_to_polyline(inner, img[ok]) * _chordal_scale(inner) if inner.size else np.zeros(1)
    return float(max(fwd.max(initial=0.0), back.max(initial=0.0)))


def boettcher_ray(spec: NewtonSpec, basin_fixed_point: complex, ray_index: int,
                  escape_radius: float = RAY_ESCAPE, samples: int = 48,
                  max_segments: int = 400, tau_ray: float = TAU_RAY,
                  basin: int = 0) -> Ray:
    """Fixed internal ray of angle ray_index / (k - 1) in the immediate basin.

    The ray is seeded along the Boettcher direction at the fixed point and
    pulled back by inverse iteration, always taking the preimage nearest to
    the previous point.
    """
    if spec.n != 0:
        raise ValueError("rays are traced for polynomial Newton maps only (deg q = 0)")
    xi = complex(basin_fixed_point)
    if abs(spec(xi) - xi) > 1e-8 * (1 + abs(xi)):
        raise ValueError(f"{xi} is not a fixed point")
    k = _local_degree(spec, xi)
    if k < 2:
        raise ValueError(f"{xi} is not superattracting")
    if not 0 <= ray_index < k - 1:
        raise ValueError(f"ray_index must lie in [0, {k - 2}]")
    a = local_expansion(spec, xi, k)
    theta = (2 * math.pi * ray_index - cmath.phase(a)) / (k - 1)
    b_abs = abs(a) ** (1.0 / (k - 1))
    # keep the seed well inside the linear regime of the Boettcher map
    others = [c.location for c in critical_points(spec)
              if np.isfinite(c.location) and abs(c.location - xi) > 1e-6]
    poles = [r for r, _ in poly_roots(spec.map.den, warn=False)] if spec.map.den.degree >= 1 else []
    gap = min((abs(w - xi) for w in others + poles), default=1.0)
    r0 = 1e-3 * gap
    s0 = b_abs * r0
    radii = np.geomspace(s0 ** k / b_abs, r0, samples)
    seg = xi + radii * cmath.exp(1j * theta)
    seg[0] = spec(seg[-1])  # exact image of the outer end
    pieces = [seg]
    margin = 10 * tau_ray
    f = spec.map
    for _ in range(max_segments):
        if np.max(np.abs(pieces[-1])) > escape_radius:
            break
        pieces.append(_pull_back(f, pieces[-1], margin))
    else:
        raise BudgetExhausted(f"ray {ray_index} at {xi} did not reach |z| > {escape_radius}")
    pts = np.concatenate([[xi], pieces[0]] + [p[1:] for p in pieces[1:]])
    cut = np.flatnonzero(np.abs(pts) > escape_radius)
    if cut.size:
        pts = pts[: cut[0] + 1]
    ray = Ray(basin, ray_index, pts)
    ray.invariance_error = ray_invariance_error(spec, pts)
    return ray


def _pull_back(f: RationalMap, seg: np.ndarray, margin: float, depth: int = 0) -> np.ndarray:
    """Preimage branch of the polyline seg whose first point maps onto seg[0]
    from the last point of the previous piece, i.e. starting at seg[-1]."""
    out = [seg[-1]]
    prev = seg[-1]
    targets = list(seg[1:])
    i = 0
    while i < len(targets):
        w = targets[i]
        roots = np.array([r for r, _ in poly_roots(f.num - f.den * w, warn=False)])
        d = np.abs(roots - prev)
        order = np.argsort(d)
        d1 = d[order[0]]
        d2 = d[order[1]] if roots.size > 1 else np.inf
        if d2 - d1 < margin * max(d2, 1e-300) or d1 > 0.3 * d2:
            # too close to call: refine the step before giving up
            if depth > 30:
                raise BranchAmbiguity(f"preimage branches within margin near {prev}")
            w_prev = targets[i - 1] if i else seg[0]
            targets.insert(i, (w + w_prev) / 2)
            depth += 1
            continue
        prev = roots[order[0]]
        out.append(prev)
        i += 1
    return np.array(out)


# -- channel diagrams and markings -----------------------------------------------

@dataclass
class BasinRays:
    fixed_point: complex
    local_degree: int
    rays: list
    errors: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"fixed_point": [self.fixed_point.real, self.fixed_point.imag],
                "local_degree": self.local_degree,
                "rays": [r.to_json() for r in self.rays],
                "errors": self.errors}


@dataclass
class ChannelDiagram:
    basins: list
    escape_radius: float

    @property
    def ray_count(self) -> int:
        return sum(len(b.rays) for b in self.basins)

    @property
    def complete(self) -> bool:
        return all(len(b.rays) == b.local_degree - 1 and not b.errors for b in self.basins)

    @property
    def graph(self) -> dict:
        """Vertices are basins plus "inf"; every ray is an edge to infinity."""
        edges = [(i, r.index, "inf") for i, b in enumerate(self.basins) for r in b.rays
                 if np.abs(r.points[-1]) > self.escape_radius]
        return {"vertices": list(range(len(self.basins))) + ["inf"], "edges": edges}

    @property
    def connected(self) -> bool:
        reached = {e[0] for e in self.graph["edges"]}
        return self.complete and reached == set(range(len(self.basins)))

    def census(self) -> list[int]:
        return [len(b.rays) for b in self.basins]

    def polylines(self) -> list[np.ndarray]:
        return [r.points for b in self.basins for r in b.rays]

    def to_json(self) -> dict:
        g = self.graph
        return {"basins": [b.to_json() for b in self.basins],
                "graph": {"vertices": g["vertices"],
                          "edges": [list(e) for e in g["edges"]]},
                "ray_count": self.ray_count, "complete": self.complete,
                "connected": self.connected, "escape_radius": self.escape_radius,
                "note": ACCESS_NOTE}


def channel_diagram(spec: NewtonSpec, escape_radius: float = RAY_ESCAPE,
                    tau_ray: float = TAU_RAY) -> ChannelDiagram:
    if spec.n != 0:
        raise ValueError("channel diagrams are defined for polynomial Newton maps (deg q = 0)")
    finite = [f for f in fixed_points(spec, include_infinity=False)]
    bad = [f for f in finite if f.kind != "superattracting"]
    if bad:
        raise ValueError(f"fixed point {bad[0].location} is {bad[0].kind}, not superattracting")
    pts = sorted((f.location for f in finite), key=lambda z: (round(z.real, 12), round(z.imag, 12)))
    basins = []
    for i, xi in enumerate(pts):
        k = _local_degree(spec, xi)
        b = BasinRays(xi, k, [])
        for j in range(k - 1):
            try:
                b.rays.append(boettcher_ray(spec, xi, j, escape_radius, tau_ray=tau_ray, basin=i))
            except (BranchAmbiguity, BudgetExhausted) as exc:
                b.errors.append(f"ray {j}: {exc}")
        basins.append(b)
    return ChannelDiagram(basins, escape_radius)


@dataclass(frozen=True)
class Marking:
    marked: tuple
    diagram: Optional[ChannelDiagram] = field(default=None, compare=False, repr=False)

    @property
    def n(self) -> int:
        return sum(m is not None for m in self.marked)

    def marked_pairs(self) -> list[tuple[int, int]]:
        return [(i, r) for i, r in enumerate(self.marked) if r is not None]

    def to_json(self) -> dict:
        return {"marked": list(self.marked), "n": self.n}


def make_marking(diagram: ChannelDiagram, choices: Sequence[tuple[int, int]]) -> Marking:
    marked: list[Optional[int]] = [None] * len(diagram.basins)
    for basin, ray in choices:
        if not (isinstance(basin, (int, np.integer)) and 0 <= basin < len(diagram.basins)):
            raise UnknownRay(f"no basin {basin}")
        b = diagram.basins[basin]
        if not any(r.index == ray for r in b.rays):
            raise UnknownRay(f"basin {basin} has no ray {ray}")
        if marked[basin] is not None:
            raise DuplicateBasin(f"basin {basin} marked twice")
        marked[basin] = int(ray)
    return Marking(tuple(marked), diagram)


# -- parabolic accesses -------------------------------------------------------------

def petal_angle(spec: NewtonSpec, j: int) -> float:
    """Attracting direction j at infinity for any leading coefficient of q'."""
    b = spec.q.deriv().lead
    return ((2 * j + 1) * math.pi - cmath.phase(b)) / spec.n


def petal_seed(spec: NewtonSpec, j: int) -> complex:
    R = petal_radius(spec.p, spec.q, spec.root_points)
    return 2 * R * cmath.exp(1j * petal_angle(spec, j))


def petal_center(spec: NewtonSpec, petal_index: int, budget: Optional[int] = None) -> complex:
    if spec.n < 1:
        raise ValueError("no petals when deg q = 0")
    if not 0 <= petal_index < spec.n:
        raise ValueError(f"petal_index must lie in [0, {spec.n - 1}]")
    return find_center(spec, petal_seed(spec, petal_index), budget)


def access_count_parabolic(spec: NewtonSpec, petal_index: int,
                           budget: Optional[int] = None) -> int:
    centre = petal_center(spec, petal_index, budget)
    return _local_degree(spec, centre) - 1


# -- PCF / PCM reports -----------------------------------------------------------------

@dataclass
class PcmReport:
    verdict: str
    detail: str = ""
    evidence: list = field(default_factory=list)
    census: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "detail": self.detail, "evidence": self.evidence,
                "immediate_basin_census": {str(k): v for k, v in self.census.items()},
                "notes": self.notes}


def _cpx(z) -> list:
    z = complex(z)
    return [z.real, z.imag] if np.isfinite(z) else ["inf", 0.0]


def _landing(orbit: np.ndarray, targets: Sequence[complex], tau: float, rho: float):
    """First index J with orbit[J] within tau of a target, accepted as an exact
    landing only when J = 0 or orbit[J-1] is outside the rho-neighbourhood
    (plain convergence creeps in from inside it)."""
    t = np.asarray(targets, dtype=complex)
    d = np.min(np.abs(orbit[:, None] - t[None, :]), axis=1)
    hits = np.flatnonzero(d < tau)
    if not hits.size:
        return None, float(np.min(d))
    J = int(hits[0])
    exact = J == 0 or d[J - 1] >= rho
    return (J if exact else None), float(d[J])


def _repelling_landing(spec: NewtonSpec, orbit: np.ndarray, tau: float, max_period: int = 8):
    """Evidence that the orbit became exactly periodic on a repelling cycle,
    or reached infinity through a pole."""
    if not np.all(np.isfinite(orbit)):
        return {"lands_on": "infinity", "step": int(np.flatnonzero(~np.isfinite(orbit))[0])}
    for t in range(orbit.size):
        for per in range(1, max_period + 1):
            if t + per >= orbit.size:
                break
            if abs(orbit[t + per] - orbit[t]) < tau:
                cyc = orbit[t:t + per]
                mult = np.prod(spec.derivative(cyc))
                if abs(mult) > 1:
                    return {"lands_on": "repelling cycle", "step": t, "period": per,
                            "multiplier": abs(complex(mult))}
                return None
    return None


def _root_rho(spec: NewtonSpec) -> float:
    pts = list(spec.root_points)
    if spec.map.den.degree >= 1:
        pts += [r for r, _ in poly_roots(spec.map.den, warn=False)]
    d = [abs(a - b) for a, b in itertools.combinations(pts, 2)]
    return 0.25 * min(d) if d else 0.25


def _finite_criticals(spec):
    return [c for c in critical_points(spec) if np.isfinite(c.location)]


def check_pcf(spec: NewtonSpec, budget: Optional[int] = None, tau: float = TAU_LAND,
              caps: CaptureParams = CaptureParams()) -> PcmReport:
    if spec.n != 0:
        raise ValueError("check_pcf needs deg q = 0; use check_pcm")
    budget = default_budget(0) if budget is None else budget
    rho = _root_rho(spec)
    roots = spec.root_points
    evidence, violations, unknown = [], [], []
    for c in _finite_criticals(spec):
        rec = iterate_orbit(spec, c.location, budget, caps)
        ev = {"critical_point": _cpx(c.location), "local_degree": c.local_degree,
              "fate": str(rec.fate)}
        L = min(rec.steps + caps.confirm + 2, budget)
        orbit = orbit_prefix(spec, c.location, L)
        if rec.fate.kind == "Root":
            J, res = _landing(orbit, [roots[rec.fate.index]], tau, rho)
            ev.update(landing_residual=res, preperiod=J)
            if J is None:
                violations.append(f"(a) critical orbit of {c.location:.6g} converges to root "
                                  f"{rec.fate.index} without landing")
        elif rec.fate.kind == "Cycle":
            cyc = orbit[-rec.fate.index:]
            sep = min((abs(a - b) for a, b in itertools.combinations(cyc, 2)), default=1.0)
            J, res = _landing(orbit, cyc, tau, 0.25 * sep)
            ev.update(landing_residual=res, preperiod=J, period=rec.fate.index)
            if J is None:
                violations.append(f"(a) critical orbit of {c.location:.6g} converges to an "
                                  f"attracting {rec.fate.index}-cycle without landing")
        else:
            land = _repelling_landing(spec, orbit_prefix(spec, c.location, 200), tau)
            if land:
                ev.update(land, evidence=f"finite within budget {budget}")
            else:
                unknown.append(c.location)
                ev.update(evidence=f"undecided within budget {budget}")
        evidence.append(ev)
    notes = ["finite orbits are numerical evidence within the budget, not a proof"]
    if violations:
        return PcmReport("Violation", "; ".join(violations), evidence, notes=notes)
    if unknown:
        return PcmReport("Inconclusive", f"{len(unknown)} critical orbit(s) undecided",
                         evidence, notes=notes)
    return PcmReport("ConsistentWithPCF", "", evidence, notes=notes)


def check_pcm(spec: NewtonSpec, budget: Optional[int] = None, tau: float = TAU_LAND,
              caps: CaptureParams = CaptureParams(), prefix: int = 400) -> PcmReport:
    if spec.n < 1:
        raise ValueError("check_pcm needs deg q >= 1; use check_pcf")
    budget = default_budget(spec.n) if budget is None else budget
    rho = _root_rho(spec)
    roots = spec.root_points
    evidence, violations, unknown = [], [], []
    petal_members: dict[int, list] = {j: [] for j in range(spec.n)}
    later: list = []
    for c in _finite_criticals(spec):
        rec = iterate_orbit(spec, c.location, budget, caps)
        ev = {"critical_point": _cpx(c.location), "local_degree": c.local_degree,
              "fate": str(rec.fate)}
        orbit = orbit_prefix(spec, c.location, min(max(rec.steps, prefix), budget))
        if rec.fate.kind == "Root":
            J, res = _landing(orbit, [roots[rec.fate.index]], tau, rho)
            ev.update(landing_residual=res, preperiod=J)
            if J is None:
                violations.append(f"(a) critical orbit of {c.location:.6g} converges to root "
                                  f"{rec.fate.index} without landing")
        elif rec.fate.kind == "Cycle":
            violations.append(f"attracting {rec.fate.index}-cycle captures critical point "
                              f"{c.location:.6g}; only superattracting and parabolic basins allowed")
        elif rec.fate.kind == "Petal":
            if in_immediate_basin(spec, c.location, rec.fate):
                petal_members[rec.fate.index].append(c)
                ev.update(immediate=True, preperiod=0)
            else:
                ev.update(immediate=False)
                later.append((c, rec.fate, orbit, ev))
        else:
            land = _repelling_landing(spec, orbit_prefix(spec, c.location, 200), tau)
            if land:
                ev.update(land, evidence=f"finite within budget {budget}")
            else:
                unknown.append(c.location)
                ev.update(evidence=f"undecided within budget {budget}")
        evidence.append(ev)
    census = {j: [{"critical_point": _cpx(c.location), "local_degree": c.local_degree}
                  for c in members] for j, members in petal_members.items()}
    for j, members in petal_members.items():
        if len(members) > 1:
            violations.append(f"(b) immediate basin of petal {j} holds {len(members)} "
                              f"critical points")
        elif not members:
            unknown.append(f"petal {j}")
    for c, fate, orbit, ev in later:
        centres = [m.location for m in petal_members.get(fate.index, [])]
        if not centres:
            continue
        d = np.min(np.abs(orbit[1:, None] - np.array(centres)[None, :]), axis=1)
        m = int(np.argmin(d)) + 1
        ev.update(landing_residual=float(d[m - 1]), preperiod=m if d[m - 1] < tau else None,
                  landing_target=_cpx(centres[0]))
        if d[m - 1] >= tau:
            violations.append(f"(b) critical point {c.location:.6g} in the basin of petal "
                              f"{fate.index} never lands on the immediate-basin critical point")
    notes = ["clause (a) is numerical evidence within the budget, not a proof", ACCESS_NOTE,
             "immediate-basin membership is a pixel-connectivity heuristic"]
    if violations:
        return PcmReport("Violation", "; ".join(violations), evidence, census, notes)
    if unknown:
        return PcmReport("Inconclusive", f"undecided: {unknown}", evidence, census, notes)
    return PcmReport("ConsistentWithPCM", "", evidence, census, notes)


# -- normal forms and conjugacy ----------------------------------------------------------

_SNAP = 1e-12


def normalize(p: Polynomial, q: Optional[Polynomial] = None
              ) -> tuple[Polynomial, Polynomial, AffineMap]:
    """Canonical representative under affine conjugacy.

    Returns (p~, q~, T) with N for (p~, q~) equal to T^{-1} o N o T.
    """
    q = Polynomial([0]) if q is None else q
    if p.degree < 1:
        raise ValueError("p must have degree >= 1")
    m, n = p.degree, max(q.degree, 0)
    if n == 0:
        pm = p.monic()
        shift = -pm.coeffs[m - 1] / m
        if abs(shift) <= _SNAP * (1 + pm.scale()):
            shift = 0j
        pc = pm.compose_affine(1.0, shift)
        roots = [r for r, _ in poly_roots(pc)]
        nz = [r for r in roots if abs(r) > _SNAP]
        if not nz:
            a = 1.0 + 0j
        elif any(abs(r - 1) <= 1e-9 for r in nz):
            a = 1.0 + 0j
        else:
            a = max(nz, key=lambda r: (round(abs(r), 9), -round(cmath.phase(r), 9)))
        T = AffineMap(complex(a), complex(shift))
        pt = pm.compose_affine(T.scale, T.offset).monic()
        return _clean(pt), Polynomial([0]), T
    b = q.deriv().lead
    a = 1.0 + 0j if abs(b - 1) <= _SNAP else abs(b) ** (-1.0 / n) * cmath.exp(-1j * cmath.phase(b) / n)
    p1 = p.compose_affine(a, 0).monic()
    q1 = q.compose_affine(a, 0)
    if m >= 2:
        s = -p1.coeffs[m - 1] / m
    elif n >= 2:
        s = -q1.coeffs[n - 1] / (n * q1.lead)
    else:
        s = 0j
    if abs(s) <= _SNAP * (1 + p1.scale() + q1.scale()):
        s = 0j
    T = AffineMap(a, a * s)
    pt = p.compose_affine(T.scale, T.offset).monic()
    qt = q.compose_affine(T.scale, T.offset)
    qt = Polynomial(np.concatenate([[0], qt.coeffs[1:]]))
    return _clean(pt), _clean(qt), T


def _clean(p: Polynomial, tol: float = 1e-14) -> Polynomial:
    """Zero coefficients that are pure roundoff relative to the largest."""
    c = p.coeffs.copy()
    scale = np.max(np.abs(c))
    re, im = c.real.copy(), c.imag.copy()
    re[np.abs(re) <= tol * scale] = 0.0
    im[np.abs(im) <= tol * scale] = 0.0
    return Polynomial(re + 1j * im)


@dataclass
class ConjugacyResult:
    conjugate: bool
    witness: Optional[AffineMap]
    residual: float
    candidates_tried: int

    def to_json(self) -> dict:
        return {"conjugate": self.conjugate,
                "witness": self.witness.to_json() if self.witness else None,
                "residual": self.residual, "candidates_tried": self.candidates_tried}


def conjugacy_residual(f: RationalMap, g: RationalMap, T: AffineMap) -> float:
    """Relative coefficient distance between T o f o T^{-1} and g."""
    S = T.inverse()
    h = f.conjugate_affine(S.scale, S.offset)
    hn, hd = h.normalized_coeffs()
    gn, gd = g.normalized_coeffs()
    if hn.size != gn.size or hd.size != gd.size:
        return math.inf
    va = np.concatenate([hn, hd])
    vb = np.concatenate([gn, gd])
    scale = max(np.max(np.abs(va)), np.max(np.abs(vb)))
    return float(np.max(np.abs(va - vb)) / scale)


def affine_conjugacy_test(f: NewtonSpec, g: NewtonSpec, tol: float = TAU_CONJ
                          ) -> ConjugacyResult:
    """Search the finite candidate set for an affine T with T o N_f = N_g o T.

    Both maps are brought to normal form first; between normal forms only
    z -> z / a with a^n = 1 (deg q = n >= 1) or a ratio of roots (n = 0) can
    conjugate.  The witness is returned in the original coordinates.
    """
    if (f.m, f.n) != (g.m, g.n):
        return ConjugacyResult(False, None, math.inf, 0)
    pf, qf, Tf = normalize(f.p, f.q)
    pg, qg, Tg = normalize(g.p, g.q)
    nf, ng = build_newton(pf, qf, check_degree=False), build_newton(pg, qg, check_degree=False)
    if f.n >= 1:
        scales = [cmath.exp(2j * math.pi * k / f.n) for k in range(f.n)]
    else:
        rf = [r for r in nf.root_points if abs(r) > _SNAP]
        rg = [r for r in ng.root_points if abs(r) > _SNAP]
        scales = [b / a for a in rf for b in rg] or [1.0 + 0j]
    best, tried = math.inf, 0
    for s in scales:
        tried += 1
        phi = AffineMap(s, 0)
        r = conjugacy_residual(nf.map, ng.map, phi)
        best = min(best, r)
        if r <= tol:
            W = Tg.compose(phi).compose(Tf.inverse())
            return ConjugacyResult(True, W, conjugacy_residual(f.map, g.map, W), tried)
    return ConjugacyResult(False, None, best, tried)


# -- correspondence audit ---------------------------------------------------------------

@dataclass
class AuditReport:
    passed: bool
    checks: dict
    alignment: dict
    notes: list

    def to_json(self) -> dict:
        return {"verdict": "PASS" if self.passed else "FAIL", "passed": self.passed,
                "checks": self.checks, "alignment": self.alignment, "notes": self.notes}


def _cyclic_shifts(a: list[float], b: list[float], tol: float = 1e-6) -> list[int]:
    """Shifts s pairing sorted a[i] with sorted b[(i + s) % n] at minimal
    total angular mismatch; several shifts are returned on ties."""
    n = len(a)
    cost = []
    for s in range(n):
        tot = 0.0
        for i in range(n):
            d = (a[i] - b[(i + s) % n]) % (2 * math.pi)
            tot += min(d, 2 * math.pi - d) ** 2
        cost.append(tot)
    lo = min(cost)
    return [s for s, c in enumerate(cost) if c - lo <= tol * (1 + lo)]


def correspondence_audit(pcf: NewtonSpec, marking: Marking, pcm: NewtonSpec,
                         diagram: Optional[ChannelDiagram] = None,
                         budget: Optional[int] = None) -> AuditReport:
    diagram = diagram or marking.diagram or channel_diagram(pcf)
    pairs = marking.marked_pairs()
    n = pcm.n
    checks: dict = {}
    checks["petal_count"] = {"petals": n, "marked": len(pairs), "ok": n == len(pairs) and n >= 1}
    supers = [fp for fp in fixed_points(pcm, include_infinity=False)
              if fp.kind == "superattracting"]
    unmarked = len(diagram.basins) - len(pairs)
    checks["unmarked_basins"] = {"pcf_unmarked": unmarked, "pcm_superattracting": len(supers),
                                 "ok": unmarked == len(supers)}
    alignment: dict = {}
    if not checks["petal_count"]["ok"]:
        checks["local_degrees"] = {"ok": False, "reason": "petal count mismatch"}
    else:
        ray_angle = []
        for basin, ray in pairs:
            r = next(r for r in diagram.basins[basin].rays if r.index == ray)
            ray_angle.append((r.angle_at_infinity % (2 * math.pi), basin))
        ray_angle.sort()
        pet = sorted((petal_angle(pcm, j) % (2 * math.pi), j) for j in range(n))
        shifts = _cyclic_shifts([a for a, _ in ray_angle], [a for a, _ in pet])
        k_pcm = {}
        for _, j in pet:
            try:
                k_pcm[j] = _local_degree(pcm, petal_center(pcm, j, budget))
            except NoCenter as exc:
                k_pcm[j] = None
                alignment.setdefault("errors", []).append(f"petal {j}: {exc}")
        verdicts = {}
        for s in shifts:
            rows = []
            for i, (_, basin) in enumerate(ray_angle):
                j = pet[(i + s) % n][1]
                kb = diagram.basins[basin].local_degree
                rows.append({"basin": basin, "petal": j, "basin_k": kb, "petal_k": k_pcm[j],
                             "ok": kb == k_pcm[j]})
            verdicts[s] = rows
        outcomes = {all(r["ok"] for r in rows) for rows in verdicts.values()}
        if len(outcomes) > 1:
            raise AlignmentFailure(f"tied cyclic shifts {shifts} give different verdicts")
        s = shifts[0]
        alignment.update(shift=s, tied_shifts=shifts)
        checks["local_degrees"] = {"pairs": verdicts[s], "ok": all(r["ok"] for r in verdicts[s])}
    passed = all(c["ok"] for c in checks.values())
    notes = [ACCESS_NOTE, "pairing of marked basins and petals uses cyclic order of "
             "asymptotic angles at infinity"]
    return AuditReport(passed, checks, alignment, notes)


__all__ = [
    "Ray", "BasinRays", "ChannelDiagram", "Marking", "PcmReport", "ConjugacyResult",
    "AuditReport", "BranchAmbiguity", "BudgetExhausted", "DuplicateBasin", "UnknownRay",
    "AlignmentFailure", "boettcher_ray", "channel_diagram", "make_marking",
    "access_count_parabolic", "petal_center", "petal_angle", "check_pcf", "check_pcm",
    "normalize", "affine_conjugacy_test", "conjugacy_residual", "correspondence_audit",
    "ray_invariance_error",
]
