"""Newton maps of p*exp(q): construction and local structure.

``N(z) = z - p(z) / (p'(z) + p(z) q'(z))``.  The map is stored reduced, and
the unreduced numerator ``z (p' + p q') - p`` is kept alongside so that
cancellations show up as a degeneracy flag instead of a silent degree drop.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .algebra import (INF, TAU_CLUSTER, TAU_ROOT, Polynomial, RationalMap,
                      cluster_points, poly_roots, rational_reduce)

PARABOLIC_TOL = 1e-8
SUPERATTRACTING_TOL = 1e-8


class ConstantMap(ValueError):
    pass


class DegreeTooLow(ValueError):
    pass


class NotParabolic(ValueError):
    pass


@dataclass(frozen=True)
class NewtonSpec:
    p: Polynomial
    q: Polynomial
    map: RationalMap
    raw_num: Polynomial
    raw_den: Polynomial
    m: int
    n: int
    d: int
    degenerate: bool
    roots: tuple = field(repr=False)

    @property
    def expected_degree(self) -> int:
        return self.m + self.n if self.n >= 1 else self.m

    @property
    def root_points(self) -> np.ndarray:
        return np.array([r for r, _ in self.roots], dtype=complex)

    def step(self, z: np.ndarray) -> np.ndarray:
        """One Newton step on an array; poles go to INF, INF stays INF."""
        z = np.asarray(z, dtype=complex)
        with np.errstate(all="ignore"):
            pz = self.p(z)
            dz = self.raw_den(z)
            out = z - pz / dz
        bad = ~np.isfinite(out)
        if bad.any():
            out = np.where(bad, INF, out)
        return out

    def __call__(self, z):
        out = self.step(np.atleast_1d(np.asarray(z, dtype=complex)))
        return complex(out[0]) if np.isscalar(z) else out

    def derivative(self, z):
        """N'(z) = p g / (p' + p q')^2 with g = p'' + 2p'q' + p q'' + p q'^2."""
        z = np.asarray(z, dtype=complex)
        p, q = self.p, self.q
        dp, dq = p.deriv(), q.deriv()
        g = p.deriv(2) + 2 * dp * dq + p * q.deriv(2) + p * dq * dq
        with np.errstate(all="ignore"):
            out = p(z) * g(z) / self.raw_den(z) ** 2
        return out if out.ndim else complex(out)

    def to_json(self) -> dict:
        return {"p": self.p.to_json(), "q": self.q.to_json()}

    @classmethod
    def from_json(cls, data) -> "NewtonSpec":
        if isinstance(data, str):
            data = json.loads(data)
        return build_newton(Polynomial.from_json(data["p"]),
                            Polynomial.from_json(data.get("q", [[0.0, 0.0]])))


@dataclass(frozen=True)
class FixedPointReport:
    location: complex
    multiplier: complex
    kind: str
    multiplicity: int = 1
    petal_count: int = 0

    def to_json(self) -> dict:
        loc = "inf" if math.isinf(abs(self.location)) else [self.location.real,
                                                            self.location.imag]
        return {"kind": self.kind, "location": loc,
                "multiplier": [self.multiplier.real, self.multiplier.imag],
                "multiplicity": self.multiplicity, "petal_count": self.petal_count}


@dataclass(frozen=True)
class CriticalPoint:
    location: complex
    local_degree: int

    def to_json(self) -> dict:
        loc = "inf" if math.isinf(abs(self.location)) else [self.location.real,
                                                            self.location.imag]
        return {"location": loc, "local_degree": self.local_degree}


def build_newton(p: Polynomial, q: Optional[Polynomial] = None,
                 tol: float = TAU_ROOT, check_degree: bool = True) -> NewtonSpec:
    if q is None:
        q = Polynomial([0])
    if p.degree < 1:
        raise ValueError("p must have degree >= 1")
    m = p.degree
    n = max(q.degree, 0)
    if n == 0 and m == 1:
        raise ConstantMap("constant Newton map (n = 0, m = 1)")
    dp, dq = p.deriv(), q.deriv()
    raw_den = dp + p * dq
    raw_num = Polynomial([0, 1]) * raw_den - p
    f = rational_reduce(raw_num, raw_den, tol)
    d = f.degree
    expected = m + n if n >= 1 else m
    degenerate = d != expected
    if check_degree and d < 3:
        raise DegreeTooLow(f"Newton map has degree {d} < 3")
    roots = tuple(poly_roots(p, tol))
    return NewtonSpec(p, q, f, raw_num, raw_den, m, n, d, degenerate, roots)


def _kind(mult: complex, tol: float) -> str:
    if abs(mult) <= tol:
        return "superattracting"
    if abs(mult - 1) <= tol:
        return "parabolic"
    if abs(mult) < 1:
        return "attracting"
    return "repelling"


def fixed_points(spec: NewtonSpec, tol: float = SUPERATTRACTING_TOL,
                 include_infinity: bool = True) -> list[FixedPointReport]:
    f = spec.map
    # numerator of N(z) - z for the reduced map
    fix_num = f.num - Polynomial([0, 1]) * f.den
    out = []
    for r, mult in poly_roots(fix_num, warn=False):
        lam = complex(_map_derivative(f, r))
        out.append(FixedPointReport(r, lam, _kind(lam, tol), mult))
    if include_infinity:
        out.append(classify_infinity(spec))
    return out


def _map_derivative(f: RationalMap, z):
    n, d = f.num, f.den
    with np.errstate(all="ignore"):
        return (n.deriv()(z) * d(z) - n(z) * d.deriv()(z)) / d(z) ** 2


def _reversed(poly: Polynomial, deg: int) -> Polynomial:
    c = np.zeros(deg + 1, dtype=complex)
    c[: poly.coeffs.size] = poly.coeffs
    return Polynomial(c[::-1])


def chart_at_infinity(spec: NewtonSpec):
    """F(w) = 1 / N(1 / w) evaluated through reversed polynomials."""
    f = spec.map
    dn, dd = f.num.degree, f.den.degree
    big = max(dn, dd)
    nr, dr = _reversed(f.num, big), _reversed(f.den, big)

    def F(w):
        with np.errstate(all="ignore"):
            return dr(w) / nr(w)

    return F


def numeric_multiplier_at_infinity(spec: NewtonSpec, h: float = 1e-3) -> complex:
    """Richardson-extrapolated central difference of the chart map at 0."""
    F = chart_at_infinity(spec)

    def central(s):
        return (F(s) - F(-s)) / (2 * s)

    return complex((4 * central(h / 2) - central(h)) / 3)


def parabolic_multiplicity_at_infinity(spec: NewtonSpec, rel: float = 1e-10) -> int:
    """Order of vanishing of F(w) - w at 0, read off the chart polynomials."""
    f = spec.map
    big = max(f.num.degree, f.den.degree)
    nr, dr = _reversed(f.num, big), _reversed(f.den, big)
    # F(w) - w = (dr - w nr) / nr
    diff = (dr - Polynomial([0, 1]) * nr).coeffs
    scale = max(np.max(np.abs(dr.coeffs)), np.max(np.abs(nr.coeffs)))
    nz = np.flatnonzero(np.abs(diff) > rel * scale)
    return int(nz[0]) if nz.size else big + 1


def classify_infinity(spec: NewtonSpec) -> FixedPointReport:
    if spec.n == 0:
        m = spec.m
        lam = complex(m / (m - 1))
        return FixedPointReport(INF, lam, "repelling", 1, 0)
    return FixedPointReport(INF, 1 + 0j, "parabolic", spec.n + 1, spec.n)


def local_degree_at_infinity(f: RationalMap) -> int:
    dn, dd = f.num.degree, f.den.degree
    if dn != dd:
        return abs(dn - dd)
    a = f.num.lead / f.den.lead
    rest = f.num - f.den * a
    return dn - max(rest.degree, 0) if not rest.is_zero() else dn


def critical_points(spec: NewtonSpec, tol: float = TAU_ROOT,
                    cluster: float = TAU_CLUSTER) -> list[CriticalPoint]:
    """Zeros of the Wronskian num' den - num den' (poles of order >= 2
    included), plus infinity when it is critical."""
    f = spec.map
    w = f.num.deriv() * f.den - f.num * f.den.deriv()
    out = []
    if w.degree >= 1:
        out = [CriticalPoint(r, k + 1) for r, k in poly_roots(w, tol, cluster, warn=False)]
    k_inf = local_degree_at_infinity(f)
    if k_inf > 1:
        out.append(CriticalPoint(INF, k_inf))
    return out


def critical_multiplicity(points: list[CriticalPoint]) -> int:
    return sum(c.local_degree - 1 for c in points)


def qprime_is_monic(spec: NewtonSpec, tol: float = 1e-9) -> bool:
    return spec.n >= 1 and abs(spec.q.deriv().lead - 1) <= tol


def petal_directions(spec: NewtonSpec) -> list[float]:
    """Attracting directions at infinity, theta_k = (2k+1) pi / n.

    Valid only for q' monic; normalise first.
    """
    if spec.n == 0:
        raise NotParabolic("infinity is repelling when q is constant")
    if not qprime_is_monic(spec):
        raise ValueError("petal directions need q' monic; normalize the map first")
    n = spec.n
    return [(2 * k + 1) * math.pi / n for k in range(n)]


def local_expansion(spec: NewtonSpec, xi: complex, k: int) -> complex:
    """Leading coefficient a of N(z) - xi ~ a (z - xi)^k at a fixed point."""
    f = spec.map
    num = (f.num - f.den * xi).compose_affine(1.0, xi)
    den = f.den.compose_affine(1.0, xi)
    c = num.coeffs
    j = k if k < c.size else c.size - 1
    return complex(c[j] / den.coeffs[0])


@dataclass(frozen=True)
class BlaschkeModel:
    k: int
    a: float
    map: RationalMap

    def check(self, tol: float = 1e-10, samples: int = 100) -> dict:
        P = self.map
        one = complex(P(1.0))
        h = 1e-4
        der = (complex(P(1 + h)) - complex(P(1 - h))) / (2 * h)
        # Richardson step removes the O(h^2) term
        der2 = (complex(P(1 + h / 2)) - complex(P(1 - h / 2))) / h
        der = (4 * der2 - der) / 3
        theta = np.linspace(0, 2 * np.pi, samples, endpoint=False)
        circle = np.max(np.abs(np.abs(P.evaluate(np.exp(1j * theta))) - 1))
        w = P.num.deriv() * P.den - P.num * P.den.deriv()
        crit_order = int(np.flatnonzero(np.abs(w.coeffs) > tol)[0])
        return {"fixes_one": abs(one - 1) <= tol,
                "multiplier_one": abs(der - 1) <= 1e-8,
                "circle_invariant": circle <= 1e-12,
                "critical_zero_degree": crit_order + 1 == self.k,
                "multiplier": der, "circle_error": float(circle)}


def blaschke_model(k: int) -> BlaschkeModel:
    """Parabolic Blaschke product (z^k + a) / (1 + a z^k), a = (k-1)/(k+1)."""
    if k < 2:
        raise ValueError("k must be >= 2")
    a = (k - 1) / (k + 1)
    num = Polynomial.monomial(k) + a
    den = Polynomial.monomial(k, a) + 1
    model = BlaschkeModel(k, a, RationalMap(num, den, reduced=True))
    report = model.check()
    failed = [key for key in ("fixes_one", "multiplier_one", "circle_invariant",
                              "critical_zero_degree") if not report[key]]
    if failed:
        raise ArithmeticError(f"Blaschke model k={k} failed {failed}")
    return model


__all__ = [
    "NewtonSpec", "FixedPointReport", "CriticalPoint", "BlaschkeModel",
    "ConstantMap", "DegreeTooLow", "NotParabolic", "build_newton",
    "fixed_points", "classify_infinity", "critical_points", "petal_directions",
    "blaschke_model", "numeric_multiplier_at_infinity", "chart_at_infinity",
    "parabolic_multiplicity_at_infinity", "local_degree_at_infinity",
    "critical_multiplicity", "local_expansion", "cluster_points",
]
