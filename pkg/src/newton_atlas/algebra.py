"""Complex polynomials, rational maps and affine/Moebius transforms.

Everything here is double precision.  The point at infinity is the value
``INF`` (``complex(inf, 0)``); use :func:`is_inf` rather than comparing.
"""

from __future__ import annotations

import cmath
import json
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

INF = complex(math.inf, 0.0)

TAU_ROOT = 1e-10
TAU_POLE = 1e-10
TAU_CLUSTER = 1e-6
ROOT_SWEEPS = 200

_EPS = np.finfo(float).eps


class NonConvergence(RuntimeError):
    pass


class Indeterminate(ArithmeticError):
    """Numerator and denominator vanish together (the map was not reduced)."""


def is_inf(z) -> bool:
    return cmath.isinf(complex(z))


class Polynomial:
    """Dense complex polynomial, coefficients in ascending degree.

    Instances are immutable; trailing zero coefficients are trimmed so the
    zero polynomial is ``Polynomial([0])`` with degree -1.
    """

    __slots__ = ("_c",)

    def __init__(self, coeffs: Iterable = (0,)):
        c = np.array(list(coeffs) if not isinstance(coeffs, np.ndarray) else coeffs,
                     dtype=complex).ravel()
        if c.size == 0:
            c = np.zeros(1, dtype=complex)
        nz = np.flatnonzero(c)
        c = c[: nz[-1] + 1] if nz.size else np.zeros(1, dtype=complex)
        if not np.all(np.isfinite(c)):
            raise ValueError("polynomial coefficients must be finite")
        c.setflags(write=False)
        self._c = c

    # construction helpers
    @classmethod
    def from_roots(cls, roots: Iterable, lead: complex = 1.0) -> "Polynomial":
        p = cls([lead])
        for r in roots:
            p = p * cls([-complex(r), 1.0])
        return p

    @classmethod
    def monomial(cls, k: int, coef: complex = 1.0) -> "Polynomial":
        c = np.zeros(k + 1, dtype=complex)
        c[k] = coef
        return cls(c)

    @classmethod
    def from_json(cls, data) -> "Polynomial":
        """Accept ``[[re, im], ...]`` (or plain numbers) in ascending degree."""
        if isinstance(data, str):
            data = json.loads(data)
        out = []
        for item in data:
            if isinstance(item, (list, tuple)):
                if len(item) != 2:
                    raise ValueError(f"coefficient {item!r} is not a [re, im] pair")
                out.append(complex(float(item[0]), float(item[1])))
            else:
                out.append(complex(item))
        return cls(out)

    def to_json(self) -> list:
        return [[float(c.real), float(c.imag)] for c in self._c]

    # basic properties
    @property
    def coeffs(self) -> np.ndarray:
        return self._c

    @property
    def degree(self) -> int:
        return -1 if self.is_zero() else self._c.size - 1

    @property
    def lead(self) -> complex:
        return complex(self._c[-1])

    def is_zero(self) -> bool:
        return self._c.size == 1 and self._c[0] == 0

    def scale(self) -> float:
        return float(np.max(np.abs(self._c)))

    def __repr__(self):
        terms = ", ".join(f"{c:.6g}" for c in self._c)
        return f"Polynomial([{terms}])"

    def __eq__(self, other):
        return isinstance(other, Polynomial) and np.array_equal(self._c, other._c)

    def __hash__(self):
        return hash(self._c.tobytes())

    # arithmetic
    def _coerce(self, other) -> "Polynomial":
        return other if isinstance(other, Polynomial) else Polynomial([other])

    def __add__(self, other):
        other = self._coerce(other)
        n = max(self._c.size, other._c.size)
        c = np.zeros(n, dtype=complex)
        c[: self._c.size] += self._c
        c[: other._c.size] += other._c
        return Polynomial(c)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(-self._c)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        return Polynomial(np.convolve(self._c, other._c))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return Polynomial(self._c / complex(scalar))

    def __call__(self, z):
        """Horner evaluation; works elementwise on numpy arrays."""
        if np.isscalar(z):
            acc = 0j
            for c in self._c[::-1]:
                acc = acc * z + c
            return complex(acc)
        z = np.asarray(z, dtype=complex)
        acc = np.zeros_like(z)
        for c in self._c[::-1]:
            acc = acc * z + c
        return acc

    def abs_bound(self, z):
        """sum |a_i| |z|^i, the natural scale for the residual at z."""
        r = np.abs(z)
        acc = np.zeros_like(r, dtype=float) if isinstance(r, np.ndarray) else 0.0
        for c in self._c[::-1]:
            acc = acc * r + abs(c)
        return acc

    def deriv(self, order: int = 1) -> "Polynomial":
        c = self._c
        for _ in range(order):
            if c.size <= 1:
                return Polynomial([0])
            c = c[1:] * np.arange(1, c.size)
        return Polynomial(c)

    def monic(self) -> "Polynomial":
        return Polynomial(self._c / self._c[-1])

    def compose_affine(self, a: complex, b: complex = 0.0) -> "Polynomial":
        """Return z -> p(a z + b)."""
        lin = Polynomial([b, a])
        out = Polynomial([0])
        for c in self._c[::-1]:
            out = out * lin + c
        return out

    def divide_linear(self, r: complex) -> tuple["Polynomial", complex]:
        """Synthetic division by (z - r); returns (quotient, remainder)."""
        c = self._c
        if c.size == 1:
            return Polynomial([0]), complex(c[0])
        q = np.zeros(c.size - 1, dtype=complex)
        acc = 0j
        for i in range(c.size - 1, 0, -1):
            acc = acc * r + c[i]
            q[i - 1] = acc
        rem = acc * r + c[0]
        return Polynomial(q), complex(rem)

    def roots(self, tol: float = TAU_ROOT, cluster: float = TAU_CLUSTER):
        return poly_roots(self, tol, cluster)


# -- spec-level operations -------------------------------------------------

def poly_eval(p: Polynomial, z):
    return p(z)


def poly_derivative(p: Polynomial) -> Polynomial:
    return p.deriv()


def fujiwara_bound(p: Polynomial) -> float:
    c = p.coeffs
    n = c.size - 1
    a = np.abs(c[:-1] / c[-1])
    terms = [a[n - k] ** (1.0 / k) for k in range(1, n)]
    terms.append((a[0] / 2.0) ** (1.0 / n))
    return 2.0 * max(terms) if terms else 0.0


def _aberth(p: Polynomial, tol: float, sweeps: int) -> np.ndarray:
    c = p.coeffs
    n = p.degree
    dp = p.deriv()
    radius = fujiwara_bound(p)
    if radius == 0.0:
        return np.zeros(n, dtype=complex)
    # offset angle avoids symmetric starts that stall on real polynomials
    z = radius * np.exp(1j * (2 * np.pi * np.arange(n) / n + 0.4))
    done = np.zeros(n, dtype=bool)
    for _ in range(sweeps):
        pz = p(z)
        err = _EPS * p.abs_bound(z) * (4 * n + 1)
        done = np.abs(pz) <= np.maximum(err, 0.0)
        if done.all():
            return z
        active = ~done
        ratio = pz[active] / dp(z[active])
        diff = z[active, None] - z[None, :]
        diff[np.arange(diff.shape[0]), np.flatnonzero(active)] = np.inf
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.sum(1.0 / diff, axis=1)
            step = ratio / (1.0 - ratio * s)
        step = np.where(np.isfinite(step), step, ratio)
        z = z.copy()
        z[active] -= step
        if np.max(np.abs(step)) <= tol * _EPS * max(1.0, np.max(np.abs(z))):
            return z
    # last-chance acceptance: residual within the user tolerance
    if np.all(np.abs(p(z)) <= tol * p.abs_bound(z) + _EPS):
        return z
    raise NonConvergence(f"Aberth iteration did not converge in {sweeps} sweeps "
                         f"(degree {n})")


def cluster_members(points: Sequence[complex], radius: float) -> list[list[int]]:
    """Single-linkage components of ``points`` at the given radius."""
    pts = np.asarray(points, dtype=complex)
    n = pts.size
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(pts[i] - pts[j]) <= radius:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def cluster_points(points: Sequence[complex], radius: float) -> list[tuple[complex, int]]:
    """Cluster means with counts, sorted lexicographically."""
    pts = np.asarray(points, dtype=complex)
    out = [(complex(np.mean(pts[idx])), len(idx)) for idx in cluster_members(pts, radius)]
    out.sort(key=lambda t: (round(t[0].real, 9), round(t[0].imag, 9)))
    return out


def _polish(p: Polynomial, r: complex, mult: int, steps: int = 3) -> complex:
    # a root of multiplicity k is a simple root of the (k-1)-th derivative
    h = p.deriv(mult - 1)
    dh = h.deriv()
    for _ in range(steps):
        d = dh(r)
        if d == 0:
            break
        step = h(r) / d
        if not cmath.isfinite(step) or abs(step) > 1e-3 * max(1.0, abs(r)):
            break
        r = r - step
    return r


def _is_multiple_root(p: Polynomial, r: complex, k: int, rel: float = 1e-12) -> bool:
    q = p
    for _ in range(k):
        if abs(q(r)) > rel * max(q.abs_bound(r), _EPS):
            return False
        q = q.deriv()
    return True


def _merge_higher_order(p, groups, radius, floor=1e-9):
    # clusters of order >= 3 spread like eps**(1/k); merge a nearby component
    # only when the merged point is a zero of p, p', ..., p^(k-1), otherwise
    # retry the component at a tenth of the radius
    out = []
    for idx in cluster_members([r for r, _ in groups], radius):
        sub = [groups[i] for i in idx]
        if len(sub) == 1:
            out.extend(sub)
            continue
        k = sum(m for _, m in sub)
        r = _polish(p, sum(z * m for z, m in sub) / k, k)
        if _is_multiple_root(p, r, k):
            out.append((r, k))
        elif radius / 10 > floor:
            out.extend(_merge_higher_order(p, sub, radius / 10, floor))
        else:
            out.extend(sub)
    out.sort(key=lambda t: (round(t[0].real, 9), round(t[0].imag, 9)))
    return out


def poly_roots(p: Polynomial, tol: float = TAU_ROOT, cluster: float = TAU_CLUSTER,
               sweeps: int = ROOT_SWEEPS, warn: bool = True) -> list[tuple[complex, int]]:
    """Distinct roots with multiplicities (summing to the degree).

    Roots closer than ``cluster * root_scale`` are merged; with ``warn`` a
    merge logs a warning because downstream analysis assumes simple roots.
    """
    if p.degree < 1:
        raise ValueError("poly_roots needs degree >= 1")
    c = p.coeffs
    # exact zero roots are stripped first; Aberth handles them poorly
    k0 = int(np.flatnonzero(c)[0])
    q = Polynomial(c[k0:])
    raw = list(_aberth(q, tol, sweeps)) if q.degree >= 1 else []
    raw += [0j] * k0
    scale = max(1.0, max(abs(r) for r in raw))
    out = [(_polish(p, r, m), m) for r, m in cluster_points(raw, cluster * scale)]
    out = _merge_higher_order(p, out, 2e-2 * scale)
    if warn and any(m > 1 for _, m in out):
        log.warning("polynomial has multiple roots: %s",
                    [(r, m) for r, m in out if m > 1])
    return out


def expand_roots(roots: Iterable[complex]) -> Polynomial:
    return Polynomial.from_roots(roots)


# -- rational maps -----------------------------------------------------------

def chordal(z, w):
    """Chordal distance on the Riemann sphere (max 2); accepts INF entries."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    zi, wi = np.isinf(z), np.isinf(w)
    with np.errstate(all="ignore"):
        big = (np.abs(z) > 1) & (np.abs(w) > 1)
        # chart swap: compare 1/z and 1/w when both are outside the unit disk
        uz = np.where(zi, 0, 1 / np.where(z == 0, 1, z))
        uw = np.where(wi, 0, 1 / np.where(w == 0, 1, w))
        d_far = 2 * np.abs(uz - uw) / np.sqrt((1 + np.abs(uz) ** 2) * (1 + np.abs(uw) ** 2))
        zf = np.where(zi, 0, z)
        wf = np.where(wi, 0, w)
        d_near = 2 * np.abs(zf - wf) / np.sqrt((1 + np.abs(zf) ** 2) * (1 + np.abs(wf) ** 2))
        # one point at infinity, the other finite
        d_zinf = 2 / np.sqrt(1 + np.abs(wf) ** 2)
        d_winf = 2 / np.sqrt(1 + np.abs(zf) ** 2)
    d = np.where(big, d_far, d_near)
    d = np.where(zi & ~wi, d_zinf, d)
    d = np.where(wi & ~zi, d_winf, d)
    d = np.where(zi & wi, 0.0, d)
    return d if d.ndim else float(d)


@dataclass(frozen=True)
class RationalMap:
    num: Polynomial
    den: Polynomial
    reduced: bool = False

    def __post_init__(self):
        if self.den.is_zero():
            raise ValueError("denominator is identically zero")

    @property
    def degree(self) -> int:
        return max(self.num.degree, self.den.degree, 0)

    def __call__(self, z, tol: float = TAU_POLE):
        return rational_eval(self, z, tol)

    def evaluate(self, z: np.ndarray) -> np.ndarray:
        """Vectorised evaluation on the sphere: INF in, INF/limit out."""
        z = np.asarray(z, dtype=complex)
        out = np.empty_like(z)
        inf = np.isinf(z)
        with np.errstate(all="ignore"):
            n = self.num(np.where(inf, 0, z))
            d = self.den(np.where(inf, 1, z))
            val = n / d
        val = np.where(d == 0, INF, val)
        out[...] = val
        if inf.any():
            out[inf] = self.value_at_infinity()
        return out

    def value_at_infinity(self) -> complex:
        dn, dd = self.num.degree, self.den.degree
        if dn > dd:
            return INF
        if dn < dd:
            return 0j
        return self.num.lead / self.den.lead

    def deriv(self) -> "RationalMap":
        n, d = self.num, self.den
        return RationalMap(n.deriv() * d - n * d.deriv(), d * d)

    def conjugate_affine(self, a: complex, b: complex = 0.0) -> "RationalMap":
        """Return T^{-1} o f o T for T(z) = a z + b."""
        n = self.num.compose_affine(a, b)
        d = self.den.compose_affine(a, b)
        return RationalMap((n - d * b) / a, d, self.reduced)

    def normalized_coeffs(self) -> tuple[np.ndarray, np.ndarray]:
        """Coefficients scaled so the leading denominator coefficient is 1."""
        s = self.den.lead
        return self.num.coeffs / s, self.den.coeffs / s


def rational_reduce(num: Polynomial, den: Polynomial, tol: float = TAU_ROOT) -> RationalMap:
    """Cancel common roots; a denominator root r is shared when
    |num(r)| <= tol * sum|a_i||r|^i."""
    if den.is_zero():
        raise ValueError("denominator is identically zero")
    if num.is_zero() or den.degree < 1:
        return RationalMap(num, den, reduced=True)
    changed = True
    while changed and den.degree >= 1 and not num.is_zero():
        changed = False
        for r, _ in poly_roots(den, tol, warn=False):
            if num.degree < 1:
                break
            if abs(num(r)) <= tol * max(num.abs_bound(r), _EPS):
                num, _ = num.divide_linear(r)
                den, _ = den.divide_linear(r)
                changed = True
                break
    return RationalMap(num, den, reduced=True)


def rational_eval(f: RationalMap, z, tol: float = TAU_POLE):
    if is_inf(z):
        return f.value_at_infinity()
    z = complex(z)
    n, d = f.num(z), f.den(z)
    dscale = max(f.den.abs_bound(z), _EPS)
    if abs(d) <= tol * dscale:
        if abs(n) <= tol * max(f.num.abs_bound(z), _EPS):
            raise Indeterminate(f"0/0 at z={z}")
        return INF
    return n / d


# -- affine and Moebius maps -------------------------------------------------

@dataclass(frozen=True)
class AffineMap:
    scale: complex = 1.0
    offset: complex = 0.0

    def __post_init__(self):
        if self.scale == 0:
            raise ValueError("affine scale must be nonzero")

    def __call__(self, z):
        if np.isscalar(z) and is_inf(z):
            return INF
        return self.scale * z + self.offset

    def inverse(self) -> "AffineMap":
        return AffineMap(1 / self.scale, -self.offset / self.scale)

    def compose(self, other: "AffineMap") -> "AffineMap":
        """self o other."""
        return AffineMap(self.scale * other.scale, self.scale * other.offset + self.offset)

    def is_identity(self, tol: float = 1e-12) -> bool:
        return abs(self.scale - 1) <= tol and abs(self.offset) <= tol

    def as_mobius(self) -> "MobiusMap":
        return MobiusMap(self.scale, self.offset, 0, 1)

    def to_json(self) -> dict:
        return {"scale": [self.scale.real, self.scale.imag] if isinstance(self.scale, complex)
                else [float(self.scale), 0.0],
                "offset": [complex(self.offset).real, complex(self.offset).imag]}


@dataclass(frozen=True)
class MobiusMap:
    a: complex
    b: complex
    c: complex
    d: complex

    def __post_init__(self):
        if abs(self.a * self.d - self.b * self.c) == 0:
            raise ValueError("Moebius determinant is zero")

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        inf = np.isinf(z)
        with np.errstate(all="ignore"):
            zz = np.where(inf, 0, z)
            num = self.a * zz + self.b
            den = self.c * zz + self.d
            out = np.where(den == 0, INF, num / np.where(den == 0, 1, den))
        at_inf = INF if self.c == 0 else self.a / self.c
        out = np.where(inf, at_inf, out)
        return out if out.ndim else complex(out)

    def inverse(self) -> "MobiusMap":
        return MobiusMap(self.d, -self.b, -self.c, self.a)

    def compose(self, other: "MobiusMap") -> "MobiusMap":
        a, b, c, d = self.a, self.b, self.c, self.d
        e, f, g, h = other.a, other.b, other.c, other.d
        return MobiusMap(a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h)


def mobius_conjugate_check(M: MobiusMap, f: RationalMap, g: RationalMap,
                           samples: int = 1000, tol: float = 1e-10, seed: int = 0,
                           radius: float = 2.0) -> float:
    """Max chordal distance between M(f(z)) and g(M(z)) over seeded samples
    drawn uniformly from the disk |z| < radius.  Residual <= tol certifies
    M o f = g o M numerically."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    r = radius * np.sqrt(rng.random(samples))
    z = r * np.exp(2j * np.pi * rng.random(samples))
    lhs = M(f.evaluate(z))
    rhs = g.evaluate(np.asarray(M(z)))
    res = float(np.max(chordal(lhs, rhs)))
    if res > tol:
        log.debug("conjugacy residual %.3g exceeds tol %.3g", res, tol)
    return res


def batch_roots(coeffs: np.ndarray, sweeps: int = ROOT_SWEEPS) -> np.ndarray:
    """Aberth iteration run simultaneously on many polynomials of equal degree.

    ``coeffs`` has shape (S, deg + 1), ascending, nonzero leading column.
    Returns (S, deg) roots without multiplicity clustering.  Rows that fail
    to converge keep their last iterate; callers check residuals if needed.
    """
    c = np.asarray(coeffs, dtype=complex)
    S, n1 = c.shape
    n = n1 - 1
    if n < 1:
        return np.zeros((S, 0), dtype=complex)
    c = c / c[:, -1:]
    dc = c[:, 1:] * np.arange(1, n1)
    a = np.abs(c[:, :-1])
    terms = [a[:, n - k] ** (1.0 / k) for k in range(1, n)] + [(a[:, 0] / 2) ** (1.0 / n)]
    radius = 2 * np.max(np.stack(terms, axis=1), axis=1)
    radius = np.where(radius > 0, radius, 1.0)
    z = radius[:, None] * np.exp(1j * (2 * np.pi * np.arange(n) / n + 0.4))[None, :]
    absc = np.abs(c)

    def horner(cc, x):
        acc = np.zeros_like(x)
        for j in range(cc.shape[1] - 1, -1, -1):
            acc = acc * x + cc[:, j:j + 1]
        return acc

    active = np.ones(S, dtype=bool)
    eye = np.eye(n, dtype=bool)
    for _ in range(sweeps):
        rows = np.flatnonzero(active)
        if rows.size == 0:
            break
        zr = z[rows]
        pz = horner(c[rows], zr)
        bound = horner(absc[rows].astype(complex), np.abs(zr).astype(complex)).real
        ok = np.abs(pz) <= _EPS * bound * (4 * n + 1)
        with np.errstate(all="ignore"):
            ratio = pz / horner(dc[rows], zr)
            diff = zr[:, :, None] - zr[:, None, :]
            diff[:, eye] = np.inf
            s = np.sum(1.0 / diff, axis=2)
            step = ratio / (1.0 - ratio * s)
        step = np.where(np.isfinite(step), step, np.where(np.isfinite(ratio), ratio, 0))
        step = np.where(ok, 0, step)
        z[rows] = zr - step
        finished = np.all(ok, axis=1) | (np.max(np.abs(step), axis=1)
                                         <= 4 * _EPS * np.maximum(1, np.max(np.abs(zr), axis=1)))
        active[rows[finished]] = False
    return z
