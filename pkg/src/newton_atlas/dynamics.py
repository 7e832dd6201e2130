"""Orbits, basins, centres, area experiments and parameter-plane scans.

Fates are decided by the first trigger among

* root capture: within ``tau_capture`` of a root of p, confirmed for
  ``confirm`` further steps of non-increasing distance;
* cycle capture: an attracting cycle of period 2..``max_period``;
* petal capture (deg q >= 1): the orbit stays ``window`` consecutive steps
  in the same attracting petal region at infinity.

The petal region is read in the coordinate W = b z^n (b the leading
coefficient of q'), in which the map is close to the translation
W -> W - n.  A point with |z| > R and either Re W < -R_W or |Im W| > R_W
cannot come back, and its petal is the sector it sits in.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numba
import numpy as np
from scipy import ndimage

from .algebra import Polynomial, batch_roots, poly_roots
from .newton import NewtonSpec, build_newton, critical_points

log = logging.getLogger(__name__)

UNDECIDED, ROOT, PETAL, CYCLE = 0, 1, 2, 3
KIND_NAMES = {UNDECIDED: "Undecided", ROOT: "Root", PETAL: "Petal", CYCLE: "Cycle"}

# label encoding used by BasinGrid: roots 0.., petals PETAL_BASE + j,
# attracting cycles CYCLE_BASE + period, undecided -1
PETAL_BASE = 1000
CYCLE_BASE = 2000
UNDECIDED_LABEL = -1

BUDGET_REPELLING = 5_000
BUDGET_PARABOLIC = 50_000
ROW_CHUNK = 32


class NoCenter(RuntimeError):
    pass


@dataclass(frozen=True)
class CaptureParams:
    tau_capture: float = 1e-6
    confirm: int = 5
    window: int = 50
    angle_tol: float = math.radians(10.0)
    max_period: int = 8
    petal_radius: Optional[float] = None


def default_budget(n: int) -> int:
    return BUDGET_PARABOLIC if n >= 1 else BUDGET_REPELLING


def petal_radius(p: Polynomial, q: Polynomial, roots: Sequence[complex] = ()) -> float:
    """Radius beyond which the translation model at infinity is accurate."""
    n = max(q.degree, 0)
    if n == 0:
        return math.inf
    dq = q.deriv()
    b = dq.lead
    rmax = max((abs(r) for r in roots), default=0.0)
    low = dq.coeffs[:-1] / b
    cauchy = max((abs(c) ** (1.0 / (n - 1 - i)) for i, c in enumerate(low)), default=0.0)
    m = p.degree
    r = 4.0 * (1.0 + rmax + cauchy)
    return max(r, (8.0 * (m + 1) / abs(b)) ** (1.0 / n))


@dataclass(frozen=True)
class Fate:
    kind: str
    index: Optional[int] = None

    def __str__(self):
        return self.kind if self.index is None else f"{self.kind}({self.index})"

    @property
    def decided(self) -> bool:
        return self.kind != "Undecided"


@dataclass(frozen=True)
class OrbitRecord:
    start: complex
    fate: Fate
    steps: int
    landing_error: float
    trace: Optional[tuple] = None


# -- the orbit engine ---------------------------------------------------------

@dataclass
class _Model:
    """Coefficient rows per sample: N(z) = z - P(z) / D(z).

    ``roots`` is (S, r) NaN padded; ``rpet`` and ``lead_q`` are (S,).
    """
    P: np.ndarray
    D: np.ndarray
    roots: np.ndarray
    n: int
    rpet: np.ndarray
    lead_q: np.ndarray


def _row(poly: Polynomial) -> np.ndarray:
    return np.ascontiguousarray(poly.coeffs, dtype=complex)[None, :]


def spec_model(spec: NewtonSpec, caps: CaptureParams = CaptureParams()) -> _Model:
    rp = caps.petal_radius or petal_radius(spec.p, spec.q, spec.root_points)
    lead = spec.q.deriv().lead if spec.n >= 1 else 1.0
    roots = np.ascontiguousarray(spec.root_points, dtype=complex)[None, :]
    return _Model(_row(spec.p), _row(spec.raw_den), roots, spec.n,
                  np.array([rp], dtype=float), np.array([lead], dtype=complex))


@numba.njit(cache=True, nogil=True)
def _horner(c, z):
    acc = 0j
    for j in range(c.size - 1, -1, -1):
        acc = acc * z + c[j]
    return acc


@numba.njit(cache=True, nogil=True)
def _orbit_kernel(z0, owner, P, D, roots, n, rpet, lead_q, budget, tau, confirm, window,
                  angle_tol, max_period, kind, index, steps, err, final, traj):
    """One orbit per start point; the first trigger decides the fate."""
    record = traj.shape[1]
    tau2 = tau * tau
    hist = np.empty(max(max_period, 1), dtype=np.complex128)
    for i in range(z0.size):
        o = owner[i]
        z = z0[i]
        c_kind = 0
        c_idx = -1
        c_cnt = 0
        c_entry = 0
        c_dist = np.inf
        b = lead_q[o]
        R = rpet[o]
        RW = abs(b) * R ** n if n >= 1 else np.inf
        R2 = R * R
        argb = math.atan2(b.imag, b.real)
        t = 0
        pos = 0
        kind[i] = UNDECIDED
        index[i] = -1
        err[i] = np.nan
        while True:
            if t < record:
                traj[i, t] = z
            if not (np.isfinite(z.real) and np.isfinite(z.imag)):
                steps[i] = t
                final[i] = z
                break
            cand_k = 0
            cand_i = -1
            dist = np.inf
            best = np.inf
            bj = -1
            for j in range(roots.shape[1]):
                r = roots[o, j]
                if np.isnan(r.real):
                    continue
                dx = z.real - r.real
                dy = z.imag - r.imag
                d2 = dx * dx + dy * dy
                if d2 < best:
                    best = d2
                    bj = j
            if best < tau2:
                cand_k = ROOT
                cand_i = bj
                dist = math.sqrt(best)
            elif max_period >= 2:
                for per in range(2, max_period + 1):
                    if t < per:
                        break
                    k = pos - per
                    if k < 0:
                        k += max_period
                    w = hist[k]
                    dx = z.real - w.real
                    dy = z.imag - w.imag
                    d2 = dx * dx + dy * dy
                    if d2 < tau2:
                        cand_k = CYCLE
                        cand_i = per
                        dist = math.sqrt(d2)
                        break
            if cand_k == 0 and n >= 1 and z.real * z.real + z.imag * z.imag > R2:
                zn = z
                for _ in range(n - 1):
                    zn = zn * z
                W = b * zn
                if W.real < -RW or abs(W.imag) > RW:
                    s = math.floor((n * math.atan2(z.imag, z.real) + argb) / (2 * math.pi))
                    j = ((s % n) + n) % n
                    # with angle_tol >= 0, count the step only once the argument
                    # has settled near theta_j
                    off = math.atan2(z.imag, z.real) - ((2 * j + 1) * math.pi - argb) / n
                    off = (off + math.pi) % (2 * math.pi) - math.pi
                    if angle_tol < 0 or abs(off) <= angle_tol:
                        cand_k = PETAL
                        cand_i = j
                        dist = abs(off)
            if cand_k != 0 and cand_k == c_kind and cand_i == c_idx and (
                    cand_k == PETAL or dist <= c_dist * (1 + 1e-9) + 1e-15):
                c_cnt += 1
                c_dist = dist
            elif cand_k != 0:
                c_kind = cand_k
                c_idx = cand_i
                c_cnt = 1
                c_entry = t
                c_dist = dist
            else:
                c_kind = 0
                c_idx = -1
                c_cnt = 0
                c_dist = np.inf
            need = window if c_kind == PETAL else confirm + 1
            if c_kind != 0 and c_cnt >= need:
                kind[i] = c_kind
                index[i] = c_idx
                steps[i] = c_entry
                err[i] = c_dist
                final[i] = z
                break
            if t >= budget:
                steps[i] = t
                final[i] = z
                break
            if max_period >= 2:
                hist[pos] = z
                pos += 1
                if pos == max_period:
                    pos = 0
            p = _horner(P[o], z)
            d = _horner(D[o], z)
            z = z - p / d if d != 0 else complex(np.inf, 0.0)
            t += 1


def _run(z0: np.ndarray, owner: np.ndarray, model: _Model, budget: int,
         caps: CaptureParams, record: int = 0, settle: bool = False):
    """Iterate many orbits; returns dict of per-orbit arrays.

    Petal capture needs the orbit to stay ``window`` steps in the invariant
    region near infinity; with ``settle`` its argument must also lie within
    ``angle_tol`` of the petal direction during those steps.  The petal index
    cannot change inside the region, so grids skip the (slow) settling.
    """
    N = z0.size
    kind = np.zeros(N, dtype=np.int8)
    index = np.full(N, -1, dtype=np.int64)
    steps = np.zeros(N, dtype=np.int64)
    err = np.full(N, np.nan)
    final = np.zeros(N, dtype=complex)
    traj = np.full((N, record), np.nan + 0j, dtype=complex)
    _orbit_kernel(np.ascontiguousarray(z0, dtype=complex), np.ascontiguousarray(owner, dtype=np.int64),
                  np.ascontiguousarray(model.P, dtype=complex),
                  np.ascontiguousarray(model.D, dtype=complex),
                  np.ascontiguousarray(model.roots, dtype=complex), int(model.n),
                  np.ascontiguousarray(model.rpet, dtype=float),
                  np.ascontiguousarray(model.lead_q, dtype=complex), int(budget),
                  float(caps.tau_capture), int(caps.confirm), int(caps.window),
                  float(caps.angle_tol) if settle else -1.0, int(caps.max_period), kind, index, steps, err, final, traj)
    out = {"kind": kind, "index": index, "steps": steps, "err": err, "final": final}
    if record:
        out["traj"] = traj
    return out


def _fate(kind: int, index: int) -> Fate:
    if kind == UNDECIDED:
        return Fate("Undecided")
    return Fate(KIND_NAMES[kind], int(index))


def iterate_orbit(spec: NewtonSpec, z0: complex, budget: Optional[int] = None,
                  caps: CaptureParams = CaptureParams(), trace: int = 0) -> OrbitRecord:
    budget = default_budget(spec.n) if budget is None else budget
    res = _run(np.array([complex(z0)]), np.zeros(1, dtype=np.int64),
               spec_model(spec, caps), budget, caps, record=trace, settle=True)
    k, i = int(res["kind"][0]), int(res["index"][0])
    fate = _fate(k, i)
    if k == PETAL:
        theta = (2 * i + 1) * math.pi / spec.n - np.angle(spec.q.deriv().lead) / spec.n
        landing = float(abs(np.angle(res["final"][0] * np.exp(-1j * theta))))
    else:
        landing = float(res["err"][0])
    tr = None
    if trace:
        t = res["traj"][0]
        tr = tuple(complex(v) for v in t[~np.isnan(t)])
    return OrbitRecord(complex(z0), fate, int(res["steps"][0]), landing, tr)


def orbit_prefix(spec: NewtonSpec, z0: complex, length: int) -> np.ndarray:
    out = np.empty(length + 1, dtype=complex)
    z = np.array([complex(z0)])
    for t in range(length + 1):
        out[t] = z[0]
        z = spec.step(z)
    return out


# -- basin grids --------------------------------------------------------------

@dataclass(frozen=True)
class Viewport:
    center: complex
    width: float
    height: float

    def extent(self):
        c = self.center
        return (c.real - self.width / 2, c.real + self.width / 2,
                c.imag - self.height / 2, c.imag + self.height / 2)

    @classmethod
    def around(cls, points, margin: float = 0.5, min_half: float = 1.0) -> "Viewport":
        pts = np.asarray(list(points), dtype=complex)
        lo = np.array([pts.real.min(), pts.imag.min()])
        hi = np.array([pts.real.max(), pts.imag.max()])
        half = max(min_half, float(np.max(hi - lo)) * (0.5 + margin))
        mid = (lo + hi) / 2
        return cls(complex(mid[0], mid[1]), 2 * half, 2 * half)


def pixel_grid(viewport: Viewport, resolution: tuple[int, int]) -> np.ndarray:
    """Pixel-centre coordinates, shape (H, W), row 0 at the top."""
    W, H = resolution
    if viewport.width == 0:
        W = 1
    if viewport.height == 0:
        H = 1
    x0, x1, y0, y1 = viewport.extent()
    xs = x0 + (np.arange(W) + 0.5) * (x1 - x0) / W
    ys = y1 - (np.arange(H) + 0.5) * (y1 - y0) / H
    return xs[None, :] + 1j * ys[:, None]


@dataclass
class BasinGrid:
    viewport: Viewport
    resolution: tuple[int, int]
    labels: np.ndarray
    iterations: np.ndarray
    budget: int
    caps: CaptureParams
    roots: tuple = ()
    n: int = 0

    def fractions(self) -> dict[int, float]:
        vals, counts = np.unique(self.labels, return_counts=True)
        total = self.labels.size
        return {int(v): c / total for v, c in zip(vals, counts)}

    def pixel_of(self, z: complex) -> Optional[tuple[int, int]]:
        H, W = self.labels.shape
        x0, x1, y0, y1 = self.viewport.extent()
        if not (x0 <= z.real <= x1 and y0 <= z.imag <= y1):
            return None
        i = min(W - 1, int((z.real - x0) / max(x1 - x0, 1e-300) * W)) if x1 > x0 else 0
        j = min(H - 1, int((y1 - z.imag) / max(y1 - y0, 1e-300) * H)) if y1 > y0 else 0
        return j, i


def encode_labels(kind: np.ndarray, index: np.ndarray) -> np.ndarray:
    lab = np.full(kind.shape, UNDECIDED_LABEL, dtype=np.int32)
    lab[kind == ROOT] = index[kind == ROOT]
    lab[kind == PETAL] = PETAL_BASE + index[kind == PETAL]
    lab[kind == CYCLE] = CYCLE_BASE + index[kind == CYCLE]
    return lab


def worker_count(workers: Optional[int] = None) -> int:
    if workers is None:
        env = os.environ.get("NEWTON_ATLAS_THREADS")
        workers = int(env) if env else min(4, os.cpu_count() or 1)
    return max(1, int(workers))


def _label_points(z: np.ndarray, model: _Model, budget: int, caps: CaptureParams,
                  workers: Optional[int], chunk: int):
    """Labels and step counts for a flat array of starts, in fixed-size chunks
    so the output does not depend on how many workers run them."""
    bounds = [(a, min(z.size, a + chunk)) for a in range(0, z.size, chunk)]

    def work(ab):
        a, b = ab
        return _run(z[a:b], np.zeros(b - a, dtype=np.int64), model, budget, caps)

    nw = worker_count(workers)
    if nw == 1 or len(bounds) <= 1:
        results = [work(b) for b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=nw) as ex:
            results = list(ex.map(work, bounds))
    if not results:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    kind = np.concatenate([r["kind"] for r in results])
    index = np.concatenate([r["index"] for r in results])
    steps = np.concatenate([r["steps"] for r in results])
    return encode_labels(kind, index), steps


def basin_grid(spec: NewtonSpec, viewport: Viewport, resolution: tuple[int, int] = (400, 400),
               budget: Optional[int] = None, caps: CaptureParams = CaptureParams(),
               workers: Optional[int] = None) -> BasinGrid:
    """Per-pixel fates, computed in blocks of ROW_CHUNK rows."""
    budget = default_budget(spec.n) if budget is None else budget
    z = pixel_grid(viewport, resolution)
    H, W = z.shape
    labels, iters = _label_points(z.ravel(), spec_model(spec, caps), budget, caps, workers,
                                  ROW_CHUNK * W)
    return BasinGrid(viewport, (W, H), labels.reshape(H, W), iters.reshape(H, W), budget,
                     caps, tuple(spec.root_points), spec.n)


def fate_label(fate: Fate) -> int:
    if fate.kind == "Root":
        return fate.index
    if fate.kind == "Petal":
        return PETAL_BASE + fate.index
    if fate.kind == "Cycle":
        return CYCLE_BASE + fate.index
    return UNDECIDED_LABEL


def connectivity_probe(grid: BasinGrid, label: int, seed: Optional[complex] = None) -> dict:
    """4-connected components of one label; whether the chosen component
    (the one holding ``seed``, else the largest) touches the viewport edge."""
    mask = grid.labels == label
    comp, count = ndimage.label(mask)
    if count == 0:
        return {"components": 0, "touches_boundary": False}
    target = None
    if seed is not None:
        px = grid.pixel_of(complex(seed))
        if px is not None and comp[px] > 0:
            target = comp[px]
    if target is None:
        sizes = np.bincount(comp.ravel())[1:]
        target = int(np.argmax(sizes)) + 1
    sel = comp == target
    edge = sel[0, :].any() or sel[-1, :].any() or sel[:, 0].any() or sel[:, -1].any()
    return {"components": int(count), "touches_boundary": bool(edge)}


# -- component membership and centres -----------------------------------------

def same_component(spec: NewtonSpec, z1: complex, z2: complex, resolution: int = 401,
                   budget: int = 3000, caps: CaptureParams = CaptureParams(),
                   max_half: Optional[float] = None) -> bool:
    """Do z1 and z2 lie in one 4-connected component of a common fate?

    Heuristic: rendered at growing boxes around the two points, so a
    component that leaves a small box and returns is still found.
    """
    f1 = iterate_orbit(spec, z1, budget, caps).fate
    f2 = iterate_orbit(spec, z2, budget, caps).fate
    if not f1.decided or f1 != f2:
        return False
    lab = fate_label(f1)
    rp = caps.petal_radius or petal_radius(spec.p, spec.q, spec.root_points)
    max_half = max_half or (2.0 * rp if math.isfinite(rp) else
                            8.0 * (1 + max(abs(r) for r in spec.root_points)))
    vp = Viewport.around([z1, z2], margin=0.3, min_half=0.25)
    while True:
        g = basin_grid(spec, vp, (resolution, resolution), budget, caps, workers=1)
        comp, _ = ndimage.label(g.labels == lab)
        a, b = g.pixel_of(complex(z1)), g.pixel_of(complex(z2))
        if a is not None and b is not None and comp[a] and comp[a] == comp[b]:
            return True
        if vp.width / 2 >= max_half:
            return False
        vp = replace(vp, width=vp.width * 2, height=vp.height * 2)


def in_immediate_basin(spec: NewtonSpec, z: complex, fate: Optional[Fate] = None,
                       **kw) -> bool:
    """Immediate (invariant) component test: z shares its component with N(z),
    or with the attracting root itself."""
    fate = fate or iterate_orbit(spec, z).fate
    if fate.kind == "Root":
        return same_component(spec, z, spec.root_points[fate.index], **kw)
    if fate.kind in ("Petal", "Cycle"):
        return same_component(spec, z, spec(complex(z)), **kw)
    return False


def preimages(spec: NewtonSpec, w: complex) -> list[complex]:
    f = spec.map
    poly = f.num - f.den * w
    if poly.degree < 1:
        return []
    return [r for r, _ in poly_roots(poly, warn=False)]


def find_center(spec: NewtonSpec, component_seed: complex, budget: Optional[int] = None,
                max_preperiod: int = 12) -> complex:
    """Centre of the Fatou component containing the seed."""
    seed = complex(component_seed)
    rec = iterate_orbit(spec, seed, budget)
    if not rec.fate.decided:
        raise NoCenter(f"orbit of {seed} undecided within budget")
    crit = [c for c in critical_points(spec) if np.isfinite(c.location)]
    # walk forward until the orbit sits in the immediate component
    orbit = orbit_prefix(spec, seed, max_preperiod)
    for m in range(max_preperiod + 1):
        if in_immediate_basin(spec, orbit[m], rec.fate):
            break
    else:
        raise NoCenter(f"no immediate component reached within {max_preperiod} steps")
    if rec.fate.kind == "Root":
        centre = complex(spec.root_points[rec.fate.index])
    elif rec.fate.kind == "Petal":
        cands = [c.location for c in crit
                 if iterate_orbit(spec, c.location, budget).fate == rec.fate
                 and same_component(spec, c.location, orbit[m])]
        if len(cands) != 1:
            raise NoCenter(f"immediate basin holds {len(cands)} critical points")
        centre = complex(cands[0])
    else:
        cands = [c.location for c in crit if same_component(spec, c.location, orbit[m])]
        if not cands:
            raise NoCenter("no critical point in the periodic component")
        centre = complex(cands[0])
    # pull the centre back along the orbit
    for s in range(m - 1, -1, -1):
        pre = [w for w in preimages(spec, centre) if same_component(spec, w, orbit[s])]
        if not pre:
            raise NoCenter(f"no preimage of the centre in the component of step {s}")
        centre = min(pre, key=lambda w: abs(w - orbit[s]))
    return centre


# -- area experiment ------------------------------------------------------------

@dataclass
class AreaEstimate:
    radius_schedule: list
    areas: list
    saturated: bool


def estimate_basin_area(spec: NewtonSpec, root_index: int, radii: Sequence[float],
                        resolution: int = 800, budget: Optional[int] = None,
                        caps: CaptureParams = CaptureParams(),
                        workers: Optional[int] = None) -> AreaEstimate:
    """Pixel area of the immediate basin of one root clipped to [-R, R]^2.

    Each radius gets its own grid of ``resolution`` pixels across [-R, R];
    inside the previous box it copies the finer grid's root mask, so only
    the new annulus is iterated.  Connectivity runs from the coarsest grid
    inwards: a component of a finer grid counts if it holds the root or
    touches its box edge where the coarser grid found the immediate basin
    (lobes that leave the box and come back).  Areas add annulus by annulus,
    so they are non-decreasing and the core gets the finest pixels.
    """
    radii = sorted(float(r) for r in radii)
    if not radii:
        return AreaEstimate([], [], False)
    budget = default_budget(spec.n) if budget is None else budget
    model = spec_model(spec, caps)
    root = complex(spec.root_points[root_index])
    N = int(resolution)
    grids, inners = [], []
    for k, r in enumerate(radii):
        vp = Viewport(0j, 2 * r, 2 * r)
        z = pixel_grid(vp, (N, N))
        mask = np.zeros((N, N), dtype=bool)
        inner = np.zeros((N, N), dtype=bool)
        if k:
            pr = radii[k - 1]
            inner = (np.abs(z.real) <= pr) & (np.abs(z.imag) <= pr)
            mask[inner] = _sample(grids[-1], grids[-1].labels, z[inner])
        labels, _ = _label_points(z[~inner], model, budget, caps, workers, ROW_CHUNK * N)
        mask[~inner] = labels == root_index
        grids.append(BasinGrid(vp, (N, N), mask, mask, budget, caps))
        inners.append(inner)
    imm = [None] * len(radii)
    for k in range(len(radii) - 1, -1, -1):
        g = grids[k]
        comp, _ = ndimage.label(g.labels)
        keep = set()
        at = g.pixel_of(root)
        if at is not None:
            keep.add(int(comp[at]))
        if k + 1 < len(radii):
            edge = np.zeros((N, N), dtype=bool)
            edge[[0, -1], :] = edge[:, [0, -1]] = True
            zs = pixel_grid(g.viewport, (N, N))[edge]
            hit = _sample(grids[k + 1], imm[k + 1], zs)
            keep.update(int(v) for v in comp[edge][hit])
        keep.discard(0)
        imm[k] = np.isin(comp, list(keep))
    areas, total = [], 0.0
    for k, r in enumerate(radii):
        total += float(np.count_nonzero(imm[k] & ~inners[k])) * (2 * r / N) ** 2
        areas.append(total)
    sat = len(areas) >= 2 and areas[-1] > 0 and (areas[-1] - areas[-2]) / areas[-1] < 0.01
    return AreaEstimate(radii, areas, bool(sat))


def _sample(grid: BasinGrid, values: np.ndarray, z: np.ndarray) -> np.ndarray:
    row, col = _pixel_index(grid, z)
    return values[row, col]


def _pixel_index(grid: BasinGrid, z: np.ndarray):
    """Row and column of the pixel of ``grid`` containing each point (clipped)."""
    H, W = grid.labels.shape
    x0, x1, y0, y1 = grid.viewport.extent()
    col = np.clip(np.floor((z.real - x0) / (x1 - x0) * W).astype(np.int64), 0, W - 1)
    row = np.clip(np.floor((y1 - z.imag) / (y1 - y0) * H).astype(np.int64), 0, H - 1)
    return row, col


# -- parameter-plane scans ------------------------------------------------------

@dataclass(frozen=True)
class Family:
    """p_c = p0 + c p1, q_c = q0 + c q1."""
    p0: Polynomial
    p1: Polynomial
    q0: Polynomial
    q1: Polynomial

    def at(self, c: complex) -> tuple[Polynomial, Polynomial]:
        return self.p0 + self.p1 * c, self.q0 + self.q1 * c

    def spec(self, c: complex) -> NewtonSpec:
        p, q = self.at(c)
        return build_newton(p, q)

    @property
    def m(self) -> int:
        return max(self.p0.degree, self.p1.degree)

    @property
    def n(self) -> int:
        return max(self.q0.degree, self.q1.degree, 0)


def quadratic_family() -> Family:
    """z - (z^2 + c) / (z^2 + 2 z + c): p = z^2 + c, q = z."""
    return Family(Polynomial([0, 0, 1]), Polynomial([1]), Polynomial([0, 1]), Polynomial([0]))


def _coeff_rows(polys: Sequence[Polynomial], width: int) -> np.ndarray:
    out = np.zeros((len(polys), width), dtype=complex)
    for i, p in enumerate(polys):
        out[i, : p.coeffs.size] = p.coeffs
    return out


@dataclass
class _FamilyBatch:
    """Per-sample polynomial data for a vector of parameters."""
    family: Family
    c: np.ndarray

    def __post_init__(self):
        fam, c = self.family, self.c
        m, n = fam.m, fam.n
        w = m + 2 * n + 2
        P0, P1 = _coeff_rows([fam.p0], w)[0], _coeff_rows([fam.p1], w)[0]
        Q0, Q1 = _coeff_rows([fam.q0], w)[0], _coeff_rows([fam.q1], w)[0]
        self.P = P0[None, :] + c[:, None] * P1[None, :]
        self.Q = Q0[None, :] + c[:, None] * Q1[None, :]
        self.dP = _deriv_rows(self.P)
        self.dQ = _deriv_rows(self.Q)
        self.D = self.dP + _mul_rows(self.P, self.dQ, w)
        # g = p'' + 2 p' q' + p q'' + p q'^2, zeros are the free critical points
        self.G = (_deriv_rows(self.dP) + 2 * _mul_rows(self.dP, self.dQ, w)
                  + _mul_rows(self.P, _deriv_rows(self.dQ), w)
                  + _mul_rows(self.P, _mul_rows(self.dQ, self.dQ, w), w))
        self.roots = batch_roots(self.P[:, : m + 1])
        self.crit = _merge_close(batch_roots(_trim_rows(self.G)))
        self.poles = batch_roots(_trim_rows(self.D))
        self.lead_q = self.dQ[:, n - 1] if n >= 1 else np.ones(c.size, dtype=complex)
        rmax = np.max(np.abs(self.roots), axis=1)
        if n >= 1:
            low = self.dQ[:, : n - 1] / self.lead_q[:, None]
            cauchy = (np.max(np.abs(low) ** (1.0 / (n - 1 - np.arange(n - 1)))[None, :], axis=1)
                      if n > 1 else np.zeros(c.size))
            r = 4 * (1 + rmax + cauchy)
            self.rpet = np.maximum(r, (8.0 * (m + 1) / np.abs(self.lead_q)) ** (1.0 / n))
        else:
            self.rpet = np.full(c.size, np.inf)

    def model(self) -> _Model:
        return _Model(_trim_rows(self.P), _trim_rows(self.D), self.roots, self.family.n,
                      self.rpet, self.lead_q)


def _deriv_rows(C):
    out = np.zeros_like(C)
    out[:, :-1] = C[:, 1:] * np.arange(1, C.shape[1])
    return out


def _mul_rows(A, B, width):
    out = np.zeros((A.shape[0], width), dtype=complex)
    na = np.flatnonzero(np.any(A != 0, axis=0))
    nb = np.flatnonzero(np.any(B != 0, axis=0))
    for i in na:
        for j in nb:
            if i + j < width:
                out[:, i + j] += A[:, i] * B[:, j]
    return out


def _merge_close(R, rel: float = 1e-5):
    """A multiple root comes back as a spread cluster; use its mean."""
    R = R.copy()
    K = R.shape[1]
    for i in range(K):
        for j in range(i + 1, K):
            close = np.abs(R[:, i] - R[:, j]) < rel * (1 + np.abs(R[:, i]))
            mid = (R[close, i] + R[close, j]) / 2
            R[close, i] = mid
            R[close, j] = mid
    return R


def _trim_rows(C):
    cols = np.flatnonzero(np.any(C != 0, axis=0))
    return C[:, : cols[-1] + 1]


@dataclass
class ScanResult:
    family: Family
    region: tuple
    resolution: tuple
    c: np.ndarray                    # (H, W) sample parameters (cell centres)
    fates: list                      # per free critical point: (H, W) str arrays
    preperiods: list                 # per free critical point: (H, W) int arrays
    residual: np.ndarray             # (H, W) combined landing residual
    pcm_flag: np.ndarray             # (H, W) bool
    refined: list = field(default_factory=list)   # (row, col, c*, residual)
    critical_count: int = 0

    def cell_contains(self, row: int, col: int, c: complex) -> bool:
        x0, x1, y0, y1 = self.region
        W, H = self.resolution
        dx, dy = (x1 - x0) / W, (y1 - y0) / H
        lo_x, lo_y = x0 + col * dx, y1 - (row + 1) * dy
        eps = 1e-12 * max(1.0, abs(c))
        return (lo_x - eps <= c.real <= lo_x + dx + eps) and (lo_y - eps <= c.imag <= lo_y + dy + eps)

    def flagged_cells(self) -> list[tuple[int, int]]:
        return [tuple(map(int, rc)) for rc in np.argwhere(self.pcm_flag)]


def _landing_residuals(batch: _FamilyBatch, res: dict, owner: np.ndarray, K: int, L: int):
    """Combined residual per sample; 0 means every free critical orbit lands.

    Root fate: let J be the first step inside the local disk of radius rho
    about the root; the residual is (|z_J - r| / rho) ** (1 / 2**J), small
    only for an (almost) exact early landing.  Petal fate: critical points
    sharing a petal must all map onto one of them, the candidate centre.
    """
    S = batch.c.size
    kind = res["kind"].reshape(S, K)
    index = res["index"].reshape(S, K)
    traj = res["traj"].reshape(S, K, L)
    crit = batch.crit
    out = np.zeros(S)
    roots = batch.roots
    m = roots.shape[1]
    # local radius per root: a quarter of the distance to other roots and poles
    others = np.concatenate([roots, batch.poles], axis=1)
    dd = np.abs(roots[:, :, None] - others[:, None, :])
    for i in range(m):
        dd[:, i, i] = np.inf
    rho = 0.25 * np.min(dd, axis=2)
    per_crit = np.ones((S, K))
    for k in range(K):
        rk = kind[:, k] == ROOT
        if rk.any():
            s = np.flatnonzero(rk)
            r = roots[s, index[s, k]]
            rh = rho[s, index[s, k]]
            d = np.abs(traj[s, k, :] - r[:, None])
            inside = d < rh[:, None]
            J = np.argmax(inside, axis=1)
            found = inside[np.arange(s.size), J]
            dj = d[np.arange(s.size), J]
            val = np.where(found, (dj / rh) ** (1.0 / 2.0 ** J), 1.0)
            per_crit[s, k] = val
    # petal groups
    for s_ in range(S):
        worst = 0.0
        for k in range(K):
            if kind[s_, k] == ROOT:
                worst = max(worst, per_crit[s_, k])
            elif kind[s_, k] in (UNDECIDED, CYCLE):
                worst = max(worst, 1.0)
        pet = [k for k in range(K) if kind[s_, k] == PETAL]
        groups: dict[int, list[int]] = {}
        for k in pet:
            groups.setdefault(int(index[s_, k]), []).append(k)
        for ks in groups.values():
            if len(ks) == 1:
                continue
            best = np.inf
            for t in ks:
                tgt = crit[s_, t]
                worst_t = 0.0
                for w in ks:
                    if w == t:
                        continue
                    tr = traj[s_, w]
                    worst_t = max(worst_t, float(np.nanmin(np.abs(tr - tgt))))
                best = min(best, worst_t)
            worst = max(worst, min(best, 1.0))
        out[s_] = worst
    return out


def _scan_samples(family: Family, cvals: np.ndarray, budget: int, caps: CaptureParams,
                  record: int = 48):
    batch = _FamilyBatch(family, cvals)
    S = cvals.size
    K = batch.crit.shape[1]
    z0 = batch.crit.ravel()
    owner = np.repeat(np.arange(S), K)
    res = _run(z0, owner, batch.model(), budget, caps, record=record)
    resid = _landing_residuals(batch, res, owner, K, record)
    return batch, res, resid, K


def pcm_residual(family: Family, c: complex, budget: Optional[int] = None,
                 caps: CaptureParams = CaptureParams()) -> float:
    budget = default_budget(family.n) if budget is None else budget
    _, _, resid, _ = _scan_samples(family, np.array([complex(c)]), budget, caps)
    return float(resid[0])


def param_scan(family: Family, region: tuple, resolution: tuple[int, int] = (200, 200),
               budget: Optional[int] = None, caps: CaptureParams = CaptureParams(),
               coarse_threshold: float = 0.5, refine_tol: float = 1e-6,
               workers: Optional[int] = None) -> ScanResult:
    """Scan c over region = (re_min, re_max, im_min, im_max) at cell centres.

    Cells whose combined landing residual is a local minimum below
    ``coarse_threshold`` are refined by minimising the residual inside the
    (closed) cell; the cell is flagged when the minimum is <= refine_tol.
    """
    budget = default_budget(family.n) if budget is None else budget
    x0, x1, y0, y1 = region
    W, H = resolution
    K = _FamilyBatch(family, np.array([complex((x0 + x1) / 2, (y0 + y1) / 2)])).crit.shape[1]
    if W <= 0 or H <= 0 or x1 <= x0 or y1 <= y0:
        empty = np.zeros((0, 0))
        return ScanResult(family, region, (0, 0), empty.astype(complex), [], [],
                          empty, empty.astype(bool), critical_count=K)
    vp = Viewport(complex((x0 + x1) / 2, (y0 + y1) / 2), x1 - x0, y1 - y0)
    cgrid = pixel_grid(vp, (W, H))
    Hh, Ww = cgrid.shape
    flat = cgrid.ravel()
    chunk = 4096
    parts = [flat[i:i + chunk] for i in range(0, flat.size, chunk)]

    def work(cv):
        return _scan_samples(family, cv, budget, caps)

    nw = worker_count(workers)
    if nw == 1 or len(parts) == 1:
        outs = [work(p) for p in parts]
    else:
        with ThreadPoolExecutor(max_workers=nw) as ex:
            outs = list(ex.map(work, parts))
    K = outs[0][3]
    kind = np.concatenate([o[1]["kind"].reshape(-1, K) for o in outs])
    index = np.concatenate([o[1]["index"].reshape(-1, K) for o in outs])
    steps = np.concatenate([o[1]["steps"].reshape(-1, K) for o in outs])
    resid = np.concatenate([o[2] for o in outs]).reshape(Hh, Ww)
    fates, pre = [], []
    for k in range(K):
        names = np.array([str(_fate(int(a), int(b))) for a, b in zip(kind[:, k], index[:, k])])
        fates.append(names.reshape(Hh, Ww))
        pre.append(steps[:, k].reshape(Hh, Ww))

    # local minima (ties allowed) below the coarse threshold
    padded = np.pad(resid, 1, constant_values=np.inf)
    neigh = np.min(np.stack([padded[1 + dy:1 + dy + Hh, 1 + dx:1 + dx + Ww]
                             for dy in (-1, 0, 1) for dx in (-1, 0, 1)
                             if (dy, dx) != (0, 0)]), axis=0)
    cand = (resid <= neigh) & (resid < coarse_threshold)
    flags = np.zeros((Hh, Ww), dtype=bool)
    result = ScanResult(family, region, (Ww, Hh), cgrid, fates, pre, resid, flags,
                        critical_count=K)
    dx, dy = (x1 - x0) / Ww, (y1 - y0) / Hh
    cells = [(int(r), int(c)) for r, c in np.argwhere(cand)]
    if cells:
        centres = np.array([cgrid[rc] for rc in cells])
        c_star, val = refine_cells(family, centres, dx, dy, min(budget, REFINE_BUDGET), caps,
                                   refine_tol)
        for (row, col), cs, v in zip(cells, c_star, val):
            if v <= refine_tol:
                flags[row, col] = True
                result.refined.append((row, col, complex(cs), float(v)))
    return result


REFINE_BUDGET = 2000


def refine_cells(family: Family, centres: np.ndarray, dx: float, dy: float, budget: int,
                 caps: CaptureParams, target: float = 0.0, points: int = 9, levels: int = 60):
    """Zooming grid search for the smallest residual inside each closed cell.

    All cells advance together: each level samples a points x points grid
    (clipped to the cell), re-centres on the best sample and halves the box.
    """
    n = centres.size
    lo = np.stack([centres.real - dx / 2, centres.imag - dy / 2], axis=1)
    hi = np.stack([centres.real + dx / 2, centres.imag + dy / 2], axis=1)
    mid = np.stack([centres.real, centres.imag], axis=1)
    half = np.tile([dx / 2, dy / 2], (n, 1))
    best_c = centres.astype(complex).copy()
    best_v = np.full(n, np.inf)
    live = np.ones(n, dtype=bool)
    u = np.linspace(-1.0, 1.0, points)
    for _ in range(levels):
        idx = np.flatnonzero(live)
        if not idx.size:
            break
        gx = np.clip(mid[idx, 0, None] + half[idx, 0, None] * u[None, :],
                     lo[idx, 0, None], hi[idx, 0, None])
        gy = np.clip(mid[idx, 1, None] + half[idx, 1, None] * u[None, :],
                     lo[idx, 1, None], hi[idx, 1, None])
        cs = (gx[:, None, :] + 1j * gy[:, :, None]).reshape(idx.size, -1)
        _, _, resid, _ = _scan_samples(family, cs.ravel(), budget, caps)
        resid = resid.reshape(idx.size, -1)
        j = np.argmin(resid, axis=1)
        v = resid[np.arange(idx.size), j]
        c = cs[np.arange(idx.size), j]
        better = v < best_v[idx]
        best_v[idx[better]] = v[better]
        best_c[idx[better]] = c[better]
        mid[idx, 0] = best_c[idx].real
        mid[idx, 1] = best_c[idx].imag
        half[idx] /= 2
        scale = np.maximum(1.0, np.abs(best_c[idx]))
        live[idx[(best_v[idx] <= target) | (half[idx].max(axis=1) < 1e-16 * scale)]] = False
    return best_c, best_v
