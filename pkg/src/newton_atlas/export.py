"""Image, sidecar and table output for basin grids, scans and diagrams."""

from __future__ import annotations

import csv
import json
import re
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .dynamics import (CYCLE_BASE, PETAL_BASE, UNDECIDED_LABEL, BasinGrid, ScanResult)

# roots cycle through these; petals get a yellow ramp; undecided is black
ROOT_PALETTE = np.array([
    (230, 25, 75), (60, 180, 75), (0, 130, 200), (245, 130, 48),
    (145, 30, 180), (70, 240, 240), (240, 50, 230), (210, 245, 60),
    (0, 128, 128), (170, 110, 40), (128, 0, 0), (0, 0, 128),
], dtype=np.uint8)
CYCLE_COLOUR = (128, 128, 128)
UNDECIDED_COLOUR = (0, 0, 0)
OVERLAY_COLOURS = {"rays": (255, 255, 255), "critical": (255, 0, 0), "fixed": (0, 0, 255)}


def petal_colour(j: int) -> tuple[int, int, int]:
    """Yellow ramp: petal 0 is light yellow, later petals darker."""
    t = (j % 6) / 6.0
    return (255, int(245 - 80 * t), int(150 - 130 * t))


def label_colour(label: int) -> tuple[int, int, int]:
    if label == UNDECIDED_LABEL:
        return UNDECIDED_COLOUR
    if label >= CYCLE_BASE:
        return CYCLE_COLOUR
    if label >= PETAL_BASE:
        return petal_colour(label - PETAL_BASE)
    return tuple(int(v) for v in ROOT_PALETTE[label % len(ROOT_PALETTE)])


def legend(grid: BasinGrid) -> list[dict]:
    out = []
    for lab in sorted(int(v) for v in np.unique(grid.labels)):
        entry = {"label": lab, "colour": list(label_colour(lab))}
        if lab == UNDECIDED_LABEL:
            entry["meaning"] = "Undecided"
        elif lab >= CYCLE_BASE:
            entry["meaning"] = f"Cycle({lab - CYCLE_BASE})"
        elif lab >= PETAL_BASE:
            entry["meaning"] = f"Petal({lab - PETAL_BASE})"
        else:
            r = grid.roots[lab] if lab < len(grid.roots) else complex("nan")
            entry["meaning"] = f"Root({lab})"
            entry["root"] = [float(r.real), float(r.imag)]
        out.append(entry)
    return out


def colourize(grid: BasinGrid, shade: bool = True) -> np.ndarray:
    """(H, W, 3) uint8 image; optional shading darkens slow-converging pixels."""
    labels = grid.labels
    uniq = np.unique(labels)
    rgb = np.zeros(labels.shape + (3,), dtype=np.float64)
    for lab in uniq:
        rgb[labels == lab] = label_colour(int(lab))
    if shade:
        it = np.log1p(grid.iterations.astype(np.float64))
        top = np.log1p(64.0)
        f = 1.0 - 0.55 * np.minimum(it / top, 1.0)
        f = np.where(labels == UNDECIDED_LABEL, 1.0, f)
        rgb *= f[..., None]
    return np.round(rgb).astype(np.uint8)


def _to_pixel(grid: BasinGrid, z: np.ndarray):
    H, W = grid.labels.shape
    x0, x1, y0, y1 = grid.viewport.extent()
    with np.errstate(all="ignore"):
        col = np.floor((z.real - x0) / max(x1 - x0, 1e-300) * W).astype(np.int64)
        row = np.floor((y1 - z.imag) / max(y1 - y0, 1e-300) * H).astype(np.int64)
    ok = np.isfinite(z) & (col >= 0) & (col < W) & (row >= 0) & (row < H)
    return row[ok], col[ok]


def draw_polyline(img: np.ndarray, grid: BasinGrid, pts: np.ndarray, colour) -> None:
    H, W = img.shape[:2]
    x0, x1, y0, y1 = grid.viewport.extent()
    px = max((x1 - x0) / max(W, 1), (y1 - y0) / max(H, 1), 1e-300)
    pts = pts[np.isfinite(pts)]
    for a, b in zip(pts[:-1], pts[1:]):
        steps = int(min(4 * max(W, H), abs(b - a) / px * 2 + 2))
        seg = a + (b - a) * np.linspace(0.0, 1.0, steps)
        r, c = _to_pixel(grid, seg)
        img[r, c] = colour


def draw_marker(img: np.ndarray, grid: BasinGrid, z: complex, colour, size: int = 2) -> None:
    r, c = _to_pixel(grid, np.array([complex(z)]))
    H, W = img.shape[:2]
    for rr, cc in zip(r, c):
        img[max(0, rr - size):min(H, rr + size + 1), max(0, cc - size):min(W, cc + size + 1)] = colour


def write_ppm(path, img: np.ndarray) -> None:
    H, W = img.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{W} {H}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img, dtype=np.uint8).tobytes())


def read_ppm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    m = re.match(rb"P6\s+(?:#[^\n]*\n\s*)*(\d+)\s+(\d+)\s+(\d+)\s", data)
    if not m or int(m.group(3)) != 255:
        raise ValueError("not an 8-bit binary PPM")
    W, H = int(m.group(1)), int(m.group(2))
    pix = np.frombuffer(data, dtype=np.uint8, count=W * H * 3, offset=m.end())
    return pix.reshape(H, W, 3)


def write_png(path, img: np.ndarray) -> None:
    try:
        from PIL import Image
    except ImportError as exc:  # optional codec
        raise RuntimeError("PNG output needs Pillow (pip install artifact[png])") from exc
    Image.fromarray(img, "RGB").save(path, format="PNG")


def sidecar(grid: BasinGrid, extra: Optional[dict] = None) -> dict:
    c = grid.viewport.center
    out = {
        "viewport": {"center": [c.real, c.imag], "width": grid.viewport.width,
                     "height": grid.viewport.height},
        "resolution": list(grid.resolution),
        "budget": grid.budget,
        "tolerances": {"tau_capture": grid.caps.tau_capture, "confirm": grid.caps.confirm,
                       "window": grid.caps.window, "max_period": grid.caps.max_period},
        "legend": legend(grid),
        "fractions": {str(k): v for k, v in grid.fractions().items()},
    }
    if extra:
        out.update(extra)
    return out


def write_json(path, data) -> None:
    Path(path).write_text(json.dumps(data, indent=2, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def scan_header(k: int) -> list[str]:
    cols = ["c_re", "c_im"]
    for i in range(k):
        cols += [f"fate_{i}", f"preperiod_{i}"]
    return cols + ["pcm_flag"]


def scan_rows(scan: ScanResult) -> Iterable[list]:
    H, W = scan.pcm_flag.shape
    for r in range(H):
        for c in range(W):
            z = scan.c[r, c]
            row = [repr(float(z.real)), repr(float(z.imag))]
            for f, p in zip(scan.fates, scan.preperiods):
                row += [f[r, c], int(p[r, c])]
            row.append(int(scan.pcm_flag[r, c]))
            yield row


def write_scan_csv(path_or_file, scan: ScanResult) -> None:
    own = isinstance(path_or_file, (str, Path))
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh)
        w.writerow(scan_header(scan.critical_count))
        w.writerows(scan_rows(scan))
    finally:
        if own:
            fh.close()


def flag_image(scan: ScanResult) -> np.ndarray:
    """Grey residual map with flagged cells in red."""
    H, W = scan.pcm_flag.shape
    g = np.clip(scan.residual, 0, 1) if scan.residual.size else np.zeros((H, W))
    img = np.repeat((255 * (1 - g))[..., None], 3, axis=2)
    img[scan.pcm_flag] = (255, 0, 0)
    return np.round(img).astype(np.uint8)
