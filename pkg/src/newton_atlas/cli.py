"""newton-atlas command line.

Exit codes: 0 success, 1 verification failure, 2 usage or config error,
3 degenerate map, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import export
from .classify import (AlignmentFailure, DuplicateBasin, UnknownRay, affine_conjugacy_test,
                       channel_diagram, correspondence_audit, make_marking, petal_angle)
from .config import (ConfigError, family_member, family_region, load_config, parse_family,
                     parse_map)
from .dynamics import CaptureParams, Viewport, basin_grid, estimate_basin_area, param_scan
from .newton import (ConstantMap, DegreeTooLow, critical_points, classify_infinity,
                     fixed_points)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_DEGENERATE, EXIT_IO = 0, 1, 2, 3, 4
DEFAULT_VIEWPORT = "0,0,6,6"
DEFAULT_RES = "800x800"
MAX_RES = 8192

log = logging.getLogger("newton_atlas")


class UsageError(Exception):
    pass


# -- argument helpers -----------------------------------------------------------

def parse_viewport(text: str) -> Viewport:
    try:
        cx, cy, w, h = (float(v) for v in text.split(","))
    except ValueError as exc:
        raise UsageError(f"--viewport expects cx,cy,w,h, got {text!r}") from exc
    if w < 0 or h < 0:
        raise UsageError("--viewport width and height must be non-negative")
    return Viewport(complex(cx, cy), w, h)


def parse_res(text: str) -> tuple[int, int]:
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError as exc:
        raise UsageError(f"--res expects WxH, got {text!r}") from exc
    if w < 0 or h < 0 or w > MAX_RES or h > MAX_RES:
        raise UsageError(f"--res must lie within 0..{MAX_RES} per side")
    return w, h


def parse_marking(text: str) -> list[tuple[int, int]]:
    out = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        try:
            b, r = item.split(":")
            out.append((int(b), int(r)))
        except ValueError as exc:
            raise UsageError(f"--marking expects basin:ray pairs, got {item!r}") from exc
    return out


def _load_map(path):
    if not path:
        raise UsageError("--map is required")
    return parse_map(load_config(path), str(path))


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, default=export._json_default) + "\n"


# -- commands ---------------------------------------------------------------------

def cmd_classify(args) -> int:
    spec = _load_map(args.map)
    report = {
        "m": spec.m, "n": spec.n, "d": spec.d, "degenerate": spec.degenerate,
        "map": {"num": spec.map.num.to_json(), "den": spec.map.den.to_json()},
        "fixed_points": [f.to_json() for f in fixed_points(spec)],
        "critical_points": [c.to_json() for c in critical_points(spec)],
        "infinity": classify_infinity(spec).to_json(),
        "petal_directions": [petal_angle(spec, j) for j in range(spec.n)],
        "notes": ["simple roots assumed; multiple roots are reported with a warning"],
    }
    _emit(_json(report), args.out)
    if spec.degenerate:
        print("degenerate Newton map: reduction cancelled more than the generic amount",
              file=sys.stderr)
        return EXIT_DEGENERATE
    return EXIT_OK


def cmd_render(args) -> int:
    spec = _load_map(args.map)
    vp = parse_viewport(args.viewport or DEFAULT_VIEWPORT)
    res = parse_res(args.res or DEFAULT_RES)
    fmt = (args.format or "ppm").lower()
    if fmt not in ("ppm", "png"):
        raise UsageError("render --format must be ppm or png")
    overlays = [o for o in (args.overlay or "").split(",") if o]
    unknown = set(overlays) - set(export.OVERLAY_COLOURS)
    if unknown:
        raise UsageError(f"unknown overlay(s): {sorted(unknown)}")
    grid = basin_grid(spec, vp, res, args.budget)
    img = export.colourize(grid)
    extra: dict = {"map": {"p": spec.p.to_json(), "q": spec.q.to_json()}, "overlays": overlays}
    if "rays" in overlays:
        if spec.n == 0:
            diagram = channel_diagram(spec)
            for line in diagram.polylines():
                export.draw_polyline(img, grid, line, export.OVERLAY_COLOURS["rays"])
            extra["channel_diagram"] = diagram.to_json()
        else:
            extra["rays"] = "skipped: rays are traced for deg q = 0 only"
    if "critical" in overlays:
        for c in critical_points(spec):
            export.draw_marker(img, grid, c.location, export.OVERLAY_COLOURS["critical"])
    if "fixed" in overlays:
        for f in fixed_points(spec, include_infinity=False):
            export.draw_marker(img, grid, f.location, export.OVERLAY_COLOURS["fixed"])
    out = Path(args.out or f"render.{fmt}")
    if fmt == "png":
        export.write_png(out, img)
    else:
        export.write_ppm(out, img)
    export.write_json(out.with_suffix(out.suffix + ".json"), export.sidecar(grid, extra))
    return EXIT_OK


def cmd_scan(args) -> int:
    if not args.family:
        raise UsageError("--family is required")
    cfg = load_config(args.family)
    fam = parse_family(cfg, str(args.family))
    if args.viewport:
        vp = parse_viewport(args.viewport)
        x0, x1, y0, y1 = vp.extent()
        region = (x0, x1, y0, y1)
    else:
        region = family_region(cfg) or (-3.0, 3.0, -3.0, 3.0)
    res = parse_res(args.res or "200x200")
    scan = param_scan(fam, region, res, args.budget)
    fmt = (args.format or "csv").lower()
    if fmt not in ("csv", "json"):
        raise UsageError("scan --format must be csv or json")
    if fmt == "json":
        body = {"region": list(region), "resolution": list(scan.resolution),
                "flagged": [{"row": r, "col": c, "c": cs, "residual": v}
                            for r, c, cs, v in scan.refined]}
        _emit(_json(body), args.out)
    elif args.out:
        export.write_scan_csv(args.out, scan)
    else:
        export.write_scan_csv(sys.stdout, scan)
    if args.flagmap and scan.pcm_flag.size:
        export.write_ppm(args.flagmap, export.flag_image(scan))
    return EXIT_OK


def cmd_area(args) -> int:
    spec = _load_map(args.map)
    try:
        radii = [float(r) for r in args.radii.split(",") if r]
    except ValueError as exc:
        raise UsageError("--radii expects comma-separated numbers") from exc
    if not 0 <= args.root < len(spec.root_points):
        raise UsageError(f"--root must lie in 0..{len(spec.root_points) - 1}")
    est = estimate_basin_area(spec, args.root, radii, args.size, args.budget)
    _emit(_json({"root": spec.root_points[args.root], "radii": est.radius_schedule,
                 "areas": est.areas, "saturated": est.saturated}), args.out)
    return EXIT_OK


def cmd_audit(args) -> int:
    pcf = _load_map(args.map)
    if not args.pcm:
        raise UsageError("--pcm is required")
    pcm = parse_map(load_config(args.pcm), str(args.pcm))
    choices = parse_marking(args.marking or "")
    if pcf.n != 0 or pcm.n < 1:
        raise UsageError("audit needs a deg q = 0 map for --map and deg q >= 1 for --pcm")
    diagram = channel_diagram(pcf)
    try:
        marking = make_marking(diagram, choices)
    except (DuplicateBasin, UnknownRay) as exc:
        raise UsageError(f"bad marking: {exc}") from exc
    report = correspondence_audit(pcf, marking, pcm, diagram, args.budget)
    body = report.to_json()
    body["basins"] = [{"index": i, "fixed_point": b.fixed_point, "local_degree": b.local_degree}
                      for i, b in enumerate(diagram.basins)]
    _emit(_json(body), args.out)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_conjugacy(args) -> int:
    f = _load_map(args.map)
    if not args.other:
        raise UsageError("--other is required")
    g = parse_map(load_config(args.other), str(args.other))
    res = affine_conjugacy_test(f, g)
    _emit(_json(res.to_json()), args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .suites import SUITES
    names = list(SUITES) if args.suite == "all" else [args.suite]
    if any(n not in SUITES for n in names):
        print(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES)} or all",
              file=sys.stderr)
        return EXIT_USAGE
    ok = True
    for name in names:
        for check in SUITES[name](args.seed):
            ok &= check.ok
            print(f"[{'PASS' if check.ok else 'FAIL'}] {name}: {check.name}"
                  + (f" ({check.detail})" if check.detail else ""))
    return EXIT_OK if ok else EXIT_FAIL


# -- entry point ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--map", help="map config (TOML or JSON)")
    common.add_argument("--family", help="family config (TOML or JSON)")
    common.add_argument("--viewport", help="cx,cy,w,h (default 0,0,6,6)")
    common.add_argument("--res", help="WxH (default 800x800; scans 200x200)")
    common.add_argument("--budget", type=int, help="iteration budget per orbit")
    common.add_argument("--seed", type=int, default=0, help="seed for every sampler")
    common.add_argument("--out", help="output path (default stdout or render.<fmt>)")
    common.add_argument("--overlay", help="comma list of rays,critical,fixed")
    common.add_argument("--format", help="ppm|png|json|csv")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="newton-atlas", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("classify", parents=[common], help="fixed and critical structure as JSON")
    sub.add_parser("render", parents=[common], help="basin image with JSON sidecar")
    s = sub.add_parser("scan", parents=[common], help="parameter-plane atlas as CSV")
    s.add_argument("--flagmap", help="optional PPM of residuals and flagged cells")
    a = sub.add_parser("area", parents=[common], help="immediate-basin area per radius")
    a.add_argument("--root", type=int, default=0)
    a.add_argument("--radii", default="5,10,20,40")
    a.add_argument("--size", type=int, default=800, help="pixels across each radius box")
    a = sub.add_parser("audit", parents=[common], help="marked diagram vs parabolic map")
    a.add_argument("--pcm", help="map config with deg q >= 1")
    a.add_argument("--marking", help="basin:ray pairs, e.g. 1:0")
    c = sub.add_parser("conjugacy", parents=[common], help="affine conjugacy test")
    c.add_argument("--other", help="second map config")
    v = sub.add_parser("verify", parents=[common], help="run a bundled verification suite")
    v.add_argument("suite")
    return ap


COMMANDS = {"classify": cmd_classify, "render": cmd_render, "scan": cmd_scan,
            "area": cmd_area, "audit": cmd_audit, "conjugacy": cmd_conjugacy,
            "verify": cmd_verify}


def _join_values(argv: list[str]) -> list[str]:
    """Let '--viewport -1,0,8,8' through: argparse would read the value as a flag."""
    out = []
    it = iter(argv)
    for tok in it:
        if tok in _VALUE_FLAGS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


_VALUE_FLAGS = ("--viewport", "--radii", "--marking")


def main(argv=None) -> int:
    ap = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = ap.parse_args(_join_values(argv))
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConstantMap:
        print("error: constant Newton map (deg q = 0 and deg p = 1)", file=sys.stderr)
        return EXIT_DEGENERATE
    except DegreeTooLow as exc:
        print(f"error: degenerate map: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except AlignmentFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as exc:
        print(f"error: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
