"""Basins of the Newton map of z^3 - z with its four fixed internal rays.

Writes cubic.ppm (+ JSON sidecar) and prints the channel diagram census.
"""

import sys
from pathlib import Path

from newton_atlas.algebra import Polynomial
from newton_atlas.classify import channel_diagram, check_pcf
from newton_atlas.dynamics import Viewport, basin_grid
from newton_atlas.export import OVERLAY_COLOURS, colourize, draw_polyline, sidecar, write_json, write_ppm
from newton_atlas.newton import build_newton

out = Path(sys.argv[1] if len(sys.argv) > 1 else ".")
spec = build_newton(Polynomial([0, -1, 0, 1]))
print("N(z) =", spec.map)

grid = basin_grid(spec, Viewport(0j, 4, 4), (600, 600))
img = colourize(grid)
D = channel_diagram(spec)
for line in D.polylines():
    draw_polyline(img, grid, line, OVERLAY_COLOURS["rays"])
write_ppm(out / "cubic.ppm", img)
write_json(out / "cubic.ppm.json", sidecar(grid, {"channel_diagram": D.to_json()}))

for b in D.basins:
    angles = [round(r.angle_at_infinity, 3) for r in b.rays]
    print(f"basin of {b.fixed_point.real:+.0f}: local degree {b.local_degree}, "
          f"rays leave at angles {angles}")
print("connected at infinity:", D.connected)
print("critical orbits:", check_pcf(spec).verdict)
print("basin fractions:", {k: round(float(v), 4) for k, v in grid.fractions().items()})
