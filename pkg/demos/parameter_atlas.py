"""Parameter-plane atlas of the family z - (z^2 + c) / (z^2 + 2z + c).

Scans c over [-1, 3] x [-1, 1], writes atlas.csv and a flag map, and lists
the cells flagged as postcritically minimal candidates.
"""

import sys
import time
from pathlib import Path

from newton_atlas.dynamics import quadratic_family, param_scan
from newton_atlas.export import flag_image, write_ppm, write_scan_csv

out = Path(sys.argv[1] if len(sys.argv) > 1 else ".")
res = int(sys.argv[2]) if len(sys.argv) > 2 else 200

t0 = time.perf_counter()
scan = param_scan(quadratic_family(), (-1, 3, -1, 1), (res, res))
print(f"{res}x{res} scan in {time.perf_counter() - t0:.1f}s")
write_scan_csv(out / "atlas.csv", scan)
write_ppm(out / "atlas_flags.ppm", flag_image(scan))

for row, col, c_star, resid in scan.refined:
    print(f"cell ({row:3d}, {col:3d}): best c = {c_star.real:+.6f}{c_star.imag:+.6f}i, "
          f"residual {resid:.1e}")
for c in (-0.25, 2):
    hit = any(scan.cell_contains(r, k, c) for r, k in scan.flagged_cells())
    print(f"cell containing c = {c} flagged: {hit}")
