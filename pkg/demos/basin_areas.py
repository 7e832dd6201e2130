"""Immediate-basin areas inside growing boxes.

With q = z^3 the basin of the root of z - 1 has finite area, so the
estimates level off; for z^3 - z (q = 0) they keep growing like R^2.
"""

import sys

import numpy as np

from newton_atlas.dynamics import estimate_basin_area
from newton_atlas.suites import cubic_spec, finite_area_spec

size = int(sys.argv[1]) if len(sys.argv) > 1 else 800
radii = [5, 10, 20, 40]

cubic = cubic_spec()
cases = (("p = z - 1, q = z^3", finite_area_spec(), 0),
         ("p = z^3 - z, q = 0", cubic, int(np.argmin(np.abs(cubic.root_points - 1)))))
for name, spec, root in cases:
    est = estimate_basin_area(spec, root, radii, resolution=size)
    print(f"{name}, root {spec.root_points[root]:.3g}, {size} px per box")
    for r, a in zip(est.radius_schedule, est.areas):
        print(f"   R = {r:4.0f}: area {a:10.4f}")
    print("   saturated:", est.saturated)

# near the real axis the basin is a cusp of half-width about 0.8 / x^2, so the
# part beyond R has area about 1.6 / R: too thin for pixels at these sizes
