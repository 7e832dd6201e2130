"""The two postcritically minimal members of z - (z^2 + c) / (z^2 + 2z + c).

For c = -1/4 and c = 2: renders the basins, checks the critical orbits,
counts accesses in the parabolic basin and audits both against the marked
cubic channel diagram.
"""

import sys
from pathlib import Path

from newton_atlas.classify import (access_count_parabolic, channel_diagram, check_pcm,
                                   correspondence_audit, make_marking)
from newton_atlas.dynamics import Viewport, basin_grid, quadratic_family
from newton_atlas.export import colourize, sidecar, write_json, write_ppm
from newton_atlas.newton import critical_points
from newton_atlas.suites import cubic_spec

out = Path(sys.argv[1] if len(sys.argv) > 1 else ".")
fam = quadratic_family()
cubic = cubic_spec()
D = channel_diagram(cubic)
basin = {round(b.fixed_point.real): i for i, b in enumerate(D.basins)}

# each member is paired with the cubic basin whose centre has the same local degree
for c, marked, name in ((-0.25, 1, "quarter"), (2, 0, "two")):
    spec = fam.spec(c)
    grid = basin_grid(spec, Viewport(-0.5 + 0j, 5, 4), (500, 400))
    write_ppm(out / f"{name}.ppm", colourize(grid))
    write_json(out / f"{name}.ppm.json", sidecar(grid))
    rep = check_pcm(spec)
    print(f"c = {c}: {rep.verdict}")
    for ev in rep.evidence:
        print("   critical point", ev["critical_point"], "degree", ev["local_degree"], "->", ev["fate"])
    print("   accesses in the parabolic basin:", access_count_parabolic(spec, 0))
    m = make_marking(D, [(basin[marked], 0)])
    print(f"   audit against the basin of {marked:+d}:",
          "PASS" if correspondence_audit(cubic, m, spec, D).passed else "FAIL")

crossed = correspondence_audit(cubic, make_marking(D, [(basin[1], 0)]), fam.spec(2), D)
print("crossed pairing (basin of +1 with c = 2):", "PASS" if crossed.passed else "FAIL")
