"""Newton maps of p*exp(q): construction, dynamics, classification and rendering."""

from .algebra import (AffineMap, Indeterminate, MobiusMap, NonConvergence, Polynomial,
                      RationalMap, mobius_conjugate_check, poly_derivative, poly_eval,
                      poly_roots, rational_eval, rational_reduce)
from .classify import (AlignmentFailure, BranchAmbiguity, BudgetExhausted, ChannelDiagram,
                       ConjugacyResult, DuplicateBasin, Marking, PcmReport, UnknownRay,
                       access_count_parabolic, affine_conjugacy_test, boettcher_ray,
                       channel_diagram, check_pcf, check_pcm, correspondence_audit,
                       make_marking, normalize)
from .dynamics import (AreaEstimate, BasinGrid, CaptureParams, Family, Fate, NoCenter,
                       OrbitRecord, ScanResult, Viewport, basin_grid, connectivity_probe,
                       estimate_basin_area, find_center, iterate_orbit, quadratic_family,
                       param_scan)
from .newton import (BlaschkeModel, ConstantMap, CriticalPoint, DegreeTooLow,
                     FixedPointReport, NewtonSpec, NotParabolic, blaschke_model, build_newton,
                     classify_infinity, critical_points, fixed_points, petal_directions)

__version__ = "0.1.0"
