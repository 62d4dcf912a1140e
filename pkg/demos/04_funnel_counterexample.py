"""
The funnel: a basin that wraps around
=====================================

On the unit cylinder the seam ``theta = pi`` is the stable set of the
equilibria below ``y = 0`` and never reaches the attractor, so the basin is a
disc. On the funnel the fibres shrink as ``y`` grows, every fibre distance is
eventually small, and the basin closes up into an annulus while the strip
collar around the attractor stays a disc.
"""

import numpy as np

from basintopo.basin import GridSpec, Label, compute_basin
from basintopo.cubetopo import betti, build_complex, compare_profiles
from basintopo.flow import IntegrationParams
from basintopo.scenario import tubular_keep

spec = GridSpec(-np.pi, np.pi, -4, 8, 64, 48)
params = IntegrationParams(h=0.02, T_max=80.0, eps=0.5)

for sid in ("CYLINDER_M0", "FUNNEL_M"):
    g = compute_basin(sid, spec, params)
    seam = g.labels[0]
    ys = spec.v_centers()[seam == Label.CONVERGED]
    basin = betti(build_complex(g))
    strip = betti(build_complex(g, tubular_keep(g, 0.5, None)))
    where = f"y >= {ys.min():.2f}" if ys.size else "nowhere"
    print(f"{sid:12s} seam converges {where:10s} basin {basin.pair} strip {strip.pair} "
          f"{compare_profiles(basin, strip)}")
