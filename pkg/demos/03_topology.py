"""
Betti numbers of basins and collars
===================================

A kept set of cells is a cubical complex. ``b0`` counts components, ``b1``
independent loops. Comparing the basin with a tubular collar of the attractor
is a necessary test for homotopy equivalence, not a sufficient one.
"""

import numpy as np

from basintopo.basin import GridSpec, compute_basin
from basintopo.cubetopo import betti, betti_by_rank, build_complex, compare_profiles, complex_from_mask
from basintopo.flow import IntegrationParams
from basintopo.scenario import tubular_keep

###############################################################################
# A square with two missing cells has two holes. The fast Euler-characteristic
# route and the boundary-matrix rank route agree.

m = np.ones((6, 6), bool)
m[1, 1] = m[4, 3] = False
c = complex_from_mask(m)
print(betti(c), betti_by_rank(c))

###############################################################################
# On a periodic axis a full band is an annulus.

print(betti(complex_from_mask(np.ones((8, 4), bool), periodic=True)).pair)

###############################################################################
# Circle versus punctured plane on a coarse grid.

spec = GridSpec(-3, 3, -3, 3, 60, 60)
params = IntegrationParams(h=0.01, T_max=20.0, eps=0.05)
for sid, width, taper in (("CIRCLE_R2", 0.3, None), ("PUNCTURED_R2", 0.2, 0.5)):
    g = compute_basin(sid, spec, params)
    basin = betti(build_complex(g))
    collar = betti(build_complex(g, tubular_keep(g, width, taper)))
    print(f"{sid:12s} basin {basin.pair} collar {collar.pair} -> {compare_profiles(basin, collar)}")
