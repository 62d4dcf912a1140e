"""
Labelling a basin grid
======================

Every cell centre of a chart grid is integrated until it dwells inside the
epsilon collar (CONVERGED), runs out of time (TIMEOUT), leaves the window or
blows up (DIVERGED). Cells touching an excluded point are OUT.
"""

import numpy as np

from basintopo.basin import GridSpec, Label, compute_basin
from basintopo.flow import IntegrationParams

spec = GridSpec(-3, 3, -3, 3, 60, 60)
params = IntegrationParams(h=0.01, T_max=20.0, eps=0.05)
grid = compute_basin("PUNCTURED_R2", spec, params)

for lab in Label:
    print(f"{lab.name:10s} {grid.count(lab):5d}")

###############################################################################
# The single OUT cell sits on the puncture (1, 0); the single TIMEOUT cell is
# the origin, an equilibrium.

U, V = spec.centers()
for lab in (Label.OUT, Label.TIMEOUT):
    m = grid.mask(lab)
    print(lab.name, "at", list(zip(U[m].round(3), V[m].round(3))))

###############################################################################
# Times to convergence grow towards the origin and the far corners.

t = grid.t_conv
print(f"t_conv range: {np.nanmin(t):.2f} .. {np.nanmax(t):.2f}")
print("first CSV lines:")
print("\n".join(grid.to_csv().splitlines()[:4]))
