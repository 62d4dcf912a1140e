"""
Uniform attraction and Lyapunov stability
=========================================

``estimate_uniform_T`` looks for one time that brings every sampled seed into
the epsilon collar. ``epsilon_delta_probe`` searches a ladder of radii for the
largest delta whose seeds never leave the epsilon collar.
"""

from basintopo import flow
from basintopo.basin import (
    epsilon_delta_probe,
    estimate_uniform_T,
    sample_cylinder_z_above,
    sample_funnel_band,
)
from basintopo.flow import IntegrationParams

rep = estimate_uniform_T("CYLINDER_M0", sample_cylinder_z_above(-0.9), 0.1, 200,
                         IntegrationParams(0.01, 60.0, 0.1))
print("cylinder, z > -0.9:", rep.to_dict())

bound = flow.uniform_bound_funnel(0.5)
rep = estimate_uniform_T("FUNNEL_M", sample_funnel_band(1.0, 3.0), 0.5, 200,
                         IntegrationParams(0.02, 150.0, 0.5))
print(f"funnel band 1 < y < 3: T = {rep.T_eps_hat:.2f}, analytic bound {bound:.2f}")

for sid in ("CIRCLE_R2", "FUNNEL_M"):
    table = epsilon_delta_probe(sid, [0.5, 0.3, 0.1], T_max=20.0, h=0.02)
    print(sid, [(e, round(d, 4)) for e, d in table.rows])
