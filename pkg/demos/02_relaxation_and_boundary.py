"""
Relaxation rate and compatible boundary data
============================================

The stress relaxation rate switches from a glassy value to a rubbery value
across a transition concentration, and is frozen to a constant far out.
Given a boundary concentration, the stress boundary value is fixed by
requiring the stress equation to be at rest there.
"""

# %%
import numpy as np

from polydiff.grid import GridSpec
from polydiff.model import ModelParams, beta0, build_lift, make_preset, solve_boundary_compat

p = ModelParams(R_cut=5.0)
for u in (-1.0, 0.0, 0.5, 1.0, 2.0):
    print(f"beta0(u={u:+.1f}, sigma=0) = {beta0(u, 0.0, p):.4f}")
print("far field:", beta0(30.0, 0.0, p), "= beta_inf")

# %%
# Compatible stress for a few boundary concentrations: beta0(phi, s) s = mu phi.
phi = np.array([0.0, 0.2, 0.5, 1.0])
s = solve_boundary_compat(phi, p)
print("phi   ", phi)
print("stress", s)
print("residual", np.abs(beta0(phi, s, p) * s - p.mu * phi).max())

# %%
# A Gaussian bump of boundary concentration on the unit interval.  The lift
# carries the derived source term h and the resolved cutoff radius.
grid = GridSpec.interval(1.0, 128)
lift = build_lift(grid, make_preset("gaussian", base=0.3, amplitude=0.5, width=0.1), ModelParams())
print("R_cut resolved to", lift.params.R_cut)
print("max |h| =", np.abs(lift.h).max(), " boundary compatibility residual =", lift.compat_residual())
