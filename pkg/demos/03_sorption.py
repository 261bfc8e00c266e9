"""
Sorption into a dry film
========================

Start with no penetrant and no stress inside, hold the boundary
concentration fixed, and watch the interior fill.  The run uses the
semi-implicit stepper with its default step.
"""

# %%
import numpy as np

from polydiff.grid import GridSpec, build_operators
from polydiff.model import ConstantBoundary, ModelParams, build_lift
from polydiff.solver import IMEXIntegrator, SolverConfig, State, default_dt, recover_u_sigma

grid = GridSpec.interval(1.0, 128)
ops = build_operators(grid)
lift = build_lift(grid, ConstantBoundary(0.6), ModelParams())
p = lift.params

v0 = -lift.phi  # u = 0 inside
s0 = State(0.0, v0, -lift.stress - p.nu * v0)  # sigma = 0 inside
cfg = SolverConfig(default_dt(ops, p), t_end=3.0, sample_stride=64)
traj = IMEXIntegrator(ops, lift, p, cfg).integrate(s0)

# %%
u, sigma = recover_u_sigma(traj, lift, p)
mid = grid.size // 2
for t, row, srow in zip(traj.times, u, sigma):
    print(f"t={t:5.2f}  mean u={row.mean():.4f}  u(mid)={row[mid]:.4f}  sigma(mid)={srow[mid]:+.4f}")
print("equilibrium: u ->", lift.phi[0], " sigma ->", lift.stress[0])
