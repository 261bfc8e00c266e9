"""
Discrete function spaces
========================

A uniform grid carries the Dirichlet Laplacian and the norms built from it:
L2, the gradient norm, its dual H^-1 (through a sparse solve) and the
fractional H^-delta norms (through the sine transform).
"""

# %%
import numpy as np

from polydiff.grid import GridSpec, build_operators, inner_hm1, inner_l2, norm_h1, norm_hm1, norm_hmdelta, norm_l2

grid = GridSpec.interval(1.0, 128)
ops = build_operators(grid)
print("lambda_1 =", ops.lambda1, "(continuum value pi^2 =", np.pi**2, ")")

# %%
# A smooth sample and its norms.  The continuum answers are 1/sqrt(2),
# pi/sqrt(2) and 1/(pi sqrt(2)).
f = grid.sample(lambda x: np.sin(np.pi * x))
print("||f||    ", norm_l2(f, grid), 1 / np.sqrt(2))
print("||f||_1  ", norm_h1(f, ops), np.pi / np.sqrt(2))
print("||f||_-1 ", norm_hm1(f, ops), 1 / (np.pi * np.sqrt(2)))

# %%
# The negative norm is a genuine dual: (u, Lap v)_-1 = -(u, v) for any pair.
rng = np.random.default_rng(0)
u, v = rng.standard_normal((2, grid.size))
print("duality defect", inner_hm1(u, ops.apply(v), ops) + inner_l2(u, v, grid))

# %%
# Rough fields are much smaller in H^-delta than in L2; delta = 1 recovers H^-1.
for delta in (0.25, 0.5, 1.0):
    print(f"delta={delta}: ||u||_-delta = {norm_hmdelta(u, ops, delta):.4f}")
print("||u||_-1 via solve =", norm_hm1(u, ops))

# %%
# The same objects in 2D on a 32 x 32 square.
sq = build_operators(GridSpec.rectangle((1.0, 1.0), (32, 32)))
e = sq.eigenfield(2, 3)
print("eigenfield (2,3): ||e|| =", norm_l2(e, sq.grid), " ||e||_-1^2 * lambda =", norm_hm1(e, sq) ** 2 * sq.eigenvalue(2, 3))
