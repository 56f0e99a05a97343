"""Convex envelope of a quadratic on a segment, computed by cutting planes.

The block is phi(x) = b (1 - x)^2 on x + y = 1, x, y >= 0.  For b > 0 the
envelope is phi itself, for b < 0 it is the chord b (1 - x).
"""
import numpy as np

from copocut import EnvelopeSolver, fixture

for b in (1.0, -1.0):
    fix = fixture("env-simplex", b=b)
    solver = EnvelopeSolver(fix.objective, fix.ground, n_x=1)
    print(f"b = {b:+.0f}")
    print("   x    envelope   reference   cuts")
    for x in np.linspace(0, 1, 5):
        out = solver.evaluate([x])
        print(f"{x:5.2f}  {out.value:9.6f}  {fix.envelope([x]):9.6f}  {len(solver.pool):5d}")

# just outside the domain the plain dual is unbounded; the regularized one is not
fix = fixture("env-simplex", b=-1.0)
for eps in (0.0, 0.05):
    out = EnvelopeSolver(fix.objective, fix.ground, n_x=1).evaluate([1.03], eps=eps)
    print(f"x = 1.03, eps = {eps}: {out.status}", "" if out.value is None else f"{out.value:.4f}")
