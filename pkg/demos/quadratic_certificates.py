"""Quadratic underestimators of a value function from the copositive dual."""
import numpy as np

from copocut import fixture, search_convex_quadratic, solve_quadratic_dual
from copocut.envelope import EnvelopeSolver
from copocut.model import QuadraticCertificate
from copocut.oracle import check_set_copositivity

fix = fixture("quad-1d", B=0.0, C=1.0)        # phi(x) = (1 - x)^2 on [0, 1]
lp = fix.program
for x in (0.2, 0.5, 0.8):
    cert = solve_quadratic_dual(lp, [x])
    print(f"x = {x}: q({x}) = {cert([x]):.6f}, phi = {fix.phi([x]):.6f}, "
          f"w = {cert.w[0]:+.4f}, W = {cert.W[0, 0]:+.4f}")

# a hand-made certificate: the multipliers certify 5/8 - x/2 - x^2/2
cert = QuadraticCertificate(np.array([-0.25, 0.75, 0.125]), np.array([-0.5]), np.array([[-0.5]]), lp.b)
print("dual feasible:", check_set_copositivity(cert.dual_matrix(lp), lp.ground).nonnegative)
xs = np.linspace(0, 1, 5)
print("q   :", np.round([cert([u]) for u in xs], 4))
print("phi :", np.round([fix.phi([u]) for u in xs], 4))

# two-dimensional first stage: a convex quadratic touching the envelope at (1/4, 1/4)
fix2 = fixture("quad-2d")
x1 = np.array([0.25, 0.25])
env = EnvelopeSolver(fix2.objective, fix2.ground, n_x=2).evaluate(x1)
conv = search_convex_quadratic(fix2.program, x1, env.value, [0.5, 0.5])
print(f"envelope at x1 {env.value:.6f}, convex q(x1) {conv(x1):.6f}, "
      f"eig(W) {np.round(np.linalg.eigvalsh(conv.W), 5)}")
