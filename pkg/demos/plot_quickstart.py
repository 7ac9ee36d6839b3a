"""
Solving a small system of inclusions
====================================

Two variational inequalities in the plane share the solution at the origin:
the identity restricted to a box, and twice the identity restricted to the
unit disc. The solver sweeps the two components in turn.
"""

import numpy as np

from splitsys import AffineOperator, Ball, Box, NormalCone, ProblemInstance, solve

# each component is a pair (forward map A, set-valued B)
components = [
    (AffineOperator(np.eye(2)), NormalCone(Box([-1, -1], [1, 1]))),
    (AffineOperator(2 * np.eye(2)), NormalCone(Ball([0, 0], 1))),
]

# X must sit inside both sets, so every trial point stays in the operators' domain
X = Box([-0.7, -0.7], [0.7, 0.7])
inst = ProblemInstance(components, X, radius=1.0, known_solution=np.zeros(2))

res = solve(inst, x0=[0.7, -0.5])
print(f"status {res.status} ({res.reason}) after {res.iterations} iterations")
print("solution", res.x)

# the distance to the solution never increases
d = np.array(res.trace.dist_to_star)
print("distances", np.array2string(d[:6], precision=3), "...")
print("monotone:", bool(np.all(np.diff(d) <= 1e-12)))
