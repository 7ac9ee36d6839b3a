"""
Sampled operator checks
=======================

The identities the solver relies on can be checked by sampling: projections
are firmly nonexpansive, normal-cone resolvents do not depend on the step,
and forward maps are monotone. A map that is not monotone is caught with an
explicit witness pair.
"""

import numpy as np

from splitsys import AffineOperator, Box, checks, generate_planted_system

rng = np.random.default_rng(0)

inst = generate_planted_system(5, 2, seed=3, structure="mixed_l1")
for result in checks.property_suite(inst, rng, pairs=500):
    print(result.line())

# the symmetric part of this matrix has a negative eigenvalue
bad = AffineOperator(np.diag([1.0, -0.5]), check=False)
result = checks.check_monotone(bad, Box([-1, -1], [1, 1]), rng, pairs=200)
print(result.line())
x, y = np.array(result.witness["x"]), np.array(result.witness["y"])
print("witness <A x - A y, x - y> =", (bad(x) - bad(y)) @ (x - y))
