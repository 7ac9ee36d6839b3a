"""
Step sizes without a Lipschitz constant
=======================================

A forward-backward method with a fixed step needs the step to be below
2/L. Here L = 100, so a step of 0.05 blows up. The linesearch solver is given
steps between 0.1 and 1 and still converges, because it backtracks along the
segment towards the current point until a separation test holds.
"""

import numpy as np

from splitsys import generate_ill_conditioned, solve, solve_baseline_fb

inst = generate_ill_conditioned(2, L=100)
A = inst.components[0][0]
print("symmetric spectrum", np.linalg.eigvalsh(0.5 * (A.M + A.M.T)))

base = solve_baseline_fb(inst, 0.05, max_iter=100, tol=0.0)
r = base.trace.residuals
print(f"fixed step 0.05: residual {r[0]:.2e} -> {r[-1]:.2e} after {len(r) - 1} iterations")

safe = solve_baseline_fb(inst, 1 / A.lipschitz, max_iter=100000)
print(f"fixed step 1/L: {safe.status} after {safe.iterations} iterations")

res = solve(inst)
js = res.trace.max_linesearch_j()
print(f"linesearch solver: {res.status} after {res.iterations} iterations, "
      f"residual {res.trace.residuals[-1]:.2e}, deepest backtrack j = {js}")
