"""
Why the order of the Chebyshev parameters matters.

All orderings give the same polynomial in exact arithmetic.  In floating
point, applying the strongly amplifying factors back to back lets the
intermediate iterates grow by many orders of magnitude.  We force p = 64 on a
pure linear problem and track the largest intermediate value.

Run: python demos/root_ordering.py
"""
import numpy as np

from chlim import GridSpec
from chlim.core import ModelParams, assemble_A, assemble_stabilized_operator, epsilon_of_grid
from chlim.lim import lim_step, plan_chebyshev

grid = GridSpec(64)
A = assemble_A(grid)
op = assemble_stabilized_operator(A, ModelParams(epsilon_of_grid(grid.h)), "LSS")
x = grid.nodes
tau = ((4 / np.pi * 63.5) ** 2 - 1) / op.one_norm
zero = np.zeros(grid.n_cells)

for k in (1, 5):
    c = 0.5 + 0.4 * np.cos(k * np.pi * x)
    print(f"data cos({k} pi x):")
    for ordering in ("leja", "alternating", "natural"):
        plan = plan_chebyshev(tau, op.one_norm, ordering=ordering)
        iterates = []
        y, _ = lim_step(c, tau, op, zero, plan, iterates)
        peak = max(np.abs(v).max() for v in iterates)
        print(f"  {ordering:12s} p={plan.p}: peak |y| = {peak:.2e}, final range [{y.min():.4f}, {y.max():.4f}]")
