"""
How many iterations does a LIM step cost?

The number of Chebyshev parameters grows like sqrt(tau * lambda), so a step
that is k times longer costs only about sqrt(k) times more work.  Here we
compare the work needed by EE, LSS and LIM-LSS to reach T = 0.02 on a 64-cell
grid and the error each achieves against a fine explicit reference.

Run: python demos/chebyshev_budget.py
"""
from dataclasses import replace

from chlim import ExperimentSpec, GridSpec, integrate
from chlim.lab import initial_condition, reference_solution, relative_error, spectral_bound
from chlim.lim import chebyshev_order

grid = GridSpec(64)
lam, tau_explicit = spectral_bound(grid, "grid:4")
print(f"lambda_inf = {lam:.3e}; one iteration suffices below tau = {tau_explicit:.2e}")
for tau in (1e-6, 1e-5, 1e-4, 1e-3, 1e-2):
    p = chebyshev_order(tau, lam)
    print(f"  tau = {tau:.0e}: p = {p:3d}, {2 * p - 1:3d} matvecs per step")

base = ExperimentSpec(grid=grid, scheme="EE", tau=5e-6, final_time=0.02)
ic = initial_condition(base)
ref = reference_solution(base, ic, tau_ref=1e-8)

print("\nscheme     tau      matvecs  solves  error")
for scheme, tau in [("EE", 5e-6), ("LSS", 5e-5), ("LIM-LSS", 5e-5), ("LSS", 2e-4), ("LIM-LSS", 2e-4)]:
    run = integrate(replace(base, scheme=scheme, tau=tau), ic)
    err = relative_error(run.final_field, ref)
    print(f"{scheme:8s} {tau:.0e}  {run.total_matvecs:7d}  {run.total_linear_solves:6d}  {err:.2e}")
