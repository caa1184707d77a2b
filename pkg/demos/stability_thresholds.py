"""
Largest gradient-stable step for a few schemes.

The scanner runs 50 steps from several random states and bisects on the step
size until the energy criterion (no step raises the energy by more than 1%)
flips.  Explicit Euler scales like h^2; the stabilized splitting never fails.

Run: python demos/stability_thresholds.py
"""
from chlim import GridSpec
from chlim.lab import gradient_stability_scan

for scheme in ("EE", "SIE", "LIE", "LSS"):
    row = []
    for n in (32, 64):
        res = gradient_stability_scan(scheme, GridSpec(n), seeds=range(3))
        row.append("unconditional" if res.unconditional else f"{res.tau_max:.2e}")
    print(f"{scheme:5s}  N=32: {row[0]:>13s}   N=64: {row[1]:>13s}")

# EE: halving h should cut the threshold by about four
ee = [gradient_stability_scan("EE", GridSpec(n), seeds=range(3)).tau_max for n in (32, 64, 128)]
print("EE ratios:", " ".join(f"{a / b:.2f}" for a, b in zip(ee, ee[1:])))
