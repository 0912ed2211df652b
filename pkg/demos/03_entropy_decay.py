"""Relative entropy and the distorted entropy for a cosine confinement on the torus.

A grid solver keeps mass and positivity; the relative entropy never
increases and the distorted functional decays exponentially.
"""
import numpy as np

from hypolab import entropic
from hypolab.certify import ladder_from_sequence, ladder_geometric
from hypolab.evolve import fit_rate
from hypolab.experiments import entropy_initial
from hypolab.models import cosine

grid = entropic.make_grid(64, 65)
pot = cosine(1.0)
f0 = entropy_initial(grid)
ladder = ladder_from_sequence(ladder_geometric(0.5, 3), 0.5)
run = entropic.run_entropy(f0, pot, ladder, 5.0, every=10)
fit = fit_rate((run.times, run.E), None, "exponential", (1, 5))
print(f"entropy increases: {run.violations}, mass drift {run.mass_drift:.1e}")
print(f"distorted entropy rate {fit.rate:.3f} (R2 {fit.r2:.4f})")
for t, h, e in list(zip(run.times, run.H, run.E))[::len(run.times) // 6]:
    print(f"t={t:5.2f}  H={h:.3e}  E={e:.3e}")
