"""Weak mean-field coupling: free energy, L1 decay and the re-bracketed Lyapunov functional."""
import numpy as np

from hypolab import entropic, vfp
from hypolab.evolve import fit_rate
from hypolab.experiments import vfp_initial

spec = vfp.coupling(0.3)
print(f"smallness at delta=0.38: {vfp.smallness_value(0.38):.4f}")
grid = entropic.make_grid(48, 72, length=1.0)
run = vfp.run_vfp(vfp_initial(grid, 0.1, 0.3), spec, 6.0, every=20)
fit = fit_rate((run.times, run.l1_distance), None, "exponential", (2, 6))
print(f"free-energy increases {run.increases}; L1 rate {fit.rate:.3f} (R2 {fit.r2:.5f})")
print(f"{len(run.rebrackets)} re-brackets, sandwich holds: {run.sandwich_ok}")
for r in run.rebrackets[:5]:
    print(f"  t={r['t']:.3f}  E={r['after'].bracket:.2e}  a1={r['after'].a1:.3e}  L/E={r['after'].L / r['after'].bracket:.4f}")
