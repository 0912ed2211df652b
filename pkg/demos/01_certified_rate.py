"""Certified rate versus measured rate on the quadratic kinetic Fokker-Planck model.

The explicit rate bound is a small number (about 0.025); the semigroup
itself decays like e^{-t/2}.  This script computes both and shows how far
apart they are.
"""
import numpy as np

from hypolab.certify import (
    bound_constants, certified_rate_quadratic, commutator_chain, simple_ladder,
)
from hypolab.evolve import chain_functionals, fit_rate, propagate
from hypolab.experiments import initial_vector
from hypolab.models import build_kfp, quadratic

model = build_kfp(quadratic(1.0), 24, 24)
chain = commutator_chain(model)
consts = bound_constants(model, chain)
print(f"measured constants: alpha={consts.alpha:.3f} beta={consts.beta:.3f} kappa={consts.kappa:.3f}")

lam, (a, b, c), _ = certified_rate_quadratic(max(consts.alpha, consts.beta), consts.kappa)
print(f"certified rate {lam:.5f} at a={a:.4f} b={b:.4f} c={c:.4f}")

h0 = initial_vector(model, seed=0)
times = np.linspace(0, 40, 401)
traj = propagate(model.L, h0, times, kernel=model.kernel,
                 functionals=chain_functionals(chain, simple_ladder(a, b, c)))
for name in ("twisted", "h1", "l2"):
    fit = fit_rate(traj, name, "exponential", (20, 40), squared=True)
    print(f"{name:8s} measured rate {fit.rate:.4f} (R2 {fit.r2:.4f})")
print(f"the bound is off by a factor {0.5 / lam:.1f}")
