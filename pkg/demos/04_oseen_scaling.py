"""How the gap of S + i alpha F grows with alpha for F = 1/(1+x^2).

The fitted exponent over alpha in [10, 1000] is about 0.7; the local slope
keeps falling, so the large-alpha regime has not been reached yet.
"""
import numpy as np

from hypolab.models import build_oseen, oseen_min_real

alphas = np.array([10, 31.6, 100, 316, 1000])
gaps = np.array([oseen_min_real(build_oseen(a, N=256)) for a in alphas])
for a, g in zip(alphas, gaps):
    print(f"alpha={a:7.1f}  min Re={g:.4f}")
print("fitted exponent", np.polyfit(np.log(alphas), np.log(gaps), 1)[0])
print("local slopes", np.diff(np.log(gaps)) / np.diff(np.log(alphas)))
