"""Smoke 1: critical exponents on the three test groups."""
import math
import time

import numpy as np

from isolab import fuchsian as fh
from isolab import psmeasures as ps

S = np.array([[0.0, -1.0], [1.0, 0.0]])
T = np.array([[1.0, 1.0], [0.0, 1.0]])
modular = fh.FuchsianGroup("modular", [S, T])

t0 = time.time()
fit = ps.critical_exponent(modular, radius=8000.0)
print(f"modular: delta={fit.delta:.4f} band=({fit.band[0]:.4f},{fit.band[1]:.4f}) "
      f"window={fit.window} counts[-1]={fit.counts[-1]} [{time.time()-t0:.1f}s]")

sch = fh.schottky_pair(4.0)
t0 = time.time()
fit_s = ps.critical_exponent(sch, radius=math.exp(18.0))
print(f"schottky: delta={fit_s.delta:.4f} band=({fit_s.band[0]:.4f},{fit_s.band[1]:.4f}) "
      f"counts[-1]={fit_s.counts[-1]} ln3/4={math.log(3)/4:.4f} [{time.time()-t0:.1f}s]")

par = fh.parabolic_pair(4.0)
t0 = time.time()
fit_p = ps.critical_exponent(par, radius=math.exp(18.0))
print(f"parabolic4: delta={fit_p.delta:.4f} band=({fit_p.band[0]:.4f},{fit_p.band[1]:.4f}) "
      f"counts[-1]={fit_p.counts[-1]} [{time.time()-t0:.1f}s]")

# partial-sum bracket: above delta increments shrink, below they grow
for s_test, tag in ((fit_s.delta + 0.05, "above"), (fit_s.delta - 0.05, "below")):
    sums = ps.poincare_partial_sums(sch, s_test, math.exp(18.0))
    inc = np.diff(sums)
    print(f"schottky partial sums {tag}: {np.array2string(sums, precision=3)} "
          f"increments {np.array2string(inc, precision=3)}")

# insufficient growth raises
try:
    ps.critical_exponent(sch, radius=50.0)
    print("XX no raise")
except Exception as e:
    print(f"small radius -> {type(e).__name__}: {e}")
