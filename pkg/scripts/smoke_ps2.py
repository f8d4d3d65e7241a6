"""Smoke 2: atomic density family on the modular group."""
import math
import time

import numpy as np

from isolab import fuchsian as fh
from isolab import psmeasures as ps

S = np.array([[0.0, -1.0], [1.0, 0.0]])
T = np.array([[1.0, 1.0], [0.0, 1.0]])
modular = fh.FuchsianGroup("modular", [S, T])

t0 = time.time()
fam = ps.patterson_family(modular, radius=20000.0)
dt = time.time() - t0
d = fam.diagnostics
oc = d["octants"]
print(f"atoms={d['atoms']} delta={fam.delta:.4f} s={fam.s:.4f} "
      f"drift={d['cell_drift']:.3f} stabgap={d['stabilization_gap']:.4f} [{dt:.1f}s]")
print(f"octants: {np.array2string(oc, precision=4)}  "
      f"max rel dev from 1/8: {np.max(np.abs(oc - 0.125))/0.125:.3f}")

nu_o = fam.measure_at(ps.ORIGIN)
print(f"mass at o: {nu_o.total_mass:.12f}")

# conformality: cell masses of nu_p vs integral of e^{-delta beta} dnu_q
rng = np.random.default_rng(7)
for sep in (0.2, 0.5):
    worst_cell, worst_atom = 0.0, 0.0
    for _ in range(5):
        p = complex(rng.uniform(-0.3, 0.3), math.exp(rng.uniform(-0.2, 0.2)))
        ang = rng.uniform(0, 2 * math.pi)
        q = p + sep * complex(math.cos(ang), 0.4 * math.sin(ang))
        q = complex(q.real, max(q.imag, 0.5))
        nup, nuq = fam.measure_at(p), fam.measure_at(q)
        bus = fh.busemann(fam.positions, q, p)
        pred = nuq.weights * np.exp(fam.delta * bus)   # predicts nu_p atomwise
        ocp = ps._octant_masses(fam.positions, nup.weights, p=p)
        ocq = ps._octant_masses(fam.positions, pred, p=p)
        scale = nup.total_mass / pred.sum()
        worst_cell = max(worst_cell, float(np.max(np.abs(
            ocq / ocp - 1.0))))
        core = (nup.weights > 0) & (nuq.weights > 0) \
            & (ps._dist_arr(p, fam.opoints) < fam.teff - ps.RAMP_OUT) \
            & (ps._dist_arr(p, fam.opoints) > ps.NEAR_CUT + ps.RAMP_IN) \
            & (ps._dist_arr(q, fam.opoints) < fam.teff - ps.RAMP_OUT) \
            & (ps._dist_arr(q, fam.opoints) > ps.NEAR_CUT + ps.RAMP_IN)
        pred_s = nuq.weights[core] * np.exp(fam.s * bus[core])
        worst_atom = max(worst_atom, float(np.max(np.abs(
            pred_s / nup.weights[core] - 1.0))))
    print(f"conformality sep={sep}: cells {worst_cell:.3f} "
          f"core atomwise vs s {worst_atom:.2e}")

# equivariance: octant masses of gamma_* nu_{gamma^-1 p} vs nu_p
p = 0.3 + 1.1j
for g, tag in ((T, "T"), (S, "S"), (T @ S, "TS")):
    ginv = np.array([[g[1, 1], -g[0, 1]], [-g[1, 0], g[0, 0]]])
    q = fh.mobius(ginv, p)
    nup, nuq = fam.measure_at(p), fam.measure_at(q)
    moved = ps._mobius_arr(g, fam.positions)
    oc_push = ps._octant_masses(moved, nuq.weights, p=p)
    oc_dir = ps._octant_masses(fam.positions, nup.weights, p=p)
    rel = np.max(np.abs(oc_push - oc_dir) / np.maximum(oc_dir, 1e-12))
    print(f"equivariance {tag}: octant rel dev {rel:.2e} "
          f"mass ratio-1 {abs(nuq.total_mass/nup.total_mass-1):.2e}")
