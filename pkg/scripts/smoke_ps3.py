"""Smoke 3: horocycle parameter measures on the modular group."""
import math
import time

import numpy as np

from isolab import fuchsian as fh
from isolab import psmeasures as ps

S = np.array([[0.0, -1.0], [1.0, 0.0]])
T = np.array([[1.0, 1.0], [0.0, 1.0]])
modular = fh.FuchsianGroup("modular", [S, T])

t0 = time.time()
ball = fh.word_ball(modular, 60000.0, cap=1_200_000)
print(f"shared ball: {len(ball)} elements [{time.time()-t0:.1f}s]")
fam = ps.patterson_family(modular, radius=20000.0, ball=ball)
deep = ps.patterson_family(modular, radius=60000.0, near_cut=6.0,
                           ball=ball, delta=fam.delta)
rng = np.random.default_rng(11)

frames = ps.frames_on_orbit(modular, rng, 8, tspread=1.0)
print(f"frames: {len(frames)}")

# window scaling identity, atom-exact: mu_y([-e^s,e^s]) = e^{ds} mu_{ya_{-s}}([-1,1])
worst = 0.0
for h in frames[:5]:
    pev = fh.mobius(h, ps.ORIGIN)
    for sv in (-2.0, -1.0, 1.0, 2.0):
        lhs = ps.horocycle_measure(fam, h, rho=math.exp(sv), p=pev).mass_interval(
            -math.exp(sv), math.exp(sv))
        rhs = math.exp(fam.delta * sv) * ps.horocycle_measure(
            fam, h @ ps.a_mat(-sv), rho=1.0, p=pev).mass_interval(-1.0, 1.0)
        if rhs > 0:
            worst = max(worst, abs(lhs / rhs - 1.0))
print(f"scaling identity worst rel: {worst:.2e}")

# lattice: mu_y on [-1,1] close to Lebesgue on 10 subintervals.  Per-frame
# cell masses carry shell-sampling noise, so the estimator of the underlying
# cell mass is the average profile over well-resolved frames.
cuts = np.linspace(-1.0, 1.0, 11)
profiles, perframe = [], []
tried = 0
while len(profiles) < 16 and tried < 200:
    tried += 1
    pts = fh.limit_points(modular, rng, 2)
    if abs(pts[0] - pts[1]) < 0.3:
        continue
    h = ps.hopf_frame(float(pts[0]), float(pts[1])) \
        @ ps.a_mat(float(rng.uniform(-0.5, 0.5)))
    pf = fh.mobius(h, ps.ORIGIN)
    if ps._dist_arr(np.array([pf]), np.array([ps.ORIGIN]))[0] > 1.2:
        continue
    mu = ps.horocycle_measure(deep, h, rho=1.0)
    if len(mu) < 400:
        continue
    cells = np.array([mu.mass_interval(cuts[i], cuts[i + 1])
                      for i in range(10)])
    cells /= cells.sum()
    profiles.append(cells)
    perframe.append(np.max(np.abs(cells - 0.1)) / 0.1)
avg = np.mean(profiles, axis=0)
print(f"lebesgue 10-cell: averaged dev {np.max(np.abs(avg-0.1))/0.1:.4f} "
      f"over {len(profiles)} frames, per-frame median "
      f"{float(np.median(perframe)):.3f}")

# basepoint independence: same window, two evaluation points
h = frames[0]
pf = fh.mobius(h, ps.ORIGIN)
mu1 = ps.horocycle_measure(fam, h, rho=1.0, p=pf)
mu2 = ps.horocycle_measure(fam, h, rho=1.0, p=pf + 0.3 + 0.2j)
cuts5 = np.linspace(-1.0, 1.0, 6)
c1 = np.array([mu1.mass_interval(cuts5[i], cuts5[i+1]) for i in range(5)])
c2 = np.array([mu2.mass_interval(cuts5[i], cuts5[i+1]) for i in range(5)])
r = (c1 / c1.sum()) / (c2 / c2.sum())
print(f"basepoint independence cells rel: {np.max(np.abs(r - 1.0)):.3f}")

# empty window note on a frame pushed far out (few atoms near its forward point)
deepframe = frames[0] @ ps.a_mat(12.0)
mu = ps.horocycle_measure(fam, deepframe, rho=1e-9)
print(f"deep tiny window: len={len(mu)} note={mu.note!r} mass={mu.total_mass:.3e}")

# schottky support containment in the limit-set cover
sch = fh.schottky_pair(4.0)
t0 = time.time()
sfam = ps.patterson_family(sch, radius=math.exp(18.0), delta=None)
print(f"schottky fam: atoms={sfam.diagnostics['atoms']} delta={sfam.delta:.4f} "
      f"drift={sfam.diagnostics['cell_drift']:.3f} [{time.time()-t0:.1f}s]")
cover = fh.limit_set_cover(sch, depth=4)
sframes = ps.frames_on_orbit(sch, rng, 4, tspread=0.5)
for h in sframes[:2]:
    mu = ps.horocycle_measure(fam=sfam, h=h, rho=1.0)
    if len(mu) == 0:
        print("  empty window")
        continue
    # forward endpoints of h u_r are h(1/r); they should sit in the cover
    in_mass, tot_mass = 0.0, mu.total_mass
    for rr, w in zip(mu.points, mu.weights):
        xi = fh.mobius(h, np.inf if rr == 0 else 1.0 / rr)
        if fh.cover_contains(cover, xi, tol=1e-3):
            in_mass += w
    print(f"  schottky window: atoms={len(mu)} mass in cover {in_mass/tot_mass:.4f}")
