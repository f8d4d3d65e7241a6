"""Smoke 4: shadow constants, shadow lemma, and flow-coordinate sampling."""
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
deep = ps.patterson_family(modular, radius=60000.0, near_cut=6.0, ball=ball)
print(f"modular deep family [{time.time()-t0:.0f}s] delta={deep.delta:.4f}")

# shadow constants: lattice p_y in [1,4], s_y stable under sample doubling
rep1 = ps.shadow_constants(deep, np.random.default_rng(2), n_xi=8, n_y=12)
rep2 = ps.shadow_constants(deep, np.random.default_rng(2), n_xi=16, n_y=24)
print(f"modular: s_y {rep1.s_y:.3f} -> {rep2.s_y:.3f} "
      f"(drift {abs(rep2.s_y/rep1.s_y-1.0):.3f}), p_y {rep1.p_y:.3f} -> {rep2.p_y:.3f}, "
      f"tables {len(rep2.s_table)}/{len(rep2.p_table)}")

sch = fh.schottky_pair(4.0)
sfam = ps.patterson_family(sch, radius=math.exp(18.0))
srep1 = ps.shadow_constants(sfam, np.random.default_rng(2), n_xi=8, n_y=12, min_atoms=10)
srep2 = ps.shadow_constants(sfam, np.random.default_rng(2), n_xi=16, n_y=24, min_atoms=10)
print(f"schottky: s_y {srep1.s_y:.3f} -> {srep2.s_y:.3f} "
      f"(drift {abs(srep2.s_y/max(srep1.s_y,1e-12)-1.0):.3f}), p_y {srep2.p_y:.3f}, "
      f"ratio {srep2.ratio:.3f}, tables {len(srep2.s_table)}/{len(srep2.p_table)}")

# shadow lemma, lattice: window masses constant over well-resolved frames
rng = np.random.default_rng(9)
frames = []
while len(frames) < 16:
    pts = fh.limit_points(modular, rng, 2)
    if abs(pts[0] - pts[1]) < 0.3:
        continue
    h = ps.hopf_frame(float(pts[0]), float(pts[1])) \
        @ ps.a_mat(float(rng.uniform(-0.5, 0.5)))
    if ps._dist_arr(np.array([fh.mobius(h, ps.ORIGIN)]), np.array([ps.ORIGIN]))[0] > 1.2:
        continue
    frames.append(h)
lat = ps.shadow_lemma_check(deep, rng, frames=frames)
print(f"lattice shadow lemma: slope {lat.slope:.3f} max_resid {lat.max_resid:.3f} "
      f"masses {lat.masses.min():.4f}..{lat.masses.max():.4f}")
print(f"  eps sweep: {[f'{e:g}:{v:.2f}' for e, v in sorted(lat.eps_sups.items(), reverse=True)]}")

# shadow lemma, cusped: slope of log-mass against (1-delta) * cusp depth
par = fh.parabolic_pair(4.0)
t0 = time.time()
pfam = ps.patterson_family(par, radius=math.exp(16.0))
print(f"parabolic fam [{time.time()-t0:.0f}s] delta={pfam.delta:.4f} "
      f"atoms={pfam.diagnostics['atoms']}")
depth_fn = ps.cusp_depth_function(par)
prng = np.random.default_rng(4)
plims = fh.limit_points(par, prng, 12)
cusp_frames = []
for xim in plims:
    if xim == fh.INF or abs(xim) > 30.0:
        continue
    for t in np.linspace(0.3, 3.3, 4):
        cusp_frames.append(ps.hopf_frame(float(xim), fh.INF) @ ps.a_mat(float(t)))
rep = ps.shadow_lemma_check(pfam, prng, frames=cusp_frames, depth_fn=depth_fn)
used = len(rep.masses)
print(f"cusped shadow lemma: slope {rep.slope:.3f} max_resid {rep.max_resid:.3f} "
      f"frames used {used}/{len(cusp_frames)} depth range "
      f"{rep.depths.min():.2f}..{rep.depths.max():.2f}")

# flow-coordinate sampler vs Haar on the quotient surface
t0 = time.time()
sam_frames, sam_w = ps.bms_sample(deep, np.random.default_rng(13), 30000)
zs = np.array([fh.mobius(h, ps.ORIGIN) for h in sam_frames])
red_ball = fh.word_ball(modular, math.exp(9.0))
CENTER = 2.0j
for _ in range(3):
    zs = np.array([ps.domain_reduce(red_ball.mats, z, CENTER) for z in zs])
print(f"bms sample+reduce [{time.time()-t0:.0f}s], weight sum {sam_w.sum():.6f}")

def haar_oracle(f):
    xs = np.linspace(-0.5, 0.5, 481)
    ys = np.exp(np.linspace(0.0, math.log(40.0), 1600))
    X, Y = np.meshgrid(xs, ys)
    Z = X + 1j * Y
    mask = np.abs(Z) >= 1.0
    w = np.gradient(xs)[None, :] * np.gradient(ys)[:, None] / Y ** 2
    vol = float(np.sum(w * mask))
    return float(np.sum(f(Z) * w * mask)) / vol

tests = {
    "gauss@1.5i": lambda z: np.exp(-ps._dist_arr(1.5j, np.asarray(z)) ** 2),
    "1/y": lambda z: 1.0 / np.asarray(z).imag,
    "cos-strip": lambda z: np.cos(2 * np.pi * np.asarray(z).real)
        * np.exp(-(np.asarray(z).imag - 1.2) ** 2),
    "cauchy-y": lambda z: 1.0 / (1.0 + (np.asarray(z).imag - 1.0) ** 2),
    "ball@1.8i": lambda z: (ps._dist_arr(1.8j, np.asarray(z)) <= 0.5).astype(float),
}
for name, f in tests.items():
    est = float(np.sum(f(zs) * sam_w))
    orc = haar_oracle(f)
    print(f"  {name}: sample {est:.5f} haar {orc:.5f} rel {abs(est/orc-1.0):.4f}")

# A-invariance: endpoint-pair functions are unchanged by flowing the sample
g1 = [fh.fixed_points(sam_frames[0] @ ps.u_mat(0.0))]  # placeholder shape check
def endpoint_fn(h):
    m = h
    xi_m = fh.mobius(m, 0.0)
    xi_p = fh.mobius(m, fh.INF)
    v = 0.0 if xi_p == fh.INF else math.atan(xi_p if xi_p != fh.INF else 0.0)
    u = 0.0 if xi_m == fh.INF else math.atan(xi_m)
    return math.sin(u) * math.cos(v)
base = sum(endpoint_fn(h) * w for h, w in zip(sam_frames[:4000], sam_w[:4000]))
flow = sum(endpoint_fn(h @ ps.a_mat(0.7)) * w for h, w in zip(sam_frames[:4000], sam_w[:4000]))
print(f"A-invariance endpoint fn: base {base:.6f} flowed {flow:.6f} "
      f"abs diff {abs(base - flow):.2e}")
