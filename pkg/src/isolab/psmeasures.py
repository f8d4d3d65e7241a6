"""Conformal measure machinery for the plane stabilizers.

Everything here lives on the hyperbolic plane and its boundary circle:
critical exponents from orbit growth, atomic conformal densities built
from orbit points, the induced measures on horocycle parameter lines,
and the two shadow-type constants that control window masses.

The densities are the finite-cutoff stage of the usual limit
construction.  Atoms sit at the boundary endpoints of the rays from the
base point through the orbit points; these positions are computed once
and shared by the whole family, while the weight of the atom over
gamma at the evaluation point p is e^{-s d(p, gamma o)} with s slightly
above the critical exponent.  Sharing positions is what makes the
structural identities exact at finite cutoff instead of only in the
limit: the cocycle relation between the measures at two points holds
atom by atom, and the window-scaling identity for the horocycle
measures reduces to an exact bijection of atoms.  The tests lean on
both.

Orbit points closer to the base than the near cut are dropped.  Their
ray directions say nothing about the boundary behaviour of the group,
and each one carries enough weight to poison cell masses at the cutoffs
we can afford; the surviving family is still exactly conformal in the
sense above, since dropping atoms commutes with reweighting.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import fuchsian as fh
from .errors import (
    EmptyWindow,
    InsufficientGrowthData,
    SlowConvergence,
)

# Two-sided radial profile of the atom weights, measured from the
# evaluation point: zero inside NEAR_CUT (orbit points that close say
# nothing about the boundary yet carry huge raw weight), ramping to one
# over RAMP_IN, and tapering to zero over RAMP_OUT before the horizon
# deficit HORIZON_SLACK.  The slack guarantees every atom the profile
# can see lies inside the enumerated ball even after moving the
# evaluation point by a generator, which is what makes equivariance of
# the family exact instead of cutoff-limited.
NEAR_CUT = 3.0
RAMP_IN = 1.0
HORIZON_SLACK = 2.0
RAMP_OUT = 2.0

# Exponent offsets s = delta + 1/k used for the stabilization
# diagnostics; the measures themselves use the last entry.
PS_KS = (4, 8, 16)

# Relative drift of coarse cell masses above which the cutoff is refused.
DRIFT_TOL = 0.10

ORIGIN = fh.ORIGIN


def a_mat(t):
    """Geodesic flow matrix diag(e^{t/2}, e^{-t/2})."""
    h = 0.5 * t
    return np.array([[math.exp(h), 0.0], [0.0, math.exp(-h)]])


def u_mat(r):
    """Expanding horocycle matrix, lower unipotent."""
    return np.array([[1.0, 0.0], [r, 1.0]])


def hopf_frame(xi_minus, xi_plus):
    """A frame whose backward endpoint is xi_minus and forward xi_plus.

    The forward endpoint of a frame g is g(INF), the backward one g(0).
    Either argument may be INF.  The time along the geodesic is left at
    the frame's own origin; compose with a_mat to slide.
    """
    if xi_minus == xi_plus:
        raise ValueError("endpoints must be distinct")
    if xi_plus == fh.INF:
        m = np.array([[1.0, xi_minus], [0.0, 1.0]])
    elif xi_minus == fh.INF:
        m = np.array([[xi_plus, -1.0], [1.0, 0.0]])
    else:
        s = math.sqrt(abs(xi_plus - xi_minus))
        if xi_plus > xi_minus:
            m = np.array([[xi_plus / s, xi_minus / s], [1.0 / s, 1.0 / s]])
        else:
            m = np.array([[-xi_plus / s, xi_minus / s], [-1.0 / s, 1.0 / s]])
    return fh.sl2_normalize(m)


def _dist_arr(z, w):
    """Hyperbolic distance, vectorized over either argument."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    x = 1.0 + np.abs(z - w) ** 2 / (2.0 * z.imag * w.imag)
    return np.arccosh(np.maximum(x, 1.0))


def _to_disk_arr(xs, p):
    """Cayley transform of boundary points (INF allowed), vectorized."""
    xs = np.asarray(xs, dtype=float)
    inf_mask = ~np.isfinite(xs)
    safe = np.where(inf_mask, 0.0, xs)
    w = (safe - p) / (safe - np.conj(p))
    return np.where(inf_mask, 1.0 + 0.0j, w)


def _mobius_arr(m, xs):
    """Mobius action of one matrix on boundary points, INF in and out."""
    a, b, c, d = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
    xs = np.asarray(xs, dtype=float)
    out = np.empty(len(xs))
    inf_mask = ~np.isfinite(xs)
    out[inf_mask] = a / c if abs(c) > 1e-300 else np.inf
    fin = xs[~inf_mask]
    den = c * fin + d
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.where(np.abs(den) < 1e-300, np.inf, (a * fin + b) / den)
    out[~inf_mask] = vals
    return out


def _ray_endpoints(p, zs):
    """Boundary endpoints of the rays from p through the points zs.

    Each ray extends the geodesic from p through z beyond z; a vertical
    ray upward ends at INF.
    """
    zs = np.asarray(zs, dtype=complex)
    dx = zs.real - p.real
    out = np.empty(len(zs), dtype=float)
    vertical = np.abs(dx) < 1e-12
    up = vertical & (zs.imag >= p.imag)
    out[up] = np.inf
    out[vertical & ~up] = p.real
    rest = ~vertical
    zr, zi = zs.real[rest], zs.imag[rest]
    c = (zr * zr + zi * zi - abs(p) ** 2) / (2.0 * (zr - p.real))
    r = np.abs(p - c)
    out[rest] = np.where(zr > p.real, c + r, c - r)
    return out


def _octant_masses(positions, weights, p=ORIGIN):
    """Normalized masses of the eight disk-angle octants at p."""
    ang = np.angle(_to_disk_arr(positions, p))
    bins = np.minimum((ang + math.pi) / (math.pi / 4.0), 7.999).astype(int)
    out = np.zeros(8)
    np.add.at(out, bins, weights)
    total = out.sum()
    return out / total if total > 0 else out


# ---------------------------------------------------------------------------
# critical exponent from orbit growth


@dataclass
class ExponentFit:
    """Least-squares growth exponent with its fitting window.

    delta is the slope of log N(T) against T over the window with the
    smallest residual among all windows covering at least half the
    usable range; band is the envelope of slopes from every window whose
    residual is within a factor two of the best, widened by twice the
    standard error, so it reflects window-choice sensitivity and not
    just fit noise.
    """

    delta: float
    band: tuple
    tvals: np.ndarray
    counts: np.ndarray
    window: tuple
    radius: float

    def __float__(self):
        return self.delta


def critical_exponent(group, radius=20000.0, min_doublings=4, grid=28,
                      cap=400_000, ball=None):
    """Growth exponent of #{gamma : d(o, gamma o) <= T}.

    radius is the norm horizon e^{T_max} of the word ball (the frame
    norm of a determinant-one matrix is exactly e^{d(i, gamma i)}), so
    sparse groups want radius around e^{18}, not thousands; float
    determinants degrade past that.  Raises InsufficientGrowthData when
    the counts span fewer than min_doublings doublings.  ball lets the
    caller reuse an enumeration that already covers the radius.
    """
    if ball is None:
        ball = fh.word_ball(group, radius, cap=cap)
    d = np.log(np.maximum(ball.norms, 1.0))
    tmax = math.log(radius)
    moving = d[d > 0.1]
    tmin = max(0.5, float(np.min(moving))) if len(moving) else 0.5
    if tmin >= tmax - 1.0:
        raise InsufficientGrowthData(
            f"orbit only starts moving at distance {tmin:.2f}, too close "
            f"to the horizon {tmax:.2f}")
    tvals = np.linspace(tmin, tmax, grid)
    counts = np.array([int(np.sum(d <= t)) for t in tvals])
    doublings = math.log2(counts[-1] / max(counts[0], 1))
    if doublings < min_doublings:
        raise InsufficientGrowthData(
            f"counts span {doublings:.2f} doublings up to radius "
            f"{radius:g}; need {min_doublings}")

    logn = np.log(counts.astype(float))
    fits = []
    min_span = (tmax - tmin) / 2.0
    for i in range(grid):
        for j in range(i + 5, grid):
            if tvals[j] - tvals[i] < min_span:
                continue
            ts, ls = tvals[i:j + 1], logn[i:j + 1]
            slope, icpt = np.polyfit(ts, ls, 1)
            resid = ls - (slope * ts + icpt)
            rms = float(np.sqrt(np.mean(resid ** 2)))
            se = rms / math.sqrt(np.sum((ts - ts.mean()) ** 2))
            fits.append((rms, float(slope), (i, j), se))
    fits.sort(key=lambda f: f[0])
    rms0, slope0, win0, se0 = fits[0]
    near = [f[1] for f in fits if f[0] <= 2.0 * rms0 + 1e-12]
    halfw = max(slope0 - min(near), max(near) - slope0) + 2.0 * se0
    return ExponentFit(delta=slope0, band=(slope0 - halfw, slope0 + halfw),
                       tvals=tvals, counts=counts, window=win0, radius=radius)


def poincare_partial_sums(group, s, radius):
    """Partial sums of sum e^{-s d(o, gamma o)} at five nested horizons.

    Growing increments mean the series diverges at this s, shrinking
    ones mean it converges; bracketing the critical exponent in the
    tests uses exactly this contrast.
    """
    ball = fh.word_ball(group, radius)
    d = np.log(np.maximum(ball.norms, 1.0))
    tmax = math.log(radius)
    cuts = [tmax / 2.0 ** k for k in range(4, -1, -1)]
    return np.array([float(np.sum(np.exp(-s * d[d <= t]))) for t in cuts])


# ---------------------------------------------------------------------------
# atomic measures


@dataclass
class AtomicMeasure:
    """A finite weighted atom set on the boundary or on a parameter line.

    kind "boundary" means atoms at boundary points of the plane (INF is
    a legal position) with ball masses in the visual metric at the
    basepoint; kind "line" means atoms at horocycle parameters with
    interval masses.  Weights are nonnegative; total_mass is their sum.
    A nonempty note flags a degenerate but non-fatal construction.
    """

    kind: str
    points: np.ndarray
    weights: np.ndarray
    basepoint: object
    exponent: float
    note: str = ""

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.points.shape != self.weights.shape:
            raise ValueError("points and weights must align")
        if len(self.weights) and float(np.min(self.weights)) < 0.0:
            raise ValueError("weights must be nonnegative")

    @property
    def total_mass(self):
        return float(np.sum(self.weights))

    def __len__(self):
        return len(self.weights)

    def mass_ball(self, xi, eps):
        """Mass of the visual-metric ball of radius eps around xi."""
        if self.kind != "boundary":
            raise ValueError("mass_ball needs a boundary measure")
        w = _to_disk_arr(self.points, self.basepoint)
        x = fh.to_disk(xi, self.basepoint)
        return float(np.sum(self.weights[0.5 * np.abs(w - x) <= eps]))

    def mass_interval(self, lo, hi):
        if self.kind != "line":
            raise ValueError("mass_interval needs a line measure")
        keep = (self.points >= lo) & (self.points <= hi)
        return float(np.sum(self.weights[keep]))


# ---------------------------------------------------------------------------
# the conformal density family


@dataclass
class PattersonFamily:
    """Finite-cutoff conformal density family of one Fuchsian group.

    positions are the shared atom locations on the boundary; the
    measure at an evaluation point only reweights them, with the radial
    profile measured from that point.  Because the profile is a pure
    function of distance and its support stays HORIZON_SLACK inside the
    enumerated ball, moving the evaluation point by a group element
    reproduces the pushed-forward measure atom for atom.  znorm is the
    profile mass at the group's base point, so measure_at(ORIGIN) has
    unit mass and every other point is normalized relative to it.
    """

    group: object
    delta: float
    s: float
    positions: np.ndarray
    opoints: np.ndarray
    odists: np.ndarray
    teff: float
    znorm: float
    radius: float
    near: float = NEAR_CUT
    diagnostics: dict = field(default_factory=dict)

    def profile(self, dists, s=None):
        """Raw atom weights at the given distances from an evaluation
        point: the conformal kernel times the two-sided radial ramp."""
        s = self.s if s is None else s
        ramp = np.clip((dists - self.near) / RAMP_IN, 0.0, 1.0) \
            * np.clip((self.teff - dists) / RAMP_OUT, 0.0, 1.0)
        return np.exp(-s * dists) * ramp

    def measure_at(self, p):
        p = complex(p)
        weights = self.profile(_dist_arr(p, self.opoints)) / self.znorm
        return AtomicMeasure(kind="boundary", points=self.positions,
                             weights=weights, basepoint=p, exponent=self.s)


def patterson_family(group, radius=20000.0, delta=None, cap=400_000,
                     near_cut=NEAR_CUT, ball=None):
    """Build the atomic conformal family at cutoff ``radius``.

    delta may be a number or an ExponentFit; omitted, it is fitted here
    from the same word ball budget.  near_cut moves the inner edge of
    the radial profile: deeper cuts trade raw atom count for effective
    sample size, since near the critical exponent most of the mass sits
    in the outer shells while the few innermost atoms dominate the
    variance.  ball lets the caller reuse an enumeration covering the
    radius (atoms beyond the horizon just sit outside the profile
    support).  The stabilization check compares the coarse angular mass
    profile of the family against the one rebuilt with the horizon
    pulled in to 80%: cells still drifting by more than DRIFT_TOL mean
    the cutoff is too small to trust, and the construction refuses
    rather than returning a moving target.
    """
    if ball is None:
        ball = fh.word_ball(group, radius, cap=cap)
    fit = None
    if delta is None:
        fit = critical_exponent(group, radius=radius, cap=cap, ball=ball)
        delta = fit
    dval = float(delta)
    opoints = fh.orbit_points(ball.mats, ORIGIN)
    odists = np.log(np.maximum(ball.norms, 1.0))
    teff = math.log(radius) - HORIZON_SLACK
    if teff - RAMP_OUT <= near_cut + RAMP_IN:
        raise InsufficientGrowthData(
            f"horizon {math.log(radius):.2f} leaves no room between the "
            f"near cut and the taper")

    s = dval + 1.0 / PS_KS[-1]
    positions = _ray_endpoints(ORIGIN, opoints)
    fam = PattersonFamily(group=group, delta=dval, s=s, positions=positions,
                          opoints=opoints, odists=odists, teff=teff,
                          znorm=1.0, radius=radius, near=near_cut)
    base = fam.profile(odists)
    if int(np.sum(base > 0.0)) < 50:
        raise InsufficientGrowthData(
            f"only {int(np.sum(base > 0.0))} orbit points in the profile "
            f"support at radius {radius:g}")
    fam.znorm = float(np.sum(base))

    octants = _octant_masses(positions, base)
    short = PattersonFamily(group=group, delta=dval, s=s, positions=positions,
                            opoints=opoints, odists=odists,
                            teff=0.8 * math.log(radius) - HORIZON_SLACK,
                            znorm=1.0, radius=radius, near=near_cut)
    octants_inner = _octant_masses(positions, short.profile(odists))
    busy = octants >= 0.05
    drift = float(np.max(np.abs(octants[busy] - octants_inner[busy])
                         / octants[busy])) if np.any(busy) else 0.0
    if drift > DRIFT_TOL:
        raise SlowConvergence(
            f"coarse cell masses still drift {drift:.1%} between the 80% "
            f"horizon and the full one; enlarge the radius")

    k_masses = {k: float(np.sum(fam.profile(odists, s=dval + 1.0 / k)))
                for k in PS_KS}
    k_octants = {k: _octant_masses(
        positions, fam.profile(odists, s=dval + 1.0 / k)) for k in PS_KS}
    extrap = 2.0 * k_octants[16] - k_octants[8]
    fam.diagnostics = {
        "k_masses": k_masses, "k_octants": k_octants, "octants": octants,
        "cell_drift": drift,
        "stabilization_gap": float(np.max(np.abs(extrap - k_octants[16]))),
        "atoms": int(np.sum(base > 0.0)), "fit": fit}
    return fam


def ps_density(group, p=ORIGIN, radius=20000.0, delta=None):
    """Atomic conformal density at one evaluation point."""
    return patterson_family(group, radius=radius, delta=delta).measure_at(p)


# ---------------------------------------------------------------------------
# measures on horocycle parameter lines


def horocycle_measure(fam, h, rho, p=None):
    """Induced measure on the horocycle parameters r in [-rho, rho].

    The frame h u_r has forward endpoint h(1/r), so each boundary atom
    xi inside the window contributes at r(xi) = 1/(h^{-1} xi) with the
    cocycle reweighting e^{delta b_xi(p, h u_r p)}.  The result does
    not depend on the evaluation point p in the limit; at finite cutoff
    the frame point h(i) spends the atom budget where the window looks,
    so that is the default.  Pass p explicitly to probe independence,
    or to share one evaluation point across related frames, which makes
    ratios of the resulting measures exact rather than approximate.  An
    empty window is reported in the note rather than raised; a
    nonpositive window is the caller's error.
    """
    if rho <= 0.0:
        raise EmptyWindow("window half-width must be positive")
    p = fh.mobius(h, ORIGIN) if p is None else complex(p)
    nu = fam.measure_at(p)
    hinv = np.array([[h[1, 1], -h[0, 1]], [-h[1, 0], h[0, 0]]])
    pulled = _mobius_arr(hinv, nu.points)
    with np.errstate(divide="ignore"):
        rvals = np.where(np.isfinite(pulled),
                         np.divide(1.0, pulled,
                                   out=np.full(len(pulled), np.inf),
                                   where=pulled != 0.0),
                         0.0)
    keep = (np.abs(rvals) <= rho) & (nu.weights > 0.0)
    if not np.any(keep):
        return AtomicMeasure(kind="line", points=np.empty(0),
                             weights=np.empty(0), basepoint=None,
                             exponent=fam.delta, note="empty window")
    rs = rvals[keep]
    xis = nu.points[keep]
    base = nu.weights[keep]
    a, b = h[0, 0], h[0, 1]
    c, dd = h[1, 0], h[1, 1]
    qs = ((a + b * rs) * p + b) / ((c + dd * rs) * p + dd)
    inf_mask = ~np.isfinite(xis)
    safe = np.where(inf_mask, 0.0, xis)
    bus = np.where(inf_mask,
                   np.log(qs.imag / p.imag),
                   np.log((np.abs(safe - p) ** 2 * qs.imag)
                          / (np.abs(safe - qs) ** 2 * p.imag)))
    weights = base * np.exp(fam.delta * bus)
    order = np.argsort(rs)
    return AtomicMeasure(kind="line", points=rs[order],
                         weights=weights[order], basepoint=None,
                         exponent=fam.delta)


def frames_on_orbit(group, rng, n, tspread=2.0, word_length=12):
    """Sample frames with both geodesic endpoints in the limit set.

    Endpoint pairs come from attracting fixed points of long random
    words; the time along the connecting geodesic is uniform in
    [-tspread, tspread].  Returns a list of 2x2 matrices.
    """
    out = []
    attempts = 0
    while len(out) < n and attempts < 6:
        pts = fh.limit_points(group, rng, 2 * (n - len(out)) + 8,
                              word_length=word_length)
        for i in range(0, len(pts) - 1, 2):
            if len(out) >= n:
                break
            xm, xp = float(pts[i]), float(pts[i + 1])
            if abs(xm - xp) < 1e-6:
                continue
            t = float(rng.uniform(-tspread, tspread))
            out.append(hopf_frame(xm, xp) @ a_mat(t))
        attempts += 1
    return out


# ---------------------------------------------------------------------------
# shadow constants


@dataclass
class ShadowReport:
    """Empirical suprema of the two window-regularity constants.

    s_y is the boundary-ball ratio supremum along geodesics into the
    limit set; p_y the horocycle window one.  Both keep their witness
    tables so drift under refinement can be inspected.
    """

    s_y: float
    p_y: float
    ratio: float
    s_table: list
    p_table: list
    diagnostics: dict = field(default_factory=dict)


def _is_convex_cocompact(group):
    """No parabolic generator means convex cocompact across our zoo."""
    return all(fh.element_type(g) != "parabolic" for g in group.gens)


def delta_hull(fam):
    """The growth exponent of the window masses: delta itself when the
    group is convex cocompact, 2 delta - 1 with cusps."""
    d = fam.delta
    return d if _is_convex_cocompact(fam.group) else max(2.0 * d - 1.0, 1e-3)


def shadow_constants(fam, rng, n_xi=10, n_depth=4, n_y=16, eps_levels=5,
                     min_atoms=20):
    """Estimate the boundary and horocycle window constants.

    The boundary constant scans directions xi in the limit set,
    evaluation points sliding along geodesics ending at xi, and dyadic
    radii in (0, 1/2]; the horocycle constant scans sampled frames and
    dyadic half-widths in (0, 2].  Ratios whose small ball holds fewer
    than min_atoms atoms are skipped rather than extrapolated, so the
    suprema are resolution-limited but never resolution-inflated.
    """
    dy = delta_hull(fam)
    pts = fh.limit_points(fam.group, rng, 2 * n_xi + 4)
    s_table = []
    s_sup = 0.0
    for i in range(0, 2 * n_xi - 1, 2):
        xi, eta = float(pts[i]), float(pts[i + 1])
        if abs(xi - eta) < 1e-6:
            continue
        g = hopf_frame(eta, xi)
        for t in np.linspace(-1.0, 2.0, n_depth):
            pnt = fh.mobius(g @ a_mat(float(t)), ORIGIN)
            nu = fam.measure_at(pnt)
            disk = _to_disk_arr(nu.points, pnt)
            x = fh.to_disk(xi, pnt)
            gd = 0.5 * np.abs(disk - x)
            half = float(np.sum(nu.weights[gd <= 0.5]))
            if half <= 0.0:
                continue
            for k in range(1, eps_levels + 1):
                eps = 0.5 ** k
                mask = gd <= eps
                if int(np.sum(mask)) < min_atoms:
                    continue
                m = float(np.sum(nu.weights[mask]))
                val = (m / half) ** (1.0 / dy) / eps
                s_table.append({"xi": xi, "t": float(t), "eps": eps,
                                "ratio": val})
                s_sup = max(s_sup, val)

    frames = frames_on_orbit(fam.group, rng, n_y)
    p_table = []
    p_sup = 1.0
    for h in frames:
        mu = horocycle_measure(fam, h, rho=2.0)
        if len(mu) < min_atoms:
            continue
        base = mu.mass_interval(-1.0, 1.0)
        if base <= 0.0:
            continue
        for k in range(-1, eps_levels + 1):
            eps = 2.0 ** (-k)
            mask = np.abs(mu.points) <= eps
            if int(np.sum(mask)) < min_atoms:
                continue
            m = float(np.sum(mu.weights[mask]))
            val = (m / base) ** (1.0 / dy) / eps
            p_table.append({"eps": eps, "ratio": val})
            p_sup = max(p_sup, val)
    assert p_sup >= 1.0
    return ShadowReport(s_y=s_sup, p_y=p_sup, ratio=s_sup / p_sup,
                        s_table=s_table, p_table=p_table,
                        diagnostics={"delta_hull": dy, "frames": len(frames)})


@dataclass
class ShadowLemmaReport:
    slope: float
    intercept: float
    max_resid: float
    masses: np.ndarray
    depths: np.ndarray
    eps_sups: dict


def cusp_depth_function(group):
    """Distance into the cusp thin parts, as a function of a point.

    Exact for a parabolic fixing INF with translation length c (the
    vertical distance past the horoball at height c/2); other parabolic
    points are conjugated there.  Points outside every thin part get
    depth zero.  Raises when no generator is parabolic.
    """
    probes = []
    for g in group.gens:
        if fh.element_type(g) != "parabolic":
            continue
        xi = fh.fixed_points(g)[0]
        if xi == fh.INF:
            conj = np.eye(2)
            shift = abs(g[0, 1])
        else:
            conj = np.array([[0.0, -1.0], [1.0, -xi]])
            gg = conj @ g @ np.array([[-xi, -1.0], [1.0, 0.0]])
            shift = abs(gg[0, 1])
        probes.append((conj, shift))
    if not probes:
        raise ValueError("no parabolic generator to build cusp depths from")

    def depth(z):
        best = 0.0
        for conj, shift in probes:
            w = fh.mobius(conj, z)
            best = max(best, math.log(max(2.0 * w.imag / shift, 1.0)))
        return best

    return depth


def shadow_lemma_check(fam, rng, n=36, frames=None, depth_fn=None,
                       tspread=4.0):
    """Window mass against distance from the compact core.

    Regresses log mu_y([-1,1]) on (1 - delta) d(core, pi(y)) over the
    frames.  With a lattice the predictor is flat, the slope is set to
    one by convention, and the interesting output is max_resid (the
    constancy of the window masses).  Frames may be passed in; by
    default they are sampled on the orbit.  depth_fn supplies
    d(core, .) for cusped groups, see cusp_depth_function.
    """
    if frames is None:
        frames = frames_on_orbit(fam.group, rng, n, tspread=tspread)
    masses, depths = [], []
    for h in frames:
        mu = horocycle_measure(fam, h, rho=1.0)
        m = mu.mass_interval(-1.0, 1.0)
        if m <= 0.0:
            continue
        z = fh.mobius(h, ORIGIN)
        depths.append(depth_fn(z) if depth_fn is not None else 0.0)
        masses.append(m)
    if len(masses) < 4:
        raise EmptyWindow(f"only {len(masses)} frames had nonempty windows")
    masses = np.array(masses)
    depths = np.array(depths)
    logm = np.log(masses)
    x = (1.0 - fam.delta) * depths
    if np.ptp(x) < 1e-9:
        slope, icpt = 1.0, float(np.mean(logm))
        resid = logm - icpt
    else:
        slope, icpt = np.polyfit(x, logm, 1)
        resid = logm - (slope * x + icpt)

    dy = delta_hull(fam)
    eps_sups = {}
    for k in range(0, 6):
        eps = 0.5 ** k
        vals = []
        for h in frames[:12]:
            mu = horocycle_measure(fam, h, rho=1.0)
            base = mu.mass_interval(-1.0, 1.0)
            m = mu.mass_interval(-eps, eps)
            if base > 0.0 and m > 0.0:
                vals.append(m / (eps ** dy * base))
        if vals:
            eps_sups[eps] = float(max(vals))
    return ShadowLemmaReport(slope=float(slope), intercept=float(icpt),
                             max_resid=float(np.max(np.abs(resid))),
                             masses=masses, depths=depths, eps_sups=eps_sups)


# ---------------------------------------------------------------------------
# maximal-entropy sampling in flow coordinates


def bms_sample(fam, rng, n, twindow=0.5, top=400, gap=0.05):
    """Weighted frame samples in (backward, forward, time) coordinates.

    Atom pairs are drawn proportionally to w_i w_j / d_o(xi_i, xi_j)^{2
    delta} away from the diagonal, the flow time uniformly; that is the
    product density whose projection along the flow is flow-invariant.
    Only the ``top`` heaviest atoms enter the pair pool (tail atoms
    carry negligible pair mass at our cutoffs).  Returns (frames,
    weights) with the weights summing to one.
    """
    nu = fam.measure_at(ORIGIN)
    order = np.argsort(nu.weights)[::-1][:min(top, len(nu))]
    pts = nu.points[order]
    wts = nu.weights[order]
    disk = _to_disk_arr(pts, ORIGIN)
    gd = 0.5 * np.abs(disk[:, None] - disk[None, :])
    with np.errstate(divide="ignore"):
        dens = np.where(gd > gap, gd ** (-2.0 * fam.delta), 0.0)
    pmat = wts[:, None] * wts[None, :] * dens
    np.fill_diagonal(pmat, 0.0)
    flat = pmat.reshape(-1)
    total = flat.sum()
    if total <= 0.0:
        raise EmptyWindow("no off-diagonal atom pairs")
    idx = rng.choice(len(flat), size=n, p=flat / total)
    frames = []
    for k in idx:
        i, j = divmod(int(k), len(pts))
        t = float(rng.uniform(-twindow, twindow))
        frames.append(hopf_frame(float(pts[i]), float(pts[j])) @ a_mat(t))
    return frames, np.full(n, 1.0 / n)


def stabilizer_group(P):
    """The conjugated stabilizer of a plane orbit as a boundary group.

    Wraps the real generator list of a PlaneOrbit so the measure
    machinery can run on it directly.
    """
    return fh.FuchsianGroup(f"{P.model}-stab", list(P.real_generators))


def domain_reduce(mats, z, center):
    """Move z to its image closest to center over a stack of matrices.

    With the stack a word ball of a lattice this lands in the Dirichlet
    domain about center whenever the ball is deep enough to contain the
    reducing word.
    """
    imgs = (mats[:, 0, 0] * z + mats[:, 0, 1]) \
        / (mats[:, 1, 0] * z + mats[:, 1, 1])
    d = _dist_arr(imgs, center)
    k = int(np.argmin(d))
    return complex(imgs[k])
