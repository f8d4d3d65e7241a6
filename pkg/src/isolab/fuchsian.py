"""Hyperbolic plane geometry and finitely generated subgroups of PSL(2, R).

Surface-level work happens here: stabilizers of space-like vectors act on a
totally geodesic plane, and everything we need about them (orbit growth,
boundary measures, fundamental polygons) reduces to upper half-plane
computations with real 2x2 matrices.  Boundary points are reals together
with math.inf; the basepoint is i unless a function takes one explicitly.

Freeness and discreteness of the synthetic test groups are never assumed:
``ping_pong_certificate`` checks disjointness of isometric circles (after a
conjugation that moves all poles off infinity) and only then marks a group
free.
"""

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceeded, NonUnitDeterminant, NotCertified

ORIGIN = 1j
INF = math.inf

_SIGN_TOL = 1e-12


# ---------------------------------------------------------------------------
# matrices and the boundary action


def sl2_normalize(m):
    """Return a det-1, sign-canonical copy of a real 2x2 matrix.

    The determinant must be positive and within 1e-6 of 1 (we renormalize
    the tail, not wholesale rescale); the sign is fixed so the first entry
    of magnitude above 1e-12 is positive.
    """
    m = np.asarray(m, dtype=float)
    if m.shape != (2, 2):
        raise ValueError("expected a 2x2 matrix")
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    if det <= 0.0 or abs(det - 1.0) > 1e-6:
        raise NonUnitDeterminant(f"determinant {det} is not 1")
    m = m / math.sqrt(det)
    flat = m.reshape(-1)
    for x in flat:
        if abs(x) > _SIGN_TOL:
            if x < 0.0:
                m = -m
            break
    return m


def rotation(theta):
    """Elliptic element fixing i; acts on the boundary circle by 2*theta."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def mobius(m, z):
    """Apply a 2x2 matrix as a fractional linear map.

    Accepts interior points (complex with positive imaginary part),
    boundary reals, and INF; returns INF when the denominator vanishes.
    """
    a, b, c, d = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
    if z == INF:
        return a / c if c != 0.0 else INF
    num = a * z + b
    den = c * z + d
    if den == 0.0:
        return INF
    return num / den


def mobius_array(m, zs):
    """Vectorized ``mobius`` for finite points (no INF handling)."""
    zs = np.asarray(zs)
    return (m[0, 0] * zs + m[0, 1]) / (m[1, 0] * zs + m[1, 1])


def dist(z, w):
    """Hyperbolic distance in the upper half-plane."""
    num = abs(z - w) ** 2
    return math.acosh(1.0 + num / (2.0 * z.imag * w.imag))


def element_type(m, tol=1e-9):
    tr = abs(m[0, 0] + m[1, 1])
    if abs(m[0, 1]) < tol and abs(m[1, 0]) < tol and abs(m[0, 0] - m[1, 1]) < tol:
        return "identity"
    if tr > 2.0 + tol:
        return "hyperbolic"
    if tr < 2.0 - tol:
        return "elliptic"
    return "parabolic"


def translation_length(m):
    tr = abs(m[0, 0] + m[1, 1])
    if tr <= 2.0:
        return 0.0
    return 2.0 * math.acosh(tr / 2.0)


def fixed_points(m):
    """Boundary fixed points: (attracting, repelling) for hyperbolics,
    a single real for parabolics, the interior point for elliptics."""
    a, b, c, d = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
    kind = element_type(m)
    if kind == "identity":
        raise ValueError("identity fixes everything")
    if c == 0.0:
        # infinity is fixed; the finite fixed point solves (d - a) z = b
        if kind == "parabolic":
            return (INF,)
        other = b / (d - a)
        # attracting end has |derivative| < 1; at infinity that is |a/d| > 1
        if kind == "hyperbolic":
            return (INF, other) if abs(a) > abs(d) else (other, INF)
        return complex(other)
    disc = (a + d) ** 2 - 4.0
    if kind == "parabolic":
        return ((a - d) / (2.0 * c),)
    if kind == "elliptic":
        root = cmath.sqrt(complex(disc))
        z = ((a - d) + root) / (2.0 * c)
        return z if z.imag > 0 else ((a - d) - root) / (2.0 * c)
    root = math.sqrt(disc)
    p = ((a - d) + root) / (2.0 * c)
    q = ((a - d) - root) / (2.0 * c)
    # derivative at a fixed point x is 1/(cx + d)^2
    if abs(c * p + d) > 1.0:
        return (p, q)
    return (q, p)


# ---------------------------------------------------------------------------
# disk model, Busemann cocycle, Gromov distance


def to_disk(z, p=ORIGIN):
    """Cayley transform sending p to the disk center; boundary to |w| = 1."""
    if z == INF:
        return complex(1.0)
    return (z - p) / (z - p.conjugate())

def from_disk(w, p=ORIGIN):
    if w == 1.0:
        return INF
    return (p - p.conjugate() * w) / (1.0 - w)


def busemann(xi, p, q):
    """Busemann cocycle at the boundary point xi, normalized as the limit
    of d(p, z) - d(q, z) for z tending to xi.  Vectorized over xi."""
    if not isinstance(xi, np.ndarray):
        if xi == INF:
            return math.log(q.imag / p.imag)
        return math.log((abs(xi - p) ** 2 * q.imag) / (abs(xi - q) ** 2 * p.imag))
    xi = np.asarray(xi, dtype=float)
    inf_mask = ~np.isfinite(xi)
    safe = np.where(inf_mask, 0.0, xi)
    vals = np.log((np.abs(safe - p) ** 2 * q.imag) / (np.abs(safe - q) ** 2 * p.imag))
    return np.where(inf_mask, math.log(q.imag / p.imag), vals)


def gromov_dist(p, xi, eta):
    """The visual metric e^{-(xi|eta)_p}, computed in closed form as half
    the Euclidean chord between the two boundary points in the disk model
    recentered at p.  Takes values in [0, 1]."""
    return 0.5 * abs(to_disk(xi, p) - to_disk(eta, p))


def gromov_product(p, xi, eta):
    d = gromov_dist(p, xi, eta)
    if d == 0.0:
        return INF
    return -math.log(d)


def signed_dist_to_geodesic(z, xi, eta):
    """Signed distance from z to the geodesic with endpoints xi, eta.

    Positive on the left of the oriented geodesic xi -> eta (for a
    semicircle oriented left-to-right, that is the outside).
    """
    if xi == INF or eta == INF:
        x = eta if xi == INF else xi
        s = (z.real - x) / z.imag
        return math.asinh(s) if xi == INF else -math.asinh(s)
    c = 0.5 * (xi + eta)
    r = 0.5 * abs(eta - xi)
    s = (abs(z - c) ** 2 - r * r) / (2.0 * r * z.imag)
    return math.asinh(s) if xi < eta else -math.asinh(s)


def dist_to_geodesic(z, xi, eta):
    return abs(signed_dist_to_geodesic(z, xi, eta))


def parabolic_displacement(m, z):
    """d(z, mz) for any isometry, via sinh(d/2) = |num| / (2 Im z)."""
    a, b, c, d = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
    num = -c * z * z + (a - d) * z + b
    return 2.0 * math.asinh(abs(num) / (2.0 * z.imag))


# ---------------------------------------------------------------------------
# group container and word balls


@dataclass
class FuchsianGroup:
    """A marked generating set for a subgroup of PSL(2, R).

    ``free`` is only ever set by a certificate, never by the caller, and
    ``cert`` keeps the isometric-circle data that justified it.
    """

    name: str
    gens: list
    free: bool = False
    cert: "PingPongCert | None" = None

    def __post_init__(self):
        self.gens = [sl2_normalize(g) for g in self.gens]


def symmetric_generators(group):
    """Generators and inverses as (matrix, letter) pairs; letters are
    1..k for the generators and -1..-k for the inverses."""
    out = []
    for i, g in enumerate(group.gens):
        inv = np.array([[g[1, 1], -g[0, 1]], [-g[1, 0], g[0, 0]]])
        out.append((g, i + 1))
        out.append((sl2_normalize(inv), -(i + 1)))
    return out


def frame_norm(m):
    """Operator norm of the induced action, sigma_max(m)^2; equals
    e^{d(i, m i)} for det-1 matrices."""
    s = np.linalg.svd(m, compute_uv=False)
    return float(s[0] ** 2)


@dataclass
class WordBall:
    """Norm ball in a Fuchsian group: dedup'd matrices sorted by norm,
    identity first, with the word-length parity of first discovery."""

    mats: np.ndarray
    norms: np.ndarray
    parity: np.ndarray

    def __len__(self):
        return self.mats.shape[0]


def _ball_key(m):
    flat = np.round(m.reshape(-1), 9)
    for x in flat:
        if abs(x) > 1e-9:
            if x < 0.0:
                flat = -flat
            break
    return (flat + 0.0).tobytes()


def word_ball(group, radius, cap=200_000, slack=4.0):
    """Breadth-first norm ball, mirroring the integral-group enumeration
    but with rounded-key dedup (adequate here: the test groups are either
    integral or have exponentially separated elements)."""
    if radius < 1.0:
        raise ValueError("radius must be at least 1")
    gens = symmetric_generators(group)
    eye = np.eye(2)
    seen = {_ball_key(eye): 0}
    mats = [eye]
    norms = [1.0]
    parity = [0]
    frontier = [0]
    bound = radius * slack
    while frontier:
        new = []
        for idx in frontier:
            base = mats[idx]
            for g, _ in gens:
                cand = sl2_normalize(base @ g)
                key = _ball_key(cand)
                if key in seen:
                    continue
                nrm = frame_norm(cand)
                if nrm > bound:
                    continue
                seen[key] = len(mats)
                mats.append(cand)
                norms.append(nrm)
                parity.append(parity[idx] ^ 1)
                new.append(len(mats) - 1)
                if len(mats) > cap:
                    raise BudgetExceeded(f"word ball exceeded {cap} elements")
        frontier = new
    mats = np.array(mats)
    norms = np.array(norms)
    parity = np.array(parity, dtype=np.uint8)
    keep = norms <= radius * (1.0 + 1e-12)
    mats, norms, parity = mats[keep], norms[keep], parity[keep]
    order = np.lexsort((np.arange(len(norms)), np.round(norms, 9)))
    mats, norms, parity = mats[order], norms[order], parity[order]
    # pin the identity to index 0; torsion elements share its norm
    idx0 = None
    for i in range(len(norms)):
        if norms[i] > 1.0 + 1e-9:
            break
        m = mats[i]
        if abs(m[0, 1]) < 1e-9 and abs(m[1, 0]) < 1e-9 and abs(m[0, 0] - 1.0) < 1e-9:
            idx0 = i
            break
    if idx0 is None:
        raise AssertionError("identity lost during enumeration")
    if idx0 != 0:
        perm = list(range(len(norms)))
        perm.insert(0, perm.pop(idx0))
        mats, norms, parity = mats[perm], norms[perm], parity[perm]
    return WordBall(mats, norms, parity)


def even_subgroup_elements(ball):
    """Elements of even word length.  When every generator maps to the
    nontrivial class of a parity morphism (all defining relations even),
    these are exactly the index-2 subgroup's elements in the ball."""
    keep = ball.parity == 0
    return ball.mats[keep]


def reduced_words(group, length):
    """All nonempty freely reduced words up to the given length, as
    (matrix, word) pairs.  Only meaningful for certified-free groups,
    where distinct reduced words give distinct elements."""
    gens = symmetric_generators(group)
    out = []
    frontier = [(np.eye(2), ())]
    for _ in range(length):
        nxt = []
        for mat, word in frontier:
            for g, letter in gens:
                if word and word[-1] == -letter:
                    continue
                nxt.append((sl2_normalize(mat @ g), word + (letter,)))
        out.extend(nxt)
        frontier = nxt
    return out


def orbit_points(mats, p=ORIGIN):
    """Images of a base point under a stack of matrices."""
    a = mats[..., 0, 0]
    b = mats[..., 0, 1]
    c = mats[..., 1, 0]
    d = mats[..., 1, 1]
    return (a * p + b) / (c * p + d)


# ---------------------------------------------------------------------------
# isometric circles and ping-pong certification


def isometric_circle(m):
    """Center and radius of {|cz + d| = 1}; None when the map fixes INF.

    The map sends the exterior of its isometric circle onto the interior
    of the inverse's circle, which is what the certificate leans on.
    """
    c, d = m[1, 0], m[1, 1]
    if abs(c) < 1e-12:
        return None
    return (-d / c, 1.0 / abs(c))


TWO_PI = 2.0 * math.pi


def boundary_angle(x):
    """Circle coordinate of a boundary point: the argument of its Cayley
    image, in [0, 2pi).  Increases with x and wraps through 0 at INF."""
    if x == INF:
        return 0.0
    w = (x - 1j) / (x + 1j)
    return math.atan2(w.imag, w.real) % TWO_PI


def angle_point(theta):
    """Inverse of ``boundary_angle``: -cot(theta/2), with INF at 0."""
    theta = theta % TWO_PI
    if theta < 1e-14 or TWO_PI - theta < 1e-14:
        return INF
    return -1.0 / math.tan(theta / 2.0)


def _arc_len(s, e):
    return (e - s) % TWO_PI


def _in_arc(theta, s, e, tol=1e-9):
    off = (theta - s) % TWO_PI
    if off > TWO_PI - tol:
        off -= TWO_PI
    return -tol <= off <= _arc_len(s, e) + tol


def _arc_subset(inner, outer, tol=1e-7):
    s_off = (inner[0] - outer[0]) % TWO_PI
    if s_off > TWO_PI - tol:
        s_off -= TWO_PI
    e_off = s_off + _arc_len(inner[0], inner[1])
    return -tol <= s_off and e_off <= _arc_len(outer[0], outer[1]) + tol


def _arc_gap(a, b):
    """Signed angular gap between two ccw arcs: positive when disjoint
    (the smaller of the two separating arcs), nonpositive on overlap."""
    g1 = (b[0] - a[0]) % TWO_PI - _arc_len(a[0], a[1])
    g2 = (a[0] - b[0]) % TWO_PI - _arc_len(b[0], b[1])
    return min(g1, g2)


@dataclass
class PingPongCert:
    """Witness for freeness: one boundary arc per letter (generator or
    inverse), pairwise disjoint except for the forced tangency of a
    parabolic's own pair at its fixed point, such that every letter maps
    the complement of its inverse's arc into its own arc.  Any reduced
    word then moves a point chosen in a gap, so the group is free and
    acts discretely."""

    arcs: list  # (start, end, letter), ccw angles from boundary_angle
    min_gap: float  # angular
    tangent_letters: tuple = ()


def _target_arc(m):
    """The arc where words beginning with this element accumulate: the
    isometric disk of its inverse, or the far half-axis for a translation."""
    a, b, c, d = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
    if abs(c) > 1e-12:
        center, radius = isometric_circle(np.array([[d, -b], [-c, a]]))
        return (boundary_angle(center - radius), boundary_angle(center + radius))
    if abs(a - 1.0) > 1e-9:
        raise NotCertified("affine non-parabolic generators are not supported")
    t = b
    if t > 0:
        return (boundary_angle(t / 2.0), 0.0)
    return (0.0, boundary_angle(t / 2.0))


def ping_pong_certificate(group, tol=1e-9):
    """Certify that the generators play ping-pong on boundary arcs.

    Each letter gets its natural target arc; the certificate checks the
    defining mapping property directly (image of the complement of the
    inverse's arc lands inside the letter's arc) plus pairwise
    disjointness, and only then marks the group free.
    """
    letters = symmetric_generators(group)
    arcs = {}
    for m, letter in letters:
        arcs[letter] = _target_arc(m)
    # mapping property: g(complement of A_{g^-1}) inside A_g; Mobius maps
    # preserve the circle's orientation, so the image arc runs ccw from
    # the image of the complement's start
    for m, letter in letters:
        comp = (arcs[-letter][1], arcs[-letter][0])
        img = (boundary_angle(mobius(m, angle_point(comp[0]))),
               boundary_angle(mobius(m, angle_point(comp[1]))))
        if not _arc_subset(img, arcs[letter]):
            raise NotCertified(f"letter {letter} does not contract into its arc")
    items = sorted(arcs.items())
    min_gap = INF
    tangents = []
    for i in range(len(items)):
        for j in range(i + 1, len(items)):
            li, ai = items[i]
            lj, aj = items[j]
            gap = _arc_gap(ai, aj)
            if gap > tol:
                min_gap = min(min_gap, gap)
                continue
            if gap < -tol:
                raise NotCertified(
                    f"arcs of letters {li} and {lj} overlap by {-gap:.3g}")
            # tangency is only legitimate between a parabolic's own pair,
            # and the touching point must be its fixed point
            if li != -lj:
                raise NotCertified(f"arcs of letters {li} and {lj} touch")
            gen = group.gens[abs(li) - 1]
            if element_type(gen) != "parabolic":
                raise NotCertified(f"non-parabolic letters {li},{lj} touch")
            fp = boundary_angle(fixed_points(gen)[0])
            g1 = (aj[0] - ai[0]) % TWO_PI - _arc_len(ai[0], ai[1])
            touch = (ai[1], aj[0]) if abs(g1) <= abs(gap) + tol else (aj[1], ai[0])
            if any(min((fp - a) % TWO_PI, (a - fp) % TWO_PI) > 1e-6 for a in touch):
                raise NotCertified(
                    f"letters {li},{lj} touch away from the fixed point")
            tangents.append(abs(li))
    cert = PingPongCert([(s, e, l) for l, (s, e) in items],
                        min_gap, tuple(sorted(set(tangents))))
    group.free = True
    group.cert = cert
    return cert


def hyperbolic_with_axis(p, q, length):
    """The hyperbolic with repelling point p, attracting point q (reals,
    p != q) and the given translation length."""
    lam = math.exp(length / 2.0)
    m = np.array([[q, p], [1.0, 1.0]]) / math.sqrt(abs(q - p))
    d = np.array([[lam, 0.0], [0.0, 1.0 / lam]])
    adj = np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]])
    # for q < p the adjugate is minus the inverse; the sign washes out here
    return sl2_normalize(m @ d @ adj)


def schottky_pair(stretch=4.0):
    """Two hyperbolics with disjoint axes (-2, -1) and (1, 2), both of
    translation length 2*log(stretch), certified free by ping-pong.
    At the default stretch the four isometric disks sit around the four
    fixed points with gaps of about 0.6."""
    length = 2.0 * math.log(stretch)
    a = hyperbolic_with_axis(-2.0, -1.0, length)
    b = hyperbolic_with_axis(1.0, 2.0, length)
    group = FuchsianGroup(f"schottky{stretch:g}", [a, b])
    ping_pong_certificate(group)
    return group


def parabolic_pair(shift=4.0):
    """Two parabolics fixing INF and 0 with integer translation data;
    for shift 4 the quotient is an infinite-area surface with two cusps
    and critical exponent strictly between 1/2 and 1."""
    p = np.array([[1.0, shift], [0.0, 1.0]])
    q = np.array([[1.0, 0.0], [shift, 1.0]])
    group = FuchsianGroup(f"cusped{shift:g}", [p, q])
    ping_pong_certificate(group)
    return group


# ---------------------------------------------------------------------------
# limit sets


def limit_set_cover(group, depth=3):
    """Nested arc cover of the limit set, as (start, end, letter) circle
    arcs in ``boundary_angle`` coordinates.

    Depth-1 cylinders are the certificate arcs themselves; deeper ones are
    images of shallower cylinders under non-cancelling letters.  Mobius
    maps are circle homeomorphisms, so arcs map to arcs with no pole
    bookkeeping.  Total length shrinks geometrically for a free group.
    """
    if group.cert is None:
        ping_pong_certificate(group)
    elems = {letter: m for m, letter in symmetric_generators(group)}
    cover = list(group.cert.arcs)
    for _ in range(depth - 1):
        nxt = []
        for letter, m in elems.items():
            for s, e, tag in cover:
                if tag == -letter:
                    continue
                img_s = boundary_angle(mobius(m, angle_point(s)))
                img_e = boundary_angle(mobius(m, angle_point(e)))
                nxt.append((img_s, img_e, letter))
        cover = nxt
    return cover


def cover_length(cover):
    return sum(_arc_len(s, e) for s, e, *_ in cover)


def cover_contains(cover, x, tol=1e-9):
    """Whether a boundary point lies in one of the cover's arcs."""
    theta = boundary_angle(x)
    return any(_in_arc(theta, s, e, tol) for s, e, *_ in cover)


def limit_points(group, rng, n, word_length=12):
    """Sample boundary points of the limit set as attracting fixed points
    of long random reduced words (resampling the rare non-hyperbolics)."""
    gens = symmetric_generators(group)
    out = []
    guard = 0
    while len(out) < n:
        guard += 1
        if guard > 20 * n + 100:
            raise BudgetExceeded("limit point sampling kept hitting non-hyperbolics")
        mat = np.eye(2)
        last = 0
        for _ in range(word_length):
            while True:
                g, letter = gens[rng.integers(len(gens))]
                if letter != -last:
                    break
            # no per-step renormalization: entries of long words get large
            # enough that recomputing det loses all precision to cancellation
            mat = mat @ g
            last = letter
        if element_type(mat) != "hyperbolic":
            continue
        out.append(fixed_points(mat)[0])
    return np.array(out)


def merge_intervals(intervals):
    ivs = sorted((float(lo), float(hi)) for lo, hi in intervals)
    out = []
    for lo, hi in ivs:
        if out and lo <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], hi))
        else:
            out.append((lo, hi))
    return out


def merge_arcs(arcs):
    """Union of ccw circle arcs as a disjoint sorted list; None when the
    union is the whole circle.  Implemented by cutting at angle 0 and
    merging on the line, then re-joining a wrap across 0."""
    pieces = []
    for s, e, *_ in arcs:
        ln = _arc_len(s, e)
        if s + ln <= TWO_PI:
            pieces.append((s, s + ln))
        else:
            pieces.append((s, TWO_PI))
            pieces.append((0.0, s + ln - TWO_PI))
    merged = merge_intervals(pieces)
    if merged == [(0.0, TWO_PI)]:
        return None
    if len(merged) > 1 and merged[0][0] <= 0.0 and merged[-1][1] >= TWO_PI:
        merged = [(merged[-1][0], merged[0][1] + TWO_PI)] + merged[1:-1]
    return [(s % TWO_PI, e % TWO_PI) for s, e in merged]


def dist_to_hull(z, cover):
    """Distance from an interior point to the convex hull of a boundary
    set given by an arc cover (0 inside the hull).

    The hull is cut out by the geodesics over the complementary gaps; the
    distance is the largest signed distance past a gap geodesic, exact
    whenever the nearest hull point is not a corner.  The hull side of
    each gap geodesic is recognized by a probe point pushed toward the
    midpoint of the largest covered arc.
    """
    merged = merge_arcs(cover)
    if merged is None:
        return 0.0
    gaps = []
    for (s0, e0), (s1, _) in zip(merged, merged[1:] + merged[:1]):
        if _arc_len(e0, s1) > 1e-12:
            gaps.append((e0, s1))
    if not gaps:
        return 0.0
    widest = max(merged, key=lambda a: _arc_len(a[0], a[1]))
    theta_ref = (widest[0] + 0.5 * _arc_len(widest[0], widest[1])) % TWO_PI
    zref = from_disk(0.9999 * cmath.exp(1j * theta_ref))
    best = 0.0
    for gs, ge in gaps:
        xa, xb = angle_point(gs), angle_point(ge)
        side = signed_dist_to_geodesic(zref, xa, xb)
        val = signed_dist_to_geodesic(z, xa, xb)
        # positive exactly when z sits across the gap from the hull
        best = max(best, -val if side > 0.0 else val)
    return best
