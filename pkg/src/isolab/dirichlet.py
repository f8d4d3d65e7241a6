"""Dirichlet fundamental polygons for plane hyperbolic groups.

The construction runs in the Klein model recentered at the chosen point:
there the set of points nearer the center than a given orbit point is a
Euclidean half-plane, so the domain is an ordinary convex polygon clip.
Bisector chords that converge on the unit circle pinch off ideal vertices;
chords that fail to meet near the circle leave free boundary (infinite
area).  Side pairings, vertex cycles, the orbifold signature, and a
Gauss-Bonnet consistency check all come out of the same polygon.
"""

import cmath
import math
from dataclasses import dataclass

import numpy as np

from . import fuchsian as fh
from .errors import BallTooSmall, InfiniteArea

CUSP_DISPLACEMENT = 1.0  # horocycle truncation level: where the cusp
                         # holonomy moves points by exactly this distance

# Initial polygon: a regular 64-gon whose edges are tangent to the unit
# circle.  Starting from a tangent polygon instead of a big square keeps
# spurious corner regions (outside the disk, cut by no bisector) from
# surviving the clip with junk geometry attached.
_HORIZON_N = 64
_HORIZON = [cmath.rect(1.0 / math.cos(math.pi / _HORIZON_N),
                       (2 * k + 1) * math.pi / _HORIZON_N)
            for k in range(_HORIZON_N)]


# ---------------------------------------------------------------------------
# model plumbing


def _to_poincare(z, p):
    return (z - p) / (z - p.conjugate())


def _poincare_to_klein(w):
    return 2.0 * w / (1.0 + abs(w) ** 2)


def _klein_to_poincare(k):
    return k / (1.0 + math.sqrt(max(0.0, 1.0 - abs(k) ** 2)))


def _klein_to_uhp(k, p):
    return fh.from_disk(_klein_to_poincare(k), p)


def _klein_angle(v, d1, d2):
    """Hyperbolic angle at the Klein point v between chord directions."""
    s = 1.0 - abs(v) ** 2

    def g(u, w):
        uw = u.real * w.real + u.imag * w.imag
        uv = u.real * v.real + u.imag * v.imag
        wv = w.real * v.real + w.imag * v.imag
        return uw / s + uv * wv / (s * s)

    c = g(d1, d2) / math.sqrt(g(d1, d1) * g(d2, d2))
    return math.acos(min(1.0, max(-1.0, c)))


# ---------------------------------------------------------------------------
# convex clipping with edge provenance


def _clip(verts, labels, u, c, new_label, tol=1e-12):
    """Cut the polygon by the half-plane {k . u <= c}.

    Edge i runs verts[i] -> verts[i+1] and carries labels[i]; the fresh
    chord inherits new_label.  A convex polygon crosses the line at most
    twice, which is what keeps the provenance bookkeeping this simple.
    """
    n = len(verts)
    vals = [v.real * u.real + v.imag * u.imag - c for v in verts]
    out_v, out_l = [], []
    for i in range(n):
        j = (i + 1) % n
        fi, fj = vals[i], vals[j]
        if fi <= tol:
            out_v.append(verts[i])
            out_l.append(labels[i])
            if fj > tol:
                t = fi / (fi - fj)
                out_v.append(verts[i] + t * (verts[j] - verts[i]))
                out_l.append(new_label)
        elif fj <= tol:
            t = fi / (fi - fj)
            out_v.append(verts[i] + t * (verts[j] - verts[i]))
            out_l.append(labels[i])
    return out_v, out_l


def _dedupe(verts, labels, tol=1e-10):
    """Drop zero-length edges; the degenerate edge's label goes with it."""
    n = len(verts)
    out_v, out_l = [], []
    for i in range(n):
        if abs(verts[i] - verts[(i + 1) % n]) < tol:
            continue
        out_v.append(verts[i])
        out_l.append(labels[i])
    return out_v, out_l


def _line_intersection(u1, c1, u2, c2):
    det = u1.real * u2.imag - u1.imag * u2.real
    if abs(det) < 1e-12:
        return None
    x = (c1 * u2.imag - c2 * u1.imag) / det
    y = (u1.real * c2 - u2.real * c1) / det
    return complex(x, y)


# ---------------------------------------------------------------------------
# the domain object


@dataclass
class DirichletDomain:
    """Convex geodesic fundamental polygon with identification data.

    Vertices are Klein coordinates (recentered at ``center``); ideal ones
    sit on the unit circle.  ``pair_perm[i]`` is the edge index carried
    onto edge i's chord by the pairing, and ``cycles`` holds tuples of
    (vertex indices, angle sum, cone order) with order 0 marking a cusp.
    """

    center: complex
    verts: list
    labels: list          # per edge: index into the cut list, -1 horizon
    mats: list            # pairing matrix per edge (cut matrices if free)
    ideal: list
    pair_perm: list
    cycles: list
    angles: list
    area: float
    genus: int
    cusp_count: int
    cone_orders: list
    diameter: float
    free_sides: bool = False

    def uhp_vertices(self):
        out = []
        for k, v in enumerate(self.verts):
            out.append(None if self.ideal[k] else _klein_to_uhp(v, self.center))
        return out


def dirichlet_domain(mats, center, allow_free=False):
    """Dirichlet polygon of the group elements around the given center.

    ``mats`` should be an inverse-closed norm ball of a discrete subgroup
    of PSL(2, R); the identity is tolerated and skipped.  The result is
    the true fundamental domain once the ball realizes every side, which
    the pairing closure verifies.  Raises InfiniteArea when free boundary
    remains, unless ``allow_free`` (the caller can then clip to a core).
    """
    p = complex(center)
    if p.imag <= 0:
        raise ValueError("center must be an interior point")
    cuts = []
    for m in np.asarray(mats, dtype=float):
        if abs(m[0, 1]) < 1e-12 and abs(m[1, 0]) < 1e-12 \
                and abs(abs(m[0, 0]) - 1.0) < 1e-12:
            continue
        z = fh.mobius(m, p)
        d = fh.dist(p, z)
        if d < 1e-9:
            raise ValueError("center is fixed by a group element; nudge it")
        w = _to_poincare(z, p)
        cuts.append((d, w / abs(w), math.tanh(d / 2.0), m))
    cuts.sort(key=lambda t: t[0])

    verts = list(_HORIZON)
    labels = [-1] * _HORIZON_N
    for idx, (d, u, c, m) in enumerate(cuts):
        verts, labels = _clip(verts, labels, u, c, idx)
    verts, labels = _dedupe(verts, labels)

    # Resolve runs of horizon edges.  The bisector chords on either side
    # of a run either pinch off an ideal vertex on the circle (their lines
    # meet at |x| = 1, so the run is replaced by that point) or genuinely
    # fail to meet near the circle, leaving a free side.  Pinches are all
    # resolved before any run is declared free, since a cusped polygon can
    # carry both kinds at once.
    free = False
    for _ in range(2 * _HORIZON_N + 16):
        if -1 not in labels:
            break
        if all(l == -1 for l in labels):
            free = True
            break
        n = len(verts)
        pinch = None
        for s in range(n):
            if labels[s] == -1 or labels[(s + 1) % n] != -1:
                continue
            j = (s + 1) % n
            while labels[(j + 1) % n] == -1:
                j = (j + 1) % n
            _, ua, ca, _ = cuts[labels[s]]
            _, ub, cb, _ = cuts[labels[(j + 1) % n]]
            x = _line_intersection(ua, ca, ub, cb)
            if x is not None and abs(x) <= 1.0 + 2e-6:
                if abs(x) < 1.0 - 1e-6:
                    raise AssertionError("pinch point strictly inside the disk")
                pinch = (s, j, x)
                break
        if pinch is None:
            free = True
            break
        prev_e, last, x = pinch
        next_e = (last + 1) % n
        new_v, new_l = [], []
        k = next_e
        while True:
            new_v.append(verts[k])
            new_l.append(labels[k])
            if k == prev_e:
                break
            k = (k + 1) % n
        new_v.append(x)               # edge x -> verts[next_e] lies on
        new_l.append(labels[next_e])  # chord b, closing with b's label
        verts, labels = _dedupe(new_v, new_l)
    else:
        raise AssertionError("horizon resolution did not terminate")

    if free:
        if not allow_free:
            raise InfiniteArea("the polygon has free boundary sides")
        kept = [c[3] for c in cuts]
        return DirichletDomain(p, verts, labels, kept, [], [], [], [],
                               math.inf, -1, -1, [], math.inf, True)

    kept = [c[3] for c in cuts]
    return _finish_domain(p, verts, labels, [kept[l] for l in labels])


def _finish_domain(p, verts, labels, mats):
    n = len(verts)
    ideal = [abs(v) >= 1.0 - 1e-6 for v in verts]

    # split self-paired sides at the fixed point of their involution, so
    # that every side pairs with a side other than itself
    out_v, out_l, out_m, out_i = [], [], [], []
    for i in range(n):
        out_v.append(verts[i])
        out_l.append(labels[i])
        out_m.append(mats[i])
        out_i.append(ideal[i])
        m = mats[i]
        if fh.element_type(m) != "elliptic":
            continue
        if fh.element_type(fh.sl2_normalize(m @ m)) != "identity":
            continue
        kf = _poincare_to_klein(_to_poincare(fh.fixed_points(m), p))
        a, b = verts[i], verts[(i + 1) % n]
        t = ((kf - a).real * (b - a).real + (kf - a).imag * (b - a).imag) \
            / abs(b - a) ** 2
        if 1e-7 < t < 1.0 - 1e-7 and abs(a + t * (b - a) - kf) < 1e-7:
            out_v.append(kf)
            out_l.append(labels[i])
            out_m.append(m)
            out_i.append(False)
    verts, labels, mats, ideal = out_v, out_l, out_m, out_i
    n = len(verts)

    # side pairing: mats[i]^{-1} carries edge i onto its partner with the
    # from-end landing on the to-end (pairings reverse the induced
    # boundary orientation)
    pair_perm = [-1] * n
    for i in range(n):
        m = mats[i]
        minv = np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]])
        for j in range(n):
            if _same_mat(minv, mats[j]) and _edge_matches(verts, ideal, p, m, i, j):
                pair_perm[i] = j
                break
        if pair_perm[i] < 0:
            raise BallTooSmall("side pairing is not closed; enlarge the ball")

    angles = [0.0] * n
    for i in range(n):
        if ideal[i]:
            continue
        d1 = verts[(i - 1) % n] - verts[i]
        d2 = verts[(i + 1) % n] - verts[i]
        angles[i] = _klein_angle(verts[i], d1, d2)

    # vertex cycles: the from-end of edge i maps to the to-end of its
    # partner, so the cycle permutation is i -> pair_perm[i] + 1
    visited = [False] * n
    cycles = []
    for start in range(n):
        if visited[start]:
            continue
        cyc = []
        i = start
        while not visited[i]:
            visited[i] = True
            cyc.append(i)
            i = (pair_perm[i] + 1) % n
        total = sum(angles[k] for k in cyc)
        kinds = {ideal[k] for k in cyc}
        if kinds == {True}:
            cycles.append((tuple(cyc), 0.0, 0))
        elif kinds == {False}:
            order = round(2.0 * math.pi / total)
            if order < 1 or abs(2.0 * math.pi / total - order) > 1e-4 * order:
                raise BallTooSmall(
                    "vertex cycle angle sum is not of cone type; "
                    "enlarge the ball or move the center")
            cycles.append((tuple(cyc), total, order))
        else:
            raise AssertionError("a vertex cycle mixes ideal and finite vertices")

    area = (n - 2) * math.pi - sum(angles)
    cusp_count = sum(1 for _, _, o in cycles if o == 0)
    cone_orders = sorted(o for _, _, o in cycles if o >= 2)
    if n % 2:
        raise AssertionError("odd side count after involution splits")
    chi = len(cycles) - n // 2 + 1
    if chi % 2:
        raise AssertionError("odd Euler characteristic; identification broken")
    genus = (2 - chi) // 2
    gb = 2.0 * math.pi * (2 * genus - 2 + cusp_count
                          + sum(1.0 - 1.0 / o for o in cone_orders))
    if genus < 0 or abs(area - gb) > 1e-6:
        raise AssertionError(
            f"angle-sum area {area:.9f} disagrees with signature area {gb:.9f}")

    diameter = _truncated_diameter(p, verts, ideal, mats, pair_perm, cycles)
    return DirichletDomain(p, verts, labels, mats, ideal, pair_perm, cycles,
                           angles, area, genus, cusp_count, cone_orders,
                           diameter)


def _same_mat(a, b, tol=1e-9):
    return bool(np.all(np.abs(a - b) < tol) or np.all(np.abs(a + b) < tol))


def _edge_matches(verts, ideal, p, m, i, j, tol=1e-7):
    """Does mats[i]^{-1} carry the from-end of edge i to the to-end of
    edge j?  Enough to pin the partner once the matrices agree."""
    if i == j:
        return False
    n = len(verts)
    minv = np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]])
    if ideal[i]:
        img = _boundary_image(minv, verts[i], p)
    else:
        z = fh.mobius(minv, _klein_to_uhp(verts[i], p))
        img = _poincare_to_klein(_to_poincare(z, p))
    return abs(img - verts[(j + 1) % n]) < tol


def _boundary_image(m, k, p):
    """Image of a circle point of the recentered Klein disk under a group
    element, staying on the circle.  The point k = 1 is the image of
    infinity under the recentering, so it gets its own branch."""
    k = k / abs(k)
    if abs(k - 1.0) < 1e-9:
        x = fh.INF
    else:
        x = fh.from_disk(k, p)
    y = fh.mobius(m, x)
    if y == fh.INF:
        return complex(1.0)
    return _to_poincare(y, p)


def _truncated_diameter(p, verts, ideal, mats, pair_perm, cycles):
    """Diameter of the polygon truncated at displacement-1 horocycles.

    The distance function on a convex geodesic polygon peaks at extreme
    points, so finite vertices plus the truncation points on the sides
    into each ideal vertex suffice.
    """
    n = len(verts)
    pts = [_klein_to_uhp(verts[i], p) for i in range(n) if not ideal[i]]
    for cyc, _, order in cycles:
        if order != 0:
            continue
        for i in cyc:
            hol = _cusp_holonomy(mats, pair_perm, i, n)
            for nb in ((i - 1) % n, (i + 1) % n):
                pts.append(_horocycle_point(p, verts[nb], verts[i], hol,
                                            ideal[nb]))
    best = 0.0
    for a in range(len(pts)):
        for b in range(a + 1, len(pts)):
            best = max(best, fh.dist(pts[a], pts[b]))
    return best


def _cusp_holonomy(mats, pair_perm, start, n):
    """Composition of side pairings around a vertex cycle; for an ideal
    cycle this is a parabolic fixing the vertex's boundary point."""
    total = np.eye(2)
    i = start
    while True:
        m = mats[i]
        total = np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]]) @ total
        i = (pair_perm[i] + 1) % n
        if i == start:
            break
    total = fh.sl2_normalize(total)
    if fh.element_type(total) != "parabolic":
        raise AssertionError("cusp cycle holonomy is not parabolic")
    return total


def _horocycle_point(p, k_from, k_ideal, hol, from_ideal):
    """Point on the edge into an ideal vertex where the cusp holonomy
    displacement crosses CUSP_DISPLACEMENT, by bisection along the chord.

    Displacement decreases monotonically toward the fixed point, since it
    is a monotone function of the Busemann value there."""
    lo = 1e-9 if from_ideal else 0.0
    hi = 1.0 - 1e-12

    def at(t):
        return _klein_to_uhp(k_from + t * (k_ideal - k_from), p)

    if fh.parabolic_displacement(hol, at(lo)) <= CUSP_DISPLACEMENT:
        return at(lo)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if fh.parabolic_displacement(hol, at(mid)) > CUSP_DISPLACEMENT:
            lo = mid
        else:
            hi = mid
    return at(0.5 * (lo + hi))


# ---------------------------------------------------------------------------
# convex core clipping for free-boundary groups


def core_polygon_area(dom, cover):
    """Area of the domain clipped to the convex hull of the limit set,
    described by an arc cover of the boundary circle.

    An over-approximation of the true core area, since the cover
    over-approximates the limit set; refining the cover tightens it.
    """
    if not dom.free_sides:
        return dom.area
    merged = fh.merge_arcs(cover)
    if merged is None:
        raise ValueError("cover spans the whole circle; nothing to clip")
    p = dom.center
    widest = max(merged, key=lambda a: (a[1] - a[0]) % fh.TWO_PI)
    theta_ref = (widest[0] + 0.5 * ((widest[1] - widest[0]) % fh.TWO_PI)) \
        % fh.TWO_PI
    ref = _to_poincare(fh.from_disk(0.9999 * cmath.exp(1j * theta_ref)), p)

    verts, labels = list(dom.verts), list(dom.labels)
    for (s0, e0), (s1, _) in zip(merged, merged[1:] + merged[:1]):
        if (s1 - e0) % fh.TWO_PI <= 1e-12:
            continue
        wa = _to_poincare(_finite_boundary(e0), p)
        wb = _to_poincare(_finite_boundary(s1), p)
        wa, wb = wa / abs(wa), wb / abs(wb)
        nvec = (wb - wa) * 1j
        c = nvec.real * wa.real + nvec.imag * wa.imag
        if nvec.real * ref.real + nvec.imag * ref.imag > c:
            nvec, c = -nvec, -c
        verts, labels = _clip(verts, labels, nvec, c, -2)
        if not verts:
            return 0.0
    verts, labels = _dedupe(verts, labels)
    if any(l == -1 for l in labels):
        raise AssertionError(
            "free boundary survived the hull clip; refine the cover")
    n = len(verts)
    total = 0.0
    for i in range(n):
        if abs(verts[i]) >= 1.0 - 1e-6:
            continue
        d1 = verts[(i - 1) % n] - verts[i]
        d2 = verts[(i + 1) % n] - verts[i]
        total += _klein_angle(verts[i], d1, d2)
    return (n - 2) * math.pi - total


def _finite_boundary(theta):
    x = fh.angle_point(theta)
    if x == fh.INF:
        # nudge an exactly-infinite gap endpoint; the hull chord barely moves
        x = fh.angle_point(theta + 1e-9)
    return x
