"""Closed plane orbits: stabilizers, surface invariants, sheet enumeration.

A geodesic plane in the quotient corresponds to a space-like vector w on
the quadric Q = 1, up to the lattice action and sign.  The stabilizer of
w inside the lattice conjugates (by any frame g0 carrying e3 to w) into
the real subgroup, where the fuchsian and dirichlet modules take over:
the quotient surface, its area, signature and truncated diameter all
come from the Dirichlet polygon of the conjugated stabilizer.

Integral vectors are carried exactly.  In the Bianchi model a vector is
a Gaussian-integer Hermitian matrix [[p, q+ri], [q-ri, s]] stored as
(p, q, r, s), with Q = q^2 + r^2 - ps; in the diagonal-form model it is
an integer row in the form basis.  Stabilizer membership, orbit
reduction and class grouping all run in integer arithmetic, so two
vectors are merged only when an actual group element carries one to the
other.

Transversal sheet vectors near a point y live in the imaginary part of
the Lie algebra: v with y exp(v) on the plane orbit and 0 < |v| below
the norm window.  enumerate_sheets finds them by pushing every ball
element through the chart around e3 and solving for the exact
displacement with a Newton iteration.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import fuchsian as fh
from . import lattices as lat
from . import quadform as qf
from .dirichlet import DirichletDomain, dirichlet_domain
from .errors import (
    BallTooSmall,
    ElementaryStabilizer,
    IncompleteOrbitReduction,
    InfiniteArea,
    NoConvergence,
    UnsupportedMode,
)

# Chart admissibility around e3; vectors farther out cannot contribute a
# sheet in any window the experiments use.
CHART_WINDOW = 0.2

# Membership residual classification.  Below MEMBER_TOL a candidate is a
# sheet; inside the guard band the product is recomputed in extended
# precision before deciding; a residual still inside the band afterwards
# is refused rather than guessed.
MEMBER_TOL = 1e-8
GUARD_TOP = 1e-4
DEDUP_TOL = 1e-9

# Hyperbolic area of the smallest 2-orbifold, used as a sanity floor.
MIN_ORBIFOLD_AREA = math.pi / 21.0

_CENTER_TRIES = (1j, 0.05 + 1.03j, 0.11 + 0.93j, 0.23 + 1.17j, 0.37 + 0.81j)


# ---------------------------------------------------------------------------
# integral vectors


@dataclass(frozen=True)
class PlaneVector:
    """Primitive integral space-like vector in one model's lattice.

    kind "zi" stores Hermitian entries (p, q, r, s); kind "fint" stores a
    row in the diagonal-form basis.  qvalue is the integer Q-value.
    """

    kind: str
    ints: tuple
    qvalue: int


def plane_vector(L: lat.LatticeModel, ints) -> PlaneVector:
    ints = tuple(int(x) for x in ints)
    if len(ints) != 4:
        raise ValueError("expected four integers")
    if math.gcd(*ints) != 1:
        raise ValueError("vector must be primitive")
    kind = "zi" if L.mode == "finite-covolume" else "fint"
    if kind == "zi":
        p, q, r, s = ints
        qv = q * q + r * r - p * s
    else:
        d = L.form_d
        qv = ints[0] ** 2 + ints[1] ** 2 + ints[2] ** 2 - d * ints[3] ** 2
    if qv <= 0:
        raise ValueError(f"vector is not space-like (Q = {qv})")
    return PlaneVector(kind=kind, ints=_canonical_ints(ints), qvalue=qv)


def _canonical_ints(ints):
    """Sign representative: first nonzero entry positive (w and -w give
    the same plane)."""
    for x in ints:
        if x != 0:
            return tuple(-v for v in ints) if x < 0 else tuple(ints)
    return tuple(ints)


def embed_vector(L: lat.LatticeModel, pv: PlaneVector) -> np.ndarray:
    """Float 4-vector in Q-coordinates, with q_value equal to qvalue."""
    if pv.kind == "zi":
        p, q, r, s = pv.ints
        x = np.array([[p, q + 1j * r], [q - 1j * r, s]], dtype=complex)
        return qf.vec_from_herm(x)
    return np.asarray(pv.ints, dtype=float) @ L.conjugator


# exact right action on integral vectors

def _zi_conj_t(m):
    out = np.swapaxes(m, 0, 1).copy()
    out[..., 1] = -out[..., 1]
    return out


def _act_zi(ints, exact):
    """(p,q,r,s) under gamma* X gamma, in Gaussian-integer arithmetic."""
    p, q, r, s = ints
    x = np.zeros((2, 2, 2), dtype=np.int64)
    x[0, 0, 0] = p
    x[0, 1] = (q, r)
    x[1, 0] = (q, -r)
    x[1, 1, 0] = s
    y = qf.zi_mul(qf.zi_mul(_zi_conj_t(exact), x), exact)
    return (int(y[0, 0, 0]), int(y[0, 1, 0]), int(y[0, 1, 1]), int(y[1, 1, 0]))


def _act_fint(ints, exact):
    out = np.asarray(ints, dtype=np.int64) @ exact
    return tuple(int(v) for v in out)


def act_vector(pv: PlaneVector, exact) -> PlaneVector:
    """Image of an integral vector under one exact group element."""
    ints = _act_zi(pv.ints, exact) if pv.kind == "zi" else _act_fint(pv.ints, exact)
    return PlaneVector(kind=pv.kind, ints=_canonical_ints(ints), qvalue=pv.qvalue)


def _fixes(pv: PlaneVector, exact) -> bool:
    ints = _act_zi(pv.ints, exact) if pv.kind == "zi" else _act_fint(pv.ints, exact)
    return ints == pv.ints


# ---------------------------------------------------------------------------
# plane orbits


@dataclass
class PlaneOrbit:
    """One closed plane orbit with its surface invariants.

    w is the unit defining vector, frame carries e3 to w (so the
    stabilizer conjugates into the real subgroup), and domain is the
    Dirichlet polygon of that conjugated stabilizer.  delta is the
    critical exponent, which is 1 for a finite-covolume stabilizer, and
    delta_y its cusp-adjusted variant (2 delta - 1 when cusps exist).
    """

    model: str
    vector: PlaneVector
    w: np.ndarray
    frame: qf.GroupElement
    stabilizer: list
    domain: DirichletDomain
    area: float
    volume: float
    delta: float
    delta_y: float
    core_diameter: float
    cusp_count: int
    genus: int
    cone_orders: list
    real_generators: list = field(default_factory=list)

    def signature(self):
        return (self.genus, tuple(self.cone_orders), self.cusp_count)


def frame_to_vector(w: np.ndarray) -> qf.GroupElement:
    """A group element g0 with e3 g0^{-1} = w, for unit space-like w.

    Diagonalizes the Hermitian matrix of w against the one of e3; the
    two unitary eigenbases are glued with the eigenvalue scaling, which
    is a congruence carrying one form to the other.
    """
    x = qf.herm_from_vec(w)
    lam, u = np.linalg.eigh(x)  # ascending: lam[0] < 0 < lam[1]
    pos = u[:, 1][:, None]
    neg = u[:, 0][:, None]
    scale = np.array([1.0 / math.sqrt(lam[1]), 1.0 / math.sqrt(-lam[0])])
    w_basis = np.array([[1.0, 1.0], [-1j, 1j]]) / math.sqrt(2.0)
    g = np.hstack([pos, neg]) * scale[None, :] @ w_basis.conj().T
    det = g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0]
    g = g / np.sqrt(det)
    g0 = qf.make_element(g)
    assert np.max(np.abs(_e3() @ g0.inv().mat4r - w)) < 1e-9
    return g0


def _e3():
    return np.array([0.0, 0.0, 1.0, 0.0])


def _real_form(m: np.ndarray) -> np.ndarray:
    """Real 2x2 representative of an element stabilizing e3."""
    if np.max(np.abs(m.imag)) < 1e-8:
        return fh.sl2_normalize(m.real)
    if np.max(np.abs(m.real)) < 1e-8:
        # i * (real, det -1): sends e3 to -e3, never a fixer
        raise AssertionError("orientation-twisted matrix offered as a fixer")
    raise AssertionError("conjugated stabilizer element is not real")


def plane_from_vector(L: lat.LatticeModel, vec, ball: lat.GroupBall) -> PlaneOrbit:
    """Build the plane orbit of a primitive integral space-like vector.

    Stabilizer elements are found by exact filtering of the ball; the
    quotient surface is certified by the Dirichlet pairing closure, so a
    too-small ball raises rather than returning a wrong polygon.  A
    stabilizer without two non-commuting hyperbolics is refused.
    """
    if not isinstance(vec, PlaneVector):
        vec = plane_vector(L, vec)
    w = embed_vector(L, vec)
    wn = w / math.sqrt(vec.qvalue)
    g0 = frame_to_vector(wn)

    fixers = []
    g0i = g0.inv()
    for i in range(len(ball)):
        if _fixes(vec, ball.exact[i]):
            gam = ball.element(i)
            fixers.append((gam, _real_form(g0i.mat2c @ gam.mat2c @ g0.mat2c)))
    reals = [h for _, h in fixers]

    hyp = [h for h in reals if fh.element_type(h) == "hyperbolic"]
    if len(hyp) < 2 or not _has_noncommuting(hyp):
        raise ElementaryStabilizer(
            f"stabilizer of {vec.ints} has no two independent hyperbolics "
            f"in a ball of radius {ball.radius:g}")

    try:
        dom = _domain_with_center_retry(reals)
    except InfiniteArea:
        # integral vectors always have lattice stabilizers, so a free
        # visible group means the ball shows too little of it
        raise BallTooSmall(
            f"visible stabilizer of {vec.ints} is free in a ball of "
            f"radius {ball.radius:g}; enlarge the ball") from None
    gens = _pairing_witnesses(dom, fixers)
    real_gens = [_real_form(g0i.mat2c @ g.mat2c @ g0.mat2c) for g in gens]

    delta = 1.0
    delta_y = delta if dom.cusp_count == 0 else 2.0 * delta - 1.0
    assert 0.0 < delta_y <= delta <= 1.0
    assert dom.area >= MIN_ORBIFOLD_AREA - 1e-12
    return PlaneOrbit(
        model=L.name,
        vector=vec,
        w=wn,
        frame=g0,
        stabilizer=gens,
        domain=dom,
        area=dom.area,
        volume=2.0 * math.pi * dom.area,
        delta=delta,
        delta_y=delta_y,
        core_diameter=dom.diameter,
        cusp_count=dom.cusp_count,
        genus=dom.genus,
        cone_orders=list(dom.cone_orders),
        real_generators=real_gens,
    )


def _has_noncommuting(hyps) -> bool:
    base = hyps[0]
    for h in hyps[1:]:
        comm = base @ np.linalg.inv(h) @ np.linalg.inv(base) @ h
        if np.max(np.abs(comm - np.eye(2))) > 1e-6 \
                and np.max(np.abs(comm + np.eye(2))) > 1e-6:
            return True
    return False


def _domain_with_center_retry(reals):
    last = None
    for center in _CENTER_TRIES:
        try:
            return dirichlet_domain(reals, center)
        except ValueError as exc:  # center fixed by an elliptic element
            last = exc
    raise last


def _pairing_witnesses(dom, fixers):
    """Exact group elements matching the polygon's side pairings."""
    out, seen = [], set()
    for edge_mat in dom.mats:
        for gam, h in fixers:
            if _same_real(h, edge_mat):
                key = gam.exact[1].tobytes()
                if key not in seen:
                    seen.add(key)
                    out.append(gam)
                break
        else:
            raise AssertionError("side pairing lost its exact witness")
    return out


def _same_real(a, b, tol=1e-9):
    return bool(np.all(np.abs(a - b) < tol) or np.all(np.abs(a + b) < tol))


def surface_area(P: PlaneOrbit) -> float:
    """Area of the quotient surface (Gauss-Bonnet checked at build time)."""
    if P.domain.free_sides:
        raise InfiniteArea("stabilizer has infinite covolume")
    return P.area


def tight_area(L: lat.LatticeModel, P: PlaneOrbit) -> float:
    """Tight area of the orbit surface; in lattice mode this is plainly
    the surface area.  The model-constant floor eps_x^2 is asserted when
    the model carries calibrated constants."""
    if L.mode not in ("cocompact", "finite-covolume"):
        raise UnsupportedMode(f"mode {L.mode!r} has no tight-area support")
    a = surface_area(P)
    if L.constants is not None:
        assert a >= L.constants.eps_x ** 2
    return a


def orbit_frame(P: PlaneOrbit, h) -> qf.GroupElement:
    """Frame on the plane orbit: the base frame moved by a real element."""
    if not isinstance(h, qf.GroupElement):
        h = qf.make_element(np.asarray(h, dtype=complex))
    return P.frame @ h


# ---------------------------------------------------------------------------
# the chart around e3 on the quadric


def orbit_exp(v: qf.LieVector) -> np.ndarray:
    """e3 pushed by exp(v)."""
    return _e3() @ qf.exp_lie(v).mat4r


def orbit_log(w) -> qf.LieVector:
    """Invert v -> e3 exp(v) on the imaginary 3-parameter chart.

    Newton iteration on the coordinates; the linearization at e3 is the
    fixed isometry between the imaginary Lie directions and the span of
    e1, e2, e4, so the first step is already first-order exact.
    """
    w = np.asarray(w, dtype=float)
    dev = np.linalg.norm(w - _e3())
    if dev > CHART_WINDOW:
        raise NoConvergence(f"point is {dev:.3f} from e3, outside the chart")
    if abs(qf.q_value(w) - 1.0) > 1e-9:
        raise ValueError("chart input must sit on the quadric Q = 1")
    coords = np.array([w[1], w[0], w[3]])
    for _ in range(60):
        v = qf.lie_vector(im=coords)
        r = orbit_exp(v) - w
        if np.linalg.norm(r) < 1e-12:
            break
        coords -= np.array([r[1], r[0], r[3]])
    else:
        raise NoConvergence("chart iteration failed to settle")
    v = qf.lie_vector(im=coords)
    if np.linalg.norm(orbit_exp(v) - w) > 1e-10:
        raise NoConvergence("chart residual above tolerance")
    return v


# ---------------------------------------------------------------------------
# sheet enumeration


@dataclass
class SheetSet:
    """Transversal intersection vectors at one orbit point.

    vectors holds (v, witness) pairs with 0 < |v| < window; complete
    records whether the ball radius certifiably exhausts the window (for
    cusped stabilizers the certificate uses the truncated core diameter,
    see enumerate_sheets).
    """

    y: qf.GroupElement
    cutoff: float
    omega: float
    window: float
    vectors: list
    complete: bool

    def __len__(self):
        return len(self.vectors)

    def norms(self):
        return sorted(v.norm() for v, _ in self.vectors)


def enumerate_sheets(L: lat.LatticeModel, y: qf.GroupElement, Z: PlaneOrbit,
                     D: float, ball: lat.GroupBall) -> SheetSet:
    """All nonzero v with |v| < 1/(D omega(y)) and y exp(v) on Z.

    Every ball element gamma is pushed to w = e3 (gZ^{-1} gamma y) and
    kept when w lands in the chart and the solved v fits the window.
    Residuals inside the guard band are recomputed in extended precision
    from the exact integer payload before classification.  The result is
    deduplicated: witnesses differing by the Z-stabilizer give one v.
    """
    if D <= 0:
        raise ValueError("cutoff must be positive")
    om = lat.height_omega(L, y)
    window = 1.0 / (D * om)

    gzi4 = Z.frame.inv().mat4r
    left = _e3() @ gzi4
    wall = np.einsum("j,njk,kl->nl", left, ball.mat4, y.mat4r)
    dev = np.linalg.norm(wall - _e3(), axis=1)
    order = np.argsort(dev)

    found = []
    for i in order:
        if dev[i] > CHART_WINDOW:
            break
        wv = wall[i]
        drift = abs(qf.q_value(wv) - 1.0)
        if drift > 1e-9:
            wv = _extended_chart_point(L, Z, ball, int(i), y)
        try:
            v = orbit_log(wv)
        except NoConvergence:
            continue
        v = qf.lie_vector(im=-v.im)  # y exp(v) in Z means w = e3 exp(-v)
        nv = v.norm()
        if nv <= 1e-11 or nv >= window:
            continue
        res = _membership_residual(wv, v)
        if res >= GUARD_TOP:
            continue
        if res > MEMBER_TOL:
            wv = _extended_chart_point(L, Z, ball, int(i), y)
            v = qf.lie_vector(im=-orbit_log(wv).im)
            res = _membership_residual(wv, v)
            if res > MEMBER_TOL:
                if res < GUARD_TOP:
                    raise NoConvergence(
                        f"membership residual {res:.2e} stuck in the guard band")
                continue
        found.append((v, ball.element(int(i))))

    found.sort(key=lambda t: (t[0].norm(), tuple(np.round(t[0].im, 12))))
    kept = []
    for v, gam in found:
        if any(np.linalg.norm(v.im - u.im) < DEDUP_TOL for u, _ in kept):
            continue
        kept.append((v, gam))

    need = Z.frame.op_norm4() * y.op_norm4() \
        * math.exp(Z.core_diameter + window) * 1.05
    complete = bool(ball.complete and ball.radius >= need)
    return SheetSet(y=y, cutoff=D, omega=om, window=window,
                    vectors=kept, complete=complete)


def _membership_residual(wv, v) -> float:
    return float(np.linalg.norm(wv @ qf.exp_lie(v).mat4r - _e3()))


def _extended_chart_point(L, Z, ball, i, y) -> np.ndarray:
    """Recompute e3 (gZ^{-1} gamma y) in extended precision.

    The group element is rebuilt from its exact integer payload, so only
    the two frames contribute float error.  Gaussian-integer elements go
    through the Hermitian congruence in clongdouble; form-basis elements
    act by their exact 4x4 matrix conjugated in longdouble.
    """
    if ball.kind == "zi":
        gam2 = qf.zi_to_complex(ball.exact[i]).astype(np.clongdouble)
        m = Z.frame.inv().mat2c.astype(np.clongdouble) @ gam2 \
            @ y.mat2c.astype(np.clongdouble)
        e3h = np.array([[0.0, 1j], [-1j, 0.0]], dtype=np.clongdouble)
        x = m.conj().T @ e3h @ m
        s2 = np.sqrt(np.longdouble(2.0))
        out = np.array([
            -x[0, 0].real / s2,
            x[0, 1].real,
            x[0, 1].imag,
            x[1, 1].real / s2,
        ], dtype=np.longdouble)
    else:
        mid = L.conjugator_inv.astype(np.longdouble) \
            @ ball.exact[i].astype(np.longdouble) \
            @ L.conjugator.astype(np.longdouble)
        out = _e3().astype(np.longdouble) \
            @ Z.frame.inv().mat4r.astype(np.longdouble) \
            @ mid @ y.mat4r.astype(np.longdouble)
    # project back onto the quadric to kill the frames' det drift
    qv = 2.0 * out[0] * out[3] + out[1] ** 2 + out[2] ** 2
    return np.asarray(out / np.sqrt(qv), dtype=float)


# ---------------------------------------------------------------------------
# integral census and orbit classes


def integral_vectors(L: lat.LatticeModel, value: int, height: int):
    """Primitive integral vectors of a given Q-value with entries up to
    height, one sign representative each, sorted."""
    if value <= 0:
        raise ValueError("Q-value must be positive")
    out = set()
    rng4 = range(-height, height + 1)
    if L.mode == "finite-covolume":
        for q in rng4:
            for r in rng4:
                m = q * q + r * r - value  # need ps = m
                for p in rng4:
                    if p == 0:
                        if m == 0:
                            for s in rng4:
                                _collect(out, (p, q, r, s))
                        continue
                    if m % p == 0 and abs(m // p) <= height:
                        _collect(out, (p, q, r, m // p))
    else:
        d = L.form_d
        for x1 in rng4:
            for x2 in rng4:
                for x3 in rng4:
                    rest = value - x1 * x1 - x2 * x2 - x3 * x3
                    if rest > 0 or rest % d != 0:
                        continue
                    k = -rest // d
                    x4 = math.isqrt(k)
                    if x4 * x4 == k and x4 <= height:
                        _collect(out, (x1, x2, x3, x4))
                        if x4 != 0:
                            _collect(out, (x1, x2, x3, -x4))
    kind = "zi" if L.mode == "finite-covolume" else "fint"
    return [PlaneVector(kind=kind, ints=v, qvalue=value)
            for v in sorted(out, key=_reduction_key)]


def _collect(out, ints):
    if math.gcd(*ints) == 1:
        out.add(_canonical_ints(ints))


def _reduction_key(ints):
    return (max(abs(x) for x in ints), sum(x * x for x in ints), ints)


_ACTION_STACKS = {}


def _int_action_stack(ball: lat.GroupBall) -> np.ndarray:
    """Per ball element, the integer 4x4 matrix of its action on integral
    vector coordinates (the action is linear in (p, q, r, s))."""
    key = (ball.model, ball.kind, ball.radius, len(ball))
    if key in _ACTION_STACKS:
        return _ACTION_STACKS[key]
    if ball.kind == "fint":
        stack = ball.exact.astype(np.int64)
    else:
        basis = [(1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1)]
        stack = np.empty((len(ball), 4, 4), dtype=np.int64)
        for i in range(len(ball)):
            for k, e in enumerate(basis):
                stack[i, k] = _act_zi(e, ball.exact[i])
    _ACTION_STACKS[key] = stack
    return stack


def orbit_reduce(L: lat.LatticeModel, pv: PlaneVector,
                 ball: lat.GroupBall) -> PlaneVector:
    """Greedy exact reduction to a locally minimal orbit representative.

    Repeatedly applies the ball element that most decreases the entry
    size until none does; the result is canonical enough to merge orbits
    in practice, and orbit_classes certifies the leftovers.
    """
    stack = _int_action_stack(ball)
    cur = np.asarray(pv.ints, dtype=np.int64)
    for _ in range(200):
        imgs = np.einsum("j,njk->nk", cur, stack)
        nz = imgs != 0
        lead = imgs[np.arange(len(imgs)), np.argmax(nz, axis=1)]
        imgs = imgs * np.where(lead < 0, -1, 1)[:, None]
        maxabs = np.max(np.abs(imgs), axis=1)
        sumsq = np.sum(imgs * imgs, axis=1)
        best = np.lexsort((sumsq, maxabs))[0]
        cand = tuple(int(v) for v in imgs[best])
        if _reduction_key(cand) < _reduction_key(tuple(int(v) for v in cur)):
            cur = imgs[best]
            continue
        return PlaneVector(kind=pv.kind, ints=tuple(int(v) for v in cur),
                           qvalue=pv.qvalue)
    raise IncompleteOrbitReduction("reduction did not stabilize")


def orbit_classes(L: lat.LatticeModel, vecs, ball: lat.GroupBall,
                  entry_cap: int = 16, node_cap: int = 200_000):
    """Group integral vectors into lattice orbits.

    Vectors reducing to the same representative are merged exactly.  Any
    representatives left distinct are compared by a bounded breadth-first
    search over the generator action: overlapping searches merge their
    classes (an exact element connects them), and disjoint searches
    certify distinctness relative to the budget only when both closed
    without hitting a cap.  Otherwise the classes cannot be told apart
    and the call raises IncompleteOrbitReduction.
    """
    classes = {}
    for pv in vecs:
        rep = orbit_reduce(L, pv, ball)
        entry = classes.setdefault(rep.ints, (rep, []))
        entry[1].append(pv)
    reps = [rep for rep, _ in classes.values()]
    if len(reps) <= 1:
        return [(rep, sorted(members, key=lambda p: p.ints))
                for rep, members in classes.values()]

    gens = _symmetric_exact_generators(L)
    spans = {r.ints: _orbit_span(r, gens, entry_cap, node_cap) for r in reps}

    root = {r.ints: r.ints for r in reps}

    def find(x):
        while root[x] != x:
            root[x] = root[root[x]]
            x = root[x]
        return x

    for i, a in enumerate(reps):
        for b in reps[i + 1:]:
            if spans[a.ints][0] & spans[b.ints][0]:
                root[find(a.ints)] = find(b.ints)

    groups = {}
    for rep, members in classes.values():
        groups.setdefault(find(rep.ints), []).append((rep, members))

    keys = list(groups)
    for i, a in enumerate(keys):
        closed_a = all(spans[r.ints][1] for r, _ in groups[a])
        for b in keys[i + 1:]:
            closed_b = all(spans[r.ints][1] for r, _ in groups[b])
            if not (closed_a and closed_b):
                raise IncompleteOrbitReduction(
                    f"classes {a} and {b} exceed the search budget; "
                    f"the count is an interval")

    out = []
    for key in keys:
        rep = min((r for r, _ in groups[key]),
                  key=lambda r: _reduction_key(r.ints))
        members = sorted((p for _, ms in groups[key] for p in ms),
                         key=lambda p: p.ints)
        out.append((rep, members))
    out.sort(key=lambda t: t[0].ints)
    return out


def _symmetric_exact_generators(L):
    gens = []
    for g in L.generators:
        gens.append(g.exact[1])
        gens.append(g.inv().exact[1])
    return gens


def _orbit_span(rep: PlaneVector, gens, entry_cap, node_cap):
    """All orbit points with entries within entry_cap, reachable without
    leaving that box.  Returns (vertex set, closed flag)."""
    start = rep.ints
    seen = {start}
    frontier = [rep]
    closed = True
    while frontier:
        nxt = []
        for pv in frontier:
            for g in gens:
                img = act_vector(pv, g)
                if max(abs(x) for x in img.ints) > entry_cap:
                    continue
                if img.ints not in seen:
                    seen.add(img.ints)
                    nxt.append(img)
        if len(seen) > node_cap:
            closed = False
            break
        frontier = nxt
    return seen, closed


# ---------------------------------------------------------------------------
# records


def export_record(P: PlaneOrbit) -> str:
    """Structured text record of one plane orbit, replayable exactly."""
    rec = {
        "model": P.model,
        "kind": P.vector.kind,
        "ints": list(P.vector.ints),
        "qvalue": P.vector.qvalue,
        "stabilizer": [np.asarray(g.exact[1]).tolist() for g in P.stabilizer],
        "invariants": {
            "area": P.area,
            "volume": P.volume,
            "genus": P.genus,
            "cone_orders": list(P.cone_orders),
            "cusp_count": P.cusp_count,
            "core_diameter": P.core_diameter,
            "delta": P.delta,
            "delta_y": P.delta_y,
        },
    }
    return json.dumps(rec, sort_keys=True)


def import_record(L: lat.LatticeModel, text: str,
                  ball: lat.GroupBall) -> PlaneOrbit:
    """Rebuild a plane orbit from its record and verify the stored
    invariants against the fresh computation."""
    rec = json.loads(text)
    if rec["model"] != L.name:
        raise ValueError(f"record belongs to model {rec['model']!r}")
    P = plane_from_vector(L, rec["ints"], ball)
    inv = rec["invariants"]
    checks = [
        (P.area, inv["area"]), (P.volume, inv["volume"]),
        (P.core_diameter, inv["core_diameter"]),
    ]
    for got, want in checks:
        if abs(got - want) > 1e-9 * max(1.0, abs(want)):
            raise ValueError("stored invariants disagree with the rebuild")
    if (P.genus, P.cone_orders, P.cusp_count) != \
            (inv["genus"], inv["cone_orders"], inv["cusp_count"]):
        raise ValueError("stored signature disagrees with the rebuild")
    return P
