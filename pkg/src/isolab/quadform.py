"""Dictionary between PSL2(C) and the orthogonal group of Q(x) = 2*x1*x4 + x2^2 + x3^2.

Everything downstream (lattices, heights, transversal vectors) lives in one of
two intertwined pictures:

  * 2x2: elements of SL2(C) mod sign, acting on Hermitian matrices by
    X -> g* X g (a right action on row 4-vectors), and on the hyperbolic
    3-space of positive definite unit-determinant Hermitian matrices by
    P -> g P g* (a left action on points).
  * 4x4: the image of that right action in SO(Q), acting on row vectors.

The linear identification is

    phi(v) = [[-sqrt2*v1, v2 + i*v3], [v2 - i*v3, sqrt2*v4]],

with det(phi(v)) = -Q(v).  This scaling is the unique one for which the
diagonal flow a_t = diag(e^{t/2}, e^{-t/2}) maps to diag(e^t, 1, 1, e^{-t})
AND the compact stabilizer PSU(2) preserves the Euclidean norm of row
vectors, so that ||e1 * n a_{-t} k|| = e^{-t} holds exactly.  In particular
||e1 * m|| = |m11|^2 + |m12|^2 for any m in SL2(C).

Row vectors act on the right throughout: v' = v @ R.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonUnitDeterminant, OutOfChart

SQRT2 = float(np.sqrt(2.0))

# Q as a symmetric matrix: Q(v) = v @ Q_MAT @ v
Q_MAT = np.array(
    [
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [1.0, 0.0, 0.0, 0.0],
    ]
)

# Base point of hyperbolic 3-space in both pictures.
ORIGIN_HERM = np.eye(2, dtype=complex)
ORIGIN_VEC = np.array([-1.0 / SQRT2, 0.0, 0.0, 1.0 / SQRT2])

# Orthonormal basis of sl2(R) for the metric <X, Y> = 2 Re tr(X Y*), scaled so
# the diagonal flow has unit speed.  B1 generates a_t, B2/sqrt-scaled the
# lower and upper unipotents.
B1 = np.array([[0.5, 0.0], [0.0, -0.5]])
B2 = np.array([[0.0, 0.0], [1.0 / SQRT2, 0.0]])
B3 = np.array([[0.0, 1.0 / SQRT2], [0.0, 0.0]])

DET_TOL = 1e-9
CHART_RADIUS = 0.5  # operator-norm radius for the matrix logarithm


def q_value(v):
    """Q(v) for one row vector or a stack of them."""
    v = np.asarray(v, dtype=float)
    return 2.0 * v[..., 0] * v[..., 3] + v[..., 1] ** 2 + v[..., 2] ** 2


def herm_from_vec(v):
    """phi(v): row 4-vector(s) -> Hermitian 2x2 matrix (stack)."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (2, 2), dtype=complex)
    out[..., 0, 0] = -SQRT2 * v[..., 0]
    out[..., 0, 1] = v[..., 1] + 1j * v[..., 2]
    out[..., 1, 0] = v[..., 1] - 1j * v[..., 2]
    out[..., 1, 1] = SQRT2 * v[..., 3]
    return out


def vec_from_herm(x):
    """Inverse of herm_from_vec."""
    x = np.asarray(x, dtype=complex)
    out = np.zeros(x.shape[:-2] + (4,), dtype=float)
    out[..., 0] = -x[..., 0, 0].real / SQRT2
    out[..., 1] = x[..., 0, 1].real
    out[..., 2] = x[..., 0, 1].imag
    out[..., 3] = x[..., 1, 1].real / SQRT2
    return out


def right_action_matrix(m):
    """4x4 matrix R with phi(v @ R) = m* phi(v) m, for m in SL2(C).

    R preserves Q exactly (up to roundoff) and the map m -> R is a
    homomorphism for the row-vector right action.
    """
    m = np.asarray(m, dtype=complex)
    ms = m.conj().T
    rows = []
    for k in range(4):
        e = np.zeros(4)
        e[k] = 1.0
        rows.append(vec_from_herm(ms @ herm_from_vec(e) @ m))
    return np.array(rows)


def _canonical_sign(m):
    """Pick the representative of {m, -m} with a positive leading entry."""
    m = np.asarray(m, dtype=complex)
    for idx in ((0, 0), (0, 1), (1, 0), (1, 1)):
        z = m[idx]
        if abs(z) > 1e-12:
            if z.real < -1e-15 or (abs(z.real) <= 1e-15 and z.imag < 0):
                return -m
            return m
    return m


@dataclass
class GroupElement:
    """One isometry carried in both pictures.

    mat2c  -- 2x2 complex, det 1, sign-canonicalized (PSL2 representative)
    mat4r  -- its image in SO(Q), acting on row vectors from the right
    exact  -- optional exact payload, a pair (kind, data):
              ("zi", int array (2,2,2))   Gaussian-integer entries (re, im)
              ("fint", int array (4,4))   integral matrix in a diagonal-form
                                          basis of the ambient model
    """

    mat2c: np.ndarray
    mat4r: np.ndarray
    exact: tuple | None = None

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        m = self.mat2c @ other.mat2c
        exact = None
        if self.exact is not None and other.exact is not None and self.exact[0] == other.exact[0]:
            kind = self.exact[0]
            if kind == "zi":
                exact = (kind, zi_mul(self.exact[1], other.exact[1]))
            elif kind == "fint":
                exact = (kind, self.exact[1] @ other.exact[1])
        return make_element(m, exact=exact)

    def inv(self) -> "GroupElement":
        m = self.mat2c
        minv = np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]], dtype=complex)
        exact = None
        if self.exact is not None:
            kind, data = self.exact
            if kind == "zi":
                exact = (kind, zi_inv(data))
            elif kind == "fint":
                inv = np.array(np.round(np.linalg.inv(data.astype(float))), dtype=np.int64)
                if not np.array_equal(inv @ data, np.eye(4, dtype=np.int64)):
                    raise ValueError("integral payload is not invertible over the integers")
                exact = (kind, inv)
        return make_element(minv, exact=exact)

    def op_norm4(self) -> float:
        """Operator norm of mat4r; equals sigma_max(mat2c)^2."""
        s = np.linalg.svd(self.mat2c, compute_uv=False)
        return float(s[0] ** 2)


def make_element(mat2c, exact=None) -> GroupElement:
    """Build a GroupElement from a 2x2 complex matrix with det 1 (mod sign)."""
    m = np.asarray(mat2c, dtype=complex)
    if m.shape != (2, 2):
        raise ValueError("expected a 2x2 matrix")
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    if abs(det - 1.0) > DET_TOL:
        if abs(det) < DET_TOL:
            raise NonUnitDeterminant(f"determinant {det} is not 1")
        # allow tiny drift: renormalize by the principal square root
        if abs(det - 1.0) > 1e-6:
            raise NonUnitDeterminant(f"determinant {det} is not 1")
        m = m / np.sqrt(det)
    m = _canonical_sign(m)
    return GroupElement(mat2c=m, mat4r=right_action_matrix(m), exact=exact)


def identity_element() -> GroupElement:
    return make_element(np.eye(2, dtype=complex))


def a_flow(t: float) -> GroupElement:
    """Diagonal flow diag(e^{t/2}, e^{-t/2})."""
    return make_element(np.array([[np.exp(t / 2.0), 0.0], [0.0, np.exp(-t / 2.0)]], dtype=complex))


def u_lower(r: float) -> GroupElement:
    """Lower-triangular unipotent [[1,0],[r,1]], r real or complex."""
    return make_element(np.array([[1.0, 0.0], [r, 1.0]], dtype=complex))


# ---------------------------------------------------------------------------
# Gaussian-integer helpers (exact payloads for the Bianchi model)

def zi(a, b, c, d):
    """2x2 Gaussian-integer matrix from complex entries with integer parts."""
    out = np.zeros((2, 2, 2), dtype=np.int64)
    for idx, z in zip(((0, 0), (0, 1), (1, 0), (1, 1)), (a, b, c, d)):
        out[idx][...] = (int(round(z.real)), int(round(z.imag)))
    return out


def zi_to_complex(m):
    return m[..., 0].astype(float) + 1j * m[..., 1].astype(float)


def zi_mul(x, y):
    xr, xi = x[..., 0], x[..., 1]
    yr, yi = y[..., 0], y[..., 1]
    out = np.zeros((2, 2, 2), dtype=np.int64)
    out[..., 0] = xr @ yr - xi @ yi
    out[..., 1] = xr @ yi + xi @ yr
    return out


def zi_inv(m):
    """Inverse of a det-1 (up to sign) Gaussian-integer 2x2 matrix."""
    out = np.zeros((2, 2, 2), dtype=np.int64)
    out[0, 0] = m[1, 1]
    out[1, 1] = m[0, 0]
    out[0, 1] = -m[0, 1]
    out[1, 0] = -m[1, 0]
    det_r = m[0, 0, 0] * m[1, 1, 0] - m[0, 0, 1] * m[1, 1, 1] - (m[0, 1, 0] * m[1, 0, 0] - m[0, 1, 1] * m[1, 0, 1])
    det_i = m[0, 0, 0] * m[1, 1, 1] + m[0, 0, 1] * m[1, 1, 0] - (m[0, 1, 0] * m[1, 0, 1] + m[0, 1, 1] * m[1, 0, 0])
    if det_r == -1 and det_i == 0:
        out = -out
    elif not (det_r == 1 and det_i == 0):
        raise NonUnitDeterminant("Gaussian-integer matrix has determinant != +-1")
    return out


def zi_canonical(m):
    """Canonical representative of {m, -m}, as a hashable tuple."""
    flat = m.reshape(-1)
    for x in flat:
        if x != 0:
            if x < 0:
                flat = -flat
            break
    return tuple(int(x) for x in flat)


# ---------------------------------------------------------------------------
# Lie algebra: sl2(C) = sl2(R) + i sl2(R), orthonormal coordinates


@dataclass
class LieVector:
    """Tangent vector in coordinates (re, im) w.r.t. the basis (B1, B2, B3).

    re holds the sl2(R) part, im the i*sl2(R) part.  The metric is the
    coordinate Euclidean norm (the basis is orthonormal for
    <X,Y> = 2 Re tr(X Y*)).
    """

    re: np.ndarray
    im: np.ndarray

    def norm(self) -> float:
        return float(np.sqrt(np.dot(self.re, self.re) + np.dot(self.im, self.im)))

    def to_matrix(self) -> np.ndarray:
        u = self.re[0] * B1 + self.re[1] * B2 + self.re[2] * B3
        w = self.im[0] * B1 + self.im[1] * B2 + self.im[2] * B3
        return u + 1j * w


def lie_vector(re=(0.0, 0.0, 0.0), im=(0.0, 0.0, 0.0)) -> LieVector:
    return LieVector(re=np.asarray(re, dtype=float), im=np.asarray(im, dtype=float))


def lie_from_matrix(m) -> LieVector:
    """Coordinates of a (numerically) traceless complex 2x2 matrix."""
    m = np.asarray(m, dtype=complex)
    u = (m + m.conj()) / 2.0  # entrywise conjugate: real-matrix part
    w = (m - m.conj()) / 2j
    re = np.array([2.0 * u[0, 0].real, SQRT2 * u[1, 0].real, SQRT2 * u[0, 1].real])
    im = np.array([2.0 * w[0, 0].real, SQRT2 * w[1, 0].real, SQRT2 * w[0, 1].real])
    return LieVector(re=re, im=im)


def adjoint(v: LieVector, g: GroupElement) -> LieVector:
    """Right adjoint action v -> g^{-1} v g.

    Composes like a right action: adjoint(v, g @ h) == adjoint(adjoint(v, g), h).
    Real elements g preserve the (re, im) splitting.
    """
    m = v.to_matrix()
    g2 = g.mat2c
    g2inv = np.array([[g2[1, 1], -g2[0, 1]], [-g2[1, 0], g2[0, 0]]], dtype=complex)
    return lie_from_matrix(g2inv @ m @ g2)


# The H-equivariant isometry between i*sl2(R) (im coordinates (x, y, z)) and
# the invariant 3-space R*e1 + R*e2 + R*e4: it sends i*B2 -> e1, i*B1 -> e2,
# i*B3 -> e4, i.e. (x, y, z) -> (y, x, 0, z).  Derived as v -> e3 * dR(v),
# the tangent of the right action at e3.

def vvector_from_lie(v: LieVector):
    """4-vector image of the i*sl2(R) part of v (re part must be 0 to matter)."""
    x, y, z = v.im
    return np.array([y, x, 0.0, z])


def lie_from_vvector(w) -> LieVector:
    w = np.asarray(w, dtype=float)
    return lie_vector(im=(w[1], w[0], w[3]))


def exp2(m):
    """Matrix exponential of traceless 2x2 matrices (stack-aware, closed form)."""
    m = np.asarray(m, dtype=complex)
    det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    mu2 = -det  # eigenvalues +-mu with mu^2 = -det
    mu = np.sqrt(mu2.astype(complex))
    small = np.abs(mu) < 1e-8
    c = np.where(small, 1.0 + mu2 / 2.0 + mu2 ** 2 / 24.0, np.cosh(mu))
    s = np.where(small, 1.0 + mu2 / 6.0 + mu2 ** 2 / 120.0, _sinhc(mu))
    eye = np.eye(2, dtype=complex)
    return c[..., None, None] * eye + s[..., None, None] * m


def _sinhc(mu):
    nz = np.abs(mu) > 0
    safe = np.where(nz, mu, 1.0)
    return np.where(nz, np.sinh(safe) / safe, 1.0)


def exp_lie(v: LieVector) -> GroupElement:
    return make_element(exp2(v.to_matrix()))


def group_log(g: GroupElement) -> LieVector:
    """Principal logarithm of g near the identity.

    Uses the closed 2x2 form: for traceless w with w^2 = mu^2 * I,
    exp(w) = cosh(mu) I + sinhc(mu) w.  Raises OutOfChart when neither sign
    representative is within operator-norm 0.5 of the identity.
    """
    m = g.mat2c
    best = None
    for cand in (m, -m):
        dist = np.linalg.svd(cand - np.eye(2), compute_uv=False)[0]
        if best is None or dist < best[1]:
            best = (cand, dist)
    m, dist = best
    if dist > CHART_RADIUS:
        raise OutOfChart(f"operator-norm distance {dist:.3f} exceeds {CHART_RADIUS}")
    tr = m[0, 0] + m[1, 1]
    w = m - (tr / 2.0) * np.eye(2)
    # eigenvalues of the log are +-mu with cosh(mu) = tr/2; principal branch
    # through the larger eigenvalue of m
    coshmu = tr / 2.0
    disc = np.sqrt(coshmu ** 2 - 1.0 + 0j)
    lam = coshmu + disc
    if abs(lam) < 1.0:
        lam = coshmu - disc
    mu = np.log(lam)
    sh = np.sinh(mu)
    if abs(sh) < 1e-12:
        factor = 1.0  # parabolic or identity: w already equals the log
    else:
        factor = mu / sh
    return lie_from_matrix(factor * w)


def local_distance(g: GroupElement, h: GroupElement) -> float:
    """Left-invariant chart distance ||log(g^{-1} h)||."""
    return group_log(g.inv() @ h).norm()


def displacement_norm_batch(m):
    """||log|| per matrix for a stack m (..., 2, 2) of det-1 matrices.

    Displacement proxy defined on all of PSL2(C): the principal log norm,
    minimized over the two sign lifts.  Agrees with the chart norm near the
    identity and equals the rotation angle on elliptic elements; it is the
    length of the one-parameter path to the identity, hence an upper bound
    for the left-invariant distance.
    """
    m = np.asarray(m, dtype=complex)
    tr = m[..., 0, 0] + m[..., 1, 1]
    out = None
    for sign in (1.0, -1.0):
        coshmu = sign * tr / 2.0
        disc = np.sqrt(coshmu ** 2 - 1.0 + 0j)
        lam = coshmu + disc
        flip = np.abs(lam) < 1.0
        lam = np.where(flip, coshmu - disc, lam)
        # guard lam ~ -1 (angle-pi rotations): principal log still finite
        lam = np.where(np.abs(lam) < 1e-15, -1.0, lam)
        mu = np.log(lam)
        sh = np.sinh(mu)
        small = np.abs(mu) < 1e-6
        factor = np.where(small, 1.0, mu / np.where(np.abs(sh) < 1e-300, 1.0, sh))
        w = sign * m - coshmu[..., None, None] * np.eye(2)
        wnorm = SQRT2 * np.sqrt(np.sum(np.abs(w) ** 2, axis=(-2, -1)))
        val = np.abs(factor) * wnorm
        # pure +-identity has zero displacement regardless of branch noise
        val = np.where(wnorm < 1e-14, 0.0, val)
        out = val if out is None else np.minimum(out, val)
    return np.real(out)


def displacement_norm(g: GroupElement, h: GroupElement) -> float:
    """Displacement proxy between two frames, defined for any pair.

    Equals local_distance when g^{-1}h is inside the chart; beyond it the
    principal-branch value is still returned (an upper bound for the true
    left-invariant distance, exact on one-parameter subgroups).
    """
    return float(displacement_norm_batch((g.inv() @ h).mat2c))


def path_length_oracle(g: GroupElement, steps: int = 4096) -> float:
    """Length of the det-normalized segment from id to g, no logarithms involved.

    Integrates the left-invariant metric along gamma(s) = normalize((1-s) I + s g)
    with finite differences; independent check for local_distance at small g.
    """
    m = g.mat2c
    if np.linalg.norm(m + np.eye(2)) < np.linalg.norm(m - np.eye(2)):
        m = -m
    taus = np.linspace(0.0, 1.0, steps + 1)
    segs = (1 - taus)[:, None, None] * np.eye(2, dtype=complex) + taus[:, None, None] * m
    dets = segs[:, 0, 0] * segs[:, 1, 1] - segs[:, 0, 1] * segs[:, 1, 0]
    segs = segs / np.sqrt(dets)[:, None, None]
    total = 0.0
    for k in range(steps):
        a = segs[k]
        ainv = np.array([[a[1, 1], -a[0, 1]], [-a[1, 0], a[0, 0]]], dtype=complex)
        xi = ainv @ (segs[k + 1] - a)
        xi = xi - (np.trace(xi) / 2.0) * np.eye(2)  # project to sl2
        total += lie_from_matrix(xi).norm()
    return total


# ---------------------------------------------------------------------------
# Projections along the unipotent direction, literal polynomial model.
#
# The transversal 3-space has coordinates (v1, v2, v4).  The unipotent shear
# by r acts in the polynomial model as
#     v1 -> v1 + v2 r + v4 r^2 / 2,   v2 -> v2 + v4 r,   v4 -> v4,
# and p / p_plus are the coordinate projections after the shear.  The honest
# group-level shear differs from this model by the substitution
# r -> -r/sqrt(2) together with a sign flip of the input v4, nothing else;
# every norm and sublevel measure is unchanged by that reparametrization, and
# the polynomial model is the one all sublevel constants refer to.  The exact
# match is pinned in tests.


def shear_poly(v1, v2, v4, r):
    """(v1', v2') after the polynomial shear by r."""
    return v1 + v2 * r + v4 * r * r / 2.0, v2 + v4 * r


def project_p(v, r):
    """Pair (p, p_plus) at shear parameter r.

    v is a 3-vector (v1, v2, v4) or a 4-vector (the e3 component is ignored,
    matching the invariant subspace).  p is the (e1, e2) projection of the
    sheared vector, p_plus its e1 component.
    """
    v = np.asarray(v, dtype=float)
    if v.shape[-1] == 4:
        v1, v2, v4 = v[..., 0], v[..., 1], v[..., 3]
    else:
        v1, v2, v4 = v[..., 0], v[..., 1], v[..., 2]
    a, b = shear_poly(v1, v2, v4, r)
    return np.stack([a, b], axis=-1), a


def _intervals_from_poly(coeffs, lo=-1.0, hi=1.0):
    """Intervals inside [lo, hi] where the polynomial (coeff low->high) is <= 0."""
    coeffs = np.asarray(coeffs, dtype=float)
    roots = np.polynomial.polynomial.polyroots(coeffs) if np.any(np.abs(coeffs[1:]) > 0) else np.array([])
    pts = [lo, hi]
    for rt in np.atleast_1d(roots):
        if abs(rt.imag) < 1e-10 and lo < rt.real < hi:
            pts.append(float(rt.real))
    pts = sorted(set(pts))
    out = []
    for a, b in zip(pts[:-1], pts[1:]):
        mid = 0.5 * (a + b)
        val = np.polynomial.polynomial.polyval(mid, coeffs)
        if val <= 0:
            if out and abs(out[-1][1] - a) < 1e-14:
                out[-1] = (out[-1][0], b)
            else:
                out.append((a, b))
    return out


def sublevel_intervals(v, eps):
    """Interval decompositions of D and D_plus on [-1, 1].

    D       = {r : ||p(v, r)|| <= eps}
    D_plus  = {r : |p_plus(v, r)| <= eps}

    Returns (intervals_D, intervals_Dplus).
    """
    v = np.asarray(v, dtype=float)
    if v.shape[-1] == 4:
        v1, v2, v4 = float(v[0]), float(v[1]), float(v[3])
    else:
        v1, v2, v4 = float(v[0]), float(v[1]), float(v[2])
    # ||p||^2 - eps^2 as a quartic in r (coefficients low -> high)
    # p1 = v1 + v2 r + (v4/2) r^2 ; p2 = v2 + v4 r
    c0 = v1 * v1 + v2 * v2 - eps * eps
    c1 = 2.0 * v1 * v2 + 2.0 * v2 * v4
    c2 = v2 * v2 + v1 * v4 + v4 * v4
    c3 = v2 * v4
    c4 = v4 * v4 / 4.0
    d_ints = _intervals_from_poly([c0, c1, c2, c3, c4])
    # |p1| <= eps  <=>  (p1 - eps <= 0) and (p1 + eps >= 0)
    lo_ints = _intervals_from_poly([v1 - eps, v2, v4 / 2.0])
    hi_ints = _intervals_from_poly([-(v1 + eps), -v2, -v4 / 2.0])
    dplus_ints = _interval_intersection(lo_ints, hi_ints)
    return d_ints, dplus_ints


def _interval_intersection(xs, ys):
    out = []
    for a, b in xs:
        for c, d in ys:
            lo, hi = max(a, c), min(b, d)
            if hi > lo:
                out.append((lo, hi))
    return sorted(out)


def sublevel_measure(v, eps):
    """Lebesgue lengths (ell_D, ell_Dplus) of the two sublevel sets on [-1, 1]."""
    d_ints, dp_ints = sublevel_intervals(v, eps)
    return (
        float(sum(b - a for a, b in d_ints)),
        float(sum(b - a for a, b in dp_ints)),
    )


def sublevel_measure_grid(v, eps, n=200001):
    """Grid oracle for sublevel_measure (slow, independent of root solving)."""
    v = np.asarray(v, dtype=float)
    r = np.linspace(-1.0, 1.0, n)
    p, pp = project_p(v, r)
    normp = np.sqrt(p[..., 0] ** 2 + p[..., 1] ** 2)
    step = 2.0 / (n - 1)
    return float(np.count_nonzero(normp <= eps) * step), float(np.count_nonzero(np.abs(pp) <= eps) * step)


# ---------------------------------------------------------------------------
# Recovering the 2x2 picture from a 4x4 orthogonal matrix


def mat2_from_mat4(R):
    """Invert the isomorphism: find m (up to sign) with right_action_matrix(m) = R.

    Works through the images of four rank-one Hermitian matrices w w*.  Raises
    ValueError when R is not (numerically) in the image of SL2(C).
    """
    R = np.asarray(R, dtype=float)

    def column(w):
        vec = vec_from_herm(np.outer(w, w.conj()))
        h = herm_from_vec(vec @ R)
        # h = w' w'* ; extract w' with a positive real pivot
        j = int(np.argmax([h[0, 0].real, h[1, 1].real]))
        piv = h[j, j].real
        if piv <= 1e-12:
            raise ValueError("degenerate rank-one image")
        w2 = h[:, j] / np.sqrt(piv)
        # make w2[j] real positive
        phase = w2[j] / abs(w2[j])
        return w2 / phase

    c1 = column(np.array([1.0, 0.0], dtype=complex))
    c2 = column(np.array([0.0, 1.0], dtype=complex))
    # resolve the relative phase with the image of w = (1, 1)
    vec3 = vec_from_herm(np.outer([1.0, 1.0], [1.0, 1.0])) @ R
    h3 = herm_from_vec(vec3)
    cross = h3 - np.outer(c1, c1.conj()) - np.outer(c2, c2.conj())
    # cross = e^{i d} c1 c2* + e^{-i d} c2 c1*  -- solve for d by least squares
    basis_c = np.outer(c1, c2.conj())
    # entries: cross_ij = e^{id} a_ij + e^{-id} conj(a_ji)  with a = basis_c
    rows = []
    rhs = []
    for i in range(2):
        for j in range(2):
            a = basis_c[i, j]
            b = np.conj(basis_c[j, i])
            # x * a + conj(x) * b = cross_ij, x = e^{id} = u + i w
            rows.append([a.real + b.real, -a.imag + b.imag])
            rows.append([a.imag + b.imag, a.real - b.real])
            rhs.append(cross[i, j].real)
            rhs.append(cross[i, j].imag)
    sol, *_ = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)
    x = complex(sol[0], sol[1])
    if abs(x) < 1e-8:
        raise ValueError("phase recovery failed")
    x /= abs(x)
    ms = np.stack([c1, x.conjugate() * c2], axis=1)  # columns c1, e^{-id} c2
    det = ms[0, 0] * ms[1, 1] - ms[0, 1] * ms[1, 0]
    if abs(det) < 1e-12:
        raise ValueError("rank-one columns are collinear")
    ms = ms / np.sqrt(det)
    m = ms.conj().T
    # verify
    err = np.max(np.abs(right_action_matrix(m) - R))
    if err > 1e-7:
        # try the (1, i) vector to resolve a possible conjugation ambiguity
        m = m.conj()
        err2 = np.max(np.abs(right_action_matrix(m) - R))
        if err2 > 1e-7:
            raise ValueError(f"not in the image of SL2(C): residual {min(err, err2):.2e}")
    return make_element(m)


# ---------------------------------------------------------------------------
# Points of hyperbolic 3-space (positive Hermitian, det 1)


def apply_point(g: GroupElement, p):
    """Left action on points: p -> g p g*."""
    return g.mat2c @ p @ g.mat2c.conj().T


def point_distance(p, q):
    """Hyperbolic distance between two det-1 positive Hermitian points."""
    qinv = np.array([[q[1, 1], -q[0, 1]], [-q[1, 0], q[0, 0]]], dtype=complex)
    c = float(np.real(np.trace(p @ qinv))) / 2.0
    return float(np.arccosh(max(c, 1.0)))


def frame_origin_distance(g: GroupElement) -> float:
    """d(o, g o) = arccosh(||g||_F^2 / 2)."""
    c = float(np.sum(np.abs(g.mat2c) ** 2)) / 2.0
    return float(np.arccosh(max(c, 1.0)))


def random_unitary(rng) -> GroupElement:
    """Haar-random special unitary, via the uniform 3-sphere."""
    a = rng.normal(size=4)
    a /= np.linalg.norm(a)
    k = np.array(
        [[a[0] + 1j * a[1], a[2] + 1j * a[3]], [-a[2] + 1j * a[3], a[0] - 1j * a[1]]]
    )
    return make_element(k)


def chart_constant(n=4000, scale=0.5, seed=7):
    """Empirical bi-Lipschitz constant of the two-step chart.

    Compares ||w|| with the chart distance of exp(i part) exp(re part) over
    random w of norm up to `scale`; returns max(ratio, 1/ratio) over the sample.
    """
    rng = np.random.default_rng(seed)
    worst = 1.0
    for _ in range(n):
        w = rng.normal(size=6)
        w *= rng.uniform(0.05, scale) / np.linalg.norm(w)
        v = lie_vector(re=w[:3], im=w[3:])
        g = exp_lie(lie_vector(im=w[3:])) @ exp_lie(lie_vector(re=w[:3]))
        d = group_log(g).norm()
        ratio = d / v.norm()
        worst = max(worst, ratio, 1.0 / ratio)
    return worst
