"""Explicit discrete groups: a compact-quotient model and a cusped one.

The compact model preserves the integral form x1^2 + x2^2 + x3^2 - d*x4^2
(default d = 7, anisotropic over the rationals); a fixed real change of basis
carries it onto the reference form Q.  The cusped model is the Gaussian-integer
modular group with exact 2x2 bookkeeping.  Both come with breadth-first ball
enumeration (disk-cached, integrity-checked), a certified height function,
injectivity-radius estimates, and frame reduction.
"""

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from . import caching
from . import quadform as qf
from .errors import BallTooSmall, BudgetExceeded, IsotropicForm

E1 = np.array([1.0, 0.0, 0.0, 0.0])

BALL_SLACK = 4.0          # pruning envelope multiplier for word search
DEFAULT_BALL_CAP = 500_000


# ---------------------------------------------------------------------------
# model containers


@dataclass
class CuspData:
    """One cusp class: frame g with the null vector v fixed by the cusp group."""

    label: str
    g: qf.GroupElement
    v: np.ndarray
    depth: float  # horoball parameter T; the horoball is {||e1 g|| <= e^{-T}}


@dataclass
class LatticeModel:
    name: str
    mode: str  # "cocompact" | "finite-covolume"
    generators: list
    cusps: list
    conjugator: np.ndarray | None = None      # F-basis rows -> Q-basis rows
    conjugator_inv: np.ndarray | None = None
    form_d: int | None = None
    constants: "ModelConstants | None" = None  # attached by model_constants

    @property
    def eta0(self) -> float:
        if not self.cusps:
            return 1.0
        return float(min(np.exp(-c.depth) for c in self.cusps))

    def generator_fingerprint(self) -> str:
        h = hashlib.sha256()
        for g in self.generators:
            kind, data = g.exact
            h.update(kind.encode())
            h.update(np.ascontiguousarray(data, dtype=np.int64).tobytes())
        return h.hexdigest()[:16]


@dataclass
class ModelConstants:
    eps_m: float
    eps_x: float
    eta0: float
    d_x: float


# ---------------------------------------------------------------------------
# three-squares arithmetic (anisotropy test for the compact model)


def is_sum_of_three_squares(n: int) -> bool:
    """Exact test: n >= 0 is a sum of three integer squares iff it is not
    of the form 4^a (8b + 7)."""
    if n < 0:
        return False
    while n % 4 == 0 and n > 0:
        n //= 4
    return n % 8 != 7


def three_squares_witness(n: int):
    """Brute decomposition n = a^2 + b^2 + c^2 with a <= b <= c, or None."""
    for a in range(math.isqrt(n) + 1):
        for b in range(a, math.isqrt(n - a * a) + 1):
            c2 = n - a * a - b * b
            c = math.isqrt(c2)
            if c * c == c2 and c >= b:
                return (a, b, c)
    return None


# ---------------------------------------------------------------------------
# compact-quotient model over x1^2 + x2^2 + x3^2 - d*x4^2


def _f_basis_conjugator(d: int):
    """C with C Q C^T = diag(1,1,1,-d); rows map F-coordinates to Q-coordinates."""
    c0 = np.array(
        [[1.0, 0, 0, 1.0], [0, 1.0, 0, 0], [0, 0, 1.0, 0], [1.0, 0, 0, -1.0]]
    )
    dd = np.diag([1.0 / qf.SQRT2, 1.0, 1.0, np.sqrt(d / 2.0)])
    C = dd @ c0
    Cinv = np.linalg.inv(c0) @ np.linalg.inv(dd)
    return C, Cinv


def _fint_inverse(M: np.ndarray, d: int) -> np.ndarray:
    """Exact inverse of an integral F-isometry: M^{-1} = (F M^T) F^{-1}.

    Scaling the last column by -1/d stays integral because every integral
    isometry of this form has its fourth row divisible by d in the first
    three entries (forced by the integrality of the inverse itself).
    """
    F = np.diag([1, 1, 1, -d]).astype(np.int64)
    num = F @ M.T.astype(np.int64)
    if np.any(num[:, 3] % d):
        raise ValueError("fourth row not divisible by d; not an integral isometry")
    Minv = num.copy()
    Minv[:, 3] = -(num[:, 3] // d)
    if not np.array_equal(Minv @ M, np.eye(4, dtype=np.int64)):
        raise ValueError("integral inverse construction failed")
    return Minv


def _f_solutions(d: int, value: int, x4_range) -> np.ndarray:
    """Integer rows v with v1^2+v2^2+v3^2 - d*v4^2 = value, v4 in x4_range."""
    out = []
    for x4 in x4_range:
        s = value + d * x4 * x4
        if s < 0:
            continue
        for x1 in range(-math.isqrt(s), math.isqrt(s) + 1):
            s1 = s - x1 * x1
            for x2 in range(-math.isqrt(s1), math.isqrt(s1) + 1):
                s2 = s1 - x2 * x2
                x3 = math.isqrt(s2)
                if x3 * x3 == s2:
                    out.append((x1, x2, x3, x4))
                    if x3:
                        out.append((x1, x2, -x3, x4))
    return np.array(sorted(set(out)), dtype=np.int64)


def _timelike_rows(d: int, k_bound: int) -> np.ndarray:
    """Fourth-row candidates: f-norm -d, first three entries divisible by d.

    Substituting (x1,x2,x3) = d*(k1,k2,k3) turns the norm condition into
    d*(k1^2+k2^2+k3^2) + 1 being a perfect square x4^2.  Only x4 > 0 rows
    are returned; the assembled elements are then orthochronous.
    """
    rows = []
    for ksum in range(k_bound + 1):
        x4 = math.isqrt(d * ksum + 1)
        if x4 * x4 != d * ksum + 1:
            continue
        for k1 in range(-math.isqrt(ksum), math.isqrt(ksum) + 1):
            r1 = ksum - k1 * k1
            for k2 in range(-math.isqrt(r1), math.isqrt(r1) + 1):
                r2 = r1 - k2 * k2
                k3 = math.isqrt(r2)
                if k3 * k3 == r2:
                    rows.append((d * k1, d * k2, d * k3, x4))
                    if k3:
                        rows.append((d * k1, d * k2, -d * k3, x4))
    return np.array(sorted(set(rows)), dtype=np.int64)


def _element_from_fint(M, C, Cinv) -> qf.GroupElement:
    mat4 = Cinv @ M.astype(float) @ C
    m2 = qf.mat2_from_mat4(mat4)
    return qf.GroupElement(
        mat2c=m2.mat2c, mat4r=mat4, exact=("fint", np.array(M, dtype=np.int64))
    )


def _fint_candidates(d: int, k_bound: int = 9):
    """Integral orthochronous det-1 isometries assembled from small rows.

    Rows 1..3 are drawn from the f-norm-1 vectors with |x4| <= 3, row 4 from
    the timelike family; mutually F-orthogonal choices give M F M^T = F
    exactly, by construction.  The list is closed under inverses.
    """
    F = np.diag([1, 1, 1, -d]).astype(np.int64)
    pool = _f_solutions(d, 1, range(-3, 4))
    rows4 = _timelike_rows(d, k_bound)
    found = {}
    for m4 in rows4:
        s1 = pool[(pool @ F @ m4) == 0]
        for i1 in range(len(s1)):
            m1 = s1[i1]
            s2 = s1[(s1 @ F @ m1) == 0]
            for i2 in range(len(s2)):
                m2 = s2[i2]
                s3 = s2[(s2 @ F @ m2) == 0]
                for m3 in s3:
                    M = np.stack([m1, m2, m3, m4])
                    if int(round(np.linalg.det(M.astype(float)))) != 1:
                        continue
                    found.setdefault(M.tobytes(), M)
    found.pop(np.eye(4, dtype=np.int64).tobytes(), None)
    for M in list(found.values()):
        Minv = _fint_inverse(M, d)
        found.setdefault(Minv.tobytes(), Minv)
    return list(found.values())


def _reachable_fint(target, gens, entry_cap, depth):
    """True if target is a short bounded-entry product of gens (exact search)."""
    tkey = target.tobytes()
    seen = {np.eye(4, dtype=np.int64).tobytes()}
    frontier = [np.eye(4, dtype=np.int64)]
    for _ in range(depth):
        nxt = []
        for M in frontier:
            for g in gens:
                P = M @ g
                if np.abs(P).max() > entry_cap:
                    continue
                key = P.tobytes()
                if key == tkey:
                    return True
                if key not in seen:
                    seen.add(key)
                    nxt.append(P)
        if not nxt or len(seen) > 20000:
            break
        frontier = nxt
    return False


def _greedy_generators(cands, d, C, Cinv, depth: int = 8):
    """Keep a norm-increasing subset whose words already cover the rest."""
    mats4 = np.einsum("ab,nbc,cd->nad", Cinv, np.stack(cands).astype(float), C)
    norms = np.linalg.svd(mats4, compute_uv=False)[:, 0]
    kept = []
    closed = []
    for idx in np.argsort(norms, kind="stable"):
        M = cands[idx]
        entry_cap = int(np.abs(M).max()) * 4 + 4
        if kept and _reachable_fint(M, closed, entry_cap, depth):
            continue
        kept.append(M)
        closed.append(M)
        closed.append(_fint_inverse(M, d))
    return kept


def build_cocompact(d: int = 7) -> LatticeModel:
    """Integral isometry group of x1^2+x2^2+x3^2 - d*x4^2, in the Q basis.

    The form must be anisotropic over the rationals, which for positive d
    means d is not a sum of three rational squares.
    """
    if d <= 0 or is_sum_of_three_squares(d):
        w = three_squares_witness(d) if d > 0 else None
        raise IsotropicForm(
            f"x1^2+x2^2+x3^2-{d}*x4^2 has rational null vectors"
            + (f", e.g. {w + (1,)}" if w else "")
        )
    C, Cinv = _f_basis_conjugator(d)
    cands = _fint_candidates(d)
    if not cands:
        raise ValueError(f"no integral isometries found for d={d}")
    gens, seen = [], set()
    for M in _greedy_generators(cands, d, C, Cinv):
        for P in (M, _fint_inverse(M, d)):
            key = P.tobytes()
            if key not in seen:
                seen.add(key)
                gens.append(_element_from_fint(P, C, Cinv))
    return LatticeModel(
        name=f"so{d}",
        mode="cocompact",
        generators=gens,
        cusps=[],
        conjugator=C,
        conjugator_inv=Cinv,
        form_d=d,
    )


# ---------------------------------------------------------------------------
# cusped model: the Gaussian-integer modular group


def build_bianchi() -> LatticeModel:
    """Gaussian-integer 2x2 model with one stored cusp class.

    The two unipotent generators stabilize the null vector e1 exactly; the
    inversion swaps it with the opposite null direction.  Cusp bookkeeping
    uses v = e1 at the identity frame, with horoball parameter T = 1.
    """
    t1 = qf.zi(1, 0, 1, 1)      # [[1, 0], [1, 1]]
    t2 = qf.zi(1, 0, 1j, 1)     # [[1, 0], [i, 1]]
    s = qf.zi(0, -1, 1, 0)      # [[0, -1], [1, 0]]
    gens = []
    for m in (t1, t2, s):
        g = qf.make_element(qf.zi_to_complex(m), exact=("zi", m))
        gens.append(g)
        gens.append(g.inv())
    cusp = CuspData(label="cusp0", g=qf.identity_element(), v=E1.copy(), depth=1.0)
    return LatticeModel(
        name="bianchi1", mode="finite-covolume", generators=gens, cusps=[cusp]
    )


# ---------------------------------------------------------------------------
# batched exact kernels for the ball search


def _zi_mul_stack(A, B):
    """(N,2,2,2) times (2,2,2) Gaussian-integer matrix product."""
    ar, ai = A[..., 0], A[..., 1]
    br, bi = B[..., 0], B[..., 1]
    rr = np.einsum("nik,kj->nij", ar, br) - np.einsum("nik,kj->nij", ai, bi)
    ri = np.einsum("nik,kj->nij", ar, bi) + np.einsum("nik,kj->nij", ai, br)
    return np.stack([rr, ri], axis=-1)


def _zi_canonical_stack(A):
    """Sign-normalize each matrix of the stack: first nonzero scalar > 0."""
    flat = A.reshape(len(A), -1)
    first = np.argmax(flat != 0, axis=1)
    vals = flat[np.arange(len(flat)), first]
    return np.ascontiguousarray(
        (flat * np.where(vals < 0, -1, 1)[:, None]).reshape(A.shape)
    )


def _zi_complex(A):
    return A[..., 0].astype(float) + 1j * A[..., 1].astype(float)


def _zi_norms(A):
    m = _zi_complex(A)
    s = np.linalg.svd(m, compute_uv=False)
    return s[..., 0] ** 2, m


_PHI_BASIS = None


def _right_action_stack(m):
    """right_action_matrix over a stack (N,2,2) of complex matrices."""
    global _PHI_BASIS
    if _PHI_BASIS is None:
        _PHI_BASIS = np.stack([qf.herm_from_vec(np.eye(4)[i]) for i in range(4)])
    out = np.empty(m.shape[:-2] + (4, 4))
    for i in range(4):
        img = np.einsum("...ba,bc,...cd->...ad", m.conj(), _PHI_BASIS[i], m)
        out[..., i, :] = qf.vec_from_herm(img)
    return out


# ---------------------------------------------------------------------------
# ball container and enumeration


@dataclass
class GroupBall:
    """Deduplicated elements whose 4x4 action has operator norm <= radius.

    Sorted by (norm rounded to 1e-9, exact key) with the identity pinned to
    index 0; the arrays are parallel.  `complete` records that the word
    search exhausted its frontier rather than stopping for any other reason.
    """

    model: str
    kind: str  # "zi" | "fint"
    radius: float
    exact: np.ndarray
    mat2: np.ndarray
    mat4: np.ndarray
    norms: np.ndarray
    complete: bool = True
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __len__(self):
        return len(self.norms)

    @property
    def identity_index(self) -> int:
        return 0

    def element(self, i: int) -> qf.GroupElement:
        if i not in self._cache:
            self._cache[i] = qf.GroupElement(
                mat2c=qf._canonical_sign(self.mat2[i]),
                mat4r=self.mat4[i],
                exact=(self.kind, self.exact[i]),
            )
        return self._cache[i]

    def sub(self, radius: float) -> "GroupBall":
        """Restriction to a smaller radius (no re-enumeration)."""
        if radius > self.radius:
            raise ValueError("can only shrink a ball")
        mask = self.norms <= radius * (1 + 1e-12)
        return GroupBall(
            model=self.model,
            kind=self.kind,
            radius=radius,
            exact=self.exact[mask],
            mat2=self.mat2[mask],
            mat4=self.mat4[mask],
            norms=self.norms[mask],
            complete=self.complete,
        )


def _sort_ball(exact, mat2, mat4, norms):
    keys = [e.tobytes() for e in exact]
    order = sorted(range(len(keys)), key=lambda i: (round(float(norms[i]), 9), keys[i]))
    idx = np.array(order, dtype=int)
    for pos in range(len(idx)):
        if np.allclose(mat4[idx[pos]], np.eye(4), atol=1e-9):
            ident = idx[pos]
            head = idx[0:pos].copy()
            idx[1 : pos + 1] = head
            idx[0] = ident
            break
    return exact[idx], mat2[idx], mat4[idx], norms[idx]


def _bfs_ball(eye, gens, mul, canon, normf, radius, cap):
    """Pruned breadth-first search over exact integer payloads."""
    seen = {canon(eye)[0].tobytes()}
    keep = [eye]
    frontier = eye
    bound = radius * BALL_SLACK
    while len(frontier):
        cand = canon(np.concatenate([mul(frontier, g) for g in gens]))
        cand = cand[normf(cand) <= bound]
        fresh = []
        for row in cand:
            key = row.tobytes()
            if key not in seen:
                seen.add(key)
                fresh.append(row)
        if len(seen) > cap:
            raise BudgetExceeded(
                f"ball search passed {cap} elements before exhausting radius {radius:g}"
            )
        if not fresh:
            break
        frontier = np.stack(fresh)
        keep.append(frontier)
    return np.concatenate(keep)


def _enumerate_zi(L, radius, cap):
    gens = [g.exact[1] for g in L.generators]
    eye = np.zeros((1, 2, 2, 2), dtype=np.int64)
    eye[0, 0, 0, 0] = eye[0, 1, 1, 0] = 1
    exact = _bfs_ball(
        eye, gens, _zi_mul_stack, _zi_canonical_stack,
        lambda A: _zi_norms(A)[0], radius, cap,
    )
    norms, m2 = _zi_norms(exact)
    mask = norms <= radius * (1 + 1e-12)
    exact, m2, norms = exact[mask], m2[mask], norms[mask]
    mat4 = _right_action_stack(m2)
    return _sort_ball(exact, m2, mat4, norms)


def _enumerate_fint(L, radius, cap):
    gens = [g.exact[1] for g in L.generators]
    C, Cinv = L.conjugator, L.conjugator_inv

    def normf(A):
        mats4 = np.einsum("ab,nbc,cd->nad", Cinv, A.astype(float), C)
        return np.linalg.svd(mats4, compute_uv=False)[:, 0]

    exact = _bfs_ball(
        np.eye(4, dtype=np.int64)[None], gens,
        lambda A, B: np.einsum("nik,kj->nij", A, B),
        lambda A: A, normf, radius, cap,
    )
    mat4 = np.einsum("ab,nbc,cd->nad", Cinv, exact.astype(float), C)
    norms = np.linalg.svd(mat4, compute_uv=False)[:, 0]
    mask = norms <= radius * (1 + 1e-12)
    exact, mat4, norms = exact[mask], mat4[mask], norms[mask]
    mat2 = np.stack([qf.mat2_from_mat4(R).mat2c for R in mat4])
    return _sort_ball(exact, mat2, mat4, norms)


def enumerate_ball(
    L: LatticeModel,
    radius: float,
    cap: int = DEFAULT_BALL_CAP,
    use_cache: bool = True,
    force: bool = False,
) -> GroupBall:
    """Every group element whose 4x4 action has operator norm <= radius.

    Breadth-first word search over the generators, pruned at
    radius * BALL_SLACK, deduplicated by exact integer keys; the result is
    deterministic for a fixed model and radius.  Balls are cached on disk
    and integrity-checked on reload; a stale or corrupt record triggers a
    silent rebuild.
    """
    if radius < 1.0:
        raise ValueError("radius must be at least 1 (the identity has norm 1)")
    kind = "zi" if L.mode == "finite-covolume" else "fint"
    path = caching.record_path(f"{L.name}_R{radius:g}.ball")
    fp = L.generator_fingerprint()
    if use_cache and not force and path.exists():
        try:
            header, arrays = caching.load_record(path)
            if (
                header.get("model") == L.name
                and header.get("radius") == radius
                and header.get("genfp") == fp
                and header.get("kind") == kind
            ):
                return GroupBall(
                    model=L.name,
                    kind=kind,
                    radius=radius,
                    exact=arrays["exact"],
                    mat2=arrays["mat2re"] + 1j * arrays["mat2im"],
                    mat4=arrays["mat4"],
                    norms=arrays["norms"],
                )
        except caching.RecordError:
            pass  # fall through to a rebuild
    if kind == "zi":
        exact, mat2, mat4, norms = _enumerate_zi(L, radius, cap)
    else:
        exact, mat2, mat4, norms = _enumerate_fint(L, radius, cap)
    ball = GroupBall(
        model=L.name, kind=kind, radius=radius,
        exact=exact, mat2=mat2, mat4=mat4, norms=norms,
    )
    if use_cache:
        caching.save_record(
            path,
            {
                "model": L.name,
                "radius": radius,
                "kind": kind,
                "genfp": fp,
                "count": len(ball),
                "slack": BALL_SLACK,
            },
            {
                "exact": exact,
                "mat2re": np.ascontiguousarray(mat2.real),
                "mat2im": np.ascontiguousarray(mat2.imag),
                "mat4": mat4,
                "norms": norms,
            },
        )
    return ball


def reference_ball_keys(L: LatticeModel, radius: float, word_length: int) -> set:
    """Slow oracle for enumerate_ball: exhaustive words, no norm pruning.

    Returns the exact keys of all elements expressible as words of length
    <= word_length whose norm is <= radius.  Cost grows exponentially with
    word_length; meant for small cross-checks only.
    """
    gens = [g.exact[1] for g in L.generators]
    if L.mode == "finite-covolume":
        eye = np.zeros((1, 2, 2, 2), dtype=np.int64)
        eye[0, 0, 0, 0] = eye[0, 1, 1, 0] = 1
        mul, canon = _zi_mul_stack, _zi_canonical_stack
        normf = lambda A: _zi_norms(A)[0]
    else:
        eye = np.eye(4, dtype=np.int64)[None]
        C, Cinv = L.conjugator, L.conjugator_inv
        mul = lambda A, B: np.einsum("nik,kj->nij", A, B)
        canon = lambda A: A
        normf = lambda A: np.linalg.svd(
            np.einsum("ab,nbc,cd->nad", Cinv, A.astype(float), C), compute_uv=False
        )[:, 0]
    seen = {eye[0].tobytes()}
    out = {eye[0].tobytes()}
    frontier = eye
    for _ in range(word_length):
        cand = canon(np.concatenate([mul(frontier, g) for g in gens]))
        fresh = []
        for row in cand:
            key = row.tobytes()
            if key not in seen:
                seen.add(key)
                fresh.append(row)
        if not fresh:
            break
        frontier = np.stack(fresh)
        for row, nm in zip(frontier, normf(frontier)):
            if nm <= radius * (1 + 1e-12):
                out.add(row.tobytes())
    return out


# ---------------------------------------------------------------------------
# heights


def cusp_norm(g: qf.GroupElement) -> float:
    """||e1 R(g)||: reciprocal Iwasawa height of the frame representative."""
    m = g.mat2c
    return float(abs(m[0, 0]) ** 2 + abs(m[0, 1]) ** 2)


def _gaussian_round(z: complex) -> complex:
    return complex(round(z.real), round(z.imag))


def _pair_reduce(m: np.ndarray):
    """Lagrange reduction of the rank-2 Gaussian-integer row lattice of m.

    Returns (gamma, w) with w = gamma m, gamma an exact unimodular payload,
    and the rows of w short and nearly orthogonal.
    """
    w = np.array(m, dtype=complex)
    gam = np.zeros((2, 2, 2), dtype=np.int64)
    gam[0, 0, 0] = gam[1, 1, 0] = 1
    swap = qf.zi(0, 1, -1, 0)
    for _ in range(256):
        if np.linalg.norm(w[1]) < np.linalg.norm(w[0]):
            w = np.array([w[1], -w[0]])
            gam = qf.zi_mul(swap, gam)
        mu = _gaussian_round(complex(np.vdot(w[0], w[1]) / np.vdot(w[0], w[0]).real))
        if mu == 0:
            break
        w = np.array([w[0], w[1] - mu * w[0]])
        gam = qf.zi_mul(qf.zi(1, 0, -mu, 1), gam)
    return gam, w


def height_omega(L: LatticeModel, g: qf.GroupElement, window_cap: int = 16) -> float:
    """Certified height of the coset of g: max(2, 1 / min ||(a,b) m||^2).

    The minimum runs over nonzero Gaussian-integer pairs (a, b).  First rows
    of group elements realize every primitive pair, and imprimitive pairs
    never beat primitive ones, so this equals the minimum over the group
    orbit of the cusp vector.  The pair lattice is Lagrange-reduced first so
    that a small integer window provably contains the minimizer; the window
    enumeration makes the result a certificate, not a heuristic.
    """
    if L.mode == "cocompact":
        return 2.0
    gam, w = _pair_reduce(g.mat2c)
    best = float(min(np.linalg.norm(w[0]) ** 2, np.linalg.norm(w[1]) ** 2))
    smin = float(np.linalg.svd(w, compute_uv=False)[-1])
    window = int(math.ceil(math.sqrt(best) / smin)) if smin > 0 else window_cap + 1
    if window > window_cap:
        raise BallTooSmall(
            f"height window {window} exceeds cap {window_cap}; reduce the frame first"
        )
    k = np.arange(-window, window + 1)
    a, b, c, e = np.meshgrid(k, k, k, k, indexing="ij")
    alpha = (a + 1j * b).ravel()
    beta = (c + 1j * e).ravel()
    rows = alpha[:, None] * w[0][None, :] + beta[:, None] * w[1][None, :]
    nn = np.einsum("ij,ij->i", rows, rows.conj()).real
    nn[(alpha == 0) & (beta == 0)] = np.inf
    best = min(best, float(nn.min()))
    return max(2.0, 1.0 / best)


def horoball_member(L: LatticeModel, g: qf.GroupElement, index: int = 0) -> bool:
    """Whether the coset of g meets the stored horoball of the given cusp."""
    if L.mode == "cocompact":
        return False
    T = L.cusps[index].depth
    return height_omega(L, g) >= math.exp(T) * (1 - 1e-9)


# ---------------------------------------------------------------------------
# frame reduction and sampling


def reduce_frame(L: LatticeModel, g: qf.GroupElement, ball: GroupBall, max_steps: int = 80):
    """Greedy descent: returns (g', gamma) with g' = gamma g Frobenius-small.

    Each step left-multiplies by the ball element that most decreases
    ||.||_F; stops at a local minimum.  The coset is unchanged and gamma
    carries its exact payload.
    """
    cur = g
    total = None
    for _ in range(max_steps):
        prods = np.einsum("nab,bc->nac", ball.mat2, cur.mat2c)
        fr = np.einsum("nab,nab->n", prods, prods.conj()).real
        k = int(np.argmin(fr))
        if fr[k] >= float(np.sum(np.abs(cur.mat2c) ** 2)) - 1e-12:
            break
        step = ball.element(k)
        cur = step @ cur
        total = step if total is None else step @ total
    if total is None:
        total = ball.element(ball.identity_index)
    return cur, total


def random_frame(L: LatticeModel, rng, depth: float | None = None, spread: float = 0.9):
    """A random frame representative.

    depth=None gives a generic frame near the base point.  A positive depth
    (cusped model only) places the representative depth units into the
    stored horoball: its reciprocal height is exactly e^{-depth}.
    """
    k = qf.random_unitary(rng)
    if depth is not None:
        if not L.cusps:
            raise ValueError("depth sampling requires a cusped model")
        z = complex(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5))
        return qf.u_lower(z) @ qf.a_flow(-depth) @ k
    w = rng.normal(size=6) * (spread / math.sqrt(6.0))
    return qf.exp_lie(qf.lie_vector(re=w[:3], im=w[3:])) @ k


# ---------------------------------------------------------------------------
# injectivity radius


def injectivity_radius(L: LatticeModel, g: qf.GroupElement, ball: GroupBall) -> float:
    """Half the minimal displacement of the frame by nontrivial group elements.

    Displacements use the principal-log proxy, which dominates the distance
    the base point moves.  The reported minimum is certified: either every
    element outside the ball already moves the base point further than the
    minimum found (thick case), or the frame sits deep in the cusp horoball
    and the height gap excludes everything except the cusp-fixing subgroup,
    whose displacement minimizers lie inside any ball of radius >= 3 (deep
    case).  Raises BallTooSmall when neither certificate applies.
    """
    minv = np.linalg.inv(g.mat2c)
    stack = np.einsum("ab,nbc,cd->nad", minv, ball.mat2, g.mat2c)
    disp = qf.displacement_norm_batch(stack)
    disp[ball.identity_index] = np.inf
    val = float(disp.min())
    margin = val * 1.02 + 0.01
    # thick certificate: gamma outside the ball has d(o, gamma o) > log R,
    # hence displaces the frame's base point more than log R - 2 d(o, g o),
    # and the proxy dominates that displacement
    d_o = qf.frame_origin_distance(g)
    if math.log(ball.radius) - 2.0 * d_o >= margin:
        return 0.5 * val
    if L.cusps:
        t = -math.log(cusp_norm(g))
        T = L.cusps[0].depth
        # deep certificate: gamma not fixing the cusp direction carries the
        # depth-T horoball to a disjoint one, so it displaces the base point
        # by at least 2(t - T); among cusp-fixing elements the displacement
        # minimizers are the unit-translation unipotents, operator norm
        # (3 + sqrt 5)/2 < 3, inside the ball
        if t > T and 2.0 * (t - T) >= margin and ball.radius >= 3.0:
            return 0.5 * val
    raise BallTooSmall(
        f"cannot certify the displacement minimum at ball radius {ball.radius:g}"
    )


# ---------------------------------------------------------------------------
# invariant floors and model constants


def discreteness_floor(L: LatticeModel, ball: GroupBall) -> float:
    """Minimal squared norm of the moved cusp vector over the ball.

    Elements not fixing the cusp vector send it to a vector of squared norm
    |alpha|^2 + |beta|^2, a positive integer; the floor is the minimum over
    the ball.  Integrality is what makes the floor radius-stable.
    """
    if not L.cusps:
        raise ValueError("no cusp data in this model")
    a = ball.exact[:, 0, :, :]  # first rows: (column, re/im)
    norms = (a.astype(np.int64) ** 2).sum(axis=(1, 2))
    beta_zero = (a[:, 1, 0] == 0) & (a[:, 1, 1] == 0)
    fixes = beta_zero & (norms == 1)
    moved = norms[~fixes]
    if not len(moved):
        raise BallTooSmall("ball contains only cusp-fixing elements")
    return float(moved.min())


def model_constants(
    L: LatticeModel, ball: GroupBall, rng, samples: int = 80
) -> ModelConstants:
    """Empirical thick-thin constants from a reduced frame sample.

    eps_m is the smallest injectivity radius observed away from the stored
    horoballs (compact case: twice the sample minimum, so that eps_x equals
    the minimum itself); eps_x = eps_m / 2; d_x is the largest height seen
    on the eps_x-thick part of the sample.
    """
    injs, omegas, members = [], [], []
    for i in range(samples):
        if L.cusps and i % 3 == 0:
            f = random_frame(L, rng, depth=float(rng.uniform(1.6, 3.0)))
        else:
            f = random_frame(L, rng)
            f, _ = reduce_frame(L, f, ball)
        injs.append(injectivity_radius(L, f, ball))
        omegas.append(height_omega(L, f))
        members.append(horoball_member(L, f))
    injs = np.array(injs)
    omegas = np.array(omegas)
    members = np.array(members)
    if L.cusps:
        outside = injs[~members]
        eps_m = float(outside.min()) if len(outside) else float(injs.min())
    else:
        eps_m = 2.0 * float(injs.min())
    eps_x = eps_m / 2.0
    thick = omegas[injs >= eps_x]
    d_x = float(thick.max()) if len(thick) else 2.0
    L.constants = ModelConstants(eps_m=eps_m, eps_x=eps_x, eta0=L.eta0, d_x=d_x)
    return L.constants


# ---------------------------------------------------------------------------
# compactness certificate: bounded cell in the Klein ball


def _q_inner(u, v) -> float:
    return float(u @ qf.Q_MAT @ v)


_KLEIN_BASIS = np.array(
    [[1.0 / qf.SQRT2, 0.0, 0.0, 1.0 / qf.SQRT2], [0, 1.0, 0, 0], [0, 0, 1.0, 0]]
)


def _klein_point(mat2c: np.ndarray):
    """Klein-ball coordinates of the base point's image, plus cosh(distance)."""
    X = mat2c @ mat2c.conj().T
    X = X / math.sqrt(float(np.real(np.linalg.det(X))))
    v = qf.vec_from_herm(X)
    bp = _q_inner(v, qf.ORIGIN_VEC)
    tau = -bp  # cosh of the distance to the base point
    s = v + bp * qf.ORIGIN_VEC
    return np.array([_q_inner(s, b) for b in _KLEIN_BASIS]) / tau, tau


def _sphere_grid(n: int) -> np.ndarray:
    """Fibonacci point set on the unit sphere (covering radius ~ 2.4/sqrt n)."""
    i = np.arange(n) + 0.5
    phi = math.pi * (1.0 + math.sqrt(5.0)) * i
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def dirichlet_radius_bound(ball: GroupBall, grid: int = 20000, gap: float = 0.03):
    """(certified, r_bound): outer radius of the cell around the base point.

    The cell cut out by the perpendicular bisectors to the ball elements is
    scanned along a sphere grid whose covering radius stays below `gap`; the
    directional bound deflates each denominator by `gap` to absorb grid
    error, so r_bound really dominates the cell's radial extent.
    certified=True means the cell lies in the Klein ball of radius
    r_bound < 0.97: the cell is compact, so the group the ball came from
    has a bounded quotient.
    """
    normals, offsets = [], []
    for i in range(len(ball)):
        if i == ball.identity_index:
            continue
        k, tau = _klein_point(ball.mat2[i])
        nk = float(np.linalg.norm(k))
        if nk < 1e-9:
            continue  # fixes the base point: no bisector
        # halfspace containing the base point: <x, k/|k|> <= (tau-1)/(|k| tau)
        normals.append(k / nk)
        offsets.append((tau - 1.0) / (nk * tau))
    if not normals:
        return False, math.inf
    normals = np.array(normals)
    offsets = np.array(offsets)
    u = _sphere_grid(grid)
    dots = u @ normals.T - gap
    pos = dots > 1e-9
    ratios = np.where(pos, offsets[None, :] / np.where(pos, dots, 1.0), np.inf)
    r_bound = float(ratios.min(axis=1).max())
    certified = bool(np.isfinite(r_bound) and r_bound < 0.97)
    return certified, r_bound


def quotient_diameter_bound(ball: GroupBall) -> float:
    """Hyperbolic diameter bound from the Klein cell radius (compact case)."""
    certified, r = dirichlet_radius_bound(ball)
    if not certified:
        raise BallTooSmall("cell not certified bounded at this ball radius")
    return 2.0 * math.atanh(min(r, 1.0 - 1e-12))
