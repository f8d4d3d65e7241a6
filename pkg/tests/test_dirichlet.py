"""Dirichlet polygons, pinned to the classical modular-group anchors.

The polygon around 2i for the modular group is the standard fundamental
domain: area pi/3, signature (0; 2, 3; 1), vertices rho, rho + 1, i and
the cusp, truncated diameter log 3.  The even-word subgroup doubles it.
Free groups get convex-core areas, which for a rank-2 free quotient must
converge to 2 pi from above as the limit-set cover refines.
"""

import math

import numpy as np
import pytest

from isolab import dirichlet as dd
from isolab import fuchsian as fh
from isolab.errors import InfiniteArea

S_MAT = np.array([[0.0, -1.0], [1.0, 0.0]])
T_MAT = np.array([[1.0, 1.0], [0.0, 1.0]])
RHO = -0.5 + 1j * math.sqrt(3.0) / 2.0


def modular_group():
    return fh.FuchsianGroup("modular", [S_MAT, T_MAT])


def modular_domain(center=2j, radius=20.0):
    ball = fh.word_ball(modular_group(), radius)
    return dd.dirichlet_domain(ball.mats, center)


def signature(dom):
    return (dom.genus, tuple(dom.cone_orders), dom.cusp_count)


def mat_inverse(m):
    return np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]])


# ---------------------------------------------------------------------------
# the modular polygon


def test_modular_area_and_signature():
    dom = modular_domain()
    assert abs(dom.area - math.pi / 3.0) < 1e-12
    assert signature(dom) == (0, (2, 3), 1)
    assert len(dom.verts) == 4
    assert sum(dom.ideal) == 1


def test_modular_vertices():
    dom = modular_domain()
    finite = [z for z in dom.uhp_vertices() if z is not None]
    want = [RHO, RHO + 1.0, 1j]
    assert len(finite) == 3
    for w in want:
        assert min(abs(z - w) for z in finite) < 1e-7


def test_modular_diameter():
    # realized by the corner pair rho, rho + 1 at distance log 3; the cusp
    # truncation points lie closer
    dom = modular_domain()
    assert abs(dom.diameter - math.log(3.0)) < 1e-6


def test_modular_pairing_structure():
    dom = modular_domain()
    n = len(dom.verts)
    assert sorted(dom.pair_perm) == list(range(n))
    for i, j in enumerate(dom.pair_perm):
        assert dom.pair_perm[j] == i
        assert dd._same_mat(mat_inverse(dom.mats[i]), dom.mats[j])


def test_modular_cycles_partition():
    dom = modular_domain()
    seen = sorted(k for cyc, _, _ in dom.cycles for k in cyc)
    assert seen == list(range(len(dom.verts)))
    orders = sorted(o for _, _, o in dom.cycles)
    assert orders == [0, 2, 3]


def test_even_subgroup_doubles():
    ball = fh.word_ball(modular_group(), 20.0)
    even = fh.even_subgroup_elements(ball)
    dom1 = modular_domain()
    dom2 = dd.dirichlet_domain(even, 2j)
    assert abs(dom2.area - 2.0 * dom1.area) < 1e-12
    assert signature(dom2) == (0, (3, 3), 1)


def test_center_invariance():
    # a generic center needs a deeper ball: the cutting elements near the
    # new center can be much larger words
    ball = fh.word_ball(modular_group(), 200.0)
    dom = dd.dirichlet_domain(ball.mats, 0.3 + 1.7j)
    assert abs(dom.area - math.pi / 3.0) < 1e-9
    assert signature(dom) == (0, (2, 3), 1)


def test_rejected_centers():
    ball = fh.word_ball(modular_group(), 20.0)
    with pytest.raises(ValueError):
        dd.dirichlet_domain(ball.mats, 1j)  # fixed by an order-2 element
    with pytest.raises(ValueError):
        dd.dirichlet_domain(ball.mats, 1.0 - 2j)


# ---------------------------------------------------------------------------
# free groups and convex cores


def test_free_group_raises_without_flag():
    sch = fh.schottky_pair(4.0)
    ball = fh.word_ball(sch, 1.2e4)
    with pytest.raises(InfiniteArea):
        dd.dirichlet_domain(ball.mats, 1j)


def test_elementary_group_raises():
    g = fh.hyperbolic_with_axis(-1.0, 1.0, 2.0)
    mats = [np.eye(2), g, mat_inverse(g)]
    with pytest.raises(InfiniteArea):
        dd.dirichlet_domain(mats, 2j)


def test_schottky_core_area():
    sch = fh.schottky_pair(4.0)
    ball = fh.word_ball(sch, 1.2e4)
    dom = dd.dirichlet_domain(ball.mats, 1j, allow_free=True)
    assert dom.free_sides
    assert dom.area == math.inf
    target = 2.0 * math.pi
    a5 = dd.core_polygon_area(dom, fh.limit_set_cover(sch, depth=5))
    a7 = dd.core_polygon_area(dom, fh.limit_set_cover(sch, depth=7))
    assert a5 >= a7 >= target - 1e-9
    assert a5 - target < 1e-3
    assert a7 - target < 1e-6


def test_cusped_core_area():
    par = fh.parabolic_pair(4.0)
    ball = fh.word_ball(par, 1.2e4)
    dom = dd.dirichlet_domain(ball.mats, 1j, allow_free=True)
    assert dom.free_sides
    target = 2.0 * math.pi
    a7 = dd.core_polygon_area(dom, fh.limit_set_cover(par, depth=7))
    a9 = dd.core_polygon_area(dom, fh.limit_set_cover(par, depth=9))
    assert a7 >= a9 >= target - 1e-9
    assert a7 - target < 1e-4
    assert a9 - target < 1e-6


def test_core_of_compact_domain_is_whole():
    dom = modular_domain()
    cover = fh.limit_set_cover(fh.schottky_pair(4.0), depth=3)
    assert dd.core_polygon_area(dom, cover) == dom.area
