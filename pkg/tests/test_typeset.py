import itertools
import random
from fractions import Fraction as F

import pytest

from biradon.typeset import (
    DEGENERATE,
    EXPECTED_VERTICES,
    NONDEGENERATE,
    HalfSpace,
    InequalitySystem,
    active_constraints,
    build_system,
    contains,
    convexity_cross_check,
    cube_system,
    edges,
    enumerate_vertices,
    exponent_triple,
    fmt_triple,
    rank,
    to_pqr,
)

NONDEG_VERTS = {(F(0), F(0), F(0)), (F(0), F(1), F(1)), (F(1), F(0), F(1)), (F(2, 3), F(0), F(1, 3)),
                (F(0), F(2, 3), F(1, 3)), (F(2, 3), F(2, 3), F(1)), (F(1, 2), F(1, 2), F(1, 2))}


def test_system_sizes():
    assert len(build_system("nondeg")) == 13
    assert len(build_system("deg")) == 11
    assert len(build_system("deg", include_dual_rectangles=True)) == 13
    with pytest.raises(ValueError):
        build_system("other")


def test_origin_feasible():
    for case in ("nondeg", "deg"):
        assert contains(build_system(case), (0, 0, 0))[0]


def test_vertex_lists():
    assert set(enumerate_vertices(build_system(NONDEGENERATE))) == NONDEG_VERTS
    deg = enumerate_vertices(build_system(DEGENERATE))
    assert set(deg) == NONDEG_VERTS - {(F(1, 2),) * 3}
    assert deg == sorted(deg)
    assert enumerate_vertices(build_system(NONDEGENERATE)) == EXPECTED_VERTICES[NONDEGENERATE]


def test_dual_rectangles_do_not_change_degenerate_vertices():
    a = enumerate_vertices(build_system(DEGENERATE))
    b = enumerate_vertices(build_system(DEGENERATE, include_dual_rectangles=True))
    assert a == b


def test_cube_corners():
    verts = enumerate_vertices(cube_system())
    assert set(verts) == set(itertools.product((F(0), F(1)), repeat=3))


def test_membership_examples():
    half = (F(1, 2),) * 3
    assert contains(build_system("nondeg"), half)[0]
    ok, bad = contains(build_system("deg"), half)
    assert not ok
    assert [h.coeffs for h in bad] == [(3, 3, -3)]
    assert bad[0].lhs(half) == F(3, 2) and bad[0].bound == 1
    for case in ("nondeg", "deg"):
        assert contains(build_system(case), (F(2, 3), F(2, 3), 1))[0]


def test_cross_checks():
    for case in (NONDEGENERATE, DEGENERATE):
        s = build_system(case)
        assert convexity_cross_check(enumerate_vertices(s), s).ok
    s = build_system(NONDEGENERATE)
    missing = [v for v in enumerate_vertices(s) if v != (F(1, 2),) * 3]
    cc = convexity_cross_check(missing, s)
    assert not cc.ok
    assert cc.witness is not None
    assert not convexity_cross_check(missing, s, n_points=0).ok


def test_cross_check_catches_extra_vertex():
    s = build_system(DEGENERATE)
    verts = enumerate_vertices(s) + [(F(1, 2),) * 3]
    cc = convexity_cross_check(verts, s)
    assert not cc.ok and "violates" in cc.reason


def test_order_independence():
    s = build_system(NONDEGENERATE)
    rng = random.Random(5)
    for _ in range(5):
        hs = list(s.halfspaces)
        rng.shuffle(hs)
        assert enumerate_vertices(InequalitySystem(s.case, tuple(hs))) == enumerate_vertices(s)


def test_vertices_have_three_independent_active_constraints():
    for case in (NONDEGENERATE, DEGENERATE):
        s = build_system(case)
        for v in enumerate_vertices(s):
            act = active_constraints(s, v)
            assert rank([h.coeffs for h in act]) == 3


def test_degenerate_inside_nondegenerate():
    nd = build_system(NONDEGENERATE)
    for v in enumerate_vertices(build_system(DEGENERATE)):
        assert contains(nd, v)[0]


def test_no_floats_in_outputs():
    for v in enumerate_vertices(build_system(NONDEGENERATE)):
        assert all(type(c) is F for c in v)


def test_edges_present():
    s = build_system(NONDEGENERATE)
    e = edges(s)
    assert len(e) >= 9  # a 3-polytope with 7 vertices has at least 7 * 3 / 2 edges
    assert all(a != b for a, b in e)


def test_halfspace_validation_and_str():
    with pytest.raises(ValueError):
        HalfSpace((0, 0, 0), 1)
    assert str(HalfSpace((2, 1, -1), 1)) == "2u + v - w <= 1"


def test_exponent_helpers():
    assert exponent_triple("3/2", "inf", 1) == (F(2, 3), F(0), F(1))
    assert to_pqr((F(2, 3), F(0), F(1))) == ("3/2", "inf", "1")
    assert fmt_triple((F(1, 2), F(0), F(1))) == "(1/2, 0, 1)"
    with pytest.raises(ValueError):
        exponent_triple("1/2", 1, 1)


def test_unbounded_rejected():
    s = InequalitySystem("open", (HalfSpace((1, 0, 0), 1), HalfSpace((0, 1, 0), 1), HalfSpace((0, 0, 1), 1)))
    with pytest.raises(ValueError):
        enumerate_vertices(s)
