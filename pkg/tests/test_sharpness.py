import json
import math

import numpy as np
import pytest

from biradon.grid import GridSpec, measure
from biradon.sharpness import (
    ANNULUS,
    BALL_ANNULUS,
    LARGE_BALL,
    RECT_DEG,
    RECT_NONDEG,
    SMALL_BALL,
    TANGENT_RECTANGLE,
    ExtremalFamily,
    ResolutionError,
    check_constraint,
    fit_slope,
    generate,
    restricted_type_ratio,
    scaling_sweep,
    theta_sweep,
)
from biradon.transforms import CircleQuadrature


def test_generate_small_ball():
    g = GridSpec(0.2, 0.1 / 16)
    fam = ExtremalFamily(SMALL_BALL, 0.1)
    assert abs(measure(generate(fam, g)) - math.pi * 0.01) <= g.spacing * fam.perimeter


def test_generate_annulus():
    g = GridSpec(2.2, 0.1 / 8)
    fam = ExtremalFamily(ANNULUS, 0.1, radius=2.0)
    assert abs(measure(generate(fam, g)) - 2 * math.pi * 2 * 0.1) <= g.spacing * fam.perimeter


def test_generate_tangent_rectangle():
    g = GridSpec(1.2, 0.04 / 8)
    fam = ExtremalFamily(TANGENT_RECTANGLE, 0.2)
    F = generate(fam, g)
    assert abs(measure(F) - 0.008) <= g.spacing * fam.perimeter
    # touches the circle at the north pole from both sides of the tangent line
    x1, x2 = np.meshgrid(g.coords, g.coords, indexing="ij")
    on = F.values > 0
    assert np.all(np.abs(x1[on]) <= 0.1 + 1e-12)
    assert np.all(np.abs(x2[on] - 1) <= 0.02 + 1e-12)


def test_generate_rejects_coarse_grid():
    with pytest.raises(ResolutionError, match="needs h <= 0.025"):
        generate(ExtremalFamily(SMALL_BALL, 0.1), GridSpec(1.0, 0.05))
    with pytest.raises(ResolutionError):
        generate(ExtremalFamily(ANNULUS, 0.1, radius=2.0), GridSpec(1.0, 0.01))


def test_family_validation():
    with pytest.raises(ValueError):
        ExtremalFamily(SMALL_BALL, 0.0)
    with pytest.raises(ValueError):
        ExtremalFamily("triangle", 1.0)


def test_ball_annulus_slope_and_theta_pi():
    for theta in (math.pi / 2, math.pi):
        s = scaling_sweep(BALL_ANNULUS, 1, [1 / 8, 1 / 16, 1 / 32], theta=theta)
        assert abs(s.fit.slope - 2.0) <= 0.15


def test_ball_annulus_slope_r2():
    s = scaling_sweep(BALL_ANNULUS, 2, [1 / 4, 1 / 8, 1 / 16])
    assert abs(s.fit.slope - 1.5) <= 0.15


def test_rectangle_slopes():
    deg = scaling_sweep(RECT_DEG, 1, [1 / 4, 1 / 8, 1 / 16])
    assert deg.theta == math.pi
    assert abs(deg.fit.slope - 4.0) <= 0.3
    nd = scaling_sweep(RECT_NONDEG, 1, [1 / 4, 1 / 8, 1 / 16], theta=math.pi / 3)
    assert abs(nd.fit.slope - 5.0) <= 0.3


def test_sweep_guards():
    with pytest.raises(ValueError):
        scaling_sweep(BALL_ANNULUS, 1, [1 / 4, 1 / 8])
    with pytest.raises(ValueError):
        scaling_sweep(BALL_ANNULUS, 1, [1 / 4, 1 / 8, 1 / 24])
    with pytest.raises(ValueError):
        scaling_sweep(RECT_NONDEG, 1, [1 / 4, 1 / 8, 1 / 16], theta=math.pi)
    with pytest.raises(ResolutionError):
        scaling_sweep(BALL_ANNULUS, 1, [1 / 8, 1 / 16, 1 / 32], node_factor=0.5)
    with pytest.raises(ResolutionError):
        scaling_sweep(BALL_ANNULUS, 1, [1 / 8, 1 / 16, 1 / 32], spacing=0.01)


def test_sweep_accepts_increasing_ladder_and_is_deterministic():
    a = scaling_sweep(BALL_ANNULUS, 1, [1 / 16, 1 / 8, 1 / 4])
    b = scaling_sweep(BALL_ANNULUS, 1, [1 / 4, 1 / 8, 1 / 16])
    assert a.scales == [0.25, 0.125, 0.0625]
    assert a.to_csv() == b.to_csv()
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())


def test_slope_fit():
    fit = fit_slope([1, 0.5, 0.25], [3.0, 0.75, 0.1875])
    assert fit.slope == pytest.approx(2.0, abs=1e-12)
    assert fit.residual <= 1e-12
    with pytest.raises(ValueError):
        fit_slope([1, 0.5], [1, 0.5])


@pytest.fixture(scope="module")
def ba_sweep():
    return scaling_sweep(BALL_ANNULUS, 1, [1 / 8, 1 / 16, 1 / 32], extra_r=[2])


def test_constraint_equality_bounded(ba_sweep):
    rep = check_constraint(ba_sweep, "3/2", "3/2", 1)
    assert rep.satisfied and rep.margin == 0
    assert abs(rep.measured_ratio_slope) <= 0.15
    assert rep.consistent


def test_constraint_violated_diverges(ba_sweep):
    rep = check_constraint(ba_sweep, "4/3", "4/3", 1)
    assert not rep.satisfied
    assert rep.measured_ratio_slope < -0.1
    assert rep.consistent
    assert json.loads(json.dumps(rep.to_dict()))["consistent"] is True


def test_constraint_needs_recorded_norm(ba_sweep):
    with pytest.raises(ValueError, match="extra_r"):
        check_constraint(ba_sweep, 2, 2, 3)


def test_rectangles_degenerate_222_diverges():
    s = scaling_sweep(RECT_DEG, 2, [1 / 4, 1 / 8, 1 / 16])
    rep = check_constraint(s, 2, 2, 2)
    assert not rep.satisfied
    assert rep.measured_ratio_slope < -0.1 and rep.consistent


def test_large_ball_constraint_direction():
    s = scaling_sweep(LARGE_BALL, 1, [8, 4, 2], extra_r=[2])
    # 1/r <= 1/p + 1/q holds strictly at (1, 1, 1): ratio decays with R
    # (the equality case sits inside the pre-asymptotic error at R <= 8)
    rep = check_constraint(s, 1, 1, 1)
    assert rep.satisfied and not rep.diverges
    assert rep.measured_ratio_slope < 0
    # (inf, inf, 2) violates it: ratio grows like R^(2/r)
    rep = check_constraint(s, "inf", "inf", 2)
    assert not rep.satisfied and rep.diverges


def unit_disk(h):
    g = GridSpec(1.0 + 1.5 + 4 * h, h)
    return generate(ExtremalFamily(SMALL_BALL, 1.0), g)


def test_restricted_type_ratio_stable_under_refinement():
    a = restricted_type_ratio(unit_disk(1 / 16), unit_disk(1 / 16), math.pi / 2, CircleQuadrature(256))
    b = restricted_type_ratio(unit_disk(1 / 32), unit_disk(1 / 32), math.pi / 2, CircleQuadrature(512))
    assert a > 0 and abs(a / b - 1) <= 0.1


def test_restricted_type_ratio_translation_invariant():
    h = 1 / 16
    g = GridSpec(3.0, h)
    E0 = generate(ExtremalFamily(SMALL_BALL, 0.5), g)
    E1 = generate(ExtremalFamily(SMALL_BALL, 0.5, center=(0.5, -0.25)), g)
    q = CircleQuadrature(256)
    a = restricted_type_ratio(E0, E0, math.pi / 3, q)
    b = restricted_type_ratio(E1, E1, math.pi / 3, q)
    assert abs(a / b - 1) <= 0.1


def test_restricted_type_ratio_guards():
    E = unit_disk(1 / 8)
    q = CircleQuadrature(64)
    for theta in (0.0, math.pi, -1.0, 4.0):
        with pytest.raises(ValueError):
            restricted_type_ratio(E, E, theta, q)
    empty = E.__class__(E.grid, np.zeros_like(E.values), E.mode)
    with pytest.raises(ValueError, match="positive measure"):
        restricted_type_ratio(E, empty, math.pi / 2, q)


def test_theta_sweep_records_points():
    ts = theta_sweep([math.pi / 4, math.pi / 2], delta=1 / 8)
    assert [p.theta for p in ts.points] == [math.pi / 4, math.pi / 2]
    assert all(p.ratio > 0 for p in ts.points)
    assert ts.spread >= 1
