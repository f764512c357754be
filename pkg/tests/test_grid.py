import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from biradon.grid import (
    BILINEAR,
    NEAREST,
    GridSpec,
    SampledField,
    constant,
    eval_at,
    integrate,
    lp_norm,
    measure,
    parse_exponent,
    sample,
)


def test_gridspec_nodes_and_coords():
    g = GridSpec(1.0, 0.5)
    assert g.n == 5
    np.testing.assert_array_equal(g.coords, [-1.0, -0.5, 0.0, 0.5, 1.0])
    assert g.node(0, 4) == (-1.0, 1.0)


@pytest.mark.parametrize("L,h", [(1.0, 0.3), (0.0, 0.1), (1.0, -0.1), (1.0, math.inf)])
def test_gridspec_rejects_bad_params(L, h):
    with pytest.raises(ValueError):
        GridSpec(L, h)


def test_sample_constant_ones():
    f = sample(lambda a, b: np.ones_like(a), GridSpec(1.0, 0.5))
    assert f.values.shape == (5, 5)
    assert np.all(f.values == 1)


def test_sample_ball_area():
    g = GridSpec(1.0, 0.01)
    f = sample(lambda a, b: (a * a + b * b < 0.25**2).astype(float), g, NEAREST)
    area = float(f.values.sum()) * g.spacing**2
    assert abs(area - math.pi * 0.0625) < 4 * g.spacing


def test_sample_odd_field_sums_to_zero():
    f = sample(lambda a, b: a, GridSpec(1.0, 0.5))
    assert f.values.sum() == 0
    np.testing.assert_array_equal(f.values, -f.values[::-1, :])


def test_sample_rejects_nonfinite_with_location():
    with pytest.raises(ValueError, match=r"node \(2, 2\)"), np.errstate(divide="ignore"):
        sample(lambda a, b: 1.0 / (a * a + b * b), GridSpec(1.0, 0.5))


def test_sample_scalar_callable_fallback():
    f = sample(lambda a, b: math.exp(-(a * a + b * b)), GridSpec(1.0, 0.5))
    assert f.values[2, 2] == 1.0


def test_eval_constant_affine_and_outside():
    g = GridSpec(1.0, 0.1)
    assert eval_at(constant(3.0, g), (0.123, -0.456)) == pytest.approx(3.0)
    f = sample(lambda a, b: 2 * a + b - 1, g, BILINEAR)
    assert eval_at(f, (0.3, 0.7)) == pytest.approx(0.3, abs=1e-12)
    assert eval_at(f, (1.5, 0.0)) == 0.0
    assert eval_at(f.with_mode(NEAREST), (-1.01, 0.0)) == 0.0


def test_eval_exact_at_nodes_both_modes():
    g = GridSpec(1.0, 0.25)
    rng = np.random.default_rng(0)
    f = SampledField(g, rng.normal(size=(g.n, g.n)))
    pts = np.stack(g.mesh(), axis=-1)
    for mode in (NEAREST, BILINEAR):
        np.testing.assert_array_equal(eval_at(f.with_mode(mode), pts), f.values)


@settings(max_examples=50, deadline=None)
@given(st.floats(-0.999, 0.999), st.floats(-0.999, 0.999), st.floats(-3, 3), st.floats(-3, 3))
def test_bilinear_reproduces_affine(x1, x2, a, b):
    f = sample(lambda u, v: a * u + b * v + 0.5, GridSpec(1.0, 0.125))
    assert eval_at(f, (x1, x2)) == pytest.approx(a * x1 + b * x2 + 0.5, abs=1e-11)


def test_lp_norm_examples():
    one = constant(1.0, GridSpec(1.0, 0.05))
    assert lp_norm(one, 2) == pytest.approx(2.0, rel=1e-12)
    assert lp_norm(constant(-2.5, GridSpec(1.0, 0.5)), math.inf) == 2.5
    g = GridSpec(1.1, 0.005)
    disk = sample(lambda a, b: (a * a + b * b < 1).astype(float), g, NEAREST)
    assert abs(lp_norm(disk, 1) - math.pi) < 0.05


def test_lp_norm_rejects_small_exponent():
    with pytest.raises(ValueError):
        lp_norm(constant(1.0, GridSpec(1.0, 0.5)), 0.5)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1.0, 1.5, 2.0, 3.0, math.inf]), st.floats(0, 10))
def test_lp_norm_homogeneous_and_monotone(seed, p, c):
    g = GridSpec(1.0, 0.25)
    rng = np.random.default_rng(seed)
    v = rng.uniform(0, 1, (g.n, g.n))
    f, cf = SampledField(g, v), SampledField(g, c * v)
    assert lp_norm(cf, p) == pytest.approx(c * lp_norm(f, p), rel=1e-10, abs=1e-300)
    bigger = SampledField(g, v + rng.uniform(0, 1, v.shape))
    assert lp_norm(f, p) <= lp_norm(bigger, p) + 1e-15


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1.05, 20))
def test_holder(seed, p):
    g = GridSpec(1.0, 0.2)
    rng = np.random.default_rng(seed)
    f = SampledField(g, rng.normal(size=(g.n, g.n)))
    h = SampledField(g, rng.normal(size=(g.n, g.n)))
    pp = p / (p - 1)
    lhs = float(np.sum(g.cell_weights() * np.abs(f.values * h.values)))
    assert lhs <= lp_norm(f, p) * lp_norm(h, pp) * (1 + 1e-12)


def test_measure_examples():
    assert measure(constant(1.0, GridSpec(1.0, 0.5))) == 4.0
    assert measure(constant(0.0, GridSpec(1.0, 0.5))) == 0.0
    g = GridSpec(3.0, 0.005)
    ann = sample(lambda a, b: (np.abs(np.hypot(a, b) - 2) < 0.05).astype(float), g, NEAREST)
    assert abs(measure(ann) - 2 * math.pi * 2 * 0.1) < 0.05


def test_measure_rejects_non_indicator():
    with pytest.raises(ValueError):
        measure(constant(0.5, GridSpec(1.0, 0.5)))


@pytest.mark.parametrize("h", [0.04, 0.02, 0.01])
def test_measure_converges_on_disk_and_rectangle(h):
    g = GridSpec(1.0, h)
    disk = sample(lambda a, b: (a * a + b * b < 0.6**2).astype(float), g, NEAREST)
    rect = sample(lambda a, b: ((np.abs(a) < 0.3) & (np.abs(b) < 0.55)).astype(float), g, NEAREST)
    # O(h * perimeter)
    assert abs(measure(disk) - math.pi * 0.36) <= h * 2 * math.pi * 0.6
    assert abs(measure(rect) - 0.6 * 1.1) <= h * 2 * (0.6 + 1.1)


def test_integrate_constant():
    assert integrate(constant(2.0, GridSpec(1.5, 0.1))) == pytest.approx(2.0 * 9.0, rel=1e-12)


@pytest.mark.parametrize("fmt", ["json", "csv"])
def test_serialization_round_trip_bit_exact(fmt):
    g = GridSpec(1.0, 0.1)
    rng = np.random.default_rng(3)
    f = SampledField(g, rng.normal(size=(g.n, g.n)) / 3, NEAREST)
    back = SampledField.from_json(f.to_json()) if fmt == "json" else SampledField.from_csv(f.to_csv())
    assert back.grid == g and back.mode == NEAREST
    assert back.values.tobytes() == f.values.tobytes()


@pytest.mark.parametrize("text,val", [("inf", math.inf), ("3/2", 1.5), ("2", 2.0), (4, 4.0)])
def test_parse_exponent(text, val):
    assert parse_exponent(text) == val


def test_parse_exponent_rejects_below_one():
    with pytest.raises(ValueError):
        parse_exponent("1/2")
