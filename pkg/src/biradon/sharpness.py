"""Extremal set families, scaling sweeps and log-log slope fits.

Each sweep builds a pair of indicator fields per scale, evaluates
``B_theta`` on the same grid, and fits ``log ||B||_r`` against
``log scale``.  Predicted slopes:

=============================  ==========================
example                        slope of ``||B||_r``
=============================  ==========================
``ball_annulus``               ``1 + 1/r`` in ``delta``
``rectangles_degenerate``      ``1 + 3/r`` in ``eps``
``rectangles_nondegenerate``   ``1 + 4/r`` in ``eps``
``large_ball``                 ``2/r`` in ``R``
=============================  ==========================
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .grid import NEAREST, GridSpec, SampledField, lp_norm, measure, parse_exponent, sample
from .transforms import CircleQuadrature, bilinear_field, check_angle
from .typeset import HalfSpace, exponent_triple, to_pqr

SMALL_BALL = "small_ball"
ANNULUS = "annulus"
LARGE_BALL = "large_ball"
TANGENT_RECTANGLE = "tangent_rectangle"
KINDS = (SMALL_BALL, ANNULUS, LARGE_BALL, TANGENT_RECTANGLE)

BALL_ANNULUS = "ball_annulus"
RECT_DEG = "rectangles_degenerate"
RECT_NONDEG = "rectangles_nondegenerate"
EXAMPLES = (BALL_ANNULUS, RECT_DEG, RECT_NONDEG, LARGE_BALL)

# resolution presets: h = feature / H_FACTOR, M = next power of two >= M_FACTOR / feature
H_FACTOR = 8
H_FACTOR_RECT = 4
M_FACTOR = 64
MIN_H_FACTOR = 4
ANNULUS_WIDTH_FACTOR = 4
DIVERGENCE_SLOPE = 0.1
WORKERS_ENV = "BIRADON_WORKERS"


class ResolutionError(ValueError):
    """Grid or quadrature too coarse for the requested scale."""


@dataclass(frozen=True)
class ExtremalFamily:
    """One set of an extremal pair.

    ``scale`` is the ball radius (small or large ball), the annulus width, or
    the rectangle's long side ``eps`` (short side ``eps**2``).  Rectangles
    touch the unit circle at ``angle`` from inside, long side tangent.
    """

    kind: str
    scale: float
    center: tuple[float, float] = (0.0, 0.0)
    angle: float = math.pi / 2
    radius: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown family {self.kind!r}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError(f"scale must be positive, got {self.scale}")
        if self.kind == ANNULUS and not self.radius > self.scale / 2:
            raise ValueError("annulus radius must exceed half its width")

    @property
    def feature(self) -> float:
        """Smallest length the grid has to resolve."""
        if self.kind == TANGENT_RECTANGLE:
            return self.scale**2
        return self.scale

    @property
    def area(self) -> float:
        s = self.scale
        if self.kind in (SMALL_BALL, LARGE_BALL):
            return math.pi * s * s
        if self.kind == ANNULUS:
            return 2 * math.pi * self.radius * s
        return s**3

    @property
    def perimeter(self) -> float:
        s = self.scale
        if self.kind in (SMALL_BALL, LARGE_BALL):
            return 2 * math.pi * s
        if self.kind == ANNULUS:
            return 4 * math.pi * self.radius
        return 2 * (s + s * s)

    @property
    def extent(self) -> float:
        """Radius of a centered disk containing the set."""
        c = math.hypot(*self.center)
        if self.kind == ANNULUS:
            return c + self.radius + self.scale / 2
        if self.kind == TANGENT_RECTANGLE:
            return c + math.hypot(1.0, self.scale / 2)
        return c + self.scale

    def indicator(self, x1, x2):
        a = x1 - self.center[0]
        b = x2 - self.center[1]
        if self.kind in (SMALL_BALL, LARGE_BALL):
            return a * a + b * b < self.scale**2
        if self.kind == ANNULUS:
            return np.abs(np.hypot(a, b) - self.radius) < self.scale / 2
        # tangent rectangle centred on the tangency point, half-open on both axes
        eps = self.scale
        nx, ny = math.cos(self.angle), math.sin(self.angle)
        s = -ny * a + nx * b
        t = nx * a + ny * b - 1.0
        return (s >= -eps / 2) & (s < eps / 2) & (t >= -eps * eps / 2) & (t < eps * eps / 2)


def generate(family: ExtremalFamily, grid: GridSpec) -> SampledField:
    """0/1 indicator of ``family`` sampled at the nodes of ``grid`` (nearest mode)."""
    need = family.feature / MIN_H_FACTOR
    if grid.spacing > need * (1 + 1e-12):
        raise ResolutionError(
            f"{family.kind} at scale {family.scale:g} needs h <= {need:.6g}, got {grid.spacing:.6g}"
        )
    if family.extent > grid.half_width:
        raise ResolutionError(
            f"{family.kind} reaches radius {family.extent:.6g} beyond the grid half-width "
            f"{grid.half_width:g}"
        )
    return sample(lambda a, b: family.indicator(a, b).astype(float), grid, NEAREST)


# ---------------------------------------------------------------------------
# sweeps


def _next_pow2(x: float) -> int:
    return 1 << max(0, math.ceil(math.log2(x)))


def preset_nodes(feature: float) -> int:
    return _next_pow2(M_FACTOR / feature)


def example_pair(example: str, theta: float, scale: float, literal_radius: bool = False):
    """The two families of ``example`` at ``scale``."""
    if example == BALL_ANNULUS:
        rho = 2.0 if literal_radius else 2 * math.sin(theta / 2)
        return (
            ExtremalFamily(SMALL_BALL, scale),
            ExtremalFamily(ANNULUS, ANNULUS_WIDTH_FACTOR * scale, radius=rho),
        )
    if example in (RECT_DEG, RECT_NONDEG):
        return (
            ExtremalFamily(TANGENT_RECTANGLE, scale, angle=math.pi / 2),
            ExtremalFamily(TANGENT_RECTANGLE, scale, angle=math.pi / 2 + theta),
        )
    if example == LARGE_BALL:
        return ExtremalFamily(LARGE_BALL, scale), ExtremalFamily(LARGE_BALL, scale)
    raise ValueError(f"unknown example {example!r}")


@dataclass(frozen=True)
class Resolution:
    spacing: float
    half_width: float
    nodes: int


def preset_resolution(example: str, theta: float, scale: float, literal_radius: bool = False) -> Resolution:
    f, g = example_pair(example, theta, scale, literal_radius)
    if example == LARGE_BALL:
        feature, h = 1.0, 1.0 / H_FACTOR
    elif example == BALL_ANNULUS:
        feature = scale
        h = feature / H_FACTOR
    else:
        feature = scale**2
        h = feature / H_FACTOR_RECT
    # B_theta(f, g) lives in supp f + S^1; for the rectangles it sits near the origin
    b_reach = 0.5 if example in (RECT_DEG, RECT_NONDEG) else f.extent + 1.0
    reach = max(f.extent, g.extent, b_reach) + 4 * h
    return Resolution(h, math.ceil(reach / h) * h, preset_nodes(feature))


def required_nodes(example: str, scale: float) -> int:
    if example == LARGE_BALL:
        return M_FACTOR
    feature = scale if example == BALL_ANNULUS else scale**2
    return math.ceil(M_FACTOR / feature - 1e-9)


@dataclass
class ScaleRecord:
    scale: float
    spacing: float
    half_width: float
    nodes: int
    norm: float
    f_measure: float
    g_measure: float
    b_max: float
    level_area: float
    extra_norms: dict = field(default_factory=dict)


@dataclass
class SlopeFit:
    scales: list[float]
    norms: list[float]
    slope: float
    intercept: float
    residual: float

    def __post_init__(self):
        if len(self.scales) < 3:
            raise ValueError("a slope fit needs at least 3 points")


def fit_slope(scales, norms) -> SlopeFit:
    """Least-squares slope of ``log norm`` against ``log scale``."""
    s = np.asarray(scales, dtype=float)
    n = np.asarray(norms, dtype=float)
    if len(s) < 3:
        raise ValueError("a slope fit needs at least 3 points")
    if np.any(s <= 0) or np.any(n <= 0):
        raise ValueError("scales and norms must be positive for a log-log fit")
    ls, ln = np.log(s), np.log(n)
    slope, intercept = np.polyfit(ls, ln, 1)
    residual = float(np.max(np.abs(ln - (slope * ls + intercept))))
    return SlopeFit(s.tolist(), n.tolist(), float(slope), float(intercept), residual)


@dataclass
class SweepResult:
    example: str
    theta: float
    r: float
    records: list[ScaleRecord]
    fit: SlopeFit
    predicted_slope: float

    @property
    def scales(self) -> list[float]:
        return [rec.scale for rec in self.records]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scale", "norm", "fitted_slope", "residual", "h", "M", "f_measure",
                    "g_measure", "b_max", "level_area"])
        for rec in self.records:
            w.writerow([repr(rec.scale), repr(rec.norm), repr(self.fit.slope), repr(self.fit.residual),
                        repr(rec.spacing), rec.nodes, repr(rec.f_measure), repr(rec.g_measure),
                        repr(rec.b_max), repr(rec.level_area)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "example": self.example,
            "theta": self.theta,
            "r": _json_exponent(self.r),
            "predicted_slope": self.predicted_slope,
            "fit": asdict(self.fit),
            "records": [asdict(rec) for rec in self.records],
        }


def _json_exponent(p: float):
    return "inf" if math.isinf(p) else p


def predicted_slope(example: str, r: float) -> float:
    inv = 0.0 if math.isinf(r) else 1.0 / r
    return {BALL_ANNULUS: 1 + inv, RECT_DEG: 1 + 3 * inv, RECT_NONDEG: 1 + 4 * inv,
            LARGE_BALL: 2 * inv}[example]


def _check_example_angle(example: str, theta: float) -> float:
    theta = check_angle(theta)
    degenerate = math.isclose(theta, math.pi, rel_tol=0, abs_tol=1e-12)
    if example == RECT_DEG and not degenerate:
        raise ValueError("rectangles_degenerate requires theta = pi")
    if example == RECT_NONDEG and degenerate:
        raise ValueError("rectangles_nondegenerate requires theta != pi")
    return theta


def _check_ladder(scales) -> list[float]:
    s = [float(x) for x in scales]
    if len(s) < 3:
        raise ValueError("a scale ladder needs at least 3 values")
    if any(x <= 0 for x in s):
        raise ValueError("scales must be positive")
    ratios = [b / a for a, b in zip(s, s[1:])]
    if not (all(math.isclose(q, 0.5, rel_tol=1e-9) for q in ratios)
            or all(math.isclose(q, 2.0, rel_tol=1e-9) for q in ratios)):
        raise ValueError(f"scales must be geometric with ratio 1/2, got {s}")
    return sorted(s, reverse=True)


def _one_scale(args) -> ScaleRecord:
    example, theta, scale, r_list, spacing, nodes, node_factor, literal_radius = args
    res = preset_resolution(example, theta, scale, literal_radius)
    h = spacing if spacing is not None else res.spacing
    M = nodes if nodes is not None else int(res.nodes * node_factor)
    if M < required_nodes(example, scale):
        raise ResolutionError(
            f"{example} at scale {scale:g} needs M >= {required_nodes(example, scale)}, got {M}"
        )
    f_fam, g_fam = example_pair(example, theta, scale, literal_radius)
    L = math.ceil(res.half_width / h) * h
    grid = GridSpec(L, h)
    f = generate(f_fam, grid)
    g = generate(g_fam, grid)
    B = bilinear_field(f, g, theta, CircleQuadrature(M))
    v = B.values
    if v[0].any() or v[-1].any() or v[:, 0].any() or v[:, -1].any():
        raise ResolutionError(f"{example} at scale {scale:g}: B reaches the grid boundary at L = {L:g}")
    norms = {str(r): lp_norm(B, r) for r in r_list}
    level = scale / 2 if example != LARGE_BALL else math.pi
    area = float(np.sum(grid.cell_weights()[B.values > level]))
    return ScaleRecord(scale, h, L, M, norms[str(r_list[0])], measure(f), measure(g),
                       float(B.values.max()), area,
                       {k: v for k, v in norms.items()})


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def parallel_map(fn, items, workers: int | None = None) -> list:
    """Ordered map; uses a process pool when more than one worker is configured."""
    items = list(items)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def scaling_sweep(
    example: str,
    r,
    scales,
    theta: float = math.pi / 2,
    spacing: float | None = None,
    nodes: int | None = None,
    node_factor: float = 1.0,
    extra_r=(),
    literal_radius: bool = False,
    workers: int | None = None,
) -> SweepResult:
    """Norms ``||B_theta(f, g)||_r`` along a scale ladder, with a log-log fit.

    ``spacing`` and ``nodes`` override the per-scale presets (one value for
    every scale) and ``node_factor`` rescales the preset ``M``; a choice too
    coarse for some scale raises :class:`ResolutionError`.  ``extra_r`` records further norms of the same
    fields, used by :func:`check_constraint`.
    """
    if example == RECT_DEG:
        theta = math.pi
    theta = _check_example_angle(example, theta)
    r = parse_exponent(r)
    r_list = [r] + [parse_exponent(x) for x in extra_r if parse_exponent(x) != r]
    ladder = _check_ladder(scales)
    jobs = [(example, theta, s, r_list, spacing, nodes, node_factor, literal_radius) for s in ladder]
    records = parallel_map(_one_scale, jobs, workers)
    fit = fit_slope([rec.scale for rec in records], [rec.norm for rec in records])
    return SweepResult(example, theta, r, records, fit, predicted_slope(example, r))


# ---------------------------------------------------------------------------
# constraint verdicts

CONSTRAINTS = {
    BALL_ANNULUS: HalfSpace((2, 1, -1), 1, "2/p + 1/q <= 1 + 1/r"),
    RECT_DEG: HalfSpace((3, 3, -3), 1, "3/p + 3/q <= 1 + 3/r"),
    RECT_NONDEG: HalfSpace((3, 3, -4), 1, "3/p + 3/q <= 1 + 4/r"),
    LARGE_BALL: HalfSpace((-1, -1, 1), 0, "1/r <= 1/p + 1/q"),
}


@dataclass
class ConstraintReport:
    example: str
    triple: tuple[str, str, str]
    constraint: str
    satisfied: bool
    margin: float
    predicted_ratio_slope: float
    measured_ratio_slope: float
    residual: float
    diverges: bool

    @property
    def consistent(self) -> bool:
        return self.diverges == (not self.satisfied)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["consistent"] = self.consistent
        return d


def ratio_series(sweep: SweepResult, p, q, r) -> list[float]:
    """``||B||_r / (||f||_p ||g||_q)`` at each scale; ``f, g`` are indicators so
    ``||f||_p = |E|^(1/p)``."""
    u, v, w = (float(x) for x in exponent_triple(p, q, r))
    key = str(parse_exponent(r))
    out = []
    for rec in sweep.records:
        if key not in rec.extra_norms:
            raise ValueError(f"sweep did not record ||B||_r for r = {r}; rerun with extra_r")
        out.append(rec.extra_norms[key] / (rec.f_measure**u * rec.g_measure**v))
    return out


def check_constraint(sweep: SweepResult, p, q, r, constraint: HalfSpace | None = None) -> ConstraintReport:
    """Does the measured norm ratio blow up at ``(p, q, r)``, and does that agree
    with the example's constraint?

    Small-scale examples diverge when the ratio slope against the scale is
    below ``-0.1``; the large ball diverges when it is above ``+0.1``.
    """
    t = exponent_triple(p, q, r)
    hs = constraint or CONSTRAINTS[sweep.example]
    margin = hs.bound - hs.lhs(t)
    fit = fit_slope(sweep.scales, ratio_series(sweep, p, q, r))
    if sweep.example == LARGE_BALL:
        predicted = -2 * float(margin)
        diverges = fit.slope > DIVERGENCE_SLOPE
    else:
        predicted = float(margin)
        diverges = fit.slope < -DIVERGENCE_SLOPE
    return ConstraintReport(
        sweep.example, to_pqr(t), str(hs),
        margin >= 0, float(margin), predicted, fit.slope, fit.residual, diverges,
    )


def constraint_json(report: ConstraintReport) -> str:
    return json.dumps(report.to_dict(), indent=2)


# ---------------------------------------------------------------------------
# restricted type


def restricted_type_ratio(E: SampledField, F: SampledField, theta: float, quad: CircleQuadrature) -> float:
    """``||B_theta(1_E, 1_F)||_2 / (|E| |F|)^(1/2)`` for ``theta`` in ``(0, pi)``."""
    theta = float(theta)
    if not (0 < theta < math.pi):
        raise ValueError(f"theta must lie in (0, pi), got {theta}")
    mE, mF = measure(E), measure(F)
    if mE == 0 or mF == 0:
        raise ValueError("restricted-type ratio needs sets of positive measure")
    B = bilinear_field(E, F, theta, quad)
    return lp_norm(B, 2) / math.sqrt(mE * mF)


@dataclass
class ThetaPoint:
    theta: float
    ratio: float
    scaled: float


@dataclass
class ThetaSweep:
    delta: float
    points: list[ThetaPoint]

    @property
    def spread(self) -> float:
        s = [p.scaled for p in self.points]
        return max(s) / min(s)

    def to_dict(self) -> dict:
        return {"delta": self.delta, "spread": self.spread, "points": [asdict(p) for p in self.points]}


def _theta_job(args) -> ThetaPoint:
    theta, delta, nodes, node_factor = args
    res = preset_resolution(BALL_ANNULUS, theta, delta)
    M = nodes if nodes is not None else int(res.nodes * node_factor)
    if M < required_nodes(BALL_ANNULUS, delta):
        raise ResolutionError(
            f"ball_annulus at delta {delta:g} needs M >= {required_nodes(BALL_ANNULUS, delta)}, got {M}"
        )
    grid = GridSpec(res.half_width, res.spacing)
    f_fam, g_fam = example_pair(BALL_ANNULUS, theta, delta)
    ratio = restricted_type_ratio(generate(f_fam, grid), generate(g_fam, grid), theta, CircleQuadrature(M))
    return ThetaPoint(theta, ratio, ratio * min(theta, math.pi - theta))


def theta_sweep(
    thetas, delta: float = 1 / 16, nodes: int | None = None, node_factor: float = 1.0,
    workers: int | None = None,
) -> ThetaSweep:
    """Restricted-type ratio of the ball/annulus pair along ``thetas``, scaled by
    ``min(theta, pi - theta)``."""
    pts = parallel_map(_theta_job, [(float(t), delta, nodes, node_factor) for t in thetas], workers)
    return ThetaSweep(delta, pts)


def describe(sweep: SweepResult) -> str:
    return (f"{sweep.example} theta={sweep.theta:.6g} r={sweep.r:g}: slope {sweep.fit.slope:.4f} "
            f"(predicted {sweep.predicted_slope:.4f}, residual {sweep.fit.residual:.2e})")


__all__ = [
    "ExtremalFamily", "SlopeFit", "SweepResult", "ScaleRecord", "ConstraintReport", "ResolutionError",
    "generate", "scaling_sweep", "fit_slope", "check_constraint", "restricted_type_ratio",
    "theta_sweep", "predicted_slope", "describe", "example_pair", "preset_resolution", "required_nodes",
    "ThetaSweep", "ThetaPoint", "CONSTRAINTS",
    "SMALL_BALL", "ANNULUS", "LARGE_BALL", "TANGENT_RECTANGLE", "BALL_ANNULUS", "RECT_DEG", "RECT_NONDEG",
    "EXAMPLES",
]
