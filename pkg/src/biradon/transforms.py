"""Circular averages and the bilinear operators built from them.

Every operator here is a quadrature sum of the form

    T(x) = sum_k w_k * prod_j F_j(x - o_jk)

over uniform nodes ``y_k`` on the unit circle, where the offsets ``o_jk``
are fixed linear images of ``y_k``:

======================  =========================================
operator                offsets
======================  =========================================
``A f``                 ``f: y``
``B_theta(f, g)``       ``f: y``, ``g: R y``
``A_theta g``           ``g: R y - y``
``B1_theta(h, g)``      ``h: -y``, ``g: R y - y``
``B2_theta(f, h)``      ``h: -R y``, ``f: y - R y``
======================  =========================================

with ``R`` the counter-clockwise rotation by ``theta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .grid import NEAREST, GridSpec, SampledField, eval_at

TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class CircleQuadrature:
    """Trapezoidal rule for arc length on the unit circle, ``M`` equispaced nodes."""

    M: int

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"node count must be a positive integer, got {self.M}")

    @cached_property
    def angles(self) -> np.ndarray:
        return TWO_PI * np.arange(self.M) / self.M

    @cached_property
    def points(self) -> np.ndarray:
        a = self.angles
        return np.column_stack([np.cos(a), np.sin(a)])

    @cached_property
    def weights(self) -> np.ndarray:
        return np.full(self.M, TWO_PI / self.M)


def rotation_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def check_angle(theta: float, allow_zero: bool = False) -> float:
    theta = float(theta)
    if not math.isfinite(theta):
        raise ValueError(f"angle must be finite, got {theta}")
    if allow_zero and theta == 0:
        return theta
    if not (0 < theta < TWO_PI):
        raise ValueError(
            f"rotation angle must lie in (0, 2*pi), got {theta}; theta = 0 is the "
            "degenerate case A(f*g)"
        )
    return theta


def _rotated(quad: CircleQuadrature, theta: float) -> np.ndarray:
    return quad.points @ rotation_matrix(theta).T


# ---------------------------------------------------------------------------
# pointwise evaluation; inputs may be fields or vectorized callables f(x1, x2)


def _read(f, pts: np.ndarray) -> np.ndarray:
    """Values of a field, or of a callable ``f(x1, x2)``, at an array of points."""
    if isinstance(f, SampledField):
        return eval_at(f, pts)
    return np.broadcast_to(np.asarray(f(pts[..., 0], pts[..., 1]), dtype=float), pts.shape[:-1])


def _point_sum(terms, weights, x) -> float:
    x = np.asarray(x, dtype=float)
    prod = np.ones(len(weights))
    for f, offs in terms:
        prod *= _read(f, x - offs)
    return float(np.dot(weights, prod))


def spherical_average(f: SampledField, x, quad: CircleQuadrature) -> float:
    """Circular mean ``sum_k w_k f(x - y_k)``.

    With a callable ``f`` the rule is spectrally accurate for smooth ``f``; a
    bilinear field has kinks along grid lines, which caps the accuracy at
    ``O(M^-2)``.
    """
    return _point_sum([(f, quad.points)], quad.weights, x)


def bilinear_theta(
    f: SampledField,
    g: SampledField,
    theta: float,
    x,
    quad: CircleQuadrature,
    allow_degenerate: bool = False,
) -> float:
    """``B_theta(f, g)(x) = sum_k w_k f(x - y_k) g(x - R y_k)``.

    ``theta = 0`` is refused unless ``allow_degenerate`` is set, in which
    case the sum reduces to the circular mean of ``f * g``.
    """
    theta = check_angle(theta, allow_zero=allow_degenerate)
    y = quad.points
    return _point_sum([(f, y), (g, _rotated(quad, theta))], quad.weights, x)


def rotated_average(g: SampledField, theta: float, x, quad: CircleQuadrature) -> float:
    """``A_theta g(x) = sum_k w_k g(x + y_k - R y_k)``; a circular mean of radius
    ``sqrt(2 (1 - cos theta))``."""
    theta = check_angle(theta)
    y = quad.points
    return _point_sum([(g, _rotated(quad, theta) - y)], quad.weights, x)


def dual_B1(h: SampledField, g: SampledField, theta: float, x, quad: CircleQuadrature) -> float:
    """Adjoint of ``f -> B_theta(f, g)``: ``sum_k w_k h(x + y_k) g(x + y_k - R y_k)``."""
    theta = check_angle(theta)
    y = quad.points
    return _point_sum([(h, -y), (g, _rotated(quad, theta) - y)], quad.weights, x)


def dual_B2(f: SampledField, h: SampledField, theta: float, x, quad: CircleQuadrature) -> float:
    """Adjoint of ``g -> B_theta(f, g)``: ``sum_k w_k h(x + R y_k) f(x + R y_k - y_k)``."""
    theta = check_angle(theta)
    y = quad.points
    ry = _rotated(quad, theta)
    return _point_sum([(h, -ry), (f, y - ry)], quad.weights, x)


# ---------------------------------------------------------------------------
# whole-grid evaluation


def _shift_nearest(v: np.ndarray, si: int, sj: int) -> np.ndarray:
    """``out[i, j] = v[i - si, j - sj]``, zero where the source is off-grid."""
    n0, n1 = v.shape
    out = np.zeros_like(v)
    if abs(si) >= n0 or abs(sj) >= n1:
        return out
    dst_i = slice(max(si, 0), n0 + min(si, 0))
    src_i = slice(max(-si, 0), n0 + min(-si, 0))
    dst_j = slice(max(sj, 0), n1 + min(sj, 0))
    src_j = slice(max(-sj, 0), n1 + min(-sj, 0))
    out[dst_i, dst_j] = v[src_i, src_j]
    return out


def _shift_linear_axis(v: np.ndarray, a: float, axis: int) -> np.ndarray:
    """Linear interpolation of ``v`` at fractional index ``i - a`` along ``axis``;
    positions outside ``[0, n - 1]`` give zero."""
    n = v.shape[axis]
    c = math.ceil(a)
    fr = c - a
    # out[i] = (1 - fr) v[i - c] + fr v[i - c + 1], valid for 0 <= i - c <= n - 1 - (fr > 0)
    lo = np.moveaxis(v, axis, 0)
    out = np.zeros_like(lo)
    hi_lim = n - 1 if fr == 0 else n - 2
    i_start = max(c, 0)
    i_stop = min(hi_lim + c, n - 1)
    if i_start <= i_stop:
        dst = slice(i_start, i_stop + 1)
        src = slice(i_start - c, i_stop - c + 1)
        if fr == 0:
            out[dst] = lo[src]
        else:
            src1 = slice(i_start - c + 1, i_stop - c + 2)
            out[dst] = (1 - fr) * lo[src] + fr * lo[src1]
    return np.moveaxis(out, 0, axis)


def _shift_field(f: SampledField, offset) -> np.ndarray:
    """Node values of ``x -> f(x - offset)`` on ``f``'s own grid."""
    h = f.grid.spacing
    a1, a2 = offset[0] / h, offset[1] / h
    if f.mode == NEAREST:
        return _shift_nearest(f.values, int(np.rint(a1)), int(np.rint(a2)))
    return _shift_linear_axis(_shift_linear_axis(f.values, a1, 0), a2, 1)


def _offset_sum_field(terms, weights, grid: GridSpec) -> np.ndarray:
    if all(f.grid == grid for f, _ in terms):
        if all(f.mode == NEAREST for f, _ in terms):
            return _nearest_offset_sum(terms, weights, grid)
        return _dense_offset_sum(terms, weights, grid)
    return _generic_offset_sum(terms, weights, grid)


def _dense_offset_sum(terms, weights, grid):
    out = np.zeros((grid.n, grid.n))
    for k, w in enumerate(weights):
        prod = None
        for f, offs in terms:
            s = _shift_field(f, offs[k])
            prod = s if prod is None else prod * s
        out += w * prod
    return out


def _generic_offset_sum(terms, weights, grid):
    X1, X2 = grid.mesh()
    nodes = np.stack([X1, X2], axis=-1)
    out = np.zeros((grid.n, grid.n))
    for k, w in enumerate(weights):
        prod = np.ones_like(out)
        for f, offs in terms:
            prod *= eval_at(f, nodes - offs[k])
        out += w * prod
    return out


def _nearest_offset_sum(terms, weights, grid, chunk_elems: int = 4_000_000):
    """Exact fast path when every factor is a nearest-mode field on ``grid``.

    At a node, ``f(x - o)`` reads node ``i - rint(o / h)``, so each quadrature
    node reduces to an integer shift per factor.  Nodes sharing all shifts are
    merged; the sum is then scattered from the nonzero nodes of the sparsest
    factor.  Reads landing less than ``h/2`` outside the square take the
    boundary node, where :func:`eval_at` returns 0; the two agree whenever the
    factors vanish on the boundary.
    """
    h, n = grid.spacing, grid.n
    shifts = np.concatenate(
        [np.rint(offs / h).astype(np.int64) for _, offs in terms], axis=1
    )
    uniq, inv = np.unique(shifts, axis=0, return_inverse=True)
    w = np.bincount(inv.ravel(), weights=weights, minlength=len(uniq))

    counts = [np.count_nonzero(f.values) for f, _ in terms]
    d = int(np.argmin(counts))
    out = np.zeros(n * n)
    if counts[d] == 0:
        return out.reshape(n, n)
    if counts[d] * len(uniq) > 8 * n * n:
        return _dense_nearest(terms, uniq, w, grid)

    I, J = terms[d][0].nonzero()
    base = terms[d][0].values[I, J]
    step = max(1, chunk_elems // len(I))
    for start in range(0, len(uniq), step):
        sh = uniq[start : start + step]
        wk = w[start : start + step]
        # output node receiving driver node (I, J) under shift s_d
        oi = I[None, :] + sh[:, 2 * d, None]
        oj = J[None, :] + sh[:, 2 * d + 1, None]
        val = wk[:, None] * base[None, :]
        ok = (oi >= 0) & (oi < n) & (oj >= 0) & (oj < n)
        for t, (f, _) in enumerate(terms):
            if t == d:
                continue
            si = oi - sh[:, 2 * t, None]
            sj = oj - sh[:, 2 * t + 1, None]
            inside = (si >= 0) & (si < n) & (sj >= 0) & (sj < n)
            fv = np.zeros(si.shape)
            fv[inside] = f.values[si[inside], sj[inside]]
            val = val * fv
        ok &= val != 0
        out += np.bincount((oi[ok] * n + oj[ok]), weights=val[ok], minlength=n * n)
    return out.reshape(n, n)


def _dense_nearest(terms, uniq, w, grid):
    out = np.zeros((grid.n, grid.n))
    for s, wk in zip(uniq, w):
        prod = None
        for t, (f, _) in enumerate(terms):
            v = _shift_nearest(f.values, int(s[2 * t]), int(s[2 * t + 1]))
            prod = v if prod is None else prod * v
        out += wk * prod
    return out


def _field_result(values, grid, like) -> SampledField:
    mode = like[0].mode if all(f.mode == like[0].mode for f in like) else "bilinear"
    return SampledField(grid, values, mode)


def spherical_average_field(
    f: SampledField, quad: CircleQuadrature, grid: GridSpec | None = None
) -> SampledField:
    grid = grid or f.grid
    vals = _offset_sum_field([(f, quad.points)], quad.weights, grid)
    return SampledField(grid, vals, "bilinear")


def bilinear_field(
    f: SampledField,
    g: SampledField,
    theta: float,
    quad: CircleQuadrature,
    grid: GridSpec | None = None,
    allow_degenerate: bool = False,
) -> SampledField:
    """``B_theta(f, g)`` at every node of ``grid`` (default: ``f``'s grid)."""
    theta = check_angle(theta, allow_zero=allow_degenerate)
    grid = grid or f.grid
    terms = [(f, quad.points), (g, _rotated(quad, theta))]
    return SampledField(grid, _offset_sum_field(terms, quad.weights, grid), "bilinear")


def rotated_average_field(
    g: SampledField, theta: float, quad: CircleQuadrature, grid: GridSpec | None = None
) -> SampledField:
    theta = check_angle(theta)
    grid = grid or g.grid
    terms = [(g, _rotated(quad, theta) - quad.points)]
    return SampledField(grid, _offset_sum_field(terms, quad.weights, grid), "bilinear")


def dual_B1_field(
    h: SampledField, g: SampledField, theta: float, quad: CircleQuadrature,
    grid: GridSpec | None = None,
) -> SampledField:
    theta = check_angle(theta)
    grid = grid or h.grid
    y = quad.points
    terms = [(h, -y), (g, _rotated(quad, theta) - y)]
    return SampledField(grid, _offset_sum_field(terms, quad.weights, grid), "bilinear")


def dual_B2_field(
    f: SampledField, h: SampledField, theta: float, quad: CircleQuadrature,
    grid: GridSpec | None = None,
) -> SampledField:
    theta = check_angle(theta)
    grid = grid or h.grid
    y = quad.points
    ry = _rotated(quad, theta)
    terms = [(h, -ry), (f, y - ry)]
    return SampledField(grid, _offset_sum_field(terms, quad.weights, grid), "bilinear")


def l1_pairing_check(
    f: SampledField, g: SampledField, theta: float, quad: CircleQuadrature,
    grid: GridSpec | None = None,
) -> tuple[float, float]:
    """Both sides of ``int B_theta(f, g) dx = int f(x) A_theta g(x) dx``.

    Inputs must be nonnegative.
    """
    if (f.values < 0).any() or (g.values < 0).any():
        raise ValueError("l1_pairing_check is stated for nonnegative f and g")
    grid = grid or f.grid
    w = grid.cell_weights()
    lhs = float(np.sum(w * bilinear_field(f, g, theta, quad, grid).values))
    ag = rotated_average_field(g, theta, quad, grid).values
    fv = f.values if f.grid == grid else _resample(f, grid)
    rhs = float(np.sum(w * fv * ag))
    return lhs, rhs


def _resample(f: SampledField, grid: GridSpec) -> np.ndarray:
    X1, X2 = grid.mesh()
    return eval_at(f, np.stack([X1, X2], axis=-1))


def inner(a: SampledField, b: SampledField) -> float:
    """Riemann-sum inner product of two fields on the same grid."""
    if a.grid != b.grid:
        raise ValueError("inner product needs fields on the same grid")
    return float(np.sum(a.grid.cell_weights() * a.values * b.values))


# ---------------------------------------------------------------------------
# thickened general operator


@dataclass(frozen=True)
class ThickenedKernelSpec:
    """Three defining functions with their levels, thickened to slabs of half-width ``eps``."""

    triple: "DefiningTriple"
    eps: float

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"thickness must be positive, got {self.eps}")

    @property
    def levels(self):
        return self.triple.levels


def _support_nodes(f: SampledField, step: float, window=None) -> np.ndarray:
    """Midpoint nodes of a ``step`` lattice covering the bounding box of ``supp f``."""
    I, J = f.nonzero()
    if len(I) == 0:
        return np.empty((0, 2))
    c = f.grid.coords
    pad = f.grid.spacing
    lo = np.array([c[I.min()], c[J.min()]]) - pad
    hi = np.array([c[I.max()], c[J.max()]]) + pad
    if window is not None:
        lo = np.maximum(lo, window[0])
        hi = np.minimum(hi, window[1])
        if np.any(lo >= hi):
            return np.empty((0, 2))
    k0 = np.floor(lo / step).astype(int)
    k1 = np.ceil(hi / step).astype(int)
    a = (np.arange(k0[0], k1[0]) + 0.5) * step
    b = (np.arange(k0[1], k1[1]) + 0.5) * step
    A, Bm = np.meshgrid(a, b, indexing="ij")
    return np.column_stack([A.ravel(), Bm.ravel()])


def _slab_nodes(phi, x, t, eps, f, step, chunk=1_000_000):
    """Lattice nodes ``u`` with ``|phi(x, u) - t| < eps`` and ``f(u) != 0``, with ``f(u)``."""
    nodes = _support_nodes(f, step)
    keep_u, keep_v = [], []
    for s in range(0, len(nodes), chunk):
        u = nodes[s : s + chunk]
        m = np.abs(phi(x[None, :], u) - t) < eps
        u = u[m]
        v = eval_at(f, u) if len(u) else np.empty(0)
        nz = v != 0
        keep_u.append(u[nz])
        keep_v.append(v[nz])
    if not keep_u:
        return np.empty((0, 2)), np.empty(0)
    return np.concatenate(keep_u), np.concatenate(keep_v)


def _blocks(u: np.ndarray, size: float):
    key = np.floor(u / size).astype(np.int64)
    uniq, inv = np.unique(key, axis=0, return_inverse=True)
    order = np.argsort(inv.ravel(), kind="stable")
    bounds = np.searchsorted(inv.ravel()[order], np.arange(len(uniq) + 1))
    centers = (uniq + 0.5) * size
    return centers, order, bounds


def general_B_eps(
    spec: ThickenedKernelSpec,
    f: SampledField,
    g: SampledField,
    x,
    step: float,
    psi=None,
    block: int = 8,
    brute_force: bool = False,
) -> float:
    """``eps^-3 * sum f(y) g(z) psi(y, z) step^4`` over lattice pairs ``(y, z)`` with
    ``|phi1(x, y) - t1|``, ``|phi2(x, z) - t2|``, ``|phi3(y, z) - t3|`` all ``< eps``.

    ``y`` and ``z`` run over cell midpoints of a ``step`` lattice covering the
    supports of ``f`` and ``g``.  Pairs are screened block-wise (blocks of
    ``block`` cells) with a first-order bound on ``phi3`` before the exact
    test; ``brute_force=True`` tests every pair.
    """
    eps = spec.eps
    if not step < eps:
        raise ValueError(f"integration step {step} must be smaller than eps = {eps}")
    x = np.asarray(x, float)
    p1, p2, p3 = spec.triple.phi1, spec.triple.phi2, spec.triple.phi3
    t1, t2, t3 = spec.levels
    ys, fy = _slab_nodes(p1, x, t1, eps, f, step)
    zs, gz = _slab_nodes(p2, x, t2, eps, g, step)
    if len(ys) == 0 or len(zs) == 0:
        return 0.0

    def pair_sum(yb, fyb, zb, gzb):
        hit = np.abs(p3(yb[:, None, :], zb[None, :, :]) - t3) < eps
        w = fyb[:, None] * gzb[None, :]
        if psi is not None:
            w = w * psi(yb[:, None, :], zb[None, :, :])
        return float(np.sum(w * hit))

    total = 0.0
    if brute_force:
        for s in range(0, len(ys), 256):
            total += pair_sum(ys[s : s + 256], fy[s : s + 256], zs, gz)
        return total * step**4 / eps**3

    size = block * step
    cy, oy, by = _blocks(ys, size)
    cz, oz, bz = _blocks(zs, size)
    half_diag = size * math.sqrt(2) / 2
    for i in range(len(cy)):
        c = np.broadcast_to(cy[i], cz.shape)
        val = p3(c, cz)
        grad = np.linalg.norm(p3.d_a(c, cz), axis=-1) + np.linalg.norm(p3.d_b(c, cz), axis=-1)
        margin = 1.5 * grad * half_diag + 4 * size**2
        cand = np.nonzero(np.abs(val - t3) < eps + margin)[0]
        if len(cand) == 0:
            continue
        iy = oy[by[i] : by[i + 1]]
        iz = np.concatenate([oz[bz[j] : bz[j + 1]] for j in cand])
        total += pair_sum(ys[iy], fy[iy], zs[iz], gz[iz])
    return total * step**4 / eps**3
