"""Geometric hypotheses for bilinear generalized Radon transforms.

A triple of defining functions ``phi1(x, y)``, ``phi2(x, z)``, ``phi3(y, z)``
with levels ``t1, t2, t3`` cuts out

    Z      = {(x, y, z) : phi1(x, y) = t1, phi2(x, z) = t2, phi3(y, z) = t3}
    ZZ     = {(x, y, z, y', z') : (x, y, z) in Z, (x, y', z') in Z}

in R^6 and R^10.  The checkers here evaluate, at given points, the rank of
the constraint Jacobians of ``Z`` and ``ZZ``, the rotational curvature
determinant of a single defining function, and the four 4x4 determinants
whose disjunction makes the incidence kernel locally bounded.

All callables take arrays with a trailing axis of length 2 and broadcast.
Extended points are flat arrays ``(x1, x2, y1, y2, z1, z2, y'1, y'2, z'1, z'2)``.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

logger = logging.getLogger(__name__)

RANK_RTOL = 1e-8
DET_TAU = 1e-6
SURFACE_TOL = 1e-8


@dataclass(frozen=True)
class DefiningFunction:
    """A real function ``phi(a, b)`` of two planar points, with level ``level``.

    Derivatives not supplied analytically are taken by central differences.
    ``mixed_hessian(a, b)[..., i, j]`` is ``d^2 phi / da_i db_j``.
    """

    name: str
    value: Callable
    grad_a: Callable | None = None
    grad_b: Callable | None = None
    mixed_hessian: Callable | None = None
    level: float = 0.0
    fd_step: float = 1e-5

    def __call__(self, a, b):
        return self.value(np.asarray(a, float), np.asarray(b, float))

    def at_level(self, t: float) -> DefiningFunction:
        return replace(self, level=float(t))

    def d_a(self, a, b) -> np.ndarray:
        a, b = np.asarray(a, float), np.asarray(b, float)
        if self.grad_a is not None:
            return np.asarray(self.grad_a(a, b), float)
        return fd_gradient(lambda u: self.value(u, b), a, self.fd_step)

    def d_b(self, a, b) -> np.ndarray:
        a, b = np.asarray(a, float), np.asarray(b, float)
        if self.grad_b is not None:
            return np.asarray(self.grad_b(a, b), float)
        return fd_gradient(lambda u: self.value(a, u), b, self.fd_step)

    def hess_ab(self, a, b) -> np.ndarray:
        a, b = np.asarray(a, float), np.asarray(b, float)
        if self.mixed_hessian is not None:
            return np.asarray(self.mixed_hessian(a, b), float)
        # differentiate d_a in b; a coarser step keeps nested differences above roundoff
        step = self.fd_step if self.grad_a is not None else 1e2 * self.fd_step
        return fd_jacobian(lambda u: self.d_a(a, u), b, step)


def fd_gradient(fun: Callable, a: np.ndarray, step: float) -> np.ndarray:
    out = np.empty(np.broadcast_shapes(np.shape(fun(a)) + (2,), a.shape))
    for i in range(2):
        e = np.zeros(2)
        e[i] = step
        out[..., i] = (fun(a + e) - fun(a - e)) / (2 * step)
    return out


def fd_jacobian(fun: Callable, b: np.ndarray, step: float) -> np.ndarray:
    """``J[..., i, j] = d fun_i / d b_j`` for a vector-valued ``fun``."""
    cols = []
    for j in range(2):
        e = np.zeros(2)
        e[j] = step
        cols.append((fun(b + e) - fun(b - e)) / (2 * step))
    return np.stack(cols, axis=-1)


# ---------------------------------------------------------------------------
# built-in defining functions


def euclidean_distance(level: float = 1.0) -> DefiningFunction:
    def value(a, b):
        return np.linalg.norm(a - b, axis=-1)

    def grad_a(a, b):
        d = a - b
        with np.errstate(invalid="ignore", divide="ignore"):
            return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def grad_b(a, b):
        return -grad_a(a, b)

    def hess(a, b):
        d = a - b
        r = np.linalg.norm(d, axis=-1)[..., None, None]
        with np.errstate(invalid="ignore", divide="ignore"):
            return (d[..., :, None] * d[..., None, :] / r**2 - np.eye(2)) / r

    return DefiningFunction("euclidean_distance", value, grad_a, grad_b, hess, level)


def dot_pairing(level: float = 1.0) -> DefiningFunction:
    def value(a, b):
        return np.sum(a * b, axis=-1)

    def hess(a, b):
        return np.broadcast_to(np.eye(2), np.broadcast_shapes(a.shape, b.shape) + (2,)).copy()

    return DefiningFunction(
        "dot_pairing",
        value,
        lambda a, b: np.broadcast_to(b, np.broadcast_shapes(a.shape, b.shape)).copy(),
        lambda a, b: np.broadcast_to(a, np.broadcast_shapes(a.shape, b.shape)).copy(),
        hess,
        level,
    )


def linear_form(direction=(1.0, 0.0), level: float = 0.0) -> DefiningFunction:
    """``phi(a, b) = (a - b) . e`` for a fixed unit vector ``e``."""
    e = np.asarray(direction, float)
    e = e / np.linalg.norm(e)

    def shape(a, b):
        return np.broadcast_shapes(np.shape(a), np.shape(b))

    return DefiningFunction(
        "linear_form",
        lambda a, b: np.sum((a - b) * e, axis=-1),
        lambda a, b: np.broadcast_to(e, shape(a, b)).copy(),
        lambda a, b: np.broadcast_to(-e, shape(a, b)).copy(),
        lambda a, b: np.zeros(shape(a, b) + (2,)),
        level,
    )


BUILTINS: dict[str, Callable[..., DefiningFunction]] = {
    "euclidean_distance": euclidean_distance,
    "dot_pairing": dot_pairing,
    "linear_form": linear_form,
}


@dataclass(frozen=True)
class DefiningTriple:
    phi1: DefiningFunction
    phi2: DefiningFunction
    phi3: DefiningFunction

    @property
    def levels(self) -> tuple[float, float, float]:
        return (self.phi1.level, self.phi2.level, self.phi3.level)

    def with_levels(self, t1, t2, t3) -> DefiningTriple:
        return DefiningTriple(self.phi1.at_level(t1), self.phi2.at_level(t2), self.phi3.at_level(t3))


def distance_triple(t=(1.0, 1.0, 1.0)) -> DefiningTriple:
    """All three constraints are unit (or ``t``) distances: equilateral triangles."""
    return DefiningTriple(*(euclidean_distance(level) for level in t))


MODELS: dict[str, Callable[[], DefiningTriple]] = {
    "distance": distance_triple,
    "mixed": lambda: DefiningTriple(euclidean_distance(1.0), euclidean_distance(1.0), linear_form((1.0, 0.0), 0.0)),
}


# ---------------------------------------------------------------------------
# surfaces and their Jacobians


def _split(point, extended: bool):
    p = np.asarray(point, float).reshape(-1)
    need = 10 if extended else 6
    if p.size != need:
        raise ValueError(f"expected a point in R^{need}, got {p.size} coordinates")
    return [p[2 * i : 2 * i + 2] for i in range(need // 2)]


def residuals(triple: DefiningTriple, point, extended: bool = False) -> np.ndarray:
    """Constraint values minus levels: 3 entries on Z, 6 on ZZ."""
    parts = _split(point, extended)
    x, y, z = parts[:3]
    t1, t2, t3 = triple.levels
    r = [triple.phi1(x, y) - t1, triple.phi2(x, z) - t2, triple.phi3(y, z) - t3]
    if extended:
        yp, zp = parts[3:]
        r += [triple.phi1(x, yp) - t1, triple.phi2(x, zp) - t2, triple.phi3(yp, zp) - t3]
    return np.array(r, dtype=float)


def _require_on_surface(triple, point, extended, tol):
    r = residuals(triple, point, extended)
    worst = float(np.max(np.abs(r)))
    if not worst <= tol:
        raise ValueError(f"point is off the surface: max residual {worst:.3e} > {tol:.1e}")


def z_matrix(triple: DefiningTriple, point) -> np.ndarray:
    """3x6 Jacobian of ``(phi1(x, y), phi2(x, z), phi3(y, z))`` in ``(x, y, z)``."""
    x, y, z = _split(point, False)
    p1, p2, p3 = triple.phi1, triple.phi2, triple.phi3
    m = np.zeros((3, 6))
    m[0, 0:2], m[0, 2:4] = p1.d_a(x, y), p1.d_b(x, y)
    m[1, 0:2], m[1, 4:6] = p2.d_a(x, z), p2.d_b(x, z)
    m[2, 2:4], m[2, 4:6] = p3.d_a(y, z), p3.d_b(y, z)
    return m


def zz_matrix(triple: DefiningTriple, point) -> np.ndarray:
    """6x10 Jacobian of the six ZZ constraints in ``(x, y, z, y', z')``."""
    x, y, z, yp, zp = _split(point, True)
    p1, p2, p3 = triple.phi1, triple.phi2, triple.phi3
    m = np.zeros((6, 10))
    m[:3, :6] = z_matrix(triple, np.concatenate([x, y, z]))
    m[3, 0:2], m[3, 6:8] = p1.d_a(x, yp), p1.d_b(x, yp)
    m[4, 0:2], m[4, 8:10] = p2.d_a(x, zp), p2.d_b(x, zp)
    m[5, 6:8], m[5, 8:10] = p3.d_a(yp, zp), p3.d_b(yp, zp)
    return m


def numerical_rank(m: np.ndarray, rtol: float = RANK_RTOL) -> int:
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries (singular defining function?)")
    s = np.linalg.svd(m, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def phong_stein_det(phi: DefiningFunction, x, y, tol: float = SURFACE_TOL) -> float:
    """Bordered determinant ``det [[0, d_x phi], [-d_y phi^T, d^2 phi / dx_i dy_j]]``.

    Rotational curvature holds at ``(x, y)`` iff the result is nonzero.
    """
    x, y = np.asarray(x, float), np.asarray(y, float)
    resid = abs(float(phi(x, y)) - phi.level)
    if not resid <= tol:
        raise ValueError(f"(x, y) is off the level set: |phi - t| = {resid:.3e}")
    m = np.zeros((3, 3))
    m[0, 1:] = phi.d_a(x, y)
    m[1:, 0] = -phi.d_b(x, y)
    m[1:, 1:] = phi.hess_ab(x, y)
    return float(np.linalg.det(m))


def z_rank(triple: DefiningTriple, point, tol: float = SURFACE_TOL) -> int:
    _require_on_surface(triple, point, False, tol)
    return numerical_rank(z_matrix(triple, point))


def zz_rank(triple: DefiningTriple, point, tol: float = SURFACE_TOL) -> int:
    _require_on_surface(triple, point, True, tol)
    return numerical_rank(zz_matrix(triple, point))


@dataclass(frozen=True)
class FirstOrderDets:
    """The four 4x4 determinants at a point of ZZ.

    ``yz_literal`` uses ``d_z' phi3(x, z')`` in the third row of the y-z'
    determinant, as printed; ``yz`` uses ``d_z' phi2(x, z')``, matching the
    other three determinants and the y, z' columns of the ZZ Jacobian.
    """

    yz: float
    zy: float
    zz: float
    yy: float
    yz_literal: float

    def as_dict(self) -> dict:
        return {"D_yz'": self.yz, "D_zy'": self.zy, "D_zz'": self.zz, "D_yy'": self.yy,
                "D_yz'_literal": self.yz_literal}


def _block_det(r1, r2, r3, r4) -> float:
    m = np.zeros((4, 4))
    m[0, :2], m[1, :2], m[2, 2:], m[3, 2:] = r1, r2, r3, r4
    return float(np.linalg.det(m))


def first_order_dets(triple: DefiningTriple, point, tol: float = SURFACE_TOL) -> FirstOrderDets:
    _require_on_surface(triple, point, True, tol)
    x, y, z, yp, zp = _split(point, True)
    p1, p2, p3 = triple.phi1, triple.phi2, triple.phi3
    dy1 = p1.d_b(x, y)
    dy3 = p3.d_a(y, z)
    dz2 = p2.d_b(x, z)
    dz3 = p3.d_b(y, z)
    dyp1 = p1.d_b(x, yp)
    dyp3 = p3.d_a(yp, zp)
    dzp2 = p2.d_b(x, zp)
    dzp3 = p3.d_b(yp, zp)
    return FirstOrderDets(
        yz=_block_det(dy1, dy3, dzp2, dzp3),
        zy=_block_det(dz2, dz3, dyp1, dyp3),
        zz=_block_det(dz2, dz3, dzp2, dzp3),
        yy=_block_det(dy1, dy3, dyp1, dyp3),
        yz_literal=_block_det(dy1, dy3, p3.d_b(x, zp), dzp3),
    )


def passes_cond_general(d: FirstOrderDets, tau: float = DET_TAU) -> bool:
    return abs(d.yz) > tau or abs(d.zy) > tau or (abs(d.zz) > tau and abs(d.yy) > tau)


@dataclass
class CondReport:
    dets: list[FirstOrderDets]
    passed: list[bool]
    failures: list[dict] = field(default_factory=list)
    literal_differs: int = 0

    @property
    def verdict(self) -> bool:
        return all(self.passed)

    def to_dict(self) -> dict:
        return {
            "samples": len(self.passed),
            "passed": int(sum(self.passed)),
            "verdict": self.verdict,
            "literal_yz_differs": self.literal_differs,
            "failures": self.failures,
        }


def cond_general(
    triple: DefiningTriple, points, tau: float = DET_TAU, tol: float = SURFACE_TOL
) -> CondReport:
    """At each ZZ point: ``|D_yz'| > tau or |D_zy'| > tau or (|D_zz'| > tau and |D_yy'| > tau)``."""
    points = list(points)
    if not points:
        raise ValueError("cond_general needs at least one sample point")
    report = CondReport([], [])
    for k, p in enumerate(points):
        d = first_order_dets(triple, p, tol)
        ok = passes_cond_general(d, tau)
        report.dets.append(d)
        report.passed.append(ok)
        if not math.isclose(d.yz, d.yz_literal, rel_tol=1e-9, abs_tol=1e-12):
            report.literal_differs += 1
        if not ok:
            report.failures.append({"index": k, "point": np.asarray(p).tolist(), **d.as_dict()})
    return report


# ---------------------------------------------------------------------------
# sampling and derivative validation


def newton_project(
    triple: DefiningTriple, seed, extended: bool = True, tol: float = 1e-10, max_iter: int = 50
) -> np.ndarray | None:
    """Minimum-norm Gauss-Newton projection of ``seed`` onto Z or ZZ; None if it stalls."""
    p = np.asarray(seed, float).reshape(-1).copy()
    jac = zz_matrix if extended else z_matrix
    for _ in range(max_iter):
        r = residuals(triple, p, extended)
        if not np.all(np.isfinite(r)):
            return None
        if np.max(np.abs(r)) <= tol:
            return p
        J = jac(triple, p)
        if not np.all(np.isfinite(J)):
            return None
        step, *_ = np.linalg.lstsq(J, r, rcond=None)
        p -= step
        if not np.all(np.isfinite(p)) or np.max(np.abs(p)) > 1e6:
            return None
    r = residuals(triple, p, extended)
    return p if np.max(np.abs(r)) <= tol else None


def sample_surface(
    triple: DefiningTriple,
    count: int,
    extended: bool = True,
    seed: int = 0,
    box: float = 1.5,
    seeds=None,
    max_tries: int | None = None,
    tol: float = 1e-10,
) -> list[np.ndarray]:
    """Points of ZZ (or Z) with every residual ``<= tol``.

    Explicit ``seeds`` are tried first; points already on the surface are
    returned unchanged.  Random seeds are uniform in ``[-box, box]^d``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    dim = 10 if extended else 6
    rng = np.random.default_rng(seed)
    found: list[np.ndarray] = []
    for s in seeds or []:
        if len(found) == count:
            break
        p = newton_project(triple, s, extended, tol)
        if p is not None:
            found.append(p)
    budget = max_tries if max_tries is not None else 20 * count + 100
    tries = 0
    while len(found) < count and tries < budget:
        tries += 1
        p = newton_project(triple, rng.uniform(-box, box, dim), extended, tol)
        if p is not None:
            found.append(p)
    if len(found) < count:
        warnings.warn(
            f"sample_surface found only {len(found)} of {count} points after {tries} seeds",
            RuntimeWarning,
            stacklevel=2,
        )
    return found


@dataclass
class FDCheck:
    max_discrepancy: float
    singular: list[int]


def finite_diff_check(phi: DefiningFunction, points, step: float = 1e-5) -> FDCheck:
    """Largest gap between supplied derivatives and central differences.

    ``points`` is a sequence of ``(a, b)`` pairs.  Gradients are compared to
    differences of ``phi``; the mixed Hessian to differences of ``d_a`` in
    ``b``.  Points where any derivative is non-finite are reported as
    singular and left out of the maximum.
    """
    worst = 0.0
    singular = []
    for k, (a, b) in enumerate(points):
        a, b = np.asarray(a, float), np.asarray(b, float)
        ga, gb, H = phi.d_a(a, b), phi.d_b(a, b), phi.hess_ab(a, b)
        if not (np.all(np.isfinite(ga)) and np.all(np.isfinite(gb)) and np.all(np.isfinite(H))):
            singular.append(k)
            continue
        fa = fd_gradient(lambda u: phi(u, b), a, step)
        fb = fd_gradient(lambda u: phi(a, u), b, step)
        fh = fd_jacobian(lambda u: phi.d_a(a, u), b, step)
        if not (np.all(np.isfinite(fa)) and np.all(np.isfinite(fb)) and np.all(np.isfinite(fh))):
            singular.append(k)
            continue
        worst = max(worst, float(np.max(np.abs(ga - fa))), float(np.max(np.abs(gb - fb))),
                    float(np.max(np.abs(H - fh))))
    if singular:
        logger.info("%s: %d singular points skipped", phi.name, len(singular))
    return FDCheck(worst, singular)


def equilateral_point(x=(0.0, 0.0), angle: float = 0.0, orientation: int = 1) -> np.ndarray:
    """``(x, y, z)`` forming a unit equilateral triangle, ``y`` at ``angle`` from ``x``."""
    x = np.asarray(x, float)
    y = x + np.array([math.cos(angle), math.sin(angle)])
    b = angle + orientation * math.pi / 3
    z = x + np.array([math.cos(b), math.sin(b)])
    return np.concatenate([x, y, z])


def sample_level_pairs(
    phi: DefiningFunction, count: int, seed: int = 0, box: float = 1.5, tol: float = 1e-12,
    max_tries: int | None = None,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Pairs ``(a, b)`` with ``phi(a, b) = level``: ``a`` uniform in the box, ``b``
    moved onto the level set by Newton steps along ``grad_b``."""
    rng = np.random.default_rng(seed)
    out = []
    budget = max_tries if max_tries is not None else 20 * count + 100
    for _ in range(budget):
        if len(out) == count:
            break
        a, b = rng.uniform(-box, box, 2), rng.uniform(-box, box, 2)
        for _ in range(50):
            r = float(phi(a, b)) - phi.level
            g = phi.d_b(a, b)
            gg = float(g @ g)
            if not (math.isfinite(r) and np.all(np.isfinite(g))) or gg < 1e-12:
                break
            if abs(r) <= tol:
                if np.all(np.isfinite(phi.d_a(a, b))) and np.all(np.isfinite(phi.hess_ab(a, b))):
                    out.append((a, b.copy()))
                break
            b = b - r * g / gg
    if len(out) < count:
        warnings.warn(f"sample_level_pairs found only {len(out)} of {count} pairs", RuntimeWarning,
                      stacklevel=2)
    return out
