"""Unit-distance pairs and unit equilateral triangles in finite point sets.

Counts are over ordered tuples, so one geometric triangle contributes 6.
Unit distance means ``| |p - q|^2 - 1 | <= tol``.
"""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DEFAULT_TOL = 1e-9
_ROT = {
    s: np.array([[0.5, -s * math.sqrt(3) / 2], [s * math.sqrt(3) / 2, 0.5]]) for s in (1, -1)
}


@dataclass(frozen=True, eq=False)
class PointSet:
    points: np.ndarray
    exact: bool = False

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if np.isnan(pts).any():
            raise ValueError("point set contains NaN coordinates")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def has_duplicates(self) -> bool:
        return len(np.unique(self.points, axis=0)) < len(self.points)

    @classmethod
    def read_csv(cls, path: str | Path, exact: bool = False) -> PointSet:
        return cls.parse_csv(Path(path).read_text(), exact)

    @classmethod
    def parse_csv(cls, text: str, exact: bool = False) -> PointSet:
        """Two numeric columns; a non-numeric first row is taken as a header."""
        rows = [r for r in csv.reader(io.StringIO(text)) if r]
        if rows:
            try:
                float(rows[0][0])
            except ValueError:
                rows = rows[1:]
        return cls(np.array([[float(r[0]), float(r[1])] for r in rows]).reshape(-1, 2), exact)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y"])
        for a, b in self.points:
            w.writerow([repr(float(a)), repr(float(b))])
        return buf.getvalue()


def _check_tol(P: PointSet, tol: float) -> float:
    tol = float(tol)
    if tol < 0:
        raise ValueError("tolerance must be nonnegative")
    if tol == 0 and not P.exact:
        raise ValueError("tol = 0 requires an exactness-flagged point set")
    return tol


class _CellIndex:
    """Spatial hash with cell side ``s``; unit-distance partners lie in adjacent cells."""

    def __init__(self, pts: np.ndarray, side: float):
        self.pts = pts
        self.side = side
        self.cells: dict[tuple[int, int], list[int]] = defaultdict(list)
        for k, key in enumerate(map(tuple, np.floor(pts / side).astype(np.int64))):
            self.cells[key].append(k)

    def near(self, p) -> np.ndarray:
        ci, cj = np.floor(np.asarray(p) / self.side).astype(np.int64)
        out = []
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                out.extend(self.cells.get((ci + di, cj + dj), ()))
        return np.array(out, dtype=np.intp)


def _is_unit(d2, tol):
    return np.abs(d2 - 1.0) <= tol


def unit_neighbors(P: PointSet, tol: float = DEFAULT_TOL) -> list[np.ndarray]:
    """For each point, the indices of its unit-distance partners (sorted)."""
    tol = _check_tol(P, tol)
    pts = P.points
    index = _CellIndex(pts, math.sqrt(1 + tol))
    out = []
    for k, p in enumerate(pts):
        cand = index.near(p)
        d2 = np.sum((pts[cand] - p) ** 2, axis=1)
        out.append(np.sort(cand[_is_unit(d2, tol)]))
    return out


def count_unit_pairs(P: PointSet, tol: float = DEFAULT_TOL) -> int:
    """Ordered pairs ``(x, y)`` with ``|x - y| = 1``."""
    return int(sum(len(nb) for nb in unit_neighbors(P, tol)))


def count_unit_triangles(P: PointSet, tol: float = DEFAULT_TOL) -> int:
    """Ordered triples ``(x, y, z)`` with all three distances equal to 1."""
    pts = P.points
    total = 0
    for k, nb in enumerate(unit_neighbors(P, tol)):
        if len(nb) < 2:
            continue
        q = pts[nb]
        d2 = np.sum((q[:, None, :] - q[None, :, :]) ** 2, axis=-1)
        total += int(np.count_nonzero(_is_unit(d2, tol)))
    return total


def discrete_B(P: PointSet, sign: int, tol: float = DEFAULT_TOL, neighbors=None) -> np.ndarray:
    """``#{u : |u| = 1, x - u in P, x - R u in P}`` at every ``x`` in ``P``, where ``R``
    rotates by ``sign * pi/3``.

    ``u`` runs over ``x - y`` for unit partners ``y`` of ``x``.  A point ``z``
    counts as ``x - R u`` when it lies within 1/4 of that location and meets
    the unit tests against both ``x`` and ``y``, so membership is decided by
    the same tolerance as the triangle count.
    """
    tol = _check_tol(P, tol)
    pts = P.points
    rot = _ROT[sign]
    nbrs = neighbors if neighbors is not None else unit_neighbors(P, tol)
    index = _CellIndex(pts, math.sqrt(1 + tol))
    radius = 0.25
    out = np.zeros(len(pts), dtype=np.int64)
    for k, x in enumerate(pts):
        for j in nbrs[k]:
            u = x - pts[j]
            target = x - rot @ u
            cand = index.near(target)
            if len(cand) == 0:
                continue
            cand = cand[np.sum((pts[cand] - target) ** 2, axis=1) <= radius**2]
            ok = _is_unit(np.sum((pts[cand] - x) ** 2, axis=1), tol) & _is_unit(
                np.sum((pts[cand] - pts[j]) ** 2, axis=1), tol
            )
            out[k] += int(np.count_nonzero(ok))
    return out


def trilinear_via_B(P: PointSet, tol: float = DEFAULT_TOL) -> int:
    """``sum_x [B_{pi/3}(1_P, 1_P)(x) + B_{-pi/3}(1_P, 1_P)(x)] 1_P(x)``."""
    if len(P) == 0:
        return 0
    nbrs = unit_neighbors(P, tol)
    return int(discrete_B(P, 1, tol, nbrs).sum() + discrete_B(P, -1, tol, nbrs).sum())


def triangular_lattice(rows: int, cols: int | None = None, origin=(0.0, 0.0)) -> PointSet:
    """Unit triangular lattice; a triangle of side ``rows`` if ``cols`` is None,
    else a ``rows x cols`` parallelogram patch."""
    pts = []
    for j in range(rows):
        for i in range(cols if cols is not None else rows - j):
            pts.append((i + 0.5 * j, j * math.sqrt(3) / 2))
    return PointSet(np.array(pts, dtype=float).reshape(-1, 2) + np.asarray(origin, float))


def integer_lattice(n: int) -> PointSet:
    a = np.arange(n, dtype=float)
    A, B = np.meshgrid(a, a, indexing="ij")
    return PointSet(np.column_stack([A.ravel(), B.ravel()]), exact=True)
