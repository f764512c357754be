"""Sampled planar functions on uniform square grids.

A :class:`SampledField` stores node values of a real function on
``[-L, L]^2`` and is zero outside that square.  Integrals are midpoint
Riemann sums where every node owns the cell ``[x - h/2, x + h/2]^2``
clipped to the domain, so boundary nodes carry half weight and corner
nodes a quarter.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

NEAREST = "nearest"
BILINEAR = "bilinear"
MODES = (NEAREST, BILINEAR)


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid on ``[-half_width, half_width]^2`` with node spacing ``spacing``."""

    half_width: float
    spacing: float

    def __post_init__(self):
        if not (self.half_width > 0 and math.isfinite(self.half_width)):
            raise ValueError(f"half_width must be positive, got {self.half_width}")
        if not (self.spacing > 0 and math.isfinite(self.spacing)):
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        cells = 2 * self.half_width / self.spacing
        if abs(cells - round(cells)) > 1e-9 * max(1.0, cells):
            raise ValueError(
                f"2L/h = {cells!r} is not an integer (L={self.half_width}, h={self.spacing})"
            )
        if round(cells) < 1:
            raise ValueError("grid needs at least 2 nodes per axis")

    @property
    def n(self) -> int:
        """Node count per axis."""
        return int(round(2 * self.half_width / self.spacing)) + 1

    @property
    def coords(self) -> np.ndarray:
        return -self.half_width + self.spacing * np.arange(self.n)

    def node(self, i: int, j: int) -> tuple[float, float]:
        h, L = self.spacing, self.half_width
        return (-L + i * h, -L + j * h)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinate arrays ``(X1, X2)`` indexed ``[i, j]``."""
        c = self.coords
        return np.meshgrid(c, c, indexing="ij")

    def cell_weights_1d(self) -> np.ndarray:
        w = np.full(self.n, self.spacing)
        w[0] = w[-1] = self.spacing / 2
        return w

    def cell_weights(self) -> np.ndarray:
        w = self.cell_weights_1d()
        return np.outer(w, w)


@dataclass(frozen=True, eq=False)
class SampledField:
    """Node values of a function on a :class:`GridSpec`.

    ``values[i, j]`` is the value at node ``(-L + i h, -L + j h)``.
    """

    grid: GridSpec
    values: np.ndarray
    mode: str = BILINEAR
    _nonzero: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown interpolation mode {self.mode!r}")
        values = np.asarray(self.values, dtype=float)
        n = self.grid.n
        if values.shape != (n, n):
            if values.size != n * n:
                raise ValueError(f"expected {n * n} values, got {values.size}")
            values = values.reshape(n, n)
        bad = ~np.isfinite(values)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise ValueError(f"non-finite value at node ({i}, {j}) = {self.grid.node(i, j)}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def with_mode(self, mode: str) -> SampledField:
        return SampledField(self.grid, self.values, mode)

    def nonzero(self) -> tuple[np.ndarray, np.ndarray]:
        """Indices of nonzero nodes, cached."""
        if not self._nonzero:
            self._nonzero.append(np.nonzero(self.values))
        return self._nonzero[0]

    def is_indicator(self) -> bool:
        v = self.values
        return bool(np.all((v == 0) | (v == 1)))

    def __call__(self, x) -> float | np.ndarray:
        return eval_at(self, x)

    # serialization -------------------------------------------------------

    def to_record(self) -> dict:
        return {
            "L": self.grid.half_width,
            "h": self.grid.spacing,
            "mode": self.mode,
            "values": self.values.ravel().tolist(),
        }

    @classmethod
    def from_record(cls, rec: dict) -> SampledField:
        grid = GridSpec(float(rec["L"]), float(rec["h"]))
        return cls(grid, np.array(rec["values"], dtype=float), rec["mode"])

    def to_json(self) -> str:
        return json.dumps(self.to_record())

    @classmethod
    def from_json(cls, text: str) -> SampledField:
        return cls.from_record(json.loads(text))

    def to_csv(self) -> str:
        """One header row ``L,h,mode`` followed by one row per grid row."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([repr(self.grid.half_width), repr(self.grid.spacing), self.mode])
        for row in self.values:
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> SampledField:
        rows = list(csv.reader(io.StringIO(text)))
        L, h, mode = rows[0]
        vals = np.array([[float(v) for v in row] for row in rows[1:] if row])
        return cls(GridSpec(float(L), float(h)), vals, mode)


def sample(expr: Callable, grid: GridSpec, mode: str = BILINEAR) -> SampledField:
    """Sample ``expr`` at every node.

    ``expr`` receives the coordinate arrays ``(x1, x2)`` and must broadcast;
    scalar-only callables are vectorized as a fallback.
    """
    X1, X2 = grid.mesh()
    try:
        values = np.asarray(expr(X1, X2), dtype=float)
        values = np.broadcast_to(values, X1.shape).copy()
    except (TypeError, ValueError):
        values = np.vectorize(lambda a, b: float(expr(a, b)))(X1, X2)
    return SampledField(grid, values, mode)


def constant(c: float, grid: GridSpec, mode: str = BILINEAR) -> SampledField:
    return SampledField(grid, np.full((grid.n, grid.n), float(c)), mode)


def eval_at(f: SampledField, x) -> float | np.ndarray:
    """Evaluate ``f`` at a point or an array of points with trailing axis 2."""
    pts = np.asarray(x, dtype=float)
    scalar = pts.ndim == 1
    pts = np.atleast_2d(pts)
    L, h, n = f.grid.half_width, f.grid.spacing, f.grid.n
    t1 = (pts[..., 0] + L) / h
    t2 = (pts[..., 1] + L) / h
    inside = (t1 >= 0) & (t1 <= n - 1) & (t2 >= 0) & (t2 <= n - 1)
    out = np.zeros(t1.shape)
    t1, t2 = t1[inside], t2[inside]
    v = f.values
    if f.mode == NEAREST:
        i = np.clip(np.rint(t1).astype(np.intp), 0, n - 1)
        j = np.clip(np.rint(t2).astype(np.intp), 0, n - 1)
        out[inside] = v[i, j]
    else:
        i = np.minimum(np.floor(t1).astype(np.intp), n - 2)
        j = np.minimum(np.floor(t2).astype(np.intp), n - 2)
        a = t1 - i
        b = t2 - j
        out[inside] = (
            (1 - a) * (1 - b) * v[i, j]
            + a * (1 - b) * v[i + 1, j]
            + (1 - a) * b * v[i, j + 1]
            + a * b * v[i + 1, j + 1]
        )
    return float(out[0]) if scalar else out


def integrate(f: SampledField) -> float:
    return float(np.sum(f.grid.cell_weights() * f.values))


def lp_norm(f: SampledField, p: float) -> float:
    """Discrete L^p norm; ``p = math.inf`` gives the max norm."""
    p = float(p)
    if math.isnan(p) or p < 1:
        raise ValueError(f"exponent must satisfy p >= 1, got {p}")
    a = np.abs(f.values)
    if math.isinf(p):
        return float(a.max())
    w = f.grid.cell_weights()
    if p == 1:
        return float(np.sum(w * a))
    m = a.max()
    if m == 0:
        return 0.0
    # normalize before powering to avoid under/overflow
    return float(m * np.sum(w * (a / m) ** p) ** (1 / p))


def measure(f: SampledField) -> float:
    """Area of the set whose indicator is ``f``."""
    if not f.is_indicator():
        raise ValueError("measure() requires a 0/1 indicator field")
    return float(np.sum(f.grid.cell_weights() * f.values))


def parse_exponent(text: str | float) -> float:
    """``"inf"``, ``"3/2"``, ``"2"`` -> float exponent in ``[1, inf]``."""
    if isinstance(text, (int, float)):
        p = float(text)
    else:
        s = text.strip().lower()
        if s in ("inf", "infinity", "oo"):
            p = math.inf
        elif "/" in s:
            a, b = s.split("/")
            p = float(a) / float(b)
        else:
            p = float(s)
    if not (p >= 1):
        raise ValueError(f"exponent must satisfy p >= 1, got {text}")
    return p
