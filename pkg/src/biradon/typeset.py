"""Exact type-set polytopes in the coordinates ``(u, v, w) = (1/p, 1/q, 1/r)``.

Every constraint is a :class:`HalfSpace` ``a . (u, v, w) <= b`` with
:class:`fractions.Fraction` entries; no floating point is used anywhere in
this module.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass
from fractions import Fraction

Triple = tuple[Fraction, Fraction, Fraction]

NONDEGENERATE = "nondegenerate"
DEGENERATE = "degenerate"
CASE_ALIASES = {"nondeg": NONDEGENERATE, NONDEGENERATE: NONDEGENERATE,
                "deg": DEGENERATE, DEGENERATE: DEGENERATE}


def _frac_triple(t) -> Triple:
    return tuple(Fraction(c) for c in t)  # type: ignore[return-value]


@dataclass(frozen=True)
class HalfSpace:
    coeffs: Triple
    bound: Fraction
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _frac_triple(self.coeffs))
        object.__setattr__(self, "bound", Fraction(self.bound))
        if all(c == 0 for c in self.coeffs):
            raise ValueError("half-space needs a nonzero normal")

    def lhs(self, pt) -> Fraction:
        return sum((a * x for a, x in zip(self.coeffs, pt)), Fraction(0))

    def holds(self, pt) -> bool:
        return self.lhs(pt) <= self.bound

    def is_active(self, pt) -> bool:
        return self.lhs(pt) == self.bound

    def __str__(self) -> str:
        terms = []
        for c, name in zip(self.coeffs, "uvw"):
            if c == 0:
                continue
            sign = "-" if c < 0 else "+"
            mag = abs(c)
            terms.append(f"{sign} {'' if mag == 1 else str(mag)}{name}")
        text = " ".join(terms).lstrip("+ ")
        if text.startswith("- "):
            text = "-" + text[2:]
        return f"{text} <= {self.bound}"


@dataclass(frozen=True)
class InequalitySystem:
    case: str
    halfspaces: tuple[HalfSpace, ...]

    def __len__(self) -> int:
        return len(self.halfspaces)

    def violated(self, pt) -> list[HalfSpace]:
        pt = _frac_triple(pt)
        return [hs for hs in self.halfspaces if not hs.holds(pt)]


def _hs(a, b, label):
    return HalfSpace(tuple(Fraction(x) for x in a), Fraction(b), label)


def cube_halfspaces() -> list[HalfSpace]:
    out = []
    for i, name in enumerate("uvw"):
        e = [0, 0, 0]
        e[i] = 1
        out.append(_hs(e, 1, f"Banach cube: {name} <= 1"))
        out.append(_hs([-c for c in e], 0, f"Banach cube: {name} >= 0"))
    return out


def build_system(case: str, include_dual_rectangles: bool = False) -> InequalitySystem:
    """Constraint list of the type set for ``theta != pi`` or ``theta = pi``.

    The dual tangent-rectangle constraints belong to the non-degenerate case;
    ``include_dual_rectangles`` adds them to the degenerate one as well.
    """
    case = CASE_ALIASES.get(case, case)
    if case not in (NONDEGENERATE, DEGENERATE):
        raise ValueError(f"unknown case {case!r}")
    hs = cube_halfspaces()
    hs += [
        _hs((2, 1, -1), 1, "small ball and annulus: 2u + v <= 1 + w"),
        _hs((1, 2, -1), 1, "small ball and annulus: u + 2v <= 1 + w"),
        _hs((1, 1, -2), 0, "dual of small ball and annulus: u + v <= 2w"),
    ]
    if case == NONDEGENERATE:
        hs.append(_hs((3, 3, -4), 1, "tangent rectangles, theta != pi: 3u + 3v <= 1 + 4w"))
    else:
        hs.append(_hs((3, 3, -3), 1, "tangent rectangles, theta = pi: 3u + 3v <= 1 + 3w"))
    if case == NONDEGENERATE or include_dual_rectangles:
        hs += [
            _hs((4, 3, -3), 2, "dual of tangent rectangles: 4u + 3v <= 2 + 3w"),
            _hs((3, 4, -3), 2, "dual of tangent rectangles: 3u + 4v <= 2 + 3w"),
        ]
    hs.append(_hs((-1, -1, 1), 0, "large ball: w <= u + v"))
    return InequalitySystem(case, tuple(hs))


def cube_system() -> InequalitySystem:
    return InequalitySystem("cube", tuple(cube_halfspaces()))


def _det3(m) -> Fraction:
    return (
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    )


def solve(rows, rhs) -> tuple[Fraction, ...] | None:
    """Exact Gauss-Jordan solve of a square system; None if singular."""
    n = len(rows)
    a = [[Fraction(x) for x in r] + [Fraction(b)] for r, b in zip(rows, rhs)]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            return None
        a[col], a[piv] = a[piv], a[col]
        p = a[col][col]
        a[col] = [x / p for x in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return tuple(a[r][n] for r in range(n))


def enumerate_vertices(system: InequalitySystem) -> list[Triple]:
    """All vertices, by solving every 3-subset of bounding planes exactly.

    Returns the feasible solutions, deduplicated and sorted lexicographically.
    """
    _require_bounded(system)
    found = set()
    for trio in itertools.combinations(system.halfspaces, 3):
        pt = solve([h.coeffs for h in trio], [h.bound for h in trio])
        if pt is not None and all(h.holds(pt) for h in system.halfspaces):
            found.add(pt)
    return sorted(found)


def _require_bounded(system: InequalitySystem):
    # bounded iff the normals positively span R^3; a box in every coordinate suffices here
    for i in range(3):
        up = any(h.coeffs[i] > 0 and all(h.coeffs[j] == 0 for j in range(3) if j != i)
                 for h in system.halfspaces)
        down = any(h.coeffs[i] < 0 and all(h.coeffs[j] == 0 for j in range(3) if j != i)
                   for h in system.halfspaces)
        if not (up and down):
            raise ValueError("system is not bounded by coordinate bounds in every variable")


def active_constraints(system: InequalitySystem, pt) -> list[HalfSpace]:
    pt = _frac_triple(pt)
    return [h for h in system.halfspaces if h.is_active(pt)]


def rank(rows) -> int:
    """Exact rank of a list of rational row vectors."""
    a = [[Fraction(x) for x in r] for r in rows]
    r = 0
    ncols = len(a[0]) if a else 0
    for col in range(ncols):
        piv = next((i for i in range(r, len(a)) if a[i][col] != 0), None)
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        for i in range(len(a)):
            if i != r and a[i][col] != 0:
                f = a[i][col] / a[r][col]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        r += 1
    return r


def contains(system: InequalitySystem, pt) -> tuple[bool, list[HalfSpace]]:
    """Exact membership with the list of violated constraints."""
    bad = system.violated(pt)
    return (not bad, bad)


def edges(system: InequalitySystem, vertices=None) -> list[tuple[Triple, Triple]]:
    """Vertex pairs sharing two independent active constraints."""
    verts = vertices if vertices is not None else enumerate_vertices(system)
    act = {v: active_constraints(system, v) for v in verts}
    out = []
    for a, b in itertools.combinations(verts, 2):
        common = [h for h in act[a] if h in act[b]]
        if common and rank([h.coeffs for h in common]) >= 2:
            out.append((a, b))
    return out


# ---------------------------------------------------------------------------
# hull membership and the cross check


def _scaled_row(coeffs) -> tuple[int, ...]:
    """Positive integer multiple of a rational row (same sign pattern)."""
    den = math.lcm(*(Fraction(c).denominator for c in coeffs))
    return tuple(int(Fraction(c) * den) for c in coeffs)


class Hull:
    """Convex hull of rational points, queried through barycentric coordinates
    on every affinely independent 4-subset of generators."""

    def __init__(self, vertices):
        self.vertices = [_frac_triple(v) for v in vertices]
        self._simplices = []
        for quad in itertools.combinations(self.vertices, 4):
            mat = [[Fraction(1)] * 4] + [[v[i] for v in quad] for i in range(3)]
            inv = _inverse4(mat)
            if inv is not None:
                self._simplices.append([_scaled_row(row) for row in inv])
        if not self._simplices:
            raise ValueError("generators do not span a 3-dimensional hull")

    def __contains__(self, pt) -> bool:
        pt = _frac_triple(pt)
        den = math.lcm(*(c.denominator for c in pt))
        rhs = (den, *(int(c * den) for c in pt))
        for rows in self._simplices:
            if all(sum(r * b for r, b in zip(row, rhs)) >= 0 for row in rows):
                return True
        return False


def _inverse4(m):
    n = 4
    a = [list(r) + [Fraction(int(i == j)) for j in range(n)] for i, r in enumerate(m)]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            return None
        a[col], a[piv] = a[piv], a[col]
        p = a[col][col]
        a[col] = [x / p for x in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [row[n:] for row in a]


def lattice_points(system: InequalitySystem, denominator: int) -> list[Triple]:
    """Points of the system with every coordinate in ``{0, 1/D, ..., 1}``."""
    rows = [_scaled_row((*h.coeffs, h.bound)) for h in system.halfspaces]
    D = denominator
    out = []
    for k in itertools.product(range(D + 1), repeat=3):
        if all(a * k[0] + b * k[1] + c * k[2] <= d * D for a, b, c, d in rows):
            out.append(tuple(Fraction(x, D) for x in k))
    return out


@dataclass
class CrossCheck:
    ok: bool
    combinations_checked: int
    points_checked: int
    witness: Triple | None = None
    reason: str = ""


def convexity_cross_check(
    vertices, system: InequalitySystem, n_points: int = 10_000, n_combinations: int = 500,
    denominator: int = 30, seed: int = 0,
) -> CrossCheck:
    """Compare the V- and H-descriptions both ways.

    (a) Random rational convex combinations of ``vertices`` must satisfy
    ``system``.  (b) The system's own vertices plus ``n_points`` random
    rational points of the system (coordinates ``k / denominator``) must lie
    in the hull of ``vertices``.
    """
    rng = random.Random(seed)
    verts = [_frac_triple(v) for v in vertices]
    for k in range(n_combinations):
        lam = [Fraction(rng.randint(0, 12)) for _ in verts]
        s = sum(lam)
        if s == 0:
            continue
        pt = tuple(sum((l * v[i] for l, v in zip(lam, verts)), Fraction(0)) / s for i in range(3))
        if system.violated(pt):
            return CrossCheck(False, k + 1, 0, pt, "convex combination violates the system")
    hull = Hull(verts)
    pool = lattice_points(system, denominator)
    candidates = enumerate_vertices(system) + [rng.choice(pool) for _ in range(n_points)]
    cache: dict[Triple, bool] = {}
    for k, pt in enumerate(candidates):
        if pt not in cache:
            cache[pt] = pt in hull
        if not cache[pt]:
            return CrossCheck(False, n_combinations, k + 1, pt, "feasible point outside the hull")
    return CrossCheck(True, n_combinations, len(candidates))


# ---------------------------------------------------------------------------
# reference lists and formatting

_T = Fraction
EXPECTED_VERTICES = {
    NONDEGENERATE: sorted([
        (_T(0), _T(0), _T(0)), (_T(0), _T(1), _T(1)), (_T(1), _T(0), _T(1)),
        (_T(2, 3), _T(0), _T(1, 3)), (_T(0), _T(2, 3), _T(1, 3)),
        (_T(2, 3), _T(2, 3), _T(1)), (_T(1, 2), _T(1, 2), _T(1, 2)),
    ]),
    DEGENERATE: sorted([
        (_T(0), _T(0), _T(0)), (_T(0), _T(1), _T(1)), (_T(1), _T(0), _T(1)),
        (_T(2, 3), _T(0), _T(1, 3)), (_T(0), _T(2, 3), _T(1, 3)),
        (_T(2, 3), _T(2, 3), _T(1)),
    ]),
}


def fmt_fraction(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def fmt_triple(t) -> str:
    return "(" + ", ".join(fmt_fraction(Fraction(c)) for c in t) + ")"


def to_pqr(t) -> tuple[str, str, str]:
    """``(1/p, 1/q, 1/r)`` -> ``(p, q, r)`` as strings, ``inf`` for zero."""
    return tuple("inf" if c == 0 else fmt_fraction(1 / Fraction(c)) for c in t)  # type: ignore[return-value]


def exponent_triple(p, q, r) -> Triple:
    """``(p, q, r)`` given as numbers, Fractions, or strings like ``"3/2"`` / ``"inf"``."""
    out = []
    for e in (p, q, r):
        if isinstance(e, str) and e.strip().lower() in ("inf", "infinity", "oo"):
            out.append(Fraction(0))
            continue
        if isinstance(e, float) and e == float("inf"):
            out.append(Fraction(0))
            continue
        val = Fraction(e)
        if val < 1:
            raise ValueError(f"exponent {e} is below 1")
        out.append(1 / val)
    return tuple(out)  # type: ignore[return-value]
