"""Command-line entry point: ``biradon <command> [options]``.

Commands: vertices, sharpness, triangles, conditions, eval, acceptance.
Every command writes a JSON report (``--out``, default stdout; ``eval``
prints only its value unless ``--out`` is given) and exits 0 iff every
verdict in it passed; skipped steps do not count as failures.  Exit code 2
is a usage error, 3 a resolution rejection.

Options may also come from a flat ``key = value`` file given with
``--config``; keys are the long option names with dashes or underscores, and
a flag on the command line wins over the file.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import re
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import acceptance, conditions, discrete, sharpness, typeset
from .grid import BILINEAR, MODES, GridSpec, sample
from .transforms import CircleQuadrature, bilinear_theta

SCHEMA = "biradon-report"
SCHEMA_VERSION = 1

log = logging.getLogger("biradon")


class UsageError(Exception):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


# ---------------------------------------------------------------------------
# value parsers

_PI_RE = re.compile(r"^\s*([+-]?[\d.]*)\s*\*?\s*pi\s*(?:/\s*([\d.]+))?\s*$")


def parse_angle(text) -> float:
    """Radians, or a rational multiple of pi such as ``pi/3``, ``2pi/3``, ``3*pi/4``."""
    if isinstance(text, (int, float)):
        return float(text)
    s = str(text).strip().lower()
    m = _PI_RE.match(s)
    if m:
        num = m.group(1)
        k = float(num) if num not in ("", "+", "-") else (-1.0 if num == "-" else 1.0)
        den = float(m.group(2)) if m.group(2) else 1.0
        return k * math.pi / den
    return float(Fraction(s)) if "/" in s else float(s)


def parse_scales(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [float(Fraction(x.strip())) for x in str(text).split(",") if x.strip()]


def parse_point(text) -> np.ndarray:
    parts = [float(x) for x in str(text).split(",")]
    if len(parts) != 2:
        raise ValueError(f"expected 'x,y', got {text!r}")
    return np.array(parts)


def parse_triple(text) -> tuple[str, str, str]:
    parts = [x.strip() for x in str(text).split(",")]
    if len(parts) != 3:
        raise ValueError(f"expected 'p,q,r', got {text!r}")
    typeset.exponent_triple(*parts)
    return tuple(parts)  # type: ignore[return-value]


def parse_field_spec(spec: str):
    """``ball:R``, ``annulus:R:W``, ``gauss:S``, ``const:C`` or ``rect:EPS[:ANGLE]``
    -> function of ``(x1, x2)``."""
    kind, *args = spec.split(":")
    vals = [parse_angle(a) for a in args]
    if kind in ("ball", "annulus", "gauss", "rect") and not all(v > 0 for v in vals[:2]):
        raise ValueError(f"sizes in {spec!r} must be positive")
    if kind == "ball" and len(vals) == 1:
        r = vals[0]
        return lambda a, b: (a * a + b * b < r * r).astype(float)
    if kind == "annulus" and len(vals) == 2:
        R, w = vals
        return lambda a, b: (np.abs(np.hypot(a, b) - R) < w / 2).astype(float)
    if kind == "gauss" and len(vals) == 1:
        s = vals[0]
        return lambda a, b: np.exp(-(a * a + b * b) / (2 * s * s))
    if kind == "const" and len(vals) == 1:
        c = vals[0]
        return lambda a, b: np.full(np.shape(a), c)
    if kind == "rect" and len(vals) in (1, 2):
        fam = sharpness.ExtremalFamily(sharpness.TANGENT_RECTANGLE, vals[0],
                                       angle=vals[1] if len(vals) == 2 else math.pi / 2)
        return lambda a, b: fam.indicator(a, b).astype(float)
    raise ValueError(f"unrecognised field spec {spec!r}")


def read_config(path: str | Path) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError("config", f"line {lineno}: expected key = value, got {raw!r}")
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


def _bool(s) -> bool:
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


# ---------------------------------------------------------------------------
# option table: name -> (parser, default, help)

_COMMON = {
    "seed": (int, 0, "random seed"),
}

OPTIONS = {
    "vertices": {
        "case": (str, "nondeg", "nondeg | deg"),
        "dual_rectangles": (_bool, False,
                            "add the dual rectangle constraints in the degenerate case"),
        "self_test": (_bool, False,
                      "cross-check vertices against the inequalities"),
    },
    "sharpness": {
        "example": (str, sharpness.BALL_ANNULUS, " | ".join(sharpness.EXAMPLES)),
        "theta": (parse_angle, math.pi / 2, "rotation angle (radians or e.g. pi/3)"),
        "r": (str, "1", "output exponent"),
        "scales": (parse_scales, None, "comma-separated ladder, ratio 1/2"),
        "spacing": (float, None, "grid spacing override"),
        "nodes": (int, None, "quadrature size override"),
        "node_factor": (float, 1.0, "multiplier on the preset quadrature sizes"),
        "tolerance": (float, None, "slope tolerance (default 0.15 or 0.3)"),
        "check": (parse_triple, None, "p,q,r triple for a constraint verdict"),
        "literal_radius": (_bool, False,
                           "annulus of radius 2 instead of 2 sin(theta/2)"),
    },
    "triangles": {
        "input": (str, None, "CSV of points, two columns"),
        "tol": (float, discrete.DEFAULT_TOL, "unit-distance tolerance on squared distances"),
    },
    "conditions": {
        "model": (str, "distance", " | ".join(conditions.MODELS)),
        "samples": (int, 1000, "number of ZZ sample points"),
        "tau": (float, conditions.DET_TAU, "determinant threshold"),
    },
    "eval": {
        "theta": (parse_angle, None, "rotation angle (radians or e.g. pi/3)"),
        "f": (str, None, "field spec, e.g. ball:0.1"),
        "g": (str, None, "field spec, e.g. annulus:1.0:0.4"),
        "at": (parse_point, None, "evaluation point x,y"),
        "half_width": (float, 3.0, "grid half-width L"),
        "spacing": (float, 0.01, "grid spacing h"),
        "nodes": (int, 1024, "quadrature size M"),
        "mode": (str, BILINEAR, " | ".join(MODES)),
    },
    "acceptance": {
        "theta": (parse_angle, None, "angle override for criteria 4, 5 and 7b"),
        "node_factor": (float, 1.0, "multiplier on every preset quadrature size"),
        "samples": (int, 1000, "sample count for criterion 11"),
        "only": (lambda s: tuple(x.strip() for x in str(s).split(",") if x.strip()), None,
                 "comma-separated criterion ids"),
    },
}

_REQUIRED = {"triangles": ("input",), "eval": ("theta", "f", "g", "at")}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="biradon", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for cmd, opts in OPTIONS.items():
        sp = sub.add_parser(cmd)
        for name, (parse, default, helptext) in {**_COMMON, **opts}.items():
            flag = "--" + name.replace("_", "-")
            if parse is _bool:
                sp.add_argument(flag, dest=name, action="store_const", const="true", default=None,
                                help=helptext)
            else:
                sp.add_argument(flag, dest=name, default=None, help=f"{helptext} (default: {default})")
        sp.add_argument("--config", default=None, help="flat key = value file")
        sp.add_argument("--out", default=None, help="JSON report path (default: stdout)")
        sp.add_argument("--csv-dir", default=None, help="directory for CSV data files")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve_options(command: str, args: argparse.Namespace) -> dict:
    """Merge defaults < config file < command line, parsing each value."""
    table = {**_COMMON, **OPTIONS[command]}
    file_vals = read_config(args.config) if args.config else {}
    unknown = set(file_vals) - set(table)
    if unknown:
        raise UsageError(sorted(unknown)[0], f"unknown key for '{command}'")
    out = {}
    for name, (parse, default, _) in table.items():
        raw = getattr(args, name)
        if raw is None:
            raw = file_vals.get(name)
        if raw is None:
            out[name] = default
            continue
        try:
            out[name] = parse(raw)
        except (ValueError, ZeroDivisionError) as exc:
            raise UsageError(name, f"cannot parse {raw!r} ({exc})") from None
    for name in _REQUIRED.get(command, ()):
        if out[name] is None:
            raise UsageError(name, "is required")
    return out


# ---------------------------------------------------------------------------
# commands; each returns (results, verdicts, csv files)


def _verdict(name: str, passed: bool | None, note: str = "") -> dict:
    return {"name": name, "status": "skip" if passed is None else ("pass" if passed else "fail"),
            "note": note}


def cmd_vertices(o: dict):
    case = typeset.CASE_ALIASES.get(o["case"])
    if case is None:
        raise UsageError("case", f"expected nondeg or deg, got {o['case']!r}")
    system = typeset.build_system(case, include_dual_rectangles=o["dual_rectangles"])
    verts = typeset.enumerate_vertices(system)
    results = {
        "case": case,
        "constraints": [{"inequality": str(h), "label": h.label} for h in system.halfspaces],
        "vertices": [typeset.fmt_triple(v) for v in verts],
        "pqr": [list(typeset.to_pqr(v)) for v in verts],
        "active": {typeset.fmt_triple(v): [h.label for h in typeset.active_constraints(system, v)]
                   for v in verts},
    }
    verdicts = []
    ref = typeset.EXPECTED_VERTICES.get(case)
    if ref is not None and not o["dual_rectangles"]:
        verdicts.append(_verdict("matches reference vertex list", verts == ref))
    if o["self_test"]:
        cc = typeset.convexity_cross_check(verts, system, seed=o["seed"])
        results["self_test"] = {"ok": cc.ok, "combinations": cc.combinations_checked,
                                "points": cc.points_checked,
                                "witness": typeset.fmt_triple(cc.witness) if cc.witness else None,
                                "reason": cc.reason}
        verdicts.append(_verdict("convexity cross-check", cc.ok, cc.reason))
    csv_text = "u,v,w\n" + "".join(",".join(typeset.fmt_fraction(c) for c in v) + "\n" for v in verts)
    return results, verdicts, {f"vertices_{case}.csv": csv_text}


def cmd_sharpness(o: dict):
    ex = o["example"]
    if ex not in sharpness.EXAMPLES:
        raise UsageError("example", f"expected one of {', '.join(sharpness.EXAMPLES)}")
    default_scales = {sharpness.BALL_ANNULUS: acceptance.DELTAS, sharpness.LARGE_BALL: (8.0, 4.0, 2.0)}
    scales = o["scales"] or list(default_scales.get(ex, acceptance.EPSILONS))
    theta = math.pi if ex == sharpness.RECT_DEG else o["theta"]
    extra = [o["check"][2]] if o["check"] else []
    try:
        sw = sharpness.scaling_sweep(ex, o["r"], scales, theta=theta, spacing=o["spacing"],
                                     nodes=o["nodes"], node_factor=o["node_factor"], extra_r=extra,
                                     literal_radius=o["literal_radius"])
    except sharpness.ResolutionError:
        raise
    except ValueError as exc:
        raise UsageError("scales" if "scale" in str(exc) else "theta", str(exc)) from None
    tol = o["tolerance"]
    if tol is None:
        tol = 0.15 if ex == sharpness.BALL_ANNULUS else 0.3
    results = {"sweep": sw.to_dict(), "tolerance": tol}
    verdicts = []
    if ex != sharpness.LARGE_BALL:
        verdicts.append(_verdict(f"slope within {tol} of {sw.predicted_slope:g}",
                                 abs(sw.fit.slope - sw.predicted_slope) <= tol))
    if o["check"]:
        rep = sharpness.check_constraint(sw, *o["check"])
        results["constraint"] = rep.to_dict()
        verdicts.append(_verdict("divergence matches the constraint", rep.consistent))
    return results, verdicts, {f"sweep_{ex}.csv": sw.to_csv()}


def cmd_triangles(o: dict):
    try:
        P = discrete.PointSet.read_csv(o["input"])
    except (OSError, ValueError, IndexError) as exc:
        raise UsageError("input", str(exc)) from None
    nb = discrete.unit_neighbors(P, o["tol"])
    results = {
        "points": len(P),
        "pairs": int(sum(len(n) for n in nb)),
        "triangles": discrete.count_unit_triangles(P, o["tol"]),
        "triangles_via_B": discrete.trilinear_via_B(P, o["tol"]),
        "duplicates": P.has_duplicates,
    }
    return results, [_verdict("triangles == triangles_via_B",
                              results["triangles"] == results["triangles_via_B"])], {}


def cmd_conditions(o: dict):
    if o["model"] not in conditions.MODELS:
        raise UsageError("model", f"expected one of {', '.join(conditions.MODELS)}")
    tri = conditions.MODELS[o["model"]]()
    pts = conditions.sample_surface(tri, o["samples"], extended=True, seed=o["seed"])
    zr = [conditions.z_rank(tri, p[:6]) for p in pts]
    zzr = [conditions.zz_rank(tri, p) for p in pts]
    full = [p for p, r in zip(pts, zzr) if r == 6]
    results = {
        "model": o["model"],
        "samples": len(pts),
        "z_rank_3": int(sum(r == 3 for r in zr)),
        "zz_rank_6": len(full),
        "zz_rank_deficient": [{"point": p.tolist(), "zz_rank": r} for p, r in zip(pts, zzr) if r != 6],
    }
    verdicts = [_verdict("all samples found", len(pts) == o["samples"])]
    if tri.phi1.name == "euclidean_distance":
        ps = [abs(conditions.phong_stein_det(tri.phi1, p[0:2], p[2:4])) for p in pts]
        results["phong_stein_max_dev"] = float(max(abs(v - 1) for v in ps)) if ps else None
    if full:
        rep = conditions.cond_general(tri, full, tau=o["tau"])
        results["cond_general"] = rep.to_dict()
        verdicts.append(_verdict("cond_general at zz_rank 6 points", rep.verdict))
    else:
        verdicts.append(_verdict("cond_general at zz_rank 6 points", None, "no full-rank samples"))
    return results, verdicts, {}


def cmd_eval(o: dict):
    if o["mode"] not in MODES:
        raise UsageError("mode", f"expected one of {', '.join(MODES)}")
    try:
        grid = GridSpec(o["half_width"], o["spacing"])
    except ValueError as exc:
        raise UsageError("spacing", str(exc)) from None
    fields = {}
    for key in ("f", "g"):
        try:
            fields[key] = sample(parse_field_spec(o[key]), grid, o["mode"])
        except ValueError as exc:
            raise UsageError(key, str(exc)) from None
    try:
        value = bilinear_theta(fields["f"], fields["g"], o["theta"], o["at"], CircleQuadrature(o["nodes"]))
    except ValueError as exc:
        raise UsageError("theta", str(exc)) from None
    results = {"value": value, "value_repr": repr(value), "at": o["at"].tolist()}
    return results, [], {}


def cmd_acceptance(o: dict):
    try:
        cfg = acceptance.AcceptanceConfig(theta=o["theta"], node_factor=o["node_factor"], seed=o["seed"],
                                          samples=o["samples"], only=o["only"])
        runs = acceptance.run_suite(cfg)
    except sharpness.ResolutionError:
        raise
    except ValueError as exc:
        field = str(exc).split(":", 1)[0]
        raise UsageError(field, str(exc)) from None
    for r in runs:
        print(r.line(), file=sys.stderr)
    files = {}
    for r in runs:
        for name, text in r.data.items():
            files[f"criterion_{r.id}_{name}"] = text
    results = {"criteria": [r.to_dict() for r in runs]}
    verdicts = [{"name": f"criterion {r.id}", "status": r.status,
                 "note": r.skipped or r.rejected} for r in runs]
    return results, verdicts, files


COMMANDS = {
    "vertices": cmd_vertices, "sharpness": cmd_sharpness, "triangles": cmd_triangles,
    "conditions": cmd_conditions, "eval": cmd_eval, "acceptance": cmd_acceptance,
}


def _jsonify(o):
    if isinstance(o, dict):
        return {str(k): _jsonify(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonify(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonify(o.tolist())
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    if isinstance(o, Fraction):
        return typeset.fmt_fraction(o)
    return o


def run(command: str, options: dict) -> dict:
    """Execute one command and assemble the versioned report."""
    t0 = time.perf_counter()
    results, verdicts, files = COMMANDS[command](options)
    return {
        "schema": SCHEMA,
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": _jsonify(options),
        "results": _jsonify(results),
        "verdicts": verdicts,
        "passed": all(v["status"] in ("pass", "skip") for v in verdicts),
        "timings": {"wall_s": round(time.perf_counter() - t0, 4)},
        "_files": files,
    }


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        options = resolve_options(args.command, args)
        report = run(args.command, options)
    except UsageError as exc:
        parser.error(f"invalid option {exc}")
    except sharpness.ResolutionError as exc:
        print(f"biradon {args.command}: resolution rejected: {exc}", file=sys.stderr)
        return 3
    files = report.pop("_files")
    text = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    if args.command == "eval":
        print(report["results"]["value_repr"])
    elif not args.out:
        print(text)
    if args.csv_dir:
        d = Path(args.csv_dir)
        d.mkdir(parents=True, exist_ok=True)
        for name, content in files.items():
            (d / name).write_text(content)
    return 0 if report["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
