"""Grid scans of the campaign SNR, contour extraction, and CSV/JSON export."""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .constants import ERBIUM
from .experiment import (
    DENSITY_CAP_CM3,
    ExperimentConfig,
    config_lifetime,
    dimensionless_couplings,
    effective_snr,
    number_density,
)
from .spheroid import SpheroidGeometry

AXIS_NAMES = ("d_m", "time_s", "atoms", "squeeze_db", "a_s_m", "reps")
VALUE_COLUMNS = ("lambda", "gamma", "snr", "density_cm3", "lifetime_s")
FLAG_COLUMNS = ("density_ok", "lifetime_ok", "perturbative_ok")
GEOMETRY_RULES = ("fixed-cloud", "touching")
REPS_RULES = ("fixed", "campaign")
CONTOUR_RTOL = 1e-3


@dataclass(frozen=True)
class Axis:
    name: str
    lo: float
    hi: float
    points: int
    scale: str = "log"

    def __post_init__(self):
        if self.name not in AXIS_NAMES:
            raise ValueError(f"unknown axis {self.name!r} (use one of {', '.join(AXIS_NAMES)})")
        if not self.lo < self.hi:
            raise ValueError(f"axis {self.name}: need min < max, got {self.lo!r} >= {self.hi!r}")
        if int(self.points) != self.points or self.points < 2:
            raise ValueError(f"axis {self.name}: need at least 2 points, got {self.points!r}")
        if self.scale not in ("log", "linear"):
            raise ValueError(f"axis {self.name}: scale must be 'log' or 'linear', got {self.scale!r}")
        if self.scale == "log" and not self.lo > 0:
            raise ValueError(f"axis {self.name}: log scale needs positive bounds")

    def values(self) -> np.ndarray:
        if self.scale == "log":
            return np.logspace(math.log10(self.lo), math.log10(self.hi), self.points)
        return np.linspace(self.lo, self.hi, self.points)

    def to_unit(self, x: float) -> float:
        if self.scale == "log":
            return (math.log(x) - math.log(self.lo)) / (math.log(self.hi) - math.log(self.lo))
        return (x - self.lo) / (self.hi - self.lo)

    def from_unit(self, u: float) -> float:
        if self.scale == "log":
            return math.exp(math.log(self.lo) + u * (math.log(self.hi) - math.log(self.lo)))
        return self.lo + u * (self.hi - self.lo)


@dataclass(frozen=True)
class ScanSpec:
    base: ExperimentConfig
    axes: tuple[Axis, ...]
    max_density_cm3: float = DENSITY_CAP_CM3
    reps_rule: str = "fixed"
    total_time_s: float = 1e7
    geometry_rule: str = "fixed-cloud"
    decay_factor: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))
        if not 1 <= len(self.axes) <= 3:
            raise ValueError(f"a scan needs 1 to 3 axes, got {len(self.axes)}")
        names = [a.name for a in self.axes]
        if len(set(names)) != len(names):
            raise ValueError(f"repeated axis in {names}")
        if self.reps_rule not in REPS_RULES:
            raise ValueError(f"reps rule must be one of {REPS_RULES}, got {self.reps_rule!r}")
        if self.geometry_rule not in GEOMETRY_RULES:
            raise ValueError(f"geometry rule must be one of {GEOMETRY_RULES}, got {self.geometry_rule!r}")
        if self.reps_rule == "campaign" and "reps" in names:
            raise ValueError("the campaign repetition rule fixes reps; drop the reps axis")

    @property
    def axis_names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.axes)

    def grid(self) -> list[tuple[float, ...]]:
        return [tuple(float(v) for v in p) for p in itertools.product(*(a.values() for a in self.axes))]


def point_config(spec: ScanSpec, point: Mapping[str, float]) -> ExperimentConfig:
    """The experiment at one grid point after applying the geometry and repetition rules."""
    cfg = spec.base
    changes: dict = {}
    if "atoms" in point:
        changes["n_atoms"] = int(round(point["atoms"]))
    if "time_s" in point:
        changes["time_s"] = point["time_s"]
    if "squeeze_db" in point:
        changes["squeeze_db"] = point["squeeze_db"]
    if "a_s_m" in point:
        changes["scattering_length_m"] = point["a_s_m"]
    if "reps" in point:
        changes["reps"] = point["reps"]
    if "d_m" in point:
        d = point["d_m"]
        if spec.geometry_rule == "touching":
            e = cfg.geom.ellipticity
            c = d / 2
            changes["geom"] = SpheroidGeometry(c / math.sqrt(1 - e * e), c, d)
        else:
            changes["geom"] = SpheroidGeometry(cfg.geom.a, cfg.geom.c, d)
    if spec.reps_rule == "campaign":
        changes["reps"] = spec.total_time_s / changes.get("time_s", cfg.time_s)
    return cfg.with_(**changes)


@dataclass(frozen=True)
class ScanRow:
    point: tuple[float, ...]
    lam: float
    gamma: float
    snr: float
    density_cm3: float
    lifetime_s: float
    density_ok: bool
    lifetime_ok: bool
    perturbative_ok: bool
    error: str | None = None


@dataclass(frozen=True)
class ScanResult:
    axis_names: tuple[str, ...]
    rows: tuple[ScanRow, ...]

    @property
    def columns(self) -> tuple[str, ...]:
        return self.axis_names + VALUE_COLUMNS + FLAG_COLUMNS

    @property
    def errors(self) -> dict[int, str]:
        return {i: r.error for i, r in enumerate(self.rows) if r.error is not None}

    def column(self, name: str) -> np.ndarray:
        if name in self.axis_names:
            i = self.axis_names.index(name)
            return np.array([r.point[i] for r in self.rows])
        attr = "lam" if name == "lambda" else name
        return np.array([getattr(r, attr) for r in self.rows])

    def feasible(self) -> np.ndarray:
        snr = self.column("snr")
        ok = self.column("density_ok").astype(bool)
        return ok & (snr >= 1)


def evaluate_point(spec: ScanSpec, point: tuple[float, ...]) -> ScanRow:
    named = dict(zip(spec.axis_names, point))
    try:
        cfg = point_config(spec, named)
        cs = dimensionless_couplings(cfg)
        rep = effective_snr(cfg, cs)
        density = number_density(cfg.n_atoms, cfg.geom)
        lifetime = config_lifetime(cfg, spec.decay_factor)
    except (ValueError, ArithmeticError) as exc:
        nan = math.nan
        return ScanRow(point, nan, nan, nan, nan, nan, False, False, False, f"{type(exc).__name__}: {exc}")
    return ScanRow(
        point,
        cs.cross,
        cs.gamma,
        rep.snr,
        density,
        lifetime,
        density < spec.max_density_cm3,
        lifetime >= cfg.time_s,
        bool(rep.diagnostics["perturbative_ok"]),
    )


def worker_count(requested: int | None = None) -> int:
    if requested is None:
        env = os.environ.get("GIE_THREADS", "0").strip() or "0"
        try:
            requested = int(env)
        except ValueError:
            raise ValueError(f"GIE_THREADS must be an integer, got {env!r}") from None
    if requested < 0:
        raise ValueError(f"worker count must be >= 0, got {requested}")
    return requested or (os.cpu_count() or 1)


def run_scan(spec: ScanSpec, workers: int | None = None) -> ScanResult:
    """Evaluate every grid point; row order is lexicographic over the axes."""
    grid = spec.grid()
    n = worker_count(workers)
    if n == 1 or len(grid) < 2:
        rows = [evaluate_point(spec, p) for p in grid]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            rows = list(pool.map(lambda p: evaluate_point(spec, p), grid))
    return ScanResult(spec.axis_names, tuple(rows))


# --- export ------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    return repr(float(x))


def _row_cells(row: ScanRow) -> list:
    return [
        *row.point,
        row.lam,
        row.gamma,
        row.snr,
        row.density_cm3,
        row.lifetime_s,
        row.density_ok,
        row.lifetime_ok,
        row.perturbative_ok,
    ]


def to_csv(result: ScanResult) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(result.columns)
    for row in result.rows:
        w.writerow([_fmt(c) for c in _row_cells(row)])
    return buf.getvalue().encode("utf-8")


def _parse_bool(text: str) -> bool:
    if text not in ("true", "false"):
        raise ValueError(f"expected true/false, got {text!r}")
    return text == "true"


def _row_from_cells(n_axes: int, cells: Sequence) -> ScanRow:
    point = tuple(float(c) for c in cells[:n_axes])
    vals = [float(c) for c in cells[n_axes : n_axes + 5]]
    flags = [c if isinstance(c, bool) else _parse_bool(c) for c in cells[n_axes + 5 :]]
    return ScanRow(point, *vals, *flags)


def parse_csv(data: bytes) -> ScanResult:
    rows = list(csv.reader(io.StringIO(data.decode("utf-8"))))
    if not rows:
        raise ValueError("CSV has no header row")
    header = tuple(rows[0])
    tail = VALUE_COLUMNS + FLAG_COLUMNS
    if header[-len(tail) :] != tail:
        raise ValueError(f"unexpected CSV columns {header}")
    names = header[: -len(tail)]
    return ScanResult(names, tuple(_row_from_cells(len(names), r) for r in rows[1:]))


def _json_value(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    x = float(x)
    return x if math.isfinite(x) else repr(x)


def to_json(result: ScanResult) -> bytes:
    doc = {
        "columns": list(result.columns),
        "rows": [[_json_value(c) for c in _row_cells(r)] for r in result.rows],
        "errors": {str(i): msg for i, msg in result.errors.items()},
    }
    return (json.dumps(doc, indent=1) + "\n").encode("utf-8")


def parse_json(data: bytes) -> ScanResult:
    doc = json.loads(data)
    cols = tuple(doc["columns"])
    names = cols[: len(cols) - len(VALUE_COLUMNS) - len(FLAG_COLUMNS)]
    return ScanResult(names, tuple(_row_from_cells(len(names), r) for r in doc["rows"]))


def export(result: ScanResult, fmt: str = "csv") -> bytes:
    if fmt == "csv":
        return to_csv(result)
    if fmt == "json":
        return to_json(result)
    raise ValueError(f"unknown export format {fmt!r} (use csv or json)")


# --- contour -----------------------------------------------------------------


@dataclass(frozen=True)
class Contour:
    axis_names: tuple[str, str]
    target: float
    polylines: tuple[np.ndarray, ...] = field(default_factory=tuple)  # each (k, 2)

    @property
    def vertices(self) -> np.ndarray:
        if not self.polylines:
            return np.empty((0, 2))
        return np.vstack(self.polylines)


Evaluator = Callable[[Mapping[str, float]], float]


def default_evaluator(spec: ScanSpec) -> Evaluator:
    def f(point):
        return effective_snr(point_config(spec, point)).snr

    return f


def _bisect(f_unit: Callable[[float], float], g0: float, g1: float, target: float) -> float:
    # f_unit maps [0, 1] along an edge; g = f − target changes sign across it
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gm = f_unit(mid) - target
        if abs(gm) <= CONTOUR_RTOL * target or hi - lo < 1e-15:
            return mid
        if (gm < 0) == (g0 < 0):
            lo, g0 = mid, gm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def snr_contour(spec: ScanSpec, target: float = 1.0, evaluate: Evaluator | None = None) -> Contour:
    """Polylines where SNR = target, by marching squares with bisection on cell edges."""
    if len(spec.axes) != 2:
        raise ValueError(f"contours need exactly 2 axes, got {len(spec.axes)}")
    if not target > 0:
        raise ValueError(f"target must be positive, got {target!r}")
    f = evaluate or default_evaluator(spec)
    ax, ay = spec.axes
    xs, ys = ax.values(), ay.values()

    def at(ux: float, uy: float) -> float:
        return f({ax.name: ax.from_unit(ux), ay.name: ay.from_unit(uy)})

    def safe(x, y):
        try:
            v = f({ax.name: x, ay.name: y})
        except (ValueError, ArithmeticError):
            return math.nan
        return v

    grid = np.array([[safe(x, y) for y in ys] for x in xs], dtype=float)
    ux = np.array([ax.to_unit(x) for x in xs])
    uy = np.array([ay.to_unit(y) for y in ys])
    g = grid - target
    crossings: dict[tuple, tuple[float, float]] = {}

    def edge_point(key):
        if key in crossings:
            return crossings[key]
        (i0, j0), (i1, j1) = key
        p0 = (ux[i0], uy[j0])
        p1 = (ux[i1], uy[j1])

        def along(t):
            return at(p0[0] + t * (p1[0] - p0[0]), p0[1] + t * (p1[1] - p0[1]))

        t = _bisect(along, g[i0, j0], g[i1, j1], target)
        pt = (p0[0] + t * (p1[0] - p0[0]), p0[1] + t * (p1[1] - p0[1]))
        crossings[key] = pt
        return pt

    segments: list[tuple[tuple, tuple]] = []
    for i in range(len(xs) - 1):
        for j in range(len(ys) - 1):
            corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]
            vals = [g[c] for c in corners]
            if any(math.isnan(v) for v in vals):
                continue
            edges = []
            for k in range(4):
                a, b = corners[k], corners[(k + 1) % 4]
                if (g[a] < 0) != (g[b] < 0):
                    edges.append(tuple(sorted((a, b))))
            if len(edges) == 2:
                segments.append((edges[0], edges[1]))
            elif len(edges) == 4:
                centre = np.mean(vals)
                # saddle: join edges so that the centre's side stays connected
                if (centre < 0) == (vals[0] < 0):
                    segments += [(edges[0], edges[3]), (edges[1], edges[2])]
                else:
                    segments += [(edges[0], edges[1]), (edges[2], edges[3])]
    polylines = _join(segments)
    out = []
    for line in polylines:
        pts = np.array([edge_point(k) for k in line])
        out.append(np.column_stack([[ax.from_unit(p) for p in pts[:, 0]], [ay.from_unit(p) for p in pts[:, 1]]]))
    return Contour((ax.name, ay.name), target, tuple(out))


def _join(segments: list[tuple]) -> list[list]:
    adjacency: dict = {}
    for a, b in segments:
        adjacency.setdefault(a, []).append(b)
        adjacency.setdefault(b, []).append(a)
    seen: set = set()
    lines = []
    # open chains start at degree-1 nodes; remaining nodes lie on closed loops
    starts = sorted(k for k, v in adjacency.items() if len(v) == 1) + sorted(adjacency)
    for start in starts:
        if start in seen:
            continue
        line = [start]
        seen.add(start)
        cur = start
        while True:
            nxt = [n for n in adjacency[cur] if n not in seen]
            if not nxt:
                break
            cur = nxt[0]
            seen.add(cur)
            line.append(cur)
        if len(adjacency[start]) == 2 and start in adjacency[line[-1]] and len(line) > 2:
            line.append(start)
        lines.append(line)
    return lines


# --- svg ---------------------------------------------------------------------


def render_svg(result: ScanResult, x_axis: str, y_axis: str, fixed: Mapping[str, float] | None = None) -> str:
    """Heatmap of log10 SNR; cells failing the density cap are hatched."""
    fixed = dict(fixed or {})
    xi, yi = result.axis_names.index(x_axis), result.axis_names.index(y_axis)
    others = [i for i in range(len(result.axis_names)) if i not in (xi, yi)]
    rows = list(result.rows)
    if others and rows:
        pinned = {i: fixed.get(result.axis_names[i], rows[0].point[i]) for i in others}
        rows = [r for r in rows if all(math.isclose(r.point[i], v, rel_tol=1e-12) for i, v in pinned.items())]
    xs = sorted({r.point[xi] for r in rows})
    ys = sorted({r.point[yi] for r in rows})
    cell, pad = 12, 60
    logs = [math.log10(r.snr) for r in rows if r.snr > 0 and math.isfinite(r.snr)]
    lo, hi = (min(logs), max(logs)) if logs else (0.0, 1.0)
    span = hi - lo or 1.0
    width, height = pad + cell * len(xs) + 10, pad + cell * len(ys) + 10
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        '<defs><pattern id="hatch" width="4" height="4" patternUnits="userSpaceOnUse">'
        '<path d="M0,4 L4,0" stroke="black" stroke-width="0.6"/></pattern></defs>',
    ]
    for r in rows:
        i, j = xs.index(r.point[xi]), ys.index(r.point[yi])
        x, y = pad + i * cell, 10 + (len(ys) - 1 - j) * cell
        if r.snr > 0 and math.isfinite(r.snr):
            level = (math.log10(r.snr) - lo) / span
            rgb = f"rgb({int(255 * level)},{int(80 + 100 * (1 - abs(2 * level - 1)))},{int(255 * (1 - level))})"
        else:
            rgb = "rgb(200,200,200)"
        out.append(
            f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{rgb}" '
            f'data-x="{r.point[xi]!r}" data-y="{r.point[yi]!r}" data-snr="{r.snr!r}"/>'
        )
        if not r.density_ok:
            out.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="url(#hatch)"/>')
    out.append(f'<text x="{pad}" y="{height - 30}" font-size="11">{x_axis}</text>')
    out.append(f'<text x="5" y="{10 + cell * len(ys) // 2}" font-size="11">{y_axis}</text>')
    out.append(f'<text x="{pad}" y="{height - 15}" font-size="10">log10 SNR from {lo:.2f} to {hi:.2f}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# --- presets -----------------------------------------------------------------


def feasibility_spec(resolution: tuple[int, int, int] = (40, 40, 4)) -> ScanSpec:
    """Squeezed erbium feasibility scan over separation, time and atom number.

    Clouds touch (c = d/2) with ellipticity 0.98; repetitions follow
    M = 1e7 s / t so that M = 1e3 at t = 1e4 s.
    """
    nd, nt, nn = resolution
    c0 = 0.5e-3
    base = ExperimentConfig(
        species=ERBIUM,
        n_atoms=10**12,
        geom=SpheroidGeometry(c0 / math.sqrt(1 - 0.98**2), c0, 2 * c0),
        time_s=1e4,
        reps=1e3,
        setups=5,
        squeeze_db=35.0,
    )
    axes = (
        Axis("d_m", 1e-4, 1e-1, nd),
        Axis("time_s", 1e1, 1e5, nt),
        Axis("atoms", 1e11, 1e14, nn),
    )
    return ScanSpec(base, axes, DENSITY_CAP_CM3, "campaign", 1e7, "touching")
