"""Command-line front end.

Exit status: 0 on success, 2 on invalid input, 1 on numerical failure.
Data goes to standard output; provenance and diagnostics to standard error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from typing import Sequence


from . import analytic as an
from . import experiment as ex
from . import oracle as orc
from . import scan as sc
from .config import KEY_DOCS, ConfigError, build_config, config_to_values, dump, load_config, parse_overrides
from .constants import G, get_species
from .spheroid import QuadratureError, QuadratureSpec, SpheroidGeometry, cross_coupling, self_coupling

EXIT_OK, EXIT_NUMERIC, EXIT_INVALID = 0, 1, 2
COMPARE_RTOL, COMPARE_ATOL = 1e-9, 1e-10


class UsageError(ValueError):
    pass


def _emit(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _note(text: str) -> None:
    sys.stderr.write(text + "\n")


# --- oracle / analytic / compare ----------------------------------------------


def _oracle_quantities(n, gamma, lam, mu, nu, reps) -> dict[str, float]:
    """Oracle values with φ = φ′ = 0, ϕ = μ and ϕ′ = ν."""
    if n > orc.MAX_ATOMS:
        raise UsageError(f"--n: the oracle holds at most {orc.MAX_ATOMS} atoms, got {n}")
    st = orc.interacted_state(n, gamma, lam)
    xa = orc.SpinOp.phi(orc.Side.AB, mu)
    out = {}
    t_open = orc.moment_table(st, xa, orc.SpinOp.z(orc.Side.CD))
    out["signal_open"] = t_open.covariance
    out["variance_open"] = orc.estimator_variance(st, xa, orc.SpinOp.z(orc.Side.CD), reps)
    t_closed = orc.moment_table(st, xa, orc.SpinOp.phi(orc.Side.CD, nu))
    out["signal_closed"] = t_closed.covariance
    for (i, j) in ((1, 0), (2, 0), (1, 1), (2, 1), (1, 2), (2, 2)):
        out[f"closed_moment_{i}{j}"] = t_closed[i, j]
    out["variance_closed"] = orc.estimator_variance(st, xa, orc.SpinOp.phi(orc.Side.CD, nu), reps)
    out["purity"] = orc.purity_ab(st)
    try:
        out["snr_single"] = orc.single_snr(n, gamma, mu, reps)
    except ArithmeticError:
        out["snr_single"] = math.nan
    return out


def _analytic_quantities(n, gamma, lam, mu, nu, reps) -> dict[str, float]:
    op = an.OpenSchemeParams(n, gamma, lam, -mu, reps)
    cp = an.ClosedSchemeParams(n, gamma, lam, mu, nu, reps)
    out = {"signal_open": an.signal_open(op), "variance_open": an.variance_open(op)}
    out["signal_closed"] = an.signal_closed(cp)
    mc = an.moments_closed(cp)
    for (i, j) in ((1, 0), (2, 0), (1, 1), (2, 1), (1, 2), (2, 2)):
        out[f"closed_moment_{i}{j}"] = mc[(i, j)]
    out["variance_closed"] = an.variance_closed(cp)
    out["purity"] = an.purity_analytic(n, lam)[0]
    try:
        out["snr_single"] = an.snr_single(n, gamma, mu, reps)
    except an.DegenerateVarianceError:
        out["snr_single"] = math.nan
    return out


def _add_point_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, required=True, help="atoms per interferometer")
    p.add_argument("--lambda", dest="lam", type=float, required=True, help="cross phase λ")
    p.add_argument("--gamma", type=float, default=0.0, help="self phase γ")
    p.add_argument("--nu", type=float, default=math.pi / 2, help="ab closing phase minus opening phase (rad)")
    p.add_argument("--mu", type=float, default=0.0, help="cd phase difference for the both-closed scheme (rad)")
    p.add_argument("--reps", type=float, default=2, help="repetitions M (>= 2)")
    p.add_argument("--format", choices=("table", "json"), default="table")


def _print_values(values: dict[str, float], fmt: str) -> None:
    if fmt == "json":
        _emit(json.dumps(values, indent=1))
        return
    width = max(len(k) for k in values)
    for k, v in values.items():
        _emit(f"{k:<{width}}  {v!r}")


def cmd_oracle(args) -> int:
    # the ab phase difference is --nu, the cd phase difference --mu
    _print_values(_oracle_quantities(args.n, args.gamma, args.lam, args.nu, args.mu, args.reps), args.format)
    return EXIT_OK


def cmd_analytic(args) -> int:
    if args.preset or args.config or args.set:
        if args.preset == "headline":
            values = config_to_values(ex.headline_config())
            values.update(parse_overrides(args.set))
            cfg = build_config(values)
        elif args.preset:
            raise UsageError(f"--preset: unknown preset {args.preset!r} for analytic (use headline)")
        else:
            cfg = load_config(args.config, args.set, echo=None)
        _note("# resolved config")
        dump(cfg, sys.stderr)
        rep = ex.headline_report(cfg)
        if args.format == "json":
            _emit(json.dumps(rep.as_dict(), indent=1))
        else:
            _emit("\n".join(rep.lines()))
        return EXIT_OK
    if args.n is None or args.lam is None:
        raise UsageError("analytic needs --n and --lambda, or --config/--preset")
    n, lam, g = args.n, args.lam, args.gamma
    if args.scheme == "one-open":
        rep = an.snr_open(an.OpenSchemeParams(n, g, lam, -args.nu, args.reps), args.variance)
    else:
        rep = an.snr_closed(an.ClosedSchemeParams(n, g, lam, args.nu, args.mu, args.reps))
    values = {"signal": rep.signal, "variance": rep.variance, "snr": rep.snr, "simplified_snr": math.sqrt(args.reps) * abs(lam) * n}
    values.update({f"diag.{k}": v for k, v in rep.diagnostics.items()})
    values["regime"] = rep.regime
    if args.format == "json":
        _emit(json.dumps(values, indent=1))
    else:
        width = max(len(k) for k in values)
        for k, v in values.items():
            _emit(f"{k:<{width}}  {v!r}" if not isinstance(v, str) else f"{k:<{width}}  {v}")
    return EXIT_OK


def cmd_compare(args) -> int:
    ora = _oracle_quantities(args.n, args.gamma, args.lam, args.nu, args.mu, args.reps)
    ana = _analytic_quantities(args.n, args.gamma, args.lam, args.nu, args.mu, args.reps)
    failed = False
    rows = []
    for k in ora:
        a, o = ana[k], ora[k]
        if math.isnan(a) and math.isnan(o):
            rows.append((k, a, o, 0.0, "PASS"))
            continue
        diff = abs(a - o)
        ok = diff <= COMPARE_ATOL or diff <= COMPARE_RTOL * abs(o)
        failed |= not ok
        rows.append((k, a, o, diff, "PASS" if ok else "FAIL"))
    if args.format == "json":
        _emit(json.dumps([dict(quantity=r[0], analytic=r[1], oracle=r[2], abs_diff=r[3], status=r[4]) for r in rows], indent=1))
    else:
        _emit(f"{'quantity':<18}  {'analytic':>24}  {'oracle':>24}  {'|diff|':>10}  status")
        for k, a, o, d, s in rows:
            _emit(f"{k:<18}  {a!r:>24}  {o!r:>24}  {d:>10.2e}  {s}")
    return EXIT_NUMERIC if failed else EXIT_OK


# --- coupling -----------------------------------------------------------------


def cmd_coupling(args) -> int:
    species = get_species(args.species)
    m = species.atom_mass
    d = args.d
    if args.preset == "sphere":
        r = args.a if args.a is not None else d / 2
        geom = SpheroidGeometry.sphere(r, d)
    elif args.preset == "oblate":
        c = args.c if args.c is not None else d / 2
        geom = SpheroidGeometry(c / math.sqrt(1 - args.e**2), c, d)
    else:
        if args.a is None or args.c is None:
            raise UsageError("--a and --c are required without a preset")
        geom = SpheroidGeometry(args.a, args.c, d)
    quad = QuadratureSpec(rel_tol=args.rel_tol)
    res = cross_coupling(m, geom, quad)
    lam_self = self_coupling(m, geom.a, geom.c)
    values = {
        "species": species.name,
        "a_m": geom.a,
        "c_m": geom.c,
        "d_m": geom.d,
        "ellipticity": geom.ellipticity,
        "cross_coupling_j": res.value,
        "abs_cross_coupling_j": res.magnitude,
        "quadrature_error_j": res.error,
        "evaluations": res.evals,
        "self_coupling_j": lam_self,
        "self_over_cross": lam_self / res.value,
        "point_mass_ratio": res.value / (-G * m * m / (2 * geom.d)),
    }
    if args.time is not None:
        values["lambda"] = 2 * res.value * args.time / ex.HBAR
    if args.format == "json":
        _emit(json.dumps(values, indent=1))
    else:
        width = max(len(k) for k in values)
        for k, v in values.items():
            _emit(f"{k:<{width}}  {v if isinstance(v, (str, int)) else format(v, '.6e')}")
    return EXIT_OK


# --- scan / contour -------------------------------------------------------------


def _parse_axis(text: str) -> sc.Axis:
    parts = text.split(":")
    if len(parts) not in (4, 5):
        raise UsageError(f"--axis {text!r}: expected name:min:max:points[:log|linear]")
    try:
        return sc.Axis(parts[0], float(parts[1]), float(parts[2]), int(parts[3]), parts[4] if len(parts) == 5 else "log")
    except ValueError as exc:
        raise UsageError(f"--axis {text!r}: {exc}") from None


def _parse_resolution(text: str) -> tuple[int, int, int]:
    try:
        parts = tuple(int(p) for p in text.lower().split("x"))
    except ValueError:
        raise UsageError(f"--resolution {text!r}: expected e.g. 40x40x4") from None
    if len(parts) != 3:
        raise UsageError(f"--resolution {text!r}: expected three sizes")
    return parts


def _build_spec(args) -> sc.ScanSpec:
    if args.preset == "figure3":
        spec = sc.feasibility_spec(_parse_resolution(args.resolution))
        if args.axis:
            spec = replace(spec, axes=tuple(_parse_axis(a) for a in args.axis))
    elif args.preset:
        raise UsageError(f"--preset: unknown scan preset {args.preset!r} (use figure3)")
    else:
        if not args.axis:
            raise UsageError("--axis is required without a preset")
        base = load_config(args.config, args.set)
        spec = sc.ScanSpec(base, tuple(_parse_axis(a) for a in args.axis))
    changes = {}
    if args.reps_rule:
        changes["reps_rule"] = args.reps_rule
    if args.total_time is not None:
        changes["total_time_s"] = args.total_time
    if args.geometry_rule:
        changes["geometry_rule"] = args.geometry_rule
    if args.max_density is not None:
        changes["max_density_cm3"] = args.max_density
    for item in args.fix or ():
        name, _, value = item.partition("=")
        if name not in spec.axis_names:
            raise UsageError(f"--fix: {name!r} is not a scan axis ({', '.join(spec.axis_names)})")
        point = {name: float(value)}
        base = sc.point_config(replace(spec, axes=tuple(a for a in spec.axes if a.name == name), reps_rule="fixed"), point)
        changes.setdefault("axes", spec.axes)
        changes["axes"] = tuple(a for a in changes["axes"] if a.name != name)
        changes["base"] = base
        spec = replace(spec, **changes)
        changes = {}
    return replace(spec, **changes) if changes else spec


def _write(data: bytes, out: str | None) -> None:
    if out in (None, "-"):
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
        return
    try:
        with open(out, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise UsageError(f"--out {out!r}: {exc.strerror}") from None


def cmd_scan(args) -> int:
    spec = _build_spec(args)
    result = sc.run_scan(spec, args.threads)
    _write(sc.export(result, args.format), args.out)
    if args.svg:
        names = spec.axis_names
        if len(names) < 2:
            raise UsageError("--svg needs at least two axes")
        with open(args.svg, "w", encoding="utf-8") as fh:
            fh.write(sc.render_svg(result, names[0], names[1]))
    feas = int(result.feasible().sum())
    _note(f"# {len(result.rows)} points, {feas} with SNR >= 1 under the density cap, {len(result.errors)} errors")
    return EXIT_OK


def cmd_contour(args) -> int:
    spec = _build_spec(args)
    if len(spec.axes) != 2:
        raise UsageError(f"contour needs exactly two axes, got {', '.join(spec.axis_names)}; use --fix")
    contour = sc.snr_contour(spec, args.target)
    lines = [f"polyline,{spec.axis_names[0]},{spec.axis_names[1]}"]
    for i, poly in enumerate(contour.polylines):
        lines += [f"{i},{x!r},{y!r}" for x, y in poly]
    _write(("\n".join(lines) + "\n").encode("utf-8"), args.out)
    return EXIT_OK


# --- presets ---------------------------------------------------------------


PRESETS = {
    "headline": "unsqueezed 1e16 erbium atoms, 1e12 cm^-3, t = 1e4 s, M = 1e3, 10 setups",
    "figure3": "erbium feasibility scan: 35 dB squeezing, 5 setups, M = 1e7 s / t, density cap 1e16 cm^-3",
    "sphere": "coupling preset: touching uniform spheres of radius d/2",
    "oblate": "coupling preset: touching e = 0.98 oblate clouds with c = d/2",
}


def cmd_presets(args) -> int:
    if args.show is None:
        for name, text in PRESETS.items():
            _emit(f"{name:<9}  {text}")
        return EXIT_OK
    if args.show == "headline":
        dump(ex.headline_config(), sys.stdout)
    elif args.show == "figure3":
        spec = sc.feasibility_spec()
        dump(spec.base, sys.stdout)
        for a in spec.axes:
            _emit(f"# axis {a.name}:{a.lo!r}:{a.hi!r}:{a.points}:{a.scale}")
        _emit(f"# reps rule {spec.reps_rule}, total time {spec.total_time_s!r} s, geometry {spec.geometry_rule}")
    elif args.show == "keys":
        for doc in KEY_DOCS:
            _emit(f"{doc.key:<14}  {doc.meaning}")
    else:
        raise UsageError(f"--show: unknown preset {args.show!r} (use headline, figure3 or keys)")
    return EXIT_OK


# --- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gie", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("oracle", help="exact small-N simulation")
    _add_point_args(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("analytic", help="closed-form SNR at any N, or a full experiment report")
    p.add_argument("--n", type=int)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--nu", type=float, default=math.pi / 2)
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--reps", type=float, default=2)
    p.add_argument("--scheme", choices=ex.SCHEMES, default="one-open")
    p.add_argument("--variance", choices=("moments", "bracket"), default="moments")
    p.add_argument("--config")
    p.add_argument("--preset")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("compare", help="analytic versus oracle, PASS/FAIL per quantity")
    _add_point_args(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("coupling", help="gravitational coupling of two clouds")
    p.add_argument("--preset", choices=("sphere", "oblate"))
    p.add_argument("--d", type=float, required=True, help="centre separation, m")
    p.add_argument("--a", type=float, help="equatorial semi-axis, m")
    p.add_argument("--c", type=float, help="polar semi-axis, m")
    p.add_argument("--e", type=float, default=0.98, help="ellipticity for the oblate preset")
    p.add_argument("--species", default="erbium")
    p.add_argument("--time", type=float, help="interaction time, s (adds the dimensionless λ)")
    p.add_argument("--rel-tol", type=float, default=1e-8)
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.set_defaults(func=cmd_coupling)

    for name, func, helptext in (("scan", cmd_scan, "grid scan to CSV/JSON"), ("contour", cmd_contour, "SNR = target contour")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--preset")
        p.add_argument("--config")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
        p.add_argument("--axis", action="append", metavar="NAME:MIN:MAX:POINTS[:SCALE]")
        p.add_argument("--fix", action="append", metavar="AXIS=VALUE", help="pin one preset axis")
        p.add_argument("--resolution", default="40x40x4")
        p.add_argument("--reps-rule", choices=sc.REPS_RULES)
        p.add_argument("--total-time", type=float)
        p.add_argument("--geometry-rule", choices=sc.GEOMETRY_RULES)
        p.add_argument("--max-density", type=float)
        p.add_argument("--out")
        if name == "scan":
            p.add_argument("--format", choices=("csv", "json"), default="csv")
            p.add_argument("--svg")
            p.add_argument("--threads", type=int)
        else:
            p.add_argument("--target", type=float, default=1.0)
        p.set_defaults(func=func)

    p = sub.add_parser("presets", help="list built-in configurations")
    p.add_argument("--show", help="print one preset (headline, figure3) or the config keys (keys)")
    p.set_defaults(func=cmd_presets)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UsageError, ValueError) as exc:
        _note(f"error: {exc}")
        return EXIT_INVALID
    except (QuadratureError, an.DegenerateVarianceError, ArithmeticError) as exc:
        _note(f"numerical failure: {exc}")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
