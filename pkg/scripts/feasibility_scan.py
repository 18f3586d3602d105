"""Run the squeezed-erbium feasibility scan and write CSV plus one SVG slice per atom number."""

from __future__ import annotations

import argparse
import time
from pathlib import Path

from gie import scan as sc


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--resolution", default="40x40x4", help="points along d, t and N")
    ap.add_argument("--outdir", default="feasibility_out")
    ap.add_argument("--threads", type=int)
    args = ap.parse_args()

    resolution = tuple(int(p) for p in args.resolution.split("x"))
    spec = sc.feasibility_spec(resolution)
    start = time.perf_counter()
    result = sc.run_scan(spec, args.threads)
    elapsed = time.perf_counter() - start

    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "scan.csv").write_bytes(sc.to_csv(result))
    for n in spec.axes[2].values():
        svg = sc.render_svg(result, "d_m", "time_s", {"atoms": float(n)})
        (out / f"slice_atoms_{n:.0e}.svg").write_text(svg, encoding="utf-8")

    feasible = result.feasible()
    atoms = result.column("atoms")
    print(f"{len(result.rows)} points in {elapsed:.1f} s, {int(feasible.sum())} feasible (SNR >= 1, density < cap)")
    for n in spec.axes[2].values():
        print(f"  N = {n:.0e}: {int(feasible[atoms == n].sum())} feasible")
    print(f"wrote {out}/scan.csv and {len(spec.axes[2].values())} SVG slices")


if __name__ == "__main__":
    main()
