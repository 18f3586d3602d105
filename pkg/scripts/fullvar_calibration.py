"""Show how the literal closed-form noise bracket relates to the moment-assembled variance."""

from __future__ import annotations

import argparse
import math

from gie import analytic as an


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--max-n", type=int, default=8)
    ap.add_argument("--gamma", type=float, default=0.0)
    ap.add_argument("--lambda", dest="lam", type=float, default=0.0)
    ap.add_argument("--delta", type=float, default=math.pi / 2, help="opening minus closing phase (rad)")
    args = ap.parse_args()

    print("N  literal_bracket  M*Var  ratio  N^2*bracket-S^2-M*Var")
    for n in range(1, args.max_n + 1):
        r = an.fullvar_calibration(n, args.gamma, args.lam, args.delta)
        print(f"{n}  {r.literal:.6g}  {r.definitional:.6g}  {r.literal_ratio:.6g}  {r.offset_residual:.2e}")


if __name__ == "__main__":
    main()
