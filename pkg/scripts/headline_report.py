"""Print the unsqueezed headline example end to end, optionally with the cm-radius sphere for contrast."""

from __future__ import annotations

import argparse
import json

from gie import experiment as ex
from gie.spheroid import SpheroidGeometry


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--json", action="store_true")
    ap.add_argument("--compare-sphere", action="store_true", help="also report 1 cm spheres 2 cm apart")
    args = ap.parse_args()

    configs = [("headline", ex.headline_config())]
    if args.compare_sphere:
        configs.append(("1 cm spheres", configs[0][1].with_(geom=SpheroidGeometry.sphere(0.01, 0.02))))
    for label, cfg in configs:
        rep = ex.headline_report(cfg)
        if args.json:
            print(json.dumps({"label": label, **rep.as_dict()}, indent=1))
        else:
            print(f"== {label}")
            print("\n".join(rep.lines()))


if __name__ == "__main__":
    main()
