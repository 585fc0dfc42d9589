"""Figure scripts over latgas CSV output.

    latgas-plot convergence --csv out/converge_summary.csv --out e.png
    latgas-plot profiles    --csv out/stationary_profile.csv [--pde-csv out/pde_trajectory.csv] --out prof.png
    latgas-plot ensembles   --csv out/ensembles_gap.csv --out gaps.svg
    latgas-plot diagnostic  --csv out/replacement_diagnostic.csv --out trend.png
"""
from __future__ import annotations

import argparse

from .figures import (
    plot_convergence,
    plot_diagnostic_trend,
    plot_ensembles_scaling,
    plot_profiles,
)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="latgas-plot", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="kind", required=True)

    p = sub.add_parser("convergence")
    p.add_argument("--csv", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--column", default="e")

    p = sub.add_parser("profiles")
    p.add_argument("--csv", required=True)
    p.add_argument("--pde-csv", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--component", type=int, default=0)

    p = sub.add_parser("ensembles")
    p.add_argument("--csv", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("diagnostic")
    p.add_argument("--csv", required=True)
    p.add_argument("--out", required=True)

    args = ap.parse_args(argv)
    if args.kind == "convergence":
        out, slope = plot_convergence(args.csv, args.out, column=args.column)
        print(f"wrote {out}; fitted slope {slope:.3f}")
    elif args.kind == "profiles":
        out = plot_profiles(args.csv, args.pde_csv, args.out, component=args.component)
        print(f"wrote {out}")
    elif args.kind == "ensembles":
        out = plot_ensembles_scaling(args.csv, args.out)
        print(f"wrote {out}")
    else:
        out = plot_diagnostic_trend(args.csv, args.out)
        print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
