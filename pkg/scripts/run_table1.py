"""Run the cutting-plane bound on the bundled cases and print a gap table.

    python scripts/run_table1.py [--cases case9 case30] [--json out.json]

Gaps are measured against the stored reference objectives
(``src/liftopf/data/reference_opf.json``).
"""
import argparse
import json
import sys

from liftopf.cutting_plane import SolveConfig, run
from liftopf.netcase import bundled_case
from liftopf.reference import reference_objective

CASES = ("case9", "case30", "case57", "case118")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cases", nargs="+", default=list(CASES))
    ap.add_argument("--max-rounds", type=int, default=200)
    ap.add_argument("--json", help="also write the rows as JSON")
    args = ap.parse_args(argv)

    rows = []
    print(f"{'case':<9}{'reference':>14}{'LP bound':>14}{'gap %':>9}{'rounds':>8}{'cuts':>8}{'time s':>8}  stop")
    for name in args.cases:
        ref = reference_objective(name)
        rep = run(bundled_case(name), SolveConfig(max_rounds=args.max_rounds), ref)
        row = {
            "case": name,
            "reference": ref,
            "bound": rep.bound,
            "gap_pct": None if rep.gap is None else 100 * rep.gap,
            "rounds": rep.rounds,
            "cuts": sum(rep.cut_counts.values()),
            "time_s": rep.wall_time,
            "stop": rep.stop_reason,
        }
        rows.append(row)
        gap = "-" if row["gap_pct"] is None else f"{row['gap_pct']:.4f}"
        bound = "-" if rep.bound is None else f"{rep.bound:.4f}"
        print(f"{name:<9}{ref:>14.4f}{bound:>14}{gap:>9}{rep.rounds:>8}{row['cuts']:>8}"
              f"{rep.wall_time:>8.1f}  {rep.stop_reason}", flush=True)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
            fh.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
