"""Solve the bundled cases with an external AC OPF solver and store the results.

Requires ``pypower`` (``pip install pypower``), a Python port of MATPOWER whose
built-in case9/30/57/118 data match the MATPOWER files under
``src/liftopf/data/cases``.  The output file is committed; this script only
documents how it was produced.

    python scripts/reference_opf.py > src/liftopf/data/reference_opf.json
"""
import json
import warnings

from pypower.api import case9, case30, case57, case118, ppoption, runopf

CASES = {"case9": case9, "case30": case30, "case57": case57, "case118": case118}


def main():
    warnings.filterwarnings("ignore")
    out = {"solver": "pypower runopf (PIPS interior point)", "cases": {}}
    for name, factory in CASES.items():
        res = runopf(factory(), ppoption(VERBOSE=0, OUT_ALL=0))
        if not res["success"]:
            raise SystemExit(f"{name}: OPF did not converge")
        out["cases"][name] = {
            "objective": float(res["f"]),
            "profile": [
                {"bus": int(row[0]), "vm": float(row[7]), "va_deg": float(row[8])}
                for row in res["bus"]
            ],
        }
    print(json.dumps(out, indent=1))


if __name__ == "__main__":
    main()
