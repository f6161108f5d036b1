"""Sweep the permeability response for gamma = 1 crossings and pin the reference cell.

Writes tests/fixtures/torus_reference.json.  Run from the repository root:

    python3 scripts/pin_reference_fixture.py
"""

import json
from pathlib import Path

from toroton.medium import MediumParams, WaveParams
from toroton.radial import solve_profile
from toroton.torus import PolarGrid, find_fixed_point, sweep_gamma

BASE = MediumParams(d_eps=0.2, i_sat=1.0)
E0 = 2.0
FRACTION = 1e-2
C_RANGE = (0.002, 0.048)
N_SCAN = 30
GRID = {"mu_exp": [1.0, 2.0, 3.0, 4.0], "mu1": [10.0, 100.0], "u_sat": [1.08, 2.16, 4.32]}
RESOLUTIONS = [(200, 64), (400, 128)]


def main():
    cells = sweep_gamma(GRID, C_RANGE, BASE, e0=E0, n_scan=N_SCAN, grid_fraction=FRACTION, nr=200, ntheta=64)
    hits = [c for c in cells if c.has_crossing]
    stable = [c for c in hits if c.stable]
    pick = (stable or hits)[0]
    medium = MediumParams(**{**BASE.__dict__, **pick.params})
    w = WaveParams.from_k0(1.0, medium)
    prof = solve_profile(E0, medium, w)
    per_res = []
    for nr, nt in RESOLUTIONS:
        scan = find_fixed_point(prof, medium, w, C_RANGE, N_SCAN, PolarGrid(prof.core_radius(FRACTION), nr, nt))
        per_res.append({"nr": nr, "ntheta": nt,
                        "crossings": [{"c": c.c, "stable": c.stable} for c in scan.crossings]})
    out = {
        "medium": medium.__dict__, "e0": E0, "core_fraction": FRACTION,
        "c_range": list(C_RANGE), "n_scan": N_SCAN,
        "sweep": {"grid": GRID, "cells": len(cells), "with_crossing": len(hits), "stable": len(stable)},
        "resolutions": per_res,
    }
    path = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "torus_reference.json"
    path.write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    print(json.dumps(out["sweep"]), json.dumps(per_res))


if __name__ == "__main__":
    main()
