"""Refinement study: 1D profile error, flux-identity residual and Pohozaev residual against grid spacing."""
import argparse
import csv
import math
import sys

import numpy as np

from quasilab import nonlinearity as nlm
from quasilab.diagnostics import flux_identity_residual, hamiltonian_slices, pohozaev_residual
from quasilab.grid_solver import planar_field
from quasilab.phi_models import make_phi
from quasilab.profile_solver import solve_profile


def profile_rows(nodes):
    phi, nl = make_phi("laplacian"), nlm.allen_cahn()
    rows, prev = [], None
    for N in nodes:
        prof = solve_profile(phi, nl, [(-1, 1)], L=20, N=N)
        err = float(np.max(np.abs(prof.u[0] - np.tanh(prof.t / math.sqrt(2)))))
        rows.append({"study": "profile", "family": "laplacian", "h": prof.spacing, "error": err,
                     "ratio": prev / err if prev else float("nan")})
        prev = err
    return rows


def field_rows(family, spacings):
    phi = make_phi("plaplacian", 3) if family == "plaplacian3" else make_phi(family)
    nl = nlm.allen_cahn()
    prof = solve_profile(phi, nl, [(-1, 1)], L=20, N=2048)
    rows, prev = [], {}
    for h in spacings:
        fld = planar_field(prof, (0.6, 0.8), [(-6, 6), (-6, 6)], h)
        sf = hamiltonian_slices(fld, phi, nl, axis=0)
        res, scale = flux_identity_residual(sf, fld, phi)
        values = {"flux": float(np.max(np.abs(res))) / scale,
                  "pohozaev": pohozaev_residual(fld, phi, nl, 4.0).normalized}
        for study, err in values.items():
            ratio = prev[study] / err if study in prev else float("nan")
            rows.append({"study": study, "family": family, "h": h, "error": err, "ratio": ratio})
            prev[study] = err
    return rows


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--csv", help="also write the table to this file")
    parser.add_argument("--families", nargs="+", default=["laplacian", "meancurvature", "plaplacian3"])
    args = parser.parse_args(argv)
    rows = profile_rows([256, 512, 1024, 2048])
    for family in args.families:
        rows += field_rows(family, [0.2, 0.1, 0.05])
    print(f"{'study':10s} {'family':14s} {'h':>8s} {'error':>12s} {'ratio':>8s}")
    for r in rows:
        print(f"{r['study']:10s} {r['family']:14s} {r['h']:8.4f} {r['error']:12.3e} {r['ratio']:8.2f}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
