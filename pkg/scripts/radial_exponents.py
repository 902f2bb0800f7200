"""Critical dimensions and growth exponents of the radial lower bound, with Holder-chain checks on solved inputs."""
import argparse
import sys

import numpy as np

from quasilab import nonlinearity as nlm
from quasilab.liouville_bounds import critical_dimension, holder_chain_check, lower_bound_exponent
from quasilab.phi_models import make_phi
from quasilab.profile_solver import solve_radial


def exponent_table(ps, dims):
    print(f"{'p':>5s} {'n*':>8s} " + " ".join(f"{'n=' + str(n):>22s}" for n in dims))
    for p in ps:
        cells = []
        for n in dims:
            rep = lower_bound_exponent(p, n)
            value = 0.0 if abs(rep.exponent) < 1e-12 else rep.exponent
            cells.append(f"{value:9.4f} {rep.regime:>12s}")
        print(f"{p:5.2f} {critical_dimension(p):8.4f} " + " ".join(cells))


def chain_table(ps, n, R):
    nl = nlm.ginzburg_landau(2)
    print(f"\nHolder chain, Ginzburg-Landau m=2, n={n}, R={R:g}")
    print(f"{'p':>5s} {'r':>5s} {'lhs':>12s} {'holder rhs':>12s} {'chained rhs':>12s} {'LR':>5s} ok")
    for p in ps:
        rad = solve_radial(make_phi("plaplacian", p), nl, n, R, [0.5, -0.3], N=800)
        for r in (1.0, 2.0, 4.0):
            hc = holder_chain_check(rad, r, 0.8 * R)
            lr = "yes" if hc.lr is not None and hc.lr.holds else "no"
            print(f"{p:5.2f} {r:5.1f} {hc.power_integral:12.5e} {hc.holder_rhs:12.5e} {hc.chained_rhs:12.5e} "
                  f"{lr:>5s} {hc.holds and hc.chained_holds}")


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--p", nargs="+", type=float, default=[1.5, 2.0, 3.0, 5.0])
    parser.add_argument("--dims", nargs="+", type=int, default=[2, 3, 5, 8, 10, 12])
    parser.add_argument("--radius", type=float, default=10.0)
    args = parser.parse_args(argv)
    exponent_table(args.p, args.dims)
    chain_table([p for p in args.p if p <= 2.0], 3, args.radius)
    return 0


if __name__ == "__main__":
    sys.exit(main())
