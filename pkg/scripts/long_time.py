"""Quantum long-time averages against the classical stationary distribution.

Prints, for a source state y, the quantum time average of |psi_xy|^2 next to
pi(x), the classical long-time limit of P(x, t | y).
"""

import argparse

from bdspec import analytic_eigensystem, family_from_config
from bdspec.evolve import long_time_average


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--family", default="hahn")
    ap.add_argument("--N", type=int, default=8)
    ap.add_argument("--a", type=float, default=1.5)
    ap.add_argument("--b", type=float, default=0.5)
    ap.add_argument("--y", type=int, default=0)
    args = ap.parse_args(argv)
    family = family_from_config({"family": args.family, "N": args.N, "a": args.a, "b": args.b})
    es = analytic_eigensystem(family)
    print(f"{'x':>3} {'quantum avg':>14} {'classical pi':>14}")
    for x in range(es.size):
        print(f"{x:>3} {long_time_average(es, x, args.y):>14.8f} {es.weight.pi[x]:>14.8f}")


if __name__ == "__main__":
    main()
