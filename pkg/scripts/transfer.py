"""End-to-end transfer 0 -> N on a finite chain, quantum vs classical.

    python scripts/transfer.py --family krawtchouk --N 10 --p 0.3 --points 200 > transfer.csv
"""

import argparse
import csv
import sys

import numpy as np

from bdspec import analytic_eigensystem, family_from_config
from bdspec.evolve import classical_ct_transition, quantum_ct_probability


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--family", default="krawtchouk")
    ap.add_argument("--N", type=int, default=10)
    ap.add_argument("--p", type=float, default=0.3)
    ap.add_argument("--t-max", type=float, default=2 * np.pi)
    ap.add_argument("--points", type=int, default=200)
    args = ap.parse_args(argv)
    family = family_from_config({"family": args.family, "N": args.N, "p": args.p})
    es = analytic_eigensystem(family)
    N = family.N
    out = csv.writer(sys.stdout)
    out.writerow(["t", "quantum_P_N0", "classical_P_N0", "pi_N"])
    for t in np.linspace(0.0, args.t_max, args.points):
        out.writerow([f"{t:.6g}", f"{quantum_ct_probability(es, N, 0, t):.12g}",
                      f"{classical_ct_transition(es, N, 0, t):.12g}", f"{es.weight.pi[N]:.12g}"])


if __name__ == "__main__":
    main()
