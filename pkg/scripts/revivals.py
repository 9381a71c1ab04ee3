"""Detect exact revival periods and check U(T) = I for each finite family."""

import argparse
import math

import numpy as np

from bdspec import Hahn, Krawtchouk, QHahn, QuantumQKrawtchouk, analytic_eigensystem
from bdspec.evolve import detect_period, quantum_ct_matrix


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=10)
    args = ap.parse_args(argv)
    N = args.N
    families = [Krawtchouk(N, 0.3), Hahn(N, 1.5, 0.5), Hahn(N, math.sqrt(2), 0.5),
                QHahn(N, 0.3, 0.4, 0.5), QHahn(N, 0.3, 0.4, 0.37),
                QuantumQKrawtchouk(N, 1.5 * 0.9**-N, 0.9)]
    for f in families:
        es = analytic_eigensystem(f)
        T = detect_period(es)
        if T is None:
            print(f"{f}: no period found")
            continue
        err = np.max(np.abs(quantum_ct_matrix(es, T) - np.eye(es.size)))
        print(f"{f}: T = {T:.12g}, max |U(T) - I| = {err:.2e}")


if __name__ == "__main__":
    main()
