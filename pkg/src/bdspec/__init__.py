"""Exact spectral solutions of birth-death processes, classical and quantum.

Modules, bottom up: :mod:`specfun` (terminating series), :mod:`process`
(rate tables and the tridiagonal matrices), :mod:`families` (closed-form
solvable families), :mod:`spectral` (eigensystems), :mod:`evolve` (time
evolution), :mod:`verify` and :mod:`cli`.
"""

from .families import Charlier, Hahn, Krawtchouk, QHahn, QuantumQKrawtchouk, family_from_config, rates_of
from .process import RateTable, StateSpace, build_H, build_K, build_L, build_phi0
from .spectral import EigenSystem, analytic_eigensystem, numeric_eigensystem

__version__ = "0.1.0"

__all__ = [
    "Charlier",
    "Hahn",
    "Krawtchouk",
    "QHahn",
    "QuantumQKrawtchouk",
    "family_from_config",
    "rates_of",
    "RateTable",
    "StateSpace",
    "build_H",
    "build_K",
    "build_L",
    "build_phi0",
    "EigenSystem",
    "analytic_eigensystem",
    "numeric_eigensystem",
]
