"""``bdspec`` command line: JSON job config in, CSV or JSON out.

    bdspec <computation> --config job.json [--override k=v ...] --out path --format csv|json

Exit status: 0 success, 1 numerical failure, 2 invalid config, 3 failed verification.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import evolve as ev
from .families import Family, family_from_config, rates_of
from .process import RateTable, build_H, default_timescale
from .specfun import SpecfunError
from .spectral import ConvergenceFailure, EigenSystem, analytic_eigensystem, numeric_eigensystem
from .verify import run_suites

__all__ = ["COMPUTATIONS", "JobConfig", "ConfigError", "load_config", "run", "emit_csv", "emit_json", "main"]

COMPUTATIONS = ("spectrum", "stationary", "classical_ct", "classical_dt", "quantum_ct",
                "quantum_dt", "long_time_average", "period", "verify")
OVERRIDABLE = ("N", "p", "a", "b", "q", "t_S", "rate_scale")
_FAMILY_KEYS = ("family", "N", "p", "a", "b", "q", "rate_scale")
_KNOWN = set(_FAMILY_KEYS) | {"computation", "rates", "times", "steps", "t_S", "y", "x",
                              "init", "tail_tol", "format", "out"}

EXIT_OK, EXIT_NUMERIC, EXIT_INVALID, EXIT_VERIFY = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class JobConfig:
    computation: str
    family: Family | None = None
    rates: RateTable | None = None
    times: tuple[float, ...] | None = None
    steps: int | None = None
    t_S: float | None = None
    y: int | None = None
    x: int | None = None
    init: tuple | None = None
    tail_tol: float | None = None
    raw: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.computation not in COMPUTATIONS:
            raise ConfigError(f"unknown computation {self.computation!r}; choose from {', '.join(COMPUTATIONS)}")
        if (self.family is None) == (self.rates is None):
            raise ConfigError("give exactly one of a family or a raw 'rates' table")
        if self.times is not None:
            t = np.asarray(self.times, dtype=float)
            if t.size == 0:
                raise ConfigError("time grid is empty")
            if np.any(~np.isfinite(t)) or np.any(t < 0):
                raise ConfigError("times must be finite and non-negative")
            if np.any(np.diff(t) <= 0):
                raise ConfigError("times must be strictly increasing")
        if self.steps is not None and (int(self.steps) != self.steps or self.steps < 0):
            raise ConfigError(f"steps must be a non-negative integer, got {self.steps}")
        if self.y is not None and self.init is not None:
            raise ConfigError("give either a source 'y' or an 'init' vector, not both")
        if self.computation in ("classical_ct", "quantum_ct") and self.times is None:
            raise ConfigError(f"{self.computation} needs a 'times' grid")
        if self.computation in ("classical_dt", "quantum_dt") and self.steps is None:
            raise ConfigError(f"{self.computation} needs 'steps'")


def _parse_override(text: str) -> tuple[str, object]:
    key, sep, value = text.partition("=")
    key = key.strip()
    if not sep:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    if key not in OVERRIDABLE:
        raise ConfigError(f"cannot override {key!r}; allowed: {', '.join(OVERRIDABLE)}")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        raise ConfigError(f"override value for {key!r} is not a number: {value!r}") from None


def load_config(raw: dict, computation: str | None = None, overrides: Sequence[str] = ()) -> JobConfig:
    """Validate a JSON job description; the positional computation wins only if they agree."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    raw = dict(raw)
    unknown = sorted(set(raw) - _KNOWN)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    for text in overrides:
        key, value = _parse_override(text)
        raw[key] = value
    given = raw.get("computation")
    if computation is not None and given is not None and given != computation:
        raise ConfigError(f"config says computation {given!r} but {computation!r} was requested")
    comp = computation or given
    if comp is None:
        raise ConfigError("no computation given")

    family = rates = None
    if "rates" in raw:
        if "family" in raw:
            raise ConfigError("give exactly one of a family or a raw 'rates' table")
        table = raw["rates"]
        if not isinstance(table, dict) or set(table) != {"birth", "death"}:
            raise ConfigError("'rates' must be an object with 'birth' and 'death' lists")
        rates = RateTable.from_lists(table["birth"], table["death"])
    elif "family" in raw:
        family = family_from_config({k: raw[k] for k in _FAMILY_KEYS if k in raw})
    else:
        raise ConfigError("give exactly one of a family or a raw 'rates' table")

    init = raw.get("init")
    if init is not None:
        init = tuple(complex(*v) if isinstance(v, (list, tuple)) else v for v in init)
    times = raw.get("times")
    return JobConfig(
        computation=comp,
        family=family,
        rates=rates,
        times=None if times is None else tuple(float(t) for t in times),
        steps=raw.get("steps"),
        t_S=None if raw.get("t_S") is None else float(raw["t_S"]),
        y=raw.get("y"),
        x=raw.get("x"),
        init=init,
        tail_tol=raw.get("tail_tol"),
        raw=raw,
    )


def _eigensystem(job: JobConfig) -> EigenSystem:
    if job.family is not None:
        return analytic_eigensystem(job.family, tail_tolerance=job.tail_tol)
    return numeric_eigensystem(build_H(job.rates))


def _finite_rates(job: JobConfig) -> RateTable | None:
    if job.rates is not None:
        return job.rates
    return rates_of(job.family) if job.family.is_finite else None


def _timescale(job: JobConfig) -> float:
    rates = _finite_rates(job)
    if rates is None:
        raise ConfigError("discrete time is not available for semi-infinite families")
    t_S = job.t_S if job.t_S is not None else default_timescale(rates)
    rates.discrete(t_S)  # validates the bound
    return t_S


def _classical_init(job: JobConfig, es: EigenSystem) -> ev.InitialDistribution:
    if job.init is not None:
        if any(isinstance(v, complex) for v in job.init):
            raise ConfigError("classical 'init' must be real weights")
        return ev.InitialDistribution(np.array(job.init, dtype=float))
    y = 0 if job.y is None else int(job.y)
    if not 0 <= y < es.core:
        raise ConfigError(f"source y={y} outside the available states 0..{es.core - 1}")
    return ev.InitialDistribution.delta(es.size, y)


def _quantum_origin(job: JobConfig, es: EigenSystem):
    if job.init is not None:
        return ev.InitialState(np.array(job.init, dtype=complex))
    y = 0 if job.y is None else int(job.y)
    if not 0 <= y < es.core:
        raise ConfigError(f"source y={y} outside the available states 0..{es.core - 1}")
    return y


@dataclass
class Result:
    """Emitted artifact: either a value grid or a report mapping."""

    computation: str
    grid: ev.AmplitudeGrid | None = None
    table: tuple[tuple[str, ...], list[tuple]] | None = None
    report: dict | None = None
    status: int = EXIT_OK


def _describe(job: JobConfig) -> dict:
    if job.family is not None:
        return job.family.to_config()
    return {"rates": {"birth": job.rates.birth.tolist(), "death": job.rates.death.tolist()}}


def run(job: JobConfig) -> Result:
    es = _eigensystem(job)
    comp = job.computation
    if comp == "spectrum":
        rows = [(n, float(e)) for n, e in enumerate(es.eigenvalues)]
        report = {"computation": comp, "system": _describe(job), "source": es.source,
                  "size": es.size, "core": es.core, "eigenvalues": [float(e) for e in es.eigenvalues]}
        return Result(comp, table=(("n", "eigenvalue"), rows), report=report)
    if comp == "stationary":
        rows = [(x, float(p)) for x, p in enumerate(es.weight.pi)]
        report = {"computation": comp, "system": _describe(job), "pi": [float(p) for p in es.weight.pi]}
        return Result(comp, table=(("x", "pi"), rows), report=report)
    if comp == "classical_ct":
        return Result(comp, grid=ev.classical_ct_distribution(es, _classical_init(job, es), job.times))
    if comp == "classical_dt":
        t_S = _timescale(job)
        return Result(comp, grid=ev.classical_dt_evolution(es, t_S, _classical_init(job, es), int(job.steps)))
    if comp == "quantum_ct":
        return Result(comp, grid=ev.quantum_ct_evolution(es, _quantum_origin(job, es), job.times))
    if comp == "quantum_dt":
        t_S = _timescale(job)
        return Result(comp, grid=ev.quantum_dt_evolution(es, t_S, _quantum_origin(job, es), int(job.steps)))
    if comp == "long_time_average":
        y = 0 if job.y is None else int(job.y)
        xs = range(es.size) if job.x is None else [int(job.x)]
        rows = [(x, y, ev.long_time_average(es, x, y)) for x in xs]
        report = {"computation": comp, "system": _describe(job),
                  "rows": [{"x": x, "y": y, "value": v} for x, y, v in rows]}
        return Result(comp, table=(("x", "y", "value"), rows), report=report)
    if comp == "period":
        T = ev.detect_period(es)
        report = {"computation": comp, "system": _describe(job), "period": T,
                  "period_over_2pi": None if T is None else T / (2 * math.pi)}
        return Result(comp, table=(("period",), [(T if T is not None else "none",)]), report=report)
    # verify
    checks = run_suites(job.family if job.family is not None else job.rates)
    ok = all(c.passed for c in checks)
    failures = [c for c in checks if not c.passed]
    report = {"computation": comp, "system": _describe(job), "passed": ok,
              "checks": [c.as_dict() for c in checks],
              "failures": [f"{c.suite}/{c.name}: deviation {c.deviation:.3e} > {c.tolerance:.1e}" for c in failures]}
    rows = [(c.suite, c.name, c.deviation, c.tolerance, "pass" if c.passed else "FAIL") for c in checks]
    return Result(comp, table=(("suite", "check", "deviation", "tolerance", "status"), rows),
                  report=report, status=EXIT_OK if ok else EXIT_VERIFY)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(v).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _grid_rows(grid: ev.AmplitudeGrid):
    xs = range(grid.values.shape[1])
    if grid.kind == "quantum":
        header = ("t", "x", "re", "im", "prob")
        rows = [(t, x, v.real, v.imag, v.real * v.real + v.imag * v.imag)
                for t, row in zip(grid.times, grid.values) for x, v in zip(xs, row)]
    else:
        header = ("t", "x", "prob")
        rows = [(t, x, v) for t, row in zip(grid.times, grid.values) for x, v in zip(xs, row)]
    if grid.discrete:
        rows = [(int(r[0]),) + r[1:] for r in rows]
    return header, rows


def emit_csv(result: Result | ev.AmplitudeGrid, stream) -> None:
    """Time-major rows, x ascending, floats at 17 significant digits."""
    if isinstance(result, ev.AmplitudeGrid):
        header, rows = _grid_rows(result)
    elif result.grid is not None:
        header, rows = _grid_rows(result.grid)
    else:
        header, rows = result.table
    stream.write(",".join(header) + "\n")
    for row in rows:
        stream.write(",".join(_fmt(v) for v in row) + "\n")


def emit_json(result: Result, stream) -> None:
    if result.grid is not None:
        header, rows = _grid_rows(result.grid)
        payload = {"computation": result.computation, "columns": list(header),
                   "rows": [[float(v) if isinstance(v, (float, np.floating)) else int(v) for v in r] for r in rows]}
    else:
        payload = result.report
    json.dump(payload, stream, indent=2, allow_nan=False)
    stream.write("\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bdspec",
        description="Spectral solutions of classical and quantum birth-death processes.")
    parser.add_argument("computation", choices=COMPUTATIONS)
    parser.add_argument("--config", required=True, help="JSON job file ('-' reads stdin)")
    parser.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help=f"replace a config value; keys: {', '.join(OVERRIDABLE)}")
    parser.add_argument("--out", default="-", help="output path ('-' for stdout)")
    parser.add_argument("--format", choices=("csv", "json"), default=None,
                        help="output format (default: from --out suffix, else json)")
    return parser


def _read_config(path: str) -> dict:
    if path == "-":
        return json.load(sys.stdin)
    with open(path) as fh:
        return json.load(fh)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    fmt = args.format or ("csv" if args.out.endswith(".csv") else "json")
    try:
        job = load_config(_read_config(args.config), args.computation, args.override)
        result = run(job)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"bdspec: cannot read config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ev.NegativeProbability, ConvergenceFailure, SpecfunError) as exc:
        print(f"bdspec: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, TypeError, KeyError, IndexError) as exc:
        print(f"bdspec: invalid job: {exc}", file=sys.stderr)
        return EXIT_INVALID
    buffer = io.StringIO()
    (emit_csv if fmt == "csv" else emit_json)(result, buffer)
    if args.out == "-":
        sys.stdout.write(buffer.getvalue())
    else:
        with open(args.out, "w", newline="") as fh:
            fh.write(buffer.getvalue())
    if result.status == EXIT_VERIFY:
        for line in result.report["failures"]:
            print(f"bdspec: verify failed: {line}", file=sys.stderr)
    return result.status


if __name__ == "__main__":
    sys.exit(main())
