"""Command-line interface.

``test``       similarity test on a two-group event file (JSON or CSV report)
``simulate``   rejection-rate study for a built-in or JSON-defined scenario
``reconstruct`` write an event file matching published counts and exposures

Exit codes of ``test``: 0 similarity shown (global null rejected), 1 not
shown, 2 usage or input error. With ``--delta-grid`` the code is 0 if any
threshold vector gives a global rejection.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from typing import Optional, Sequence

from . import __version__
from .harness import ScenarioSpec, get_scenario, run_scenario
from .io import ParseError, parse_events, sample_from_stats, write_events
from .similarity import (ADMINISTRATIVE, EXPONENTIAL, ConfigurationError, TestConfig,
                         run_similarity_test)

EXIT_REJECT, EXIT_NO_REJECT, EXIT_USAGE = 0, 1, 2

_CENSORING = {"none": ADMINISTRATIVE, "exp": EXPONENTIAL}


class UsageError(Exception):
    pass


def _floats(text: str, sep: str = ",") -> list[float]:
    try:
        return [float(x) for x in text.split(sep) if x.strip()]
    except ValueError:
        raise UsageError(f"cannot parse numbers from {text!r}") from None


def _sizes(text: str) -> list[tuple]:
    out = []
    for item in text.split(","):
        try:
            n1, n2 = item.lower().split("x")
            out.append((int(n1), int(n2)))
        except ValueError:
            raise UsageError(f"sample sizes must look like 200x200, got {item!r}") from None
    return out


def _grid(text: str, k: Optional[int]) -> list[tuple]:
    """``0.0005,0.001`` (one value for every state) or ``0.001:0.0015:0.001,...``."""
    grid = []
    for item in text.split(","):
        values = _floats(item, ":")
        if len(values) == 1 and k is not None:
            values = values * k
        grid.append(tuple(values))
    return grid


def _seed(value: Optional[int]) -> int:
    if value is not None:
        return value
    env = os.environ.get("CRS_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"CRS_SEED must be an integer, got {env!r}") from None
    return 0


def _emit(text: str, out: Optional[str]) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _check_thresholds(deltas: Sequence[float], k: int) -> tuple:
    if len(deltas) == 1:
        deltas = list(deltas) * k
    if len(deltas) != k:
        raise UsageError(f"{len(deltas)} thresholds given but the data have {k} states")
    if any(d <= 0 for d in deltas):
        raise UsageError("thresholds must be positive")
    return tuple(deltas)


def cmd_test(args) -> int:
    mode = _CENSORING[args.censoring]
    g1, g2 = parse_events(args.input, tau=args.tau,
                          allow_random_censoring=mode == EXPONENTIAL)
    k = g1.k
    if args.delta and len(args.delta) > k:
        # states without events in either group still get a test
        g1, g2 = parse_events(args.input, tau=args.tau, k=len(args.delta),
                              allow_random_censoring=mode == EXPONENTIAL)
        k = g1.k
    if args.delta_grid:
        grid = [_check_thresholds(d, k) for d in _grid(args.delta_grid, k)]
    elif args.delta:
        grid = [_check_thresholds(args.delta, k)]
    else:
        raise UsageError("give thresholds with --delta or --delta-grid")

    seed = _seed(args.seed)
    results = []
    for deltas in grid:
        config = TestConfig(deltas, args.nboot, args.alpha, seed, mode)
        results.append(run_similarity_test(g1, g2, config, workers=args.threads))

    meta = {
        "version": __version__,
        "input": os.fspath(args.input),
        "tau": g1.tau,
        "n1": len(g1),
        "n2": len(g2),
        "k": k,
    }
    if args.format == "json":
        if args.delta_grid:
            payload = dict(meta, grid=[r.to_dict() for r in results], p_value_matrix=[
                [float(r.p_values[j]) for r in results] for j in range(k)])
        else:
            payload = dict(meta, result=results[0].to_dict())
        text = json.dumps(payload, indent=2) + "\n"
    else:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["state"] + [":".join(repr(d) for d in r.config.thresholds)
                                     for r in results])
        for j in range(k):
            writer.writerow([j + 1] + [repr(float(r.p_values[j])) for r in results])
        writer.writerow(["global"] + [int(r.global_reject) for r in results])
        text = buf.getvalue()
    _emit(text, args.out)
    return EXIT_REJECT if any(r.global_reject for r in results) else EXIT_NO_REJECT


def _load_scenario(name: str) -> ScenarioSpec:
    if name.startswith("builtin:"):
        try:
            return get_scenario(name)
        except KeyError as err:
            raise UsageError(err.args[0]) from None
    try:
        with open(name) as fh:
            data = json.load(fh)
        return ScenarioSpec(**data)
    except FileNotFoundError:
        raise UsageError(f"unknown scenario {name!r}") from None
    except (TypeError, ValueError) as err:
        raise UsageError(f"invalid scenario file {name}: {err}") from None


def cmd_simulate(args) -> int:
    spec = _load_scenario(args.scenario)
    changes = {}
    if args.nsim is not None:
        changes["n_sim"] = args.nsim
    if args.nboot is not None:
        changes["n_boot"] = args.nboot
    if args.alpha is not None:
        changes["level"] = args.alpha
    if changes:
        spec = spec.replace(**changes)
    sizes = _sizes(args.sizes) if args.sizes else None
    grid = _grid(args.delta_grid, spec.k) if args.delta_grid else None
    try:
        report = run_scenario(spec, _seed(args.seed), workers=args.threads,
                              sample_sizes=sizes, delta_grid=grid)
    except KeyError as err:
        raise UsageError(err.args[0]) from None
    if args.format == "csv":
        text = report.to_csv()
    else:
        text = json.dumps({
            "version": __version__,
            "scenario": spec.name,
            "n_sim": spec.n_sim,
            "n_boot": spec.n_boot,
            "cells": [{"n1": c.n1, "n2": c.n2, "deltas": list(c.deltas),
                       "global_rate": c.global_rate, "state_rates": list(c.state_rates),
                       "global_se": c.global_se, "state_se": list(c.state_se)}
                      for c in report.cells],
        }, indent=2) + "\n"
    _emit(text, args.out)
    return 0


def cmd_reconstruct(args) -> int:
    groups = []
    for label, counts, exposure, n in ((1, args.counts1, args.exposure1, args.n1),
                                       (2, args.counts2, args.exposure2, args.n2)):
        try:
            groups.append(sample_from_stats(_floats(counts), exposure, n, args.tau, label))
        except ValueError as err:
            raise UsageError(f"group {label}: {err}") from None
    buf = io.StringIO()
    write_events(buf, *groups)
    _emit(buf.getvalue(), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cr-similarity",
        description="Similarity tests for two competing-risks models with constant intensities.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="run the bootstrap similarity test on an event file")
    t.add_argument("input", help="CSV with columns subject_id,group,time,state")
    t.add_argument("--tau", type=float, help="observation window (overrides #tau=)")
    t.add_argument("--delta", type=float, action="append",
                   help="threshold; repeat once per state or give one for all")
    t.add_argument("--delta-grid",
                   help="comma-separated thresholds, each applied to every state; "
                        "use a:b:c for per-state vectors")
    t.add_argument("--nboot", type=int, default=1000)
    t.add_argument("--alpha", type=float, default=0.05, help="significance level")
    t.add_argument("--seed", type=int, help="defaults to $CRS_SEED, then 0")
    t.add_argument("--censoring", choices=sorted(_CENSORING), default="none")
    t.add_argument("--format", choices=("json", "csv"), default="json")
    t.add_argument("--out", help="output file (default stdout)")
    t.add_argument("--threads", type=int, default=1)
    t.set_defaults(func=cmd_test)

    s = sub.add_parser("simulate", help="Monte Carlo rejection rates for a scenario")
    s.add_argument("scenario", help="builtin:scenario1..4 or a JSON scenario file")
    s.add_argument("--nsim", type=int)
    s.add_argument("--nboot", type=int)
    s.add_argument("--alpha", type=float)
    s.add_argument("--seed", type=int, help="defaults to $CRS_SEED, then 0")
    s.add_argument("--sizes", help="restrict to sample sizes, e.g. 300x300,500x500")
    s.add_argument("--delta-grid", help="restrict to threshold vectors (as for 'test')")
    s.add_argument("--format", choices=("json", "csv"), default="csv")
    s.add_argument("--out", help="output file (default stdout)")
    s.add_argument("--threads", type=int, default=1, help="worker processes")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("reconstruct", help="write an event file from summary counts")
    r.add_argument("--tau", type=float, required=True)
    r.add_argument("--counts1", required=True, help="events per state, e.g. 17,18,6")
    r.add_argument("--exposure1", type=float, required=True)
    r.add_argument("--n1", type=int, required=True)
    r.add_argument("--counts2", required=True)
    r.add_argument("--exposure2", type=float, required=True)
    r.add_argument("--n2", type=int, required=True)
    r.add_argument("--out", help="output file (default stdout)")
    r.set_defaults(func=cmd_reconstruct)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        parser.error("--threads must be at least 1")
    try:
        return args.func(args)
    except (UsageError, ParseError, ConfigurationError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
