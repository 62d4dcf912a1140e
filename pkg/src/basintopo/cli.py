"""Command line entry point.

Usage::

    basintopo run <config>      full pipeline: basin, Betti numbers, verdict, checks
    basintopo basin <config>    basin sweep only, writes basin.csv
    basintopo topo <grid.csv>   Betti numbers of the CONVERGED cells of a basin CSV
    basintopo verify <config>   checks that need no basin (conjugacy, stationarity, ...)
    basintopo report <dir>      rebuild summary.txt and report.json from a run directory

``<config>`` is a JSON file or the name of a bundled scenario
(circle, punctured, cylinder_m0, funnel). Exit status is 0 iff every
requested check passes; errors exit with status 2 and a JSON message on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .basin import BasinGrid, compute_basin
from .cubetopo import EmptyComplexError, betti, build_complex
from .scenario import (
    MissingArtifactError,
    Scenario,
    ScenarioError,
    atomic_write,
    bundled_scenarios,
    report,
    run_scenario,
)


def _fail(kind: str, message: str) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return 2


def _load(args) -> Scenario:
    scn = Scenario.load(args.config)
    if args.seed is not None:
        scn.seed = args.seed
    if args.out is not None:
        scn.out = args.out
    return scn


def cmd_run(args) -> int:
    scn = _load(args)
    rr = run_scenario(scn, scn.out, threads=args.threads)
    print((Path(scn.out) / "summary.txt").read_text(), end="")
    return 0 if rr.all_passed else 1


def cmd_verify(args) -> int:
    scn = _load(args)
    rr = run_scenario(scn, scn.out, threads=args.threads, only_checks=True)
    print((Path(scn.out) / "summary.txt").read_text(), end="")
    return 0 if rr.all_passed else 1


def cmd_basin(args) -> int:
    scn = _load(args)
    if scn.grid is None:
        raise ScenarioError("scenario has no grid")
    grid = compute_basin(scn.system, scn.grid, scn.params, threads=args.threads)
    path = Path(scn.out) / "basin.csv"
    atomic_write(path, grid.to_csv())
    print(path)
    return 0


def cmd_topo(args) -> int:
    path = Path(args.grid)
    if not path.is_file():
        return _fail("missing_file", str(path))
    grid = BasinGrid.from_csv(path.read_text())
    profile = betti(build_complex(grid))
    text = json.dumps(profile.to_dict())
    if args.out is not None:
        atomic_write(Path(args.out) / "basin_betti.json", text + "\n")
    print(text)
    return 0


def cmd_report(args) -> int:
    text, _ = report(args.dir)
    print(text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--threads", type=int, default=1, help="threads for basin sweeps")
    common.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(
        prog="basintopo",
        description="Basins of attraction versus tubular neighbourhoods.",
        epilog="bundled scenarios: " + ", ".join(bundled_scenarios()))
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, arg, helptext in (
        ("run", cmd_run, "config", "run a scenario end to end"),
        ("basin", cmd_basin, "config", "compute the basin grid only"),
        ("verify", cmd_verify, "config", "run basin-free checks only"),
        ("topo", cmd_topo, "grid", "Betti numbers of a basin CSV"),
        ("report", cmd_report, "dir", "summarise a run directory"),
    ):
        sp = sub.add_parser(name, parents=[common], help=helptext)
        sp.add_argument(arg)
        sp.set_defaults(func=fn)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ScenarioError as exc:
        return _fail(exc.kind, str(exc))
    except EmptyComplexError as exc:
        return _fail("empty_complex", str(exc))
    except MissingArtifactError as exc:
        return _fail("missing_artifact", str(exc))
    except (ValueError, KeyError) as exc:
        return _fail("invalid_input", str(exc))


if __name__ == "__main__":
    sys.exit(main())
