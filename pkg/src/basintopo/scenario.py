"""Scenario configs, the run pipeline and run reports.

A scenario is one JSON document::

    {
      "name": "circle",
      "system": "CIRCLE_R2",
      "grid": {"u": [-3, 3], "v": [-3, 3], "nx": 200, "ny": 200},
      "params": {"eps": 0.05, "T_max": 20, "h": 0.01, "tau": 1.0},
      "tubular": {"width": 0.3, "taper": null},
      "stages": ["basin", "tubular", "checks"],
      "checks": ["expected_topology", "gradient"],
      "expect": {"basin_betti": [1, 1], "tubular_betti": [1, 1], "verdict": "CONSISTENT"},
      "seed": 42,
      "out": "runs/circle"
    }

Grid bounds may be written as ``"pi"`` / ``"-pi"``.
"""

from __future__ import annotations

import copy
import json
import math
import os
import tempfile
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import flow
from .basin import (
    BasinGrid,
    GridSpec,
    Label,
    compute_basin,
    epsilon_delta_probe,
    estimate_uniform_T,
    sample_cylinder_z_above,
    sample_funnel_band,
)
from .cubetopo import (
    BettiProfile,
    EmptyComplexError,
    betti,
    build_complex,
    compare_profiles,
)
from .flow import CheckResult, IntegrationParams
from .geometry import InvalidWidthError, tubular_mask
from .systems import CATALOG, get_system

STAGES = ("basin", "tubular", "checks")
NOTE = ("note: equal Betti numbers are a necessary condition for homotopy "
        "equivalence; this tool does not certify homeomorphism")


class ScenarioError(ValueError):
    """Malformed or inconsistent scenario."""

    kind = "malformed_config"


class UnknownSystemError(ScenarioError):
    kind = "unknown_system"


class MissingArtifactError(FileNotFoundError):
    def __init__(self, stage, path):
        super().__init__(f"missing artifact for stage '{stage}': {path}")
        self.stage = stage


def _number(x):
    if isinstance(x, str):
        table = {"pi": math.pi, "-pi": -math.pi}
        if x.strip() not in table:
            raise ScenarioError(f"bad number {x!r}")
        return table[x.strip()]
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ScenarioError(f"bad number {x!r}")
    return float(x)


@dataclass
class Scenario:
    name: str
    system: str
    grid: GridSpec | None
    params: IntegrationParams
    tubular_width: float | None
    tubular_taper: float | None
    stages: tuple[str, ...]
    checks: tuple[str, ...]
    expect: dict
    check_options: dict
    seed: int
    out: str
    raw: dict = field(repr=False, default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        if not isinstance(d, dict):
            raise ScenarioError("scenario must be a JSON object")
        raw = copy.deepcopy(d)
        try:
            system = d["system"]
        except KeyError:
            raise ScenarioError("scenario needs a 'system'") from None
        if system not in CATALOG:
            raise UnknownSystemError(f"unknown system id {system!r}")
        stages = tuple(d.get("stages", STAGES))
        if any(s not in STAGES for s in stages):
            raise ScenarioError(f"stages must be drawn from {STAGES}")
        checks = tuple(d.get("checks", ()))
        unknown = [c for c in checks if c not in CHECKS]
        if unknown:
            raise ScenarioError(f"unknown check ids {unknown}")
        try:
            p = d.get("params", {})
            params = IntegrationParams(h=_number(p.get("h", 0.01)),
                                       T_max=_number(p.get("T_max", 20.0)),
                                       eps=_number(p.get("eps", 0.05)),
                                       tau=_number(p.get("tau", 1.0)))
            grid = None
            if "basin" in stages:
                g = d["grid"]
                grid = GridSpec(_number(g["u"][0]), _number(g["u"][1]),
                                _number(g["v"][0]), _number(g["v"][1]),
                                int(g["nx"]), int(g["ny"]))
            tub = d.get("tubular") or {}
            width = _number(tub["width"]) if tub.get("width") is not None else None
            taper = _number(tub["taper"]) if tub.get("taper") is not None else None
            if "tubular" in stages:
                if "basin" not in stages:
                    raise ScenarioError("tubular stage needs the basin stage")
                if width is None:
                    raise ScenarioError("tubular stage needs tubular.width")
                tubular_mask(get_system(system).attractor, get_system(system).chart,
                             width, taper)
            seed = int(d.get("seed", 42))
        except (KeyError, TypeError, IndexError) as exc:
            raise ScenarioError(f"malformed scenario: {exc!r}") from None
        except InvalidWidthError as exc:
            raise ScenarioError(str(exc)) from None
        except ValueError as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(str(exc)) from None
        return cls(str(d.get("name", system.lower())), system, grid, params, width, taper,
                   stages, checks, dict(d.get("expect", {})),
                   dict(d.get("check_options", {})), seed, str(d.get("out", "runs")), raw)

    @classmethod
    def load(cls, path_or_name: str) -> "Scenario":
        path = Path(path_or_name)
        if not path.exists():
            bundled = resources.files("basintopo") / "scenarios" / f"{path_or_name}.json"
            if bundled.is_file():
                return cls.from_dict(_parse_json(bundled.read_text()))
            raise ScenarioError(f"no such scenario file or bundled scenario: {path_or_name}")
        return cls.from_dict(_parse_json(path.read_text()))

    def echo(self) -> dict:
        d = copy.deepcopy(self.raw)
        d["seed"] = self.seed
        d["out"] = self.out
        return d


def _parse_json(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"config is not valid JSON: {exc}") from None


def bundled_scenarios() -> list[str]:
    root = resources.files("basintopo") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


# --- checks -----------------------------------------------------------------

@dataclass
class Context:
    scenario: Scenario
    threads: int = 1
    grid: BasinGrid | None = None
    basin_betti: BettiProfile | None = None
    tubular_betti: BettiProfile | None = None
    stability: dict = field(default_factory=dict)


def _opts(ctx, name):
    return ctx.scenario.check_options.get(name, {})


def _check_expected_topology(ctx: Context) -> CheckResult:
    exp = ctx.scenario.expect
    observed = {}
    ok = True
    if ctx.basin_betti is None:
        return CheckResult("expected_topology", math.nan, 0, False, "basin stage not run")
    observed["basin_betti"] = list(ctx.basin_betti.pair)
    if "basin_betti" in exp:
        ok &= list(exp["basin_betti"]) == observed["basin_betti"]
    if ctx.tubular_betti is not None:
        observed["tubular_betti"] = list(ctx.tubular_betti.pair)
        observed["verdict"] = str(compare_profiles(ctx.basin_betti, ctx.tubular_betti))
        if "tubular_betti" in exp:
            ok &= list(exp["tubular_betti"]) == observed["tubular_betti"]
        if "verdict" in exp:
            ok &= exp["verdict"] == observed["verdict"]
    elif "tubular_betti" in exp or "verdict" in exp:
        ok = False
    return CheckResult("expected_topology", 0.0 if ok else 1.0, 0, bool(ok),
                       json.dumps(observed, sort_keys=True))


def _check_seam(ctx: Context) -> CheckResult:
    g = ctx.grid
    if g is None or not g.chart.periodic:
        return CheckResult("seam_never_converged", math.nan, 0, False,
                           "needs a basin on a cylinder chart")
    us = g.spec.u_centers()
    seam = np.isclose(np.abs(us), np.pi, atol=1e-12, rtol=0)
    n = int(np.sum(g.labels[seam] == Label.CONVERGED))
    return CheckResult("seam_never_converged", float(n), 0, n == 0 and seam.any(),
                       f"{int(seam.sum())} seam column(s), {n} converged cells on it")


def _check_conjugacy(ctx):
    o = _opts(ctx, "conjugacy")
    return flow.verify_conjugacy(n_samples=o.get("n_samples", 200), tol=o.get("tol", 1e-6),
                                 h=o.get("h", 1e-3), seed=ctx.scenario.seed)


def _check_distance_inequality(ctx):
    o = _opts(ctx, "distance_inequality")
    return flow.check_distance_inequality(n_pairs=o.get("n_pairs", 1000),
                                          seed=ctx.scenario.seed)


def _check_gradient(ctx):
    return flow.check_gradient(seed=ctx.scenario.seed)


def _check_jacobian(ctx):
    return flow.check_jacobian(seed=ctx.scenario.seed)


def stationary_points(system_id: str) -> np.ndarray:
    if system_id in ("CIRCLE_R2", "PUNCTURED_R2"):
        a = np.linspace(-np.pi, np.pi, 12, endpoint=False)[1:]
        return np.stack([np.cos(a), np.sin(a)], axis=-1)
    pts = [(0.0, -float(k), -1.0) for k in range(6)]
    if system_id == "CYLINDER_M0":
        pts.append((0.0, -1.0, 1.0))
    return np.array(pts)


def _check_stationary(ctx):
    o = _opts(ctx, "stationary")
    sys = get_system(ctx.scenario.system)
    return flow.check_stationary(sys, stationary_points(sys.id), T=o.get("T", 50.0),
                                 h=o.get("h", 0.01))


def _check_uniform_T_m0(ctx):
    o = _opts(ctx, "uniform_T_m0")
    eps = o.get("eps", 0.1)
    rep = estimate_uniform_T(
        "CYLINDER_M0", sample_cylinder_z_above(o.get("a", -0.9)), eps,
        o.get("n_samples", 500), IntegrationParams(o.get("h", 0.01), o.get("T_max", 60.0),
                                                   eps, o.get("tau", 1.0)),
        seed=ctx.scenario.seed, threads=ctx.threads)
    ctx.stability["uniform_T_m0"] = rep.to_dict()
    return CheckResult("uniform_T_m0", rep.T_eps_hat, math.inf,
                       rep.uniform and math.isfinite(rep.T_eps_hat),
                       f"fraction_converged={rep.fraction_converged:g}")


def _check_uniform_T_funnel(ctx):
    o = _opts(ctx, "uniform_T_funnel")
    eps = o.get("eps", 0.5)
    bound = flow.uniform_bound_funnel(eps)
    rep = estimate_uniform_T(
        "FUNNEL_M", sample_funnel_band(*o.get("band", (1.0, 3.0))), eps,
        o.get("n_samples", 500), IntegrationParams(o.get("h", 0.02), o.get("T_max", 150.0),
                                                   eps, o.get("tau", 1.0)),
        seed=ctx.scenario.seed, threads=ctx.threads)
    d = rep.to_dict()
    d["analytic_bound"] = bound
    ctx.stability["uniform_T_funnel"] = d
    return CheckResult("uniform_T_funnel", rep.T_eps_hat, bound,
                       rep.uniform and rep.T_eps_hat <= bound,
                       f"fraction_converged={rep.fraction_converged:g}, bound={bound:.4f}")


def _check_epsilon_delta(ctx):
    o = _opts(ctx, "epsilon_delta")
    eps_list = o.get("eps_list", [0.5, 0.3, 0.1])
    table = epsilon_delta_probe(ctx.scenario.system, eps_list, T_max=o.get("T_max", 20.0),
                                h=o.get("h", 0.01), seed=ctx.scenario.seed)
    ctx.stability["epsilon_delta"] = table.to_dict()
    worst = min(d for _, d in table.rows)
    ok = all(0 < d <= e for e, d in table.rows)
    return CheckResult("epsilon_delta", worst, 0.0, ok,
                       ", ".join(f"eps={e:g}: delta={d:.4g}" for e, d in table.rows))


# check id -> (needs basin, function, claim)
CHECKS = {
    "expected_topology": (True, _check_expected_topology,
                          "basin and collar Betti numbers match the expected profiles"),
    "seam_never_converged": (True, _check_seam,
                             "the seam fibre theta = pi never enters the basin"),
    "conjugacy": (False, _check_conjugacy,
                  "h intertwines the cylinder and funnel flows"),
    "distance_inequality": (False, _check_distance_inequality,
                            "funnel fibre distance after h never exceeds cylinder distance"),
    "gradient": (False, _check_gradient,
                 "planar field is minus the gradient of squared circle distance"),
    "jacobian": (False, _check_jacobian,
                 "analytic Jacobian of h matches central differences"),
    "stationary": (False, _check_stationary,
                   "listed equilibria do not move"),
    "uniform_T_m0": (False, _check_uniform_T_m0,
                     "cylinder seeds with z > a all reach eps within one common time"),
    "uniform_T_funnel": (False, _check_uniform_T_funnel,
                         "funnel seeds with y > 1 converge within the analytic time bound"),
    "epsilon_delta": (False, _check_epsilon_delta,
                      "attractor is Lyapunov stable: every tested eps has a delta > 0"),
}


# --- pipeline ---------------------------------------------------------------

def atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


@dataclass
class RunReport:
    scenario: dict
    basin_betti: BettiProfile | None
    tubular_betti: BettiProfile | None
    verdict: str | None
    stability: dict
    checks: dict
    timings: dict

    @property
    def all_passed(self) -> bool:
        return all(c["passed"] for c in self.checks.values())


def _check_dict(r: CheckResult, claim: str) -> dict:
    def num(x):
        return None if not math.isfinite(x) else float(x)
    return {"claim": claim, "value": num(r.value), "tol": num(r.tol),
            "passed": bool(r.passed), "detail": r.detail}


def tubular_keep(grid: BasinGrid, width: float, taper: float | None):
    sys = get_system(grid.system_id)
    pred = tubular_mask(sys.attractor, sys.chart, width, taper)
    U, V = grid.spec.centers()
    return pred(U, V) & (grid.labels != Label.OUT)


def run_scenario(scn: Scenario, out: str | Path | None = None, threads: int = 1,
                 only_checks: bool = False) -> RunReport:
    """Execute the scenario's stages and write every artifact into ``out``."""
    out = Path(out or scn.out)
    ctx = Context(scn, threads)
    timings: dict[str, float] = {}
    stages = [s for s in scn.stages if not (only_checks and s != "checks")]
    atomic_write(out / "scenario.json", _dump({**scn.echo(), "stages": stages}))

    if "basin" in stages:
        t0 = time.perf_counter()
        ctx.grid = compute_basin(scn.system, scn.grid, scn.params, threads)
        timings["basin"] = time.perf_counter() - t0
        atomic_write(out / "basin.csv", ctx.grid.to_csv())
        t0 = time.perf_counter()
        try:
            ctx.basin_betti = betti(build_complex(ctx.grid))
        except EmptyComplexError:
            raise EmptyComplexError("basin complex is empty: no CONVERGED cells") from None
        timings["topology"] = time.perf_counter() - t0
        atomic_write(out / "basin_betti.json", _dump(ctx.basin_betti.to_dict()))

    if "tubular" in stages:
        t0 = time.perf_counter()
        keep = tubular_keep(ctx.grid, scn.tubular_width, scn.tubular_taper)
        ctx.tubular_betti = betti(build_complex(ctx.grid, keep))
        timings["tubular"] = time.perf_counter() - t0
        atomic_write(out / "tubular_betti.json", _dump(ctx.tubular_betti.to_dict()))

    checks = {}
    if "checks" in stages:
        t0 = time.perf_counter()
        for cid in scn.checks:
            needs_basin, fn, claim = CHECKS[cid]
            if needs_basin and only_checks:
                continue
            checks[cid] = _check_dict(fn(ctx), claim)
        timings["checks"] = time.perf_counter() - t0
        atomic_write(out / "checks.json", _dump({"checks": checks, "stability": ctx.stability}))

    verdict = None
    if ctx.basin_betti is not None and ctx.tubular_betti is not None:
        verdict = str(compare_profiles(ctx.basin_betti, ctx.tubular_betti))
    atomic_write(out / "timings.json", _dump(timings))
    rr = RunReport(scn.echo(), ctx.basin_betti, ctx.tubular_betti, verdict,
                   ctx.stability, checks, timings)
    report(out)
    return rr


# --- reporting --------------------------------------------------------------

def _read_json(path: Path, stage: str):
    if not path.is_file():
        raise MissingArtifactError(stage, path)
    return json.loads(path.read_text())


def report(run_dir: str | Path) -> tuple[str, dict]:
    """Build ``summary.txt`` and ``report.json`` from a run directory.

    Both outputs are deterministic for a given set of artifacts. Wall-clock
    numbers stay in ``timings.json``; the report records only which stages ran.
    """
    run_dir = Path(run_dir)
    scn = _read_json(run_dir / "scenario.json", "scenario")
    stages = scn.get("stages", list(STAGES))
    basin = tub = None
    checks: dict = {}
    stability: dict = {}
    if "basin" in stages:
        if not (run_dir / "basin.csv").is_file():
            raise MissingArtifactError("basin", run_dir / "basin.csv")
        basin = BettiProfile.from_dict(_read_json(run_dir / "basin_betti.json", "basin"))
    if "tubular" in stages:
        tub = BettiProfile.from_dict(_read_json(run_dir / "tubular_betti.json", "tubular"))
    if "checks" in stages:
        c = _read_json(run_dir / "checks.json", "checks")
        checks, stability = c["checks"], c.get("stability", {})
    verdict = str(compare_profiles(basin, tub)) if basin and tub else None

    doc = {
        "system": scn["system"],
        "basin_betti": basin.to_dict() if basin else None,
        "tubular_betti": tub.to_dict() if tub else None,
        "verdict": verdict,
        "checks": checks,
        "timings": {"stages": stages, "wall_clock": "timings.json"},
    }
    if stability:
        doc["stability"] = stability

    lines = [f"scenario: {scn.get('name', scn['system'])}", f"system: {scn['system']}"]
    if basin:
        lines.append(f"basin betti (b0, b1): ({basin.b0}, {basin.b1})  "
                     f"chi={basin.chi} V={basin.V} E={basin.E} F={basin.F}")
    if tub:
        lines.append(f"tubular betti (b0, b1): ({tub.b0}, {tub.b1})  "
                     f"chi={tub.chi} V={tub.V} E={tub.E} F={tub.F}")
    if verdict:
        lines.append(f"verdict: {verdict}")
        lines.append(NOTE)
    lines.append("checks:")
    for cid, c in checks.items():
        status = "PASS" if c["passed"] else "FAIL"
        lines.append(f"  [{status}] {cid}: {c['claim']}")
        lines.append(f"         observed={c['value']!r} tol={c['tol']!r} {c['detail']}")
    if not checks:
        lines.append("  (none)")
    text = "\n".join(lines) + "\n"
    atomic_write(run_dir / "summary.txt", text)
    atomic_write(run_dir / "report.json", _dump(doc))
    return text, doc
