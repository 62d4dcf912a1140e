"""Grid basins of attraction and empirical stability estimates."""

from __future__ import annotations

import enum
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .flow import Event, IntegrationParams, integrate_batch
from .geometry import Chart, ambient_to_chart, chart_to_ambient
from .systems import CATALOG, SystemSpec, get_system

log = logging.getLogger(__name__)


class Label(enum.IntEnum):
    OUT = 0
    CONVERGED = 1
    TIMEOUT = 2
    DIVERGED = 3


_EVENT_TO_LABEL = {
    Event.REACHED_EPS: Label.CONVERGED,
    Event.TIMEOUT: Label.TIMEOUT,
    Event.LEFT_BOUNDS: Label.DIVERGED,
    Event.BLOWUP: Label.DIVERGED,
}


@dataclass(frozen=True)
class GridSpec:
    """``nx`` x ``ny`` cells over ``[u_lo, u_hi] x [v_lo, v_hi]``.

    Cell ``(i, j)`` is centred at ``u_lo + i*du, v_lo + j*dv``: the lattice is
    shifted by half a cell against the window, so the window corner is a cell
    centre rather than a cell corner.
    """

    u_lo: float
    u_hi: float
    v_lo: float
    v_hi: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 8 or self.ny < 8:
            raise ValueError("need at least 8 cells per axis")
        if not (self.u_hi > self.u_lo and self.v_hi > self.v_lo):
            raise ValueError("empty grid window")

    @property
    def du(self) -> float:
        return (self.u_hi - self.u_lo) / self.nx

    @property
    def dv(self) -> float:
        return (self.v_hi - self.v_lo) / self.ny

    def u_centers(self) -> np.ndarray:
        i = np.arange(self.nx)
        # integer weights keep symmetric values (0, +-pi) exact
        return (self.u_lo * (self.nx - i) + self.u_hi * i) / self.nx

    def v_centers(self) -> np.ndarray:
        j = np.arange(self.ny)
        return (self.v_lo * (self.ny - j) + self.v_hi * j) / self.ny

    def centers(self):
        """Cell centres as ``(U, V)`` arrays of shape ``(nx, ny)``."""
        return np.meshgrid(self.u_centers(), self.v_centers(), indexing="ij")

    def to_dict(self) -> dict:
        return {"u": [self.u_lo, self.u_hi], "v": [self.v_lo, self.v_hi],
                "nx": self.nx, "ny": self.ny}

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(float(d["u"][0]), float(d["u"][1]), float(d["v"][0]),
                   float(d["v"][1]), int(d["nx"]), int(d["ny"]))


@dataclass
class BasinGrid:
    system_id: str
    chart: Chart
    spec: GridSpec
    labels: np.ndarray          # (nx, ny) Label codes
    t_conv: np.ndarray          # (nx, ny), nan unless CONVERGED
    params: IntegrationParams
    n_blowup: int = 0

    @property
    def nx(self) -> int:
        return self.labels.shape[0]

    @property
    def ny(self) -> int:
        return self.labels.shape[1]

    @property
    def origin_offset(self) -> tuple[float, float]:
        return (-0.5 * self.spec.du, -0.5 * self.spec.dv)

    def count(self, label: Label) -> int:
        return int(np.sum(self.labels == label))

    def mask(self, label: Label) -> np.ndarray:
        return self.labels == label

    def to_csv(self) -> str:
        """Serialise: header comments (keys, then values) and ``i,j,u,v,label,t_conv`` rows."""
        p = self.params
        buf = io.StringIO()
        buf.write("# system,chart,nx,ny,eps,Tmax,h,tau\n")
        buf.write(f"# {self.system_id},{self.chart.kind},{self.nx},{self.ny},"
                  f"{p.eps!r},{p.T_max!r},{p.h!r},{p.tau!r}\n")
        us, vs = self.spec.u_centers(), self.spec.v_centers()
        for i in range(self.nx):
            for j in range(self.ny):
                lab = Label(self.labels[i, j])
                t = repr(float(self.t_conv[i, j])) if lab == Label.CONVERGED else ""
                buf.write(f"{i},{j},{float(us[i])!r},{float(vs[j])!r},{lab.name},{t}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "BasinGrid":
        lines = text.splitlines()
        if len(lines) < 2 or not lines[0].startswith("#") or not lines[1].startswith("#"):
            raise ValueError("missing basin CSV header")
        keys = [k.strip() for k in lines[0][1:].split(",")]
        vals = [v.strip() for v in lines[1][1:].split(",")]
        if keys != ["system", "chart", "nx", "ny", "eps", "Tmax", "h", "tau"] or len(vals) != 8:
            raise ValueError("malformed basin CSV header")
        meta = dict(zip(keys, vals))
        nx, ny = int(meta["nx"]), int(meta["ny"])
        labels = np.full((nx, ny), -1, dtype=np.int8)
        t_conv = np.full((nx, ny), np.nan)
        us = np.full(nx, np.nan)
        vs = np.full(ny, np.nan)
        for row in lines[2:]:
            if not row.strip():
                continue
            i, j, u, v, lab, t = row.split(",")
            i, j = int(i), int(j)
            labels[i, j] = Label[lab]
            us[i], vs[j] = float(u), float(v)
            if t:
                t_conv[i, j] = float(t)
        if np.any(labels < 0):
            raise ValueError("basin CSV does not cover every cell")
        sys = get_system(meta["system"])
        u_hi, v_hi = _recover_hi(us), _recover_hi(vs)
        spec = GridSpec(us[0], u_hi, vs[0], v_hi, nx, ny)
        params = IntegrationParams(float(meta["h"]), float(meta["Tmax"]),
                                   float(meta["eps"]), float(meta["tau"]))
        return cls(sys.id, sys.chart, spec, labels, t_conv, params)


def _recover_hi(centers: np.ndarray) -> float:
    """Upper bound whose cell centres reproduce ``centers`` bit for bit if one exists nearby."""
    n = centers.size
    lo = centers[0]
    guess = (n * centers[-1] - lo) / (n - 1)
    i = np.arange(n)
    cand = guess
    for _ in range(16):
        if np.array_equal((lo * (n - i) + cand * i) / n, centers):
            return float(cand)
        cand = np.nextafter(cand, np.inf)
    cand = guess
    for _ in range(16):
        cand = np.nextafter(cand, -np.inf)
        if np.array_equal((lo * (n - i) + cand * i) / n, centers):
            return float(cand)
    return float(guess)


def out_cells(sys: SystemSpec, spec: GridSpec) -> np.ndarray:
    """Cells whose closed extent holds an excluded point or leaves the chart window."""
    us, vs = spec.u_centers(), spec.v_centers()
    hu, hv = 0.5 * spec.du, 0.5 * spec.dv
    out = np.zeros((spec.nx, spec.ny), dtype=bool)
    (cu_lo, cu_hi), (cv_lo, cv_hi) = sys.chart.u_range, sys.chart.v_range
    if not sys.chart.periodic:
        out |= ((us - hu < cu_lo) | (us + hu > cu_hi))[:, None]
    out |= ((vs - hv < cv_lo) | (vs + hv > cv_hi))[None, :]
    for pt in sys.attractor.excluded_points:
        if sys.chart.kind == "planar":
            pu, pv = pt
        else:
            pu, pv = ambient_to_chart(np.asarray(pt, dtype=float), sys.chart)
        du = np.abs(us - pu)
        if sys.chart.periodic:
            du = np.minimum(du, 2 * np.pi - du)
        out |= np.outer(du <= hu, np.abs(vs - pv) <= hv)
    return out


def compute_basin(sys: SystemSpec | str, spec: GridSpec, params: IntegrationParams,
                  threads: int = 1) -> BasinGrid:
    """Seed every non-OUT cell at its centre and label it by the terminal event."""
    if isinstance(sys, str):
        sys = get_system(sys)
    if sys.chart.periodic:
        if spec.u_lo < -np.pi - 1e-12 or spec.u_hi > np.pi + 1e-12:
            raise ValueError("theta window must lie within [-pi, pi]")
    U, V = spec.centers()
    out = out_cells(sys, spec)
    labels = np.full((spec.nx, spec.ny), Label.OUT, dtype=np.int8)
    t_conv = np.full((spec.nx, spec.ny), np.nan)
    seeds = chart_to_ambient(U[~out], V[~out], sys.chart, check=False)
    res = integrate_batch(sys, seeds, params, threads)
    lab = np.array([_EVENT_TO_LABEL[Event(e)] for e in range(1, 5)], dtype=np.int8)
    labels[~out] = lab[res.event.astype(int) - 1]
    tc = np.where(res.event == Event.REACHED_EPS, res.t_event, np.nan)
    t_conv[~out] = tc
    if res.n_blowup:
        log.warning("%d seeds blew up and were labelled DIVERGED", res.n_blowup)
    return BasinGrid(sys.id, sys.chart, spec, labels, t_conv, params, res.n_blowup)


# --- samplers ---------------------------------------------------------------

Sampler = Callable[[np.random.Generator, int], np.ndarray]


def sample_cylinder_z_above(a: float, y_range=(-4.0, 8.0)) -> Sampler:
    """Unit-cylinder points with ``z > a`` and ``y`` uniform in ``y_range``."""
    if not -1.0 < a < 1.0:
        raise ValueError("need -1 < a < 1")
    theta_max = math.acos(a)

    def draw(rng, n):
        theta = rng.uniform(-theta_max, theta_max, n)
        y = rng.uniform(*y_range, n)
        return chart_to_ambient(theta, y, CATALOG["CYLINDER_M0"].chart, check=False)
    draw.description = f"unit cylinder, z > {a:g}, y in [{y_range[0]:g}, {y_range[1]:g}]"
    return draw


def sample_funnel_band(y_lo: float, y_hi: float) -> Sampler:
    """Funnel points with ``y`` in ``(y_lo, y_hi)`` and any fibre angle."""
    def draw(rng, n):
        theta = rng.uniform(-np.pi, np.pi, n)
        y = rng.uniform(y_lo, y_hi, n)
        return chart_to_ambient(theta, y, CATALOG["FUNNEL_M"].chart, check=False)
    draw.description = f"funnel, y in ({y_lo:g}, {y_hi:g})"
    return draw


def sample_on_attractor(sys: SystemSpec, v_range=(-4.0, 8.0)) -> Sampler:
    def draw(rng, n):
        if sys.chart.kind == "planar":
            v = rng.uniform(-np.pi, np.pi, n)
        else:
            v = rng.uniform(*v_range, n)
        return sys.attractor_points(v)
    draw.description = f"attractor of {sys.id}"
    return draw


def sample_within(sys: SystemSpec, delta: float, rng: np.random.Generator, n: int,
                  v_range=(-4.0, 8.0)) -> np.ndarray:
    """Points at attractor distance below ``delta``, including near-boundary ones."""
    frac = rng.uniform(-1.0, 1.0, n)
    # pin a few seeds just inside the boundary of the delta-neighbourhood
    m = min(n, 8)
    frac[:m] = np.where(np.arange(m) % 2 == 0, 1.0, -1.0) * (1.0 - 1e-9)
    if sys.chart.kind == "planar":
        ang = rng.uniform(-np.pi, np.pi, n)
        rr = np.maximum(1.0 + frac * delta, 0.0)
        pts = np.stack([rr * np.cos(ang), rr * np.sin(ang)], axis=-1)
        (u_lo, u_hi), (v_lo, v_hi) = sys.bounding_box
        ok = (pts[:, 0] > u_lo) & (pts[:, 0] < u_hi) & (pts[:, 1] > v_lo) & (pts[:, 1] < v_hi)
        for e in sys.attractor.excluded_points:
            ok &= np.any(pts != np.asarray(e), axis=-1)
        return pts[ok]
    y = rng.uniform(*v_range, n)
    rho = sys.chart.rho(y)
    theta = frac * np.minimum(np.pi, delta / rho)
    return chart_to_ambient(theta, y, sys.chart, check=False)


# --- reports ----------------------------------------------------------------

@dataclass(frozen=True)
class StabilityReport:
    region: str
    eps: float
    n_samples: int
    T_eps_hat: float
    fraction_converged: float

    @property
    def uniform(self) -> bool:
        return self.fraction_converged == 1.0

    def to_dict(self) -> dict:
        return {"region": self.region, "eps": self.eps, "n_samples": self.n_samples,
                "T_eps_hat": self.T_eps_hat if math.isfinite(self.T_eps_hat) else None,
                "fraction_converged": self.fraction_converged, "uniform": self.uniform}


def estimate_uniform_T(sys: SystemSpec | str, sampler: Sampler, eps: float,
                       n_samples: int, params: IntegrationParams,
                       seed: int = 42, threads: int = 1, samples=None) -> StabilityReport:
    """Largest sustained-entry time over sampled seeds.

    ``T_eps_hat`` is infinite unless every seed converges within ``T_max``.
    Pass ``samples`` to reuse a fixed sample set.
    """
    if isinstance(sys, str):
        sys = get_system(sys)
    if n_samples < 100:
        raise ValueError("need at least 100 samples")
    if samples is None:
        samples = sampler(np.random.default_rng(seed), n_samples)
    p = IntegrationParams(params.h, params.T_max, eps, params.tau, params.project)
    res = integrate_batch(sys, samples, p, threads)
    hit = res.event == Event.REACHED_EPS
    frac = float(hit.mean())
    T = float(res.t_event[hit].max(initial=0.0)) if hit.all() else math.inf
    return StabilityReport(getattr(sampler, "description", "custom sampler"), eps,
                           len(samples), T, frac)


@dataclass(frozen=True)
class EpsDeltaTable:
    system_id: str
    rows: tuple[tuple[float, float], ...]     # (eps, delta_hat)
    ladder: tuple[float, ...] = field(repr=False, default=())

    def to_dict(self) -> dict:
        return {"system": self.system_id,
                "rows": [{"eps": e, "delta_hat": d} for e, d in self.rows]}


def default_ladder(sys: SystemSpec, levels: int = 40, ratio: float = 2 ** -0.25):
    """Geometric ladder starting at the largest distance reachable in the chart."""
    if sys.chart.kind == "planar":
        (u_lo, u_hi), (v_lo, v_hi) = sys.bounding_box
        top = math.hypot(max(-u_lo, u_hi), max(-v_lo, v_hi)) - 1.0
    else:
        top = math.pi
    return tuple(top * ratio ** k for k in range(levels))


def epsilon_delta_probe(sys: SystemSpec | str, eps_list, T_max: float = 20.0,
                        h: float = 0.01, n_per_level: int = 64, ladder=None,
                        seed: int = 42, v_range=(-4.0, 8.0)) -> EpsDeltaTable:
    """For each eps, the largest ladder delta whose seeds stay eps-close up to ``T_max``.

    Seeds are drawn per ladder level inside that level's delta-neighbourhood;
    the check for a given delta uses every drawn seed with initial distance
    below delta. ``delta_hat = 0`` when no ladder value works.
    """
    from .flow import step

    if isinstance(sys, str):
        sys = get_system(sys)
    eps_list = [float(e) for e in eps_list]
    if any(e <= 0 for e in eps_list) or any(a <= b for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be positive and decreasing")
    ladder = tuple(sorted(ladder or default_ladder(sys), reverse=True))
    rng = np.random.default_rng(seed)
    seeds = np.concatenate([sample_within(sys, d, rng, n_per_level, v_range) for d in ladder])
    d0 = sys.distance(seeds)
    dmax = d0.copy()
    p = seeds
    for _ in range(int(round(T_max / h))):
        p = step(sys, p, h)
        with np.errstate(invalid="ignore"):
            dmax = np.fmax(dmax, sys.distance(p))
    rows = []
    for eps in eps_list:
        best = 0.0
        for d in ladder:
            sel = d0 < d
            if sel.any() and np.all(dmax[sel] < eps):
                best = d
                break
        rows.append((eps, best))
    return EpsDeltaTable(sys.id, tuple(rows), ladder)
