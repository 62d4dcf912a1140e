"""Fixed-step RK4 integration with per-step projection and event detection.

Everything runs on stacks of seeds at once: a sweep of ten thousand initial
conditions is a handful of numpy operations per step, and seeds that have
terminated are dropped from the working set as they finish.
"""

from __future__ import annotations

import csv
import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .geometry import DomainError, ambient_to_chart
from .systems import CATALOG, SystemSpec, _h, get_system


class NumericalBlowupError(ArithmeticError):
    """An integration step produced a non-finite state."""


class Event(enum.IntEnum):
    REACHED_EPS = 1
    TIMEOUT = 2
    LEFT_BOUNDS = 3
    BLOWUP = 4


@dataclass(frozen=True)
class IntegrationParams:
    h: float = 0.01
    T_max: float = 20.0
    eps: float = 0.05
    tau: float = 1.0
    project: bool = True

    def __post_init__(self):
        if not (self.h > 0 and self.T_max > 0 and self.eps > 0 and self.tau >= 0):
            raise ValueError("need h > 0, T_max > 0, eps > 0, tau >= 0")

    @property
    def n_steps(self) -> int:
        return int(round(self.T_max / self.h))

    @property
    def dwell_steps(self) -> int:
        return int(math.ceil(self.tau / self.h - 1e-9))


@dataclass
class Trajectory:
    system_id: str
    times: np.ndarray
    points: np.ndarray
    event: Event
    t_event: float

    @property
    def t_hit(self) -> float | None:
        return self.t_event if self.event == Event.REACHED_EPS else None

    def distances(self) -> np.ndarray:
        return get_system(self.system_id).distance(self.points)

    def to_csv(self, path):
        """Write rows ``t,x,y,z,dist``; ``z`` is empty for planar systems."""
        d = self.distances()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "x", "y", "z", "dist"])
            for t, p, di in zip(self.times, self.points, d):
                z = repr(float(p[2])) if p.shape[0] == 3 else ""
                w.writerow([repr(float(t)), repr(float(p[0])), repr(float(p[1])), z,
                            repr(float(di))])


@dataclass
class BatchResult:
    event: np.ndarray      # Event codes, one per seed
    t_event: np.ndarray    # hit time for REACHED_EPS, exit time otherwise
    final: np.ndarray
    n_blowup: int


def _rk4(f, p, h):
    k1 = f(p)
    k2 = f(p + 0.5 * h * k1)
    k3 = f(p + 0.5 * h * k2)
    k4 = f(p + h * k3)
    return p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _project(p, sys: SystemSpec):
    if sys.chart.kind == "planar":
        return p
    x, y, z = p[:, 0], p[:, 1], p[:, 2]
    n = np.hypot(x, z)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = sys.chart.rho(y) / n
    scale = np.where(n > 0, scale, np.nan)
    return np.stack([x * scale, y, z * scale], axis=-1)


def step(sys: SystemSpec, p, h: float, project: bool = True):
    """One RK4 step for a stack of states, followed by projection."""
    q = _rk4(sys.field, p, h)
    return _project(q, sys) if project else q


def _in_box(sys: SystemSpec, p):
    (u_lo, u_hi), (v_lo, v_hi) = sys.bounding_box
    u, v = ambient_to_chart(p, sys.chart)
    ok = (v >= v_lo) & (v <= v_hi)
    if not sys.chart.periodic:
        ok &= (u >= u_lo) & (u <= u_hi)
    return ok


def _resolve(sys: SystemSpec | str) -> SystemSpec:
    return get_system(sys) if isinstance(sys, str) else sys


def check_state(sys: SystemSpec, q0):
    q0 = np.asarray(q0, dtype=float)
    if q0.shape[-1] != sys.dim:
        raise DomainError(f"{sys.id} states have {sys.dim} coordinates")
    if np.any(np.abs(sys.chart.constraint(q0)) > 1e-9):
        raise DomainError("initial state off the manifold")
    for e in sys.attractor.excluded_points:
        if np.any(np.all(q0 == np.asarray(e), axis=-1)):
            raise DomainError("initial state is an excluded point")
    return q0


def _integrate_chunk(sys, Q0, params: IntegrationParams, record=False):
    n = Q0.shape[0]
    h = params.h
    event = np.full(n, Event.TIMEOUT, dtype=np.int8)
    t_event = np.full(n, params.T_max)
    final = Q0.copy()
    entry = np.full(n, -1, dtype=np.int64)
    dwell = params.dwell_steps
    n_blowup = 0
    idx = np.arange(n)
    p = Q0.copy()
    path = [(0.0, Q0[0].copy())] if record else None

    for k in range(params.n_steps + 1):
        if k > 0:
            p = step(sys, p, h, params.project)
            if record:
                path.append((k * h, p[0].copy()))
        finite = np.all(np.isfinite(p), axis=-1)
        blow = ~finite
        out = finite & ~_in_box(sys, np.where(finite[:, None], p, 0.0))
        with np.errstate(invalid="ignore"):
            inside = finite & (sys.distance(p) < params.eps)
        e = entry[idx]
        e = np.where(inside & (e < 0), k, e)
        e = np.where(inside, e, -1)
        entry[idx] = e
        reached = inside & ~out & (k - e >= dwell)
        done = blow | out | reached
        if np.any(done):
            di = idx[done]
            event[idx[blow]] = Event.BLOWUP
            n_blowup += int(blow.sum())
            event[idx[out]] = Event.LEFT_BOUNDS
            t_event[idx[blow | out]] = k * h
            event[idx[reached]] = Event.REACHED_EPS
            t_event[idx[reached]] = e[reached] * h
            final[di] = p[done]
            keep = ~done
            idx, p = idx[keep], p[keep]
            if idx.size == 0:
                break
    final[idx] = p
    return BatchResult(event, t_event, final, n_blowup), path


def _run_chunk(sys, Q0, params, record=False):
    with np.errstate(over="ignore", invalid="ignore"):
        return _integrate_chunk(sys, Q0, params, record)


def integrate_batch(sys: SystemSpec | str, Q0, params: IntegrationParams,
                    threads: int = 1) -> BatchResult:
    """Integrate many seeds; no per-seed validation, blow-ups are reported as events."""
    sys = _resolve(sys)
    Q0 = np.atleast_2d(np.asarray(Q0, dtype=float))
    if threads <= 1 or Q0.shape[0] < 2 * threads:
        return _run_chunk(sys, Q0, params)[0]
    chunks = np.array_split(Q0, threads)
    with ThreadPoolExecutor(threads) as ex:
        parts = [r for r, _ in ex.map(lambda c: _run_chunk(sys, c, params), chunks)]
    return BatchResult(
        np.concatenate([r.event for r in parts]),
        np.concatenate([r.t_event for r in parts]),
        np.concatenate([r.final for r in parts]),
        sum(r.n_blowup for r in parts))


def integrate(sys: SystemSpec | str, q0, params: IntegrationParams) -> Trajectory:
    """Integrate one seed and keep every sample.

    Terminates at the first sustained entry into the eps-neighbourhood (distance
    below eps for at least ``tau``; the reported time is the start of that
    window), at exit from the bounding box, or at ``T_max``.
    """
    sys = _resolve(sys)
    q0 = check_state(sys, q0)
    res, path = _run_chunk(sys, q0[None, :], params, record=True)
    ev = Event(res.event[0])
    if ev == Event.BLOWUP:
        raise NumericalBlowupError(f"non-finite state at t = {res.t_event[0]:g}")
    times = np.array([t for t, _ in path])
    pts = np.array([q for _, q in path])
    return Trajectory(sys.id, times, pts, ev, float(res.t_event[0]))


def time_to_epsilon(sys: SystemSpec | str, q0, eps: float,
                    params: IntegrationParams | None = None) -> float | None:
    params = params or IntegrationParams()
    params = IntegrationParams(params.h, params.T_max, eps, params.tau, params.project)
    return integrate(sys, q0, params).t_hit


def times_to_epsilon(sys: SystemSpec | str, Q0, eps: float, params: IntegrationParams,
                     threads: int = 1) -> np.ndarray:
    """Vector form of :func:`time_to_epsilon`; ``nan`` where absent."""
    params = IntegrationParams(params.h, params.T_max, eps, params.tau, params.project)
    res = integrate_batch(sys, Q0, params, threads)
    return np.where(res.event == Event.REACHED_EPS, res.t_event, np.nan)


def flow_states(sys: SystemSpec | str, Q0, times, h: float, project: bool = True):
    """States of every seed at each time in ``times`` (multiples of ``h``).

    Returns an array of shape ``(len(times), N, dim)``.
    """
    sys = _resolve(sys)
    Q0 = np.atleast_2d(np.asarray(Q0, dtype=float))
    ks = np.rint(np.asarray(times, dtype=float) / h).astype(int)
    if np.any(np.abs(ks * h - np.asarray(times)) > 1e-9):
        raise ValueError("times must be multiples of the step")
    out = np.empty((len(ks),) + Q0.shape)
    p = Q0.copy()
    for k in range(int(ks.max()) + 1 if len(ks) else 0):
        if k > 0:
            p = step(sys, p, h, project)
        for slot in np.flatnonzero(ks == k):
            out[slot] = p
    return out


def flow_each_to(sys: SystemSpec | str, Q0, steps, h: float):
    """Advance seed ``i`` by ``steps[i]`` RK4 steps."""
    sys = _resolve(sys)
    Q0 = np.atleast_2d(np.asarray(Q0, dtype=float))
    steps = np.asarray(steps, dtype=int)
    out = Q0.copy()
    p = Q0.copy()
    for k in range(1, int(steps.max(initial=0)) + 1):
        p = step(sys, p, h)
        hit = steps == k
        out[hit] = p[hit]
    return out


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    tol: float
    passed: bool
    detail: str = ""


def _sample_m0_above(rng, n, z_min, y_range):
    theta_max = math.acos(z_min)
    theta = rng.uniform(-theta_max, theta_max, n)
    y = rng.uniform(*y_range, n)
    return np.stack([np.sin(theta), y, np.cos(theta)], axis=-1)


def verify_conjugacy(n_samples: int = 200, t_grid=None, tol: float = 1e-6,
                     h: float = 1e-3, seed: int = 42,
                     y_range=(-4.0, 8.0)) -> CheckResult:
    """Max over samples and times of ``|h(phi0_t p) - phi_t(h p)|``.

    Seeds are drawn on the unit cylinder with ``z > -0.8``.
    """
    if t_grid is None:
        t_grid = np.arange(21) * 0.5
    t_grid = np.asarray(t_grid, dtype=float)
    if not tol > 0 or t_grid.min() < 0 or t_grid.max() > 10:
        raise ValueError("need tol > 0 and t_grid within [0, 10]")
    rng = np.random.default_rng(seed)
    p = _sample_m0_above(rng, n_samples, -0.8, y_range)
    m0, m = CATALOG["CYLINDER_M0"], CATALOG["FUNNEL_M"]
    left = _h(flow_states(m0, p, t_grid, h))
    right = flow_states(m, _h(p), t_grid, h)
    defect = float(np.max(np.linalg.norm(left - right, axis=-1)))
    return CheckResult("conjugacy", defect, tol, defect < tol,
                       f"{n_samples} seeds, {len(t_grid)} times, h={h:g}")


def check_distance_inequality(n_pairs: int = 1000, t_max: float = 10.0,
                              h: float = 1e-2, seed: int = 42,
                              y_range=(-4.0, 8.0), slack: float = 1e-9) -> CheckResult:
    """Fibre-arc distance after ``h`` never exceeds the cylinder distance.

    Returns the largest observed ``d_M(h(q), S) - d_M0(q, S0)`` over
    ``q = phi0_t(p)`` for random ``(p, t)`` pairs.
    """
    rng = np.random.default_rng(seed)
    theta = rng.uniform(-np.pi, np.pi, n_pairs)
    y = rng.uniform(*y_range, n_pairs)
    p = np.stack([np.sin(theta), y, np.cos(theta)], axis=-1)
    steps = rng.integers(0, int(round(t_max / h)) + 1, n_pairs)
    m0, m = CATALOG["CYLINDER_M0"], CATALOG["FUNNEL_M"]
    q = flow_each_to(m0, p, steps, h)
    gap = float(np.max(m.distance(_h(q)) - m0.distance(q)))
    return CheckResult("distance_inequality", gap, slack, gap <= slack,
                       f"{n_pairs} (p, t) pairs")


def check_stationary(sys: SystemSpec | str, points, T: float = 50.0, h: float = 0.01,
                     tol: float = 1e-10) -> CheckResult:
    """Largest displacement of any point over ``[0, T]``."""
    sys = _resolve(sys)
    p0 = check_state(sys, np.atleast_2d(points))
    p = p0.copy()
    drift = 0.0
    for _ in range(int(round(T / h))):
        p = step(sys, p, h)
        if not np.all(np.isfinite(p)):
            raise NumericalBlowupError("non-finite state in stationarity check")
        drift = max(drift, float(np.max(np.linalg.norm(p - p0, axis=-1))))
    return CheckResult(f"stationary[{sys.id}]", drift, tol, drift < tol,
                       f"{len(p0)} points, T={T:g}")


def check_gradient(n: int = 100, seed: int = 42, fd_step: float = 1e-6,
                   tol: float = 1e-6) -> CheckResult:
    """Planar field against central differences of ``-dist(p, S^1)^2``."""
    from .systems import vf_circle_gradient

    rng = np.random.default_rng(seed)
    rho = rng.uniform(0.2, 3.0, n)
    ang = rng.uniform(-np.pi, np.pi, n)
    p = np.stack([rho * np.cos(ang), rho * np.sin(ang)], axis=-1)

    def f(q):
        return (np.hypot(q[..., 0], q[..., 1]) - 1.0) ** 2

    fd = np.empty_like(p)
    for i in range(2):
        e = np.zeros(2)
        e[i] = fd_step
        fd[:, i] = -(f(p + e) - f(p - e)) / (2 * fd_step)
    an = vf_circle_gradient(p)
    scale = np.maximum(np.linalg.norm(an, axis=-1), 1e-3)
    err = float(np.max(np.linalg.norm(an - fd, axis=-1) / scale))
    return CheckResult("gradient", err, tol, err < tol, f"{n} points, rho in (0.2, 3)")


def check_jacobian(n: int = 100, seed: int = 42, fd_step: float = 1e-5,
                   tol: float = 1e-6, y_range=(-4.0, 8.0)) -> CheckResult:
    """Analytic ``Dh v`` against ``(h(q + s v) - h(q - s v)) / 2s``."""
    from .systems import dh_apply

    rng = np.random.default_rng(seed)
    theta = rng.uniform(-np.pi, np.pi, n)
    y = rng.uniform(*y_range, n)
    q = np.stack([np.sin(theta), y, np.cos(theta)], axis=-1)
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=-1, keepdims=True)
    fd = (_h(q + fd_step * v) - _h(q - fd_step * v)) / (2 * fd_step)
    err = float(np.max(np.linalg.norm(dh_apply(q, v) - fd, axis=-1)))
    return CheckResult("jacobian", err, tol, err < tol, f"{n} points, step {fd_step:g}")


def uniform_bound_funnel(eps: float) -> float:
    """Smallest T with ``r(T/e) <= (eps/pi)^2``: a sufficient uniform time on y > 1."""
    c = (eps / np.pi) ** 2
    if not 0 < c < 1:
        raise ValueError("eps must lie in (0, pi)")
    # r(y) = 1 - exp(-1/y) < c  <=>  y > 1/(-log(1 - c))
    return math.e / -math.log1p(-c)


__all__ = [
    "BatchResult", "CheckResult", "Event", "IntegrationParams", "NumericalBlowupError",
    "Trajectory", "check_distance_inequality", "check_gradient", "check_jacobian",
    "check_stationary", "flow_each_to", "flow_states", "integrate", "integrate_batch",
    "step", "time_to_epsilon", "times_to_epsilon", "uniform_bound_funnel",
    "verify_conjugacy",
]
