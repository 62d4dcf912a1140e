"""Charts, manifold projection, attractor distances and tubular masks.

Two chart kinds are supported:

* ``planar``: identity chart on a rectangle of R^2.
* ``cylinder``: (theta, y) coordinates on a surface of revolution
  ``x^2 + z^2 = rho(y)^2`` embedded in R^3, with ``x = rho sin(theta)`` and
  ``z = rho cos(theta)``. ``theta = 0`` is the attractor fibre point
  ``(0, y, rho(y))`` and the seam ``theta = +-pi`` is ``(0, y, -rho(y))``.

All functions accept a single point or a stack of points (last axis holds
the coordinates) and are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

TWO_PI = 2.0 * np.pi

# y below which e^{-1/y} is replaced by its limit 0 (true value < 1e-400)
Y_UNDERFLOW = 1e-3


class DomainError(ValueError):
    """Input lies outside the domain of an operation."""


class ProjectionError(DomainError):
    """Projection onto the manifold is undefined (x = z = 0)."""


class InvalidWidthError(ValueError):
    """Tubular width makes the collar self-intersect or is non-positive."""


def radius(y):
    """Squared fibre radius r(y) of the funnel: 1 - exp(-1/y) for y > 0, else 1."""
    y = np.asarray(y, dtype=float)
    out = np.ones_like(y)
    pos = y >= Y_UNDERFLOW
    out[pos] = -np.expm1(-1.0 / y[pos])
    return out[()] if out.ndim == 0 else out


def radius_prime(y):
    """Derivative of :func:`radius`: -exp(-1/y)/y^2 for y > 0, else 0."""
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    pos = y >= Y_UNDERFLOW
    yp = y[pos]
    out[pos] = -np.exp(-1.0 / yp) / (yp * yp)
    return out[()] if out.ndim == 0 else out


def drift(y):
    """Axial speed exp(-1/y) for y > 0, else 0."""
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    pos = y >= Y_UNDERFLOW
    out[pos] = np.exp(-1.0 / y[pos])
    return out[()] if out.ndim == 0 else out


_PROFILES: dict[str, Callable] = {
    "identity": lambda y: np.ones_like(np.asarray(y, dtype=float)),
    "funnel": lambda y: np.sqrt(radius(y)),
}


@dataclass(frozen=True)
class Chart:
    """Coordinate window on a state space.

    ``u_range``/``v_range`` are (lo, hi) pairs. For cylinder charts ``u`` is
    theta (periodic, window [-pi, pi]) and ``v`` is y. ``radius_profile`` is
    ``"identity"`` (unit cylinder), ``"funnel"`` (rho = sqrt(r)) or ``None``
    for planar charts.
    """

    kind: str
    u_range: tuple[float, float]
    v_range: tuple[float, float]
    radius_profile: str | None = None

    def __post_init__(self):
        if self.kind not in ("planar", "cylinder"):
            raise ValueError(f"unknown chart kind {self.kind!r}")
        if self.kind == "cylinder" and self.radius_profile not in _PROFILES:
            raise ValueError("cylinder chart needs radius_profile 'identity' or 'funnel'")
        if self.kind == "planar" and self.radius_profile is not None:
            raise ValueError("planar chart takes no radius profile")

    @property
    def periodic(self) -> bool:
        return self.kind == "cylinder"

    @property
    def ambient_dim(self) -> int:
        return 3 if self.kind == "cylinder" else 2

    def rho(self, y):
        return _PROFILES[self.radius_profile](y)

    def constraint(self, p):
        """Signed constraint residual; zero on the manifold."""
        p = np.asarray(p, dtype=float)
        if self.kind == "planar":
            return np.zeros(p.shape[:-1])
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        return x * x + z * z - self.rho(y) ** 2

    def constraint_grad(self, p):
        p = np.asarray(p, dtype=float)
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        if self.radius_profile == "identity":
            dy = np.zeros_like(y)
        else:
            dy = -radius_prime(y)
        return np.stack([2 * x, dy, 2 * z], axis=-1)

    def on_manifold(self, p, tol=1e-9) -> np.ndarray:
        return np.abs(self.constraint(p)) <= tol


def wrap_angle(theta):
    """Map angles into [-pi, pi)."""
    return np.mod(np.asarray(theta, dtype=float) + np.pi, TWO_PI) - np.pi


def _snapped_sincos(theta):
    # exact zeros on the attractor fibre and the seam keep those lines invariant
    s = np.sin(theta)
    c = np.cos(theta)
    s = np.where(np.abs(s) < 1e-15, 0.0, s)
    c = np.where(np.abs(c) < 1e-15, 0.0, c)
    return s, c


def chart_to_ambient(u, v, chart: Chart, check: bool = True):
    """Map chart coordinates to ambient points (shape ``(..., 2)`` or ``(..., 3)``)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if check:
        if chart.kind == "cylinder":
            bad_u = (u < -np.pi) | (u > np.pi)
        else:
            bad_u = (u < chart.u_range[0]) | (u > chart.u_range[1])
        bad_v = (v < chart.v_range[0]) | (v > chart.v_range[1])
        if np.any(bad_u | bad_v | ~np.isfinite(u) | ~np.isfinite(v)):
            raise DomainError("chart point outside window")
    if chart.kind == "planar":
        return np.stack(np.broadcast_arrays(u, v), axis=-1)
    s, c = _snapped_sincos(u)
    rho = chart.rho(v)
    x, y, z = np.broadcast_arrays(rho * s, v, rho * c)
    return np.stack([x, y, z], axis=-1)


def ambient_to_chart(p, chart: Chart):
    """Inverse of :func:`chart_to_ambient`; returns ``(u, v)``."""
    p = np.asarray(p, dtype=float)
    if chart.kind == "planar":
        return p[..., 0], p[..., 1]
    theta = np.arctan2(p[..., 0], p[..., 2])
    # arctan2 returns (-pi, pi]; keep the seam at -pi to match [-pi, pi)
    theta = np.where(theta == np.pi, -np.pi, theta)
    return theta, p[..., 1]


def project_to_manifold(p, chart: Chart):
    """Radially rescale ``(x, z)`` onto the fibre circle of radius rho(y)."""
    p = np.asarray(p, dtype=float)
    if chart.kind == "planar":
        return p.copy()
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    n = np.hypot(x, z)
    if np.any(n == 0.0):
        raise ProjectionError("projection undefined where x = z = 0")
    scale = chart.rho(y) / n
    return np.stack([x * scale, y, z * scale], axis=-1)


@dataclass(frozen=True)
class AttractorDesc:
    """Attractor of a system and the closed-form distance used against it.

    ``distance_fn_id`` is one of ``"circle"`` (ambient distance to the unit
    circle), ``"cylinder_fiber"`` (minor arc on the unit fibre, exact on the
    unit cylinder) or ``"funnel_fiber"`` (arc on the fibre of radius sqrt(r),
    an upper bound for the intrinsic distance).
    """

    system_id: str
    distance_fn_id: str
    excluded_points: tuple[tuple[float, ...], ...] = field(default_factory=tuple)


def attractor_distance(p, attractor: AttractorDesc):
    p = np.asarray(p, dtype=float)
    kind = attractor.distance_fn_id
    if kind == "circle":
        return np.abs(np.hypot(p[..., 0], p[..., 1]) - 1.0)
    theta = np.abs(np.arctan2(p[..., 0], p[..., 2]))
    if kind == "cylinder_fiber":
        return theta
    if kind == "funnel_fiber":
        return np.sqrt(radius(p[..., 1])) * theta
    raise ValueError(f"unknown distance function {kind!r}")


def tubular_mask(attractor: AttractorDesc, chart: Chart, width: float,
                 taper: float | None = None):
    """Return a predicate ``pred(u, v) -> bool array`` for the discretised collar.

    Cylinder charts give the strip ``|theta| < width``. Planar charts give the
    annulus ``1 - w < |p| < 1 + w``; with ``taper`` set (an angle in (0, pi))
    the half-width shrinks linearly to zero at the positive x-axis, which
    models a collar of the circle with (1, 0) removed.
    """
    if not width > 0:
        raise InvalidWidthError("width must be positive")
    if taper is not None and not 0 < taper < np.pi:
        raise InvalidWidthError("taper angle must lie in (0, pi)")

    if chart.kind == "cylinder":
        if width > np.pi:
            raise InvalidWidthError("strip wider than the fibre")

        def strip(u, v):
            u = np.asarray(u, dtype=float)
            return np.broadcast_to(np.abs(wrap_angle(u)) < width,
                                   np.broadcast_shapes(u.shape, np.shape(v))).copy()
        return strip

    if width >= 1.0:
        raise InvalidWidthError("planar collar must have width < 1")

    def collar(u, v):
        u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
        dev = np.abs(np.hypot(u, v) - 1.0)
        if taper is None:
            return dev < width
        alpha = np.abs(np.arctan2(v, u))
        return dev < width * np.minimum(1.0, alpha / taper)
    return collar
