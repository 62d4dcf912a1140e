"""Vector fields, the cylinder-to-funnel conjugacy and the system catalog.

Four systems are available by id:

``CIRCLE_R2``
    Negative gradient of the squared distance to the unit circle in R^2.
``PUNCTURED_R2``
    The same field restricted to R^2 minus (1, 0); the attractor is the
    circle with that point removed.
``CYLINDER_M0``
    Unit cylinder ``x^2 + z^2 = 1`` with field ``(-xz, g(y), x^2)`` where
    ``g(y) = exp(-1/y)`` for ``y > 0`` and 0 otherwise.
``FUNNEL_M``
    Funnel ``x^2 + z^2 = r(y)`` carrying the pushforward of the cylinder field
    under ``h(x, y, z) = (sqrt(r) x, y, sqrt(r) z)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import (
    AttractorDesc,
    Chart,
    DomainError,
    attractor_distance,
    drift,
    radius,
    radius_prime,
)

ON_MANIFOLD_TOL = 1e-9

M0_CHART_WINDOW = ((-np.pi, np.pi), (-6.0, 1200.0))
PLANAR_WINDOW = ((-4.0, 4.0), (-4.0, 4.0))


def _check(p, residual, what):
    if np.any(np.abs(residual) > ON_MANIFOLD_TOL):
        raise DomainError(f"point not on {what}")


def _m0_residual(p):
    return p[..., 0] ** 2 + p[..., 2] ** 2 - 1.0


def _m_residual(p):
    return p[..., 0] ** 2 + p[..., 2] ** 2 - radius(p[..., 1])


# --- raw fields (no manifold check; valid on an ambient neighbourhood) -------

def _field_m0(p):
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    return np.stack([-x * z, drift(y), x * x], axis=-1)


def _h(p):
    s = np.sqrt(radius(p[..., 1]))
    return np.stack([s * p[..., 0], p[..., 1], s * p[..., 2]], axis=-1)


def _h_inv(p):
    s = np.sqrt(radius(p[..., 1]))
    return np.stack([p[..., 0] / s, p[..., 1], p[..., 2] / s], axis=-1)


def _dh_apply(q, v):
    x, y, z = q[..., 0], q[..., 1], q[..., 2]
    r = radius(y)
    s = np.sqrt(r)
    k = radius_prime(y) / (2.0 * s)
    vx, vy, vz = v[..., 0], v[..., 1], v[..., 2]
    return np.stack([s * vx + x * k * vy, vy, s * vz + z * k * vy], axis=-1)


def _field_m(p):
    q = _h_inv(p)
    return _dh_apply(q, _field_m0(q))


def _field_circle(p):
    n = np.hypot(p[..., 0], p[..., 1])
    safe = np.where(n > 0, n, 1.0)
    coef = np.where(n > 0, -2.0 * (n - 1.0) / safe, 0.0)
    return p * coef[..., None]


# --- public, validated operations -------------------------------------------

def vf_cylinder_M0(p):
    """Cylinder field ``(-xz, g(y), x^2)``; ``p`` must lie on ``x^2 + z^2 = 1``."""
    p = np.asarray(p, dtype=float)
    _check(p, _m0_residual(p), "the unit cylinder")
    return _field_m0(p)


def conjugacy_h(p):
    """Map the unit cylinder onto the funnel, fibre by fibre."""
    p = np.asarray(p, dtype=float)
    _check(p, _m0_residual(p), "the unit cylinder")
    return _h(p)


def conjugacy_h_inv(p):
    p = np.asarray(p, dtype=float)
    _check(p, _m_residual(p), "the funnel")
    return _h_inv(p)


def dh_apply(q, v):
    """Analytic Jacobian of ``h`` at cylinder point ``q`` applied to ``v``."""
    q = np.asarray(q, dtype=float)
    return _dh_apply(q, np.asarray(v, dtype=float))


def vf_funnel_M(p):
    """Pushforward field ``Dh(h^-1 p) X0(h^-1 p)``; ``p`` must lie on the funnel."""
    p = np.asarray(p, dtype=float)
    _check(p, _m_residual(p), "the funnel")
    return _field_m(p)


def vf_circle_gradient(p):
    """``-grad dist(p, S^1)^2 = -2(|p| - 1) p/|p|``, set to zero at the origin."""
    return _field_circle(np.asarray(p, dtype=float))


def reduced_circle_field(q):
    """Fibre dynamics ``(x, z) -> (-xz, x^2)`` on the unit circle."""
    q = np.asarray(q, dtype=float)
    x, z = q[..., 0], q[..., 1]
    if np.any(np.abs(x * x + z * z - 1.0) > ON_MANIFOLD_TOL):
        raise DomainError("point not on the unit circle")
    return np.stack([-x * z, x * x], axis=-1)


@dataclass(frozen=True)
class SystemSpec:
    id: str
    chart: Chart
    attractor: AttractorDesc
    field: Callable[[np.ndarray], np.ndarray]
    bounding_box: tuple[tuple[float, float], tuple[float, float]]

    @property
    def dim(self) -> int:
        return self.chart.ambient_dim

    def distance(self, p):
        return attractor_distance(p, self.attractor)

    def attractor_points(self, v):
        """Attractor points parametrised by ``v`` (angle for planar, y for cylinders)."""
        v = np.asarray(v, dtype=float)
        if self.chart.kind == "planar":
            return np.stack([np.cos(v), np.sin(v)], axis=-1)
        rho = self.chart.rho(v)
        return np.stack([np.zeros_like(v), v, rho], axis=-1)


def _planar_chart():
    return Chart("planar", PLANAR_WINDOW[0], PLANAR_WINDOW[1])


CATALOG: dict[str, SystemSpec] = {
    "CIRCLE_R2": SystemSpec(
        "CIRCLE_R2", _planar_chart(),
        AttractorDesc("CIRCLE_R2", "circle"),
        _field_circle, PLANAR_WINDOW),
    "PUNCTURED_R2": SystemSpec(
        "PUNCTURED_R2", _planar_chart(),
        AttractorDesc("PUNCTURED_R2", "circle", ((1.0, 0.0),)),
        _field_circle, PLANAR_WINDOW),
    "CYLINDER_M0": SystemSpec(
        "CYLINDER_M0", Chart("cylinder", *M0_CHART_WINDOW, radius_profile="identity"),
        AttractorDesc("CYLINDER_M0", "cylinder_fiber"),
        _field_m0, M0_CHART_WINDOW),
    "FUNNEL_M": SystemSpec(
        "FUNNEL_M", Chart("cylinder", *M0_CHART_WINDOW, radius_profile="funnel"),
        AttractorDesc("FUNNEL_M", "funnel_fiber"),
        _field_m, M0_CHART_WINDOW),
}


def get_system(system_id: str) -> SystemSpec:
    try:
        return CATALOG[system_id]
    except KeyError:
        raise KeyError(f"unknown system id {system_id!r}; "
                       f"known: {', '.join(sorted(CATALOG))}") from None
