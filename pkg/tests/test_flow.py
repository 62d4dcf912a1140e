import dataclasses
import math

import numpy as np
import pytest
from scipy.integrate import quad

from basintopo.flow import (
    Event,
    IntegrationParams,
    NumericalBlowupError,
    check_distance_inequality,
    check_stationary,
    integrate,
    integrate_batch,
    time_to_epsilon,
    verify_conjugacy,
)
from basintopo.geometry import DomainError, chart_to_ambient
from basintopo.systems import CATALOG

M0 = CATALOG["CYLINDER_M0"]
M = CATALOG["FUNNEL_M"]
CIRCLE = CATALOG["CIRCLE_R2"]
PUNCT = CATALOG["PUNCTURED_R2"]


def test_params_validation():
    with pytest.raises(ValueError):
        IntegrationParams(h=0.0)
    with pytest.raises(ValueError):
        IntegrationParams(tau=-1.0)
    assert IntegrationParams(h=0.02, tau=1.0).dwell_steps == 50


def test_equilibrium_on_attractor_is_constant():
    tr = integrate(M0, [0.0, -1.0, 1.0], IntegrationParams(0.01, 5.0, 0.1, 0.0))
    assert tr.event == Event.REACHED_EPS and tr.t_hit == 0.0
    tr = integrate(M0, [0.0, -1.0, 1.0], IntegrationParams(0.01, 5.0, 0.1, 10.0))
    assert tr.event == Event.TIMEOUT
    assert np.all(tr.points == np.array([0.0, -1.0, 1.0]))


def test_circle_hit_time_matches_radial_solution():
    # |p(t)| = 1 + exp(-2t) from |p| = 2, so |p| - 1 < 0.05 first at ln(20)/2
    exact = math.log(20.0) / 2
    tr = integrate(CIRCLE, [2.0, 0.0], IntegrationParams(0.01, 20.0, 0.05, 1.0))
    assert tr.event == Event.REACHED_EPS
    assert abs(tr.t_hit - exact) < 0.1 * exact
    assert abs(tr.t_hit - exact) <= 0.01 + 1e-12
    assert tr.times[-1] == pytest.approx(tr.t_hit + 1.0)


def test_seam_line_drifts_but_never_converges():
    tr = integrate(M0, [0.0, 1.0, -1.0], IntegrationParams(0.02, 30.0, 0.5, 1.0))
    assert tr.event == Event.TIMEOUT
    assert np.all(tr.points[:, 0] == 0.0) and np.all(tr.points[:, 2] == -1.0)
    y = tr.points[:, 1]
    assert np.all(np.diff(y) > 0) and np.all(np.diff(y, 2) > 0)
    np.testing.assert_allclose(tr.distances(), np.pi)


def test_time_to_epsilon_on_attractor_is_zero():
    assert time_to_epsilon(M, [0.0, 2.0, math.sqrt(1 - math.exp(-0.5))], 0.1) == 0.0


def test_time_to_epsilon_absent_off_basin():
    p = IntegrationParams(0.02, 60.0, 0.5, 1.0)
    assert time_to_epsilon(M0, [0.0, 1.0, -1.0], 0.5, p) is None


def test_funnel_seam_converges_by_shrinking_fibre():
    # on theta = pi the proxy is pi*sqrt(r(y)); it drops below eps once
    # y > 1/(-log(1 - (eps/pi)^2)); y' = exp(-1/y) gives the transit time
    eps = 0.5
    y_star = 1.0 / -math.log1p(-(eps / math.pi) ** 2)
    t_ref, _ = quad(lambda y: math.exp(1.0 / y), 1.0, y_star)
    q0 = chart_to_ambient(np.pi, 1.0, M.chart)
    t = time_to_epsilon(M, q0, eps, IntegrationParams(0.02, 200.0, eps, 1.0))
    assert t is not None
    assert abs(t - t_ref) < 0.05


def test_trajectories_stay_on_manifold(rng):
    for sys in (M0, M):
        for _ in range(5):
            q0 = chart_to_ambient(rng.uniform(-np.pi, np.pi), rng.uniform(-4, 8), sys.chart)
            tr = integrate(sys, q0, IntegrationParams(0.02, 40.0, 1e-3, 1.0))
            assert np.all(np.diff(tr.times) > 0)
            assert np.max(np.abs(sys.chart.constraint(tr.points))) < 1e-8


def test_step_halving():
    ts = []
    for h in (0.013, 0.0065, 0.00325):
        ts.append(integrate(CIRCLE, [2.0, 0.0], IntegrationParams(h, 10.0, 0.05, 0.5)).t_hit)
    d1, d2 = abs(ts[0] - ts[1]), abs(ts[1] - ts[2])
    assert d2 > 0 and d1 < 16 * d2


def test_y_above_one_is_forward_invariant(rng):
    theta = rng.uniform(-np.pi, np.pi, 50)
    y = rng.uniform(1.0, 3.0, 50)
    p = chart_to_ambient(theta, y, M.chart)
    from basintopo.flow import flow_states
    traj = flow_states(M, p, np.arange(0, 31) * 1.0, 0.02)
    ys = traj[:, :, 1]
    assert np.all(np.diff(ys, axis=0) > 1.0 * math.exp(-1.0) - 1e-9)


def test_theta_pi_fibre_monotone_on_funnel():
    tr = integrate(M, chart_to_ambient(np.pi, 0.5, M.chart),
                   IntegrationParams(0.02, 40.0, 1e-3, 1.0))
    assert np.all(tr.points[:, 0] == 0.0)
    y = tr.points[:, 1]
    assert np.all(np.diff(y) > 0) and np.all(np.diff(y, 2) > 0)


def test_integrate_rejects_bad_states():
    p = IntegrationParams()
    with pytest.raises(DomainError):
        integrate(M0, [0.5, 0.0, 0.5], p)
    with pytest.raises(DomainError):
        integrate(PUNCT, [1.0, 0.0], p)
    with pytest.raises(DomainError):
        integrate(M0, [1.0, 0.0], p)


def test_blowup_raises_and_batch_labels():
    broken = dataclasses.replace(CIRCLE, field=lambda p: p * 1e200)
    with pytest.raises(NumericalBlowupError):
        integrate(broken, [2.0, 0.0], IntegrationParams(0.1, 5.0, 0.05, 1.0))
    res = integrate_batch(broken, [[2.0, 0.0], [1.0, 0.0]], IntegrationParams(0.1, 5.0, 0.05, 0.0))
    assert res.event[0] == Event.BLOWUP and res.n_blowup == 1
    assert res.event[1] == Event.REACHED_EPS


def test_leaving_bounds():
    sys = dataclasses.replace(CIRCLE, field=lambda p: np.ones_like(p))
    tr = integrate(sys, [3.5, 0.0], IntegrationParams(0.01, 5.0, 0.05, 1.0))
    assert tr.event == Event.LEFT_BOUNDS
    assert tr.t_event == pytest.approx(0.51)


def test_batch_matches_single_and_threads(rng):
    a = rng.uniform(-np.pi, np.pi, 40)
    seeds = chart_to_ambient(a, rng.uniform(-4, 8, 40), M.chart)
    par = IntegrationParams(0.02, 30.0, 0.3, 1.0)
    r1 = integrate_batch(M, seeds, par)
    r4 = integrate_batch(M, seeds, par, threads=4)
    np.testing.assert_array_equal(r1.event, r4.event)
    np.testing.assert_array_equal(r1.t_event, r4.t_event)
    for k in (0, 7, 21):
        tr = integrate(M, seeds[k], par)
        assert tr.event == r1.event[k] and tr.t_event == r1.t_event[k]


def test_conjugacy_on_attractor_and_seam():
    r = verify_conjugacy(n_samples=20, t_grid=[0.0, 2.0, 5.0, 10.0], h=1e-3)
    assert r.passed and r.value < 1e-6
    from basintopo.flow import _h, flow_states
    for p in ([0.0, 0.5, 1.0], [0.0, 2.0, -1.0]):
        p = np.array([p])
        left = _h(flow_states(M0, p, [0.0, 5.0, 10.0], 1e-3))
        right = flow_states(M, _h(p), [0.0, 5.0, 10.0], 1e-3)
        assert np.max(np.abs(left - right)) < 1e-9
    assert right[-1, 0, 1] > 2.0 and right[-1, 0, 0] == 0.0


def test_conjugacy_check_detects_wrong_pushforward(monkeypatch):
    import basintopo.systems as systems
    # skip Dh entirely: cylinder velocities applied on the funnel
    bad = lambda p: systems._field_m0(systems._h_inv(p))
    monkeypatch.setitem(systems.CATALOG, "FUNNEL_M",
                        dataclasses.replace(systems.CATALOG["FUNNEL_M"], field=bad))
    r = verify_conjugacy(n_samples=20, t_grid=[0.0, 5.0], h=1e-2)
    assert not r.passed and r.value > 1e-3


def test_conjugacy_argument_checks():
    with pytest.raises(ValueError):
        verify_conjugacy(t_grid=[0.0, 11.0])
    with pytest.raises(ValueError):
        verify_conjugacy(tol=0.0)


def test_distance_inequality_small():
    r = check_distance_inequality(n_pairs=200)
    assert r.passed


@pytest.mark.parametrize("sys,pts", [
    (M, [[0.0, -float(k), -1.0] for k in range(6)]),
    (CIRCLE, [[math.cos(a), math.sin(a)] for a in np.linspace(0, 6, 7)]),
    (M0, [[0.0, -1.0, 1.0]]),
])
def test_stationary(sys, pts):
    r = check_stationary(sys, pts, T=50.0)
    assert r.passed and r.value < 1e-10


def test_trajectory_csv(tmp_path):
    tr = integrate(M0, [1.0, 0.5, 0.0], IntegrationParams(0.05, 2.0, 0.01, 0.0))
    path = tmp_path / "traj.csv"
    tr.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,x,y,z,dist"
    assert len(lines) == len(tr.times) + 1
    row = [float(x) for x in lines[-1].split(",")]
    assert row[0] == tr.times[-1] and row[4] == pytest.approx(tr.distances()[-1])
    tr2 = integrate(CIRCLE, [2.0, 0.0], IntegrationParams(0.05, 1.0, 0.01, 0.0))
    tr2.to_csv(path)
    assert path.read_text().splitlines()[1].split(",")[3] == ""


def test_system_ids_accepted():
    traj = integrate("CIRCLE_R2", np.array([2.0, 0.0]), IntegrationParams(eps=0.05))
    assert abs(traj.t_hit - math.log(20) / 2) < 0.01
