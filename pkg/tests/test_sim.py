import math

import numpy as np
import pytest

from pllranges import (IntegrationError, IntegratorConfig, LoopSpec,
                       TransferFunction, Trajectory, build, detect_lock,
                       detect_slips, integrate, integrate_batch, make_pd,
                       pi_lyapunov_series, stable_equilibria)

FIG8_X0 = 0.011622
FIG8_TH0 = -2.69375


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(method="euler")
    with pytest.raises(ValueError):
        IntegratorConfig(rel_tol=0.0)
    with pytest.raises(ValueError):
        IntegratorConfig(min_step=2.0, max_step=1.0)
    with pytest.raises(ValueError):
        IntegratorConfig(horizon=-1.0)


def test_every_accepted_step_stored(spec_fig8):
    # x0 = 0 rides the beat cycle for the whole horizon, so the adaptive
    # solver keeps stepping finely and every accepted step must be kept
    m = build(spec_fig8)
    traj = integrate(m, [0.0, 0.0],
                     IntegratorConfig(rel_tol=1e-6, abs_tol=1e-9, horizon=2.0))
    assert np.all(np.diff(traj.t) > 0)          # strictly increasing times
    assert len(traj.t) > 200                    # dense adaptive sampling kept
    assert traj.t[0] == 0.0 and traj.t[-1] == pytest.approx(2.0)
    # limsup slip verdict never holds without the sup verdict
    assert not (traj.slip_limsup and not traj.slip_sup)


def test_constant_at_stable_equilibrium(spec_fig9):
    m = build(spec_fig9).with_omega(40.0)
    eq = stable_equilibria(m)[0]
    traj = integrate(m, eq.state(), IntegratorConfig(horizon=2.0))
    assert np.max(np.abs(traj.y - eq.state())) < 1e-9
    assert traj.lock_verdict == "locked"
    assert traj.locked_to.theta == pytest.approx(eq.theta, abs=1e-9)
    assert traj.slip_count == 0 and not traj.slip_sup


def test_dimension_mismatch(spec_fig9):
    m = build(spec_fig9)
    with pytest.raises(ValueError, match="state dimension"):
        integrate(m, [0.0, 0.0, 0.0], IntegratorConfig(horizon=1.0))


def test_fig8_artifact_states(spec_fig8):
    """The bundled fig8 initial state flips its verdict with the integrator."""
    m = build(spec_fig8)
    tight = integrate(m, [FIG8_X0, FIG8_TH0],
                      IntegratorConfig(rel_tol=1e-9, abs_tol=1e-12, horizon=20.0))
    assert tight.lock_verdict == "not-locked"
    assert tight.slip_count >= 3
    crude = integrate(m, [FIG8_X0, FIG8_TH0],
                      IntegratorConfig(method="rk4", max_step=0.01, horizon=20.0))
    assert crude.lock_verdict == "locked"


def test_fig8_published_state_locks(spec_fig8):
    # From (x0=0.1318, theta0=0) the flow is captured after a handful of
    # down-slips; independent tight integrations agree.  The published
    # no-lock curve for this state is itself a coarse-tolerance artifact.
    m = build(spec_fig8)
    traj = integrate(m, [0.1318, 0.0],
                     IntegratorConfig(rel_tol=1e-7, abs_tol=1e-10, horizon=20.0))
    assert traj.lock_verdict == "locked"
    assert traj.slip_count == 4


def test_fig9_zero_offset_locks_without_slip(spec_fig9):
    m = build(spec_fig9).with_omega(0.0)
    traj = integrate(m, [0.002, -0.4], IntegratorConfig(horizon=5.0))
    assert traj.lock_verdict == "locked"
    assert traj.slip_count == 0
    assert abs(traj.locked_to.theta) < 1e-9


def test_detect_slips_constant(spec_filterless):
    m = build(spec_filterless)
    t = np.linspace(0.0, 1.0, 50)
    traj = Trajectory(t=t, y=np.full((50, 1), 0.3), model=m)
    assert detect_slips(traj) == (0, False, False)


def test_detect_slips_monotone_five_pi(spec_filterless):
    m = build(spec_filterless)
    t = np.linspace(0.0, 1.0, 500)
    theta = 5.0 * math.pi * t
    traj = Trajectory(t=t, y=theta[:, None], model=m)
    k, lim, sup = detect_slips(traj)
    assert sup and lim
    assert k == 2          # 4 pi < 5 pi < 6 pi


def test_detect_slips_period_scaled():
    # period-pi detector: thresholds scale with the declared period
    pd = make_pd("sinusoidal-double-half", math.pi)
    spec = LoopSpec(pd, TransferFunction((1.0,), (1.0,)), 8.0)
    m = build(spec)
    t = np.linspace(0.0, 1.0, 200)
    theta = 2.5 * math.pi * t
    traj = Trajectory(t=t, y=theta[:, None], model=m)
    k, lim, sup = detect_slips(traj)
    assert (k, lim, sup) == (2, True, True)


def test_fig9_step_to_minus_68_slips(spec_fig9):
    m = build(spec_fig9).with_omega(68.0)
    eq = min(stable_equilibria(m), key=lambda e: abs(e.theta))
    stepped = m.with_omega(-68.0)
    traj = integrate(stepped, eq.state(), IntegratorConfig(horizon=10.0))
    assert traj.slip_count >= 1
    assert traj.lock_verdict == "locked"    # re-locks, but only after slipping


def test_sup_verdict_monotone_in_horizon(spec_fig8):
    m = build(spec_fig8)
    traj = integrate(m, [FIG8_X0, FIG8_TH0],
                     IntegratorConfig(rel_tol=1e-6, abs_tol=1e-9, horizon=8.0))
    sup_flags = []
    for frac in (0.25, 0.5, 0.75, 1.0):
        n = max(2, int(frac * len(traj.t)))
        part = Trajectory(t=traj.t[:n], y=traj.y[:n], model=m)
        sup_flags.append(detect_slips(part)[2])
    for a, b in zip(sup_flags, sup_flags[1:]):
        assert b or not a          # True never turns False


def test_detect_lock_undecided_on_slow_drift(spec_fig9):
    # no equilibria beyond the existence bound: a short smooth run is neither
    # locked nor clearly divergent
    m = build(spec_fig9).with_omega(130.0)
    traj = integrate(m, [0.0, 0.0], IntegratorConfig(horizon=0.005))
    assert traj.lock_verdict == "undecided"


def test_rk4_convergence_order(spec_example1):
    m = build(spec_example1).with_omega(3.7)
    eq = stable_equilibria(m)[0]
    y0 = eq.state() + np.array([0.02, -0.02, 0.3])
    ref = integrate(m, y0, IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14,
                                            horizon=5.0))
    end_ref = ref.y[-1]

    def endpoint_error(h):
        traj = integrate(m, y0, IntegratorConfig(method="rk4", max_step=h,
                                                 horizon=5.0))
        return np.linalg.norm(traj.y[-1] - end_ref)

    e1, e2 = endpoint_error(0.05), endpoint_error(0.025)
    assert e1 / e2 >= 8.0


def test_trajectory_mirror_symmetry(spec_fig9):
    cfg = IntegratorConfig(rel_tol=1e-10, abs_tol=1e-13, horizon=3.0)
    m = build(spec_fig9).with_omega(55.0)
    fwd = integrate(m, [0.004, 0.8], cfg)
    mirror = integrate(m.with_omega(-55.0), [-0.004, -0.8], cfg)
    for col in range(2):
        vals = np.interp(fwd.t, mirror.t, mirror.y[:, col])
        assert np.max(np.abs(vals + fwd.y[:, col])) < 1e-6


def test_batch_matches_scalar_verdicts(spec_fig9):
    m = build(spec_fig9).with_omega(80.0)
    stable = stable_equilibria(m)
    inits = np.array([[0.0, 0.0], [0.01, 2.0], [-0.03, -1.0], [0.02, 3.0]])
    out = integrate_batch(m, inits, horizon=20.0, stable_eqs=stable)
    for k, y0 in enumerate(inits):
        traj = integrate(m, y0, IntegratorConfig(horizon=20.0),
                         stable_eqs=stable)
        assert out.locked[k] == (traj.lock_verdict == "locked")
        if out.locked[k]:
            assert out.locked_theta[k] == pytest.approx(
                traj.locked_to.theta, abs=1e-9)


def test_pi_lyapunov_decreases_unit_sine():
    pd = make_pd("sinusoidal-unit", math.tau)
    tf = TransferFunction((1.0, 0.0225), (0.0, 0.0633))
    m = build(LoopSpec(pd, tf, 250.0, 47.0))
    rng = np.random.default_rng(8)
    for _ in range(3):
        y0 = [47.0 / 250.0 * 0.0633 + rng.uniform(-0.1, 0.1),
              rng.uniform(-math.pi, math.pi)]
        traj = integrate(m, y0, IntegratorConfig(horizon=8.0))
        V = pi_lyapunov_series(traj)
        assert np.all(np.diff(V) <= 1e-8 * (1.0 + V[:-1]))


def test_pi_lyapunov_decreases_half_sine(spec_fig11):
    m = build(spec_fig11)
    traj = integrate(m, [0.1, 2.0], IntegratorConfig(horizon=8.0))
    V = pi_lyapunov_series(traj)
    assert np.all(np.diff(V) <= 1e-8 * (1.0 + V[:-1]))


def test_pi_lyapunov_requires_pi_filter(spec_fig9):
    m = build(spec_fig9).with_omega(10.0)
    traj = integrate(m, [0.0, 0.1], IntegratorConfig(horizon=0.5))
    with pytest.raises(ValueError, match="PI filter"):
        pi_lyapunov_series(traj)


def test_solver_failure_maps_to_integration_error(monkeypatch, spec_fig9):
    import pllranges.sim as simmod

    class FailedSol:
        success = False
        t = np.array([0.0, 0.4])
        y = np.zeros((2, 2))

    monkeypatch.setattr(simmod, "solve_ivp", lambda *a, **k: FailedSol())
    m = build(spec_fig9).with_omega(10.0)
    with pytest.raises(IntegrationError, match="integration failure at t"):
        integrate(m, [0.0, 0.0], IntegratorConfig(horizon=1.0))


def test_rk4_needs_finite_step(spec_fig9):
    m = build(spec_fig9)
    with pytest.raises(ValueError, match="finite max_step"):
        integrate(m, [0.0, 0.0], IntegratorConfig(method="rk4", horizon=1.0))
