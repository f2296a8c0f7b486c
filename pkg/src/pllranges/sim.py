"""Numerical integration with cycle-slip and lock detection.

Unwrapped phase is integrated on the real line; slipping is judged from the
deviation |theta(0) - theta(t)| against one detector period (the classical
2*pi threshold, scaled for period-pi detectors).  The limsup in the slip
definitions is approximated by the maximum over a trailing window, which is
the documented finite-horizon stand-in.

Integration defaults deliberately reproduce a known hazard: loose fixed-step
integration can report lock for a loop that, integrated tightly, keeps
slipping.  Tests pin both behaviors.
"""

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import solve_ivp

from .errors import IntegrationError
from .stability import stable_equilibria

METHODS = ("rk45", "rk4")


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances and horizon for one integration run."""

    method: str = "rk45"
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_step: float = math.inf     # fixed step size when method == "rk4"
    min_step: float = 0.0
    horizon: float = 10.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if not self.min_step < self.max_step:
            raise ValueError("min_step must be below max_step")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")


@dataclass(eq=False)
class Trajectory:
    """Sampled solution with slip counters and the lock verdict."""

    t: np.ndarray
    y: np.ndarray
    model: object
    slip_count: int = 0
    slip_limsup: bool = False
    slip_sup: bool = False
    lock_verdict: str = "undecided"
    locked_to: object = None

    @property
    def theta(self):
        return self.y[:, -1]

    @property
    def x(self):
        return self.y[:, :-1]

    def theta_wrapped(self):
        period = self.model.pd.period
        return self.theta - period * np.floor(self.theta / period + 0.5)

    def filter_output(self):
        return np.atleast_1d(self.model.filter_output(self.y))

    def negate(self):
        """Mirror through the odd-symmetry transform; verdicts carry over."""
        return replace(self, y=-self.y, model=self.model.with_omega(-self.model.omega_free))


def _rk4_fixed(f, y0, t_end, h):
    n_steps = max(1, int(math.ceil(t_end / h - 1e-12)))
    ts = np.empty(n_steps + 1)
    ys = np.empty((n_steps + 1, len(y0)))
    ts[0] = 0.0
    ys[0] = y0
    t, y = 0.0, np.asarray(y0, dtype=float)
    for i in range(n_steps):
        step = min(h, t_end - t)
        k1 = f(t, y)
        k2 = f(t + 0.5 * step, y + 0.5 * step * k1)
        k3 = f(t + 0.5 * step, y + 0.5 * step * k2)
        k4 = f(t + step, y + step * k3)
        y = y + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += step
        ts[i + 1] = t
        ys[i + 1] = y
    return ts, ys


def integrate(model, initial, cfg, stable_eqs=None,
              stop_on_slip_periods=None, stop_when_locked=False):
    """Integrate the model, storing every accepted step.

    stop_on_slip_periods / stop_when_locked enable early exit for sweeps;
    the returned trajectory then ends within one integration chunk of the
    deciding sample.
    """
    y0 = np.asarray(initial, dtype=float)
    if y0.shape != (model.dim,):
        raise ValueError("state dimension")
    if stable_eqs is None:
        stable_eqs = stable_equilibria(model)

    f = model.rhs_fn()
    T = cfg.horizon
    period = model.pd.period
    slip_cap = stop_on_slip_periods * period if stop_on_slip_periods else None
    early_lock = None

    if cfg.method == "rk4":
        if not math.isfinite(cfg.max_step):
            raise ValueError("rk4 needs a finite max_step as its step size")
        ts, ys = _rk4_fixed(f, y0, T, cfg.max_step)
        traj = Trajectory(t=ts, y=ys, model=model)
    else:
        early = slip_cap is not None or stop_when_locked
        n_chunks = 40 if early else 1
        edges = np.linspace(0.0, T, n_chunks + 1)
        ts_parts, ys_parts = [], []
        y = y0
        max_dev = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            sol = solve_ivp(f, (lo, hi), y, method="RK45",
                            rtol=cfg.rel_tol, atol=cfg.abs_tol,
                            max_step=cfg.max_step, dense_output=False)
            if not sol.success:
                raise IntegrationError(f"integration failure at t={sol.t[-1]:.6g}")
            skip = 1 if ts_parts else 0
            ts_parts.append(sol.t[skip:])
            ys_parts.append(sol.y.T[skip:])
            y = sol.y[:, -1]
            max_dev = max(max_dev, float(np.abs(sol.y[-1] - y0[-1]).max()))
            if slip_cap is not None and max_dev > slip_cap:
                break
            if stop_when_locked and stable_eqs:
                early_lock = _near_stable(model, y, stable_eqs,
                                          eps_state=1e-4,
                                          eps_freq=_default_eps_freq(model))
                if early_lock is not None:
                    break
        traj = Trajectory(t=np.concatenate(ts_parts), y=np.concatenate(ys_parts), model=model)

    k, lim, sup = detect_slips(traj)
    traj.slip_count, traj.slip_limsup, traj.slip_sup = k, lim, sup
    if early_lock is not None:
        # The state entered the lock tolerance of a stable equilibrium; the
        # trailing-window heuristic would see the approach transient.
        traj.lock_verdict, traj.locked_to = "locked", early_lock
    else:
        verdict, eq = detect_lock(traj, model, stable_eqs=stable_eqs)
        traj.lock_verdict, traj.locked_to = verdict, eq
    return traj


def _default_eps_freq(model):
    return 1e-4 * max(1.0, abs(model.omega_free))


def _wrap_dist(theta, theta_eq, period):
    d = theta - theta_eq
    return np.abs(d - period * np.round(d / period))


def _near_stable(model, y, stable_eqs, eps_state, eps_freq):
    """Return the matched equilibrium when y sits inside its lock tolerance."""
    dtheta = model.rhs(0.0, y)[-1]
    if abs(dtheta) >= eps_freq:
        return None
    period = model.pd.period
    for eq in stable_eqs:
        dx = np.linalg.norm(y[:-1] - eq.x) if len(eq.x) else 0.0
        dth = _wrap_dist(y[-1], eq.theta, period)
        if math.hypot(dx, dth) < eps_state:
            return eq
    return None


def detect_slips(traj, settle_fraction=0.1):
    """(count k, limsup verdict, sup verdict) per the slip definitions.

    sup compares the whole-run deviation against one period; the limsup
    estimate uses the trailing settle_fraction of the horizon, and k is the
    largest integer with k*period below that estimate.
    """
    if len(traj.t) == 0:
        raise ValueError("empty trajectory")
    period = traj.model.pd.period
    dev = np.abs(traj.theta - traj.theta[0])
    sup_est = float(dev.max())
    t_lo = traj.t[-1] - settle_fraction * (traj.t[-1] - traj.t[0])
    tail = dev[traj.t >= t_lo]
    limsup_est = float(tail.max()) if tail.size else sup_est
    k = max(0, int(math.ceil(limsup_est / period - 1e-12)) - 1)
    return k, limsup_est > period, sup_est > period


def detect_lock(traj, model, eps_freq=None, eps_state=1e-4, window=None,
                stable_eqs=None):
    """Verdict ('locked'|'not-locked'|'undecided', equilibrium or None).

    Locked requires, over the trailing window, |theta'| below eps_freq at
    every sample and the state within eps_state of one asymptotically stable
    equilibrium (phase compared modulo the period).  A trajectory still
    advancing by a period or more across the window is clearly divergent.
    """
    if eps_freq is None:
        eps_freq = _default_eps_freq(model)
    span = traj.t[-1] - traj.t[0]
    if window is None:
        window = 0.1 * span
    if stable_eqs is None:
        stable_eqs = stable_equilibria(model)

    sel = traj.t >= traj.t[-1] - window
    ys = traj.y[sel]
    dtheta = model.rhs_batch(ys)[:, -1]
    period = model.pd.period

    if stable_eqs and np.all(np.abs(dtheta) < eps_freq):
        for eq in stable_eqs:
            dx = (np.linalg.norm(ys[:, :-1] - eq.x, axis=1)
                  if len(eq.x) else np.zeros(len(ys)))
            dth = _wrap_dist(ys[:, -1], eq.theta, period)
            if np.all(np.hypot(dx, dth) < eps_state):
                return "locked", eq
    moved = np.abs(ys[:, -1] - ys[0, -1]).max() if len(ys) else 0.0
    if moved >= period:
        return "not-locked", None
    return "undecided", None


# ---------------------------------------------------------------------------
# Vectorized fixed-step RK4 for sweeps and rasters.

@dataclass
class BatchOutcome:
    """Per-trajectory results of a batched integration."""

    status: np.ndarray          # 0 ran out, 1 locked, 2 slipped past the cap
    final: np.ndarray
    max_dev: np.ndarray
    locked_theta: np.ndarray    # wrapped branch phase of the lock, else nan
    divergent: np.ndarray       # still advancing when the horizon ended
    theta_min: np.ndarray       # phase range covered along the run
    theta_max: np.ndarray

    @property
    def locked(self):
        return self.status == 1


def suggested_step(model, x_scale=0.0):
    """Fixed step small enough for the fastest loop time scale."""
    L = model.vco_gain
    amp = model.pd.amplitude_max
    rate = abs(model.omega_free) + L * abs(model.fr.h) * amp
    if model.fr.order:
        rate += L * float(np.abs(model.fr.c).sum()) * x_scale
        rate = max(rate, float(np.max(np.abs(np.linalg.eigvals(model.fr.A)))))
    rate = max(rate, L * amp * 0.1, 1.0)
    return 0.25 / rate


def integrate_batch(model, initials, horizon, step=None, stable_eqs=None,
                    slip_stop_periods=None, eps_state=1e-4, eps_freq=None,
                    check_every=25):
    """Integrate many initial states at once with fixed-step RK4.

    Locking and (optionally) slipping trajectories are frozen as soon as a
    check detects them, so dense rasters stay cheap.  The slip counters use
    the running deviation maximum, updated every step.
    """
    Y = np.array(initials, dtype=float)
    N = Y.shape[0]
    if stable_eqs is None:
        stable_eqs = stable_equilibria(model)
    if eps_freq is None:
        eps_freq = _default_eps_freq(model)
    if step is None:
        scale = float(np.abs(Y[:, :-1]).max()) if model.fr.order else 0.0
        step = suggested_step(model, x_scale=scale)
    period = model.pd.period
    slip_cap = slip_stop_periods * period if slip_stop_periods else None

    theta0 = Y[:, -1].copy()
    max_dev = np.zeros(N)
    theta_min = theta0.copy()
    theta_max = theta0.copy()
    status = np.zeros(N, dtype=np.int8)
    locked_theta = np.full(N, np.nan)
    dev_snapshot = np.zeros(N)
    snapshot_taken = False
    divergent = np.zeros(N, dtype=bool)

    eq_x = np.array([eq.x for eq in stable_eqs]) if stable_eqs else np.zeros((0, model.fr.order))
    eq_th = np.array([eq.theta for eq in stable_eqs])

    active = np.arange(N)
    n_steps = max(1, int(math.ceil(horizon / step)))
    done_steps = 0
    while active.size and done_steps < n_steps:
        block = min(check_every, n_steps - done_steps)
        Ya = Y[active]
        th0a = theta0[active]
        deva = max_dev[active]
        tmin = theta_min[active]
        tmax = theta_max[active]
        for _ in range(block):
            k1 = model.rhs_batch(Ya)
            k2 = model.rhs_batch(Ya + 0.5 * step * k1)
            k3 = model.rhs_batch(Ya + 0.5 * step * k2)
            k4 = model.rhs_batch(Ya + step * k3)
            Ya = Ya + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            np.maximum(deva, np.abs(Ya[:, -1] - th0a), out=deva)
            np.minimum(tmin, Ya[:, -1], out=tmin)
            np.maximum(tmax, Ya[:, -1], out=tmax)
        done_steps += block
        Y[active] = Ya
        max_dev[active] = deva
        theta_min[active] = tmin
        theta_max[active] = tmax

        dtheta = model.rhs_batch(Ya)[:, -1]
        slow = np.abs(dtheta) < eps_freq
        lock_hit = np.zeros(len(active), dtype=bool)
        if len(eq_th):
            dth = _wrap_dist(Ya[:, -1:], eq_th[None, :], period)
            if model.fr.order:
                dx = np.linalg.norm(Ya[:, None, :-1] - eq_x[None, :, :], axis=2)
            else:
                dx = np.zeros_like(dth)
            dist = np.hypot(dx, dth)
            nearest = np.argmin(dist, axis=1)
            lock_hit = slow & (dist[np.arange(len(active)), nearest] < eps_state)
            idx = active[lock_hit]
            status[idx] = 1
            locked_theta[idx] = eq_th[nearest[lock_hit]]
        drop = lock_hit
        if slip_cap is not None:
            slipped = (deva > slip_cap) & ~lock_hit
            status[active[slipped]] = 2
            drop = drop | slipped
        active = active[~drop]
        # Divergence is judged over the trailing quarter of the horizon: a
        # trajectory still gaining a period of deviation there keeps beating.
        if not snapshot_taken and done_steps >= 0.75 * n_steps:
            dev_snapshot[:] = max_dev
            snapshot_taken = True
    divergent[:] = snapshot_taken & ((max_dev - dev_snapshot) >= period)
    divergent[status != 0] = False
    return BatchOutcome(status=status, final=Y, max_dev=max_dev,
                        locked_theta=locked_theta, divergent=divergent,
                        theta_min=theta_min, theta_max=theta_max)


# ---------------------------------------------------------------------------
# Energy check for PI loops.

def pi_lyapunov_series(traj):
    """V along a trajectory of a PI loop with a pure-sine detector.

    For H(s) = (beta + alpha s)/s and phi = A sin(theta) the function
    V = (c.x - omega/L)^2 / 2 + (2 beta A / L) sin^2(theta/2) is
    non-increasing along every solution; its decay certifies the infinite
    pull-in range.  The filter-state term uses c.x, which is independent of
    the state-space scaling.
    """
    model = traj.model
    tf = model.fr.tf
    if tf.zero_pole_multiplicity() != 1 or tf.order != 1:
        raise ValueError("Lyapunov check needs a first-order PI filter")
    amps = {"sinusoidal-unit": 1.0, "sinusoidal-half": 0.5}
    if model.pd.kind not in amps:
        raise ValueError("Lyapunov check needs a pure-sine detector")
    A_phi = amps[model.pd.kind]
    beta = tf.num[0] / tf.den[1]
    L = model.vco_gain
    cx = traj.x @ model.fr.c
    return (0.5 * (cx - model.omega_free / L) ** 2
            + (2.0 * beta * A_phi / L) * np.sin(traj.theta / 2.0) ** 2)
