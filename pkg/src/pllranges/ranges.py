"""Pull-in estimation and the unique lock-in frequency.

Pull-in can only be *estimated* numerically: a finite grid of initial states
cannot prove global stability (a hidden oscillation with a small basin will
be missed), so every pull-in result here is labeled an estimate and carries
its per-frequency simulation evidence.

The lock-in frequency uses the symmetric-step construction for odd
detectors: park the loop in the locked state of +omega, flip the frequency
offset to -omega, and ask whether the loop re-locks without slipping a full
cycle.  The largest omega passing that test bounds the interval [0, omega_l)
on which an abrupt in-range step never costs a cycle slip.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .equilibria import find_equilibria, existence_bound
from .errors import RefusalError
from .intervals import IntervalUnion, union_from_samples
from .model import build
from .sim import IntegratorConfig, integrate, integrate_batch, suggested_step
from .stability import stable_equilibria


@dataclass(frozen=True)
class StateBox:
    """Bounds on realizable initial filter states (X_real)."""

    mins: tuple
    maxs: tuple

    def __post_init__(self):
        if len(self.mins) != len(self.maxs):
            raise ValueError("mins/maxs length mismatch")
        if any(not lo < hi for lo, hi in zip(self.mins, self.maxs)):
            raise ValueError("StateBox needs min < max per state")

    @property
    def order(self):
        return len(self.mins)


def initial_grid(box, period, n_state, n_theta):
    """Cartesian product of per-state grids with one period of phases.

    Phases are cell-centered so the grid is symmetric about zero and never
    lands exactly on a mirror-pair saddle (a measure-zero start that would
    sit still forever and poison the all-must-lock verdict).
    """
    axes = [np.linspace(lo, hi, n_state) for lo, hi in zip(box.mins, box.maxs)]
    step = period / n_theta
    axes.append(-period / 2 + step / 2 + step * np.arange(n_theta))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass
class PullInReport:
    """ESTIMATE of the pull-in set with per-frequency evidence rows."""

    union: IntervalUnion
    evidence: list
    omega_max: float
    label: str = "ESTIMATE"


def pull_in_estimate(spec, box, omega_max, omega_grid=17, init_grid=(9, 16),
                     horizon=20.0, step=None):
    """Grid-and-simulate pull-in membership over |omega| in [0, omega_max].

    A frequency is a member when every simulation started on the initial
    grid (box x one period of phases) reaches a locked state within the
    horizon.  Frequencies with undecided runs are marked inconclusive and
    excluded.  Boundaries are refined by bisection to 1e-3 * omega_max.
    """
    if box.order != len(spec.tf.den) - 1:
        raise ValueError("state box order does not match the filter order")
    if init_grid[0] < 8 and box.order:
        raise ValueError("init grid must be at least 8 per dimension")
    model0 = build(spec)
    period = spec.pd.period
    inits = initial_grid(box, period, init_grid[0], init_grid[1])
    evidence = []

    def verdict(omega):
        m = model0.with_omega(float(omega))
        stable = stable_equilibria(m)
        if not stable:
            return "non-member", {"omega": float(omega), "reason": "no stable equilibrium",
                                  "runs": 0, "locked": 0, "undecided": 0}
        h = step or suggested_step(m, x_scale=float(np.abs(inits[:, :-1]).max(initial=0.0)))
        out = integrate_batch(m, inits, horizon=horizon, step=h, stable_eqs=stable)
        n_locked = int(out.locked.sum())
        n_div = int((out.divergent & ~out.locked).sum())
        n_undecided = len(inits) - n_locked - n_div
        row = {"omega": float(omega), "runs": len(inits), "locked": n_locked,
               "undecided": n_undecided, "step": h}
        if n_locked == len(inits):
            return "member", row
        if n_undecided > 0:
            return "inconclusive", row
        return "non-member", row

    def member(omega):
        v, row = verdict(omega)
        evidence.append({**row, "verdict": v})
        return v == "member"

    samples = np.linspace(0.0, omega_max, omega_grid)
    flags = [member(w) for w in samples]
    union, _ = union_from_samples(samples, flags, member, tol=1e-3 * omega_max)
    evidence.sort(key=lambda r: r["omega"])
    return PullInReport(union=union, evidence=evidence, omega_max=float(omega_max))


@dataclass
class LockInResult:
    omega_l: float
    bracket: tuple
    monotone_ok: bool
    evidence: list = field(default_factory=list)


def _relock_without_slip(spec, omega, cfg, slip_threshold_periods,
                         judge_excursion=False):
    """The symmetric-step predicate P(omega).

    Lock the loop at +omega (analytically: start exactly on the stable
    equilibrium branch closest to zero), step to -omega, and simulate.
    True iff a locked state is reached whose final phase displacement stays
    within the slip threshold (the limsup criterion: a transient excursion
    that returns does not count as a slip).  With judge_excursion the
    transient maximum is judged instead (the sup criterion), which is how
    the half-period threshold variant becomes restrictive at all.
    """
    model_plus = build(spec).with_omega(float(omega))
    stable = stable_equilibria(model_plus)
    if not stable:
        return False, "no locked state at +omega"
    start = min(stable, key=lambda e: abs(e.theta))
    model_minus = model_plus.with_omega(-float(omega))
    # One extra period of leash: an excursion that far cannot re-lock within
    # the threshold, so stopping there cannot misjudge the limsup.
    stop_periods = (slip_threshold_periods if judge_excursion
                    else slip_threshold_periods + 1.0)
    traj = integrate(model_minus, start.state(), cfg,
                     stop_on_slip_periods=stop_periods,
                     stop_when_locked=True)
    if traj.lock_verdict != "locked":
        return False, traj.lock_verdict
    if judge_excursion:
        measure = float(np.abs(traj.theta - traj.theta[0]).max())
    else:
        measure = abs(float(traj.theta[-1]) - float(traj.theta[0]))
    if measure <= slip_threshold_periods * spec.pd.period:
        return True, "relocked, deviation %.4f" % measure
    return False, "slip (deviation %.4f)" % measure


def lock_in_frequency(spec, omega_hint, cfg=None, slip_threshold_periods=1.0,
                      rel_width=1e-3, check_monotone=True, judge_excursion=False):
    """Largest frequency step the loop absorbs without a cycle slip.

    Exponential search up from omega_hint brackets the first failure of the
    symmetric-step predicate, then bisection narrows it to the requested
    relative width.  Requires an odd detector (the procedure leans on the
    mirror symmetry of the equilibria).
    """
    if not spec.pd.odd:
        raise RefusalError("procedure requires odd characteristic")
    cfg = cfg or IntegratorConfig(horizon=10.0)
    evidence = []

    def P(omega):
        ok, note = _relock_without_slip(spec, omega, cfg, slip_threshold_periods,
                                        judge_excursion=judge_excursion)
        evidence.append({"omega": float(omega), "pass": ok, "note": note})
        return ok

    lo = float(omega_hint)
    shrink = 0
    while not P(lo):
        lo *= 0.5
        shrink += 1
        if shrink > 30:
            raise RefusalError("no lock-in range detected")
    bound = existence_bound(build(spec))
    hi = None
    w = lo
    while hi is None:
        w = min(w * 1.5, bound) if math.isfinite(bound) else w * 1.5
        if P(w):
            lo = w
            if math.isfinite(bound) and w >= bound:
                hi = bound      # equilibria cease to exist past the bound
                break
        else:
            hi = w
    while hi - lo > rel_width * hi:
        mid = 0.5 * (lo + hi)
        if P(mid):
            lo = mid
        else:
            hi = mid

    monotone_ok = True
    if check_monotone:
        monotone_ok = P(0.9 * lo) and not (1.1 * hi < (bound if math.isfinite(bound) else math.inf)
                                           and P(1.1 * hi))
    return LockInResult(omega_l=lo, bracket=(lo, hi), monotone_ok=monotone_ok,
                        evidence=evidence)


@dataclass
class BandResult:
    half_width: float
    violations: int
    runs: int


def lock_in_band(spec, omega_tilde, verify=True, grid=(7, 16), horizon=12.0,
                 slip_threshold_periods=1.0):
    """Band |x| <= |x_eq(omega_tilde)| approximating the uniform lock-in domain.

    Defined for scalar filter state only (the band is one-dimensional in x).
    When verify is set, every initial state on a grid inside the band is
    simulated at both +-omega_tilde and must lock without slipping; failures
    are counted as violations.
    """
    if len(spec.tf.den) - 1 != 1:
        raise RefusalError("band approximation defined for scalar filter state only")
    model = build(spec).with_omega(float(omega_tilde))
    eqs = find_equilibria(model)
    if not eqs:
        raise RefusalError("no equilibria at the requested frequency offset")
    half_width = float(abs(eqs[0].x[0]))
    if omega_tilde == 0:
        half_width = 0.0
    violations = 0
    runs = 0
    if verify and half_width > 0:
        box = StateBox((-half_width,), (half_width,))
        inits = initial_grid(box, spec.pd.period, grid[0], grid[1])
        period = spec.pd.period
        for sign in (+1.0, -1.0):
            m = model.with_omega(sign * float(omega_tilde))
            stable = stable_equilibria(m)
            out = integrate_batch(m, inits, horizon=horizon,
                                  step=suggested_step(m, x_scale=half_width),
                                  stable_eqs=stable,
                                  slip_stop_periods=slip_threshold_periods + 1.0)
            displacement = np.abs(out.final[:, -1] - inits[:, -1])
            ok = out.locked & (displacement <= slip_threshold_periods * period)
            violations += int((~ok).sum())
            runs += len(inits)
    return BandResult(half_width=half_width, violations=violations, runs=runs)
