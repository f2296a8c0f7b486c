"""Equilibria of the phase-space model on one detector period.

With a nonsingular filter matrix the stationary points solve

    phi(theta_eq) = omega_free / (L H(0)),    x_eq = -A^-1 b phi(theta_eq);

a first-order PI filter (single pole at s = 0) instead gives
phi(theta_eq) = 0 with c x_eq = omega_free / L.  Higher pole-at-zero
multiplicities produce stationary manifolds and are reported as unsupported.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import RefusalError

GRID = 4096
ROOT_TOL = 1e-12
TANGENT_TOL = 1e-9


@dataclass
class Equilibrium:
    """One stationary point; branch indexes the solutions on one period."""

    theta: float
    x: np.ndarray
    branch: int = 0
    stability: str = "unclassified"

    def state(self):
        return np.concatenate([self.x, [self.theta]])


def existence_bound(model):
    """Supremum of |omega_free| admitting equilibria; inf for PI filters."""
    H0 = model.fr.tf.dc_gain()
    if math.isinf(H0):
        return math.inf
    return model.vco_gain * abs(H0) * model.pd.amplitude_max


def _solve_phi_equals(pd, v):
    """All theta in [-period/2, period/2) with phi(theta) = v.

    Dense sampling plus bisection on each sign-change bracket; exact zeros
    at grid nodes count as brackets.  Near-tangent levels (|v| within
    TANGENT_TOL of the amplitude) collapse to the single extremal point.
    """
    period = pd.period
    half = period / 2.0
    if abs(v) > pd.amplitude_max + TANGENT_TOL:
        return [], False
    grid = np.linspace(-half, half, GRID, endpoint=False)
    f = pd(grid) - v

    if pd.amplitude_max - abs(v) <= TANGENT_TOL:
        # Saddle-node boundary: the two roots merge at the extremum of phi.
        target = pd(grid) * np.sign(v) if v else -np.abs(f)
        i = int(np.argmax(target))
        lo, hi = grid[i] - period / GRID, grid[i] + period / GRID
        for _ in range(60):
            m1, m2 = lo + (hi - lo) / 3, hi - (hi - lo) / 3
            if np.sign(v or 1.0) * pd(m1) < np.sign(v or 1.0) * pd(m2):
                lo = m1
            else:
                hi = m2
        return [0.5 * (lo + hi)], True

    f_next = np.roll(f, -1)
    roots = list(grid[f == 0.0])
    idx = np.nonzero(f * f_next < 0.0)[0]
    if idx.size:
        step = period / GRID
        lo = grid[idx]
        hi = lo + step
        flo = f[idx]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            fm = pd(mid) - v
            done = np.abs(fm) <= ROOT_TOL
            if np.all(done):
                lo = hi = mid
                break
            left = (flo * fm > 0) & ~done
            lo = np.where(left, mid, lo)
            flo = np.where(left, fm, flo)
            hi = np.where(left | done, hi, mid)
        roots.extend(0.5 * (lo + hi))

    half_wrap = [t - period if t >= half else t for t in roots]
    half_wrap.sort()
    dedup = []
    for t in half_wrap:
        if not dedup or abs(t - dedup[-1]) > 1e-10 * period:
            dedup.append(t)
    # A root straddling the wrap point may appear at both ends.
    if len(dedup) > 1 and abs((dedup[-1] - period) - dedup[0]) < 1e-10 * period:
        dedup.pop()
    return dedup, False


def find_equilibria(model):
    """All equilibria on one period, ordered by theta (branch index)."""
    tf = model.fr.tf
    r = tf.zero_pole_multiplicity()
    L = model.vco_gain

    if r == 0:
        v = model.omega_free / (L * tf.dc_gain())
        thetas, merged = _solve_phi_equals(model.pd, v)
        eqs = []
        for k, th in enumerate(thetas):
            phi = model.pd(th)
            if model.fr.order:
                x = np.linalg.solve(model.fr.A, -model.fr.b * phi)
            else:
                x = np.zeros(0)
            eqs.append(Equilibrium(theta=float(th), x=x, branch=k,
                                   stability="marginal" if merged else "unclassified"))
        return eqs

    if r == 1 and model.fr.order == 1 and model.fr.c[0] != 0.0:
        thetas, merged = _solve_phi_equals(model.pd, 0.0)
        x_eq = model.omega_free / (L * model.fr.c[0])
        return [Equilibrium(theta=float(th), x=np.array([x_eq]), branch=k)
                for k, th in enumerate(thetas)]

    raise RefusalError("unsupported pole-at-zero multiplicity")
