"""Linearized stability of equilibria and the hold-in set.

The linearization of the loop along an equilibrium has characteristic
polynomial

    chi(s) = s d(s) + a(s) L phi'(theta_eq)        (sign-normalized)

where H(s) = a(s)/d(s) is the filter.  Local asymptotic stability is decided
by the Routh array of chi.  The hold-in set collects the frequency offsets
for which at least one equilibrium is asymptotically stable; for high-order
filters it can be a union of disjoint intervals, so the sweep seeds extra
sample points at the images of all Routh first-column zero crossings (the
Hurwitz minors), which pins down islands far narrower than the base grid.
"""

import math
from dataclasses import dataclass

import numpy as np

from .equilibria import find_equilibria, existence_bound
from .intervals import IntervalUnion, union_from_samples
from .model import build

MARGIN_EPS = 1e-10
SEED_GRID = 4096


def char_poly(model, eq):
    """Ascending coefficients of chi(s), leading coefficient positive."""
    tf = model.fr.tf
    try:
        dphi = model.pd.derivative(eq.theta)
    except ValueError as exc:
        raise ValueError("nonsmooth linearization point") from exc
    K = model.vco_gain * dphi
    n = tf.order
    chi = np.zeros(n + 2)
    chi[1:len(tf.den) + 1] += tf.den          # s * d(s)
    chi[:len(tf.num)] += K * np.asarray(tf.num)
    chi = -chi
    if chi[-1] < 0:
        chi = -chi
    return chi


def jacobian(model, eq):
    """Jacobian of the phase-space model at an equilibrium."""
    n = model.fr.order
    dphi = model.pd.derivative(eq.theta)
    L = model.vco_gain
    J = np.zeros((n + 1, n + 1))
    if n:
        J[:n, :n] = model.fr.A
        J[:n, n] = model.fr.b * dphi
        J[n, :n] = -L * model.fr.c
    J[n, n] = -L * model.fr.h * dphi
    return J


def routh_hurwitz(coeffs):
    """Routh verdict for an arbitrary-degree real polynomial.

    Returns 'stable' when every first-column entry is strictly positive
    after normalizing the leading coefficient positive, 'unstable' on a
    sign change, and 'marginal' when any entry (or pivot) sits within
    MARGIN_EPS of zero relative to the array scale.  Zero rows are not
    epsilon-perturbed; they are reported marginal.
    """
    a = np.asarray(coeffs, dtype=float)[::-1]      # descending
    if a.size < 2 or a[0] == 0.0:
        raise ValueError("degenerate polynomial")
    if a[0] < 0:
        a = -a
    deg = a.size - 1
    ncols = deg // 2 + 1
    rows = np.zeros((deg + 1, ncols + 1))          # one spare column of zeros
    rows[0, :len(a[0::2])] = a[0::2]
    rows[1, :len(a[1::2])] = a[1::2]
    scale = float(np.max(np.abs(a)))
    for k in range(2, deg + 1):
        pivot = rows[k - 1, 0]
        if abs(pivot) <= MARGIN_EPS * scale:
            return "marginal"
        rows[k, :ncols] = rows[k - 2, 1:] - (rows[k - 2, 0] / pivot) * rows[k - 1, 1:]
        scale = max(scale, float(np.max(np.abs(rows[k]))))
    first = rows[: deg + 1, 0]
    if np.min(np.abs(first)) <= MARGIN_EPS * scale:
        return "marginal"
    return "stable" if np.all(first > 0) else "unstable"


_TAG = {"stable": "asymptotically-stable", "unstable": "unstable", "marginal": "marginal"}


def classify(model, eq):
    """Stability tag of one equilibrium; also written into the record."""
    if eq.stability == "marginal":
        return "marginal"       # saddle-node boundary flagged by the finder
    tag = _TAG[routh_hurwitz(char_poly(model, eq))]
    eq.stability = tag
    return tag


def classified_equilibria(model):
    eqs = find_equilibria(model)
    for eq in eqs:
        classify(model, eq)
    return eqs


def stable_equilibria(model):
    return [eq for eq in classified_equilibria(model)
            if eq.stability == "asymptotically-stable"]


def _has_stable_equilibrium(model, omega):
    return any(eq.stability == "asymptotically-stable"
               for eq in classified_equilibria(model.with_omega(omega)))


def _hurwitz_minors(coeffs_desc):
    """Leading principal minors of the Hurwitz matrix, batched over axis 0."""
    batch, m1 = coeffs_desc.shape
    deg = m1 - 1
    M = np.zeros((batch, deg, deg))
    for i in range(deg):
        for j in range(deg):
            k = 2 * j - i + 1
            if 0 <= k <= deg:
                M[:, i, j] = coeffs_desc[:, k]
    return [np.linalg.det(M[:, :i, :i]) for i in range(1, deg + 1)]


def candidate_boundary_omegas(spec):
    """Frequency offsets where some equilibrium branch crosses a Routh boundary.

    chi's coefficients are affine in K = L phi'(theta), so each Hurwitz minor
    is a smooth function of theta; its zeros theta* map to candidate hold-in
    boundaries omega* = L H(0) phi(theta*).  Also includes the equilibrium
    existence bound.  Returns signed values.
    """
    model = build(spec).with_omega(0.0)
    tf = model.fr.tf
    H0 = tf.dc_gain()
    if math.isinf(H0):
        return []
    L = model.vco_gain
    pd = model.pd
    half = pd.period / 2.0
    thetas = np.linspace(-half, half, SEED_GRID, endpoint=False)
    K = L * pd.derivative(thetas)

    n = tf.order
    asc = np.zeros((SEED_GRID, n + 2))
    asc[:, 1:len(tf.den) + 1] += tf.den
    asc[:, :len(tf.num)] += K[:, None] * np.asarray(tf.num)
    if tf.den[-1] < 0:
        asc = -asc
    minors = _hurwitz_minors(asc[:, ::-1])

    def minor_at(i, th):
        Kv = L * pd.derivative(th)
        row = np.zeros((1, n + 2))
        row[0, 1:len(tf.den) + 1] += tf.den
        row[0, :len(tf.num)] += Kv * np.asarray(tf.num)
        if tf.den[-1] < 0:
            row = -row
        return _hurwitz_minors(row[:, ::-1])[i][0]

    omegas = [existence_bound(model)]
    step = pd.period / SEED_GRID
    for i, vals in enumerate(minors):
        sign = np.sign(vals)
        flips = np.nonzero(sign * np.roll(sign, -1) < 0)[0]
        for idx in flips:
            lo = thetas[idx]
            hi = lo + step
            flo = vals[idx]
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                fm = minor_at(i, mid)
                if fm == 0.0:
                    lo = hi = mid
                    break
                if (fm > 0) == (flo > 0):
                    lo, flo = mid, fm
                else:
                    hi = mid
            theta_star = 0.5 * (lo + hi)
            omegas.append(L * H0 * pd(theta_star))
    return omegas


@dataclass
class HoldInResult:
    union: IntervalUnion
    omega_max: float
    residuals: list
    sample_count: int


def hold_in_set(spec, omega_max=None, grid=2048, signed=False, jobs=1):
    """Sweep the hold-in membership predicate and return the interval union.

    Membership at omega means at least one asymptotically stable equilibrium
    exists there (marginal verdicts are excluded).  Boundaries between
    differing grid verdicts are refined by bisection to 1e-6 * omega_max.
    Grid verdicts are independent; jobs > 1 evaluates them on a thread pool
    (ordered reduction keeps the result identical).
    """
    if grid < 64:
        raise ValueError("grid must be at least 64")
    model = build(spec).with_omega(0.0)
    bound = existence_bound(model)
    if omega_max is None:
        if math.isinf(bound):
            raise ValueError("omega_max is required for filters with a pole at s = 0")
        omega_max = 1.01 * bound
    omega_max = float(omega_max)

    lo_edge = -omega_max if signed else 0.0
    base = np.linspace(lo_edge, omega_max, 2 * grid + 1 if signed else grid)
    seeds = []
    delta = 1e-9 * omega_max
    for w in candidate_boundary_omegas(spec):
        for cand in ((w, -w) if signed else (abs(w),)):
            for s in (cand - delta, cand, cand + delta):
                if lo_edge <= s <= omega_max:
                    seeds.append(s)
    samples = np.unique(np.concatenate([base, np.asarray(seeds, dtype=float)]))

    def member(w):
        return _has_stable_equilibrium(model, w)

    if jobs and jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            flags = list(pool.map(member, samples))
    else:
        flags = [member(w) for w in samples]
    union, residuals = union_from_samples(samples, flags, member, tol=1e-6 * omega_max)
    return HoldInResult(union=union, omega_max=omega_max,
                        residuals=residuals, sample_count=len(samples))


def hold_in_frequency(spec, hold_in, grid=512):
    """Upper end of the hold-in interval containing 0, branch-continuity checked.

    Returns 0.0 when 0 is not in the hold-in set.  The stable equilibrium
    branch is tracked across the interval; a jump larger than 10x the
    step-induced bound truncates the result at the last continuous point.
    """
    iv = hold_in.interval_containing(0.0)
    if iv is None:
        return 0.0
    model = build(spec).with_omega(0.0)
    period = model.pd.period
    omegas = np.linspace(0.0, iv.hi, grid, endpoint=False)
    step = iv.hi / grid

    prev_theta = None
    prev_jump = None
    for w in omegas:
        stable = stable_equilibria(model.with_omega(w))
        if not stable:
            continue
        thetas = np.array([eq.theta for eq in stable])
        if prev_theta is None:
            theta = thetas[np.argmin(np.abs(thetas))]
            dphi = model.pd.derivative(theta)
            H0 = model.fr.tf.dc_gain()
            slope = 1.0 / (model.vco_gain * abs(H0) * max(abs(dphi), 1e-6))
            prev_jump = max(step * slope, period / 1e4)
        else:
            k = int(np.argmin(np.abs(thetas - prev_theta)))
            theta = thetas[k]
            jump = abs(theta - prev_theta)
            if jump > 10.0 * max(prev_jump, period / 1e4):
                return float(w - step)
            prev_jump = max(jump, period / 1e6)
        prev_theta = theta
    return float(iv.hi)
