"""Phase-plane artifacts for loops with one filter state.

Everything here lives in the (x, theta) plane: saddle separatrices traced
by forward/reverse integration from eigenvector offsets, rasterized lock-in
domains (cell = decided by one simulation), the intersection of the +omega
and -omega domains with its maximal symmetric band, and the locus of initial
states with zero initial frequency difference.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .equilibria import find_equilibria
from .errors import RefusalError
from .model import build
from .sim import integrate_batch, suggested_step
from .stability import classified_equilibria, jacobian

DIRECTIONS = ("stable-branch-1", "stable-branch-2",
              "unstable-branch-1", "unstable-branch-2")


def _require_planar(model):
    if model.fr.order != 1:
        raise RefusalError("portrait operations require a first-order filter")


def saddles(model):
    """Equilibria whose Jacobian has one positive and one negative eigenvalue."""
    _require_planar(model)
    out = []
    for eq in find_equilibria(model):
        lam = np.linalg.eigvals(jacobian(model, eq))
        if np.all(np.abs(lam.imag) < 1e-12) and lam.real.min() < 0 < lam.real.max():
            out.append((eq, lam.real))
    return out


@dataclass
class Separatrix:
    saddle: object
    direction: str          # one of DIRECTIONS
    polyline: np.ndarray    # (n, 2) columns x, theta

    @property
    def is_stable_branch(self):
        return self.direction.startswith("stable")


def default_box_halfwidth(model):
    """Half-width of the plotting box in x: covers 3x the equilibrium offset."""
    eqs = find_equilibria(model)
    x_eq = abs(eqs[0].x[0]) if eqs else 0.0
    return 3.0 * x_eq + 0.05


def trace_separatrices(model, horizon=3.0, eps_offset=1e-7, x_bound=None):
    """Integrate the four branches out of every saddle.

    Stable branches run in reverse time, unstable forward; each stops at the
    horizon or when |x| leaves ten times the plot box.
    """
    _require_planar(model)
    if x_bound is None:
        x_bound = 10.0 * default_box_halfwidth(model)
    out = []
    f = model.rhs_fn()

    def escape(t, y):
        return abs(y[0]) - x_bound
    escape.terminal = True

    for eq, lam in saddles(model):
        J = jacobian(model, eq)
        vals, vecs = np.linalg.eig(J)
        order = np.argsort(vals.real)          # [stable, unstable]
        for kind, col in (("stable", order[0]), ("unstable", order[1])):
            v = vecs[:, col].real
            v = v / np.linalg.norm(v)
            sign_rhs = 1.0 if kind == "unstable" else -1.0
            for i, sgn in enumerate((+1.0, -1.0)):
                y0 = eq.state() + sgn * eps_offset * v
                sol = solve_ivp(lambda t, y: sign_rhs * f(t, y), (0.0, horizon), y0,
                                method="RK45", rtol=1e-9, atol=1e-12, events=escape)
                poly = sol.y.T
                out.append(Separatrix(saddle=eq,
                                      direction=f"{kind}-branch-{i + 1}",
                                      polyline=poly))
    return out


@dataclass
class MembershipGrid:
    """Rasterized no-slip lock membership: 1 member, 0 not, 2 undecided."""

    x_centers: np.ndarray
    theta_centers: np.ndarray
    codes: np.ndarray       # shape (len(x_centers), len(theta_centers))
    omega: float

    def fraction_member(self):
        return float((self.codes == 1).mean())


def _cell_centers(model, grid, x_half):
    nx, nth = grid
    period = model.pd.period
    dx = 2.0 * x_half / nx
    dth = period / nth
    xs = -x_half + dx / 2 + dx * np.arange(nx)
    ths = -period / 2 + dth / 2 + dth * np.arange(nth)
    return xs, ths


def _raster(model, eq, grid, x_half, horizon, step, mode):
    """Shared raster driver; mode is "well" or "noslip".

    "well": member cells lock to eq's branch family without the phase ever
    crossing the saddle wraps bracketing the start.  This is the basin the
    figures shade, bounded by the stable separatrices; a mere slip count
    would admit single-well transits (a deviation under one full period
    counts as zero slips by the limsup definition).

    "noslip": member cells lock to the branch family with final phase
    displacement within one period - cycle slipping per the limsup
    definition.  The uniform-domain band construction lives in this set.
    """
    stable = [e for e in classified_equilibria(model)
              if e.stability == "asymptotically-stable"]
    if not stable:
        raise RefusalError("no stable equilibria")
    _require_planar(model)
    if x_half is None:
        x_half = default_box_halfwidth(model)
    xs, ths = _cell_centers(model, grid, x_half)
    mesh = np.meshgrid(xs, ths, indexing="ij")
    inits = np.stack([m.ravel() for m in mesh], axis=1)
    period = model.pd.period
    if step is None:
        step = suggested_step(model, x_scale=x_half)
    out = integrate_batch(model, inits, horizon=horizon, step=step,
                          stable_eqs=stable, slip_stop_periods=2.0)
    branch_ok = np.abs(_wrap(out.locked_theta - eq.theta, period)) < 1e-6
    member = out.locked & branch_ok
    sad = saddles(model)
    if mode == "well" and sad:
        theta_s = sad[0][0].theta
        above = theta_s + period * np.ceil((inits[:, -1] - theta_s) / period)
        member &= (out.theta_max < above) & (out.theta_min > above - period)
    else:
        member &= np.abs(out.final[:, -1] - inits[:, -1]) <= period
    undecided = (out.status == 0) & ~out.divergent
    codes = np.where(member, 1, np.where(undecided, 2, 0)).astype(np.int8)
    return MembershipGrid(x_centers=xs, theta_centers=ths,
                          codes=codes.reshape(len(xs), len(ths)),
                          omega=model.omega_free)


def local_lock_in_domain(model, eq, grid=(200, 200), x_half=None, horizon=8.0,
                         step=None):
    """Rasterize the basin that locks to eq's branch without leaving its well.

    This is the per-equilibrium domain the phase portraits shade; its
    boundary follows the stable saddle separatrices.
    """
    return _raster(model, eq, grid, x_half, horizon, step, mode="well")


def _wrap(theta, period):
    return theta - period * np.round(theta / period)


@dataclass
class UniformDomain:
    plus: MembershipGrid
    minus: MembershipGrid
    intersection: np.ndarray
    equilibria_inside: bool
    band_half_width: float
    omega: float


def uniform_domain_intersection(spec, omega, grid=(200, 200), x_half=None,
                                horizon=8.0, eq_samples=33):
    """Intersect the no-slip domains of +omega and -omega.

    Membership is judged by the slip definitions themselves (lock with final
    phase displacement within one period), which is the set the band
    approximation of the uniform domain lives in.  The detector must be odd:
    the -omega domain is then the point mirror of the +omega one, which this
    exploits instead of paying a second raster.  Reports whether the locked
    states of every |w| <= omega sit inside the intersection, and the widest
    symmetric band |x| <= w contained in it.
    """
    if not spec.pd.odd:
        raise RefusalError("procedure requires odd characteristic")
    model = build(spec).with_omega(float(omega))
    stable = [e for e in classified_equilibria(model)
              if e.stability == "asymptotically-stable"]
    if not stable:
        raise RefusalError("no stable equilibria")
    target = min(stable, key=lambda e: abs(e.theta))
    plus = _raster(model, target, grid, x_half, horizon, None, mode="noslip")
    minus = MembershipGrid(x_centers=plus.x_centers,
                           theta_centers=plus.theta_centers,
                           codes=plus.codes[::-1, ::-1].copy(),
                           omega=-float(omega))
    inter = ((plus.codes == 1) & (minus.codes == 1)).astype(np.int8)

    xs, ths = plus.x_centers, plus.theta_centers
    dx = xs[1] - xs[0] if len(xs) > 1 else 0.0
    dth = ths[1] - ths[0] if len(ths) > 1 else 0.0

    def inside(x, th):
        i = int(np.argmin(np.abs(xs - x)))
        j = int(np.argmin(np.abs(ths - th)))
        if abs(xs[i] - x) > dx or abs(ths[j] - th) > dth:
            return False
        return bool(inter[i, j])

    eq_ok = True
    for w in np.linspace(-float(omega), float(omega), eq_samples):
        m = model.with_omega(float(w))
        for eq in classified_equilibria(m):
            if eq.stability != "asymptotically-stable":
                continue
            if not inside(float(eq.x[0]), float(eq.theta)):
                eq_ok = False

    band = 0.0
    order = np.argsort(np.abs(xs))
    for i in order:
        if np.all(inter[i, :] == 1):
            band = max(band, abs(xs[i]) + dx / 2)
        else:
            break
    return UniformDomain(plus=plus, minus=minus, intersection=inter,
                         equilibria_inside=eq_ok, band_half_width=band,
                         omega=float(omega))


def zero_freq_diff_locus(model, samples=256):
    """States whose initial frequency difference vanishes: theta' = 0.

    Returns an (n, 2) polyline of (x, theta) with
    x = (omega_free - L h phi(theta)) / (L c), one detector period wide.
    """
    _require_planar(model)
    c = float(model.fr.c[0])
    if c == 0.0:
        raise RefusalError("degenerate locus")
    period = model.pd.period
    ths = np.linspace(-period / 2, period / 2, samples, endpoint=False)
    L = model.vco_gain
    x = (model.omega_free - L * model.fr.h * model.pd(ths)) / (L * c)
    return np.stack([x, ths], axis=1)


def locus_lock_and_slip_points(model, samples=64, horizon=8.0):
    """A pair of zero-initial-frequency-difference states with opposite fates.

    Scans the locus, simulating each point; returns (locking state, slipping
    state) or raises when the locus is single-fated on this grid.
    """
    locus = zero_freq_diff_locus(model, samples=samples)
    stable = [e for e in classified_equilibria(model)
              if e.stability == "asymptotically-stable"]
    out = integrate_batch(model, locus, horizon=horizon,
                          step=suggested_step(model, x_scale=float(np.abs(locus[:, 0]).max())),
                          stable_eqs=stable, slip_stop_periods=2.0)
    displacement = np.abs(out.final[:, -1] - locus[:, -1])
    no_slip_lock = out.locked & (displacement <= model.pd.period)
    slipped = (out.status == 2) | out.divergent
    if not (no_slip_lock.any() and slipped.any()):
        raise RefusalError("locus points do not split into lock and slip cases")
    return locus[np.argmax(no_slip_lock)], locus[np.argmax(slipped)]


# ---------------------------------------------------------------------------
# Vector-graphics export (self-contained SVG).

def render_portrait_svg(path, model, separatrices=(), domain=None, locus=None,
                        width=640, height=480):
    """Write a deterministic SVG of separatrices, equilibria and domain cells."""
    period = model.pd.period
    x_half = default_box_halfwidth(model)
    th_lo, th_hi = -period / 2, period / 2

    def to_px(x, th):
        px = (th - th_lo) / (th_hi - th_lo) * (width - 40) + 20
        py = height - ((x + x_half) / (2 * x_half) * (height - 40) + 20)
        return px, py

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{height}" viewBox="0 0 {width} {height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>']
    if domain is not None:
        xs, ths, codes = domain.x_centers, domain.theta_centers, domain.codes
        dx = xs[1] - xs[0] if len(xs) > 1 else 2 * x_half
        dth = ths[1] - ths[0] if len(ths) > 1 else period
        for i, xv in enumerate(xs):
            for j, tv in enumerate(ths):
                if codes[i, j] == 1:
                    px, py = to_px(xv + dx / 2, tv - dth / 2)
                    pw, ph = to_px(xv - dx / 2, tv + dth / 2)
                    parts.append(
                        '<rect x="%.2f" y="%.2f" width="%.2f" height="%.2f" '
                        'fill="#c8e6c9"/>' % (px, py, pw - px, ph - py))
    for sep in separatrices:
        pts = " ".join("%.2f,%.2f" % to_px(x, th) for x, th in sep.polyline
                       if th_lo - period <= th <= th_hi + period)
        color = "#212121" if sep.is_stable_branch else "#b71c1c"
        if pts:
            parts.append(f'<polyline points="{pts}" fill="none" '
                         f'stroke="{color}" stroke-width="1"/>')
    if locus is not None:
        pts = " ".join("%.2f,%.2f" % to_px(x, th) for x, th in locus)
        parts.append(f'<polyline points="{pts}" fill="none" stroke="#1a237e" '
                     f'stroke-width="1" stroke-dasharray="4,3"/>')
    for eq in classified_equilibria(model):
        px, py = to_px(float(eq.x[0]), float(eq.theta))
        fill = "#2e7d32" if eq.stability == "asymptotically-stable" else "#000000"
        parts.append('<circle cx="%.2f" cy="%.2f" r="4" fill="%s"/>' % (px, py, fill))
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
