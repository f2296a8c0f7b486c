import math

import numpy as np
import pytest

from pllranges import (IntegratorConfig, LoopSpec, RefusalError, build,
                       integrate, make_pd)
from pllranges.loopfilter import FilterRealization
from pllranges.model import PllModel
from pllranges.portrait import (DIRECTIONS, default_box_halfwidth,
                                local_lock_in_domain, locus_lock_and_slip_points,
                                render_portrait_svg, saddles, trace_separatrices,
                                uniform_domain_intersection, zero_freq_diff_locus)
from pllranges.stability import stable_equilibria


def point_to_polyline(points, poly):
    """Max over points of the distance to the nearest polyline segment."""
    a = poly[:-1]
    b = poly[1:]
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    denom[denom == 0] = 1.0
    worst = 0.0
    for p in points:
        t = np.clip(((p - a) * ab).sum(axis=1) / denom, 0.0, 1.0)
        proj = a + t[:, None] * ab
        worst = max(worst, float(np.min(np.linalg.norm(proj - p, axis=1))))
    return worst


def test_saddle_detection(spec_fig9):
    m = build(spec_fig9).with_omega(61.5)
    found = saddles(m)
    assert len(found) == 1
    eq, lam = found[0]
    assert lam.min() < 0 < lam.max()
    # the saddle is the other branch than the stable equilibrium
    st = stable_equilibria(m)[0]
    assert abs(eq.theta - st.theta) > 0.5


def test_separatrices_at_zero_offset_symmetric(spec_fig9):
    m = build(spec_fig9).with_omega(0.0)
    seps = trace_separatrices(m, horizon=2.0)
    assert len(seps) == 4
    assert sorted(s.direction for s in seps) == sorted(DIRECTIONS)
    period = m.pd.period
    for sep in seps:
        # the negated-and-wrapped seed must be a seed of the family too
        seed = sep.polyline[0]
        mirrored = np.array([-seed[0], -seed[1]])
        hits = []
        for other in seps:
            for k in (-1.0, 0.0, 1.0):
                cand = other.polyline[0] + np.array([0.0, k * period])
                hits.append(np.linalg.norm(cand - mirrored))
        assert min(hits) < 1e-5


def test_separatrix_starts_at_saddle_offset(spec_fig9):
    m = build(spec_fig9).with_omega(40.0)
    for sep in trace_separatrices(m, horizon=1.5, eps_offset=1e-7):
        d = np.linalg.norm(sep.polyline[0] - sep.saddle.state())
        assert d == pytest.approx(1e-7, rel=1e-6)


def test_separatrix_mirror_pairs_at_65(spec_fig9):
    plus = trace_separatrices(build(spec_fig9).with_omega(65.0), horizon=1.5)
    minus = trace_separatrices(build(spec_fig9).with_omega(-65.0), horizon=1.5)
    period = build(spec_fig9).pd.period
    for sep in minus:
        pts = -sep.polyline[::25]
        best = math.inf
        for other in plus:
            for k in (-1.0, 0.0, 1.0):
                shifted = pts + np.array([0.0, k * period])
                best = min(best, point_to_polyline(shifted, other.polyline))
        assert best <= 1e-4


def test_separatrix_is_invariant_curve(spec_fig9):
    m = build(spec_fig9).with_omega(40.0)
    seps = [s for s in trace_separatrices(m, horizon=1.2)
            if s.direction == "stable-branch-1"]
    poly = seps[0].polyline
    # two points on the branch, the second traced further out in reverse
    # time; the forward flow from the outer one must pass through the inner
    k1, k2 = 25, 60
    cfg = IntegratorConfig(rel_tol=1e-11, abs_tol=1e-14, horizon=1.0)
    traj = integrate(m, poly[k2], cfg)
    assert point_to_polyline(poly[k1][None, :], traj.y) <= 1e-5


def test_local_domain_contains_equilibrium(spec_fig9):
    m = build(spec_fig9).with_omega(61.5)
    eq = stable_equilibria(m)[0]
    dom = local_lock_in_domain(m, eq, grid=(40, 32), horizon=6.0)
    i = int(np.argmin(np.abs(dom.x_centers - eq.x[0])))
    j = int(np.argmin(np.abs(dom.theta_centers - eq.theta)))
    assert dom.codes[i, j] == 1
    assert 0.1 < dom.fraction_member() < 0.9


def test_local_domain_refusals(spec_example2):
    # no stable equilibria wins over the dimensionality refusal
    m35 = build(spec_example2).with_omega(35.0)
    with pytest.raises(RefusalError, match="no stable equilibria"):
        local_lock_in_domain(m35, None)
    m3 = build(spec_example2).with_omega(3.0)
    eq = stable_equilibria(m3)[0]
    with pytest.raises(RefusalError, match="first-order filter"):
        local_lock_in_domain(m3, eq)


def wrap(theta, period):
    return theta - period * np.round(theta / period)


def test_domain_boundary_matches_separatrix(spec_fig9):
    # raster membership boundary within two cells of the traced stable
    # separatrix, checked on the column through the stable equilibrium
    m = build(spec_fig9).with_omega(61.5)
    eq = stable_equilibria(m)[0]
    period = m.pd.period
    dom = local_lock_in_domain(m, eq, grid=(120, 48), horizon=8.0)
    dx = dom.x_centers[1] - dom.x_centers[0]
    seps = [s for s in trace_separatrices(m, horizon=2.0)
            if s.is_stable_branch]
    j = int(np.argmin(np.abs(dom.theta_centers - eq.theta)))
    col = dom.codes[:, j]
    members = np.nonzero(col == 1)[0]
    x_hi_raster = dom.x_centers[members.max()]
    # separatrix passes above the equilibrium on some phase wrap
    cands = []
    for sep in seps:
        poly = sep.polyline
        sel = np.abs(wrap(poly[:, 1] - dom.theta_centers[j], period)) < 0.05
        cands.extend(poly[sel, 0])
    upper = min(x for x in cands if x > eq.x[0])
    assert abs(upper - x_hi_raster) <= 2 * dx


def test_probes_across_separatrix_transit(spec_fig9):
    # a state just across the stable separatrix leaves its well (the figure
    # sense of slipping a cycle) even though a single-well transit counts as
    # zero slips under the limsup definition
    m = build(spec_fig9).with_omega(61.5)
    eq = stable_equilibria(m)[0]
    from pllranges.portrait import saddles as find_saddles
    theta_s = find_saddles(m)[0][0].theta
    period = m.pd.period
    seps = [s for s in trace_separatrices(m, horizon=2.0) if s.is_stable_branch]
    poly = max(seps, key=lambda s: s.polyline[:, 0].max()).polyline
    sel = (np.abs(wrap(poly[:, 1], period)) < 2.0) \
        & (poly[:, 0] > eq.x[0] + 1e-3) & (poly[:, 0] < 0.08)
    pts = poly[sel]
    assert len(pts) >= 20
    idx = np.linspace(0, len(pts) - 1, 50).astype(int)
    cfg = IntegratorConfig(horizon=8.0)
    transits = 0
    for p in pts[idx]:
        probe = p + np.array([5e-4, 0.0])
        s_above = theta_s + period * math.ceil((probe[1] - theta_s) / period)
        traj = integrate(m, probe, cfg, stop_on_slip_periods=2.0)
        if traj.theta.min() < s_above - period or traj.theta.max() > s_above:
            transits += 1
    assert transits >= 45


def test_uniform_domain_zero_offset_is_single_domain(spec_fig9):
    u = uniform_domain_intersection(spec_fig9, 0.0, grid=(40, 32), horizon=6.0)
    assert np.array_equal(u.intersection, (u.plus.codes == 1).astype(np.int8))
    assert u.equilibria_inside


def test_uniform_domain_band_fig10(spec_fig9):
    u = uniform_domain_intersection(spec_fig9, 61.5, grid=(120, 64), horizon=8.0)
    assert u.band_half_width == pytest.approx(0.0110, rel=0.15)
    assert u.equilibria_inside


def test_uniform_domain_band_pi(spec_fig11):
    # PI loop: the empirical intersection band sits just inside the
    # equilibrium offset |x_eq| = omega/(L c) of the realized state
    m = build(spec_fig11)
    x_eq = 47.0 / (250.0 * float(m.fr.c[0]))
    u = uniform_domain_intersection(spec_fig11, 47.0, grid=(120, 64), horizon=8.0)
    assert u.equilibria_inside
    assert 0.7 * x_eq <= u.band_half_width <= 1.1 * x_eq


def test_uniform_domain_fig9_right_excludes_equilibria(spec_fig9):
    u = uniform_domain_intersection(spec_fig9, 68.0, grid=(100, 48), horizon=8.0)
    assert not u.equilibria_inside


def test_uniform_domain_requires_odd(tf_leadlag):
    nodes = np.linspace(-math.pi, math.pi, 32, endpoint=False)
    pd = make_pd("tabulated-periodic", math.tau, nodes=nodes,
                 values=0.4 * np.sin(nodes) + 0.1 * np.cos(nodes))
    with pytest.raises(RefusalError, match="odd characteristic"):
        uniform_domain_intersection(LoopSpec(pd, tf_leadlag, 250.0), 10.0)


def test_locus_theta_dot_vanishes(spec_fig9):
    m = build(spec_fig9).with_omega(100.0)
    locus = zero_freq_diff_locus(m, samples=200)
    worst = max(abs(m.rhs(0.0, p)[-1]) for p in locus)
    assert worst <= 1e-12


def test_locus_through_origin_at_zero_offset(spec_fig9):
    m = build(spec_fig9).with_omega(0.0)
    locus = zero_freq_diff_locus(m, samples=256)
    # at phases where phi vanishes the locus passes through x = 0
    k = int(np.argmin(np.abs(locus[:, 1])))
    assert abs(locus[k, 0]) < 1e-9


def test_locus_degenerate_dataclass_guard(spec_fig9):
    m = build(spec_fig9)
    fr = m.fr
    broken = PllModel(pd=m.pd,
                      fr=FilterRealization(A=fr.A, b=fr.b, c=np.array([0.0]),
                                           h=fr.h, order=1, tf=fr.tf),
                      vco_gain=m.vco_gain, omega_free=m.omega_free)
    with pytest.raises(RefusalError, match="degenerate locus"):
        zero_freq_diff_locus(broken)


def test_example3_locus_lock_and_slip(spec_fig9):
    pd2 = make_pd("sinusoidal-double-half", math.pi)
    spec3 = LoopSpec(pd2, spec_fig9.tf, 250.0, 100.0)
    m = build(spec3)
    lock_pt, slip_pt = locus_lock_and_slip_points(m, samples=64, horizon=8.0)
    cfg = IntegratorConfig(horizon=8.0)
    a = integrate(m, lock_pt, cfg)
    assert a.lock_verdict == "locked" and a.slip_count == 0
    b = integrate(m, slip_pt, cfg)
    assert b.slip_count >= 1 or b.lock_verdict != "locked"


def test_portrait_svg_deterministic(tmp_path, spec_fig9):
    m = build(spec_fig9).with_omega(61.5)
    seps = trace_separatrices(m, horizon=1.0)
    locus = zero_freq_diff_locus(m, samples=64)
    eq = stable_equilibria(m)[0]
    dom = local_lock_in_domain(m, eq, grid=(20, 16), horizon=5.0)
    p1, p2 = tmp_path / "a.svg", tmp_path / "b.svg"
    render_portrait_svg(p1, m, separatrices=seps, domain=dom, locus=locus)
    render_portrait_svg(p2, m, separatrices=seps, domain=dom, locus=locus)
    s1 = p1.read_bytes()
    assert s1 == p2.read_bytes()
    assert b"<svg" in s1 and b"polyline" in s1 and b"circle" in s1


def test_default_box_covers_domain(spec_fig9):
    m = build(spec_fig9).with_omega(61.5)
    assert default_box_halfwidth(m) == pytest.approx(3 * 0.0448 * 61.5 / 250 + 0.05,
                                                     rel=1e-9)
