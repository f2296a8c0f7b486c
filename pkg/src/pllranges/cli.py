"""Command-line front end: deterministic reports and artifact files.

Exit codes: 0 success, 1 computation refusal (unsupported case, printed as a
single ``refused: ...`` line on stderr), 2 configuration error.  Output text
and files contain no timestamps or environment echoes, so a rerun with the
same config is byte-identical.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from .config import BUNDLED, load_config
from .equilibria import find_equilibria, existence_bound
from .errors import ConfigError, RefusalError
from .model import build
from .portrait import (local_lock_in_domain, render_portrait_svg,
                       trace_separatrices, uniform_domain_intersection,
                       zero_freq_diff_locus)
from .ranges import StateBox, lock_in_band, lock_in_frequency, pull_in_estimate
from .sim import IntegratorConfig, integrate, pi_lyapunov_series
from .stability import classified_equilibria, hold_in_frequency, hold_in_set

_F = "%.12g"


def _fmt(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return _F % x


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, float) and math.isinf(obj):
        return "inf"
    raise TypeError(f"not serializable: {type(obj)}")


def _write_json(outdir, name, payload):
    if outdir is None:
        return
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, name), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _write_text(outdir, name, text):
    if outdir is None:
        return
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, name), "w", encoding="utf-8") as fh:
        fh.write(text)


def _realization_echo(model):
    fr = model.fr
    return {
        "A": fr.A.tolist(), "b": fr.b.tolist(), "c": fr.c.tolist(),
        "h": fr.h, "order": fr.order,
    }


def _print_realization(model):
    fr = model.fr
    print("realization: order=%d h=%s" % (fr.order, _fmt(fr.h)))
    if fr.order:
        print("  A = %s" % np.array2string(fr.A, formatter={"float": _fmt}))
        print("  b = %s" % np.array2string(fr.b, formatter={"float": _fmt}))
        print("  c = %s" % np.array2string(fr.c, formatter={"float": _fmt}))


def _interval_list(union):
    return [{"lo": iv.lo, "hi": iv.hi, "lo_closed": iv.lo_closed,
             "hi_closed": iv.hi_closed} for iv in union]


def cmd_equilibria(cfg, args):
    model = build(cfg.spec)
    _print_realization(model)
    eqs = classified_equilibria(model)
    rows = []
    for eq in eqs:
        res = float(np.max(np.abs(model.rhs(0.0, eq.state()))))
        rows.append({"branch": eq.branch, "theta": eq.theta,
                     "x": eq.x.tolist(), "stability": eq.stability,
                     "residual": res})
        print("equilibrium branch=%d theta=%s x=%s stability=%s residual=%s"
              % (eq.branch, _fmt(eq.theta),
                 "[" + ", ".join(_fmt(v) for v in eq.x) + "]",
                 eq.stability, _fmt(res)))
    if not eqs:
        print("no equilibria at omega_delta_free = %s" % _fmt(cfg.spec.omega_free))
    bound = existence_bound(model)
    print("existence bound: %s" % _fmt(bound))
    _write_json(args.out, "equilibria.json", {
        "realization": _realization_echo(model),
        "omega_delta_free": cfg.spec.omega_free,
        "existence_bound": bound, "equilibria": rows,
    })
    return 0


def cmd_holdin(cfg, args):
    opts = cfg.options
    omega_max = args.omega_max if args.omega_max is not None \
        else opts.get("holdin.omega_max")
    grid = args.grid if args.grid is not None else opts.get("holdin.grid", 2048)
    try:
        result = hold_in_set(cfg.spec, omega_max=omega_max, grid=grid,
                             jobs=args.jobs)
    except ValueError as exc:
        raise RefusalError(str(exc)) from exc
    omega_h = hold_in_frequency(cfg.spec, result.union)
    model = build(cfg.spec)
    _print_realization(model)
    print("hold-in set: %s" % result.union)
    print("hold-in frequency omega_h: %s%s"
          % (_fmt(omega_h), "" if omega_h > 0 else " (0 not in the set)"))
    worst = max(result.residuals) if result.residuals else 0.0
    print("sweep: %d samples, omega_max=%s, worst boundary residual %s"
          % (result.sample_count, _fmt(result.omega_max), _fmt(worst)))
    _write_json(args.out, "holdin.json", {
        "realization": _realization_echo(model),
        "intervals": _interval_list(result.union),
        "omega_h": omega_h, "omega_max": result.omega_max,
        "samples": result.sample_count,
        "boundary_residuals": result.residuals,
    })
    return 0


def _default_box(spec, omega_max):
    model = build(spec)
    bound = existence_bound(model)
    probe = 0.8 * min(omega_max, bound if math.isfinite(bound) else omega_max)
    eqs = find_equilibria(model.with_omega(probe))
    n = model.fr.order
    if eqs and n:
        half = 3.0 * np.abs(eqs[0].x) + 0.05
    else:
        half = np.full(max(n, 1), 0.05)
    return StateBox(tuple(-half[:n]) if n else (), tuple(half[:n]) if n else ())


def cmd_pullin(cfg, args):
    opts = cfg.options
    model = build(cfg.spec)
    bound = existence_bound(model)
    omega_max = args.omega_max if args.omega_max is not None \
        else opts.get("pullin.omega_max")
    if omega_max is None:
        if not math.isfinite(bound):
            raise RefusalError("pullin needs an explicit omega_max for PI filters")
        omega_max = 1.01 * bound
    if args.xreal is not None:
        lo, hi = (float(v) for v in args.xreal.split(","))
        n = model.fr.order
        box = StateBox((lo,) * n, (hi,) * n)
    elif "pullin.xreal" in opts:
        lo, hi = opts["pullin.xreal"]
        n = model.fr.order
        box = StateBox((lo,) * n, (hi,) * n)
    else:
        box = _default_box(cfg.spec, omega_max)
    report = pull_in_estimate(
        cfg.spec, box, omega_max,
        omega_grid=opts.get("pullin.omega_grid", 17),
        init_grid=(opts.get("pullin.init_grid_x", 9),
                   opts.get("pullin.init_grid_theta", 16)),
        horizon=args.horizon or opts.get("pullin.horizon", 20.0))
    _print_realization(model)
    print("pull-in set (%s): %s" % (report.label, report.union))
    print("X_real box: mins=%s maxs=%s" % (list(box.mins), list(box.maxs)))
    print("evidence (omega verdict locked/runs undecided):")
    for row in report.evidence:
        print("  %s %s %d/%d %d" % (_fmt(row["omega"]), row["verdict"],
                                    row.get("locked", 0), row.get("runs", 0),
                                    row.get("undecided", 0)))
    _write_json(args.out, "pullin.json", {
        "realization": _realization_echo(model),
        "label": report.label,
        "intervals": _interval_list(report.union),
        "omega_max": report.omega_max,
        "box": {"mins": list(box.mins), "maxs": list(box.maxs)},
        "evidence": report.evidence,
    })
    return 0


def cmd_lockin(cfg, args):
    opts = cfg.options
    model = build(cfg.spec)
    _print_realization(model)
    threshold = 0.5 if (args.pi_threshold
                        or opts.get("lockin.pi_threshold", False)) else 1.0
    horizon = args.horizon or opts.get("lockin.horizon", 10.0)
    icfg = IntegratorConfig(rel_tol=cfg.integrator.rel_tol,
                            abs_tol=cfg.integrator.abs_tol, horizon=horizon)
    payload = {"realization": _realization_echo(model),
               "slip_threshold_periods": threshold}
    band_at = args.band_at if args.band_at is not None \
        else opts.get("lockin.band_at")
    if band_at is None:
        hint = args.hint if args.hint is not None \
            else opts.get("lockin.omega_hint")
        if hint is None:
            bound = existence_bound(model)
            hint = 0.25 * bound if math.isfinite(bound) else abs(model.omega_free) or 1.0
        result = lock_in_frequency(cfg.spec, hint, cfg=icfg,
                                   slip_threshold_periods=threshold)
        print("lock-in frequency omega_l: %s" % _fmt(result.omega_l))
        print("bracket: [%s, %s]" % (_fmt(result.bracket[0]), _fmt(result.bracket[1])))
        print("P monotone near boundary: %s" % ("yes" if result.monotone_ok
                                                else "NO (reported, not silent)"))
        payload.update({"omega_l": result.omega_l, "bracket": list(result.bracket),
                        "monotone_ok": result.monotone_ok,
                        "evidence": result.evidence})
    else:
        band = lock_in_band(cfg.spec, band_at, horizon=max(horizon, 12.0),
                            slip_threshold_periods=threshold)
        print("band half-width |x_eq(%s)|: %s" % (_fmt(band_at), _fmt(band.half_width)))
        print("band verification: %d violations / %d runs"
              % (band.violations, band.runs))
        payload.update({"band_at": band_at, "half_width": band.half_width,
                        "violations": band.violations, "runs": band.runs})
    _write_json(args.out, "lockin.json", payload)
    return 0


def cmd_simulate(cfg, args):
    opts = cfg.options
    model = build(cfg.spec)
    _print_realization(model)
    n = model.fr.order
    x0 = opts.get("simulate.x0", [0.0] * n)
    if args.x0 is not None:
        x0 = [float(v) for v in args.x0.split(",")] if args.x0 else []
    theta0 = args.theta0 if args.theta0 is not None \
        else opts.get("simulate.theta0", 0.0)
    icfg = cfg.integrator
    if args.horizon:
        icfg = IntegratorConfig(method=icfg.method, rel_tol=icfg.rel_tol,
                                abs_tol=icfg.abs_tol, max_step=icfg.max_step,
                                min_step=icfg.min_step, horizon=args.horizon)
    if len(x0) != n:
        raise ConfigError("state dimension", key="simulate.x0")
    traj = integrate(model, list(x0) + [float(theta0)], icfg)
    print("samples: %d over T=%s" % (len(traj.t), _fmt(icfg.horizon)))
    print("lock verdict: %s" % traj.lock_verdict)
    if traj.locked_to is not None:
        print("locked to branch theta=%s" % _fmt(traj.locked_to.theta))
    print("cycle slips k=%d (limsup estimated over the trailing window); "
          "slipped: limsup=%s sup=%s"
          % (traj.slip_count, traj.slip_limsup, traj.slip_sup))
    header = ["t"] + [f"x_{i+1}" for i in range(n)] + ["theta_unwrapped",
                                                       "theta_wrapped", "g"]
    lines = [",".join(header)]
    wrapped = traj.theta_wrapped()
    g = traj.filter_output()
    for k in range(len(traj.t)):
        row = [traj.t[k], *traj.y[k, :n], traj.y[k, n], wrapped[k], g[k]]
        lines.append(",".join(_fmt(v) for v in row))
    _write_text(args.out, "trajectory.csv", "\n".join(lines) + "\n")
    _write_json(args.out, "simulate.json", {
        "realization": _realization_echo(model),
        "verdict": traj.lock_verdict, "slips": traj.slip_count,
        "slip_limsup": traj.slip_limsup, "slip_sup": traj.slip_sup,
        "samples": len(traj.t),
    })
    return 0


def cmd_portrait(cfg, args):
    opts = cfg.options
    model = build(cfg.spec)
    _print_realization(model)
    grid = (args.grid or opts.get("portrait.grid_x", 200),
            args.grid or opts.get("portrait.grid_theta", 200))
    horizon = args.horizon or opts.get("portrait.horizon", 8.0)
    seps = trace_separatrices(model)
    print("separatrices traced: %d" % len(seps))
    sep_lines = ["kind,branch,x,theta"]
    for k, sep in enumerate(seps):
        for x, th in sep.polyline:
            sep_lines.append("separatrix,%s,%s,%s" % (sep.direction, _fmt(x), _fmt(th)))
    _write_text(args.out, "separatrices.csv", "\n".join(sep_lines) + "\n")

    locus = zero_freq_diff_locus(model, samples=opts.get("portrait.samples", 256))
    loc_lines = ["kind,branch,x,theta"]
    for x, th in locus:
        loc_lines.append("locus,0,%s,%s" % (_fmt(x), _fmt(th)))
    _write_text(args.out, "locus.csv", "\n".join(loc_lines) + "\n")

    domain = None
    payload = {"realization": _realization_echo(model), "separatrices": len(seps)}
    uniform_omega = args.uniform_omega if args.uniform_omega is not None \
        else opts.get("portrait.uniform_omega")
    if uniform_omega is not None:
        u = uniform_domain_intersection(cfg.spec, uniform_omega, grid=grid,
                                        horizon=horizon)
        domain = u.plus
        print("uniform domain at |omega| <= %s: band half-width %s, "
              "locked states inside: %s"
              % (_fmt(uniform_omega), _fmt(u.band_half_width),
                 "yes" if u.equilibria_inside else "NO"))
        raster = ["# x_centers=" + " ".join(_fmt(v) for v in u.plus.x_centers),
                  "# theta_centers=" + " ".join(_fmt(v) for v in u.plus.theta_centers)]
        raster += [",".join(str(int(v)) for v in row) for row in u.intersection]
        _write_text(args.out, "raster.csv", "\n".join(raster) + "\n")
        payload.update({"uniform_omega": uniform_omega,
                        "band_half_width": u.band_half_width,
                        "equilibria_inside": u.equilibria_inside,
                        "member_fraction": u.plus.fraction_member()})
    else:
        stable = [e for e in classified_equilibria(model)
                  if e.stability == "asymptotically-stable"]
        if stable:
            domain = local_lock_in_domain(model, stable[0], grid=grid,
                                          horizon=horizon)
            print("local lock-in domain member fraction: %s"
                  % _fmt(domain.fraction_member()))
            raster = ["# x_centers=" + " ".join(_fmt(v) for v in domain.x_centers),
                      "# theta_centers=" + " ".join(_fmt(v) for v in domain.theta_centers)]
            raster += [",".join(str(int(v)) for v in row) for row in domain.codes]
            _write_text(args.out, "raster.csv", "\n".join(raster) + "\n")
            payload["member_fraction"] = domain.fraction_member()
    if args.out is not None:
        os.makedirs(args.out, exist_ok=True)
        render_portrait_svg(os.path.join(args.out, "portrait.svg"), model,
                            separatrices=seps, domain=domain, locus=locus)
        print("portrait.svg written")
    _write_json(args.out, "portrait.json", payload)
    return 0


def cmd_lyapunov(cfg, args):
    opts = cfg.options
    model = build(cfg.spec)
    _print_realization(model)
    trials = args.trials or opts.get("lyapunov.trials", 10)
    horizon = args.horizon or opts.get("lyapunov.horizon", 10.0)
    seed = args.seed if args.seed is not None else opts.get("lyapunov.seed", 1)
    tf = model.fr.tf
    try:
        beta = tf.num[0] / tf.den[1] if tf.zero_pole_multiplicity() == 1 else None
        if beta is None or tf.order != 1:
            raise ValueError
    except (ValueError, IndexError):
        raise RefusalError("lyapunov-check needs a first-order PI filter")
    rng = np.random.default_rng(seed)
    L = model.vco_gain
    c = float(model.fr.c[0])
    x_eq = model.omega_free / (L * c)
    icfg = IntegratorConfig(rel_tol=1e-9, abs_tol=1e-12, horizon=horizon)
    worst = -math.inf
    for _ in range(trials):
        x0 = x_eq + rng.uniform(-1.0, 1.0) * max(abs(x_eq), 1.0 / (L * c) * 10)
        th0 = rng.uniform(-model.pd.period / 2, model.pd.period / 2)
        traj = integrate(model, [x0, th0], icfg)
        V = pi_lyapunov_series(traj)
        rise = np.diff(V) - 1e-8 * (1.0 + V[:-1])
        worst = max(worst, float(rise.max(initial=-math.inf)))
    ok = worst <= 0.0
    print("V non-increasing: %s (worst step rise beyond tolerance: %s)"
          % ("PASS" if ok else "FAIL", _fmt(worst)))
    _write_json(args.out, "lyapunov.json", {
        "realization": _realization_echo(model), "trials": trials,
        "verdict": "PASS" if ok else "FAIL", "worst_rise": worst,
    })
    return 0 if ok else 1


_COMMANDS = {
    "equilibria": cmd_equilibria,
    "holdin": cmd_holdin,
    "pullin": cmd_pullin,
    "lockin": cmd_lockin,
    "simulate": cmd_simulate,
    "portrait": cmd_portrait,
    "lyapunov-check": cmd_lyapunov,
}


def make_parser():
    p = argparse.ArgumentParser(
        prog="pllranges",
        description="Hold-in, pull-in and lock-in analysis of PLL loop models.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True,
                        help="config file path or bundled name (%s)" % ", ".join(BUNDLED))
        sp.add_argument("--out", default=None, help="artifact output directory")
        sp.add_argument("--jobs", type=int, default=1)
        if name == "holdin":
            sp.add_argument("--omega-max", dest="omega_max", type=float)
            sp.add_argument("--grid", type=int)
        if name == "pullin":
            sp.add_argument("--omega-max", dest="omega_max", type=float)
            sp.add_argument("--xreal", help="lo,hi bounds for the filter state box")
            sp.add_argument("--horizon", type=float)
        if name == "lockin":
            sp.add_argument("--hint", type=float)
            sp.add_argument("--band-at", dest="band_at", type=float)
            sp.add_argument("--pi-threshold", dest="pi_threshold",
                            action="store_true")
            sp.add_argument("--horizon", type=float)
        if name == "simulate":
            sp.add_argument("--x0", help="comma-separated initial filter state")
            sp.add_argument("--theta0", type=float)
            sp.add_argument("--horizon", "--T", type=float)
        if name == "portrait":
            sp.add_argument("--uniform-omega", dest="uniform_omega", type=float)
            sp.add_argument("--grid", type=int)
            sp.add_argument("--horizon", type=float)
        if name == "lyapunov-check":
            sp.add_argument("--trials", type=int)
            sp.add_argument("--seed", type=int)
            sp.add_argument("--horizon", type=float)
    return p


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    except RefusalError as exc:
        print("refused: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
