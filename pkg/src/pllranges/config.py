"""Strict TOML loop descriptions and bundled example configurations.

Unknown keys are rejected: a silently ignored typo in a time constant would
invalidate any attempt to reproduce a published figure.
"""

import math
import sys
from dataclasses import dataclass
from importlib import resources

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .loopfilter import TransferFunction
from .model import LoopSpec
from .nonlinearity import make_pd
from .sim import IntegratorConfig

BUNDLED = ("example1", "example2", "fig8", "fig9", "fig10", "fig11", "example3")

_SCHEMA = {
    "pd.kind": str,
    "pd.period": float,
    "pd.table.nodes": list,
    "pd.table.values": list,
    "pd.table.nonsmooth": list,
    "filter.num": list,
    "filter.den": list,
    "loop.L": float,
    "loop.omega_delta_free": float,
    "integrator.method": str,
    "integrator.rel_tol": float,
    "integrator.abs_tol": float,
    "integrator.max_step": float,
    "integrator.min_step": float,
    "integrator.horizon": float,
    "simulate.x0": list,
    "simulate.theta0": float,
    "holdin.omega_max": float,
    "holdin.grid": int,
    "pullin.omega_max": float,
    "pullin.omega_grid": int,
    "pullin.init_grid_x": int,
    "pullin.init_grid_theta": int,
    "pullin.xreal": list,
    "pullin.horizon": float,
    "lockin.omega_hint": float,
    "lockin.pi_threshold": bool,
    "lockin.band_at": float,
    "lockin.horizon": float,
    "portrait.grid_x": int,
    "portrait.grid_theta": int,
    "portrait.horizon": float,
    "portrait.uniform_omega": float,
    "portrait.samples": int,
    "lyapunov.trials": int,
    "lyapunov.horizon": float,
    "lyapunov.seed": int,
}
_REQUIRED = ("pd.kind", "pd.period", "filter.num", "filter.den", "loop.L")


def _flatten(tree, prefix=""):
    flat = {}
    for key, value in tree.items():
        path = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, path + "."))
        else:
            flat[path] = value
    return flat


def _coerce(path, value):
    want = _SCHEMA[path]
    if want is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError("expected a number", key=path)
        return float(value)
    if want is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError("expected an integer", key=path)
        return value
    if want is list:
        if not isinstance(value, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            raise ConfigError("expected an array of numbers", key=path)
        return [float(v) for v in value]
    if not isinstance(value, want):
        raise ConfigError(f"expected {want.__name__}", key=path)
    return value


@dataclass
class RunConfig:
    """Validated loop description plus per-subcommand parameter tables."""

    spec: LoopSpec
    integrator: IntegratorConfig
    options: dict
    source: str


def parse_config(text, source="<config>"):
    """Parse and validate a loop description; unknown keys are errors."""
    try:
        tree = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    flat = {}
    for path, value in _flatten(tree).items():
        if path not in _SCHEMA:
            raise ConfigError("unknown key", key=path)
        flat[path] = _coerce(path, value)
    for path in _REQUIRED:
        if path not in flat:
            raise ConfigError("missing required key", key=path)

    try:
        pd = make_pd(flat["pd.kind"], flat["pd.period"],
                     nodes=flat.get("pd.table.nodes"),
                     values=flat.get("pd.table.values"),
                     nonsmooth=flat.get("pd.table.nonsmooth"))
    except ValueError as exc:
        raise ConfigError(str(exc), key="pd") from exc
    try:
        tf = TransferFunction(tuple(flat["filter.num"]), tuple(flat["filter.den"]))
    except ValueError as exc:
        raise ConfigError(str(exc), key="filter") from exc
    try:
        spec = LoopSpec(pd=pd, tf=tf, vco_gain=flat["loop.L"],
                        omega_free=flat.get("loop.omega_delta_free", 0.0))
    except ValueError as exc:
        raise ConfigError(str(exc), key="loop") from exc

    integ = {k.split(".", 1)[1]: v for k, v in flat.items()
             if k.startswith("integrator.")}
    try:
        cfg = IntegratorConfig(**{**{"method": "rk45", "max_step": math.inf,
                                     "horizon": 10.0}, **integ})
    except ValueError as exc:
        raise ConfigError(str(exc), key="integrator") from exc

    options = {k: v for k, v in flat.items()
               if k.split(".", 1)[0] in ("simulate", "holdin", "pullin",
                                         "lockin", "portrait", "lyapunov")}
    return RunConfig(spec=spec, integrator=cfg, options=options, source=source)


def load_config(path_or_name):
    """Load a config file, resolving bundled example names first."""
    if path_or_name in BUNDLED:
        text = (resources.files("pllranges") / "configs"
                / f"{path_or_name}.toml").read_text(encoding="utf-8")
        return parse_config(text, source=f"bundled:{path_or_name}")
    try:
        with open(path_or_name, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    return parse_config(text, source=path_or_name)
