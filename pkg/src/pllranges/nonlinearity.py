"""Periodic phase-detector characteristics and their derivatives.

A phase detector maps the phase error to the loop-filter input through a
bounded periodic function.  The classical multiplier detector for sinusoidal
signals gives (1/2)sin(theta); squaring-loop style detectors give
(1/8)sin(2*theta) or (1/2)sin(2*theta) with period pi instead of 2*pi.
Arbitrary measured characteristics are supported through a periodic cubic
interpolant over one declared period.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

TWO_PI = 2.0 * math.pi

# kind -> (natural period, max |phi|, phi, dphi/dtheta)
_ANALYTIC_KINDS = {
    "sinusoidal-half": (TWO_PI, 0.5,
                        lambda th: 0.5 * np.sin(th),
                        lambda th: 0.5 * np.cos(th)),
    "sinusoidal-unit": (TWO_PI, 1.0,
                        lambda th: np.sin(th),
                        lambda th: np.cos(th)),
    "sinusoidal-double-eighth": (math.pi, 0.125,
                                 lambda th: 0.125 * np.sin(2.0 * th),
                                 lambda th: 0.25 * np.cos(2.0 * th)),
    "sinusoidal-double-half": (math.pi, 0.5,
                               lambda th: 0.5 * np.sin(2.0 * th),
                               lambda th: np.cos(2.0 * th)),
}

KINDS = tuple(_ANALYTIC_KINDS) + ("tabulated-periodic",)


def _wrap(theta, period):
    """Map theta onto the canonical interval [-period/2, period/2)."""
    wrapped = theta - period * np.floor(theta / period + 0.5)
    return wrapped


@dataclass(frozen=True, eq=False)
class PdCharacteristic:
    """Immutable periodic nonlinearity; safe to share across workers."""

    kind: str
    period: float
    amplitude_max: float
    odd: bool
    nodes: tuple = ()
    values: tuple = ()
    nonsmooth: tuple = ()
    _spline: object = field(default=None, repr=False)

    def __call__(self, theta):
        """Evaluate phi(theta); accepts scalars or arrays, exactly periodic."""
        th = _wrap(np.asarray(theta, dtype=float), self.period)
        if self.kind == "tabulated-periodic":
            out = self._spline(th)
        else:
            out = _ANALYTIC_KINDS[self.kind][2](th)
        if np.ndim(theta) == 0:
            return float(out)
        return out

    def derivative(self, theta):
        """Evaluate dphi/dtheta, refusing declared nonsmooth points."""
        th = _wrap(np.asarray(theta, dtype=float), self.period)
        if self.kind == "tabulated-periodic":
            if self.nonsmooth:
                dist = np.min(np.abs(_wrap(
                    np.subtract.outer(th, np.asarray(self.nonsmooth)), self.period)), axis=-1)
                if np.any(dist < 1e-9):
                    raise ValueError("nonsmooth point")
            out = self._spline(th, 1)
        else:
            out = _ANALYTIC_KINDS[self.kind][3](th)
        if np.ndim(theta) == 0:
            return float(out)
        return out


def make_pd(kind, period, nodes=None, values=None, nonsmooth=None):
    """Construct a validated characteristic.

    The period is always declared by the caller and checked against the
    kind's natural period; it is never inferred from the shape of the data.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown pd kind {kind!r}")
    period = float(period)
    if period <= 0:
        raise ValueError("period must be positive")

    if kind != "tabulated-periodic":
        natural = _ANALYTIC_KINDS[kind][0]
        if abs(period - natural) > 1e-12:
            raise ValueError(
                f"declared period {period:g} does not match the {kind} period {natural:g}")
        amp = _ANALYTIC_KINDS[kind][1]
        return PdCharacteristic(kind, period, amp, odd=True)

    if nodes is None or values is None:
        raise ValueError("tabulated-periodic requires nodes and values")
    nodes = np.asarray(nodes, dtype=float)
    values = np.asarray(values, dtype=float)
    if nodes.ndim != 1 or nodes.shape != values.shape or len(nodes) < 4:
        raise ValueError("tabulated nodes/values must be matching 1-d arrays, >= 4 points")
    if np.any(np.diff(nodes) <= 0):
        raise ValueError("tabulated nodes must be strictly increasing")
    if nodes[-1] - nodes[0] >= period:
        raise ValueError("tabulated nodes must span less than one period")

    # Close the period so the interpolant is C2 across the wrap point.
    xs = np.concatenate([nodes, [nodes[0] + period]])
    ys = np.concatenate([values, [values[0]]])
    spline = CubicSpline(xs, ys, bc_type="periodic")

    def wrapped_eval(th, nu=0):
        shifted = xs[0] + np.mod(np.asarray(th, dtype=float) - xs[0], period)
        return spline(shifted, nu)

    probe = np.linspace(-period / 2, period / 2, 4096, endpoint=False)
    sampled = wrapped_eval(probe)
    amp = float(np.max(np.abs(sampled)))
    odd = bool(np.max(np.abs(sampled + wrapped_eval(-probe))) <= 1e-9)

    class _Wrapped:
        __slots__ = ()

        def __call__(self, th, nu=0):
            return wrapped_eval(th, nu)

    return PdCharacteristic(
        "tabulated-periodic", period, amp, odd,
        nodes=tuple(float(x) for x in nodes),
        values=tuple(float(v) for v in values),
        nonsmooth=tuple(float(x) for x in (nonsmooth or ())),
        _spline=_Wrapped(),
    )
