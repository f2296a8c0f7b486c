"""Autonomous loop model in the signal's phase space.

State is (x, theta) where x is the filter state and theta the phase error,
integrated on the real line (unwrapped):

    x'     = A x + b phi(theta)
    theta' = omega_free - L c.x - L h phi(theta)

omega_free is the difference between the reference frequency and the VCO
free-running frequency; L is the VCO input gain.
"""

from dataclasses import dataclass, replace

import numpy as np

from .loopfilter import realize


@dataclass(frozen=True)
class LoopSpec:
    """Declarative loop description: detector, filter, gain, frequency offset."""

    pd: object
    tf: object
    vco_gain: float
    omega_free: float = 0.0

    def __post_init__(self):
        if not self.vco_gain > 0:
            raise ValueError("vco_gain must be positive")


@dataclass(frozen=True, eq=False)
class PllModel:
    """Realized model; immutable, rhs evaluation is reentrant."""

    pd: object
    fr: object
    vco_gain: float
    omega_free: float

    @property
    def dim(self):
        return self.fr.order + 1

    def with_omega(self, omega_free):
        return replace(self, omega_free=float(omega_free))

    def rhs(self, t, y):
        """Right-hand side for scipy-style solvers; t is unused (autonomous)."""
        y = np.asarray(y, dtype=float)
        if y.shape != (self.dim,):
            raise ValueError("state dimension")
        n = self.fr.order
        phi = self.pd(y[n])
        L = self.vco_gain
        out = np.empty(self.dim)
        if n:
            x = y[:n]
            out[:n] = self.fr.A @ x + self.fr.b * phi
            out[n] = self.omega_free - L * (self.fr.c @ x) - L * self.fr.h * phi
        else:
            out[0] = self.omega_free - L * self.fr.h * phi
        return out

    def rhs_fn(self):
        """Specialized rhs closure; avoids array overhead for 2-d phase planes."""
        n = self.fr.order
        L = self.vco_gain
        omega = self.omega_free
        pd = self.pd
        h = self.fr.h
        if n == 1:
            a = float(self.fr.A[0, 0])
            b = float(self.fr.b[0])
            c = float(self.fr.c[0])

            def f(t, y):
                phi = pd(y[1])
                return np.array([a * y[0] + b * phi,
                                 omega - L * c * y[0] - L * h * phi])
            return f
        return self.rhs

    def rhs_batch(self, Y):
        """Vectorized rhs over a (N, dim) stack of states."""
        n = self.fr.order
        L = self.vco_gain
        phi = self.pd(Y[:, n])
        out = np.empty_like(Y)
        if n:
            X = Y[:, :n]
            out[:, :n] = X @ self.fr.A.T + phi[:, None] * self.fr.b
            out[:, n] = self.omega_free - L * (X @ self.fr.c) - L * self.fr.h * phi
        else:
            out[:, 0] = self.omega_free - L * self.fr.h * phi
        return out

    def filter_output(self, Y):
        """g = c.x + h phi(theta) for one state or a stack of states."""
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        n = self.fr.order
        phi = self.pd(Y[:, n])
        g = Y[:, :n] @ self.fr.c + self.fr.h * phi if n else self.fr.h * phi
        return g if g.size > 1 else float(g[0])


def build(spec):
    """Assemble the phase-space model from a loop description."""
    return PllModel(pd=spec.pd, fr=realize(spec.tf),
                    vco_gain=float(spec.vco_gain),
                    omega_free=float(spec.omega_free))


def apply_symmetry(model, state_or_traj):
    """Mirror a state/trajectory through the odd-detector conjugacy.

    For odd phi the substitution (omega, x, theta) -> (-omega, -x, -theta)
    leaves the dynamics invariant, so the returned pair (mirrored model,
    negated data) traces the same motion.
    """
    if not model.pd.odd:
        raise ValueError("symmetry unavailable")
    mirrored = model.with_omega(-model.omega_free)
    neg = state_or_traj.negate() if hasattr(state_or_traj, "negate") \
        else -np.asarray(state_or_traj, dtype=float)
    return mirrored, neg


@dataclass(frozen=True, eq=False)
class LureForm:
    """Shifted coordinates x_bar = x - x_eq with zeroed nonlinearity offset."""

    A_ext: np.ndarray
    b_ext: np.ndarray
    x_eq: np.ndarray
    theta_eq: float
    phi_offset: float
    pd: object

    def phi_bar(self, theta):
        return self.pd(theta) - self.phi_offset

    def rhs(self, t, z):
        """Dynamics of (x_bar, theta); vanishes at (0, theta_eq)."""
        z = np.asarray(z, dtype=float)
        return self.A_ext @ z + self.b_ext * self.phi_bar(z[-1])


def to_lure(model, eq, residual_tol=1e-6):
    """Shift the model to Lur'e form around an equilibrium."""
    n = model.fr.order
    state = np.concatenate([eq.x, [eq.theta]])
    res = np.max(np.abs(model.rhs(0.0, state)))
    if res > residual_tol:
        raise ValueError("not an equilibrium")
    L = model.vco_gain
    A_ext = np.zeros((n + 1, n + 1))
    if n:
        A_ext[:n, :n] = model.fr.A
        A_ext[n, :n] = -L * model.fr.c
    b_ext = np.concatenate([model.fr.b, [-L * model.fr.h]])
    return LureForm(A_ext=A_ext, b_ext=b_ext, x_eq=np.array(eq.x, dtype=float),
                    theta_eq=float(eq.theta), phi_offset=float(model.pd(eq.theta)),
                    pd=model.pd)
