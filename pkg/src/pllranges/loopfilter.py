"""Loop-filter transfer functions and their state-space realizations.

Transfer functions are stored as ascending-power coefficient arrays,
H(s) = a(s)/d(s).  Realizations follow the sign convention

    x' = A x + b u,   g = c.x + h u,   H(s) = -c.(A - sI)^-1 b + h,

so that the strictly proper part enters with a plus sign in g.  For
first-order filters the state is scaled the way lead-lag circuits are
conventionally drawn (A = -d0/d1, b = numerator residue, c = 1/d1), which
for H = (1 + s*tau2)/(1 + s*(tau1 + tau2)) gives

    A = -1/(tau1+tau2), b = tau1/(tau1+tau2), c = 1/(tau1+tau2),
    h = tau2/(tau1+tau2),

i.e. the filter state is the physical integrator voltage.  Higher orders
use the controllable companion form of the monic denominator.
"""

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.linalg import expm


def _trim(coeffs):
    c = [float(v) for v in coeffs]
    while len(c) > 1 and c[-1] == 0.0:
        c.pop()
    return tuple(c)


@dataclass(frozen=True)
class TransferFunction:
    """Proper rational H(s) = num(s)/den(s), ascending-power coefficients."""

    num: tuple
    den: tuple

    def __post_init__(self):
        object.__setattr__(self, "num", _trim(self.num))
        object.__setattr__(self, "den", _trim(self.den))
        if all(v == 0.0 for v in self.den):
            raise ValueError("zero denominator")
        if all(v == 0.0 for v in self.num):
            raise ValueError("zero numerator")
        if len(self.num) > len(self.den):
            raise ValueError("improper transfer function")
        self._check_coprime()

    def _check_coprime(self, tol=1e-9):
        if len(self.num) < 2 or len(self.den) < 2:
            return
        zn = npoly.polyroots(self.num)
        zd = npoly.polyroots(self.den)
        if len(zn) and len(zd):
            dist = np.abs(zn[:, None] - zd[None, :])
            if dist.min() <= tol:
                raise ValueError("non-coprime")

    @property
    def order(self):
        return len(self.den) - 1

    def dc_gain(self):
        """H(0) = a0/d0; math.inf for a pole at s = 0 (PI filter)."""
        if self.den[0] == 0.0:
            return math.inf
        return self.num[0] / self.den[0]

    def zero_pole_multiplicity(self):
        """Multiplicity of the pole at s = 0 (count of leading zero den coefficients)."""
        r = 0
        for v in self.den:
            if v != 0.0:
                break
            r += 1
        return r

    def __call__(self, s):
        return npoly.polyval(s, self.num) / npoly.polyval(s, self.den)


@dataclass(frozen=True, eq=False)
class FilterRealization:
    """State-space matrices realizing H(s) = -c.(A-sI)^-1 b + h."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    h: float
    order: int
    tf: TransferFunction

    def transfer_at(self, s):
        """Evaluate -c.(A - sI)^-1 b + h (round-trip check helper)."""
        if self.order == 0:
            return complex(self.h)
        M = self.A - s * np.eye(self.order)
        return complex(-self.c @ np.linalg.solve(M, self.b) + self.h)


def realize(tf):
    """Build the package's canonical realization of a proper transfer function."""
    n = tf.order
    den = np.asarray(tf.den)
    num = np.zeros(n + 1)
    num[:len(tf.num)] = tf.num

    dn = den[-1]
    h = num[n] / dn if len(tf.num) == n + 1 else 0.0
    if n == 0:
        return FilterRealization(
            A=np.zeros((0, 0)), b=np.zeros(0), c=np.zeros(0), h=float(h),
            order=0, tf=tf)

    strict = num - h * den        # degree <= n-1; s^n term cancels exactly
    if n == 1:
        # Physical lead-lag/PI scaling; reproduces the usual circuit state.
        A = np.array([[-den[0] / den[1]]])
        b = np.array([strict[0]])
        c = np.array([1.0 / den[1]])
    else:
        monic = den / dn
        A = np.zeros((n, n))
        A[:-1, 1:] = np.eye(n - 1)
        A[-1, :] = -monic[:n]
        b = np.zeros(n)
        b[-1] = 1.0
        c = strict[:n] / dn
    return FilterRealization(A=A, b=b, c=c, h=float(h), order=n, tf=tf)


def impulse_response(fr, t):
    """gamma(t) = c.exp(A t).b; zero for a static filter."""
    if fr.order == 0:
        return 0.0
    return float(fr.c @ expm(fr.A * float(t)) @ fr.b)


def zero_input_response(fr, x0, t):
    """Natural response c.exp(A t).x0 of the filter from state x0."""
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (fr.order,):
        raise ValueError("state dimension")
    if fr.order == 0:
        return 0.0
    return float(fr.c @ expm(fr.A * float(t)) @ x0)
