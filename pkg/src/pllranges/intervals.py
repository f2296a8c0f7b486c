"""Finite unions of disjoint real intervals for sweep results."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    lo_closed: bool = True
    hi_closed: bool = False

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError("interval needs hi > lo")

    def contains(self, x):
        above = x > self.lo or (self.lo_closed and x == self.lo)
        below = x < self.hi or (self.hi_closed and x == self.hi)
        return above and below

    @property
    def width(self):
        return self.hi - self.lo

    def __str__(self):
        left = "[" if self.lo_closed else "("
        right = "]" if self.hi_closed else ")"
        return f"{left}{self.lo:.10g}, {self.hi:.10g}{right}"


class IntervalUnion:
    """Sorted disjoint intervals; the empty union is a valid result."""

    def __init__(self, intervals=()):
        ivs = sorted(intervals, key=lambda iv: iv.lo)
        for a, b in zip(ivs, ivs[1:]):
            if b.lo < a.hi or (b.lo == a.hi and a.hi_closed and b.lo_closed):
                raise ValueError("intervals overlap")
        self.intervals = tuple(ivs)

    def __iter__(self):
        return iter(self.intervals)

    def __len__(self):
        return len(self.intervals)

    def __bool__(self):
        return bool(self.intervals)

    def __eq__(self, other):
        return isinstance(other, IntervalUnion) and self.intervals == other.intervals

    def contains(self, x):
        return any(iv.contains(x) for iv in self.intervals)

    def interval_containing(self, x):
        for iv in self.intervals:
            if iv.contains(x):
                return iv
        return None

    def __str__(self):
        if not self.intervals:
            return "(empty)"
        return " U ".join(str(iv) for iv in self.intervals)


def refine_boundary(predicate, lo, hi, lo_value, tol):
    """Bisect a verdict change of a boolean predicate down to width <= tol.

    lo_value is predicate(lo); predicate(hi) must differ.  Returns the
    midpoint of the final bracket and the residual bracket width.
    """
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if predicate(mid) == lo_value:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), hi - lo


def union_from_samples(samples, flags, predicate, tol):
    """Assemble member intervals from sampled verdicts plus boundary refinement.

    samples must be sorted ascending; flags are the predicate values at the
    samples.  Each verdict change between neighbors is located by bisection.
    Refined boundaries are reported open; a member interval starting at the
    first sample keeps that endpoint closed (e.g. [0, ...)).
    """
    intervals = []
    residuals = []
    cur_lo = None
    cur_lo_closed = False
    for i, (w, member) in enumerate(zip(samples, flags)):
        if member and cur_lo is None:
            if i == 0:
                cur_lo, cur_lo_closed = w, True
            else:
                cur_lo, res = refine_boundary(predicate, samples[i - 1], w, flags[i - 1], tol)
                cur_lo_closed = False
                residuals.append(res)
        elif not member and cur_lo is not None:
            hi, res = refine_boundary(predicate, samples[i - 1], w, flags[i - 1], tol)
            residuals.append(res)
            if hi > cur_lo:
                intervals.append(Interval(cur_lo, hi, cur_lo_closed, False))
            cur_lo = None
    if cur_lo is not None and samples[-1] > cur_lo:
        intervals.append(Interval(cur_lo, samples[-1], cur_lo_closed, False))
    return IntervalUnion(intervals), residuals
