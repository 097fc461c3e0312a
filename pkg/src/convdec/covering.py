"""Supporting-line caps, greedy cap covers and affine-dimension estimates."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .curves import Arc
from .errors import DomainError, InsufficientScales


@dataclass(frozen=True)
class Cap:
    """Arc of points within ``delta`` of the supporting line at ``anchor``.

    The line is ``y = slope * x + offset`` in the curve's frame.
    """

    anchor: float
    slope: float
    offset: float
    arc: tuple[float, float]
    delta: float
    frontier: float

    def covers(self, t: float) -> bool:
        return self.arc[0] <= t <= self.arc[1]


def cap_at(curve: Arc, t: float, delta: float) -> Cap:
    """Cap of width ``delta`` at the supporting line through the curve point at ``t``.

    At a kink the right slope is used. ``frontier`` is the first parameter
    to the right of the cap (the right end of the domain if the cap reaches it).
    """
    if not delta > 0:
        raise DomainError("cap width must be positive")
    a, b = curve.domain
    curve._check(t)
    m = curve.slope_right(t)
    x0, y0 = curve.point(t)
    if curve.line_distance(t, m, b) < delta:
        hi, frontier = b, b
    else:
        hi, frontier = curve.cap_edge(t, m, delta, t, b)
    if t <= a or curve.line_distance(t, m, a) < delta:
        lo = a
    else:
        lo = curve.cap_edge(t, m, delta, a, t)[0]
    return Cap(t, m, y0 - m * x0, (lo, hi), delta, frontier)


def covering_number(curve: Arc, delta: float, return_caps: bool = False):
    """Greedy count of caps covering the curve, left to right.

    Each cap is anchored at the leftmost parameter not yet covered. The
    count is an upper bound for the minimal number of caps.
    """
    a, b = curve.domain
    caps = []
    x = a
    while True:
        cap = cap_at(curve, x, delta)
        caps.append(cap)
        if cap.arc[1] >= b:
            break
        if cap.frontier <= x:
            raise DomainError(f"cap search made no progress at {x}")
        x = cap.frontier
    return (len(caps), caps) if return_caps else len(caps)


@dataclass
class DimensionEstimate:
    slope: float
    intercept: float
    deltas: list[float]
    counts: list[int]
    residuals: list[float]

    def rows(self):
        for d, n, r in zip(self.deltas, self.counts, self.residuals):
            yield {"delta": d, "count": n, "residual": r}


def affine_dimension_estimate(curve: Arc, scales, min_decades: float = 2.0) -> DimensionEstimate:
    """Least-squares slope of log N(curve, delta) against log(1/delta)."""
    deltas = sorted((float(d) for d in scales), reverse=True)
    if len(deltas) < 3:
        raise InsufficientScales("need at least 3 scales")
    if any(d <= 0 for d in deltas):
        raise InsufficientScales("scales must be positive")
    span = math.log10(deltas[0] / deltas[-1])
    if span < min_decades - 1e-12:
        raise InsufficientScales(f"scales span {span:.2f} decades, need {min_decades}")
    counts = [covering_number(curve, d) for d in deltas]
    x = np.log(1.0 / np.array(deltas))
    y = np.log(np.array(counts, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return DimensionEstimate(float(slope), float(intercept), deltas, counts,
                             [float(r) for r in resid])
