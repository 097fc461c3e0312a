"""Pure-Python arc kernels.

Mirror of ``_ckernels.pyx``; both expose the same functions with the same
argument order so that :mod:`convdec.kernels` can pick either at import.

A curve is described by an integer kind and a flat parameter vector:

* ``KIND_POLY``: ascending polynomial coefficients ``c0, c1, ...``
* ``KIND_CANTOR``: ``ratio, depth``
* ``KIND_PL``: ``n, x_0..x_{n-1}, y_0..y_{n-1}``

A similarity is the 5-tuple ``(ratio, cos, sin, px, py)`` for the map
``xi -> ratio * O * (xi - p)``.
"""
from math import sqrt

NAME = "python"

KIND_POLY = 0
KIND_CANTOR = 1
KIND_PL = 2


def pack(params):
    return tuple(float(v) for v in params)


def _poly(c, t):
    acc = 0.0
    for i in range(len(c) - 1, -1, -1):
        acc = acc * t + c[i]
    return acc


def _poly_slope(c, t):
    acc = 0.0
    for i in range(len(c) - 1, 0, -1):
        acc = acc * t + i * c[i]
    return acc


def cantor_function(x, r, depth):
    """Truncated Cantor staircase with middle gap ``(r, 1-r)``, linear at the base."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    acc = 0.0
    scale = 1.0
    for _ in range(depth):
        if x <= r:
            x = x / r
        elif x < 1.0 - r:
            return acc + scale * 0.5
        else:
            acc += scale * 0.5
            x = (x - 1.0 + r) / r
        scale *= 0.5
    return acc + scale * x


def cantor_integral(x, r, depth):
    """Antiderivative of :func:`cantor_function` vanishing at 0."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 0.5 + (x - 1.0)
    acc = 0.0
    scale = 1.0
    g_left = 0.25 * r
    g_mid = g_left + 0.5 * (1.0 - 2.0 * r)
    for _ in range(depth):
        if x <= r:
            x = x / r
        elif x < 1.0 - r:
            return acc + scale * (g_left + 0.5 * (x - r))
        else:
            acc += scale * (g_mid + 0.5 * (x - 1.0 + r))
            x = (x - 1.0 + r) / r
        scale *= 0.5 * r
    return acc + scale * 0.5 * x * x


def _pl_locate(p, n, t):
    # index i of the segment [x_i, x_{i+1}] with x_i <= t, clipped to [0, n-2]
    lo, hi = 0, n - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if p[1 + mid] <= t:
            lo = mid
        else:
            hi = mid
    return lo


def _pl_seg_slope(p, n, i):
    return (p[1 + n + i + 1] - p[1 + n + i]) / (p[1 + i + 1] - p[1 + i])


def gamma(kind, p, t):
    if kind == KIND_POLY:
        return _poly(p, t)
    if kind == KIND_CANTOR:
        return cantor_integral(t, p[0], int(p[1]))
    n = int(p[0])
    i = _pl_locate(p, n, t)
    x0 = p[1 + i]
    return p[1 + n + i] + _pl_seg_slope(p, n, i) * (t - x0)


def base_slopes(kind, p, t):
    if kind == KIND_POLY:
        m = _poly_slope(p, t)
        return m, m
    if kind == KIND_CANTOR:
        m = cantor_function(t, p[0], int(p[1]))
        return m, m
    n = int(p[0])
    i = _pl_locate(p, n, t)
    right = _pl_seg_slope(p, n, i)
    if i > 0 and t == p[1 + i]:
        return _pl_seg_slope(p, n, i - 1), right
    return right, right


def point(kind, p, sim, t):
    r, c, s, px, py = sim
    x = t - px
    y = gamma(kind, p, t) - py
    return r * (c * x - s * y), r * (s * x + c * y)


def _rot(sim, m):
    c = sim[1]
    s = sim[2]
    return (s + c * m) / (c - s * m)


def slopes(kind, p, sim, t):
    left, right = base_slopes(kind, p, t)
    return _rot(sim, left), _rot(sim, right)


def turn(kind, p, sim, a, b):
    if b <= a:
        return 0.0
    ml = _rot(sim, base_slopes(kind, p, b)[0])
    mr = _rot(sim, base_slopes(kind, p, a)[1])
    return (ml - mr) / (1.0 + ml * mr)


def chord(kind, p, sim, a, b):
    if b <= a:
        return 0.0
    dx = b - a
    dy = gamma(kind, p, b) - gamma(kind, p, a)
    return sim[0] * sqrt(dx * dx + dy * dy)


def bending(kind, p, sim, a, b):
    if b <= a:
        return 0.0
    return chord(kind, p, sim, a, b) * turn(kind, p, sim, a, b)


def sup_bending(kind, p, sim, s, lo, hi, target, iters):
    """Bracket for sup{u in [lo, hi] : bending(s, u) <= target}; lo feasible, hi not."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if bending(kind, p, sim, s, mid) <= target:
            lo = mid
        else:
            hi = mid
    return lo, hi


def inf_bending(kind, p, sim, u, lo, hi, target, iters):
    """Bracket for inf{s in [lo, hi] : bending(s, u) <= target}; hi feasible, lo not."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if bending(kind, p, sim, mid, u) <= target:
            hi = mid
        else:
            lo = mid
    return lo, hi


def sup_turn(kind, p, sim, s, lo, hi, target, iters):
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if turn(kind, p, sim, s, mid) <= target:
            lo = mid
        else:
            hi = mid
    return lo, hi


def line_distance(kind, p, sim, t, m, x):
    """Distance from the curve point at ``x`` to the line through the point at ``t`` with slope ``m``."""
    ax, ay = point(kind, p, sim, t)
    bx, by = point(kind, p, sim, x)
    return abs((by - ay) - m * (bx - ax)) / sqrt(1.0 + m * m)


def cap_edge(kind, p, sim, t, m, delta, lo, hi, iters):
    """Boundary of the cap {x : dist < delta} between ``lo`` and ``hi``.

    Exactly one of the endpoints lies inside the cap. Returns the bracket
    ``(inside, outside)`` after bisection.
    """
    inside, outside = lo, hi
    if line_distance(kind, p, sim, t, m, lo) >= delta:
        inside, outside = hi, lo
    for _ in range(iters):
        mid = 0.5 * (inside + outside)
        if mid == inside or mid == outside:
            break
        if line_distance(kind, p, sim, t, m, mid) < delta:
            inside = mid
        else:
            outside = mid
    return inside, outside
