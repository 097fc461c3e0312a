# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled arc kernels; same interface as ``_pykernels``."""
from libc.math cimport sqrt, fabs
import numpy as np

NAME = "cython"

KIND_POLY = 0
KIND_CANTOR = 1
KIND_PL = 2

cdef struct Sim:
    double r
    double c
    double s
    double px
    double py


cdef inline Sim _sim(tuple sim):
    cdef Sim out
    out.r = sim[0]
    out.c = sim[1]
    out.s = sim[2]
    out.px = sim[3]
    out.py = sim[4]
    return out


def pack(params):
    return np.ascontiguousarray(np.asarray(params, dtype=np.float64))


cdef inline double _poly(const double[::1] c, double t) nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t i
    for i in range(c.shape[0] - 1, -1, -1):
        acc = acc * t + c[i]
    return acc


cdef inline double _poly_slope(const double[::1] c, double t) nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t i
    for i in range(c.shape[0] - 1, 0, -1):
        acc = acc * t + i * c[i]
    return acc


cdef double _cantor_function(double x, double r, int depth) nogil:
    cdef double acc = 0.0, scale = 1.0
    cdef int k
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    for k in range(depth):
        if x <= r:
            x = x / r
        elif x < 1.0 - r:
            return acc + scale * 0.5
        else:
            acc += scale * 0.5
            x = (x - 1.0 + r) / r
        scale *= 0.5
    return acc + scale * x


cdef double _cantor_integral(double x, double r, int depth) nogil:
    cdef double acc = 0.0, scale = 1.0
    cdef double g_left = 0.25 * r
    cdef double g_mid = g_left + 0.5 * (1.0 - 2.0 * r)
    cdef int k
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 0.5 + (x - 1.0)
    for k in range(depth):
        if x <= r:
            x = x / r
        elif x < 1.0 - r:
            return acc + scale * (g_left + 0.5 * (x - r))
        else:
            acc += scale * (g_mid + 0.5 * (x - 1.0 + r))
            x = (x - 1.0 + r) / r
        scale *= 0.5 * r
    return acc + scale * 0.5 * x * x


def cantor_function(double x, double r, int depth):
    return _cantor_function(x, r, depth)


def cantor_integral(double x, double r, int depth):
    return _cantor_integral(x, r, depth)


cdef inline Py_ssize_t _pl_locate(const double[::1] p, Py_ssize_t n, double t) nogil:
    cdef Py_ssize_t lo = 0, hi = n - 1, mid
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if p[1 + mid] <= t:
            lo = mid
        else:
            hi = mid
    return lo


cdef inline double _pl_seg_slope(const double[::1] p, Py_ssize_t n, Py_ssize_t i) nogil:
    return (p[1 + n + i + 1] - p[1 + n + i]) / (p[1 + i + 1] - p[1 + i])


cdef double _gamma(int kind, const double[::1] p, double t) nogil:
    cdef Py_ssize_t n, i
    if kind == 0:
        return _poly(p, t)
    if kind == 1:
        return _cantor_integral(t, p[0], <int>p[1])
    n = <Py_ssize_t>p[0]
    i = _pl_locate(p, n, t)
    return p[1 + n + i] + _pl_seg_slope(p, n, i) * (t - p[1 + i])


cdef void _base_slopes(int kind, const double[::1] p, double t, double* left, double* right) nogil:
    cdef Py_ssize_t n, i
    cdef double m
    if kind == 0:
        m = _poly_slope(p, t)
        left[0] = m
        right[0] = m
        return
    if kind == 1:
        m = _cantor_function(t, p[0], <int>p[1])
        left[0] = m
        right[0] = m
        return
    n = <Py_ssize_t>p[0]
    i = _pl_locate(p, n, t)
    right[0] = _pl_seg_slope(p, n, i)
    if i > 0 and t == p[1 + i]:
        left[0] = _pl_seg_slope(p, n, i - 1)
    else:
        left[0] = right[0]


cdef inline double _rot(Sim* sm, double m) nogil:
    return (sm.s + sm.c * m) / (sm.c - sm.s * m)


cdef double _turn(int kind, const double[::1] p, Sim* sm, double a, double b) nogil:
    cdef double l1, r1, l2, r2, ml, mr
    if b <= a:
        return 0.0
    _base_slopes(kind, p, b, &l2, &r2)
    _base_slopes(kind, p, a, &l1, &r1)
    ml = _rot(sm, l2)
    mr = _rot(sm, r1)
    return (ml - mr) / (1.0 + ml * mr)


cdef double _chord(int kind, const double[::1] p, Sim* sm, double a, double b) nogil:
    cdef double dx, dy
    if b <= a:
        return 0.0
    dx = b - a
    dy = _gamma(kind, p, b) - _gamma(kind, p, a)
    return sm.r * sqrt(dx * dx + dy * dy)


cdef double _bending(int kind, const double[::1] p, Sim* sm, double a, double b) nogil:
    if b <= a:
        return 0.0
    return _chord(kind, p, sm, a, b) * _turn(kind, p, sm, a, b)


def gamma(int kind, const double[::1] p, double t):
    return _gamma(kind, p, t)


def base_slopes(int kind, const double[::1] p, double t):
    cdef double left, right
    _base_slopes(kind, p, t, &left, &right)
    return left, right


def point(int kind, const double[::1] p, tuple sim, double t):
    cdef Sim sm = _sim(sim)
    cdef double x = t - sm.px
    cdef double y = _gamma(kind, p, t) - sm.py
    return sm.r * (sm.c * x - sm.s * y), sm.r * (sm.s * x + sm.c * y)


def slopes(int kind, const double[::1] p, tuple sim, double t):
    cdef Sim sm = _sim(sim)
    cdef double left, right
    _base_slopes(kind, p, t, &left, &right)
    return _rot(&sm, left), _rot(&sm, right)


def turn(int kind, const double[::1] p, tuple sim, double a, double b):
    cdef Sim sm = _sim(sim)
    return _turn(kind, p, &sm, a, b)


def chord(int kind, const double[::1] p, tuple sim, double a, double b):
    cdef Sim sm = _sim(sim)
    return _chord(kind, p, &sm, a, b)


def bending(int kind, const double[::1] p, tuple sim, double a, double b):
    cdef Sim sm = _sim(sim)
    return _bending(kind, p, &sm, a, b)


def sup_bending(int kind, const double[::1] p, tuple sim, double s, double lo, double hi,
                double target, int iters):
    cdef Sim sm = _sim(sim)
    cdef double mid
    cdef int k
    for k in range(iters):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _bending(kind, p, &sm, s, mid) <= target:
            lo = mid
        else:
            hi = mid
    return lo, hi


def inf_bending(int kind, const double[::1] p, tuple sim, double u, double lo, double hi,
                double target, int iters):
    cdef Sim sm = _sim(sim)
    cdef double mid
    cdef int k
    for k in range(iters):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _bending(kind, p, &sm, mid, u) <= target:
            hi = mid
        else:
            lo = mid
    return lo, hi


def sup_turn(int kind, const double[::1] p, tuple sim, double s, double lo, double hi,
             double target, int iters):
    cdef Sim sm = _sim(sim)
    cdef double mid
    cdef int k
    for k in range(iters):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _turn(kind, p, &sm, s, mid) <= target:
            lo = mid
        else:
            hi = mid
    return lo, hi


cdef double _line_distance(int kind, const double[::1] p, Sim* sm, double t, double m, double x) nogil:
    cdef double ax, ay, bx, by, u, v
    u = t - sm.px
    v = _gamma(kind, p, t) - sm.py
    ax = sm.r * (sm.c * u - sm.s * v)
    ay = sm.r * (sm.s * u + sm.c * v)
    u = x - sm.px
    v = _gamma(kind, p, x) - sm.py
    bx = sm.r * (sm.c * u - sm.s * v)
    by = sm.r * (sm.s * u + sm.c * v)
    return fabs((by - ay) - m * (bx - ax)) / sqrt(1.0 + m * m)


def line_distance(int kind, const double[::1] p, tuple sim, double t, double m, double x):
    cdef Sim sm = _sim(sim)
    return _line_distance(kind, p, &sm, t, m, x)


def cap_edge(int kind, const double[::1] p, tuple sim, double t, double m, double delta,
             double lo, double hi, int iters):
    cdef Sim sm = _sim(sim)
    cdef double inside = lo, outside = hi, mid
    cdef int k
    if _line_distance(kind, p, &sm, t, m, lo) >= delta:
        inside = hi
        outside = lo
    for k in range(iters):
        mid = 0.5 * (inside + outside)
        if mid == inside or mid == outside:
            break
        if _line_distance(kind, p, &sm, t, m, mid) < delta:
            inside = mid
        else:
            outside = mid
    return inside, outside
