"""Convex curves as graphs, with exact one-sided slopes and arc functionals.

Every arc here is parametrised by the parameter of an underlying graph
``t -> (t, gamma(t))``. A :class:`RescaledCurve` is the image of a sub-arc
under a similarity; it keeps the parameter of its base graph, so intervals
found on a rescaled curve pull back to the base with no inversion.

The three functionals of an arc ``[a, b]`` are

* turn: ``(m_L(b) - m_R(a)) / (1 + m_L(b) m_R(a))``, the tangent of the
  angle swept by the tangent line,
* chord: ``|Gamma(b) - Gamma(a)|``,
* bending: ``chord * turn``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DomainError, NonConvexInput
from .geometry import IDENTITY, Similarity

_k = kernels.backend
TOL = 1e-12
BISECT_ITERS = 60


@dataclass(frozen=True)
class ArcFunctionals:
    turn: float
    chord: float
    bending: float


class Arc:
    """Shared evaluation and search machinery for graph-like convex arcs."""

    def __init__(self, kind_code: int, params, sim: Similarity, domain, breakpoints=()):
        a, b = float(domain[0]), float(domain[1])
        if not (math.isfinite(a) and math.isfinite(b)) or a >= b:
            raise DomainError(f"empty or reversed domain [{a}, {b}]")
        self.domain = (a, b)
        self.similarity = sim
        self._code = kind_code
        self._params = _k.pack(params)
        self._sim = sim.as_tuple()
        self._breaks = tuple(float(x) for x in breakpoints if a < x < b)

    # -- evaluation ---------------------------------------------------------
    def _check(self, t):
        a, b = self.domain
        slack = TOL * (1.0 + abs(t))
        if not (a - slack <= t <= b + slack):
            raise DomainError(f"parameter {t} outside [{a}, {b}]")

    def point(self, t: float) -> tuple[float, float]:
        self._check(t)
        return _k.point(self._code, self._params, self._sim, float(t))

    def slopes(self, t: float) -> tuple[float, float]:
        """(left, right) slopes of the arc in its own frame."""
        self._check(t)
        return _k.slopes(self._code, self._params, self._sim, float(t))

    def slope_left(self, t: float) -> float:
        return self.slopes(t)[0]

    def slope_right(self, t: float) -> float:
        return self.slopes(t)[1]

    def _check_pair(self, a, b):
        self._check(a)
        self._check(b)
        if a > b:
            raise DomainError(f"reversed interval [{a}, {b}]")

    def turn(self, a: float, b: float) -> float:
        self._check_pair(a, b)
        return _k.turn(self._code, self._params, self._sim, float(a), float(b))

    def chord(self, a: float, b: float) -> float:
        self._check_pair(a, b)
        return _k.chord(self._code, self._params, self._sim, float(a), float(b))

    def bending(self, a: float, b: float) -> float:
        self._check_pair(a, b)
        return _k.bending(self._code, self._params, self._sim, float(a), float(b))

    def functionals(self, a: float, b: float) -> ArcFunctionals:
        tn, ch = self.turn(a, b), self.chord(a, b)
        return ArcFunctionals(tn, ch, ch * tn if b > a else 0.0)

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return self._breaks

    # -- monotone searches --------------------------------------------------
    def _snap_up(self, lo, hi, ok):
        for x in self._breaks:
            if lo <= x <= hi + TOL * (1.0 + abs(hi)) and ok(x):
                lo = max(lo, x)
        return lo

    def _snap_down(self, lo, hi, ok):
        for x in reversed(self._breaks):
            if lo - TOL * (1.0 + abs(lo)) <= x <= hi and ok(x):
                hi = min(hi, x)
        return hi

    def sup_bending(self, s: float, hi: float, target: float) -> float:
        """sup{u in [s, hi] : bending(s, u) <= target}, boundary included."""
        code, p, sim = self._code, self._params, self._sim
        if _k.bending(code, p, sim, s, hi) <= target:
            return hi
        lo, hi = _k.sup_bending(code, p, sim, s, s, hi, target, BISECT_ITERS)
        return self._snap_up(lo, hi, lambda x: _k.bending(code, p, sim, s, x) <= target)

    def inf_bending(self, u: float, lo: float, target: float) -> float:
        """inf{s in [lo, u] : bending(s, u) <= target}, boundary included."""
        code, p, sim = self._code, self._params, self._sim
        if _k.bending(code, p, sim, lo, u) <= target:
            return lo
        lo, hi = _k.inf_bending(code, p, sim, u, lo, u, target, BISECT_ITERS)
        return self._snap_down(lo, hi, lambda x: _k.bending(code, p, sim, x, u) <= target)

    def sup_turn(self, s: float, hi: float, target: float) -> float:
        """sup{u in [s, hi] : turn(s, u) <= target}, boundary included."""
        code, p, sim = self._code, self._params, self._sim
        if _k.turn(code, p, sim, s, hi) <= target:
            return hi
        lo, hi = _k.sup_turn(code, p, sim, s, s, hi, target, BISECT_ITERS)
        return self._snap_up(lo, hi, lambda x: _k.turn(code, p, sim, s, x) <= target)

    def line_distance(self, t: float, m: float, x: float) -> float:
        return _k.line_distance(self._code, self._params, self._sim, t, m, x)

    def cap_edge(self, t: float, m: float, delta: float, lo: float, hi: float) -> tuple[float, float]:
        return _k.cap_edge(self._code, self._params, self._sim, t, m, delta, lo, hi, BISECT_ITERS)

    # -- rescaling ----------------------------------------------------------
    def base_curve(self) -> ConvexCurve:
        raise NotImplementedError

    def rescaled(self, interval, sim: Similarity) -> RescaledCurve:
        """Image of the sub-arc over ``interval`` under ``sim`` (given in this arc's frame)."""
        return RescaledCurve(self.base_curve(), interval, sim @ self.similarity)


class ConvexCurve(Arc):
    """Graph of a convex function on ``[a, b]``.

    Build with one of the constructors :meth:`parabola`, :meth:`polynomial`,
    :meth:`cantor_staircase`, :meth:`piecewise_linear` or :meth:`from_spec`.
    """

    def __init__(self, kind: str, params: dict, domain, label: str = ""):
        self.kind = kind
        self.params = params
        self.label = label or kind
        code, packed, breaks = self._compile(kind, params, domain)
        super().__init__(code, packed, IDENTITY, domain, breaks)
        if kind == "polynomial":
            self._check_polynomial_convexity()

    @staticmethod
    def _compile(kind, params, domain):
        if kind == "parabola":
            return kernels.KIND_POLY, (0.0, 0.0, float(params["coeff"])), ()
        if kind == "polynomial":
            coeffs = [float(c) for c in params["coeffs"]] or [0.0]
            return kernels.KIND_POLY, tuple(coeffs), ()
        if kind == "cantor":
            r = float(params.get("ratio", 1.0 / 3.0))
            depth = int(params.get("depth", 24))
            if not 0.0 < r < 0.5:
                raise DomainError(f"cantor ratio must lie in (0, 1/2), got {r}")
            if depth < 1:
                raise DomainError("cantor depth must be at least 1")
            a, b = domain
            if a < 0.0 or b > 1.0:
                raise DomainError("cantor staircase lives on [0, 1]")
            return kernels.KIND_CANTOR, (r, float(depth)), ()
        if kind == "samples":
            xs = np.asarray(params["x"], dtype=float)
            ys = np.asarray(params["y"], dtype=float)
            if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
                raise DomainError("samples need matching x, y arrays of length >= 2")
            if np.any(np.diff(xs) <= 0):
                raise DomainError("sample abscissae must be strictly increasing")
            a, b = domain
            if abs(xs[0] - a) > TOL or abs(xs[-1] - b) > TOL:
                raise DomainError("samples must span the domain")
            slopes = np.diff(ys) / np.diff(xs)
            drops = slopes[:-1] - slopes[1:]
            if np.any(drops > TOL * (1.0 + np.abs(slopes[:-1]))):
                raise NonConvexInput("secant slopes are not nondecreasing")
            packed = (float(xs.size), *xs.tolist(), *ys.tolist())
            return kernels.KIND_PL, packed, tuple(xs[1:-1].tolist())
        raise DomainError(f"unknown curve kind {kind!r}")

    def _check_polynomial_convexity(self):
        poly = np.polynomial.Polynomial(self._params)
        d2 = poly.deriv(2)
        a, b = self.domain
        pts = [a, b]
        if d2.degree() >= 1:
            pts += [r.real for r in d2.deriv().roots() if abs(r.imag) < 1e-12 and a < r.real < b]
        low = min(d2(x) for x in pts)
        if low < -TOL * (1.0 + max(abs(c) for c in self._params)):
            raise NonConvexInput(f"second derivative reaches {low} on the domain")

    # -- constructors -------------------------------------------------------
    @classmethod
    def parabola(cls, coeff: float = 1.0, domain=(0.0, 1.0)) -> ConvexCurve:
        if coeff < 0:
            raise NonConvexInput("parabola coefficient must be nonnegative")
        return cls("parabola", {"coeff": float(coeff)}, domain)

    @classmethod
    def polynomial(cls, coeffs, domain=(0.0, 1.0), label: str = "") -> ConvexCurve:
        return cls("polynomial", {"coeffs": [float(c) for c in coeffs]}, domain, label)

    @classmethod
    def cantor_staircase(cls, ratio: float = 1.0 / 3.0, depth: int = 24) -> ConvexCurve:
        return cls("cantor", {"ratio": float(ratio), "depth": int(depth)}, (0.0, 1.0))

    @classmethod
    def piecewise_linear(cls, breakpoints, values, label: str = "") -> ConvexCurve:
        xs = [float(x) for x in breakpoints]
        return cls("samples", {"x": xs, "y": [float(y) for y in values]}, (xs[0], xs[-1]), label)

    @classmethod
    def from_spec(cls, spec: dict) -> ConvexCurve:
        """Build from the JSON record ``{"kind", "params", "domain", "normalized"}``."""
        kind = spec["kind"]
        domain = tuple(spec.get("domain", (0.0, 1.0)))
        if len(domain) != 2:
            raise DomainError("domain must be [a, b]")
        curve = cls(kind, dict(spec.get("params", {})), domain, spec.get("label", ""))
        if spec.get("normalized", False) and not curve.is_normalized():
            from .errors import NotNormalized
            raise NotNormalized("curve flagged normalized but slopes leave [0, 1]")
        return curve

    def to_spec(self) -> dict:
        return {"kind": self.kind, "params": self.params, "domain": list(self.domain),
                "normalized": self.is_normalized()}

    # -- graph access -------------------------------------------------------
    def base_curve(self) -> ConvexCurve:
        return self

    def value(self, t: float) -> float:
        self._check(t)
        return _k.gamma(self._code, self._params, float(t))

    def values(self, ts) -> np.ndarray:
        return np.array([_k.gamma(self._code, self._params, float(t)) for t in np.ravel(ts)])

    def is_normalized(self) -> bool:
        a, b = self.domain
        lo = self.slope_right(a)
        hi = self.slope_left(b)
        return -TOL <= lo <= hi <= 1.0 + TOL

    def __repr__(self):
        return f"ConvexCurve({self.label!r}, domain={self.domain})"


class RescaledCurve(Arc):
    """Image ``sim(Gamma|_interval)`` of a sub-arc of a graph curve.

    Evaluation is done at the base parameter; :meth:`graph_x` gives the
    abscissa of the image point and :meth:`value` inverts it.
    """

    def __init__(self, base: ConvexCurve, interval, sim: Similarity):
        self.base = base
        a, b = float(interval[0]), float(interval[1])
        ba, bb = base.domain
        slack = TOL * (1.0 + abs(ba) + abs(bb))
        if a < ba - slack or b > bb + slack:
            raise DomainError(f"interval [{a}, {b}] leaves the base domain")
        super().__init__(base._code, base._params, sim, (max(a, ba), min(b, bb)), base.breakpoints)
        self.kind = "rescaled"
        self.label = f"rescaled({base.label})"

    def base_curve(self) -> ConvexCurve:
        return self.base

    def graph_x(self, t: float) -> float:
        return self.point(t)[0]

    def param_at(self, x: float) -> float:
        """Base parameter whose image has abscissa ``x`` (bisection)."""
        lo, hi = self.domain
        if x <= self.graph_x(lo):
            return lo
        if x >= self.graph_x(hi):
            return hi
        for _ in range(BISECT_ITERS):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if self.graph_x(mid) <= x:
                lo = mid
            else:
                hi = mid
        return lo

    def value(self, x: float) -> float:
        return self.point(self.param_at(x))[1]

    def __repr__(self):
        return f"RescaledCurve({self.base.label!r}, interval={self.domain}, ratio={self.similarity.ratio:.6g})"


def turn(curve: Arc, a: float, b: float) -> float:
    return curve.turn(a, b)


def chord(curve: Arc, a: float, b: float) -> float:
    return curve.chord(a, b)


def bending(curve: Arc, a: float, b: float) -> float:
    return curve.bending(a, b)


def one_sided_slopes(curve: Arc, t: float) -> tuple[float, float]:
    return curve.slopes(t)


def make_curve(spec: dict) -> ConvexCurve:
    return ConvexCurve.from_spec(spec)
