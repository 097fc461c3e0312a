"""Trigonometric-polynomial fields on a periodic grid and the numerical checks run on them.

The plane is replaced by the torus of side ``L`` with frequency lattice
``(1/L) Z^2``. A :class:`GridField` holds either a sparse list of lattice
coefficients or dense samples on an ``M x M`` grid (first axis ``x``);
sample ``[a, b]`` is the value at ``(a h, b h)`` with ``h = L / M`` and
``f(x) = sum_c c e^{2 pi i (n . x) / L}``.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .errors import (BadExponent, GridTooLarge, IndexMismatch, MisalignedPartition,
                     PartsDontSum, SupportViolation)
from .geometry import CanonicalBox, centered, polar_dual

DEFAULT_GRID_BUDGET = 1 << 30
GRID_FACTOR = 16
SUM_TOL = 1e-9


def workers() -> int:
    """FFT worker count, capped by ``DECOUPLE_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("DECOUPLE_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# fields

@dataclass
class GridField:
    M: int
    L: float
    support: np.ndarray | None = None  # (n, 2) integer lattice indices
    coeffs: np.ndarray | None = None
    _samples: np.ndarray | None = field(default=None, repr=False)

    @property
    def spacing(self) -> float:
        return self.L / self.M

    @property
    def is_sparse(self) -> bool:
        return self.support is not None and self.coeffs is not None

    @classmethod
    def sparse(cls, M: int, L: float, support, coeffs) -> GridField:
        sup = np.asarray(support, dtype=np.int64).reshape(-1, 2)
        c = np.asarray(coeffs, dtype=np.complex128).reshape(-1)
        if len(sup) != len(c):
            raise IndexMismatch("support and coefficient lengths differ")
        return cls(int(M), float(L), sup, c)

    @classmethod
    def from_samples(cls, samples, L: float, freq_support=None) -> GridField:
        s = np.asarray(samples)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise IndexMismatch("samples must be a square array")
        sup = None if freq_support is None else np.asarray(freq_support, dtype=np.int64).reshape(-1, 2)
        return cls(s.shape[0], float(L), sup, None, s.astype(np.complex128, copy=False))

    def sampled(self, shape=None, dtype=np.complex128) -> np.ndarray:
        """Samples on an ``Mx x My`` grid covering the torus (default ``M x M``)."""
        Mx, My = (self.M, self.M) if shape is None else shape
        if not self.is_sparse:
            if (Mx, My) != (self.M, self.M):
                raise IndexMismatch("dense fields can only be sampled on their own grid")
            return self._samples.astype(dtype, copy=False)
        spec = np.zeros((Mx, My), dtype=dtype)
        np.add.at(spec, (self.support[:, 0] % Mx, self.support[:, 1] % My), self.coeffs.astype(dtype))
        return sfft.ifft2(spec, norm="forward", workers=workers())

    @property
    def samples(self) -> np.ndarray:
        if self._samples is None:
            self._samples = self.sampled()
        return self._samples

    def coefficients(self) -> np.ndarray:
        """Dense ``M x M`` lattice coefficients (indices taken mod ``M``)."""
        return sfft.fft2(self.samples, norm="forward", workers=workers())

    def nbytes(self, itemsize: int = 16) -> int:
        return self.M * self.M * itemsize

    def resampled(self, M: int) -> GridField:
        if not self.is_sparse:
            raise IndexMismatch("only sparse fields can be moved to another grid")
        return GridField(int(M), self.L, self.support, self.coeffs)

    def support_matches(self, rel: float = 1e-10) -> bool:
        """Declared support equals the set of nonzero DFT coefficients."""
        if self.support is None:
            return True
        c = np.abs(self.coefficients())
        peak = float(c.max()) if c.size else 0.0
        declared = np.zeros_like(c, dtype=bool)
        declared[self.support[:, 0] % self.M, self.support[:, 1] % self.M] = True
        return bool(np.all(c[~declared] <= rel * max(peak, 1e-300)))


def add_fields(fields) -> GridField:
    fields = list(fields)
    if not fields:
        raise IndexMismatch("nothing to add")
    M, L = fields[0].M, fields[0].L
    if any(f.M != M or f.L != L for f in fields):
        raise IndexMismatch("fields live on different grids")
    if all(f.is_sparse for f in fields):
        return GridField.sparse(M, L, np.vstack([f.support for f in fields]),
                                np.concatenate([f.coeffs for f in fields]))
    return GridField.from_samples(sum(f.samples for f in fields), L)


def parseval_gap(f: GridField) -> float:
    """Relative gap between ``sum |samples|^2 h^2`` and ``L^2 sum |c|^2``."""
    lhs = float(np.sum(np.abs(f.samples) ** 2)) * f.spacing ** 2
    c = f.coeffs if f.is_sparse else f.coefficients()
    rhs = float(np.sum(np.abs(c) ** 2)) * f.L ** 2
    return abs(lhs - rhs) / max(rhs, 1e-300)


# ---------------------------------------------------------------------------
# synthesis

def _is_power_of_two(R) -> bool:
    return float(R).is_integer() and int(R) > 0 and (int(R) & (int(R) - 1)) == 0


def _intervals_of(partition):
    if hasattr(partition, "intervals"):
        return [tuple(map(float, iv)) for iv in partition.intervals]
    out = []
    for item in partition:
        iv = item.interval if isinstance(item, CanonicalBox) else item
        out.append((float(iv[0]), float(iv[1])))
    return out


def synth_wavepackets(curve, partition, R, seed: int = 0, coeff_model: str = "unimodular",
                      M: int | None = None, grid_budget: int = DEFAULT_GRID_BUDGET):
    """One lattice mode per column ``j / R`` near the curve, grouped by partition interval.

    Column ``j`` (``0 <= j <= R``) carries the mode ``(j, round(R gamma(j / R)))``
    with a Philox-seeded coefficient; it belongs to the first interval that
    contains ``j / R``. Returns ``(f, parts)`` as sparse fields on the torus of
    side ``R`` with ``M = 16 R`` samples per side.
    """
    if not _is_power_of_two(R):
        raise MisalignedPartition(f"R must be a power of 2, got {R}")
    R = int(R)
    M = GRID_FACTOR * R if M is None else int(M)
    if M * M * 16 > grid_budget:
        raise GridTooLarge(f"{M}x{M} complex grid needs {M * M * 16} bytes > budget {grid_budget}")
    intervals = _intervals_of(partition)
    if not intervals:
        raise MisalignedPartition("empty partition")
    for a, b in intervals:
        if a < -1e-12 or b > 1 + 1e-12 or b < a:
            raise MisalignedPartition(f"interval {(a, b)} is not inside [0, 1]")
    rng = np.random.Generator(np.random.Philox(seed))
    cols = np.arange(R + 1)
    if coeff_model == "unimodular":
        coeffs = np.exp(2j * np.pi * rng.random(R + 1))
    elif coeff_model == "gaussian":
        z = rng.standard_normal((R + 1, 2))
        coeffs = (z[:, 0] + 1j * z[:, 1]) / math.sqrt(2.0)
    else:
        raise ValueError(f"unknown coefficient model {coeff_model!r}")
    rows = np.array([round(R * curve.value(j / R)) for j in cols], dtype=np.int64)
    owner = np.full(R + 1, -1)
    slack = 1e-12
    for j in cols:
        t = j / R
        for idx, (a, b) in enumerate(intervals):
            if a - slack <= t <= b + slack:
                owner[j] = idx
                break
    if np.any(owner < 0):
        raise MisalignedPartition(f"columns {cols[owner < 0].tolist()[:5]} are not covered")
    support = np.stack([cols, rows], axis=1)
    f = GridField.sparse(M, R, support, coeffs)
    parts = []
    for idx in range(len(intervals)):
        sel = owner == idx
        parts.append(GridField.sparse(M, R, support[sel], coeffs[sel]))
    return f, parts


# ---------------------------------------------------------------------------
# norms

def _check_exponent(p):
    if p == math.inf or p == "inf":
        return math.inf
    try:
        p = float(p)
    except (TypeError, ValueError):
        raise BadExponent(f"exponent must be a real >= 1 or inf, got {p!r}") from None
    if not (p >= 1) or math.isnan(p):
        raise BadExponent(f"exponent must be >= 1, got {p}")
    return p


def reduced_shape(field: GridField, power: int) -> tuple[int, int]:
    """Smallest fast grid on which the mean of ``|f|^(2 power)`` is exact.

    ``|f|^(2 power)`` has frequencies within ``power`` times the index spread
    of ``f`` in each direction; a grid with more points than that spread
    never aliases a nonzero frequency onto zero.
    """
    span = field.support.max(axis=0) - field.support.min(axis=0)
    return tuple(int(sfft.next_fast_len(int(power * s) + 1)) for s in span)


def lp_norm(field: GridField, p, exact: bool = True) -> float:
    """``(sum |f|^p h^2)^(1/p)``; the sup of ``|f|`` on the grid for ``p = inf``.

    For sparse fields and even integer ``p`` the sum is taken on the reduced
    grid of :func:`reduced_shape`, which gives the same torus integral.
    """
    p = _check_exponent(p)
    if field.is_sparse and len(field.coeffs) == 0:
        return 0.0
    if p == math.inf:
        return float(np.max(np.abs(field.samples)))
    if exact and field.is_sparse and float(p).is_integer() and int(p) % 2 == 0:
        shape = reduced_shape(field, int(p) // 2)
        if shape[0] * shape[1] < field.M * field.M:
            vals = field.sampled(shape)
            mean = float(np.mean(np.abs(vals) ** p))
            return (mean * field.L ** 2) ** (1.0 / p)
    vals = np.abs(field.samples)
    return (float(np.sum(vals ** p)) * field.spacing ** 2) ** (1.0 / p)


def _disjoint(parts) -> bool:
    seen = set()
    for part in parts:
        if part.support is None:
            return True
        keys = {(int(a), int(b)) for a, b in part.support}
        if seen & keys:
            return False
        seen |= keys
    return True


def check_parts_sum(f: GridField, parts, tol: float = SUM_TOL) -> float:
    """Relative ``l^2`` gap between ``f`` and the sum of ``parts`` (raises above ``tol``)."""
    if f.is_sparse and all(p.is_sparse for p in parts):
        acc: dict = {}
        for a, b, c in zip(f.support[:, 0], f.support[:, 1], f.coeffs):
            acc[(int(a), int(b))] = acc.get((int(a), int(b)), 0) + c
        for part in parts:
            for a, b, c in zip(part.support[:, 0], part.support[:, 1], part.coeffs):
                acc[(int(a), int(b))] = acc.get((int(a), int(b)), 0) - c
        gap = math.sqrt(sum(abs(v) ** 2 for v in acc.values()))
        scale = math.sqrt(float(np.sum(np.abs(f.coeffs) ** 2)))
    else:
        diff = f.samples - sum(p.samples for p in parts)
        gap = float(np.linalg.norm(diff))
        scale = float(np.linalg.norm(f.samples))
    rel = gap / max(scale, 1e-300)
    if rel > tol:
        raise PartsDontSum(f"parts differ from the field by {rel:.3g} (relative)")
    return rel


def decoupling_ratio(f: GridField, parts, p) -> float:
    """``||f||_p / (sum_J ||f_J||_p^2)^(1/2)``."""
    p = _check_exponent(p)
    check_parts_sum(f, parts)
    if not _disjoint(parts):
        raise SupportViolation("parts must have disjoint declared frequency supports")
    denom = math.sqrt(sum(lp_norm(part, p) ** 2 for part in parts))
    return lp_norm(f, p) / denom


def square_function_ratio(f: GridField, parts) -> float:
    """``||f||_4 / ||(sum_J |f_J|^2)^(1/2)||_4``, computed exactly on a reduced grid."""
    check_parts_sum(f, parts)
    shape = reduced_shape(f, 2)
    sq = sum(np.abs(part.sampled(shape)) ** 2 for part in parts if len(part.coeffs))
    denom = (float(np.mean(sq ** 2)) * f.L ** 2) ** 0.25
    return lp_norm(f, 4) / denom


# ---------------------------------------------------------------------------
# Bernstein and local orthogonality

def _frequencies(field: GridField) -> np.ndarray:
    return field.support.astype(float) / field.L


def bernstein_check(field: GridField, box: CanonicalBox, p, q, slack: float = 1e-9) -> float:
    """``||f||_q / (|theta|^(1/p - 1/q) ||f||_p)`` for ``f`` supported in the box ``theta``."""
    p, q = _check_exponent(p), _check_exponent(q)
    if q < p:
        raise BadExponent("need q >= p")
    if field.support is None:
        raise SupportViolation("field has no declared frequency support")
    if not np.all(box.contains(_frequencies(field), slack)):
        raise SupportViolation("field frequencies leave the box")
    expo = (1.0 / p if p != math.inf else 0.0) - (1.0 / q if q != math.inf else 0.0)
    return lp_norm(field, q) / (box.area ** expo * lp_norm(field, p))


def _indicator(M: int, support) -> np.ndarray:
    ind = np.zeros((M, M))
    ind[support[:, 0] % M, support[:, 1] % M] = 1.0
    return ind


def sumset_overlap(M: int, supports, U) -> tuple[int, int]:
    """Max pointwise overlap of the sets ``X_k + U`` mod ``M`` and the max number of
    sets meeting a given one."""
    u = sfft.fft2(_indicator(M, U))
    sets = []
    for sup in supports:
        conv = np.real(sfft.ifft2(sfft.fft2(_indicator(M, sup)) * u))
        sets.append(conv > 0.5)
    cover = np.sum(sets, axis=0)
    degree = 0
    for a in sets:
        degree = max(degree, sum(bool(np.any(a & b)) for b in sets))
    return int(cover.max()), degree


def local_orthogonality_check(parts, weight: GridField, C: float = 4.0) -> dict:
    """Both sides of the weighted local orthogonality inequality on the grid.

    ``lhs = |sum |sum_k h_k|^2 W|``, ``rhs = L sum_k sum |h_k|^2 |W|`` with ``L``
    the maximal overlap of the sumsets ``X_k + U`` on the lattice.
    """
    M = weight.M
    if weight.support is None or any(p.support is None for p in parts):
        raise SupportViolation("declared supports are required")
    if any(p.M != M or p.L != weight.L for p in parts):
        raise IndexMismatch("fields live on different grids")
    if not np.any(np.all(weight.support % M == 0, axis=1)):
        raise SupportViolation("weight support must contain the origin")
    for fld in (*parts, weight):
        if not fld.support_matches():
            raise SupportViolation("declared support does not match the coefficients")
    overlap, degree = sumset_overlap(M, [p.support for p in parts], weight.support)
    h2 = weight.spacing ** 2
    W = weight.samples
    total = sum(p.samples for p in parts)
    lhs = abs(complex(np.sum(np.abs(total) ** 2 * W))) * h2
    base = float(sum(np.sum(np.abs(p.samples) ** 2 * np.abs(W)) for p in parts)) * h2
    rhs = overlap * base
    measured = lhs / rhs if rhs > 0 else 0.0
    return {"lhs": lhs, "rhs": rhs, "L": overlap, "degree": degree, "constant": measured,
            "passed": measured <= C}


# ---------------------------------------------------------------------------
# broad / narrow

def nonadjacent_pairs(n: int, K: int):
    """Ordered pairs ``(i, j)`` separated by more than ``ceil(K / 4)`` positions."""
    gap = math.ceil(K / 4)
    return [(i, j) for i in range(n) for j in range(n) if abs(i - j) > gap]


def broad_narrow_check(values, K: int = 4) -> dict:
    """``|sum v| <= K (sum |v|^6)^(1/6) + sum_{i !~ j} |v_i|^(1/2) |v_j|^(1/2)``."""
    if K < 4:
        raise ValueError("K must be at least 4")
    v = np.asarray(values, dtype=np.complex128).reshape(-1)
    mod = np.abs(v)
    lhs = float(abs(np.sum(v)))
    top = float(mod.max()) if len(v) else 0.0
    # scaled so tiny moduli do not underflow in the sixth power
    narrow = K * top * float(np.sum((mod / top) ** 6)) ** (1.0 / 6.0) if top > 0 else 0.0
    root = np.sqrt(mod)
    gap = math.ceil(K / 4)
    idx = np.arange(len(v))
    mask = np.abs(idx[:, None] - idx[None, :]) > gap
    broad = float(np.sum(np.outer(root, root)[mask]))
    rhs = narrow + broad
    scale = float(np.sum(mod)) if len(v) else 0.0
    return {"lhs": lhs, "rhs": rhs, "narrow": narrow, "broad": broad,
            "passed": lhs <= rhs + 1e-12 * scale}


# ---------------------------------------------------------------------------
# mollifiers

def smoothstep(x):
    """C^2 quintic step: 0 for x <= 0, 1 for x >= 1."""
    x = np.clip(x, 0.0, 1.0)
    return x * x * x * (x * (6.0 * x - 15.0) + 10.0)


def eta_hat_profile(r):
    """Radial profile: 1 on ``[0, 1]``, 0 on ``[2, inf)``, decreasing in between."""
    return 1.0 - smoothstep(np.asarray(r, dtype=float) - 1.0)


def frequency_grid(M: int, L: float):
    """Signed lattice frequencies ``(xi_1, xi_2)`` in FFT order."""
    k = sfft.fftfreq(M, d=L / M)
    return np.meshgrid(k, k, indexing="ij")


def kernel_from_hat(hat: np.ndarray, L: float) -> np.ndarray:
    """Torus kernel with the given lattice transform: ``sum hat(xi) e^{2 pi i xi x} / L^2``."""
    return sfft.ifft2(hat, norm="forward", workers=workers()) / L ** 2


def convolve(a: np.ndarray, b: np.ndarray, L: float) -> np.ndarray:
    """Torus convolution ``int a(x - y) b(y) dy`` by the DFT."""
    M = a.shape[0]
    h2 = (L / M) ** 2
    out = sfft.ifft2(sfft.fft2(a, workers=workers()) * sfft.fft2(b, workers=workers()),
                     workers=workers()) * h2
    return out


def l1_norm(a: np.ndarray, L: float) -> float:
    return float(np.sum(np.abs(a))) * (L / a.shape[0]) ** 2


def _grid_offsets(direction, half: float, h: float, M: int):
    steps = max(1, min(int(math.ceil(2.0 * half / h)) + 1, 2 * M))
    s = np.linspace(-half, half, steps)
    dx = np.rint(s * direction[0] / h).astype(int)
    dy = np.rint(s * direction[1] / h).astype(int)
    return sorted(set(zip(dx.tolist(), dy.tolist())))


def local_sup(a: np.ndarray, rect, L: float) -> np.ndarray:
    """``sup_{y in x + rect} a(y)`` on the periodic grid for a centred rectangle.

    The rectangle is the sum of two centred segments, so the sup is taken
    along one side and then the other.
    """
    M = a.shape[0]
    h = L / M
    c, s = math.cos(rect.angle), math.sin(rect.angle)
    out = a
    for direction, half in (((c, s), rect.half_long), ((-s, c), rect.half_short)):
        acc = np.full_like(out, -np.inf)
        for dx, dy in _grid_offsets(direction, half, h, M):
            np.maximum(acc, np.roll(out, (-dx, -dy), axis=(0, 1)), out=acc)
        out = acc
    return out


@dataclass
class MollifierSet:
    """Lattice mollifiers of one branch level, keyed by box index."""

    level: int
    M: int
    L: float
    R: float
    eps: float
    delta: float
    lambdas: tuple
    eta_hat: dict = field(default_factory=dict)
    eta: dict = field(default_factory=dict)
    rho_hat: dict = field(default_factory=dict)
    rho: dict = field(default_factory=dict)
    w: dict = field(default_factory=dict)
    omega: dict = field(default_factory=dict)
    norms: dict = field(default_factory=dict)


def rho_hat_for(box: CanonicalBox, k: int, N: int, R: float, delta: float, XI, ETA) -> np.ndarray:
    """``eta_hat(R^-delta A xi)`` with ``A`` taking ``2 J(box)`` (recentred) to ``32^(k-N) B``."""
    c, s = math.cos(box.angle), math.sin(box.angle)
    u = XI * c + ETA * s
    v = -XI * s + ETA * c
    scale = 32.0 ** (k - N) * R ** (-delta)
    r = scale * np.hypot(u / box.length, v / (2.0 * box.width))
    return eta_hat_profile(r)


def build_mollifiers(bt, k: int, R: float, eps: float, M: int = 128, L: float | None = None) -> MollifierSet:
    """Mollifiers of level ``k`` for every box of a branch tree's collection.

    Frequencies are those of the tree's curve; each box's ``rho`` is built
    recentred at the origin (only ``|rho|`` enters ``w`` and ``omega``).
    """
    N = bt.N
    L = float(R) if L is None else float(L)
    delta = eps ** 10
    XI, ETA = frequency_grid(M, L)
    rad = np.hypot(XI, ETA)
    lams = tuple(bt.branch.lambdas)
    ms = MollifierSet(k, M, L, R, eps, delta, lams)
    for j in range(1, min(k + 1, N) + 1):
        ms.eta_hat[j] = eta_hat_profile(rad / lams[j - 1])
        ms.eta[j] = kernel_from_hat(ms.eta_hat[j], L)
        ms.norms[("eta", j)] = l1_norm(ms.eta[j], L)
    cache = {}

    def pieces(level, i):
        key = (level, i)
        if key not in cache:
            box = bt.base.levels[level][i]
            rh = rho_hat_for(box, level, N, R, delta, XI, ETA)
            rho = kernel_from_hat(rh, L)
            dual = polar_dual(centered(box))
            dual4 = type(dual)(4.0 * dual.half_long, 4.0 * dual.half_short, dual.angle)
            w = local_sup(np.abs(rho), dual4, L)
            cache[key] = (rh, rho, w)
        return cache[key]

    def omega(level, i):
        rh, rho, w = pieces(level, i)
        if level == 1:
            return w
        parent = bt.base.parents[level][i]
        om_p = omega(level - 1, parent)
        _, rho_p, _ = pieces(level - 1, parent)
        eta = ms.eta.get(level)
        if eta is None:
            eta = kernel_from_hat(eta_hat_profile(rad / lams[level - 1]), L)
        conv = np.real(convolve(convolve(om_p, np.abs(rho_p), L), np.abs(eta), L))
        return np.maximum(np.maximum(w, om_p), conv)

    for i in bt.collections[k]:
        rh, rho, w = pieces(k, i)
        ms.rho_hat[i], ms.rho[i], ms.w[i] = rh, rho, w
        ms.omega[i] = omega(k, i) if k >= 1 else w
        ms.norms[("rho", i)] = l1_norm(rho, L)
        ms.norms[("w", i)] = l1_norm(w, L)
        ms.norms[("omega", i)] = l1_norm(ms.omega[i], L)
    return ms


def omega_bound_check(ms: MollifierSet) -> dict:
    """Compare ``||omega||_1`` with ``(d + ... + d^k) R^(2 delta)``.

    ``d`` is the measured constant of the induction: the larger of
    ``max ||w||_1 / R^(2 delta)`` and ``1 + ||rho||_1 ||eta||_1``.
    """
    R2d = ms.R ** (2 * ms.delta)
    w_ratio = max((v for (kind, _), v in ms.norms.items() if kind == "w"), default=0.0) / R2d
    rho_max = max((v for (kind, _), v in ms.norms.items() if kind == "rho"), default=0.0)
    eta_max = max((v for (kind, _), v in ms.norms.items() if kind == "eta"), default=0.0)
    d = max(1.0, w_ratio, 1.0 + rho_max * eta_max)
    bound = sum(d ** j for j in range(1, ms.level + 1)) * R2d
    worst = max((v for (kind, _), v in ms.norms.items() if kind == "omega"), default=0.0)
    return {"d": d, "bound": bound, "max_omega_l1": worst, "ratio": worst / R2d,
            "passed": worst <= bound * (1 + 1e-9)}


# ---------------------------------------------------------------------------
# square functions

def square_function(fields: dict, ms: MollifierSet) -> np.ndarray:
    """``g = sum_tau |f_tau|^2 * omega_tau`` on the grid."""
    if set(fields) != set(ms.omega):
        raise IndexMismatch(f"fields {sorted(fields)} do not match boxes {sorted(ms.omega)}")
    g = np.zeros((ms.M, ms.M))
    for i, fld in fields.items():
        if fld.M != ms.M or fld.L != ms.L:
            raise IndexMismatch("field grid differs from the mollifier grid")
        g += np.real(convolve(np.abs(fld.samples) ** 2, ms.omega[i], ms.L))
    return g


def hilo_split(g: np.ndarray, eta_hat: np.ndarray):
    """``g_lo = g * eta`` (multiplication by ``eta_hat`` on the lattice), ``g_hi = g - g_lo``."""
    g_lo = sfft.ifft2(sfft.fft2(g, workers=workers()) * eta_hat, workers=workers())
    if np.isrealobj(g):
        g_lo = np.real(g_lo)
    return g_lo, g - g_lo


def high_ratio(g_hi: np.ndarray, fields: dict, R: float, eps: float, L: float) -> float:
    """``||g_hi||_2^2 / (R^(2 eps) sum ||f_tau||_4^4)``."""
    h2 = (L / g_hi.shape[0]) ** 2
    num = float(np.sum(np.abs(g_hi) ** 2)) * h2
    den = R ** (2 * eps) * sum(float(np.sum(np.abs(f.samples) ** 4)) * h2 for f in fields.values())
    return num / den if den > 0 else 0.0


# ---------------------------------------------------------------------------
# wave packets

def _transition(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return a / (a + b)


def zeta_1d(s):
    """Bump equal to 1 on ``[-1/2, 1/2]`` and 0 outside ``(-1, 1)``."""
    return _transition(2.0 - 2.0 * np.abs(s))


@dataclass
class Tiling:
    """Tiles congruent to the dual box and the partition of unity on the grid.

    ``ids[s]`` and ``weights[s]`` (``s = 0..3``) list, per grid point, the
    tiles whose doubles contain it and the values of their bumps.
    """

    box: CanonicalBox
    M: int
    L: float
    sides: tuple[float, float]
    ids: np.ndarray
    weights: np.ndarray
    tiles: np.ndarray  # (n, 2) integer lattice positions of the tiles
    raw: np.ndarray  # unnormalized bump values, for the active-count check

    def active_count(self) -> np.ndarray:
        return np.sum(self.raw > 0, axis=0)

    def sum(self) -> np.ndarray:
        return np.sum(self.weights, axis=0)

    def local(self, x, y):
        c, s = math.cos(self.box.angle), math.sin(self.box.angle)
        return (x * c + y * s) / self.sides[0], (-x * s + y * c) / self.sides[1]


def wavepacket_tiling(box: CanonicalBox, M: int, L: float) -> Tiling:
    """Partition of unity subordinate to a tiling by rectangles congruent to the dual box.

    The tiles have sides ``2 / (len / 2)`` along the box and ``2 / wid``
    across, i.e. they are translates of the polar dual of the recentred box.
    Tile ``n`` is ``{ |u - n_1| <= 1/2, |v - n_2| <= 1/2 }`` in the scaled
    coordinates ``(u, v)``; its bump vanishes outside the double.
    """
    dual = polar_dual(centered(box))
    sides = (2.0 * dual.half_long, 2.0 * dual.half_short)
    h = L / M
    x = np.arange(M) * h
    X, Y = np.meshgrid(x, x, indexing="ij")
    c, s = math.cos(box.angle), math.sin(box.angle)
    u = (X * c + Y * s) / sides[0]
    v = (-X * s + Y * c) / sides[1]
    fu, fv = np.floor(u), np.floor(v)
    n1 = np.stack([fu, fu, fu + 1, fu + 1])
    n2 = np.stack([fv, fv + 1, fv, fv + 1])
    raw = zeta_1d(u[None] - n1) * zeta_1d(v[None] - n2)
    total = np.sum(raw, axis=0)
    weights = raw / total
    keys = np.stack([n1.astype(np.int64).ravel(), n2.astype(np.int64).ravel()], axis=1)
    tiles, inv = np.unique(keys, axis=0, return_inverse=True)
    ids = inv.reshape(n1.shape)
    return Tiling(box, M, L, sides, ids, weights, tiles, raw)


def prune(fld: GridField, tiling: Tiling, G: float):
    """Keep the wave packets ``psi_T f`` whose sup on the grid is at most ``G``.

    Returns ``(pruned_field, good_mask)`` where ``good_mask[n]`` refers to
    ``tiling.tiles[n]``.
    """
    if fld.M != tiling.M or fld.L != tiling.L:
        raise IndexMismatch("field grid differs from the tiling grid")
    vals = fld.samples
    amp = np.abs(vals)[None] * tiling.weights
    peak = np.zeros(len(tiling.tiles))
    np.maximum.at(peak, tiling.ids.ravel(), amp.ravel())
    good = peak <= G
    keep = good[tiling.ids] * tiling.weights
    out = np.sum(keep, axis=0) * vals
    return GridField.from_samples(out, fld.L), good


def prune_properties(before: GridField, after: GridField, tiling: Tiling, good, G: float) -> dict:
    """Pointwise domination, the ``9 G`` sup bound and vanishing away from good tiles."""
    a, b = np.abs(after.samples), np.abs(before.samples)
    scale = max(float(b.max()), 1e-300)
    covered = np.any(good[tiling.ids] & (tiling.weights > 0), axis=0)
    return {
        "dominated": bool(np.all(a <= b + 1e-12 * scale)),
        "sup_bound": bool(a.max() <= 9.0 * G * (1 + 1e-12)),
        "supported": bool(np.all(a[~covered] == 0.0)),
    }


def energy_outside(fld: GridField, box: CanonicalBox, factor: float) -> float:
    """Fraction of ``||f||_2^2`` at lattice frequencies outside ``factor * box``."""
    coef = fld.coefficients()
    k = sfft.fftfreq(fld.M, d=1.0 / fld.M)
    I, J = np.meshgrid(k, k, indexing="ij")
    pts = np.stack([I / fld.L, J / fld.L], axis=-1)
    (tx, ty), (nx, ny) = box.frame
    cx, cy = box.centroid
    du = (pts[..., 0] - cx) * tx + (pts[..., 1] - cy) * ty
    dv = (pts[..., 0] - cx) * nx + (pts[..., 1] - cy) * ny
    inside = (np.abs(du) <= factor * 0.5 * box.length) & (np.abs(dv) <= factor * box.width)
    e = np.abs(coef) ** 2
    total = float(e.sum())
    return float(e[~inside].sum()) / total if total > 0 else 0.0


# ---------------------------------------------------------------------------
# raw export

def export_raw(fld: GridField, path) -> dict:
    """Write a JSON header line followed by little-endian complex64 samples (row-major)."""
    header = {"M": fld.M, "L": fld.L, "layout": "row-major", "dtype": "complex64",
              "axes": ["x", "y"], "endian": "little"}
    data = np.ascontiguousarray(fld.samples, dtype="<c8")
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode())
        fh.write(data.tobytes(order="C"))
    return header


def read_raw(path) -> GridField:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        data = np.frombuffer(fh.read(), dtype="<c8")
    M = int(header["M"])
    return GridField.from_samples(data.reshape(M, M), header["L"])


# ---------------------------------------------------------------------------
# experiments

def decoupling_experiment(curve, partition_for, R_values, p_values, seeds,
                          coeff_model: str = "unimodular", grid_budget: int = DEFAULT_GRID_BUDGET,
                          timing: bool = False):
    """Rows ``{R, p, seed, ratio}`` (plus ``runtime`` when ``timing``) for every combination.

    ``partition_for(R)`` supplies the interval partition at scale ``R``.
    """
    import time

    rows = []
    for R in R_values:
        part = partition_for(R)
        for seed in seeds:
            t0 = time.perf_counter()
            f, parts = synth_wavepackets(curve, part, R, seed, coeff_model, grid_budget=grid_budget)
            for p in p_values:
                row = {"R": int(R), "p": float(p), "seed": int(seed),
                       "ratio": decoupling_ratio(f, parts, p)}
                if timing:
                    row["runtime"] = time.perf_counter() - t0
                rows.append(row)
    return rows


def loglog_slope(xs, ys) -> float:
    return float(np.polyfit(np.log2(np.asarray(xs, float)), np.log2(np.asarray(ys, float)), 1)[0])


def a_eps(K: int, eps: float, c_lo: float) -> float:
    """Sufficient pruning constant ``20 K^2 / eps * (2 C_lo)^(1/eps)``."""
    return 20.0 * K * K / eps * (2.0 * c_lo) ** (1.0 / eps)


def pruning_threshold(R: float, eps: float, alpha: float, beta: float, K: int = 4,
                      c_lo: float = 1.0) -> float:
    """``G = A_eps R^(5 eps) beta / alpha``."""
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be positive")
    return a_eps(K, eps, c_lo) * R ** (5 * eps) * beta / alpha
