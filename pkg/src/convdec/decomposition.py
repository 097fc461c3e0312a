"""Coarse partition, single- and multi-scale box algorithms, ideal partitions.

All searches are monotone bisections (see :class:`convdec.curves.Arc`), and
every output carries a certificate of the inequalities it is meant to
satisfy. Boxes of a tree are expressed in the frame of the tree's curve;
the rescaled curve of a box shares the parameter of the base graph, so
intervals pull back without inversion.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .curves import TOL, Arc, ConvexCurve, RescaledCurve
from .errors import (AdmissibilityFailure, CertificationFailure, EpsilonError,
                     InvariantViolation, NotAdmissible, NotClassP2, NotNormalized)
from .geometry import CanonicalBox, Similarity, box_corners, contains_box, dilate

REL = 1e-9


def levels_for(eps: float) -> int:
    """Return 1/eps, requiring it to be a positive integer."""
    if not (isinstance(eps, (int, float)) and eps > 0 and math.isfinite(eps)):
        raise EpsilonError(f"eps must be a positive real, got {eps!r}")
    n = 1.0 / eps
    k = round(n)
    if k < 1 or abs(n - k) > 1e-9 * max(1.0, n):
        raise EpsilonError(f"1/eps must be a positive integer, got 1/{eps} = {n}")
    return int(k)


def _le(x, bound):
    return x <= bound + TOL * (1.0 + abs(bound))


def _ge(x, bound):
    return x >= bound - TOL * (1.0 + abs(bound))


# ---------------------------------------------------------------------------
# admissibility

@dataclass
class AdmissibilityReport:
    R: float
    epsilon: float
    turn: float
    chord: float
    start: tuple[float, float]
    bending: float
    c1: bool
    c2: bool
    c3: bool
    c4: bool

    @property
    def passed(self) -> bool:
        return self.c1 and self.c2 and self.c3 and self.c4

    def as_dict(self) -> dict:
        return {"c1": [self.c1, self.turn], "c2": [self.c2, self.chord],
                "c3": [self.c3, list(self.start)], "c4": [self.c4, self.bending],
                "epsilon": self.epsilon, "R": self.R}


def admissibility_check(curve: Arc, R: float, eps: float) -> AdmissibilityReport:
    a, b = curve.domain
    tn, ch = curve.turn(a, b), curve.chord(a, b)
    w = ch * tn
    y0 = curve.point(a)[1]
    m0 = curve.slope_right(a)
    small = R ** (-2 * eps)
    large = R ** (2 * eps)
    return AdmissibilityReport(
        R, eps, tn, ch, (y0, m0), w,
        c1=_le(tn, small),
        c2=_ge(ch, large),
        c3=abs(y0) <= TOL and abs(m0) <= TOL,
        c4=_le(w, 1.0),
    )


# ---------------------------------------------------------------------------
# coarse partition

@dataclass(frozen=True)
class CoarsePiece:
    index: int
    interval: tuple[float, float]
    cls: str
    tail: bool = False


def coarse_partition(curve: ConvexCurve, R: float, eps: float) -> list[CoarsePiece]:
    """Greedy split into pieces of turn at most ``R**(-2 eps)`` or length ``1/R``.

    A final piece shorter than ``1/R`` is kept with class P1 and flagged as a
    tail.
    """
    levels_for(eps)
    if not curve.is_normalized():
        raise NotNormalized("coarse partition needs slopes in [0, 1]")
    a, b = curve.domain
    small = R ** (-2 * eps)
    step = 1.0 / R
    pieces = []
    s = a
    while s < b:
        sup = curve.sup_turn(s, b, small)
        nxt = s + step
        if sup > nxt:
            pieces.append(CoarsePiece(len(pieces), (s, sup), "P2"))
            s = sup
        elif nxt < b:
            pieces.append(CoarsePiece(len(pieces), (s, nxt), "P1"))
            s = nxt
        else:
            pieces.append(CoarsePiece(len(pieces), (s, b), "P1", tail=nxt > b))
            s = b
    return pieces


def rescale_piece(curve: ConvexCurve, piece: CoarsePiece, R: float, eps: float):
    """Rescale a P2 piece to an admissible curve with chord exactly ``R**(2 eps)``.

    Returns ``(rescaled_curve, similarity)``; the similarity is rotation by
    ``-atan(m)`` about the left endpoint followed by the factor ``r_p``.
    """
    if piece.cls != "P2":
        raise NotClassP2(f"piece {piece.index} has class {piece.cls}")
    s, u = piece.interval
    r_p = R ** (2 * eps) / curve.chord(s, u)
    sim = Similarity(r_p, -math.atan(curve.slope_right(s)), curve.point(s))
    gp = RescaledCurve(curve.base_curve(), (s, u), sim)
    rep = admissibility_check(gp, R, eps)
    if not rep.passed:
        raise AdmissibilityFailure(f"rescaled piece {piece.index} fails {rep.as_dict()}")
    return gp, sim


# ---------------------------------------------------------------------------
# single scale

def _box(curve: Arc, s: float, u: float, width: float, level: int, kind: str) -> CanonicalBox:
    x, y = curve.point(s)
    return CanonicalBox((s, u), (x, y), math.atan(curve.slope_right(s)),
                        curve.chord(s, u), width, level, kind,
                        meta={"bending": curve.bending(s, u)})


def single_scale_intervals(curve: Arc, target: float) -> list[tuple[float, float, str]]:
    """Intervals ``[s, u]`` and kinds of the single-scale algorithm at ``target``."""
    a, b = curve.domain
    if curve.bending(a, b) <= target:
        return [(a, b, "exceptional")]
    out = []
    s = a
    u = curve.sup_bending(s, b, target)
    out.append((s, u, "left"))
    while True:
        if curve.bending(u, b) <= target:
            s_right = curve.inf_bending(b, s, target)
            out.append((s_right, b, "right"))
            return out
        s = u
        u = curve.sup_bending(s, b, target)
        if u <= s:
            raise InvariantViolation(f"single-scale search stalled at {s}")
        out.append((s, u, "left"))


def single_scale(curve: Arc, target: float, R: float | None = None, eps: float | None = None,
                 level: int = 1) -> list[CanonicalBox]:
    """Boxes of width ``target`` along ``curve``; see :func:`single_scale_intervals`."""
    if not 0 < target:
        raise ValueError("target bending must be positive")
    if R is not None and eps is not None:
        rep = admissibility_check(curve, R, eps)
        if not rep.passed:
            raise NotAdmissible(f"curve is not admissible: {rep.as_dict()}")
    return [_box(curve, s, u, target, level, kind)
            for s, u, kind in single_scale_intervals(curve, target)]


def certify_single_scale(curve: Arc, boxes: list[CanonicalBox], R: float, eps: float,
                         target: float | None = None) -> dict:
    """Measured single-scale inequalities (per-box bending, maximality, length window,
    eccentricity, count and containment)."""
    target = R ** (-eps) if target is None else target
    a, b = curve.domain
    total = curve.chord(a, b)
    eta = 1e-9 * (b - a)
    xa, ya = curve.point(a)
    xb = curve.point(b)[0]
    frame_box = CanonicalBox((a, b), (xa, 0.0), 0.0, xb - xa, 1.0)
    frame2 = dilate(frame_box, 2.0)
    rep = {"count": len(boxes), "count_bound": 32.0 * target ** -0.5,
           "bending_ok": True, "maximal_ok": True, "length_ok": True,
           "eccentric_ok": True, "containment_ok": True,
           "containment_applicable": R >= 2.0 ** (1.0 / eps) * (1 - 1e-12),
           "min_length_ratio": math.inf, "max_bending_ratio": 0.0}
    for box in boxes:
        s, u = box.interval
        w = curve.bending(s, u)
        if not w <= target:
            rep["bending_ok"] = False
        rep["max_bending_ratio"] = max(rep["max_bending_ratio"], w / target)
        if box.kind == "left" and u + eta <= b and not curve.bending(s, u + eta) > target:
            rep["maximal_ok"] = False
        if box.kind == "right" and s - eta >= a and not curve.bending(s - eta, u) > target:
            rep["maximal_ok"] = False
        ch = curve.chord(s, u)
        rep["min_length_ratio"] = min(rep["min_length_ratio"], ch / (target * total))
        if box.kind != "exceptional":
            if ch < target * total * (1 - REL) or ch > total * (1 + REL):
                rep["length_ok"] = False
        if box.length < R ** (2 * eps) * box.width * (1 - REL):
            rep["eccentric_ok"] = False
        if not contains_box(frame2, box):
            rep["containment_ok"] = False
    rep["count_ok"] = rep["count"] <= rep["count_bound"]
    keys = ("bending_ok", "maximal_ok", "length_ok", "eccentric_ok", "count_ok")
    rep["passed"] = all(rep[k] for k in keys) and (
        rep["containment_ok"] or not rep["containment_applicable"])
    return rep


# ---------------------------------------------------------------------------
# multi scale

def root_box(curve: Arc) -> CanonicalBox:
    a, b = curve.domain
    x, y = curve.point(a)
    return CanonicalBox((a, b), (x, y), math.atan(curve.slope_right(a)),
                        curve.chord(a, b), 1.0, 0, "root",
                        meta={"bending": curve.bending(a, b)})


def box_curve(curve: Arc, box: CanonicalBox) -> RescaledCurve:
    """The rescaled curve of ``box``: its arc mapped by the box's rescaling map.

    The similarity is assembled relative to the base graph so that the
    anchor goes exactly to the origin and the right tangent there is
    horizontal.
    """
    t, v = box.interval
    base = curve.base_curve()
    sim = Similarity(curve.similarity.ratio / box.width,
                     -math.atan(base.slope_right(t)), base.point(t))
    return RescaledCurve(base, (t, v), sim)


def rescaled_curve(curve: Arc, box: CanonicalBox) -> RescaledCurve:
    return box_curve(curve, box)


@dataclass
class DecompositionTree:
    curve: Arc
    R: float
    eps: float
    N: int
    levels: list[list[CanonicalBox]]
    parents: list[list[int]]
    sigmas: list[list[CanonicalBox | None]]
    certificates: list[dict] = field(default_factory=list)

    def R_k(self, k: int) -> float:
        return self.R ** (k * self.eps)

    def children(self, k: int, i: int) -> list[int]:
        if k + 1 >= len(self.levels):
            return []
        return [j for j, p in enumerate(self.parents[k + 1]) if p == i]

    def box_curve(self, k: int, i: int) -> RescaledCurve:
        return box_curve(self.curve, self.levels[k][i])

    def rescaling_map(self, k: int, i: int) -> Similarity:
        return self.levels[k][i].rescaling_map()

    def leaves(self) -> list[CanonicalBox]:
        return list(self.levels[-1])

    def doubled(self, k: int) -> list[CanonicalBox]:
        """Boxes of level ``k`` replaced by their centroid doubles."""
        return [dilate(b, 2.0) for b in self.levels[k]]

    def doubled_containment(self) -> bool:
        """Check ``2 tau_{k+1}`` lies in ``3 (2 tau_k)`` for every parent link."""
        for k in range(1, len(self.levels)):
            for i, box in enumerate(self.levels[k]):
                parent = self.levels[k - 1][self.parents[k][i]]
                if not contains_box(dilate(parent, 6.0), dilate(box, 2.0)):
                    return False
        return True

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.certificates)

    def records(self):
        """One record per box with its parent index, for JSON-lines dumps."""
        for k, level in enumerate(self.levels):
            cert = self.certificates[k] if k < len(self.certificates) else {}
            for i, box in enumerate(level):
                rec = box.to_record()
                rec["index"] = i
                rec["parent"] = self.parents[k][i]
                rec["bending"] = box.meta.get("bending")
                rec["level_passed"] = cert.get("passed")
                yield rec


def multi_scale(curve: Arc, R: float, eps: float, N: int | None = None,
                certify: bool = True, strict: bool = True) -> DecompositionTree:
    """Build levels 0..N of boxes by repeated rescaled single-scale steps."""
    if N is None:
        N = levels_for(eps)
    rep = admissibility_check(curve, R, eps)
    if not rep.passed:
        raise NotAdmissible(f"curve is not admissible: {rep.as_dict()}")
    target = R ** (-eps)
    root = root_box(curve)
    levels, parents, sigmas = [[root]], [[-1]], [[None]]
    for k in range(N):
        new, par, sig = [], [], []
        for i, tau in enumerate(levels[k]):
            sub = box_curve(curve, tau)
            for s, u, kind in single_scale_intervals(sub, target):
                sigma = _box(sub, s, u, target, 1, kind)
                child = _box(curve, s, u, target * tau.width, k + 1, kind)
                child = CanonicalBox(child.interval, child.anchor, child.angle,
                                     sigma.length * tau.width, target * tau.width,
                                     k + 1, kind, meta=child.meta)
                new.append(child)
                par.append(i)
                sig.append(sigma)
        levels.append(new)
        parents.append(par)
        sigmas.append(sig)
    tree = DecompositionTree(curve, R, eps, N, levels, parents, sigmas)
    if certify:
        tree.certificates = certify_tree(tree)
        if strict:
            for cert in tree.certificates:
                if not cert["invariants_ok"]:
                    raise InvariantViolation(f"level {cert['level']} fails I(k)/II(k): {cert}")
    return tree


def _corners_close(p, q, scale):
    return float(np.max(np.abs(p - q))) / scale


def certify_tree(tree: DecompositionTree) -> list[dict]:
    """Per-level certificates for a multi-scale tree."""
    curve, R, eps = tree.curve, tree.R, tree.eps
    out = []
    containment_applicable = R >= 2.0 ** (1.0 / eps) * (1 - 1e-12)
    for k, level in enumerate(tree.levels):
        Rk = tree.R_k(k)
        c = {"level": k, "count": len(level), "count_bound": 32.0 ** k * R ** (k * eps / 2),
             "I_ok": True, "II_ok": True, "eccentric_ok": True, "range_ok": True,
             "containment_ok": True, "containment_applicable": containment_applicable,
             "composition_err": 0.0, "exceptional_ok": True, "cover_ok": True,
             "form_ok": True, "width_ok": True}
        for i, box in enumerate(level):
            t, v = box.interval
            ch = curve.chord(t, v)
            w = curve.bending(t, v)
            if abs(box.length - ch) > REL * ch or box.length < (R ** ((k - 2) * eps)) ** -1 * (1 - REL):
                c["I_ok"] = False
            if not _le(w, 1.0 / Rk):
                c["II_ok"] = False
            if abs(box.width - 1.0 / Rk) > REL / Rk:
                c["width_ok"] = False
            x, y = curve.point(t)
            ang = math.atan(curve.slope_right(t))
            scale = max(1.0, abs(x), abs(y))
            if abs(box.anchor[0] - x) > REL * scale or abs(box.anchor[1] - y) > REL * scale \
                    or abs(box.angle - ang) > REL:
                c["form_ok"] = False
            if k >= 1 and box.length < R ** (2 * eps) * box.width * (1 - REL):
                c["eccentric_ok"] = False
            if k >= 1:
                parent = tree.levels[k - 1][tree.parents[k][i]]
                if not (R ** -eps * parent.length * (1 - REL) <= box.length <= parent.length * (1 + REL)):
                    c["range_ok"] = False
                if not contains_box(dilate(parent, 2.0), box):
                    c["containment_ok"] = False
                sigma = tree.sigmas[k][i]
                composed = sigma.rescaling_map() @ parent.rescaling_map()
                direct = box.rescaling_map()
                pts = np.vstack([box_corners(box), box_corners(parent)])
                err = _corners_close(composed(pts), direct(pts), max(1.0, float(np.max(np.abs(direct(pts))))))
                c["composition_err"] = max(c["composition_err"], err)
        if k >= 1:
            for j, parent in enumerate(tree.levels[k - 1]):
                kids = [i for i, p in enumerate(tree.parents[k]) if p == j]
                if any(level[i].kind == "exceptional" for i in kids):
                    if len(kids) != 1 or level[kids[0]].interval != parent.interval:
                        c["exceptional_ok"] = False
                ivs = sorted(level[i].interval for i in kids)
                pt, pv = parent.interval
                reach = pt
                for t, v in ivs:
                    if t > reach + TOL * (1 + abs(reach)):
                        c["cover_ok"] = False
                    reach = max(reach, v)
                if not ivs or ivs[0][0] != pt or reach != pv:
                    c["cover_ok"] = False
        c["count_ok"] = c["count"] <= c["count_bound"] * (1 + 1e-12)
        c["composition_ok"] = c["composition_err"] <= REL
        c["invariants_ok"] = c["I_ok"] and c["II_ok"]
        keys = ("I_ok", "II_ok", "eccentric_ok", "range_ok", "count_ok", "composition_ok",
                "exceptional_ok", "cover_ok", "form_ok", "width_ok")
        c["passed"] = all(c[x] for x in keys) and (c["containment_ok"] or not containment_applicable)
        out.append(c)
    return out


# ---------------------------------------------------------------------------
# ideal partition

@dataclass
class IdealPartition:
    R: float
    eps: float
    intervals: list[tuple[float, float]]
    case_tags: list[str]
    pieces: list[CoarsePiece]
    regime_ok: bool
    details: list[dict] = field(default_factory=list)

    def __len__(self):
        return len(self.intervals)

    def rows(self, curve: ConvexCurve):
        for (t, v), tag in zip(self.intervals, self.case_tags):
            yield {"t": t, "v": v, "case_tag": tag, "j1_value": j1_value(curve, t, v), "length": v - t}


def regime_threshold(eps: float) -> float:
    """The scale ``max(2^{1/eps}, eps^{-1/eps})`` from which all bounds are guaranteed."""
    return max(2.0 ** (1.0 / eps), (1.0 / eps) ** (1.0 / eps))


def adjusted_eps(R: float, R_p: float, eps: float) -> tuple[float, int]:
    """(eps_tilde, k) with ``R_p = R**(k eps_tilde)`` and eps/2 < eps_tilde <= eps."""
    x = math.log(R_p) / (eps * math.log(R))
    k = max(1, math.ceil(x - 1e-9))
    return math.log(R_p) / (k * math.log(R)), k


def j1_value(curve: Arc, t: float, v: float) -> float:
    return (v - t) * (curve.slope_left(v) - curve.slope_right(t))


def ideal_partition(curve: ConvexCurve, R: float, eps: float) -> IdealPartition:
    """Cover ``[0, 1]`` by intervals of bending at most ``1/R`` and length at least ``1/R``.

    Pieces of the coarse partition are kept whole (short pieces), refined by
    the multi-scale algorithm with an adjusted epsilon (long pieces with
    ``R_p >= R**eps``) or by one single-scale pass at target ``1/R_p``.
    Below the scale :func:`regime_threshold` the construction still runs but
    ``regime_ok`` is False.
    """
    levels_for(eps)
    if not curve.is_normalized():
        raise NotNormalized("ideal partition needs slopes in [0, 1]")
    a, b = curve.domain
    pieces = coarse_partition(curve, R, eps)
    intervals, tags, details = [], [], []
    for piece in pieces:
        s, u = piece.interval
        if piece.cls == "P1":
            if piece.tail:
                s = max(a, u - 1.0 / R)
            intervals.append((s, u))
            tags.append("case1")
            details.append({"piece": piece.index})
            continue
        gp, sim = rescale_piece(curve, piece, R, eps)
        R_p = R / sim.ratio
        if R_p >= R ** eps:
            eps_t, k_p = adjusted_eps(R, R_p, eps)
            tree = multi_scale(gp, R, eps_t, k_p)
            boxes = tree.levels[-1]
            tag = "case2A"
            details.append({"piece": piece.index, "R_p": R_p, "eps_tilde": eps_t, "k_p": k_p,
                            "tree_passed": tree.passed})
        else:
            boxes = single_scale(gp, 1.0 / R_p)
            tag = "case2B"
            details.append({"piece": piece.index, "R_p": R_p})
        for box in boxes:
            intervals.append(box.interval)
            tags.append(tag)
    order = sorted(range(len(intervals)), key=lambda i: intervals[i])
    return IdealPartition(R, eps, [intervals[i] for i in order], [tags[i] for i in order],
                          pieces, R >= regime_threshold(eps) * (1 - 1e-12), details)


def certify_partition(curve: ConvexCurve, partition: IdealPartition, R: float, eps: float,
                      covering: int | None = None, raise_on_failure: bool = False) -> dict:
    """(J1), (J3), covering of the domain and the (J2) ratio against ``covering``."""
    a, b = curve.domain
    rep = {"count": len(partition.intervals), "j1_bound": 2.0 / R, "j3_bound": 1.0 / R,
           "j1_max": 0.0, "j3_min": math.inf, "j1_ok": True, "j3_ok": True, "cover_ok": True,
           "failures": []}
    reach = a
    for t, v in partition.intervals:
        j1 = j1_value(curve, t, v)
        rep["j1_max"] = max(rep["j1_max"], j1)
        rep["j3_min"] = min(rep["j3_min"], v - t)
        if not _le(j1, 2.0 / R):
            rep["j1_ok"] = False
            rep["failures"].append({"interval": [t, v], "check": "J1", "value": j1})
        if not _ge(v - t, 1.0 / R):
            rep["j3_ok"] = False
            rep["failures"].append({"interval": [t, v], "check": "J3", "value": v - t})
        if t > reach + TOL * (1 + abs(reach)):
            rep["cover_ok"] = False
        reach = max(reach, v)
    if reach < b - TOL:
        rep["cover_ok"] = False
    if covering is not None:
        rep["covering"] = covering
        rep["c_eps"] = rep["count"] / (R ** eps * covering)
    rep["passed"] = rep["j1_ok"] and rep["j3_ok"] and rep["cover_ok"]
    if raise_on_failure and not rep["passed"]:
        first = rep["failures"][0] if rep["failures"] else {"check": "cover"}
        raise CertificationFailure(f"partition fails {first}")
    return rep


def piece_trees(curve: ConvexCurve, R: float, eps: float, N: int | None = None):
    """Multi-scale trees of every P2 piece of the coarse partition, as ``(piece, tree)``."""
    out = []
    for piece in coarse_partition(curve, R, eps):
        if piece.cls == "P2":
            gp, _ = rescale_piece(curve, piece, R, eps)
            out.append((piece, multi_scale(gp, R, eps, N)))
    return out
