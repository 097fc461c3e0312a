"""Dyadic pigeonholing of box lengths into branches and the checks built on them.

A branch is a sequence ``lambdas[0..N-1]`` of positive reals, one per
level 1..N of a :class:`~convdec.decomposition.DecompositionTree`. A box at
level ``k`` belongs to the branch when ``lambdas[k-1] <= len <= 2 lambdas[k-1]``
(closed window) and its parent belongs to the branch too.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .decomposition import TOL, DecompositionTree, multi_scale
from .errors import BijectionFailure, SeparationViolation
from .geometry import map_box

WINDOW_SLACK = 1e-12
MATCH_REL = 1e-9


def _in_window(length: float, lam: float) -> bool:
    return lam * (1 - WINDOW_SLACK) <= length <= 2.0 * lam * (1 + WINDOW_SLACK)


def dyadic_exponents(length: float) -> list[int]:
    """Exponents ``e`` with ``2^e <= length <= 2^(e+1)``; two of them at exact powers of 2."""
    f, e = math.frexp(length)  # length = f 2^e, 1/2 <= f < 1
    return [e - 1, e - 2] if f == 0.5 else [e - 1]


@dataclass(frozen=True)
class BranchSpec:
    lambdas: tuple[float, ...]
    R: float
    eps: float

    def __post_init__(self):
        object.__setattr__(self, "lambdas", tuple(float(x) for x in self.lambdas))
        if any(not x > 0 for x in self.lambdas):
            raise ValueError("branch scales must be positive")

    @property
    def N(self) -> int:
        return len(self.lambdas)

    def lam(self, k: int) -> float:
        """Scale of level ``k`` (1-based)."""
        return self.lambdas[k - 1]

    def bounds(self) -> dict:
        """The absolute and relative scale windows a nonempty branch lives in."""
        R, eps = self.R, self.eps
        lo = 0.5 * R ** (-1 + 2 * eps)
        hi = R ** (2 * eps)
        absolute = all(lo * (1 - TOL) <= x <= hi * (1 + TOL) for x in self.lambdas)
        relative = all(b >= 0.5 * R ** -eps * a * (1 - TOL)
                       for a, b in zip(self.lambdas, self.lambdas[1:]))
        return {"absolute_ok": absolute, "relative_ok": relative, "lower": lo, "upper": hi}

    def rescaled(self, factor: float, start: int) -> BranchSpec:
        """``(factor * lambda_{start+i})_{i >= 1}``."""
        return BranchSpec(tuple(factor * x for x in self.lambdas[start:]), self.R, self.eps)

    def to_record(self) -> dict:
        return {"lambdas": list(self.lambdas), "R": self.R, "eps": self.eps}


def max_branch_count(R: float, eps: float) -> float:
    return (1.0 + math.log2(R)) ** (1.0 / eps)


def enumerate_branches(tree: DecompositionTree) -> list[BranchSpec]:
    """All dyadic branches realized by at least one root-to-leaf chain of the tree.

    Works bottom-up: each box stores the set of exponent suffixes realized
    below it, so the cost follows the number of distinct suffixes rather than
    the size of the full dyadic grid.
    """
    N = len(tree.levels) - 1
    if N < 1 or not tree.levels[1]:
        return []
    R, eps = tree.R, tree.eps
    lo_e = math.floor(math.log2(0.5 * R ** (-1 + 2 * eps)) - 1e-9)
    hi_e = math.ceil(math.log2(R ** (2 * eps)) + 1e-9)
    lo, hi = 0.5 * R ** (-1 + 2 * eps), R ** (2 * eps)
    kids = _children_table(tree)

    def cands(box):
        return [e for e in dyadic_exponents(box.length)
                if lo_e <= e <= hi_e and lo * (1 - TOL) <= 2.0 ** e <= hi * (1 + TOL)]

    suffix = [frozenset((e,) for e in cands(b)) for b in tree.levels[N]]
    for k in range(N - 1, 0, -1):
        cur = []
        for i, box in enumerate(tree.levels[k]):
            below = frozenset().union(*(suffix[j] for j in kids[k][i])) if kids[k][i] else frozenset()
            cur.append(frozenset((e,) + rest for e in cands(box) for rest in below))
        suffix = cur
    found = sorted(frozenset().union(*suffix))
    return [BranchSpec(tuple(2.0 ** e for e in exps), R, eps) for exps in found]


@dataclass
class BranchTree:
    """Branch collections ``collections[k]`` (box indices at level ``k``) of a tree."""

    base: DecompositionTree
    branch: BranchSpec
    collections: list[list[int]]
    depth: int
    _kids: list[list[list[int]]] = field(repr=False, default_factory=list)

    @property
    def N(self) -> int:
        return self.depth

    def boxes(self, k: int):
        return [self.base.levels[k][i] for i in self.collections[k]]

    def in_branch(self, k: int, i: int) -> bool:
        return k == 0 or _in_window(self.base.levels[k][i].length, self.branch.lam(k))

    def branch_children(self, k: int, i: int) -> list[int]:
        if k >= self.N:
            return []
        return [j for j in self._kids[k][i] if self.in_branch(k + 1, j)]

    def descendants(self, k: int, i: int, j: int) -> list[int]:
        """Indices of the collection at level ``k + j`` below box ``(k, i)``."""
        cur = [i]
        for step in range(j):
            cur = [c for b in cur for c in self.branch_children(k + step, b)]
        return cur

    def representation_identity(self, k: int, i: int, l: int, j: int) -> bool:
        """Collection ``k+j`` below ``(k, i)`` equals the union over the collection at ``k+l``."""
        direct = set(self.descendants(k, i, j))
        via = set()
        for mid in self.descendants(k, i, l):
            via.update(self.descendants(k + l, mid, j - l))
        return direct == via

    def precedes(self, m: int, jm: int, k: int, ik: int) -> bool:
        """Whether box ``(m, jm)`` lies below ``(k, ik)`` through branch boxes only."""
        if m <= k:
            return False
        j = jm
        for level in range(m, k, -1):
            if not self.in_branch(level, j):
                return False
            j = self.base.parents[level][j]
        return j == ik and self.in_branch(k, ik)

    def exceptional_chains(self) -> dict:
        """Follow every maximal run of exceptional children and check it collapses.

        Along such a run from ``(m, i)`` down to level ``k`` the collection
        below ``(m, i)`` must be a single box with the same interval.
        """
        checked, ok = 0, True
        for m in range(self.N):
            for i in self.collections[m]:
                j, k = i, m
                while k < self.N:
                    kids = self._kids[k][j]
                    if len(kids) == 1 and self.base.levels[k + 1][kids[0]].kind == "exceptional":
                        j, k = kids[0], k + 1
                    else:
                        break
                if k == m:
                    continue
                if not all(self.in_branch(lv, jj) for lv, jj in self._chain(k, j, m)):
                    continue
                checked += 1
                desc = self.descendants(m, i, k - m)
                if desc != [j] or self.base.levels[k][j].interval != self.base.levels[m][i].interval:
                    ok = False
        return {"chains": checked, "passed": ok}

    def _chain(self, k, j, m):
        out = []
        while k > m:
            out.append((k, j))
            j = self.base.parents[k][j]
            k -= 1
        return out

    def counts(self) -> list[int]:
        return [len(c) for c in self.collections]

    def window_ok(self) -> bool:
        return all(_in_window(self.base.levels[k][i].length, self.branch.lam(k))
                   for k in range(1, self.N + 1) for i in self.collections[k])

    def to_record(self) -> dict:
        return {"lambdas": list(self.branch.lambdas), "counts": self.counts()}


def _children_table(tree: DecompositionTree):
    kids = [[[] for _ in level] for level in tree.levels]
    for k in range(1, len(tree.levels)):
        for i, p in enumerate(tree.parents[k]):
            kids[k - 1][p].append(i)
    return kids


def branch_collections(tree: DecompositionTree, branch: BranchSpec) -> BranchTree:
    """Materialize the branch collections level by level from the root."""
    N = min(branch.N, len(tree.levels) - 1)
    bt = BranchTree(tree, branch, [[0]], N, _children_table(tree))
    for k in range(N):
        bt.collections.append([c for i in bt.collections[k] for c in bt.branch_children(k, i)])
    return bt


def direction_separation_check(bt: BranchTree, k: int, strict: bool = True) -> dict:
    """Slope gap around every branch box of level ``k``.

    For a middle box ``[t2, v2]`` the gap ``m_L(t4) - m_R(t1)`` is taken
    between the nearest branch box starting before ``t2`` and the first one
    starting after ``v2``, and compared with ``1 / (2 lambda_k R_k)``. Boxes of
    neighbouring families can overlap (a right box reaches back over the
    left box before it), so four boxes consecutive by start need not be
    separated; their minimum ratio is reported as ``consecutive_min_ratio``.
    """
    boxes = sorted(bt.boxes(k), key=lambda b: b.interval)
    rep = {"level": k, "boxes": len(boxes), "windows": 0, "min_ratio": math.inf,
           "consecutive_min_ratio": math.inf, "vacuous": len(boxes) < 4, "passed": True}
    if rep["vacuous"]:
        return rep
    curve = bt.base.curve
    rhs = 1.0 / (2.0 * bt.branch.lam(k) * bt.base.R_k(k))
    starts = [b.interval[0] for b in boxes]
    right = [curve.slope_right(t) for t in starts]
    left = [curve.slope_left(t) for t in starts]
    for a in range(len(boxes) - 3):
        rep["consecutive_min_ratio"] = min(rep["consecutive_min_ratio"],
                                           (left[a + 3] - right[a]) / rhs)
    for j in range(1, len(boxes)):
        t2, v2 = boxes[j].interval
        before = [i for i in range(j) if starts[i] < t2]
        after = [i for i in range(j + 1, len(boxes)) if starts[i] > v2]
        if not before or not after:
            continue
        i1, i4 = before[-1], after[0]
        rep["min_ratio"] = min(rep["min_ratio"], (left[i4] - right[i1]) / rhs)
        rep["windows"] += 1
    rep["passed"] = rep["min_ratio"] >= 1.0
    if strict and not rep["passed"]:
        raise SeparationViolation(f"level {k}: slope gap ratio {rep['min_ratio']:.6g} < 1")
    return rep


def _corner_err(p, q) -> float:
    scale = max(1.0, float(np.max(np.abs(q))))
    return float(np.max(np.abs(p - q))) / scale


def rescaling_bijection_check(tree: DecompositionTree, k: int, i: int, branch: BranchSpec,
                              strict: bool = True, cache: dict | None = None) -> dict:
    """Compare the branch boxes below ``(k, i)`` with an independent decomposition.

    The box's rescaled curve is decomposed again to depth ``N - k`` and the
    branch rescaled by ``R_k``; the rescaling map of the box must carry the
    collection at level ``k + j`` onto the new tree's collection at level
    ``j`` for every ``j``. ``cache`` keeps the re-decomposed trees by box so
    several branches can share them.
    """
    bt = branch_collections(tree, branch)
    box = tree.levels[k][i]
    depth = len(tree.levels) - 1 - k
    if cache is not None and (k, i) in cache:
        sub_tree = cache[(k, i)]
    else:
        sub_tree = multi_scale(tree.box_curve(k, i), tree.R, tree.eps, depth, certify=False)
        if cache is not None:
            cache[(k, i)] = sub_tree
    sub_branch = branch.rescaled(tree.R_k(k), k)
    sub_bt = branch_collections(sub_tree, sub_branch)
    L = box.rescaling_map()
    rep = {"level": k, "index": i, "depth": depth, "levels": [], "max_err": 0.0, "passed": True}
    for j in range(depth + 1):
        mine = sorted((map_box(L, tree.levels[k + j][b]) for b in bt.descendants(k, i, j)),
                      key=lambda b: b.interval)
        theirs = sorted(sub_bt.boxes(j) if j < len(sub_bt.collections) else [],
                        key=lambda b: b.interval)
        err = 0.0
        ok = len(mine) == len(theirs)
        if ok:
            for p, q in zip(mine, theirs):
                e = _corner_err(p.corners(), q.corners())
                err = max(err, e)
                if e > MATCH_REL:
                    ok = False
                    if strict:
                        raise BijectionFailure(
                            f"level {k + j} box {p.interval} maps to {p.corners().tolist()}, "
                            f"expected {q.corners().tolist()}")
        elif strict:
            raise BijectionFailure(f"level {k + j}: {len(mine)} boxes map onto {len(theirs)}")
        rep["levels"].append({"j": j, "count": len(mine), "image_count": len(theirs),
                              "max_err": err, "passed": ok})
        rep["max_err"] = max(rep["max_err"], err)
        rep["passed"] = rep["passed"] and ok
    return rep


def branch_report(tree: DecompositionTree, full_bijection: bool = False) -> dict:
    """Enumerate branches and run the per-branch checks; the JSON branch dump."""
    branches = enumerate_branches(tree)
    out = {"R": tree.R, "eps": tree.eps, "N": len(tree.levels) - 1, "count": len(branches),
           "count_bound": max_branch_count(tree.R, tree.eps), "branches": []}
    cache: dict = {}
    for br in branches:
        bt = branch_collections(tree, br)
        rec = bt.to_record()
        rec.update(br.bounds())
        rec["window_ok"] = bt.window_ok()
        seps = [direction_separation_check(bt, k, strict=False) for k in range(1, bt.N + 1)]
        live = [s["min_ratio"] for s in seps if s["windows"]]
        rec["separation_min_ratio"] = min(live) if live else None
        rec["separation_ok"] = all(s["passed"] for s in seps)
        rec["exceptional"] = bt.exceptional_chains()
        if full_bijection:
            errs = [rescaling_bijection_check(tree, k, i, br, strict=False, cache=cache)
                    for k in range(bt.N + 1) for i in bt.collections[k]]
            rec["bijection_ok"] = all(e["passed"] for e in errs)
            rec["bijection_max_err"] = max((e["max_err"] for e in errs), default=0.0)
        out["branches"].append(rec)
    out["count_ok"] = out["count"] <= out["count_bound"]
    return out
