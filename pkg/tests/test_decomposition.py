import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from convdec.corpus import corpus_curve
from convdec.curves import ConvexCurve
from convdec.decomposition import (IdealPartition, admissibility_check, certify_partition,
                                   certify_single_scale, coarse_partition, ideal_partition,
                                   multi_scale, piece_trees, rescale_piece, rescaled_curve, single_scale)
from convdec.errors import (CertificationFailure, EpsilonError, NotAdmissible, NotClassP2,
                            NotNormalized)
from convdec.geometry import contains_box, dilate

PARABOLA = ConvexCurve.parabola(0.5)


def p2_pieces(curve, R, eps):
    return [p for p in coarse_partition(curve, R, eps) if p.cls == "P2"]


def first_tree(name="parabola", R=2 ** 10, eps=0.2):
    c = corpus_curve(name, R)
    gp, _ = rescale_piece(c, p2_pieces(c, R, eps)[0], R, eps)
    return multi_scale(gp, R, eps)


# -- coarse partition --------------------------------------------------------

def test_line_is_one_piece():
    pieces = coarse_partition(corpus_curve("line"), 2 ** 10, 0.2)
    assert len(pieces) == 1 and pieces[0].cls == "P2" and pieces[0].interval == (0.0, 1.0)


def test_parabola_piece_count_bound():
    R = 2 ** 20
    assert len(coarse_partition(PARABOLA, R, 0.1)) <= 48


def test_parabola_piece_endpoints_against_dense_scan():
    R, eps = 2 ** 20, 0.1
    target = R ** (-2 * eps)
    pieces = coarse_partition(PARABOLA, R, eps)
    for piece in pieces[:5]:
        s, u = piece.interval
        grid = np.linspace(s, 1.0, 10 ** 6 + 1)
        turn = (grid - s) / (1 + grid * s)
        u_scan = grid[turn <= target][-1]
        assert u == pytest.approx(u_scan, abs=2e-6)
        assert (u - s) == pytest.approx(target * (1 + u * s), rel=1e-9)


def test_coarse_partition_input_errors():
    with pytest.raises(EpsilonError):
        coarse_partition(PARABOLA, 2 ** 10, 0.3)
    with pytest.raises(NotNormalized):
        coarse_partition(ConvexCurve.parabola(1.0), 2 ** 10, 0.2)


# -- rescaling of pieces -----------------------------------------------------

def test_rescaled_piece_chord_equality():
    R, eps = 2 ** 10, 0.2
    for name in ("parabola", "cantor", "cubic", "random_pl"):
        c = corpus_curve(name, R)
        for piece in p2_pieces(c, R, eps):
            gp, _ = rescale_piece(c, piece, R, eps)
            a, b = gp.domain
            assert gp.chord(a, b) == pytest.approx(R ** (2 * eps), rel=1e-9)
            assert admissibility_check(gp, R, eps).passed


def test_zero_slope_piece_has_no_rotation():
    R, eps = 2 ** 10, 0.2
    _, sim = rescale_piece(PARABOLA, p2_pieces(PARABOLA, R, eps)[0], R, eps)
    assert sim.angle == 0.0


def test_parabola_piece_pushforward_is_parabola():
    R, eps = 2 ** 10, 0.2
    piece = p2_pieces(PARABOLA, R, eps)[0]
    gp, sim = rescale_piece(PARABOLA, piece, R, eps)
    r = sim.ratio
    for t in np.linspace(*piece.interval, 7):
        X, Y = gp.point(t)
        assert Y == pytest.approx(0.5 / r * X * X, rel=1e-12, abs=1e-15)


def test_rescale_requires_p2():
    R, eps = 2 ** 8, 0.25
    p1 = [p for p in coarse_partition(corpus_curve("cantor", R), R, eps) if p.cls == "P1"]
    if p1:
        with pytest.raises(NotClassP2):
            rescale_piece(corpus_curve("cantor", R), p1[0], R, eps)


# -- single scale ------------------------------------------------------------

def test_exceptional_when_bending_small():
    R, eps = 2 ** 10, 0.2
    gp, _ = rescale_piece(PARABOLA, p2_pieces(PARABOLA, R, eps)[0], R, eps)
    a, b = gp.domain
    boxes = single_scale(gp, gp.bending(a, b) * 1.01)
    assert len(boxes) == 1 and boxes[0].kind == "exceptional" and boxes[0].interval == (a, b)


@pytest.mark.parametrize("name", ["parabola", "cantor", "cubic", "random_pl"])
def test_single_scale_certificates(name):
    R, eps = 2 ** 12, 0.25
    c = corpus_curve(name, R)
    for piece in p2_pieces(c, R, eps):
        gp, _ = rescale_piece(c, piece, R, eps)
        boxes = single_scale(gp, R ** -eps, R, eps)
        rep = certify_single_scale(gp, boxes, R, eps)
        assert rep["passed"], rep
        assert len(boxes) <= 32 * R ** (eps / 2)
        assert all(gp.bending(*b.interval) <= R ** -eps for b in boxes)
        kinds = [b.kind for b in boxes]
        if kinds != ["exceptional"]:
            assert kinds[-1] == "right" and kinds.count("right") == 1


def test_single_scale_rejects_non_admissible():
    with pytest.raises(NotAdmissible):
        single_scale(PARABOLA, 0.1, 2 ** 10, 0.2)


# -- multi scale -------------------------------------------------------------

def test_children_inside_doubled_parent():
    tree = first_tree(R=2 ** 10, eps=0.2)
    assert 2 ** 10 >= 2 ** 5
    for k in range(1, len(tree.levels)):
        for i, box in enumerate(tree.levels[k]):
            assert contains_box(dilate(tree.levels[k - 1][tree.parents[k][i]], 2.0), box)


def test_child_length_window():
    tree = first_tree("cantor", 2 ** 12, 0.25)
    R, eps = tree.R, tree.eps
    for k in range(1, len(tree.levels)):
        for i, box in enumerate(tree.levels[k]):
            parent = tree.levels[k - 1][tree.parents[k][i]]
            assert R ** -eps * parent.length * (1 - 1e-9) <= box.length <= parent.length * (1 + 1e-9)


def test_exceptional_child_is_only_child():
    seen = 0
    # piecewise-linear flats give zero bending, so whole boxes pass through unsplit
    for _, tree in piece_trees(corpus_curve("random_pl", 2 ** 10), 2 ** 10, 0.2):
        for k in range(1, len(tree.levels)):
            for i, box in enumerate(tree.levels[k]):
                if box.kind == "exceptional":
                    seen += 1
                    p = tree.parents[k][i]
                    assert tree.children(k - 1, p) == [i]
                    assert box.interval == tree.levels[k - 1][p].interval
    assert seen > 0


def test_composition_law_parabola():
    tree = first_tree("parabola", 2 ** 10, 0.2)
    assert max(c["composition_err"] for c in tree.certificates) <= 1e-9
    assert tree.passed


def test_rescaled_curves_are_normalized_and_scaled():
    tree = first_tree("parabola", 2 ** 10, 0.2)
    for k in range(1, len(tree.levels)):
        for i, box in enumerate(tree.levels[k][:5]):
            sub = rescaled_curve(tree.curve, box)
            a, b = sub.domain
            assert abs(sub.point(a)[1]) <= 1e-12 and abs(sub.slope_right(a)) <= 1e-12
            assert sub.chord(a, b) == pytest.approx(tree.R_k(k) * tree.curve.chord(a, b), rel=1e-9)
            assert admissibility_check(sub, tree.R, tree.eps).passed


def test_level_counts_and_widths():
    tree = first_tree("cantor", 2 ** 10, 0.2)
    for k, level in enumerate(tree.levels):
        assert len(level) <= 32 ** k * tree.R ** (k * tree.eps / 2)
        for box in level[1:] if k == 0 else level:
            assert box.width == pytest.approx(tree.R_k(k) ** -1, rel=1e-9)


# -- ideal partition ---------------------------------------------------------

def test_line_partition_single_interval():
    p = ideal_partition(corpus_curve("line"), 2 ** 10, 0.2)
    assert p.intervals == [(0.0, 1.0)]


@pytest.mark.parametrize("R", [2 ** 8, 2 ** 10, 2 ** 12])
def test_parabola_partition_count_in_regime(R):
    p = ideal_partition(PARABOLA, R, 0.25)
    assert p.regime_ok
    assert R ** -0.75 <= len(p) / math.sqrt(R) <= R ** 0.75


def test_parabola_j1_within_factor_two():
    R = 2 ** 12
    p = ideal_partition(PARABOLA, R, 0.25)
    cert = certify_partition(PARABOLA, p, R, 0.25)
    assert cert["passed"]
    assert cert["j1_max"] <= 2.0 / R


def test_cantor_partition_length_spread():
    K = 4
    R = 3 ** (2 * K)
    c = ConvexCurve.cantor_staircase(1 / 3, 2 * K + 6)
    p = ideal_partition(c, R, 0.25)
    assert certify_partition(c, p, R, 0.25)["passed"]
    classes = {math.floor(-math.log(c.chord(t, v)) / math.log(3)) for t, v in p.intervals}
    assert len(classes) >= K
    assert all(1.0 / R <= c.chord(t, v) <= 1.0 for t, v in p.intervals)


def test_bad_partition_reports_j3():
    R = 2 ** 10
    bad = IdealPartition(R, 0.2, [(0.0, 0.5), (0.5, 0.5 + R ** -2), (0.5 + R ** -2, 1.0)],
                         ["case1"] * 3, [], True)
    cert = certify_partition(corpus_curve("line"), bad, R, 0.2)
    assert not cert["j3_ok"]
    assert any(f["check"] == "J3" for f in cert["failures"])
    with pytest.raises(CertificationFailure):
        certify_partition(corpus_curve("line"), bad, R, 0.2, raise_on_failure=True)


@settings(max_examples=15)
@given(st.sampled_from(["parabola", "cantor", "cubic", "random_pl"]),
       st.sampled_from([2 ** 8, 2 ** 10]), st.sampled_from([0.25, 0.2, 0.1]))
def test_partition_covers_with_j1_j3(name, R, eps):
    c = corpus_curve(name, R)
    p = ideal_partition(c, R, eps)
    cert = certify_partition(c, p, R, eps)
    assert cert["j1_ok"] and cert["j3_ok"] and cert["cover_ok"]


@settings(max_examples=10)
@given(st.sampled_from(["parabola", "cantor", "random_pl"]), st.sampled_from([0.25, 0.2]))
def test_multiscale_invariants_hold(name, eps):
    R = 2 ** 10
    c = corpus_curve(name, R)
    for piece in p2_pieces(c, R, eps)[:3]:
        gp, _ = rescale_piece(c, piece, R, eps)
        tree = multi_scale(gp, R, eps)
        for cert in tree.certificates:
            assert cert["I_ok"] and cert["II_ok"] and cert["eccentric_ok"] and cert["cover_ok"]
