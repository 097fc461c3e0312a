import math

import numpy as np
import pytest
import scipy.fft as sfft
from hypothesis import given, settings
from hypothesis import strategies as st

from convdec import fieldlab as fl
from convdec.branches import branch_collections, enumerate_branches
from convdec.corpus import corpus_curve
from convdec.decomposition import ideal_partition, piece_trees
from convdec.errors import (BadExponent, GridTooLarge, IndexMismatch, MisalignedPartition,
                            PartsDontSum, SupportViolation)
from convdec.fieldlab import GridField
from convdec.geometry import CanonicalBox
from convdec.suites import random_orthogonality_config

from oracles import lattice_sumset_overlap

PARABOLA = corpus_curve("parabola", 64)


def random_field(rng, M, L, n, spread=8):
    sup = rng.integers(-spread, spread + 1, size=(n, 2))
    sup = np.unique(sup, axis=0)
    c = rng.standard_normal(len(sup)) + 1j * rng.standard_normal(len(sup))
    return GridField.sparse(M, L, sup, c)


def box_modes(box, M, L):
    fx = sfft.fftfreq(M, d=L / M)
    X, Y = np.meshgrid(fx, fx, indexing="ij")
    idx = np.argwhere(box.contains(np.stack([X, Y], -1), 0))
    return np.where(idx > M // 2, idx - M, idx)


# -- fields and norms ---------------------------------------------------------

def test_constant_field_l2_is_side():
    f = GridField.sparse(32, 8.0, [[0, 0]], [1.0])
    assert fl.lp_norm(f, 2) == pytest.approx(8.0, rel=1e-12)
    assert fl.lp_norm(f, 2, exact=False) == pytest.approx(8.0, rel=1e-12)


@pytest.mark.parametrize("p", [1, 2, 3, 4, 6, math.inf])
def test_single_mode_norm(p):
    L = 16.0
    f = GridField.sparse(64, L, [[3, -5]], [np.exp(0.7j)])
    expect = 1.0 if p == math.inf else L ** (2 / p)
    assert fl.lp_norm(f, p) == pytest.approx(expect, rel=1e-10)


def test_l6_norm_stable_under_refinement():
    rng = np.random.default_rng(3)
    f = random_field(rng, 64, 16.0, 8, spread=5)
    coarse = fl.lp_norm(f, 6, exact=False)
    fine = fl.lp_norm(f.resampled(256), 6, exact=False)
    reduced = fl.lp_norm(f, 6)
    assert coarse == pytest.approx(fine, rel=1e-8)
    assert reduced == pytest.approx(fine, rel=1e-8)


def test_bad_exponent():
    f = GridField.sparse(8, 1.0, [[0, 0]], [1.0])
    for p in (0.5, -1, float("nan"), "x"):
        with pytest.raises(BadExponent):
            fl.lp_norm(f, p)


def test_parseval_on_parabola():
    f, _ = fl.synth_wavepackets(PARABOLA, ideal_partition(PARABOLA, 64, 0.25), 64, seed=0)
    assert fl.parseval_gap(f) <= 1e-9
    assert f.support_matches()


def test_support_matches_detects_undeclared_mode():
    f = GridField.sparse(32, 8.0, [[1, 2], [3, 4]], [1.0, 1.0j])
    assert f.support_matches()
    lying = GridField.from_samples(f.samples, 8.0, [[1, 2]])
    assert not lying.support_matches()


# -- synthesis ----------------------------------------------------------------

def test_single_interval_gives_ratio_one():
    f, parts = fl.synth_wavepackets(PARABOLA, [(0.0, 1.0)], 64, seed=2)
    assert len(parts) == 1
    for p in (2, 4, 6):
        assert fl.decoupling_ratio(f, parts, p) == pytest.approx(1.0, abs=1e-12)


def test_modes_follow_the_curve():
    R = 64
    f, parts = fl.synth_wavepackets(PARABOLA, [(0.0, 0.5), (0.5, 1.0)], R, seed=0, coeff_model="gaussian")
    assert len(f.coeffs) == R + 1
    for j, row in f.support:
        assert row == round(R * PARABOLA.value(j / R))
    assert sum(len(p.coeffs) for p in parts) == R + 1
    assert f.M == 16 * R and f.L == R


def test_seed_determinism():
    a, _ = fl.synth_wavepackets(PARABOLA, [(0.0, 1.0)], 64, seed=5)
    b, _ = fl.synth_wavepackets(PARABOLA, [(0.0, 1.0)], 64, seed=5)
    c, _ = fl.synth_wavepackets(PARABOLA, [(0.0, 1.0)], 64, seed=6)
    assert np.array_equal(a.coeffs, b.coeffs) and not np.array_equal(a.coeffs, c.coeffs)
    assert np.allclose(np.abs(a.coeffs), 1.0)


def test_one_mode_field_equals_its_part():
    f = GridField.sparse(128, 8.0, [[2, 1]], [1.0])
    assert fl.lp_norm(f, 6) == fl.lp_norm(fl.add_fields([f]), 6)
    assert fl.decoupling_ratio(f, [f], 6) == pytest.approx(1.0, abs=1e-14)


def test_synthesis_errors():
    with pytest.raises(MisalignedPartition):
        fl.synth_wavepackets(PARABOLA, [(0.0, 1.0)], 48)
    with pytest.raises(MisalignedPartition):
        fl.synth_wavepackets(PARABOLA, [(0.0, 1.5)], 64)
    with pytest.raises(MisalignedPartition):
        fl.synth_wavepackets(PARABOLA, [(0.0, 0.4), (0.6, 1.0)], 64)
    with pytest.raises(GridTooLarge):
        fl.synth_wavepackets(PARABOLA, [(0.0, 1.0)], 64, grid_budget=1 << 20)


# -- decoupling ratio ---------------------------------------------------------

@pytest.mark.parametrize("seed", range(5))
def test_l2_ratio_is_one_for_disjoint_parts(seed):
    f, parts = fl.synth_wavepackets(PARABOLA, ideal_partition(PARABOLA, 64, 0.25), 64, seed)
    assert abs(fl.decoupling_ratio(f, parts, 2) - 1.0) <= 1e-9


def test_parts_must_sum():
    f, parts = fl.synth_wavepackets(PARABOLA, [(0.0, 0.5), (0.5, 1.0)], 64, seed=0)
    with pytest.raises(PartsDontSum):
        fl.decoupling_ratio(f, parts[:1], 6)


def test_overlapping_parts_rejected():
    a = GridField.sparse(32, 8.0, [[1, 1]], [1.0])
    half = GridField.sparse(32, 8.0, [[1, 1]], [0.5])
    with pytest.raises(SupportViolation):
        fl.decoupling_ratio(a, [half, half], 4)


def test_l6_ratio_at_least_one_over_sqrt_parts():
    f, parts = fl.synth_wavepackets(PARABOLA, ideal_partition(PARABOLA, 64, 0.25), 64, seed=1)
    r = fl.decoupling_ratio(f, parts, 6)
    assert 1.0 / math.sqrt(len(parts)) <= r <= math.sqrt(len(parts))


def test_square_function_ratio_finite():
    f, parts = fl.synth_wavepackets(PARABOLA, ideal_partition(PARABOLA, 64, 0.25), 64, seed=0)
    r = fl.square_function_ratio(f, parts)
    assert 0.5 < r < 3.0


# -- Bernstein ----------------------------------------------------------------

def test_bernstein_single_mode_closed_form():
    L = 16.0
    box = CanonicalBox((0, 1), (0.0, 0.0), 0.0, 1.0, 0.5)
    f = GridField.sparse(64, L, [[4, 2]], [1.0])
    for p, q in ((2, 4), (2, 6), (4, 6)):
        c = fl.bernstein_check(f, box, p, q)
        assert c == pytest.approx(L ** (2 / q - 2 / p) / box.area ** (1 / p - 1 / q), rel=1e-10)
    assert fl.bernstein_check(f, box, 4, 4) == pytest.approx(1.0, abs=1e-14)


def test_bernstein_random_packets_in_thin_box():
    rng = np.random.default_rng(0)
    L, M = 4096.0, 1024
    box = CanonicalBox((0, 1), (0.1, 0.05), 0.0, 2 ** -5, 2 ** -11)
    modes = box_modes(box, M, L)
    for _ in range(5):
        pick = modes[rng.choice(len(modes), 16, replace=False)]
        f = GridField.sparse(M, L, pick, rng.standard_normal(16) + 1j * rng.standard_normal(16))
        for p, q in ((2, 4), (2, 6), (4, 6)):
            assert fl.bernstein_check(f, box, p, q) <= 10.0


def test_bernstein_support_violation():
    box = CanonicalBox((0, 1), (0.0, 0.0), 0.0, 1.0, 0.5)
    f = GridField.sparse(64, 16.0, [[100, 0]], [1.0])
    with pytest.raises(SupportViolation):
        fl.bernstein_check(f, box, 2, 4)
    with pytest.raises(BadExponent):
        fl.bernstein_check(GridField.sparse(64, 16.0, [[1, 0]], [1.0]), box, 4, 2)


# -- local orthogonality ------------------------------------------------------

def test_disjoint_sumsets_give_overlap_one():
    M = 32
    a = GridField.sparse(M, M, [[0, 0]], [1.0])
    b = GridField.sparse(M, M, [[10, 3]], [2.0j])
    W = GridField.sparse(M, M, [[0, 0], [1, 0]], [1.0, 0.5])
    rep = fl.local_orthogonality_check([a, b], W)
    assert rep["L"] == 1
    assert rep["lhs"] <= rep["rhs"] * (1 + 1e-12)


def test_identical_supports_overlap_n():
    M, n = 32, 5
    parts = [GridField.sparse(M, M, [[2, 2]], [1.0]) for _ in range(n)]
    W = GridField.sparse(M, M, [[0, 0]], [1.0])
    rep = fl.local_orthogonality_check(parts, W)
    assert rep["L"] == n
    # all parts equal: |sum h|^2 = n^2 |h|^2 = L * sum |h|^2
    assert rep["lhs"] == pytest.approx(rep["rhs"], rel=1e-12)


def test_overlap_matches_set_oracle():
    rng = np.random.Generator(np.random.Philox(11))
    for _ in range(10):
        parts, W = random_orthogonality_config(rng, 32)
        rep = fl.local_orthogonality_check(parts, W)
        brute = lattice_sumset_overlap([[tuple(x) for x in p.support] for p in parts],
                                       [tuple(x) for x in W.support], 32)
        assert rep["L"] == brute


def test_local_orthogonality_random_128():
    rng = np.random.Generator(np.random.Philox(0))
    for _ in range(20):
        parts, W = random_orthogonality_config(rng, 128)
        assert fl.local_orthogonality_check(parts, W)["constant"] <= 4.0


def test_local_orthogonality_requires_origin_and_exact_support():
    M = 16
    h = GridField.sparse(M, M, [[1, 1]], [1.0])
    with pytest.raises(SupportViolation):
        fl.local_orthogonality_check([h], GridField.sparse(M, M, [[1, 0]], [1.0]))
    lying = GridField.from_samples(GridField.sparse(M, M, [[1, 1], [2, 2]], [1, 1]).samples, M, [[1, 1]])
    with pytest.raises(SupportViolation):
        fl.local_orthogonality_check([lying], GridField.sparse(M, M, [[0, 0]], [1.0]))


# -- broad / narrow -----------------------------------------------------------

def test_broad_narrow_single_child():
    v = np.zeros(6, complex)
    v[2] = 3 - 4j
    rep = fl.broad_narrow_check(v, 4)
    assert rep["lhs"] == pytest.approx(5.0) and rep["narrow"] == pytest.approx(20.0) and rep["broad"] == 0


def test_broad_narrow_equal_moduli():
    n, K, m = 8, 4, 1.7
    v = m * np.exp(1j * np.arange(n) * 0.0)
    rep = fl.broad_narrow_check(v, K)
    pairs = fl.nonadjacent_pairs(n, K)
    assert rep["lhs"] == pytest.approx(n * m)
    assert rep["narrow"] == pytest.approx(K * n ** (1 / 6) * m)
    assert rep["broad"] == pytest.approx(len(pairs) * m)
    assert rep["passed"]


def test_nonadjacent_pairs_gap():
    assert fl.nonadjacent_pairs(4, 4) == [(0, 2), (0, 3), (1, 3), (2, 0), (3, 0), (3, 1)]
    assert all(abs(i - j) > 2 for i, j in fl.nonadjacent_pairs(10, 8))
    with pytest.raises(ValueError):
        fl.broad_narrow_check([1.0], 3)


@settings(max_examples=200)
@given(st.lists(st.complex_numbers(max_magnitude=1e6, allow_nan=False, allow_infinity=False),
                min_size=1, max_size=24),
       st.sampled_from([4, 8, 16]))
def test_broad_narrow_never_violated(values, K):
    assert fl.broad_narrow_check(values, K)["passed"]


# -- mollifiers ---------------------------------------------------------------

def parabola_branch(R=2 ** 10, eps=0.2):
    _, tree = piece_trees(corpus_curve("parabola", R), R, eps)[0]
    return branch_collections(tree, enumerate_branches(tree)[0])


BT = parabola_branch()


def test_eta_plateau_and_support_on_lattice():
    ms = fl.build_mollifiers(BT, 2, BT.base.R, BT.base.eps, M=1024, L=32.0)
    XI, ETA = fl.frequency_grid(ms.M, ms.L)
    rad = np.hypot(XI, ETA)
    for j, hat in ms.eta_hat.items():
        lam = ms.lambdas[j - 1]
        assert hat[0, 0] == 1.0
        assert np.all(hat[rad <= lam] == 1.0)
        assert (rad > 2 * lam).any() and np.all(hat[rad >= 2 * lam] == 0.0)
        assert ms.norms[("eta", j)] <= 10.0


def test_eta_profile_monotone():
    r = np.linspace(0, 3, 301)
    prof = fl.eta_hat_profile(r)
    assert np.all(np.diff(prof) <= 0)
    assert np.all(prof[r <= 1] == 1) and np.all(prof[r >= 2] == 0)


def test_rho_plateau_on_scaled_box():
    R, eps = BT.base.R, BT.base.eps
    for k in (1, 2):
        ms = fl.build_mollifiers(BT, k, R, eps, M=512, L=64.0)
        XI, ETA = fl.frequency_grid(ms.M, ms.L)
        s = R ** ms.delta * 32.0 ** (BT.N - k)
        for i, hat in ms.rho_hat.items():
            box = BT.base.levels[k][i]
            (tx, ty), (nx, ny) = box.frame
            u, v = XI * tx + ETA * ty, XI * nx + ETA * ny
            inside = (np.abs(u) <= s * box.length / 2) & (np.abs(v) <= s * box.width)
            assert inside.sum() >= 1
            assert np.all(hat[inside] == 1.0)


def test_omega_l1_within_induction_bound():
    R, eps = BT.base.R, BT.base.eps
    for k in (1, 2, 3):
        ms = fl.build_mollifiers(BT, k, R, eps, M=256, L=64.0)
        rep = fl.omega_bound_check(ms)
        assert rep["passed"]
        for i in ms.omega:
            assert ms.norms[("omega", i)] >= ms.norms[("w", i)] * (1 - 1e-12)
            assert np.all(ms.omega[i] >= ms.w[i] - 1e-15)


def test_local_sup_against_direct_scan():
    rng = np.random.default_rng(4)
    a = rng.random((32, 32))
    rect = type(fl.polar_dual(fl.centered(CanonicalBox((0, 1), (0, 0), 0.0, 4.0, 2.0))))(2.0, 1.0, 0.0)
    out = fl.local_sup(a, rect, 32.0)
    i, j = 10, 20
    direct = max(a[(i + dx) % 32, (j + dy) % 32] for dx in range(-2, 3) for dy in range(-1, 2))
    assert out[i, j] == direct


# -- square function and high/low ---------------------------------------------

def dirac_set(M, L, keys):
    ms = fl.MollifierSet(1, M, L, 64.0, 0.25, 0.25 ** 10, (1.0,))
    for key in keys:
        d = np.zeros((M, M))
        d[0, 0] = (M / L) ** 2
        ms.omega[key] = d
    return ms


def test_square_function_dirac_is_modulus_squared():
    rng = np.random.default_rng(0)
    f = random_field(rng, 64, 16.0, 6)
    g = fl.square_function({0: f}, dirac_set(64, 16.0, [0]))
    assert np.allclose(g, np.abs(f.samples) ** 2, atol=1e-10)


def test_square_function_zero_and_mismatch():
    zero = GridField.from_samples(np.zeros((32, 32)), 8.0)
    assert np.all(fl.square_function({3: zero}, dirac_set(32, 8.0, [3])) == 0)
    with pytest.raises(IndexMismatch):
        fl.square_function({1: zero}, dirac_set(32, 8.0, [3]))


def test_square_function_fubini():
    R, eps = BT.base.R, BT.base.eps
    ms = fl.build_mollifiers(BT, 2, R, eps, M=128, L=32.0)
    rng = np.random.default_rng(1)
    fields = {i: random_field(rng, 128, 32.0, 10) for i in ms.omega}
    g = fl.square_function(fields, ms)
    h2 = (ms.L / ms.M) ** 2
    lhs = float(np.sum(g)) * h2
    rhs = sum(fl.lp_norm(f, 2) ** 2 * ms.norms[("omega", i)] for i, f in fields.items())
    assert lhs == pytest.approx(rhs, rel=1e-8)
    assert g.min() >= -1e-9 * g.max()


def test_hilo_plateau_and_support():
    M, L = 128, 16.0
    XI, ETA = fl.frequency_grid(M, L)
    hat = fl.eta_hat_profile(np.hypot(XI, ETA) / 1.0)
    low = GridField.sparse(M, L, [[0, 0], [5, -8], [-3, 2]], [2.0, 1 + 1j, 0.5]).samples
    g_lo, g_hi = fl.hilo_split(low, hat)
    assert np.max(np.abs(g_hi)) <= 1e-10 * np.max(np.abs(low))
    high = GridField.sparse(M, L, [[40, 0]], [1.0]).samples
    g_lo, g_hi = fl.hilo_split(high, hat)
    assert np.max(np.abs(g_lo)) <= 1e-10


def test_hilo_pointwise_triangle_and_high_ratio():
    R, eps = BT.base.R, BT.base.eps
    ms = fl.build_mollifiers(BT, 1, R, eps, M=128, L=32.0)
    rng = np.random.default_rng(2)
    fields = {i: random_field(rng, 128, 32.0, 10) for i in ms.omega}
    g = fl.square_function(fields, ms)
    g_lo, g_hi = fl.hilo_split(g, ms.eta_hat[2])
    assert np.all(g <= np.abs(g_hi) + np.abs(g_lo) + 1e-12 * np.abs(g).max())
    assert np.isfinite(fl.high_ratio(g_hi, fields, R, eps, 32.0))


# -- wave packets ---------------------------------------------------------------

TILE_BOX = CanonicalBox((0.0, 1.0), (0.0, 0.0), 0.4, 2.0, 0.25)


def test_tiles_congruent_to_dual():
    tl = fl.wavepacket_tiling(TILE_BOX, 128, 32.0)
    assert tl.sides == pytest.approx((4.0 / TILE_BOX.length, 2.0 / TILE_BOX.width))


def test_partition_of_unity_random_points():
    tl = fl.wavepacket_tiling(TILE_BOX, 256, 32.0)
    rng = np.random.default_rng(0)
    pts = rng.integers(0, 256, size=(10 ** 4, 2))
    s = tl.sum()[pts[:, 0], pts[:, 1]]
    assert np.max(np.abs(s - 1.0)) <= 1e-10
    assert np.all(tl.weights >= 0)
    assert 1 <= tl.active_count().min() and tl.active_count().max() <= 9


def test_bump_vanishes_outside_double_tile():
    tl = fl.wavepacket_tiling(TILE_BOX, 128, 32.0)
    h = 32.0 / 128
    x = np.arange(128) * h
    X, Y = np.meshgrid(x, x, indexing="ij")
    u, v = tl.local(X, Y)
    for s in range(4):
        n = tl.tiles[tl.ids[s]]
        outside = (np.abs(u - n[..., 0]) >= 1.0) | (np.abs(v - n[..., 1]) >= 1.0)
        assert np.all(tl.weights[s][outside] == 0.0)


def test_zeta_bump_shape():
    s = np.linspace(-1.5, 1.5, 601)
    z = fl.zeta_1d(s)
    assert np.all(z[np.abs(s) <= 0.5] == 1.0) and np.all(z[np.abs(s) >= 1.0] == 0.0)


def packet_field(seed, M=256, L=64.0, box=None):
    box = box or CanonicalBox((0, 1), (0.5, 0.3), 0.3, 1.0, 0.25, 1, "left")
    idx = box_modes(box, M, L)
    rng = np.random.default_rng(seed)
    return box, GridField.sparse(M, L, idx, rng.standard_normal(len(idx)) + 1j * rng.standard_normal(len(idx)))


def test_prune_extremes():
    box, f = packet_field(0)
    tl = fl.wavepacket_tiling(box, f.M, f.L)
    top = float(np.abs(f.samples).max())
    out, good = fl.prune(f, tl, top * 1.01)
    assert good.all() and np.allclose(out.samples, f.samples, atol=1e-12 * top)
    out, good = fl.prune(f, tl, 1e-300)
    assert not good.any() and np.all(out.samples == 0)


@settings(max_examples=20)
@given(st.integers(0, 10 ** 6), st.floats(0.05, 1.5))
def test_prune_properties_random(seed, frac):
    box, f = packet_field(seed, M=128, L=32.0)
    tl = fl.wavepacket_tiling(box, f.M, f.L)
    G = frac * float(np.abs(f.samples).max())
    out, good = fl.prune(f, tl, G)
    props = fl.prune_properties(f, out, tl, good, G)
    assert props == {"dominated": True, "sup_bound": True, "supported": True}


def test_essential_support_at_derived_threshold():
    R, eps = 64, 0.25
    delta = eps ** 10
    for seed in range(3):
        box, f = packet_field(seed)
        a = np.abs(f.samples)
        G = fl.pruning_threshold(R, eps, alpha=float(a.max()), beta=float(np.sqrt(np.mean(a ** 2))))
        out, _ = fl.prune(f, fl.wavepacket_tiling(box, f.M, f.L), G)
        assert fl.energy_outside(out, box, 2 * R ** delta) < 1e-4


def test_pruning_threshold_formula():
    assert fl.a_eps(4, 0.25, 1.0) == pytest.approx(20 * 16 / 0.25 * 2 ** 4)
    assert fl.pruning_threshold(64, 0.25, 2.0, 1.0) == pytest.approx(fl.a_eps(4, 0.25, 1.0) * 64 ** 1.25 / 2)
    with pytest.raises(ValueError):
        fl.pruning_threshold(64, 0.25, 0.0, 1.0)


# -- export ---------------------------------------------------------------------

def test_raw_export_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    f = random_field(rng, 32, 8.0, 5)
    path = tmp_path / "f.raw"
    header = fl.export_raw(f, path)
    assert header["M"] == 32 and header["layout"] == "row-major"
    with open(path, "rb") as fh:
        first = fh.readline()
        body = fh.read()
    assert len(body) == 32 * 32 * 8
    g = fl.read_raw(path)
    assert np.allclose(g.samples, f.samples, atol=1e-6 * np.abs(f.samples).max())
    assert np.frombuffer(body, "<c8")[1] == np.complex64(f.samples[0, 1])


# -- invariants on random fields ----------------------------------------------------

@settings(max_examples=25)
@given(st.integers(0, 10 ** 6), st.integers(1, 12))
def test_parseval_random(seed, n):
    f = random_field(np.random.default_rng(seed), 32, 8.0, n, spread=6)
    assert fl.parseval_gap(f) <= 1e-9


@settings(max_examples=25)
@given(st.integers(0, 10 ** 6), st.integers(2, 6))
def test_plancherel_random_parts(seed, n):
    rng = np.random.default_rng(seed)
    f = random_field(rng, 32, 8.0, 20, spread=6)
    cut = np.sort(rng.choice(np.arange(1, len(f.coeffs)), size=min(n, len(f.coeffs)) - 1, replace=False))
    parts = [GridField.sparse(32, 8.0, s, c) for s, c in zip(np.split(f.support, cut), np.split(f.coeffs, cut))]
    assert abs(fl.decoupling_ratio(f, parts, 2) - 1.0) <= 1e-9
