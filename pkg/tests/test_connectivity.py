import itertools
from fractions import Fraction

import numpy as np

from percouple import _kernels as K
from percouple import connectivity as cn
from percouple import lattice
from percouple.configuration import BLACK, UNREVEALED, WHITE, PartialConfig
from percouple.connectivity import (
    arm_table,
    connected,
    dual_arm,
    dual_table,
    one_arm,
    white_reachable_unrevealed,
)

# frozen golden: count of one-arm configurations over the 2^18 non-origin
# states of Ball(2), computed by an independent pure-python BFS enumeration
ARM2_COUNT_NON_ORIGIN = 253135


def cfg_of(ball, black=(), white=()):
    c = PartialConfig.unrevealed(ball)
    for s in black:
        c.set_site(s, BLACK)
    for s in white:
        c.set_site(s, WHITE)
    return c


def test_connected_certain_when_equal_or_adjacent():
    b = lattice.ball(2)
    empty = PartialConfig.unrevealed(b)  # no colors at all
    S = {(0, 0)}
    assert connected(empty, S, S, BLACK)
    assert connected(empty, {(0, 0)}, {(1, 0)}, BLACK)  # adjacent sets
    assert not connected(empty, {(0, 0)}, {(2, 0)}, BLACK)  # needs a path


def test_connected_all_black():
    for n in (1, 2):
        b = lattice.ball(n)
        cfg = PartialConfig.constant(b, BLACK)
        assert connected(cfg, {(0, 0)}, set(lattice.ring_sites(n + 1)), BLACK,
                         within=set(b.sites))


def test_one_arm_ball1_enumeration():
    # {0 <-> ring 1} holds iff >= 1 of the 6 ring-1 sites is black: 63/64
    b = lattice.ball(1)
    hits = 0
    for bits in itertools.product((0, 1), repeat=6):
        cfg = PartialConfig.unrevealed(b)
        for s, v in zip(lattice.ring_sites(1), bits):
            cfg.set_site(s, BLACK if v else WHITE)
        got = one_arm(cfg, 1)
        assert got == any(bits)
        hits += got
    assert Fraction(hits, 64) == Fraction(63, 64)


def test_one_arm_ignores_origin_state():
    rng = np.random.default_rng(11)
    b = lattice.ball(2)
    for _ in range(200):
        states = rng.choice([WHITE, BLACK], size=b.n_sites).astype(np.uint8)
        cfg = PartialConfig(b, states)
        flipped = cfg.copy()
        flipped.states[b.index((0, 0))] ^= 1
        assert one_arm(cfg, 2) == one_arm(flipped, 2)


def test_one_arm_single_ray():
    b = lattice.ball(3)
    cfg = PartialConfig.constant(b, WHITE)
    for s in [(1, 0), (2, 0), (3, 0)]:
        cfg.set_site(s, BLACK)
    assert one_arm(cfg, 3)


def test_arm2_table_golden_count():
    tbl = arm_table(2)
    assert tbl.size == 1 << 19
    # origin bit is irrelevant, so the 2^19 count doubles the golden count
    assert int(tbl.sum()) == 2 * ARM2_COUNT_NON_ORIGIN


def test_dual_arm_trivial_annuli():
    b = lattice.ball(2)
    assert dual_arm(PartialConfig.constant(b, WHITE), 1, 2)
    assert not dual_arm(PartialConfig.constant(b, BLACK), 1, 2)
    assert dual_arm(PartialConfig.constant(b, BLACK), 2, 2)  # convention


def test_dual_arm_12_enumeration():
    # a single white site on ring 2 realizes the (1,2) dual arm: 1 - 2^-12
    b = lattice.ball(2)
    ring2 = lattice.ring_sites(2)
    hits = 0
    for bits in itertools.product((0, 1), repeat=12):
        cfg = PartialConfig.constant(b, BLACK)
        for s, v in zip(ring2, bits):
            if v:
                cfg.set_site(s, WHITE)
        got = dual_arm(cfg, 1, 2)
        assert got == any(bits)
        hits += got
    assert Fraction(hits, 4096) == 1 - Fraction(1, 4096)
    assert abs(float(1 - Fraction(1, 4096)) -
               __import__("percouple").exact_dual_arm_prob(1, 2)) == 0.0


def test_white_reachable_unrevealed_cases():
    m = 2
    b = lattice.ball(m)
    ring2 = lattice.ring_sites(2)
    # all unrevealed: exactly the outermost ring
    assert white_reachable_unrevealed(PartialConfig.unrevealed(b), m) == set(ring2)
    # outer ring revealed black: nothing is white-reachable
    cfg = cfg_of(b, black=ring2)
    assert white_reachable_unrevealed(cfg, m) == set()
    # one white site w on the ring: exactly the unrevealed neighbors of w
    w = ring2[0]
    cfg = cfg_of(b, black=[s for s in ring2 if s != w], white=[w])
    expect = {
        t for t in lattice.neighbors(w)
        if lattice.graph_distance(t) <= m and cfg.state_at(t) == UNREVEALED
    }
    assert white_reachable_unrevealed(cfg, m) == expect


def test_one_arm_increasing_dual_arm_decreasing():
    # monotonicity over 10^5 sitewise-ordered pairs on Ball(3), via the
    # batched mask engine (white < black)
    c = cn.ctx(3)
    nb = c.ball.n_sites
    rng = np.random.default_rng(5)
    n_pairs = 100_000
    lo = rng.integers(0, 1 << 62, size=n_pairs, dtype=np.int64)
    lo &= rng.integers(0, 1 << 62, size=n_pairs, dtype=np.int64)
    lo &= np.int64(c.full_mask)
    extra = rng.integers(0, 1 << 62, size=n_pairs, dtype=np.int64) & np.int64(c.full_mask)
    hi = lo | extra
    args_arm = (np.int64(c.ring_mask(1)), np.int64(c.ring_mask(3)),
                np.int64(c.within_mask(3)))
    arm_lo = K.mask_event_batch(nb, c.nbr_np, lo, *args_arm, False)
    arm_hi = K.mask_event_batch(nb, c.nbr_np, hi, *args_arm, False)
    assert not np.any(arm_lo & ~arm_hi)  # one-arm is increasing
    annulus = c.within_mask(3) & ~c.within_mask(1)
    args_dual = (np.int64(c.ring_mask(2) & annulus),
                 np.int64(c.ring_mask(3) & annulus), np.int64(annulus))
    dual_lo = K.mask_event_batch(nb, c.nbr_np, lo, *args_dual, True)
    dual_hi = K.mask_event_batch(nb, c.nbr_np, hi, *args_dual, True)
    assert not np.any(dual_hi & ~dual_lo)  # dual arm is decreasing


def test_mask_engine_matches_python_reference():
    # the numba bitmask engine agrees with the python-int closure engine
    rng = np.random.default_rng(17)
    b = lattice.ball(2)
    c = cn.ctx(2)
    tbl = arm_table(2)
    for _ in range(2000):
        mask = int(rng.integers(0, 1 << 19))
        cfg = PartialConfig.from_masks(b, c.full_mask, mask)
        assert bool(tbl[mask]) == one_arm(cfg, 2)
    dt = dual_table(0, 2)
    for _ in range(500):
        mask = int(rng.integers(0, 1 << 19))
        cfg = PartialConfig.from_masks(b, c.full_mask, mask)
        assert bool(dt[mask]) == dual_arm(cfg, 0, 2)


def test_color_flip_symmetry_at_half():
    # at p = 1/2 the measure is invariant under black/white exchange:
    # P(E) = P(flip(E)) for every event; enumerate a geometric pair on
    # Ball(2): the white (0,2)-crossing of the mask equals the black
    # (0,2)-crossing of the complement mask.
    c = cn.ctx(2)
    nb = c.ball.n_sites
    masks = np.arange(1 << nb, dtype=np.int64)
    annulus = c.within_mask(2) & ~c.within_mask(0)
    white_cross = K.build_event_table(
        nb, c.nbr_np, np.int64(c.ring_mask(1) & annulus),
        np.int64(c.ring_mask(2) & annulus), np.int64(annulus), True,
    )
    black_cross = K.build_event_table(
        nb, c.nbr_np, np.int64(c.ring_mask(1) & annulus),
        np.int64(c.ring_mask(2) & annulus), np.int64(annulus), False,
    )
    flipped = black_cross[np.int64(c.full_mask) ^ masks]
    assert np.array_equal(white_cross, flipped)
    # so the two events have exactly equal probability at p = 1/2
    assert int(white_cross.sum()) == int(black_cross.sum())


def test_bfs_and_unionfind_engines_agree():
    # 10^5 random queries on Ball(64): identical verdicts per replica
    rng = np.random.default_rng(23)
    total = 0
    plan = [(64, 8000), (32, 12000), (16, 20000), (8, 30000), (4, 30000)]
    for m, trials in plan:
        k = int(rng.integers(0, min(m, 4)))
        g = cn.grid_ctx(k, m)
        t53 = np.int64(K.black_threshold53(0.5))
        bfs = K.arm_trials_flags(
            g.state0, g.seeds, g.canon, g.offs, np.uint64(m), np.uint64(0),
            trials, t53, True, g.qcap,
        )
        uf = K.uf_trials_flags(
            g.state0, g.canon, g.offs, np.uint64(m), np.uint64(0),
            trials, t53, True, g.seeds, g.ring_hi,
        )
        assert np.array_equal(bfs, uf), f"engines disagree at m={m}"
        total += trials
    assert total == 100_000
