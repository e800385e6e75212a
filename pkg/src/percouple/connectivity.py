"""Connection events: black arms, white (dual) arms, frontier computation.

Reference engine: breadth-first closure on python-int bitmasks over a
ball's canonical site order (arbitrary ball sizes). Fast engines for
Monte-Carlo estimation live in ``_kernels`` and run on a padded axial grid
with lazily revealed colors; a union-find sweep over the same grid is kept
as an interchangeable second engine for cross-checks.

Conventions, fixed once: a path is a sequence of same-colored sites
(Unrevealed never counts as colored), its first site lies in the boundary
of the source set, its last site is adjacent to the target set, and an
event whose source and target intersect or touch is certain. A path "to
the boundary ring at distance n" therefore ends at a site of ring n; the
ring n+1 sites themselves are never colored.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels as K
from . import lattice
from .configuration import BLACK

# ---------------------------------------------------------------------------
# python-int mask engine over a ball's canonical indexing
# ---------------------------------------------------------------------------


class BallCtx:
    """Per-ball mask tables: neighbor masks, rings, kernel-ready arrays."""

    def __init__(self, radius):
        b = lattice.ball(radius)
        self.ball = b
        self.full_mask = (1 << b.n_sites) - 1
        nbr = []
        for i in range(b.n_sites):
            m = 0
            for j in range(6):
                k = int(b.neighbor_idx[i, j])
                if k >= 0:
                    m |= 1 << k
            nbr.append(m)
        self.nbr_int = tuple(nbr)
        self.nbr_np = (
            np.array(nbr, dtype=np.int64) if b.n_sites <= 63 else None
        )

    @lru_cache(maxsize=None)
    def ring_mask(self, d):
        m = 0
        for i in self.ball.ring_indices(d):
            m |= 1 << int(i)
        return m

    @lru_cache(maxsize=None)
    def within_mask(self, d):
        m = 0
        for i in self.ball.indices_within(d):
            m |= 1 << int(i)
        return m

    def sites_mask(self, sites):
        """Mask of the given sites, silently dropping ones off the ball."""
        m = 0
        for s in sites:
            if lattice.graph_distance(s) <= self.ball.radius:
                m |= 1 << self.ball.index(s)
        return m

    def mask_sites(self, mask):
        out = []
        while mask:
            low = mask & -mask
            out.append(self.ball.site(low.bit_length() - 1))
            mask ^= low
        return out


@lru_cache(maxsize=64)
def ctx(radius):
    return BallCtx(radius)


def spread(c, mask):
    """Union of neighbor masks over the set bits of ``mask``."""
    out = 0
    while mask:
        low = mask & -mask
        out |= c.nbr_int[low.bit_length() - 1]
        mask ^= low
    return out


def closure(c, colored, start):
    """All colored sites reachable from ``start & colored`` through colored."""
    reach = colored & start
    frontier = reach
    while frontier:
        grow = spread(c, frontier) & colored & ~reach
        reach |= grow
        frontier = grow
    return reach


def _boundary_sites(sites):
    """Sites at graph distance exactly 1 from the set (geometry only)."""
    sites = set(sites)
    out = set()
    for s in sites:
        for t in lattice.neighbors(s):
            if t not in sites:
                out.add(t)
    return out


def _touching(S, S2):
    S = set(S)
    S2 = set(S2)
    if S & S2:
        return True
    return any(t in S2 for s in S for t in lattice.neighbors(s))


def connected(config, S, S2, color, within=None):
    """Is there a same-colored path from the edge of S to a site next to S2?

    Certain by convention when S and S2 intersect or are adjacent. When
    ``within`` is given every path site must lie in it.
    """
    if _touching(S, S2):
        return True
    c = ctx(config.ball.radius)
    revealed, black = config.masks()
    colored = black if color == BLACK else revealed & ~black
    region = c.full_mask if within is None else c.sites_mask(within)
    start = c.sites_mask(_boundary_sites(S)) & region
    target = c.sites_mask(_boundary_sites(S2)) & region
    return bool(closure(c, colored & region, start) & target)


def one_arm(config, n):
    """Black path inside Ball(n) from a neighbor of 0 to the ring at n."""
    if n == 0:
        return True  # {0} touches its own boundary ring
    if config.ball.radius < n:
        raise ValueError("config ball smaller than the arm radius")
    c = ctx(config.ball.radius)
    revealed, black = config.masks()
    region = c.within_mask(n)
    start = c.ring_mask(1)
    target = c.ring_mask(n)
    return bool(closure(c, black & region, start) & target)


def dual_arm(config, k, m):
    """White path across the annulus from Ball(k) to the ring at m."""
    if k > m:
        raise ValueError("need k <= m")
    if k == m:
        return True  # Ball(k) touches the ring at m+1 = its own boundary
    if config.ball.radius < m:
        raise ValueError("config ball smaller than the outer radius")
    c = ctx(config.ball.radius)
    revealed, black = config.masks()
    white = revealed & ~black
    region = c.within_mask(m) & ~c.within_mask(k)
    start = c.ring_mask(k + 1)
    target = c.ring_mask(m)
    return bool(closure(c, white & region, start) & target)


def frontier_mask(c, revealed, black):
    """Unrevealed sites white-connected to the outer boundary ring.

    Ring radius = the context ball's radius. A site adjacent to the outer
    boundary (that is, on the outermost ring) counts as connected by
    convention; otherwise the site must neighbor a revealed-white cluster
    that contains an outermost-ring site.
    """
    m = c.ball.radius
    ring = c.ring_mask(m)
    white = revealed & ~black
    wreach = closure(c, white, ring & white)
    eligible = ring | spread(c, wreach)
    return eligible & ~revealed & c.full_mask


def white_reachable_unrevealed(config, m):
    """Set-of-sites form of :func:`frontier_mask` for a config on Ball(m)."""
    if config.ball.radius != m:
        raise ValueError("config must live on Ball(m)")
    c = ctx(m)
    revealed, black = config.masks()
    return set(c.mask_sites(frontier_mask(c, revealed, black)))


def component_of_origin(c, free_mask):
    """Connected component of the origin inside ``free_mask`` (lattice adjacency)."""
    origin_bit = 1 << c.ball.index((0, 0))
    if not free_mask & origin_bit:
        return 0
    return closure(c, free_mask, origin_bit)


# ---------------------------------------------------------------------------
# event tables for exhaustive small-ball enumeration
# ---------------------------------------------------------------------------

TABLE_MAX_SITES = 22  # 2**22 table entries; Ball(2) needs 19


@lru_cache(maxsize=32)
def arm_table(n):
    """One-arm indicator for every black-set mask of Ball(n) (n <= 2)."""
    c = ctx(n)
    if c.ball.n_sites > TABLE_MAX_SITES:
        from .errors import CapacityExceeded

        raise CapacityExceeded(f"Ball({n}) too large for a full event table")
    if n == 0:
        return np.ones(2, dtype=np.uint8)
    return K.build_event_table(
        c.ball.n_sites,
        c.nbr_np,
        np.int64(c.ring_mask(1)),
        np.int64(c.ring_mask(n)),
        np.int64(c.full_mask),
        False,
    )


@lru_cache(maxsize=32)
def dual_table(k, m):
    """Dual-arm indicator for every black-set mask of Ball(m) (m <= 2)."""
    c = ctx(m)
    if c.ball.n_sites > TABLE_MAX_SITES:
        from .errors import CapacityExceeded

        raise CapacityExceeded(f"Ball({m}) too large for a full event table")
    if k == m:
        return np.ones(1 << c.ball.n_sites, dtype=np.uint8)
    region = c.within_mask(m) & ~c.within_mask(k)
    return K.build_event_table(
        c.ball.n_sites,
        c.nbr_np,
        np.int64(c.ring_mask(k + 1) & region),
        np.int64(c.ring_mask(m) & region),
        np.int64(region),
        True,
    )


@lru_cache(maxsize=8)
def popcounts(n_sites):
    """Popcount of every mask of an ``n_sites``-bit space."""
    idx = np.arange(1 << n_sites, dtype=np.int64)
    pc = K.POP16[idx & 0xFFFF].astype(np.int64)
    if n_sites > 16:
        pc += K.POP16[(idx >> 16) & 0xFFFF]
    return pc


# ---------------------------------------------------------------------------
# padded-grid harness for the Monte-Carlo kernels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridCtx:
    """Flattened padded axial grid for one (k, m) annulus."""

    k: int
    m: int
    state0: np.ndarray
    seeds: np.ndarray
    canon: np.ndarray
    offs: np.ndarray
    qcap: int
    ring_hi: np.ndarray


@lru_cache(maxsize=16)
def grid_ctx(k, m):
    if not 0 <= k < m:
        raise ValueError("need 0 <= k < m")
    b = lattice.ball(m)
    w = 2 * m + 3
    r, q = np.meshgrid(
        np.arange(-m - 1, m + 2), np.arange(-m - 1, m + 2), indexing="ij"
    )
    dist = (np.abs(q) + np.abs(r) + np.abs(q + r)) // 2
    state0 = np.zeros((w, w), dtype=np.uint8)
    state0[(dist <= k) | (dist > m)] = 3
    state0[dist == m] = 4
    canon = np.full((w, w), -1, dtype=np.int64)
    canon[1:-1, 1:-1] = b._grid
    seeds = np.nonzero((dist == k + 1).ravel())[0].astype(np.int64)
    ring_hi = np.nonzero((dist == m).ravel())[0].astype(np.int64)
    offs = np.array([-w, 1 - w, -1, 1, w - 1, w], dtype=np.int64)
    return GridCtx(
        k=k,
        m=m,
        state0=state0.ravel(),
        seeds=seeds,
        canon=canon.ravel(),
        offs=offs,
        qcap=b.n_sites,
        ring_hi=ring_hi,
    )


def arm_hits(kind, k, m, trials, seed, replica0=0, p=0.5):
    """Fast-path hit count for {Ball(k) <-> ring m} of the given color."""
    if trials <= 0:
        return 0
    if k == m:
        return trials  # certain by convention
    g = grid_ctx(k, m)
    t53 = np.int64(K.black_threshold53(p))
    want_white = kind == "white"
    return int(
        K.arm_trials(
            g.state0, g.seeds, g.canon, g.offs,
            np.uint64(seed), np.uint64(replica0), trials, t53, want_white, g.qcap,
        )
    )


def arm_trial_unionfind(kind, k, m, seed, replica, p=0.5):
    """One trial of the same event via the union-find sweep engine."""
    if k == m:
        return True
    g = grid_ctx(k, m)
    t53 = np.int64(K.black_threshold53(p))
    return bool(
        K.arm_trial_unionfind(
            g.state0, g.canon, g.offs, np.uint64(seed), np.uint64(replica),
            t53, kind == "white", g.seeds, g.ring_hi,
        )
    )
