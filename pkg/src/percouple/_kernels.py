"""Numba kernels and the counter-based uniform stream.

Everything here is deterministic given (seed, replica, site index): the
uniform attached to a site is a splitmix64-style hash of that triple, so
replicas are embarrassingly parallel and results never depend on thread
count or execution order. The same stream feeds the exploration coupling,
the plain samplers and the fast Monte-Carlo kernels, which makes the slow
reference paths and the fast paths bit-comparable.

Small-ball percolation events are evaluated on integer bitmasks over the
canonical site order (ball radius 2 has 19 sites, so a full enumeration is
2**19 masks); large-radius arm estimation runs a lazily-colored BFS on a
padded axial grid.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

_M64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_SEED_TWEAK = np.uint64(0x243F6A8885A308D3)
_U53 = 1.0 / (1 << 53)


@njit(cache=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def _stream_key(seed, replica):
    z = _mix64(seed * _GOLDEN + _SEED_TWEAK)
    return _mix64(z + replica * _GOLDEN)


@njit(cache=True, inline="always")
def _u64_at(key, idx):
    return _mix64(key + idx * _GOLDEN)


@njit(cache=True)
def uniform_at(seed, replica, idx):
    """The [0,1) uniform attached to (seed, replica, site index)."""
    key = _stream_key(np.uint64(seed), np.uint64(replica))
    return (_u64_at(key, np.uint64(idx)) >> np.uint64(11)) * _U53


def py_mix64(z):
    """Pure-python twin of the kernel mixer, for contract tests."""
    z &= 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


def py_uniform_at(seed, replica, idx):
    z = py_mix64((seed * 0x9E3779B97F4A7C15 + 0x243F6A8885A308D3) & 0xFFFFFFFFFFFFFFFF)
    key = py_mix64((z + replica * 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF)
    u = py_mix64((key + idx * 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF)
    return (u >> 11) * _U53


def uniform_block(seed, replica, n):
    """Vectorized uniforms for site indices 0..n-1 of one replica stream."""
    with np.errstate(over="ignore"):
        seed = np.uint64(seed)
        replica = np.uint64(replica)
        z = (seed * _GOLDEN + _SEED_TWEAK) & _M64
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        z = z ^ (z >> np.uint64(31))
        key = (z + replica * _GOLDEN) & _M64
        key = (key ^ (key >> np.uint64(30))) * _MIX1
        key = (key ^ (key >> np.uint64(27))) * _MIX2
        key = key ^ (key >> np.uint64(31))
        idx = np.arange(n, dtype=np.uint64)
        u = key + idx * _GOLDEN
        u = (u ^ (u >> np.uint64(30))) * _MIX1
        u = (u ^ (u >> np.uint64(27))) * _MIX2
        u = u ^ (u >> np.uint64(31))
    return (u >> np.uint64(11)) * _U53


def black_threshold53(p):
    """Integer threshold t with {U <= p} == {(u64 >> 11) <= t}, exact."""
    from fractions import Fraction

    if p >= 1.0:
        return (1 << 53)  # everything, including u53 == 2**53 - 1
    if p <= 0.0:
        return -1
    return int(Fraction(p) * (1 << 53))


# ---------------------------------------------------------------------------
# small-ball bitmask machinery (balls up to 64 sites as int64 masks)
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def _mask_reach(colored, start, target, nbr_masks):
    """Reachable-set closure of ``start & colored`` through colored sites.

    Returns nonzero iff the closure meets ``target``. Bitmask BFS: each
    round ORs the neighbor masks of the frontier sites.
    """
    n = nbr_masks.size
    reach = colored & start
    if reach & target:
        return True
    frontier = reach
    while frontier != 0:
        grow = np.int64(0)
        for i in range(n):
            if frontier & (np.int64(1) << i):
                grow |= nbr_masks[i]
        grow &= colored & ~reach
        if grow & target:
            return True
        reach |= grow
        frontier = grow
    return False


@njit(cache=True)
def build_event_table(n_sites, nbr_masks, start, target, region, want_white):
    """Indicator of a connection event for every black-set mask of the ball.

    ``mask`` bit i set means site i is black. The path runs through sites of
    the stated color inside ``region`` from ``start`` to ``target``.
    """
    full = np.int64((1 << n_sites) - 1)
    restricted = np.empty(n_sites, dtype=np.int64)
    for i in range(n_sites):
        restricted[i] = nbr_masks[i] & region
    out = np.zeros(1 << n_sites, dtype=np.uint8)
    s = start & region
    t = target & region
    for mask in range(1 << n_sites):
        colored = (full ^ mask) if want_white else np.int64(mask)
        colored &= region
        if _mask_reach(colored, s, t, restricted):
            out[mask] = 1
    return out


@njit(cache=True)
def mask_event_batch(n_sites, nbr_masks, masks, start, target, region, want_white):
    """Connection-event indicator for a batch of black-set masks."""
    full = np.int64((1 << n_sites) - 1)
    restricted = np.empty(n_sites, dtype=np.int64)
    for i in range(n_sites):
        restricted[i] = nbr_masks[i] & region
    s0 = start & region
    t0 = target & region
    out = np.zeros(masks.size, dtype=np.uint8)
    for j in range(masks.size):
        colored = (full ^ masks[j]) if want_white else masks[j]
        if _mask_reach(colored & region, s0, t0, restricted):
            out[j] = 1
    return out


@njit(cache=True)
def mask_event(n_sites, nbr_masks, black_mask, start, target, region, want_white):
    """Single connection-event check on one black-set mask."""
    full = np.int64((1 << n_sites) - 1)
    restricted = np.empty(n_sites, dtype=np.int64)
    for i in range(n_sites):
        restricted[i] = nbr_masks[i] & region
    colored = (full ^ black_mask) if want_white else black_mask
    colored &= region
    return _mask_reach(colored, start & region, target & region, restricted)


@njit(cache=True)
def cond_counts_table(table, base_black, free_mask, x_bit, pop16):
    """Popcount-grouped completion counts for an exact conditional law.

    Enumerates every completion of the free sites above the revealed blacks
    ``base_black``; a completion contributes to slot b = #black free sites.
    Returns (hits with x black, hits) as int64[n_free+1] arrays, counting
    completions where ``table`` holds.
    """
    n_free = 0
    m = np.uint64(free_mask)
    while m != np.uint64(0):
        n_free += pop16[m & np.uint64(0xFFFF)]
        m >>= np.uint64(16)
    num = np.zeros(n_free + 1, dtype=np.int64)
    tot = np.zeros(n_free + 1, dtype=np.int64)
    s = free_mask
    while True:
        mask = base_black | s
        if table[mask]:
            us = np.uint64(s)
            b = 0
            while us != np.uint64(0):
                b += pop16[us & np.uint64(0xFFFF)]
                us >>= np.uint64(16)
            tot[b] += 1
            if mask & x_bit:
                num[b] += 1
        if s == 0:
            break
        s = (s - 1) & free_mask
    return num, tot


@njit(cache=True)
def cond_counts_generic(
    n_sites, nbr_masks, start, target, region, base_black, free_mask, x_bit, pop16
):
    """As cond_counts_table, but checks the event by BFS per completion.

    Used when the ball is too large for a precomputed table; the caller
    bounds the number of free sites.
    """
    restricted = np.empty(n_sites, dtype=np.int64)
    for i in range(n_sites):
        restricted[i] = nbr_masks[i] & region
    s0 = start & region
    t0 = target & region
    n_free = 0
    m = np.uint64(free_mask)
    while m != np.uint64(0):
        n_free += pop16[m & np.uint64(0xFFFF)]
        m >>= np.uint64(16)
    num = np.zeros(n_free + 1, dtype=np.int64)
    tot = np.zeros(n_free + 1, dtype=np.int64)
    s = free_mask
    while True:
        mask = base_black | s
        if _mask_reach(mask & region, s0, t0, restricted):
            us = np.uint64(s)
            b = 0
            while us != np.uint64(0):
                b += pop16[us & np.uint64(0xFFFF)]
                us >>= np.uint64(16)
            tot[b] += 1
            if mask & x_bit:
                num[b] += 1
        if s == 0:
            break
        s = (s - 1) & free_mask
    return num, tot


# ---------------------------------------------------------------------------
# large-radius arm estimation: lazily colored BFS on a padded axial grid
# ---------------------------------------------------------------------------


@njit(cache=True)
def _arm_bfs_one(state, queue, seeds, canon, offs, key, t53, want_white):
    """One trial: does a same-color path run from the seed ring to state-4?

    ``state`` codes: 0 unknown bulk, 2 known blocked, 3 forbidden, 4 unknown
    target ring. Colors are revealed lazily from the per-replica stream the
    first time a cell is touched.
    """
    tail = 0
    for ii in range(seeds.size):
        sfl = seeds[ii]
        st = state[sfl]
        if st == 0 or st == 4:
            u = _u64_at(key, np.uint64(canon[sfl]))
            black = np.int64(u >> np.uint64(11)) <= t53
            col = black != want_white
            if col:
                if st == 4:
                    return True
                state[sfl] = 1
                queue[tail] = sfl
                tail += 1
            else:
                state[sfl] = 2
    head = 0
    while head < tail:
        sfl = queue[head]
        head += 1
        for j in range(6):
            ns = sfl + offs[j]
            st = state[ns]
            if st == 0 or st == 4:
                u = _u64_at(key, np.uint64(canon[ns]))
                black = np.int64(u >> np.uint64(11)) <= t53
                col = black != want_white
                if col:
                    if st == 4:
                        return True
                    state[ns] = 1
                    queue[tail] = ns
                    tail += 1
                else:
                    state[ns] = 2
    return False


@njit(cache=True, parallel=True)
def arm_trials(state0, seeds, canon, offs, seed, rep0, trials, t53, want_white, qcap):
    """Count arm-event hits over ``trials`` independent replica streams."""
    hits = 0
    for t in prange(trials):
        state = state0.copy()
        queue = np.empty(qcap, dtype=np.int64)
        key = _stream_key(np.uint64(seed), np.uint64(rep0 + t))
        if _arm_bfs_one(state, queue, seeds, canon, offs, key, t53, want_white):
            hits += 1
    return hits


@njit(cache=True, parallel=True)
def arm_trials_flags(state0, seeds, canon, offs, seed, rep0, trials, t53, want_white, qcap):
    """Per-trial hit flags of the BFS engine (for engine cross-checks)."""
    out = np.zeros(trials, dtype=np.uint8)
    for t in prange(trials):
        state = state0.copy()
        queue = np.empty(qcap, dtype=np.int64)
        key = _stream_key(np.uint64(seed), np.uint64(rep0 + t))
        if _arm_bfs_one(state, queue, seeds, canon, offs, key, t53, want_white):
            out[t] = 1
    return out


@njit(cache=True)
def _uf_find(parent, i):
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        nxt = parent[i]
        parent[i] = root
        i = nxt
    return root


@njit(cache=True)
def arm_trial_unionfind(state0, canon, offs, seed, replica, t53, want_white, ring_lo, ring_hi):
    """One trial of the same arm event via a full union-find sweep.

    Labels every same-color cluster of the annulus (Hoshen-Kopelman style)
    and reports whether a seed-ring cluster meets the target ring. Second
    engine used to cross-check the BFS kernel.
    """
    n = state0.size
    key = _stream_key(np.uint64(seed), np.uint64(replica))
    colored = np.zeros(n, dtype=np.uint8)
    for i in range(n):
        st = state0[i]
        if st == 0 or st == 4:
            u = _u64_at(key, np.uint64(canon[i]))
            black = np.int64(u >> np.uint64(11)) <= t53
            if black != want_white:
                colored[i] = 1
    parent = np.arange(n, dtype=np.int64)
    for i in range(n):
        if colored[i]:
            for j in range(6):
                k = i + offs[j]
                if 0 <= k < n and colored[k]:
                    ri = _uf_find(parent, i)
                    rk = _uf_find(parent, k)
                    if ri != rk:
                        parent[rk] = ri
    touches_lo = np.zeros(n, dtype=np.uint8)
    for ii in range(ring_lo.size):
        i = ring_lo[ii]
        if colored[i]:
            touches_lo[_uf_find(parent, i)] = 1
    for ii in range(ring_hi.size):
        i = ring_hi[ii]
        if colored[i] and touches_lo[_uf_find(parent, i)]:
            return True
    return False


@njit(cache=True, parallel=True)
def uf_trials_flags(state0, canon, offs, seed, rep0, trials, t53, want_white, ring_lo, ring_hi):
    """Per-trial hit flags of the union-find engine."""
    out = np.zeros(trials, dtype=np.uint8)
    for t in prange(trials):
        if arm_trial_unionfind(
            state0, canon, offs, np.uint64(seed), np.uint64(rep0 + t), t53,
            want_white, ring_lo, ring_hi,
        ):
            out[t] = 1
    return out


# ---------------------------------------------------------------------------
# batch rejection sampling of one-arm-conditioned configurations
# ---------------------------------------------------------------------------


@njit(cache=True, parallel=True)
def rejection_batch(
    n_sites, nbr_masks, start, target, region, seed, rep0, count, t53,
    region_bits, max_attempts,
):
    """Sample ``count`` configurations of P(. | one-arm) by rejection.

    Each sample s draws fresh configurations from stream (seed, rep0+s) at
    consecutive index blocks until the one-arm event holds, then records the
    black-pattern atom on ``region_bits``. Returns (atom ids, attempts used);
    atom id -1 flags a sample that hit max_attempts.
    """
    atoms = np.empty(count, dtype=np.int64)
    attempts = np.zeros(count, dtype=np.int64)
    restricted = np.empty(n_sites, dtype=np.int64)
    for i in range(n_sites):
        restricted[i] = nbr_masks[i] & region
    s0 = start & region
    t0 = target & region
    for s in prange(count):
        key = _stream_key(np.uint64(seed), np.uint64(rep0 + s))
        got = np.int64(-1)
        tries = 0
        base = np.uint64(0)
        while tries < max_attempts:
            tries += 1
            mask = np.int64(0)
            for i in range(n_sites):
                u = _u64_at(key, base + np.uint64(i))
                if np.int64(u >> np.uint64(11)) <= t53:
                    mask |= np.int64(1) << i
            base += np.uint64(n_sites)
            if _mask_reach(mask & region, s0, t0, restricted):
                atom = np.int64(0)
                for b in range(region_bits.size):
                    if mask & (np.int64(1) << region_bits[b]):
                        atom |= np.int64(1) << b
                got = atom
                break
        atoms[s] = got
        attempts[s] = tries
    return atoms, attempts


POP16 = np.array([bin(i).count("1") for i in range(1 << 16)], dtype=np.uint8)
