"""Conditional laws under one-arm conditioning.

The exact backend enumerates completions of the unrevealed sites and
aggregates them as integer counts grouped by the number of black sites, so
every exact answer is assembled in exact rational arithmetic and only
rounded once on output (stronger than any compensated-summation scheme).
Every exact conditional probability is hard-checked against the
positive-association lower bound value >= p before it is returned;
that inequality is what makes the coupled configurations dominate the
unconditioned one.

The Monte-Carlo backend resamples only the unrevealed sites and reports a
binomial confidence interval; its estimates are clamped to [p, 1] (the true
value is provably >= p, so clamping only reduces error) which keeps the
domination property intact even for approximate runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels as K
from . import connectivity as cn
from . import lattice
from .configuration import BLACK, UNREVEALED, PartialConfig
from .errors import CapacityExceeded, IncompatibleConditioning, RetryLimitExceeded
from .streams import UniformField

EXACT_TABLE_MAX_RADIUS = 2  # full tables up to Ball(2) = 19 sites
GENERIC_MASK_MAX_SITES = 63  # one int64 of mask per configuration
MEMO_MIN_FREE = 12  # memoize only queries whose enumeration is expensive

_MEMO = {}
_FKG_STATS = {"checks": 0, "min_margin": math.inf}


@dataclass(frozen=True)
class CondQuery:
    """P(target is Black | revealed sites, one-arm to arm_radius)."""

    target: tuple
    revealed: PartialConfig
    arm_radius: int
    p: float = 0.5


@dataclass
class OracleBackend:
    mode: str = "exact"  # "exact" | "mc"
    exact_limit: int = 25
    mc_tolerance: float = 1e-3
    mc_max_samples: int = 200_000

    def __post_init__(self):
        if self.mode not in ("exact", "mc"):
            raise ValueError("mode must be 'exact' or 'mc'")


@dataclass(frozen=True)
class CondProb:
    value: float
    exact: bool
    ci_halfwidth: float = 0.0
    samples: int = 0
    accepted: int = 0


def fkg_report():
    """(number of exact conditional queries checked, worst margin value-p)."""
    return dict(_FKG_STATS)


def _fkg_note(margin):
    _FKG_STATS["checks"] += 1
    if margin < _FKG_STATS["min_margin"]:
        _FKG_STATS["min_margin"] = margin


def _assemble_exact(num_by_b, tot_by_b, p):
    """Probability from popcount-grouped completion counts, FKG-checked."""
    tot_all = int(tot_by_b.sum())
    if tot_all == 0:
        raise IncompatibleConditioning("revealed sites admit no arm completion")
    u = len(tot_by_b) - 1
    if p == 0.5:
        num_all = int(num_by_b.sum())
        if not 2 * num_all >= tot_all:
            raise AssertionError(
                f"FKG lower bound violated: {num_all}/{tot_all} < 1/2"
            )
        value = num_all / tot_all
        _fkg_note(value - 0.5)
        return value
    # exact rational arithmetic end to end: float() of a Fraction rounds
    # correctly, so a true value >= p can never surface below p
    pf = Fraction(p)
    qf = 1 - pf
    num_f = sum(int(num_by_b[b]) * pf**b * qf ** (u - b) for b in range(u + 1))
    den_f = sum(int(tot_by_b[b]) * pf**b * qf ** (u - b) for b in range(u + 1))
    if not num_f >= pf * den_f:
        raise AssertionError(f"FKG lower bound violated: {num_f/den_f} < {p}")
    value = float(num_f / den_f)
    _fkg_note(value - p)
    return value


def cond_prob_masks(n, p, x_idx, revealed_mask, black_mask, backend, rng=None):
    """Mask-level conditional probability on Ball(n) canonical indices.

    ``revealed_mask``/``black_mask`` are python-int masks of the revealed
    sites and their black subset; ``x_idx`` must be unrevealed.
    """
    c = cn.ctx(n)
    x_bit = 1 << x_idx
    if revealed_mask & x_bit:
        raise ValueError("target site already revealed")
    if backend.mode == "mc":
        return _mc_cond(n, p, x_idx, revealed_mask, black_mask, backend, rng)
    free_mask = c.full_mask & ~revealed_mask
    u = free_mask.bit_count()
    if u > backend.exact_limit:
        raise CapacityExceeded(
            f"{u} unrevealed sites exceed exact_limit={backend.exact_limit}"
        )
    memoize = u >= MEMO_MIN_FREE or c.ball.n_sites <= 7
    memo_key = None
    if memoize:
        memo = _MEMO.setdefault((n, p), {})
        memo_key = (x_idx, revealed_mask, black_mask)
        hit = memo.get(memo_key)
        if hit is not None:
            return hit
    if n <= EXACT_TABLE_MAX_RADIUS:
        num_by_b, tot_by_b = K.cond_counts_table(
            cn.arm_table(n),
            np.int64(black_mask),
            np.int64(free_mask),
            np.int64(x_bit),
            K.POP16,
        )
    else:
        if c.ball.n_sites > GENERIC_MASK_MAX_SITES:
            raise CapacityExceeded(f"Ball({n}) exceeds the 63-site mask engine")
        num_by_b, tot_by_b = K.cond_counts_generic(
            c.ball.n_sites,
            c.nbr_np,
            np.int64(c.ring_mask(1)),
            np.int64(c.ring_mask(n)),
            np.int64(c.full_mask),
            np.int64(black_mask),
            np.int64(free_mask),
            np.int64(x_bit),
            K.POP16,
        )
    result = CondProb(value=_assemble_exact(num_by_b, tot_by_b, p), exact=True)
    if memoize:
        memo[memo_key] = result
    return result


def _mc_cond(n, p, x_idx, revealed_mask, black_mask, backend, rng):
    if rng is None:
        raise ValueError("the MC backend needs an explicit rng stream")
    c = cn.ctx(n)
    if c.ball.n_sites > GENERIC_MASK_MAX_SITES:
        raise CapacityExceeded(f"Ball({n}) exceeds the 63-site mask engine")
    free_bits = [i for i in range(c.ball.n_sites) if not revealed_mask & (1 << i)]
    weights = np.array([1 << b for b in free_bits], dtype=np.int64)
    x_pos = free_bits.index(x_idx)
    num = 0
    tot = 0
    drawn = 0
    chunk = 32_768
    z = 1.959963984540054
    while drawn < backend.mc_max_samples:
        take = min(chunk, backend.mc_max_samples - drawn)
        bits = rng.random((take, len(free_bits))) <= p
        masks = black_mask + (bits.astype(np.int64) * weights).sum(axis=1)
        if n <= EXACT_TABLE_MAX_RADIUS:
            ok = cn.arm_table(n)[masks].astype(bool)
        else:
            ok = K.mask_event_batch(
                c.ball.n_sites,
                c.nbr_np,
                masks.astype(np.int64),
                np.int64(c.ring_mask(1)),
                np.int64(c.ring_mask(n)),
                np.int64(c.full_mask),
                False,
            ).astype(bool)
        tot += int(ok.sum())
        num += int((ok & bits[:, x_pos]).sum())
        drawn += take
        if tot > 0:
            phat = num / tot
            half = z * math.sqrt(max(phat * (1 - phat), 1e-12) / tot)
            if half <= backend.mc_tolerance:
                break
    if tot == 0:
        raise IncompatibleConditioning(
            f"no completion realized the arm in {drawn} MC samples"
        )
    raw = num / tot
    half = z * math.sqrt(max(raw * (1 - raw), 1e-12) / tot)
    # The true value is >= p (positive association), so clamping the
    # estimate into [p, 1] only reduces error and preserves domination.
    return CondProb(
        value=min(1.0, max(p, raw)),
        exact=False,
        ci_halfwidth=half,
        samples=drawn,
        accepted=tot,
    )


def cond_prob(query, backend, rng=None):
    """P(eps_x = Black | revealed values, one-arm to the query radius)."""
    n = query.arm_radius
    b_n = lattice.ball(n)
    if lattice.graph_distance(query.target) > n:
        # a site outside the conditioning ball is independent of the event
        return CondProb(value=query.p, exact=backend.mode == "exact")
    if query.revealed.state_at(query.target) != UNREVEALED:
        raise ValueError("target site already revealed")
    revealed_mask = 0
    black_mask = 0
    src = query.revealed
    for i in np.nonzero(src.states != UNREVEALED)[0]:
        site = src.ball.site(int(i))
        if lattice.graph_distance(site) > n:
            continue  # independent of the arm event and of eps_x
        j = b_n.index(site)
        revealed_mask |= 1 << j
        if src.states[i] == BLACK:
            black_mask |= 1 << j
    return cond_prob_masks(
        n, query.p, b_n.index(query.target), revealed_mask, black_mask, backend, rng
    )


# ---------------------------------------------------------------------------
# exact marginals and exact event probabilities on small balls
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MarginalTable:
    """Distribution of the black-pattern atom on an ordered site region."""

    region: tuple
    probs: np.ndarray
    n: int
    p: float

    def atom_of(self, config):
        a = 0
        for j, s in enumerate(self.region):
            if config.state_at(s) == BLACK:
                a |= 1 << j
        return a

    def tv(self, other_probs):
        return 0.5 * math.fsum(
            abs(float(a) - float(b)) for a, b in zip(self.probs, other_probs)
        )


def canonical_region(region):
    return tuple(sorted(set(region), key=lambda s: (s[1], s[0])))


def exact_conditioned_marginal(region, n, p=0.5):
    """Exact law of the region's pattern under P(. | one-arm to radius n)."""
    if n > EXACT_TABLE_MAX_RADIUS:
        raise CapacityExceeded(f"exact marginals need n <= {EXACT_TABLE_MAX_RADIUS}")
    region = canonical_region(region)
    c = cn.ctx(n)
    for s in region:
        if lattice.graph_distance(s) > n:
            raise ValueError(f"region site {s} outside Ball({n})")
    nb = c.ball.n_sites
    tbl = cn.arm_table(n)
    sel = np.nonzero(tbl)[0]
    pc = cn.popcounts(nb)[sel]
    atoms = np.zeros(sel.size, dtype=np.int64)
    for j, s in enumerate(region):
        atoms |= ((sel >> c.ball.index(s)) & 1) << j
    n_atoms = 1 << len(region)
    joint = np.bincount(
        atoms * (nb + 1) + pc, minlength=n_atoms * (nb + 1)
    ).reshape(n_atoms, nb + 1)
    if p == 0.5:
        total = int(joint.sum())
        probs = joint.sum(axis=1) / total
    else:
        pw = [p**b * (1.0 - p) ** (nb - b) for b in range(nb + 1)]
        weights = np.array(
            [math.fsum(int(joint[a, b]) * pw[b] for b in range(nb + 1))
             for a in range(n_atoms)]
        )
        probs = weights / math.fsum(weights.tolist())
    return MarginalTable(region=region, probs=probs, n=n, p=p)


def exact_table_prob(table, p=0.5):
    """Exact probability of a tabulated event under Bernoulli(p) colors."""
    n_sites = int(np.log2(table.size))
    sel = np.nonzero(table)[0]
    if p == 0.5:
        return sel.size / table.size
    counts = np.bincount(cn.popcounts(n_sites)[sel], minlength=n_sites + 1)
    pw = [p**b * (1.0 - p) ** (n_sites - b) for b in range(n_sites + 1)]
    return math.fsum(int(counts[b]) * pw[b] for b in range(n_sites + 1))


def exact_dual_arm_prob(k, m, p=0.5):
    """Exact P(Ball(k) <->* ring m) by full enumeration (m <= 2)."""
    if k == m:
        return 1.0
    return exact_table_prob(cn.dual_table(k, m), p)


def exact_one_arm_prob(n, p=0.5):
    """Exact one-arm probability by full enumeration (n <= 2)."""
    return exact_table_prob(cn.arm_table(n), p)


# ---------------------------------------------------------------------------
# rejection sampling of conditioned configurations
# ---------------------------------------------------------------------------


def sample_conditioned_rejection(n, p, stream, max_attempts=10_000_000):
    """One exact sample of P(. | one-arm to n) by repeated resampling.

    Attempt a of stream (seed, replica) colors site i from stream index
    a * n_sites + i, matching the batched kernel exactly. Returns
    (config, attempts).
    """
    from .connectivity import one_arm

    if not isinstance(stream, UniformField):
        stream = UniformField(*stream)
    b = lattice.ball(n)
    nb = b.n_sites
    for a in range(max_attempts):
        states = np.empty(nb, dtype=np.uint8)
        base = a * nb
        for i in range(nb):
            states[i] = 1 if stream.u(base + i) <= p else 0
        cfg = PartialConfig(b, states)
        if n == 0 or one_arm(cfg, n):
            return cfg, a + 1
    raise RetryLimitExceeded(f"no arm configuration in {max_attempts} attempts")


def sample_conditioned_atoms(region, n, p, count, seed, replica0=0,
                             max_attempts=10_000_000):
    """Batch of conditioned samples reduced to region atoms (fast path).

    Sample s uses stream (seed, replica0 + s) with the same index layout as
    :func:`sample_conditioned_rejection`. Returns (atom ids, attempts).
    """
    region = canonical_region(region)
    c = cn.ctx(n)
    if c.ball.n_sites > GENERIC_MASK_MAX_SITES:
        raise CapacityExceeded(f"Ball({n}) exceeds the 63-site mask engine")
    region_bits = np.array([c.ball.index(s) for s in region], dtype=np.int64)
    t53 = np.int64(K.black_threshold53(p))
    if n == 0:
        # the radius-0 arm is certain: every first attempt is accepted
        atoms = np.zeros(count, dtype=np.int64)
        if region:
            u = np.array(
                [K.py_uniform_at(seed, replica0 + s, 0) for s in range(count)]
            )
            atoms = (u <= p).astype(np.int64)
        return atoms, np.ones(count, dtype=np.int64)
    start = np.int64(c.ring_mask(1))
    target = np.int64(c.ring_mask(n))
    regmask = np.int64(c.full_mask)
    atoms, attempts = K.rejection_batch(
        c.ball.n_sites, c.nbr_np, start, target, regmask,
        np.uint64(seed), np.uint64(replica0), count, t53, region_bits,
        max_attempts,
    )
    if np.any(atoms < 0):
        raise RetryLimitExceeded("a sample exhausted its attempt budget")
    return atoms, attempts
