"""Triangular-lattice geometry: sites, balls, boundaries, circuits.

Sites are axial integer pairs (q, r) embedded in the plane at
q*(1,0) + r*(1/2, sqrt(3)/2), which makes every site 6-regular with all
neighbors at Euclidean distance 1. Graph-distance balls around the origin
and their boundary rings are the arena for every percolation event in this
package.

One fixed total order on sites -- lexicographic by (r, q) -- is used for
site indexing, tie-breaking and serialization everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import CapacityExceeded, NotACircuit

# Axial neighbor offsets in canonical (r, q)-lex order.
NEIGHBOR_OFFSETS = ((0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1))

MAX_RADIUS = 100_000


def graph_distance(a, b=(0, 0)):
    """Hex graph distance between two axial sites."""
    dq = a[0] - b[0]
    dr = a[1] - b[1]
    return (abs(dq) + abs(dr) + abs(dq + dr)) // 2


def neighbors(site):
    """The 6 lattice neighbors of a site, in canonical order."""
    q, r = site
    return [(q + dq, r + dr) for dq, dr in NEIGHBOR_OFFSETS]


def rotate60(site):
    """Rotate a site by 60 degrees counterclockwise about the origin."""
    q, r = site
    return (-r, q + r)


def ring_sites(n):
    """All sites at graph distance exactly n from the origin, (r,q)-sorted."""
    if n == 0:
        return [(0, 0)]
    sites = [
        (q, r)
        for r in range(-n, n + 1)
        for q in range(-n, n + 1)
        if graph_distance((q, r)) == n
    ]
    sites.sort(key=lambda s: (s[1], s[0]))
    return sites


class Ball:
    """The graph-distance ball of radius ``n`` around the origin.

    Carries the canonical ordered site list, the site <-> index bijection
    (grid-backed so radius-512 balls stay cheap), per-site neighbor indices
    and distance-based rings. Immutable after construction; safe to share
    across threads.
    """

    def __init__(self, n):
        if n < 0:
            raise ValueError("radius must be non-negative")
        if n > MAX_RADIUS:
            raise CapacityExceeded(f"radius {n} exceeds the {MAX_RADIUS} cap")
        self.radius = n
        w = 2 * n + 1
        qs, rs = np.meshgrid(np.arange(-n, n + 1), np.arange(-n, n + 1), indexing="xy")
        dist = (np.abs(qs) + np.abs(rs) + np.abs(qs + rs)) // 2
        inside = dist <= n
        # meshgrid with indexing="xy" walks r (rows) then q (cols): (r,q)-lex.
        self._q = qs[inside].astype(np.int32)
        self._r = rs[inside].astype(np.int32)
        self.n_sites = int(self._q.size)
        self.dist = dist[inside].astype(np.int32)
        self._grid = np.full((w, w), -1, dtype=np.int64)
        self._grid[self._r + n, self._q + n] = np.arange(self.n_sites)
        # neighbor index table, -1 where the neighbor leaves the ball
        self.neighbor_idx = np.full((self.n_sites, 6), -1, dtype=np.int64)
        for j, (dq, dr) in enumerate(NEIGHBOR_OFFSETS):
            nq = self._q + dq
            nr = self._r + dr
            ok = (np.abs(nq) <= n) & (np.abs(nr) <= n)
            vals = np.full(self.n_sites, -1, dtype=np.int64)
            vals[ok] = self._grid[nr[ok] + n, nq[ok] + n]
            self.neighbor_idx[:, j] = vals

    @property
    def sites(self):
        """Ordered list of (q, r) tuples; materialized lazily."""
        cached = getattr(self, "_sites", None)
        if cached is None:
            cached = list(zip(self._q.tolist(), self._r.tolist()))
            self._sites = cached
        return cached

    @property
    def boundary(self):
        """Sites at graph distance exactly radius+1, in canonical order."""
        return ring_sites(self.radius + 1)

    def contains(self, site):
        return graph_distance(site) <= self.radius

    def index(self, site):
        """Canonical index of a site; raises KeyError outside the ball."""
        q, r = site
        n = self.radius
        if abs(q) > n or abs(r) > n:
            raise KeyError(site)
        i = int(self._grid[r + n, q + n])
        if i < 0:
            raise KeyError(site)
        return i

    def site(self, i):
        return (int(self._q[i]), int(self._r[i]))

    def ring_indices(self, d):
        """Indices of the sites at graph distance exactly d."""
        return np.nonzero(self.dist == d)[0]

    def indices_within(self, d):
        """Indices of the sites at graph distance at most d."""
        return np.nonzero(self.dist <= d)[0]

    def __len__(self):
        return self.n_sites

    def __repr__(self):
        return f"Ball(radius={self.radius}, sites={self.n_sites})"


@lru_cache(maxsize=64)
def ball(n):
    """Cached Ball constructor; balls are immutable so sharing is safe."""
    return Ball(n)


@dataclass(frozen=True)
class Circuit:
    """A separating site set with a verified bounded interior."""

    sites: frozenset
    interior: frozenset

    def circles_around(self, region):
        """True iff every site of ``region`` lies in the interior."""
        return set(region) <= self.interior


def verify_circuit(gamma, window_radius):
    """Validate that ``gamma`` separates the plane into exactly two parts.

    Flood-fills the complement of ``gamma`` inside Ball(window_radius); all
    complement sites touching the window edge count as one outer region
    together with the rest of the infinite lattice. Succeeds iff exactly two
    components remain, returning the Circuit with the bounded one as
    interior.
    """
    gamma = frozenset(gamma)
    if not gamma:
        raise NotACircuit("empty candidate set")
    far = max(graph_distance(s) for s in gamma)
    if window_radius < far + 2:
        raise ValueError(
            f"window radius {window_radius} too small: need >= {far + 2}"
        )
    b = ball(window_radius)
    blocked = np.zeros(b.n_sites, dtype=bool)
    for s in gamma:
        blocked[b.index(s)] = True
    label = np.full(b.n_sites, -1, dtype=np.int64)
    nbr = b.neighbor_idx
    n_comp = 0
    comp_touches_edge = []
    for start in range(b.n_sites):
        if blocked[start] or label[start] >= 0:
            continue
        stack = [start]
        label[start] = n_comp
        touches = False
        while stack:
            i = stack.pop()
            for j in range(6):
                k = nbr[i, j]
                if k < 0:
                    touches = True  # neighbor leaves the window
                elif not blocked[k] and label[k] < 0:
                    label[k] = n_comp
                    stack.append(k)
        comp_touches_edge.append(touches)
        n_comp += 1
    # Every edge-touching component merges with the infinite outside into a
    # single outer region, so "exactly two components" means one bounded one.
    inner = [c for c in range(n_comp) if not comp_touches_edge[c]]
    if len(inner) != 1:
        raise NotACircuit(
            f"{len(inner)} bounded + {n_comp - len(inner)} edge components"
        )
    interior_idx = np.nonzero(label == inner[0])[0]
    interior = frozenset(b.site(int(i)) for i in interior_idx)
    return Circuit(sites=gamma, interior=interior)


def circles_around(circuit, region):
    return circuit.circles_around(region)
