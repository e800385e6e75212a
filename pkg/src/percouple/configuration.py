"""Percolation configurations on a ball, with a first-class Unrevealed state.

A PartialConfig assigns Black, White or Unrevealed to every site of a Ball.
Unrevealed is not a color: no connection event ever walks through an
unrevealed site, and compatibility questions quantify over its completions.
The canonical wire form is a string over {B, W, U} in canonical site order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import lattice
from .streams import UniformField

WHITE = 0
BLACK = 1
UNREVEALED = 2

_CHARS = np.array(["W", "B", "U"])
_STATE_OF_CHAR = {"W": WHITE, "B": BLACK, "U": UNREVEALED}


class PartialConfig:
    """States over a ball's canonical site order; a plain value type."""

    __slots__ = ("ball", "states")

    def __init__(self, ball, states):
        states = np.asarray(states, dtype=np.uint8)
        if states.shape != (ball.n_sites,):
            raise ValueError("states length must equal the ball site count")
        self.ball = ball
        self.states = states

    @classmethod
    def unrevealed(cls, ball):
        return cls(ball, np.full(ball.n_sites, UNREVEALED, dtype=np.uint8))

    @classmethod
    def constant(cls, ball, state):
        return cls(ball, np.full(ball.n_sites, state, dtype=np.uint8))

    @classmethod
    def from_string(cls, ball, text):
        if len(text) != ball.n_sites:
            raise ValueError("serialized length must equal the ball site count")
        return cls(ball, np.array([_STATE_OF_CHAR[c] for c in text], dtype=np.uint8))

    @classmethod
    def from_masks(cls, ball, revealed_mask, black_mask):
        """Build from python-int bitmasks over canonical indices."""
        states = np.full(ball.n_sites, UNREVEALED, dtype=np.uint8)
        for i in range(ball.n_sites):
            bit = 1 << i
            if revealed_mask & bit:
                states[i] = BLACK if (black_mask & bit) else WHITE
        return cls(ball, states)

    def to_string(self):
        return "".join(_CHARS[self.states])

    def copy(self):
        return PartialConfig(self.ball, self.states.copy())

    def state_at(self, site):
        return int(self.states[self.ball.index(site)])

    def set_site(self, site, state):
        self.states[self.ball.index(site)] = state

    def revealed_sites(self):
        """Sites with a revealed color, in canonical order."""
        idx = np.nonzero(self.states != UNREVEALED)[0]
        return [self.ball.site(int(i)) for i in idx]

    def masks(self):
        """(revealed_mask, black_mask) as python ints over canonical indices."""
        revealed = 0
        black = 0
        for i in np.nonzero(self.states != UNREVEALED)[0]:
            revealed |= 1 << int(i)
        for i in np.nonzero(self.states == BLACK)[0]:
            black |= 1 << int(i)
        return revealed, black

    def restrict(self, region):
        """Forget every state outside ``region`` (a set of sites)."""
        out = np.full(self.ball.n_sites, UNREVEALED, dtype=np.uint8)
        for s in region:
            i = self.ball.index(s)
            out[i] = self.states[i]
        return PartialConfig(self.ball, out)

    def __eq__(self, other):
        return (
            isinstance(other, PartialConfig)
            and self.ball.radius == other.ball.radius
            and np.array_equal(self.states, other.states)
        )

    def __hash__(self):
        return hash((self.ball.radius, self.states.tobytes()))

    def __repr__(self):
        return f"PartialConfig(radius={self.ball.radius}, {self.to_string()!r})"


@dataclass(frozen=True)
class EpsEvent:
    """A cylinder event {eps_S = eta}, optionally joined with a one-arm event."""

    constraints: dict = field(default_factory=dict)
    arm_radius: int | None = None

    def __post_init__(self):
        if self.arm_radius is not None:
            for s in self.constraints:
                if lattice.graph_distance(s) > self.arm_radius:
                    raise ValueError(f"constraint site {s} outside Ball({self.arm_radius})")

    def holds(self, config):
        from .connectivity import one_arm

        for site, color in self.constraints.items():
            if config.state_at(site) != color:
                return False
        if self.arm_radius is not None and not one_arm(config, self.arm_radius):
            return False
        return True


def full_random(ball, p, stream):
    """A fully revealed Bernoulli(p) configuration driven by a UniformField.

    Site i is Black iff its stream uniform is <= p, the same rule the
    coupled exploration applies, so both constructions share realizations.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be a probability")
    if not isinstance(stream, UniformField):
        stream = UniformField(*stream)
    u = stream.block(ball.n_sites)
    states = np.where(u <= p, BLACK, WHITE).astype(np.uint8)
    return PartialConfig(ball, states)


def compatible_with_arm(config, n):
    """Can some completion of the unrevealed sites realize the one-arm event?

    The one-arm event is increasing, so a completion exists iff the all-Black
    completion works; this is a single connectivity query.
    """
    from .connectivity import one_arm

    b = lattice.ball(n)
    states = np.full(b.n_sites, BLACK, dtype=np.uint8)
    cap = min(n, config.ball.radius)
    for i in config.ball.indices_within(cap):
        st = config.states[i]
        if st != UNREVEALED:
            states[b.index(config.ball.site(int(i)))] = st
    return one_arm(PartialConfig(b, states), n)
