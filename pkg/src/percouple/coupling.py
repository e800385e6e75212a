"""The site-by-site exploration coupling.

Three configurations are revealed in lockstep over Ball(m), driven by one
uniform per site: the unbiased one flips at p, and the two conditioned ones
flip at their exact conditional-law thresholds given their own revealed
values and a one-arm event to radius m (resp. n). The reveal order gives
priority to unrevealed sites that are white-connected to the outer
boundary in the unbiased configuration, so the outermost black circuit is
uncovered before anything inside it; once the frontier dies (the stopping
time), the component of the origin among unrevealed sites is enclosed by a
black circuit common to all three configurations, and from then on the two
conditioned configurations see identical thresholds inside it.

Every run retains a per-step trace (site, uniform, both thresholds) so the
structural facts -- frontier death is permanent, the enclosing boundary is
black and separating, thresholds coincide inside it -- are checked as
run-time assertions rather than left as endpoint statistics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from . import connectivity as cn
from . import lattice
from . import oracle
from .configuration import PartialConfig
from .errors import CircuitInvariantViolation, Exhausted
from .lattice import Circuit, verify_circuit
from .streams import UniformField, substream

__all__ = [
    "UniformField",
    "ExplorationState",
    "CouplingOutcome",
    "next_site",
    "reveal_step",
    "run_coupling",
    "extract_circuit",
]


class ExplorationState:
    """Mutable state of one coupled exploration of Ball(m).

    Masks are python ints over canonical indices; the unconditioned and
    radius-m configurations use Ball(m) indexing, the radius-n one uses
    Ball(n) indexing so oracle queries need no translation.
    """

    def __init__(self, k, m, n, field, p=0.5):
        if not 0 <= k <= m <= n:
            raise ValueError("need 0 <= k <= m <= n")
        self.k = k
        self.m = m
        self.n = n
        self.p = p
        self.field = field
        self.cm = cn.ctx(m)
        self.cn_ = cn.ctx(n)
        bm, bn = self.cm.ball, self.cn_.ball
        self.embed = [bn.index(bm.site(i)) for i in range(bm.n_sites)]
        self.order = []
        self.revealed = 0  # mask over Ball(m)
        self.omega = 0
        self.omega_m = 0
        self.revealed_n = 0  # mask over Ball(n)
        self.omega_n = 0
        self.frontier = cn.frontier_mask(self.cm, 0, 0)
        self.tau = None
        self.x_tau_mask = None
        self.hit = None
        self.c_mask = None
        self.gamma = None
        self.trace = []
        self.max_c_threshold_dev = 0.0
        self.lambda_k_mask = self.cm.within_mask(k)

    @property
    def steps(self):
        return len(self.order)

    def config_omega(self):
        return PartialConfig.from_masks(self.cm.ball, self.revealed, self.omega)

    def config_omega_m(self):
        return PartialConfig.from_masks(self.cm.ball, self.revealed, self.omega_m)

    def config_omega_n(self):
        """Restriction of the radius-n coupled configuration to Ball(m)."""
        black = 0
        for i, j in enumerate(self.embed):
            if self.omega_n & (1 << j):
                black |= 1 << i
        return PartialConfig.from_masks(self.cm.ball, self.revealed, black)


def next_site(state):
    """Index (in Ball(m)) of the next site to reveal.

    The canonically smallest frontier site when the frontier is non-empty,
    else the canonically smallest unrevealed site; canonical order is index
    order, so "smallest" is the lowest set bit.
    """
    mask = state.frontier
    if not mask:
        mask = state.cm.full_mask & ~state.revealed
    if not mask:
        raise Exhausted("all sites revealed")
    return (mask & -mask).bit_length() - 1


def reveal_step(state, backend, rng=None):
    """Reveal one site in all three configurations and update the frontier."""
    i = next_site(state)
    bit = 1 << i
    u = state.field.u(i)
    thr_m = oracle.cond_prob_masks(
        state.m, state.p, i, state.revealed, state.omega_m, backend,
        rng=substream(state.field.seed, state.field.replica, state.steps, 0)
        if rng is None and backend.mode == "mc" else rng,
    ).value
    j = state.embed[i]
    thr_n = oracle.cond_prob_masks(
        state.n, state.p, j, state.revealed_n, state.omega_n, backend,
        rng=substream(state.field.seed, state.field.replica, state.steps, 1)
        if rng is None and backend.mode == "mc" else rng,
    ).value
    black = u <= state.p
    black_m = u <= thr_m
    black_n = u <= thr_n
    # thresholds are >= p, so the unconditioned configuration is dominated
    if black and not (black_m and black_n):
        raise AssertionError("domination failed: omega black above a threshold")
    post_tau_in_c = (
        state.tau is not None
        and state.hit is False
        and bool(state.c_mask & bit)
    )
    if post_tau_in_c:
        dev = abs(thr_m - thr_n)
        if dev > state.max_c_threshold_dev:
            state.max_c_threshold_dev = dev
    state.order.append(i)
    state.revealed |= bit
    state.revealed_n |= 1 << j
    if black:
        state.omega |= bit
    if black_m:
        state.omega_m |= bit
    if black_n:
        state.omega_n |= 1 << j
    state.trace.append(
        {
            "step": state.steps,
            "site": state.cm.ball.site(i),
            "u": u,
            "thr_m": thr_m,
            "thr_n": thr_n,
            "omega": int(black),
            "omega_m": int(black_m),
            "omega_n": int(black_n),
        }
    )
    state.frontier = cn.frontier_mask(state.cm, state.revealed, state.omega)
    if state.tau is None:
        if not state.frontier:
            state.tau = state.steps
            state.x_tau_mask = state.revealed
            state.hit = bool(state.revealed & state.lambda_k_mask)
            if not state.hit:
                state.c_mask = cn.component_of_origin(
                    state.cm, state.cm.full_mask & ~state.revealed
                )
    elif state.frontier:
        raise CircuitInvariantViolation("frontier reappeared after tau")
    return state


def extract_circuit(state, k=None):
    """The black boundary of the unrevealed origin component at tau.

    Verifies every property the construction promises: the boundary is a
    circuit whose interior is exactly that component, it contains Ball(k),
    and the boundary is black in all three configurations.
    """
    if k is None:
        k = state.k
    if state.tau is None:
        raise CircuitInvariantViolation("tau not reached")
    if state.x_tau_mask & state.cm.within_mask(k):
        raise CircuitInvariantViolation("exploration entered Ball(k) before tau")
    c_mask = state.c_mask
    if not c_mask:
        raise CircuitInvariantViolation("origin already revealed at tau")
    if c_mask & state.cm.ring_mask(state.m):
        raise CircuitInvariantViolation("origin component reaches the outer ring")
    gamma_mask = cn.spread(state.cm, c_mask) & ~c_mask
    if gamma_mask & ~state.x_tau_mask:
        raise CircuitInvariantViolation("boundary site unrevealed at tau")
    if gamma_mask & ~state.omega:
        raise CircuitInvariantViolation("boundary site white in omega")
    if gamma_mask & ~state.omega_m:
        raise CircuitInvariantViolation("boundary site white in omega_m")
    for i in state.cm.mask_sites(gamma_mask):
        if not state.omega_n & (1 << state.cn_.ball.index(i)):
            raise CircuitInvariantViolation("boundary site white in omega_n")
    gamma_sites = frozenset(state.cm.mask_sites(gamma_mask))
    try:
        circuit = verify_circuit(gamma_sites, state.m + 2)
    except lattice.NotACircuit as exc:
        raise CircuitInvariantViolation(f"not a circuit: {exc}") from exc
    c_sites = frozenset(state.cm.mask_sites(c_mask))
    if circuit.interior != c_sites:
        raise CircuitInvariantViolation("interior differs from origin component")
    if not circuit.circles_around(lattice.ball(k).sites):
        raise CircuitInvariantViolation("circuit does not circle Ball(k)")
    return circuit


@dataclass
class CouplingOutcome:
    k: int
    m: int
    n: int
    p: float
    seed: int
    replica: int
    tau: int
    hit: bool
    dual: bool
    agree: bool
    gamma: Circuit | None
    approximate: bool
    max_c_threshold_dev: float
    omega: PartialConfig
    omega_m: PartialConfig
    omega_n: PartialConfig
    trace: list | None = None

    def trace_jsonl(self):
        return "\n".join(json.dumps(t) for t in self.trace or [])


def run_coupling(k, m, n, field, backend, p=0.5, keep_trace=False):
    """Run the exploration to exhaustion of Ball(m) and report the verdicts.

    ``hit`` is whether the exploration touched Ball(k) before the frontier
    died; ``dual`` is the white-arm event of the unbiased configuration,
    equal to ``hit`` on every run; ``agree`` is whether the two conditioned
    configurations coincide on Ball(k); ``gamma`` is the verified separating
    circuit on non-hit runs.
    """
    state = ExplorationState(k, m, n, field, p=p)
    total = state.cm.ball.n_sites
    for _ in range(total):
        reveal_step(state, backend)
    omega_cfg = state.config_omega()
    dual = cn.dual_arm(omega_cfg, k, m)
    gamma = None
    if not state.hit:
        gamma = extract_circuit(state)
        if backend.mode == "exact" and state.max_c_threshold_dev > 1e-12:
            raise AssertionError(
                "conditioned thresholds diverged inside the enclosed component: "
                f"{state.max_c_threshold_dev}"
            )
    agree = True
    for i in range(total):
        if state.cm.ball.dist[i] <= k:
            a = bool(state.omega_m & (1 << i))
            b = bool(state.omega_n & (1 << state.embed[i]))
            if a != b:
                agree = False
                break
    return CouplingOutcome(
        k=k,
        m=m,
        n=n,
        p=p,
        seed=field.seed,
        replica=field.replica,
        tau=state.tau,
        hit=state.hit,
        dual=dual,
        agree=agree,
        gamma=gamma,
        approximate=backend.mode == "mc",
        max_c_threshold_dev=state.max_c_threshold_dev,
        omega=omega_cfg,
        omega_m=state.config_omega_m(),
        omega_n=state.config_omega_n(),
        trace=state.trace if keep_trace else None,
    )
