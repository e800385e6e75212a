import json

import numpy as np
import pytest

from percouple import lattice
from percouple import _kernels as K
from percouple.configuration import BLACK, WHITE
from percouple.coupling import (
    ExplorationState,
    UniformField,
    extract_circuit,
    next_site,
    reveal_step,
    run_coupling,
)
from percouple.errors import Exhausted
from percouple.oracle import OracleBackend

EXACT = OracleBackend(mode="exact")


class FixedField:
    """Uniform field stub with one constant value at every site."""

    def __init__(self, value, seed=0, replica=0):
        self.value = value
        self.seed = seed
        self.replica = replica

    def u(self, idx):
        return self.value


def test_uniform_field_contract():
    f = UniformField(123, 456)
    vals = [f.u(i) for i in range(100)]
    assert all(0.0 <= v < 1.0 for v in vals)
    assert vals == [UniformField(123, 456).u(i) for i in range(100)]
    assert vals != [UniformField(123, 457).u(i) for i in range(100)]
    # python twin and numba kernel agree bit for bit
    for i in (0, 1, 17, 99):
        assert f.u(i) == float(K.uniform_at(123, 456, i))
    # vectorized block equals the scalar path
    assert np.array_equal(f.block(20), np.array([f.u(i) for i in range(20)]))


def test_next_site_starts_on_outer_ring():
    st = ExplorationState(0, 2, 2, UniformField(1, 0))
    first = next_site(st)
    ring2 = [st.cm.ball.index(s) for s in lattice.ring_sites(2)]
    assert first == min(ring2)


def test_next_site_after_black_ring():
    # all-black outer ring empties the frontier; next is the canonically
    # smallest unrevealed site of the inner ball
    st = ExplorationState(0, 1, 1, FixedField(0.1))  # every reveal is black
    for _ in range(6):
        reveal_step(st, EXACT)
    assert st.tau == 6
    assert st.frontier == 0
    inner = next_site(st)
    assert st.cm.ball.site(inner) == (0, 0)
    reveal_step(st, EXACT)
    with pytest.raises(Exhausted):
        next_site(st)


def test_exploration_replay_determinism():
    for rep in range(50):
        a = run_coupling(0, 2, 2, UniformField(9, rep), EXACT, keep_trace=True)
        b = run_coupling(0, 2, 2, UniformField(9, rep), EXACT, keep_trace=True)
        assert [t["site"] for t in a.trace] == [t["site"] for t in b.trace]
        assert a.trace == b.trace


def test_reveal_step_threshold_ordering():
    # u <= p forces black in all three configurations (thresholds >= p)
    st = ExplorationState(0, 1, 2, FixedField(0.49))
    for _ in range(7):
        reveal_step(st, EXACT)
    assert st.omega == st.cm.full_mask
    assert st.omega_m == st.cm.full_mask
    for t in st.trace:
        assert t["thr_m"] >= 0.5 and t["thr_n"] >= 0.5


def test_reveal_step_high_uniform_gives_white():
    st = ExplorationState(0, 1, 2, FixedField(0.999))
    reveal_step(st, EXACT)
    t = st.trace[0]
    assert t["omega"] == 0
    assert t["omega_n"] == (0.999 <= t["thr_n"])


def test_all_black_run_circuit_is_outer_ring():
    # hand-traceable run: every uniform low, so every reveal is black; the
    # frontier dies exactly when ring m is exhausted and the extracted
    # circuit is ring m with interior Ball(m-1)
    m = 2
    st = ExplorationState(0, m, m, FixedField(0.2))
    ring_m = set(lattice.ring_sites(m))
    for i in range(len(ring_m)):
        reveal_step(st, EXACT)
        assert st.cm.ball.site(st.order[i]) in ring_m
    assert st.tau == len(ring_m)
    for _ in range(st.cm.ball.n_sites - len(ring_m)):
        reveal_step(st, EXACT)
    circuit = extract_circuit(st, 0)
    assert circuit.sites == frozenset(ring_m)
    assert circuit.interior == frozenset(lattice.ball(m - 1).sites)


def test_run_coupling_hit_iff_dual_and_gamma_properties():
    hits = 0
    for rep in range(300):
        out = run_coupling(0, 2, 2, UniformField(31, rep), EXACT)
        assert out.hit == out.dual
        hits += out.hit
        if not out.hit:
            g = out.gamma
            assert g is not None
            assert g.circles_around(lattice.ball(0).sites)
            for cfg in (out.omega, out.omega_m, out.omega_n):
                assert all(cfg.state_at(s) == BLACK for s in g.sites)
        else:
            assert out.gamma is None
    assert 0 < hits < 300


def test_run_coupling_domination_every_site():
    for rep in range(200):
        out = run_coupling(0, 1, 2, UniformField(41, rep), EXACT)
        o, om, on = out.omega.states, out.omega_m.states, out.omega_n.states
        assert not np.any((o == BLACK) & (om == WHITE))
        assert not np.any((o == BLACK) & (on == WHITE))


def test_run_coupling_m_equals_n_agrees_everywhere():
    for rep in range(100):
        out = run_coupling(1, 2, 2, UniformField(51, rep), EXACT)
        assert out.omega_m == out.omega_n  # identical thresholds and uniforms
        assert out.agree


def test_run_coupling_exact_nonhit_agree():
    for rep in range(400):
        out = run_coupling(0, 1, 2, UniformField(61, rep), EXACT)
        if not out.hit:
            assert out.agree
            assert out.max_c_threshold_dev <= 1e-12


def test_hit_rate_matches_exact_dual_probability():
    from percouple.oracle import exact_dual_arm_prob

    n_rep = 4000
    hits = sum(
        run_coupling(0, 1, 1, UniformField(71, rep), EXACT).hit
        for rep in range(n_rep)
    )
    p = exact_dual_arm_prob(0, 1)
    sigma = np.sqrt(p * (1 - p) / n_rep)
    assert abs(hits / n_rep - p) <= 4 * sigma


def test_mc_backend_flags_and_violation_reporting():
    be = OracleBackend(mode="mc", mc_tolerance=5e-3, mc_max_samples=20_000)
    agree_viol = 0
    for rep in range(40):
        out = run_coupling(1, 2, 3, UniformField(81, rep), be)
        assert out.approximate
        assert out.hit == out.dual  # event equality holds for any backend
        if not out.hit and not out.agree:
            agree_viol += 1
    # approximate runs may disagree with small probability; just report
    assert agree_viol <= 40


def test_trace_jsonl_schema():
    out = run_coupling(0, 1, 2, UniformField(91, 3), EXACT, keep_trace=True)
    lines = out.trace_jsonl().splitlines()
    assert len(lines) == 7
    for line in lines:
        entry = json.loads(line)
        assert set(entry) == {"step", "site", "u", "thr_m", "thr_n",
                              "omega", "omega_m", "omega_n"}
    steps = [json.loads(l)["step"] for l in lines]
    assert steps == list(range(1, 8))


def test_exploration_order_is_injective_and_complete():
    st = ExplorationState(0, 2, 3, UniformField(101, 0))
    be = OracleBackend(mode="mc", mc_max_samples=5000)
    seen = set()
    for _ in range(st.cm.ball.n_sites):
        i = next_site(st)
        assert i not in seen
        seen.add(i)
        reveal_step(st, be)
    assert len(seen) == st.cm.ball.n_sites
