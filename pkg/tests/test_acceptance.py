"""Acceptance suite: one test per criterion, at the stated sizes.

Each test prints a single PASS line with its headline numbers so the run
log doubles as the acceptance report. Statistical sizes (replica and
sample counts) and tolerances are pinned here and nowhere else.
"""

import os
import subprocess
import sys
import time

import numpy as np
import pytest

from percouple import checks, estimator, lattice, oracle
from percouple.cli import main as cli_main
from percouple.oracle import OracleBackend

EXACT = OracleBackend(mode="exact")


def report(num, name, detail):
    print(f"\nACCEPTANCE {num} {name}: PASS — {detail}")


def test_acceptance_1_markov_lemma_exact():
    t0 = time.time()
    rep = checks.run_markov_suite(triples=500, seed=1001, n=2)
    elapsed = time.time() - t0
    assert rep.triples == 500
    assert rep.max_dev_first <= 1e-12, rep.max_dev_first
    assert rep.max_dev_second <= 1e-12, rep.max_dev_second
    assert elapsed < 600, f"budget 10 min exceeded: {elapsed:.0f}s"
    report(
        1, "spatial-Markov lemma",
        f"500 triples, max deviations {rep.max_dev_first:.2e} / "
        f"{rep.max_dev_second:.2e}, {elapsed:.0f}s",
    )


def test_acceptance_2_coupling_law_and_domination():
    t0 = time.time()
    rep = checks.run_coupling_law_suite(
        m=1, n=2, replicas=1_000_000, seed=1002, tol=0.005
    )
    elapsed = time.time() - t0
    assert rep.domination_violations == 0
    assert rep.tv_omega_n <= 0.005, rep.tv_omega_n
    assert rep.tv_omega_m <= 0.005, rep.tv_omega_m
    assert rep.tv_omega <= 0.005, rep.tv_omega
    assert elapsed < 1800, f"budget 30 min exceeded: {elapsed:.0f}s"
    report(
        2, "coupled laws + domination",
        f"1e6 replicas, TV(omega_n)={rep.tv_omega_n:.4f}, "
        f"TV(omega_m)={rep.tv_omega_m:.4f}, TV(omega)={rep.tv_omega:.4f}, "
        f"0 domination violations, {elapsed:.0f}s",
    )


@pytest.mark.parametrize("kmn", [(0, 1, 2), (0, 2, 2), (1, 2, 2)])
def test_acceptance_3_proof_step_reproduction(kmn):
    k, m, n = kmn
    rep = checks.run_proofstep_suite(k, m, n, replicas=100_000,
                                     seed=1003 + k + 10 * m, p=0.5)
    assert rep.hit_dual_mismatches == 0
    assert rep.agree_violations == 0
    assert rep.circuit_failures == 0
    assert rep.max_c_threshold_dev <= 1e-12
    report(
        3, f"proof steps {kmn}",
        f"1e5 replicas, hit rate {rep.hits / rep.replicas:.4f}, "
        f"{rep.nonhit} non-hit runs all with verified black circuits, "
        f"0 violations",
    )


def test_acceptance_4_exact_tv_bound_exhaustive():
    t0 = time.time()
    strict = 0
    lines = []
    for k in range(3):
        for m in range(k, 3):
            for n in range(m, 3):
                r = estimator.exact_tv(k, m, n)
                assert r.tv <= r.bound + 1e-12, (k, m, n)
                if r.tv > 0:
                    strict += 1
                lines.append(f"({k},{m},{n}): tv={r.tv:.6f} <= {r.bound:.6f}")
    elapsed = time.time() - t0
    assert strict >= 1, "expected at least one strictly positive TV"
    assert elapsed < 1200, f"budget 20 min exceeded: {elapsed:.0f}s"
    report(4, "exact TV bound", f"{len(lines)} triples, {strict} strictly "
           f"positive, {elapsed:.0f}s")


def test_acceptance_5_statistical_tv_bound():
    r = estimator.empirical_tv(1, 2, 3, samples=1_000_000, seed=1005)
    sigma = r.bound_ci / 1.96
    assert r.tv <= r.bound + 3 * sigma, (r.tv, r.bound, sigma)
    report(
        5, "statistical TV bound",
        f"(1,2,3) at 1e6 samples/measure: tv={r.tv:.5f} <= "
        f"bound={r.bound:.5f} + 3s={3 * sigma:.1e}",
    )


def test_acceptance_6_fkg_threshold_invariant():
    # exercise fresh exact queries on top of everything already run
    rng = np.random.default_rng(1006)
    from percouple.configuration import PartialConfig
    from percouple.errors import IncompatibleConditioning

    b = lattice.ball(2)
    for _ in range(500):
        states = rng.choice([0, 1, 2], size=b.n_sites).astype(np.uint8)
        free = [i for i in range(b.n_sites) if states[i] == 2]
        if not free:
            continue
        q = oracle.CondQuery(
            target=b.site(int(rng.choice(free))),
            revealed=PartialConfig(b, states),
            arm_radius=2,
            p=float(rng.choice([0.3, 0.5, 0.8])),
        )
        try:
            r = oracle.cond_prob(q, EXACT)
        except IncompatibleConditioning:
            continue
        assert r.value >= q.p
    fkg = oracle.fkg_report()
    assert fkg["checks"] > 0
    assert fkg["min_margin"] >= 0.0
    report(
        6, "FKG threshold invariant",
        f"{fkg['checks']} exact conditional queries this session, "
        f"worst margin {fkg['min_margin']:.3e} >= 0",
    )


def test_acceptance_7_one_arm_exponent():
    t0 = time.time()
    fit, stats = estimator.fit_exponent(
        1, [8, 16, 32, 64, 128, 256, 512], trials=100_000, seed=1007
    )
    elapsed = time.time() - t0
    assert 0.07 <= fit.exponent <= 0.15, fit.exponent
    assert elapsed < 1800, f"budget 30 min exceeded: {elapsed:.0f}s"
    phat_str = ", ".join(f"{s.m}:{s.p_hat:.4f}" for s in stats)
    report(
        7, "one-arm exponent",
        f"exponent {fit.exponent:.4f} +- {fit.stderr:.4f} in [0.07, 0.15] "
        f"(5/48 = {5/48:.4f}); p_hat by scale {{{phat_str}}}; {elapsed:.0f}s",
    )


def test_acceptance_8_reproducibility(tmp_path):
    # manifest replay: exact couple and MC counters, byte-identical
    for cmd in (
        ["couple", "--k", "0", "--m", "1", "--n", "2", "--replicas", "2000",
         "--seed", "42"],
        ["arm", "--kind", "white", "--k", "1", "--m", "32",
         "--trials", "50000", "--seed", "43"],
        ["tv", "--k", "0", "--m", "1", "--n", "2", "--mode", "empirical",
         "--samples", "50000", "--seed", "44"],
    ):
        out = tmp_path / cmd[0]
        assert cli_main(cmd + ["--outdir", str(out)]) == 0
        assert cli_main(["replay", str(out / f"{cmd[0]}.manifest.json")]) == 0
    # worker count must not change any bytes
    script = (
        "from percouple.cli import main;"
        "main(['exponent','--k','1','--m-list','8','16','32','64',"
        "'--trials','5000','--seed','45','--outdir',r'{out}'])"
    )
    payloads = []
    for workers in ("1", "2"):
        out = tmp_path / f"workers{workers}"
        env = dict(os.environ, PERCOUPLE_WORKERS=workers)
        subprocess.run([sys.executable, "-c", script.format(out=out)],
                       check=True, env=env)
        payloads.append((out / "exponent.csv").read_bytes())
    assert payloads[0] == payloads[1]
    report(
        8, "reproducibility",
        "3 manifests replayed byte-identically; exponent CSV identical "
        "under 1 vs 2 workers",
    )
