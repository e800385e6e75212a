"""Command-line harness: experiments, verification suites, replay.

Every command writes its results next to a manifest recording the exact
flags, seed and replica range that produced them; ``replay`` re-executes a
manifest and compares the regenerated files byte for byte. Result files
carry no timestamps, and all randomness is keyed by (seed, replica), so
exact-mode outputs and Monte-Carlo counters reproduce identically no
matter how many worker threads run.

Exit codes: 0 success, 1 verification/assertion failure, 2 capacity or
usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

from . import __version__, checks, estimator, oracle
from .coupling import UniformField, run_coupling
from .errors import CapacityExceeded, DegenerateFit, RetryLimitExceeded
from .oracle import OracleBackend

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


def _configure_workers():
    workers = os.environ.get("PERCOUPLE_WORKERS")
    if workers:
        import numba

        numba.set_num_threads(max(1, int(workers)))


@dataclass
class RunManifest:
    command: str
    flags: dict
    seed: int
    replica_range: list
    version: str
    timestamp: str

    def write(self, path):
        path = Path(path)
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")
        return path


def make_manifest(command, flags, seed, replicas):
    return RunManifest(
        command=command,
        flags=flags,
        seed=seed,
        replica_range=[0, replicas],
        version=__version__,
        timestamp=time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
    )


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)


def _write_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _outstem(args, name):
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    return outdir / name


def _emit(args, name, header, rows, command, flags, seed, replicas):
    stem = _outstem(args, name)
    if args.out == "json":
        result = stem.with_suffix(".json")
        _write_json(result, [dict(zip(header, r)) for r in rows])
    else:
        result = stem.with_suffix(".csv")
        _write_csv(result, header, rows)
    manifest = make_manifest(command, flags, seed, replicas)
    manifest.write(stem.with_suffix(".manifest.json"))
    return result


def _flags_of(args, names):
    return {k: getattr(args, k) for k in names}


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_verify(args):
    backend_mode = args.backend
    if args.n > 2 and backend_mode == "exact":
        raise CapacityExceeded(
            f"exact verification needs n <= 2, got n = {args.n}"
        )
    rows = []
    ok = True

    mk = checks.run_markov_suite(args.samples, args.seed, n=args.n, p=args.p)
    rows.append(
        ("markov-first-equality", mk.max_dev_first, mk.tol, mk.passed)
    )
    rows.append(
        ("markov-second-equality", mk.max_dev_second, mk.tol, mk.passed)
    )
    ok &= mk.passed

    law = checks.run_coupling_law_suite(
        1, args.n, args.law_replicas, args.seed + 1, p=args.p, tol=args.law_tol
    )
    rows.append(("coupling-law-omega", law.tv_omega, law.tol, law.tv_omega <= law.tol))
    rows.append(("coupling-law-omega-m", law.tv_omega_m, law.tol, law.tv_omega_m <= law.tol))
    rows.append(("coupling-law-omega-n", law.tv_omega_n, law.tol, law.tv_omega_n <= law.tol))
    rows.append(("coupling-domination", law.domination_violations, 0, law.domination_violations == 0))
    ok &= law.passed

    ps = checks.run_proofstep_suite(
        0, 1, args.n, args.proof_replicas, args.seed + 2, p=args.p
    )
    rows.append(("hit-iff-dual", ps.hit_dual_mismatches, 0, ps.hit_dual_mismatches == 0))
    rows.append(("nonhit-implies-agree", ps.agree_violations, 0, ps.agree_violations == 0))
    rows.append(("circuit-extraction", ps.circuit_failures, 0, ps.circuit_failures == 0))
    rows.append(
        ("interior-threshold-match", ps.max_c_threshold_dev, 1e-12,
         ps.max_c_threshold_dev <= 1e-12)
    )
    ok &= ps.passed and ps.max_c_threshold_dev <= 1e-12

    fkg = oracle.fkg_report()
    margin = fkg["min_margin"]
    rows.append(("fkg-lower-bound", fkg["checks"], "all >= p", margin >= -1e-15))
    ok &= margin >= -1e-15

    header = ("suite", "observed", "budget", "passed")
    for r in rows:
        print(f"{r[0]:32s} observed={r[1]!s:>12s} budget={r[2]!s:>10s} "
              f"{'PASS' if r[3] else 'FAIL'}")
    _emit(
        args, "verify", header, rows, "verify",
        _flags_of(args, ("n", "p", "samples", "law_replicas", "proof_replicas",
                         "backend", "out")),
        args.seed, max(args.samples, args.law_replicas, args.proof_replicas),
    )
    return EXIT_OK if ok else EXIT_FAIL


def cmd_couple(args):
    backend = OracleBackend(mode=args.backend)
    header = ("k", "m", "n", "p", "backend", "replicas", "hits", "duals",
              "mismatches", "nonhit", "agree_violations", "circuit_failures",
              "hit_rate", "agree_rate")
    trace_path = None
    traces = []
    rep = checks.ProofStepReport(
        k=args.k, m=args.m, n=args.n, replicas=args.replicas,
        backend_mode=backend.mode,
    )
    agree_count = 0
    for r in range(args.replicas):
        out = run_coupling(
            args.k, args.m, args.n, UniformField(args.seed, r), backend,
            p=args.p, keep_trace=args.trace,
        )
        rep.hits += out.hit
        rep.duals += out.dual
        agree_count += out.agree
        if out.hit != out.dual:
            rep.hit_dual_mismatches += 1
            rep.failed_replicas.append(r)
        if not out.hit:
            rep.nonhit += 1
            if not out.agree:
                rep.agree_violations += 1
                if backend.mode == "exact":
                    rep.failed_replicas.append(r)
        if args.trace:
            traces.append((r, out.trace, {
                "omega": out.omega.to_string(),
                "omega_m": out.omega_m.to_string(),
                "omega_n": out.omega_n.to_string(),
            }))
    rows = [
        (
            args.k, args.m, args.n, args.p, backend.mode, args.replicas,
            rep.hits, rep.duals, rep.hit_dual_mismatches, rep.nonhit,
            rep.agree_violations, rep.circuit_failures,
            rep.hits / args.replicas if args.replicas else "",
            agree_count / args.replicas if args.replicas else "",
        )
    ]
    result = _emit(
        args, "couple", header, rows, "couple",
        _flags_of(args, ("k", "m", "n", "p", "replicas", "backend", "out", "trace")),
        args.seed, args.replicas,
    )
    if args.trace:
        trace_path = result.with_suffix(".trace.jsonl")
        with open(trace_path, "w") as f:
            for r, tr, final in traces:
                for entry in tr:
                    f.write(json.dumps({"replica": r, **entry}) + "\n")
                f.write(json.dumps({"replica": r, "final": final}) + "\n")
    if rep.hit_dual_mismatches or (
        backend.mode == "exact" and rep.agree_violations
    ):
        print(f"assertion failures in replicas: {rep.failed_replicas[:20]}")
        print(f"manifest: seed={args.seed} command=couple "
              f"k={args.k} m={args.m} n={args.n}")
        return EXIT_FAIL
    return EXIT_OK


def cmd_tv(args):
    if args.mode == "exact":
        report = estimator.exact_tv(
            args.k, args.m, args.n, p=args.p, region_mode=args.region
        )
    else:
        report = estimator.empirical_tv(
            args.k, args.m, args.n, args.samples, args.seed, p=args.p,
            region_mode=args.region,
        )
    header = ("k", "m", "n", "mode", "tv", "bound", "trials", "ci")
    rows = [(report.k, report.m, report.n, report.mode, report.tv,
             report.bound, report.samples, report.bound_ci)]
    _emit(
        args, "tv", header, rows, "tv",
        _flags_of(args, ("k", "m", "n", "p", "mode", "region", "samples", "out")),
        args.seed, args.samples,
    )
    print(f"tv={report.tv:.6g} bound={report.bound:.6g} mode={report.mode}")
    if report.mode == "exact" and report.tv > report.bound + 1e-12:
        return EXIT_FAIL
    return EXIT_OK


def cmd_arm(args):
    stats = estimator.estimate_arm(
        args.kind, args.k, args.m, args.trials, args.seed, p=args.p
    )
    header = ("kind", "k", "m", "p", "trials", "hits", "p_hat", "ci")
    rows = [(stats.kind, stats.k, stats.m, stats.p, stats.trials, stats.hits,
             stats.p_hat, stats.ci_halfwidth)]
    _emit(
        args, "arm", header, rows, "arm",
        _flags_of(args, ("kind", "k", "m", "p", "trials", "out")),
        args.seed, args.trials,
    )
    print(f"p_hat={stats.p_hat:.6g} +- {stats.ci_halfwidth:.2g} "
          f"({stats.hits}/{stats.trials})")
    return EXIT_OK


def cmd_exponent(args):
    fit, stats = estimator.fit_exponent(
        args.k, args.m_list, args.trials, args.seed, p=args.p
    )
    header = ("k", "m", "p", "trials", "hits", "p_hat", "ci",
              "exponent", "stderr")
    rows = [
        (s.k, s.m, s.p, s.trials, s.hits, s.p_hat, s.ci_halfwidth, "", "")
        for s in stats
    ]
    rows.append((args.k, "", args.p, args.trials, "", "", "",
                 fit.exponent, fit.stderr))
    _emit(
        args, "exponent", header, rows, "exponent",
        _flags_of(args, ("k", "m_list", "p", "trials", "out")),
        args.seed, args.trials * len(args.m_list),
    )
    print(f"exponent={fit.exponent:.4f} +- {fit.stderr:.4f} "
          f"(reference 5/48 = {5/48:.4f})")
    return EXIT_OK


def cmd_replay(args):
    manifest = json.loads(Path(args.manifest).read_text())
    command = manifest["command"]
    flags = manifest["flags"]
    argv = [command]
    for key, val in flags.items():
        if val is None:
            continue
        flag = "--" + key.replace("_", "-")
        if isinstance(val, bool):
            if val:
                argv.append(flag)
        elif isinstance(val, list):
            argv.append(flag)
            argv.extend(str(v) for v in val)
        else:
            argv.extend([flag, str(val)])
    argv.extend(["--seed", str(manifest["seed"])])
    stem = Path(args.manifest)
    original_dir = stem.parent
    replay_dir = Path(args.outdir) if args.outdir else original_dir / "replay"
    argv.extend(["--outdir", str(replay_dir)])
    code = main(argv)
    if code != EXIT_OK:
        return code
    name = stem.name.replace(".manifest.json", "")
    mismatched = []
    for suffix in (".csv", ".json", ".trace.jsonl"):
        a = original_dir / (name + suffix)
        b = replay_dir / (name + suffix)
        if a.exists():
            if not b.exists() or a.read_bytes() != b.read_bytes():
                mismatched.append(str(a))
    if mismatched:
        print(f"replay mismatch: {mismatched}")
        return EXIT_FAIL
    print("replay reproduced all result files byte-identically")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_common(sp, *, seed=True):
    sp.add_argument("--p", type=float, default=0.5)
    if seed:
        sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", choices=("csv", "json"), default="csv")
    sp.add_argument("--outdir", type=str, default="results")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="percouple",
        description="site-by-site coupling experiments for critical percolation",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("verify", help="run the exact lemma and proof-step suites")
    sp.add_argument("--n", type=int, default=2)
    sp.add_argument("--samples", type=int, default=100,
                    help="sampled (circuit, revealed-set) triples")
    sp.add_argument("--law-replicas", type=int, default=20_000)
    sp.add_argument("--law-tol", type=float, default=0.03)
    sp.add_argument("--proof-replicas", type=int, default=2_000)
    sp.add_argument("--backend", choices=("exact", "mc"), default="exact")
    _add_common(sp)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("couple", help="run coupled explorations")
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--replicas", type=int, default=1000)
    sp.add_argument("--backend", choices=("exact", "mc"), default="exact")
    sp.add_argument("--trace", action="store_true",
                    help="write per-step JSONL traces")
    _add_common(sp)
    sp.set_defaults(func=cmd_couple)

    sp = sub.add_parser("tv", help="total variation between conditioned marginals")
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--mode", choices=("exact", "empirical"), default="exact")
    sp.add_argument("--region", choices=("ball", "ring1"), default="ball")
    sp.add_argument("--samples", type=int, default=100_000)
    _add_common(sp)
    sp.set_defaults(func=cmd_tv)

    sp = sub.add_parser("arm", help="arm-probability Monte Carlo")
    sp.add_argument("--kind", choices=("black", "white"), default="white")
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--trials", type=int, default=100_000)
    _add_common(sp)
    sp.set_defaults(func=cmd_arm)

    sp = sub.add_parser("exponent", help="fit the white-arm decay exponent")
    sp.add_argument("--k", type=int, default=1)
    sp.add_argument("--m-list", type=int, nargs="+",
                    default=[8, 16, 32, 64, 128, 256, 512])
    sp.add_argument("--trials", type=int, default=100_000)
    _add_common(sp)
    sp.set_defaults(func=cmd_exponent)

    sp = sub.add_parser("replay", help="re-run a manifest and compare bytes")
    sp.add_argument("manifest", type=str)
    sp.add_argument("--outdir", type=str, default=None)
    sp.set_defaults(func=cmd_replay)

    return ap


def main(argv=None):
    _configure_workers()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CapacityExceeded, RetryLimitExceeded, DegenerateFit, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AssertionError as exc:
        print(f"assertion failure: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
