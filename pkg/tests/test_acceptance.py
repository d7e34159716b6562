"""Acceptance suite: one test per criterion, pinned tolerances, seed fixed at 0.

Every test prints a ``PASS``/``FAIL`` line.  Run with ``pytest -s`` to see
them, or ``pytest -m acceptance``.
"""
import time

import numpy as np
import pytest

from laprmt import cli, dynamics, experiments, locallaw
from laprmt import ensemble as en
from laprmt.config import RunConfig, validate_config
from laprmt.domain import build_domain

pytestmark = pytest.mark.acceptance

SEED = 0  # fixed before any run; never tuned

IDENTITY_TOL = 1e-9
RESIDUAL_TOL = 1e-12
MASS_TOL = 1e-6
SECOND_MOMENT_TOL = 1e-4
COV_Z = 5.0
KS_EIG = 0.02
LOCAL_FRACTION = 0.95
RIGIDITY_MAX = 10.0
DELOC_MAX = 10.0
FD_TOL = {1: 1e-5, 2: 1e-4, 3: 1e-4}


def verdict(k: int, ok: bool, detail: str, elapsed: float, limit: float | None = None) -> bool:
    if limit is not None and elapsed >= limit:
        detail += f"; runtime {elapsed:.1f}s exceeds {limit:.0f}s"
        ok = False
    print(f"\n{'PASS' if ok else 'FAIL'} criterion {k}: {detail} ({elapsed:.1f}s)")
    return ok


def _cfg(experiment: str, **kw) -> RunConfig:
    return validate_config("", {"experiment": experiment, "seed": SEED, **kw})


def _run(experiment: str, **kw):
    t0 = time.perf_counter()
    rep, _, _ = experiments.run(_cfg(experiment, **kw))
    return rep, time.perf_counter() - t0


def _value(rep, prefix: str) -> float:
    return next(c.value for c in rep.checks if c.name.startswith(prefix))


def test_criterion_01_identities():
    rep, dt = _run("identities", n=200, trials=50)
    worst = max(c.value for c in rep.checks)
    names = sorted(c.name.split()[1] for c in rep.checks)
    ok = rep.passed and worst < IDENTITY_TOL and {"ward", "schur", "minor", "row", "tilde", "rank_one"} <= set(names)
    assert verdict(1, ok, f"worst relative defect {worst:.2e} < {IDENTITY_TOL:g} over 50 instances", dt, 60)


def test_criterion_02_free_convolution():
    rep, dt = _run("density", n=1000, L=5.0, nu=0.1)
    res = _value(rep, "max residual over all of D_L")
    mass = rep.stats["mass"]
    second = rep.stats["second_moment"]
    ok = rep.passed and res < RESIDUAL_TOL and abs(mass - 1) <= MASS_TOL and abs(second - 2) <= SECOND_MOMENT_TOL
    detail = (f"residual {res:.1e}, |mass-1| {abs(mass - 1):.1e}, |m2-2| {abs(second - 2):.1e}; "
              + ", ".join(f"{c.name}={c.value:.3g}" for c in rep.checks if c.acceptance))
    assert verdict(2, ok, detail, dt, 60)


def test_criterion_03_decomposition():
    rep, dt = _run("decompose", n=100, trials=500, cov_n=5, cov_samples=200000)
    zw = _value(rep, "max |cov W")
    zp = _value(rep, "max |cov R*WR")
    ks = rep.stats["ks"]
    ok = rep.passed and zp <= COV_Z and zw <= COV_Z and ks < KS_EIG
    assert verdict(3, ok, f"covariance z {zw:.2f} / {zp:.2f} <= {COV_Z}, KS {ks:.4f} < {KS_EIG}", dt, 300)


def test_criterion_04_local_law():
    t0 = time.perf_counter()
    n = 1000
    dom = build_domain(5.0, n, 0.1)
    parts = []
    ok = True
    # q = sqrt(N) uses Gaussian entries: the Bernoulli law is the complete graph there
    cases = [("gaussian", 0.5), ("bernoulli", 0.35)]
    for law, qe in cases:
        spec = en.EnsembleSpec.from_exponent(n, qe, entry_law=law)
        rep = locallaw.locallaw_report(spec, dom, 10, SEED, entrywise_points=2)
        frac = rep.stats["D1_fraction_within_5_per_trial"]
        ok &= bool(frac.min() >= LOCAL_FRACTION)
        parts.append(f"{law} q=N^{qe}: min per-trial fraction {frac.min():.3f}")
    for law, qe in cases:
        med = [float(np.median(locallaw.sup_defect_d1(en.EnsembleSpec.from_exponent(m, qe, entry_law=law), 10, SEED)))
               for m in (250, 1000)]
        ok &= med[1] < med[0]
        parts.append(f"{law} median sup {med[0]:.4f} -> {med[1]:.4f}")
    assert verdict(4, ok, "; ".join(parts), time.perf_counter() - t0, 600)


def test_criterion_05_rigidity():
    rep, dt = _run("rigidity", n=1000, q_exp=0.35, kappa=0.1, trials=20)
    v = _value(rep, "max bulk")
    assert verdict(5, rep.passed and v <= RIGIDITY_MAX, f"normalized max {v:.3f} <= {RIGIDITY_MAX}", dt, 300)


def test_criterion_06_delocalization():
    rep, dt = _run("deloc", n=1000, q_exp=0.35, kappa=0.1, trials=20)
    v = _value(rep, "max bulk")
    assert verdict(6, rep.passed and v <= DELOC_MAX, f"normalized max {v:.3f} <= {DELOC_MAX}", dt, 300)


def test_criterion_07_gap_universality():
    rep, dt = _run("gaps", n=1000, q_exp=0.35, trials=200)
    ks = _value(rep, "KS Laplacian")
    self_ks = _value(rep, "KS GOE")
    thr = next(c.bound for c in rep.checks if c.name.startswith("KS Laplacian"))
    detail = f"KS {ks:.4f}, GOE self-test {self_ks:.4f}, threshold {thr:.4f} (null q95 {rep.stats['null_quantile']:.4f})"
    assert verdict(7, rep.passed, detail, dt, 1200)


def test_criterion_08_flow():
    rep, dt = _run("flow", n=100, epsilon=0.3, trials=500)
    ks = _value(rep, "pooled-eigenvalue KS")
    z = _value(rep, "entry variance z-score (Gaussian")
    ok = rep.passed and ks < KS_EIG and z <= 5.0
    assert verdict(8, ok, f"KS {ks:.4f} < {KS_EIG}, variance z {z:.2f} <= 5 over {rep.stats['entries']} entries",
                   dt, 300)


def test_criterion_09_derivatives():
    t0 = time.perf_counter()
    n = 100
    r = en.projection_basis(n)
    gen = np.random.default_rng(SEED)
    worst = {1: 0.0, 2: 0.0, 3: 0.0}
    for inst in range(20):
        h = en.sample_laplacian_type(en.EnsembleSpec.from_exponent(n, 0.35), inst + 1000 * SEED)
        i, j = sorted(gen.choice(n + 1, size=2, replace=False))
        z = complex(gen.uniform(-2, 2), 10 ** gen.uniform(-1, 0.5))
        for order in (1, 2, 3):
            exact = dynamics.trace_derivative(h, z, i, j, order, r)
            fd = dynamics.trace_derivative_fd(h, z, i, j, order, r=r)
            worst[order] = max(worst[order], abs(exact - fd) / abs(exact))
    ok = all(worst[o] < FD_TOL[o] for o in worst)
    detail = ", ".join(f"r={o}: {worst[o]:.1e} < {FD_TOL[o]:g}" for o in worst)
    assert verdict(9, ok, detail, time.perf_counter() - t0, 60)


def test_criterion_10_graph_sums():
    rep, dt = _run("graphsum", n=60, eta=0.5, graphs=50, trials=50)
    v = _value(rep, "max V / bound (C = max(2/c_*")
    mism = _value(rep, "singleton quotient")
    detail = (f"max V/bound {v:.3f} <= 1, quotient mismatches {mism:.0f}, "
              f"excluded {rep.stats['excluded']} of 50 resolvents")
    assert verdict(10, rep.passed, detail, dt, 300)


def test_criterion_11_level_repulsion():
    rep, dt = _run("repulsion", n=500, q_exp=0.4, tau=0.2, trials=2000)
    up = _value(rep, "95% upper bound")
    detail = f"{rep.stats['hits']} of 2000 gaps below N^(-1-tau); 95% upper bound {up:.4f} <= {rep.stats['bound']:.4f}"
    assert verdict(11, rep.passed, detail, dt, 900)


def test_criterion_12_determinism(tmp_path, capsys):
    t0 = time.perf_counter()
    ok = True
    parts = []
    for exp, extra in (("identities", []), ("rigidity", ["--n", "400", "--trials", "8"])):
        blobs = []
        for run, threads in enumerate(("1", "8", "1", "8")):
            out = tmp_path / f"{exp}-{run}"
            cli.main([exp, "--seed", str(SEED), "--threads", threads, "--out", str(out)] + extra)
            blobs.append((out / f"{exp}_summary.json").read_bytes())
        capsys.readouterr()  # drop the per-run tables
        same = all(b == blobs[0] for b in blobs)
        ok &= same
        parts.append(f"{exp}: {'identical' if same else 'differs'}")
    with capsys.disabled():
        ok = verdict(12, ok, "summary JSON across threads 1/8, repeated: " + ", ".join(parts), time.perf_counter() - t0)
    assert ok
