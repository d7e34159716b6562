"""Experiment runners behind the command line.  Each returns a report plus a
detail table (header, rows)."""
from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy import stats as _stats
from scipy.integrate import trapezoid

from . import dynamics, freeconv, locallaw, rng, universality
from .config import RunConfig
from .domain import build_domain
from .ensemble import (EnsembleSpec, entry_covariance_oracle, decompose_gaussian, projected_covariance_oracle,
                       projection_basis, sample_gaussian_laplacian, sample_laplacian_type)
from .parallel import map_trials
from .report import VerificationReport
from .spectra import identity_defects, projected_spectrum

Result = tuple[VerificationReport, list[str], list]
IDENTITY_ETAS = (1e-3, 0.1, 2.0)
IDENTITY_TOL = 1e-9


def model(cfg: RunConfig, n: int | None = None) -> EnsembleSpec:
    return EnsembleSpec.from_exponent(n or cfg.n, cfg.q_exp, entry_law=cfg.law, nu=cfg.nu)


def run_density(cfg: RunConfig) -> Result:
    tab = freeconv.free_convolution_table()
    rep = VerificationReport("density", seed=cfg.seed)
    e, rho = tab.energies, tab.density
    second = float(trapezoid(e * e * rho, e))
    reg = freeconv.regularity_report(cfg.L, cfg.n, cfg.nu)
    dom = build_domain(cfg.L, cfg.n, cfg.nu)
    _, res = freeconv.solve_mfc_full(dom.z)
    rep.stats.update(mass=tab.mass, second_moment=second, regularity=reg.stats, domain_points=len(dom))
    rep.checks.extend(reg.checks)
    rep.check("max residual over all of D_L", res.max(), 1e-12, "<")
    rep.check("|integral rho_fc - 1|", abs(tab.mass - 1.0), 1e-6)
    rep.check("|second moment - 2|", abs(second - 2.0), 1e-4)
    return rep, ["E", "rho_fc"], [(float(a), float(b)) for a, b in zip(e, rho)]


def run_locallaw(cfg: RunConfig) -> Result:
    spec = model(cfg)
    dom = build_domain(cfg.L, spec.n, spec.nu)
    rep = locallaw.locallaw_report(spec, dom, cfg.trials, cfg.seed, cfg.threads)
    rows = [(t, float(f), float(s)) for t, (f, s) in
            enumerate(zip(rep.stats.get("D1_fraction_within_5_per_trial", []),
                          rep.stats.get("D1_sup_defect_per_trial", [])))]
    return rep, ["trial", "d1_fraction_within_5", "d1_sup_defect"], rows


def _per_trial_rows(rep: VerificationReport) -> list:
    return [(t, float(v)) for t, v in enumerate(rep.stats.get("per_trial", []))]


def run_rigidity(cfg: RunConfig) -> Result:
    rep = locallaw.rigidity_report(model(cfg), cfg.kappa, cfg.trials, cfg.seed, cfg.threads)
    return rep, ["trial", "max_bulk_ratio"], _per_trial_rows(rep)


def run_deloc(cfg: RunConfig) -> Result:
    rep = locallaw.delocalization_report(model(cfg), cfg.kappa, cfg.trials, cfg.seed, cfg.threads)
    return rep, ["trial", "max_bulk_ratio"], _per_trial_rows(rep)


def identity_trial(spec: EnsembleSpec, seed: int, t: int, r) -> tuple[float, int, dict]:
    s = rng.derive_seed(seed, "trial", t)
    h = sample_laplacian_type(spec, s)
    gen = rng.stream(s, "index")
    eta = IDENTITY_ETAS[t % len(IDENTITY_ETAS)]
    z = complex(gen.uniform(-2.0, 2.0), eta)
    k = int(gen.integers(0, spec.size))
    return eta, k, identity_defects(h, z, k, r)


def run_identities(cfg: RunConfig) -> Result:
    spec = model(cfg)
    r = projection_basis(spec.n)
    res = map_trials(lambda t: identity_trial(spec, cfg.seed, t, r), cfg.trials, cfg.threads)
    names = sorted(res[0][2])
    rep = VerificationReport("identities", trials=cfg.trials, seed=cfg.seed)
    for name in names:
        rep.check(f"max {name} relative defect", max(x[2][name] for x in res), IDENTITY_TOL)
    rows = [(t, eta, k) + tuple(d[nm] for nm in names) for t, (eta, k, d) in enumerate(res)]
    return rep, ["trial", "eta", "k"] + names, rows


def gaussian_laplacian_batch(gen: np.random.Generator, n: int, count: int) -> np.ndarray:
    """(count, N+1, N+1) Gaussian Laplacians with off-diagonal variance 1/N."""
    size = n + 1
    iu = np.triu_indices(size, 1)
    w = np.zeros((count, size, size))
    w[:, iu[0], iu[1]] = gen.standard_normal((count, len(iu[0]))) / math.sqrt(n)
    w += w.transpose(0, 2, 1)
    w[:, np.arange(size), np.arange(size)] = -w.sum(axis=2)
    return w


def covariance_zscores(samples: np.ndarray, oracle: Callable[[int, int, int, int], float]) -> np.ndarray:
    """|empirical E[X_ab X_cd] - oracle| / standard error over upper-triangle pairs.

    The entries have mean zero, so second moments are the covariances.
    """
    m = samples.shape[1]
    iu = list(zip(*np.triu_indices(m)))
    flat = np.stack([samples[:, a, b] for a, b in iu], axis=1)
    count = flat.shape[0]
    out = []
    for p, (a, b) in enumerate(iu):
        for q in range(p, len(iu)):
            c, d = iu[q]
            prod = flat[:, p] * flat[:, q]
            se = prod.std(ddof=1) / math.sqrt(count)
            out.append(abs(prod.mean() - oracle(a, b, c, d)) / se)
    return np.array(out)


def run_decompose(cfg: RunConfig) -> Result:
    rep = VerificationReport("decompose", trials=cfg.trials, seed=cfg.seed)
    cn = cfg.cov_n
    rc = projection_basis(cn)
    gen = rng.stream(cfg.seed, "matrix")
    chunks_w, chunks_p = [], []
    left = cfg.cov_samples
    while left > 0:
        c = min(left, 20000)
        w = gaussian_laplacian_batch(gen, cn, c)
        chunks_w.append(w)
        chunks_p.append(np.einsum("ia,sij,jb->sab", rc.matrix, w, rc.matrix))
        left -= c
    w = np.concatenate(chunks_w)
    p = np.concatenate(chunks_p)
    zw = covariance_zscores(w, lambda a, b, c, d: entry_covariance_oracle(a, b, c, d, cn))
    zp = covariance_zscores(p, lambda a, b, c, d: projected_covariance_oracle(a, b, c, d, rc))
    rep.check("max |cov W - oracle| / SE", zw.max(), 5.0)
    rep.check("max |cov R*WR - oracle| / SE", zp.max(), 5.0)

    n = cfg.n
    r = projection_basis(n)

    def one(t):
        s = rng.derive_seed(cfg.seed, "trial", t)
        a = np.linalg.eigvalsh(r.conjugate(sample_gaussian_laplacian(n, s).matrix))
        b = np.linalg.eigvalsh(decompose_gaussian(n, rng.derive_seed(s, "reference"), r))
        return a, b

    res = map_trials(one, cfg.trials, cfg.threads)
    a = np.concatenate([x[0] for x in res])
    b = np.concatenate([x[1] for x in res])
    ks = universality.ks_distance(a, b)
    rep.stats.update(cov_samples=cfg.cov_samples, cov_n=cn, ks=ks)
    rep.check("pooled-eigenvalue KS R*WR vs GOE + R*DR + gI", ks, 0.02, "<")
    rows = [("z_cov_w_max", float(zw.max())), ("z_cov_projected_max", float(zp.max())), ("ks", ks)]
    return rep, ["quantity", "value"], rows


def variance_zscore(x: np.ndarray, target: float) -> float:
    """|sample second moment - target| / SE for mean-zero entries."""
    x2 = x * x
    return float(abs(x2.mean() - target) / (x2.std(ddof=1) / math.sqrt(x.size)))


def run_flow(cfg: RunConfig) -> Result:
    spec = model(cfg)
    n = spec.n
    t_flow = dynamics.FlowParams.from_epsilon(n, cfg.epsilon).t
    r = projection_basis(n)
    iu = np.triu_indices(n + 1, 1)

    def one(t):
        s = rng.derive_seed(cfg.seed, "trial", t)
        h = sample_laplacian_type(spec, s)
        ht = dynamics.evolve(h, t_flow, rng.derive_seed(s, "flow"))
        a = np.linalg.eigvalsh(r.conjugate(ht.matrix))
        _, hh = dynamics.hat_decomposition(h, t_flow, rng.derive_seed(s, "hat"), r)
        return a, np.linalg.eigvalsh(hh), ht.offdiag[iu]

    res = map_trials(one, cfg.trials, cfg.threads)
    a = np.concatenate([x[0] for x in res])
    b = np.concatenate([x[1] for x in res])
    rep = VerificationReport("flow", trials=cfg.trials, seed=cfg.seed)
    ks = universality.ks_distance(a, b)
    rep.check("pooled-eigenvalue KS evolve vs hat decomposition", ks, 0.02, "<")

    # entry variance with a Gaussian start, at least 1e5 pooled entries
    per = len(iu[0])
    reps = max(1, math.ceil(1e5 / per))
    ent = np.concatenate([dynamics.evolve(sample_gaussian_laplacian(n, rng.derive_seed(cfg.seed, "reference", j)),
                                          t_flow, rng.derive_seed(cfg.seed, "noise", j)).offdiag[iu]
                          for j in range(reps)])
    zvar = variance_zscore(ent, 1.0 / n)
    rep.check("entry variance z-score (Gaussian start)", zvar, 5.0)
    zvar_b = variance_zscore(np.concatenate([x[2] for x in res]), 1.0 / n)
    rep.check("entry variance z-score (model start)", zvar_b, 5.0, acceptance=False)
    for k in (1, 2):
        ma = np.array([np.mean(x[0] ** k) for x in res])
        mb = np.array([np.mean(x[1] ** k) for x in res])
        diff = ma - mb
        z = abs(diff.mean()) / (diff.std(ddof=1) / math.sqrt(len(diff)) + 1e-300)
        rep.check(f"spectral moment {k} z-score", z, 5.0, acceptance=False)
    rep.stats.update(t=t_flow, ks=ks, entries=int(ent.size))
    rows = [(t, float(np.mean(x[0] ** 2)), float(np.mean(x[1] ** 2))) for t, x in enumerate(res)]
    return rep, ["trial", "second_moment_evolve", "second_moment_hat"], rows


def run_gaps(cfg: RunConfig) -> Result:
    rep = universality.gap_universality_report(model(cfg), cfg.trials, cfg.seed, threads=cfg.threads)
    rows = [(k, v) for k, v in sorted(rep.stats.items()) if isinstance(v, float)]
    return rep, ["quantity", "value"], rows


def run_correlations(cfg: RunConfig) -> Result:
    spec = model(cfg)
    rep = VerificationReport("correlations", trials=cfg.trials, seed=cfg.seed)
    kw = dict(trials=cfg.trials, seed=cfg.seed, threads=cfg.threads, l=cfg.L)
    lap = universality.correlation_estimates(spec, cfg.e_center, cfg.half_width, (1, 2), **kw)
    goe2 = universality.correlation_estimate("goe", cfg.e_center, cfg.half_width, 2, n=spec.n, **kw)
    lap1, lap2 = lap[1], lap[2]
    mass = float(lap1.histogram.mean())
    rep.check("max bin |Laplacian - GOE| (n=2)", np.abs(lap2.histogram - goe2.histogram).max(), 0.1, "<")
    rep.check("|n=1 mass per unit length - 1|", abs(mass - 1.0), 0.05)
    ref = universality.goe_pair_correlation_binned(lap2.edges)
    rep.check("max bin |GOE estimate - GOE pair function|", np.abs(goe2.histogram - ref).max(), 0.1,
              acceptance=False)
    rep.stats.update(delta=lap2.delta, half_width=cfg.half_width)
    rows = [(float(c), float(a), float(g), float(x)) for c, a, g, x in
            zip(lap2.centers, lap2.histogram, goe2.histogram, ref)]
    return rep, ["alpha", "laplacian", "goe", "goe_exact"], rows


def clopper_pearson_upper(k: int, trials: int, level: float = 0.95) -> float:
    """One-sided upper confidence bound for a binomial proportion."""
    if k >= trials:
        return 1.0
    return float(_stats.beta.ppf(level, k + 1, trials - k))


def run_repulsion(cfg: RunConfig) -> Result:
    spec = model(cfg)
    n = spec.n
    r = projection_basis(n)
    i = n // 2 - 1
    thr = n ** (-1.0 - cfg.tau)

    def one(t):
        lam = projected_spectrum(sample_laplacian_type(spec, rng.derive_seed(cfg.seed, "trial", t)), r).eigenvalues
        return float(lam[i + 1] - lam[i]), dynamics.level_repulsion_q(lam, i)

    res = map_trials(one, cfg.trials, cfg.threads)
    gaps = np.array([x[0] for x in res])
    k = int(np.sum(gaps <= thr))
    upper = clopper_pearson_upper(k, cfg.trials)
    bound = n ** (-cfg.tau / 2.0)
    rep = VerificationReport("repulsion", trials=cfg.trials, seed=cfg.seed)
    qs = np.array([x[1] for x in res])
    rep.stats.update(index=i, threshold=thr, hits=k, fraction=k / cfg.trials, bound=bound,
                     q_quantiles={str(p): float(np.quantile(qs, p)) for p in (0.5, 0.9, 0.99)})
    rep.check("95% upper bound of P(gap <= N^(-1-tau))", upper, bound)
    return rep, ["trial", "gap", "Q"], [(t, g, q) for t, (g, q) in enumerate(res)]


def run_graphsum(cfg: RunConfig) -> Result:
    rep = locallaw.graph_sum_sweep(model(cfg), cfg.eta, cfg.graphs, cfg.trials, cfg.seed, cfg.L, cfg.threads)
    rows = [(k, v) for k, v in sorted(rep.stats.items()) if isinstance(v, (int, float))]
    return rep, ["quantity", "value"], rows


RUNNERS: dict[str, Callable[[RunConfig], Result]] = {
    "density": run_density,
    "locallaw": run_locallaw,
    "rigidity": run_rigidity,
    "deloc": run_deloc,
    "identities": run_identities,
    "decompose": run_decompose,
    "flow": run_flow,
    "gaps": run_gaps,
    "correlations": run_correlations,
    "repulsion": run_repulsion,
    "graphsum": run_graphsum,
}


def run(cfg: RunConfig) -> Result:
    return RUNNERS[cfg.experiment](cfg)
