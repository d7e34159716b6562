"""Bulk gap statistics and locally averaged correlation functions compared
against a GOE reference."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import sici

from . import freeconv, rng
from .ensemble import EnsembleSpec, projection_basis, sample_goe, sample_laplacian_type
from .parallel import map_trials
from .report import VerificationReport
from .spectra import projected_spectrum

GOE = "goe"
BIN_WIDTH = 0.1
NULL_SPLITS = 200
NULL_LEVEL = 0.95
KS_FLOOR = 0.05


@dataclass(frozen=True)
class GapSample:
    values: np.ndarray
    index_window: tuple[int, int]
    ensemble: str
    trials: int = 0
    per_trial: int = 0

    def __post_init__(self):
        if np.any(self.values < 0):
            raise ValueError("normalized gaps must be nonnegative")

    def trial_block(self, t: int) -> np.ndarray:
        return self.values[t * self.per_trial:(t + 1) * self.per_trial]


@dataclass(frozen=True)
class CorrelationEstimate:
    e_center: float
    half_width: float
    delta: float
    order: int
    edges: np.ndarray
    histogram: np.ndarray
    trials: int

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])


def gap_window(n: int, lo_frac: float, hi_frac: float) -> tuple[int, int]:
    """0-based (lo, hi): gaps lambda_{i+1} - lambda_i for lo <= i < hi.

    Both eigenvalues of every gap have 1-based index in [lo_frac N, hi_frac N].
    """
    lo = max(1, math.ceil(lo_frac * n)) - 1
    hi = min(n, math.floor(hi_frac * n)) - 1
    if hi <= lo:
        raise ValueError("empty gap window")
    return lo, hi


def normalized_gaps(lam: np.ndarray, window: tuple[int, int], density: np.ndarray) -> np.ndarray:
    """N rho(gamma_i) (lambda_{i+1} - lambda_i) over the window."""
    lo, hi = window
    n = len(lam)
    return n * density[lo:hi] * (lam[lo + 1:hi + 1] - lam[lo:hi])


def _check_window(n: int, window: tuple[int, int], kappa: float | None):
    lo, hi = window
    if not 0 <= lo < hi < n:
        raise ValueError("window outside the spectrum")
    if kappa is not None and (lo + 1 < kappa * n or hi + 1 > (1 - kappa) * n):
        raise ValueError("window leaves the bulk [[kappa N, (1 - kappa) N]]")


def _laplacian_spectrum(spec: EnsembleSpec, seed: int, t: int, r) -> np.ndarray:
    h = sample_laplacian_type(spec, rng.derive_seed(seed, "trial", t))
    return projected_spectrum(h, r).eigenvalues


def _goe_spectrum(n: int, seed: int, t: int) -> np.ndarray:
    return np.linalg.eigvalsh(sample_goe(n, rng.derive_seed(seed, "reference", t)))


def gap_samples(spec: EnsembleSpec, window: tuple[int, int], trials: int, seed: int,
                normalization: str = "fc", threads=1, kappa: float | None = None) -> GapSample:
    n = spec.n
    _check_window(n, window, kappa)
    cl = freeconv.classical_locations(n)
    if normalization == "fc":
        dens = freeconv.density_at(cl.gamma)
    elif normalization == "sc":
        dens = freeconv.semicircle_density(cl.gamma_sc)
    else:
        raise ValueError("normalization must be 'fc' or 'sc'")
    r = projection_basis(n)
    blocks = map_trials(lambda t: normalized_gaps(_laplacian_spectrum(spec, seed, t, r), window, dens),
                        trials, threads)
    return GapSample(np.concatenate(blocks), window, "laplacian", trials, window[1] - window[0])


def goe_reference(n: int, trials: int, window: tuple[int, int], seed: int, threads=1,
                  kappa: float | None = None) -> GapSample:
    _check_window(n, window, kappa)
    dens = freeconv.semicircle_density(freeconv.classical_locations(n).gamma_sc)
    blocks = map_trials(lambda t: normalized_gaps(_goe_spectrum(n, seed, t), window, dens), trials, threads)
    return GapSample(np.concatenate(blocks), window, GOE, trials, window[1] - window[0])


def ks_distance(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic from the exact step CDFs."""
    x = np.sort(np.asarray(getattr(a, "values", a), dtype=float).ravel())
    y = np.sort(np.asarray(getattr(b, "values", b), dtype=float).ravel())
    if x.size == 0 or y.size == 0:
        raise ValueError("ks_distance needs nonempty samples")
    pts = np.concatenate([x, y])
    fx = np.searchsorted(x, pts, side="right") / x.size
    fy = np.searchsorted(y, pts, side="right") / y.size
    return float(np.abs(fx - fy).max())


def null_threshold(pool: GapSample, size: int, seed: int, splits: int = NULL_SPLITS,
                   level: float = NULL_LEVEL) -> tuple[float, np.ndarray]:
    """Quantile of KS distances between random disjoint trial subsets of a GOE pool."""
    if 2 * size > pool.trials:
        raise ValueError("pool too small for two disjoint subsets")
    gen = rng.stream(seed, "split")
    blocks = [pool.trial_block(t) for t in range(pool.trials)]
    dist = np.empty(splits)
    for s in range(splits):
        perm = gen.permutation(pool.trials)
        a = np.concatenate([blocks[t] for t in perm[:size]])
        b = np.concatenate([blocks[t] for t in perm[size:2 * size]])
        dist[s] = ks_distance(a, b)
    return float(np.quantile(dist, level)), dist


def gap_universality_report(spec: EnsembleSpec, trials: int, seed: int, lo_frac: float = 0.45,
                            hi_frac: float = 0.55, threads=1) -> VerificationReport:
    """Laplacian vs GOE gaps with a GOE split-sample null calibration."""
    n = spec.n
    window = gap_window(n, lo_frac, hi_frac)
    rep = VerificationReport("gaps", trials=trials, seed=seed)
    lap = gap_samples(spec, window, trials, seed, "fc", threads)
    pool = goe_reference(n, 2 * trials, window, seed, threads)
    ref = GapSample(pool.values[:trials * pool.per_trial], window, GOE, trials, pool.per_trial)
    other = GapSample(pool.values[trials * pool.per_trial:], window, GOE, trials, pool.per_trial)
    thr, dist = null_threshold(pool, trials, seed)
    ks = ks_distance(lap, ref)
    self_ks = ks_distance(ref, other)
    rep.stats.update(window=list(window), null_quantile=thr, null_median=float(np.median(dist)),
                     mean_gap_laplacian=float(lap.values.mean()), mean_gap_goe=float(ref.values.mean()),
                     goe_small_gap_fraction=float(np.mean(ref.values < 0.05)))
    rep.check("KS Laplacian vs GOE", ks, max(KS_FLOOR, thr), "<")
    rep.check("KS GOE vs GOE (null self-test)", self_ks, max(KS_FLOOR, thr), "<")
    rep.check("|mean normalized gap - 1|", abs(lap.values.mean() - 1.0), 0.02, acceptance=False)
    return rep


# --- correlation functions ----------------------------------------------


def _overlap(lo: np.ndarray, hi: np.ndarray, a: float, b: float) -> np.ndarray:
    return np.clip(np.minimum(hi, b) - np.maximum(lo, a), 0.0, None)


def correlation_counts(lam: np.ndarray, e: float, b: float, scale: float, order: int,
                       edges: np.ndarray) -> np.ndarray:
    """Expected bin counts for one spectrum with E' uniform on [E-b, E+b].

    ``scale`` is N rho(E).  Order 1 bins alpha = scale (lambda - E').  Order 2
    bins the separation scale (lambda_j - lambda_i) > 0 for reference points
    with alpha_i in [0, 1).  The E' average is done exactly, interval by
    interval, rather than by sampling.
    """
    a, c = e - b, e + b
    w2 = 2.0 * b
    out = np.zeros(len(edges) - 1)
    if order == 1:
        near = lam[(lam > a + edges[0] / scale) & (lam < c + edges[-1] / scale)]
        for k in range(len(out)):
            # E' with alpha in [edges[k], edges[k+1]) is (lam - e1/s, lam - e0/s]
            lo = near - edges[k + 1] / scale
            hi = near - edges[k] / scale
            out[k] = _overlap(lo, hi, a, c).sum() / w2
        return out
    if order != 2:
        raise ValueError("order must be 1 or 2")
    # reference weight: E' in (lam_i - 1/scale, lam_i]
    wts = _overlap(lam - 1.0 / scale, lam, a, c) / w2
    ref = np.nonzero(wts > 0)[0]
    top = edges[-1] / scale
    for i in ref:
        j_hi = np.searchsorted(lam, lam[i] + top, side="right")
        sep = scale * (lam[i + 1:j_hi] - lam[i])
        out += wts[i] * np.histogram(sep, bins=edges)[0]
    return out


def correlation_estimates(source, e_center: float, half_width: float, orders=(1, 2), trials: int = 1,
                          seed: int = 0, n: int | None = None, delta: float | None = None,
                          alpha_max: float = 3.0, bin_width: float = BIN_WIDTH, threads=1,
                          l: float = 5.0) -> dict[int, CorrelationEstimate]:
    """Histogram estimates of the averaged, density-rescaled n-point functions.

    ``source`` is an EnsembleSpec or the string "goe" (then ``n`` is required).
    Histograms are counts per trial per unit alpha, so a flat correlation
    gives 1 in every bin.  All orders share the same sampled spectra.
    """
    if isinstance(source, EnsembleSpec):
        n = source.n
        rho = float(freeconv.density_fc(e_center))
        r = projection_basis(n)
        spec_fn = lambda t: _laplacian_spectrum(source, seed, t, r)  # noqa: E731
    elif source == GOE:
        if n is None:
            raise ValueError("GOE source needs n")
        rho = float(freeconv.semicircle_density(e_center))
        spec_fn = lambda t: _goe_spectrum(n, seed, t)  # noqa: E731
    else:
        raise ValueError("source must be an EnsembleSpec or 'goe'")
    if abs(e_center) > l:
        raise ValueError("|E| must not exceed L")
    # b >= N^{-1+delta}; record the delta actually realized if none is declared
    realized = 1.0 + math.log(half_width) / math.log(n)
    if delta is None:
        delta = realized
    elif realized < delta - 1e-12:
        raise ValueError(f"half width {half_width} is below N^(-1+{delta})")
    if not rho > 0:
        raise ValueError("density vanishes at the center energy")
    if any(o not in (1, 2) for o in orders):
        raise ValueError("orders must be 1 or 2")
    scale = n * rho
    edges = {}
    for o in orders:
        lo = -alpha_max if o == 1 else 0.0
        edges[o] = lo + bin_width * np.arange(int(round((alpha_max - lo) / bin_width)) + 1)

    def one(t):
        lam = spec_fn(t)
        return {o: correlation_counts(lam, e_center, half_width, scale, o, edges[o]) for o in orders}

    counts = map_trials(one, trials, threads)
    return {o: CorrelationEstimate(e_center, half_width, delta, o, edges[o],
                                   np.sum([c[o] for c in counts], axis=0) / (trials * bin_width), trials)
            for o in orders}


def correlation_estimate(source, e_center: float, half_width: float, order: int, trials: int,
                         seed: int, **kw) -> CorrelationEstimate:
    """Single-order version of :func:`correlation_estimates`."""
    return correlation_estimates(source, e_center, half_width, (order,), trials, seed, **kw)[order]


def goe_pair_correlation(s):
    """Limiting GOE two-point function 1 - Y2(s) in unit mean spacing.

    Y2 = S^2 + S' (1/2 - Si(pi s)/pi) with S(s) = sin(pi s)/(pi s).
    """
    s = np.abs(np.asarray(s, dtype=float))
    x = np.pi * s
    small = s < 1e-4
    safe = np.where(small, 1.0, s)
    sinc = np.sinc(s)
    dsinc = np.where(small, -np.pi ** 2 * s / 3.0, np.cos(x) / safe - np.sin(x) / (np.pi * safe * safe))
    tail = 0.5 - sici(x)[0] / np.pi
    return 1.0 - (sinc * sinc + dsinc * tail)


def goe_pair_correlation_binned(edges: np.ndarray, nodes: int = 16) -> np.ndarray:
    """Bin averages of the GOE two-point function (Gauss-Legendre per bin)."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    lo, hi = edges[:-1, None], edges[1:, None]
    pts = 0.5 * (hi - lo) * x[None, :] + 0.5 * (hi + lo)
    return (goe_pair_correlation(pts) * w[None, :]).sum(axis=1) / 2.0
