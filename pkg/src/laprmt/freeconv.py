"""Free convolution of the semicircle with a standard Gaussian.

m_fc solves m = K(z + m), with K(w) = int rho_G(x) / (x - w) dx.  For
Im w > 0 this integral has the closed form i sqrt(pi/2) w(w / sqrt 2), with
w(.) the Faddeeva function, which is what the solver uses by default.  The
Gauss-Hermite rule is kept as an alternative kernel.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.special import wofz

from .domain import build_domain
from .errors import InvalidPoint, NonConvergence
from .report import VerificationReport

SQRT2 = math.sqrt(2.0)
KCONST = 1j * math.sqrt(math.pi / 2.0)
TWO_OVER_SQRTPI = 2.0 / math.sqrt(math.pi)


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-12
    max_iter: int = 10_000
    eta_start: float = 2.0
    eta_factor: float = 0.7
    alpha_floor: float = 1.0 / 64.0
    quadrature: str = "faddeeva"  # or "gauss-hermite"
    gh_nodes: int = 201
    newton: bool = True


DEFAULT = SolverOptions()


@functools.lru_cache(maxsize=8)
def _gh_rule(nodes: int):
    x, w = np.polynomial.hermite_e.hermegauss(nodes)
    return x, w / math.sqrt(2.0 * math.pi)


def gaussian_kernel(w, scale: float = 1.0, opts: SolverOptions = DEFAULT):
    """(K_s(w), K_s'(w)) with K_s(w) = int rho_G(x) / (s x - w) dx, Im w > 0."""
    w = np.asarray(w, dtype=complex)
    if opts.quadrature == "gauss-hermite":
        x, wt = _gh_rule(opts.gh_nodes)
        d = scale * x[:, None] - w.ravel()[None, :]
        k = (wt[:, None] / d).sum(axis=0).reshape(w.shape)
        dk = (wt[:, None] / d ** 2).sum(axis=0).reshape(w.shape)
        return k, dk
    if opts.quadrature != "faddeeva":
        raise ValueError(f"unknown quadrature {opts.quadrature!r}")
    zeta = w / (scale * SQRT2)
    f = wofz(zeta)
    k = KCONST * f / scale
    dfz = -2.0 * zeta * f + 2j / math.sqrt(math.pi)
    dk = KCONST * dfz / (scale * scale * SQRT2)
    return k, dk


def fc_residual(m, z, scale: float = 1.0, opts: SolverOptions = DEFAULT):
    k, _ = gaussian_kernel(np.asarray(z) + np.asarray(m), scale, opts)
    return np.abs(np.asarray(m) - k)


def _fixed_point(fmap, z, m0, opts: SolverOptions):
    """Damped fixed point, vectorized over z; Newton steps when they help.

    ``fmap(m, z)`` returns (F(m), F'(m)).  Each point keeps its own damping
    factor; a step is accepted only if it stays in the upper half-plane and
    does not increase the residual.
    """
    m = m0.copy()
    f, df = fmap(m, z)
    res = np.abs(m - f)
    alpha = np.ones(m.shape)
    it = 0
    while True:
        active = np.flatnonzero(res >= opts.tol)
        if active.size == 0 or it >= opts.max_iter:
            break
        it += 1
        ma, fa, dfa, ra, za = m[active], f[active], df[active], res[active], z[active]
        accepted = np.zeros(active.size, dtype=bool)
        new_m, new_f, new_df, new_r = ma.copy(), fa.copy(), dfa.copy(), ra.copy()
        if opts.newton:
            with np.errstate(all="ignore"):
                cand = ma - (ma - fa) / (1.0 - dfa)
            ok = np.isfinite(cand) & (cand.imag > 0)
            if ok.any():
                cf, cdf = fmap(cand[ok], za[ok])
                cr = np.abs(cand[ok] - cf)
                good = cr < ra[ok]
                idx = np.flatnonzero(ok)[good]
                new_m[idx], new_f[idx], new_df[idx], new_r[idx] = cand[idx], cf[good], cdf[good], cr[good]
                accepted[idx] = True
        rest = np.flatnonzero(~accepted)
        if rest.size:
            al = alpha[active[rest]]
            cand = (1.0 - al) * ma[rest] + al * fa[rest]
            cf, cdf = fmap(cand, za[rest])
            cr = np.abs(cand - cf)
            upper = cand.imag > 0
            improve = upper & (cr <= ra[rest])
            at_floor = al <= opts.alpha_floor
            take = improve | (upper & at_floor)
            idx = rest[take]
            new_m[idx], new_f[idx], new_df[idx], new_r[idx] = cand[take], cf[take], cdf[take], cr[take]
            # halve on rejection, floor at alpha_floor
            shrink = active[rest[~improve]]
            alpha[shrink] = np.maximum(alpha[shrink] * 0.5, opts.alpha_floor)
        m[active], f[active], df[active], res[active] = new_m, new_f, new_df, new_r
    if opts.newton:
        # polish converged points so stored residuals sit well below tol
        for _ in range(2):
            with np.errstate(all="ignore"):
                cand = m - (m - f) / (1.0 - df)
            ok = np.flatnonzero(np.isfinite(cand) & (cand.imag > 0))
            if ok.size == 0:
                break
            cf, cdf = fmap(cand[ok], z[ok])
            cr = np.abs(cand[ok] - cf)
            good = cr < res[ok]
            idx = ok[good]
            m[idx], f[idx], df[idx], res[idx] = cand[idx], cf[good], cdf[good], cr[good]
    return m, res, it


def _continuation(fmap, z, opts: SolverOptions, m_init=1j):
    """Solve along eta' = max(eta, eta_start) * factor^j down to each target."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    eta = z.imag
    if np.any(~(eta > 0)):
        raise InvalidPoint("spectral parameter needs eta > 0")
    start = np.maximum(eta, opts.eta_start)
    steps = np.ceil(np.log(start / eta) / math.log(1.0 / opts.eta_factor) - 1e-12).astype(int)
    steps = np.maximum(steps, 0)
    m = np.full(z.shape, m_init, dtype=complex)
    res = np.zeros(z.shape)
    for j in range(int(steps.max()) + 1):
        sel = np.flatnonzero(steps >= j)
        etaj = np.maximum(start[sel] * opts.eta_factor ** j, eta[sel])
        etaj = np.where(steps[sel] == j, eta[sel], etaj)
        zj = z.real[sel] + 1j * etaj
        m[sel], res[sel], _ = _fixed_point(fmap, zj, m[sel], opts)
    bad = ~(res < opts.tol)
    if bad.any():
        worst = float(np.nanmax(res[bad]))
        raise NonConvergence(
            f"fixed point did not reach tol {opts.tol:g} at {int(bad.sum())} point(s); "
            f"worst residual {worst:.3e}", residual=worst)
    return m, res


def _fc_map(scale, opts):
    def fmap(m, z):
        return gaussian_kernel(z + m, scale, opts)
    return fmap


def solve_mfc_full(z, opts: SolverOptions = DEFAULT, scale: float = 1.0):
    """(m, residual) arrays for an array of spectral parameters."""
    return _continuation(_fc_map(scale, opts), z, opts)


def _scalar_or_array(z, m):
    return complex(m[0]) if np.ndim(z) == 0 else m.reshape(np.shape(z))


def solve_mfc(z, opts: SolverOptions = DEFAULT):
    """m_fc(z); ``z`` may be a scalar or an array."""
    m, _ = solve_mfc_full(z, opts)
    return _scalar_or_array(z, m)


def kernel_scale(t: float, n: int) -> float:
    return math.sqrt(1.0 + (1.0 - math.exp(-t)) / n)


def solve_mfc_scaled(z, t: float, n: int, opts: SolverOptions = DEFAULT):
    """m_fc^{(1)}: Gaussian of standard deviation (1 + (1 - e^{-t})/N)^{1/2}."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    m, _ = solve_mfc_full(z, opts, kernel_scale(t, n))
    return _scalar_or_array(z, m)


# --- m_t ------------------------------------------------------------------

def solve_mt(z, lam, vartheta: float, opts: SolverOptions = DEFAULT):
    """m = (1/N) sum 1/(lam_i - z - vartheta^2 m)."""
    lam = np.asarray(lam, dtype=float)
    zz = np.atleast_1d(np.asarray(z, dtype=complex))
    if np.any(~(zz.imag > 0)):
        raise InvalidPoint("spectral parameter needs eta > 0")
    th2 = float(vartheta) ** 2
    if th2 == 0.0:
        m = np.array([np.mean(1.0 / (lam - zi)) for zi in zz])
        return _scalar_or_array(z, m)

    def fmap(m, zv):
        d = lam[None, :] - zv[:, None] - th2 * m[:, None]
        inv = 1.0 / d
        return inv.mean(axis=1), th2 * (inv * inv).mean(axis=1)

    m, _ = _continuation(fmap, zz, opts)
    return _scalar_or_array(z, m)


def mt_residual(m, z, lam, vartheta):
    lam = np.asarray(lam, dtype=float)
    return abs(m - np.mean(1.0 / (lam - z - vartheta ** 2 * m)))


def vartheta_t(t: float) -> float:
    return math.sqrt((1.0 - math.exp(-t)) / 2.0)


# --- semicircle -----------------------------------------------------------

def m_semicircle(z):
    """(-z + sqrt(z^2 - 4)) / 2 on the branch with positive imaginary part."""
    z = np.asarray(z, dtype=complex)
    r = np.sqrt(z - 2.0) * np.sqrt(z + 2.0)
    m = (-z + r) / 2.0
    m = np.where(m.imag < 0, (-z - r) / 2.0, m)
    return complex(m) if m.ndim == 0 else m


def semicircle_density(e):
    e = np.asarray(e, dtype=float)
    return np.sqrt(np.clip(4.0 - e * e, 0.0, None)) / (2.0 * math.pi)


def semicircle_cdf(e):
    e = np.clip(np.asarray(e, dtype=float), -2.0, 2.0)
    return (e * np.sqrt(4.0 - e * e) + 4.0 * np.arcsin(e / 2.0)) / (4.0 * math.pi) + 0.5


def semicircle_quantile(level, iters: int = 100):
    """Bisection inverse of the semicircle CDF."""
    level = np.asarray(level, dtype=float)
    lo = np.full(level.shape, -2.0)
    hi = np.full(level.shape, 2.0)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = semicircle_cdf(mid) < level
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


# --- density, CDF and classical locations -------------------------------

ETA0 = 1e-6
DENSITY_FLOOR = 1e-14
E_MAX = 12.0
E_STEP = 1e-3


def density_fc(e, eta0: float = ETA0, opts: SolverOptions = DEFAULT):
    """rho_fc(E) = Im m_fc(E + i eta0) / pi, clamped at 1e-14."""
    e_arr = np.atleast_1d(np.asarray(e, dtype=float))
    m = solve_mfc(e_arr + 1j * eta0, opts)
    rho = m.imag / math.pi
    rho = np.where(rho < DENSITY_FLOOR, 0.0, rho)
    return float(rho[0]) if np.ndim(e) == 0 else rho.reshape(np.shape(e))


@dataclass(frozen=True)
class FreeConvSolution:
    """Tabulated m_fc on the real axis (at eta0) with density and CDF."""

    energies: np.ndarray
    eta0: float
    m_values: np.ndarray
    residuals: np.ndarray
    density: np.ndarray
    cdf: np.ndarray
    mass: float

    @property
    def grid(self) -> np.ndarray:
        return self.energies + 1j * self.eta0

    def quantile(self, level) -> np.ndarray:
        """Invert the CDF with cubic Hermite interpolation (slopes = density)."""
        level = np.atleast_1d(np.asarray(level, dtype=float))
        x, c, r = self.energies, self.cdf, self.density
        k = np.clip(np.searchsorted(c, level, side="left") - 1, 0, len(x) - 2)
        x0, h = x[k], x[k + 1] - x[k]
        c0, c1, r0, r1 = c[k], c[k + 1], r[k], r[k + 1]
        lo = np.zeros(level.shape)
        hi = np.ones(level.shape)

        def herm(s):
            s2, s3 = s * s, s * s * s
            return ((2 * s3 - 3 * s2 + 1) * c0 + (s3 - 2 * s2 + s) * h * r0
                    + (-2 * s3 + 3 * s2) * c1 + (s3 - s2) * h * r1)

        for _ in range(60):
            mid = 0.5 * (lo + hi)
            below = herm(mid) < level
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return x0 + 0.5 * (lo + hi) * h

    def to_rows(self):
        for e, m, r, rho, c in zip(self.energies, self.m_values, self.residuals, self.density, self.cdf):
            yield e, self.eta0, m.real, m.imag, rho, c, r


@functools.lru_cache(maxsize=4)
def free_convolution_table(e_max: float = E_MAX, step: float = E_STEP, eta0: float = ETA0) -> FreeConvSolution:
    k = int(round(e_max / step))
    energies = np.arange(-k, k + 1) * step
    m, res = solve_mfc_full(energies + 1j * eta0)
    rho = m.imag / math.pi
    rho = np.where(rho < DENSITY_FLOOR, 0.0, rho)
    cdf = cumulative_simpson(rho, x=energies, initial=0.0)
    mass = float(cdf[-1])
    cdf = np.maximum.accumulate(cdf / mass)
    for a in (energies, m, res, rho, cdf):
        a.flags.writeable = False
    return FreeConvSolution(energies, eta0, m, res, rho, cdf, mass)


@dataclass(frozen=True)
class ClassicalLocations:
    n: int
    gamma: np.ndarray
    gamma_sc: np.ndarray


def classical_locations(n: int, table: FreeConvSolution | None = None) -> ClassicalLocations:
    """gamma_i and gamma_{i,sc} at levels (i - 1/2)/N, i = 1..N."""
    if n < 1:
        raise ValueError("n must be >= 1")
    table = table or free_convolution_table()
    levels = (np.arange(1, n + 1) - 0.5) / n
    gamma = table.quantile(levels)
    # enforce exact antisymmetry; the table is symmetric up to solver error
    gamma = 0.5 * (gamma - gamma[::-1])
    gsc = semicircle_quantile(levels)
    gsc = 0.5 * (gsc - gsc[::-1])
    return ClassicalLocations(n, gamma, gsc)


def density_at(e, table: FreeConvSolution | None = None):
    """Density interpolated from the table (used for many lookups)."""
    table = table or free_convolution_table()
    return np.interp(e, table.energies, table.density)


# --- stability and regularity -------------------------------------------

def stability_factor(w, z: complex, m: complex) -> complex:
    """1 - (1/N) sum_k 1/(w_k - z - m)^2."""
    w = np.asarray(w, dtype=float)
    return complex(1.0 - np.mean(1.0 / (w - z - m) ** 2))


def stability_constants(c_star: float) -> dict[str, float]:
    return {
        "lower": c_star ** 2 / 16.0,
        "upper": 1.0 + 1.0 / c_star ** 2,
        "c1": min(c_star ** 3 / 16.0, c_star / 2.0),
    }


@functools.lru_cache(maxsize=16)
def c_star(l: float = 5.0, n: int = 1000, nu: float = 0.1, per_decade: int = 8, e_step: float = 0.25) -> float:
    """Operational c_*: min of Im m_fc over the D1 grid."""
    dom = build_domain(l, n, nu, per_decade, e_step, regions=("D1",))
    return float(solve_mfc(dom.z).imag.min())


def _lipschitz(z: np.ndarray, m: np.ndarray, e_vals, eta_vals) -> float:
    """Max |dm|/|dz| over grid neighbours in E and in eta."""
    grid = {(round(zz.real, 12), round(zz.imag, 15)): mm for zz, mm in zip(z, m)}
    best = 0.0
    es = np.unique(np.round(e_vals, 12))
    etas = np.unique(np.round(eta_vals, 15))
    for eta in etas:
        row = np.array([grid[(e, eta)] for e in es])
        best = max(best, float(np.max(np.abs(np.diff(row)) / np.diff(es))))
    for e in es:
        col = np.array([grid[(e, eta)] for eta in etas])
        best = max(best, float(np.max(np.abs(np.diff(col)) / np.diff(etas))))
    return best


def regularity_report(l: float, n: int, nu: float, per_decade: int = 8, e_step: float = 0.25,
                      opts: SolverOptions = DEFAULT) -> VerificationReport:
    """Scan D1: min Im m_fc, max |m_fc|, and the Lipschitz quotient."""
    rep = VerificationReport("regularity")
    lips = []
    for refine in (1, 2):
        dom = build_domain(l, n, nu, per_decade * refine, e_step / refine, regions=("D1",))
        m, res = solve_mfc_full(dom.z, opts)
        if refine == 1:
            cs = float(m.imag.min())
            rep.stats.update(points=len(dom), c_star=cs, max_abs_m=float(np.abs(m).max()),
                             max_residual=float(res.max()))
            rep.check("max |m_fc| on D1", np.abs(m).max(), 1.0 + 1e-9)
            rep.check("min Im m_fc on D1", cs, 0.0, ">")
            rep.check("max fixed-point residual", res.max(), opts.tol, "<")
        lips.append(_lipschitz(dom.z, m, dom.z.real, dom.z.imag))
    rep.stats["lipschitz"] = lips
    # the quotient must stay bounded when the grid is refined
    rep.check("Lipschitz quotient ratio under 2x refinement", lips[1] / lips[0], 1.5)
    return rep
