"""Ornstein-Uhlenbeck flow on Laplacian-type matrices, its projected
decomposition, structure-preserving derivatives and level repulsion."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .ensemble import (LaplacianSample, ProjectionBasis, decomposition_parts, projection_basis,
                       sample_gaussian_laplacian)
from .spectra import Spectrum, resolvent_hat


@dataclass(frozen=True)
class FlowParams:
    t: float
    epsilon: float | None = None

    def __post_init__(self):
        if self.t < 0:
            raise ValueError("flow time must be nonnegative")

    @classmethod
    def from_epsilon(cls, n: int, epsilon: float) -> "FlowParams":
        """t = N^{-1+epsilon}."""
        return cls(n ** (-1.0 + epsilon), epsilon)

    @property
    def vartheta(self) -> float:
        return math.sqrt((1.0 - math.exp(-self.t)) / 2.0)


@dataclass(frozen=True)
class DeformationHandle:
    i: int
    j: int
    theta: float = 1.0

    def __post_init__(self):
        if not self.i < self.j:
            raise ValueError("need i < j")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")


def evolve(h0: LaplacianSample, t: float, seed: int) -> LaplacianSample:
    """e^{-t/2} H + (1 - e^{-t})^{1/2} W with an independent Gaussian Laplacian W."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return h0
    w = sample_gaussian_laplacian(h0.n, rng.derive_seed(seed, "noise"))
    off = math.exp(-t / 2.0) * h0.offdiag + math.sqrt(-math.expm1(-t)) * w.offdiag
    return LaplacianSample(off, seed, "flow")


def ou_paths(x0: np.ndarray, t: float, steps: int, gen: np.random.Generator, n: int,
             scheme: str = "euler", noise: bool = True) -> np.ndarray:
    """Integrate dh = dB/sqrt(N) - h/2 dt for a batch of independent entries.

    ``scheme="euler"`` is Euler-Maruyama; ``"exact"`` uses the OU transition
    kernel, which is exact in law at every step.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    dt = t / steps
    x = np.array(x0, dtype=np.float64, copy=True)
    if scheme == "euler":
        a, s = 1.0 - dt / 2.0, math.sqrt(dt / n)
    elif scheme == "exact":
        a, s = math.exp(-dt / 2.0), math.sqrt(-math.expm1(-dt) / n)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    for _ in range(steps):
        x *= a
        if noise:
            x += s * gen.standard_normal(x.shape)
    return x


def evolve_path(h0: LaplacianSample, t: float, steps: int, seed: int, scheme: str = "euler",
                noise: bool = True) -> LaplacianSample:
    """Entrywise OU integration of the off-diagonal part; diagonal rebuilt."""
    size = h0.size
    iu = np.triu_indices(size, 1)
    x = ou_paths(h0.offdiag[iu], t, steps, rng.stream(seed, "path"), h0.n, scheme, noise)
    off = np.zeros((size, size))
    off[iu] = x
    off += off.T
    return LaplacianSample(off, seed, "flow")


def hat_decomposition(h: LaplacianSample, t: float, seed: int, r: ProjectionBasis | None = None):
    """(A_hat_t, H_hat_t) with independent D, g and GOE drawn from ``seed``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    n = h.n
    r = r or projection_basis(n)
    goe, d, g = decomposition_parts(n, seed)
    c = math.sqrt(-math.expm1(-t))
    a1 = math.exp(-t / 2.0) * h.matrix
    a1[np.diag_indices(n + 1)] += c * d
    a_hat = r.conjugate(a1)
    a_hat[np.diag_indices(n)] += c * g
    return a_hat, a_hat + c * goe


def laplacian_direction(i: int, j: int, size: int) -> np.ndarray:
    """X_ij = E^ij + E^ji - E^ii - E^jj."""
    if i == j:
        raise ValueError("need i != j")
    x = np.zeros((size, size))
    x[i, j] = x[j, i] = 1.0
    x[i, i] = x[j, j] = -1.0
    return x


def trace_derivative(h, z: complex, i: int, j: int, order: int, r: ProjectionBasis | None = None,
                     direction_scale: float = 1.0) -> complex:
    """(-1)^r r! Tr[G_hat (X G_hat)^r] for r = 1, 2, 3."""
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    a = h.matrix if isinstance(h, LaplacianSample) else np.asarray(h, dtype=float)
    r = r or projection_basis(a.shape[0] - 1)
    g = resolvent_hat(a, z, r, verify=False).entries
    x = direction_scale * laplacian_direction(i, j, a.shape[0])
    prod = g
    for _ in range(order):
        prod = prod @ (x @ g)
    return complex((-1) ** order * math.factorial(order) * np.trace(prod))


def trace_hat(a: np.ndarray, z: complex, r: ProjectionBasis) -> complex:
    """Tr G_hat = Tr (R*AR - z)^{-1}."""
    vals = np.linalg.eigvalsh(r.conjugate(a))
    return complex(np.sum(1.0 / (vals - z)))


# central stencils (offsets, weights); r=2 and r=3 are fourth order
_STENCILS = {
    1: ((-1, 1), (-0.5, 0.5)),
    2: ((-2, -1, 0, 1, 2), (-1 / 12, 4 / 3, -2.5, 4 / 3, -1 / 12)),
    3: ((-3, -2, -1, 1, 2, 3), (1 / 8, -1.0, 13 / 8, -13 / 8, 1.0, -1 / 8)),
}
# roundoff grows like eps/h^r, so higher orders use wider steps
FD_STEPS = {1: 1e-5, 2: 1e-3, 3: 5e-3}


def trace_derivative_fd(h, z: complex, i: int, j: int, order: int, step: float | None = None,
                        r: ProjectionBasis | None = None) -> complex:
    """Finite-difference oracle for the derivative along X_ij."""
    a = h.matrix if isinstance(h, LaplacianSample) else np.asarray(h, dtype=float)
    r = r or projection_basis(a.shape[0] - 1)
    step = step or FD_STEPS[order]
    x = laplacian_direction(i, j, a.shape[0])
    offs, wts = _STENCILS[order]
    total = sum(w * trace_hat(a + o * step * x, z, r) for o, w in zip(offs, wts))
    return complex(total / step ** order)


def level_repulsion_q(s: Spectrum | np.ndarray, i: int) -> float:
    """Q_i = (1/N^2) sum_{j != i} 1/(lambda_j - lambda_i)^2."""
    lam = s.eigenvalues if isinstance(s, Spectrum) else np.asarray(s, dtype=float)
    n = len(lam)
    if not 0 <= i < n:
        raise IndexError("eigenvalue index out of range")
    d = np.delete(lam, i) - lam[i]
    return float(np.sum(1.0 / (d * d)) / (n * n))


def _smoothstep(u):
    return u ** 3 * (10.0 - 15.0 * u + 6.0 * u * u)


def chi_cutoff(x, n: int, tau: float):
    """C^3 cutoff: x on [0, a], quintic blend of the slope on [a, 2a], then 1.5a.

    a = N^{2 tau}.  The slope is 1 - S((x-a)/a) with S the quintic
    smoothstep, so the first three derivatives are continuous and bounded.
    """
    a = n ** (2.0 * tau)
    x = np.asarray(x, dtype=float)
    u = np.clip((x - a) / a, 0.0, 1.0)
    # integral of S from 0 to u
    int_s = u ** 6 - 3.0 * u ** 5 + 2.5 * u ** 4
    out = np.where(x <= a, x, a + a * u - a * int_s)
    out = np.where(x >= 2 * a, 1.5 * a, out)
    return float(out) if out.ndim == 0 else out


def deform(h: LaplacianSample, d: DeformationHandle) -> LaplacianSample:
    """Scale the pair h_ij = h_ji by theta; the diagonal follows."""
    off = np.array(h.offdiag, copy=True)
    off[d.i, d.j] *= d.theta
    off[d.j, d.i] *= d.theta
    return LaplacianSample(off, h.seed, h.law, h.degenerate)
