"""Random Laplacian-type matrices, the Gaussian toy model, GOE and the
projection onto the orthogonal complement of the constant vector.

A Laplacian-type matrix of size N+1 is stored through its symmetric
off-diagonal part ``h`` (zero diagonal); the diagonal is always rebuilt as
``H_ii = -sum_{k != i} h_ki`` so the constant vector is an exact null vector.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from . import rng as _rng

BERNOULLI = "bernoulli"
GAUSSIAN = "gaussian"
CUSTOM = "custom"
LAW_TAGS = {BERNOULLI: 0, GAUSSIAN: 1, CUSTOM: 2, "raw": 3, "matrix": 4}

MOMENT_TOL = 1e-9
DENSE_THRESHOLD = 0.1


@dataclass(frozen=True)
class CustomLaw:
    """Entry law given by an inverse CDF plus its declared moments.

    ``inverse_cdf`` maps uniforms in (0, 1) to values of ``h_ij`` directly,
    so the declared moments are those of ``h_ij`` (variance 1/N).
    ``abs_moments`` maps p >= 3 to E|h|^p.
    """

    inverse_cdf: Callable[[np.ndarray], np.ndarray]
    mean: float
    variance: float
    abs_moments: Mapping[int, float] = field(default_factory=dict)


@dataclass(frozen=True)
class EnsembleSpec:
    n: int
    q: float
    entry_law: str = BERNOULLI
    nu: float = 0.1
    custom: CustomLaw | None = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if self.entry_law not in (BERNOULLI, GAUSSIAN, CUSTOM):
            raise ValueError(f"unknown entry law {self.entry_law!r}")
        # small slack so q = N**0.5 computed in floating point is accepted
        if not (1.0 <= self.q <= math.sqrt(self.n) * (1 + 1e-12)):
            raise ValueError(f"q must lie in [1, sqrt(N)] = [1, {math.sqrt(self.n):.6g}], got {self.q}")
        if self.nu <= 0:
            raise ValueError("nu must be positive")
        if self.entry_law == CUSTOM:
            if self.custom is None:
                raise ValueError("custom entry law requires a CustomLaw")
            check_custom_law(self.custom, self.n, self.q)

    @property
    def size(self) -> int:
        return self.n + 1

    @property
    def p(self) -> float:
        return min(self.q * self.q / self.n, 1.0)

    @property
    def xi(self) -> float:
        return self.n ** self.nu

    @property
    def degenerate(self) -> bool:
        """True in the complete-graph case p = 1 of the Bernoulli law."""
        return self.entry_law == BERNOULLI and self.p >= 1.0 - 1e-12

    @classmethod
    def from_exponent(cls, n: int, q_exp: float, **kw) -> "EnsembleSpec":
        q = min(n ** q_exp, math.sqrt(n))
        return cls(n=n, q=q, **kw)


def check_custom_law(law: CustomLaw, n: int, q: float) -> dict[int, float]:
    """Validate declared moments; returns the implied constants c_p.

    c_p is defined through E|h|^p = c_p / (q^{p-2} N).
    """
    if abs(law.mean) > MOMENT_TOL:
        raise ValueError(f"custom law has nonzero mean {law.mean}")
    if abs(law.variance * n - 1.0) > MOMENT_TOL:
        raise ValueError(f"custom law variance {law.variance} differs from 1/N = {1.0 / n}")
    cp = {}
    for p, m in sorted(law.abs_moments.items()):
        if p < 3 or not np.isfinite(m) or m < 0:
            raise ValueError(f"invalid declared moment E|h|^{p} = {m}")
        cp[p] = m * q ** (p - 2) * n
    return cp


def bernoulli_abs_moment(p_moment: int, n: int, q: float) -> float:
    """Exact E|h|^k for the centered, rescaled Bernoulli entry."""
    p = q * q / n
    s = math.sqrt(1.0 - p)
    a = (1.0 - p) / (q * s)
    b = p / (q * s)
    return p * a ** p_moment + (1.0 - p) * b ** p_moment


def bernoulli_mean_variance(n: int, q: float) -> tuple[float, float]:
    """Exact mean and variance of the centered Bernoulli entry."""
    p = q * q / n
    s = math.sqrt(1.0 - p)
    a = (1.0 - p) / (q * s)
    b = -p / (q * s)
    mean = p * a + (1.0 - p) * b
    var = p * a * a + (1.0 - p) * b * b - mean * mean
    return mean, var


@dataclass(frozen=True)
class LaplacianSample:
    """One realization; ``offdiag`` is symmetric with zero diagonal."""

    offdiag: np.ndarray
    seed: int
    law: str = GAUSSIAN
    degenerate: bool = False

    def __post_init__(self):
        h = np.asarray(self.offdiag, dtype=np.float64)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ValueError("offdiag must be square")
        if h is self.offdiag:
            h = h.copy()
        np.fill_diagonal(h, 0.0)
        h.flags.writeable = False
        object.__setattr__(self, "offdiag", h)

    @property
    def size(self) -> int:
        return self.offdiag.shape[0]

    @property
    def n(self) -> int:
        return self.size - 1

    @property
    def diagonal(self) -> np.ndarray:
        return -self.offdiag.sum(axis=1)

    @property
    def matrix(self) -> np.ndarray:
        h = self.offdiag.copy()
        np.fill_diagonal(h, self.diagonal)
        return h

    def with_offdiag(self, offdiag: np.ndarray, seed: int | None = None) -> "LaplacianSample":
        return LaplacianSample(np.array(offdiag, dtype=np.float64), self.seed if seed is None else seed,
                               self.law, self.degenerate)


def laplacian_from_offdiag(h: np.ndarray) -> np.ndarray:
    """Dense matrix with the structural diagonal for symmetric ``h``."""
    m = np.array(h, dtype=np.float64, copy=True)
    np.fill_diagonal(m, 0.0)
    np.fill_diagonal(m, -m.sum(axis=1))
    return m


def constant_vector(size: int) -> np.ndarray:
    return np.full(size, 1.0 / math.sqrt(size))


# --- sampling -------------------------------------------------------------

def triu_from_linear(k: np.ndarray, size: int) -> tuple[np.ndarray, np.ndarray]:
    """Row/column of the k-th entry of the strict upper triangle (row-major)."""
    k = np.asarray(k, dtype=np.int64)
    n = size
    total = n * (n - 1) // 2
    # rows counted from the bottom: entries remaining after row i is r(r+1)/2
    rem = total - 1 - k
    r = np.floor((np.sqrt(8.0 * rem + 1.0) - 1.0) / 2.0).astype(np.int64)
    # guard against rounding in the square root
    r = np.where((r + 1) * (r + 2) // 2 <= rem, r + 1, r)
    r = np.where(r * (r + 1) // 2 > rem, r - 1, r)
    i = n - 2 - r
    row_start = i * (2 * n - i - 1) // 2
    j = k - row_start + i + 1
    return i, j


def bernoulli_edges(size: int, p: float, gen: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Upper-triangle positions of iid Bernoulli(p) edges.

    Below ``DENSE_THRESHOLD`` positions come from geometric gaps so the work
    is proportional to the number of edges.
    """
    total = size * (size - 1) // 2
    if p <= 0.0 or total == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty
    if p >= 1.0:
        return np.triu_indices(size, 1)
    if p < DENSE_THRESHOLD:
        chunks = []
        pos = -1
        expected = int(total * p + 6 * math.sqrt(total * p) + 16)
        while pos < total:
            gaps = gen.geometric(p, size=expected)
            idx = pos + np.cumsum(gaps)
            chunks.append(idx)
            pos = int(idx[-1])
        k = np.concatenate(chunks)
        k = k[k < total]
        return triu_from_linear(k, size)
    hits = np.flatnonzero(gen.random(total) < p)
    return triu_from_linear(hits, size)


def bernoulli_laplacian(n: int, p: float, seed: int) -> LaplacianSample:
    """Raw graph matrix M for edge probability ``p`` (M_ij = 1 on edges)."""
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"edge probability must lie in [0, 1], got {p}")
    size = n + 1
    i, j = bernoulli_edges(size, p, _rng.stream(seed, "matrix"))
    m = np.zeros((size, size))
    m[i, j] = 1.0
    m[j, i] = 1.0
    return LaplacianSample(m, seed, "raw", degenerate=p >= 1.0)


def sample_raw_laplacian(spec: EnsembleSpec, seed: int) -> LaplacianSample:
    if spec.entry_law != BERNOULLI:
        raise ValueError("raw sampling needs the Bernoulli entry law")
    p = spec.q * spec.q / spec.n
    if p > 1.0 + 1e-12:
        raise ValueError(f"edge probability q^2/N = {p} exceeds 1")
    return bernoulli_laplacian(spec.n, min(p, 1.0), seed)


def center_and_rescale(m: LaplacianSample, spec: EnsembleSpec) -> LaplacianSample:
    """h_ij = (m_ij - p) / (q (1-p)^{1/2}); the p = 1 case uses h = m/q."""
    q, n = spec.q, spec.n
    if spec.degenerate:
        return LaplacianSample(m.offdiag / q, m.seed, BERNOULLI, degenerate=True)
    s = math.sqrt(1.0 - q * q / n)
    h = m.offdiag / (q * s) - q / (n * s)
    return LaplacianSample(h, m.seed, BERNOULLI)


def reconstruct_raw(h: LaplacianSample, spec: EnsembleSpec) -> np.ndarray:
    """Dense M rebuilt from H: M = q s H + (q^2 (N+1)/N)(e e* - I)."""
    q, n = spec.q, spec.n
    hm = h.matrix
    if spec.degenerate:
        return q * hm
    s = math.sqrt(1.0 - q * q / n)
    size = n + 1
    return q * s * hm + (q * q / n) * (np.ones((size, size)) - size * np.eye(size))


def sample_laplacian_type(spec: EnsembleSpec, seed: int) -> LaplacianSample:
    size = spec.size
    if spec.entry_law == BERNOULLI:
        return center_and_rescale(sample_raw_laplacian(spec, seed), spec)
    gen = _rng.stream(seed, "matrix")
    iu = np.triu_indices(size, 1)
    if spec.entry_law == GAUSSIAN:
        vals = gen.standard_normal(len(iu[0])) / math.sqrt(spec.n)
    else:
        u = gen.random(len(iu[0]))
        vals = np.asarray(spec.custom.inverse_cdf(u), dtype=np.float64)
    h = np.zeros((size, size))
    h[iu] = vals
    h += h.T
    return LaplacianSample(h, seed, spec.entry_law)


def sample_gaussian_laplacian(n: int, seed: int) -> LaplacianSample:
    """The Gaussian toy model W."""
    return sample_laplacian_type(EnsembleSpec(n=n, q=math.sqrt(n), entry_law=GAUSSIAN), seed)


def goe_from(gen: np.random.Generator, n: int) -> np.ndarray:
    a = gen.standard_normal((n, n))
    return (a + a.T) / math.sqrt(2.0 * n)


def sample_goe(n: int, seed: int) -> np.ndarray:
    """GOE with off-diagonal variance 1/N and diagonal variance 2/N."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return goe_from(_rng.stream(seed, "goe"), n)


# --- projection -----------------------------------------------------------

@dataclass(frozen=True)
class ProjectionBasis:
    """R = first N columns of the reflector sending e to the last axis.

    The reflector is P = I - beta v v^T with v = e - e_{N+1}; each retained
    column is multiplied by ``signs`` so its first nonzero entry is positive.
    """

    n: int
    v: np.ndarray
    beta: float
    signs: np.ndarray

    @property
    def rows(self) -> int:
        return self.n + 1

    @property
    def cols(self) -> int:
        return self.n

    @property
    def matrix(self) -> np.ndarray:
        size = self.n + 1
        p = np.eye(size) - self.beta * np.outer(self.v, self.v)
        return p[:, : self.n] * self.signs

    def reflect(self, m: np.ndarray) -> np.ndarray:
        """P M P for symmetric M in O(size^2)."""
        v, b = self.v, self.beta
        mv = m @ v
        vmv = float(v @ mv)
        out = m - b * np.outer(v, mv) - b * np.outer(mv, v)
        out += (b * b * vmv) * np.outer(v, v)
        return out

    def conjugate(self, m: np.ndarray) -> np.ndarray:
        """R^T M R."""
        pm = self.reflect(m)[: self.n, : self.n]
        return self.signs[:, None] * pm * self.signs[None, :]

    def lift(self, x: np.ndarray) -> np.ndarray:
        """R x for vectors or column stacks."""
        x = np.asarray(x)
        y = np.zeros((self.n + 1,) + x.shape[1:], dtype=np.result_type(x, np.float64))
        y[: self.n] = x * (self.signs if x.ndim == 1 else self.signs[:, None])
        return y - self.beta * np.multiply.outer(self.v, self.v @ y)


def projection_basis(n: int) -> ProjectionBasis:
    if n < 1:
        raise ValueError("n must be >= 1")
    size = n + 1
    v = constant_vector(size)
    v[-1] -= 1.0
    beta = 2.0 / float(v @ v)
    # column a of P: e_a - beta v v_a; its first entry is delta_{0a} - beta v_0 v_a
    first = -beta * v[0] * v[:n]
    first[0] += 1.0
    signs = np.where(first < 0, -1.0, 1.0)
    v.flags.writeable = False
    signs.flags.writeable = False
    return ProjectionBasis(n, v, beta, signs)


def project_out_trivial(m, r: ProjectionBasis) -> np.ndarray:
    mat = m.matrix if isinstance(m, LaplacianSample) else np.asarray(m, dtype=np.float64)
    if mat.shape != (r.rows, r.rows):
        raise ValueError(f"dimension mismatch: matrix {mat.shape}, basis rows {r.rows}")
    return r.conjugate(mat)


def decomposition_parts(n: int, seed: int):
    """Independent (GOE, D diagonal, g) for the Gaussian decomposition."""
    goe = goe_from(_rng.stream(seed, "goe"), n)
    d = _rng.stream(seed, "diag").standard_normal(n + 1) * math.sqrt((n + 1) / n)
    g = float(_rng.stream(seed, "scalar").standard_normal()) / math.sqrt(n)
    return goe, d, g


def decompose_gaussian(n: int, seed: int, r: ProjectionBasis | None = None) -> np.ndarray:
    """GOE + R*DR + g I, equal in law to R*WR."""
    r = r or projection_basis(n)
    goe, d, g = decomposition_parts(n, seed)
    return goe + r.conjugate(np.diag(d)) + g * np.eye(n)


def entry_covariance_oracle(i: int, j: int, k: int, l: int, n: int) -> float:
    """E[W_ij W_kl] for the Gaussian toy model."""
    d = lambda a, b: 1.0 if a == b else 0.0
    ijk = d(i, j) * d(j, k)
    ijl = d(i, j) * d(j, l)
    ikl = d(i, k) * d(k, l)
    jkl = d(j, k) * d(k, l)
    ijkl = ijk * d(k, l)
    return (d(i, k) * d(j, l) + d(i, l) * d(j, k) - ijk - ijl - ikl - jkl
            + d(i, j) * d(k, l) + (n + 1) * ijkl) / n


def projected_covariance_oracle(a: int, b: int, c: int, d: int, r: ProjectionBasis) -> float:
    """E[(R*WR)_ab (R*WR)_cd]."""
    n = r.n
    rm = r.matrix
    dl = lambda x, y: 1.0 if x == y else 0.0
    quartic = float(np.sum(rm[:, a] * rm[:, b] * rm[:, c] * rm[:, d]))
    return (dl(a, c) * dl(b, d) + dl(a, d) * dl(b, c) + dl(a, b) * dl(c, d)
            + (n + 1) * quartic) / n
