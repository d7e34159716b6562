"""Spectral domains D0, D1, D2 and the control parameter."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

REGIONS = ("D0", "D1", "D2")


def control_psi(eta, n: int, q: float):
    """Psi(z) = 1/q + (N eta)^{-1/2}."""
    eta = np.asarray(eta, dtype=float)
    if np.any(eta <= 0):
        raise ValueError("eta must be positive")
    out = 1.0 / q + 1.0 / np.sqrt(n * eta)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SpectralDomain:
    l: float
    xi: float
    n: int
    z: np.ndarray       # complex points
    region: np.ndarray  # region tags, same length as z

    def select(self, region: str) -> np.ndarray:
        return self.z[self.region == region]

    def __len__(self) -> int:
        return len(self.z)


def _log_grid(lo: float, hi: float, per_decade: int) -> np.ndarray:
    """Points hi * 10^{-k/per_decade} down to lo, with lo itself included."""
    k = np.arange(0, int(math.floor(math.log10(hi / lo) * per_decade + 1e-9)) + 1)
    pts = hi * 10.0 ** (-k / per_decade)
    pts = pts[pts > lo * (1 + 1e-12)]
    return np.unique(np.concatenate([pts, [lo]]))


def _up_grid(lo: float, hi: float, per_decade: int) -> np.ndarray:
    k = np.arange(0, int(math.floor(math.log10(hi / lo) * per_decade + 1e-9)) + 1)
    pts = lo * 10.0 ** (k / per_decade)
    pts = pts[pts < hi * (1 - 1e-12)]
    return np.unique(np.concatenate([pts, [hi]]))


def _sym_grid(limit: float, step: float) -> np.ndarray:
    j = int(math.floor(limit / step + 1e-9))
    return np.arange(-j, j + 1) * step


def build_domain(l: float, n: int, nu: float, per_decade: int = 8, e_step: float = 0.25,
                 regions=REGIONS) -> SpectralDomain:
    """Grid over D_L: log eta grid times a uniform E grid in each region."""
    if l <= 0:
        raise ValueError("L must be positive")
    xi = n ** nu
    eta_min = xi ** 3 / n
    zs, tags = [], []
    if "D0" in regions and l > 2:
        es = _sym_grid(2 * xi + l, e_step)
        etas = _up_grid(2.0, l, per_decade)
        pts = (es[None, :] + 1j * etas[:, None]).ravel()
        zs.append(pts)
        tags += ["D0"] * len(pts)
    if eta_min < 2:
        etas = _log_grid(eta_min, 2.0, per_decade)
        if "D1" in regions:
            es = _sym_grid(l, e_step)
            pts = (es[None, :] + 1j * etas[:, None]).ravel()
            zs.append(pts)
            tags += ["D1"] * len(pts)
        if "D2" in regions:
            j = np.arange(0, int(math.floor(l / e_step + 1e-9)) + 1) * e_step
            es = np.concatenate([-(2 * xi + j[::-1]), 2 * xi + j])
            pts = (es[None, :] + 1j * etas[:, None]).ravel()
            zs.append(pts)
            tags += ["D2"] * len(pts)
    z = np.concatenate(zs) if zs else np.zeros(0, dtype=complex)
    return SpectralDomain(l, xi, n, z, np.array(tags))


def region_of(z: complex, l: float, n: int, nu: float) -> list[str]:
    """All regions whose defining inequalities hold at z."""
    xi = n ** nu
    e, eta = abs(z.real), z.imag
    tol = 1e-12
    out = []
    if e <= 2 * xi + l + tol and 2 - tol <= eta <= l + tol:
        out.append("D0")
    if e <= l + tol and xi ** 3 / n * (1 - tol) <= eta <= 2 + tol:
        out.append("D1")
    if 2 * xi - tol <= e <= 2 * xi + l + tol and xi ** 3 / n * (1 - tol) <= eta <= 2 + tol:
        out.append("D2")
    return out
