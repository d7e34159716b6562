"""Eigendecompositions, empirical Stieltjes transforms, resolvents and the
exact resolvent identities of Laplacian-type matrices."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import eigen
from .container import save as _save_blob
from .container import write_rows_csv
from .ensemble import LaplacianSample, ProjectionBasis, constant_vector, laplacian_from_offdiag
from .errors import RankOneViolation, TooLarge, TrivialNotFound
from .report import VerificationReport

SIZE_CAP = 4096
DEFAULT_BACKEND = "lapack"
OVERLAP_THRESHOLD = 0.99
TRIVIAL_TOL = 1e-8


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None = None
    trivial_index: int | None = None
    trivial_value: float | None = None
    trivial_vector: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.eigenvalues)


@dataclass(frozen=True)
class ResolventSlice:
    z: complex
    entries: np.ndarray


def _as_matrix(m) -> np.ndarray:
    if isinstance(m, LaplacianSample):
        return m.matrix
    return np.asarray(m, dtype=np.float64)


def eigendecompose(m, vectors: bool = True, backend: str = DEFAULT_BACKEND, cap: int = SIZE_CAP) -> Spectrum:
    a = _as_matrix(m)
    if a.shape[0] > cap:
        raise TooLarge(f"matrix size {a.shape[0]} exceeds the configured cap {cap}")
    vals, vecs = eigen.eigh(a, vectors=vectors, backend=backend)
    return Spectrum(np.asarray(vals), vecs)


def spectrum_defects(s: Spectrum, m) -> dict[str, float]:
    """Max scaled residual and orthonormality defect of an eigendecomposition."""
    a = _as_matrix(m)
    u, lam = s.eigenvectors, s.eigenvalues
    resid = np.abs(a @ u - u * lam).max(axis=0) / (1.0 + np.abs(lam))
    orth = np.abs(u.T @ u - np.eye(u.shape[1])).max()
    return {"residual": float(resid.max()), "orthonormality": float(orth)}


def nontrivial_spectrum(h, backend: str = DEFAULT_BACKEND, threshold: float = OVERLAP_THRESHOLD) -> Spectrum:
    """Drop the eigenpair with the largest overlap with e."""
    a = _as_matrix(h)
    full = eigendecompose(a, True, backend)
    e = constant_vector(a.shape[0])
    overlap = np.abs(full.eigenvectors.T @ e)
    k = int(np.argmax(overlap))
    if overlap[k] <= threshold:
        raise TrivialNotFound(f"no eigenvector overlaps e by more than {threshold} (best {overlap[k]:.4f})")
    lam0 = float(full.eigenvalues[k])
    if abs(lam0) >= TRIVIAL_TOL:
        raise TrivialNotFound(f"trivial eigenvalue {lam0:.3e} is not numerically zero")
    keep = np.delete(np.arange(a.shape[0]), k)
    return Spectrum(full.eigenvalues[keep], full.eigenvectors[:, keep], k, lam0, full.eigenvectors[:, k])


def projected_spectrum(h, r: ProjectionBasis, vectors: bool = False, backend: str = DEFAULT_BACKEND) -> Spectrum:
    """Nontrivial spectrum through R*HR; vectors are lifted back by R."""
    a = r.conjugate(_as_matrix(h))
    vals, vecs = eigen.eigh(a, vectors=vectors, backend=backend)
    u = r.lift(vecs) if vectors else None
    return Spectrum(np.asarray(vals), u, None, 0.0, constant_vector(r.rows) if vectors else None)


def empirical_stieltjes(s: Spectrum, z, include_trivial: bool = True, n: int | None = None):
    """(1/N) sum_i 1/(lambda_i - z), N the number of nontrivial eigenvalues.

    With a trivial eigenpair removed, ``include_trivial`` adds its term back,
    which reproduces (1/N) Tr G for the full (N+1)-dimensional matrix.
    """
    lam = s.eigenvalues
    n = n or len(lam)
    zz = np.asarray(z, dtype=complex)
    out = (1.0 / (lam[:, None] - zz.ravel()[None, :])).sum(axis=0)
    if include_trivial and s.trivial_value is not None:
        out = out + 1.0 / (s.trivial_value - zz.ravel())
    out = out / n
    return complex(out[0]) if zz.ndim == 0 else out.reshape(zz.shape)


def resolvent(h, z: complex) -> ResolventSlice:
    a = _as_matrix(h)
    size = a.shape[0]
    g = np.linalg.solve(a - z * np.eye(size), np.eye(size, dtype=complex))
    return ResolventSlice(complex(z), g)


def resolvent_from_spectrum(s: Spectrum, z: complex) -> ResolventSlice:
    u = s.eigenvectors
    g = (u / (s.eigenvalues - z)) @ u.T
    if s.trivial_value is not None and s.trivial_vector is not None:
        g = g + np.outer(s.trivial_vector, s.trivial_vector) / (s.trivial_value - z)
    return ResolventSlice(complex(z), g)


def resolvent_hat(h, z: complex, r: ProjectionBasis, verify: bool = True, tol: float = 1e-8) -> ResolventSlice:
    """G_hat = R (R*HR - z)^{-1} R*; optionally checks G_hat - G = e e*/z."""
    a = _as_matrix(h)
    n = r.n
    inner = np.linalg.solve(r.conjugate(a) - z * np.eye(n), np.eye(n, dtype=complex))
    rm = r.matrix
    ghat = rm @ inner @ rm.T
    if verify:
        g = resolvent(a, z).entries
        e = constant_vector(n + 1)
        defect = np.abs(ghat - g - np.outer(e, e) / z).max()
        scale = max(1.0, float(np.abs(g).max()))
        if defect > tol * scale:
            raise RankOneViolation(f"rank-one relation defect {defect:.3e} at z={z}")
    return ResolventSlice(complex(z), ghat)


def vertex_deleted(h: LaplacianSample, k: int) -> np.ndarray:
    """Laplacian of the submodel with vertex k removed (H tilde^(k))."""
    off = np.delete(np.delete(h.offdiag, k, axis=0), k, axis=1)
    return laplacian_from_offdiag(off)


def minor(a: np.ndarray, k: int) -> np.ndarray:
    return np.delete(np.delete(a, k, axis=0), k, axis=1)


def error_term(h: LaplacianSample, g: np.ndarray, gk: np.ndarray, k: int) -> complex:
    """E_k from the Schur complement expansion.

    The sign of the diagonal fluctuation term is chosen so that
    G_kk = 1/(H_kk - z - m_N - E_k) holds exactly.
    """
    n = h.n
    hk = np.delete(h.offdiag[k], k)
    quad_full = hk @ gk @ hk
    diag = np.diag(gk)
    offdiag = quad_full - np.sum(hk * hk * diag)
    m_n = np.trace(g) / n
    m_k = np.trace(gk) / n
    return complex(offdiag + np.sum((hk * hk - 1.0 / n) * diag) - (m_n - m_k))


def _rel(defect: float, scale: float) -> float:
    return float(defect) / max(float(scale), 1e-300)


def identity_defects(h: LaplacianSample, z: complex, k: int, r: ProjectionBasis | None = None) -> dict[str, float]:
    """Relative defects of the exact resolvent identities at (z, k)."""
    a = h.matrix
    size = a.shape[0]
    eta = z.imag
    g = resolvent(a, z).entries
    hm = minor(a, k)
    gk = np.linalg.solve(hm - z * np.eye(size - 1), np.eye(size - 1, dtype=complex))
    ht = vertex_deleted(h, k)
    gt = np.linalg.solve(ht - z * np.eye(size - 1), np.eye(size - 1, dtype=complex))
    hk = np.delete(h.offdiag[k], k)
    gkk = g[k, k]
    gmax = float(np.abs(g).max())
    out = {}

    schur = 1.0 / (a[k, k] - z - hk @ gk @ hk)
    out["schur"] = _rel(abs(gkk - schur), abs(gkk))

    gik = np.delete(g[:, k], k)
    gkj = np.delete(g[k, :], k)
    g_minor = minor(g, k)
    out["minor"] = _rel(np.abs(g_minor - gk - np.outer(gik, gkj) / gkk).max(), gmax)

    out["row"] = _rel(np.abs(gik + gkk * (gk @ hk)).max(), gmax)

    ward = 0.0
    for mat in (g, gk, gt):
        lhs = np.sum(np.abs(mat) ** 2, axis=1)
        rhs = np.diag(mat).imag / eta
        ward = max(ward, _rel(np.abs(lhs - rhs).max(), np.abs(rhs).max()))
    out["ward"] = ward

    d = hk  # H^(k) = H tilde^(k) - diag(h_ik)
    left = gt + (gk * d[None, :]) @ gt
    right = gt + (gt * d[None, :]) @ gk
    scale = max(float(np.abs(gk).max()), 1.0)
    out["tilde"] = _rel(max(np.abs(gk - left).max(), np.abs(gk - right).max()), scale)

    ek = error_term(h, g, gk, k)
    m_n = np.trace(g) / h.n
    out["error_term"] = _rel(abs(gkk - 1.0 / (a[k, k] - z - m_n - ek)), abs(gkk))

    if r is not None:
        ghat = resolvent_hat(a, z, r, verify=False).entries
        e = constant_vector(size)
        out["rank_one"] = _rel(np.abs(ghat - g - np.outer(e, e) / z).max(), max(gmax, 1.0 / abs(z)))
    return out


def identity_suite(h: LaplacianSample, z: complex, k: int, r: ProjectionBasis | None = None,
                   tol: float = 1e-9) -> VerificationReport:
    rep = VerificationReport("identities")
    for name, val in identity_defects(h, z, k, r).items():
        rep.check(f"{name} relative defect", val, tol)
    rep.seed = h.seed
    rep.trials = 1
    return rep


def export_spectrum(s: Spectrum, csv_path, blob_path=None, seed: int = 0) -> None:
    write_rows_csv(csv_path, ["index", "eigenvalue"], enumerate(s.eigenvalues))
    if blob_path is not None and s.eigenvectors is not None:
        _save_blob(blob_path, s.eigenvectors, seed)
