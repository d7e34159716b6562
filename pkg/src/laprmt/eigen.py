"""Dense symmetric eigensolver: Householder tridiagonalization + implicit QL.

The native path is self-contained (numpy for the BLAS-2 reflector updates,
numba for the QL sweeps).  ``backend="lapack"`` delegates to
``numpy.linalg.eigh`` and exists for throughput in large Monte Carlo runs.
"""
from __future__ import annotations

import math

import numba
import numpy as np

from .errors import NonConvergence

MAX_SWEEPS = 50
BACKENDS = ("native", "lapack")


def tridiagonalize(a: np.ndarray, want_q: bool = True):
    """Reduce symmetric ``a`` to tridiagonal form ``a = Q T Q^T``.

    Returns ``(d, e, q)`` with ``d`` the diagonal, ``e`` the sub-diagonal
    (length n-1) and ``q`` orthogonal (``None`` when ``want_q`` is false).
    """
    a = np.array(a, dtype=np.float64, copy=True)
    n = a.shape[0]
    e = np.zeros(max(n - 1, 0))
    reflectors = []
    for k in range(n - 2):
        x = a[k + 1:, k]
        sigma = float(np.dot(x[1:], x[1:]))
        if sigma == 0.0:
            e[k] = x[0]
            reflectors.append(None)
            continue
        norm = math.sqrt(x[0] * x[0] + sigma)
        alpha = -norm if x[0] >= 0.0 else norm
        v = x.copy()
        v[0] -= alpha
        beta = 2.0 / float(np.dot(v, v))
        s = a[k + 1:, k + 1:]
        p = beta * (s @ v)
        w = p - (0.5 * beta * float(np.dot(p, v))) * v
        s -= np.outer(v, w)
        s -= np.outer(w, v)
        e[k] = alpha
        reflectors.append((v, beta))
    if n >= 2:
        e[n - 2] = a[n - 1, n - 2]
    d = np.diag(a).copy()
    if not want_q:
        return d, e, None
    q = np.eye(n)
    for k in range(len(reflectors) - 1, -1, -1):
        r = reflectors[k]
        if r is None:
            continue
        v, beta = r
        block = q[k + 1:, k + 1:]
        block -= np.outer(beta * v, v @ block)
    return d, e, q


@numba.njit(cache=True)
def _tql(d, e, zt, want_vectors):
    # d: diagonal (n), e: sub-diagonal padded to length n, zt: rows rotate
    n = d.shape[0]
    m_rows = zt.shape[1]
    eps = 2.220446049250313e-16
    tiny = 2.2250738585072014e-308  # absolute floor so subnormal blocks deflate
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * dd + tiny:
                    break
                m += 1
            if m == l:
                break
            if it == 50:
                return l
            it += 1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + (r if g >= 0.0 else -r))
            s = 1.0
            c = 1.0
            p = 0.0
            i = m - 1
            underflow = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if want_vectors:
                    for k in range(m_rows):
                        f = zt[i + 1, k]
                        zt[i + 1, k] = s * zt[i, k] + c * f
                        zt[i, k] = c * zt[i, k] - s * f
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return -1


def tridiagonal_eigen(d, e, q=None):
    """Eigenpairs of the tridiagonal (d, e); eigenvectors are rotated from ``q``."""
    n = len(d)
    dd = np.array(d, dtype=np.float64, copy=True)
    ee = np.zeros(n)
    ee[: n - 1] = e
    want = q is not None
    zt = np.ascontiguousarray(q.T) if want else np.zeros((1, 1))
    failed = _tql(dd, ee, zt, want)
    if failed >= 0:
        raise NonConvergence(
            f"implicit QL did not converge for eigenvalue {failed} "
            f"after {MAX_SWEEPS} sweeps"
        )
    order = np.argsort(dd, kind="stable")
    vals = dd[order]
    if not want:
        return vals, None
    return vals, np.ascontiguousarray(zt[order].T)


def eigh(a: np.ndarray, vectors: bool = True, backend: str = "native"):
    """Eigenvalues (ascending) and, optionally, orthonormal eigenvectors."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if backend == "lapack":
        if vectors:
            return np.linalg.eigh(a)
        return np.linalg.eigvalsh(a), None
    if backend != "native":
        raise ValueError(f"unknown eigen backend {backend!r}; expected one of {BACKENDS}")
    n = a.shape[0]
    if n == 0:
        return np.zeros(0), (np.zeros((0, 0)) if vectors else None)
    d, e, q = tridiagonalize(a, want_q=vectors)
    return tridiagonal_eigen(d, e, q)
