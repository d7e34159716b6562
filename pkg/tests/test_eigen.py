import numpy as np
import pytest
from hypothesis import example, given, strategies as st
from hypothesis.extra.numpy import arrays

from laprmt import eigen
from laprmt.errors import NonConvergence


def _sym(gen, n):
    a = gen.normal(size=(n, n))
    return (a + a.T) / 2


@pytest.mark.parametrize("n", [1, 2, 3, 10, 120])
def test_native_matches_lapack(gen, n):
    a = _sym(gen, n)
    vals, vecs = eigen.eigh(a, backend="native")
    ref = np.linalg.eigvalsh(a)
    assert np.abs(vals - ref).max() < 1e-10 * max(1.0, np.abs(ref).max())
    assert np.abs(a @ vecs - vecs * vals).max() < 1e-10 * max(1.0, np.abs(ref).max())
    assert np.abs(vecs.T @ vecs - np.eye(n)).max() < 1e-12


def test_values_only_and_order(gen):
    a = _sym(gen, 40)
    vals, vecs = eigen.eigh(a, vectors=False)
    assert vecs is None
    assert np.all(np.diff(vals) >= 0)


def test_tridiagonal_reduction(gen):
    a = _sym(gen, 30)
    d, e, q = eigen.tridiagonalize(a)
    t = np.diag(d) + np.diag(e, 1) + np.diag(e, -1)
    assert np.abs(q @ t @ q.T - a).max() < 1e-12


def test_empty_and_diagonal():
    vals, vecs = eigen.eigh(np.zeros((0, 0)))
    assert vals.size == 0 and vecs.shape == (0, 0)
    vals, _ = eigen.eigh(np.diag([2.0, -1.0, 0.5]))
    assert np.array_equal(vals, [-1.0, 0.5, 2.0])


def test_nonconvergence_reports_index():
    # NaN entries defeat the deflation test, so the first eigenvalue never converges
    a = np.full((3, 3), np.nan)
    with pytest.raises(NonConvergence, match="eigenvalue 0"):
        eigen.eigh(a)


def test_bad_input():
    with pytest.raises(ValueError):
        eigen.eigh(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        eigen.eigh(np.eye(2), backend="magma")


@given(arrays(np.float64, (6, 6), elements=st.floats(-10, 10)))
@example(np.full((6, 6), 5e-324))  # subnormal entries must still deflate
def test_native_invariants(x):
    a = (x + x.T) / 2
    vals, vecs = eigen.eigh(a)
    scale = max(1.0, np.abs(a).max())
    assert abs(vals.sum() - np.trace(a)) < 1e-10 * scale * 6
    assert np.abs(vecs.T @ vecs - np.eye(6)).max() < 1e-10
    assert np.abs(vals - np.linalg.eigvalsh(a)).max() < 1e-10 * scale
