import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from laprmt import ensemble as en
from laprmt.freeconv import semicircle_cdf


def test_complete_graph_raw():
    m = en.sample_raw_laplacian(en.EnsembleSpec(n=4, q=2.0), seed=1).matrix
    assert np.all(np.diag(m) == -4.0)
    off = m[~np.eye(5, dtype=bool)]
    assert np.all(off == 1.0)


def test_empty_graph():
    m = en.bernoulli_laplacian(10, 0.0, seed=3)
    assert not m.matrix.any()


def test_rejects_p_above_one():
    with pytest.raises(ValueError):
        en.bernoulli_laplacian(10, 1.5, seed=0)
    with pytest.raises(ValueError):
        en.EnsembleSpec(n=100, q=11.0)


def test_mean_degree():
    spec = en.EnsembleSpec(n=1000, q=10.0)
    degs = [en.sample_raw_laplacian(spec, s).offdiag.sum(axis=1).mean() for s in range(100)]
    # each row degree is Binomial(N, p); the row mean over N+1 rows has tiny variance
    p = spec.p
    se = math.sqrt(1000 * p * (1 - p) / 1001 / 100) * math.sqrt(2)
    assert abs(np.mean(degs) - 100.0) < 3 * se + 1e-9


def test_triu_from_linear_matches_numpy():
    for size in (2, 3, 7, 50):
        iu = np.triu_indices(size, 1)
        i, j = en.triu_from_linear(np.arange(len(iu[0])), size)
        assert np.array_equal(i, iu[0]) and np.array_equal(j, iu[1])


def test_sparse_sampler_edge_frequency():
    # geometric skipping must give every position probability p
    size, p = 40, 0.05
    counts = np.zeros((size, size))
    for s in range(400):
        m = en.bernoulli_laplacian(size - 1, p, seed=s).offdiag
        counts += m
    iu = np.triu_indices(size, 1)
    freq = counts[iu].mean() / 400
    se = math.sqrt(p * (1 - p) / (400 * len(iu[0])))
    assert abs(freq - p) < 5 * se


def test_center_and_rescale_value():
    spec = en.EnsembleSpec(n=1000, q=10.0)
    raw = np.zeros((1001, 1001))
    raw[0, 1] = raw[1, 0] = 1.0
    h = en.center_and_rescale(en.LaplacianSample(raw, 0, "raw"), spec)
    assert h.offdiag[0, 1] == pytest.approx(0.09 / math.sqrt(0.9), rel=1e-12)
    assert h.offdiag[0, 1] == pytest.approx(0.094868, abs=1e-6)


def test_bernoulli_moments_exact():
    for n, q in ((1000, 10.0), (500, 3.0), (50, 7.0)):
        mean, var = en.bernoulli_mean_variance(n, q)
        assert abs(mean) < 1e-15
        assert var == pytest.approx(1.0 / n, rel=1e-12)


def test_bernoulli_variance_sampled():
    spec = en.EnsembleSpec.from_exponent(1000, 0.35)
    gen = np.random.default_rng(5)
    p = spec.p
    m = (gen.random(10 ** 6) < p).astype(float)
    s = math.sqrt(1 - p)
    h = m / (spec.q * s) - spec.q / (spec.n * s)
    h2 = h * h
    assert abs(h2.mean() - 1 / spec.n) < 5 * h2.std() / math.sqrt(h2.size)


def test_third_moment_bound():
    spec = en.EnsembleSpec.from_exponent(1000, 0.35)
    exact = en.bernoulli_abs_moment(3, spec.n, spec.q) * spec.n * spec.q
    p = spec.p
    # closed form (1 - 2p + 2p^2)/sqrt(1 - p)
    assert exact == pytest.approx((1 - 2 * p + 2 * p * p) / math.sqrt(1 - p), rel=1e-12)
    h = en.sample_laplacian_type(spec, 11).offdiag[np.triu_indices(1001, 1)]
    assert np.mean(np.abs(h) ** 3) * spec.n * spec.q <= 2.0


def test_reconstruct_raw_round_trip():
    spec = en.EnsembleSpec.from_exponent(300, 0.4)
    raw = en.sample_raw_laplacian(spec, 8)
    h = en.center_and_rescale(raw, spec)
    assert np.abs(en.reconstruct_raw(h, spec) - raw.matrix).max() < 1e-10


def test_degenerate_branch():
    spec = en.EnsembleSpec(n=16, q=4.0)
    assert spec.degenerate
    h = en.sample_laplacian_type(spec, 0)
    assert h.degenerate
    r = en.projection_basis(16)
    vals = np.linalg.eigvalsh(en.project_out_trivial(h, r))
    assert np.allclose(vals, -17.0 / 4.0, atol=1e-12)


def test_gaussian_n1_structure():
    h = en.sample_laplacian_type(en.EnsembleSpec(n=1, q=1.0, entry_law=en.GAUSSIAN), 4).matrix
    x = h[0, 1]
    assert np.array_equal(h, np.array([[-x, x], [x, -x]]))


@given(n=st.integers(1, 60), q_exp=st.floats(0.05, 0.5), seed=st.integers(0, 2 ** 63),
       law=st.sampled_from([en.BERNOULLI, en.GAUSSIAN]))
def test_structural_invariants(n, q_exp, seed, law):
    h = en.sample_laplacian_type(en.EnsembleSpec.from_exponent(n, q_exp, entry_law=law), seed)
    m = h.matrix
    assert np.array_equal(m, m.T)
    e = en.constant_vector(n + 1)
    scale = max(1.0, np.abs(m).max())
    assert np.abs(m.sum(axis=1)).max() < 1e-12 * scale * (n + 1)
    assert np.abs(m @ e).max() < 1e-12 * scale * (n + 1)


def test_sampling_is_reproducible():
    spec = en.EnsembleSpec.from_exponent(200, 0.3)
    a = en.sample_laplacian_type(spec, 99).offdiag
    b = en.sample_laplacian_type(spec, 99).offdiag
    c = en.sample_laplacian_type(spec, 100).offdiag
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_sample_is_immutable():
    h = en.sample_laplacian_type(en.EnsembleSpec(n=5, q=2.0), 1)
    with pytest.raises(ValueError):
        h.offdiag[0, 1] = 3.0


def test_custom_law_checks():
    n, q = 100, 5.0
    sd = 1 / math.sqrt(n)
    ok = en.CustomLaw(lambda u: sd * (2 * (u > 0.5) - 1.0), 0.0, 1 / n, {3: sd ** 3})
    spec = en.EnsembleSpec(n=n, q=q, entry_law=en.CUSTOM, custom=ok)
    assert np.allclose(np.abs(en.sample_laplacian_type(spec, 1).offdiag[0, 1:]), sd)
    with pytest.raises(ValueError):
        en.check_custom_law(en.CustomLaw(lambda u: u, 0.1, 1 / n), n, q)
    with pytest.raises(ValueError):
        en.check_custom_law(en.CustomLaw(lambda u: u, 0.0, 2 / n), n, q)


def test_goe_variances():
    mats = [en.sample_goe(100, s) for s in range(200)]
    d = np.concatenate([np.diag(g) for g in mats])
    o = np.concatenate([g[np.triu_indices(100, 1)] for g in mats])
    assert d.size + o.size >= 10 ** 5
    assert abs(d.var() / o.var() - 2.0) < 0.1
    assert abs(o.var() * 100 - 1.0) < 0.02
    one = np.array([en.sample_goe(1, s)[0, 0] for s in range(4000)])
    assert abs(one.var() / 2.0 - 1.0) < 0.1


def test_goe_semicircle():
    vals = np.linalg.eigvalsh(en.sample_goe(1000, 2))
    emp = np.arange(1, 1001) / 1000
    assert np.abs(emp - semicircle_cdf(vals)).max() < 0.02


def test_projection_basis_small():
    r = en.projection_basis(1).matrix
    assert np.allclose(r[:, 0], [1 / math.sqrt(2), -1 / math.sqrt(2)], atol=1e-15)


def test_projection_basis_orthonormal():
    r = en.projection_basis(100)
    rm = r.matrix
    assert np.abs(rm.T @ rm - np.eye(100)).max() < 1e-12
    assert np.abs(rm.T @ en.constant_vector(101)).max() < 1e-12
    first = rm[np.argmax(np.abs(rm) > 1e-14, axis=0), np.arange(100)]
    assert np.all(first > 0)
    again = en.projection_basis(100).matrix
    assert np.array_equal(rm, again)


@given(n=st.integers(1, 40), seed=st.integers(0, 2 ** 32))
def test_conjugate_matches_dense(n, seed):
    r = en.projection_basis(n)
    h = en.sample_laplacian_type(en.EnsembleSpec(n=n, q=1.0, entry_law=en.GAUSSIAN), seed).matrix
    dense = r.matrix.T @ h @ r.matrix
    assert np.abs(r.conjugate(h) - dense).max() < 1e-12 * max(1.0, np.abs(h).max()) * n
    x = np.random.default_rng(seed).standard_normal(n)
    assert np.abs(r.lift(x) - r.matrix @ x).max() < 1e-13 * n


def test_projected_spectrum_matches_full():
    spec = en.EnsembleSpec.from_exponent(200, 0.35)
    h = en.sample_laplacian_type(spec, 3)
    r = en.projection_basis(200)
    proj = np.sort(np.append(np.linalg.eigvalsh(en.project_out_trivial(h, r)), 0.0))
    full = np.linalg.eigvalsh(h.matrix)
    assert np.abs(proj - full).max() < 1e-9


def test_projected_trace():
    w = en.sample_gaussian_laplacian(30, 5).matrix
    r = en.projection_basis(30)
    e = en.constant_vector(31)
    assert abs(np.trace(r.conjugate(w)) - (np.trace(w) - e @ w @ e)) < 1e-10


def test_project_dimension_mismatch():
    with pytest.raises(ValueError):
        en.project_out_trivial(np.eye(5), en.projection_basis(5))


def test_covariance_oracle_values():
    assert en.entry_covariance_oracle(0, 1, 0, 1, 3) == pytest.approx(1 / 3)
    for n in (1, 5, 40):
        assert en.entry_covariance_oracle(0, 0, 0, 0, n) == pytest.approx(1.0)
    assert en.entry_covariance_oracle(0, 0, 1, 1, 10) == pytest.approx(0.1)


def test_covariance_oracle_matches_enumeration():
    # closed form vs. direct sum over the edge variables w_ab (a < b)
    n = 4
    size = n + 1
    edges = [(a, b) for a in range(size) for b in range(a + 1, size)]

    def coeffs(i, j):
        c = np.zeros(len(edges))
        for t, (a, b) in enumerate(edges):
            if i != j:
                c[t] = 1.0 if {a, b} == {i, j} else 0.0
            else:
                c[t] = -1.0 if i in (a, b) else 0.0
        return c

    for i in range(size):
        for j in range(size):
            for k in range(size):
                for l in range(size):
                    direct = coeffs(i, j) @ coeffs(k, l) / n
                    assert en.entry_covariance_oracle(i, j, k, l, n) == pytest.approx(direct, abs=1e-14)


def test_decomposition_mean_zero():
    n = 6
    r = en.projection_basis(n)
    xs = np.stack([en.decompose_gaussian(n, s, r) for s in range(4000)])
    z = np.abs(xs.mean(axis=0)) / (xs.std(axis=0) / math.sqrt(len(xs)))
    assert z.max() < 5.0
