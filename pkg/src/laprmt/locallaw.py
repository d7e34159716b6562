"""Monte Carlo checks of the local law, rigidity, delocalization and
concentration, and the colored-graph sums with their bounds."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import freeconv, rng
from .domain import SpectralDomain, build_domain, control_psi  # noqa: F401  (re-exported)
from .ensemble import EnsembleSpec, projection_basis, sample_laplacian_type, sample_goe
from .errors import TooLarge
from .parallel import map_trials
from .report import VerificationReport, smallest_passing
from .spectra import projected_spectrum, vertex_deleted

C_SWEEP = (1, 2, 5, 10)


def trial_seed(seed: int, trial: int) -> int:
    return rng.derive_seed(seed, trial)


def _m_n(lam: np.ndarray, z: np.ndarray, n: int, chunk: int = 256) -> np.ndarray:
    """(1/N) Tr G over the nontrivial eigenvalues plus the trivial term -1/z."""
    out = np.empty(z.shape, dtype=complex)
    for s in range(0, len(z), chunk):
        zz = z[s:s + chunk]
        out[s:s + chunk] = (1.0 / (lam[:, None] - zz[None, :])).sum(axis=0) - 1.0 / zz
    return out / n


def entrywise_defect(h, vals, vecs, z: complex, mfc: complex) -> float:
    """max_ij |G_ij - delta_ij / (-sum_k h_ik - z - m_fc)|."""
    n = len(vals)
    g = (vecs / (vals - z)) @ vecs.T
    e = np.full(n + 1, 1.0 / math.sqrt(n + 1))
    g -= np.outer(e, e) / z
    diag = h.diagonal  # equals -sum_k h_ik
    g[np.diag_indices(n + 1)] -= 1.0 / (diag - z - mfc)
    return float(np.abs(g).max())


def locallaw_report(spec: EnsembleSpec, domain: SpectralDomain, trials: int, seed: int,
                    threads=1, entrywise_points: int = 6) -> VerificationReport:
    """|m_N - m_fc| over the domain, and the entrywise defect on a subset of z."""
    n = spec.n
    mfc = freeconv.solve_mfc(domain.z)
    scale = spec.xi * control_psi(domain.z.imag, n, spec.q)
    r = projection_basis(n)
    d1 = np.flatnonzero(domain.region == "D1")
    # entrywise defect is O(N^3) per point, so it runs on a thinned D1 subset
    pick = d1[np.linspace(0, len(d1) - 1, min(entrywise_points, len(d1))).astype(int)] if len(d1) else d1

    def one(t):
        h = sample_laplacian_type(spec, trial_seed(seed, t))
        s = projected_spectrum(h, r, vectors=len(pick) > 0)
        d = np.abs(_m_n(s.eigenvalues, domain.z, n) - mfc)
        ent = np.array([entrywise_defect(h, s.eigenvalues, s.eigenvectors, domain.z[i], mfc[i]) for i in pick])
        return d, ent

    results = map_trials(one, trials, threads)
    defects = np.stack([x[0] for x in results])
    ent = np.stack([x[1] for x in results]) if len(pick) else np.zeros((trials, 0))
    rep = VerificationReport("locallaw", trials=trials, seed=seed)
    ratio = defects / scale
    for reg in ("D0", "D1", "D2"):
        sel = domain.region == reg
        if not sel.any():
            continue
        vals = ratio[:, sel]
        best, fracs = smallest_passing(vals.ravel(), 1.0, C_SWEEP)
        rep.stats[reg] = {
            "points": int(sel.sum()),
            "sup_defect": float(defects[:, sel].max()),
            "quantiles_ratio": {str(qq): float(np.quantile(vals, qq)) for qq in (0.5, 0.9, 0.95, 0.99, 1.0)},
            "fraction_within_C": fracs,
            "smallest_C_all_points": best,
        }
    if d1.size:
        per_trial = np.mean(ratio[:, d1] <= 5.0, axis=1)
        rep.stats["D1_fraction_within_5_per_trial"] = per_trial
        rep.stats["D1_sup_defect_per_trial"] = defects[:, d1].max(axis=1)
        rep.check("min over trials of D1 fraction with defect <= 5 xi Psi", per_trial.min(), 0.95, ">=")
        eta2 = d1[np.isclose(domain.z.imag[d1], 2.0)]
        if eta2.size:
            rep.stats["eta2_max_defect"] = float(defects[:, eta2].max())
    if ent.size:
        ent_ratio = ent / scale[pick][None, :]
        best, fracs = smallest_passing(ent_ratio.ravel(), 1.0, C_SWEEP)
        rep.stats["entrywise"] = {"points": [[float(z.real), float(z.imag)] for z in domain.z[pick]],
                                  "max_ratio": float(ent_ratio.max()), "fraction_within_C": fracs,
                                  "smallest_C_all_points": best}
    return rep


def sup_defect_d1(spec: EnsembleSpec, trials: int, seed: int, l: float = 5.0, threads=1,
                  per_decade: int = 8, e_step: float = 0.25) -> np.ndarray:
    """Per-trial sup over the D1 grid of |m_N - m_fc|."""
    dom = build_domain(l, spec.n, spec.nu, per_decade, e_step, regions=("D1",))
    mfc = freeconv.solve_mfc(dom.z)
    r = projection_basis(spec.n)

    def one(t):
        h = sample_laplacian_type(spec, trial_seed(seed, t))
        lam = projected_spectrum(h, r).eigenvalues
        return float(np.abs(_m_n(lam, dom.z, spec.n) - mfc).max())

    return np.array(map_trials(one, trials, threads))


def bulk_indices(n: int, kappa: float) -> np.ndarray:
    """0-based positions of the 1-based indices in [[kappa N, (1 - kappa) N]]."""
    lo = max(1, math.ceil(kappa * n))
    hi = min(n, math.floor((1 - kappa) * n))
    if hi < lo:
        raise ValueError("empty bulk window")
    return np.arange(lo, hi + 1) - 1


def rigidity_report(spec: EnsembleSpec, kappa: float, trials: int, seed: int, threads=1) -> VerificationReport:
    if not (0 < kappa < 0.5) or kappa * spec.n < 1:
        raise ValueError("need 0 < kappa < 1/2 and kappa N >= 1")
    rep = VerificationReport("rigidity", trials=trials, seed=seed)
    if spec.degenerate:
        rep.stats["flag"] = "complete-graph case has an atomic spectrum; not scored"
        return rep
    n = spec.n
    gamma = freeconv.classical_locations(n).gamma
    idx = bulk_indices(n, kappa)
    r = projection_basis(n)
    scale = spec.xi ** 2 / spec.q

    def one(t):
        lam = projected_spectrum(sample_laplacian_type(spec, trial_seed(seed, t)), r).eigenvalues
        return float(np.abs(lam[idx] - gamma[idx]).max()) / scale

    vals = np.array(map_trials(one, trials, threads))
    rep.stats.update(per_trial=vals, median=float(np.median(vals)), scale=scale)
    rep.check("max bulk |lambda_i - gamma_i| / (xi^2/q)", vals.max(), 10.0)
    return rep


def delocalization_stat(vectors: np.ndarray, idx: np.ndarray, n: int, xi: float) -> float:
    """max over columns idx of N ||u||_inf^2 / xi^3."""
    u = vectors[:, idx]
    return float(n * (np.abs(u).max(axis=0) ** 2).max() / xi ** 3)


def delocalization_report(spec: EnsembleSpec, kappa: float, trials: int, seed: int, threads=1,
                          goe_control: bool = False) -> VerificationReport:
    n = spec.n
    idx = bulk_indices(n, kappa)
    r = projection_basis(n)
    rep = VerificationReport("delocalization", trials=trials, seed=seed)

    def one(t):
        s = projected_spectrum(sample_laplacian_type(spec, trial_seed(seed, t)), r, vectors=True)
        return delocalization_stat(s.eigenvectors, idx, n, spec.xi)

    vals = np.array(map_trials(one, trials, threads))
    rep.stats.update(per_trial=vals, median=float(np.median(vals)))
    rep.check("max bulk N ||u_i||_inf^2 / xi^3", vals.max(), 10.0)
    if goe_control:
        def ctrl(t):
            _, v = np.linalg.eigh(sample_goe(n, trial_seed(seed, t)))
            return delocalization_stat(v, idx, n, spec.xi)
        g = np.array(map_trials(ctrl, trials, threads))
        rep.stats["goe_control"] = g
        rep.check("GOE control max below Laplacian max", g.max(), vals.max(), "<", acceptance=False)
    return rep


def concentration_check(spec: EnsembleSpec, z: complex, trials: int, seed: int, threads=1) -> VerificationReport:
    """|mean_k 1/(-sum_i h_ik - z - m_fc) - m_fc| / (xi/q); the mean runs over all N+1 rows."""
    mfc = freeconv.solve_mfc(z)

    def one(t):
        h = sample_laplacian_type(spec, trial_seed(seed, t))
        return concentration_defect(h.diagonal, z, mfc)

    vals = np.array(map_trials(one, trials, threads)) / (spec.xi / spec.q)
    rep = VerificationReport("concentration", trials=trials, seed=seed)
    rep.stats.update(per_trial=vals, m_fc=[mfc.real, mfc.imag])
    rep.check("max normalized concentration defect", vals.max(), 5.0)
    return rep


def concentration_defect(diagonal: np.ndarray, z: complex, mfc: complex) -> float:
    return float(abs(np.mean(1.0 / (diagonal - z - mfc)) - mfc))


# --- colored graphs -------------------------------------------------------

@dataclass(frozen=True)
class ColoredGraph:
    """Black vertices 0..m-1, white vertices m, m+1 with fixed matrix indices."""

    black_count: int
    white_indices: tuple = ()
    edges: tuple = ()

    def __post_init__(self):
        if self.black_count < 0 or len(self.white_indices) > 2:
            raise ValueError("need m >= 0 black and at most 2 white vertices")
        total = self.black_count + len(self.white_indices)
        edges = tuple(tuple(sorted((int(a), int(b)))) for a, b in self.edges)
        for a, b in edges:
            if not (0 <= a < total and 0 <= b < total):
                raise ValueError(f"edge ({a}, {b}) out of range")
        object.__setattr__(self, "edges", tuple(sorted(edges)))
        object.__setattr__(self, "white_indices", tuple(int(i) for i in self.white_indices))

    @property
    def vertex_count(self) -> int:
        return self.black_count + len(self.white_indices)

    def is_white(self, v: int) -> bool:
        return v >= self.black_count

    def components(self) -> list[set[int]]:
        parent = list(range(self.vertex_count))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a, b in self.edges:
            parent[find(a)] = find(b)
        comps: dict[int, set[int]] = {}
        for v in range(self.vertex_count):
            comps.setdefault(find(v), set()).add(v)
        return list(comps.values())

    def connected(self) -> bool:
        return len(self.components()) <= 1


@dataclass(frozen=True)
class Partition:
    blocks: tuple

    def __post_init__(self):
        blocks = tuple(tuple(sorted(int(x) for x in b)) for b in self.blocks)
        if any(len(b) == 0 for b in blocks):
            raise ValueError("partition blocks must be nonempty")
        object.__setattr__(self, "blocks", tuple(sorted(blocks)))

    def validate(self, m: int) -> None:
        flat = [x for b in self.blocks for x in b]
        if sorted(flat) != list(range(m)) :
            raise ValueError(f"partition must cover the black labels 0..{m - 1} exactly once")

    @classmethod
    def singletons(cls, m: int) -> "Partition":
        return cls(tuple((i,) for i in range(m)))


def quotient_graph(g: ColoredGraph, p: Partition) -> ColoredGraph:
    """Merge black vertices blockwise; edges map through phi with multiplicity."""
    p.validate(g.black_count)
    k = len(p.blocks)
    phi = {}
    for j, block in enumerate(p.blocks):
        for v in block:
            phi[v] = j
    for w in range(len(g.white_indices)):
        phi[g.black_count + w] = k + w
    edges = tuple((phi[a], phi[b]) for a, b in g.edges)
    return ColoredGraph(k, g.white_indices, edges)


MAX_BLACK = 4
_LETTERS = "abcdefgh"


def _local_index(i: int, k: int) -> int:
    if i == k:
        raise ValueError("white index must differ from the deleted vertex k")
    return i - 1 if i > k else i


def graph_sum_value(g: ColoredGraph, gtilde, k: int, cap: int = MAX_BLACK) -> float:
    """V(G, k) = N^{-m} sum over black indices of prod |G~_{i_a i_b}|.

    ``gtilde`` is the N x N resolvent of the vertex-deleted model; white
    vertices carry indices of the full (N+1)-dimensional matrix.  ``cap``
    bounds the number of black vertices.
    """
    a = np.abs(getattr(gtilde, "entries", gtilde))
    n = a.shape[0]
    m = g.black_count
    if m > cap:
        raise TooLarge(f"{m} black vertices exceeds the cap {cap}")
    whites = [_local_index(i, k) for i in g.white_indices]
    scalar = 1.0
    operands, subs = [], []
    for u, v in g.edges:
        wu, wv = g.is_white(u), g.is_white(v)
        if wu and wv:
            scalar *= a[whites[u - m], whites[v - m]]
        elif wu or wv:
            b, w = (v, u) if wu else (u, v)
            operands.append(a[:, whites[w - m]])
            subs.append(_LETTERS[b])
        elif u == v:
            operands.append(np.diag(a).copy())
            subs.append(_LETTERS[u])
        else:
            operands.append(a)
            subs.append(_LETTERS[u] + _LETTERS[v])
    # black vertices untouched by edges sum to a factor N each
    touched = set("".join(subs))
    free = sum(1 for b in range(m) if _LETTERS[b] not in touched)
    total = float(np.einsum(",".join(subs) + "->", *operands, optimize=True)) if operands else 1.0
    return scalar * total * float(n) ** free / float(n) ** m


def graph_sum_naive(g: ColoredGraph, gtilde, k: int) -> float:
    """Direct loop over all index tuples; oracle for small m and N."""
    a = np.abs(getattr(gtilde, "entries", gtilde))
    n = a.shape[0]
    m = g.black_count
    whites = [_local_index(i, k) for i in g.white_indices]
    total = 0.0
    for idx in itertools.product(range(n), repeat=m):
        lab = list(idx) + whites
        prod = 1.0
        for u, v in g.edges:
            prod *= a[lab[u], lab[v]]
        total += prod
    return total / n ** m


def graph_sum_bound(g: ColoredGraph, n: int, eta: float, c_star: float | None = None,
                    c_value: float | None = None) -> float:
    """C^E (N eta)^{-(m-1)/2}, or (N eta)^{-m/2} with a white vertex.

    For a disconnected graph the bound is the product over components.
    ``c_value`` overrides C = max(2/c_*, 1).
    """
    c = c_value if c_value is not None else max(2.0 / c_star, 1.0)
    ne = n * eta
    out = 1.0
    for comp in g.components():
        blacks = sum(1 for v in comp if not g.is_white(v))
        ecount = sum(1 for a, b in g.edges if a in comp)
        has_white = any(g.is_white(v) for v in comp)
        expo = blacks / 2.0 if has_white else max(blacks - 1, 0) / 2.0
        out *= c ** ecount * ne ** (-expo)
    return out


def random_connected_graph(gen: np.random.Generator, size: int, max_black: int = 3, max_edges: int = 4,
                           k: int = 0) -> ColoredGraph:
    """Random spanning tree over all vertices plus extra edges (loops allowed)."""
    while True:
        m = int(gen.integers(1, max_black + 1))
        whites = int(gen.integers(0, 3))
        v = m + whites
        if v - 1 <= max_edges:
            break
    others = [i for i in range(size) if i != k]
    white_idx = tuple(int(x) for x in gen.choice(others, size=whites, replace=True))
    order = gen.permutation(v)
    edges = [(int(order[j]), int(order[gen.integers(0, j)])) for j in range(1, v)]
    extra = int(gen.integers(0, max_edges - len(edges) + 1))
    for _ in range(extra):
        a, b = gen.integers(0, v, size=2)
        edges.append((int(a), int(b)))
    return ColoredGraph(m, white_idx, tuple(edges))


def graph_sum_sweep(spec: EnsembleSpec, eta: float = 0.5, graphs: int = 50, resolvents: int = 50,
                    seed: int = 0, l: float = 5.0, threads=1) -> VerificationReport:
    """V(G,k) against the graph-sum bound for sampled G~^(k) on the event Xi."""
    n = spec.n
    cs = freeconv.c_star(l, n, spec.nu)
    c_an = max(2.0 / cs, 1.0)
    gen = rng.stream(seed, "index")
    glist = [random_connected_graph(gen, n + 1, 3, 4) for _ in range(graphs)]

    def one(t):
        s = trial_seed(seed, t)
        h = sample_laplacian_type(spec, s)
        g2 = rng.stream(s, "spectral")
        k = int(g2.integers(0, n + 1))
        e = float(g2.uniform(-2.0, 2.0))
        ht = vertex_deleted(h, k)
        gt = np.linalg.solve(ht - (e + 1j * eta) * np.eye(n), np.eye(n, dtype=complex))
        gmax = float(np.abs(gt).max())
        if gmax > 2.0 / cs:
            return None
        c_emp = max(gmax, 1.0)
        worst_an = worst_emp = 0.0
        exact = True
        for g in glist:
            gg = ColoredGraph(g.black_count, tuple(i if i != k else (k + 1) % (n + 1) for i in g.white_indices),
                              g.edges)
            v = graph_sum_value(gg, gt, k)
            worst_an = max(worst_an, v / graph_sum_bound(gg, n, eta, cs))
            worst_emp = max(worst_emp, v / graph_sum_bound(gg, n, eta, c_value=c_emp))
            q = quotient_graph(gg, Partition.singletons(gg.black_count))
            exact &= graph_sum_value(q, gt, k) == v
        return worst_an, worst_emp, exact, gmax

    res = map_trials(one, resolvents, threads)
    kept = [x for x in res if x is not None]
    rep = VerificationReport("graphsum", trials=resolvents, seed=seed)
    rep.stats.update(c_star=cs, C=c_an, excluded=resolvents - len(kept),
                     exclusion_rate=(resolvents - len(kept)) / resolvents, graphs=graphs,
                     max_resolvent_entry=max((x[3] for x in kept), default=float("nan")))
    rep.check("max V / bound (C = max(2/c_*, 1))", max(x[0] for x in kept), 1.0)
    rep.check("max V / bound (C = max |G~|)", max(x[1] for x in kept), 1.0)
    rep.check("singleton quotient mismatches", sum(not x[2] for x in kept), 0)
    return rep
