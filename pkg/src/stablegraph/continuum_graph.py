"""Finite measured metric spaces: R-trees from excursions, identifications,
GHP bounds and estimates, discrete components and limit-component proxies."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import networkx as nx
import numpy as np
from scipy.optimize import linprog
from scipy.sparse.csgraph import connected_components, shortest_path

from .coding_paths import close_time, height_from_walk, scaling_exponents
from .degree_model import draw_degrees, size_biased_law
from .levy_sim import LevyParams
from .paths import GridPath, MarkedExcursion


class ResamplingError(RuntimeError):
    def __init__(self, message, ess, weights):
        super().__init__(message)
        self.ess = ess
        self.weights = weights


@dataclass(frozen=True, eq=False)
class FiniteMMS:
    d: np.ndarray
    mass: np.ndarray

    def __post_init__(self):
        d = np.array(self.d, dtype=float)
        mass = np.array(self.mass, dtype=float).reshape(-1)
        k = len(mass)
        if d.shape != (k, k):
            raise ValueError("distance matrix shape does not match masses")
        if k == 0:
            raise ValueError("empty space")
        if np.any(mass < 0):
            raise ValueError("negative mass")
        if np.any(np.abs(d - d.T) > 1e-9) or np.any(np.abs(np.diag(d)) > 1e-9) or np.any(d < -1e-9):
            raise ValueError("not a pseudo-metric")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "mass", mass)

    @property
    def k(self):
        return len(self.mass)

    @property
    def total_mass(self):
        return float(self.mass.sum())

    @property
    def diameter(self):
        return float(self.d.max())

    def scaled(self, dist=1.0, mass=1.0):
        return FiniteMMS(self.d * dist, self.mass * mass)

    def to_text(self):
        buf = io.StringIO()
        buf.write(f"k={self.k}\n")
        for m in self.mass:
            buf.write(f"{float(m)!r}\n")
        for row in self.d:
            buf.write(",".join(repr(float(x)) for x in row) + "\n")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text):
        lines = [ln for ln in text.splitlines() if ln.strip()]
        k = int(lines[0].split("=", 1)[1])
        mass = [float(x) for x in lines[1:1 + k]]
        d = [[float(x) for x in ln.split(",")] for ln in lines[1 + k:1 + 2 * k]]
        return cls(np.array(d), np.array(mass))


def triangle_violation(d, stream=None, triples=None):
    """Largest d(x,z) - d(x,y) - d(y,z); exhaustive for small spaces, else sampled."""
    k = len(d)
    if triples is None and k <= 64:
        return float(np.max(d[:, None, :] - d[:, :, None] - d[None, :, :]))
    stream = np.random.default_rng(0) if stream is None else stream
    x, y, z = stream.integers(0, k, size=(3, triples or 20000))
    return float(np.max(d[x, z] - d[x, y] - d[y, z]))


class SparseTableMin:
    """Range minimum queries in O(1) after O(n log n) preprocessing."""

    def __init__(self, values):
        v = np.asarray(values, dtype=float)
        levels = [v]
        span = 1
        while 2 * span <= len(v):
            prev = levels[-1]
            levels.append(np.minimum(prev[:-span], prev[span:]))
            span *= 2
        self.levels = levels

    def query(self, lo, hi):
        """min of values[lo..hi] inclusive (arrays allowed)."""
        lo = np.asarray(lo)
        hi = np.asarray(hi)
        length = hi - lo + 1
        lvl = np.floor(np.log2(length)).astype(np.int64)
        out = np.empty(lo.shape, dtype=float)
        for j in np.unique(lvl):
            sel = lvl == j
            tab = self.levels[j]
            out[sel] = np.minimum(tab[lo[sel]], tab[hi[sel] - (1 << j) + 1])
        return out


def _as_excursion(h):
    return h if isinstance(h, MarkedExcursion) else MarkedExcursion(h)


def rtree_from_excursion(h, sample_times):
    """Points p_h(t) of the tree coded by h, with
    d_h(s, t) = h(s) + h(t) - 2 min_{[s ^ t, s v t]} h and masses given by
    the Lebesgue measure of the time cell [t_(j), t_(j+1)) of each point (the
    first cell starts at 0, the last ends at zeta)."""
    ex = _as_excursion(h)
    v = ex.values
    if np.any(v < -1e-12):
        raise ValueError("excursion takes negative values")
    times = np.asarray(sample_times, dtype=float)
    if np.any(times < -1e-12) or np.any(times > ex.zeta + 1e-9):
        raise ValueError("sample times outside [0, zeta]")
    idx = np.minimum(np.floor(times / ex.dt + 1e-9).astype(np.int64), len(v) - 1)
    rmq = SparseTableMin(v)
    a, b = np.meshgrid(idx, idx, indexing="ij")
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    d = v[a] + v[b] - 2 * rmq.query(lo, hi)
    np.fill_diagonal(d, 0.0)
    d = np.maximum(d, 0.0)
    order = np.argsort(times, kind="stable")
    st = times[order]
    bounds = np.append(st[1:], ex.zeta)
    widths = np.diff(np.concatenate([[0.0], bounds]))
    mass = np.zeros(len(times))
    mass[order] = np.maximum(widths, 0.0)
    return FiniteMMS(d, mass)


def identify_pairs(space, pairs):
    """Quotient by the identifications: shortest paths through zero-cost jumps,
    then each class of identified points becomes one point carrying the summed
    mass.  Classes keep the order of their smallest member."""
    d = space.d
    pairs = [(int(a), int(b)) for a, b in pairs]
    k = space.k
    for a, b in pairs:
        if not (0 <= a < k and 0 <= b < k):
            raise IndexError("pair index out of range")
    pairs = [(a, b) for a, b in pairs if a != b]
    if not pairs:
        return FiniteMMS(d.copy(), space.mass.copy())
    portals = sorted({i for p in pairs for i in p})
    pos = {p: j for j, p in enumerate(portals)}
    P = d[np.ix_(portals, portals)].copy()
    for a, b in pairs:
        P[pos[a], pos[b]] = P[pos[b], pos[a]] = 0.0
    for j in range(len(portals)):
        P = np.minimum(P, P[:, j, None] + P[None, j, :])
    A = d[:, portals]
    # via[x, v] = shortest distance from x to portal v using jumps
    via = np.min(A[:, :, None] + P[None, :, :], axis=1)
    new = np.minimum(d, np.min(via[:, None, :] + A[None, :, :], axis=2))
    new = np.minimum(new, new.T)
    # union-find on the identified pairs
    parent = list(range(k))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(i) for i in range(k)])
    keep = np.unique(roots)
    label = np.searchsorted(keep, roots)
    mass = np.bincount(label, weights=space.mass, minlength=len(keep))
    out = new[np.ix_(keep, keep)]
    np.fill_diagonal(out, 0.0)
    return FiniteMMS(out, mass)


def ghp_upper_bound_trees(h, g):
    """2 max{sup |h-g| on the common domain, sup of the overhangs, |zeta_h - zeta_g|/2}."""
    h, g = _as_excursion(h), _as_excursion(g)
    if not math.isclose(h.dt, g.dt, rel_tol=1e-9):
        raise ValueError("excursions must share the grid spacing")
    hv, gv = h.values, g.values
    common = min(len(hv), len(gv))
    sup_diff = float(np.max(np.abs(hv[:common] - gv[:common])))
    over = float(hv[common:].max(initial=0.0)) + float(gv[common:].max(initial=0.0))
    return 2.0 * max(sup_diff, over, abs(h.zeta - g.zeta) / 2.0)


def _coupling_lp(mA, mB, inC):
    """min over couplings pi of max(||mA - pA pi|| + ||mB - pB pi||, pi(C^c))."""
    a, b = len(mA), len(mB)
    nv = a * b
    # variables: pi (a*b), u (a), w (b), t
    nvar = nv + a + b + 1
    c = np.zeros(nvar)
    c[-1] = 1.0
    rows, rhs = [], []
    for i in range(a):
        r = np.zeros(nvar)
        r[i * b:(i + 1) * b] = 1.0
        r[nv + i] = -1.0
        rows.append(r); rhs.append(mA[i])          # rowsum - u <= mA
        r = -r
        r[nv + i] = -1.0
        rows.append(r); rhs.append(-mA[i])         # -rowsum - u <= -mA
    for j in range(b):
        r = np.zeros(nvar)
        r[j:nv:b] = 1.0
        r[nv + a + j] = -1.0
        rows.append(r); rhs.append(mB[j])
        r = -r
        r[nv + a + j] = -1.0
        rows.append(r); rhs.append(-mB[j])
    r = np.zeros(nvar)
    r[nv:nv + a + b] = 1.0
    r[-1] = -1.0
    rows.append(r); rhs.append(0.0)
    r = np.zeros(nvar)
    r[:nv] = (~inC).reshape(-1).astype(float)
    r[-1] = -1.0
    rows.append(r); rhs.append(0.0)
    res = linprog(c, A_ub=np.array(rows), b_ub=np.array(rhs), bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(f"coupling LP failed: {res.message}")
    return float(res.fun)


def _ghp_exact(A, B):
    a, b = A.k, B.k
    nodes = [(i, j) for i in range(a) for j in range(b)]
    I = np.array([p[0] for p in nodes])
    J = np.array([p[1] for p in nodes])
    gap = np.abs(A.d[np.ix_(I, I)] - B.d[np.ix_(J, J)])
    cache = {}
    best = math.inf
    for delta in np.unique(gap):
        if delta / 2 >= best:
            break
        adj = gap <= delta + 1e-15
        G = nx.Graph()
        G.add_nodes_from(range(len(nodes)))
        G.add_edges_from(zip(*np.nonzero(np.triu(adj, 1))))
        for clique in nx.find_cliques(G):
            rows = set(I[clique].tolist())
            cols = set(J[clique].tolist())
            if len(rows) < a or len(cols) < b:
                continue
            key = frozenset(clique)
            if key not in cache:
                inC = np.zeros((a, b), dtype=bool)
                inC[I[clique], J[clique]] = True
                cache[key] = _coupling_lp(A.mass, B.mass, inC)
            best = min(best, max(delta / 2, cache[key]))
    return best


def _flow_on(C, mA, mB):
    """Maximal mass of a sub-coupling supported on the pairs C."""
    C = np.asarray(C)
    ii = np.unique(C[:, 0], return_inverse=True)
    jj = np.unique(C[:, 1], return_inverse=True)
    na, nb = len(ii[0]), len(jj[0])
    nvar = len(C)
    Aub = np.zeros((na + nb, nvar))
    Aub[ii[1], np.arange(nvar)] = 1.0
    Aub[na + jj[1], np.arange(nvar)] = 1.0
    bub = np.concatenate([mA[ii[0]], mB[jj[0]]])
    res = linprog(-np.ones(nvar), A_ub=Aub, b_ub=bub, bounds=(0, None), method="highs")
    return float(-res.fun) if res.success else 0.0


def coupling_term(C, mA, mB):
    """Best max(discrepancy, pi(C^c)) for a correspondence C (closed form
    given the maximal flow F supported on C)."""
    F = _flow_on(C, mA, mB)
    MA, MB = float(mA.sum()), float(mB.sum())
    Fall = min(MA, MB)
    w = (MA + MB - 2 * F) / 3.0
    if w <= Fall - F:
        return max(w, 0.0)
    return max(MA + MB - 2 * Fall, Fall - F)


def _distortion(A, B, C):
    C = np.asarray(C)
    return float(np.max(np.abs(A.d[np.ix_(C[:, 0], C[:, 0])] - B.d[np.ix_(C[:, 1], C[:, 1])])))


def _profiles(space, q=9):
    return np.quantile(space.d, np.linspace(0, 1, q), axis=1).T


def ghp_estimate(A, B, budget=200, init=None, stream=None, exact_limit=6):
    """GHP distance: exact for spaces with at most ``exact_limit`` points,
    otherwise the objective of the best correspondence/coupling found by
    profile matching plus local search (an upper bound on the distance).

    ``init`` optionally seeds the search with a correspondence (list of
    index pairs covering both spaces)."""
    if A.k == 0 or B.k == 0:
        raise ValueError("empty space")
    if max(A.k, B.k) <= exact_limit:
        return _ghp_exact(A, B)
    stream = np.random.default_rng(0) if stream is None else stream
    if init is not None:
        C = np.asarray(init, dtype=np.int64)
        best_C, best = C, _distortion(A, B, C)
    else:
        pa, pb = _profiles(A), _profiles(B)
        cost = np.abs(pa[:, None, :] - pb[None, :, :]).max(axis=2)
        f = np.argmin(cost, axis=1)
        g = np.argmin(cost, axis=0)
        best_C = np.unique(np.vstack([np.column_stack([np.arange(A.k), f]),
                                      np.column_stack([g, np.arange(B.k)])]), axis=0)
        best = _distortion(A, B, best_C)
    for _ in range(budget):
        C = best_C.copy()
        r = stream.integers(len(C))
        if stream.random() < 0.5:
            C[r, 1] = stream.integers(B.k)
        else:
            C[r, 0] = stream.integers(A.k)
        if len(np.unique(C[:, 0])) < A.k or len(np.unique(C[:, 1])) < B.k:
            continue
        dist = _distortion(A, B, C)
        if dist <= best:
            best_C, best = C, dist
    return max(best / 2.0, coupling_term(best_C, A.mass, B.mass))


def _component_adjacency(graph, vertices):
    vertices = np.asarray(vertices, dtype=np.int64)
    adj = graph.adjacency()
    return adj[vertices][:, vertices]


def graph_component_to_mms(graph, vertices, n, alpha, max_points=None, stream=None):
    """Graph distances on a component scaled by n^(-(alpha-1)/(alpha+1)),
    unit masses scaled by n^(-alpha/(alpha+1)).  With ``max_points`` a uniform
    subsample is kept and every vertex's mass moves to its nearest kept vertex."""
    vertices = np.asarray(vertices, dtype=np.int64)
    sub = _component_adjacency(graph, vertices)
    if connected_components(sub, directed=False)[0] != 1:
        raise ValueError("component is not connected")
    t_exp, _, h_exp = scaling_exponents(alpha)
    V = len(vertices)
    if max_points is not None and V > max_points:
        stream = np.random.default_rng(0) if stream is None else stream
        keep = np.sort(stream.choice(V, size=max_points, replace=False))
    else:
        keep = np.arange(V)
    dist = shortest_path(sub, method="D", unweighted=True, indices=keep)
    mass = np.bincount(np.argmin(dist, axis=0), minlength=len(keep)).astype(float)
    d = dist[:, keep]
    return FiniteMMS(d * n ** (-h_exp), mass * n ** (-t_exp))


def component_diameter(graph, vertices, chunk=256):
    """Exact graph diameter of a connected vertex set (BFS from every vertex)."""
    sub = _component_adjacency(graph, vertices)
    V = sub.shape[0]
    best = 0
    for lo in range(0, V, chunk):
        d = shortest_path(sub, method="D", unweighted=True, indices=np.arange(lo, min(V, lo + chunk)))
        best = max(best, int(d[np.isfinite(d)].max()))
    return best


# -- limit components -------------------------------------------------------

def offspring_period(law):
    """gcd of the support of Z - 1; sizes need (size - 1) divisible by it."""
    if law.has_tail:
        return 1
    return math.gcd(*[k - 1 for k in law.atoms])


def feasible_size(law, size):
    g = offspring_period(law)
    return size + (-(size - 1)) % g


def conditioned_walks(law, size, count, stream, chunk_rows=None):
    """``count`` Lukasiewicz excursions of Galton-Watson trees with ``size``
    vertices and offspring Z - 1 (Z size-biased from ``law``).

    Walks with total -1 are kept and rotated after their first minimum
    (cycle lemma).  Returns an int array (count, size + 1).
    """
    zlaw = size_biased_law(law)
    if (size - 1) % offspring_period(law):
        raise ValueError(f"no tree with {size} vertices for this offspring law")
    rows = chunk_rows or max(64, (1 << 22) // size)
    out = []
    got = 0
    tries = 0
    while got < count:
        Y = draw_degrees(zlaw, (rows, size), stream) - 1
        ok = (Y.sum(axis=1) == size - 1)
        tries += rows
        for y in Y[ok]:
            w = np.cumsum(y - 1)
            j = int(np.argmin(w)) + 1
            y = np.concatenate([y[j:], y[:j]])
            out.append(np.concatenate([[0], np.cumsum(y - 1)]))
            got += 1
            if got == count:
                break
        if tries > 10_000_000 and got == 0:
            raise RuntimeError("conditioned walk acceptance too small")
    return np.array(out)


@dataclass(frozen=True, eq=False)
class LimitComponent:
    space: FiniteMMS
    e: MarkedExcursion
    h: MarkedExcursion
    marks: np.ndarray
    pairs: list
    ess: float
    surplus: int


def proxy_excursions(law, proxy_n, count, stream):
    """Normalised (e, h) proxies on [0, 1] from conditioned walks."""
    alpha = law.alpha
    S = conditioned_walks(law, proxy_n, count, stream)
    dt = 1.0 / proxy_n
    es, hs = [], []
    for s in S:
        e = np.append(s[:-1], 0) * proxy_n ** (-1.0 / alpha)
        h = np.append(height_from_walk(s), 0) * proxy_n ** (-(alpha - 1.0) / alpha)
        es.append(MarkedExcursion(GridPath(dt, np.maximum(e, 0.0))))
        hs.append(MarkedExcursion(GridPath(dt, h.astype(float))))
    return es, hs


def sample_limit_component(x, m, law, proxy_n, stream, batch=512, max_points=512, min_ess=10.0):
    """Proxy for a limit component of mass x.

    A batch of normalised excursion pairs (e, h) is resampled with weight
    (int e)^m when the surplus m is given (the law given the length and the
    surplus), or with weight exp(x^(1+1/alpha) int e / mu) when m is None,
    in which case the surplus is then drawn as Poisson(x^(1+1/alpha) int e / mu).
    m marks are placed uniformly under e, closed at
    t = inf{t >= s : e(t) <= level}, and p_h(s) ~ p_h(t) are identified in
    the tree coded by h.  Distances are scaled by x^((alpha-1)/alpha) and
    masses by x.
    """
    params = LevyParams.from_law(law)
    alpha, mu = params.alpha, params.mu
    proxy_n = feasible_size(law, proxy_n)
    es, hs = proxy_excursions(law, proxy_n, batch, stream)
    areas = np.array([float(ex.values[:-1].sum() * ex.dt) for ex in es])
    if m is None:
        logw = x ** (1.0 + 1.0 / alpha) * areas / mu
    else:
        if m < 0:
            raise ValueError("surplus must be non-negative")
        logw = m * np.log(areas)
    w = np.exp(logw - logw.max())
    ess = float(w.sum() ** 2 / (w ** 2).sum())
    if ess < min_ess:
        raise ResamplingError(f"effective sample size {ess:.2f} below {min_ess}", ess, w)
    pick = int(stream.choice(batch, p=w / w.sum()))
    e, h = es[pick], hs[pick]
    if m is None:
        m = int(stream.poisson(x ** (1.0 + 1.0 / alpha) * areas[pick] / mu))
    ev = e.values
    cells = ev[:-1]
    marks = np.zeros((m, 3))
    for r in range(m):
        i = int(stream.choice(len(cells), p=cells / cells.sum()))
        s = (i + stream.random()) * e.dt
        level = stream.random() * cells[i]
        marks[r] = (s, level, close_time(e, s, level))
    n_vert = proxy_n
    budget = max(1, max_points - 2 * m)
    if n_vert <= budget:
        grid = np.arange(n_vert) * e.dt
    else:
        grid = np.sort(stream.choice(n_vert, size=budget, replace=False)) * e.dt
    times = np.concatenate([grid, marks[:, 0], marks[:, 2]])
    tree = rtree_from_excursion(h, times)
    k = len(grid)
    pairs = [(k + r, k + m + r) for r in range(m)]
    space = identify_pairs(tree, pairs)
    space = space.scaled(dist=x ** ((alpha - 1.0) / alpha), mass=x)
    return LimitComponent(space, e, h, marks, pairs, ess, m)
