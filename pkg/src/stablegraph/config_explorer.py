"""Configuration multigraphs and their depth-first exploration."""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .coding_paths import height_from_walk, excursions_above_min
from .degree_model import DegreeSequence, size_biased_order, size_biased_prefix


class BudgetExhausted(RuntimeError):
    def __init__(self, attempts):
        super().__init__(f"no simple graph after {attempts} attempts")
        self.attempts = attempts


@dataclass(frozen=True, eq=False)
class Multigraph:
    n: int
    edges: np.ndarray
    degrees: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "edges", e)

    def adjacency(self):
        """Symmetric sparse adjacency (multi-edges summed, loops dropped)."""
        e = self.edges[self.edges[:, 0] != self.edges[:, 1]]
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        data = np.ones(len(rows), dtype=np.int32)
        return coo_matrix((data, (rows, cols)), shape=(self.n, self.n)).tocsr()

    def components(self):
        """Component label per vertex."""
        return connected_components(self.adjacency(), directed=False)[1]


def _as_degrees(seq):
    return seq.degrees if isinstance(seq, DegreeSequence) else np.asarray(seq)


def pair_half_edges(seq, stream):
    """Uniform perfect matching of half-edges.

    Half-edges are listed by (vertex, slot); a uniform random permutation
    paired off consecutively is a uniform perfect matching.
    """
    d = _as_degrees(seq)
    if d.sum() % 2:
        raise ValueError("odd number of half-edges")
    stubs = np.repeat(np.arange(len(d)), d)
    stubs = stubs[stream.permutation(len(stubs))]
    return Multigraph(len(d), stubs.reshape(-1, 2), d)


def is_simple(g):
    e = g.edges
    if np.any(e[:, 0] == e[:, 1]):
        return False
    lo = np.minimum(e[:, 0], e[:, 1])
    hi = np.maximum(e[:, 0], e[:, 1])
    keys = lo * np.int64(g.n) + hi
    return len(np.unique(keys)) == len(keys)


def sample_simple_graph(seq, stream, max_attempts=1000):
    """Rejection sampling; returns (graph, attempts)."""
    if max_attempts < 1:
        raise ValueError("max_attempts must be positive")
    for attempt in range(1, max_attempts + 1):
        g = pair_half_edges(seq, stream)
        if is_simple(g):
            return g, attempt
    raise BudgetExhausted(max_attempts)


def forest_walk(reordered):
    d = _as_degrees(reordered)
    return np.concatenate([[0], np.cumsum(np.asarray(d, dtype=np.int64) - 2)])


# step kinds
NEW, VERTEX, OPEN, CLOSE = 0, 1, 2, 3


@dataclass(frozen=True, eq=False)
class ExplorationTrace:
    """States X(k), N(k), tau(k), |M(k)| for k = 0..K and per-step records.

    ``U[k]`` is the stack level chosen by a back-edge opened at step k-1
    (NaN otherwise).  ``kind[k]`` and ``p_back[k]`` describe step k, the
    transition from X(k) to X(k+1); ``p_back`` is the conditional probability
    of opening a back-edge at that step.  ``anomalies[k]`` counts self-loops
    and parallel edges created at steps 0..k.
    """

    X: np.ndarray
    N: np.ndarray
    tau: np.ndarray
    n_marks: np.ndarray
    U: np.ndarray
    kind: np.ndarray
    p_back: np.ndarray
    anomalies: np.ndarray

    @property
    def steps(self):
        return len(self.kind)

    @property
    def running_min(self):
        return np.minimum.accumulate(self.X)

    @property
    def C(self):
        return -self.running_min

    @property
    def R(self):
        return self.X - self.running_min

    def compensator(self):
        """N_comp(k) = sum_{j<k} p_back(j), aligned with N."""
        return np.concatenate([[0.0], np.cumsum(self.p_back)])

    def height(self):
        """Height process of the explored forest F_n, one value per step."""
        return height_from_walk(self.X)

    def to_csv(self):
        buf = io.StringIO()
        buf.write("step,X,R,C,N,U,tau\n")
        R, C = self.R, self.C
        for k in range(len(self.X)):
            u = "" if np.isnan(self.U[k]) else str(int(self.U[k]))
            buf.write(f"{k},{self.X[k]},{R[k]},{C[k]},{self.N[k]},{u},{self.tau[k]}\n")
        return buf.getvalue()


@dataclass(frozen=True, eq=False)
class ComponentRecord:
    size: int
    surplus: int
    start_step: int
    end_step: int
    first_vertex: int
    vertices: np.ndarray | None = None
    edges: int = 0


@dataclass(frozen=True, eq=False)
class Exploration:
    trace: ExplorationTrace
    components: list
    S_tilde: np.ndarray
    order: np.ndarray
    edges: np.ndarray
    complete: bool
    discover_step: np.ndarray = field(repr=False, default=None)

    def graph(self):
        return Multigraph(len(self.discover_step) - 1, self.edges, None)

    def components_csv(self):
        buf = io.StringIO()
        buf.write("id,size,surplus,start,end\n")
        for i, c in enumerate(self.components):
            buf.write(f"{i},{c.size},{c.surplus},{c.start_step},{c.end_step}\n")
        return buf.getvalue()


def anomalous_prefix_count(exploration, k):
    """Self-loops plus parallel edges discovered at steps 0..k."""
    a = exploration.trace.anomalies
    if len(a) == 0:
        return 0
    return int(a[min(k, len(a) - 1)])


def explore(seq, stream, reorder=True, max_steps=None, keep_vertices=False):
    """Generate and explore the configuration multigraph depth first.

    Vertices are visited in size-biased order (drawn up front, or taken as
    given with ``reorder=False``).  The top half-edge of the stack is paired
    either with another unmarked stack half-edge (a back-edge, probability
    proportional to their number) or with a fresh half-edge, which belongs to
    the next vertex in the order.  A back-edge marks its target level; when
    the walk reaches a marked level the back-edge is closed.  Edges are
    reported with the original vertex labels.  With ``max_steps`` only the
    reachable prefix of the order is drawn, and ``order`` and ``S_tilde``
    cover that prefix.
    """
    d = _as_degrees(seq)
    n = len(d)
    if not reorder:
        order = np.arange(n)
    elif max_steps is not None and max_steps + 1 < n:
        # each step discovers at most one vertex
        order = size_biased_prefix(d, max_steps + 1, stream)
    else:
        order = size_biased_order(d, stream)
    Dh = [int(x) for x in d[order]]
    lab = [int(x) for x in order]
    rem = int(d.sum())
    if rem % 2:
        raise ValueError("degree total must be even")
    limit = max_steps if max_steps is not None else 1 << 62

    Xs, Ns, taus, nm, Us = [0], [0], [0], [0], [np.nan]
    kinds, pb, anom = [], [], []
    edges = []
    seen = set()
    n_anom = 0
    comps = []
    discover = np.full(n + 1, -1, dtype=np.int64)

    X, N, tau = 0, 0, 0
    prevmin = 0          # min of X(0..k-1)
    base = 0             # level of the bottom of the stack
    stack = []           # owner (position in the order) of each stack level
    marked = set()       # marked stack indices
    comp_start = 0
    comp_surplus = 0
    complete = False
    rand = stream.random
    k = 0
    while True:
        if k == 0 or X == prevmin - 1:
            if k > 0:
                comps.append((comp_start, k, tau_start, tau - tau_start, comp_surplus))
            if tau == n:
                complete = True
                break
            if k >= limit:
                break
            v = tau
            discover[v] = k
            tau += 1
            dv = Dh[v]
            rem -= dv
            base = X
            stack = [v] * dv
            marked = set()
            comp_start, tau_start, comp_surplus = k, v, 0
            newX = X + dv - 1
            kinds.append(NEW)
            pb.append(0.0)
            u = np.nan
        else:
            if k >= limit:
                break
            top = X - base
            if top in marked:
                marked.discard(top)
                stack.pop()
                newX = X - 1
                kinds.append(CLOSE)
                pb.append(0.0)
                u = np.nan
            else:
                free = top - len(marked)
                p = free / (free + rem)
                pb.append(p)
                if rand() < p:
                    if 2 * len(marked) < top:
                        j = int(rand() * top)
                        while j in marked:
                            j = int(rand() * top)
                    else:
                        cand = [i for i in range(top) if i not in marked]
                        j = cand[int(rand() * len(cand))]
                    a, b = lab[stack[top]], lab[stack[j]]
                    key = (a, b) if a <= b else (b, a)
                    if a == b or key in seen:
                        n_anom += 1
                    seen.add(key)
                    edges.append(key)
                    stack.pop()
                    marked.add(j)
                    newX = X - 1
                    N += 1
                    comp_surplus += 1
                    kinds.append(OPEN)
                    u = base + j
                else:
                    v = tau
                    discover[v] = k
                    tau += 1
                    dv = Dh[v]
                    rem -= dv
                    a, b = lab[stack[top]], lab[v]
                    key = (a, b) if a <= b else (b, a)
                    seen.add(key)
                    edges.append(key)
                    stack.pop()
                    stack.extend([v] * (dv - 1))
                    newX = X + dv - 2
                    kinds.append(VERTEX)
                    u = np.nan
        anom.append(n_anom)
        prevmin = min(prevmin, X)
        X = newX
        k += 1
        Xs.append(X)
        Ns.append(N)
        taus.append(tau)
        nm.append(len(marked))
        Us.append(u)

    discover[n] = k if complete else -1
    trace = ExplorationTrace(
        X=np.array(Xs, dtype=np.int64), N=np.array(Ns, dtype=np.int64),
        tau=np.array(taus, dtype=np.int64), n_marks=np.array(nm, dtype=np.int64),
        U=np.array(Us, dtype=float), kind=np.array(kinds, dtype=np.int8),
        p_back=np.array(pb), anomalies=np.array(anom, dtype=np.int64))
    records = []
    for start, end, first, size, surplus in comps:
        verts = np.array(lab[first:first + size]) if keep_vertices else None
        records.append(ComponentRecord(size, surplus, start, end, first, verts,
                                       size - 1 + surplus))
    return Exploration(trace, records, forest_walk(Dh), order,
                       np.array(edges, dtype=np.int64).reshape(-1, 2), complete,
                       discover)


def coupled_height_check(exploration):
    """Compare the height of the explored forest with the coupled forest.

    For each pair of consecutive components of the forest coded by S_tilde
    (vertices a..a+m-1, steps k_a..k_{a+m}-1 carrying b back-edges) returns
    rows (a, m, b, gap, bound) with gap = max |H(k) - G(tau(k))| over the
    window and bound = 1 + b + 2 b max|G(a+i) - G(a+i-1)| over i = 1..m.
    """
    if not exploration.complete:
        raise ValueError("needs a complete exploration")
    S = exploration.S_tilde
    n = len(S) - 1
    G = np.append(height_from_walk(S), 0)
    H = exploration.trace.height()
    tau = exploration.trace.tau
    disc = exploration.discover_step
    comps = [start for start, _ in excursions_above_min(S)]
    comps.append(n)
    rows = []
    for i in range(0, len(comps) - 1, 2):
        a = comps[i]
        e = comps[min(i + 2, len(comps) - 1)]
        lo, hi = disc[a], disc[e]
        steps = hi - lo
        m = e - a
        b2 = steps - m
        if b2 % 2:
            raise AssertionError("window is not made of whole back-edges")
        b = b2 // 2
        ks = np.arange(lo, hi)
        gap = int(np.max(np.abs(H[ks] - G[tau[ks]])))
        # increments i = 1..m include the step into the next root
        dG = np.abs(np.diff(G[a:e + 1])).max()
        rows.append((a, m, b, gap, 1 + b + 2 * b * int(dG)))
    return rows
