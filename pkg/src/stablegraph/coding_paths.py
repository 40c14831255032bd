"""Height processes, excursions above the running minimum, size-biased point
processes, close times, areas and rescaling."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .paths import GridPath, MarkedExcursion


def height_from_walk(S):
    """G(k) = #{j < k : S(j) = min_{j<=i<=k} S(i)} for k = 0..len(S)-2.

    S is a skip-free integer walk (increments >= -1), the Lukasiewicz path of
    a forest; G(k) is the depth of the k-th vertex in depth-first order.
    """
    S = np.asarray(S)
    if len(S) < 1:
        raise ValueError("empty walk")
    if np.any(np.diff(S) < -1):
        raise ValueError("walk is not skip-free")
    G = np.empty(max(len(S) - 1, 0), dtype=np.int64)
    stack = []
    for k in range(len(S) - 1):
        value = S[k]
        while stack and stack[-1] > value:
            stack.pop()
        G[k] = len(stack)
        stack.append(value)
    return G


def _lattice_excursions(S):
    S = np.asarray(S)
    L = len(S) - 1
    out = []
    start, level = 0, S[0]
    for j in range(1, L + 1):
        if S[j] < level:
            # first passage below the current minimum closes the excursion
            if j > start:
                out.append((start, j))
            start, level = j, S[j]
    if start < L:
        out.append((start, L))
    result = []
    for lo, hi in out:
        v = np.append(S[lo:hi] - S[lo], 0).astype(float)
        result.append((lo, MarkedExcursion(GridPath(1.0, v), lattice=True)))
    return result


def _grid_excursions(path):
    f = path.values
    runmin = np.minimum.accumulate(f)
    above = f > runmin
    out = []
    j = 1
    n = len(f)
    while j < n:
        if not above[j]:
            j += 1
            continue
        lo = j - 1
        while j < n and above[j]:
            j += 1
        hi = min(j, n - 1)
        v = f[lo:hi + 1] - f[lo]
        if j < n:
            v[-1] = 0.0
        out.append((lo * path.dt, MarkedExcursion(GridPath(path.dt, np.maximum(v, 0.0)))))
    return out


def excursions_above_min(path, lattice=None):
    """Excursions above the running minimum, as (start time, MarkedExcursion).

    Integer walks (or ``lattice=True``) use the forest convention: the k-th
    excursion occupies [sigma(k-1), sigma(k)) where sigma(k) is the first
    time the walk is at or below S(0) - k, so lengths count vertices.  Grid
    paths return the maximal runs strictly above the running minimum.  A run
    still open at the end of the path is returned truncated.
    """
    if isinstance(path, GridPath):
        if lattice:
            return _lattice_excursions(np.rint(path.values).astype(np.int64))
        return _grid_excursions(path)
    S = np.asarray(path)
    if lattice is False:
        return _grid_excursions(GridPath(1.0, S))
    return _lattice_excursions(S)


def ord_desc(items, length=None, start=None):
    """Stable sort by decreasing length, ties by increasing start."""
    if length is None:
        length = lambda item: item[1].zeta
    if start is None:
        start = lambda item: item[0]
    return sorted(items, key=lambda item: (-length(item), start(item)))


class SBPPoint(NamedTuple):
    sigma: float
    y: float
    index: int


def sbpp_sample(Y, stream):
    """Size-biased point process: E_g ~ Exp(Y_g) and
    Sigma_g = sum of Y_g' over the g' with E_g' < E_g.  Points come in order of E."""
    Y = np.asarray(Y, dtype=float)
    if np.any(Y <= 0):
        raise ValueError("SBPP weights must be positive")
    E = stream.exponential(size=len(Y)) / Y
    order = np.argsort(E, kind="stable")
    sig = np.concatenate([[0.0], np.cumsum(Y[order])[:-1]])
    return [SBPPoint(float(s), float(Y[i]), int(i)) for s, i in zip(sig, order)]


def close_time(ex, s, x, discrete=False, unit=1.0):
    """t = inf{t >= s : path(t) <= x}; with ``discrete`` the level is x - unit."""
    v = ex.values
    if not 0.0 <= s <= ex.zeta + 1e-12:
        raise ValueError("s outside [0, zeta]")
    i0 = min(ex.path.index(s), len(v) - 1)
    if x < -1e-12 or x > v[i0] + 1e-12:
        raise ValueError("x outside [0, path(s)]")
    target = x - unit if discrete else x
    if v[i0] <= target:
        return float(s)
    hits = np.nonzero(v[i0 + 1:] <= target)[0]
    if len(hits) == 0:
        return float(ex.zeta)
    return float((i0 + 1 + hits[0]) * ex.dt)


def area(ex):
    """Integral of the excursion: step sum for lattice paths, trapezoid otherwise."""
    v = ex.values
    if len(v) < 2:
        return 0.0
    if ex.lattice:
        return float(v[:-1].sum() * ex.dt)
    return float(np.trapezoid(v, dx=ex.dt))


def scaling_exponents(alpha):
    """(time, walk value, height/distance) exponents of n."""
    return alpha / (alpha + 1), 1.0 / (alpha + 1), (alpha - 1) / (alpha + 1)


def rescale(walk, n, alpha, kind="walk"):
    """Walk or height sequence as a GridPath in continuum units."""
    if not 1.0 < alpha <= 2.0:
        raise ValueError("alpha must lie in (1, 2]")
    t_exp, w_exp, h_exp = scaling_exponents(alpha)
    if kind == "walk":
        factor = n ** (-w_exp)
    elif kind == "height":
        factor = n ** (-h_exp)
    else:
        raise ValueError(f"unknown kind {kind!r}")
    return GridPath(n ** (-t_exp), np.asarray(walk, dtype=float) * factor)
