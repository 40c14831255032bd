"""Degree laws, i.i.d. degree sequences, size-biased reordering and the
discrete change-of-measure weight phi."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import zeta

# Degrees above this value are drawn from the continuous Pareto approximation
# of the tail rather than from the cumulative table.
TABLE_SIZE = 1 << 16


class LawError(ValueError):
    """Invalid or infeasible degree law."""


@dataclass(frozen=True, eq=False)
class DegreeLaw:
    """Probability mass function on {1, 2, ...}.

    ``atoms`` holds finitely many head masses.  An optional power tail adds
    ``tail_A * k**(-tail_power)`` for every ``k >= k0``.  For degree laws the
    tail power is ``alpha + 2``; the size-biased law of such a law has power
    ``alpha + 1``.
    """

    atoms: dict
    alpha: float = 2.0
    tail_A: float = 0.0
    k0: int | None = None
    tail_power: float | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        atoms = {int(k): float(p) for k, p in self.atoms.items() if p != 0.0}
        object.__setattr__(self, "atoms", dict(sorted(atoms.items())))
        if self.tail_power is None:
            object.__setattr__(self, "tail_power", self.alpha + 2.0)
        if not 1.0 < self.alpha <= 2.0:
            raise LawError(f"alpha must lie in (1, 2], got {self.alpha}")
        if any(k < 1 for k in self.atoms):
            raise LawError("degrees must be at least 1")
        if any(p < 0 for p in self.atoms.values()) or self.tail_A < 0:
            raise LawError("negative mass")
        if self.tail_A > 0:
            if self.k0 is None or self.k0 < 1:
                raise LawError("a power tail needs k0 >= 1")
            if self.tail_power <= 1.0:
                raise LawError("tail power must exceed 1")
            if self.atoms and max(self.atoms) >= self.k0:
                raise LawError("head atoms must lie below k0")
        total = sum(self.atoms.values()) + self._tail_sum(0)
        if abs(total - 1.0) > 1e-12:
            raise LawError(f"masses sum to {total!r}, not 1")
        if self.atoms.get(2, 0.0) >= 1.0 - 1e-15:
            raise LawError("the 2-regular law P(D=2)=1 is excluded")

    @property
    def has_tail(self):
        return self.tail_A > 0

    @property
    def c(self):
        """Tail constant: k**(alpha+2) * P(D=k) -> c."""
        return self.tail_A if self.has_tail else 0.0

    @property
    def max_support(self):
        return math.inf if self.has_tail else max(self.atoms)

    def _tail_sum(self, j):
        """sum_{k >= k0} k**j * A * k**(-p), or inf when divergent."""
        if not self.has_tail:
            return 0.0
        s = self.tail_power - j
        if s <= 1.0:
            return math.inf
        return self.tail_A * float(zeta(s, self.k0))

    def pmf(self, k):
        k = np.asarray(k)
        out = np.zeros(k.shape, dtype=float)
        for key, p in self.atoms.items():
            out[k == key] = p
        if self.has_tail:
            tail = k >= self.k0
            out[tail] = self.tail_A * k[tail].astype(float) ** (-self.tail_power)
        return out

    def head_table(self, kmax):
        """Masses of 1..kmax as an array indexed by k-1."""
        return self.pmf(np.arange(1, kmax + 1))

    @property
    def mu(self):
        return moments(self)["mu"]

    @property
    def theta(self):
        return moments(self)["theta"]

    @property
    def beta(self):
        return moments(self)["beta"]


def moments(law):
    """Return mu = E[D], theta = E[D(D-1)]/E[D] and beta = E[D(D-1)(D-2)].

    beta is ``inf`` when the tail makes it divergent.
    """
    if "moments" in law._cache:
        return law._cache["moments"]
    ks = np.array(list(law.atoms), dtype=float)
    ps = np.array(list(law.atoms.values()), dtype=float)
    t1, t2, t3 = (law._tail_sum(j) for j in (1, 2, 3))
    mu = float(ks @ ps) + t1
    fact2 = float((ks * (ks - 1)) @ ps) + (t2 - t1 if t2 < math.inf else math.inf)
    if t3 < math.inf:
        tail3 = t3 - 3 * t2 + 2 * t1
    else:
        tail3 = math.inf
    beta = float((ks * (ks - 1) * (ks - 2)) @ ps) + tail3
    out = {"mu": mu, "theta": fact2 / mu, "beta": beta}
    law._cache["moments"] = out
    return out


def finite_law(atoms, alpha=2.0):
    return DegreeLaw(atoms=dict(atoms), alpha=alpha)


def make_critical_power_law(alpha, k0=3, atom2=0.0):
    """Law with atoms at 1 and 2 and tail A k^-(alpha+2) on k >= k0, with theta = 1.

    Given the atom at 2, normalisation and theta = 1 are both linear in
    (atom at 1, A), so the system is solved in closed form.
    """
    if not 1.0 < alpha < 2.0:
        raise LawError(f"alpha must lie in (1, 2), got {alpha}")
    if k0 < 3:
        raise LawError("k0 must be at least 3")
    if not 0.0 <= atom2 < 1.0:
        raise LawError("no critical law with this atom at 2")
    z = lambda s: float(zeta(s, k0))
    t0, t1 = z(alpha + 2), z(alpha + 1)
    t2 = z(alpha) - t1
    # theta = 1  <=>  A * t2 = a1 + A * t1  with  a1 = 1 - atom2 - A * t0
    A = (1.0 - atom2) / (t2 - t1 + t0)
    a1 = 1.0 - atom2 - A * t0
    if a1 <= 0.0 or A <= 0.0:
        raise LawError(f"no feasible critical law for alpha={alpha}, k0={k0}")
    atoms = {1: a1}
    if atom2 > 0:
        atoms[2] = atom2
    return DegreeLaw(atoms=atoms, alpha=alpha, tail_A=A, k0=int(k0))


@dataclass(frozen=True, eq=False)
class DegreeSequence:
    degrees: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.degrees, dtype=np.int64)
        if d.ndim != 1 or len(d) == 0:
            raise ValueError("degree sequence must be a non-empty vector")
        if np.any(d < 1):
            raise ValueError("every degree must be at least 1")
        d = d.copy()
        d.setflags(write=False)
        object.__setattr__(self, "degrees", d)

    @property
    def n(self):
        return len(self.degrees)

    @property
    def total(self):
        return int(self.degrees.sum())

    @classmethod
    def with_parity_fix(cls, degrees):
        d = np.array(degrees, dtype=np.int64)
        if d.sum() % 2 == 1:
            d[-1] += 1
        return cls(d)


def _sampling_table(law):
    if "cdf" not in law._cache:
        kmax = law.max_support if not law.has_tail else max(law.k0, 2) + TABLE_SIZE
        law._cache["cdf"] = np.cumsum(law.head_table(int(kmax)))
    return law._cache["cdf"]


def draw_degrees(law, size, stream):
    """Raw i.i.d. draws from the law (no parity fix)."""
    cdf = _sampling_table(law)
    u = stream.random(size)
    idx = np.searchsorted(cdf, u, side="right")
    k = idx + 1
    if law.has_tail:
        over = idx >= len(cdf)
        if np.any(over):
            K = len(cdf) + 1
            v = stream.random(int(over.sum()))
            k[over] = np.floor(K * (1.0 - v) ** (-1.0 / (law.tail_power - 1.0)))
    else:
        # rounding at the top of the cumulative table
        np.minimum(k, len(cdf), out=k)
    return k.astype(np.int64)


def sample_degrees(law, n, stream):
    """n i.i.d. degrees; an odd total is fixed by adding 1 to the last entry."""
    if n < 2:
        raise ValueError("n must be at least 2")
    return DegreeSequence.with_parity_fix(draw_degrees(law, n, stream))


def size_biased_order(degrees, stream):
    """Permutation in size-biased order.

    Exponential clocks with rates D_j: the smallest remaining clock is
    attained by j with probability D_j / sum of remaining D, so sorting the
    clocks is the same as sequential size-biased picking.
    """
    d = np.asarray(degrees, dtype=float)
    clocks = stream.exponential(size=len(d)) / d
    return np.argsort(clocks, kind="stable")


def size_biased_prefix(degrees, m, stream):
    """First m indices of a size-biased order, without sorting everything."""
    d = np.asarray(degrees, dtype=float)
    clocks = stream.exponential(size=len(d)) / d
    if m >= len(d):
        return np.argsort(clocks, kind="stable")
    idx = np.argpartition(clocks, m)[:m]
    return idx[np.argsort(clocks[idx], kind="stable")]


def size_biased_reorder(seq, stream):
    return DegreeSequence(seq.degrees[size_biased_order(seq.degrees, stream)])


def size_biased_law(law):
    """Law of Z with P(Z = k) = k nu_k / mu."""
    mu = law.mu
    atoms = {k: k * p / mu for k, p in law.atoms.items()}
    if law.has_tail:
        return DegreeLaw(atoms=atoms, alpha=law.alpha, tail_A=law.tail_A / mu,
                         k0=law.k0, tail_power=law.tail_power - 1.0)
    return DegreeLaw(atoms=atoms, alpha=law.alpha)


def convolution_power(law, r):
    """pmf of the sum of r i.i.d. copies, as an array indexed by value."""
    if law.has_tail:
        raise LawError("exact convolution needs a finite-support law")
    base = np.zeros(int(law.max_support) + 1)
    for k, p in law.atoms.items():
        base[k] = p
    out = np.array([1.0])
    for _ in range(r):
        out = np.convolve(out, base)
    return out


def _log_factors(n, k, mu):
    """log((n-i+1) mu) for i = 1..m and the suffix sums of k."""
    k = np.asarray(k, dtype=float)
    m = k.shape[-1]
    head = np.log((n - np.arange(m)) * mu)
    suffix = np.cumsum(k[..., ::-1], axis=-1)[..., ::-1]
    return head, suffix


def phi_weight(n, m, k, law, mode="exact", stream=None, draws=1000,
               max_exact=12, return_se=False):
    """phi_m^n(k) = E[prod_{i<=m} (n-i+1) mu / (sum_{j=i}^m k_j + Xi_{n-m})].

    Xi_{n-m} is a sum of n-m i.i.d. copies of D.  Exact mode sums over the
    convolution; monte-carlo mode averages over ``draws`` independent copies
    of Xi and can report the standard error.
    """
    k = np.asarray(k, dtype=np.int64)
    if m > n or m < 0:
        raise ValueError("need 0 <= m <= n")
    if len(k) != m:
        raise ValueError("k must have length m")
    mu = law.mu
    head, suffix = _log_factors(n, k, mu)
    if mode == "exact":
        if law.has_tail:
            raise LawError("exact mode needs a finite-support law")
        if n - m > max_exact:
            raise ValueError(f"n - m = {n - m} exceeds the exact cap {max_exact}")
        pxi = convolution_power(law, n - m)
        xi = np.nonzero(pxi)[0]
        logs = head.sum() - np.log(suffix[None, :] + xi[:, None]).sum(axis=1)
        value = float(pxi[xi] @ np.exp(logs))
        return (value, 0.0) if return_se else value
    if mode != "monte-carlo":
        raise ValueError(f"unknown mode {mode!r}")
    if stream is None:
        raise ValueError("monte-carlo mode needs a stream")
    xi = sample_xi(law, n - m, draws, stream)
    vals = np.exp(head.sum() - np.log(suffix[None, :] + xi[:, None]).sum(axis=1))
    value = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(draws)) if draws > 1 else math.inf
    return (value, se) if return_se else value


def sample_xi(law, r, draws, stream, chunk=1 << 22):
    """``draws`` independent copies of a sum of r i.i.d. degrees."""
    out = np.empty(draws, dtype=np.int64)
    if r == 0:
        out[:] = 0
        return out
    per = max(1, chunk // r)
    for lo in range(0, draws, per):
        hi = min(draws, lo + per)
        out[lo:hi] = draw_degrees(law, (hi - lo, r), stream).sum(axis=1)
    return out


def log_phi_batch(n, Z, mu, xi):
    """log phi_m^n for each row of Z, averaging over the supplied Xi draws.

    Z has shape (B, m).  Used for Monte Carlo weights at large n where the
    same Xi sample is shared across rows.
    """
    head, suffix = _log_factors(n, Z, mu)
    xi = np.asarray(xi, dtype=float)
    out = np.empty(len(Z))
    for b in range(len(Z)):
        logs = head.sum() - np.log(suffix[b][None, :] + xi[:, None]).sum(axis=1)
        top = logs.max()
        out[b] = top + math.log(np.mean(np.exp(logs - top)))
    return out


# -- plain-text serialisation ------------------------------------------------

def law_to_text(law):
    lines = [f"alpha={float(law.alpha)!r}"]
    if law.has_tail:
        lines.append(f"k0={law.k0}")
    for k, p in law.atoms.items():
        lines.append(f"atom.{k}={float(p)!r}")
    if law.has_tail:
        lines.append(f"tail.A={float(law.tail_A)!r}")
        if law.tail_power != law.alpha + 2.0:
            lines.append(f"tail.power={float(law.tail_power)!r}")
    return "\n".join(lines) + "\n"


def parse_keyvalues(text):
    out = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def law_from_text(text):
    kv = parse_keyvalues(text)
    atoms = {int(key.split(".", 1)[1]): float(v)
             for key, v in kv.items() if key.startswith("atom.")}
    alpha = float(kv.get("alpha", 2.0))
    A = float(kv.get("tail.A", 0.0))
    k0 = int(kv["k0"]) if "k0" in kv else None
    power = float(kv["tail.power"]) if "tail.power" in kv else None
    return DegreeLaw(atoms=atoms, alpha=alpha, tail_A=A, k0=k0, tail_power=power)


def sequence_to_text(seq):
    return "".join(f"{d}\n" for d in seq.degrees)


def sequence_from_text(text):
    return DegreeSequence([int(x) for x in text.split()])
