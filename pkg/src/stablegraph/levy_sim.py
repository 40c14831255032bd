"""Spectrally positive stable and Brownian Levy processes, the tilted process,
Radon-Nikodym weights, inverse local time and Cox surplus marks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma as gamma_fn, gammainc, gammaincc

from .paths import GridPath


@dataclass(frozen=True)
class LevyParams:
    """alpha in (1, 2]; tail constant c for alpha < 2, beta for alpha = 2; mu in (1, 2)."""

    alpha: float
    mu: float
    c: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        if not 1.0 < self.alpha <= 2.0:
            raise ValueError("alpha must lie in (1, 2]")
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.alpha < 2.0 and self.c <= 0:
            raise ValueError("stable case needs c > 0")
        if self.alpha == 2.0 and self.beta <= 0:
            raise ValueError("Brownian case needs beta > 0")

    @property
    def brownian(self):
        return self.alpha == 2.0

    @property
    def C_alpha(self):
        if self.brownian:
            return self.beta / 2.0
        a = self.alpha
        return self.c * gamma_fn(2.0 - a) / (a * (a - 1.0))

    def psi(self, lam):
        return self.C_alpha * np.asarray(lam, dtype=float) ** self.alpha / self.mu

    @classmethod
    def from_law(cls, law):
        if law.has_tail:
            return cls(alpha=law.alpha, mu=law.mu, c=law.c)
        return cls(alpha=2.0, mu=law.mu, beta=law.beta)


@dataclass(frozen=True)
class GeneralExponent:
    """gamma, delta, finite table of jump atoms (x, mass) and an optional
    stable part with tail constant ``stable_c`` and index ``stable_alpha``."""

    gamma: float = 0.0
    delta: float = 0.0
    atoms: tuple = field(default_factory=tuple)
    stable_c: float = 0.0
    stable_alpha: float = 1.5


def levy_exponent(params, lam, general=None):
    """Psi(lambda) = log E[exp(-lambda L_1)]."""
    lam = float(lam)
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    if general is None:
        return float(params.psi(lam))
    g = general
    out = g.gamma * lam + 0.5 * g.delta ** 2 * lam ** 2
    for x, mass in g.atoms:
        out += mass * (math.expm1(-lam * x) + lam * x)
    if g.stable_c > 0:
        a = g.stable_alpha
        out += g.stable_c * gamma_fn(2.0 - a) / (a * (a - 1.0)) * lam ** a
    return out


def stable_increments(params, dt, size, stream):
    """Increments over time dt with E[exp(-lam X)] = exp(dt Psi(lam)).

    Chambers-Mallows-Stuck for a totally right-skewed stable law
    S_alpha(sigma, 1, 0), whose Laplace transform is
    exp(-sigma^alpha lam^alpha / cos(pi alpha / 2)).
    """
    if params.brownian:
        return stream.normal(0.0, math.sqrt(params.beta / params.mu * dt), size)
    a = params.alpha
    K = params.C_alpha / params.mu * dt
    sigma = (K * abs(math.cos(math.pi * a / 2))) ** (1.0 / a)
    V = stream.uniform(-math.pi / 2, math.pi / 2, size)
    W = stream.exponential(size=size)
    B = math.atan(math.tan(math.pi * a / 2)) / a
    Sfac = (1.0 + math.tan(math.pi * a / 2) ** 2) ** (1.0 / (2 * a))
    X = (Sfac * np.sin(a * (V + B)) / np.cos(V) ** (1.0 / a)
         * (np.cos(V - a * (V + B)) / W) ** ((1.0 - a) / a))
    return sigma * X


def default_dt(T):
    return T / 2 ** 16


def _steps(T, dt):
    steps = int(round(T / dt))
    if steps < 1 or abs(steps * dt - T) > 1e-9 * max(T, 1.0):
        raise ValueError("T must be a positive multiple of dt")
    return steps


def simulate_L(params, T, dt=None, stream=None, paths=None):
    """Levy path(s) on the grid; a GridPath, or an array (paths, steps+1)."""
    dt = default_dt(T) if dt is None else dt
    steps = _steps(T, dt)
    shape = (1 if paths is None else paths, steps)
    inc = stable_increments(params, dt, shape, stream)
    vals = np.zeros((shape[0], steps + 1))
    np.cumsum(inc, axis=1, out=vals[:, 1:])
    return GridPath(dt, vals[0]) if paths is None else vals


def _upper_gamma_neg(a, z):
    """Gamma(a, z) for a in (-2, 0) via the recurrence from a + 2 > 0."""
    z = np.asarray(z, dtype=float)
    b = a + 2.0
    g = gammaincc(b, z) * gamma_fn(b)
    g = (g - z ** (a + 1) * np.exp(-z)) / (a + 1)
    return (g - z ** a * np.exp(-z)) / a


def big_jump_compensator(params, t, eps):
    """Mean of the sum of tilted jumps > eps on [0, t]:
    c * int_eps^inf x^(-alpha-1) (1 - exp(-x t / mu)) dx."""
    a, c, mu = params.alpha, params.c, params.mu
    t = np.asarray(t, dtype=float)
    b = t / mu
    with np.errstate(divide="ignore", invalid="ignore"):
        tail = np.where(b > 0, b ** a * _upper_gamma_neg(-a, b * eps), eps ** (-a) / a)
    return c * (eps ** (-a) / a - tail)


def small_jump_variance(params, s, eps):
    """(c/mu) int_0^eps x^(1-alpha) exp(-x s / mu) dx, the tilted small-jump
    variance rate at time s."""
    a, c, mu = params.alpha, params.c, params.mu
    s = np.asarray(s, dtype=float)
    b = s / mu
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.where(b * eps > 1e-12,
                     gammainc(2.0 - a, b * eps) * gamma_fn(2.0 - a) / np.maximum(b, 1e-300) ** (2.0 - a),
                     eps ** (2.0 - a) / (2.0 - a))
    return c / mu * v


def drift_A(params, t):
    return -params.C_alpha * np.asarray(t, dtype=float) ** params.alpha / params.mu ** params.alpha


def simulate_tilted(params, T, dt=None, stream=None, method=None, eps=None, paths=None):
    """The tilted process L~ = X + A on the grid.

    ``direct`` (alpha < 2): jumps above eps from the intensity
    (c/mu) x^(-alpha-1) exp(-x s/mu) ds dx, by thinning the homogeneous stable
    measure with acceptance exp(-x s/mu), compensated exactly; jumps below
    eps replaced by a centred Gaussian with the matching variance; plus the
    drift A_t = -C_alpha t^alpha / mu^alpha.
    ``exact-brownian`` (alpha = 2): sqrt(beta/mu) B_t - beta t^2 / (2 mu^2).
    """
    dt = default_dt(T) if dt is None else dt
    steps = _steps(T, dt)
    P = 1 if paths is None else paths
    if method is None:
        method = "exact-brownian" if params.brownian else "direct"
    t = np.arange(steps + 1) * dt
    if method == "exact-brownian":
        if not params.brownian:
            raise ValueError("exact-brownian needs alpha = 2")
        inc = stream.normal(0.0, math.sqrt(params.beta / params.mu * dt), (P, steps))
        vals = np.zeros((P, steps + 1))
        np.cumsum(inc, axis=1, out=vals[:, 1:])
        vals += -params.beta * t ** 2 / (2 * params.mu ** 2)
    elif method == "direct":
        if params.brownian:
            raise ValueError("direct construction is for alpha < 2")
        a, c, mu = params.alpha, params.c, params.mu
        eps = dt ** (1.0 / a) if eps is None else eps
        if not eps > 0:
            raise ValueError("eps must be positive")
        rate = c / mu * eps ** (-a) / a
        counts = stream.poisson(rate * T, P)
        total = int(counts.sum())
        owner = np.repeat(np.arange(P), counts)
        when = stream.uniform(0.0, T, total)
        size = eps * stream.random(total) ** (-1.0 / a)
        keep = stream.random(total) < np.exp(-size * when / mu)
        cell = np.minimum((when[keep] / dt).astype(np.int64), steps - 1)
        jumps = np.bincount(owner[keep] * steps + cell, weights=size[keep],
                            minlength=P * steps).reshape(P, steps)
        sd = np.sqrt(small_jump_variance(params, t[:-1] + dt / 2, eps) * dt)
        inc = jumps + stream.normal(size=(P, steps)) * sd
        vals = np.zeros((P, steps + 1))
        np.cumsum(inc, axis=1, out=vals[:, 1:])
        vals -= big_jump_compensator(params, t, eps)
        vals += drift_A(params, t)
    else:
        raise ValueError(f"unknown method {method!r}")
    return GridPath(dt, vals[0]) if paths is None else vals


def reflect(path):
    v = path.values
    return GridPath(path.dt, v - np.minimum.accumulate(v))


def _integral(values, dt, rule):
    if rule == "left":
        return values[..., :-1].sum(axis=-1) * dt
    if rule == "trapezoid":
        return (values[..., :-1].sum(axis=-1) + 0.5 * (values[..., -1] - values[..., 0])) * dt
    raise ValueError(f"unknown rule {rule!r}")


def log_rn_weight(values, dt, t, params, rule="trapezoid"):
    """log Phi(t) for one path (1-d values) or a batch (rows)."""
    values = np.asarray(values, dtype=float)
    k = int(round(t / dt))
    if k > values.shape[-1] - 1 + 1e-9 or abs(k * dt - t) > 1e-9 * max(1.0, t):
        raise ValueError("t must be a grid time within the horizon")
    seg = values[..., :k + 1]
    # int_0^t s dL_s = t L_t - int_0^t L_s ds
    sdl = t * seg[..., -1] - _integral(seg, dt, rule)
    a, mu = params.alpha, params.mu
    return -sdl / mu - params.C_alpha * t ** (a + 1) / ((a + 1) * mu ** (a + 1))


def rn_weight(L, t, params, rule="trapezoid"):
    """Phi(t) = exp(-(1/mu) int_0^t s dL_s - C_alpha t^(alpha+1) / ((alpha+1) mu^(alpha+1))).

    The stochastic integral is evaluated by summation by parts; ``rule``
    chooses the quadrature of int L ds (the trapezoid rule weights each
    increment at the cell midpoint).
    """
    if t > L.T + 1e-12:
        raise ValueError("t beyond the horizon")
    return float(np.exp(log_rn_weight(L.values, L.dt, t, params, rule)))


def inverse_local_time(path, ell):
    """First grid time at which the running infimum is below -ell, or inf."""
    if ell < 0:
        raise ValueError("ell must be non-negative")
    hits = np.nonzero(path.values < -ell)[0]
    return float(hits[0] * path.dt) if len(hits) else math.inf


def cox_marks(R, mu, stream):
    """Poisson marks of intensity (1/mu) 1{x <= R_s} ds dx; rows (s, x)."""
    v = np.asarray(R.values[:-1], dtype=float)
    if np.any(v < 0):
        raise ValueError("R must be non-negative")
    counts = stream.poisson(v * R.dt / mu)
    cell = np.repeat(np.arange(len(v)), counts)
    s = (cell + stream.random(len(cell))) * R.dt
    x = stream.random(len(cell)) * v[cell]
    return np.column_stack([s, x])


def stopped_weight_identity(L, ell, params):
    """Both sides of the stopped martingale identity at sigma_ell, on the grid.

    lhs = Phi(sigma_ell) (left-point quadrature).
    rhs = exp((1/mu) int_0^ell sigma_r dr + (1/mu) sum of excursion areas of
    L - I before sigma_ell - C_alpha sigma^(alpha+1) / ((alpha+1) mu^(alpha+1))).
    """
    v = L.values
    dt = L.dt
    if ell == 0:
        return 1.0, 1.0
    hits = np.nonzero(v < -ell)[0]
    if len(hits) == 0:
        raise ValueError("sigma_ell is beyond the horizon")
    k = int(hits[0])
    sigma = k * dt
    a, mu = params.alpha, params.mu
    comp = params.C_alpha * sigma ** (a + 1) / ((a + 1) * mu ** (a + 1))
    lhs = math.exp(log_rn_weight(v, dt, sigma, params, rule="left"))
    I = np.minimum.accumulate(v[:k + 1])
    # sigma_r = t_i for r in [-I_{i-1}, -I_i) intersected with [0, ell)
    lo = np.clip(-I[:-1], 0.0, ell)
    hi = np.clip(-I[1:], 0.0, ell)
    int_sigma = float(np.sum(np.arange(1, k + 1) * dt * (hi - lo)))
    areas = float(np.sum(v[:k] - I[:k]) * dt)
    rhs = math.exp((int_sigma + areas) / mu - comp)
    return lhs, rhs


def preset_to_text(params):
    lines = [f"levy.alpha={float(params.alpha)!r}", f"levy.mu={float(params.mu)!r}"]
    if params.brownian:
        lines.append(f"levy.beta={float(params.beta)!r}")
    else:
        lines.append(f"levy.c={float(params.c)!r}")
    return "\n".join(lines) + "\n"


def preset_from_text(text):
    from .degree_model import parse_keyvalues
    kv = parse_keyvalues(text)
    return LevyParams(alpha=float(kv["levy.alpha"]), mu=float(kv["levy.mu"]),
                      c=float(kv.get("levy.c", 0.0)), beta=float(kv.get("levy.beta", 0.0)))
