"""Seeded, configuration-driven experiments emitting CSV reports.

Every experiment takes an :class:`ExperimentConfig` and returns an
:class:`ExperimentReport`.  Randomness comes from one master seed; replica r
of level i uses the substream ``SeedSequence(seed, spawn_key=(tag, i, r))``,
so the output does not depend on the number of workers.

Report CSV (``report.csv``)::

    # experiment=<name> seed=<seed>
    name,value,se,tol,pass

``se`` is ``exact`` for deterministic rows, ``pass`` is ``pass``, ``fail``
or ``na`` (informational).  Per-experiment tables:

    sizes        components.csv   n,replica,rank,size,surplus,start
    weights      weights.csv      level,index,weight
    cox          replicas.csv     n,replica,N,compensator,proxy
    ghp          replicas.csv     n,replica,size,surplus,diameter,ghp,limit_diameter
    conditioned  areas.csv        source,n,index,area
    simple-prob  attempts.csv     chunk,attempts,simple
    levy-check   laplace.csv      lambda,mean,se
"""

from __future__ import annotations

import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import quad

from . import stats
from .coding_paths import scaling_exponents
from .config_explorer import explore, forest_walk, is_simple, pair_half_edges
from .continuum_graph import (ResamplingError, component_diameter, conditioned_walks,
                              feasible_size, ghp_estimate, graph_component_to_mms,
                              proxy_excursions, sample_limit_component)
from .degree_model import (DegreeLaw, draw_degrees, finite_law, law_from_text, log_phi_batch,
                           make_critical_power_law, parse_keyvalues, sample_degrees,
                           sample_xi, size_biased_law, size_biased_order)
from .levy_sim import LevyParams, log_rn_weight, preset_from_text, simulate_L


class ConfigError(ValueError):
    """Invalid experiment configuration."""


class PreconditionError(ValueError):
    """The degree law does not satisfy an experiment's requirement."""


class MatchingError(RuntimeError):
    def __init__(self, message, diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class BudgetError(RuntimeError):
    def __init__(self, message, accepted, tried):
        super().__init__(message)
        self.accepted = accepted
        self.tried = tried


EXPERIMENTS = ("sizes", "weights", "cox", "ghp", "conditioned", "simple-prob", "levy-check")


def preset_law(name):
    """``nu13`` (atoms 3/4 at 1, 1/4 at 3) or ``power<alpha>`` (critical power law, k0=3)."""
    if name == "nu13":
        return finite_law({1: 0.75, 3: 0.25})
    if name.startswith("power"):
        return make_critical_power_law(float(name[5:]), k0=3)
    raise ConfigError(f"unknown preset {name!r}")


@dataclass
class ExperimentConfig:
    experiment: str
    preset: str | None = "power1.5"
    law: DegreeLaw | None = None
    ns: tuple = (1000,)
    replicas: int = 10
    seed: int = 0
    alpha: float | None = None
    dt: float | None = None
    T: float = 2.0
    out: str | None = None
    workers: int = 1
    params: dict = field(default_factory=dict)

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if int(self.replicas) < 1:
            raise ConfigError("replicas must be at least 1")
        if not self.ns or any(int(n) < 2 for n in self.ns):
            raise ConfigError("every n must be at least 2")
        if int(self.seed) < 0:
            raise ConfigError("seed must be non-negative")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        law = self.resolve_law()
        if self.alpha is not None and abs(self.alpha - law.alpha) > 1e-12:
            raise ConfigError(f"alpha={self.alpha} does not match the law (alpha={law.alpha})")
        return self

    def resolve_law(self):
        if self.law is not None:
            return self.law
        if self.preset is None:
            raise ConfigError("need a law or a preset")
        return preset_law(self.preset)

    def param(self, key, default):
        return type(default)(self.params.get(key, default)) if default is not None else self.params.get(key)

    def to_text(self):
        lines = [f"experiment={self.experiment}"]
        if self.law is not None:
            from .degree_model import law_to_text
            lines += law_to_text(self.law).splitlines()
        else:
            lines.append(f"preset={self.preset}")
        lines += [f"n={','.join(str(int(n)) for n in self.ns)}", f"replicas={self.replicas}",
                  f"seed={self.seed}", f"T={self.T!r}"]
        if self.dt is not None:
            lines.append(f"dt={self.dt!r}")
        for k in sorted(self.params):
            lines.append(f"{k}={self.params[k]}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text, base=None):
        """Parse key=value lines on top of ``base`` (or the defaults)."""
        kv = parse_keyvalues(text)
        cfg = base if base is not None else cls(kv.get("experiment", "sizes"))
        cfg = replace(cfg, params=dict(cfg.params))
        law_keys = {k: v for k, v in kv.items()
                    if k.startswith(("atom.", "tail.")) or k == "k0"}
        if law_keys:
            text_law = "".join(f"{k}={v}\n" for k, v in law_keys.items())
            if "alpha" in kv:
                text_law += f"alpha={kv['alpha']}\n"
            cfg.law = law_from_text(text_law)
            cfg.preset = None
        for k, v in kv.items():
            if k in law_keys:
                continue
            if k == "experiment":
                cfg.experiment = v
            elif k == "preset":
                cfg.preset, cfg.law = v, None
            elif k == "n":
                cfg.ns = tuple(int(float(x)) for x in v.split(","))
            elif k == "replicas":
                cfg.replicas = int(v)
            elif k == "seed":
                cfg.seed = int(v)
            elif k == "alpha":
                cfg.alpha = float(v)
            elif k == "dt":
                cfg.dt = float(v)
            elif k == "T":
                cfg.T = float(v)
            elif k == "out":
                cfg.out = v
            elif k == "workers":
                cfg.workers = int(v)
            else:
                cfg.params[k] = v
        return cfg


# default sizes: smoke runs finish in well under 30 s on one core
SCALES = {
    "sizes": {"smoke": dict(ns=(1000, 4000), replicas=40),
              "paper": dict(ns=(10_000, 30_000, 100_000), replicas=300)},
    "weights": {"smoke": dict(ns=(1000, 10_000), replicas=1000, params=dict(xi_draws=32, paths=5000)),
                "paper": dict(ns=(10_000, 100_000), replicas=20_000, params=dict(xi_draws=64, paths=100_000))},
    "cox": {"smoke": dict(ns=(10_000,), replicas=100),
            "paper": dict(ns=(100_000,), replicas=500)},
    "ghp": {"smoke": dict(ns=(1000, 3000), replicas=20, params=dict(ghp_replicas=3, proxy_n=128, max_points=48)),
            "paper": dict(ns=(10_000, 30_000, 100_000), replicas=300,
                          params=dict(ghp_replicas=40, proxy_n=512, max_points=128))},
    "conditioned": {"smoke": dict(ns=(10_000,), replicas=200, params=dict(proxy_n=256)),
                    "paper": dict(ns=(10_000, 100_000), replicas=1000, params=dict(proxy_n=1024))},
    "simple-prob": {"smoke": dict(preset="nu13", ns=(1000,), replicas=1000),
                    "paper": dict(preset="nu13", ns=(10_000,), replicas=5000)},
    "levy-check": {"smoke": dict(replicas=20_000), "paper": dict(replicas=100_000)},
}


def default_config(experiment, scale="smoke", seed=0):
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    if scale not in ("smoke", "paper"):
        raise ConfigError(f"unknown scale {scale!r}")
    kw = dict(SCALES[experiment][scale])
    params = dict(kw.pop("params", {}))
    return ExperimentConfig(experiment=experiment, seed=seed, params=params, **kw)


# -- reports -------------------------------------------------------------------

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.12g}"


@dataclass
class ReportRow:
    name: str
    value: float
    se: float | None = None          # None means exact
    tol: object = None
    passed: bool | None = None

    def line(self):
        se = "exact" if self.se is None else _fmt(self.se)
        flag = "na" if self.passed is None else ("pass" if self.passed else "fail")
        return f"{self.name},{_fmt(self.value)},{se},{_fmt(self.tol)},{flag}"


@dataclass
class ExperimentReport:
    experiment: str
    seed: int
    rows: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)

    def add(self, name, value, se=None, tol=None, passed=None):
        row = ReportRow(f"{self.experiment}.{name}", value, se, tol,
                        None if passed is None else bool(passed))
        self.rows.append(row)
        return row

    def add_within(self, name, value, se, target, k=3.0):
        """Row passing when |value - target| <= k se."""
        ok = abs(value - target) <= k * se if math.isfinite(se) else False
        return self.add(name, value, se, f"{target}+-{k:g}se", ok)

    def row(self, name):
        full = f"{self.experiment}.{name}"
        for r in self.rows:
            if r.name == full:
                return r
        raise KeyError(name)

    @property
    def passed(self):
        return all(r.passed is not False for r in self.rows)

    def header(self):
        return f"# experiment={self.experiment} seed={self.seed}\n"

    def to_csv(self):
        buf = io.StringIO()
        buf.write(self.header())
        buf.write("name,value,se,tol,pass\n")
        for r in self.rows:
            buf.write(r.line() + "\n")
        return buf.getvalue()

    def table_csv(self, name):
        cols, rows = self.tables[name]
        buf = io.StringIO()
        buf.write(self.header())
        buf.write(",".join(cols) + "\n")
        for row in rows:
            buf.write(",".join(_fmt(v) for v in row) + "\n")
        return buf.getvalue()

    def write(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        paths = [os.path.join(out_dir, "report.csv")]
        with open(paths[0], "w") as fh:
            fh.write(self.to_csv())
        for name in sorted(self.tables):
            p = os.path.join(out_dir, f"{name}.csv")
            with open(p, "w") as fh:
                fh.write(self.table_csv(name))
            paths.append(p)
        return paths


# -- plumbing ------------------------------------------------------------------

_TAGS = {name: i for i, name in enumerate(EXPERIMENTS)}


def substream(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def _pmap(fn, tasks, workers):
    if workers <= 1 or len(tasks) < 2:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def _require_critical(law):
    if abs(law.theta - 1.0) > 1e-8:
        raise PreconditionError(f"law is not critical: theta = {law.theta!r}")


def _levy_params(cfg, law):
    keys = {k: v for k, v in cfg.params.items() if str(k).startswith("levy.")}
    if keys:
        return preset_from_text("".join(f"{k}={v}\n" for k, v in keys.items()))
    return LevyParams.from_law(law)


# -- component sizes -------------------------------------------------------------

def _sizes_task(task):
    law, n, seed, i, r, top = task
    rng = substream(seed, _TAGS["sizes"], i, r)
    ex = explore(sample_degrees(law, n, rng), rng)
    comps = sorted(ex.components, key=lambda c: (-c.size, c.start_step))[:top]
    return [(c.size, c.surplus, c.start_step) for c in comps]


def run_component_size_experiment(cfg):
    """Ordered component sizes, surpluses and excursion left endpoints."""
    cfg.validate()
    law = cfg.resolve_law()
    _require_critical(law)
    top = cfg.param("top", 5)
    t_exp = scaling_exponents(law.alpha)[0]
    rep = ExperimentReport("sizes", cfg.seed)
    table = []
    largest = []
    for i, n in enumerate(cfg.ns):
        tasks = [(law, int(n), cfg.seed, i, r, top) for r in range(cfg.replicas)]
        results = _pmap(_sizes_task, tasks, cfg.workers)
        scale = n ** (-t_exp)
        big = np.array([res[0][0] * scale for res in results])
        largest.append(big)
        med, se = stats.median_se(big)
        rep.add(f"largest_median.n={n}", med, se, "[0.05,50]", 0.05 <= med <= 50)
        for rank in range(top):
            vals = [res[rank][0] * scale for res in results if len(res) > rank]
            if vals:
                m, s = stats.mean_se(vals)
                rep.add(f"size_mean.rank={rank + 1}.n={n}", m, s)
        m, s = stats.mean_se([res[0][1] for res in results])
        rep.add(f"largest_surplus_mean.n={n}", m, s)
        m, s = stats.mean_se([res[0][2] * scale for res in results])
        rep.add(f"largest_start_mean.n={n}", m, s)
        for r, res in enumerate(results):
            for rank, (size, surplus, start) in enumerate(res):
                table.append((n, r, rank + 1, size * scale, surplus, start * scale))
    for i in range(1, len(cfg.ns)):
        a, b = largest[i - 1], largest[i]
        se = math.sqrt((len(a) + len(b)) / (len(a) * len(b)))
        rep.add(f"ks_largest.{cfg.ns[i - 1]}-{cfg.ns[i]}", stats.ks_statistic(a, b), se)
    rep.tables["components"] = (["n", "replica", "rank", "size", "surplus", "start"], table)
    return rep


# -- change of measure weights ---------------------------------------------------

def _weights_task(task):
    law, n, t, rows, xi_draws, seed, i, chunk = task
    rng = substream(seed, _TAGS["weights"], i, chunk)
    m = int(math.floor(t * n ** (law.alpha / (law.alpha + 1.0)) + 1e-9))
    if m == 0:
        return np.ones(rows)
    Z = draw_degrees(size_biased_law(law), (rows, m), rng)
    xi = sample_xi(law, n - m, xi_draws, rng)
    return np.exp(log_phi_batch(n, Z, law.mu, xi))


def run_weight_convergence(cfg):
    """Discrete weights Phi(n, floor(t n^(alpha/(alpha+1)))) against Phi(t)."""
    cfg.validate()
    law = cfg.resolve_law()
    if not law.has_tail:
        raise PreconditionError("the weight experiment needs a law with a power tail")
    t = cfg.param("t", 1.0)
    xi_draws = cfg.param("xi_draws", 64)
    paths = cfg.param("paths", 10_000)
    # rows of a chunk share their Xi draws, so standard errors use chunk means
    chunk = cfg.param("chunk", 100)
    rep = ExperimentReport("weights", cfg.seed)
    samples = []
    table = []
    for i, n in enumerate(cfg.ns):
        tasks = []
        for c, lo in enumerate(range(0, cfg.replicas, chunk)):
            tasks.append((law, int(n), t, min(chunk, cfg.replicas - lo), xi_draws, cfg.seed, i, c))
        parts = _pmap(_weights_task, tasks, cfg.workers)
        w = np.concatenate(parts)
        samples.append(w)
        if t == 0:
            rep.add(f"mean.n={n}", float(w.mean()), None, 1e-12, bool(np.all(w == 1.0)))
        else:
            m, se = stats.ratio_se([p.sum() for p in parts], [len(p) for p in parts])
            rep.add_within(f"mean.n={n}", m, se, 1.0)
        table += [(f"n={n}", j, v) for j, v in enumerate(w)]
    params = _levy_params(cfg, law)
    if t > 0:
        dt = cfg.dt or t / 256
        rng = substream(cfg.seed, _TAGS["weights"], len(cfg.ns), 0)
        L = simulate_L(params, t, dt, rng, paths=paths)
        wc = np.exp(log_rn_weight(L, dt, t, params))
    else:
        wc = np.ones(paths)
    m, se = stats.mean_se(wc)
    if t == 0:
        rep.add("mean.continuum", m, None, 1e-12, bool(np.all(wc == 1.0)))
    else:
        rep.add_within("mean.continuum", m, se, 1.0)
    table += [("continuum", j, v) for j, v in enumerate(wc)]
    ks = [stats.ks_statistic(samples[j - 1], samples[j]) for j in range(1, len(samples))]
    ks_last = stats.ks_statistic(samples[-1], wc)
    for j, v in enumerate(ks):
        rep.add(f"ks.{cfg.ns[j]}-{cfg.ns[j + 1]}", v, math.sqrt(2.0 / cfg.replicas))
    rep.add(f"ks.{cfg.ns[-1]}-continuum", ks_last, math.sqrt(1.0 / cfg.replicas + 1.0 / paths))
    if ks and t > 0:
        rep.add("ks_trend", float(ks[-1] >= ks_last), None, "ks(prev,last)>=ks(last,limit)",
                ks[-1] >= ks_last)
    rep.tables["weights"] = (["level", "index", "weight"], table)
    return rep


# -- Cox compensator --------------------------------------------------------------

def _cox_task(task):
    law, n, K, seed, i, r = task
    rng = substream(seed, _TAGS["cox"], i, r)
    ex = explore(sample_degrees(law, n, rng), rng, max_steps=K)
    tr = ex.trace
    comp = tr.compensator()
    steps = np.nonzero(tr.kind == 2)[0]
    # randomised time change of the Bernoulli events
    times = comp[steps] + tr.p_back[steps] * rng.random(len(steps))
    proxy = tr.R[:-1].sum() / (law.mu * n)
    return int(tr.N[-1]), float(comp[-1]), float(proxy), times


def run_cox_check(cfg):
    """Back-edge counts against the exact compensator and the R-integral proxy."""
    cfg.validate()
    law = cfg.resolve_law()
    _require_critical(law)
    width = cfg.param("bin", 0.1)
    rep = ExperimentReport("cox", cfg.seed)
    table = []
    for i, n in enumerate(cfg.ns):
        K = int(math.floor(cfg.T * n ** (law.alpha / (law.alpha + 1.0))))
        tasks = [(law, int(n), K, cfg.seed, i, r) for r in range(cfg.replicas)]
        res = _pmap(_cox_task, tasks, cfg.workers)
        N = np.array([x[0] for x in res], dtype=float)
        comp = np.array([x[1] for x in res])
        proxy = np.array([x[2] for x in res])
        r, se = stats.ratio_se(N, comp)
        rep.add_within(f"ratio.n={n}", r, se, 1.0)
        r, se = stats.ratio_se(N, proxy)
        rep.add(f"ratio_proxy.n={n}", r, se)
        m, s = stats.mean_se(N)
        rep.add(f"mean_N.n={n}", m, s)
        counts = []
        for (_, total, _, times) in res:
            nb = int(math.floor(total / width))
            if nb:
                counts.extend(np.histogram(times, bins=nb, range=(0.0, nb * width))[0])
        if len(counts) > 1:
            disp = stats.dispersion_index(counts)
            rep.add(f"dispersion.n={n}", disp, math.sqrt(2.0 / (len(counts) - 1)), "[0.8,1.2]",
                    0.8 <= disp <= 1.2)
        table += [(n, j, int(a), b, c) for j, (a, b, c) in enumerate(zip(N, comp, proxy))]
    rep.tables["replicas"] = (["n", "replica", "N", "compensator", "proxy"], table)
    return rep


# -- GHP comparison -----------------------------------------------------------------

def _ghp_task(task):
    law, n, seed, i, r, with_limit, proxy_n, max_points, budget, batch = task
    rng = substream(seed, _TAGS["ghp"], i, r)
    g = pair_half_edges(sample_degrees(law, n, rng), rng)
    labels = g.components()
    sizes = np.bincount(labels)
    big = int(np.argmax(sizes))
    verts = np.nonzero(labels == big)[0]
    inside = labels[g.edges[:, 0]] == big
    surplus = int(inside.sum()) - len(verts) + 1
    diam = component_diameter(g, verts)
    if not with_limit:
        return len(verts), surplus, diam, math.nan, math.nan, True
    mms = graph_component_to_mms(g, verts, n, law.alpha, max_points=max_points, stream=rng)
    x = len(verts) * n ** (-scaling_exponents(law.alpha)[0])
    try:
        lim = sample_limit_component(x, surplus, law, proxy_n, rng, batch=batch, max_points=max_points)
    except ResamplingError:
        return len(verts), surplus, diam, math.nan, math.nan, False
    d = ghp_estimate(mms, lim.space, budget=budget, stream=rng)
    return len(verts), surplus, diam, d, lim.space.diameter, True


def run_ghp_compare(cfg):
    """Largest components against limit components of matched mass and surplus."""
    cfg.validate()
    law = cfg.resolve_law()
    _require_critical(law)
    alpha = law.alpha
    t_exp, _, h_exp = scaling_exponents(alpha)
    ghp_reps = min(cfg.param("ghp_replicas", 10), cfg.replicas)
    proxy_n = cfg.param("proxy_n", 256)
    max_points = cfg.param("max_points", 96)
    budget = cfg.param("budget", 200)
    batch = cfg.param("batch", 512)
    rep = ExperimentReport("ghp", cfg.seed)
    table = []
    med_size, med_diam, med_ghp = [], [], []
    for i, n in enumerate(cfg.ns):
        tasks = [(law, int(n), cfg.seed, i, r, r < ghp_reps, proxy_n, max_points, budget, batch)
                 for r in range(cfg.replicas)]
        res = _pmap(_ghp_task, tasks, cfg.workers)
        fails = sum(1 for x in res[:ghp_reps] if not x[5])
        if ghp_reps and fails > 0.5 * ghp_reps:
            raise MatchingError(f"limit matching failed for {fails}/{ghp_reps} replicas at n={n}",
                                {"n": n, "failures": fails, "attempts": ghp_reps,
                                 "surplus": [x[1] for x in res[:ghp_reps]]})
        size = np.array([x[0] for x in res], dtype=float)
        diam = np.array([x[2] for x in res], dtype=float)
        m, s = stats.median_se(size)
        med_size.append(m)
        rep.add(f"size_median.n={n}", m, s)
        m, s = stats.median_se(diam)
        med_diam.append(m)
        rep.add(f"diameter_median.n={n}", m, s)
        q = np.quantile(diam * n ** (-h_exp), [0.1, 0.5, 0.9])
        for p, v in zip((10, 50, 90), q):
            rep.add(f"diameter_scaled_q{p}.n={n}", v, s * n ** (-h_exp))
        ghp = np.array([x[3] for x in res[:ghp_reps] if x[5]])
        if len(ghp):
            m, s = stats.median_se(ghp)
            med_ghp.append(m)
            rep.add(f"ghp_median.n={n}", m, s)
            ld = np.array([x[4] for x in res[:ghp_reps] if x[5]])
            rep.add(f"limit_diameter_median.n={n}", float(np.median(ld)), stats.median_se(ld)[1])
        table += [(n, j, int(x[0]), x[1], x[2], x[3], x[4]) for j, x in enumerate(res)]
    if len(cfg.ns) >= 2:
        slope, se = stats.loglog_slope(cfg.ns, med_size)
        rep.add("size_slope", slope, se, f"{t_exp:.6g}+-0.1", abs(slope - t_exp) <= 0.1)
        slope, se = stats.loglog_slope(cfg.ns, med_diam)
        rep.add("diameter_slope", slope, se, f"{h_exp:.6g}+-0.12", abs(slope - h_exp) <= 0.12)
        if len(med_ghp) == len(cfg.ns):
            rep.add("ghp_trend", float(med_ghp[-1] <= med_ghp[0]), None,
                    "median(last)<=median(first)", med_ghp[-1] <= med_ghp[0])
    rep.tables["replicas"] = (["n", "replica", "size", "surplus", "diameter", "ghp",
                               "limit_diameter"], table)
    return rep


# -- conditioned single component -------------------------------------------------------

def conditioned_area_exact(law, m):
    """Exact mean area of the Lukasiewicz excursion of a Galton-Watson tree
    with offspring Z - 1 (Z size-biased) conditioned on m vertices.

    The area is sum_{k < m} S(k).  Computed by dynamic programming over the
    walk position, carrying probability and probability-weighted area.
    """
    if law.has_tail:
        raise PreconditionError("exact conditioning needs a finite-support law")
    steps = {k - 2: p for k, p in size_biased_law(law).atoms.items()}
    width = m * max(max(steps), 0) + 2
    # index j holds the walk at position j - 1
    P = np.zeros(width)
    A = np.zeros(width)
    P[1] = 1.0
    pos = np.arange(width) - 1
    for k in range(m):
        A = A + P * pos
        newP = np.zeros(width)
        newA = np.zeros(width)
        for s, p in steps.items():
            lo, hi = max(0, -s), min(width, width - s)
            newP[lo + s:hi + s] += p * P[lo:hi]
            newA[lo + s:hi + s] += p * A[lo:hi]
        if k < m - 1:
            newP[0] = newA[0] = 0.0
        P, A = newP, newA
    if P[0] == 0:
        raise ValueError(f"no tree with {m} vertices")
    return float(A[0] / P[0])


def _forest_components(S):
    """(start, size, area) of the excursions of a forest walk, vectorised."""
    S = np.asarray(S, dtype=np.int64)
    prev = np.minimum.accumulate(S)[:-1]
    rec = np.nonzero(S[1:] < prev)[0] + 1
    starts = np.concatenate([[0], rec])
    ends = np.concatenate([rec, [len(S) - 1]])
    cs = np.concatenate([[0], np.cumsum(S[:-1])])
    areas = cs[ends] - cs[starts] - (ends - starts) * S[starts]
    keep = ends > starts
    return starts[keep], (ends - starts)[keep], areas[keep]


def _conditioned_task(task):
    law, n, lo, hi, seed, i, r = task
    rng = substream(seed, _TAGS["conditioned"], i, r)
    d = sample_degrees(law, n, rng).degrees
    S = forest_walk(d[size_biased_order(d, rng)])
    starts, sizes, areas = _forest_components(S)
    ok = (sizes >= lo) & (sizes <= hi)
    return sizes[ok], areas[ok]


def run_conditioned_component(cfg):
    """Areas of forest components conditioned on their size.

    With delta = 0, m <= 20 and a finite law the exact conditioned mean is
    reported as well.  Otherwise areas of components of size in
    [m, m(1 + delta)], m = floor(x n^(alpha/(alpha+1))), are normalised to
    mass x and compared with tilted proxy excursions.
    """
    cfg.validate()
    law = cfg.resolve_law()
    _require_critical(law)
    alpha, mu = law.alpha, law.mu
    x = cfg.param("x", 0.5)
    delta = cfg.param("delta", 0.25)
    proxy_n = cfg.param("proxy_n", 256)
    batch = cfg.param("batch", 2000)
    floor_rate = cfg.param("accept_floor", 0.01)
    t_exp = alpha / (alpha + 1.0)
    rep = ExperimentReport("conditioned", cfg.seed)
    table = []
    if "m" in cfg.params:
        m = int(cfg.params["m"])
        if not law.has_tail and m <= 20:
            rep.add(f"exact_mean_area.m={m}", conditioned_area_exact(law, m), None, 1e-10, None)
        rng = substream(cfg.seed, _TAGS["conditioned"], 99, 0)
        W = conditioned_walks(law, feasible_size(law, m), cfg.replicas, rng)
        a = W[:, :-1].sum(axis=1).astype(float)
        mm, se = stats.mean_se(a)
        rep.add(f"mc_mean_area.m={m}", mm, se)
        table += [("walk", m, j, v) for j, v in enumerate(a)]
        rep.tables["areas"] = (["source", "n", "index", "area"], table)
        return rep
    # tilted proxy: weight exp(int of the length-x excursion / mu)
    rng = substream(cfg.seed, _TAGS["conditioned"], 98, 0)
    es, _ = proxy_excursions(law, feasible_size(law, proxy_n), batch, rng)
    base = np.array([float(e.values[:-1].sum() * e.dt) for e in es])
    px = x ** (1.0 + 1.0 / alpha) * base
    w = np.exp(px / mu - (px / mu).max())
    w /= w.sum()
    pmean = float(w @ px)
    pvar = float(w @ (px - pmean) ** 2)
    pse = math.sqrt(float(np.sum(w ** 2 * (px - pmean) ** 2)))
    rep.add("proxy_mean_area", pmean, pse)
    ess = 1.0 / float(np.sum(w ** 2))
    rep.add("proxy_var_area", pvar, pvar * math.sqrt(2.0 / max(ess - 1.0, 1.0)))
    for i, n in enumerate(cfg.ns):
        scale = n ** t_exp
        lo = max(1, int(math.floor(x * scale)))
        hi = int(math.floor(lo * (1.0 + delta)))
        sizes, areas = [], []
        tried = 0
        for r in range(cfg.replicas):
            s, a = _conditioned_task((law, int(n), lo, hi, cfg.seed, i, r))
            sizes.append(s)
            areas.append(a)
            tried += 1
        sizes = np.concatenate(sizes)
        areas = np.concatenate(areas).astype(float)
        if len(sizes) < floor_rate * tried:
            raise BudgetError(f"accepted {len(sizes)} components from {tried} graphs at n={n}",
                              len(sizes), tried)
        xi = sizes / scale
        norm = areas / n * (x / xi) ** (1.0 + 1.0 / alpha)
        mm, se = stats.mean_se(norm)
        rep.add(f"accepted.n={n}", len(norm), None)
        both = math.sqrt(se ** 2 + pse ** 2)
        rep.add(f"mean_area.n={n}", mm, se, f"proxy+-3se", abs(mm - pmean) <= 3 * both)
        if len(norm) > 1:
            v = float(norm.var(ddof=1))
            rep.add(f"var_area.n={n}", v, v * math.sqrt(2.0 / (len(norm) - 1)))
        table += [("discrete", n, j, v) for j, v in enumerate(norm)]
    table += [("proxy", 0, j, v) for j, v in enumerate(px)]
    rep.tables["areas"] = (["source", "n", "index", "area"], table)
    return rep


# -- simplicity probability ---------------------------------------------------------------

def _simple_task(task):
    law, n, count, seed, c = task
    rng = substream(seed, _TAGS["simple-prob"], 0, c)
    hits = 0
    for _ in range(count):
        hits += is_simple(pair_half_edges(sample_degrees(law, n, rng), rng))
    return hits


def run_simple_probability(cfg):
    """Fraction of simple configuration graphs against exp(-theta/2 - theta^2/4)."""
    cfg.validate()
    law = cfg.resolve_law()
    n = int(cfg.ns[0])
    chunk = 100
    tasks = [(law, n, min(chunk, cfg.replicas - lo), cfg.seed, c)
             for c, lo in enumerate(range(0, cfg.replicas, chunk))]
    hits = _pmap(_simple_task, tasks, cfg.workers)
    rate = sum(hits) / cfg.replicas
    se = math.sqrt(rate * (1 - rate) / cfg.replicas)
    th = law.theta
    target = math.exp(-th / 2 - th ** 2 / 4)
    tol = cfg.param("tol", 0.02)
    rep = ExperimentReport("simple-prob", cfg.seed)
    rep.add(f"rate.n={n}", rate, se, tol, abs(rate - target) <= tol)
    rep.add("target", target, None)
    rep.tables["attempts"] = (["chunk", "attempts", "simple"],
                              [(c, t[2], h) for c, (t, h) in enumerate(zip(tasks, hits))])
    return rep


# -- Levy calibration ------------------------------------------------------------------------

def c_alpha_quadrature(params):
    """C_alpha = c int_0^inf (e^-x - 1 + x) x^(-alpha-1) dx by numerical quadrature."""
    a = params.alpha
    f = lambda x: (math.expm1(-x) + x) * x ** (-a - 1.0)
    head = quad(f, 0.0, 1.0, limit=200)[0]
    tail = quad(f, 1.0, math.inf, limit=200)[0]
    return params.c * (head + tail)


def run_levy_check(cfg):
    """(1/t) log E exp(-lambda L_t) against Psi(lambda)."""
    cfg.validate()
    law = cfg.resolve_law()
    params = _levy_params(cfg, law)
    t = cfg.param("t", 1.0)
    dt = cfg.dt or 1.0 / 64
    lams = [float(v) for v in str(cfg.params.get("lambdas", "0.5,1,2")).split(",")]
    rng = substream(cfg.seed, _TAGS["levy-check"], 0, 0)
    L = simulate_L(params, t, dt, rng, paths=cfg.replicas)[:, -1]
    rep = ExperimentReport("levy-check", cfg.seed)
    table = []
    for lam in lams:
        e = np.exp(-lam * L)
        m, s = stats.mean_se(e)
        est = math.log(m) / t
        se = s / m / t
        rep.add_within(f"psi.lambda={lam:g}", est, se, float(params.psi(lam)))
        table.append((lam, m, s))
    if not params.brownian:
        q = c_alpha_quadrature(params)
        rep.add("C_alpha", params.C_alpha, None, 1e-9, abs(q - params.C_alpha) <= 1e-9)
    rep.tables["laplace"] = (["lambda", "mean", "se"], table)
    return rep


RUNNERS = {
    "sizes": run_component_size_experiment,
    "weights": run_weight_convergence,
    "cox": run_cox_check,
    "ghp": run_ghp_compare,
    "conditioned": run_conditioned_component,
    "simple-prob": run_simple_probability,
    "levy-check": run_levy_check,
}


def run(cfg):
    cfg.validate()
    rep = RUNNERS[cfg.experiment](cfg)
    if cfg.out:
        rep.write(cfg.out)
    return rep
