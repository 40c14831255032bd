import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stablegraph.coding_paths import area
from stablegraph.levy_sim import (GeneralExponent, LevyParams, cox_marks, drift_A, inverse_local_time,
                                  levy_exponent, log_rn_weight, preset_from_text, preset_to_text,
                                  reflect, rn_weight, simulate_L, simulate_tilted, stable_increments,
                                  stopped_weight_identity)
from stablegraph.paths import GridPath, MarkedExcursion

STABLE = LevyParams(alpha=1.5, mu=1.5, c=1.0)
BROWN = LevyParams(alpha=2.0, mu=1.0, beta=1.0)


def rng(seed=0):
    return np.random.default_rng(seed)


def ratio_mean(num, den):
    r = num.sum() / den.sum()
    k = len(num)
    return r, math.sqrt(k / (k - 1) * np.sum((num - r * den) ** 2)) / den.sum()


# -- exponent ----------------------------------------------------------------------------

def test_exponent_brownian():
    assert levy_exponent(LevyParams(alpha=2.0, mu=1.0, beta=1.0), 2.0) == pytest.approx(2.0)


def test_exponent_stable_constant():
    p = LevyParams(alpha=1.5, mu=1.5, c=1.0)
    assert p.C_alpha == pytest.approx(4 * math.sqrt(math.pi) / 3, rel=1e-12)
    assert p.C_alpha == pytest.approx(2.363271, abs=1e-6)
    assert levy_exponent(p, 1.0) == pytest.approx(p.C_alpha / 1.5)


@given(st.floats(1.05, 2.0), st.floats(0.1, 5.0), st.floats(1.01, 1.99))
def test_exponent_zero_and_convex(alpha, c, mu):
    p = LevyParams(alpha=alpha, mu=mu, c=c, beta=c)
    assert levy_exponent(p, 0.0) == 0.0
    lam = np.linspace(0, 3, 31)
    v = p.psi(lam)
    assert np.all(v >= 0)
    assert np.all(np.diff(v, 2) >= -1e-12)


def test_exponent_negative_lambda():
    with pytest.raises(ValueError):
        levy_exponent(STABLE, -1.0)


def test_general_exponent():
    g = GeneralExponent(gamma=0.5, delta=2.0, atoms=((1.0, 0.3),))
    lam = 1.7
    want = 0.5 * lam + 2.0 * lam ** 2 + 0.3 * (math.exp(-lam) - 1 + lam)
    assert levy_exponent(STABLE, lam, general=g) == pytest.approx(want)
    # a pure stable part with mu = 1 reduces to the stable exponent
    s = GeneralExponent(stable_c=1.0, stable_alpha=1.5)
    assert levy_exponent(STABLE, 2.0, general=s) == pytest.approx(STABLE.C_alpha * 2 ** 1.5)


def test_params_validation():
    with pytest.raises(ValueError):
        LevyParams(alpha=1.0, mu=1.5, c=1.0)
    with pytest.raises(ValueError):
        LevyParams(alpha=1.5, mu=1.5)
    with pytest.raises(ValueError):
        LevyParams(alpha=2.0, mu=1.5)


# -- simulation ---------------------------------------------------------------------------

def test_path_starts_at_zero():
    L = simulate_L(STABLE, 1.0, 1 / 64, rng())
    assert L.values[0] == 0 and len(L.values) == 65


def test_brownian_variance():
    x = simulate_L(BROWN, 1.0, 1 / 16, rng(1), paths=100_000)[:, -1]
    v = x.var(ddof=1)
    se = math.sqrt((np.mean((x - x.mean()) ** 4) - v ** 2) / len(x))
    assert abs(v - 1.0) <= 3 * se


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_stable_laplace(lam):
    x = stable_increments(STABLE, 1.0, 100_000, rng(2))
    e = np.exp(-lam * x)
    est = math.log(e.mean())
    se = e.std(ddof=1) / math.sqrt(len(e)) / e.mean()
    assert abs(est - STABLE.psi(lam)) <= 3 * se


def test_brownian_tilted_mean():
    x = simulate_tilted(BROWN, 1.0, 1 / 64, rng(3), paths=100_000)[:, -1]
    assert abs(x.mean() + 0.5) <= 3 * x.std(ddof=1) / math.sqrt(len(x))


def test_stable_tilted_mean():
    x = simulate_tilted(STABLE, 1.0, 1 / 256, rng(4), paths=50_000)[:, -1]
    assert abs(x.mean() - drift_A(STABLE, 1.0)) <= 3 * x.std(ddof=1) / math.sqrt(len(x))


def test_tilted_drifts_down():
    med = [np.median(simulate_tilted(STABLE, T, 1 / 32, rng(5), paths=2000)[:, -1]) for T in (1, 2, 4, 8)]
    assert all(a > b for a, b in zip(med, med[1:]))


def test_tilted_method_errors():
    with pytest.raises(ValueError):
        simulate_tilted(STABLE, 1.0, 1 / 16, rng(), method="exact-brownian")
    with pytest.raises(ValueError):
        simulate_tilted(STABLE, 1.0, 1 / 16, rng(), eps=0.0)
    with pytest.raises(ValueError):
        simulate_tilted(BROWN, 1.0, 1 / 16, rng(), method="direct")


def test_two_constructions_agree():
    # weighting L by Phi(1) gives the law of the tilted process at time 1
    dt = 1 / 64
    L = simulate_L(STABLE, 1.0, dt, rng(6), paths=100_000)
    w = np.exp(log_rn_weight(L, dt, 1.0, STABLE))
    x = L[:, -1]
    y = simulate_tilted(STABLE, 1.0, dt, rng(7), paths=100_000)[:, -1]
    for f in (lambda z: z, lambda z: z * z):
        m, se = ratio_mean(w * f(x), w)
        fy = f(y)
        se2 = fy.std(ddof=1) / math.sqrt(len(fy))
        assert abs(m - fy.mean()) <= 3 * math.hypot(se, se2)


# -- reflection and weights -----------------------------------------------------------------

def test_reflect_examples():
    assert list(reflect(GridPath(1.0, [0, 1, -1, 0])).values) == [0, 1, 0, 1]
    assert np.all(reflect(GridPath(1.0, [0, -1, -2, -3])).values == 0)
    assert list(reflect(GridPath(1.0, [0, 1, 2, 5])).values) == [0, 1, 2, 5]


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=50))
def test_reflect_nonnegative_and_idempotent(steps):
    p = GridPath(0.5, np.concatenate([[0.0], np.cumsum(steps)]))
    R = reflect(p)
    assert R.values[0] == 0 and np.all(R.values >= 0)
    assert np.allclose(reflect(R).values, R.values)


def test_rn_weight_zero_path():
    L = GridPath(0.01, np.zeros(201))
    want = math.exp(-STABLE.C_alpha * 2 ** 2.5 / (2.5 * 1.5 ** 2.5))
    assert rn_weight(L, 2.0, STABLE) == pytest.approx(want)


def test_rn_weight_at_zero():
    L = simulate_L(STABLE, 1.0, 1 / 64, rng(8))
    assert rn_weight(L, 0.0, STABLE) == 1.0


def test_rn_weight_beyond_horizon():
    with pytest.raises(ValueError):
        rn_weight(GridPath(0.5, [0.0, 1.0, 2.0]), 1.5, STABLE)


@pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
def test_rn_weight_mean_one(t):
    dt = 1 / 128
    L = simulate_L(STABLE, 2.0, dt, rng(9), paths=50_000)
    w = np.exp(log_rn_weight(L, dt, t, STABLE))
    assert abs(w.mean() - 1) <= 3 * w.std(ddof=1) / math.sqrt(len(w))


# -- inverse local time and marks ------------------------------------------------------------

def test_inverse_local_time_examples():
    dt = 0.001
    down = GridPath(dt, -np.arange(3001) * dt)
    assert inverse_local_time(down, 1.5) == pytest.approx(1.5, abs=2 * dt)
    assert inverse_local_time(GridPath(1.0, [0, 0, -1, -2]), 0.0) == 2.0
    assert inverse_local_time(GridPath(1.0, [0, 1, 1, 2]), 0.5) == math.inf
    with pytest.raises(ValueError):
        inverse_local_time(down, -1.0)


def test_inverse_local_time_tail():
    # first passage below -1 is a stable subordinator value of index 1/alpha;
    # censored Hill estimate from 10^4 independent paths
    dt, T, N, k = 1 / 64, 1000.0, 10_000, 500
    r = rng(10)
    pos = np.zeros(N)
    sig = np.full(N, np.inf)
    active = np.arange(N)
    t = 0
    while len(active) and t < T:
        v = pos[active, None] + np.cumsum(stable_increments(STABLE, dt, (len(active), 64), r), axis=1)
        hit = v < -1.0
        done = hit.any(axis=1)
        sig[active[done]] = t + (hit.argmax(axis=1)[done] + 1) * dt
        pos[active] = v[:, -1]
        active = active[~done]
        t += 1
    y = np.minimum(sig, T)
    u = np.sort(y)[::-1][k]
    top = y > u
    est = np.sum(sig[top] < T) / np.sum(np.log(y[top] / u))
    assert abs(est - 1 / 1.5) <= 0.15


def test_cox_marks_zero():
    assert len(cox_marks(GridPath(0.1, np.zeros(11)), 1.5, rng())) == 0


def test_cox_marks_constant():
    R = GridPath(0.01, np.full(201, 3.0))
    r = rng(11)
    counts = np.array([len(cox_marks(R, 1.5, r)) for _ in range(4000)])
    want = 3.0 * 2.0 / 1.5
    assert abs(counts.mean() - want) <= 3 * math.sqrt(want / len(counts))
    m = cox_marks(R, 1.5, r)
    assert np.all((m[:, 1] >= 0) & (m[:, 1] <= 3.0)) and np.all((m[:, 0] >= 0) & (m[:, 0] <= 2.0))


def test_cox_marks_excursion_area():
    dt = 0.005
    t = np.arange(401) * dt
    ex = MarkedExcursion(GridPath(dt, np.sin(np.pi * t / 2.0) * 1.5))
    want = area(ex) / 1.5
    r = rng(12)
    counts = np.array([len(cox_marks(ex.path, 1.5, r)) for _ in range(4000)])
    assert abs(counts.mean() - want) <= 3 * math.sqrt(want / len(counts))


def test_cox_marks_negative():
    with pytest.raises(ValueError):
        cox_marks(GridPath(1.0, [0.0, -1.0, 0.0]), 1.5, rng())


# -- stopped identity ------------------------------------------------------------------

def test_stopped_identity_drift():
    dt = 1e-4
    down = GridPath(dt, -np.arange(20_001) * dt)
    lhs, rhs = stopped_weight_identity(down, 1.0, STABLE)
    a, mu = 1.5, 1.5
    want = math.exp(1 / (2 * mu) - STABLE.C_alpha / ((a + 1) * mu ** (a + 1)))
    assert lhs == pytest.approx(want, rel=1e-3)
    assert rhs == pytest.approx(want, rel=1e-3)


def test_stopped_identity_zero_level():
    assert stopped_weight_identity(simulate_L(STABLE, 1.0, 1 / 64, rng()), 0.0, STABLE) == (1.0, 1.0)


def test_stopped_identity_horizon():
    with pytest.raises(ValueError):
        stopped_weight_identity(GridPath(1.0, [0.0, 1.0, 2.0]), 1.0, STABLE)


def test_stopped_identity_random_paths_close():
    r = rng(13)
    done = 0
    while done < 20:
        L = simulate_L(STABLE, 8.0, 1 / 512, r)
        if L.values.min() >= -0.5:
            continue
        lhs, rhs = stopped_weight_identity(L, 0.5, STABLE)
        assert abs(lhs - rhs) / lhs < 0.25
        done += 1


def test_preset_roundtrip():
    for p in (STABLE, BROWN):
        text = preset_to_text(p)
        assert preset_from_text(text) == p
    assert preset_to_text(STABLE).splitlines()[0] == "levy.alpha=1.5"
