import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from stablegraph.degree_model import (DegreeLaw, DegreeSequence, LawError, convolution_power,
                                      draw_degrees, finite_law, law_from_text, law_to_text,
                                      make_critical_power_law, moments, phi_weight,
                                      sample_degrees, sequence_from_text, sequence_to_text,
                                      size_biased_law, size_biased_order, size_biased_prefix,
                                      size_biased_reorder)

from oracles import size_biased_prefix_law

NU13 = {1: 0.75, 3: 0.25}


def test_moments_two_atoms():
    m = moments(finite_law({1: 0.5, 3: 0.5}))
    assert m["mu"] == pytest.approx(2.0)
    assert m["theta"] == pytest.approx(1.5)


def test_moments_critical_example():
    m = moments(finite_law(NU13))
    assert m["mu"] == pytest.approx(1.5)
    assert m["theta"] == pytest.approx(1.0, abs=1e-15)
    assert m["beta"] == pytest.approx(1.5)


def test_two_regular_law_rejected():
    with pytest.raises(LawError):
        finite_law({2: 1.0})


@pytest.mark.parametrize("atoms", [{1: 0.5, 3: 0.4}, {1: -0.1, 3: 1.1}, {0: 0.5, 1: 0.5}])
def test_invalid_pmf(atoms):
    with pytest.raises(LawError):
        finite_law(atoms)


def test_power_law_beta_diverges():
    law = make_critical_power_law(1.5)
    assert math.isinf(moments(law)["beta"])


def _theta_by_summation(a1, alpha, k0, K=200_000):
    # theta for the law a1 at 1 and A k^-(alpha+2) on k >= k0, A fixed by normalisation
    k = np.arange(k0, K, dtype=float)
    pw = k ** (-(alpha + 2))
    tail0 = pw.sum() + K ** (-(alpha + 1)) / (alpha + 1)
    A = (1 - a1) / tail0
    mu = a1 + A * ((k * pw).sum() + K ** (-alpha) / alpha)
    second = A * ((k * (k - 1) * pw).sum() + K ** (1 - alpha) / (alpha - 1) - K ** (-alpha) / alpha)
    return second / mu


def test_critical_power_law_theta():
    law = make_critical_power_law(1.5, k0=3)
    assert abs(law.theta - 1.0) <= 1e-10
    # bisection oracle on the atom at 1 with independent summation of the tail
    a1 = brentq(lambda a: _theta_by_summation(a, 1.5, 3) - 1.0, 0.5, 0.999, xtol=1e-14)
    assert law.atoms[1] == pytest.approx(a1, abs=1e-6)
    assert law.mu == pytest.approx(1.13058, abs=1e-5)


@given(st.floats(1.05, 1.95), st.integers(3, 12), st.floats(0.0, 0.2))
@settings(max_examples=40, deadline=None)
def test_critical_power_law_normalised(alpha, k0, atom2):
    try:
        law = make_critical_power_law(alpha, k0=k0, atom2=atom2)
    except LawError:
        return
    total = sum(law.atoms.values()) + law._tail_sum(0)
    assert abs(total - 1.0) <= 1e-12
    assert abs(law.theta - 1.0) <= 1e-10
    assert 1.0 < law.mu < 2.0


def test_power_law_tail_ratio():
    law = make_critical_power_law(1.5, k0=3)
    k = 10_000
    assert law.pmf(2 * k) / law.pmf(k) == pytest.approx(2 ** -3.5, rel=0.01)


def test_infeasible_power_law():
    with pytest.raises(LawError):
        make_critical_power_law(2.5)
    with pytest.raises(LawError):
        make_critical_power_law(1.5, k0=2)


def test_parity_fix():
    assert list(DegreeSequence.with_parity_fix([1, 1, 3]).degrees) == [1, 1, 4]
    assert list(DegreeSequence.with_parity_fix([1, 1, 1]).degrees) == [1, 1, 2]
    assert list(DegreeSequence.with_parity_fix([1, 1]).degrees) == [1, 1]


def test_sample_degrees_all_ones():
    rng = np.random.default_rng(0)
    seq = sample_degrees(finite_law({1: 1.0}), 5, rng)
    assert list(seq.degrees) == [1, 1, 1, 1, 2]


def test_sample_degrees_small_n():
    with pytest.raises(ValueError):
        sample_degrees(finite_law(NU13), 1, np.random.default_rng(0))


def test_sample_mean_clt_band():
    rng = np.random.default_rng(1)
    n = 100_000
    d = draw_degrees(finite_law(NU13), n, rng)
    assert abs(d.mean() - 1.5) <= 3 * math.sqrt(0.75 / n)


@pytest.mark.parametrize("K", [5, 20, 60])
def test_tail_draw_frequencies(K):
    law = make_critical_power_law(1.5)
    rng = np.random.default_rng(2)
    draws = 4_000_000
    d = draw_degrees(law, draws, rng)
    p = 1.0 - sum(law.pmf(k) for k in range(1, K))
    assert abs((d >= K).mean() - p) <= 3 * math.sqrt(p * (1 - p) / draws)


@given(st.lists(st.integers(1, 50), min_size=1, max_size=40), st.integers(0, 2**32 - 1))
def test_size_biased_order_is_permutation(degrees, seed):
    perm = size_biased_order(degrees, np.random.default_rng(seed))
    assert sorted(perm) == list(range(len(degrees)))


def test_size_biased_prefix_matches_full_order():
    d = np.array([4, 1, 7, 2, 2, 9, 1])
    full = size_biased_order(d, np.random.default_rng(11))
    part = size_biased_prefix(d, 3, np.random.default_rng(11))
    assert list(part) == list(full[:3])


def test_size_biased_reorder_trivial():
    rng = np.random.default_rng(0)
    assert list(size_biased_reorder(DegreeSequence([5]), rng).degrees) == [5]
    assert list(size_biased_reorder(DegreeSequence([1, 1]), rng).degrees) == [1, 1]


def test_size_biased_first_pick_two_elements():
    rng = np.random.default_rng(3)
    trials = 100_000
    hits = sum(size_biased_order([1, 3], rng)[0] == 1 for _ in range(trials))
    p = hits / trials
    assert abs(p - 0.75) <= 3 * math.sqrt(0.75 * 0.25 / trials)


def test_size_biased_order_matches_sequential_law():
    # the full permutation law against sequential picking, degrees (1, 2, 3)
    d = [1, 2, 3]
    rng = np.random.default_rng(4)
    trials = 60_000
    counts = {}
    for _ in range(trials):
        key = tuple(size_biased_order(d, rng))
        counts[key] = counts.get(key, 0) + 1
    for perm in itertools.permutations(range(3)):
        p, left = 1.0, sum(d)
        for i in perm:
            p *= d[i] / left
            left -= d[i]
        emp = counts.get(perm, 0) / trials
        assert abs(emp - p) <= 4 * math.sqrt(p * (1 - p) / trials)


def test_size_biased_law_examples():
    z = size_biased_law(finite_law(NU13))
    assert z.atoms == pytest.approx({1: 0.5, 3: 0.5})
    assert z.mu == pytest.approx(2.0)
    assert size_biased_law(finite_law({1: 1.0})).atoms == {1: 1.0}
    assert size_biased_law(finite_law({1: 0.5, 3: 0.5})).atoms == pytest.approx({1: 0.25, 3: 0.75})


def test_size_biased_power_law_mean_two():
    z = size_biased_law(make_critical_power_law(1.5))
    assert z.mu == pytest.approx(2.0, abs=1e-10)


def test_convolution_power():
    p = convolution_power(finite_law(NU13), 2)
    assert p[2] == pytest.approx(0.5625)
    assert p[4] == pytest.approx(0.375)
    assert p[6] == pytest.approx(0.0625)


def test_phi_worked_values():
    law = finite_law(NU13)
    assert phi_weight(2, 1, [1], law) == pytest.approx(21 / 16, abs=1e-14)
    assert phi_weight(2, 1, [3], law) == pytest.approx(11 / 16, abs=1e-14)
    mean = 0.5 * phi_weight(2, 1, [1], law) + 0.5 * phi_weight(2, 1, [3], law)
    assert mean == pytest.approx(1.0, abs=1e-14)


def test_phi_errors():
    law = finite_law(NU13)
    with pytest.raises(ValueError):
        phi_weight(2, 3, [1, 1, 1], law)
    with pytest.raises(LawError):
        phi_weight(3, 1, [1], make_critical_power_law(1.5))
    with pytest.raises(ValueError):
        phi_weight(30, 1, [1], law)


def test_phi_monte_carlo_agrees_with_exact():
    law = finite_law(NU13)
    rng = np.random.default_rng(5)
    exact = phi_weight(8, 3, [3, 1, 1], law)
    est, se = phi_weight(8, 3, [3, 1, 1], law, mode="monte-carlo", stream=rng,
                         draws=20_000, return_se=True)
    assert abs(est - exact) <= 3 * se


LAWS = [NU13, {1: 0.5, 3: 0.5}, {1: 0.5, 2: 0.25, 4: 0.25}]


@pytest.mark.parametrize("atoms", LAWS)
def test_change_of_measure_by_enumeration(atoms):
    law = finite_law(atoms)
    exact_atoms = {k: Fraction(p).limit_denominator(64) for k, p in atoms.items()}
    mu = law.mu
    for n in range(1, 5):
        for m in range(1, n + 1):
            enum = size_biased_prefix_law(exact_atoms, n, m)
            for k in itertools.product(sorted(atoms), repeat=m):
                prod = np.prod([ki * atoms[ki] / mu for ki in k])
                rhs = prod * phi_weight(n, m, list(k), law)
                assert abs(float(enum.get(k, 0)) - rhs) <= 1e-12


def test_change_of_measure_n5():
    law = finite_law(NU13)
    exact_atoms = {1: Fraction(3, 4), 3: Fraction(1, 4)}
    enum = size_biased_prefix_law(exact_atoms, 5, 3)
    for k, p in enum.items():
        prod = np.prod([ki * NU13[ki] / law.mu for ki in k])
        assert abs(float(p) - prod * phi_weight(5, 3, list(k), law)) <= 1e-12


def test_stochastic_domination():
    atoms = {1: Fraction(3, 4), 3: Fraction(1, 4)}
    z = {1: Fraction(1, 2), 3: Fraction(1, 2)}
    for n in range(1, 5):
        joint = size_biased_prefix_law(atoms, n, n)
        for d in itertools.product([1, 2, 3], repeat=n):
            lhs = sum(p for k, p in joint.items() if all(a >= b for a, b in zip(k, d)))
            rhs = np.prod([sum(p for v, p in z.items() if v >= b) for b in d])
            assert lhs <= rhs + 1e-15


def _prefix_square_sum(law, n, rng):
    d = sample_degrees(law, n, rng).degrees
    m = int(n ** (law.alpha / (law.alpha + 1)))
    return (d[size_biased_prefix(d, m, rng)].astype(float) ** 2).sum() / n


def test_prefix_squares_negligible():
    law = make_critical_power_law(1.5)
    rng = np.random.default_rng(6)
    meds = [np.median([_prefix_square_sum(law, n, rng) for _ in range(200)])
            for n in (10_000, 100_000, 1_000_000)]
    assert meds[0] > meds[1] > meds[2]


def test_suffix_law_of_large_numbers():
    law = make_critical_power_law(1.5)
    rng = np.random.default_rng(7)
    n = 100_000
    d = sample_degrees(law, n, rng).degrees
    m = int(0.25 * n ** 0.6)
    tail = d[size_biased_order(d, rng)][m:]
    se = d.std() / math.sqrt(n)
    assert abs(tail.sum() / n - law.mu) <= 3 * se


@given(st.dictionaries(st.integers(1, 9), st.integers(1, 20), min_size=1, max_size=5))
def test_law_text_roundtrip(weights):
    if set(weights) == {2}:
        weights = {**weights, 1: 1}
    total = sum(weights.values())
    atoms = {k: v / total for k, v in weights.items()}
    atoms[max(atoms)] += 1.0 - sum(atoms.values())
    law = finite_law(atoms)
    back = law_from_text(law_to_text(law))
    assert back.atoms == law.atoms


def test_power_law_text_roundtrip():
    law = make_critical_power_law(1.5)
    text = law_to_text(law)
    assert "tail.A=" in text and "k0=3" in text
    back = law_from_text(text)
    assert back.tail_A == law.tail_A and back.atoms == law.atoms and back.alpha == 1.5


def test_sequence_text_roundtrip():
    seq = DegreeSequence([3, 1, 1, 5])
    assert list(sequence_from_text(sequence_to_text(seq)).degrees) == [3, 1, 1, 5]
    assert sequence_to_text(seq) == "3\n1\n1\n5\n"
