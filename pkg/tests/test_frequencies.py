import itertools
import math

import numpy as np
import pytest

from hamnf.frequencies import (ALPHA_GRID, EnumerationGuardError, FrequencyModel,
                               diophantine_check, min_divisor_order_r,
                               monte_carlo_resonance_measure, scan_strong_nonresonance)

SQ2 = math.sqrt(2)


def test_model_evaluation():
    assert FrequencyModel.nlw(1.0)(2) == pytest.approx(math.sqrt(5), abs=1e-15)
    assert FrequencyModel.convolution(2, [0.3])(1) == pytest.approx(1.075, abs=1e-15)
    assert FrequencyModel.explicit([1, SQ2])(2) == SQ2


def test_model_validation():
    with pytest.raises(IndexError):
        FrequencyModel.explicit([1.0])(2)
    with pytest.raises(ValueError):
        FrequencyModel.nlw(0.0)
    with pytest.raises(ValueError):
        FrequencyModel.convolution(2, [0.7])
    with pytest.raises(ValueError):
        FrequencyModel.nlw(1.0)(0)


def test_growth_witness():
    nlw = FrequencyModel.nlw(2.0)
    conv = FrequencyModel.random_convolution(2, 50, seed=1)
    j = np.arange(1, 51)
    assert np.all(nlw.vector(50) <= 2 * j)
    assert np.all(np.abs(conv.vector(50)) <= 2 * j ** 2)


def _brute_min(w, r):
    best = (math.inf, None)
    for k in itertools.product(range(-r, r + 1), repeat=len(w)):
        if 0 < sum(map(abs, k)) <= r:
            v = abs(float(np.dot(k, w)))
            if v < best[0]:
                best = (v, k)
    return best


def test_min_divisor_examples_box_norm():
    val, k = min_divisor_order_r([1, 2], 2, norm="linf")
    assert val == 0 and k == (2, -1)
    val, k = min_divisor_order_r([1, SQ2], 3, norm="linf")
    assert val == pytest.approx(3 - 2 * SQ2, abs=1e-15) and k == (3, -2)
    val, _ = min_divisor_order_r([1.0], 5, norm="linf")
    assert val == 1.0


def test_min_divisor_examples_length():
    # with |k| = sum |k_j| the resonance 2*w1 - w2 has length 3
    val, _ = min_divisor_order_r([1, 2], 2)
    assert val == 1.0
    assert min_divisor_order_r([1, 2], 3)[0] == 0.0
    val, k = min_divisor_order_r([1, SQ2], 3)
    assert val == pytest.approx(SQ2 - 1, abs=1e-15) and k == (1, -1)
    assert min_divisor_order_r([1.0], 5)[0] == 1.0


def test_min_divisor_matches_brute_force():
    w = [1.0, SQ2, math.sqrt(3)]
    for r in range(1, 5):
        assert min_divisor_order_r(w, r)[0] == pytest.approx(_brute_min(w, r)[0], abs=1e-15)
        box = min(abs(float(np.dot(k, w))) for k in itertools.product(range(-r, r + 1), repeat=3)
                  if any(k))
        assert min_divisor_order_r(w, r, norm="linf")[0] == pytest.approx(box, abs=1e-15)


def test_min_divisor_monotone_in_r():
    w = FrequencyModel.nlw(1.0).vector(4)
    vals = [min_divisor_order_r(w, r)[0] for r in range(1, 6)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_enumeration_guard():
    with pytest.raises(EnumerationGuardError):
        min_divisor_order_r(np.ones(12), 10)


def test_diophantine_examples():
    margin, _ = diophantine_check([1, SQ2], 0.1, 2, 10)
    assert margin > 0
    margin, k = diophantine_check([1, 1], 0.5, 1, 3)
    assert margin < 0 and k == (1, -1)
    margin, _ = diophantine_check([1.0], 1.0, 0.0, 4)
    assert margin == 0.0


# ----- strong nonresonance scan --------------------------------------------

def _a2_oracle(w, r, mu_max, tail_max, alphas):
    """Direct enumeration over net signed multisets of indices."""
    best_abs = math.inf
    best = {a: math.inf for a in alphas}
    for k in _lattice(tail_max, r + 2):
        entries = sorted((l + 1 for l, c in enumerate(k) for _ in range(abs(c))), reverse=True)
        mu = entries[2] if len(entries) >= 3 else 1
        if mu > mu_max:
            continue
        if sum(1 for e in entries if e <= mu) > r or sum(1 for e in entries if e > mu) > 2:
            continue
        d = abs(float(np.dot(k, w[:tail_max])))
        best_abs = min(best_abs, d)
        for a in alphas:
            best[a] = min(best[a], d * mu ** a)
    return best_abs, best


def _lattice(n, budget):
    def rec(prefix, left):
        if len(prefix) == n:
            if any(prefix):
                yield prefix
            return
        for v in range(-left, left + 1):
            yield from rec(prefix + (v,), left - abs(v))
    yield from rec((), budget)


@pytest.mark.parametrize("model", [FrequencyModel.nlw(1.0),
                                   FrequencyModel.random_convolution(2, 7, seed=3)])
def test_scan_matches_direct_enumeration(model):
    r, mu_max, tail_max = 2, 3, 7
    w = model.vector(tail_max)
    rep = scan_strong_nonresonance(model, r, mu_max, tail_max)
    best_abs, best = _a2_oracle(w, r, mu_max, tail_max, ALPHA_GRID)
    assert rep.worst["divisor"] == pytest.approx(best_abs, rel=1e-12, abs=1e-15)
    for a in ALPHA_GRID:
        assert rep.gamma_by_alpha[a] == pytest.approx(best[a], rel=1e-12, abs=1e-15)


def test_scan_flags_pure_squares():
    rep = scan_strong_nonresonance(FrequencyModel.convolution(2, [0.0] * 10), 2, 4, 10)
    assert rep.resonant and rep.witness["divisor"] == 0.0


def test_scan_nlw_positive():
    rep = scan_strong_nonresonance(FrequencyModel.nlw(1.0), 2, 8, 64)
    assert not rep.resonant
    assert rep.worst["divisor"] > 0 and rep.gamma > 0
    # the reported pair maximizes gamma over the grid
    assert rep.gamma == max(rep.gamma_by_alpha.values())
    assert rep.gamma_by_alpha[rep.alpha] == rep.gamma
    assert len(rep.rows) > 0 and len(rep.rows[0]) == 5


def test_scan_single_mode():
    rep = scan_strong_nonresonance(FrequencyModel.explicit([1.7]), 3, 4, 4)
    assert rep.gamma == pytest.approx(1.7)
    assert all(g == pytest.approx(1.7) for g in rep.gamma_by_alpha.values())


def test_scan_scaling():
    base = FrequencyModel.explicit([1.0, SQ2, math.sqrt(3), math.sqrt(5)])
    a = scan_strong_nonresonance(base, 3, 3, 4)
    b = scan_strong_nonresonance(base.scaled(2.5), 3, 3, 4)
    assert b.gamma == pytest.approx(2.5 * a.gamma, rel=1e-12)
    assert b.worst["k"] == a.worst["k"]
    assert b.worst["divisor"] == pytest.approx(2.5 * a.worst["divisor"], rel=1e-12)


# ----- Monte-Carlo measure ---------------------------------------------------

def test_measure_increasing_and_reproducible():
    kw = dict(m=2, r=2, gamma=[0.02, 0.05, 0.1], beta=4, N_list=[4], samples=4000, seed=11)
    a = monte_carlo_resonance_measure(**kw)
    b = monte_carlo_resonance_measure(**kw)
    assert a.overall == b.overall
    vals = [a.overall[g] for g in kw["gamma"]]
    assert vals[0] < vals[1] < vals[2]
    assert a.slope > 0


def test_measure_vanishes_as_gamma_shrinks():
    rep = monte_carlo_resonance_measure(2, 2, 1e-9, 4, [4], samples=2000, seed=0)
    assert rep.overall[1e-9] == 0.0


def test_measure_validation():
    with pytest.raises(ValueError):
        monte_carlo_resonance_measure(2, 2, 0.7, 4, [4])
    with pytest.raises(ValueError):
        monte_carlo_resonance_measure(2, 2, 0.1, 4, [4], samples=10)
    with pytest.raises(EnumerationGuardError):
        monte_carlo_resonance_measure(2, 6, 0.1, 4, [12], k_budget=1000)
