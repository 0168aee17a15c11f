import itertools
import math
import warnings

import numpy as np
import pytest

from hamnf.galerkin import (Basis, ParityWarning, build_model, build_perturbation, eigenbasis,
                            orthonormality_defect, selection_rule_holds, tame_probe,
                            trapezoid_product, trig_product_integral, trig_product_multiple,
                            verify_phi_bound, well_localized_check)
from hamnf.poly import tclass_norm


def test_trig_examples():
    assert trig_product_integral([("exp", 3), ("exp", -1), ("exp", -2)]) == 2 * math.pi
    assert trig_product_integral([("sin", 1), ("sin", 2), ("sin", 3)]) == 0.0
    assert trig_product_multiple([("sin", 1), ("sin", 2), ("sin", 3), ("sin", 4)]) == (0.25, 0)
    assert trig_product_integral([("sin", 1)] * 4) == pytest.approx(3 * math.pi / 4)


def test_trig_exponential_selection_rule():
    rng = np.random.default_rng(2)
    for _ in range(200):
        js = [int(x) for x in rng.integers(-6, 7, size=int(rng.integers(1, 6)))]
        want = 2 * math.pi if sum(js) == 0 else 0.0
        assert trig_product_integral([("exp", j) for j in js]) == want


def test_trig_against_trapezoid():
    rng = np.random.default_rng(3)
    for _ in range(100):
        k = int(rng.integers(1, 7))
        fac = [(str(rng.choice(["sin", "cos", "exp"])), int(rng.integers(-20, 21)))
               for _ in range(k)]
        assert abs(trig_product_integral(fac) - trapezoid_product(fac)) <= 1e-10


def test_selection_rule_on_zero_sum_indices():
    rng = np.random.default_rng(4)
    for k in (3, 4, 5):
        for _ in range(500):
            js = list(rng.choice([-1, 1], size=k - 1) * rng.integers(1, 51, size=k - 1))
            last = -sum(js)
            if last == 0:
                continue
            assert selection_rule_holds(js + [last])


def test_sturm_liouville_free_spectrum():
    b = eigenbasis(None, 2048, 3)
    assert np.allclose(b.eigenvalues, [1, 4, 9], rtol=1e-5)
    assert orthonormality_defect(b) <= 1e-8
    x = b.grid
    assert np.allclose(b.vectors[:, 1], np.sin(2 * x), atol=1e-5)


def test_sturm_liouville_constant_shift():
    a = eigenbasis(0.0, 1024, 4)
    b = eigenbasis(1.0, 1024, 4)
    assert np.allclose(b.eigenvalues, a.eigenvalues + 1, rtol=1e-12, atol=0)


def test_sturm_liouville_refinement_cos_potential():
    a = eigenbasis(np.cos, 2048, 2)
    b = eigenbasis(np.cos, 4096, 2)
    assert abs(a.eigenvalues[0] - b.eigenvalues[0]) <= 1e-6


def test_sturm_liouville_parity_warning_and_guard():
    with pytest.warns(ParityWarning):
        eigenbasis(np.sin, 256, 3)
    with pytest.raises(ValueError):
        eigenbasis(None, 16, 3)


def test_build_perturbation_constant_g3_vanishes():
    with pytest.warns(ParityWarning):
        P = build_perturbation(Basis.sine(2), {3: 1.0}, 3)
    assert not P.terms


def test_build_perturbation_sin_g3():
    P = build_perturbation(Basis.sine(2), {3: [("sin", 1, 1.0)]}, 3)
    # coefficient of q1^3 is pi/8; q1^3 = 2^{-3/2}(xi1+eta1)^3
    assert P.coeff((1, 1, 1)) == pytest.approx(math.pi / 8 / 2 ** 1.5, abs=1e-14)
    assert P.is_real()


def test_build_perturbation_zero():
    assert not build_perturbation(Basis.sine(3), {3: 0.0, 4: []}, 4).terms


def test_build_perturbation_paths_agree():
    # callable (quadrature) and trig terms (exact) give the same polynomial
    exact = build_perturbation(Basis.sine(4), {4: [("cos", 0, 1.0), ("cos", 2, 0.5)]}, 4)
    quad = build_perturbation(Basis.sine(4), {4: lambda x: 1 + 0.5 * np.cos(2 * x)}, 4)
    assert exact.allclose(quad, 1e-10)


def test_build_perturbation_multinomial_count():
    # g4 = 1: coefficient of q1^2 q2^2 is (1/4!)(4!/(2!2!)) int sin^2 x sin^2 2x
    P = build_perturbation(Basis.sine(2), {4: 1.0}, 4)
    integral = trig_product_integral([("sin", 1), ("sin", 1), ("sin", 2), ("sin", 2)])
    c = integral / 4  # 1/(2!2!)
    # xi1 eta1 xi2 eta2 collects 2*2 = 4 choices, each 2^{-2}
    assert P.coeff((2, 1, -1, -2)) == pytest.approx(c * 4 / 4, abs=1e-14)


def test_build_perturbation_sturm_liouville_matches_sine():
    sl = eigenbasis(None, 2048, 3)
    a = build_perturbation(sl, {4: 1.0}, 4)
    b = build_perturbation(Basis.sine(3), {4: 1.0}, 4)
    assert (a - b).norm_inf() <= 1e-5


def test_nlw_weights():
    m = build_model(Basis.sine(2), "nlw", {3: [("sin", 1, 1.0)]}, 3, mass=1.0)
    w = np.sqrt(np.array([2.0, 5.0]))
    assert np.allclose(m.omega.values, w)
    assert m.P.coeff((1, 1, 1)) == pytest.approx(math.pi / 8 / 2 ** 1.5 * w[0] ** -1.5,
                                                 abs=1e-14)


def test_exponential_basis_not_built():
    with pytest.raises(ValueError):
        build_perturbation(Basis.exponential(3), {3: 1.0}, 3)


def test_phi_bound_exponential():
    c12 = verify_phi_bound(Basis.exponential(1), 3, 2, 0, 12)
    c24 = verify_phi_bound(Basis.exponential(1), 3, 2, 0, 24)
    assert 0 < c12 <= 8 * math.pi
    assert c24 / c12 <= 1.5


def test_phi_bound_sine_finite():
    c1 = verify_phi_bound(Basis.sine(1), 4, 2, 0, 10)
    c2 = verify_phi_bound(Basis.sine(1), 4, 2, 0, 20)
    assert 0 < c1 and c2 / c1 <= 1.5


def test_phi_bound_zero_case():
    # three sines on (-pi, pi) always integrate to zero
    assert verify_phi_bound(Basis.sine(1), 3, 2, 0, 8) == 0.0


def test_tclass_norm_stable_for_built_perturbation():
    vals = [tclass_norm(build_perturbation(Basis.sine(n), {4: 1.0}, 4), 2, 0) for n in (6, 12)]
    assert vals[1] / vals[0] <= 1.5


def test_well_localized_free():
    b = eigenbasis(None, 1024, 4)
    c = well_localized_check(b, [0, 1, 2, 4])
    for v in c.values():
        assert v == pytest.approx(0.5, abs=1e-3)


def test_well_localized_cos_potential():
    b = eigenbasis(np.cos, 1024, 4)
    c = well_localized_check(b, [0, 1, 2, 3, 4, 5, 6])
    assert c[0] <= 1.0
    assert all(math.isfinite(v) for v in c.values())


def test_tame_probe_scale_invariant_in_rho():
    rep = tame_probe(lambda n: build_perturbation(Basis.sine(n), {4: 1.0}, 4), [6],
                     [0.1, 1.0, 10.0], samples=10)
    vals = list(rep.table.values())
    assert max(vals) / min(vals) == pytest.approx(1.0, abs=1e-12)
    assert rep.exponent == 2
