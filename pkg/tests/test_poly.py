import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_polynomial
from hamnf.poly import (CompiledPolynomial, MissingIndexError, Polynomial, action, canonicalize,
                        conjugate_monomial, eta, evaluate, from_real_terms, hamiltonian_vector_field,
                        harmonic, is_action_monomial, mu_s, p, poisson, q, tclass_norm, xi)

W = [1.0, math.sqrt(2)]


# ----- canonical monomials -------------------------------------------------

def test_canonicalize_sorts_descending():
    assert canonicalize((-2, 1, -2)) == (1, -2, -2)
    assert canonicalize(()) == ()
    assert canonicalize((3, -3)) == (3, -3)


def test_canonicalize_rejects_zero():
    with pytest.raises(ValueError):
        canonicalize((1, 0))


def test_action_monomials():
    assert is_action_monomial((3, -3))
    assert is_action_monomial((2, 1, -1, -2))
    assert not is_action_monomial((1, -2, -2))
    assert conjugate_monomial((1, -2, -2)) == (2, 2, -1)


# ----- bracket -------------------------------------------------------------

def test_bracket_action_with_xi():
    assert poisson(action(1), xi(1)).allclose(Polynomial({(1,): -1j}), 0)


def test_bracket_h0_with_exercise_monomial():
    Q = Polynomial({(1, -2, -2): 1})
    got = poisson(harmonic(W), Q)
    want = Polynomial({(1, -2, -2): -1j * (W[0] - 2 * W[1])})
    assert got.allclose(want, 1e-15)


def test_bracket_with_itself_vanishes(rng):
    F = random_polynomial(rng)
    assert not poisson(F, F).terms


def test_bracket_grading(rng):
    for d1 in range(1, 5):
        for d2 in range(1, 5):
            F = random_polynomial(rng, max_deg=d1, min_deg=d1, n_terms=5)
            G = random_polynomial(rng, max_deg=d2, min_deg=d2, n_terms=5)
            B = poisson(F, G)
            assert all(len(m) == d1 + d2 - 2 for m in B.terms)


def test_bracket_cutoff_discards_high_grades(rng):
    F = random_polynomial(rng, max_deg=4, min_deg=4)
    G = random_polynomial(rng, max_deg=4, min_deg=4)
    assert poisson(F, G).degree == 6
    assert not poisson(F, G, cutoff=5).terms


# corpus for the algebraic axioms: 200 random polynomials
def _corpus():
    rng = np.random.default_rng(7)
    return [random_polynomial(rng, n_modes=3, max_deg=4, n_terms=5) for _ in range(200)]


CORPUS = _corpus()


def test_antisymmetry_exact():
    for F, G in zip(CORPUS[::2], CORPUS[1::2]):
        assert (poisson(F, G) + poisson(G, F)).norm_inf() == 0.0


def test_jacobi():
    for a in range(0, 198, 3):
        F, G, H = CORPUS[a:a + 3]
        J = poisson(F, poisson(G, H)) + poisson(G, poisson(H, F)) + poisson(H, poisson(F, G))
        assert J.norm_inf() <= 1e-12


def test_leibniz():
    for a in range(0, 198, 3):
        F, G, H = CORPUS[a:a + 3]
        lhs = poisson(F * G, H)
        rhs = F * poisson(G, H) + poisson(F, H) * G
        scale = max(lhs.norm_inf(), 1.0)
        assert (lhs - rhs).norm_inf() <= 1e-12 * scale


def test_bilinearity():
    for a in range(0, 198, 3):
        F, G, H = CORPUS[a:a + 3]
        lhs = poisson(2.5 * F + (1 - 1j) * G, H)
        rhs = 2.5 * poisson(F, H) + (1 - 1j) * poisson(G, H)
        assert (lhs - rhs).norm_inf() <= 1e-12 * max(1.0, lhs.norm_inf())


def test_reality_closure(rng):
    for _ in range(50):
        F = random_polynomial(rng, real=True)
        G = random_polynomial(rng, real=True)
        assert F.is_real() and G.is_real()
        assert poisson(F, G).is_real()


def test_real_bracket_is_minus_complex_bracket():
    # {q, p} in the complex convention is -1; the (q, p) bracket gives +1
    assert poisson(q(1), p(1)).allclose(Polynomial.constant(-1.0), 1e-15)


def test_bracket_matches_finite_differences(rng):
    h = 1e-5
    for _ in range(20):
        F = random_polynomial(rng, n_modes=2, max_deg=4)
        G = random_polynomial(rng, n_modes=2, max_deg=4)
        z = {i: complex(*rng.uniform(-1, 1, 2)) for i in (1, 2, -1, -2)}

        def d(P, i):
            zp, zm = dict(z), dict(z)
            zp[i] += h
            zm[i] -= h
            return (evaluate(P, zp) - evaluate(P, zm)) / (2 * h)
        fd = 1j * sum(d(F, j) * d(G, -j) - d(F, -j) * d(G, j) for j in (1, 2))
        exact = evaluate(poisson(F, G), z)
        assert abs(fd - exact) <= 1e-6 * max(1.0, abs(exact))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_bracket_axioms_property(seed):
    rng = np.random.default_rng(seed)
    F, G, H = (random_polynomial(rng, n_modes=3, max_deg=4, n_terms=4) for _ in range(3))
    assert (poisson(F, G) + poisson(G, F)).norm_inf() == 0.0
    J = poisson(F, poisson(G, H)) + poisson(G, poisson(H, F)) + poisson(H, poisson(F, G))
    assert J.norm_inf() <= 1e-12


# ----- evaluation and vector field ----------------------------------------

def test_evaluate_examples():
    assert evaluate(Polynomial({(1, -2, -2): 1}), {1: 2, -2: 3}) == 18
    assert evaluate(Polynomial(), {}) == 0
    val = evaluate(harmonic(W), {1: 1, 2: 1, -1: 1, -2: 1})
    assert val == pytest.approx(1 + math.sqrt(2))


def test_evaluate_missing_index_is_named():
    with pytest.raises(MissingIndexError, match="eta_2"):
        evaluate(Polynomial({(1, -2): 1}), {1: 1.0})


def test_vector_field_harmonic():
    f = hamiltonian_vector_field(harmonic([1.0]), {1: 1, -1: 1})
    assert f[1] == -1j and f[-1] == 1j


def test_vector_field_constant_is_zero():
    f = hamiltonian_vector_field(Polynomial.constant(3.0), {1: 1, -1: 1})
    assert all(v == 0 for v in f.values())


def test_vector_field_quartic_action_product():
    H = action(1) * action(2)
    f = hamiltonian_vector_field(H, {1: 1, 2: 1, -1: 1, -2: 1})
    assert (f[1], f[2], f[-1], f[-2]) == (-1j, -1j, 1j, 1j)


def test_vector_field_is_bracket_with_coordinate(rng):
    # dz/dt = {H, z}
    H = random_polynomial(rng, n_modes=2, max_deg=4)
    z = {i: complex(*rng.uniform(-1, 1, 2)) for i in (1, 2, -1, -2)}
    f = hamiltonian_vector_field(H, z)
    for i in z:
        coord = Polynomial({(i,): 1})
        assert f[i] == pytest.approx(evaluate(poisson(H, coord), z), abs=1e-13)


def test_compiled_matches_dict_evaluation(rng):
    H = random_polynomial(rng, n_modes=3, max_deg=5, n_terms=20)
    z = {i: complex(*rng.uniform(-1, 1, 2)) for i in (1, 2, 3, -1, -2, -3)}
    cp = CompiledPolynomial(H, 3)
    v = np.array([z[1], z[2], z[3], z[-1], z[-2], z[-3]])
    assert cp(v) == pytest.approx(evaluate(H, z), abs=1e-13)
    f = hamiltonian_vector_field(H, z)
    assert np.allclose(cp.vector_field(v), [f[1], f[2], f[3], f[-1], f[-2], f[-3]], atol=1e-13)


# ----- mu, S and the coefficient class ------------------------------------

def test_mu_s_examples():
    assert mu_s((3, -2, 1)) == (1, 2)
    assert mu_s((5, 5, -5)) == (5, 5)
    assert mu_s((7, -7)) == (1, 1)


def test_tclass_norm_examples():
    P = Polynomial({(1, 2, 3): 1})
    assert tclass_norm(P, 1, 0) == 2.0
    assert tclass_norm(P, 0, 0) == 1.0
    assert tclass_norm(Polynomial({(1, -1): 2.5}), 3, 0.5) == 2.5
    assert tclass_norm(Polynomial(), 2) == 0.0


# ----- real coordinates and serialization --------------------------------

def test_real_slice_coordinates():
    x = 0.3 + 0.4j
    z = {1: x, -1: x.conjugate()}
    assert evaluate(q(1), z).imag == pytest.approx(0)
    qv, pv = evaluate(q(1), z).real, evaluate(p(1), z).real
    assert evaluate(action(1), z).real == pytest.approx((qv ** 2 + pv ** 2) / 2)


def test_from_real_terms_is_real():
    P = from_real_terms([(1.0, (1, 1, 2)), (0.5, (2, 2, 2, 1))])
    assert P.is_real()
    assert (q(1) * q(1) * q(2) + 0.5 * q(2) ** 3 * q(1)).allclose(P, 1e-15)


def test_text_round_trip(rng, tmp_path):
    P = random_polynomial(rng, n_modes=4, max_deg=5, n_terms=30).with_cutoff(7)
    text = P.to_text()
    assert text.splitlines()[0] == "degree_cutoff 7"
    back = Polynomial.from_text(text)
    assert back.terms == P.terms and back.max_degree == 7
    P.save(tmp_path / "p.poly")
    assert Polynomial.load(tmp_path / "p.poly").terms == P.terms


def test_cutoff_carried_through_arithmetic():
    a = xi(1, 3)
    b = eta(2, 3)
    assert (a * a * b * b).terms == {}
    assert (a * b).max_degree == 3
