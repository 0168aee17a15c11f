import numpy as np
import pytest

from hamnf.poly import Polynomial, canonicalize


def random_polynomial(rng, n_modes=3, max_deg=4, n_terms=6, min_deg=0, real=False):
    terms = {}
    for _ in range(n_terms):
        d = int(rng.integers(min_deg, max_deg + 1))
        idx = [int(rng.integers(1, n_modes + 1)) * int(rng.choice([-1, 1])) for _ in range(d)]
        c = complex(rng.uniform(-1, 1), rng.uniform(-1, 1))
        key = canonicalize(idx)
        terms[key] = terms.get(key, 0) + c
        if real:
            conj = canonicalize([-i for i in idx])
            terms[conj] = terms.get(conj, 0) + c.conjugate()
    P = Polynomial(terms)
    if real:
        # diagonal (self-conjugate) monomials need real coefficients
        P = Polynomial({m: (c.real if canonicalize([-i for i in m]) == m else c)
                        for m, c in P.terms.items()})
    return P


def random_homogeneous_real(rng, n_modes, degree, n_terms=8):
    P = random_polynomial(rng, n_modes, degree, n_terms, min_deg=degree, real=True)
    return P


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
