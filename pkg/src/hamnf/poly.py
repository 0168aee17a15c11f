"""Sparse polynomials in the conjugate coordinates (xi, eta).

A monomial is stored as a tuple of nonzero signed mode indices sorted in
descending order: ``j > 0`` stands for a factor ``xi_j`` and ``-j`` for a
factor ``eta_j``.  The empty tuple is the constant monomial.

Bracket convention
------------------
``poisson`` implements

    {F, G} = i * sum_j (dF/dxi_j dG/deta_j - dF/deta_j dG/dxi_j)

and the Hamiltonian vector field follows the complex Hamilton equations
``dxi_j/dt = -i dH/deta_j``, ``deta_j/dt = +i dH/dxi_j``.  The two are tied
by ``dz/dt = {H, z} = -{z, H}`` for every coordinate function ``z``.
"""

from __future__ import annotations

import math
from collections import defaultdict
from typing import Iterable, Mapping

import numpy as np

PRUNE_TOL = 1e-15
NO_CUTOFF = 1_000_000

Monomial = tuple


class MissingIndexError(KeyError):
    """Raised when a point does not supply a coordinate used by a polynomial."""


def canonicalize(indices: Iterable[int]) -> Monomial:
    """Return the canonical monomial for a multiset of signed indices.

    >>> canonicalize((-2, 1, -2))
    (1, -2, -2)
    """
    out = tuple(sorted((int(i) for i in indices), reverse=True))
    if out and (0 in out):
        raise ValueError("signed index 0 is not a valid coordinate")
    return out


def conjugate_monomial(m: Monomial) -> Monomial:
    """Swap every xi factor with the matching eta factor."""
    return tuple(sorted((-i for i in m), reverse=True))


def is_action_monomial(m: Monomial) -> bool:
    """True when the xi and eta index multisets coincide."""
    return m == conjugate_monomial(m)


def monomial_modes(m: Monomial) -> set:
    return {abs(i) for i in m}


def mu_s(m: Monomial) -> tuple[int, int]:
    """Third largest absolute index and ``largest - second + third``.

    Degrees 0, 1 and 2 return ``(1, 1)``.
    """
    if len(m) <= 2:
        return 1, 1
    a = sorted(abs(i) for i in m)
    mu = a[-3]
    return mu, a[-1] - a[-2] + mu


def _counts(m: Monomial) -> dict:
    c: dict = {}
    for i in m:
        c[i] = c.get(i, 0) + 1
    return c


def _remove_one(m: Monomial, idx: int) -> Monomial:
    k = m.index(idx)
    return m[:k] + m[k + 1:]


class Polynomial:
    """Degree-graded sparse polynomial with complex coefficients.

    Parameters
    ----------
    terms : mapping, optional
        Monomial (any ordering of signed indices) to coefficient.
    max_degree : int, optional
        Grading cutoff.  Terms of higher degree are dropped on construction
        and never produced by arithmetic.
    """

    __slots__ = ("terms", "max_degree")

    def __init__(self, terms: Mapping | None = None, max_degree: int = NO_CUTOFF):
        self.max_degree = int(max_degree)
        clean: dict = {}
        if terms:
            for m, c in terms.items():
                key = canonicalize(m)
                if len(key) > self.max_degree:
                    continue
                clean[key] = clean.get(key, 0.0) + complex(c)
        self.terms = {m: c for m, c in clean.items() if abs(c) > PRUNE_TOL}

    @classmethod
    def _raw(cls, terms: dict, max_degree: int) -> "Polynomial":
        # terms already canonical and within the cutoff
        p = cls.__new__(cls)
        p.max_degree = max_degree
        p.terms = {m: c for m, c in terms.items() if abs(c) > PRUNE_TOL}
        return p

    # ----- constructors -------------------------------------------------
    @classmethod
    def constant(cls, c: complex, max_degree: int = NO_CUTOFF) -> "Polynomial":
        return cls({(): c}, max_degree)

    @classmethod
    def monomial(cls, indices: Iterable[int], coeff: complex = 1.0,
                 max_degree: int = NO_CUTOFF) -> "Polynomial":
        return cls({canonicalize(indices): coeff}, max_degree)

    # ----- basic queries ------------------------------------------------
    def __len__(self) -> int:
        return len(self.terms)

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __iter__(self):
        return iter(self.terms.items())

    def __repr__(self) -> str:
        if not self.terms:
            return "Polynomial(0)"
        parts = [f"({c:.6g})*{list(m)}" for m, c in sorted(self.terms.items())[:8]]
        more = "" if len(self.terms) <= 8 else f" + ... ({len(self.terms)} terms)"
        return "Polynomial(" + " + ".join(parts) + more + ")"

    def coeff(self, indices: Iterable[int]) -> complex:
        return self.terms.get(canonicalize(indices), 0.0j)

    def degrees(self) -> list[int]:
        return sorted({len(m) for m in self.terms})

    @property
    def degree(self) -> int:
        return max((len(m) for m in self.terms), default=0)

    @property
    def min_degree(self) -> int:
        return min((len(m) for m in self.terms), default=0)

    def modes(self) -> list[int]:
        s: set = set()
        for m in self.terms:
            s.update(abs(i) for i in m)
        return sorted(s)

    @property
    def n_modes(self) -> int:
        return max(self.modes(), default=0)

    def is_homogeneous(self) -> bool:
        return len(self.degrees()) <= 1

    def homogeneous_part(self, d: int) -> "Polynomial":
        return Polynomial._raw({m: c for m, c in self.terms.items() if len(m) == d},
                               self.max_degree)

    def truncate(self, cutoff: int) -> "Polynomial":
        cutoff = min(cutoff, self.max_degree)
        return Polynomial._raw({m: c for m, c in self.terms.items() if len(m) <= cutoff},
                               cutoff)

    def with_cutoff(self, cutoff: int) -> "Polynomial":
        return Polynomial._raw({m: c for m, c in self.terms.items() if len(m) <= cutoff},
                               int(cutoff))

    def norm_inf(self) -> float:
        return max((abs(c) for c in self.terms.values()), default=0.0)

    def conj(self) -> "Polynomial":
        """Polynomial whose value on the real slice is the complex conjugate."""
        return Polynomial._raw({conjugate_monomial(m): c.conjugate()
                                for m, c in self.terms.items()}, self.max_degree)

    def reality_defect(self) -> float:
        """Largest ``|coeff(conj m) - conj(coeff(m))|`` over stored monomials."""
        worst = 0.0
        for m, c in self.terms.items():
            other = self.terms.get(conjugate_monomial(m), 0.0)
            worst = max(worst, abs(other - c.conjugate()))
        return worst

    def is_real(self, tol: float = 1e-12) -> bool:
        return self.reality_defect() <= tol * max(1.0, self.norm_inf())

    def is_action_only(self) -> bool:
        return all(is_action_monomial(m) for m in self.terms)

    def allclose(self, other: "Polynomial", atol: float = 1e-12) -> bool:
        return (self - other).norm_inf() <= atol

    # ----- arithmetic ---------------------------------------------------
    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            return other
        if isinstance(other, (int, float, complex, np.number)):
            return Polynomial.constant(complex(other), self.max_degree)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        cut = min(self.max_degree, other.max_degree)
        out = {m: c for m, c in self.terms.items() if len(m) <= cut}
        for m, c in other.terms.items():
            if len(m) <= cut:
                out[m] = out.get(m, 0.0) + c
        return Polynomial._raw(out, cut)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial._raw({m: -c for m, c in self.terms.items()}, self.max_degree)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, a: complex) -> "Polynomial":
        return Polynomial._raw({m: a * c for m, c in self.terms.items()}, self.max_degree)

    def multiply(self, other: "Polynomial", cutoff: int | None = None) -> "Polynomial":
        cut = min(self.max_degree, other.max_degree)
        if cutoff is not None:
            cut = min(cut, cutoff)
        out: dict = defaultdict(complex)
        for m1, c1 in self.terms.items():
            d1 = len(m1)
            for m2, c2 in other.terms.items():
                if d1 + len(m2) > cut:
                    continue
                key = tuple(sorted(m1 + m2, reverse=True))
                out[key] += c1 * c2
        return Polynomial._raw(dict(out), cut)

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            return self.multiply(other)
        if isinstance(other, (int, float, complex, np.number)):
            return self.scale(complex(other))
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            return self.scale(1.0 / complex(other))
        return NotImplemented

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative powers are not polynomials")
        out = Polynomial.constant(1.0, self.max_degree)
        for _ in range(k):
            out = out.multiply(self)
        return out

    def derivative(self, index: int) -> "Polynomial":
        """Partial derivative with respect to the coordinate ``index``."""
        out: dict = defaultdict(complex)
        for m, c in self.terms.items():
            n = m.count(index)
            if n:
                out[_remove_one(m, index)] += n * c
        return Polynomial._raw(dict(out), self.max_degree)

    # ----- evaluation ---------------------------------------------------
    def __call__(self, z: Mapping[int, complex]) -> complex:
        return evaluate(self, z)

    # ----- serialization ------------------------------------------------
    def to_text(self) -> str:
        lines = [f"degree_cutoff {self.max_degree}"]
        for m in sorted(self.terms, key=lambda k: (len(k), k)):
            c = self.terms[m]
            idx = " ".join(str(i) for i in m)
            lines.append(f"{float(c.real)!r} {float(c.imag)!r} : {idx}".rstrip())
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Polynomial":
        lines = [ln.strip() for ln in text.splitlines()]
        lines = [ln for ln in lines if ln and not ln.startswith("#")]
        if not lines or not lines[0].startswith("degree_cutoff"):
            raise ValueError("missing 'degree_cutoff D' header")
        cutoff = int(lines[0].split()[1])
        terms: dict = {}
        for lineno, ln in enumerate(lines[1:], start=2):
            head, sep, tail = ln.partition(":")
            if not sep:
                raise ValueError(f"line {lineno}: expected 're im : indices'")
            re_s, im_s = head.split()
            key = canonicalize(int(t) for t in tail.split())
            terms[key] = terms.get(key, 0.0) + complex(float(re_s), float(im_s))
        return cls(terms, cutoff)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, path) -> "Polynomial":
        with open(path) as fh:
            return cls.from_text(fh.read())


# ----- coordinate builders ------------------------------------------------

def xi(j: int, max_degree: int = NO_CUTOFF) -> Polynomial:
    return Polynomial.monomial((j,), 1.0, max_degree)


def eta(j: int, max_degree: int = NO_CUTOFF) -> Polynomial:
    return Polynomial.monomial((-j,), 1.0, max_degree)


def action(j: int, max_degree: int = NO_CUTOFF) -> Polynomial:
    """I_j = xi_j eta_j = (p_j^2 + q_j^2)/2."""
    return Polynomial.monomial((j, -j), 1.0, max_degree)


def q(j: int, max_degree: int = NO_CUTOFF) -> Polynomial:
    """Real position coordinate ``q_j = (xi_j + eta_j)/sqrt(2)``."""
    s = 1.0 / math.sqrt(2.0)
    return Polynomial({(j,): s, (-j,): s}, max_degree)


def p(j: int, max_degree: int = NO_CUTOFF) -> Polynomial:
    """Real momentum coordinate ``p_j = (xi_j - eta_j)/(i sqrt(2))``."""
    s = 1.0 / (1j * math.sqrt(2.0))
    return Polynomial({(j,): s, (-j,): -s}, max_degree)


def harmonic(omega: Iterable[float], max_degree: int = NO_CUTOFF) -> Polynomial:
    """H0 = sum_j omega_j xi_j eta_j for modes j = 1..len(omega)."""
    return Polynomial({(j, -j): w for j, w in enumerate(omega, start=1)}, max_degree)


# ----- bracket --------------------------------------------------------------

def poisson(F: Polynomial, G: Polynomial, cutoff: int | None = None) -> Polynomial:
    """Poisson bracket ``{F, G}`` with grades above ``cutoff`` discarded."""
    cut = min(F.max_degree, G.max_degree)
    if cutoff is not None:
        cut = min(cut, cutoff)
    if not F.terms or not G.terms:
        return Polynomial._raw({}, cut)
    g_items = [(m, c, _counts(m)) for m, c in G.terms.items()]
    out: dict = defaultdict(complex)
    for m1, c1 in F.terms.items():
        d1 = len(m1)
        if d1 == 0:
            continue
        cnt1 = _counts(m1)
        for m2, c2, cnt2 in g_items:
            if d1 + len(m2) - 2 > cut or not m2:
                continue
            for idx, a in cnt1.items():
                b = cnt2.get(-idx)
                if not b:
                    continue
                # idx > 0: xi in F, eta in G (+i); idx < 0: eta in F, xi in G (-i)
                w = (1j if idx > 0 else -1j) * a * b * c1 * c2
                key = tuple(sorted(_remove_one(m1, idx) + _remove_one(m2, -idx),
                                   reverse=True))
                out[key] += w
    return Polynomial._raw(dict(out), cut)


# ----- evaluation -----------------------------------------------------------

def evaluate(P: Polynomial, z: Mapping[int, complex]) -> complex:
    """Sum of monomial products at the point ``z`` (signed index -> value)."""
    total = 0.0j
    for m, c in P.terms.items():
        v = c
        for i in m:
            try:
                v *= z[i]
            except KeyError:
                raise MissingIndexError(
                    f"point does not supply coordinate {i} "
                    f"({'xi' if i > 0 else 'eta'}_{abs(i)})") from None
        total += v
    return total


def hamiltonian_vector_field(H: Polynomial, z: Mapping[int, complex]) -> dict:
    """Right-hand side of the complex Hamilton equations at ``z``.

    Returns a map over the indices of ``z``: ``dz_j/dt = -i dH/dz_{-j}`` for
    ``j > 0`` and ``dz_{-j}/dt = +i dH/dz_j``.
    """
    out = {}
    for idx in z:
        d = evaluate(H.derivative(-idx), z)
        out[idx] = (-1j if idx > 0 else 1j) * d
    return out


def tclass_norm(P: Polynomial, N: int, nu: float = 0.0) -> float:
    """Best constant C in ``|a_m| <= C mu(m)^(N+nu) / S(m)^N``."""
    if N < 0:
        raise ValueError("N must be nonnegative")
    best = 0.0
    for m, c in P.terms.items():
        mu, s = mu_s(m)
        best = max(best, abs(c) * s ** N / mu ** (N + nu))
    return best


def from_real_terms(terms: Iterable, max_degree: int = NO_CUTOFF) -> Polynomial:
    """Polynomial in real positions: ``[(coeff, (j1, ..., jk)), ...]`` means
    ``sum coeff * q_j1 ... q_jk``, rewritten in (xi, eta)."""
    out = Polynomial({}, max_degree)
    for coeff, idx in terms:
        mono = Polynomial.constant(complex(coeff), max_degree)
        for j in idx:
            mono = mono.multiply(q(int(j), max_degree))
        out = out + mono
    return out


# ----- compiled form for fast numerics ------------------------------------

class CompiledPolynomial:
    """Flat-array view of a polynomial over ``n`` modes.

    Variables are laid out as ``[xi_1..xi_n, eta_1..eta_n]``; ``var`` holds
    the position of every factor and ``offsets`` the term boundaries.
    """

    def __init__(self, P: Polynomial, n: int | None = None):
        n = P.n_modes if n is None else int(n)
        if P.n_modes > n:
            raise ValueError(f"polynomial uses mode {P.n_modes} > n = {n}")
        self.n = n
        items = sorted(P.terms.items(), key=lambda kv: (len(kv[0]), kv[0]))
        self.coeffs = np.array([c for _, c in items], dtype=np.complex128)
        offs = [0]
        var: list = []
        for m, _ in items:
            var.extend(i - 1 if i > 0 else n + (-i) - 1 for i in m)
            offs.append(len(var))
        self.var = np.array(var, dtype=np.int64)
        self.offsets = np.array(offs, dtype=np.int64)

    def __call__(self, z: np.ndarray) -> complex:
        from ._kernels import poly_eval
        return poly_eval(self.coeffs, self.var, self.offsets, np.asarray(z, np.complex128))

    def gradient(self, z: np.ndarray) -> np.ndarray:
        from ._kernels import poly_grad
        return poly_grad(self.coeffs, self.var, self.offsets,
                         np.asarray(z, np.complex128))

    def vector_field(self, z: np.ndarray) -> np.ndarray:
        from ._kernels import vector_field
        return vector_field(self.coeffs, self.var, self.offsets,
                            np.asarray(z, np.complex128), self.n)


def point_to_vector(z: Mapping[int, complex], n: int) -> np.ndarray:
    v = np.zeros(2 * n, dtype=np.complex128)
    for j in range(1, n + 1):
        v[j - 1] = z[j]
        v[n + j - 1] = z[-j]
    return v


def vector_to_point(v: np.ndarray) -> dict:
    n = len(v) // 2
    out = {}
    for j in range(1, n + 1):
        out[j] = complex(v[j - 1])
        out[-j] = complex(v[n + j - 1])
    return out
