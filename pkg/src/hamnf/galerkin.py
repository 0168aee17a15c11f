"""Galerkin truncations of 1-d NLW/NLS Hamiltonians.

All integrals run over ``(-pi, pi)``.  Dirichlet eigenfunctions on
``(0, pi)`` are extended oddly, so the Sine basis and a Sturm-Liouville
basis share one convention.  Bases are unnormalized: ``sin jx`` and
Sturm-Liouville eigenfunctions scaled to the same ``L^2`` size
(``int_0^pi phi^2 = pi/2``, positive slope at 0).
"""

from __future__ import annotations

import itertools
import json
import math
import warnings
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .frequencies import FrequencyModel
from .poly import CompiledPolynomial, Polynomial, canonicalize, mu_s

TRIG_KINDS = ("sin", "cos", "exp")
QUAD_POINTS = 4096
MISMATCH_TOL = 1e-8


class ParityWarning(UserWarning):
    """An input breaks the symmetry the construction relies on."""


# ---------------------------------------------------------------------------
# exact trigonometric integrals

def trig_product_multiple(factors: Sequence) -> tuple[Fraction, Fraction]:
    """``int_{-pi}^{pi} prod f(j x) dx / pi`` as an exact (real, imag) pair.

    ``factors`` holds ``(kind, j)`` with kind in ``sin``, ``cos``, ``exp``.
    Every factor is written as exponentials; only the zero-frequency channel
    survives integration.
    """
    channels: dict = {0: 1}
    halves = 0
    n_sin = 0
    for kind, j in factors:
        j = int(j)
        if kind == "exp":
            channels = {f + j: w for f, w in channels.items()}
            continue
        if kind not in ("sin", "cos"):
            raise ValueError(f"unknown trig kind {kind!r}")
        # sin = (e^{ijx} - e^{-ijx}) / 2i, cos = (e^{ijx} + e^{-ijx}) / 2
        minus = -1 if kind == "sin" else 1
        nxt: dict = defaultdict(int)
        for f, w in channels.items():
            nxt[f + j] += w
            nxt[f - j] += minus * w
        channels = {f: w for f, w in nxt.items() if w}
        halves += 1
        n_sin += kind == "sin"
    value = Fraction(2 * channels.get(0, 0), 2 ** halves)
    # (1/i)^n_sin = (-i)^n_sin
    phase = [(1, 0), (0, -1), (-1, 0), (0, 1)][n_sin % 4]
    return value * phase[0], value * phase[1]


def trig_product_integral(factors: Sequence):
    """Exact value of ``int_{-pi}^{pi} prod f(j x) dx``; float, or complex
    when the product is complex-valued."""
    re, im = trig_product_multiple(factors)
    if im == 0:
        return float(re) * math.pi
    return complex(float(re) * math.pi, float(im) * math.pi)


def _trig_eval(kind: str, j: float, x: np.ndarray) -> np.ndarray:
    if kind == "sin":
        return np.sin(j * x)
    if kind == "cos":
        return np.cos(j * x)
    if kind == "exp":
        return np.exp(1j * j * x)
    raise ValueError(f"unknown trig kind {kind!r}")


def trapezoid_product(factors: Sequence, points: int = QUAD_POINTS):
    """Periodic trapezoid rule for the same integral."""
    x = -math.pi + 2 * math.pi * np.arange(points) / points
    vals = np.ones(points, dtype=complex)
    for kind, j in factors:
        vals = vals * _trig_eval(kind, j, x)
    s = vals.sum() * (2 * math.pi / points)
    if all(kind != "exp" for kind, _ in factors):
        return float(s.real)
    return complex(s)


def selection_rule_holds(indices: Sequence[int]) -> bool:
    """``S(j) <= (k-1) mu(j)`` for a multi-index of length ``k >= 3``."""
    mu, s = mu_s(tuple(indices))
    return s <= (len(indices) - 1) * mu


# ---------------------------------------------------------------------------
# bases

@dataclass
class Basis:
    kind: str
    n: int
    eigenvalues: np.ndarray | None = None
    grid: np.ndarray | None = None
    vectors: np.ndarray | None = None
    potential: np.ndarray | None = None
    symmetric_potential: bool = True

    @classmethod
    def sine(cls, n: int) -> "Basis":
        return cls("sine", n, eigenvalues=np.arange(1, n + 1, dtype=float) ** 2)

    @classmethod
    def exponential(cls, n: int) -> "Basis":
        return cls("exponential", n)

    @property
    def h(self) -> float:
        return math.pi / (len(self.grid) + 1)

    def values(self, x: np.ndarray) -> np.ndarray:
        """Basis functions (rows ``j = 1..n``) at points of ``(-pi, pi)``."""
        x = np.asarray(x, dtype=float)
        if self.kind == "sine":
            return np.sin(np.outer(np.arange(1, self.n + 1), x))
        if self.kind == "exponential":
            raise ValueError("exponential basis is indexed by Z-bar; use trig_product_integral")
        # odd extension of the grid eigenfunctions, linear interpolation
        full_x = np.concatenate([[0.0], self.grid, [math.pi]])
        sign = np.sign(x)
        ax = np.abs(x)
        out = np.empty((self.n, len(x)))
        for j in range(self.n):
            full = np.concatenate([[0.0], self.vectors[:, j], [0.0]])
            out[j] = sign * np.interp(ax, full_x, full)
        return out

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "n": self.n}
        if self.kind == "sturm_liouville":
            d["G"] = len(self.grid)
            d["eigenvalues"] = [float(v) for v in self.eigenvalues]
            d["symmetric_potential"] = self.symmetric_potential
        return d


def _potential_on(V, x: np.ndarray) -> np.ndarray:
    if V is None:
        return np.zeros_like(x)
    if callable(V):
        return np.broadcast_to(np.asarray(V(x), dtype=float), x.shape).copy()
    if isinstance(V, (int, float)):
        return np.full_like(x, float(V))
    if isinstance(V, (list, tuple)) and V and isinstance(V[0], (list, tuple)):
        return _trig_terms_callable(V)(x).real
    arr = np.asarray(V, dtype=float)
    if arr.shape != x.shape:
        raise ValueError(f"potential samples must match the {len(x)} interior grid points")
    return arr


def _is_even(V) -> bool:
    if V is None or isinstance(V, (int, float)):
        return True
    if isinstance(V, (list, tuple)) and V and isinstance(V[0], (list, tuple)):
        return all(t[0] == "cos" or t[2] == 0 for t in V)
    if callable(V):
        x = np.linspace(0.05, math.pi - 0.05, 97)
        a, b = np.asarray(V(x), float), np.asarray(V(-x), float)
        return bool(np.allclose(a, b, rtol=1e-10, atol=1e-12))
    return True  # grid samples on (0, pi) carry no parity information


def eigenbasis(V, G: int, n: int) -> Basis:
    """Dirichlet eigenpairs of ``-d^2/dx^2 + V`` on ``(0, pi)``.

    Second-order finite differences on ``G`` interior points.  ``V`` may be
    a callable, a constant, trig terms ``[(kind, freq, coeff)]`` or samples
    on the interior grid.
    """
    if n < 1:
        raise ValueError("need at least one mode")
    if G < 8 * n:
        raise ValueError(f"grid too coarse: need G >= 8n = {8 * n}, got {G}")
    h = math.pi / (G + 1)
    x = h * np.arange(1, G + 1)
    Vx = _potential_on(V, x)
    even = _is_even(V)
    if not even:
        warnings.warn("potential is not even; the symmetry assumptions behind the "
                      "Galerkin coefficients do not hold", ParityWarning, stacklevel=2)
    diag = 2.0 / h ** 2 + Vx
    off = np.full(G - 1, -1.0 / h ** 2)
    lam, vec = eigh_tridiagonal(diag, off, select="i", select_range=(0, n - 1))
    vec = vec * math.sqrt(math.pi / (2 * h))
    vec = vec * np.where(vec[0] < 0, -1.0, 1.0)
    return Basis("sturm_liouville", n, eigenvalues=lam, grid=x, vectors=vec,
                 potential=Vx, symmetric_potential=even)


def orthonormality_defect(basis: Basis) -> float:
    """``max |<phi_i, phi_j> - delta_ij|`` after scaling by ``sqrt(2/pi)``."""
    U = basis.vectors * math.sqrt(2 / math.pi)
    gram = basis.h * U.T @ U
    return float(np.max(np.abs(gram - np.eye(basis.n))))


# ---------------------------------------------------------------------------
# nonlinearity coefficients

def _trig_terms_callable(terms) -> Callable:
    terms = [(str(k), float(f), complex(c)) for k, f, c in terms]

    def g(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x, dtype=complex)
        for kind, f, c in terms:
            out = out + c * _trig_eval(kind, f, x)
        return out
    return g


@dataclass
class _GSpec:
    trig: list | None = None
    func: Callable | None = None
    samples: np.ndarray | None = None

    @classmethod
    def parse(cls, spec) -> "_GSpec":
        if spec is None:
            return cls(trig=[])
        if callable(spec):
            return cls(func=spec)
        if isinstance(spec, (int, float)):
            return cls(trig=[("cos", 0, float(spec))])
        if isinstance(spec, (list, tuple)) and (not spec or isinstance(spec[0], (list, tuple))):
            trig = []
            for term in spec:
                kind, f, c = term
                if kind not in ("sin", "cos"):
                    raise ValueError(f"nonlinearity terms must be sin or cos, got {kind!r}")
                if int(f) != f or f < 0:
                    raise ValueError(f"trig frequency must be a nonnegative integer, got {f}")
                trig.append((kind, int(f), float(c)))
            return cls(trig=trig)
        return cls(samples=np.asarray(spec, dtype=float))

    def at(self, x: np.ndarray) -> np.ndarray:
        """Values at points of ``(-pi, pi)``; samples are read as periodic."""
        if self.trig is not None:
            return _trig_terms_callable(self.trig)(x).real
        if self.func is not None:
            return np.broadcast_to(np.asarray(self.func(x), dtype=float), np.shape(x)).copy()
        M = len(self.samples)
        xs = -math.pi + 2 * math.pi * np.arange(M) / M
        return np.interp(x, xs, self.samples, period=2 * math.pi)

    def parity_ok(self, k: int) -> bool:
        want = (-1) ** k
        if self.trig is not None:
            return all((1 if kind == "cos" else -1) == want or c == 0
                       for kind, _, c in self.trig)
        x = np.linspace(0.05, math.pi - 0.05, 101)
        a, b = self.at(x), self.at(-x)
        return bool(np.allclose(b, want * a, rtol=1e-9, atol=1e-12 * max(1.0, np.abs(a).max())))


def _multisets(n: int, k: int):
    return itertools.combinations_with_replacement(range(1, n + 1), k)


def _quadrature_nodes(basis: Basis, points: int):
    """Nodes and weights for integrals over ``(-pi, pi)`` of basis products."""
    if basis.kind == "sine":
        x = -math.pi + 2 * math.pi * np.arange(points) / points
        return x, np.full(points, 2 * math.pi / points)
    x = np.concatenate([-basis.grid[::-1], basis.grid])
    return x, np.full(len(x), basis.h)


def _basis_rows(basis: Basis, x: np.ndarray) -> np.ndarray:
    if basis.kind == "sturm_liouville":
        half = basis.vectors.T
        return np.concatenate([-half[:, ::-1], half], axis=1)
    return basis.values(x)


def product_integrals(basis: Basis, g, k: int, index_sets: np.ndarray,
                      points: int = QUAD_POINTS, chunk: int = 1024) -> np.ndarray:
    """Quadrature values of ``int g prod_i phi_{j_i}`` for each row of ``index_sets``."""
    spec = g if isinstance(g, _GSpec) else _GSpec.parse(g)
    x, w = _quadrature_nodes(basis, points)
    rows = _basis_rows(basis, x)
    gw = spec.at(x) * w
    out = np.empty(len(index_sets))
    for a in range(0, len(index_sets), chunk):
        block = index_sets[a:a + chunk] - 1
        prod = np.broadcast_to(gw, (len(block), len(x))).copy()
        for c in range(k):
            prod *= rows[block[:, c]]
        out[a:a + chunk] = prod.sum(axis=1)
    return out


def _exact_integrals(spec: _GSpec, k: int, index_sets: np.ndarray) -> np.ndarray:
    out = np.zeros(len(index_sets))
    for t, js in enumerate(index_sets):
        base = [("sin", int(j)) for j in js]
        total = 0.0
        for kind, f, c in spec.trig:
            re, _ = trig_product_multiple(base + [(kind, f)])
            total += c * float(re) * math.pi
        out[t] = total
    return out


def build_perturbation(basis: Basis, g_taylor: dict, k_max: int, n: int | None = None,
                       weights: Sequence[float] | None = None,
                       points: int = QUAD_POINTS) -> Polynomial:
    """Polynomial ``sum_k (1/k!) int g_k(x) u(x)^k dx`` with ``u = sum_j w_j q_j phi_j``.

    Parameters
    ----------
    g_taylor : dict
        Degree ``k`` to ``g_k`` given as trig terms ``[(kind, freq, coeff)]``,
        a constant, a callable of ``x``, or periodic samples on ``(-pi, pi)``.
    weights : sequence, optional
        Per-mode factors ``w_j`` (``omega_j^(-1/2)`` for NLW).

    Notes
    -----
    When ``g_k`` is given as trig terms on the Sine basis both the exact
    integrals and quadrature are computed, and they must agree to 1e-8.
    """
    if basis.kind == "exponential":
        raise ValueError("build_perturbation supports the sine and Sturm-Liouville bases")
    n = basis.n if n is None else int(n)
    if n > basis.n:
        raise ValueError(f"basis has {basis.n} modes, asked for {n}")
    wts = np.ones(n) if weights is None else np.asarray(weights, dtype=float)[:n]
    terms: dict = defaultdict(complex)
    for k in range(3, k_max + 1):
        if k not in g_taylor:
            continue
        spec = _GSpec.parse(g_taylor[k])
        if spec.trig is not None and not any(c for _, _, c in spec.trig):
            continue
        if not spec.parity_ok(k):
            warnings.warn(f"g_{k} does not have parity (-1)^{k}; its odd part integrates "
                          "to zero against products of odd eigenfunctions",
                          ParityWarning, stacklevel=2)
        sets = np.array(list(_multisets(n, k)), dtype=np.int64)
        quad = product_integrals(basis, spec, k, sets, points)
        if spec.trig is not None and basis.kind == "sine":
            exact = _exact_integrals(spec, k, sets)
            gap = float(np.max(np.abs(exact - quad))) if len(sets) else 0.0
            if gap > MISMATCH_TOL:
                raise ArithmeticError(f"exact and quadrature integrals differ by {gap:.3g} "
                                      f"at degree {k}")
            vals = exact
        else:
            vals = quad
        scale = 2.0 ** (-k / 2)
        for js, v in zip(sets, vals):
            if abs(v) < 1e-14:
                continue
            c = v
            for j, mult in Counter(js.tolist()).items():
                c *= wts[j - 1] ** mult / math.factorial(mult)
            c *= scale
            # q_j = (xi_j + eta_j)/sqrt(2): sum over xi/eta choices per factor
            for signs in itertools.product((1, -1), repeat=k):
                terms[canonicalize(s * j for s, j in zip(signs, js.tolist()))] += c
    return Polynomial(dict(terms))


@dataclass
class GalerkinModel:
    basis: Basis
    equation: str
    omega: FrequencyModel
    P: Polynomial
    s: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def H0_frequencies(self) -> np.ndarray:
        return np.array(self.omega.values)

    def save(self, directory) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        self.P.save(d / "P.poly")
        manifest = {"basis": self.basis.to_dict(), "equation": self.equation,
                    "omega": self.omega.to_dict(), "s": self.s, "terms": len(self.P),
                    **self.meta}
        (d / "model.json").write_text(json.dumps(manifest, indent=2))
        return d


def build_model(basis: Basis, equation: str, g_taylor: dict, k_max: int, mass: float = 0.0,
                s: float = 0.0, points: int = QUAD_POINTS) -> GalerkinModel:
    """Frequencies and perturbation for NLW (``omega = sqrt(lambda)``) or NLS
    (``omega = lambda``).  For the Sine basis ``lambda_j = j^2 + mass``."""
    if equation not in ("nlw", "nls"):
        raise ValueError(f"equation must be 'nlw' or 'nls', got {equation!r}")
    if basis.kind == "sine":
        lam = np.arange(1, basis.n + 1, dtype=float) ** 2 + mass
    elif basis.kind == "sturm_liouville":
        lam = np.asarray(basis.eigenvalues, dtype=float) + mass
    else:
        raise ValueError("Galerkin models use the sine or Sturm-Liouville basis")
    if equation == "nlw":
        if np.any(lam <= 0):
            raise ValueError("NLW needs a positive operator")
        omega = np.sqrt(lam)
        weights = omega ** -0.5
    else:
        omega = lam
        weights = None
    P = build_perturbation(basis, g_taylor, k_max, weights=weights, points=points)
    return GalerkinModel(basis, equation, FrequencyModel.explicit(omega), P, s,
                         meta={"k_max": k_max, "mass": mass})


# ---------------------------------------------------------------------------
# structural checks

def verify_phi_bound(basis: Basis, k: int, N: float, nu: float, j_max: int,
                     tol: float = 1e-10) -> float:
    """Best ``C`` with ``|int phi_j1..phi_jk| <= C mu^(N+nu) / S^N`` for indices up to ``j_max``."""
    if k < 3:
        raise ValueError("k must be >= 3")
    best = 0.0
    if basis.kind == "exponential":
        pool = [j for j in range(-j_max, j_max + 1) if j]
        for js in itertools.combinations_with_replacement(pool, k):
            if sum(js):
                continue
            mu, s = mu_s(js)
            best = max(best, 2 * math.pi * s ** N / mu ** (N + nu))
        return best
    sets = np.array(list(_multisets(j_max, k)), dtype=np.int64)
    if basis.kind == "sine":
        vals = [float(trig_product_multiple([("sin", j) for j in js])[0]) * math.pi
                for js in sets]
    else:
        if j_max > basis.n:
            raise ValueError(f"basis has only {basis.n} modes")
        vals = product_integrals(basis, 1.0, k, sets)
    for js, v in zip(sets, vals):
        if abs(v) <= tol:
            continue
        mu, s = mu_s(tuple(js.tolist()))
        best = max(best, abs(v) * s ** N / mu ** (N + nu))
    return best


def fourier_coefficients(basis: Basis, l_max: int | None = None) -> np.ndarray:
    """``phi_j^l = (-i/pi) int_0^pi phi_j sin(lx) dx``, shape ``(n, l_max)``."""
    if basis.kind != "sturm_liouville":
        raise ValueError("needs a Sturm-Liouville basis")
    G = len(basis.grid)
    l_max = G // 4 if l_max is None else l_max
    S = np.sin(np.outer(np.arange(1, l_max + 1), basis.grid))
    return (-1j / math.pi) * basis.h * (basis.vectors.T @ S.T)


def well_localized_check(basis: Basis, n_orders: Sequence[int],
                         l_max: int | None = None) -> dict:
    """Constants ``c_n = max_{j,l} |phi_j^l| (1 + |l - j|)^n`` for each order."""
    coef = np.abs(fourier_coefficients(basis, l_max))
    j = np.arange(1, basis.n + 1)[:, None]
    l = np.arange(1, coef.shape[1] + 1)[None, :]
    dist = 1.0 + np.abs(l - j)
    return {int(order): float(np.max(coef * dist ** order)) for order in n_orders}


# ---------------------------------------------------------------------------
# tame estimate probe

def weighted_norm(z: np.ndarray, s: float) -> float:
    n = len(z) // 2
    w = np.arange(1, n + 1, dtype=float) ** (2 * s)
    return math.sqrt(float(np.sum(w * (np.abs(z[:n]) ** 2 + np.abs(z[n:]) ** 2))))


@dataclass
class TameReport:
    table: dict
    spread: float
    exponent: int
    s: float
    s0: float

    def rows(self):
        return [(rho, n, v) for (rho, n), v in sorted(self.table.items())]


def tame_probe(builder: Callable[[int], Polynomial], n_list: Sequence[int],
               rho_list: Sequence[float], s: float = 3.0, s0: float = 2.0,
               samples: int = 100, seed: int = 0) -> TameReport:
    """Sup over random ``z`` of ``|X_P(z)|_s / (|z|_s |z|_s0^(d-2))``.

    ``builder(n)`` returns a homogeneous polynomial of degree ``d`` over
    ``n`` modes.  Test points have ``|xi_j| = rho j^(-s)`` with phases drawn
    once from ``seed`` and reused for every ``rho`` and ``n``.
    """
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0, 2 * math.pi, size=(samples, max(n_list)))
    table: dict = {}
    exponent = None
    for n in n_list:
        P = builder(n)
        if not P.is_homogeneous() or not P.terms:
            raise ValueError("tame probe needs a nonzero homogeneous polynomial")
        d = P.degree
        if exponent is None:
            exponent = d - 2
        elif exponent != d - 2:
            raise ValueError("builder returned different degrees")
        cp = CompiledPolynomial(P, n)
        jj = np.arange(1, n + 1, dtype=float)
        for rho in rho_list:
            worst = 0.0
            for row in phases:
                xi_ = rho * jj ** (-s) * np.exp(1j * row[:n])
                z = np.concatenate([xi_, np.conj(xi_)])
                ratio = weighted_norm(cp.vector_field(z), s) / (
                    weighted_norm(z, s) * weighted_norm(z, s0) ** exponent)
                worst = max(worst, ratio)
            table[(float(rho), int(n))] = worst
    vals = list(table.values())
    return TameReport(table, max(vals) / min(vals), exponent, s, s0)
