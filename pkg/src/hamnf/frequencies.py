"""Frequency models and nonresonance diagnostics.

Three models are supported: an explicit finite list, the wave-equation
frequencies ``sqrt(j^2 + m)`` and the convolution-potential frequencies
``j^2 + v_j / (1 + j)^m`` with seeds ``v_j`` in ``[-1/2, 1/2]``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .poly import Monomial

ENUMERATION_GUARD = 10 ** 8
ALPHA_GRID = (0.5, 1.0, 2.0, 4.0, 8.0, 16.0)


class EnumerationGuardError(ValueError):
    """The requested exhaustive enumeration is too large to run."""


@dataclass(frozen=True)
class FrequencyModel:
    kind: str
    values: tuple = ()
    mass: float = 0.0
    m: float = 0.0

    @classmethod
    def explicit(cls, values: Sequence[float]) -> "FrequencyModel":
        vals = tuple(float(v) for v in values)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("frequencies must be finite")
        return cls("explicit", values=vals)

    @classmethod
    def nlw(cls, mass: float) -> "FrequencyModel":
        if not mass > 0:
            raise ValueError("NLW mass must be positive")
        return cls("nlw", mass=float(mass))

    @classmethod
    def convolution(cls, m: float, v: Sequence[float]) -> "FrequencyModel":
        if m < 1:
            raise ValueError("convolution smoothness m must be >= 1")
        seeds = tuple(float(x) for x in v)
        if any(abs(x) > 0.5 for x in seeds):
            raise ValueError("convolution seeds must lie in [-1/2, 1/2]")
        return cls("convolution", values=seeds, m=float(m))

    @classmethod
    def random_convolution(cls, m: float, n: int, seed: int) -> "FrequencyModel":
        rng = np.random.default_rng(seed)
        return cls.convolution(m, rng.uniform(-0.5, 0.5, size=n))

    @property
    def size(self) -> int | None:
        """Number of available modes, ``None`` when unbounded."""
        if self.kind == "nlw":
            return None
        return len(self.values)

    def eval(self, j: int) -> float:
        if j < 1:
            raise ValueError(f"mode index must be >= 1, got {j}")
        if self.kind == "nlw":
            return math.sqrt(j * j + self.mass)
        if j > len(self.values):
            raise IndexError(f"{self.kind} model defines {len(self.values)} modes, asked for {j}")
        if self.kind == "explicit":
            return self.values[j - 1]
        return j * j + self.values[j - 1] / (1.0 + j) ** self.m

    __call__ = eval

    def vector(self, n: int) -> np.ndarray:
        return np.array([self.eval(j) for j in range(1, n + 1)])

    def scaled(self, lam: float) -> "FrequencyModel":
        if self.kind != "explicit":
            raise ValueError("only explicit models can be rescaled")
        return FrequencyModel.explicit([lam * v for v in self.values])

    def to_dict(self) -> dict:
        if self.kind == "nlw":
            return {"kind": "nlw", "mass": self.mass}
        if self.kind == "explicit":
            return {"kind": "explicit", "values": list(self.values)}
        return {"kind": "convolution", "m": self.m, "v": list(self.values)}


def as_model(omega) -> FrequencyModel:
    if isinstance(omega, FrequencyModel):
        return omega
    return FrequencyModel.explicit(omega)


def small_divisor(omega, m: Monomial) -> float:
    """``sum sign(i) * omega_|i|`` over the factors of ``m``."""
    model = as_model(omega)
    return math.fsum((1 if i > 0 else -1) * model.eval(abs(i)) for i in m)


# ---------------------------------------------------------------------------
# finite-order checks

NORMS = ("l1", "linf")


def _lattice_ball(n: int, r: int, norm: str = "l1"):
    """All k in Z^n with ``0 < |k| <= r`` as a (count, n) int array.

    ``norm="l1"`` bounds the length ``sum |k_j|``; ``norm="linf"`` bounds
    ``max |k_j|`` (the box ``[-r, r]^n``).
    """
    if norm not in NORMS:
        raise ValueError(f"norm must be one of {NORMS}, got {norm!r}")
    if (2 * r + 1) ** n > ENUMERATION_GUARD:
        raise EnumerationGuardError(
            f"(2r+1)^n = {(2 * r + 1) ** n} exceeds {ENUMERATION_GUARD}; "
            "use scan_strong_nonresonance for long frequency vectors")
    if norm == "linf":
        grid = np.array(list(itertools.product(range(-r, r + 1), repeat=n)),
                        dtype=np.int64).reshape(-1, n)
        return grid[np.abs(grid).sum(axis=1) > 0]
    rows: list = []

    def rec(prefix, budget, pos):
        if pos == n:
            rows.append(prefix)
            return
        for v in range(-budget, budget + 1):
            rec(prefix + (v,), budget - abs(v), pos + 1)

    rec((), r, 0)
    arr = np.array(rows, dtype=np.int64).reshape(-1, n)
    return arr[np.abs(arr).sum(axis=1) > 0]


def _canonical_sign(k: np.ndarray) -> tuple:
    nz = np.flatnonzero(k)
    if len(nz) and k[nz[0]] < 0:
        k = -k
    return tuple(int(x) for x in k)


def _omega_array(omega) -> np.ndarray:
    if isinstance(omega, FrequencyModel):
        if omega.size is None:
            raise ValueError("finite checks need a finite model; pass model.vector(n)")
        return omega.vector(omega.size)
    return np.asarray(omega, dtype=float)


def min_divisor_order_r(omega, r: int, norm: str = "l1") -> tuple[float, tuple]:
    """Exhaustive ``min |k . omega|`` over ``0 < |k| <= r``.

    ``|k|`` is the length ``sum |k_j|`` unless ``norm="linf"``.  The
    returned witness has its first nonzero entry positive.
    """
    w = _omega_array(omega)
    if r < 1:
        raise ValueError("r must be >= 1")
    ks = _lattice_ball(len(w), r, norm)
    vals = np.abs(ks @ w)
    i = int(np.argmin(vals))
    return float(vals[i]), _canonical_sign(ks[i])


def diophantine_check(omega, gamma: float, alpha: float, k_max: int,
                      norm: str = "l1") -> tuple[float, tuple]:
    """Worst margin ``min |k.omega| |k|^alpha - gamma`` over ``0 < |k| <= k_max``."""
    w = _omega_array(omega)
    ks = _lattice_ball(len(w), k_max, norm)
    lengths = (np.abs(ks).sum(axis=1) if norm == "l1" else np.abs(ks).max(axis=1)).astype(float)
    margin = np.abs(ks @ w) * lengths ** alpha - gamma
    i = int(np.argmin(margin))
    return float(margin[i]), _canonical_sign(ks[i])


# ---------------------------------------------------------------------------
# strong nonresonance

@dataclass
class NonresonanceReport:
    r: int
    mu_max: int
    tail_max: int
    gamma: float
    alpha: float
    gamma_by_alpha: dict
    worst: dict
    resonant: bool = False
    witness: dict | None = None
    rows: list = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "r": self.r, "mu_max": self.mu_max, "tail_max": self.tail_max,
            "gamma": self.gamma, "alpha": self.alpha,
            "gamma_by_alpha": {str(a): g for a, g in self.gamma_by_alpha.items()},
            "worst": self.worst, "resonant": self.resonant, "witness": self.witness,
        }


def _heads(N: int, r: int) -> np.ndarray:
    """k in Z^N with |k|_1 <= r (zero included)."""
    rows: list = []

    def rec(prefix, budget, pos):
        if pos == N:
            rows.append(prefix)
            return
        for v in range(-budget, budget + 1):
            rec(prefix + (v,), budget - abs(v), pos + 1)

    rec((), r, 0)
    return np.array(rows, dtype=np.int64).reshape(-1, N)


def _tails(lo: int, hi: int, w: np.ndarray):
    """Tail combinations on indices in (lo, hi] with at most two units.

    Returns values and an encoding list of ((l, c), ...) pairs; the empty
    tail comes first.
    """
    vals = [0.0]
    enc: list = [()]
    idx = range(lo + 1, hi + 1)
    for l in idx:
        for c in (1, -1, 2, -2):
            vals.append(c * w[l - 1])
            enc.append(((l, c),))
    for l1, l2 in itertools.combinations(idx, 2):
        for c1 in (1, -1):
            for c2 in (1, -1):
                vals.append(c1 * w[l1 - 1] + c2 * w[l2 - 1])
                enc.append(((l1, c1), (l2, c2)))
    return np.array(vals), enc


def _encode(head: np.ndarray, tail: tuple) -> str:
    parts = [f"{int(c):+d}*w{j + 1}" for j, c in enumerate(head) if c]
    parts += [f"{c:+d}*w{l}" for l, c in tail]
    return " ".join(parts) if parts else "0"


def scan_strong_nonresonance(model, r: int, mu_max: int, tail_max: int,
                             alphas: Sequence[float] = ALPHA_GRID,
                             keep: int = 20) -> NonresonanceReport:
    """Enumerate divisors ``sum_{m<=N} k_m w_m + k_l1 w_l1 + k_l2 w_l2``.

    Heads run over ``N <= mu_max`` and ``|k|_1 <= r``; tails over indices in
    ``(N, tail_max]`` with ``|k_l1| + |k_l2| <= 2``.  For each alpha on the
    grid the largest admissible gamma is ``min |divisor| N^alpha``; the
    reported pair is the one with the largest gamma.
    """
    model = as_model(model)
    if r < 1:
        raise ValueError("r must be >= 1")
    limit = tail_max if model.size is None else min(tail_max, model.size)
    mu_top = min(mu_max, limit)
    if mu_top < 1:
        raise ValueError("model defines no modes")
    w = model.vector(limit)
    zero_tol = 1e-12 * max(1.0, float(np.max(np.abs(w))))
    alphas = tuple(float(a) for a in alphas)
    best = {a: math.inf for a in alphas}
    worst_abs = (math.inf, None)
    witness = None
    rows: list = []
    for N in range(1, mu_top + 1):
        heads = _heads(N, r)
        hv = heads @ w[:N]
        tv, tenc = _tails(N, limit, w)
        div = np.abs(hv[:, None] + tv[None, :])
        div[np.all(heads == 0, axis=1), 0] = np.inf  # the excluded empty divisor
        flat = int(np.argmin(div))
        hi, ti = divmod(flat, div.shape[1])
        dmin = float(div[hi, ti])
        if dmin <= zero_tol and witness is None:
            witness = {"N": N, "k": _encode(heads[hi], tenc[ti]), "divisor": dmin}
        for a in alphas:
            best[a] = min(best[a], dmin * N ** a)
        if dmin < worst_abs[0]:
            worst_abs = (dmin, {"N": N, "k": _encode(heads[hi], tenc[ti]),
                                "divisor": dmin})
        # smallest divisors at this N for the CSV report
        order = np.argsort(div, axis=None)[:keep]
        for f in order:
            h, t = divmod(int(f), div.shape[1])
            rows.append((N, _encode(heads[h], tenc[t]), float(div[h, t])))
    gamma_by_alpha = {a: best[a] for a in alphas}
    alpha_star = max(alphas, key=lambda a: (gamma_by_alpha[a], -a))
    report = NonresonanceReport(
        r=r, mu_max=mu_top, tail_max=limit,
        gamma=gamma_by_alpha[alpha_star], alpha=alpha_star,
        gamma_by_alpha=gamma_by_alpha, worst=worst_abs[1] or {},
        resonant=witness is not None, witness=witness)
    report.rows = [(N, enc, d, N, d * N ** alpha_star) for N, enc, d in rows]
    return report


# ---------------------------------------------------------------------------
# Monte-Carlo measure of the resonant set

@dataclass
class MeasureReport:
    m: float
    r: int
    beta: float
    samples: int
    seed: int
    gammas: list
    N_list: list
    failing: dict            # (gamma, N) -> fraction
    overall: dict            # gamma -> fraction failing for some N
    slope: float
    slope_se: float
    z_scores: dict           # gamma -> (overall - slope*gamma)/se

    def rows(self):
        for g in self.gammas:
            for N in self.N_list:
                f = self.failing[(g, N)]
                yield g, N, f, _binomial_se(f, self.samples)


def _binomial_se(f: float, n: int) -> float:
    p = min(max(f, 0.5 / n), 1.0 - 0.5 / n)
    return math.sqrt(p * (1.0 - p) / n)


def monte_carlo_resonance_measure(m: float, r: int, gamma, beta: float,
                                  N_list: Sequence[int], k_budget: int = 10 ** 6,
                                  samples: int = 10_000, seed: int = 0,
                                  chunk: int = 2048) -> MeasureReport:
    """Fraction of random seeds ``v`` violating ``|k . omega - b| >= gamma/N^beta``.

    For each N in ``N_list`` every ``k`` in Z^N with ``0 < |k| <= r`` is
    checked against the nearest integer ``b``, which is the minimizer over
    all admissible ``|b| <= 1 + (1 + N^2) r``.  ``gamma`` may be a scalar
    or a grid; each grid point gets an independent stream spawned from
    ``seed``.  A through-origin weighted fit of the overall failing
    fraction against gamma is returned with per-point z-scores.
    """
    gammas = [float(g) for g in np.atleast_1d(gamma)]
    if samples < 100:
        raise ValueError("samples must be >= 100")
    if any(not 0.0 < g < 0.5 for g in gammas):
        raise ValueError("gamma must lie in (0, 1/2)")
    if r < 1 or not N_list:
        raise ValueError("need r >= 1 and a nonempty N_list")
    N_list = sorted(int(N) for N in N_list)
    N_max = N_list[-1]
    ks = {N: _lattice_ball(N, r) for N in N_list}
    total_k = sum(len(k) for k in ks.values())
    if total_k > k_budget:
        raise EnumerationGuardError(f"{total_k} lattice vectors exceed k_budget={k_budget}")
    j = np.arange(1, N_max + 1, dtype=float)
    streams = np.random.SeedSequence(seed).spawn(len(gammas))
    failing: dict = {}
    overall: dict = {}
    for g, ss in zip(gammas, streams):
        rng = np.random.default_rng(ss)
        fail_counts = {N: 0 for N in N_list}
        any_count = 0
        done = 0
        while done < samples:
            b = min(chunk, samples - done)
            v = rng.uniform(-0.5, 0.5, size=(b, N_max))
            w = j ** 2 + v / (1.0 + j) ** m
            hit_any = np.zeros(b, dtype=bool)
            for N in N_list:
                vals = w[:, :N] @ ks[N].T.astype(float)
                dist = np.abs(vals - np.rint(vals))
                hit = (dist < g / N ** beta).any(axis=1)
                fail_counts[N] += int(hit.sum())
                hit_any |= hit
            any_count += int(hit_any.sum())
            done += b
        for N in N_list:
            failing[(g, N)] = fail_counts[N] / samples
        overall[g] = any_count / samples
    ga = np.array(gammas)
    fa = np.array([overall[g] for g in gammas])
    se = np.array([_binomial_se(f, samples) for f in fa])
    wts = 1.0 / se ** 2
    slope = float(np.sum(wts * fa * ga) / np.sum(wts * ga ** 2))
    slope_se = float(1.0 / math.sqrt(np.sum(wts * ga ** 2)))
    z = {g: float((overall[g] - slope * g) / s) for g, s in zip(gammas, se)}
    return MeasureReport(m=m, r=r, beta=beta, samples=samples, seed=seed,
                         gammas=gammas, N_list=N_list, failing=failing,
                         overall=overall, slope=slope, slope_se=slope_se,
                         z_scores=z)
