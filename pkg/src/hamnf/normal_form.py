"""Homological equation, Lie transforms and the Birkhoff iteration.

With the bracket of ``poly.poisson`` one has ``{H0, m} = -i Omega(m) m`` for
a monomial ``m``, so the generator coefficient that removes ``a m`` from
``Q`` is ``b = a / (i Omega)``.  Every solve re-checks the defining identity
``{H0, chi} + Q = Z`` coefficient-wise.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .frequencies import FrequencyModel, as_model, small_divisor
from .poly import (CompiledPolynomial, Polynomial, harmonic, is_action_monomial,
                   poisson)

DEFAULT_DIVISOR_FLOOR = 1e-10
IDENTITY_RTOL = 1e-12


class Strategy(str, Enum):
    NONRESONANT_KILL = "NonresonantKill"
    ACTION_KERNEL = "ActionKernel"


def as_strategy(s) -> Strategy:
    if isinstance(s, Strategy):
        return s
    for member in Strategy:
        if s in (member.value, member.name):
            return member
    raise ValueError(f"unknown strategy {s!r}; choose NonresonantKill or ActionKernel")


class NearResonanceError(ArithmeticError):
    """A non-action monomial has a divisor below the floor."""

    def __init__(self, offenders):
        self.offenders = list(offenders)
        listing = ", ".join(f"{list(m)} (Omega={w:.3g})" for m, w in self.offenders[:10])
        more = "" if len(self.offenders) <= 10 else f" and {len(self.offenders) - 10} more"
        super().__init__(f"near-resonant non-action monomial: {listing}{more}")


@dataclass(frozen=True)
class DivisorRecord:
    monomial: tuple
    omega_sum: float
    killed: bool
    resonant: bool


def _h0_for(omega: FrequencyModel, n: int, cutoff: int) -> Polynomial:
    return harmonic(omega.vector(n), cutoff) if n else Polynomial({}, cutoff)


def solve_homological(Q: Polynomial, omega, strategy=Strategy.NONRESONANT_KILL,
                      divisor_floor: float = DEFAULT_DIVISOR_FLOOR):
    """Split ``Q`` into a removable part and a normal part.

    Returns
    -------
    chi, Z : Polynomial
        Generator and normal part with ``{H0, chi} + Q = Z``.
    records : list of DivisorRecord
        One entry per monomial of ``Q``.
    """
    if not Q.is_homogeneous():
        raise ValueError(f"Q must be homogeneous, has degrees {Q.degrees()}")
    model = as_model(omega)
    strategy = as_strategy(strategy)
    chi_terms: dict = {}
    z_terms: dict = {}
    records = []
    offenders = []
    for m, a in sorted(Q.terms.items()):
        w = small_divisor(model, m)
        resonant = abs(w) < divisor_floor
        if strategy is Strategy.ACTION_KERNEL:
            keep = is_action_monomial(m)
            if not keep and resonant:
                offenders.append((m, w))
                continue
        else:
            keep = resonant
        if keep:
            z_terms[m] = a
        else:
            chi_terms[m] = a / (1j * w)
        records.append(DivisorRecord(m, w, not keep, resonant))
    if offenders:
        raise NearResonanceError(offenders)
    chi = Polynomial._raw(chi_terms, Q.max_degree)
    Z = Polynomial._raw(z_terms, Q.max_degree)
    H0 = _h0_for(model, max(Q.n_modes, 1), Q.max_degree)
    defect = (poisson(H0, chi) + Q - Z).norm_inf()
    if defect > IDENTITY_RTOL * max(Q.norm_inf(), 1e-300):
        raise ArithmeticError(f"homological identity violated by {defect:.3g}")
    return chi, Z, records


def lie_transform_poly(P: Polynomial, chi: Polynomial, cutoff: int) -> Polynomial:
    """Lie series ``sum_k ad^k P / k!`` with ``ad P = {P, chi}``, up to grade ``cutoff``."""
    if not chi.terms:
        return P.truncate(cutoff)
    if chi.min_degree <= 2:
        raise ValueError("generator must have all grades >= 3 so each bracket raises the degree")
    total = P.truncate(cutoff)
    term = total
    k = 0
    while term.terms:
        k += 1
        term = poisson(term, chi, cutoff) / k
        total = total + term
    return total


@dataclass
class NormalFormResult:
    Z: Polynomial
    generators: dict
    order: int
    strategy: Strategy
    omega: FrequencyModel
    n_modes: int
    divisor_floor: float = DEFAULT_DIVISOR_FLOOR
    records: dict = field(default_factory=dict)
    divisor_stats: dict = field(default_factory=dict)

    def generator_list(self) -> list:
        return [self.generators[k] for k in sorted(self.generators)]

    def summary(self) -> dict:
        return {
            "order": self.order,
            "strategy": self.strategy.value,
            "n_modes": self.n_modes,
            "divisor_floor": self.divisor_floor,
            "omega": self.omega.to_dict(),
            "divisor_stats": self.divisor_stats,
            "Z_terms_per_degree": {str(d): len(self.Z.homogeneous_part(d))
                                   for d in self.Z.degrees()},
            "generator_terms": {str(k): len(c) for k, c in sorted(self.generators.items())},
            "Z_action_only": self.Z.is_action_only(),
        }

    def save(self, directory) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        self.Z.save(d / "Z.poly")
        for k, chi in self.generators.items():
            chi.save(d / f"chi{k}.poly")
        (d / "summary.json").write_text(json.dumps(self.summary(), indent=2))
        return d

    @classmethod
    def load(cls, directory) -> "NormalFormResult":
        d = Path(directory)
        meta = json.loads((d / "summary.json").read_text())
        om = meta["omega"]
        if om["kind"] == "explicit":
            model = FrequencyModel.explicit(om["values"])
        elif om["kind"] == "nlw":
            model = FrequencyModel.nlw(om["mass"])
        else:
            model = FrequencyModel.convolution(om["m"], om["v"])
        gens = {int(k): Polynomial.load(d / f"chi{k}.poly") for k in meta["generator_terms"]}
        return cls(Z=Polynomial.load(d / "Z.poly"), generators=gens, order=meta["order"],
                   strategy=as_strategy(meta["strategy"]), omega=model,
                   n_modes=meta["n_modes"], divisor_floor=meta["divisor_floor"],
                   divisor_stats=meta["divisor_stats"])


def birkhoff_normal_form(omega, P: Polynomial, r: int, strategy=Strategy.NONRESONANT_KILL,
                         divisor_floor: float = DEFAULT_DIVISOR_FLOOR,
                         n_modes: int | None = None) -> NormalFormResult:
    """Normalize ``H0 + P`` up to grade ``r``.

    At step ``k`` the grade-``k`` part of the current Hamiltonian is split by
    ``solve_homological`` and the whole Hamiltonian is transported by the
    Lie series of ``chi_k``.
    """
    if r < 3:
        raise ValueError(f"order r must be >= 3, got {r}")
    low = [d for d in P.degrees() if d < 3]
    if low:
        raise ValueError(f"perturbation has grades {low}; it must vanish to order 3")
    model = as_model(omega)
    strategy = as_strategy(strategy)
    n = max(P.n_modes, n_modes or 0, 1)
    if model.size is not None and model.size < n:
        raise ValueError(f"frequency model has {model.size} modes, perturbation uses {n}")
    H0 = _h0_for(model, n, r)
    H = H0 + P.with_cutoff(r)
    Z = Polynomial({}, r)
    generators: dict = {}
    records: dict = {}
    stats: dict = {"min_killed_divisor": math.inf, "per_degree": {}}
    for k in range(3, r + 1):
        Q = H.homogeneous_part(k)
        chi, Zk, recs = solve_homological(Q, model, strategy, divisor_floor)
        generators[k] = chi
        records[k] = recs
        killed = [abs(rc.omega_sum) for rc in recs if rc.killed]
        if killed:
            stats["min_killed_divisor"] = min(stats["min_killed_divisor"], min(killed))
        stats["per_degree"][str(k)] = {
            "terms": len(recs), "killed": len(killed),
            "kept": len(recs) - len(killed),
            "resonant": sum(rc.resonant for rc in recs),
            "min_killed_divisor": min(killed) if killed else None,
        }
        if chi.terms:
            H = lie_transform_poly(H, chi, r)
        Z = Z + Zk
    if not math.isfinite(stats["min_killed_divisor"]):
        stats["min_killed_divisor"] = None
    return NormalFormResult(Z=Z, generators=generators, order=r, strategy=strategy,
                            omega=model, n_modes=n, divisor_floor=divisor_floor,
                            records=records, divisor_stats=stats)


@dataclass
class ResidualReport:
    radii: list
    max_residual: list
    slope: float
    r2: float
    order: int

    def as_dict(self) -> dict:
        return {"radii": list(self.radii), "max_residual": list(self.max_residual),
                "slope": self.slope, "r2": self.r2, "order": self.order}


def verify_normal_form(result: NormalFormResult, omega, P: Polynomial,
                       sample_radii: Sequence[float], samples_per_radius: int = 10,
                       seed: int = 0) -> ResidualReport:
    """Measure ``max |H(tau z) - H0(z) - Z(z)|`` on spheres of the given radii.

    The same random real-slice directions are used at every radius.
    """
    from .dynamics import loglog_fit, normalizing_map, random_real_slice_point

    model = as_model(omega)
    n = max(result.n_modes, P.n_modes)
    H0 = harmonic(model.vector(n))
    full = CompiledPolynomial(H0 + P, n)
    normal = CompiledPolynomial(H0 + result.Z, n)
    rng = np.random.default_rng(seed)
    dirs = []
    for _ in range(samples_per_radius):
        v = random_real_slice_point(n, 1.0, rng)
        dirs.append(v)
    gens = result.generator_list()
    maxima = []
    for rho in sample_radii:
        worst = 0.0
        for v in dirs:
            z = rho * v
            w = normalizing_map(gens, z, n=n)
            worst = max(worst, abs(full(w) - normal(z)))
        maxima.append(worst)
    positive = [(r_, m) for r_, m in zip(sample_radii, maxima) if m > 0]
    if len(positive) >= 2:
        slope, r2 = loglog_fit([a for a, _ in positive], [b for _, b in positive])
    else:
        slope, r2 = math.nan, math.nan
    return ResidualReport(list(map(float, sample_radii)), maxima, slope, r2, result.order)
