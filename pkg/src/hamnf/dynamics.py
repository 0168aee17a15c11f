"""Numerical integration of polynomial Hamiltonians and the Lie-transform flow.

States are complex vectors ``[xi_1..xi_n, eta_1..eta_n]``.  On the real
slice ``eta = conj(xi)``, the Euclidean norm of this vector equals the
norm of ``(q, p)`` and ``I_j = |xi_j|^2 = (p_j^2 + q_j^2)/2``.

The time-one map consistent with ``normal_form.lie_transform_poly`` (that is
``P o Phi = sum_k ad_chi^k P / k!`` with ``ad_chi P = {P, chi}``) is the flow
of ``X_chi`` run backwards: ``Phi = flow_of_generator(chi, ., -1)``.  This
follows from ``d/dt (G o phi_t) = -{G, chi} o phi_t`` for the flow of
``X_chi``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .poly import CompiledPolynomial, Polynomial


class IntegrationError(RuntimeError):
    """The fixed-point solve or the state itself broke down."""


class FlowEscapedError(RuntimeError):
    """The generator flow left the ball where it is trusted."""


METHODS = {"implicit_midpoint": 0, "rk4": 1}


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    energy: np.ndarray
    n: int
    method: str
    dt: float
    max_norm: float = 0.0
    max_action_drift: np.ndarray = field(default_factory=lambda: np.zeros(0))
    max_weighted_drift: float = 0.0
    max_energy_drift: float = 0.0
    max_slice_defect: float = 0.0
    max_iterations: int = 0

    @property
    def actions(self) -> np.ndarray:
        n = self.n
        return (self.states[:, :n] * self.states[:, n:]).real

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)

    def qp(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.n
        xi_, eta_ = self.states[:, :n], self.states[:, n:]
        q = ((xi_ + eta_) / math.sqrt(2.0)).real
        p = ((xi_ - eta_) / (1j * math.sqrt(2.0))).real
        return q, p

    def write_csv(self, path) -> None:
        q, p = self.qp()
        I = self.actions
        n = self.n
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"q{j}" for j in range(1, n + 1)]
                       + [f"p{j}" for j in range(1, n + 1)]
                       + [f"I{j}" for j in range(1, n + 1)] + ["H"])
            for k, t in enumerate(self.times):
                w.writerow([repr(float(t))] + [repr(float(x)) for x in q[k]]
                           + [repr(float(x)) for x in p[k]]
                           + [repr(float(x)) for x in I[k]]
                           + [repr(float(self.energy[k]))])


def real_slice_point(xi_values: Sequence[complex]) -> np.ndarray:
    x = np.asarray(xi_values, dtype=np.complex128)
    return np.concatenate([x, np.conj(x)])


def random_real_slice_point(n: int, norm: float, rng: np.random.Generator) -> np.ndarray:
    """Equal action in every mode, random phases, Euclidean norm ``norm``."""
    phases = rng.uniform(0.0, 2.0 * math.pi, size=n)
    amp = norm / math.sqrt(2.0 * n)
    return real_slice_point(amp * np.exp(1j * phases))


def default_dt(omega_max: float) -> float:
    return min(0.01, 2.0 * math.pi / (50.0 * omega_max))


def integrate(H: Polynomial, z0, dt: float, T: float, method: str = "implicit_midpoint",
              n: int | None = None, save_every: int = 1, tol: float = 1e-13,
              maxit: int = 50, s_weight: float = 0.0, project: bool = True) -> Trajectory:
    """Integrate ``dz/dt = X_H(z)`` from a real-slice point up to time ``T``.

    Running maxima (norm, action drift, slice defect) are tracked at every
    step; states and energy are stored every ``save_every`` steps.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {sorted(METHODS)}")
    z0 = np.asarray(z0, dtype=np.complex128)
    n = len(z0) // 2 if n is None else n
    if len(z0) != 2 * n:
        raise ValueError("state length must be 2n")
    defect = float(np.max(np.abs(z0[n:] - np.conj(z0[:n])))) if n else 0.0
    if project and defect > 1e-9 * max(1.0, float(np.max(np.abs(z0)))):
        raise ValueError(f"initial point is off the real slice (defect {defect:.3g})")
    cp = CompiledPolynomial(H, n)
    nsteps = int(round(T / dt))
    weights = np.arange(1, n + 1, dtype=float) ** (2.0 * s_weight)
    status, states, energy, drift, stats = _kernels.run_trajectory(
        cp.coeffs, cp.var, cp.offsets, z0, n, float(dt), nsteps, max(1, int(save_every)),
        METHODS[method], float(tol), int(maxit), weights, bool(project))
    if status == _kernels.NO_CONVERGENCE:
        raise IntegrationError(
            f"implicit midpoint did not converge in {maxit} iterations at step "
            f"{int(stats[5])} (t = {stats[5] * dt:.6g}, residual {stats[6]:.3g}); "
            f"reduce dt (currently {dt})")
    if status == _kernels.NOT_FINITE:
        raise IntegrationError(f"state became non-finite at step {int(stats[5])}")
    stride = max(1, int(save_every))
    ticks = np.arange(0, nsteps + 1, stride)
    if ticks[-1] != nsteps:
        ticks = np.append(ticks, nsteps)
    times = ticks[:len(states)] * dt
    return Trajectory(times=times, states=states, energy=energy, n=n, method=method,
                      dt=dt, max_norm=float(stats[0]), max_action_drift=drift,
                      max_weighted_drift=float(stats[1]), max_energy_drift=float(stats[2]),
                      max_slice_defect=float(stats[3]), max_iterations=int(stats[4]))


# ---------------------------------------------------------------------------
# Lie-transform flow

def flow_of_generator(chi: Polynomial, z, direction: int = 1, n: int | None = None,
                      tol: float = 1e-13, max_doublings: int = 16,
                      growth_guard: float = 10.0) -> np.ndarray:
    """Time-``direction`` flow of ``dz/dt = X_chi(z)``.

    RK4 substeps are doubled until two successive answers agree to ``tol``
    relative to ``|z|``.
    """
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    z = np.asarray(z, dtype=np.complex128)
    if not chi.terms:
        return z.copy()
    n = len(z) // 2 if n is None else n
    cp = _compiled(chi, n)
    scale = max(float(np.linalg.norm(z)), 1e-300)
    steps = 2
    prev = _kernels.rk4_flow(cp.coeffs, cp.var, cp.offsets, z, n, float(direction), steps)
    for _ in range(max_doublings):
        steps *= 2
        cur = _kernels.rk4_flow(cp.coeffs, cp.var, cp.offsets, z, n, float(direction), steps)
        if not np.all(np.isfinite(cur)) or np.linalg.norm(cur) > growth_guard * scale:
            raise FlowEscapedError(
                f"flow of generator grew |z| from {scale:.3g} to "
                f"{np.linalg.norm(cur):.3g}; start closer to the origin")
        if np.linalg.norm(cur - prev) <= tol * scale:
            return cur
        prev = cur
    raise FlowEscapedError("generator flow did not converge under step doubling")


_COMPILED_CACHE: dict = {}


def _compiled(P: Polynomial, n: int) -> CompiledPolynomial:
    key = (id(P), n)
    hit = _COMPILED_CACHE.get(key)
    if hit is not None and hit[0] is P:
        return hit[1]
    cp = CompiledPolynomial(P, n)
    if len(_COMPILED_CACHE) > 256:
        _COMPILED_CACHE.clear()
    _COMPILED_CACHE[key] = (P, cp)
    return cp


def lie_map(chi: Polynomial, z, n: int | None = None, inverse: bool = False, **kw):
    """Map ``Phi`` with ``P o Phi`` equal to the Lie series of ``P`` under ``chi``."""
    return flow_of_generator(chi, z, 1 if inverse else -1, n=n, **kw)


def normalizing_map(generators: Sequence[Polynomial], z, n: int | None = None, **kw):
    """``tau(z) = Phi_3(Phi_4(... Phi_r(z)))`` for generators ordered 3..r."""
    out = np.asarray(z, dtype=np.complex128)
    for chi in reversed(list(generators)):
        out = lie_map(chi, out, n=n, **kw)
    return out


def inverse_normalizing_map(generators: Sequence[Polynomial], z, n: int | None = None, **kw):
    """``tau^{-1}(z) = Phi_r^{-1}(... Phi_3^{-1}(z))``."""
    out = np.asarray(z, dtype=np.complex128)
    for chi in generators:
        out = lie_map(chi, out, n=n, inverse=True, **kw)
    return out


def real_jacobian(f, z: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference Jacobian of a real-slice map in ``(q, p)`` coordinates."""
    n = len(z) // 2

    def to_qp(v):
        x, y = v[:n], v[n:]
        return np.concatenate([((x + y) / math.sqrt(2)).real,
                               ((x - y) / (1j * math.sqrt(2))).real])

    def from_qp(u):
        qq, pp = u[:n], u[n:]
        x = (qq + 1j * pp) / math.sqrt(2)
        return np.concatenate([x, np.conj(x)])

    u0 = to_qp(z)
    M = np.empty((2 * n, 2 * n))
    for k in range(2 * n):
        e = np.zeros(2 * n)
        e[k] = h
        M[:, k] = (to_qp(f(from_qp(u0 + e))) - to_qp(f(from_qp(u0 - e)))) / (2 * h)
    return M


def symplectic_defect(M: np.ndarray) -> float:
    n = M.shape[0] // 2
    J = np.block([[np.zeros((n, n)), np.eye(n)], [-np.eye(n), np.zeros((n, n))]])
    return float(np.max(np.abs(M.T @ J @ M - J)))


# ---------------------------------------------------------------------------
# stability experiments

@dataclass
class StabilityRow:
    eps: float
    horizon: float
    steps: int
    max_norm_ratio: float = math.nan
    max_drift: list = field(default_factory=list)
    max_weighted_drift: float = math.nan
    max_energy_drift: float = math.nan
    normalized_drift: float = math.nan
    horizon_usage: float = math.nan
    error: str | None = None


@dataclass
class StabilityReport:
    rows: list
    drift_slope: float
    drift_r2: float
    seed: int
    dt: float
    method: str
    r: int
    s_weight: float

    @property
    def ok(self) -> bool:
        return all(row.error is None for row in self.rows)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            n = max((len(r.max_drift) for r in self.rows), default=0)
            w.writerow(["eps", "horizon", "steps", "max_norm_ratio", "max_weighted_drift",
                        "max_energy_drift", "normalized_drift", "horizon_usage"]
                       + [f"drift{j}" for j in range(1, n + 1)] + ["error"])
            for r in self.rows:
                w.writerow([repr(r.eps), repr(r.horizon), r.steps, repr(r.max_norm_ratio),
                            repr(r.max_weighted_drift), repr(r.max_energy_drift),
                            repr(r.normalized_drift), repr(r.horizon_usage)]
                           + [repr(float(d)) for d in r.max_drift]
                           + ([repr(math.nan)] * (n - len(r.max_drift)))
                           + [r.error or ""])

    def summary(self) -> dict:
        return {"drift_slope": self.drift_slope, "drift_r2": self.drift_r2,
                "seed": self.seed, "dt": self.dt, "method": self.method, "r": self.r,
                "s_weight": self.s_weight,
                "max_norm_ratio": max((r.max_norm_ratio for r in self.rows
                                       if r.error is None), default=math.nan)}


def loglog_fit(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope of log y against log x, with R^2."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), r2


def stability_experiment(H: Polynomial, nf, r: int, eps_list: Sequence[float],
                         s_weight: float = 0.0, seed: int = 0, dt: float | None = None,
                         T_cap: float = 1e6, method: str = "implicit_midpoint",
                         n: int | None = None, horizon_power: float | None = None,
                         check_points: int = 5) -> StabilityReport:
    """Sweep initial norms and measure how far the actions wander.

    Every run starts from the same random direction (equal action per mode,
    phases from ``seed``) scaled to norm ``eps`` and is integrated up to
    ``min(eps^-(r-2), T_cap)``.  If ``nf`` is given, the normalized actions
    ``I o tau^{-1}`` are also compared between the start and a few saved
    states.  Failing runs are recorded, not raised.
    """
    n = H.n_modes if n is None else n
    H0_omegas = [H.coeff((j, -j)).real for j in range(1, n + 1)]
    dt = default_dt(max(H0_omegas)) if dt is None else dt
    power = (r - 2) if horizon_power is None else horizon_power
    rng = np.random.default_rng(seed)
    direction = random_real_slice_point(n, 1.0, rng)
    weights = np.arange(1, n + 1, dtype=float) ** (2.0 * s_weight)
    rows: list = []
    for eps in sorted(eps_list, reverse=True):
        target = eps ** (-power)
        T = min(target, T_cap)
        steps = int(round(T / dt))
        row = StabilityRow(eps=float(eps), horizon=float(T), steps=steps,
                           horizon_usage=float(T / target))
        z0 = direction * eps
        save_every = max(1, steps // max(1, check_points))
        try:
            traj = integrate(H, z0, dt, T, method=method, n=n, save_every=save_every,
                             s_weight=s_weight)
        except (IntegrationError, ValueError) as exc:
            row.error = str(exc)
            rows.append(row)
            continue
        row.max_norm_ratio = traj.max_norm / eps
        row.max_drift = [float(d) for d in traj.max_action_drift]
        row.max_weighted_drift = float(np.max(weights * traj.max_action_drift))
        row.max_energy_drift = traj.max_energy_drift
        if nf is not None and nf.generators:
            gens = nf.generator_list()
            zp0 = inverse_normalizing_map(gens, z0, n=n)
            I0 = (zp0[:n] * zp0[n:]).real
            worst = 0.0
            for state in traj.states[1:]:
                zp = inverse_normalizing_map(gens, state, n=n)
                worst = max(worst, float(np.max(np.abs((zp[:n] * zp[n:]).real - I0))))
            row.normalized_drift = worst
        rows.append(row)
    rows.sort(key=lambda rw: rw.eps)
    good = [rw for rw in rows if rw.error is None and rw.max_weighted_drift > 0]
    if len(good) >= 2:
        slope, r2 = loglog_fit([rw.eps for rw in good], [rw.max_weighted_drift for rw in good])
    else:
        slope, r2 = math.nan, math.nan
    return StabilityReport(rows=rows, drift_slope=slope, drift_r2=r2, seed=seed, dt=dt,
                           method=method, r=r, s_weight=s_weight)


def torus_distance(traj: Trajectory, ref_actions: Sequence[float], s_prime: float,
                   s_weight: float | None = None) -> np.ndarray:
    """Upper bound ``[sum_j j^(2s') |sqrt(I_j(t)) - sqrt(I_ref_j)|^2]^(1/2)``."""
    if s_weight is not None and not s_prime < s_weight - 1:
        raise ValueError(f"need s' < s - 1, got s'={s_prime}, s={s_weight}")
    I = np.clip(traj.actions, 0.0, None)
    ref = np.clip(np.asarray(ref_actions, dtype=float), 0.0, None)
    j = np.arange(1, traj.n + 1, dtype=float)
    return np.sqrt(np.sum(j ** (2 * s_prime) * (np.sqrt(I) - np.sqrt(ref)) ** 2, axis=1))


@dataclass
class NormalizedCheck:
    times: np.ndarray
    normal_drift: float
    transported_drift: float
    budget: float


def normalized_coordinate_check(H: Polynomial, nf, z0, dt: float, T: float,
                                n: int | None = None, samples: int = 10) -> NormalizedCheck:
    """Compare the full flow with the normal-form flow in normalized coordinates.

    ``normal_drift`` is the action drift of ``H0 + Z`` started at
    ``tau^{-1}(z0)``; ``transported_drift`` compares ``I(tau^{-1}(z(t)))``
    along the full flow with the initial normalized actions.  Both should be
    ``O(|z0|^(r+1) T)``, reported as ``budget``.
    """
    z0 = np.asarray(z0, dtype=np.complex128)
    n = len(z0) // 2 if n is None else n
    gens = nf.generator_list()
    zp0 = inverse_normalizing_map(gens, z0, n=n)
    I0 = (zp0[:n] * zp0[n:]).real
    H0 = Polynomial({(j, -j): H.coeff((j, -j)) for j in range(1, n + 1)})
    steps = int(round(T / dt))
    every = max(1, steps // samples)
    normal = integrate(H0 + nf.Z, zp0, dt, T, n=n, save_every=every, project=False)
    normal_drift = float(np.max(np.abs(normal.actions - I0)))
    full = integrate(H, z0, dt, T, n=n, save_every=every)
    worst = 0.0
    for state in full.states:
        zp = inverse_normalizing_map(gens, state, n=n)
        worst = max(worst, float(np.max(np.abs((zp[:n] * zp[n:]).real - I0))))
    eps = float(np.linalg.norm(z0))
    return NormalizedCheck(full.times, normal_drift, worst, eps ** (nf.order + 1) * T)
