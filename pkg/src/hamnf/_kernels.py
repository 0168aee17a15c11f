"""numba kernels over the flat polynomial layout of ``CompiledPolynomial``."""

import numpy as np
from numba import njit

# status codes returned by the trajectory kernels
OK = 0
NO_CONVERGENCE = 1
NOT_FINITE = 2


@njit(cache=True)
def poly_eval(coeffs, var, offsets, z):
    total = 0.0 + 0.0j
    for t in range(coeffs.shape[0]):
        v = coeffs[t]
        for k in range(offsets[t], offsets[t + 1]):
            v *= z[var[k]]
        total += v
    return total


@njit(cache=True)
def _grad_into(coeffs, var, offsets, z, g):
    for i in range(g.shape[0]):
        g[i] = 0.0
    for t in range(coeffs.shape[0]):
        a = offsets[t]
        b = offsets[t + 1]
        d = b - a
        if d == 0:
            continue
        if d == 1:
            g[var[a]] += coeffs[t]
            continue
        if d == 2:
            g[var[a]] += coeffs[t] * z[var[a + 1]]
            g[var[a + 1]] += coeffs[t] * z[var[a]]
            continue
        # prefix products, then sweep suffix products backwards
        pre = np.empty(d, dtype=np.complex128)
        acc = 1.0 + 0.0j
        for k in range(d):
            pre[k] = acc
            acc *= z[var[a + k]]
        suf = coeffs[t]
        for k in range(d - 1, -1, -1):
            g[var[a + k]] += pre[k] * suf
            suf *= z[var[a + k]]


@njit(cache=True)
def poly_grad(coeffs, var, offsets, z):
    g = np.zeros(z.shape[0], dtype=np.complex128)
    _grad_into(coeffs, var, offsets, z, g)
    return g


@njit(cache=True)
def _field_into(coeffs, var, offsets, z, n, g, out):
    _grad_into(coeffs, var, offsets, z, g)
    for j in range(n):
        out[j] = -1j * g[n + j]
        out[n + j] = 1j * g[j]


@njit(cache=True)
def vector_field(coeffs, var, offsets, z, n):
    g = np.empty(z.shape[0], dtype=np.complex128)
    out = np.empty(z.shape[0], dtype=np.complex128)
    _field_into(coeffs, var, offsets, z, n, g, out)
    return out


@njit(cache=True)
def rk4_flow(coeffs, var, offsets, z0, n, t_end, nsteps):
    """Classical RK4 from 0 to ``t_end`` (may be negative) in ``nsteps``."""
    h = t_end / nsteps
    z = z0.copy()
    g = np.empty(z.shape[0], dtype=np.complex128)
    k1 = np.empty_like(z)
    k2 = np.empty_like(z)
    k3 = np.empty_like(z)
    k4 = np.empty_like(z)
    for _ in range(nsteps):
        _field_into(coeffs, var, offsets, z, n, g, k1)
        _field_into(coeffs, var, offsets, z + 0.5 * h * k1, n, g, k2)
        _field_into(coeffs, var, offsets, z + 0.5 * h * k2, n, g, k3)
        _field_into(coeffs, var, offsets, z + h * k3, n, g, k4)
        z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return z


@njit(cache=True)
def _norm2(z):
    s = 0.0
    for i in range(z.shape[0]):
        s += z[i].real * z[i].real + z[i].imag * z[i].imag
    return s


@njit(cache=True)
def run_trajectory(coeffs, var, offsets, z0, n, dt, nsteps, stride, method,
                   tol, maxit, weights, project):
    """Integrate the Hamilton equations and track running statistics.

    method 0 = implicit midpoint (fixed point), 1 = rk4.  ``weights`` holds
    the per-mode drift weights ``j^(2s)``.  Returns the sampled states plus
    running maxima computed at every step.
    """
    m = nsteps // stride + 1
    if nsteps % stride:
        m += 1  # the final state is always kept
    dim = z0.shape[0]
    states = np.empty((m, dim), dtype=np.complex128)
    energy = np.empty(m, dtype=np.float64)
    z = z0.copy()
    g = np.empty(dim, dtype=np.complex128)
    f = np.empty(dim, dtype=np.complex128)
    k1 = np.empty(dim, dtype=np.complex128)
    k2 = np.empty(dim, dtype=np.complex128)
    k3 = np.empty(dim, dtype=np.complex128)
    k4 = np.empty(dim, dtype=np.complex128)
    I0 = np.empty(n, dtype=np.float64)
    for j in range(n):
        I0[j] = (z[j] * z[n + j]).real
    H0 = poly_eval(coeffs, var, offsets, z).real
    max_norm2 = _norm2(z)
    max_drift = np.zeros(n, dtype=np.float64)
    max_wdrift = 0.0
    max_edrift = 0.0
    max_defect = 0.0
    max_iters = 0
    states[0] = z
    energy[0] = H0
    status = OK
    fail_step = -1
    fail_residual = 0.0
    row = 1
    for step in range(1, nsteps + 1):
        if method == 0:
            _field_into(coeffs, var, offsets, z, n, g, f)
            znew = z + dt * f
            converged = False
            it = 0
            res = 0.0
            while it < maxit:
                it += 1
                _field_into(coeffs, var, offsets, 0.5 * (z + znew), n, g, f)
                cand = z + dt * f
                res = 0.0
                scale = 0.0
                for i in range(dim):
                    d = abs(cand[i] - znew[i])
                    if not np.isfinite(d):
                        d = np.inf
                    if d > res:
                        res = d
                    a = abs(cand[i])
                    if a > scale:
                        scale = a
                znew = cand
                if not (res < np.inf and scale < np.inf):
                    res = np.inf
                    break
                if res <= tol * max(scale, 1e-300):
                    converged = True
                    break
            if it > max_iters:
                max_iters = it
            if not converged:
                status = NO_CONVERGENCE
                fail_step = step
                fail_residual = res
                break
        else:
            _field_into(coeffs, var, offsets, z, n, g, k1)
            _field_into(coeffs, var, offsets, z + 0.5 * dt * k1, n, g, k2)
            _field_into(coeffs, var, offsets, z + 0.5 * dt * k2, n, g, k3)
            _field_into(coeffs, var, offsets, z + dt * k3, n, g, k4)
            znew = z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if project:
            for j in range(n):
                d = abs(znew[n + j] - np.conj(znew[j]))
                if d > max_defect:
                    max_defect = d
                x = 0.5 * (znew[j] + np.conj(znew[n + j]))
                znew[j] = x
                znew[n + j] = np.conj(x)
        z = znew
        nz = _norm2(z)
        if not np.isfinite(nz):
            status = NOT_FINITE
            fail_step = step
            break
        if nz > max_norm2:
            max_norm2 = nz
        for j in range(n):
            dI = abs((z[j] * z[n + j]).real - I0[j])
            if dI > max_drift[j]:
                max_drift[j] = dI
            if weights[j] * dI > max_wdrift:
                max_wdrift = weights[j] * dI
        if step % stride == 0 or step == nsteps:
            e = poly_eval(coeffs, var, offsets, z).real
            de = abs(e - H0)
            if de > max_edrift:
                max_edrift = de
            states[row] = z
            energy[row] = e
            row += 1
    stats = np.array([np.sqrt(max_norm2), max_wdrift, max_edrift, max_defect,
                      float(max_iters), float(fail_step), fail_residual])
    return status, states[:row], energy[:row], max_drift, stats
