"""numba kernels for scalar models with a factorized diffusion.

They consume the same pre-drawn standard normals and uniforms as the
reference engine in ``scheme.py``, in the same order, so both engines return
identical numbers. ``specialized`` binds the coefficient functions at
compile time; passing jitted functions as call arguments instead costs tens
of microseconds of type dispatch per call.
"""
import threading

import numpy as np
from numba import njit


@njit(nogil=True)
def terminal_collapsed(drift, base, jump, prm, eta, T, n, sd, z, u, jtimes, jmarks, jwin):
    """Single scheme on an ``n``-step grid; ``z[j]`` drives step ``j`` and
    ``u`` (empty for time-homogeneous drifts) places the drift times.

    Returns ``(x_T, projection_sum, failed_step)``; ``failed_step`` is -1 on
    success.
    """
    x = eta
    proj = 0.0
    time_dep = u.shape[0] > 0
    nj = jtimes.shape[0]
    k = 0
    t0 = 0.0
    for j in range(n):
        t1 = T * ((j + 1) / n)
        h = t1 - t0
        P = sd * z[j]
        proj += P
        th = t0 + u[j] * h if time_dep else t0
        xn = x + drift(th, x, prm) * h
        xn = xn + base(t0, x, prm) * P
        while k < nj and jwin[k] == j:
            xn = xn + jump(t0, x, jmarks[k], prm)
            k += 1
        if not np.isfinite(xn):
            return xn, proj, j
        x = xn
        t0 = t1
    return x, proj, -1


@njit(nogil=True)
def coupled_collapsed(drift, base, jump, prm, eta, T, n, m, sd_fine, rho, sd_resid, z, ur, uf,
                      jtimes, jmarks, jwin_fine):
    """Rare (``n`` steps) and fine (``n*m`` steps) schemes on shared noise.

    ``z`` holds ``m + 1`` normals per rare step: ``m`` fine increments, then
    the residual of the rare projection. Returns
    ``(x_rare, x_fine, failed_step, failed_fine)``.
    """
    N = n * m
    xr = eta
    xf = eta
    time_dep = ur.shape[0] > 0
    nj = jtimes.shape[0]
    kf = 0
    kr = 0
    t0 = 0.0
    s0 = 0.0
    for j in range(n):
        F = 0.0
        base_z = j * (m + 1)
        for i in range(m):
            g = j * m + i
            s1 = T * ((g + 1) / N)
            H = s1 - s0
            P = sd_fine * z[base_z + i]
            F = F + P
            th = s0 + uf[g] * H if time_dep else s0
            xn = xf + drift(th, xf, prm) * H
            xn = xn + base(s0, xf, prm) * P
            while kf < nj and jwin_fine[kf] == g:
                xn = xn + jump(s0, xf, jmarks[kf], prm)
                kf += 1
            if not np.isfinite(xn):
                return xr, xn, g, True
            xf = xn
            s0 = s1
        R = rho * F + sd_resid * z[base_z + m]
        t1 = T * ((j + 1) / n)
        h = t1 - t0
        th = t0 + ur[j] * h if time_dep else t0
        xn = xr + drift(th, xr, prm) * h
        xn = xn + base(t0, xr, prm) * R
        while kr < nj and jwin_fine[kr] // m == j:
            xn = xn + jump(t0, xr, jmarks[kr], prm)
            kr += 1
        if not np.isfinite(xn):
            return xn, xf, j, False
        xr = xn
        t0 = t1
    return xr, xf, -1, False


_cache = {}
_lock = threading.Lock()


def specialized(drift, base, jump):
    """``(terminal, coupled)`` kernels with the coefficients bound in."""
    key = (drift, base, jump)
    with _lock:
        hit = _cache.get(key)
        if hit is None:
            @njit(nogil=True)
            def terminal(prm, eta, T, n, sd, z, u, jtimes, jmarks, jwin):
                return terminal_collapsed(drift, base, jump, prm, eta, T, n, sd, z, u,
                                          jtimes, jmarks, jwin)

            @njit(nogil=True)
            def coupled(prm, eta, T, n, m, sd_fine, rho, sd_resid, z, ur, uf,
                        jtimes, jmarks, jwin_fine):
                return coupled_collapsed(drift, base, jump, prm, eta, T, n, m, sd_fine, rho,
                                         sd_resid, z, ur, uf, jtimes, jmarks, jwin_fine)

            hit = _cache[key] = (terminal, coupled)
    return hit
