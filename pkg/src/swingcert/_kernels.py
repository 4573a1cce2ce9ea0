"""Fixed-step RK4 integration kernels for the swing models.

The step loops dominate runtime (one fault study is easily 10^5..10^6
steps), so they exist in two builds: explicit loops compiled with numba
``@njit``, and a vectorized pure-numpy fallback. `swingcert.backend`
picks the build; the numpy functions stay importable either way so the
two can be compared directly (tests/test_kernels.py and
benchmarks/bench_backends.py).

All kernels advance ``theta``/``omega`` in place, record every
``stride``-th step plus the final one into the ``out_*`` arrays, and
return ``(n_recorded, ok)`` with ``ok == 0`` when a non-finite value
appeared (the trajectory is then truncated at the last finite sample).
Sample times are ``t0 + s*h`` with ``s`` the 1-based step index; the
caller records the segment's initial state itself.
"""

from __future__ import annotations

import math

import numpy as np

from .backend import using_numba


# ---------------------------------------------------------------------------
# loop builds (numba targets)
# ---------------------------------------------------------------------------

def _rk4_full_loops(theta, omega, j, d, p, k, t0, h, n_steps, stride,
                    out_t, out_theta, out_omega):
    n = theta.shape[0]
    th = np.empty(n)
    a1 = np.empty(n)
    a2 = np.empty(n)
    a3 = np.empty(n)
    a4 = np.empty(n)
    v2 = np.empty(n)
    v3 = np.empty(n)
    v4 = np.empty(n)
    half = 0.5 * h
    sixth = h / 6.0
    rec = 0
    for s in range(1, n_steps + 1):
        for m in range(n):
            acc = p[m] - d[m] * omega[m]
            for q in range(n):
                kv = k[m, q]
                if kv != 0.0:
                    acc -= kv * math.sin(theta[m] - theta[q])
            a1[m] = acc / j[m]
        for m in range(n):
            th[m] = theta[m] + half * omega[m]
            v2[m] = omega[m] + half * a1[m]
        for m in range(n):
            acc = p[m] - d[m] * v2[m]
            for q in range(n):
                kv = k[m, q]
                if kv != 0.0:
                    acc -= kv * math.sin(th[m] - th[q])
            a2[m] = acc / j[m]
        for m in range(n):
            th[m] = theta[m] + half * v2[m]
            v3[m] = omega[m] + half * a2[m]
        for m in range(n):
            acc = p[m] - d[m] * v3[m]
            for q in range(n):
                kv = k[m, q]
                if kv != 0.0:
                    acc -= kv * math.sin(th[m] - th[q])
            a3[m] = acc / j[m]
        for m in range(n):
            th[m] = theta[m] + h * v3[m]
            v4[m] = omega[m] + h * a3[m]
        for m in range(n):
            acc = p[m] - d[m] * v4[m]
            for q in range(n):
                kv = k[m, q]
                if kv != 0.0:
                    acc -= kv * math.sin(th[m] - th[q])
            a4[m] = acc / j[m]
        ok = True
        for m in range(n):
            theta[m] += sixth * (omega[m] + 2.0 * v2[m] + 2.0 * v3[m] + v4[m])
            omega[m] += sixth * (a1[m] + 2.0 * a2[m] + 2.0 * a3[m] + a4[m])
            if not (math.isfinite(theta[m]) and math.isfinite(omega[m])):
                ok = False
        if not ok:
            return rec, 0
        if s % stride == 0 or s == n_steps:
            out_t[rec] = t0 + s * h
            for m in range(n):
                out_theta[rec, m] = theta[m]
                out_omega[rec, m] = omega[m]
            rec += 1
    return rec, 1


def _rk4_reduced_loops(theta, d, p, k, t0, h, n_steps, stride,
                       out_t, out_theta, out_omega):
    n = theta.shape[0]
    th = np.empty(n)
    g1 = np.empty(n)
    g2 = np.empty(n)
    g3 = np.empty(n)
    g4 = np.empty(n)
    half = 0.5 * h
    sixth = h / 6.0
    rec = 0
    for s in range(1, n_steps + 1):
        for m in range(n):
            acc = p[m]
            for q in range(n):
                kv = k[m, q]
                if kv != 0.0:
                    acc -= kv * math.sin(theta[m] - theta[q])
            g1[m] = acc / d[m]
        for m in range(n):
            th[m] = theta[m] + half * g1[m]
        for m in range(n):
            acc = p[m]
            for q in range(n):
                kv = k[m, q]
                if kv != 0.0:
                    acc -= kv * math.sin(th[m] - th[q])
            g2[m] = acc / d[m]
        for m in range(n):
            th[m] = theta[m] + half * g2[m]
        for m in range(n):
            acc = p[m]
            for q in range(n):
                kv = k[m, q]
                if kv != 0.0:
                    acc -= kv * math.sin(th[m] - th[q])
            g3[m] = acc / d[m]
        for m in range(n):
            th[m] = theta[m] + h * g3[m]
        for m in range(n):
            acc = p[m]
            for q in range(n):
                kv = k[m, q]
                if kv != 0.0:
                    acc -= kv * math.sin(th[m] - th[q])
            g4[m] = acc / d[m]
        ok = True
        for m in range(n):
            theta[m] += sixth * (g1[m] + 2.0 * g2[m] + 2.0 * g3[m] + g4[m])
            if not math.isfinite(theta[m]):
                ok = False
        if not ok:
            return rec, 0
        if s % stride == 0 or s == n_steps:
            out_t[rec] = t0 + s * h
            for m in range(n):
                acc = p[m]
                for q in range(n):
                    kv = k[m, q]
                    if kv != 0.0:
                        acc -= kv * math.sin(theta[m] - theta[q])
                out_theta[rec, m] = theta[m]
                out_omega[rec, m] = acc / d[m]
            rec += 1
    return rec, 1


# ---------------------------------------------------------------------------
# vectorized numpy builds
# ---------------------------------------------------------------------------

def _flow(theta, k):
    """Net sine coupling power drawn from each machine."""
    return (k * np.sin(theta[:, None] - theta[None, :])).sum(axis=1)


def _rk4_full_numpy(theta, omega, j, d, p, k, t0, h, n_steps, stride,
                    out_t, out_theta, out_omega):
    half = 0.5 * h
    sixth = h / 6.0
    rec = 0
    for s in range(1, n_steps + 1):
        a1 = (p - d * omega - _flow(theta, k)) / j
        om2 = omega + half * a1
        a2 = (p - d * om2 - _flow(theta + half * omega, k)) / j
        om3 = omega + half * a2
        a3 = (p - d * om3 - _flow(theta + half * om2, k)) / j
        om4 = omega + h * a3
        a4 = (p - d * om4 - _flow(theta + h * om3, k)) / j
        theta += sixth * (omega + 2.0 * om2 + 2.0 * om3 + om4)
        omega += sixth * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        if not (np.isfinite(theta).all() and np.isfinite(omega).all()):
            return rec, 0
        if s % stride == 0 or s == n_steps:
            out_t[rec] = t0 + s * h
            out_theta[rec] = theta
            out_omega[rec] = omega
            rec += 1
    return rec, 1


def _rk4_reduced_numpy(theta, d, p, k, t0, h, n_steps, stride,
                       out_t, out_theta, out_omega):
    half = 0.5 * h
    sixth = h / 6.0
    rec = 0
    for s in range(1, n_steps + 1):
        g1 = (p - _flow(theta, k)) / d
        g2 = (p - _flow(theta + half * g1, k)) / d
        g3 = (p - _flow(theta + half * g2, k)) / d
        g4 = (p - _flow(theta + h * g3, k)) / d
        theta += sixth * (g1 + 2.0 * g2 + 2.0 * g3 + g4)
        if not np.isfinite(theta).all():
            return rec, 0
        if s % stride == 0 or s == n_steps:
            out_t[rec] = t0 + s * h
            out_theta[rec] = theta
            out_omega[rec] = (p - _flow(theta, k)) / d
            rec += 1
    return rec, 1


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

if using_numba():
    from numba import njit

    rk4_full_segment = njit(cache=True)(_rk4_full_loops)
    rk4_reduced_segment = njit(cache=True)(_rk4_reduced_loops)
else:
    rk4_full_segment = _rk4_full_numpy
    rk4_reduced_segment = _rk4_reduced_numpy
