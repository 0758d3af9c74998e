"""Compiled inner loops for the thermostatted mode dynamics.

State rows are ``(Q, xi1, xi2, P, chi1, chi2)``. All kernels are pure
functions of their inputs and release the GIL, so chunks of trajectories can
be propagated from worker threads without changing any result bit.
"""

import math

import numpy as np
from numba import njit

SCHEDULE_CODES = {
    "constant-quantum": 0,
    "constant-classical": 1,
    "step-quench": 2,
    "linear-ramp": 3,
}


@njit(cache=True, nogil=True)
def scheduled_kbt(kind, kq, kc, scoped, t, t_quench, t_start, t_end):
    """Target ``kBT`` of one mode at time ``t``; unscoped modes stay at ``kq``."""
    if kind == 0 or not scoped:
        return kq
    if kind == 1:
        return kc
    if kind == 2:
        return kq if t < t_quench else kc
    if t <= t_start:
        return kq
    if t >= t_end:
        return kc
    return kq + (kc - kq) * (t - t_start) / (t_end - t_start)


@njit(cache=True, nogil=True)
def _chain_substep(P, xi1, xi2, chi1, chi2, mu, M1, M2, g, kbt, h):
    # Symmetric update of the chain over a substep h: chi2 half kick,
    # chi1 half update (scaled by the chi2 coupling), exact P friction and
    # xi drifts, then the mirror image.
    chi2 += (chi1 * chi1 / M1 - kbt) * (0.5 * h)
    s = math.exp(-chi2 / M2 * (0.25 * h))
    chi1 = (chi1 * s + (P * P / mu - g * kbt) * (0.5 * h)) * s
    xi1 += chi1 / M1 * h
    xi2 += chi2 / M2 * h
    P *= math.exp(-chi1 / M1 * h)
    chi1 = (chi1 * s + (P * P / mu - g * kbt) * (0.5 * h)) * s
    chi2 += (chi1 * chi1 / M1 - kbt) * (0.5 * h)
    return P, xi1, xi2, chi1, chi2


@njit(cache=True, nogil=True)
def _chain_half(P, xi1, xi2, chi1, chi2, mu, M1, M2, g, kbt, dt, n_respa, weights):
    for _ in range(n_respa):
        for w in weights:
            h = w * dt / (2.0 * n_respa)
            P, xi1, xi2, chi1, chi2 = _chain_substep(P, xi1, xi2, chi1, chi2, mu, M1, M2, g, kbt, h)
    return P, xi1, xi2, chi1, chi2


@njit(cache=True, nogil=True)
def step_mode(s, omega, mu, M1, M2, g, kbt, dt, c, sn, n_respa, weights, thermostat_on):
    """Advance one extended mode state in place by ``dt``.

    ``c`` and ``sn`` are ``cos(omega dt)`` and ``sin(omega dt)``.
    """
    Q, xi1, xi2, P, chi1, chi2 = s[0], s[1], s[2], s[3], s[4], s[5]
    if thermostat_on:
        P, xi1, xi2, chi1, chi2 = _chain_half(P, xi1, xi2, chi1, chi2, mu, M1, M2, g, kbt, dt, n_respa, weights)
    mw = mu * omega
    Q, P = Q * c + P / mw * sn, P * c - mw * Q * sn
    if thermostat_on:
        P, xi1, xi2, chi1, chi2 = _chain_half(P, xi1, xi2, chi1, chi2, mu, M1, M2, g, kbt, dt, n_respa, weights)
    s[0], s[1], s[2], s[3], s[4], s[5] = Q, xi1, xi2, P, chi1, chi2


@njit(cache=True, nogil=True)
def chain_flow(s, mu, M1, M2, g, kbt, dt, n_steps, n_respa, weights):
    """Thermostat block alone (physics rotation frozen) for ``n_steps`` steps of ``dt``."""
    Q, xi1, xi2, P, chi1, chi2 = s[0], s[1], s[2], s[3], s[4], s[5]
    for _ in range(n_steps):
        P, xi1, xi2, chi1, chi2 = _chain_half(P, xi1, xi2, chi1, chi2, mu, M1, M2, g, kbt, 2.0 * dt, n_respa, weights)
    s[0], s[1], s[2], s[3], s[4], s[5] = Q, xi1, xi2, P, chi1, chi2


@njit(cache=True, nogil=True)
def propagate_chunk(
    states,
    omega,
    mu,
    M1,
    M2,
    g,
    kind,
    kq,
    kc,
    scoped,
    t_quench,
    t_start,
    t_end,
    time0,
    dt,
    n_steps,
    stride,
    n_respa,
    weights,
    thermostat_on,
    snapshots,
    failed,
):
    """Propagate ``states`` of shape ``(n, N, 6)`` in place, recording every ``stride`` steps.

    ``snapshots`` has shape ``(n_steps // stride + 1, n, N, 6)``; slot 0 holds the
    initial state. A trajectory that turns non-finite is flagged in ``failed``,
    frozen, and its remaining snapshots are filled with NaN.
    """
    n, n_modes = states.shape[0], states.shape[1]
    cosines = np.cos(omega * dt)
    sines = np.sin(omega * dt)
    for i in range(n):
        for j in range(n_modes):
            for k in range(6):
                snapshots[0, i, j, k] = states[i, j, k]
        if failed[i]:
            snapshots[1:, i, :, :] = np.nan
            continue
        slot = 1
        for step in range(n_steps):
            t_mid = time0 + (step + 0.5) * dt
            ok = True
            for j in range(n_modes):
                kbt = scheduled_kbt(kind, kq[j], kc[j], scoped[j], t_mid, t_quench, t_start, t_end)
                s = states[i, j]
                step_mode(s, omega[j], mu[j], M1[j], M2[j], g[j], kbt, dt, cosines[j], sines[j], n_respa, weights, thermostat_on)
                for k in range(6):
                    if not math.isfinite(s[k]):
                        ok = False
            if not ok:
                failed[i] = True
                snapshots[slot:, i, :, :] = np.nan
                break
            if (step + 1) % stride == 0:
                for j in range(n_modes):
                    for k in range(6):
                        snapshots[slot, i, j, k] = states[i, j, k]
                slot += 1
