"""Compiled hot loop for the sublattice-splitting integrator.

The whole stepping loop (steps x substeps x sites) runs inside one numba
kernel; recording into preallocated arrays happens at fixed strides.  The
numpy fallback in dynamics.py implements the identical scheme, so both paths
are interchangeable (set SPINWIRE_NO_NUMBA=1 to force the fallback).
"""

from __future__ import annotations

import numpy as np

try:  # pragma: no cover - exercised implicitly
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*a, **k):
        def deco(f):
            return f
        return deco

# drive kinds
KIND_NONE = 0
KIND_IDEAL = 1
KIND_DECAYING = 2


@njit(cache=True)
def _substep(spins, h, parity, dtsub, kind, tab_ok, s0x, s0y, s0z, weights):
    B, N = spins.shape[0], spins.shape[1]
    for b in range(B):
        for n in range(parity, N, 2):
            fx = 0.0
            fy = 0.0
            fz = h
            if n > 0:
                fx += spins[b, n - 1, 0]
                fy += spins[b, n - 1, 1]
                fz += spins[b, n - 1, 2]
            if n < N - 1:
                fx += spins[b, n + 1, 0]
                fy += spins[b, n + 1, 1]
                fz += spins[b, n + 1, 2]
            if tab_ok:
                if kind == KIND_IDEAL:
                    if n == 0:
                        fx += s0x
                        fy += s0y
                        fz += s0z
                elif kind == KIND_DECAYING:
                    w = weights[n]
                    fx += w * s0x
                    fy += w * s0y
                    fz += w * s0z
            w2 = fx * fx + fy * fy + fz * fz
            if w2 > 0.0:
                wn = np.sqrt(w2)
                ang = -wn * dtsub
                c = np.cos(ang)
                si = np.sin(ang)
                ax = fx / wn
                ay = fy / wn
                az = fz / wn
                sx = spins[b, n, 0]
                sy = spins[b, n, 1]
                sz = spins[b, n, 2]
                dot1c = (ax * sx + ay * sy + az * sz) * (1.0 - c)
                spins[b, n, 0] = sx * c + (ay * sz - az * sy) * si + ax * dot1c
                spins[b, n, 1] = sy * c + (az * sx - ax * sz) * si + ay * dot1c
                spins[b, n, 2] = sz * c + (ax * sy - ay * sx) * si + az * dot1c


@njit(cache=True)
def run_loop(spins, h, dt, nsteps, parities, fdts, tabs, tab_used, kind, weights,
             dpow, use_power, powers,
             frames, fstride, record_frames,
             zframes, zstride, record_z,
             probes, psites, pstride, record_p):
    """Advance (B, N, 3) spins by nsteps, recording as requested.

    tabs: (n_stages, nsteps, 3) drive values at each stage's midpoint.
    dpow: (nsteps + 1, 3) values of -ds0/dt at step boundaries.
    powers: (nsteps + 1, B) filled with the instantaneous drive power.
    frames/zframes/probes must be preallocated with slot 0 already filled.
    """
    B, N = spins.shape[0], spins.shape[1]
    n_st = parities.shape[0]
    if use_power:
        for b in range(B):
            p = 0.0
            if kind == KIND_IDEAL:
                p = (dpow[0, 0] * spins[b, 0, 0] + dpow[0, 1] * spins[b, 0, 1]
                     + dpow[0, 2] * spins[b, 0, 2])
            elif kind == KIND_DECAYING:
                for n in range(N):
                    p += weights[n] * (dpow[0, 0] * spins[b, n, 0]
                                       + dpow[0, 1] * spins[b, n, 1]
                                       + dpow[0, 2] * spins[b, n, 2])
            powers[0, b] = p
    for k in range(nsteps):
        for j in range(n_st):
            _substep(spins, h, parities[j], fdts[j] * dt, kind, tab_used[j],
                     tabs[j, k, 0], tabs[j, k, 1], tabs[j, k, 2], weights)
        if use_power:
            dx = dpow[k + 1, 0]
            dy = dpow[k + 1, 1]
            dz = dpow[k + 1, 2]
            for b in range(B):
                p = 0.0
                if dx != 0.0 or dy != 0.0 or dz != 0.0:
                    if kind == KIND_IDEAL:
                        p = dx * spins[b, 0, 0] + dy * spins[b, 0, 1] + dz * spins[b, 0, 2]
                    else:
                        for n in range(N):
                            p += weights[n] * (dx * spins[b, n, 0] + dy * spins[b, n, 1]
                                               + dz * spins[b, n, 2])
                powers[k + 1, b] = p
        kk = k + 1
        if record_frames and kk % fstride == 0:
            fi = kk // fstride
            for b in range(B):
                for n in range(N):
                    frames[fi, b, n, 0] = spins[b, n, 0]
                    frames[fi, b, n, 1] = spins[b, n, 1]
                    frames[fi, b, n, 2] = spins[b, n, 2]
        if record_z and kk % zstride == 0:
            zi = kk // zstride
            for b in range(B):
                for n in range(N):
                    zframes[zi, b, n] = spins[b, n, 2]
        if record_p and kk % pstride == 0:
            pi = kk // pstride
            for b in range(B):
                for w in range(psites.shape[0]):
                    n = psites[w]
                    probes[pi, b, w, 0] = spins[b, n, 0]
                    probes[pi, b, w, 1] = spins[b, n, 1]
                    probes[pi, b, w, 2] = spins[b, n, 2]
