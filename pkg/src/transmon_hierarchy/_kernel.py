"""Compiled adaptive Dormand-Prince 8(5,3) integrator for driven Schroedinger dynamics.

The state is propagated in the interaction picture of the static Hamiltonian,
expressed in its eigenbasis with energies ``E`` (GHz):

    d psi/dt = -2 pi i V(t) P(t) D P(t)^* psi,   P(t) = diag(exp(2 pi i E t))

where ``D`` is the drive operator in the same eigenbasis and ``V(t)`` the real
drive signal. This is exact (no rotating-wave approximation). Optional
sensitivity blocks d psi / d theta are integrated alongside the state:

    d psi_k/dt = -2 pi i P D P^* (V psi_k + dV/dtheta_k psi)

Drive components arrive as rows ``[shape, amp, duration, sigma, beta, freq,
phase]`` (shape 0 square, 1 lifted Gaussian, 2 DRAG). Sensitivity rows are
``[kind, component]`` with kind 0 = peak amplitude, 1 = DRAG beta.
"""

import numba as nb
import numpy as np
from scipy.integrate._ivp import dop853_coefficients as _coef

N_STAGES = 12
A = np.ascontiguousarray(_coef.A[:N_STAGES, :N_STAGES])
B = np.ascontiguousarray(_coef.B)
C = np.ascontiguousarray(_coef.C[:N_STAGES])
E3 = np.ascontiguousarray(_coef.E3)
E5 = np.ascontiguousarray(_coef.E5)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
ERR_EXP = -1.0 / 8.0

OK = 0
STEP_FAILURE = 1
MAX_STEPS = 2

TWO_PI = 2.0 * np.pi


@nb.njit(cache=True)
def envelope(code, amp, duration, sigma, t):
    """Envelope value and time derivative; zero outside [0, duration]."""
    if t < 0.0 or t > duration:
        return 0.0, 0.0
    if code == 0:
        return amp, 0.0
    half = 0.5 * duration
    s2 = 2.0 * sigma * sigma
    g = np.exp(-(t - half) * (t - half) / s2)
    g0 = np.exp(-half * half / s2)
    norm = amp / (1.0 - g0)
    return norm * (g - g0), -norm * g * (t - half) / (sigma * sigma)


@nb.njit(cache=True)
def signals(t, comps, sens, out):
    """out[0] = V(t); out[1 + k] = dV/dtheta_k."""
    total = 0.0
    for i in range(comps.shape[0]):
        code = int(comps[i, 0])
        val, der = envelope(code, comps[i, 1], comps[i, 2], comps[i, 3], t)
        arg = TWO_PI * comps[i, 5] * t + comps[i, 6]
        v = val * np.cos(arg)
        if code == 2:
            v -= comps[i, 4] * der * np.sin(arg)
        total += v
    out[0] = total
    for k in range(sens.shape[0]):
        i = sens[k, 1]
        code = int(comps[i, 0])
        arg = TWO_PI * comps[i, 5] * t + comps[i, 6]
        val, der = envelope(code, 1.0, comps[i, 2], comps[i, 3], t)
        if sens[k, 0] == 0:
            v = val * np.cos(arg)
            if code == 2:
                v -= comps[i, 4] * der * np.sin(arg)
            out[1 + k] = v
        else:
            out[1 + k] = -comps[i, 1] * der * np.sin(arg)


@nb.njit(cache=True)
def rhs(t, y, E, D, comps, sens, sig, ph, tmp, w, out):
    m = E.shape[0]
    nblk = 1 + sens.shape[0]
    signals(t, comps, sens, sig)
    active = False
    for k in range(nblk):
        if sig[k] != 0.0:
            active = True
    if not active:
        for i in range(out.shape[0]):
            out[i] = 0.0
        return
    for j in range(m):
        a = TWO_PI * E[j] * t
        ph[j] = complex(np.cos(a), np.sin(a))
    for b in range(nblk):
        off = b * m
        for j in range(m):
            tmp[j] = ph[j].conjugate() * y[off + j]
        for j in range(m):
            s = 0j
            for k in range(m):
                s += D[j, k] * tmp[k]
            w[b, j] = s
    pref = -1j * TWO_PI
    V = sig[0]
    for j in range(m):
        out[j] = pref * V * ph[j] * w[0, j]
    for b in range(1, nblk):
        off = b * m
        dv = sig[b]
        for j in range(m):
            out[off + j] = pref * ph[j] * (V * w[b, j] + dv * w[0, j])


@nb.njit(cache=True)
def integrate(y0, E, D, comps, sens, t_out, rtol, atol, max_step, h_init, max_steps):
    """Integrate from t_out[0] through every t_out[k], landing on each exactly.

    Returns (states at t_out, status, accepted steps, rejected steps).
    """
    n = y0.shape[0]
    m = E.shape[0]
    nblk = 1 + sens.shape[0]
    n_out = t_out.shape[0]
    Y = np.zeros((n_out, n), dtype=np.complex128)
    Y[0, :] = y0
    K = np.zeros((N_STAGES + 1, n), dtype=np.complex128)
    y = y0.copy()
    y_new = np.zeros(n, dtype=np.complex128)
    y_stage = np.zeros(n, dtype=np.complex128)
    sig = np.zeros(nblk)
    ph = np.zeros(m, dtype=np.complex128)
    tmp = np.zeros(m, dtype=np.complex128)
    w = np.zeros((nblk, m), dtype=np.complex128)
    if n_out < 2:
        return Y, OK, 0, 0

    direction = 1.0 if t_out[n_out - 1] >= t_out[0] else -1.0
    t = t_out[0]
    rhs(t, y, E, D, comps, sens, sig, ph, tmp, w, K[0])
    h = abs(h_init)
    accepted = 0
    rejected = 0
    k_out = 1
    while k_out < n_out:
        target = t_out[k_out]
        step_rejected = False
        while True:
            h_abs = min(h, max_step)
            remaining = abs(target - t)
            hit = False
            if h_abs >= remaining * (1.0 - 1e-12):
                h_abs = remaining
                hit = True
            if h_abs < 1e-13 * max(1.0, abs(t)) and not hit:
                return Y, STEP_FAILURE, accepted, rejected
            hs = direction * h_abs
            for s in range(1, N_STAGES):
                for i in range(n):
                    acc = 0j
                    for j in range(s):
                        acc += A[s, j] * K[j, i]
                    y_stage[i] = y[i] + hs * acc
                rhs(t + C[s] * hs, y_stage, E, D, comps, sens, sig, ph, tmp, w, K[s])
            for i in range(n):
                acc = 0j
                for j in range(N_STAGES):
                    acc += B[j] * K[j, i]
                y_new[i] = y[i] + hs * acc
            t_new = target if hit else t + hs
            rhs(t_new, y_new, E, D, comps, sens, sig, ph, tmp, w, K[N_STAGES])

            e5 = 0.0
            e3 = 0.0
            for i in range(n):
                scale = atol + rtol * max(abs(y[i]), abs(y_new[i]))
                a5 = 0j
                a3 = 0j
                for j in range(N_STAGES + 1):
                    a5 += E5[j] * K[j, i]
                    a3 += E3[j] * K[j, i]
                e5 += (abs(a5) / scale) ** 2
                e3 += (abs(a3) / scale) ** 2
            if e5 == 0.0 and e3 == 0.0:
                err = 0.0
            else:
                err = h_abs * e5 / np.sqrt((e5 + 0.01 * e3) * n)

            if err < 1.0:
                if err == 0.0:
                    factor = MAX_FACTOR
                else:
                    factor = min(MAX_FACTOR, SAFETY * err ** ERR_EXP)
                if step_rejected:
                    factor = min(1.0, factor)
                # a step shortened to land on an output time does not shrink h
                if hit and h_abs < h:
                    h = max(h, h_abs * factor) if factor >= 1.0 else h_abs * factor
                else:
                    h = h_abs * factor
                t = t_new
                for i in range(n):
                    y[i] = y_new[i]
                    K[0, i] = K[N_STAGES, i]
                accepted += 1
                if accepted > max_steps:
                    return Y, MAX_STEPS, accepted, rejected
                break
            h = h_abs * max(MIN_FACTOR, SAFETY * err ** ERR_EXP)
            step_rejected = True
            rejected += 1
        if hit:
            Y[k_out, :] = y
            k_out += 1
    return Y, OK, accepted, rejected
