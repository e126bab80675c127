"""Pure-Python flow integrator (reference implementation of the compiled kernel).

``flow_segment`` integrates the flow dynamics augmented with the running
integrals ``q = (int u.u, int y.y, int u.y)`` using Dormand-Prince 5(4) from
``t0`` until ``t_end`` or until the state enters ``x'Mx < 0``.  On such a
crossing the entry point is located by bisection on the dense output and the
state just inside the jump set is returned.

Status codes: 0 reached ``t_end``, 1 entered the jump set, 2 step size underflow.
"""

from __future__ import annotations

import math

import numpy as np

# Dormand-Prince 5(4) tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = -71 / 57600, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40

# dense output: z(theta) = z0 + h * sum_s K_s * (P[s] . (theta, theta^2, theta^3, theta^4))
P = np.array(
    [
        [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0, 0, 0, 0],
        [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

MULTISINE = 0
SIGMOID = 1
ABSOLUTE = 0
TIMER_RESET = 1

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
PROBES = (0.25, 0.5, 0.75, 1.0)


def input_value(t, t_reset, t_off, kind, clock, eps, mu, a, nu, amp, omg, phs, dirv):
    """Input vector at time ``t`` (zero from ``t_off`` on)."""
    p = dirv.shape[0]
    if t >= t_off:
        return np.zeros(p)
    tau = t - t_reset if clock == TIMER_RESET else t
    if kind == MULTISINE:
        return math.exp(-eps * tau) * np.sum(amp * np.sin(omg * tau + phs), axis=1)
    e = nu - a * tau
    if e > 0:
        ex = math.exp(-e)
        s = math.exp(-mu * tau) * ex / (1.0 + ex)
    else:
        s = math.exp(-mu * tau) / (1.0 + math.exp(e))
    return s * dirv


def flow_segment(A, B, C, D, M, x0, q0, t0, t_end, h0, t_reset, t_off, kind, clock,
                 eps, mu, a, nu, amp, omg, phs, dirv,
                 rtol, atol_x, atol_q, max_step, event_tol, record):
    n = A.shape[0]
    args = (t_reset, t_off, kind, clock, eps, mu, a, nu, amp, omg, phs, dirv)

    def f(t, z):
        u = input_value(t, *args)
        x = z[:n]
        y = C @ x + D @ u
        out = np.empty(n + 3)
        out[:n] = A @ x + B @ u
        out[n] = u @ u
        out[n + 1] = y @ y
        out[n + 2] = u @ y
        return out

    def g(z):
        x = z[:n]
        return float(x @ M @ x)

    atol = np.r_[np.full(n, atol_x), np.full(3, atol_q)]
    z = np.r_[np.asarray(x0, dtype=float), np.asarray(q0, dtype=float)]
    t = t0
    h = min(h0, max_step)
    peak = float(np.linalg.norm(z[:n]))
    rec_t: list[float] = []
    rec_x: list[np.ndarray] = []
    nsteps = 0
    K = np.empty((7, n + 3))
    K[0] = f(t, z)
    g_old = g(z)
    status = 0
    while t < t_end:
        h = min(h, max_step, t_end - t)
        if h <= 1e-14 * max(1.0, abs(t)):
            status = 2
            break
        K[1] = f(t + C2 * h, z + h * (A21 * K[0]))
        K[2] = f(t + C3 * h, z + h * (A31 * K[0] + A32 * K[1]))
        K[3] = f(t + C4 * h, z + h * (A41 * K[0] + A42 * K[1] + A43 * K[2]))
        K[4] = f(t + C5 * h, z + h * (A51 * K[0] + A52 * K[1] + A53 * K[2] + A54 * K[3]))
        K[5] = f(t + h, z + h * (A61 * K[0] + A62 * K[1] + A63 * K[2] + A64 * K[3] + A65 * K[4]))
        z_new = z + h * (B1 * K[0] + B3 * K[2] + B4 * K[3] + B5 * K[4] + B6 * K[5])
        t_new = t + h if t_end - (t + h) > 1e-14 * max(1.0, abs(t_end)) else t_end
        K[6] = f(t_new, z_new)
        err_vec = h * (E1 * K[0] + E3 * K[2] + E4 * K[3] + E5 * K[4] + E6 * K[5] + E7 * K[6])
        scale = atol + rtol * np.maximum(np.abs(z), np.abs(z_new))
        err = math.sqrt(float(np.mean((err_vec / scale) ** 2)))
        if err > 1.0:
            h *= max(MIN_FACTOR, SAFETY * err ** -0.2)
            continue
        nsteps += 1
        Q = K.T @ P  # (n+3, 4)

        def dense(theta):
            return z + h * (Q @ np.array([theta, theta ** 2, theta ** 3, theta ** 4]))

        if g_old >= 0.0:
            lo = 0.0
            hit = -1.0
            for th in PROBES:
                zp = z_new if th == 1.0 else dense(th)
                if g(zp) < 0.0:
                    hit = th
                    break
                lo = th
            if hit > 0.0:
                hi = hit
                z_hi = z_new if hi == 1.0 else dense(hi)
                for _ in range(200):
                    xn = z_hi[:n] @ z_hi[:n]
                    if abs(g(z_hi)) <= event_tol * (1.0 + xn) or hi - lo <= 1e-16:
                        break
                    mid = 0.5 * (lo + hi)
                    zm = dense(mid)
                    if g(zm) < 0.0:
                        hi, z_hi = mid, zm
                    else:
                        lo = mid
                z = z_hi
                t = t + hi * h
                peak = max(peak, float(np.linalg.norm(z[:n])))
                if record:
                    rec_t.append(t)
                    rec_x.append(z[:n].copy())
                status = 1
                break
        z = z_new
        t = t_new
        K[0] = K[6]
        g_old = g(z)
        peak = max(peak, float(np.linalg.norm(z[:n])))
        if record:
            rec_t.append(t)
            rec_x.append(z[:n].copy())
        fac = MAX_FACTOR if err == 0.0 else min(MAX_FACTOR, max(MIN_FACTOR, SAFETY * err ** -0.2))
        h *= fac
    return status, t, z[:n].copy(), z[n:].copy(), h, nsteps, peak, rec_t, rec_x
