# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled flow integrator; mirrors ``_kernel_py.flow_segment`` step for step."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, fmax, fmin, pow, sin, sqrt
from libc.stdlib cimport free, malloc

cnp.import_array()

cdef double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9
cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784, B6 = 11.0 / 84
cdef double E1 = -71.0 / 57600, E3 = 71.0 / 16695, E4 = -71.0 / 1920, E5 = 17253.0 / 339200, E6 = -22.0 / 525, E7 = 1.0 / 40

cdef double[7][4] P = [
    [1.0, -8048581381.0 / 2820520608, 8663915743.0 / 2820520608, -12715105075.0 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200.0 / 32700410799, -68118460800.0 / 10900136933, 87487479700.0 / 32700410799],
    [0.0, -1754552775.0 / 470086768, 14199869525.0 / 1410260304, -10690763975.0 / 1880347072],
    [0.0, 127303824393.0 / 49829197408, -318862633887.0 / 49829197408, 701980252875.0 / 199316789632],
    [0.0, -282668133.0 / 205662961, 2019193451.0 / 616988883, -1453857185.0 / 822651844],
    [0.0, 40617522.0 / 29380423, -110615467.0 / 29380423, 69997945.0 / 29380423],
]

cdef double SAFETY = 0.9, MIN_FACTOR = 0.2, MAX_FACTOR = 10.0


cdef struct Sys:
    int n
    int p
    int nk
    int kind
    int clock
    double t_reset
    double t_off
    double eps
    double mu
    double a
    double nu
    double *A
    double *B
    double *C
    double *D
    double *M
    double *amp
    double *omg
    double *phs
    double *dirv
    double *u
    double *y


cdef void rhs(Sys *s, double t, double *z, double *out) noexcept nogil:
    cdef int n = s.n, p = s.p, i, j, k
    cdef double tau, env, acc, e, ex, sg
    if t >= s.t_off:
        for i in range(p):
            s.u[i] = 0.0
    else:
        tau = t - s.t_reset if s.clock == 1 else t
        if s.kind == 0:
            env = exp(-s.eps * tau)
            for i in range(p):
                acc = 0.0
                for k in range(s.nk):
                    acc += s.amp[i * s.nk + k] * sin(s.omg[i * s.nk + k] * tau + s.phs[i * s.nk + k])
                s.u[i] = env * acc
        else:
            e = s.nu - s.a * tau
            if e > 0:
                ex = exp(-e)
                sg = exp(-s.mu * tau) * ex / (1.0 + ex)
            else:
                sg = exp(-s.mu * tau) / (1.0 + exp(e))
            for i in range(p):
                s.u[i] = sg * s.dirv[i]
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc += s.A[i * n + j] * z[j]
        for j in range(p):
            acc += s.B[i * p + j] * s.u[j]
        out[i] = acc
    for i in range(p):
        acc = 0.0
        for j in range(n):
            acc += s.C[i * n + j] * z[j]
        for j in range(p):
            acc += s.D[i * p + j] * s.u[j]
        s.y[i] = acc
    out[n] = 0.0
    out[n + 1] = 0.0
    out[n + 2] = 0.0
    for i in range(p):
        out[n] += s.u[i] * s.u[i]
        out[n + 1] += s.y[i] * s.y[i]
        out[n + 2] += s.u[i] * s.y[i]


cdef double gform(Sys *s, double *z) noexcept nogil:
    cdef int n = s.n, i, j
    cdef double acc = 0.0
    for i in range(n):
        for j in range(n):
            acc += z[i] * s.M[i * n + j] * z[j]
    return acc


cdef double xnorm2(int n, double *z) noexcept nogil:
    cdef int i
    cdef double acc = 0.0
    for i in range(n):
        acc += z[i] * z[i]
    return acc


cdef void dense(int dim, double *z0, double h, double *K, double theta, double *out) noexcept nogil:
    cdef int i, s
    cdef double b[7]
    cdef double t2 = theta * theta
    for s in range(7):
        b[s] = P[s][0] * theta + P[s][1] * t2 + P[s][2] * t2 * theta + P[s][3] * t2 * t2
    for i in range(dim):
        out[i] = z0[i]
        for s in range(7):
            out[i] += h * K[s * dim + i] * b[s]


cdef double[:] _flat(obj):
    return np.array(obj, dtype=np.float64).ravel()


def flow_segment(A, B, C, D, M, x0, q0, double t0, double t_end, double h0, double t_reset, double t_off,
                 int kind, int clock, double eps, double mu, double a, double nu, amp, omg, phs, dirv,
                 double rtol, double atol_x, double atol_q, double max_step, double event_tol, bint record):
    cdef int n = A.shape[0]
    cdef int p = B.shape[1]
    cdef int dim = n + 3
    cdef double[:] vA = _flat(A), vB = _flat(B), vC = _flat(C), vD = _flat(D), vM = _flat(M)
    cdef double[:] vamp = _flat(amp), vomg = _flat(omg), vphs = _flat(phs), vdir = _flat(dirv)
    cdef double[:] vx0 = _flat(x0), vq0 = _flat(q0)
    cdef Sys s
    s.n = n
    s.p = p
    s.nk = amp.shape[1] if amp.ndim == 2 else 0
    s.kind = kind
    s.clock = clock
    s.t_reset = t_reset
    s.t_off = t_off
    s.eps = eps
    s.mu = mu
    s.a = a
    s.nu = nu
    s.A = &vA[0]
    s.B = &vB[0]
    s.C = &vC[0]
    s.D = &vD[0]
    s.M = &vM[0]
    s.amp = &vamp[0] if vamp.shape[0] > 0 else NULL
    s.omg = &vomg[0] if vomg.shape[0] > 0 else NULL
    s.phs = &vphs[0] if vphs.shape[0] > 0 else NULL
    s.dirv = &vdir[0]

    cdef double *buf = <double *> malloc((12 * dim + 2 * p) * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    cdef double *z = buf
    cdef double *zn = buf + dim
    cdef double *tmp = buf + 2 * dim
    cdef double *zp = buf + 3 * dim
    cdef double *zhi = buf + 4 * dim
    cdef double *K = buf + 5 * dim  # 7 * dim
    s.u = buf + 12 * dim
    s.y = buf + 12 * dim + p

    cdef int i, st, status = 0, nsteps = 0, it
    cdef double t = t0, h = fmin(h0, max_step), t_new, err, sc, ev, fac
    cdef double g_old, lo, hi, mid, th, peak, xn
    cdef double[4] probes = [0.25, 0.5, 0.75, 1.0]
    rec_t = []
    rec_x = []
    try:
        for i in range(n):
            z[i] = vx0[i]
        for i in range(3):
            z[n + i] = vq0[i]
        peak = sqrt(xnorm2(n, z))
        rhs(&s, t, z, K)
        g_old = gform(&s, z)
        while t < t_end:
            h = fmin(h, fmin(max_step, t_end - t))
            if h <= 1e-14 * fmax(1.0, fabs(t)):
                status = 2
                break
            for i in range(dim):
                tmp[i] = z[i] + h * (A21 * K[i])
            rhs(&s, t + C2 * h, tmp, K + dim)
            for i in range(dim):
                tmp[i] = z[i] + h * (A31 * K[i] + A32 * K[dim + i])
            rhs(&s, t + C3 * h, tmp, K + 2 * dim)
            for i in range(dim):
                tmp[i] = z[i] + h * (A41 * K[i] + A42 * K[dim + i] + A43 * K[2 * dim + i])
            rhs(&s, t + C4 * h, tmp, K + 3 * dim)
            for i in range(dim):
                tmp[i] = z[i] + h * (A51 * K[i] + A52 * K[dim + i] + A53 * K[2 * dim + i] + A54 * K[3 * dim + i])
            rhs(&s, t + C5 * h, tmp, K + 4 * dim)
            for i in range(dim):
                tmp[i] = z[i] + h * (A61 * K[i] + A62 * K[dim + i] + A63 * K[2 * dim + i]
                                     + A64 * K[3 * dim + i] + A65 * K[4 * dim + i])
            rhs(&s, t + h, tmp, K + 5 * dim)
            for i in range(dim):
                zn[i] = z[i] + h * (B1 * K[i] + B3 * K[2 * dim + i] + B4 * K[3 * dim + i]
                                    + B5 * K[4 * dim + i] + B6 * K[5 * dim + i])
            if t_end - (t + h) > 1e-14 * fmax(1.0, fabs(t_end)):
                t_new = t + h
            else:
                t_new = t_end
            rhs(&s, t_new, zn, K + 6 * dim)
            err = 0.0
            for i in range(dim):
                ev = h * (E1 * K[i] + E3 * K[2 * dim + i] + E4 * K[3 * dim + i] + E5 * K[4 * dim + i]
                          + E6 * K[5 * dim + i] + E7 * K[6 * dim + i])
                sc = (atol_x if i < n else atol_q) + rtol * fmax(fabs(z[i]), fabs(zn[i]))
                err += (ev / sc) * (ev / sc)
            err = sqrt(err / dim)
            if err > 1.0:
                h *= fmax(MIN_FACTOR, SAFETY * pow(err, -0.2))
                continue
            nsteps += 1
            if g_old >= 0.0:
                lo = 0.0
                hi = -1.0
                for st in range(4):
                    th = probes[st]
                    if th == 1.0:
                        for i in range(dim):
                            zp[i] = zn[i]
                    else:
                        dense(dim, z, h, K, th, zp)
                    if gform(&s, zp) < 0.0:
                        hi = th
                        break
                    lo = th
                if hi > 0.0:
                    for i in range(dim):
                        zhi[i] = zp[i]
                    for it in range(200):
                        xn = xnorm2(n, zhi)
                        if fabs(gform(&s, zhi)) <= event_tol * (1.0 + xn) or hi - lo <= 1e-16:
                            break
                        mid = 0.5 * (lo + hi)
                        dense(dim, z, h, K, mid, zp)
                        if gform(&s, zp) < 0.0:
                            hi = mid
                            for i in range(dim):
                                zhi[i] = zp[i]
                        else:
                            lo = mid
                    for i in range(dim):
                        z[i] = zhi[i]
                    t = t + hi * h
                    peak = fmax(peak, sqrt(xnorm2(n, z)))
                    if record:
                        rec_t.append(t)
                        rec_x.append(np.array([z[i] for i in range(n)]))
                    status = 1
                    break
            for i in range(dim):
                z[i] = zn[i]
                K[i] = K[6 * dim + i]
            t = t_new
            g_old = gform(&s, z)
            peak = fmax(peak, sqrt(xnorm2(n, z)))
            if record:
                rec_t.append(t)
                rec_x.append(np.array([z[i] for i in range(n)]))
            if err == 0.0:
                fac = MAX_FACTOR
            else:
                fac = fmin(MAX_FACTOR, fmax(MIN_FACTOR, SAFETY * pow(err, -0.2)))
            h *= fac
        x_out = np.array([z[i] for i in range(n)])
        q_out = np.array([z[n + i] for i in range(3)])
    finally:
        free(buf)
    return status, t, x_out, q_out, h, nsteps, peak, rec_t, rec_x
