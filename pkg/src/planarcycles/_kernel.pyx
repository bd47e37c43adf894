# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Dormand-Prince 5(4) driver for x' = phi(y) - F, y' = -g, J' = g F.

Walks the flat descriptor tape from ``_tape.py``.  Returns the accepted
steps as rows ``[t, h, x, y, J, k1x, k1y, k1J, ..., k7x, k7y, k7J]`` so the
caller can build the dense interpolant.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs, sqrt, pow, NAN, INFINITY

cnp.import_array()

cdef enum:
    NREC = 26
    POLY = 0
    GAUSS = 1
    NEG = 2
    SUM = 3
    PROD = 4
    SHIFT = 5
    QUOT = 6
    BV_SPECIAL = 10
    BV_LIENARD = 11
    BV_SCALED = 12
    BV_DIVY = 13

cdef struct TapeC:
    const int* nodes
    const double* params
    const int* children
    int phi
    int g
    int F


cdef double feval(const TapeC* tp, int node, double s) noexcept nogil:
    cdef int kind = tp.nodes[4 * node]
    cdef int i0 = tp.nodes[4 * node + 1]
    cdef int i1 = tp.nodes[4 * node + 2]
    cdef double acc
    cdef int k
    if kind == POLY:
        acc = 0.0
        k = i1 - 1
        while k >= 0:
            acc = acc * s + tp.params[i0 + k]
            k -= 1
        return acc
    elif kind == GAUSS:
        return tp.params[i0] * exp(-tp.params[i0 + 1] * s * s) + tp.params[i0 + 2]
    elif kind == NEG:
        return -feval(tp, i0, s)
    elif kind == SUM:
        acc = 0.0
        for k in range(i1):
            acc = acc + feval(tp, tp.children[i0 + k], s)
        return acc
    elif kind == PROD:
        acc = 1.0
        for k in range(i1):
            acc = acc * feval(tp, tp.children[i0 + k], s)
        return acc
    elif kind == SHIFT:
        return feval(tp, i0, s - tp.params[i1])
    elif kind == QUOT:
        return feval(tp, i0, s) / feval(tp, i1, s)
    return NAN


cdef double Feval(const TapeC* tp, int node, double x, double y) noexcept nogil:
    cdef int kind = tp.nodes[4 * node]
    cdef int i0 = tp.nodes[4 * node + 1]
    cdef int i1 = tp.nodes[4 * node + 2]
    if kind == BV_SPECIAL:
        return x * (x - feval(tp, i0, y)) * (x - feval(tp, i1, y))
    elif kind == BV_LIENARD:
        return feval(tp, i0, x)
    elif kind == BV_SCALED:
        return tp.params[i1] * Feval(tp, i0, x, y)
    elif kind == BV_DIVY:
        return Feval(tp, i0, x, y) / feval(tp, i1, y)
    return NAN


cdef inline void rhs(const TapeC* tp, double x, double y, double* out) noexcept nogil:
    cdef double Fv = Feval(tp, tp.F, x, y)
    cdef double gv = feval(tp, tp.g, x)
    out[0] = feval(tp, tp.phi, y) - Fv
    out[1] = -gv
    out[2] = gv * Fv


def eval_fn(int[:, ::1] nodes, double[::1] params, int[::1] children, int node, double s):
    cdef TapeC tp
    tp.nodes = &nodes[0, 0]
    tp.params = &params[0]
    tp.children = &children[0]
    return feval(&tp, node, s)


def eval_rhs(int[:, ::1] nodes, double[::1] params, int[::1] children,
             int phi, int g, int F, double x, double y):
    cdef TapeC tp
    cdef double out[3]
    tp.nodes = &nodes[0, 0]
    tp.params = &params[0]
    tp.children = &children[0]
    tp.phi = phi
    tp.g = g
    tp.F = F
    rhs(&tp, x, y, out)
    return out[0], out[1], out[2]


# Dormand-Prince coefficients
cdef double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9
cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784, B6 = 11.0 / 84
cdef double E1 = -71.0 / 57600, E3 = 71.0 / 16695, E4 = -71.0 / 1920, E5 = 17253.0 / 339200, E6 = -22.0 / 525, E7 = 1.0 / 40


cdef inline double scaled_rms(double* e, double* y0, double* y1, double rtol, double atol) noexcept nogil:
    cdef double acc = 0.0, sc, m
    cdef int i
    for i in range(3):
        m = fabs(y0[i])
        if fabs(y1[i]) > m:
            m = fabs(y1[i])
        sc = atol + rtol * m
        acc += (e[i] / sc) * (e[i] / sc)
    return sqrt(acc / 3.0)


cdef double initial_step(const TapeC* tp, double* y0, double* f0, double rtol, double atol) noexcept nogil:
    cdef double d0 = 0.0, d1 = 0.0, d2 = 0.0, h0, h1, sc, m
    cdef double y1[3]
    cdef double f1[3]
    cdef int i
    for i in range(3):
        sc = atol + rtol * fabs(y0[i])
        d0 += (y0[i] / sc) ** 2
        d1 += (f0[i] / sc) ** 2
    d0 = sqrt(d0 / 3.0)
    d1 = sqrt(d1 / 3.0)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    for i in range(3):
        y1[i] = y0[i] + h0 * f0[i]
    rhs(tp, y1[0], y1[1], f1)
    for i in range(3):
        sc = atol + rtol * fabs(y0[i])
        d2 += ((f1[i] - f0[i]) / sc) ** 2
    d2 = sqrt(d2 / 3.0) / h0
    m = d1 if d1 > d2 else d2
    if m <= 1e-15:
        h1 = h0 * 1e-3
        if h1 < 1e-6:
            h1 = 1e-6
    else:
        h1 = pow(0.01 / m, 0.2)
    return h1 if h1 < 100.0 * h0 else 100.0 * h0


def run_dopri(int[:, ::1] nodes, double[::1] params, int[::1] children,
              int phi, int g, int F,
              double t0, double x0, double y0, double J0,
              double rtol, double atol, double h0, double max_step,
              double max_time, long max_steps, double a, double b, int terminal):
    """Integrate from (t0, x0, y0, J0); see module docstring for the row layout.

    Returns ``(status, records, nfev)`` with status 0 end time reached,
    1 terminal event in last step, 2 left (a, b), 3 step underflow, 4 step budget.
    """
    cdef TapeC tp
    tp.nodes = &nodes[0, 0]
    tp.params = &params[0]
    tp.children = &children[0]
    tp.phi = phi
    tp.g = g
    tp.F = F

    cdef long cap = 1024, n = 0, nfev = 0
    buf = np.empty((cap, NREC), dtype=np.float64)
    cdef double[:, ::1] rec = buf

    cdef double y[3]
    cdef double ynew[3]
    cdef double ys[3]
    cdef double err[3]
    cdef double k[7][3]
    cdef double t = t0, t_end = t0 + max_time, h, hnew, en, factor
    cdef int i, j, status = 0
    cdef bint rejected, hit

    y[0] = x0
    y[1] = y0
    y[2] = J0
    rhs(&tp, y[0], y[1], k[0])
    nfev += 1
    if h0 > 0.0:
        h = h0
    else:
        h = initial_step(&tp, y, k[0], rtol, atol)
        nfev += 1
    if h > max_step:
        h = max_step

    while True:
        if t_end - t <= 1e-13 * (1.0 + fabs(t_end)):
            status = 0
            break
        if n >= max_steps:
            status = 4
            break
        rejected = False
        while True:
            if h < 1e-14:
                status = 3
                break
            if t + h > t_end:
                h = t_end - t
            for i in range(3):
                ys[i] = y[i] + h * A21 * k[0][i]
            rhs(&tp, ys[0], ys[1], k[1])
            for i in range(3):
                ys[i] = y[i] + h * (A31 * k[0][i] + A32 * k[1][i])
            rhs(&tp, ys[0], ys[1], k[2])
            for i in range(3):
                ys[i] = y[i] + h * (A41 * k[0][i] + A42 * k[1][i] + A43 * k[2][i])
            rhs(&tp, ys[0], ys[1], k[3])
            for i in range(3):
                ys[i] = y[i] + h * (A51 * k[0][i] + A52 * k[1][i] + A53 * k[2][i] + A54 * k[3][i])
            rhs(&tp, ys[0], ys[1], k[4])
            for i in range(3):
                ys[i] = y[i] + h * (A61 * k[0][i] + A62 * k[1][i] + A63 * k[2][i]
                                    + A64 * k[3][i] + A65 * k[4][i])
            rhs(&tp, ys[0], ys[1], k[5])
            for i in range(3):
                ynew[i] = y[i] + h * (B1 * k[0][i] + B3 * k[2][i] + B4 * k[3][i]
                                      + B5 * k[4][i] + B6 * k[5][i])
            rhs(&tp, ynew[0], ynew[1], k[6])
            nfev += 6
            for i in range(3):
                err[i] = h * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i]
                              + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i])
            en = scaled_rms(err, y, ynew, rtol, atol)
            if en != en:
                en = INFINITY
            if en <= 1.0:
                if en == 0.0:
                    factor = 10.0
                else:
                    factor = 0.9 * pow(en, -0.2)
                    if factor > 10.0:
                        factor = 10.0
                if rejected and factor > 1.0:
                    factor = 1.0
                hnew = h * factor
                break
            factor = 0.9 * pow(en, -0.2)
            if factor < 0.2:
                factor = 0.2
            h = h * factor
            rejected = True
        if status == 3:
            break
        if not (ynew[0] > a and ynew[0] < b):
            status = 2
            break

        if n == cap:
            cap *= 2
            buf = np.resize(buf, (cap, NREC))
            rec = buf
        rec[n, 0] = t
        rec[n, 1] = h
        rec[n, 2] = y[0]
        rec[n, 3] = y[1]
        rec[n, 4] = y[2]
        for j in range(7):
            for i in range(3):
                rec[n, 5 + 3 * j + i] = k[j][i]
        n += 1

        hit = False
        if terminal == 1:
            hit = y[1] > 0.0 and ynew[1] <= 0.0 and ynew[0] > 0.0
        elif terminal == 2:
            hit = y[1] < 0.0 and ynew[1] >= 0.0 and ynew[0] < 0.0
        elif terminal == 3:
            hit = (y[1] > 0.0 and ynew[1] <= 0.0) or (y[1] < 0.0 and ynew[1] >= 0.0)

        t = t + h
        for i in range(3):
            y[i] = ynew[i]
            k[0][i] = k[6][i]
        h = hnew
        if h > max_step:
            h = max_step
        if hit:
            status = 1
            break

    out = np.empty((n + 1, NREC), dtype=np.float64)
    out[:n] = buf[:n]
    # final row carries the end state only
    out[n, :] = np.nan
    out[n, 0] = t
    out[n, 2] = y[0]
    out[n, 3] = y[1]
    out[n, 4] = y[2]
    return status, out, nfev
