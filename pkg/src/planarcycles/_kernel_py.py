"""Pure-Python Dormand-Prince driver; same contract as the compiled ``_kernel``.

The tape is turned into nested closures over ``math`` functions once per
call, which keeps the per-stage cost to plain float arithmetic.
"""
import math

import numpy as np

from ._tape import (
    BV_DIVY,
    BV_LIENARD,
    BV_SCALED,
    BV_SPECIAL,
    GAUSS,
    NEG,
    POLY,
    PROD,
    QUOT,
    SHIFT,
    SUM,
)

NREC = 26

C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = -71 / 57600, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40


def _closure(nodes, params, children, node):
    kind, i0, i1, _ = (int(v) for v in nodes[node])
    if kind == POLY:
        coeffs = tuple(float(c) for c in params[i0:i0 + i1])[::-1]

        def f(s):
            acc = 0.0
            for c in coeffs:
                acc = acc * s + c
            return acc
        return f
    if kind == GAUSS:
        c, d, e = (float(v) for v in params[i0:i0 + 3])
        exp = math.exp
        return lambda s: c * exp(-d * s * s) + e
    if kind == NEG:
        inner = _closure(nodes, params, children, i0)
        return lambda s: -inner(s)
    if kind in (SUM, PROD):
        parts = [_closure(nodes, params, children, int(children[i0 + k])) for k in range(i1)]
        if kind == SUM:
            def f(s):
                acc = 0.0
                for p in parts:
                    acc = acc + p(s)
                return acc
        else:
            def f(s):
                acc = 1.0
                for p in parts:
                    acc = acc * p(s)
                return acc
        return f
    if kind == SHIFT:
        inner = _closure(nodes, params, children, i0)
        off = float(params[i1])
        return lambda s: inner(s - off)
    if kind == QUOT:
        num = _closure(nodes, params, children, i0)
        den = _closure(nodes, params, children, i1)
        return lambda s: num(s) / den(s)
    raise ValueError(f"bad function node kind {kind}")


def _bclosure(nodes, params, children, node):
    kind, i0, i1, _ = (int(v) for v in nodes[node])
    if kind == BV_SPECIAL:
        p1 = _closure(nodes, params, children, i0)
        p2 = _closure(nodes, params, children, i1)
        return lambda x, y: x * (x - p1(y)) * (x - p2(y))
    if kind == BV_LIENARD:
        f = _closure(nodes, params, children, i0)
        return lambda x, y: f(x)
    if kind == BV_SCALED:
        inner = _bclosure(nodes, params, children, i0)
        k = float(params[i1])
        return lambda x, y: k * inner(x, y)
    if kind == BV_DIVY:
        inner = _bclosure(nodes, params, children, i0)
        al = _closure(nodes, params, children, i1)
        return lambda x, y: inner(x, y) / al(y)
    raise ValueError(f"bad bivariate node kind {kind}")


def _make_rhs(nodes, params, children, phi, g, F):
    fphi = _closure(nodes, params, children, phi)
    fg = _closure(nodes, params, children, g)
    fF = _bclosure(nodes, params, children, F)

    def rhs(x, y):
        Fv = fF(x, y)
        gv = fg(x)
        return (fphi(y) - Fv, -gv, gv * Fv)
    return rhs


def eval_fn(nodes, params, children, node, s):
    return _closure(nodes, params, children, node)(s)


def eval_rhs(nodes, params, children, phi, g, F, x, y):
    return _make_rhs(nodes, params, children, phi, g, F)(x, y)


def _rms(e, y0, y1, rtol, atol):
    acc = 0.0
    for ei, a, b in zip(e, y0, y1):
        sc = atol + rtol * max(abs(a), abs(b))
        acc += (ei / sc) ** 2
    return math.sqrt(acc / 3.0)


def _initial_step(rhs, y0, f0, rtol, atol):
    sc = [atol + rtol * abs(v) for v in y0]
    d0 = math.sqrt(sum((v / s) ** 2 for v, s in zip(y0, sc)) / 3.0)
    d1 = math.sqrt(sum((v / s) ** 2 for v, s in zip(f0, sc)) / 3.0)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = [a + h0 * b for a, b in zip(y0, f0)]
    f1 = rhs(y1[0], y1[1])
    d2 = math.sqrt(sum(((b - a) / s) ** 2 for a, b, s in zip(f0, f1, sc)) / 3.0) / h0
    m = max(d1, d2)
    h1 = max(1e-6, h0 * 1e-3) if m <= 1e-15 else (0.01 / m) ** 0.2
    return min(100.0 * h0, h1)


def run_dopri(nodes, params, children, phi, g, F, t0, x0, y0, J0, rtol, atol, h0,
              max_step, max_time, max_steps, a, b, terminal):
    rhs = _make_rhs(nodes, params, children, phi, g, F)
    t = float(t0)
    t_end = t + max_time
    y = (float(x0), float(y0), float(J0))
    k1 = rhs(y[0], y[1])
    nfev = 1
    if h0 > 0.0:
        h = float(h0)
    else:
        h = _initial_step(rhs, y, k1, rtol, atol)
        nfev += 1
    h = min(h, max_step)
    rows = []
    status = 0

    while True:
        if t_end - t <= 1e-13 * (1.0 + abs(t_end)):
            status = 0
            break
        if len(rows) >= max_steps:
            status = 4
            break
        rejected = False
        while True:
            if h < 1e-14:
                status = 3
                break
            if t + h > t_end:
                h = t_end - t
            y1, y2, y3 = y
            a1, b1, c1 = k1
            k2 = rhs(y1 + h * A21 * a1, y2 + h * A21 * b1)
            a2, b2, c2 = k2
            k3 = rhs(y1 + h * (A31 * a1 + A32 * a2), y2 + h * (A31 * b1 + A32 * b2))
            a3, b3, c3 = k3
            k4 = rhs(y1 + h * (A41 * a1 + A42 * a2 + A43 * a3),
                     y2 + h * (A41 * b1 + A42 * b2 + A43 * b3))
            a4, b4, c4 = k4
            k5 = rhs(y1 + h * (A51 * a1 + A52 * a2 + A53 * a3 + A54 * a4),
                     y2 + h * (A51 * b1 + A52 * b2 + A53 * b3 + A54 * b4))
            a5, b5, c5 = k5
            k6 = rhs(y1 + h * (A61 * a1 + A62 * a2 + A63 * a3 + A64 * a4 + A65 * a5),
                     y2 + h * (A61 * b1 + A62 * b2 + A63 * b3 + A64 * b4 + A65 * b5))
            a6, b6, c6 = k6
            ynew = (
                y1 + h * (B1 * a1 + B3 * a3 + B4 * a4 + B5 * a5 + B6 * a6),
                y2 + h * (B1 * b1 + B3 * b3 + B4 * b4 + B5 * b5 + B6 * b6),
                y3 + h * (B1 * c1 + B3 * c3 + B4 * c4 + B5 * c5 + B6 * c6),
            )
            k7 = rhs(ynew[0], ynew[1])
            nfev += 6
            a7, b7, c7 = k7
            err = (
                h * (E1 * a1 + E3 * a3 + E4 * a4 + E5 * a5 + E6 * a6 + E7 * a7),
                h * (E1 * b1 + E3 * b3 + E4 * b4 + E5 * b5 + E6 * b6 + E7 * b7),
                h * (E1 * c1 + E3 * c3 + E4 * c4 + E5 * c5 + E6 * c6 + E7 * c7),
            )
            en = _rms(err, y, ynew, rtol, atol)
            if en != en:
                en = math.inf
            if en <= 1.0:
                factor = 10.0 if en == 0.0 else min(10.0, 0.9 * en ** -0.2)
                if rejected:
                    factor = min(factor, 1.0)
                hnew = h * factor
                break
            h *= max(0.2, 0.9 * en ** -0.2)
            rejected = True
        if status == 3:
            break
        if not (a < ynew[0] < b):
            status = 2
            break

        rows.append((t, h) + y + k1 + k2 + k3 + k4 + k5 + k6 + k7)

        if terminal == 1:
            hit = y[1] > 0.0 and ynew[1] <= 0.0 and ynew[0] > 0.0
        elif terminal == 2:
            hit = y[1] < 0.0 and ynew[1] >= 0.0 and ynew[0] < 0.0
        elif terminal == 3:
            hit = (y[1] > 0.0 and ynew[1] <= 0.0) or (y[1] < 0.0 and ynew[1] >= 0.0)
        else:
            hit = False

        t = t + h
        y = ynew
        k1 = k7
        h = min(hnew, max_step)
        if hit:
            status = 1
            break

    out = np.full((len(rows) + 1, NREC), np.nan)
    if rows:
        out[:-1] = np.array(rows, dtype=np.float64)
    out[-1, 0] = t
    out[-1, 2:5] = y
    return status, out, nfev
