"""Independent reference computations shared by the tests.

Nothing here goes through the package integrator: trajectories come from
scipy's DOP853, high-precision values from mpmath.
"""
import math

import mpmath
import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

ORACLE_RTOL = 1e-12
ORACLE_ATOL = 1e-14


def rhs(sys):
    def f(t, s):
        x, y = s
        return [float(sys.phi(y) - sys.F(x, y)), float(-sys.g(x))]
    return f


def _down_crossing(t, s):
    return s[1]


_down_crossing.direction = -1.0
_down_crossing.terminal = False


def return_map(sys, x0, rtol=ORACLE_RTOL, atol=ORACLE_ATOL, t_max=200.0):
    """``(P(x0), period)`` for downward crossings of the positive x-axis."""
    f = rhs(sys)
    # step off the section first so the start point is not reported as a crossing
    lead = 1e-3
    pre = solve_ivp(f, (0.0, lead), [x0, 0.0], method="DOP853", rtol=rtol, atol=atol)
    s1 = pre.y[:, -1]
    t0 = lead
    while t0 < t_max:
        sol = solve_ivp(f, (t0, t0 + 20.0), s1, method="DOP853", rtol=rtol, atol=atol,
                        events=_down_crossing)
        for te, se in zip(sol.t_events[0], sol.y_events[0]):
            if se[0] > 0:
                return float(se[0]), float(te)
        t0, s1 = sol.t[-1], sol.y[:, -1]
    raise RuntimeError("no return")


def displacement(sys, x0, **kw):
    return return_map(sys, x0, **kw)[0] - x0


def fixed_point(sys, lo, hi, **kw):
    return brentq(lambda x: displacement(sys, x, **kw), lo, hi, xtol=1e-13, rtol=1e-15)


def count_sign_changes(values, zero_tol=0.0):
    signs = [1 if v > 0 else -1 for v in values if abs(v) > zero_tol]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def gauss_mp(c, d, e, s):
    s = mpmath.mpf(s)
    return mpmath.mpf(c) * mpmath.exp(-mpmath.mpf(d) * s * s) + mpmath.mpf(e)


def central_diff(f, s, h=1e-6):
    return (f(s + h) - f(s - h)) / (2.0 * h)


def gauss_fixed(c, d, e):
    return lambda s: c * math.exp(-d * s * s) + e


def column_root_count(sys, x, ys):
    """Sign changes of ``phi(y) - F(x, y)`` restricted to the inner region of column ``x``."""
    psi = sys.psi1 if x > 0 else sys.psi2
    p = np.asarray(psi(ys), dtype=float) * np.ones_like(ys)
    inner = (p > x) if x > 0 else (p < x)
    v = np.asarray(sys.phi(ys) - sys.F(x, ys), dtype=float)[inner]
    s = np.sign(v)
    return int(np.sum(s[:-1] * s[1:] < 0) + np.sum(s == 0))
