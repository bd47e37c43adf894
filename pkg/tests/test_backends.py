import os
import subprocess
import sys

import numpy as np
import pytest

from planarcycles import _kernel_py
from planarcycles._tape import compile_system
from planarcycles.examples import FIGURE2, build_section3
from planarcycles.funcdesc import DividedBy, PlanarSystem, Polynomial, Quotient, ShiftedArg, SpecialForm, Sum

try:
    from planarcycles import _kernel as _kernel_c
except ImportError:  # extension not built
    _kernel_c = None

needs_ext = pytest.mark.skipif(_kernel_c is None, reason="compiled kernel not built")


def _args(sys_, x0=1.3, max_time=20.0, terminal=0):
    tape = compile_system(sys_)
    a, b = sys_.domain
    return (tape.nodes, tape.params, tape.children, tape.phi, tape.g, tape.F,
            0.0, x0, 0.0, 0.0, 1e-10, 1e-12, 0.0, np.inf, max_time, 100000, a, b, terminal)


def _mixed_system():
    # exercises every node kind the tape supports
    psi1 = Sum((ShiftedArg(Polynomial((1.0, 0.0, -0.01)), 0.2), Polynomial((0.0,))))
    psi2 = Quotient(Polynomial((-1.0,)), Polynomial((1.0, 0.0, 0.05)))
    phi = Quotient(Polynomial((0.0, 1.0)), Polynomial((1.0, 0.0, 0.1)))
    return PlanarSystem(phi, Polynomial((0.0, 1.0)), DividedBy(SpecialForm(psi1, psi2), Polynomial((2.0,))))


SYSTEMS = [build_section3(FIGURE2), _mixed_system()]


def test_fallback_matches_descriptors():
    for s in SYSTEMS:
        tape = compile_system(s)
        for x, y in ((0.3, -0.4), (1.2, 0.9), (-0.8, 1.7)):
            u, v, j = _kernel_py.eval_rhs(tape.nodes, tape.params, tape.children, tape.phi, tape.g, tape.F, x, y)
            assert u == pytest.approx(s.phi(y) - s.F(x, y), rel=1e-14, abs=1e-15)
            assert v == pytest.approx(-s.g(x), rel=1e-14)
            assert j == pytest.approx(s.g(x) * s.F(x, y), rel=1e-14, abs=1e-15)


@needs_ext
@pytest.mark.parametrize("s", SYSTEMS)
def test_compiled_matches_fallback_pointwise(s):
    tape = compile_system(s)
    for x, y in ((0.3, -0.4), (1.2, 0.9), (-0.8, 1.7)):
        a = _kernel_c.eval_rhs(tape.nodes, tape.params, tape.children, tape.phi, tape.g, tape.F, x, y)
        b = _kernel_py.eval_rhs(tape.nodes, tape.params, tape.children, tape.phi, tape.g, tape.F, x, y)
        assert np.allclose(a, b, rtol=1e-14, atol=1e-15)


@needs_ext
@pytest.mark.parametrize("s", SYSTEMS)
@pytest.mark.parametrize("terminal", [0, 1])
def test_compiled_matches_fallback_run(s, terminal):
    sa, ra, na = _kernel_c.run_dopri(*_args(s, terminal=terminal))
    sb, rb, nb = _kernel_py.run_dopri(*_args(s, terminal=terminal))
    assert sa == sb and na == nb
    assert ra.shape == rb.shape
    # identical step sequence; round-off may differ by evaluation order
    assert np.allclose(ra[:3], rb[:3], rtol=1e-13, atol=1e-15, equal_nan=True)
    assert np.allclose(ra, rb, rtol=1e-8, atol=1e-9, equal_nan=True)


def test_final_row_holds_end_state():
    status, rec, _ = _kernel_py.run_dopri(*_args(SYSTEMS[0], max_time=3.0))
    assert status == 0
    assert rec[-1, 0] == pytest.approx(3.0)
    assert np.all(np.isnan(rec[-1, 5:]))


def test_env_forces_fallback():
    env = dict(os.environ, PLANARCYCLES_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", "import planarcycles as p; print(p.backend_name())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@needs_ext
def test_default_prefers_compiled():
    env = {k: v for k, v in os.environ.items() if k != "PLANARCYCLES_BACKEND"}
    out = subprocess.run([sys.executable, "-c", "import planarcycles as p; print(p.backend_name())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "cython"
