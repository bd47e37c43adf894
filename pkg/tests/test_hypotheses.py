import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import column_root_count, gauss_mp
from planarcycles.errors import MissingCurves, NoBracket, NotSpecialForm
from planarcycles.examples import Section3Params, build_section3, random_section3_params
from planarcycles.funcdesc import GaussBump, LienardF, Negated, PlanarSystem, Polynomial, Scaled, SpecialForm
from planarcycles.hypotheses import (
    A_j,
    AnalysisWindow,
    HYPOTHESIS_KEYS,
    RegionTag,
    ReportOptions,
    TOL_MONO,
    TOL_SIGN,
    check_B,
    check_C,
    check_D,
    check_E,
    check_F,
    check_Fprime,
    check_zeta_signs,
    classify_region,
    fprime_rate,
    full_report,
    region_codes,
    solve_zeta,
    zeta_residual,
)

ID = Polynomial((0.0, 1.0))
SQ3 = math.sqrt(3.0)
W = AnalysisWindow()
SMALL_W = AnalysisWindow(grid_nx=64, grid_ny=64)

positive = st.floats(0.05, 1.0)


def special(c1, d1, e1, c2, d2, e2):
    return PlanarSystem(ID, ID, SpecialForm(GaussBump(c1, d1, e1), Negated(GaussBump(c2, d2, e2))))


def closed_form_A(sys, j, y):
    p1, p2 = sys.psi1(y), sys.psi2(y)
    psi, other, dpsi = (p1, p2, sys.dpsi1) if j == 1 else (p2, p1, sys.dpsi2)
    return psi * (psi - other) * (sys.phi(y) + sys.g(psi) * dpsi(y))


class TestWindow:
    def test_rejects_tiny_grid(self):
        with pytest.raises(ValueError):
            AnalysisWindow(grid_nx=8)

    def test_must_fit_domain(self):
        s = PlanarSystem(ID, ID, LienardF(Polynomial((0.0,))), domain=(-1.0, 1.0))
        with pytest.raises(ValueError):
            full_report(s, W)


class TestRegions:
    def test_inner_right(self, fig2):
        assert classify_region(fig2, 0.5, 0.0) is RegionTag.D1_LT

    def test_outer_right(self, fig2):
        assert classify_region(fig2, 1.5, 0.0) is RegionTag.D1_GT

    def test_on_curve_is_off_strip(self, fig2):
        y = 0.37
        assert classify_region(fig2, float(fig2.psi1(y)), y) is RegionTag.OFF
        assert classify_region(fig2, 0.0, y) is RegionTag.OFF

    @settings(max_examples=20, deadline=None)
    @given(c1=positive, d1=positive, e1=positive, c2=positive, d2=positive, e2=positive)
    def test_partition_respects_ordering(self, c1, d1, e1, c2, d2, e2):
        s = special(c1, d1, e1, c2, d2, e2)
        X, Y = SMALL_W.mesh()
        codes = region_codes(s, X, Y)
        assert set(np.unique(codes)) <= {0, 1, 2, 3, 4}
        p1, p2 = s.psi1(Y), s.psi2(Y)
        assert np.all(p2 < 0) and np.all(p1 > 0)
        assert np.all(X[codes == 0] > p1[codes == 0])
        assert np.all((X[codes == 1] > 0) & (X[codes == 1] < p1[codes == 1]))
        assert np.all((X[codes == 2] < 0) & (X[codes == 2] > p2[codes == 2]))
        assert np.all(X[codes == 3] < p2[codes == 3])

    def test_needs_curves(self):
        s = PlanarSystem(ID, ID, LienardF(Polynomial((0.0, -1.0, 0.0, 1.0))))
        with pytest.raises(MissingCurves):
            classify_region(s, 0.5, 0.0)


class TestB:
    def test_figure_passes(self, fig2):
        out = check_B(fig2, W)
        assert all(out[k].passed for k in ("B0", "B1", "B2", "B3"))

    def test_negative_curve_fails_at_origin(self):
        s = PlanarSystem(ID, ID, SpecialForm(GaussBump(-1.0, 1.0, 0.5), Negated(GaussBump(0.25, 1.0, 0.75))))
        e = check_B(s, W)["B1"]
        assert e.verdict == "fail"
        assert any(w["y"] == 0.0 for w in e.witnesses)

    def test_special_form_zero_residual(self, fig2):
        e = check_B(fig2, W)["B3"]
        assert e.passed and not e.witnesses
        ys = W.ys()
        assert np.all(fig2.F(fig2.psi1(ys), ys) == 0.0)

    def test_missing_curves_fail(self):
        s = PlanarSystem(ID, ID, LienardF(Polynomial((0.0, -1.0, 0.0, 1.0))))
        out = check_B(s, W)
        assert out["B0"].passed
        assert [out[k].verdict for k in ("B1", "B2", "B3")] == ["fail"] * 3


class TestC:
    def test_identity_c1(self, fig2):
        assert check_C(fig2, W)["C1"].passed

    def test_figure_c2(self, fig2):
        out = check_C(fig2, W)
        assert out["C2"].passed and out["C2'"].verdict == "skipped"

    def test_zero_damping_fails_c2(self, harmonic):
        assert check_C(harmonic, W)["C2"].verdict == "fail"

    def test_zero_damping_fails_weakened_too(self, harmonic):
        out = check_C(harmonic, W, weakened=True)
        assert out["C2'"].verdict == "fail"
        assert out["C2"].verdict == "skipped"

    def test_weakened_passes_figure(self, fig2):
        assert check_C(fig2, W, weakened=True)["C2'"].passed


class TestD:
    def test_figure_passes(self, fig2):
        out = check_D(fig2, W)
        assert out["D1"].passed and out["D2"].passed

    def test_y_independent_damping_fails(self):
        # F = 0.1 > 0 inside: F/y decreases for y > 0
        s = PlanarSystem(ID, ID, LienardF(Polynomial((0.1,))), psi1=Polynomial((1.0,)), psi2=Polynomial((-1.0,)))
        e = check_D(s, W)["D1"]
        assert e.verdict == "fail"
        w = e.witnesses[0]
        ys = W.ys()
        k = int(np.argmin(np.abs(ys - w["y"])))
        prev, cur = 0.1 / ys[k - 1], 0.1 / ys[k]
        assert not cur - prev > TOL_MONO

    def test_column_outside_region_contributes_nothing(self):
        # columns with x >= psi1 never enter D1_lt
        s = PlanarSystem(ID, ID, SpecialForm(Polynomial((0.5,)), Polynomial((-0.5,))))
        w = AnalysisWindow((-2.0, 2.0), (-2.0, 2.0), 256, 256)
        X, Y = w.mesh()
        reg = region_codes(s, X, Y)
        assert not np.any(reg[:, X[0] >= 0.5] == 1)
        n_inner_cols = int(np.sum((X[0] > 0) & (X[0] < 0.5)))
        assert check_D(s, w)["D1"].samples == n_inner_cols * (w.grid_ny - 2)


class TestE:
    def test_figure_passes(self, fig2):
        assert check_E(fig2, W)["E"].passed

    def test_constant_curves_positive_outside(self, vdp):
        assert vdp.F(2.0, 0.0) == pytest.approx(2.0, abs=1e-14)
        assert classify_region(vdp, 2.0, 0.0) is RegionTag.D1_GT
        assert check_E(vdp, AnalysisWindow((-3, 3), (-3, 3)))["E"].passed

    def test_sign_flip_fails(self, fig2):
        s = PlanarSystem(ID, ID, Scaled(fig2.F, -1.0), psi1=fig2.psi1, psi2=fig2.psi2)
        e = check_E(s, W)["E"]
        assert e.verdict == "fail"
        w = e.witnesses[0]
        assert classify_region(s, w["x"], w["y"]) is RegionTag.D1_GT
        assert s.F(w["x"], w["y"]) <= TOL_SIGN


class TestAj:
    def test_vanishes_at_zero(self, fig2):
        assert A_j(fig2, 1, 0.0) == 0.0
        assert A_j(fig2, 2, 0.0) == 0.0

    def test_figure_value_at_one(self, fig2):
        with mpmath.workdps(50):
            y = mpmath.mpf(1)
            p1 = gauss_mp(0.5, 0.5, 0.5, y)
            p2 = -gauss_mp(0.25, 1, 0.75, y)
            dp1 = -2 * mpmath.mpf(0.5) * mpmath.mpf(0.5) * y * mpmath.exp(-mpmath.mpf(0.5) * y * y)
            ref = float(p1 * (p1 - p2) * (y + p1 * dp1))
        val = A_j(fig2, 1, 1.0)
        assert val == pytest.approx(ref, abs=1e-12)
        assert abs(val - closed_form_A(fig2, 1, 1.0)) <= 1e-8
        assert val == pytest.approx(0.99962, abs=1e-5)

    def test_constant_curves_linear(self, vdp):
        # psi1 (psi1 - psi2) phi(y) = sqrt3 * 2 sqrt3 * y = 6 y
        ys = np.linspace(-3, 3, 61)
        assert np.allclose(A_j(vdp, 1, ys), SQ3 * (2 * SQ3) * ys, rtol=0, atol=1e-12)
        assert np.allclose(A_j(vdp, 1, ys), 6.0 * ys, rtol=0, atol=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(c1=positive, d1=positive, e1=positive, c2=positive, d2=positive, e2=positive)
    def test_closed_form_identity(self, c1, d1, e1, c2, d2, e2):
        s = special(c1, d1, e1, c2, d2, e2)
        ys = np.linspace(-3, 3, 101)
        for j in (1, 2):
            a = A_j(s, j, ys)
            assert np.all(np.abs(a - closed_form_A(s, j, ys)) <= 1e-9 * (1 + np.abs(a)))


class TestF:
    def test_figure_passes(self, fig2):
        assert check_F(fig2, W)["F"].passed
        assert check_Fprime(fig2, W)["F'"].passed

    def test_constant_curves_pass(self, vdp):
        assert check_F(vdp, W)["F"].passed
        assert check_Fprime(vdp, W)["F'"].passed
        assert fprime_rate(vdp, 1, 0.7) == 0.7

    def test_steep_bump_fails_with_witness(self):
        s = special(2.0, 2.0, 0.1, 1.0, 1.0, 1.1)
        e = check_Fprime(s, W)["F'"]
        assert e.verdict == "fail"
        for w in e.witnesses:
            j = 1 if w["x"] > 0 else 2
            assert not fprime_rate(s, j, w["y"]) * w["y"] > TOL_SIGN * abs(w["y"])
        assert check_F(s, W)["F"].verdict == "fail"

    def test_requires_special_form(self, harmonic):
        with pytest.raises(NotSpecialForm):
            check_Fprime(harmonic, W)

    @settings(max_examples=20, deadline=None)
    @given(c1=positive, d1=st.floats(0.05, 4.0), e1=positive, c2=positive, d2=st.floats(0.05, 4.0), e2=positive)
    def test_F_and_Fprime_agree(self, c1, d1, e1, c2, d2, e2):
        s = special(c1, d1, e1, c2, d2, e2)
        assert check_F(s, SMALL_W)["F"].verdict == check_Fprime(s, SMALL_W)["F'"].verdict


class TestZeta:
    def test_vanishes_near_origin(self, fig2):
        assert abs(solve_zeta(fig2, 1e-4)) < 0.05

    def test_negative_on_right(self, fig2):
        assert solve_zeta(fig2, 0.5) < 0

    def test_positive_on_left(self, fig2):
        assert solve_zeta(fig2, -0.5) > 0

    def test_residual_and_uniqueness(self, fig2):
        ys = np.linspace(-2, 2, 10_000)
        for x in (-0.9, -0.5, -0.1, 0.1, 0.5, 0.9):
            z = solve_zeta(fig2, x)
            assert abs(zeta_residual(fig2, x, z)) <= 1e-10
            assert column_root_count(fig2, x, ys) == 1

    def test_outside_interval(self, fig2):
        with pytest.raises(ValueError):
            solve_zeta(fig2, 1.5)

    def test_no_bracket(self):
        # the root of y - 5 lies beyond both scanned spans
        s = PlanarSystem(ID, ID, LienardF(Polynomial((5.0,))), psi1=Polynomial((1.0,)), psi2=Polynomial((-1.0,)))
        with pytest.raises(NoBracket):
            solve_zeta(s, 0.5, AnalysisWindow((-2, 2), (-1, 1)))

    def test_sign_pattern(self, fig2):
        e = check_zeta_signs(fig2)
        assert e.passed, e.witnesses


class TestReport:
    def test_figure_all_pass(self, fig2):
        rep = full_report(fig2, W)
        assert rep.overall == "pass"
        assert [e["hypothesis"] for e in rep.to_json()["entries"]] == list(HYPOTHESIS_KEYS)

    def test_harmonic_fails_c2(self, harmonic):
        rep = full_report(harmonic, W)
        assert rep.overall == "fail"
        assert rep["C2"].verdict == "fail"

    def test_steep_first_curve_fails(self):
        s = build_section3(Section3Params(0.5, 2.0, 0.5, 0.25, 1.0, 0.75))
        rep = full_report(s, W)
        assert rep["F'"].verdict == "fail"

    def test_weakened_option(self, fig2):
        rep = full_report(fig2, W, ReportOptions(weakened=True))
        assert rep["C2'"].passed and rep["C2"].verdict == "skipped"

    def test_witness_cap(self):
        s = PlanarSystem(ID, ID, LienardF(Polynomial((0.1,))), psi1=Polynomial((1.0,)), psi2=Polynomial((-1.0,)))
        e = check_D(s, W)["D1"]
        assert len(e.witnesses) == 10 and "violations" in e.note

    def test_admissible_family_passes(self):
        rng = np.random.default_rng(20240917)
        for _ in range(12):
            p = random_section3_params(rng)
            r = p.r
            rep = full_report(build_section3(p), AnalysisWindow((-2 * r, 2 * r), (-2 * r, 2 * r)))
            assert rep.passed, (p, rep.failures())
