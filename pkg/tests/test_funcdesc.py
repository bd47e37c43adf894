import json
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import central_diff, gauss_mp
from planarcycles.errors import DomainExceeded, NonPositiveFactor
from planarcycles.funcdesc import (
    DividedBy,
    GaussBump,
    LienardF,
    Negated,
    PlanarSystem,
    Polynomial,
    Product,
    Quotient,
    Scaled,
    ShiftedArg,
    SpecialForm,
    Sum,
    descriptor_from_json,
    descriptor_to_json,
    energy_derivative,
    eval_F,
    hamiltonian,
    partials,
    reparametrize,
    system_from_json,
    system_to_json,
    vector_field,
)

ID = Polynomial((0.0, 1.0))
SQ3 = math.sqrt(3.0)

small = st.floats(-2.0, 2.0, allow_nan=False)
positive = st.floats(0.05, 2.0)


def leaves():
    poly = st.lists(small, min_size=1, max_size=4).map(lambda c: Polynomial(tuple(c)))
    bump = st.tuples(small, positive, small).map(lambda t: GaussBump(*t))
    return poly | bump


descriptors = st.recursive(
    leaves(),
    lambda inner: (
        inner.map(Negated)
        | st.lists(inner, min_size=1, max_size=3).map(lambda t: Sum(tuple(t)))
        | st.lists(inner, min_size=1, max_size=2).map(lambda t: Product(tuple(t)))
        | st.tuples(inner, small).map(lambda t: ShiftedArg(*t))
    ),
    max_leaves=5,
)


class TestEvaluate:
    def test_identity_polynomial(self):
        assert ID(3.0) == 3.0

    def test_bump_at_zero_is_c_plus_e(self):
        assert GaussBump(0.5, 0.5, 0.5)(0.0) == 1.0

    def test_bump_against_high_precision(self):
        with mpmath.workdps(40):
            ref = gauss_mp(0.25, 1.0, 0.75, 1)
        assert GaussBump(0.25, 1.0, 0.75)(1.0) == pytest.approx(float(ref), abs=1e-15)
        assert float(ref) == pytest.approx(0.841970, abs=1e-6)

    def test_array_and_scalar_agree(self):
        g = GaussBump(0.5, 0.5, 0.5)
        s = np.linspace(-3, 3, 11)
        assert np.allclose(g(s), [g(float(v)) for v in s], rtol=0, atol=1e-15)


class TestDerivative:
    def test_polynomial(self):
        assert Polynomial((0.0, 0.0, 1.0)).derivative() == Polynomial((0.0, 2.0))

    def test_bump_even_has_zero_slope_at_zero(self):
        assert GaussBump(0.7, 1.3, 0.2).derivative()(0.0) == 0.0

    def test_bump_closed_form(self):
        c, d, s = 0.7, 1.3, 0.4
        assert GaussBump(c, d, 0.2).derivative()(s) == pytest.approx(-2 * c * d * s * math.exp(-d * s * s), rel=1e-14)

    def test_figure_curve_slope_at_one(self):
        psi1 = GaussBump(0.5, 0.5, 0.5)
        val = psi1.derivative()(1.0)
        assert val == pytest.approx(-0.5 * math.exp(-0.5), abs=1e-15)
        assert abs(val - central_diff(psi1, 1.0)) <= 1e-8
        assert val == pytest.approx(-0.303265, abs=1e-6)

    @settings(max_examples=60, deadline=None)
    @given(fd=descriptors, s=st.floats(-1.5, 1.5))
    def test_matches_central_difference(self, fd, s):
        d = fd.derivative()(s)
        fdiff = central_diff(fd, s)
        assert abs(d - fdiff) <= 1e-6 * (1 + abs(d))

    @settings(max_examples=40, deadline=None)
    @given(fd=descriptors, s=st.floats(-1.5, 1.5))
    def test_antiderivative_differentiates_back(self, fd, s):
        a = fd.antiderivative()
        if a is None:
            return
        assert abs(a(0.0)) <= 1e-12
        assert abs(central_diff(a, s) - fd(s)) <= 1e-6 * (1 + abs(fd(s)))

    def test_quotient_derivative(self):
        q = Quotient(ID, Polynomial((1.0, 0.0, 1.0)))
        for s in (-1.0, 0.3, 2.0):
            assert abs(q.derivative()(s) - central_diff(q, s)) <= 1e-8


class TestBivariate:
    def test_constant_curves_value(self):
        F = SpecialForm(Polynomial((SQ3,)), Polynomial((-SQ3,)))
        assert eval_F(F, 1.0, 0.0) == pytest.approx(-2.0, abs=1e-15)

    def test_zero_on_curves_of_figure(self, fig2):
        assert fig2.F(1.0, 0.0) == 0.0

    @settings(max_examples=50, deadline=None)
    @given(c1=positive, d1=positive, e1=positive, c2=positive, d2=positive, e2=positive, y=small)
    def test_vanishes_on_vertical_axis(self, c1, d1, e1, c2, d2, e2, y):
        F = SpecialForm(GaussBump(c1, d1, e1), Negated(GaussBump(c2, d2, e2)))
        assert eval_F(F, 0.0, y) == 0.0

    @pytest.mark.parametrize("F", [
        SpecialForm(GaussBump(0.5, 0.5, 0.5), Negated(GaussBump(0.25, 1.0, 0.75))),
        LienardF(Polynomial((0.0, -3.0, 0.0, 1.0))),
        Scaled(SpecialForm(GaussBump(0.5, 0.5, 0.5), Polynomial((-1.0,))), -2.0),
        DividedBy(LienardF(Polynomial((0.0, 1.0, 0.0, 1.0))), Polynomial((1.0, 0.0, 1.0))),
    ])
    def test_partials_match_finite_differences(self, F):
        for x, y in ((0.3, -0.7), (1.4, 0.2), (-1.1, 1.3)):
            fx, fy = partials(F, x, y)
            assert abs(fx - central_diff(lambda s: F(s, y), x)) <= 1e-7
            assert abs(fy - central_diff(lambda s: F(x, s), y)) <= 1e-7


class TestSystem:
    def test_harmonic_field(self, harmonic):
        assert vector_field(harmonic, 1.0, 0.0) == (0.0, -1.0)

    def test_origin_is_singular(self, fig2):
        assert vector_field(fig2, 0.0, 0.0) == (0.0, 0.0)

    def test_figure_field_on_curve(self, fig2):
        u, v = vector_field(fig2, 1.0, 0.0)
        assert (u, v) == (0.0, -1.0)

    def test_domain_must_straddle_zero(self):
        with pytest.raises(ValueError):
            PlanarSystem(ID, ID, LienardF(Polynomial((0.0,))), domain=(0.5, 2.0))

    def test_domain_is_enforced(self):
        s = PlanarSystem(ID, ID, LienardF(Polynomial((0.0,))), domain=(-1.0, 1.0))
        with pytest.raises(DomainExceeded):
            vector_field(s, 1.5, 0.0)

    def test_curves_taken_from_special_form(self, fig2):
        assert fig2.psi1 == GaussBump(0.5, 0.5, 0.5)
        with pytest.raises(ValueError):
            PlanarSystem(ID, ID, fig2.F, psi1=Polynomial((1.0,)))


class TestEnergy:
    def test_hamiltonian_identity_case(self, harmonic):
        assert hamiltonian(harmonic, 1.0, 1.0) == pytest.approx(1.0, abs=1e-15)

    def test_rate_zero_without_damping(self, harmonic):
        assert energy_derivative(harmonic, 0.7, -1.2) == 0.0

    def test_rate_cubic(self):
        s = PlanarSystem(ID, ID, LienardF(Polynomial((0.0, -3.0, 0.0, 1.0))))
        assert energy_derivative(s, 1.0, 0.0) == 2.0

    def test_quadrature_primitive(self):
        # phi has no closed-form primitive, so Phi goes through adaptive quadrature
        phi = Quotient(ID, Polynomial((1.0, 0.0, 1.0)))
        s = PlanarSystem(phi, ID, LienardF(Polynomial((0.0,))))
        assert hamiltonian(s, 0.0, 2.0) == pytest.approx(0.5 * math.log(5.0), abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(x=st.floats(-1.8, 1.8), y=st.floats(-1.8, 1.8))
    def test_rate_is_time_derivative_of_H(self, fig2, x, y):
        # dH/dt along the field from a small symmetric Euler step
        h = 1e-5
        u, v = vector_field(fig2, x, y)
        fwd = hamiltonian(fig2, x + h * u, y + h * v)
        bwd = hamiltonian(fig2, x - h * u, y - h * v)
        rate = (fwd - bwd) / (2 * h)
        assert abs(rate - energy_derivative(fig2, x, y)) <= 1e-6 * (1 + abs(rate))


class TestReparametrize:
    @settings(max_examples=30, deadline=None)
    @given(x=small, y=small)
    def test_unit_factors_are_identity(self, fig2, x, y):
        one = Polynomial((1.0,))
        r = reparametrize(one, one, fig2.phi, fig2.g, fig2.F, n_samples=200)
        assert vector_field(r, x, y) == pytest.approx(vector_field(fig2, x, y), abs=0, rel=0)

    def test_constant_alpha_halves_phi(self, fig2):
        r = reparametrize(Polynomial((2.0,)), Polynomial((1.0,)), ID, ID, fig2.F, n_samples=100)
        assert r.phi(1.0) == 0.5

    def test_quadratic_alpha(self, fig2):
        r = reparametrize(Polynomial((1.0, 0.0, 1.0)), Polynomial((1.0,)), ID, ID, fig2.F, n_samples=100)
        assert r.phi(1.0) == 0.5

    def test_nonpositive_factor_rejected(self, fig2):
        with pytest.raises(NonPositiveFactor) as info:
            reparametrize(ID, Polynomial((1.0,)), ID, ID, fig2.F, n_samples=101)
        assert info.value.which == "alpha"
        assert info.value.value <= 0


class TestJson:
    @settings(max_examples=50, deadline=None)
    @given(fd=descriptors)
    def test_descriptor_round_trip(self, fd):
        back = descriptor_from_json(json.loads(json.dumps(descriptor_to_json(fd))))
        assert back == fd

    def test_system_round_trip(self, fig2):
        text = json.dumps(system_to_json(fig2))
        back = system_from_json(json.loads(text))
        assert back == fig2
        assert json.loads(text)["domain"] == [None, None]

    def test_bounded_domain_round_trip(self):
        s = PlanarSystem(ID, ID, LienardF(Polynomial((0.0,))), domain=(-2.0, 3.0))
        assert system_from_json(system_to_json(s)).domain == (-2.0, 3.0)

    @pytest.mark.parametrize("obj", [
        {},
        {"phi": {"kind": "polynomial", "coeffs": [0, 1]}},
        {"phi": {"kind": "nope"}, "g": {"kind": "polynomial", "coeffs": [0, 1]},
         "F": {"kind": "lienard", "f": {"kind": "polynomial", "coeffs": [0]}}},
        [1, 2],
    ])
    def test_malformed_rejected(self, obj):
        with pytest.raises(ValueError):
            system_from_json(obj)
