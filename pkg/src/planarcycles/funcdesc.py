"""Closed-form scalar functions and the planar system model.

Every scalar function used by a system (phi, g, the curves psi1/psi2 and the
building blocks of F) is a small immutable expression tree.  Trees evaluate
on floats or numpy arrays and differentiate exactly, so hypothesis checks
never need finite differences.

The system studied is::

    x' = phi(y) - F(x, y)
    y' = -g(x)

on the strip ``(a, b) x R``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from .errors import DomainExceeded, NonPositiveFactor

__all__ = [
    "FunctionDescriptor",
    "Polynomial",
    "GaussBump",
    "Negated",
    "Sum",
    "Product",
    "ShiftedArg",
    "Quotient",
    "BivariateDescriptor",
    "SpecialForm",
    "LienardF",
    "Scaled",
    "DividedBy",
    "PlanarSystem",
    "EnergyPair",
    "evaluate",
    "derivative",
    "eval_F",
    "partials",
    "vector_field",
    "reparametrize",
    "hamiltonian",
    "energy_derivative",
    "descriptor_to_json",
    "descriptor_from_json",
    "bivariate_to_json",
    "bivariate_from_json",
    "system_to_json",
    "system_from_json",
]


# ---------------------------------------------------------------------------
# univariate descriptors
# ---------------------------------------------------------------------------


class FunctionDescriptor:
    """Base class for closed-form functions of one real variable."""

    def __call__(self, s):
        raise NotImplementedError

    def derivative(self) -> "FunctionDescriptor":
        raise NotImplementedError

    def antiderivative(self) -> Optional["FunctionDescriptor"]:
        """Closed-form primitive vanishing at 0, or None when not available."""
        return None

    def __neg__(self):
        return Negated(self)


@dataclass(frozen=True)
class Polynomial(FunctionDescriptor):
    """``sum(coeffs[k] * s**k)``, coefficients in ascending degree."""

    coeffs: tuple = (0.0,)

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs) or (0.0,))

    def __call__(self, s):
        acc = 0.0 * s
        for c in reversed(self.coeffs):
            acc = acc * s + c
        return acc

    def derivative(self):
        if len(self.coeffs) == 1:
            return Polynomial((0.0,))
        return Polynomial(tuple(k * c for k, c in enumerate(self.coeffs) if k > 0))

    def antiderivative(self):
        return Polynomial((0.0,) + tuple(c / (k + 1) for k, c in enumerate(self.coeffs)))


@dataclass(frozen=True)
class GaussBump(FunctionDescriptor):
    """``c * exp(-d * s**2) + e``."""

    c: float
    d: float
    e: float = 0.0

    def __call__(self, s):
        if isinstance(s, np.ndarray):
            return self.c * np.exp(-self.d * s * s) + self.e
        return self.c * math.exp(-self.d * s * s) + self.e

    def derivative(self):
        return Product((Polynomial((0.0, -2.0 * self.c * self.d)), GaussBump(1.0, self.d, 0.0)))


@dataclass(frozen=True)
class Negated(FunctionDescriptor):
    inner: FunctionDescriptor

    def __call__(self, s):
        return -self.inner(s)

    def derivative(self):
        return Negated(self.inner.derivative())

    def antiderivative(self):
        a = self.inner.antiderivative()
        return None if a is None else Negated(a)


@dataclass(frozen=True)
class Sum(FunctionDescriptor):
    terms: tuple

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))

    def __call__(self, s):
        acc = 0.0 * s
        for t in self.terms:
            acc = acc + t(s)
        return acc

    def derivative(self):
        return Sum(tuple(t.derivative() for t in self.terms))

    def antiderivative(self):
        parts = [t.antiderivative() for t in self.terms]
        if any(p is None for p in parts):
            return None
        return Sum(tuple(parts))


@dataclass(frozen=True)
class Product(FunctionDescriptor):
    factors: tuple

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))

    def __call__(self, s):
        acc = 1.0 + 0.0 * s
        for f in self.factors:
            acc = acc * f(s)
        return acc

    def derivative(self):
        terms = []
        for i, f in enumerate(self.factors):
            rest = self.factors[:i] + (f.derivative(),) + self.factors[i + 1:]
            terms.append(Product(rest))
        return Sum(tuple(terms))


@dataclass(frozen=True)
class ShiftedArg(FunctionDescriptor):
    """``inner(s - offset)``: the graph of ``inner`` moved right by ``offset``."""

    inner: FunctionDescriptor
    offset: float

    def __call__(self, s):
        return self.inner(s - self.offset)

    def derivative(self):
        return ShiftedArg(self.inner.derivative(), self.offset)

    def antiderivative(self):
        a = self.inner.antiderivative()
        if a is None:
            return None
        return Sum((ShiftedArg(a, self.offset), Polynomial((-a(-self.offset),))))


@dataclass(frozen=True)
class Quotient(FunctionDescriptor):
    """``num(s) / den(s)``; produced by time reparametrization."""

    num: FunctionDescriptor
    den: FunctionDescriptor

    def __call__(self, s):
        return self.num(s) / self.den(s)

    def derivative(self):
        u, v = self.num, self.den
        top = Sum((Product((u.derivative(), v)), Negated(Product((u, v.derivative())))))
        return Quotient(top, Product((v, v)))


def evaluate(fd: FunctionDescriptor, s):
    return fd(s)


def derivative(fd: FunctionDescriptor) -> FunctionDescriptor:
    return fd.derivative()


# ---------------------------------------------------------------------------
# bivariate descriptors for F(x, y)
# ---------------------------------------------------------------------------


class BivariateDescriptor:
    def __call__(self, x, y):
        raise NotImplementedError

    def partials(self, x, y):
        """Return ``(dF/dx, dF/dy)`` in closed form."""
        raise NotImplementedError


@dataclass(frozen=True)
class SpecialForm(BivariateDescriptor):
    """``F(x, y) = x (x - psi1(y)) (x - psi2(y))``."""

    psi1: FunctionDescriptor
    psi2: FunctionDescriptor

    def __call__(self, x, y):
        return x * (x - self.psi1(y)) * (x - self.psi2(y))

    @cached_property
    def _dpsi(self):
        return self.psi1.derivative(), self.psi2.derivative()

    def partials(self, x, y):
        p1, p2 = self.psi1(y), self.psi2(y)
        dp1, dp2 = self._dpsi
        fx = (x - p1) * (x - p2) + x * (x - p2) + x * (x - p1)
        fy = -x * (dp1(y) * (x - p2) + dp2(y) * (x - p1))
        return fx, fy


@dataclass(frozen=True)
class LienardF(BivariateDescriptor):
    """``F(x, y) = f(x)``, the classical Lienard case."""

    f: FunctionDescriptor

    def __call__(self, x, y):
        return self.f(x) + 0.0 * y

    @cached_property
    def _df(self):
        return self.f.derivative()

    def partials(self, x, y):
        return self._df(x) + 0.0 * y, 0.0 * x + 0.0 * y


@dataclass(frozen=True)
class Scaled(BivariateDescriptor):
    inner: BivariateDescriptor
    k: float

    def __call__(self, x, y):
        return self.k * self.inner(x, y)

    def partials(self, x, y):
        fx, fy = self.inner.partials(x, y)
        return self.k * fx, self.k * fy


@dataclass(frozen=True)
class DividedBy(BivariateDescriptor):
    """``F(x, y) / alpha(y)``; produced by time reparametrization."""

    inner: BivariateDescriptor
    alpha: FunctionDescriptor

    @cached_property
    def _dalpha(self):
        return self.alpha.derivative()

    def __call__(self, x, y):
        return self.inner(x, y) / self.alpha(y)

    def partials(self, x, y):
        fx, fy = self.inner.partials(x, y)
        a = self.alpha(y)
        return fx / a, (fy * a - self.inner(x, y) * self._dalpha(y)) / (a * a)


def eval_F(F: BivariateDescriptor, x, y):
    return F(x, y)


def partials(F: BivariateDescriptor, x, y):
    return F.partials(x, y)


# ---------------------------------------------------------------------------
# the planar system
# ---------------------------------------------------------------------------


class _Primitive:
    """``s -> integral_0^s f``, closed form when available, else adaptive quadrature."""

    def __init__(self, f: FunctionDescriptor):
        self.f = f
        self.closed = f.antiderivative()

    def __call__(self, s):
        if self.closed is not None:
            return self.closed(s) - self.closed(0.0 * s)
        if isinstance(s, np.ndarray):
            return np.vectorize(self._quad, otypes=[float])(s)
        return self._quad(s)

    def _quad(self, s):
        if s == 0.0:
            return 0.0
        val, _ = integrate.quad(self.f, 0.0, float(s), epsabs=1e-12, epsrel=1e-12, limit=200)
        return val


@dataclass(frozen=True)
class EnergyPair:
    """Primitives ``Phi`` of phi and ``G`` of g, both vanishing at 0."""

    Phi: Callable
    G: Callable


@dataclass(frozen=True)
class PlanarSystem:
    """The triple (phi, g, F) on the strip ``(a, b) x R``.

    When F is a :class:`SpecialForm` the curves psi1/psi2 are taken from it;
    passing different ones is an error.
    """

    phi: FunctionDescriptor
    g: FunctionDescriptor
    F: BivariateDescriptor
    domain: tuple = (-math.inf, math.inf)
    psi1: Optional[FunctionDescriptor] = None
    psi2: Optional[FunctionDescriptor] = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        a, b = (float(v) for v in self.domain)
        if not a < 0.0 < b:
            raise ValueError(f"domain must satisfy a < 0 < b, got {self.domain!r}")
        object.__setattr__(self, "domain", (a, b))
        if isinstance(self.F, SpecialForm):
            for attr in ("psi1", "psi2"):
                given = getattr(self, attr)
                embedded = getattr(self.F, attr)
                if given is None:
                    object.__setattr__(self, attr, embedded)
                elif given != embedded:
                    raise ValueError(f"{attr} differs from the curve embedded in F")

    @property
    def has_curves(self) -> bool:
        return self.psi1 is not None and self.psi2 is not None

    def in_domain(self, x) -> bool:
        a, b = self.domain
        return bool(np.all((np.asarray(x) > a) & (np.asarray(x) < b)))

    def check_domain(self, x):
        if not self.in_domain(x):
            raise DomainExceeded(x, self.domain)

    @cached_property
    def dphi(self):
        return self.phi.derivative()

    @cached_property
    def dg(self):
        return self.g.derivative()

    @cached_property
    def dpsi1(self):
        return None if self.psi1 is None else self.psi1.derivative()

    @cached_property
    def dpsi2(self):
        return None if self.psi2 is None else self.psi2.derivative()

    @cached_property
    def energy(self) -> EnergyPair:
        return EnergyPair(_Primitive(self.phi), _Primitive(self.g))


def vector_field(sys: PlanarSystem, x, y):
    sys.check_domain(x)
    return sys.phi(y) - sys.F(x, y), -sys.g(x)


def hamiltonian(sys: PlanarSystem, x, y):
    """``H(x, y) = Phi(y) + G(x)``."""
    sys.check_domain(x)
    return sys.energy.Phi(y) + sys.energy.G(x)


def energy_derivative(sys: PlanarSystem, x, y):
    """Rate of change of H along the flow, ``-F(x, y) g(x)``."""
    sys.check_domain(x)
    return -sys.F(x, y) * sys.g(x)


def reparametrize(
    alpha: FunctionDescriptor,
    beta: FunctionDescriptor,
    phi: FunctionDescriptor,
    g: FunctionDescriptor,
    F: BivariateDescriptor,
    domain=(-math.inf, math.inf),
    psi1=None,
    psi2=None,
    window=(-10.0, 10.0, -10.0, 10.0),
    n_samples: int = 10_000,
) -> PlanarSystem:
    """Divide ``x' = beta(x)[phi(y) - F]``, ``y' = -alpha(y) g(x)`` by ``alpha(y) beta(x)``.

    Positivity of alpha and beta is checked on ``n_samples`` points of the
    window (clipped to the domain for beta); this is a guard, not a proof.
    """
    a, b = domain
    x0, x1, y0, y1 = window
    ys = np.linspace(y0, y1, n_samples)
    xs = np.linspace(max(x0, a), min(x1, b), n_samples + 2)[1:-1]
    for which, fd, pts in (("alpha", alpha, ys), ("beta", beta, xs)):
        vals = np.asarray(fd(pts), dtype=float) * np.ones_like(pts)
        bad = np.flatnonzero(~(vals > 0.0))
        if bad.size:
            i = int(bad[0])
            raise NonPositiveFactor(which, float(pts[i]), float(vals[i]))
    if psi1 is None and isinstance(F, SpecialForm):
        psi1, psi2 = F.psi1, F.psi2
    return PlanarSystem(
        phi=Quotient(phi, alpha),
        g=Quotient(g, beta),
        F=DividedBy(F, alpha),
        domain=domain,
        psi1=psi1,
        psi2=psi2,
    )


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------


def descriptor_to_json(fd: FunctionDescriptor) -> dict:
    if isinstance(fd, Polynomial):
        return {"kind": "polynomial", "coeffs": list(fd.coeffs)}
    if isinstance(fd, GaussBump):
        return {"kind": "gauss_bump", "c": fd.c, "d": fd.d, "e": fd.e}
    if isinstance(fd, Negated):
        return {"kind": "negated", "inner": descriptor_to_json(fd.inner)}
    if isinstance(fd, Sum):
        return {"kind": "sum", "terms": [descriptor_to_json(t) for t in fd.terms]}
    if isinstance(fd, Product):
        return {"kind": "product", "factors": [descriptor_to_json(f) for f in fd.factors]}
    if isinstance(fd, ShiftedArg):
        return {"kind": "shifted", "offset": fd.offset, "inner": descriptor_to_json(fd.inner)}
    if isinstance(fd, Quotient):
        return {"kind": "quotient", "num": descriptor_to_json(fd.num), "den": descriptor_to_json(fd.den)}
    raise TypeError(f"cannot serialize {type(fd).__name__}")


def _req(obj, key):
    if not isinstance(obj, dict):
        raise ValueError(f"expected a JSON object, got {obj!r}")
    if key not in obj:
        raise ValueError(f"missing key {key!r} in {obj!r}")
    return obj[key]


def descriptor_from_json(obj: dict) -> FunctionDescriptor:
    kind = _req(obj, "kind")
    if kind == "polynomial":
        coeffs = _req(obj, "coeffs")
        if not isinstance(coeffs, list) or not coeffs:
            raise ValueError("polynomial coeffs must be a non-empty list")
        return Polynomial(tuple(float(c) for c in coeffs))
    if kind == "gauss_bump":
        return GaussBump(float(_req(obj, "c")), float(_req(obj, "d")), float(obj.get("e", 0.0)))
    if kind == "negated":
        return Negated(descriptor_from_json(_req(obj, "inner")))
    if kind == "sum":
        return Sum(tuple(descriptor_from_json(t) for t in _req(obj, "terms")))
    if kind == "product":
        return Product(tuple(descriptor_from_json(f) for f in _req(obj, "factors")))
    if kind == "shifted":
        return ShiftedArg(descriptor_from_json(_req(obj, "inner")), float(_req(obj, "offset")))
    if kind == "quotient":
        return Quotient(descriptor_from_json(_req(obj, "num")), descriptor_from_json(_req(obj, "den")))
    raise ValueError(f"unknown descriptor kind {kind!r}")


def bivariate_to_json(F: BivariateDescriptor) -> dict:
    if isinstance(F, SpecialForm):
        return {"kind": "special_form", "psi1": descriptor_to_json(F.psi1), "psi2": descriptor_to_json(F.psi2)}
    if isinstance(F, LienardF):
        return {"kind": "lienard", "f": descriptor_to_json(F.f)}
    if isinstance(F, Scaled):
        return {"kind": "scaled", "k": F.k, "inner": bivariate_to_json(F.inner)}
    if isinstance(F, DividedBy):
        return {"kind": "divided", "inner": bivariate_to_json(F.inner), "by": descriptor_to_json(F.alpha)}
    raise TypeError(f"cannot serialize {type(F).__name__}")


def bivariate_from_json(obj: dict) -> BivariateDescriptor:
    kind = _req(obj, "kind")
    if kind == "special_form":
        return SpecialForm(descriptor_from_json(_req(obj, "psi1")), descriptor_from_json(_req(obj, "psi2")))
    if kind == "lienard":
        return LienardF(descriptor_from_json(_req(obj, "f")))
    if kind == "scaled":
        return Scaled(bivariate_from_json(_req(obj, "inner")), float(_req(obj, "k")))
    if kind == "divided":
        return DividedBy(bivariate_from_json(_req(obj, "inner")), descriptor_from_json(_req(obj, "by")))
    raise ValueError(f"unknown bivariate kind {kind!r}")


def _bound_to_json(v: float):
    return None if math.isinf(v) else v


def _bound_from_json(v, default: float) -> float:
    if v is None:
        return default
    if isinstance(v, str):
        return float(v)
    return float(v)


def system_to_json(sys: PlanarSystem) -> dict:
    out = {
        "phi": descriptor_to_json(sys.phi),
        "g": descriptor_to_json(sys.g),
        "F": bivariate_to_json(sys.F),
        "domain": [_bound_to_json(sys.domain[0]), _bound_to_json(sys.domain[1])],
    }
    if sys.psi1 is not None:
        out["psi1"] = descriptor_to_json(sys.psi1)
    if sys.psi2 is not None:
        out["psi2"] = descriptor_to_json(sys.psi2)
    return out


def system_from_json(obj: dict) -> PlanarSystem:
    domain = obj.get("domain", [None, None]) if isinstance(obj, dict) else None
    if not isinstance(domain, Sequence) or len(domain) != 2:
        raise ValueError("domain must be a two-element list [a, b]")
    psi1 = obj.get("psi1")
    psi2 = obj.get("psi2")
    return PlanarSystem(
        phi=descriptor_from_json(_req(obj, "phi")),
        g=descriptor_from_json(_req(obj, "g")),
        F=bivariate_from_json(_req(obj, "F")),
        domain=(_bound_from_json(domain[0], -math.inf), _bound_from_json(domain[1], math.inf)),
        psi1=None if psi1 is None else descriptor_from_json(psi1),
        psi2=None if psi2 is None else descriptor_from_json(psi2),
    )
