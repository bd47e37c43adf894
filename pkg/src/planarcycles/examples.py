"""The Gaussian-bump family with exactly one limit cycle, plus baselines.

Family: ``phi(y) = y``, ``g(x) = x`` and ``F = x (x - psi1(y)) (x - psi2(y))`` with

    psi1(y) =  c1 exp(-d1 y^2) + e1
    psi2(y) = -c2 exp(-d2 y^2) - e2

subject to ``c1 + e1 = c2 + e2 =: r`` and ``c_j d_j max(r, r^2) < 1/2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from .errors import NonPositiveParam
from .funcdesc import GaussBump, LienardF, Negated, PlanarSystem, Polynomial, SpecialForm
from .hypotheses import AnalysisWindow

__all__ = [
    "Section3Params",
    "FIGURE2",
    "ConstraintVerdict",
    "TangentCircleVerdict",
    "Preset",
    "PRESETS",
    "build_section3",
    "check_constraints",
    "check_tangent_circle",
    "build_constant_curves",
    "build_harmonic",
    "get_preset",
    "random_section3_params",
]

IDENTITY = Polynomial((0.0, 1.0))


@dataclass(frozen=True)
class Section3Params:
    c1: float
    d1: float
    e1: float
    c2: float
    d2: float
    e2: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not v > 0:
                raise NonPositiveParam(f"{f.name}={v!r} must be > 0")

    @property
    def r(self) -> float:
        return self.c1 + self.e1


FIGURE2 = Section3Params(c1=0.5, d1=0.5, e1=0.5, c2=0.25, d2=1.0, e2=0.75)


def build_section3(params: Section3Params) -> PlanarSystem:
    psi1 = GaussBump(params.c1, params.d1, params.e1)
    psi2 = Negated(GaussBump(params.c2, params.d2, params.e2))
    return PlanarSystem(IDENTITY, IDENTITY, SpecialForm(psi1, psi2), name="section3")


@dataclass(frozen=True)
class ConstraintVerdict:
    r: float
    cond1_residual: float
    cond1_ok: bool
    cond2_values: tuple  # c_j d_j max(r, r^2), j = 1, 2
    cond2_margins: tuple  # 1/2 - value
    cond2_ok: bool

    @property
    def passed(self) -> bool:
        return self.cond1_ok and self.cond2_ok


def check_constraints(params: Section3Params, tol: float = 1e-12) -> ConstraintVerdict:
    r = params.c1 + params.e1
    res = r - (params.c2 + params.e2)
    m = max(r, r * r)
    vals = (params.c1 * params.d1 * m, params.c2 * params.d2 * m)
    margins = tuple(0.5 - v for v in vals)
    return ConstraintVerdict(
        r=r,
        cond1_residual=res,
        cond1_ok=abs(res) <= tol,
        cond2_values=vals,
        cond2_margins=margins,
        cond2_ok=all(mg > tol for mg in margins),
    )


@dataclass(frozen=True)
class TangentCircleVerdict:
    passed: bool
    tangency_residuals: tuple  # psi1(0) - r, psi2(0) + r
    min_gap_right: float  # min of psi1(y) - x over the right half-circle
    min_gap_left: float  # min of x - psi2(y) over the left half-circle
    witness_angle: Optional[float] = None


def check_tangent_circle(sys: PlanarSystem, params: Section3Params, n: int = 10_000,
                         tol: float = 1e-12) -> TangentCircleVerdict:
    """The circle of radius r touches both curves at y = 0 and otherwise lies between them."""
    r = params.r
    tang = (float(sys.psi1(0.0)) - r, float(sys.psi2(0.0)) + r)
    theta = 2.0 * np.pi * np.arange(n) / n
    keep = np.ones(n, dtype=bool)
    keep[0] = False
    if n % 2 == 0:
        keep[n // 2] = False
    theta = theta[keep]
    x, y = r * np.cos(theta), r * np.sin(theta)
    right, left = x > 0, x < 0
    gap_r = sys.psi1(y[right]) - x[right]
    gap_l = x[left] - sys.psi2(y[left])
    bad = np.zeros(theta.size, dtype=bool)
    bad[right] = ~(gap_r > 0)
    bad[left] = ~(gap_l > 0)
    witness = float(theta[np.flatnonzero(bad)[0]]) if bad.any() else None
    ok = all(abs(t) <= tol for t in tang) and witness is None
    return TangentCircleVerdict(ok, tang, float(gap_r.min()), float(gap_l.min()), witness)


def build_constant_curves(p: float) -> PlanarSystem:
    """``F(x, y) = x (x^2 - p^2)``: the curves are the vertical lines ``x = +-p``."""
    if not p > 0:
        raise ValueError("p must be > 0")
    return PlanarSystem(IDENTITY, IDENTITY, SpecialForm(Polynomial((p,)), Polynomial((-p,))), name="constant")


def build_harmonic() -> PlanarSystem:
    """``F = 0``; the lines ``x = +-1`` are declared as (trivially satisfied) zero curves."""
    return PlanarSystem(IDENTITY, IDENTITY, LienardF(Polynomial((0.0,))),
                        psi1=Polynomial((1.0,)), psi2=Polynomial((-1.0,)), name="harmonic")


@dataclass(frozen=True)
class Preset:
    system: PlanarSystem
    window: AnalysisWindow


PRESETS = {
    "figure2": Preset(build_section3(FIGURE2), AnalysisWindow((-2.0, 2.0), (-2.0, 2.0))),
    "vdp-cubic": Preset(build_constant_curves(math.sqrt(3.0)), AnalysisWindow((-3.0, 3.0), (-4.0, 4.0))),
    "harmonic": Preset(build_harmonic(), AnalysisWindow((-2.0, 2.0), (-2.0, 2.0))),
}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def random_section3_params(rng: np.random.Generator, max_tries: int = 100_000) -> Section3Params:
    """Draw c_j, d_j, e_j from (0, 1], impose c1 + e1 = c2 + e2, reject until (2) holds."""
    for _ in range(max_tries):
        c1, d1, e1, c2, d2 = (float(v) for v in 1.0 - rng.random(5))
        e2 = c1 + e1 - c2
        if e2 <= 0:
            continue
        try:
            p = Section3Params(c1, d1, e1, c2, d2, e2)
        except NonPositiveParam:
            continue
        if check_constraints(p).passed:
            return p
    raise RuntimeError("rejection sampling did not find admissible parameters")
