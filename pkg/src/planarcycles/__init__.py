"""Limit cycles of planar systems ``x' = phi(y) - F(x, y)``, ``y' = -g(x)``.

Hypothesis audits on a grid, an adaptive integrator with event location,
return-map cycle search with certificates, and a Gaussian-bump family that
has exactly one limit cycle.
"""
from .cycles import (
    CycleCertificate,
    arc_split,
    crossing_count,
    cycle_integral,
    find_cycles,
    refine_cycle,
    scan_displacement,
    uniqueness_verdict,
)
from .errors import PlanarCyclesError
from .examples import (
    FIGURE2,
    PRESETS,
    Section3Params,
    build_constant_curves,
    build_harmonic,
    build_section3,
    check_constraints,
    check_tangent_circle,
)
from .funcdesc import (
    GaussBump,
    LienardF,
    Negated,
    PlanarSystem,
    Polynomial,
    Product,
    ShiftedArg,
    SpecialForm,
    Sum,
    hamiltonian,
    reparametrize,
    system_from_json,
    system_to_json,
    vector_field,
)
from .hypotheses import A_j, AnalysisWindow, check_zeta_signs, full_report, solve_zeta
from .integrator import IntegratorConfig, backend_name, first_return, integrate

__version__ = "0.1.0"
