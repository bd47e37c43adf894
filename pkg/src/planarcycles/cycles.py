"""Limit cycles as fixed points of the return map on the positive x-axis.

A cycle is bracketed by a sign change of the displacement ``d(x) = P(x) - x``,
refined by a safeguarded Illinois iteration, then certified with one more
period of integration: the integral of ``g F`` over the period (which must
vanish on a closed orbit), crossings of the curves ``x = psi_j(y)`` per
quadrant, and the slope of ``P`` at the fixed point.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import LostBracket, NoReturn, NotClosed, WrongCrossingCount, PlanarCyclesError
from .funcdesc import PlanarSystem
from .hypotheses import R_D1_GT, R_D1_LT, R_D2_GT, R_D2_LT, region_codes
from .integrator import IntegratorConfig, Trajectory, find_events, first_return

__all__ = [
    "DisplacementScan",
    "CycleCertificate",
    "ArcDecomposition",
    "UniquenessVerdict",
    "scan_displacement",
    "refine_cycle",
    "cycle_integral",
    "arc_integral",
    "crossing_count",
    "arc_split",
    "uniqueness_verdict",
    "find_cycles",
]

REFINE_TOL = 1e-10
CLOSE_TOL = 1e-8


@dataclass
class DisplacementScan:
    grid: list  # (x, d) pairs; d is nan where the return failed
    sign_changes: list  # [x_lo, x_hi] brackets
    failures: list  # abscissas where first_return raised
    zero_tol: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array(self.grid, dtype=float).reshape(-1, 2)


@dataclass
class CycleCertificate:
    section_x: float
    period: float
    displacement_residual: float
    I_gamma: float
    crossings: dict
    stability_multiplier: float
    curve: np.ndarray = field(repr=False)
    bracket: tuple = ()
    bracket_signs: tuple = ()
    trajectory: Optional[Trajectory] = field(default=None, repr=False)

    @property
    def crosses_both(self) -> bool:
        return sum(self.crossings.get("psi1", ())) > 0 and sum(self.crossings.get("psi2", ())) > 0

    @property
    def n_crossings(self) -> int:
        return int(sum(sum(v) for v in self.crossings.values()))

    def to_json(self) -> dict:
        return {
            "section_x": self.section_x,
            "period": self.period,
            "displacement_residual": self.displacement_residual,
            "I_gamma": self.I_gamma,
            "stability": self.stability_multiplier,
            "crossings": {k: list(v) for k, v in self.crossings.items()},
        }

    def curve_to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "y"])
            for t, x, y in self.curve:
                w.writerow([f"{t:.17g}", f"{x:.17g}", f"{y:.17g}"])


@dataclass
class ArcDecomposition:
    points: dict  # label -> (t, x, y) for A, B, C, D
    integrals: dict  # "DA", "AB", "BC", "CD" -> integral of g F dt
    checks: dict  # structural facts, each a bool

    @property
    def total(self) -> float:
        return sum(self.integrals.values())


@dataclass
class UniquenessVerdict:
    verdict: str
    both_curve: list
    other: list
    dump: dict = field(default_factory=dict)

    @property
    def consistent(self) -> bool:
        return self.verdict == "consistent"


# ---------------------------------------------------------------------------
# scan and refine
# ---------------------------------------------------------------------------


def _displacement(sys, x, config):
    x1, _, _ = first_return(sys, x, config)
    return x1 - x


def scan_displacement(sys: PlanarSystem, x_lo: float, x_hi: float, n: int,
                      config: Optional[IntegratorConfig] = None, zero_tol: float = 1e-8) -> DisplacementScan:
    """Evaluate ``d`` on ``n`` points of ``[x_lo, x_hi]`` and bracket its sign changes.

    Values with ``|d| <= zero_tol`` carry no sign: a continuum of closed
    orbits (the Hamiltonian case) then yields no spurious brackets.
    """
    a, b = sys.domain
    if not (0.0 < x_lo < x_hi < b):
        raise ValueError("need 0 < x_lo < x_hi < b")
    if n < 2:
        raise ValueError("n must be >= 2")
    grid, failures = [], []
    for x in np.linspace(x_lo, x_hi, n):
        x = float(x)
        try:
            grid.append((x, float(_displacement(sys, x, config))))
        except PlanarCyclesError:
            grid.append((x, math.nan))
            failures.append(x)
    brackets = []
    prev = None  # (x, sign) of the last signed, successful sample
    for x, d in grid:
        if math.isnan(d):
            prev = None
            continue
        if abs(d) <= zero_tol:
            continue
        s = 1 if d > 0 else -1
        if prev is not None and prev[1] != s:
            brackets.append([prev[0], x])
        prev = (x, s)
    return DisplacementScan(grid, brackets, failures, zero_tol)


def _illinois(f, a, b, fa, fb, tol, max_iter=200):
    """Bracketed root of ``f`` to ``|f| <= tol``; returns ``(x, fx)`` or None."""
    side = 0
    width = b - a
    for it in range(max_iter):
        if it % 4 == 3 and abs(b - a) > 0.5 * width:
            c = 0.5 * (a + b)
        else:
            c = (a * fb - b * fa) / (fb - fa)
            if not (min(a, b) < c < max(a, b)):
                c = 0.5 * (a + b)
        if it % 4 == 3:
            width = abs(b - a)
        fc = f(c)
        if abs(fc) <= tol:
            return c, fc
        if (fc > 0) == (fb > 0):
            b, fb = c, fc
            if side == -1:
                fa *= 0.5
            side = -1
        else:
            a, fa = c, fc
            if side == 1:
                fb *= 0.5
            side = 1
        if abs(b - a) <= 4.0 * np.finfo(float).eps * max(abs(a), abs(b)):
            return None
    return None


def refine_cycle(sys: PlanarSystem, bracket: Sequence[float], config: Optional[IntegratorConfig] = None,
                 tol: float = REFINE_TOL) -> CycleCertificate:
    """Refine a bracket to ``|d| <= tol`` and certify the resulting periodic orbit.

    If the return map is too noisy for ``tol`` at the given tolerances the
    search is repeated once with tolerances tightened 100x before giving up.
    """
    config = config or IntegratorConfig()
    lo, hi = float(bracket[0]), float(bracket[1])
    found = None
    for cfg in (config, config.tightened(1e-2)):
        try:
            f = lambda x: _displacement(sys, x, cfg)
            flo, fhi = f(lo), f(hi)
            if not ((flo > 0 > fhi) or (flo < 0 < fhi)):
                raise LostBracket(f"no strict sign change on [{lo!r}, {hi!r}]: d = {flo!r}, {fhi!r}")
            if abs(flo) <= tol:
                found = (lo, flo)
            elif abs(fhi) <= tol:
                found = (hi, fhi)
            else:
                found = _illinois(f, lo, hi, flo, fhi, tol)
        except NoReturn as exc:
            raise LostBracket(f"return map failed inside [{lo!r}, {hi!r}]: {exc}") from exc
        if found is not None:
            config = cfg
            break
    if found is None:
        raise LostBracket(f"|d| <= {tol:g} not reached inside [{lo!r}, {hi!r}]")
    xs, _ = found
    return certify(sys, xs, config, bracket=(lo, hi), bracket_signs=(np.sign(flo), np.sign(fhi)))


def certify(sys: PlanarSystem, xs: float, config: IntegratorConfig, bracket=(), bracket_signs=()) -> CycleCertificate:
    kinds = ["psi1_cross", "psi2_cross"] if sys.has_curves else []
    x1, period, traj = first_return(sys, xs, config, events=kinds)
    h = 1e-6 * (1.0 + abs(xs))
    p_plus, _, _ = first_return(sys, xs + h, config)
    p_minus, _, _ = first_return(sys, xs - h, config)
    crossings = crossing_count(sys, traj) if sys.has_curves else {}
    return CycleCertificate(
        section_x=float(xs),
        period=float(period),
        displacement_residual=float(x1 - xs),
        I_gamma=float(traj.gF_integral(0.0, period)),
        crossings=crossings,
        stability_multiplier=float((p_plus - p_minus) / (2.0 * h)),
        curve=traj.sample(0.0, period),
        bracket=tuple(bracket),
        bracket_signs=tuple(int(s) for s in bracket_signs),
        trajectory=traj,
    )


# ---------------------------------------------------------------------------
# integrals along orbits
# ---------------------------------------------------------------------------


def arc_integral(sys: PlanarSystem, traj: Trajectory, t0: Optional[float] = None, t1: Optional[float] = None) -> float:
    """Integral of ``g(x) F(x, y)`` dt along the stored orbit between two times."""
    return traj.gF_integral(t0, t1)


def cycle_integral(sys: PlanarSystem, traj: Trajectory, t0: Optional[float] = None, t1: Optional[float] = None,
                   close_tol: float = CLOSE_TOL) -> float:
    """``I_gamma``: integral of ``g F`` over one period of a closed orbit."""
    t0 = traj.t_start if t0 is None else t0
    t1 = traj.t_final if t1 is None else t1
    xa, ya, _ = traj.state_at(t0)
    xb, yb, _ = traj.state_at(t1)
    gap = math.hypot(xb - xa, yb - ya)
    if gap > close_tol:
        raise NotClosed(f"orbit does not close: gap {gap:.3g} > {close_tol:g}")
    return traj.gF_integral(t0, t1)


# ---------------------------------------------------------------------------
# crossings of the curves x = psi_j(y)
# ---------------------------------------------------------------------------


def _quadrant(x: float, y: float) -> int:
    """0..3 for quadrants I..IV; points on y = 0 count as upper half-plane."""
    if y >= 0:
        return 0 if x > 0 else 1
    return 2 if x < 0 else 3


def _polyline_crossings(sys, pts, psi):
    x, y = pts[:, 0], pts[:, 1]
    s = x - psi(y)
    out = []
    for i in np.flatnonzero(((s[:-1] > 0) & (s[1:] < 0)) | ((s[:-1] < 0) & (s[1:] > 0))):
        w = s[i] / (s[i] - s[i + 1])
        out.append((x[i] + w * (x[i + 1] - x[i]), y[i] + w * (y[i + 1] - y[i])))
    return out


def crossing_count(sys: PlanarSystem, path, with_points: bool = False):
    """Sign changes of ``x - psi_j(y)`` along a trajectory or polyline, per quadrant.

    ``path`` is a :class:`Trajectory` (crossings located on the dense output)
    or an ``(N, 2)`` / ``(N, 3)`` array of ``(x, y)`` or ``(t, x, y)`` rows.
    Tangential contacts produce no sign change and count zero.
    """
    if not sys.has_curves:
        from .errors import MissingCurves
        raise MissingCurves("crossing_count needs psi curves")
    counts, points = {}, {}
    for key, psi in (("psi1", sys.psi1), ("psi2", sys.psi2)):
        if isinstance(path, Trajectory):
            evs = find_events(path, [f"{key}_cross"], t_max=path.t_final)
            pts = [(e.x, e.y) for e in evs]
        else:
            arr = np.asarray(path, dtype=float)
            arr = arr[:, -2:]
            pts = _polyline_crossings(sys, arr, psi)
        q = [0, 0, 0, 0]
        for x, y in pts:
            q[_quadrant(x, y)] += 1
        counts[key] = q
        points[key] = pts
    return (counts, points) if with_points else counts


# ---------------------------------------------------------------------------
# arc decomposition at A, B, C, D
# ---------------------------------------------------------------------------


def arc_split(sys: PlanarSystem, cert: CycleCertificate) -> ArcDecomposition:
    """Split the cycle at its four curve crossings and integrate ``g F`` per arc.

    A and B are the crossings of psi1 in y > 0 and y < 0, C and D those of
    psi2 in y < 0 and y > 0.  Arcs A->B and C->D should stay in D1_gt and
    D2_lt; the arcs D->A (top) and B->C (bottom) are traversed with x
    increasing and decreasing respectively.
    """
    if cert.crossings.get("psi1") != [1, 0, 0, 1] or cert.crossings.get("psi2") != [0, 1, 1, 0]:
        raise WrongCrossingCount(f"expected one crossing per quadrant, got {cert.crossings}")
    traj = cert.trajectory
    T = cert.period
    evs = find_events(traj, ["psi1_cross", "psi2_cross"], t_max=T)
    pick = {}
    for e in evs:
        label = {("psi1_cross", True): "A", ("psi1_cross", False): "B",
                 ("psi2_cross", False): "C", ("psi2_cross", True): "D"}[(e.kind, e.y > 0)]
        pick[label] = (e.t, e.x, e.y)

    def J(t):
        return traj.state_at(t)[2]

    J0, JT = J(0.0), J(T)

    def arc(p, q):
        tp, tq = pick[p][0], pick[q][0]
        if tq >= tp:
            return J(tq) - J(tp)
        return (JT - J(tp)) + (J(tq) - J0)

    def arc_samples(p, q, n=400):
        tp, tq = pick[p][0], pick[q][0]
        if tq >= tp:
            ts = np.linspace(tp, tq, n + 2)[1:-1]
        else:
            span = (T - tp) + tq
            ts = np.mod(tp + np.linspace(0.0, span, n + 2)[1:-1], T)
        x, y, _ = traj.state_at(ts)
        return ts, x, y

    integrals = {k: float(arc(k[0], k[1])) for k in ("DA", "AB", "BC", "CD")}

    checks = {}
    for name, (p, q), code in (("AB_in_D1_gt", ("A", "B"), R_D1_GT), ("CD_in_D2_lt", ("C", "D"), R_D2_LT)):
        _, x, y = arc_samples(p, q)
        checks[name] = bool(np.all(region_codes(sys, x, y) == code))
    for name, (p, q), sgn in (("DA", ("D", "A"), 1.0), ("BC", ("B", "C"), -1.0)):
        _, x, y = arc_samples(p, q)
        xdot = sys.phi(y) - sys.F(x, y)
        gF = sys.g(x) * sys.F(x, y)
        reg = region_codes(sys, x, y)
        inner = (reg == R_D1_LT) | (reg == R_D2_GT)
        checks[f"{name}_xdot_sign"] = bool(np.all(sgn * xdot > 0))
        checks[f"{name}_inner_gF_negative"] = bool(inner.any() and np.all(gF[inner] < 0))
    return ArcDecomposition(pick, integrals, checks)


# ---------------------------------------------------------------------------
# verdict
# ---------------------------------------------------------------------------


def uniqueness_verdict(scan: DisplacementScan, certificates: Sequence[CycleCertificate]) -> UniquenessVerdict:
    """``consistent`` iff at most one refined cycle crosses both curves."""
    both = [c for c in certificates if c.crosses_both]
    other = [c for c in certificates if not c.crosses_both]
    if len(both) <= 1:
        return UniquenessVerdict("consistent", both, other)
    dump = {
        "scan": {"grid": scan.grid, "sign_changes": scan.sign_changes, "failures": scan.failures},
        "certificates": [dict(c.to_json(), bracket=list(c.bracket)) for c in certificates],
    }
    return UniquenessVerdict("theorem-violation witness", both, other, dump)


def find_cycles(sys: PlanarSystem, x_lo: float, x_hi: float, n: int = 64,
                config: Optional[IntegratorConfig] = None):
    """Scan, refine every bracket and assemble the verdict.

    Returns ``(scan, certificates, verdict, errors)``; ``errors`` lists the
    brackets whose refinement raised.
    """
    scan = scan_displacement(sys, x_lo, x_hi, n, config)
    certs, errors = [], []
    for br in scan.sign_changes:
        try:
            certs.append(refine_cycle(sys, br, config))
        except LostBracket as exc:
            errors.append({"bracket": list(br), "error": str(exc)})
    return scan, certs, uniqueness_verdict(scan, certs), errors


def certificates_to_json(certs: Sequence[CycleCertificate]) -> str:
    return json.dumps([c.to_json() for c in certs], indent=2)
