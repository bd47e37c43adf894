"""Grid audit of the uniqueness hypotheses on a finite analysis window.

Every check samples a rectangular grid and turns strict inequalities into
margin tests (``tol_sign`` for signs, ``tol_mono`` for monotone differences),
so verdicts are reproducible.  A failing entry always carries at least one
witness point that re-evaluates as a violation.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import MissingCurves, NoBracket, NotSpecialForm
from .funcdesc import PlanarSystem, SpecialForm

__all__ = [
    "TOL_SIGN",
    "TOL_MONO",
    "TOL_ZERO",
    "HYPOTHESIS_KEYS",
    "AnalysisWindow",
    "RegionTag",
    "HypothesisEntry",
    "HypothesisReport",
    "ReportOptions",
    "classify_region",
    "region_codes",
    "check_B",
    "check_C",
    "check_D",
    "check_E",
    "A_j",
    "check_F",
    "check_Fprime",
    "solve_zeta",
    "check_zeta_signs",
    "full_report",
]

TOL_SIGN = 1e-12
TOL_MONO = 1e-10
TOL_ZERO = 1e-12
MAX_WITNESSES = 10

HYPOTHESIS_KEYS = ("B0", "B1", "B2", "B3", "C1", "C2", "C2'", "D1", "D2", "E", "F", "F'")


@dataclass(frozen=True)
class AnalysisWindow:
    x_range: tuple = (-2.0, 2.0)
    y_range: tuple = (-2.0, 2.0)
    grid_nx: int = 256
    grid_ny: int = 256

    def __post_init__(self):
        if self.grid_nx < 16 or self.grid_ny < 16:
            raise ValueError("grid sizes must be >= 16")
        if not (self.x_range[0] < self.x_range[1] and self.y_range[0] < self.y_range[1]):
            raise ValueError("window ranges must be increasing")

    def validate_for(self, sys: PlanarSystem):
        a, b = sys.domain
        if not (a < self.x_range[0] and self.x_range[1] < b):
            raise ValueError(f"x_range {self.x_range} must lie inside the domain {sys.domain}")

    @property
    def height(self) -> float:
        return self.y_range[1] - self.y_range[0]

    def xs(self) -> np.ndarray:
        return np.linspace(self.x_range[0], self.x_range[1], self.grid_nx)

    def ys(self) -> np.ndarray:
        return np.linspace(self.y_range[0], self.y_range[1], self.grid_ny)

    def mesh(self):
        """``(X, Y)`` with rows indexed by y and columns by x."""
        return np.meshgrid(self.xs(), self.ys())


class RegionTag(str, enum.Enum):
    D1_GT = "D1_gt"
    D1_LT = "D1_lt"
    D2_GT = "D2_gt"
    D2_LT = "D2_lt"
    OFF = "off_strip"


_CODES = (RegionTag.D1_GT, RegionTag.D1_LT, RegionTag.D2_GT, RegionTag.D2_LT, RegionTag.OFF)
R_D1_GT, R_D1_LT, R_D2_GT, R_D2_LT, R_OFF = range(5)


@dataclass
class HypothesisEntry:
    hypothesis: str
    verdict: str
    samples: int = 0
    tolerance: float = 0.0
    witnesses: list = field(default_factory=list)
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_json(self) -> dict:
        out = {
            "hypothesis": self.hypothesis,
            "verdict": self.verdict,
            "samples": int(self.samples),
            "tolerance": self.tolerance,
            "witnesses": self.witnesses,
        }
        if self.note:
            out["note"] = self.note
        return out


@dataclass
class HypothesisReport:
    entries: dict

    @property
    def overall(self) -> str:
        ok = all(e.verdict in ("pass", "skipped") for e in self.entries.values())
        return "pass" if ok else "fail"

    @property
    def passed(self) -> bool:
        return self.overall == "pass"

    def __getitem__(self, key) -> HypothesisEntry:
        return self.entries[key]

    def failures(self) -> list:
        return [k for k in HYPOTHESIS_KEYS if k in self.entries and self.entries[k].verdict == "fail"]

    def to_json(self) -> dict:
        keys = [k for k in HYPOTHESIS_KEYS if k in self.entries]
        keys += sorted(k for k in self.entries if k not in HYPOTHESIS_KEYS)
        return {"overall": self.overall, "entries": [self.entries[k].to_json() for k in keys]}


@dataclass(frozen=True)
class ReportOptions:
    weakened: bool = False
    tol_sign: float = TOL_SIGN
    tol_mono: float = TOL_MONO
    tol_zero: float = TOL_ZERO


def _need_curves(sys: PlanarSystem):
    if not sys.has_curves:
        raise MissingCurves("psi1 and psi2 must be declared for this check")


def _entry(key, bad_mask, X, Y, values, samples, tol, note=""):
    """Build an entry; witnesses are the first violations in grid (row-major) order."""
    bad = np.flatnonzero(np.asarray(bad_mask).ravel())
    wit = []
    Xf, Yf, Vf = (np.broadcast_to(a, np.shape(bad_mask)).ravel() for a in (X, Y, values))
    for i in bad[:MAX_WITNESSES]:
        wit.append({"x": float(Xf[i]), "y": float(Yf[i]), "value": float(Vf[i])})
    verdict = "fail" if bad.size else "pass"
    if bad.size > MAX_WITNESSES:
        note = (note + "; " if note else "") + f"{bad.size} violations"
    return HypothesisEntry(key, verdict, int(samples), tol, wit, note)


# ---------------------------------------------------------------------------
# regions
# ---------------------------------------------------------------------------


def region_codes(sys: PlanarSystem, x, y) -> np.ndarray:
    """Integer region codes (0..4 in :class:`RegionTag` order) for array inputs."""
    _need_curves(sys)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    p1 = sys.psi1(y) * np.ones_like(y)
    p2 = sys.psi2(y) * np.ones_like(y)
    a, b = sys.domain
    inside = (x > a) & (x < b)
    conds = [
        inside & (x > p1),
        inside & (x > 0) & (x < p1),
        inside & (x < 0) & (x > p2),
        inside & (x < p2),
    ]
    return np.select(conds, [R_D1_GT, R_D1_LT, R_D2_GT, R_D2_LT], default=R_OFF)


def classify_region(sys: PlanarSystem, x: float, y: float) -> RegionTag:
    """Region of ``(x, y)``; points on ``x = 0`` or on a curve are off_strip."""
    return _CODES[int(region_codes(sys, x, y))]


# ---------------------------------------------------------------------------
# B: the curves
# ---------------------------------------------------------------------------


def check_B(sys: PlanarSystem, window: AnalysisWindow, opts: ReportOptions = ReportOptions()) -> dict:
    ys = np.union1d(window.ys(), [0.0])
    zeros = np.zeros_like(ys)
    f0 = sys.F(zeros, ys) * np.ones_like(ys)
    out = {"B0": _entry("B0", np.abs(f0) > opts.tol_zero, zeros, ys, f0, ys.size, opts.tol_zero)}
    if not sys.has_curves:
        for key in ("B1", "B2", "B3"):
            out[key] = HypothesisEntry(key, "fail", 0, opts.tol_sign, [{"x": math.nan, "y": math.nan, "value": math.nan}],
                                       "psi curves not declared")
        return out
    a, b = sys.domain
    for key, psi, dpsi, sign, bound_ok in (
        ("B1", sys.psi1, sys.dpsi1, 1.0, lambda v: v < b),
        ("B2", sys.psi2, sys.dpsi2, -1.0, lambda v: v > a),
    ):
        p = psi(ys) * np.ones_like(ys)
        dp = dpsi(ys) * np.ones_like(ys)
        # sign*psi > 0; sign*psi' >= 0 for y < 0 and <= 0 for y > 0
        bad_sign = ~(sign * p > opts.tol_sign)
        bad_mono = ((ys < 0) & (sign * dp < -opts.tol_sign)) | ((ys > 0) & (sign * dp > opts.tol_sign))
        bad_bound = (ys == 0.0) & ~bound_ok(p)
        bad = bad_sign | bad_mono | bad_bound
        vals = np.where(bad_sign | bad_bound, p, dp)
        entry = _entry(key, bad, p, ys, vals, 3 * ys.size, opts.tol_sign)
        # sign violations first, worst first; then monotonicity in grid order
        order = np.concatenate([
            np.flatnonzero(bad_sign | bad_bound)[np.argsort(sign * p[bad_sign | bad_bound], kind="stable")],
            np.flatnonzero(bad_mono & ~(bad_sign | bad_bound)),
        ])
        entry.witnesses = [{"x": float(p[i]), "y": float(ys[i]), "value": float(vals[i])}
                           for i in order[:MAX_WITNESSES]]
        out[key] = entry
    res = []
    for psi in (sys.psi1, sys.psi2):
        p = psi(ys) * np.ones_like(ys)
        res.append((p, sys.F(p, ys) * np.ones_like(ys)))
    P = np.concatenate([r[0] for r in res])
    V = np.concatenate([r[1] for r in res])
    Yc = np.concatenate([ys, ys])
    out["B3"] = _entry("B3", np.abs(V) > opts.tol_zero, P, Yc, V, V.size, opts.tol_zero)
    return out


# ---------------------------------------------------------------------------
# C: sign conditions
# ---------------------------------------------------------------------------


def check_C(sys: PlanarSystem, window: AnalysisWindow, weakened: bool = False,
            opts: ReportOptions = ReportOptions()) -> dict:
    xs, ys = window.xs(), window.ys()
    xs_nz, ys_nz = xs[xs != 0.0], ys[ys != 0.0]
    yphi = ys_nz * sys.phi(ys_nz)
    xg = xs_nz * sys.g(xs_nz)
    X1 = np.concatenate([np.zeros_like(ys_nz), xs_nz])
    Y1 = np.concatenate([ys_nz, np.zeros_like(xs_nz)])
    V1 = np.concatenate([yphi, xg])
    out = {"C1": _entry("C1", ~(V1 > opts.tol_sign), X1, Y1, V1, V1.size, opts.tol_sign)}

    key, other = ("C2'", "C2") if weakened else ("C2", "C2'")
    out[other] = HypothesisEntry(other, "skipped", note=f"{key} checked instead")
    if not sys.has_curves:
        out[key] = HypothesisEntry(key, "skipped", note="psi curves not declared")
        return out
    X, Y = window.mesh()
    reg = region_codes(sys, X, Y)
    inner = (reg == R_D1_LT) | (reg == R_D2_GT)
    gF = sys.g(X) * sys.F(X, Y)
    n = int(inner.sum())
    if not weakened:
        out[key] = _entry(key, inner & ~(gF < -opts.tol_sign), X, Y, gF, n, opts.tol_sign)
    else:
        entry = _entry(key, inner & (gF > opts.tol_sign), X, Y, gF, n, opts.tol_sign)
        if entry.passed and not np.any(inner & (gF < -opts.tol_sign)):
            i = int(np.flatnonzero(inner.ravel())[0]) if n else 0
            entry = HypothesisEntry(key, "fail", n, opts.tol_sign,
                                    [{"x": float(X.ravel()[i]), "y": float(Y.ravel()[i]), "value": float(gF.ravel()[i])}],
                                    "g*F never strictly negative on the inner regions")
        out[key] = entry
    return out


# ---------------------------------------------------------------------------
# D, E: monotonicity
# ---------------------------------------------------------------------------


def _column_pairs(mask: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Consecutive-in-y pairs (along axis 0) both in ``mask`` and on the same side of y = 0."""
    same_side = (np.sign(Y[:-1]) == np.sign(Y[1:])) & (Y[:-1] != 0) & (Y[1:] != 0)
    return mask[:-1] & mask[1:] & same_side


def check_D(sys: PlanarSystem, window: AnalysisWindow, opts: ReportOptions = ReportOptions()) -> dict:
    _need_curves(sys)
    X, Y = window.mesh()
    reg = region_codes(sys, X, Y)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = sys.F(X, Y) / (sys.phi(Y) * np.ones_like(Y))
    diff = ratio[1:] - ratio[:-1]
    out = {}
    for key, code, sgn in (("D1", R_D1_LT, 1.0), ("D2", R_D2_GT, -1.0)):
        pairs = _column_pairs(reg == code, Y)
        bad = pairs & ~(sgn * diff > opts.tol_mono)
        out[key] = _entry(key, bad, X[1:], Y[1:], diff, pairs.sum(), opts.tol_mono)
    return out


def check_E(sys: PlanarSystem, window: AnalysisWindow, opts: ReportOptions = ReportOptions()) -> dict:
    _need_curves(sys)
    X, Y = window.mesh()
    reg = region_codes(sys, X, Y)
    F = sys.F(X, Y)
    outer_gt, outer_lt = reg == R_D1_GT, reg == R_D2_LT
    bad_sign = (outer_gt & ~(F > opts.tol_sign)) | (outer_lt & ~(F < -opts.tol_sign))
    dF = F[:, 1:] - F[:, :-1]
    pairs = (outer_gt[:, :-1] & outer_gt[:, 1:]) | (outer_lt[:, :-1] & outer_lt[:, 1:])
    bad_mono = pairs & ~(dF > opts.tol_mono)
    n = int(outer_gt.sum() + outer_lt.sum() + pairs.sum())
    if bad_sign.any():
        entry = _entry("E", bad_sign, X, Y, F, n, opts.tol_mono)
        # half the witness budget per outer region so both sides are represented
        half = MAX_WITNESSES // 2
        gt = _entry("E", bad_sign & outer_gt, X, Y, F, 0, opts.tol_mono).witnesses
        lt = _entry("E", bad_sign & outer_lt, X, Y, F, 0, opts.tol_mono).witnesses
        mono = _entry("E", bad_mono, X[:, 1:], Y[:, 1:], dF, 0, opts.tol_mono).witnesses
        first = gt[:half] + lt[:half]
        entry.witnesses = (first + gt[half:] + lt[half:] + mono)[:MAX_WITNESSES]
    else:
        entry = _entry("E", bad_mono, X[:, 1:], Y[:, 1:], dF, n, opts.tol_mono)
    return {"E": entry}


# ---------------------------------------------------------------------------
# F, F': transversality along the curves
# ---------------------------------------------------------------------------


def A_j(sys: PlanarSystem, j: int, y):
    """``phi(y) dF/dx - g(x) dF/dy`` at ``x = psi_j(y)``."""
    _need_curves(sys)
    if j not in (1, 2):
        raise ValueError("j must be 1 or 2")
    psi = sys.psi1 if j == 1 else sys.psi2
    x = psi(y)
    fx, fy = sys.F.partials(x, y)
    return sys.phi(y) * fx - sys.g(x) * fy


def _grid_y_nonzero(window):
    ys = window.ys()
    return ys[ys != 0.0]


def check_F(sys: PlanarSystem, window: AnalysisWindow, opts: ReportOptions = ReportOptions()) -> dict:
    _need_curves(sys)
    ys = _grid_y_nonzero(window)
    Ys, Xs, Vs, bad = [], [], [], []
    for j, psi in ((1, sys.psi1), (2, sys.psi2)):
        v = A_j(sys, j, ys) * np.ones_like(ys)
        Ys.append(ys)
        Xs.append(psi(ys) * np.ones_like(ys))
        Vs.append(v)
        bad.append(~(v * ys > opts.tol_sign * np.abs(ys)))
    cat = np.concatenate
    return {"F": _entry("F", cat(bad), cat(Xs), cat(Ys), cat(Vs), 2 * ys.size, opts.tol_sign)}


def fprime_rate(sys: PlanarSystem, j: int, y):
    """Derivative of ``y -> Phi(y) + G(psi_j(y))``."""
    psi, dpsi = (sys.psi1, sys.dpsi1) if j == 1 else (sys.psi2, sys.dpsi2)
    return sys.phi(y) + sys.g(psi(y)) * dpsi(y)


def check_Fprime(sys: PlanarSystem, window: AnalysisWindow, opts: ReportOptions = ReportOptions()) -> dict:
    if not isinstance(sys.F, SpecialForm):
        raise NotSpecialForm("F' is only defined for the special form of F")
    ys = _grid_y_nonzero(window)
    Ys, Xs, Vs, bad = [], [], [], []
    for j, psi in ((1, sys.psi1), (2, sys.psi2)):
        v = fprime_rate(sys, j, ys) * np.ones_like(ys)
        Ys.append(ys)
        Xs.append(psi(ys) * np.ones_like(ys))
        Vs.append(v)
        bad.append(~(v * ys > opts.tol_sign * np.abs(ys)))
    cat = np.concatenate
    return {"F'": _entry("F'", cat(bad), cat(Xs), cat(Ys), cat(Vs), 2 * ys.size, opts.tol_sign)}


# ---------------------------------------------------------------------------
# the zeta curve: zeros of phi(y) - F(x, y) on the inner regions
# ---------------------------------------------------------------------------


def _bisect(f, lo, hi, flo, tol_res=0.0, max_iter=200):
    """Plain bisection on a sign change; returns the endpoint with the smaller residual."""
    fhi = f(hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        fm = f(mid)
        if fm == 0.0:
            return mid, 0.0
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
    return (lo, flo) if abs(flo) <= abs(fhi) else (hi, fhi)


def inner_y_interval(sys: PlanarSystem, x: float, Y: float):
    """``{y in [-Y, Y] : x strictly between 0 and psi_j(y)}`` as ``(lo, hi)``.

    Relies on B1/B2: psi_j is unimodal with its extremum at y = 0.
    """
    psi = sys.psi1 if x > 0 else sys.psi2
    gap = (lambda y: psi(y) - x) if x > 0 else (lambda y: x - psi(y))
    ends = []
    for edge in (-Y, Y):
        if gap(edge) > 0:
            ends.append(edge)
        else:
            ends.append(_bisect(gap, 0.0, edge, gap(0.0))[0])
    return ends[0], ends[1]


def zeta_residual(sys: PlanarSystem, x, y):
    return sys.phi(y) - sys.F(x, y)


def solve_zeta(sys: PlanarSystem, x: float, window: Optional[AnalysisWindow] = None, n_scan: int = 2001) -> float:
    """The unique ``y`` with ``phi(y) = F(x, y)`` and ``(x, y)`` in D1_lt or D2_gt."""
    _need_curves(sys)
    p2, p1 = float(sys.psi2(0.0)), float(sys.psi1(0.0))
    if not ((p2 < x < 0.0) or (0.0 < x < p1)):
        raise ValueError(f"x={x!r} must lie in (psi2(0), 0) or (0, psi1(0))")
    Y = (window or AnalysisWindow()).height
    f = lambda y: float(zeta_residual(sys, x, y))
    scanned = None
    for span in (Y, 2.0 * Y):
        lo, hi = inner_y_interval(sys, x, span)
        ys = np.linspace(lo, hi, n_scan)
        vals = zeta_residual(sys, x, ys)
        idx = np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)
        scanned = (float(lo), float(hi))
        if idx.size:
            i = int(idx[0])
            if vals[i] == 0.0:
                return float(ys[i])
            root, _ = _bisect(f, float(ys[i]), float(ys[i + 1]), float(vals[i]))
            return float(root)
    raise NoBracket(x, scanned)


def check_zeta_signs(sys: PlanarSystem, n: int = 50, window: Optional[AnalysisWindow] = None,
                     offset: float = 1e-4, boundary_tol: float = 1e-3) -> HypothesisEntry:
    """Sign pattern of zeta: positive on (psi2(0), 0), negative on (0, psi1(0)), ~0 near the ends."""
    _need_curves(sys)
    p2, p1 = float(sys.psi2(0.0)), float(sys.psi1(0.0))
    left = np.linspace(p2, 0.0, n + 2)[1:-1]
    right = np.linspace(0.0, p1, n + 2)[1:-1]
    wit = []
    max_res = 0.0
    for xs, sgn in ((left, 1.0), (right, -1.0)):
        for x in xs:
            z = solve_zeta(sys, float(x), window)
            max_res = max(max_res, abs(float(zeta_residual(sys, x, z))))
            if not sgn * z > 0:
                wit.append({"x": float(x), "y": z, "value": z})
    for x in (p2 + offset, -offset, offset, p1 - offset):
        z = solve_zeta(sys, float(x), window)
        if not abs(z) <= boundary_tol:
            wit.append({"x": float(x), "y": z, "value": z})
    verdict = "fail" if wit else "pass"
    return HypothesisEntry("zeta", verdict, 2 * n + 4, boundary_tol, wit[:MAX_WITNESSES],
                           f"max residual {max_res:.3g}")


# ---------------------------------------------------------------------------
# aggregate
# ---------------------------------------------------------------------------


def full_report(sys: PlanarSystem, window: Optional[AnalysisWindow] = None,
                options: ReportOptions = ReportOptions()) -> HypothesisReport:
    window = window or AnalysisWindow()
    window.validate_for(sys)
    entries = {}
    entries.update(check_B(sys, window, options))
    entries.update(check_C(sys, window, options.weakened, options))
    if sys.has_curves:
        entries.update(check_D(sys, window, options))
        entries.update(check_E(sys, window, options))
        entries.update(check_F(sys, window, options))
    else:
        for key in ("D1", "D2", "E", "F"):
            entries[key] = HypothesisEntry(key, "skipped", note="psi curves not declared")
    if isinstance(sys.F, SpecialForm):
        entries.update(check_Fprime(sys, window, options))
    else:
        entries["F'"] = HypothesisEntry("F'", "skipped", note="F is not of the special form")
    return HypothesisReport(entries)
