"""Adaptive Dormand-Prince integration with dense output and section events.

The state carries a third component ``J`` with ``J' = g(x) F(x, y)``, so the
integral of ``g F`` along any stretch of orbit is read off the dense output
under the same error control as the orbit itself.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from . import _backend
from ._tape import compile_system
from .errors import BudgetExhausted, DomainExceeded, GrazingWarning, NoReturn, StepUnderflow
from .funcdesc import PlanarSystem

__all__ = [
    "IntegratorConfig",
    "SectionEvent",
    "Trajectory",
    "EVENT_KINDS",
    "integrate",
    "first_return",
    "backend_name",
]

EVENT_KINDS = ("pos_x_axis_down", "neg_x_axis_up", "psi1_cross", "psi2_cross", "x_axis_any")
_TERMINAL_CODES = {None: 0, "pos_x_axis_down": 1, "neg_x_axis_up": 2, "x_axis_any": 3}
_TIME_TOL = 1e-12
_GRAZE_TOL = 1e-12

# dense output of the Dormand-Prince pair (continuous extension of order 4)
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])


def backend_name() -> str:
    return _backend.NAME


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = math.inf
    max_time: float = 500.0
    max_steps: int = 1_000_000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if not self.max_step > 0 or not self.max_time > 0:
            raise ValueError("max_step and max_time must be positive")

    def tightened(self, factor: float) -> "IntegratorConfig":
        return IntegratorConfig(
            rel_tol=max(self.rel_tol * factor, 1e-14),
            abs_tol=max(self.abs_tol * factor, 1e-16),
            max_step=self.max_step,
            max_time=self.max_time,
            max_steps=self.max_steps,
        )


@dataclass(frozen=True)
class SectionEvent:
    kind: str
    t: float
    x: float
    y: float


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Accepted steps of one integration run.

    ``records`` has one row per accepted step ``[t, h, x, y, J, k...]`` and a
    final row holding only the end state.  ``t_final`` is the end of the
    requested span: the terminal event time when one stopped the run.
    """

    system: PlanarSystem
    records: np.ndarray
    events: tuple = ()
    status: str = "end_time"
    t_final: float = math.nan
    nfev: int = 0
    _Q: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self._Q is None:
            K = self.records[:-1, 5:26].reshape(-1, 7, 3)
            object.__setattr__(self, "_Q", np.einsum("nkc,kp->ncp", K, _P))
        if math.isnan(self.t_final):
            object.__setattr__(self, "t_final", float(self.records[-1, 0]))

    @property
    def n_steps(self) -> int:
        return self.records.shape[0] - 1

    @property
    def t(self) -> np.ndarray:
        return self.records[:, 0]

    @property
    def x(self) -> np.ndarray:
        return self.records[:, 2]

    @property
    def y(self) -> np.ndarray:
        return self.records[:, 3]

    @property
    def J(self) -> np.ndarray:
        return self.records[:, 4]

    @property
    def samples(self) -> np.ndarray:
        """``(N, 3)`` array of step-boundary states ``(t, x, y)``."""
        return self.records[:, [0, 2, 3]].copy()

    @property
    def t_start(self) -> float:
        return float(self.records[0, 0])

    def _step_state(self, i: int, theta):
        th = np.asarray(theta, dtype=float)
        powers = np.stack([th, th * th, th ** 3, th ** 4])
        h = self.records[i, 1]
        base = self.records[i, 2:5]
        if np.ndim(i) == 0:
            return base + h * (self._Q[i] @ powers)
        return (base.T + h * np.einsum("ncp,pn->cn", self._Q[i], powers))

    def state_at(self, t):
        """Dense-output state ``(x, y, J)`` at time(s) ``t`` within the run."""
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        tgrid = self.records[:, 0]
        if np.any(tt < tgrid[0] - 1e-12) or np.any(tt > tgrid[-1] + 1e-12):
            raise ValueError("time outside the integrated span")
        if self.n_steps == 0:
            out = np.repeat(self.records[0, 2:5][:, None], tt.size, axis=1)
        else:
            idx = np.clip(np.searchsorted(tgrid, tt, side="right") - 1, 0, self.n_steps - 1)
            theta = (tt - tgrid[idx]) / self.records[idx, 1]
            out = self._step_state(idx, theta)
        if np.ndim(t) == 0:
            return tuple(float(v) for v in out[:, 0])
        return out[0], out[1], out[2]

    def gF_integral(self, t0: Optional[float] = None, t1: Optional[float] = None) -> float:
        """Integral of ``g(x) F(x, y)`` dt between two times of the run."""
        t0 = self.t_start if t0 is None else t0
        t1 = self.t_final if t1 is None else t1
        return self.state_at(t1)[2] - self.state_at(t0)[2]

    def sample(self, t0: Optional[float] = None, t1: Optional[float] = None, per_step: int = 8) -> np.ndarray:
        """Dense samples ``(t, x, y)`` on ``[t0, t1]``, ``per_step`` points per step."""
        t0 = self.t_start if t0 is None else t0
        t1 = self.t_final if t1 is None else t1
        tgrid = self.records[:, 0]
        inner = tgrid[(tgrid > t0) & (tgrid < t1)]
        knots = np.concatenate([[t0], inner, [t1]])
        frac = np.arange(per_step) / per_step
        ts = (knots[:-1, None] + np.diff(knots)[:, None] * frac[None, :]).ravel()
        ts = np.append(ts, t1)
        x, y, _ = self.state_at(ts)
        return np.column_stack([ts, x, y])

    def to_csv(self, path) -> None:
        """Write step-boundary samples with events merged in, ``t,x,y,event``."""
        rows = [(float(t), float(x), float(y), "") for t, x, y in self.samples]
        rows += [(e.t, e.x, e.y, e.kind) for e in self.events]
        rows.sort(key=lambda r: (r[0], r[3]))
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "y", "event"])
            for t, x, y, ev in rows:
                w.writerow([f"{t:.17g}", f"{x:.17g}", f"{y:.17g}", ev])


# ---------------------------------------------------------------------------
# events
# ---------------------------------------------------------------------------


def _event_function(sys: PlanarSystem, kind: str):
    if kind in ("pos_x_axis_down", "neg_x_axis_up", "x_axis_any"):
        return lambda x, y: y
    if kind == "psi1_cross":
        return lambda x, y: x - sys.psi1(y)
    if kind == "psi2_cross":
        return lambda x, y: x - sys.psi2(y)
    raise ValueError(f"unknown event kind {kind!r}")


def _event_rate(sys: PlanarSystem, kind: str, x: float, y: float) -> float:
    xdot = sys.phi(y) - sys.F(x, y)
    ydot = -sys.g(x)
    if kind == "psi1_cross":
        return float(xdot - sys.dpsi1(y) * ydot)
    if kind == "psi2_cross":
        return float(xdot - sys.dpsi2(y) * ydot)
    return float(ydot)


def _accept_direction(kind: str, x: float, rate: float) -> bool:
    if kind == "pos_x_axis_down":
        return x > 0.0 and rate < 0.0
    if kind == "neg_x_axis_up":
        return x < 0.0 and rate > 0.0
    return True


def _locate(traj: Trajectory, i: int, fn, s_lo: float) -> float:
    """Bisection for the event time inside step ``i`` on the dense interpolant."""
    h = traj.records[i, 1]
    lo, hi = 0.0, 1.0
    while (hi - lo) * h > _TIME_TOL:
        mid = 0.5 * (lo + hi)
        x, y, _ = traj._step_state(i, mid)
        s = fn(float(x), float(y))
        if s == 0.0:
            lo = hi = mid
            break
        if (s > 0) == (s_lo > 0):
            lo = mid
        else:
            hi = mid
    return traj.records[i, 0] + 0.5 * (lo + hi) * h


def find_events(traj: Trajectory, kinds: Iterable[str], t_max: Optional[float] = None) -> list:
    """Locate every requested event along the stored steps, in time order."""
    sys = traj.system
    out = []
    xs, ys = traj.x, traj.y
    for kind in kinds:
        if kind in ("psi1_cross", "psi2_cross") and not sys.has_curves:
            from .errors import MissingCurves
            raise MissingCurves(f"event {kind} needs psi curves")
        fn = _event_function(sys, kind)
        vals = np.asarray(fn(xs, ys), dtype=float) * np.ones_like(xs)
        s0, s1 = vals[:-1], vals[1:]
        hits = np.flatnonzero((s0 != 0.0) & ((s0 > 0) != (s1 > 0)) | ((s0 != 0.0) & (s1 == 0.0)))
        for i in hits:
            i = int(i)
            te = _locate(traj, i, fn, float(s0[i]))
            if t_max is not None and te > t_max + _TIME_TOL:
                continue
            x, y, _ = traj.state_at(te)
            rate = _event_rate(sys, kind, x, y)
            if abs(rate) < _GRAZE_TOL:
                warnings.warn(f"grazing contact for {kind} at t={te!r}", GrazingWarning, stacklevel=2)
                continue
            if kind in ("pos_x_axis_down", "neg_x_axis_up", "x_axis_any"):
                y = 0.0 if abs(y) <= 1e-10 else y
            if _accept_direction(kind, x, rate):
                out.append(SectionEvent(kind, float(te), float(x), float(y)))
    out.sort(key=lambda e: (e.t, e.kind))
    return out


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

_STATUS = {0: "end_time", 1: "terminal", 2: "domain", 3: "underflow", 4: "budget"}


def _run(sys, tape, t0, x0, y0, J0, cfg, max_time, max_steps, terminal_code):
    a, b = sys.domain
    return _backend.kernel.run_dopri(
        tape.nodes, tape.params, tape.children, tape.phi, tape.g, tape.F,
        float(t0), float(x0), float(y0), float(J0),
        float(cfg.rel_tol), float(cfg.abs_tol), 0.0, float(cfg.max_step),
        float(max_time), int(max_steps), float(a), float(b), int(terminal_code),
    )


def integrate(
    sys: PlanarSystem,
    start,
    config: Optional[IntegratorConfig] = None,
    events: Iterable[str] = (),
    terminal: Optional[str] = None,
    t0: float = 0.0,
) -> Trajectory:
    """Integrate from ``start = (x, y)`` until ``config.max_time`` or ``terminal``.

    Raises
    ------
    DomainExceeded, StepUnderflow, BudgetExhausted
        The partial trajectory is attached as ``exc.trajectory``.
    """
    cfg = config or IntegratorConfig()
    x0, y0 = float(start[0]), float(start[1])
    sys.check_domain(x0)
    if x0 == 0.0 and y0 == 0.0:
        raise ValueError("start must differ from the singular point (0, 0)")
    if terminal not in _TERMINAL_CODES:
        raise ValueError(f"terminal event must be one of {sorted(k for k in _TERMINAL_CODES if k)}")
    kinds = list(dict.fromkeys(list(events) + ([terminal] if terminal else [])))
    tape = compile_system(sys)

    chunks = []
    nfev = 0
    t, x, y, J = t0, x0, y0, 0.0
    steps_left = cfg.max_steps
    time_left = cfg.max_time
    term_event = None
    while True:
        code, rec, nf = _run(sys, tape, t, x, y, J, cfg, time_left, steps_left, _TERMINAL_CODES[terminal])
        nfev += nf
        chunks.append(rec[:-1])
        last = rec[-1]
        status = _STATUS[code]
        if status != "terminal":
            break
        piece = Trajectory(sys, rec[-2:].copy() if rec.shape[0] >= 2 else rec)
        found = [e for e in find_events(piece, [terminal]) if e.kind == terminal]
        t, x, y, J = last[0], last[2], last[3], last[4]
        steps_left -= rec.shape[0] - 1
        time_left = cfg.max_time - (t - t0)
        if found:
            term_event = found[0]
            break
        if steps_left <= 0 or time_left <= 0:
            status = "budget" if steps_left <= 0 else "end_time"
            break

    records = np.vstack(chunks + [last[None, :]])
    traj = Trajectory(sys, records, status=status,
                      t_final=term_event.t if term_event else math.nan, nfev=nfev)
    evs = find_events(traj, kinds, t_max=traj.t_final) if kinds else []
    if term_event is not None:
        evs = [e for e in evs if e.t <= term_event.t + _TIME_TOL]
        if not any(e.kind == terminal and e.t == term_event.t for e in evs):
            evs.append(term_event)
            evs.sort(key=lambda e: (e.t, e.kind))
    traj = Trajectory(sys, records, tuple(evs), status, traj.t_final, nfev, traj._Q)

    if status == "domain":
        exc = DomainExceeded(float(records[-1, 2]), sys.domain)
    elif status == "underflow":
        exc = StepUnderflow(f"step size fell below 1e-14 at t={records[-1, 0]!r}")
    elif status == "budget":
        exc = BudgetExhausted(f"max_steps={cfg.max_steps} reached at t={records[-1, 0]!r}")
    else:
        return traj
    exc.trajectory = traj
    raise exc


def first_return(sys: PlanarSystem, x0: float, config: Optional[IntegratorConfig] = None, events=()):
    """Return map on the positive x-axis (downward crossings).

    Returns ``(x1, period, trajectory)``.
    """
    a, b = sys.domain
    if not (0.0 < x0 < b):
        raise ValueError(f"x0 must lie in (0, b), got {x0!r}")
    try:
        traj = integrate(sys, (x0, 0.0), config, events=events, terminal="pos_x_axis_down")
    except (BudgetExhausted, StepUnderflow) as exc:
        raise NoReturn(f"no return from x0={x0!r}: {exc}") from exc
    ret = [e for e in traj.events if e.kind == "pos_x_axis_down"]
    if traj.status != "terminal" or not ret:
        raise NoReturn(f"no return from x0={x0!r} within max_time")
    ev = ret[-1]
    return ev.x, ev.t, traj
