"""Command-line front end: ``planarcycles {check,cycle,zeta,render}``.

Exit codes: 0 success or pass, 1 semantic failure (a hypothesis fails, the
zeta sign pattern fails, or two cycles cross both curves), 2 usage or
configuration error.  Every output file is written to a temporary name in
the output directory and renamed into place.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .cycles import find_cycles
from .errors import PlanarCyclesError
from .examples import PRESETS, get_preset
from .funcdesc import PlanarSystem, system_from_json, system_to_json, vector_field
from .hypotheses import AnalysisWindow, HypothesisEntry, check_C, check_D, check_zeta_signs, full_report, solve_zeta
from .integrator import IntegratorConfig, integrate

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

RENDER_SEEDS = (("inside", (0.2, 0.0)), ("outside", (3.0, 0.0)), ("above", (0.0, 2.5)))
CURVE_POINTS = 1001
FIELD_GRID = 25
ZETA_SAMPLES = 200
ZETA_OFFSET = 1e-4


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    system: PlanarSystem
    source: str
    window: AnalysisWindow
    integrator: IntegratorConfig
    scan: tuple  # (x_lo, x_hi, n)
    out_dir: Path
    seed: int = 0
    extra: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


def _floats(text: str, n: int, what: str) -> list:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise ConfigError(f"{what}: expected {n} comma-separated numbers, got {text!r}") from None
    if len(vals) != n:
        raise ConfigError(f"{what}: expected {n} comma-separated numbers, got {text!r}")
    return vals


def _load_system(args):
    if args.preset:
        try:
            p = get_preset(args.preset)
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from None
        return p.system, p.window, f"preset:{args.preset}"
    path = Path(args.system)
    try:
        obj = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        sys_ = system_from_json(obj)
    except (ValueError, TypeError, KeyError, PlanarCyclesError) as exc:
        raise ConfigError(f"{path}: invalid system description: {exc}") from None
    return sys_, AnalysisWindow(), f"file:{path}"


def build_config(args) -> RunConfig:
    system, window, source = _load_system(args)
    if args.window:
        x0, x1, y0, y1 = _floats(args.window, 4, "--window")
        try:
            window = AnalysisWindow((x0, x1), (y0, y1))
        except ValueError as exc:
            raise ConfigError(f"--window: {exc}") from None
    try:
        window.validate_for(system)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    base = IntegratorConfig()
    try:
        icfg = IntegratorConfig(rel_tol=args.rtol if args.rtol is not None else base.rel_tol,
                                abs_tol=args.atol if args.atol is not None else base.abs_tol)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if args.scan:
        lo, hi, n = _floats(args.scan, 3, "--scan")
        if n != int(n) or n < 2:
            raise ConfigError("--scan: n must be an integer >= 2")
        n = int(n)
    else:
        lo, hi, n = 0.05, min(system.domain[1], window.x_range[1]), 64
    if not (0.0 < lo < hi < system.domain[1]):
        raise ConfigError(f"--scan: need 0 < lo < hi < b, got lo={lo!r}, hi={hi!r}")
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from None
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory {out} is not writable")
    return RunConfig(system, source, window, icfg, (lo, hi, n), out, args.seed)


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


@contextlib.contextmanager
def _atomic(path: Path):
    """Yield a temporary path next to ``path``; rename it into place on success."""
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    os.close(fd)
    try:
        yield tmp
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _write_json(path: Path, obj) -> None:
    with _atomic(path) as tmp, open(tmp, "w") as fh:
        json.dump(obj, fh, indent=2, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _write_csv(path: Path, header, rows) -> None:
    with _atomic(path) as tmp, open(tmp, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])


def _meta(cfg: RunConfig) -> dict:
    return {
        "source": cfg.source,
        "window": {"x_range": list(cfg.window.x_range), "y_range": list(cfg.window.y_range)},
        "rtol": cfg.integrator.rel_tol,
        "atol": cfg.integrator.abs_tol,
        "seed": cfg.seed,
    }


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_check(cfg: RunConfig) -> int:
    report = full_report(cfg.system, cfg.window)
    out = dict(report.to_json(), config=_meta(cfg))
    _write_json(cfg.out_dir / "report.json", out)
    for e in out["entries"]:
        print(f"{e['hypothesis']:<4} {e['verdict']}")
    print(f"overall {report.overall}")
    return EXIT_OK if report.passed else EXIT_FAIL


def _run_cycles(cfg: RunConfig):
    lo, hi, n = cfg.scan
    return find_cycles(cfg.system, lo, hi, n, cfg.integrator)


def cmd_cycle(cfg: RunConfig) -> int:
    scan, certs, verdict, errors = _run_cycles(cfg)
    files = []
    for k, c in enumerate(certs):
        name = f"cycle_{k}.csv"
        _write_csv(cfg.out_dir / name, ["t", "x", "y"], [tuple(float(v) for v in r) for r in c.curve])
        files.append(name)
    out = {
        "verdict": verdict.verdict,
        "certificates": [dict(c.to_json(), bracket=list(c.bracket), curve_file=f)
                         for c, f in zip(certs, files)],
        "scan": {"x_lo": cfg.scan[0], "x_hi": cfg.scan[1], "n": cfg.scan[2],
                 "sign_changes": scan.sign_changes, "failures": scan.failures},
        "refine_errors": errors,
        "config": _meta(cfg),
    }
    if not verdict.consistent:
        out["witness"] = verdict.dump
    _write_json(cfg.out_dir / "certificates.json", out)
    for c in certs:
        print(f"cycle x*={c.section_x:.12g} period={c.period:.10g} I_gamma={c.I_gamma:.3g} "
              f"multiplier={c.stability_multiplier:.6g} crossings={c.crossings}")
    print(f"{len(certs)} certificate(s); verdict {verdict.verdict}")
    return EXIT_OK if verdict.consistent else EXIT_FAIL


def cmd_zeta(cfg: RunConfig) -> int:
    sys_ = cfg.system
    if not sys_.has_curves:
        print("precondition failed: psi curves not declared", file=sys.stderr)
        return EXIT_FAIL
    pre = {}
    pre.update(check_C(sys_, cfg.window))
    pre.update(check_D(sys_, cfg.window))
    bad = [k for k in ("C1", "C2", "D1", "D2") if pre[k].verdict != "pass"]
    if bad:
        print(f"precondition failed: {', '.join(bad)}", file=sys.stderr)
        return EXIT_FAIL
    p2, p1 = float(sys_.psi2(0.0)), float(sys_.psi1(0.0))
    rows = []
    try:
        for lo, hi in ((p2, 0.0), (0.0, p1)):
            for x in np.linspace(lo, hi, ZETA_SAMPLES + 2)[1:-1]:
                rows.append((float(x), solve_zeta(sys_, float(x), cfg.window), "sample"))
        for x in (p2 + ZETA_OFFSET, -ZETA_OFFSET, ZETA_OFFSET, p1 - ZETA_OFFSET):
            rows.append((float(x), solve_zeta(sys_, float(x), cfg.window), "boundary"))
        entry = check_zeta_signs(sys_, window=cfg.window)
    except PlanarCyclesError as exc:
        print(f"zeta: {exc}", file=sys.stderr)
        entry = HypothesisEntry("zeta", "fail", note=str(exc))
    rows.sort(key=lambda r: (r[0], r[2]))
    _write_csv(cfg.out_dir / "zeta.csv", ["x", "zeta", "kind"], rows)
    print(f"zeta sign pattern {entry.verdict}")
    return EXIT_OK if entry.passed else EXIT_FAIL


def cmd_render(cfg: RunConfig) -> int:
    sys_, w = cfg.system, cfg.window
    files = []

    def emit(name, header, rows):
        _write_csv(cfg.out_dir / name, header, rows)
        files.append(name)

    ys = np.linspace(w.y_range[0], w.y_range[1], CURVE_POINTS)
    if sys_.has_curves:
        for name, psi in (("psi1.csv", sys_.psi1), ("psi2.csv", sys_.psi2)):
            xs = psi(ys) * np.ones_like(ys)
            emit(name, ["y", "x"], [(float(y), float(x)) for y, x in zip(ys, xs)])

    X, Y = np.meshgrid(np.linspace(*w.x_range, FIELD_GRID), np.linspace(*w.y_range, FIELD_GRID))
    U, V = vector_field(sys_, X, Y)
    U, V = U * np.ones_like(X), V * np.ones_like(X)
    norm = np.hypot(U, V)
    safe = np.where(norm > 0, norm, 1.0)
    U, V = np.where(norm > 0, U / safe, 0.0), np.where(norm > 0, V / safe, 0.0)
    emit("field.csv", ["x", "y", "u", "v"],
         [tuple(float(v) for v in r) for r in zip(X.ravel(), Y.ravel(), U.ravel(), V.ravel())])

    _, certs, verdict, _ = _run_cycles(cfg)
    cyc = next((c for c in certs if c.crosses_both), certs[0] if certs else None)
    curve = [] if cyc is None else [tuple(float(v) for v in r) for r in cyc.curve]
    emit("cycle.csv", ["t", "x", "y"], curve)

    span = 12.0 * cyc.period if cyc is not None else 60.0
    tcfg = IntegratorConfig(cfg.integrator.rel_tol, cfg.integrator.abs_tol, max_time=span)
    for label, seed in RENDER_SEEDS:
        try:
            traj = integrate(sys_, seed, tcfg)
        except PlanarCyclesError as exc:
            traj = getattr(exc, "trajectory", None)
            if traj is None:
                raise
        rows = [tuple(float(v) for v in r) for r in traj.sample(per_step=4)]
        emit(f"traj_{label}.csv", ["t", "x", "y"], rows)

    manifest = {
        "files": files,
        "seeds": {label: list(seed) for label, seed in RENDER_SEEDS},
        "cycle": None if cyc is None else {"section_x": cyc.section_x, "period": cyc.period},
        "verdict": verdict.verdict,
        "config": _meta(cfg),
    }
    _write_json(cfg.out_dir / "manifest.json", manifest)
    print(f"wrote {len(files)} data files to {cfg.out_dir}")
    return EXIT_OK


COMMANDS = {"check": cmd_check, "cycle": cmd_cycle, "zeta": cmd_zeta, "render": cmd_render}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="planarcycles", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--preset", help=f"one of {', '.join(sorted(PRESETS))}")
        src.add_argument("--system", metavar="FILE", help="system description JSON")
        p.add_argument("--window", metavar="x0,x1,y0,y1")
        p.add_argument("--scan", metavar="lo,hi,n")
        p.add_argument("--rtol", type=float)
        p.add_argument("--atol", type=float)
        p.add_argument("--out", default=".", metavar="DIR")
        p.add_argument("--seed", type=int, default=0)
    return parser


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = build_config(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return COMMANDS[args.command](cfg)


def dump_preset(name: str) -> str:
    """JSON text of a preset system, handy as a template for ``--system``."""
    return json.dumps(system_to_json(get_preset(name).system), indent=2)


if __name__ == "__main__":
    sys.exit(main())
