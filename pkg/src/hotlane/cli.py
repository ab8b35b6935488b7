"""Command line entry point: ``hotlane run | reproduce | sweep``.

Exit codes: 0 success, 1 usage, 2 schema/validation error, 3 numeric abort,
4 no convergence (only with ``--require-convergence``).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import analysis, estimation, kernels, scenario_io
from .domain import Gains, ScenarioConfig, ScenarioError, validate_scenario
from .lane_choice import LogitModel, UeModel
from .sim_engine import NumericAbort, SimTrace, detect_convergence, queue_clear_time, run

log = logging.getLogger("hotlane")

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_NUMERIC, EXIT_NO_CONVERGENCE = 0, 1, 2, 3, 4
OUT_ROOT_ENV = "HOTLANE_OUT_ROOT"

TRACE_COLUMNS = kernels.COLUMNS + ("clamped",)
FIGURES = ("logit-constant", "logit-poisson", "ue-constant", "ue-poisson", "logit-phase", "ue-phase")
SWEEPABLE = ("theorem1", "k1", "k2", "k3", "k4", "k12", "k34", "dt", "horizon", "seed")
DEFAULT_EPS = 0.05


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------- #
# Writers
# --------------------------------------------------------------------------- #


def _fmt(v) -> str:
    return repr(float(v))


def write_trace_csv(trace: SimTrace, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for row, clamped in zip(trace.data, trace.clamped):
            writer.writerow([_fmt(v) for v in row] + [int(bool(clamped))])


def write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def write_estimates(trace: SimTrace, out_dir: Path) -> list[str]:
    """Estimation artifacts for the trace's model family; returns file names."""
    model = trace.config.choice_model
    if isinstance(model, LogitModel):
        pi_hat = estimation.logit_vot_series(trace.u_applied, trace.w, trace.q2, trace.q3, model.alpha_star)
        ok = np.isfinite(pi_hat)
        write_rows(out_dir / "estimates.csv", ("t", "pi_hat"), zip(trace.t[ok], pi_hat[ok]))
        return ["estimates.csv"]
    if isinstance(model, UeModel):
        rows = []
        for t, u, w, q2, q3 in zip(trace.t, trace.u_applied, trace.w, trace.q2, trace.q3):
            pt = estimation.accumulate_cdf_point(float(u), float(w), float(q2), float(q3))
            if pt is not None:
                rows.append((float(t), pt.x, pt.F_hat))
        write_rows(out_dir / "estimates.csv", ("t", "x", "F_hat"), rows)
        names = ["estimates.csv"]
        points = [estimation.EmpiricalCdfPoint(x, F) for _, x, F in rows]
        try:
            pdf = estimation.empirical_pdf(points)
        except estimation.InsufficientData:
            return names
        write_rows(out_dir / "pdf.csv", ("x", "f_hat"), pdf)
        names.append("pdf.csv")
        return names
    return []


def summarize(trace: SimTrace, eps: float = DEFAULT_EPS) -> dict:
    t_conv = detect_convergence(trace, eps, eps)
    return {
        "scenario": trace.config.name,
        "seed": trace.seed,
        "steps": len(trace),
        "converged_at_min": t_conv,
        "convergence_eps": eps,
        "hot_queue_cleared_at_min": queue_clear_time(trace, eps),
        "max_lambda1_veh": float(trace.lambda1.max()),
        "final_a": float(trace.a[-1]),
        "final_b": float(trace.b[-1]),
        "price_slope_last_quarter": analysis.price_slope(trace),
        "clamped_steps": int(trace.clamped.sum()),
        "degenerate_w_steps": int(trace.w_degenerate.sum()),
    }


def write_summary(summary: dict, path: Path) -> None:
    lines = []
    for key, value in summary.items():
        if value is None:
            value = "none"
        elif isinstance(value, float):
            value = f"{value:.10g}"
        lines.append(f"{key}: {value}")
    path.write_text("\n".join(lines) + "\n")


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out_dir: Path, files: list[str], scenario: str, seed: int, seed_override: bool,
                   argv: list[str]) -> None:
    manifest = {
        "scenario": scenario,
        "output_dir": str(out_dir),
        "commands": [" ".join(["hotlane", *argv])],
        "seed": seed,
        "seed_override": seed_override,
        "files": {name: sha256(out_dir / name) for name in files},
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


# --------------------------------------------------------------------------- #
# Commands
# --------------------------------------------------------------------------- #


def _resolve_out(out: str | None, default_name: str) -> Path:
    if out:
        path = Path(out)
    else:
        path = Path(os.environ.get(OUT_ROOT_ENV, "hotlane-out")) / default_name
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load(scenario: str) -> tuple[ScenarioConfig, str]:
    if scenario in scenario_io.BUNDLED and not Path(scenario).exists():
        return scenario_io.load_bundled(scenario), f"bundled:{scenario}"
    return scenario_io.load_scenario(scenario), str(scenario)


def _check(cfg: ScenarioConfig) -> None:
    res = validate_scenario(cfg)
    for w in res.warnings:
        log.warning("%s", w)
    if res.errors:
        raise ScenarioError(res.errors)


def execute_run(cfg: ScenarioConfig, out_dir: Path, scenario_label: str, argv: list[str],
                seed: int | None = None, require_convergence: bool = False, eps: float = DEFAULT_EPS,
                extra=None) -> int:
    _check(cfg)
    trace = run(cfg, seed=seed)
    files = ["trace.csv"]
    write_trace_csv(trace, out_dir / "trace.csv")
    if cfg.estimation_enabled:
        files += write_estimates(trace, out_dir)
    if extra is not None:
        files += extra(trace, out_dir)
    summary = summarize(trace, eps)
    write_summary(summary, out_dir / "summary.txt")
    files.append("summary.txt")
    write_manifest(out_dir, files, scenario_label, trace.seed, seed is not None, argv)
    print(f"wrote {out_dir}  (max lambda1 = {summary['max_lambda1_veh']:.4g} veh, "
          f"converged at {summary['converged_at_min']})")
    if require_convergence and summary["converged_at_min"] is None:
        log.error("run did not converge (eps = %g)", eps)
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


def cmd_run(args, argv) -> int:
    cfg, label = _load(args.scenario)
    out_dir = _resolve_out(args.out, cfg.name or Path(args.scenario).stem)
    return execute_run(cfg, out_dir, label, argv, seed=args.seed,
                       require_convergence=args.require_convergence, eps=args.eps)


def _phase_writer(trace, out_dir):
    write_rows(out_dir / "phase.csv", ("lambda1", "zeta"), zip(trace.lambda1, trace.zeta))
    return ["phase.csv"]


def cmd_reproduce(args, argv) -> int:
    if args.figure not in FIGURES:
        raise UsageError(f"unknown figure id {args.figure!r}; valid ids: {', '.join(FIGURES)}")
    base = args.figure.replace("-phase", "-constant")
    cfg = scenario_io.load_bundled(base)
    out_dir = _resolve_out(args.out, args.figure)
    extra = _phase_writer if args.figure.endswith("-phase") else None
    return execute_run(cfg, out_dir, f"bundled:{base}", argv, seed=args.seed, extra=extra)


def _parse_grid(text: str) -> list[float]:
    items = [s for s in (text or "").replace(";", ",").split(",") if s.strip()]
    if not items:
        raise UsageError("empty grid")
    try:
        return [float(s) for s in items]
    except ValueError as exc:
        raise UsageError(f"bad grid {text!r}") from exc


def _variant(cfg: ScenarioConfig, name: str, value: float) -> tuple[ScenarioConfig, int | None]:
    g = cfg.gains
    if name in ("k1", "k2", "k3", "k4"):
        return replace(cfg, gains=replace(g, **{name: value})), None
    if name == "k12":
        return replace(cfg, gains=Gains(value, value, g.k3, g.k4)), None
    if name == "k34":
        return replace(cfg, gains=Gains(g.k1, g.k2, value, value)), None
    if name == "dt":
        return replace(cfg, dt=value), None
    if name == "horizon":
        return replace(cfg, horizon=value), None
    if name == "seed":
        return cfg, int(value)
    raise UsageError(f"unknown sweep parameter {name!r}")


def _sweep_point(cfg, name, value, eps):
    variant, seed = _variant(cfg, name, value)
    _check(variant)
    try:
        trace = run(variant, seed=seed)
    except NumericAbort as exc:
        return (value, "numeric-abort", math.nan, math.nan, math.nan, math.nan, math.nan, math.nan, str(exc))
    s = summarize(trace, eps)
    conv = s["converged_at_min"]
    cleared = s["hot_queue_cleared_at_min"]
    return (value, "converged" if conv is not None else "not-converged",
            math.nan if conv is None else conv, math.nan if cleared is None else cleared,
            s["max_lambda1_veh"], s["final_a"], s["final_b"], s["price_slope_last_quarter"], "")


def cmd_sweep(args, argv) -> int:
    if args.sweep not in SWEEPABLE:
        raise UsageError(f"unknown sweep parameter {args.sweep!r}; valid: {', '.join(SWEEPABLE)}")
    grid = _parse_grid(args.grid)
    cfg, label = _load(args.scenario)
    _check(cfg)
    out_dir = _resolve_out(args.out, f"{cfg.name or 'scenario'}-sweep-{args.sweep}")
    if args.sweep == "theorem1":
        points = analysis.theorem1_sweep(cfg, grid)
        rows = [(p.q3, p.phi2, p.phi3, p.phi) for p in points]
        write_rows(out_dir / "sweep.csv", ("q3", "phi2", "phi3", "phi"), rows)
        best = min(points, key=lambda p: p.phi)
        print(f"argmin phi at q3 = {best.q3:g}")
    else:
        with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
            rows = list(pool.map(lambda v: _sweep_point(cfg, args.sweep, v, args.eps), grid))
        write_rows(out_dir / "sweep.csv",
                   ("value", "status", "converged_at_min", "queue_cleared_at_min", "max_lambda1",
                    "final_a", "final_b", "price_slope", "note"), rows)
    write_manifest(out_dir, ["sweep.csv"], label, cfg.rng_seed, False, argv)
    print(f"wrote {out_dir / 'sweep.csv'}")
    return EXIT_OK


# --------------------------------------------------------------------------- #


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hotlane", description="Dynamic HOT-lane pricing simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="simulate one scenario file")
    p.add_argument("--scenario", required=True, help="YAML scenario path or bundled scenario name")
    p.add_argument("--out", help=f"output directory (default ${OUT_ROOT_ENV}/<name>)")
    p.add_argument("--seed", type=int)
    p.add_argument("--require-convergence", action="store_true")
    p.add_argument("--eps", type=float, default=DEFAULT_EPS, help="convergence band for lambda1 and |zeta|")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("reproduce", help="run a bundled scenario and write plot-ready CSVs")
    p.add_argument("--figure", required=True, help=", ".join(FIGURES))
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("sweep", help="sweep one parameter over a grid")
    p.add_argument("--scenario", required=True)
    p.add_argument("--sweep", required=True, help=", ".join(SWEEPABLE))
    p.add_argument("--grid", required=True, help="comma separated values")
    p.add_argument("--out")
    p.add_argument("--eps", type=float, default=DEFAULT_EPS)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args, argv)
    except UsageError as exc:
        print(f"hotlane: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (scenario_io.SchemaError, ScenarioError, analysis.AssumptionViolation) as exc:
        print(f"hotlane: invalid scenario: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"hotlane: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericAbort as exc:
        print(f"hotlane: numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
