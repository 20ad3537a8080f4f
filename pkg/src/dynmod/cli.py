"""Command-line entry point: ``dynmod simulate | validate | plotdata``.

Exit codes: 0 success, 1 bad config or input, 2 controller error,
3 numerical divergence, 4 validation failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, load_config
from .figures import FigureError, figure_ids, slice_figure
from .presets import preset_names, preset_path
from .sim import FLAG_LYAPUNOV, FLAG_PROJECTION, NumericalDivergence, ScenarioError, run_scenario

EXIT_OK, EXIT_CONFIG, EXIT_CONTROLLER, EXIT_DIVERGENCE, EXIT_VALIDATE = 0, 1, 2, 3, 4
OUT_ENV = "DYNMOD_OUT"


def git_blob_hash(data: bytes) -> str:
    """Hash of ``data`` as git would store it (``git hash-object``)."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _resolve_config(arg: str) -> Path:
    path = Path(arg)
    if path.exists():
        return path
    if arg in preset_names():
        return preset_path(arg)
    raise ConfigError(f"no such config file or preset (presets: {', '.join(preset_names())})", None, None, arg)


def _monitor_summary(log):
    if len(log) == 0:
        return {"lyapunov_increases": 0, "projection_active_rows": 0}
    flags = log.col("flags").astype(int)
    return {
        "lyapunov_increases": int(np.sum((flags & FLAG_LYAPUNOV) > 0)),
        "projection_active_rows": int(np.sum((flags & FLAG_PROJECTION) > 0)),
    }


def cmd_simulate(args) -> int:
    try:
        path = _resolve_config(args.config)
        cfg = load_config(path)
        overrides = {}
        if args.substeps is not None:
            overrides["substeps"] = args.substeps
        if args.duration is not None:
            overrides["duration"] = args.duration
        if overrides:
            cfg = replace(cfg, **overrides)
            cfg.validate()
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = Path(args.out) if args.out else Path(os.environ.get(OUT_ENV, "runs")) / cfg.name
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    status, message, log = EXIT_OK, "completed", None
    try:
        log = run_scenario(cfg)
    except ScenarioError as exc:
        status, message, log = EXIT_CONTROLLER, str(exc), exc.log
    except NumericalDivergence as exc:
        status, message, log = EXIT_DIVERGENCE, str(exc), getattr(exc, "log", None)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    wall = time.perf_counter() - t0

    csv_path = out_dir / "trajectory.csv"
    if log is not None:
        log.write_csv(csv_path)
    monitors = _monitor_summary(log) if log is not None else {}
    if monitors and cfg.monitor:
        monitors["lyapunov_pass"] = monitors["lyapunov_increases"] == 0
    manifest = {
        "config": str(path),
        "config_hash": git_blob_hash(path.read_bytes()),
        "output_dir": str(out_dir),
        "name": cfg.name,
        "controller": cfg.controller,
        "status": message,
        "exit_code": status,
        "timing": {"wall_seconds": round(wall, 3), "simulated_seconds": cfg.duration,
                   "rows": 0 if log is None else len(log), "dt_inner": cfg.dt_inner,
                   "dt_outer": cfg.dt_outer, "plant_substeps": cfg.substeps},
        "monitors": monitors,
        "version": __version__,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    stream = sys.stdout if status == EXIT_OK else sys.stderr
    if log is not None and len(log):
        err = np.linalg.norm(log.block("err")[-1])
        print(f"{cfg.name}: {message}; {len(log)} rows, final |err| = {err:.3e} ({log.error_space}) -> {csv_path}",
              file=stream)
    else:
        print(f"{cfg.name}: {message}", file=stream)
    return status


def cmd_validate(args) -> int:
    from .validate import format_table, run_checks

    results = run_checks(args.filter, perturb_ad=args.perturb_ad)
    if not results:
        print(f"error: no check matches {args.filter!r}", file=sys.stderr)
        return EXIT_CONFIG
    print(format_table(results))
    failed = [r for r in results if not r.passed]
    if failed:
        print(f"validation failed: {failed[0].name}: {failed[0].detail}", file=sys.stderr)
        return EXIT_VALIDATE
    print(f"all {len(results)} checks passed")
    return EXIT_OK


def cmd_plotdata(args) -> int:
    if args.figure not in figure_ids():
        print(f"error: unknown figure id {args.figure!r}; valid ids: {', '.join(figure_ids())}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        text = Path(args.csv).read_text(encoding="utf-8")
        out = slice_figure(text, args.figure)
    except OSError as exc:
        print(f"error: cannot read {args.csv}: {exc.strerror}", file=sys.stderr)
        return EXIT_CONFIG
    except FigureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out and args.out != "-":
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(out)
    else:
        sys.stdout.write(out)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    """Usage errors exit 1 so that 2 stays reserved for controller errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dynmod", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"dynmod {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a scenario config (file path or preset name)")
    s.add_argument("config")
    s.add_argument("--out", help=f"output directory (default ${OUT_ENV}/<name> or runs/<name>)")
    s.add_argument("--substeps", type=int, help="override the plant integration substeps")
    s.add_argument("--duration", type=float, help="override the simulated duration in seconds")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("validate", help="run the self-check suites")
    v.add_argument("--filter", help="only checks whose name contains this text")
    v.add_argument("--perturb-ad", type=float, default=0.0, help=argparse.SUPPRESS)
    v.set_defaults(func=cmd_validate)

    d = sub.add_parser("plotdata", help="extract the series of one figure from a trajectory CSV")
    d.add_argument("csv")
    d.add_argument("--figure", required=True, help=f"one of {', '.join(figure_ids())}")
    d.add_argument("--out", help="output CSV path (default stdout)")
    d.set_defaults(func=cmd_plotdata)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
