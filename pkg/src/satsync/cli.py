"""Command-line entry point.

    satsync simulate CONFIG   certify, then simulate and write artifacts
    satsync certify CONFIG    hypothesis checks only
    satsync suite CASE GAINS  benchmark networks (I, II, III or all) x gain pairs (1, 2, 3 or all)
    satsync lyapunov CONFIG   full-state run recorded every tick plus the V trace

Exit status: 0 when certification passed and the run completed, 1 when
certification failed, 2 for configuration errors, 3 for I/O errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .analysis import certify, lyapunov_trace
from .cases import CASE_EDGES, GAIN_PAIRS, suite_config
from .config import parse_config, render_config
from .constants import TOL
from .engine import ConfigError, run, sync_metrics
from .output import (
    OutputError,
    emit_lyapunov_csv,
    emit_trajectory_csv,
    metrics_row,
    write_manifest,
    write_metrics_csv,
    write_report,
)

log = logging.getLogger("satsync")

EXIT_OK, EXIT_CERT, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


def _apply_overrides(cfg, seed, steps, record_every=None):
    if seed is not None:
        cfg = dataclasses.replace(cfg, init=dataclasses.replace(cfg.init, seed=seed))
    if steps is not None:
        cfg = dataclasses.replace(cfg, steps=steps)
    if record_every is not None:
        cfg = dataclasses.replace(cfg, record_every=record_every)
    return cfg


def _run_dir(output_dir: Path, label: str, document: str, overrides: dict) -> tuple[Path, str]:
    key = document + json.dumps(overrides, sort_keys=True)
    run_id = hashlib.sha256(key.encode("utf-8")).hexdigest()[:12]
    path = Path(output_dir) / f"{label}-{run_id}"
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create {path}: {exc}") from exc
    return path, run_id


def execute(document: str, label: str, output_dir, *, force: bool = False,
            seed: int | None = None, steps: int | None = None,
            lyapunov: bool = False, certify_only: bool = False) -> tuple[int, dict]:
    """Run one configuration end to end; returns ``(exit_status, summary)``."""
    cfg = parse_config(document, allow_uncertified=force)
    overrides = {k: v for k, v in (("seed", seed), ("steps", steps)) if v is not None}
    if lyapunov:
        overrides["record_every"] = 1
    cfg = _apply_overrides(cfg, seed, steps, overrides.get("record_every"))

    run_dir, run_id = _run_dir(output_dir, label, document, overrides)
    (run_dir / "config.yaml").write_text(document, encoding="utf-8")
    outputs = {"config": run_dir / "config.yaml", "manifest": run_dir / "manifest.json",
               "report_text": run_dir / "certification.txt",
               "report_json": run_dir / "certification.json"}
    if not certify_only:
        outputs.update(trajectory=run_dir / "trajectory.csv", metrics=run_dir / "metrics.csv")
    if lyapunov:
        outputs["lyapunov"] = run_dir / "lyapunov.csv"
    common = dict(document=document, cfg=cfg, run_id=run_id, outputs=outputs, overrides=overrides)
    started = write_manifest(outputs["manifest"], **common)["started_at"]

    log.debug("run %s: N=%d mode=%s steps=%d", run_id, cfg.n_agents, cfg.mode, cfg.steps)
    report = certify(cfg)
    write_report(report, run_dir, forced=force)
    summary = {"run": label, "run_dir": str(run_dir), "certified": report.overall,
               "reasons": list(report.reasons)}
    if certify_only or (not report.overall and not force):
        status = "certified" if report.overall else "certification-failed"
        write_manifest(outputs["manifest"], **common, status=status, started_at=started)
        return (EXIT_OK if report.overall else EXIT_CERT), summary

    tr = run(cfg, force=force)
    emit_trajectory_csv(tr, outputs["trajectory"])
    m = sync_metrics(tr)
    write_metrics_csv([metrics_row(label, cfg, report, m)], outputs["metrics"])
    summary.update(final_error=m.final_error, first_below=m.first_below,
                   max_abs_u=m.max_abs_u, warnings=list(tr.warnings),
                   metrics_row=metrics_row(label, cfg, report, m))
    status = EXIT_OK if report.overall else EXIT_CERT

    if lyapunov:
        if not report.overall:
            raise ConfigError("lyapunov trace needs a certified configuration")
        trace = lyapunov_trace(tr, report, cfg)
        emit_lyapunov_csv(trace, outputs["lyapunov"])
        worst = float(trace.delta_v.max()) if trace.delta_v.size else 0.0
        monotone = worst <= TOL.delta_v and trace.v1.min() >= 0 and trace.v2.min() >= 0
        summary.update(max_delta_v=worst, lyapunov_ok=bool(monotone))
        if not monotone:
            status = EXIT_CERT

    write_manifest(outputs["manifest"], **common,
                   status="completed" if status == EXIT_OK else "completed-with-failures",
                   started_at=started)
    return status, summary


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _print_summary(summary: dict) -> None:
    line = f"{summary['run']}: certification {'pass' if summary['certified'] else 'FAIL'}"
    if "final_error" in summary:
        fb = ", ".join(f"<{th:g} at {'never' if t is None else t}"
                       for th, t in summary["first_below"].items())
        line += (f"; final sync error {summary['final_error']:.3e} ({fb});"
                 f" max |u| {summary['max_abs_u']:.4g}")
    if "max_delta_v" in summary:
        line += f"; max dV {summary['max_delta_v']:.3e}"
    print(line)
    for r in summary["reasons"]:
        print(f"  reason: {r}")
    for w in summary.get("warnings", []):
        print(f"  warning: {w}")
    print(f"  artifacts: {summary['run_dir']}")


def _suite(args) -> int:
    cases = sorted(CASE_EDGES, key=len) if args.case == "all" else [args.case]
    gains = sorted(GAIN_PAIRS) if args.gains == "all" else [int(args.gains)]
    rows, worst = [], EXIT_OK
    for c in cases:
        for gid in gains:
            cfg = suite_config(c, gid)
            status, summary = execute(render_config(cfg), f"case{c}-gains{gid}", args.output_dir,
                                      force=args.force, seed=args.seed, steps=args.steps)
            _print_summary(summary)
            if "metrics_row" in summary:
                rows.append(summary["metrics_row"])
            worst = max(worst, status)
    if len(cases) * len(gains) > 1:
        write_metrics_csv(rows, Path(args.output_dir) / "suite_metrics.csv")
    return worst


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output-dir", default="runs", help="parent directory for run artifacts")
    common.add_argument("--seed", type=int, help="override the initial-condition seed")
    common.add_argument("--steps", type=int, help="override the number of ticks")
    common.add_argument("--force", action="store_true",
                        help="simulate even if certification fails (report carries a warning)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="satsync", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (("simulate", "certify and simulate a configuration"),
                           ("certify", "run the certification checks only"),
                           ("lyapunov", "full-state run with the Lyapunov trace")):
        sp = sub.add_parser(name, parents=[common], help=helptext)
        sp.add_argument("config", help="YAML configuration file")
    sp = sub.add_parser("suite", parents=[common], help="run the benchmark cases")
    sp.add_argument("case", choices=sorted(CASE_EDGES) + ["all"])
    sp.add_argument("gains", choices=[str(k) for k in sorted(GAIN_PAIRS)] + ["all"])
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.steps is not None and args.steps < 1:
        print("error: --steps must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "suite":
            return _suite(args)
        document = _read(args.config)
        label = Path(args.config).stem
        status, summary = execute(document, label, args.output_dir, force=args.force,
                                  seed=args.seed, steps=args.steps,
                                  lyapunov=args.command == "lyapunov",
                                  certify_only=args.command == "certify")
        if args.command == "certify":
            print(Path(summary["run_dir"], "certification.txt").read_text(encoding="utf-8"), end="")
        _print_summary(summary)
        return status
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OutputError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
