"""Run artifacts: trajectory CSV, certification reports, metrics, manifest."""

from __future__ import annotations

import csv
import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import CertificationReport, LyapunovTrace
from .engine import THRESHOLDS, SyncMetrics, Trajectory


class OutputError(OSError):
    """Writing a run artifact failed."""


def _fmt(v) -> str:
    return f"{float(v):.17g}"


def config_hash(document: str) -> str:
    return hashlib.sha256(document.encode("utf-8")).hexdigest()


def trajectory_header(n: int) -> list[str]:
    return (["t", "agent_id"]
            + [f"x_{k}" for k in range(1, 2 * n + 1)]
            + [f"xr_{k}" for k in range(1, 2 * n + 1)]
            + [f"u_{k}" for k in range(1, n + 1)]
            + [f"sat_u_{k}" for k in range(1, n + 1)]
            + ["sync_error_inf"])


def _open(path, mode="w"):
    path = Path(path)
    try:
        return path.open(mode, newline="", encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot open {path}: {exc.strerror or exc}") from exc


def emit_trajectory_csv(tr: Trajectory, path) -> None:
    """One row per (tick, agent), ordered by tick then agent id (one-based)."""
    n = tr.u.shape[-1] if tr.u.ndim == 3 else tr.x.shape[-1] // 2
    err = tr.sync_error_inf
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trajectory_header(n))
        for k, t in enumerate(tr.times):
            xr = [_fmt(v) for v in tr.xr[k]]
            e = _fmt(err[k])
            for i in range(tr.x.shape[1]):
                w.writerow([int(t), i + 1]
                           + [_fmt(v) for v in tr.x[k, i]] + xr
                           + [_fmt(v) for v in tr.u[k, i]]
                           + [_fmt(v) for v in tr.sat_u[k, i]] + [e])


def read_trajectory_csv(path) -> dict:
    """Columns of a trajectory CSV as float arrays keyed by header name."""
    with _open(path, "r") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = list(zip(*body)) if body else [()] * len(header)
    return {h: np.array([float(v) for v in col]) for h, col in zip(header, cols)}


def emit_lyapunov_csv(trace: LyapunovTrace, path) -> None:
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "V1", "V2", "V", "delta_V"])
        for k, t in enumerate(trace.times):
            dv = _fmt(trace.delta_v[k]) if k < trace.delta_v.size else ""
            w.writerow([int(t), _fmt(trace.v1[k]), _fmt(trace.v2[k]), _fmt(trace.v[k]), dv])


def render_report(report: CertificationReport, forced: bool = False) -> str:
    lines = []
    if forced and not report.overall:
        lines += ["!" * 72,
                  "WARNING: certification FAILED; simulation was run anyway (--force).",
                  "Convergence is not guaranteed for this configuration.",
                  "!" * 72, ""]
    status = "PASS" if report.overall else "FAIL"
    lines.append(f"certification: {status}  (mode: {report.mode})")

    def opt(v, fmt="{:.12g}"):
        return "n/a" if v is None else fmt.format(v)

    lines += [
        f"  graph in set (all nodes reachable from roots): {report.graph_in_set}",
        f"  gains in admissible region:                    {report.gains_in_region}",
        f"  spectral radius of Dbar:                       {opt(report.rho_dbar)}",
        f"  spectral radius of Dbar kron A:                {opt(report.rho_dbarA)}",
        f"  spectral radius of A - FC:                     {opt(report.rho_AmFC)}",
        f"  P_D residual (Frobenius):                      {opt(report.pd_residual, '{:.3e}')}",
        f"  P_D minimum eigenvalue:                        {opt(report.pd_min_eig)}",
        f"  ||Psi|| (spectral norm):                       {opt(report.psi_norm)}",
        f"  h:                                             {opt(report.h_found)}",
        "  Phi eigenvalues:                               "
        + ("n/a" if report.phi_eigs is None else ", ".join(f"{v:.6g}" for v in report.phi_eigs)),
    ]
    if report.reasons:
        lines.append("reasons:")
        lines += [f"  - {r}" for r in report.reasons]
    return "\n".join(lines) + "\n"


def write_report(report: CertificationReport, directory, forced: bool = False) -> tuple[Path, Path]:
    directory = Path(directory)
    txt = directory / "certification.txt"
    js = directory / "certification.json"
    with _open(txt) as fh:
        fh.write(render_report(report, forced))
    data = report.to_dict()
    data["forced"] = bool(forced)
    with _open(js) as fh:
        json.dump(data, fh, indent=2)
        fh.write("\n")
    return txt, js


METRICS_HEADER = ["run", "mode", "N", "k1", "k2", "certified", "final_sync_error_inf"] + [
    f"first_below_{th:g}" for th in THRESHOLDS] + ["max_abs_u"]


def metrics_row(run_label: str, cfg, report: CertificationReport, m: SyncMetrics) -> list[str]:
    return ([run_label, cfg.mode, str(cfg.n_agents), _fmt(cfg.gains.k1), _fmt(cfg.gains.k2),
             "pass" if report.overall else "fail", _fmt(m.final_error)]
            + ["never" if m.first_below[th] is None else str(m.first_below[th]) for th in THRESHOLDS]
            + [_fmt(m.max_abs_u)])


def write_metrics_csv(rows, path) -> None:
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        w.writerows(rows)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_manifest(path, *, document: str, cfg, run_id: str, outputs: dict,
                   overrides: dict, status: str = "started", started_at: str | None = None) -> dict:
    manifest = {
        "run_id": run_id,
        "config_hash": config_hash(document),
        "seed": cfg.init.seed,
        "mode": cfg.mode,
        "N": cfg.n_agents,
        "n": cfg.n,
        "gains": {"k1": cfg.gains.k1, "k2": cfg.gains.k2, "f1": cfg.gains.f1, "f2": cfg.gains.f2},
        "steps": cfg.steps,
        "record_every": cfg.record_every,
        "overrides": overrides,
        "outputs": {k: str(v) for k, v in outputs.items()},
        "started_at": started_at or _now(),
        "status": status,
        "tool_version": __version__,
    }
    if status != "started":
        manifest["finished_at"] = _now()
    with _open(path) as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest
