"""Single runs and parameter sweeps, with their on-disk artifacts."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .. import __version__, kernels
from ..constants import exponent_table
from ..diagnostics import (BoundReport, ReportError, check_aronson_benilan, check_lq_monotone,
                           compare_runs_monotone, fit_decay_exponent, smoothing_statistic, sup_difference,
                           verify_sup_bound)
from ..geometry import build_grid
from ..solver import RadialState, RunRecord, evolve, lq_values, scale_datum_to_norm
from .config import ExperimentConfig

OUT_DIR_ENV = "RADIALPME_OUT_DIR"
CSV_SCHEMA = "timeseries/1"
REPORT_SCHEMA = "bound-report/1"
SWEEP_PARAMS = ("k", "R", "amplitude", "cells")
_SWEEP_MODE = {"k": "cap_k", "R": "radius_R", "amplitude": "datum_h"}


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_DIR_ENV, "radialpme-out"))


def _fmt(x) -> str:
    return "%.17g" % float(x)


def _q_label(q) -> str:
    return "%g" % float(q)


def resolve_problem(config: ExperimentConfig):
    """Problem with the datum rescaled to the requested norm, if any."""
    problem = config.problem
    if config.datum_scaling is not None:
        q, value = config.datum_scaling
        datum = scale_datum_to_norm(problem.datum, config.manifold, problem.R, q, value, problem.m,
                                    config.manifold.weighted)
        problem = replace(problem, datum=datum)
    return problem


def table_for(config: ExperimentConfig):
    m, p = config.problem.m, config.problem.p
    N = config.manifold.dimension
    r = config.diagnostics.r if config.diagnostics.r is not None else max(N / 2, (p - m) * N / 2) + 1.0
    q = max(config.diagnostics.q_list)
    return exponent_table(m, p, N, r, q, config.manifold.sobolev_constant, config.manifold.poincare_constant,
                          q_list=config.diagnostics.q_list)


# -- serialization ---------------------------------------------------------------


def timeseries_rows(record: RunRecord):
    qs = list(record.lq)
    header = ["t", "dt", "sup_norm"] + [f"lq_{_q_label(q)}" for q in qs] + ["status"]
    rows = []
    last = len(record.times) - 1
    for i, t in enumerate(record.times):
        status = record.status if i == last else "running"
        rows.append([_fmt(t), _fmt(record.dt[i]), _fmt(record.sup_norm[i])]
                    + [_fmt(record.lq[q][i]) for q in qs] + [status])
    return header, rows


def record_to_csv(record: RunRecord) -> str:
    header, rows = timeseries_rows(record)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def record_to_json(record: RunRecord) -> str:
    header, rows = timeseries_rows(record)
    cols = {h: [row[i] if h == "status" else float(row[i]) for row in rows] for i, h in enumerate(header)}
    return json.dumps({"schema": CSV_SCHEMA, "status": record.status, "status_time": record.status_time,
                       "columns": cols}, indent=2)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


# -- checks ----------------------------------------------------------------------


@dataclass
class ExperimentResult:
    record: RunRecord | None
    reports: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)
    table: object = None

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports.values())


def _initial_norms(record: RunRecord, config: ExperimentConfig, r: float):
    grid = build_grid(config.manifold, config.problem.R, config.solver.cells)
    u0 = record.profiles[0]
    m, p = config.problem.m, config.problem.p
    weighted = config.manifold.weighted
    return {"m": lq_values(grid, u0, m, weighted), "r": lq_values(grid, u0, r, weighted),
            "pr": lq_values(grid, u0, p * r, weighted)}


def run_checks(record: RunRecord, config: ExperimentConfig, table) -> dict:
    """Evaluate the diagnostics requested in ``config``."""
    d = config.diagnostics
    m, p = config.problem.m, config.problem.p
    N = config.manifold.dimension
    reports = {}
    if "lq_monotone" in d.checks:
        reports["lq_monotone"] = check_lq_monotone(record, d.q_list, tol=d.tol)
    if "smoothing" in d.checks:
        rate = table.decay_rate
        window = d.fit_window or (1.0, record.times[-1] - record.times[0])
        ts, S = smoothing_statistic(record, rate, window)
        beta = fit_decay_exponent(ts, S / ts**rate)
        margin = beta - (rate - 0.05)
        reports["smoothing"] = BoundReport("smoothing-rate", bool(np.all(np.isfinite(S)) and margin >= 0), margin,
                                           len(ts), 0.0, [{"rate": rate, "fitted": beta, "S_max": float(S.max()),
                                                           "window": list(window)}])
    if "sup_bound" in d.checks:
        norms = _initial_norms(record, config, d.r)
        reports["sup_bound"] = verify_sup_bound(record, config.manifold, norms, m, p, N, d.r)
    if "aronson_benilan" in d.checks:
        grid = build_grid(config.manifold, config.problem.R, config.solver.cells)
        t0 = record.times[0]
        margins, details = [], []
        for t in d.ab_times:
            i = int(np.argmin(np.abs(record.times - (t0 + t))))
            if abs(record.times[i] - (t0 + t)) > 1e-9 * max(1.0, t):
                continue
            rep = check_aronson_benilan(RadialState(grid, record.profiles[i], t), t, config.manifold, p, m,
                                        reaction=config.problem.reaction, boundary=config.problem.boundary)
            margins.append(rep.worst_margin)
            details.append({"t": t, "worst_margin": rep.worst_margin, "tests": rep.details})
        worst = min(margins) if margins else 0.0
        reports["aronson_benilan"] = BoundReport("aronson-benilan", bool(worst >= -1e-3), worst, len(margins),
                                                 1e-3, details)
    return reports


# -- single run ------------------------------------------------------------------


def manifest(config: ExperimentConfig, artifacts: dict, seed=None, extra=None) -> dict:
    out = {
        "package": "radialpme",
        "version": __version__,
        "backend": kernels.backend(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config_hash": config.config_hash(),
        "config": config.raw,
        "seed": seed,
        "schemas": {"timeseries": CSV_SCHEMA, "report": REPORT_SCHEMA},
        "artifacts": {name: {"path": str(path.name), "sha256": _sha256(path)} for name, path in artifacts.items()},
    }
    if extra:
        out.update(extra)
    return out


def run_experiment(config: ExperimentConfig, out_dir=None, formats=None, seed=None, dry_run: bool = False,
                   echo=print) -> ExperimentResult:
    """Run one configured evolution and write its artifacts to ``out_dir``.

    With ``dry_run`` only the exponent table is computed and printed.
    """
    table = table_for(config)
    if dry_run:
        if echo:
            echo(json.dumps(table.to_dict(), indent=2, default=str))
        return ExperimentResult(None, table=table)
    out = Path(out_dir or config.output.directory or default_out_dir())
    formats = tuple(formats or config.output.formats)
    problem = resolve_problem(config)
    record = evolve(config.manifold, problem, config.solver)
    reports = run_checks(record, config, table)

    arts = {}
    if "csv" in formats:
        arts["timeseries"] = _write(out / "timeseries.csv", record_to_csv(record))
    if "json" in formats:
        arts["timeseries_json"] = _write(out / "timeseries.json", record_to_json(record))
    for name, rep in reports.items():
        arts[f"report_{name}"] = _write(out / f"report_{name}.json", rep.to_json())
    if config.output.profiles and record.profiles is not None:
        path = out / "profiles.npz"
        try:
            with open(path, "wb") as fh:
                np.savez(fh, times=record.times, radii=record.radii, profiles=record.profiles)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
        arts["profiles"] = path
    arts["exponent_table"] = _write(out / "exponent_table.json", json.dumps(table.to_dict(), indent=2, default=str))
    extra = {"status": record.status, "status_time": record.status_time, "steps": record.steps,
             "rejected_steps": record.rejected, "datum_amplitude": problem.datum.amplitude}
    man = manifest(config, arts, seed, extra)
    _write(out / "manifest.json", json.dumps(man, indent=2, default=str))
    arts["manifest"] = out / "manifest.json"
    if echo:
        echo(f"status {record.status} at t={record.status_time:.6g} ({record.steps} steps); artifacts in {out}")
        for rep in reports.values():
            echo(rep.summary())
    return ExperimentResult(record, reports, arts, table)


# -- sweeps ----------------------------------------------------------------------


def parse_values(text: str) -> list:
    vals = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        vals.append(math.inf if tok.lower() in ("inf", "infinity") else float(tok))
    return vals


def _variant(config: ExperimentConfig, param: str, value):
    problem, solver = config.problem, config.solver
    if param == "k":
        problem = replace(problem, k=value)
    elif param == "R":
        h = problem.R / solver.cells
        problem = replace(problem, R=value)
        solver = replace(solver, cells=int(round(value / h)))
    elif param == "amplitude":
        problem = replace(problem, datum=problem.datum.scaled(value))
    elif param == "cells":
        solver = replace(solver, cells=int(value))
    return config.with_overrides(problem=problem, solver=solver)


def _run_one(cfg: ExperimentConfig) -> RunRecord:
    return evolve(cfg.manifold, cfg.problem, cfg.solver)


@dataclass
class SweepReport:
    param: str
    values: list
    passed: bool
    comparisons: list
    differences: list
    statuses: list
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "param": self.param,
            "values": ["inf" if math.isinf(v) else v for v in self.values],
            "passed": self.passed,
            "statuses": self.statuses,
            "differences": self.differences,
            "comparisons": [c.to_dict() for c in self.comparisons],
            "message": self.message,
        }


def _cauchy_decreasing(diffs, slack=1e-14) -> bool:
    return all(b <= a + slack for a, b in zip(diffs, diffs[1:]))


def _grid_difference(run_a: RunRecord, run_b: RunRecord) -> float:
    """Largest difference at shared samples after interpolating ``run_b`` onto ``run_a``'s radii."""
    worst = 0.0
    for i, t in enumerate(run_a.times):
        j = np.flatnonzero(np.abs(run_b.times - t) <= 1e-12 * max(1.0, abs(t)))
        if j.size:
            fb = np.interp(run_a.radii, run_b.radii, run_b.profiles[j[0]])
            worst = max(worst, float(np.abs(fb - run_a.profiles[i]).max()))
    return worst


def run_sweep(config: ExperimentConfig, param: str, values, workers: int = 1, out_dir=None,
              records_out: list | None = None) -> SweepReport:
    """Run ``config`` for each value of ``param`` and compare adjacent runs.

    For ``k``, ``R`` and ``amplitude`` adjacent runs must be pointwise
    ordered; for every parameter the successive differences must decrease.
    """
    if param not in SWEEP_PARAMS:
        raise ValueError(f"sweep parameter must be one of {SWEEP_PARAMS}, got {param!r}")
    values = list(values)
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError(f"sweep values must be strictly increasing, got {values}")
    base = replace(config, problem=resolve_problem(config))
    cfgs = [_variant(base, param, v) for v in values]
    if workers > 1 and len(cfgs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            records = list(ex.map(_run_one, cfgs))
    else:
        records = [_run_one(c) for c in cfgs]
    if records_out is not None:
        records_out.extend(records)

    statuses = [r.status for r in records]
    failed = [v for v, r in zip(values, records) if r.status != "completed"]
    comparisons, diffs, message = [], [], ""
    try:
        for a, b in zip(records, records[1:]):
            if param in _SWEEP_MODE:
                rep = compare_runs_monotone(a, b, _SWEEP_MODE[param])
                comparisons.append(rep)
                diffs.append(sup_difference(rep))
            else:
                diffs.append(_grid_difference(a, b))
    except ReportError as exc:
        message = str(exc)
    passed = not message and all(c.passed for c in comparisons) and _cauchy_decreasing(diffs)
    if failed:
        passed = False
        message = (message + "; " if message else "") + f"runs did not complete for {param} = {failed}"
    report = SweepReport(param, values, passed, comparisons, diffs, statuses, message)
    if out_dir is not None:
        out = Path(out_dir)
        arts = {"sweep": _write(out / f"sweep_{param}.json", json.dumps(report.to_dict(), indent=2, default=str))}
        for v, rec in zip(values, records):
            label = "inf" if math.isinf(v) else _q_label(v)
            arts[f"timeseries_{label}"] = _write(out / f"sweep_{param}_{label}.csv", record_to_csv(rec))
        _write(out / "manifest.json", json.dumps(manifest(config, arts, extra={"sweep": param}), indent=2, default=str))
    return report
