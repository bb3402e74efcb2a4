"""TOML experiment configuration.

A config has five tables: ``manifold``, ``problem`` (with a nested
``datum`` table), ``solver``, ``diagnostics`` and ``output``. Unknown keys
are errors, and every violated precondition is collected before raising so
a user sees all problems at once.
"""

from __future__ import annotations

import hashlib
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..constants import compute_p0, fujita_exponent
from ..geometry import KINDS, GeometryError, ModelManifold
from ..solver import BOUNDARIES, PROFILES, ConfigurationError, InitialDatum, ProblemParams, SolverSettings

CHECKS = ("lq_monotone", "smoothing", "sup_bound", "aronson_benilan")

_SCHEMA = {
    "manifold": {"kind", "N", "c", "a", "C_s", "C_p"},
    "problem": {"m", "p", "k", "R", "reaction", "boundary", "datum"},
    "datum": {"profile", "amplitude", "width", "t0", "table", "norm_q", "norm_value"},
    "solver": {"cells", "dt0", "dt_min", "t_end", "u_max", "newton_tol", "newton_maxit", "start_time",
               "samples", "sample_count", "sample_first", "sample_spacing", "growth", "max_reaction_growth"},
    "diagnostics": {"q_list", "r", "checks", "ab_times", "fit_window", "tol"},
    "output": {"directory", "formats", "profiles"},
}


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists every violation found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  - " + "\n  - ".join(self.errors))


@dataclass(frozen=True)
class DiagnosticsConfig:
    q_list: tuple = (2.0,)
    r: float | None = None
    checks: tuple = ()
    ab_times: tuple = ()
    fit_window: tuple | None = None
    tol: float = 1e-6


@dataclass(frozen=True)
class OutputConfig:
    directory: str | None = None
    formats: tuple = ("csv",)
    profiles: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    manifold: ModelManifold
    problem: ProblemParams
    solver: SolverSettings
    diagnostics: DiagnosticsConfig
    output: OutputConfig
    raw: dict = field(default_factory=dict, compare=False)
    datum_scaling: tuple | None = None

    def config_hash(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()

    def with_overrides(self, problem=None, solver=None) -> "ExperimentConfig":
        from dataclasses import replace

        return replace(self, problem=problem or self.problem, solver=solver or self.solver)


def _parse_k(value, errors):
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "infinity"):
            return math.inf
        errors.append(f"problem.k must be a positive number or \"inf\", got {value!r}")
        return math.inf
    return float(value)


def _sample_times(sv: dict, start: float, t_end: float, errors) -> tuple:
    if "samples" in sv:
        return tuple(float(x) for x in sv["samples"])
    count = int(sv.get("sample_count", 0))
    if count <= 0:
        return ()
    spacing = sv.get("sample_spacing", "linear")
    first = float(sv.get("sample_first", (t_end - start) / count))
    if spacing == "geometric":
        if not first > 0:
            errors.append("solver.sample_first must be > 0 for geometric spacing")
            return ()
        ts = start + np.geomspace(first, t_end - start, count)
    elif spacing == "linear":
        ts = start + np.linspace(first, t_end - start, count)
    else:
        errors.append(f"solver.sample_spacing must be \"linear\" or \"geometric\", got {spacing!r}")
        return ()
    ts[-1] = t_end
    return tuple(float(x) for x in np.unique(ts))


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate TOML ``text``; raises :class:`ConfigError` listing all problems."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"malformed TOML: {exc}"]) from None
    return config_from_dict(raw)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def config_from_dict(raw: dict) -> ExperimentConfig:
    errors = []
    for key in raw:
        if key not in _SCHEMA or key == "datum":
            errors.append(f"unknown top-level table [{key}]")
    for block in ("manifold", "problem", "solver", "diagnostics", "output"):
        for key in raw.get(block, {}):
            if key not in _SCHEMA[block]:
                errors.append(f"unknown key {block}.{key}")
    dv = raw.get("problem", {}).get("datum", {})
    for key in dv:
        if key not in _SCHEMA["datum"]:
            errors.append(f"unknown key problem.datum.{key}")

    mv, pv, sv = raw.get("manifold", {}), raw.get("problem", {}), raw.get("solver", {})
    gv, ov = raw.get("diagnostics", {}), raw.get("output", {})

    # manifold
    kind = mv.get("kind", "euclidean")
    if kind not in KINDS:
        errors.append(f"manifold.kind must be one of {KINDS}, got {kind!r}")
    manifold = None
    try:
        manifold = ModelManifold(kind=kind, dimension=mv.get("N", 3), curvature=float(mv.get("c", 1.0)),
                                 decay=float(mv.get("a", 0.0)), sobolev_constant=mv.get("C_s"),
                                 poincare_constant=mv.get("C_p"))
    except (GeometryError, TypeError, ValueError) as exc:
        if kind in KINDS:
            errors.append(f"manifold: {exc}")
    N = manifold.dimension if manifold else int(mv.get("N", 3))

    # problem
    for key in ("m", "p", "R"):
        if key not in pv:
            errors.append(f"problem.{key} is required")
    m, p = float(pv.get("m", 2.0)), float(pv.get("p", 3.0))
    if "m" in pv and not m > 1:
        errors.append(f"m = {m} violates the standing assumption m > 1")
    if "m" in pv and "p" in pv and not p > m:
        errors.append(f"p = {p} <= m = {m} violates the standing assumption p > m")
    k = _parse_k(pv.get("k", "inf"), errors)
    profile = dv.get("profile", "bump")
    if profile not in PROFILES:
        errors.append(f"problem.datum.profile must be one of {PROFILES}, got {profile!r}")
    boundary = pv.get("boundary", "dirichlet")
    if boundary not in BOUNDARIES:
        errors.append(f"problem.boundary must be one of {BOUNDARIES}, got {boundary!r}")
    scaling = None
    if ("norm_q" in dv) != ("norm_value" in dv):
        errors.append("problem.datum.norm_q and norm_value must be given together")
    elif "norm_q" in dv:
        scaling = (float(dv["norm_q"]), float(dv["norm_value"]))
        if not (scaling[0] > 0 and scaling[1] >= 0):
            errors.append("problem.datum norm scaling needs norm_q > 0 and norm_value >= 0")

    problem = None
    if not any(e.startswith(("problem", "p =", "m =")) for e in errors):
        try:
            datum = InitialDatum(profile=profile, amplitude=float(dv.get("amplitude", 1.0)),
                                 width=float(dv.get("width", 1.0)), t0=float(dv.get("t0", 1.0)),
                                 table=tuple(tuple(float(x) for x in row) for row in dv.get("table", ())))
            problem = ProblemParams(m=m, p=p, R=float(pv["R"]), datum=datum, k=k,
                                    reaction=bool(pv.get("reaction", True)), boundary=boundary)
        except (ConfigurationError, TypeError, ValueError) as exc:
            errors.append(f"problem: {exc}")

    # diagnostics
    q_list = tuple(float(q) for q in gv.get("q_list", [2.0]))
    r = gv.get("r")
    checks = tuple(gv.get("checks", []))
    for c in checks:
        if c not in CHECKS:
            errors.append(f"diagnostics.checks: unknown check {c!r}; expected any of {CHECKS}")
    # with a Poincare inequality the norm monotonicity only needs p > m
    sobolev_checks = {"smoothing"} & set(checks)
    if manifold is None or not manifold.has_poincare:
        sobolev_checks |= {"lq_monotone"} & set(checks)
    if sobolev_checks and not p > fujita_exponent(m, N):
        errors.append(f"p = {p} <= m + 2/N = {fujita_exponent(m, N):.6g} violates the small-data hypothesis p > m + 2/N "
                      f"(needed by {sorted(sobolev_checks)})")
    if {"smoothing", "sup_bound"} & set(checks):
        if r is None:
            errors.append("diagnostics.r (integrability exponent) is required by the smoothing and sup_bound checks")
        elif not float(r) > N / 2:
            errors.append(f"r = {r} <= N/2 = {N / 2} violates the sup-bound hypothesis r > N/2")
        elif "smoothing" in checks and not float(r) > compute_p0(m, p, N):
            errors.append(f"r = {r} <= p0 = {compute_p0(m, p, N):.6g} violates the sup-bound hypothesis r > p0")
    if "sup_bound" in checks and manifold is not None and not manifold.has_poincare:
        errors.append(f"the explicit sup_bound check is inapplicable on {manifold.kind} with C_p = 0 "
                      "(needs a Poincare inequality)")
    if any(q <= 0 for q in q_list):
        errors.append("diagnostics.q_list entries must be > 0")
    fit_window = tuple(float(x) for x in gv["fit_window"]) if "fit_window" in gv else None
    if fit_window is not None and not (len(fit_window) == 2 and 0 < fit_window[0] < fit_window[1]):
        errors.append("diagnostics.fit_window must be [t_lo, t_hi] with 0 < t_lo < t_hi")
    diagnostics = DiagnosticsConfig(q_list=q_list, r=None if r is None else float(r), checks=checks,
                                    ab_times=tuple(float(t) for t in gv.get("ab_times", [])),
                                    fit_window=fit_window, tol=float(gv.get("tol", 1e-6)))

    # solver
    start = float(sv.get("start_time", 0.0))
    t_end = float(sv.get("t_end", 1.0))
    samples = _sample_times(sv, start, t_end, errors)
    samples = tuple(sorted(set(samples) | {start + t for t in diagnostics.ab_times if start < start + t <= t_end}))
    solver = None
    try:
        solver = SolverSettings(cells=sv.get("cells", 1000), dt0=float(sv.get("dt0", 1e-2)),
                                t_end=t_end, dt_min=float(sv.get("dt_min", 1e-12)),
                                u_max=float(sv.get("u_max", 1e6)), sample_times=samples,
                                newton_tol=float(sv.get("newton_tol", 1e-12)),
                                newton_maxit=int(sv.get("newton_maxit", 50)), start_time=start,
                                growth=float(sv.get("growth", 1.2)),
                                max_reaction_growth=float(sv.get("max_reaction_growth", 0.5)),
                                q_list=q_list, store_profiles=bool(ov.get("profiles", True)) or "aronson_benilan" in checks)
    except (ConfigurationError, TypeError, ValueError) as exc:
        errors.append(f"solver: {exc}")

    formats = tuple(ov.get("formats", ["csv"]))
    for f in formats:
        if f not in ("csv", "json"):
            errors.append(f"output.formats entries must be \"csv\" or \"json\", got {f!r}")
    output = OutputConfig(directory=ov.get("directory"), formats=formats, profiles=bool(ov.get("profiles", True)))

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(manifold, problem, solver, diagnostics, output, raw=raw, datum_scaling=scaling)
