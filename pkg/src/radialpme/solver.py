"""Radial finite-volume solver for ``rho u_t = Delta u^m + rho T_k(u^p)`` on B_R.

Each time step first applies the truncated reaction explicitly,
``b = u + dt min(u^p, k)``, then solves the implicit porous-medium step
``rho (u - b) = dt Delta u^m`` by Newton's method. Both substeps are
order preserving, so the discrete solution map keeps the comparison
principle: it is monotone in the datum, in the cap ``k`` and (on nested
grids) in the radius ``R``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .geometry import ModelManifold, RadialGrid, build_grid

log = logging.getLogger(__name__)

PROFILES = ("gaussian", "bump", "barenblatt", "table")
BOUNDARIES = ("dirichlet", "neumann")


class SolverError(RuntimeError):
    """Numerical failure that cannot be recovered by reducing the step."""


class ConfigurationError(ValueError):
    pass


class StepRejected(Exception):
    """Signal that a step must be retried with a smaller ``dt``."""


# -- problem description ---------------------------------------------------------


@dataclass(frozen=True)
class InitialDatum:
    """Radial initial datum.

    ``gaussian``: ``A exp(-(r/w)^2)``; ``bump``: ``A exp(1 - 1/(1 - (r/w)^2))``
    for ``r < w``; ``barenblatt``: the Euclidean Barenblatt profile at time
    ``t0`` with peak ``A``; ``table``: linear interpolation of ``(r, u)``
    pairs, zero past the last node.
    """

    profile: str = "bump"
    amplitude: float = 1.0
    width: float = 1.0
    t0: float = 1.0
    table: tuple = ()

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ConfigurationError(f"unknown datum profile {self.profile!r}; expected one of {PROFILES}")
        if not self.amplitude >= 0:
            raise ConfigurationError(f"datum amplitude must be >= 0, got {self.amplitude}")
        if not self.width > 0:
            raise ConfigurationError(f"datum width must be > 0, got {self.width}")
        if self.profile == "table":
            if len(self.table) < 2:
                raise ConfigurationError("table datum needs at least two (r, u) rows")
            r = [row[0] for row in self.table]
            if any(b <= a for a, b in zip(r, r[1:])):
                raise ConfigurationError("table datum radii must be strictly increasing")
            if any(row[1] < 0 for row in self.table):
                raise ConfigurationError("table datum values must be nonnegative")

    def scaled(self, amplitude: float) -> "InitialDatum":
        return replace(self, amplitude=amplitude)


@dataclass(frozen=True)
class ProblemParams:
    m: float
    p: float
    R: float
    datum: InitialDatum = field(default_factory=InitialDatum)
    k: float = math.inf
    reaction: bool = True
    boundary: str = "dirichlet"

    def __post_init__(self):
        if not self.m > 1:
            raise ConfigurationError(f"need m > 1, got m={self.m}")
        if not self.p > self.m:
            raise ConfigurationError(f"need p > m, got p={self.p}, m={self.m}")
        if not self.R > 0:
            raise ConfigurationError(f"need R > 0, got R={self.R}")
        if not self.k > 0:
            raise ConfigurationError(f"truncation cap k must be > 0, got {self.k}")
        if self.boundary not in BOUNDARIES:
            raise ConfigurationError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")

    def to_dict(self) -> dict:
        d = self.datum
        return {
            "m": self.m,
            "p": self.p,
            "R": self.R,
            "k": "inf" if math.isinf(self.k) else self.k,
            "reaction": self.reaction,
            "boundary": self.boundary,
            "datum": {"profile": d.profile, "amplitude": d.amplitude, "width": d.width, "t0": d.t0, "table": [list(row) for row in d.table]},
        }


@dataclass(frozen=True)
class SolverSettings:
    cells: int = 1000
    dt0: float = 1e-2
    t_end: float = 1.0
    dt_min: float = 1e-12
    u_max: float = 1e6
    sample_times: tuple = ()
    newton_tol: float = 1e-12
    newton_maxit: int = 50
    eta: float = 1e-12
    growth: float = 1.2
    max_reaction_growth: float = 0.5
    start_time: float = 0.0
    q_list: tuple = (2.0,)
    store_profiles: bool = True

    def __post_init__(self):
        errs = []
        if int(self.cells) != self.cells or self.cells < 2:
            errs.append(f"cells must be an integer >= 2, got {self.cells}")
        if not self.dt0 > 0:
            errs.append(f"dt0 must be > 0, got {self.dt0}")
        if not 0 < self.dt_min < self.dt0:
            errs.append(f"need 0 < dt_min < dt0, got dt_min={self.dt_min}, dt0={self.dt0}")
        if not self.t_end > self.start_time:
            errs.append(f"need t_end > start_time, got t_end={self.t_end}, start_time={self.start_time}")
        if not 1.0 <= self.growth <= 1.2:
            errs.append(f"step growth factor must lie in [1, 1.2], got {self.growth}")
        if not self.u_max > 0:
            errs.append(f"u_max must be > 0, got {self.u_max}")
        if not self.newton_tol > 0:
            errs.append(f"newton_tol must be > 0, got {self.newton_tol}")
        if any(q <= 0 for q in self.q_list):
            errs.append(f"norm exponents must be > 0, got {self.q_list}")
        if any(not (self.start_time < s <= self.t_end) for s in self.sample_times):
            errs.append("sample times must lie in (start_time, t_end]")
        if errs:
            raise ConfigurationError("; ".join(errs))

    def to_dict(self) -> dict:
        return {
            "cells": self.cells,
            "dt0": self.dt0,
            "t_end": self.t_end,
            "dt_min": self.dt_min,
            "u_max": self.u_max,
            "sample_times": list(self.sample_times),
            "newton_tol": self.newton_tol,
            "newton_maxit": self.newton_maxit,
            "eta": self.eta,
            "growth": self.growth,
            "max_reaction_growth": self.max_reaction_growth,
            "start_time": self.start_time,
            "q_list": list(self.q_list),
            "backend": kernels.backend(),
        }


@dataclass
class RadialState:
    grid: RadialGrid
    values: np.ndarray
    t: float = 0.0

    @property
    def sup_norm(self) -> float:
        return float(self.values.max()) if self.values.size else 0.0


@dataclass
class RunRecord:
    """Sampled history of one evolution.

    ``status`` is ``completed``, ``blow_up`` (sup norm reached ``u_max`` at
    ``status_time``) or ``dt_underflow`` (the step fell below ``dt_min``).
    ``lq`` maps each exponent to its norm series, computed with the
    manifold's own measure (rho-weighted on weighted manifolds).
    """

    times: np.ndarray
    sup_norm: np.ndarray
    lq: dict
    dt: np.ndarray
    status: str
    status_time: float
    radii: np.ndarray
    profiles: np.ndarray | None
    weighted_norms: bool
    provenance: dict
    steps: int = 0
    rejected: int = 0

    @property
    def blew_up(self) -> bool:
        return self.status == "blow_up"


# -- initial data ----------------------------------------------------------------


def barenblatt_exponents(m, N):
    """``(alpha, beta, k)`` of the Barenblatt solution of ``u_t = Delta u^m`` in R^N."""
    alpha = N / (N * (m - 1) + 2)
    beta = alpha / N
    k = alpha * (m - 1) / (2 * m * N)
    return alpha, beta, k


def barenblatt(r, t, m, N, C):
    """``t^-alpha (C - k r^2 t^{-2 beta})_+^{1/(m-1)}``."""
    alpha, beta, k = barenblatt_exponents(m, N)
    r = np.asarray(r, dtype=float)
    core = np.maximum(C - k * r**2 * t ** (-2 * beta), 0.0)
    return t ** (-alpha) * core ** (1.0 / (m - 1))


def barenblatt_constant(amplitude, t0, m, N):
    """``C`` such that the Barenblatt peak at time ``t0`` equals ``amplitude``."""
    alpha, _, _ = barenblatt_exponents(m, N)
    return (amplitude * t0**alpha) ** (m - 1)


def datum_values(datum: InitialDatum, r, m: float = 2.0, N: int = 3):
    """Evaluate the datum at radii ``r``."""
    r = np.asarray(r, dtype=float)
    A, w = datum.amplitude, datum.width
    if datum.profile == "gaussian":
        return A * np.exp(-((r / w) ** 2))
    if datum.profile == "bump":
        x = np.clip(r / w, 0.0, 1.0)
        out = np.zeros_like(r)
        inside = x < 1.0
        out[inside] = A * np.exp(1.0 - 1.0 / (1.0 - x[inside] ** 2))
        return out
    if datum.profile == "barenblatt":
        C = barenblatt_constant(A, datum.t0, m, N)
        return barenblatt(r, datum.t0, m, N, C)
    tab = np.asarray(datum.table, dtype=float)
    return np.interp(r, tab[:, 0], tab[:, 1], right=0.0)


def datum_norm(datum: InitialDatum, manifold: ModelManifold, R: float, q: float, m: float = 2.0, weighted: bool = True) -> float:
    """Continuous ``L^q(B_R)`` norm of the datum by adaptive quadrature."""
    from scipy.integrate import quad

    from .geometry import unit_sphere_area, warp_coefficients, weight_value

    N = manifold.dimension

    def integrand(s):
        if s <= 0:
            return 0.0
        f, _ = warp_coefficients(manifold, s)
        rho = weight_value(manifold, s) if weighted else 1.0
        return float(datum_values(datum, np.array([s]), m, N)[0]) ** q * f ** (N - 1) * rho

    pts = [x for x in (datum.width,) if 0 < x < R]
    val, _ = quad(integrand, 0.0, R, points=pts or None, epsabs=0, epsrel=1e-11, limit=400)
    return (unit_sphere_area(N) * val) ** (1.0 / q)


def scale_datum_to_norm(datum, manifold, R, q, target, m=2.0, weighted=True) -> InitialDatum:
    """Rescale ``datum`` so that its continuous ``L^q(B_R)`` norm equals ``target``."""
    unit = datum.scaled(1.0)
    base = datum_norm(unit, manifold, R, q, m, weighted)
    if base == 0:
        raise ConfigurationError("cannot rescale a datum with zero norm")
    return datum.scaled(target / base)


def initial_state(grid: RadialGrid, params: ProblemParams, start_time: float = 0.0) -> RadialState:
    u0 = datum_values(params.datum, grid.centers, params.m, grid.manifold.dimension)
    return RadialState(grid, np.ascontiguousarray(u0, dtype=float), start_time)


# -- discretization --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Operator:
    """Face coefficients of the radial flux-form Laplacian on a grid."""

    grid: RadialGrid
    c: np.ndarray
    c_out: float

    @classmethod
    def build(cls, grid: RadialGrid, boundary: str = "dirichlet") -> "Operator":
        c = np.ascontiguousarray(grid.face_areas / grid.dr)
        c[0] = 0.0
        c_out = 2.0 * c[-1] if boundary == "dirichlet" else 0.0
        return cls(grid, c, c_out)

    def divergence(self, U):
        """``int_cell Delta U`` for cell values ``U`` (zero beyond the outer face)."""
        return kernels.apply_operator(np.ascontiguousarray(U, dtype=float), self.c, self.c_out)


def elliptic_solve_radial(manifold: ModelManifold, R: float, cells: int, rhs) -> RadialState:
    """Solve ``-Delta v = f`` in B_R with ``v = 0`` on the boundary sphere.

    ``rhs`` is a callable of the radius or an array of cell values.
    """
    grid = build_grid(manifold, R, cells)
    op = Operator.build(grid, "dirichlet")
    f = rhs(grid.centers) if callable(rhs) else np.asarray(rhs, dtype=float)
    f = np.broadcast_to(np.asarray(f, dtype=float), grid.centers.shape)
    n = grid.cell_count
    cl = op.c[:-1].copy()
    cr = np.append(op.c[1:-1], op.c_out)
    diag = np.ascontiguousarray(cl + cr)
    lower = np.ascontiguousarray(-op.c[1:-1])
    upper = lower.copy()
    b = np.ascontiguousarray(grid.volumes * f)
    v = kernels.thomas(lower, diag, upper, b)
    if v.shape != (n,) or not np.all(np.isfinite(v)):
        raise SolverError(f"elliptic solve failed on {n} cells (R={R}, kind={manifold.kind})")
    return RadialState(grid, v, 0.0)


def reaction_term(u, p, k):
    """``T_k(u^p)`` for ``u >= 0``."""
    up = u**p
    return up if math.isinf(k) else np.minimum(up, k)


def advance_step(state: RadialState, params: ProblemParams, dt: float, op: Operator | None = None,
                 settings: SolverSettings | None = None) -> RadialState:
    """One step: explicit truncated reaction, then implicit porous-medium diffusion.

    Raises :class:`StepRejected` when the reaction grows ``u`` by more than
    ``max_reaction_growth`` relative to itself or Newton does not converge.
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    settings = settings or SolverSettings()
    op = op or Operator.build(state.grid, params.boundary)
    u = state.values
    if params.reaction:
        react = reaction_term(u, params.p, params.k)
        pos = u > 0
        if pos.any():
            rate = float(np.max(react[pos] / u[pos]))
            if dt * rate > settings.max_reaction_growth:
                raise StepRejected(f"reaction growth {dt * rate:.3g} exceeds {settings.max_reaction_growth}")
        b = u + dt * react
    else:
        b = u.copy()
    b = np.ascontiguousarray(b)
    new, iters, ok = kernels.newton_step(
        b, state.grid.measures, op.c, op.c_out, params.m, dt,
        settings.eta, settings.newton_tol, settings.newton_maxit,
    )
    if not ok:
        raise StepRejected(f"Newton did not converge in {iters} iterations (dt={dt:.3g})")
    return RadialState(state.grid, new, state.t + dt)


# -- time integration ------------------------------------------------------------


def lq_values(grid: RadialGrid, u, q, weighted: bool) -> float:
    w = grid.measures if weighted else grid.volumes
    return float(np.sum(w * u**q) ** (1.0 / q))


def _sample_schedule(settings: SolverSettings) -> list:
    ts = sorted(set(float(s) for s in settings.sample_times) | {float(settings.t_end)})
    return ts


def evolve(manifold: ModelManifold, params: ProblemParams, settings: SolverSettings) -> RunRecord:
    """Integrate from ``start_time`` to ``t_end`` with adaptive steps.

    A rejected step halves ``dt``; an accepted one multiplies it by
    ``growth`` (capped at ``dt0``). Steps are shortened to land exactly on
    the sample times. The run stops with ``blow_up`` once the sup norm
    reaches ``u_max`` and with ``dt_underflow`` when ``dt < dt_min``.
    """
    if params.R <= 0:
        raise ConfigurationError("R must be positive")
    grid = build_grid(manifold, params.R, settings.cells)
    op = Operator.build(grid, params.boundary)
    state = initial_state(grid, params, settings.start_time)
    weighted = manifold.weighted
    qs = tuple(float(q) for q in settings.q_list)

    times, sups, dts, profiles = [], [], [], []
    lq = {q: [] for q in qs}

    def record(st, dt_used):
        times.append(st.t)
        sups.append(st.sup_norm)
        dts.append(dt_used)
        for q in qs:
            lq[q].append(lq_values(grid, st.values, q, weighted))
        if settings.store_profiles:
            profiles.append(st.values.copy())

    record(state, 0.0)
    schedule = _sample_schedule(settings)
    dt = settings.dt0
    status, status_time = "completed", settings.t_end
    steps = rejected = 0
    j = 0
    if state.sup_norm >= settings.u_max:
        status, status_time = "blow_up", state.t
        schedule = []

    while j < len(schedule):
        target = schedule[j]
        h = min(dt, target - state.t)
        land = (target - state.t) - h <= 1e-12 * max(1.0, abs(target))
        if land:
            h = target - state.t
        try:
            new = advance_step(state, params, h, op, settings)
        except StepRejected as exc:
            rejected += 1
            dt = 0.5 * min(dt, h)
            log.debug("t=%.6g: %s", state.t, exc)
            if dt < settings.dt_min:
                status, status_time = "dt_underflow", state.t
                record(state, dt)
                break
            continue
        steps += 1
        new.t = target if land else state.t + h
        state = new
        if not np.all(np.isfinite(state.values)):
            raise SolverError(f"non-finite values at t={state.t}")
        if state.sup_norm >= settings.u_max:
            status, status_time = "blow_up", state.t
            record(state, h)
            break
        if land:
            record(state, h)
            j += 1
        if h >= dt * (1 - 1e-12):
            dt = min(dt * settings.growth, settings.dt0)

    prov = {
        "manifold": manifold.to_dict(),
        "problem": params.to_dict(),
        "solver": settings.to_dict(),
    }
    return RunRecord(
        times=np.array(times),
        sup_norm=np.array(sups),
        lq={q: np.array(v) for q, v in lq.items()},
        dt=np.array(dts),
        status=status,
        status_time=float(status_time),
        radii=np.array(grid.centers),
        profiles=np.array(profiles) if settings.store_profiles else None,
        weighted_norms=weighted,
        provenance=prov,
        steps=steps,
        rejected=rejected,
    )
