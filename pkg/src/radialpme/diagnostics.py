"""Norms and checks of the quantitative estimates against computed solutions.

Every check returns a :class:`BoundReport` whose ``worst_margin`` is a
normalized slack: the report passes exactly when
``worst_margin >= -tolerance``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .constants import ParameterError, compute_s, elliptic_gamma, sup_bound_gamma
from .geometry import ModelManifold
from .solver import Operator, RadialState, RunRecord


class ReportError(ValueError):
    """The inputs do not allow the requested check."""


@dataclass
class BoundReport:
    claim: str
    passed: bool
    worst_margin: float
    samples: int
    tolerance: float
    details: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["worst_margin"] = _json_float(self.worst_margin)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=_json_default)

    def summary(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.claim}: worst margin {self.worst_margin:.3e} over {self.samples} samples (tol {self.tolerance:g})"


def _json_float(x):
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return x


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return _json_float(o)
    if isinstance(o, np.ndarray):
        return [_json_float(v) for v in o.ravel()]
    return str(o)


def _report(claim, margins, tolerance, details):
    worst = float(min(margins)) if len(margins) else 0.0
    return BoundReport(claim, bool(worst >= -tolerance), worst, len(margins), tolerance, details)


# -- norms -----------------------------------------------------------------------


def lq_norm(state: RadialState, q: float, weighted: bool | None = None) -> float:
    """``(sum_i w_i u_i^q)^{1/q}``; ``weighted=None`` uses the manifold's own measure."""
    if not q > 0:
        raise ParameterError(f"norm exponent must be > 0, got q={q}")
    grid = state.grid
    if weighted is None:
        weighted = grid.manifold.weighted
    w = grid.measures if weighted else grid.volumes
    u = np.abs(state.values)
    return float(np.sum(w * u**q) ** (1.0 / q))


def sup_norm(state: RadialState) -> float:
    return float(np.max(np.abs(state.values)))


# -- time series checks ----------------------------------------------------------


def check_lq_monotone(record: RunRecord, q_list, tol: float = 1e-6, drift: float = 1e-8) -> BoundReport:
    """``||u(t)||_q <= ||u0||_q (1 + tol)`` and sample-to-sample growth ``<= drift``.

    The margin of a sample is the smaller of ``1 - n_j/n_0`` and
    ``(tol/drift) (1 - n_j/n_{j-1})``; both conditions hold exactly when the
    margin is ``>= -tol``. For a blown-up run only samples up to the blow-up
    time are used (all recorded samples are).
    """
    margins, details = [], []
    for q in q_list:
        key = _match_q(record.lq, q)
        series = np.asarray(record.lq[key], dtype=float)
        n0 = series[0]
        for j in range(1, len(series)):
            if n0 == 0:
                m_bound = 0.0 if series[j] == 0 else -math.inf
                m_step = m_bound
            else:
                m_bound = 1.0 - series[j] / n0
                prev = series[j - 1]
                m_step = (tol / drift) * (1.0 - series[j] / prev) if prev > 0 else (0.0 if series[j] == 0 else -math.inf)
            margin = min(m_bound, m_step)
            margins.append(margin)
            details.append({"q": key, "t": float(record.times[j]), "norm": float(series[j]), "norm0": float(n0), "margin": margin})
    return _report("Lq-monotone", margins, tol, details)


def _match_q(lq: dict, q):
    for key in lq:
        if abs(float(key) - float(q)) <= 1e-12 * max(1.0, abs(float(q))):
            return key
    raise ReportError(f"record has no L^{q} norm series (available: {sorted(lq)})")


def sup_bound_poincare(t, u0_norms: dict, m, p, r, s, C_s):
    """Right-hand side of the explicit sup bound at times ``t > 0``.

    ``u0_norms`` maps ``"m"``, ``"r"`` and ``"pr"`` to the datum norms.
    """
    t = np.asarray(t, dtype=float)
    Gamma = sup_bound_gamma(m, s, C_s)
    bracket = u0_norms["pr"] ** p + u0_norms["r"] / ((m - 1) * t)
    return Gamma * u0_norms["m"] ** ((s - 1) / s) * bracket ** (1.0 / (m * s))


def verify_sup_bound(record: RunRecord, manifold: ModelManifold, u0_norms: dict, m, p, N, r,
                     tol: float = 1e-3, allowance: float = 0.0) -> BoundReport:
    """Check ``||u(t)||_inf <= RHS(t) (1 + tol) + allowance`` at every sample with ``t > 0``."""
    if not manifold.has_poincare:
        raise ReportError("the explicit sup bound needs a Poincare inequality (C_p > 0)")
    s = compute_s(N, r)
    t0 = float(record.times[0])
    margins, details = [], []
    for t, sup in zip(record.times, record.sup_norm):
        elapsed = float(t) - t0
        if elapsed <= 0:
            continue
        rhs = float(sup_bound_poincare(elapsed, u0_norms, m, p, r, s, manifold.sobolev_constant))
        if rhs > 0:
            margin = 1.0 - (sup - allowance) / rhs
        else:
            margin = 0.0 if sup <= allowance else -math.inf
        margins.append(margin)
        details.append({"t": elapsed, "sup_norm": float(sup), "bound": rhs, "margin": margin})
    return _report("poincare-sup-bound", margins, tol, details)


def fit_decay_exponent(times, values, window=None) -> float:
    """Least-squares ``beta`` in ``values ~ C t^{-beta}`` over ``window = (t_lo, t_hi)``."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if window is not None:
        lo, hi = window
        sel = (t >= lo * (1 - 1e-12)) & (t <= hi * (1 + 1e-12))
        t, v = t[sel], v[sel]
    if t.size < 3:
        raise ParameterError(f"need at least 3 samples in the fit window, got {t.size}")
    if np.any(v <= 0) or np.any(t <= 0):
        raise ParameterError("decay fit needs positive times and values")
    slope = np.polyfit(np.log(t), np.log(v), 1)[0]
    return float(-slope)


def smoothing_statistic(record: RunRecord, rate: float, window=None):
    """``S(t) = t^rate ||u(t)||_inf`` over the samples in ``window``; returns ``(t, S)``."""
    t = record.times - record.times[0]
    sel = t > 0
    if window is not None:
        sel &= (t >= window[0] * (1 - 1e-12)) & (t <= window[1] * (1 + 1e-12))
    return t[sel], t[sel] ** rate * record.sup_norm[sel]


# -- elliptic and Aronson-Benilan ------------------------------------------------


def check_elliptic_linf(manifold: ModelManifold, v: RadialState, f, r, tol: float = 1e-3) -> BoundReport:
    """``||v||_inf <= s/(s-1) (1/C_s)^{2/s} ||f||_r^{1/s} ||v||_1^{(s-1)/s}`` with ``s = 1 + 2/N - 1/r``."""
    N = manifold.dimension
    if not r > N / 2:
        raise ReportError(f"elliptic estimate needs integrability r > N/2 = {N / 2}, got r={r}")
    s = compute_s(N, r)
    grid = v.grid
    fv = f(grid.centers) if callable(f) else np.asarray(f, dtype=float)
    fv = np.broadcast_to(np.abs(fv), grid.centers.shape)
    f_r = float(np.sum(grid.volumes * fv**r) ** (1.0 / r))
    v1 = float(np.sum(grid.volumes * np.abs(v.values)))
    lhs = float(np.max(np.abs(v.values)))
    rhs = elliptic_gamma(s, manifold.sobolev_constant) * f_r ** (1.0 / s) * v1 ** ((s - 1) / s)
    margin = 1.0 - lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else -math.inf)
    details = [{"sup": lhs, "f_Lr": f_r, "v_L1": v1, "bound": rhs, "s": s, "R": grid.outer_radius}]
    return _report("elliptic-linf", [margin], tol, details)


def cosine_bumps(R: float, scales: int = 5):
    """Test functions ``(1 + cos(pi r / L)) / 2`` on ``r < L`` for ``L = R, R/2, ..., R/2^(scales-1)``."""
    out = []
    for j in range(scales):
        L = R / 2**j

        def phi(r, L=L):
            r = np.asarray(r, dtype=float)
            return np.where(r < L, 0.5 * (1.0 + np.cos(np.pi * np.minimum(r, L) / L)), 0.0)

        phi.scale = L
        out.append(phi)
    return out


def check_aronson_benilan(state: RadialState, t: float, manifold: ModelManifold, p, m, test_functions=None,
                          reaction: bool = True, tol: float = 1e-3, boundary: str = "dirichlet") -> BoundReport:
    """Weak form of ``-Delta u^m <= rho u^p + rho u / ((m-1) t)`` against nonnegative test functions.

    For each ``phi`` the margin is
    ``-(int grad u^m . grad phi - int (u^p + u/((m-1)t)) phi rho) / ||phi||_{L^1_rho}``.
    """
    if not t > 0:
        raise ParameterError(f"Aronson-Benilan check needs t > 0, got t={t}")
    grid = state.grid
    if test_functions is None:
        test_functions = cosine_bumps(grid.outer_radius)
    op = Operator.build(grid, boundary)
    u = np.maximum(state.values, 0.0)
    div = op.divergence(u**m)
    source = u / ((m - 1) * t)
    if reaction:
        source = source + u**p
    margins, details = [], []
    for phi in test_functions:
        ph = np.asarray(phi(grid.centers), dtype=float)
        if np.any(ph < 0):
            raise ReportError("test functions must be nonnegative")
        norm = float(np.sum(grid.measures * ph))
        if norm == 0:
            continue
        grad_term = float(-np.dot(ph, div))
        src_term = float(np.sum(grid.measures * source * ph))
        margin = -(grad_term - src_term) / norm
        margins.append(margin)
        details.append({"scale": getattr(phi, "scale", None), "gradient_term": grad_term, "source_term": src_term,
                        "phi_L1": norm, "margin": margin})
    return _report("aronson-benilan", margins, tol, details)


# -- run comparisons -------------------------------------------------------------

_MODE_KEYS = {
    "cap_k": {"problem": {"k"}, "solver": set()},
    "radius_R": {"problem": {"R"}, "solver": {"cells"}},
    "datum_h": {"problem": {"datum"}, "solver": set()},
}


def _differing(a: dict, b: dict):
    return {k for k in set(a) | set(b) if a.get(k) != b.get(k)}


def _check_compatible(run_a: RunRecord, run_b: RunRecord, mode: str):
    if mode not in _MODE_KEYS:
        raise ReportError(f"unknown comparison mode {mode!r}; expected one of {sorted(_MODE_KEYS)}")
    pa, pb = run_a.provenance, run_b.provenance
    if not pa or not pb:
        return
    if pa.get("manifold") != pb.get("manifold"):
        raise ReportError("runs live on different manifolds")
    allowed = _MODE_KEYS[mode]
    for block in ("problem", "solver"):
        extra = _differing(pa.get(block, {}), pb.get(block, {})) - allowed[block]
        if extra:
            raise ReportError(f"runs differ in {block} fields {sorted(extra)} beyond the swept quantity ({mode})")


def _aligned_profiles(run_a: RunRecord, run_b: RunRecord):
    if run_a.profiles is None or run_b.profiles is None:
        raise ReportError("pointwise comparison needs stored profiles")
    ra, rb = run_a.radii, run_b.radii
    na = ra.size
    if na <= rb.size and np.allclose(ra, rb[:na], rtol=0, atol=1e-12 * max(1.0, rb[-1])):
        ext = np.zeros((run_a.profiles.shape[0], rb.size))
        ext[:, :na] = run_a.profiles
        return ext, False
    ext = np.array([np.interp(rb, ra, prof, right=0.0) for prof in run_a.profiles])
    return ext, True


def compare_runs_monotone(run_a: RunRecord, run_b: RunRecord, mode: str, tol: float = 1e-10,
                          allowance: float = 0.0) -> BoundReport:
    """Check ``run_a <= run_b`` pointwise at every shared sample time.

    ``run_a`` is zero-extended when its ball is smaller; non-nested grids are
    compared after linear interpolation, with ``allowance`` added to the
    tolerance. The largest absolute difference per sample is reported as
    ``sup_diff`` for Cauchy-type tables.
    """
    _check_compatible(run_a, run_b, mode)
    a_prof, interpolated = _aligned_profiles(run_a, run_b)
    margins, details = [], []
    for i, t in enumerate(run_a.times):
        j = np.flatnonzero(np.abs(run_b.times - t) <= 1e-12 * max(1.0, abs(t)))
        if j.size == 0:
            continue
        diff = run_b.profiles[j[0]] - a_prof[i]
        margin = float(diff.min()) + allowance
        margins.append(margin)
        details.append({"t": float(t), "min_diff": float(diff.min()), "sup_diff": float(np.abs(diff).max())})
    if not margins:
        raise ReportError("runs share no sample times")
    report = _report(f"monotone-{mode}", margins, tol, details)
    if interpolated:
        report.details.insert(0, {"note": "grids not nested; run_a interpolated linearly"})
    return report


def sup_difference(report: BoundReport) -> float:
    """Largest pointwise difference recorded in a comparison report."""
    return max((d["sup_diff"] for d in report.details if "sup_diff" in d), default=0.0)
