import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radialpme.diagnostics import (ReportError, check_aronson_benilan, check_elliptic_linf, check_lq_monotone,
                                   compare_runs_monotone, cosine_bumps, fit_decay_exponent, lq_norm, sup_norm,
                                   verify_sup_bound)
from radialpme.geometry import ModelManifold, build_grid
from radialpme.solver import (InitialDatum, ProblemParams, RadialState, RunRecord, SolverSettings, barenblatt,
                              barenblatt_constant, datum_values, elliptic_solve_radial, evolve)

E3 = ModelManifold()
GRID = build_grid(E3, 5.0, 400)


def _record(series, q=2.0):
    n = len(series)
    return RunRecord(times=np.arange(n, dtype=float), sup_norm=np.ones(n), lq={q: np.asarray(series, float)},
                     dt=np.zeros(n), status="completed", status_time=n - 1.0, radii=GRID.centers, profiles=None,
                     weighted_norms=False, provenance={})


def test_lq_norm_of_constant():
    st_ = RadialState(GRID, np.full(GRID.cell_count, 2.0))
    assert lq_norm(st_, 1.0) == pytest.approx(2 * 4 / 3 * math.pi * 125, rel=1e-12)
    assert sup_norm(st_) == 2.0


def test_weighted_norm_is_smaller():
    g = build_grid(ModelManifold("weighted_euclidean", decay=2.0), 5.0, 100)
    st_ = RadialState(g, np.ones(100))
    assert lq_norm(st_, 2.0) < lq_norm(st_, 2.0, weighted=False)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 3.0), st.floats(1.0, 3.0), st.floats(1.0, 8.0))
def test_lq_norm_monotone_under_ordering(a, factor, q):
    u = datum_values(InitialDatum("gaussian", a, 1.0), GRID.centers)
    assert lq_norm(RadialState(GRID, u), q) <= lq_norm(RadialState(GRID, factor * u), q)


@pytest.mark.parametrize("profile,width", [("bump", 1.0), ("gaussian", 0.7), ("bump", 3.0)])
def test_large_q_approaches_sup(profile, width):
    u = datum_values(InitialDatum(profile, 1.3, width), GRID.centers)
    st_ = RadialState(GRID, u)
    assert abs(lq_norm(st_, 200.0) - sup_norm(st_)) <= 0.05 * sup_norm(st_)


def test_lq_monotone_report():
    assert check_lq_monotone(_record([3, 2, 2, 1]), [2.0]).passed
    bad = check_lq_monotone(_record([3, 2, 2.1, 1]), [2.0])
    assert not bad.passed and bad.worst_margin < -bad.tolerance
    # growth below the drift tolerance is accepted
    assert check_lq_monotone(_record([3, 3 * (1 + 1e-9)]), [2.0]).passed
    with pytest.raises(ReportError):
        check_lq_monotone(_record([1, 1]), [4.0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.1, 10.0), min_size=2, max_size=20))
def test_pass_iff_margin_within_tolerance(series):
    rep = check_lq_monotone(_record(series), [2.0])
    assert rep.passed == (rep.worst_margin >= -rep.tolerance)
    assert rep.to_dict() == check_lq_monotone(_record(series), [2.0]).to_dict()


def test_fit_decay_exponent_exact():
    t = np.geomspace(0.1, 10, 30)
    assert fit_decay_exponent(t, 3 * t**-0.7) == pytest.approx(0.7, rel=1e-12)
    assert fit_decay_exponent(t, 3 * t**-0.7, (1.0, 10.0)) == pytest.approx(0.7, rel=1e-12)


def test_elliptic_check():
    v = elliptic_solve_radial(E3, 2.0, 400, lambda r: np.ones_like(r))
    assert check_elliptic_linf(E3, v, lambda r: np.ones_like(r), 2.0).passed
    with pytest.raises(ReportError):
        check_elliptic_linf(E3, v, lambda r: np.ones_like(r), 1.5)
    # a function far above the bound fails
    fake = RadialState(v.grid, 50 * v.values)
    assert not check_elliptic_linf(E3, fake, lambda r: np.ones_like(r), 2.0).passed


def test_cosine_bumps():
    phis = cosine_bumps(4.0)
    assert [p.scale for p in phis] == [4.0, 2.0, 1.0, 0.5, 0.25]
    assert phis[0](np.array([0.0]))[0] == 1.0 and phis[1](np.array([3.0]))[0] == 0.0


def test_aronson_benilan_barenblatt_and_violation():
    g = build_grid(E3, 10.0, 1000)
    C = barenblatt_constant(1.0, 1.0, 2.0, 3)
    good = RadialState(g, barenblatt(g.centers, 1.5, 2.0, 3, C), 1.5)
    assert check_aronson_benilan(good, 1.5, E3, 3.0, 2.0, reaction=False).passed
    spike = RadialState(g, np.exp(-(g.centers / 0.2) ** 2), 10.0)
    assert not check_aronson_benilan(spike, 10.0, E3, 3.0, 2.0, reaction=False).passed
    with pytest.raises(ValueError):
        check_aronson_benilan(good, 0.0, E3, 3.0, 2.0)


def _run(k=math.inf, R=5.0, cells=250, amplitude=1.5):
    params = ProblemParams(2.0, 3.0, R, InitialDatum("gaussian", amplitude, 1.0), k=k)
    return evolve(E3, params, SolverSettings(cells=cells, t_end=0.2, sample_times=(0.1,)))


def test_compare_runs():
    a, b = _run(k=1.0), _run(k=10.0)
    assert compare_runs_monotone(a, b, "cap_k").passed
    assert not compare_runs_monotone(b, a, "cap_k").passed
    same = compare_runs_monotone(a, a, "cap_k")
    assert same.passed and abs(same.worst_margin) <= 1e-12
    big = _run(R=10.0, cells=500)
    assert compare_runs_monotone(_run(), big, "radius_R").passed
    with pytest.raises(ReportError):
        compare_runs_monotone(a, big, "cap_k")
    with pytest.raises(ReportError):
        compare_runs_monotone(a, b, "bogus")


def test_compare_interpolates_non_nested_grids():
    rep = compare_runs_monotone(_run(R=5.0, cells=200), _run(R=10.0, cells=300), "radius_R", allowance=1e-3)
    assert rep.passed and "interpolated" in rep.details[0]["note"]


def test_sup_bound_requires_poincare():
    rec = _run()
    with pytest.raises(ReportError):
        verify_sup_bound(rec, E3, {"m": 1, "r": 1, "pr": 1}, 2.0, 3.0, 3, 2.0)


def test_sup_bound_detects_violation():
    H = ModelManifold("hyperbolic")
    params = ProblemParams(2.0, 2.5, 5.0, InitialDatum("bump", 0.05, 1.0))
    rec = evolve(H, params, SolverSettings(cells=100, t_end=1.0, sample_times=(0.5,)))
    tiny = {"m": 1e-9, "r": 1e-9, "pr": 1e-9}
    assert not verify_sup_bound(rec, H, tiny, 2.0, 2.5, 3, 2.0).passed
    rep = verify_sup_bound(rec, H, {"m": 1.0, "r": 1.0, "pr": 1.0}, 2.0, 2.5, 3, 2.0)
    assert rep.passed and rep.samples == 2
