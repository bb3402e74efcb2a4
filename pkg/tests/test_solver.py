import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radialpme.geometry import ModelManifold, build_grid
from radialpme.solver import (ConfigurationError, InitialDatum, Operator, ProblemParams, RadialState, SolverSettings,
                              StepRejected, advance_step, barenblatt, barenblatt_constant, datum_norm, datum_values,
                              elliptic_solve_radial, evolve, scale_datum_to_norm)

E3 = ModelManifold()


def test_datum_profiles():
    r = np.array([0.0, 0.5, 1.0, 2.0])
    bump = datum_values(InitialDatum("bump", 2.0, 1.0), r)
    assert bump[0] == 2.0 and bump[2] == 0 and bump[3] == 0
    gauss = datum_values(InitialDatum("gaussian", 1.0, 2.0), r)
    assert gauss[3] == pytest.approx(math.exp(-1))
    tab = datum_values(InitialDatum("table", table=((0.0, 1.0), (1.0, 0.0))), r)
    assert np.allclose(tab, [1.0, 0.5, 0.0, 0.0])
    bar = datum_values(InitialDatum("barenblatt", 1.5, t0=2.0), r)
    assert bar[0] == pytest.approx(1.5)


@pytest.mark.parametrize("kwargs", [{"profile": "box"}, {"amplitude": -1.0}, {"width": 0.0},
                                    {"profile": "table", "table": ((0.0, 1.0),)},
                                    {"profile": "table", "table": ((1.0, 1.0), (0.5, 0.0))}])
def test_invalid_datum(kwargs):
    with pytest.raises(ConfigurationError):
        InitialDatum(**kwargs)


@pytest.mark.parametrize("kwargs", [{"m": 1.0}, {"p": 2.0}, {"R": 0.0}, {"k": 0.0}, {"boundary": "robin"}])
def test_invalid_problem(kwargs):
    base = dict(m=2.0, p=3.0, R=1.0)
    base.update(kwargs)
    with pytest.raises(ConfigurationError):
        ProblemParams(**base)


@pytest.mark.parametrize("kwargs", [{"dt_min": 1.0}, {"growth": 1.5}, {"t_end": 0.0}, {"sample_times": (2.0,)},
                                    {"q_list": (0.0,)}, {"cells": 1}])
def test_invalid_settings(kwargs):
    with pytest.raises(ConfigurationError):
        SolverSettings(**kwargs)


def test_datum_norm_scaling():
    d = scale_datum_to_norm(InitialDatum("gaussian", 1.0, 1.0), E3, 20.0, 2.0, 0.3)
    assert datum_norm(d, E3, 20.0, 2.0) == pytest.approx(0.3, rel=1e-10)
    # gaussian L^2 norm on R^3: (pi/2)^(3/4)
    assert datum_norm(InitialDatum("gaussian", 1.0, 1.0), E3, 20.0, 2.0) == pytest.approx((math.pi / 2) ** 0.75, rel=1e-9)


@pytest.mark.parametrize("N,exact", [(3, 1 / 6), (4, 1 / 8), (5, 1 / 10)])
def test_elliptic_constant_rhs(N, exact):
    v = elliptic_solve_radial(ModelManifold(dimension=N), 1.0, 1000, lambda r: np.ones_like(r))
    assert v.values[0] == pytest.approx(exact, abs=1e-4)
    assert np.allclose(v.values, (1 - v.grid.centers**2) / (2 * N), atol=1e-5)


def _run(amplitude=0.5, width=1.0, **kw):
    params = ProblemParams(2.0, 3.0, kw.pop("R", 5.0), InitialDatum("bump", amplitude, width),
                           reaction=kw.pop("reaction", True), boundary=kw.pop("boundary", "dirichlet"),
                           k=kw.pop("k", math.inf))
    settings = SolverSettings(**{"cells": 200, "dt0": 1e-2, "t_end": 0.5, **kw})
    return evolve(kw.get("manifold", E3), params, settings)


def test_samples_land_exactly():
    rec = _run(sample_times=(0.1, 0.25, 1 / 3))
    assert list(rec.times) == [0.0, 0.1, 0.25, 1 / 3, 0.5]
    assert rec.status == "completed"


def test_neumann_pme_conserves_mass():
    rec = _run(reaction=False, boundary="neumann", q_list=(1.0,), t_end=1.0, sample_times=(0.5,))
    mass = rec.lq[1.0]
    assert np.ptp(mass) <= 1e-10 * mass[0]


def test_zero_datum_stays_zero():
    rec = _run(amplitude=0.0)
    assert np.all(rec.sup_norm == 0)


def test_determinism():
    a, b = _run(sample_times=(0.2,)), _run(sample_times=(0.2,))
    assert np.array_equal(a.profiles, b.profiles) and np.array_equal(a.dt, b.dt)


def test_blow_up_detected():
    rec = _run(amplitude=5.0, width=3.0, t_end=5.0, u_max=1e3)
    assert rec.blew_up and rec.status_time < 5.0 and rec.sup_norm[-1] >= 1e3


def test_dt_underflow_reported():
    rec = _run(amplitude=5.0, width=3.0, t_end=5.0, u_max=1e12, dt_min=1e-3)
    assert rec.status == "dt_underflow"


def test_reaction_growth_rejects_large_steps():
    grid = build_grid(E3, 5.0, 50)
    params = ProblemParams(2.0, 3.0, 5.0, InitialDatum("bump", 10.0, 1.0))
    state = RadialState(grid, datum_values(params.datum, grid.centers), 0.0)
    with pytest.raises(StepRejected):
        advance_step(state, params, 0.1)
    assert advance_step(state, params, 1e-3).t == pytest.approx(1e-3)


def test_barenblatt_short_run():
    cells = 500
    h = 10.0 / cells
    C = barenblatt_constant(1.0, 1.0, 2.0, 3)
    params = ProblemParams(2.0, 3.0, 10.0, InitialDatum("barenblatt", 1.0, t0=1.0), reaction=False)
    rec = evolve(E3, params, SolverSettings(cells=cells, dt0=4 * h * h, t_end=1.5, start_time=1.0))
    exact = barenblatt(rec.radii, 1.5, 2.0, 3, C)
    assert abs(rec.sup_norm[-1] - exact.max()) / exact.max() < 1e-3


def test_operator_annihilates_constants_inside():
    grid = build_grid(ModelManifold("hyperbolic"), 3.0, 30)
    op = Operator.build(grid, "neumann")
    assert np.allclose(op.divergence(np.ones(30)), 0.0, atol=1e-12)


@settings(max_examples=12, deadline=None)
@given(st.floats(0.1, 1.5), st.floats(1.0, 2.0))
def test_comparison_in_datum(a, factor):
    lo, hi = _run(amplitude=a, t_end=0.2), _run(amplitude=a * factor, t_end=0.2)
    assert np.all(hi.profiles[-1] - lo.profiles[-1] >= -1e-12)


@settings(max_examples=8, deadline=None)
@given(st.floats(0.5, 4.0))
def test_comparison_in_cap(k):
    lo, hi = _run(amplitude=1.5, t_end=0.2, k=k), _run(amplitude=1.5, t_end=0.2, k=2 * k)
    assert np.all(hi.profiles[-1] - lo.profiles[-1] >= -1e-12)


def test_weighted_and_hyperbolic_runs_decay():
    for M in (ModelManifold("hyperbolic"), ModelManifold("weighted_euclidean", decay=2.0)):
        params = ProblemParams(2.0, 2.5, 5.0, InitialDatum("bump", 0.05, 1.0))
        rec = evolve(M, params, SolverSettings(cells=100, t_end=1.0, sample_times=(0.5,), q_list=(2.0,)))
        assert rec.weighted_norms == M.weighted
        assert np.all(np.diff(rec.lq[2.0]) <= 0)
