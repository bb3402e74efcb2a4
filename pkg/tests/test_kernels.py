import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radialpme import kernels
from radialpme.geometry import ModelManifold, build_grid
from radialpme.solver import Operator

pytestmark = pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba not installed")


def _problem(n, seed, kind="euclidean"):
    rng = np.random.default_rng(seed)
    grid = build_grid(ModelManifold(kind), 4.0, n)
    op = Operator.build(grid)
    b = np.ascontiguousarray(np.maximum(rng.normal(0.3, 0.4, n), 0.0))
    return b, np.ascontiguousarray(grid.measures), op


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 300), st.integers(0, 10**6))
def test_thomas_backends_agree(n, seed):
    rng = np.random.default_rng(seed)
    lower, upper = rng.uniform(-1, 0, n - 1), rng.uniform(-1, 0, n - 1)
    diag = 2.5 + rng.uniform(0, 1, n)
    rhs = rng.normal(size=n)
    x = kernels.thomas_numba(lower, diag, upper, rhs)
    assert np.allclose(x, kernels.thomas_numpy(lower, diag, upper, rhs), rtol=1e-12, atol=1e-12)
    A = np.diag(diag) + np.diag(lower, -1) + np.diag(upper, 1)
    assert np.allclose(A @ x, rhs, atol=1e-10)


@pytest.mark.parametrize("kind", ["euclidean", "hyperbolic"])
@pytest.mark.parametrize("m", [1.5, 2.0, 3.0])
def test_newton_backends_agree(kind, m):
    b, w, op = _problem(200, 1, kind)
    u1, it1, ok1 = kernels.newton_step_numba(b, w, op.c, op.c_out, m, 1e-2, 1e-12, 1e-12, 50)
    u2, it2, ok2 = kernels.newton_step_numpy(b, w, op.c, op.c_out, m, 1e-2, 1e-12, 1e-12, 50)
    assert ok1 and ok2
    assert np.allclose(u1, u2, rtol=1e-10, atol=1e-14)
    assert np.all(u1 >= 0)


def test_newton_solves_the_step_equation():
    b, w, op = _problem(150, 2)
    u, _, ok = kernels.newton_step(b, w, op.c, op.c_out, 2.0, 1e-2)
    assert ok
    residual = w * (u - b) - 1e-2 * kernels.apply_operator(u**2, op.c, op.c_out)
    assert np.abs(residual).max() <= 1e-10 * np.abs(w * b).max()


def test_operator_backends_agree():
    b, _, op = _problem(64, 3)
    assert np.allclose(kernels.apply_operator_numba(b, op.c, op.c_out), kernels.apply_operator_numpy(b, op.c, op.c_out),
                       rtol=1e-13, atol=1e-13)


def test_env_flag_selects_fallback():
    env = dict(os.environ, RADIALPME_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "from radialpme import kernels; print(kernels.backend())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
    env["RADIALPME_DISABLE_NUMBA"] = "0"
    out = subprocess.run([sys.executable, "-c", "from radialpme import kernels; print(kernels.backend())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numba"
