"""Inner loops of the implicit diffusion solve.

Two interchangeable implementations are provided: numba ``@njit`` kernels
and a numpy/LAPACK fallback. The fallback is used when numba is missing or
when the environment variable ``RADIALPME_DISABLE_NUMBA`` is set to a
non-empty value other than ``0``. Both paths compute the same iterates up
to rounding.

The discrete operator acts on cell values ``u`` through face coefficients
``c[j] = area(face j) / dr`` (``c[0] = 0`` at the origin) and a boundary
coefficient ``c_out`` for the outer face (``2 area / dr`` for a homogeneous
Dirichlet condition, ``0`` for zero flux). One implicit step solves

    w_i (u_i - b_i) - dt [c_{i+1} (U_{i+1} - U_i) - c_i (U_i - U_{i-1})] = 0,

with ``U = u^m`` and ``U_n = 0`` beyond the outer face.
"""

from __future__ import annotations

import os

import numpy as np
from scipy.linalg import solve_banded

try:
    import numba
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


def _flag_disables_numba() -> bool:
    v = os.environ.get("RADIALPME_DISABLE_NUMBA", "")
    return v not in ("", "0")


USE_NUMBA = HAVE_NUMBA and not _flag_disables_numba()


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


# -- numba path ------------------------------------------------------------------


@njit(cache=True)
def thomas_numba(lower, diag, upper, rhs):
    """Solve a tridiagonal system; ``lower[i]`` couples row ``i+1`` to ``i``."""
    n = diag.shape[0]
    cp = np.empty(n)
    dp = np.empty(n)
    cp[0] = upper[0] / diag[0] if n > 1 else 0.0
    dp[0] = rhs[0] / diag[0]
    for i in range(1, n):
        den = diag[i] - lower[i - 1] * cp[i - 1]
        if i < n - 1:
            cp[i] = upper[i] / den
        dp[i] = (rhs[i] - lower[i - 1] * dp[i - 1]) / den
    x = np.empty(n)
    x[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


@njit(cache=True)
def apply_operator_numba(U, c, c_out):
    """Flux divergence ``c_{i+1}(U_{i+1}-U_i) - c_i(U_i-U_{i-1})`` per cell."""
    n = U.shape[0]
    out = np.empty(n)
    for i in range(n):
        left = c[i] * (U[i] - U[i - 1]) if i > 0 else 0.0
        if i < n - 1:
            right = c[i + 1] * (U[i + 1] - U[i])
        else:
            right = -c_out * U[i]
        out[i] = right - left
    return out


@njit(cache=True)
def newton_step_numba(b, w, c, c_out, m, dt, eta, tol, maxit):
    n = b.shape[0]
    u = b.copy()
    lower = np.empty(n - 1)
    upper = np.empty(n - 1)
    diag = np.empty(n)
    F = np.empty(n)
    Up = np.empty(n)
    dU = np.empty(n)
    for it in range(1, maxit + 1):
        umax = 0.0
        for i in range(n):
            ui = u[i] if u[i] > 0.0 else 0.0
            Up[i] = ui**m
            ur = u[i] if u[i] > eta else eta
            dU[i] = m * ur ** (m - 1.0)
            if ui > umax:
                umax = ui
        for i in range(n):
            cl = c[i] if i > 0 else 0.0
            cr = c[i + 1] if i < n - 1 else c_out
            flux = -cr * Up[i] - cl * Up[i]
            if i > 0:
                flux += cl * Up[i - 1]
            if i < n - 1:
                flux += cr * Up[i + 1]
            F[i] = -(w[i] * (u[i] - b[i]) - dt * flux)
            diag[i] = w[i] + dt * (cl + cr) * dU[i]
            if i > 0:
                lower[i - 1] = -dt * cl * dU[i - 1]
            if i < n - 1:
                upper[i] = -dt * cr * dU[i + 1]
        delta = thomas_numba(lower, diag, upper, F)
        dmax = 0.0
        for i in range(n):
            d = abs(delta[i])
            if d > dmax:
                dmax = d
            v = u[i] + delta[i]
            u[i] = v if v > 0.0 else 0.0
        if not np.isfinite(dmax):
            return u, it, False
        if dmax <= tol * umax or dmax == 0.0:
            return u, it, True
    return u, maxit, False


# -- numpy path ------------------------------------------------------------------


def thomas_numpy(lower, diag, upper, rhs):
    n = diag.shape[0]
    ab = np.zeros((3, n))
    ab[0, 1:] = upper
    ab[1] = diag
    ab[2, :-1] = lower
    return solve_banded((1, 1), ab, rhs, check_finite=False)


def apply_operator_numpy(U, c, c_out):
    flux = np.empty(U.shape[0] + 1)
    flux[0] = 0.0
    flux[1:-1] = c[1:-1] * (U[1:] - U[:-1])
    flux[-1] = -c_out * U[-1]
    return flux[1:] - flux[:-1]


def newton_step_numpy(b, w, c, c_out, m, dt, eta, tol, maxit):
    u = b.copy()
    cl = c[:-1].copy()
    cl[0] = 0.0
    cr = np.empty_like(cl)
    cr[:-1] = c[1:-1]
    cr[-1] = c_out
    ab = np.zeros((3, b.shape[0]))
    for it in range(1, maxit + 1):
        up = np.maximum(u, 0.0)
        Up = up**m
        dU = m * np.maximum(u, eta) ** (m - 1.0)
        F = -(w * (u - b) - dt * apply_operator_numpy(Up, c, c_out))
        ab[1] = w + dt * (cl + cr) * dU
        ab[0, 1:] = -dt * cr[:-1] * dU[1:]
        ab[2, :-1] = -dt * cl[1:] * dU[:-1]
        delta = solve_banded((1, 1), ab, F, check_finite=False)
        dmax = np.max(np.abs(delta))
        u = np.maximum(u + delta, 0.0)
        if not np.isfinite(dmax):
            return u, it, False
        if dmax <= tol * up.max() or dmax == 0.0:
            return u, it, True
    return u, maxit, False


# -- dispatch --------------------------------------------------------------------


def newton_step(b, w, c, c_out, m, dt, eta=1e-12, tol=1e-12, maxit=50):
    """Solve one implicit diffusion step starting from ``b``.

    Returns ``(u, iterations, converged)``. Iterates are projected onto
    ``u >= 0``; the Jacobian uses ``m max(u, eta)^(m-1)``.
    """
    if USE_NUMBA:
        return newton_step_numba(b, w, c, float(c_out), float(m), float(dt), float(eta), float(tol), int(maxit))
    return newton_step_numpy(b, w, c, float(c_out), float(m), float(dt), float(eta), float(tol), int(maxit))


def thomas(lower, diag, upper, rhs):
    if USE_NUMBA:
        return thomas_numba(lower, diag, upper, rhs)
    return thomas_numpy(lower, diag, upper, rhs)


def apply_operator(U, c, c_out):
    if USE_NUMBA:
        return apply_operator_numba(U, c, float(c_out))
    return apply_operator_numpy(U, c, float(c_out))
