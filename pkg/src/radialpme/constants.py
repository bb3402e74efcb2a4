"""Exponents, Moser ladders and smallness thresholds.

Every function works on floats and, for the identity checks, on
:class:`fractions.Fraction` inputs: if any argument is a ``Fraction`` the
integer arguments are promoted so that the result stays exact wherever the
formula only involves rational operations (non-integer powers fall back to
floats).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np


class ParameterError(ValueError):
    """Raised when a formula is evaluated outside its hypotheses."""


def _exact(*xs):
    if any(isinstance(x, Fraction) for x in xs):
        return tuple(Fraction(x) if isinstance(x, (int, Fraction)) else x for x in xs)
    return xs


def _check_mp(m, p, N=None):
    if not m > 1:
        raise ParameterError(f"need m > 1, got m={m}")
    if not p > m:
        raise ParameterError(f"need p > m, got p={p}, m={m}")
    if N is not None and not N >= 3:
        raise ParameterError(f"need N >= 3, got N={N}")


def compute_p0(m, p, N):
    """``p0 = (p - m) N / 2``; ``p0 > 1`` exactly when ``p > m + 2/N``."""
    m, p, N = _exact(m, p, N)
    _check_mp(m, p, N)
    return (p - m) * N / 2


def compute_s(N, r):
    """``s = 1 + 2/N - 1/r``, defined for ``r > N/2`` (then ``s > 1``)."""
    N, r = _exact(N, r)
    if not r > N / 2:
        raise ParameterError(f"need r > N/2, got r={r}, N={N}")
    return 1 + 2 / N - 1 / r


def fujita_exponent(m, N):
    """Critical exponent ``m + 2/N`` separating blow-up from small-data existence on R^N."""
    m, N = _exact(m, N)
    return m + 2 / N


# -- Moser iteration -----------------------------------------------------------


@dataclass
class MoserData:
    """Moser ladder ``q_0 < q_1 < ... < q_nbar`` and its aggregates."""

    q0: float
    q: float
    N: int
    m: float
    sequence: list
    n_bar: int
    sigma: float
    A: float = None
    B: float = None
    alpha_nbar: float = None
    beta_nbar: float = None
    delta_nbar: float = None
    theta_interp: float = None


def moser_term(q0, N, m, n):
    """Closed form ``q_n = sigma^n q0 + N(m-1)/(N-2) * sum_{i<n} sigma^i``, ``sigma = N/(N-2)``."""
    q0, N, m = _exact(q0, N, m)
    sigma = N / (N - 2)
    return sigma**n * q0 + N * (m - 1) / (N - 2) * sum(sigma**i for i in range(n))


def moser_recursion(q0, N, m, n):
    """``[q_0, ..., q_n]`` from ``q_k = N/(N-2) (m + q_{k-1} - 1)``."""
    q0, N, m = _exact(q0, N, m)
    seq = [q0]
    for _ in range(n):
        seq.append(N / (N - 2) * (m + seq[-1] - 1))
    return seq


def moser_sequence(q0, N, m, q_target) -> MoserData:
    """Ladder from ``q0`` up to the first term ``q_nbar >= q_target``."""
    q0, N, m, q_target = _exact(q0, N, m, q_target)
    if not q0 > 1:
        raise ParameterError(f"need q0 > 1, got {q0}")
    if q_target < q0:
        raise ParameterError(f"target q={q_target} is below q0={q0}")
    if not N >= 3:
        raise ParameterError(f"need N >= 3, got N={N}")
    seq = [q0]
    while seq[-1] < q_target:
        seq.append(N / (N - 2) * (m + seq[-1] - 1))
    return MoserData(q0=q0, q=q_target, N=N, m=m, sequence=seq, n_bar=len(seq) - 1, sigma=N / (N - 2))


def moser_aggregates(q0, N, m, q) -> MoserData:
    """Ladder plus ``A, B, alpha, beta, delta`` at ``nbar`` and the interpolation exponent."""
    data = moser_sequence(q0, N, m, q)
    q0, N, m, q = _exact(q0, N, m, q)
    sigma = data.sigma
    qn = data.sequence[-1]
    A = sigma**data.n_bar - 1
    data.A = A
    data.B = N * (m - 1) * A + 2 * q0 * (A + 1)
    data.alpha_nbar = (N - 2) / 2 * A / qn
    data.beta_nbar = N / 2 * A / qn
    data.delta_nbar = (A + 1) * q0 / qn
    if qn == q0:
        # q == q0 == q_nbar: the endpoint value
        data.theta_interp = q0 - q0
    else:
        data.theta_interp = q0 / q * ((qn - q) / (qn - q0))
    return data


# -- exponents -------------------------------------------------------------------


def sup_decay_exponents(m, p, N, r):
    """Decay exponent ``gamma`` and datum exponents ``delta1, delta2`` of the sup bound.

    The denominators are ``p - 1`` in all three (``delta1 = p * delta_{pr}``
    with ``delta_q`` of the smoothing estimate).
    """
    m, p, N, r = _exact(m, p, N, r)
    _check_mp(m, p, N)
    p0 = compute_p0(m, p, N)
    if not p0 > 1:
        raise ParameterError(f"need p > m + 2/N (p0 > 1), got p0={p0}")
    if not r > max(p0, N / 2):
        raise ParameterError(f"need r > max(p0, N/2) = {max(p0, N / 2)}, got r={r}")
    gamma = p / (p - 1) * (1 - N * (p - m) / (2 * p * r))
    delta1 = p * (p - m) / (p - 1) * (1 + N * (m - 1) / (2 * p * r))
    delta2 = (p - m) / (p - 1) * (1 + N * (m - 1) / (2 * r))
    return gamma, delta1, delta2


def exponents_smoothing(q0, q, N, m):
    """``(gamma_q, delta_q)`` of the ``L^{q0} -> L^q`` smoothing estimate."""
    q0, q, N, m = _exact(q0, q, N, m)
    if not q0 > 1:
        raise ParameterError(f"need q0 > 1, got {q0}")
    if q < q0:
        raise ParameterError(f"need q >= q0, got q={q}, q0={q0}")
    gamma_q = (1 / q0 - 1 / q) * N * q0 / (2 * q0 + N * (m - 1))
    delta_q = q0 / q * ((q + N / 2 * (m - 1)) / (q0 + N / 2 * (m - 1)))
    return gamma_q, delta_q


def exponents_smoothing_p0(q, m, p, N):
    """Same exponents written directly in ``p`` (valid for ``q0 = p0``)."""
    q, m, p, N = _exact(q, m, p, N)
    gamma_q = 1 / (p - 1) * (1 - N * (p - m) / (2 * q))
    delta_q = (p - m) / (p - 1) * (1 + N * (m - 1) / (2 * q))
    return gamma_q, delta_q


# -- thresholds ------------------------------------------------------------------


def _coercivity(m, q):
    """``2m(q-1)/(m+q-1)^2``, the gradient-vs-reaction balance at exponent ``q``."""
    return 2 * m * (q - 1) / (m + q - 1) ** 2


def _root(x, e):
    if e == 1:
        return x
    return float(x) ** float(e)


def threshold_eps0_tilde(p, m, N, C_s, q, q0):
    """Smallness level of ``||u0||_{p0}`` for smoothing from ``L^{q0}`` to ``L^q``."""
    p, m, N, C_s, q, q0 = _exact(p, m, N, C_s, q, q0)
    _check_mp(m, p, N)
    if not C_s > 0:
        raise ParameterError(f"need C_s > 0, got {C_s}")
    p0 = compute_p0(m, p, N)
    if not p0 > 1:
        raise ParameterError(f"threshold needs p > m + 2/N (p0 = {p0} <= 1)")
    ladder = moser_sequence(q0, N, m, q).sequence
    inner = min(min(_coercivity(m, qn) for qn in ladder), _coercivity(m, p0)) * C_s**2
    return _root(inner, 1 / (p - m))


def threshold_eps_bar(p, m, N, C_s, q):
    """Smallness level for ``t -> ||u(t)||_q`` to be nonincreasing."""
    p, m, N, C_s, q = _exact(p, m, N, C_s, q)
    _check_mp(m, p, N)
    p0 = compute_p0(m, p, N)
    if not p0 > 1:
        raise ParameterError(f"threshold needs p > m + 2/N (p0 = {p0} <= 1)")
    if not q > 1:
        raise ParameterError(f"need q > 1, got {q}")
    inner = min(_coercivity(m, q), _coercivity(m, p0)) * C_s**2
    return _root(inner, 1 / (p - m))


def threshold_family_sobolev(p, m, N, r, C_s, q):
    """``(eps0, eps0_hat, eps_bar, eps)`` for the Sobolev-only global existence result.

    ``eps0_hat`` is ``None`` when ``q < p0``.
    """
    p, m, N, r, C_s, q = _exact(p, m, N, r, C_s, q)
    p0 = compute_p0(m, p, N)
    eps0 = threshold_eps0_tilde(p, m, N, C_s, p * r, p0)
    eps0_hat = threshold_eps0_tilde(p, m, N, C_s, q, p0) if q >= p0 else None
    eps_bar = threshold_eps_bar(p, m, N, C_s, q)
    return eps0, eps0_hat, eps_bar, min(eps_bar, eps0)


def threshold_eps1_tilde(q, m, p, N, C_p, C_s):
    """Smallness level of ``||u0||_{pN/2}`` in the Poincare case, at exponent ``q``."""
    q, m, p, N, C_p, C_s = _exact(q, m, p, N, C_p, C_s)
    _check_mp(m, p, N)
    if not C_p > 0:
        raise ParameterError("threshold needs a Poincare inequality (C_p > 0)")
    if not C_s > 0:
        raise ParameterError(f"need C_s > 0, got {C_s}")
    if not q > 1:
        raise ParameterError(f"need q > 1, got {q}")
    theta = m * (m + q - 1) / (p * (p + q - 1))
    c_tilde = _root(1 / C_s, 2 * (1 - theta) * (p + q - 1) / (p + m + q - 1))
    C = _root(C_p, 2 * m / p) * c_tilde
    denom = p * (p + q - 1) - m * (m + q - 1)
    if not denom > 0:
        raise ArithmeticError(f"exponent denominator {denom} must be positive for p > m")
    inner = min(_coercivity(m, q), _coercivity(m, p * N / 2)) * C
    return _root(inner, (p + m + q - 1) / denom)


def threshold_eps1(m, p, N, r, C_p, C_s):
    """``min`` of the Poincare-case threshold over ``q in {m, p, pr, r}``."""
    return min(threshold_eps1_tilde(q, m, p, N, C_p, C_s) for q in (m, p, p * r, r))


def elliptic_gamma(s, C_s):
    """``s/(s-1) (1/C_s)^{2/s}``, the constant of the elliptic ``L^infinity`` bound."""
    return s / (s - 1) * (1.0 / C_s) ** (2.0 / s)


def sup_bound_gamma(m, s, C_s):
    """``Gamma = [s/(s-1) (1/C_s)^{2/s}]^{1/m}`` of the Poincare-case sup bound."""
    return elliptic_gamma(s, C_s) ** (1.0 / m)


# -- tables ----------------------------------------------------------------------


@dataclass
class ExponentTable:
    """All exponents and thresholds for one parameter set; ``None`` marks "not applicable"."""

    m: float
    p: float
    N: int
    r: float
    q: float
    C_s: float
    C_p: float
    p0: float
    fujita: float
    s: Optional[float] = None
    gamma: Optional[float] = None
    delta1: Optional[float] = None
    delta2: Optional[float] = None
    decay_rate: Optional[float] = None
    gamma_q: dict = field(default_factory=dict)
    delta_q: dict = field(default_factory=dict)
    eps0_tilde: Optional[float] = None
    eps0: Optional[float] = None
    eps0_hat: Optional[float] = None
    eps_bar: Optional[float] = None
    eps: Optional[float] = None
    eps1_tilde: Optional[float] = None
    eps1: Optional[float] = None
    eps2: Optional[float] = None
    Gamma_poincare: Optional[float] = None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gamma_q"] = {str(k): v for k, v in self.gamma_q.items()}
        d["delta_q"] = {str(k): v for k, v in self.delta_q.items()}
        return d


def _try(table, label, fn, *args):
    try:
        return fn(*args)
    except (ParameterError, ArithmeticError) as exc:
        table.notes.append(f"{label}: {exc}")
        return None


def exponent_table(m, p, N, r, q, C_s, C_p=0.0, q_list=None) -> ExponentTable:
    """Evaluate every exponent and threshold that applies to ``(m, p, N, r, q)``."""
    _check_mp(m, p, N)
    p0 = compute_p0(m, p, N)
    t = ExponentTable(m=m, p=p, N=N, r=r, q=q, C_s=C_s, C_p=C_p, p0=p0, fujita=fujita_exponent(m, N))
    t.s = _try(t, "s", compute_s, N, r)
    e = _try(t, "gamma/delta", sup_decay_exponents, m, p, N, r)
    if e is not None:
        t.gamma, t.delta1, t.delta2 = e
        t.decay_rate = t.gamma / (m * t.s)
    if p0 > 1:
        qs = sorted(set(q_list or []) | {q, p * r, r, p, m})
        for qq in qs:
            if qq >= p0:
                t.gamma_q[qq], t.delta_q[qq] = exponents_smoothing(p0, qq, N, m)
        if q >= p0:
            t.eps0_tilde = _try(t, "eps0_tilde", threshold_eps0_tilde, p, m, N, C_s, q, p0)
        fam = _try(t, "eps family", threshold_family_sobolev, p, m, N, r, C_s, q)
        if fam is not None:
            t.eps0, t.eps0_hat, t.eps_bar, t.eps = fam
    else:
        t.notes.append(f"p0 = {p0} <= 1: Sobolev-only thresholds need p > m + 2/N")
    if C_p > 0:
        t.eps1_tilde = _try(t, "eps1_tilde", threshold_eps1_tilde, q, m, p, N, C_p, C_s)
        t.eps1 = _try(t, "eps1", threshold_eps1, m, p, N, r, C_p, C_s)
        if t.eps1 is not None and t.eps1_tilde is not None:
            t.eps2 = min(t.eps1, t.eps1_tilde)
        if t.s is not None:
            t.Gamma_poincare = sup_bound_gamma(m, t.s, C_s)
    else:
        t.notes.append("C_p = 0: Poincare-case thresholds unavailable")
    return t


# -- identity checks -------------------------------------------------------------


def random_admissible_tuples(n, seed=0):
    """``n`` random ``(m, p, N, q)`` with ``p > m + 2/N`` and ``q in [p0, 100]``."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        N = int(rng.integers(3, 9))
        m = float(rng.uniform(1.0, 4.0))
        lo = m + 2.0 / N
        p = float(rng.uniform(lo, m + 3.0))
        if p <= lo:
            p = np.nextafter(lo, np.inf)
        p0 = (p - m) * N / 2
        q = float(rng.uniform(p0, 100.0))
        out.append((m, p, N, q))
    return out


def exponent_identity_residuals(tuples, exponents=sup_decay_exponents):
    """Largest deviations of the cross-formula identities over ``tuples``.

    For each ``(m, p, N, q)`` this compares the two forms of ``gamma_q`` and
    ``delta_q`` (at ``q0 = p0``), and for a matching ``r`` checks
    ``gamma = p gamma_{pr} = gamma_r + 1``, ``delta1 = p delta_{pr}`` and
    ``delta2 = delta_r`` using ``exponents`` for the left-hand sides.
    """
    worst = dict(gamma_q=0.0, delta_q=0.0, gamma_pr=0.0, gamma_r=0.0, delta1=0.0, delta2=0.0)
    for m, p, N, q in tuples:
        p0 = compute_p0(m, p, N)
        g47, d47 = exponents_smoothing(p0, q, N, m)
        g23, d23 = exponents_smoothing_p0(q, m, p, N)
        worst["gamma_q"] = max(worst["gamma_q"], abs(g47 - g23))
        worst["delta_q"] = max(worst["delta_q"], abs(d47 - d23))

        r = max(p0, N / 2) + 0.5 + (q % 7.0)
        gamma, delta1, delta2 = exponents(m, p, N, r)
        g_pr, d_pr = exponents_smoothing(p0, p * r, N, m)
        g_r, d_r = exponents_smoothing(p0, r, N, m)
        worst["gamma_pr"] = max(worst["gamma_pr"], abs(gamma - p * g_pr))
        worst["gamma_r"] = max(worst["gamma_r"], abs(gamma - (g_r + 1)))
        worst["delta1"] = max(worst["delta1"], abs(delta1 - p * d_pr))
        worst["delta2"] = max(worst["delta2"], abs(delta2 - d_r))
    return {k: float(v) for k, v in worst.items()}
