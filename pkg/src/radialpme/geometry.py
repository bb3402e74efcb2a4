"""Rotationally symmetric model manifolds and their radial grids.

A model manifold carries the metric ``dr^2 + f(r)^2 dtheta^2``; the radial
Laplace-Beltrami operator is ``u'' + (N-1) (f'/f) u'``. Three kinds are
supported: Euclidean space (``f(r) = r``), hyperbolic space of curvature
``-c`` (``f(r) = sinh(sqrt(c) r) / sqrt(c)``) and Euclidean space with the
density ``rho(r) = (1 + r)^(-a)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

KINDS = ("euclidean", "hyperbolic", "weighted_euclidean")

# Gauss-Legendre points per cell used for the cell measures
_QUAD_POINTS = 5


class GeometryError(ValueError):
    """Raised for invalid manifold or grid parameters."""


def unit_sphere_area(N: int) -> float:
    """Surface area of the unit sphere S^{N-1} in R^N."""
    return 2.0 * math.pi ** (N / 2) / math.gamma(N / 2)


def euclidean_sobolev_constant(N: int) -> float:
    """Sobolev constant ``C_s`` of R^N, with ``||v||_{2*} <= ||grad v||_2 / C_s``.

    Uses the sharp Aubin-Talenti constant

        S_N = (pi N (N-2))^{-1/2} (Gamma(N) / Gamma(N/2))^{1/N},

    and returns ``C_s = 1 / S_N``.
    """
    if N < 3:
        raise GeometryError(f"Sobolev constant needs N >= 3, got N={N}")
    S = (math.pi * N * (N - 2)) ** -0.5 * (math.gamma(N) / math.gamma(N / 2)) ** (1.0 / N)
    return 1.0 / S


def hyperbolic_poincare_constant(N: int, curvature: float = 1.0) -> float:
    """``C_p`` of hyperbolic space: ``C_p^2`` is the bottom of the spectrum ``c (N-1)^2 / 4``."""
    return math.sqrt(curvature) * (N - 1) / 2.0


def hardy_poincare_constant(N: int, decay: float) -> float:
    """Weighted Poincare constant for ``rho = (1+r)^(-a)``, ``a >= 2``.

    Since ``rho <= |x|^{-2}``, Hardy's inequality gives
    ``||v||_{L^2_rho} <= 2/(N-2) ||grad v||_2``. Returns 0 for ``a < 2``,
    where no Poincare inequality is claimed.
    """
    if decay < 2:
        return 0.0
    return (N - 2) / 2.0


@dataclass(frozen=True)
class ModelManifold:
    """A rotationally symmetric model manifold with its functional constants.

    ``poincare_constant == 0`` encodes "no Poincare inequality". When the
    constants are left as ``None`` the documented defaults are used:
    the sharp Euclidean Sobolev constant for every kind (hyperbolic space and
    bounded weights ``rho <= 1`` inherit it), the bottom of the spectrum for
    hyperbolic ``C_p`` and the Hardy bound for weights with ``a >= 2``.
    """

    kind: str = "euclidean"
    dimension: int = 3
    curvature: float = 1.0
    decay: float = 0.0
    sobolev_constant: float | None = None
    poincare_constant: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GeometryError(f"unknown manifold kind {self.kind!r}; expected one of {KINDS}")
        if int(self.dimension) != self.dimension or self.dimension < 3:
            raise GeometryError(f"dimension N must be an integer >= 3, got {self.dimension}")
        object.__setattr__(self, "dimension", int(self.dimension))
        if self.kind == "hyperbolic" and not self.curvature > 0:
            raise GeometryError(f"hyperbolic curvature c must be > 0, got {self.curvature}")
        if self.kind == "weighted_euclidean" and not self.decay >= 0:
            raise GeometryError(f"weight decay a must be >= 0, got {self.decay}")

        N = self.dimension
        if self.sobolev_constant is None:
            object.__setattr__(self, "sobolev_constant", euclidean_sobolev_constant(N))
        elif not self.sobolev_constant > 0:
            raise GeometryError(f"C_s must be positive, got {self.sobolev_constant}")

        if self.poincare_constant is None:
            if self.kind == "hyperbolic":
                cp = hyperbolic_poincare_constant(N, self.curvature)
            elif self.kind == "weighted_euclidean":
                cp = hardy_poincare_constant(N, self.decay)
            else:
                cp = 0.0
            object.__setattr__(self, "poincare_constant", cp)
        elif self.poincare_constant < 0:
            raise GeometryError(f"C_p must be >= 0, got {self.poincare_constant}")
        elif self.kind == "euclidean" and self.poincare_constant != 0:
            raise GeometryError("the Poincare inequality fails on R^N: euclidean manifolds need C_p = 0")

    @property
    def weighted(self) -> bool:
        return self.kind == "weighted_euclidean"

    @property
    def has_poincare(self) -> bool:
        return self.poincare_constant > 0

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "N": self.dimension,
            "c": self.curvature,
            "a": self.decay,
            "C_s": self.sobolev_constant,
            "C_p": self.poincare_constant,
        }


def _warp(manifold: ModelManifold, r):
    if manifold.kind == "hyperbolic":
        sc = math.sqrt(manifold.curvature)
        return np.sinh(sc * r) / sc
    return r


def _weight(manifold: ModelManifold, r):
    if manifold.kind == "weighted_euclidean":
        return (1.0 + r) ** (-manifold.decay)
    return np.ones_like(r)


def warp_coefficients(manifold: ModelManifold, r: float) -> tuple[float, float]:
    """Return ``(f(r), f'(r)/f(r))`` for the warping function of ``manifold``."""
    if not r > 0:
        raise GeometryError(f"warp_coefficients needs r > 0, got {r}")
    if manifold.kind == "hyperbolic":
        sc = math.sqrt(manifold.curvature)
        return math.sinh(sc * r) / sc, sc / math.tanh(sc * r)
    return float(r), 1.0 / r


def weight_value(manifold: ModelManifold, r: float) -> float:
    """Density ``rho(r)``: 1 for unweighted kinds, ``(1+r)^(-a)`` otherwise."""
    if manifold.kind == "weighted_euclidean":
        return (1.0 + r) ** (-manifold.decay)
    return 1.0


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Uniform cell-centred grid on the geodesic ball ``B_R``.

    ``measures`` are the rho-weighted cell measures and ``volumes`` the plain
    Riemannian ones; both are exact cell integrals of the density (computed
    by Gauss-Legendre quadrature), so ``volumes.sum()`` is the volume of B_R
    up to rounding. ``face_areas[j]`` is the area of the sphere of radius
    ``j * dr``.
    """

    manifold: ModelManifold
    outer_radius: float
    cell_count: int
    dr: float
    centers: np.ndarray = field(repr=False)
    faces: np.ndarray = field(repr=False)
    face_areas: np.ndarray = field(repr=False)
    volumes: np.ndarray = field(repr=False)
    measures: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def cell_measures(self, weighted: bool = True) -> np.ndarray:
        return self.measures if weighted else self.volumes


def build_grid(manifold: ModelManifold, R: float, cells: int) -> RadialGrid:
    """Build the uniform radial grid with ``cells`` cells on ``[0, R]``."""
    if not R > 0:
        raise GeometryError(f"outer radius R must be positive, got {R}")
    if int(cells) != cells or cells < 2:
        raise GeometryError(f"cell count must be an integer >= 2, got {cells}")
    cells = int(cells)
    N = manifold.dimension
    dr = R / cells
    omega = unit_sphere_area(N)

    centers = (np.arange(cells) + 0.5) * dr
    faces = np.arange(cells + 1) * dr
    face_areas = omega * _warp(manifold, faces) ** (N - 1)

    x, wq = np.polynomial.legendre.leggauss(_QUAD_POINTS)
    # quadrature nodes, shape (cells, points)
    nodes = centers[:, None] + 0.5 * dr * x[None, :]
    jac = omega * _warp(manifold, nodes) ** (N - 1) * (0.5 * dr) * wq[None, :]
    volumes = jac.sum(axis=1)
    measures = (jac * _weight(manifold, nodes)).sum(axis=1)
    weights = _weight(manifold, centers)

    for arr in (centers, faces, face_areas, volumes, measures, weights):
        arr.setflags(write=False)
    return RadialGrid(manifold, float(R), cells, dr, centers, faces, face_areas, volumes, measures, weights)


def ball_volume(manifold: ModelManifold, R: float) -> float:
    """Riemannian volume of B_R (unweighted), by adaptive quadrature."""
    from scipy.integrate import quad

    N = manifold.dimension
    val, _ = quad(lambda s: float(_warp(manifold, np.float64(s))) ** (N - 1), 0.0, R, epsabs=0, epsrel=1e-13, limit=200)
    return unit_sphere_area(N) * val
