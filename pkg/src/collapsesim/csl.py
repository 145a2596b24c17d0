"""CSL decay rates: single particle, many-particle sums, clusters and rigid bodies."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .core.constants import CONST, GAMMA_CSL, R_C
from .core.errors import InvalidArgumentError

# The small-distance expansion is used only when every displacement is below r_c / 10.
SMALL_DISTANCE_LIMIT = 0.1


class OutOfRegimeWarning(RuntimeWarning):
    """An approximate formula was evaluated outside its stated validity regime."""


def lambda_from_gamma(gamma: float, r_c: float = R_C) -> float:
    return gamma / (4.0 * math.pi * r_c**2) ** 1.5


@dataclass(frozen=True)
class CslParams:
    gamma_csl: float = GAMMA_CSL
    r_c: float = R_C

    def __post_init__(self):
        if not (self.gamma_csl >= 0 and self.r_c > 0):
            raise InvalidArgumentError("gamma_csl must be >= 0 and r_c > 0")

    @classmethod
    def from_lambda(cls, lambda_csl: float, r_c: float = R_C) -> "CslParams":
        return cls(lambda_csl * (4.0 * math.pi * r_c**2) ** 1.5, r_c)

    @property
    def lambda_csl(self) -> float:
        return lambda_from_gamma(self.gamma_csl, self.r_c)


@dataclass(frozen=True)
class RigidBody:
    """Homogeneous body: a sphere of ``radius`` or a slab of ``thickness`` and face ``area``.

    Slabs are displaced along their normal.
    """

    density: float
    shape: str = "sphere"
    radius: float | None = None
    thickness: float | None = None
    area: float | None = None

    def __post_init__(self):
        if not self.density > 0:
            raise InvalidArgumentError("density must be positive")
        if self.shape == "sphere":
            if not (self.radius and self.radius > 0):
                raise InvalidArgumentError("sphere needs a positive radius")
        elif self.shape == "slab":
            if not (self.thickness and self.thickness > 0 and self.area and self.area > 0):
                raise InvalidArgumentError("slab needs positive thickness and area")
        else:
            raise InvalidArgumentError(f"unknown shape {self.shape!r}")

    @property
    def volume(self) -> float:
        if self.shape == "sphere":
            return 4.0 / 3.0 * math.pi * self.radius**3
        return self.thickness * self.area

    @property
    def nucleon_density(self) -> float:
        return self.density / CONST.m_nucleon

    @property
    def nucleon_count(self) -> float:
        return self.nucleon_density * self.volume

    @property
    def mass(self) -> float:
        return self.density * self.volume

    def overlap_volume(self, displacement: float) -> float:
        d = abs(displacement)
        if self.shape == "sphere":
            R = self.radius
            if d >= 2.0 * R:
                return 0.0
            return math.pi * (4.0 * R + d) * (2.0 * R - d) ** 2 / 12.0
        return self.area * max(self.thickness - d, 0.0)

    def n_out(self, displacement: float) -> float:
        """Nucleons of the displaced copy lying outside the original volume."""
        return self.nucleon_density * (self.volume - self.overlap_volume(displacement))


def decay_function(x, lam: float, r_c: float = R_C):
    """lam [1 - exp(-x^2 / 4 r_c^2)] for separation(s) x."""
    x = np.asarray(x, dtype=float)
    g = lam * -np.expm1(-(x**2) / (4.0 * r_c**2))
    return float(g) if g.ndim == 0 else g


def _points(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2 or a.shape[1] not in (1, 2, 3):
        raise InvalidArgumentError("positions must be a list of scalars or of 1-3 component points")
    return a


def many_particle_gamma(x_primed, x_doubleprimed, gamma: float, r_c: float = R_C) -> float:
    """(gamma/2) sum_ij [G(x'_i - x'_j) + G(x''_i - x''_j) - 2 G(x'_i - x''_j)].

    G(x) = exp(-x^2 / 4 r_c^2) / (4 pi r_c^2)^(3/2). Points may be scalars
    (treated as positions along one axis) or 3D vectors.
    """
    a, b = _points(x_primed), _points(x_doubleprimed)
    if a.shape != b.shape:
        raise InvalidArgumentError("configurations must have the same number of particles and dimension")
    norm = (4.0 * math.pi * r_c**2) ** -1.5
    s = 1.0 / (4.0 * r_c**2)

    def gsum(p, q):
        return np.exp(-cdist(p, q, "sqeuclidean") * s).sum()

    total = gsum(a, a) + gsum(b, b) - 2.0 * gsum(a, b)
    # the quadratic form is non-negative; clip round-off
    return max(0.0, 0.5 * gamma * norm * float(total))


def cluster_rate(n_per_cluster: int, n_clusters: int, lam: float) -> float:
    """lam n^2 N for N clusters of n particles each."""
    for v, name in ((n_per_cluster, "n_per_cluster"), (n_clusters, "n_clusters")):
        if int(v) != v or v < 1:
            raise InvalidArgumentError(f"{name} must be a positive integer")
    return lam * float(n_per_cluster) ** 2 * float(n_clusters)


def small_distance_gamma(displacements, lam: float, r_c: float = R_C) -> float:
    """(lam / 4 r_c^2) |sum_i (x'_i - x''_i)|^2; warns outside |d_i| <= r_c / 10."""
    d = _points(displacements)
    if np.any(np.linalg.norm(d, axis=1) > SMALL_DISTANCE_LIMIT * r_c):
        warnings.warn("small-distance formula used with displacements above r_c/10", OutOfRegimeWarning,
                      stacklevel=2)
    total = d.sum(axis=0)
    return lam / (4.0 * r_c**2) * float(total @ total)


def rigid_body_gamma(body: RigidBody, displacement: float, gamma: float = GAMMA_CSL) -> float:
    """gamma D n_OUT for a homogeneous body (valid when its size is much larger than r_c)."""
    if displacement < 0:
        raise InvalidArgumentError("displacement must be non-negative")
    return gamma * body.nucleon_density * body.n_out(displacement)


def amplified_rate(total_mass: float, lambda0: float, m0: float = CONST.m_nucleon) -> float:
    """Centre-of-mass collapse strength (M / m0) lambda0."""
    if not (total_mass > 0 and lambda0 > 0 and m0 > 0):
        raise InvalidArgumentError("total_mass, lambda0 and m0 must be positive")
    return total_mass / m0 * lambda0
