"""Uniform 1D grids, grid wavefunctions and Gaussian-sector states."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import CONST
from .errors import ContractError, GeometryError, InvalidArgumentError

NORM_TOL = 1e-9
# Hard-wall guard: probability allowed in the outer BOUNDARY_FRACTION of the grid.
BOUNDARY_FRACTION = 0.05
BOUNDARY_TOL = 1e-6


@dataclass(frozen=True)
class Grid:
    x_min: float
    dx: float
    n: int

    def __post_init__(self):
        if self.n < 8:
            raise GeometryError(f"grid needs at least 8 points, got {self.n}")
        if not self.dx > 0:
            raise GeometryError(f"dx must be positive, got {self.dx}")

    @classmethod
    def centered(cls, half_width: float, n: int, center: float = 0.0) -> "Grid":
        """``n`` points spanning ``[center - half_width, center + half_width)``."""
        dx = 2.0 * half_width / n
        return cls(center - half_width, dx, n)

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n)

    @property
    def x_max(self) -> float:
        return self.x_min + self.dx * (self.n - 1)

    @property
    def length(self) -> float:
        return self.dx * self.n

    @property
    def k(self) -> np.ndarray:
        """Angular wavenumbers in FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)


class GridWavefunction:
    """Complex amplitudes (m^-1/2) on a uniform grid.

    Mutable on purpose: integrators update ``amplitudes`` in place, and each
    instance is owned by a single trajectory.
    """

    def __init__(self, grid: Grid, amplitudes):
        amps = np.asarray(amplitudes, dtype=complex)
        if amps.shape != (grid.n,):
            raise GeometryError(f"expected {grid.n} amplitudes, got shape {amps.shape}")
        self.grid = grid
        self.amplitudes = amps

    @property
    def x_min(self) -> float:
        return self.grid.x_min

    @property
    def dx(self) -> float:
        return self.grid.dx

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def density(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm2(self) -> float:
        return float(np.sum(self.density()) * self.dx)

    def normalized(self) -> "GridWavefunction":
        n2 = self.norm2()
        if not n2 > 0:
            raise ContractError("cannot normalize a zero wavefunction")
        return GridWavefunction(self.grid, self.amplitudes / math.sqrt(n2))

    def copy(self) -> "GridWavefunction":
        return GridWavefunction(self.grid, self.amplitudes.copy())

    def require_normalized(self, tol: float = NORM_TOL) -> None:
        n2 = self.norm2()
        if abs(n2 - 1.0) > tol:
            raise ContractError(f"wavefunction not normalized: norm^2 = {n2!r}")


def overlap(a: GridWavefunction, b: GridWavefunction) -> float:
    """|<a|b>| for two states on the same grid."""
    if a.grid != b.grid:
        raise GeometryError("states live on different grids")
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)) * a.dx)


def boundary_leakage(density: np.ndarray, dx: float, fraction: float = BOUNDARY_FRACTION) -> np.ndarray:
    """Probability in the outer ``fraction`` of the grid (both ends); works on batches."""
    n = density.shape[-1]
    m = max(1, int(math.ceil(fraction * n)))
    return (density[..., :m].sum(axis=-1) + density[..., -m:].sum(axis=-1)) * dx


def check_boundary(psi: GridWavefunction, tol: float = BOUNDARY_TOL) -> None:
    leak = float(boundary_leakage(psi.density(), psi.dx))
    if leak > tol:
        raise GeometryError(
            f"{leak:.3g} of the probability sits in the outer {BOUNDARY_FRACTION:.0%} of the grid "
            f"[{psi.grid.x_min:.4g}, {psi.grid.x_max:.4g}] m; enlarge the grid"
        )


def make_gaussian_grid_state(grid: Grid, x_mean: float, k_mean: float, sigma: float) -> GridWavefunction:
    """Normalized real-width Gaussian with position spread ``sigma`` and mean wavenumber ``k_mean``."""
    if not sigma > 0:
        raise GeometryError(f"sigma must be positive, got {sigma}")
    if sigma <= 2.0 * grid.dx:
        raise GeometryError(f"sigma={sigma:.3g} m is not resolvable with dx={grid.dx:.3g} m")
    if x_mean - 4.0 * sigma < grid.x_min or x_mean + 4.0 * sigma > grid.x_max:
        raise GeometryError("wave packet within 4 sigma of the grid boundary")
    x = grid.x
    psi = np.exp(-((x - x_mean) ** 2) / (4.0 * sigma**2) + 1j * k_mean * x)
    return GridWavefunction(grid, psi).normalized()


def expectation_and_variance(psi: GridWavefunction, observable: str = "position",
                             hbar: float = CONST.hbar) -> tuple[float, float]:
    """Mean and variance of position (m, m^2) or momentum (kg m/s, (kg m/s)^2).

    Position moments use trapezoid quadrature on the grid (the hard-wall
    boundary makes it coincide with a plain Riemann sum). Momentum moments are
    evaluated spectrally from the discrete Fourier transform.
    """
    psi.require_normalized(1e-8)
    if observable == "position":
        x = psi.x
        rho = psi.density()
        mean = float(np.trapezoid(x * rho, dx=psi.dx))
        var = float(np.trapezoid((x - mean) ** 2 * rho, dx=psi.dx))
        return mean, var
    if observable == "momentum":
        k = psi.grid.k
        w = np.abs(np.fft.fft(psi.amplitudes)) ** 2
        w /= w.sum()
        mean_k = float(np.sum(k * w))
        var_k = float(np.sum((k - mean_k) ** 2 * w))
        return hbar * mean_k, hbar**2 * var_k
    raise InvalidArgumentError(f"unknown observable {observable!r}")


def excess_kurtosis(psi: GridWavefunction) -> float:
    x = psi.x
    rho = psi.density() / (psi.density().sum())
    mean = np.sum(x * rho)
    var = np.sum((x - mean) ** 2 * rho)
    return float(np.sum((x - mean) ** 4 * rho) / var**2 - 3.0)


@dataclass(frozen=True)
class GaussianState:
    """Parameters of psi(x) = exp[-a (x - x_mean)^2 + i k_mean x + log_weight]."""

    a_re: float
    a_im: float
    x_mean: float
    k_mean: float
    log_weight: float = 0.0

    def __post_init__(self):
        if not self.a_re > 0:
            raise ContractError(f"a_re must be positive for a normalizable state, got {self.a_re}")

    @classmethod
    def from_sigma(cls, sigma: float, x_mean: float = 0.0, k_mean: float = 0.0,
                   a_im: float = 0.0) -> "GaussianState":
        a_re = 1.0 / (4.0 * sigma**2)
        return cls(a_re, a_im, x_mean, k_mean, normalizing_log_weight(a_re))

    @property
    def a(self) -> complex:
        return complex(self.a_re, self.a_im)

    @property
    def sigma_q(self) -> float:
        return 0.5 / math.sqrt(self.a_re)

    def sigma_p(self, hbar: float = CONST.hbar) -> float:
        return hbar * math.sqrt((self.a_re**2 + self.a_im**2) / self.a_re)

    def on_grid(self, grid: Grid) -> GridWavefunction:
        x = grid.x
        psi = np.exp(-self.a * (x - self.x_mean) ** 2 + 1j * self.k_mean * x)
        return GridWavefunction(grid, psi).normalized()


def normalizing_log_weight(a_re: float) -> float:
    """Real gamma_t making the Gaussian unit-normalized: exp(2 gamma) sqrt(pi / 2 a_re) = 1."""
    return -0.25 * math.log(math.pi / (2.0 * a_re))
