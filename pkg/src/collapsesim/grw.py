"""GRW spontaneous localization: jump operator, jump statistics and trajectories."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .core.constants import CONST, LAMBDA_GRW, R_C
from .core.ensemble import DEFAULT_BATCH, map_batches
from .core.errors import DegenerateJumpError, GeometryError, InvalidArgumentError
from .core.grid import BOUNDARY_TOL, GridWavefunction, boundary_leakage
from .core.noise import stream_generator

# smallest ||L psi||^2 accepted before a jump counts as degenerate
DEGENERATE_NORM2 = 1e-280
MAX_RESAMPLES = 100


@dataclass(frozen=True)
class GrwParams:
    lambda_grw: float = LAMBDA_GRW
    r_c: float = R_C
    n_particles: int = 1

    def __post_init__(self):
        if not self.lambda_grw >= 0:
            raise InvalidArgumentError("lambda_grw must be non-negative")
        if not self.r_c > 0:
            raise InvalidArgumentError("r_c must be positive")
        if int(self.n_particles) != self.n_particles or self.n_particles < 1:
            raise InvalidArgumentError("n_particles must be a positive integer")

    @property
    def total_rate(self) -> float:
        """Centre-of-mass jump rate n * lambda_grw."""
        return self.n_particles * self.lambda_grw


def localization_profile(x, center: float, r_c: float):
    """L(x) = (pi r_c^2)^(-1/4) exp(-(x - center)^2 / (2 r_c^2)); its square integrates to 1 over centres."""
    return (math.pi * r_c**2) ** -0.25 * np.exp(-((np.asarray(x) - center) ** 2) / (2.0 * r_c**2))


def localize(psi: GridWavefunction, x_center: float, r_c: float) -> GridWavefunction:
    """Apply the localization operator centred at ``x_center`` and renormalize."""
    psi.require_normalized(1e-8)
    if not r_c > 0:
        raise InvalidArgumentError("r_c must be positive")
    out = psi.amplitudes * localization_profile(psi.x, x_center, r_c)
    n2 = float(np.sum(np.abs(out) ** 2) * psi.dx)
    if not math.isfinite(n2) or n2 < DEGENERATE_NORM2:
        raise DegenerateJumpError(f"||L psi||^2 = {n2:.3g} for a jump at {x_center:.6g} m")
    return GridWavefunction(psi.grid, out / math.sqrt(n2))


def jump_position_density(psi: GridWavefunction, r_c: float) -> np.ndarray:
    """p(x) = ||L(x) psi||^2 on the grid points.

    Equals |psi|^2 convolved with a unit-mass Gaussian of variance r_c^2 / 2.
    Integrates to 1 up to probability leaking past the grid ends, provided
    r_c is resolved by the grid spacing.
    """
    psi.require_normalized(1e-8)
    if not r_c > 0:
        raise InvalidArgumentError("r_c must be positive")
    n = psi.grid.n
    offsets = psi.dx * np.arange(-(n - 1), n)
    kernel = np.exp(-(offsets**2) / r_c**2) / (math.sqrt(math.pi) * r_c)
    dens = fftconvolve(psi.density(), kernel, mode="full")[n - 1:2 * n - 1] * psi.dx
    return np.maximum(dens, 0.0)


def sample_jump_center(psi: GridWavefunction, r_c: float, rng: np.random.Generator) -> float:
    """Inverse-CDF draw over grid cells, uniform within the chosen cell."""
    p = jump_position_density(psi, r_c)
    cdf = np.cumsum(p)
    cdf /= cdf[-1]
    u, v = rng.random(2)
    i = int(np.searchsorted(cdf, u, side="right"))
    i = min(i, cdf.size - 1)
    return float(psi.x[i] + (v - 0.5) * psi.dx)


def free_propagate(psi: GridWavefunction, mass: float, t: float, hbar: float = CONST.hbar) -> GridWavefunction:
    """Exact spectral free evolution over time ``t`` (any length)."""
    if t == 0:
        return psi.copy()
    k = psi.grid.k
    amp = np.fft.ifft(np.fft.fft(psi.amplitudes) * np.exp(-0.5j * hbar * k**2 * t / mass))
    return GridWavefunction(psi.grid, amp)


def _check_boundary(psi: GridWavefunction, t: float) -> None:
    leak = float(boundary_leakage(psi.density(), psi.dx))
    if leak > BOUNDARY_TOL:
        raise GeometryError(f"at t={t:.4g} s, {leak:.3g} of the probability reached the grid edge region")


@dataclass
class GrwTrajectory:
    jump_times: np.ndarray
    jump_centers: np.ndarray
    final: GridWavefunction
    snapshot_times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    resampled: int = 0

    @property
    def n_jumps(self) -> int:
        return self.jump_times.size


def evolve_grw(psi0: GridWavefunction, params: GrwParams, mass: float, t_final: float, *,
               seed: int, stream: int = 0, dt: float | None = None,
               hamiltonian: str = "free", hbar: float = CONST.hbar) -> GrwTrajectory:
    """One GRW trajectory: exact free flow between jumps at exponential waiting times.

    Waiting times have rate ``params.total_rate``; jump centres are drawn from
    ``jump_position_density``. If ``dt`` is given, the state is also stored at
    multiples of ``dt``. Randomness comes from the Philox stream ``(seed, stream)``.
    """
    if hamiltonian != "free":
        raise InvalidArgumentError("only the free Hamiltonian is supported")
    if not (mass > 0 and t_final > 0):
        raise InvalidArgumentError("mass and t_final must be positive")
    if dt is not None and not 0 < dt <= t_final:
        raise InvalidArgumentError("dt must lie in (0, t_final]")
    psi0.require_normalized(1e-8)
    rng = stream_generator(seed, stream)
    rate = params.total_rate
    times, centers = [], []
    snap_t = list(dt * np.arange(1, int(math.floor(t_final / dt * (1 + 1e-12))) + 1)) if dt else []
    traj = GrwTrajectory(np.empty(0), np.empty(0), psi0)
    if dt:
        traj.snapshot_times.append(0.0)
        traj.snapshots.append(psi0.copy())
    psi, t = psi0.copy(), 0.0
    while True:
        wait = rng.exponential(1.0 / rate) if rate > 0 else math.inf
        t_next = t + wait
        # store snapshots that fall before the next jump
        while snap_t and snap_t[0] <= min(t_next, t_final):
            ts = snap_t.pop(0)
            s = free_propagate(psi, mass, ts - t, hbar)
            traj.snapshot_times.append(ts)
            traj.snapshots.append(s)
        if t_next > t_final:
            psi = free_propagate(psi, mass, t_final - t, hbar)
            _check_boundary(psi, t_final)
            break
        psi = free_propagate(psi, mass, wait, hbar)
        _check_boundary(psi, t_next)
        t = t_next
        for _ in range(MAX_RESAMPLES):
            x = sample_jump_center(psi, params.r_c, rng)
            try:
                psi = localize(psi, x, params.r_c)
                break
            except DegenerateJumpError:
                traj.resampled += 1
        else:
            raise DegenerateJumpError(f"{MAX_RESAMPLES} consecutive degenerate jump draws at t={t:.4g} s")
        times.append(t)
        centers.append(x)
    traj.jump_times = np.asarray(times)
    traj.jump_centers = np.asarray(centers)
    traj.final = psi
    return traj


@dataclass
class GrwEnsemble:
    final_amplitudes: np.ndarray  # (runs, n)
    jump_counts: np.ndarray
    resampled: int


def evolve_grw_ensemble(psi0: GridWavefunction, params: GrwParams, mass: float, t_final: float,
                        n_runs: int, seed: int, *, hbar: float = CONST.hbar,
                        batch: int = DEFAULT_BATCH, workers: int | None = None) -> GrwEnsemble:
    """Run i uses jump stream i; identical to ``evolve_grw(..., stream=i)``."""
    if n_runs < 1:
        raise InvalidArgumentError("n_runs must be >= 1")

    def run(r: range):
        out = [evolve_grw(psi0, params, mass, t_final, seed=seed, stream=i, hbar=hbar) for i in r]
        return (np.stack([o.final.amplitudes for o in out]), np.array([o.n_jumps for o in out]),
                sum(o.resampled for o in out))

    parts = map_batches(run, n_runs, batch=batch, workers=workers)
    return GrwEnsemble(np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]),
                       sum(p[2] for p in parts))


def offdiag_decay_rate(x, y, lambda_grw: float = LAMBDA_GRW, r_c: float = R_C):
    """lambda [1 - exp(-(x - y)^2 / (4 r_c^2))]."""
    d2 = (np.asarray(x, dtype=float) - np.asarray(y, dtype=float)) ** 2
    rate = lambda_grw * -np.expm1(-d2 / (4.0 * r_c**2))
    return float(rate) if np.ndim(rate) == 0 else rate


def energy_gain_rate(params: GrwParams, mass: float, hbar: float = CONST.hbar) -> float:
    """Mean kinetic-energy growth n lambda hbar^2 / (4 m r_c^2) of the centre of mass in 1D."""
    return params.total_rate * hbar**2 / (4.0 * mass * params.r_c**2)
