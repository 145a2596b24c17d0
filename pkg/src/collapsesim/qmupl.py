"""QMUPL dynamics: Gaussian-sector propagation, spread formulas and the grid SDE.

The one-particle equation is

    dpsi = [-(i/hbar) H dt + sqrt(lam) (q - <q>) dW - (lam/2) (q - <q>)^2 dt] psi

with ``lam = (m / m0) lambda0``. The drift coefficient of the collapse term is
``DRIFT_PER_DIFFUSION_SQ`` times the square of its diffusion coefficient; that
ratio is what keeps the norm a martingale.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core.constants import CONST, LAMBDA0_QMUPL, CollapseModelParams, ModelKind
from .core.errors import (DomainError, GeometryError, InvalidArgumentError,
                          NumericFailure, StepSizeError)
from .core.grid import (BOUNDARY_FRACTION, BOUNDARY_TOL, GaussianState, Grid, GridWavefunction,
                        boundary_leakage, normalizing_log_weight)
from .core.noise import NoisePath

DRIFT_PER_DIFFUSION_SQ = -0.5
# Bound on lam * var_q * dt, the size of the per-step norm change (its realized
# value also carries a factor |dW^2/dt - 1|).
DEFAULT_MAX_NORM_DRIFT = 0.02
SCHEMES = ("exponential", "euler")


def qmupl_lambda(mass: float, lambda0: float = LAMBDA0_QMUPL, m0: float = CONST.m_nucleon) -> float:
    """Collapse strength of a particle of mass ``mass`` (m^-2 s^-1)."""
    return mass / m0 * lambda0


def collapse_frequency(lambda0: float = LAMBDA0_QMUPL, m0: float = CONST.m_nucleon,
                       hbar: float = CONST.hbar) -> float:
    """omega = 2 sqrt(hbar lambda0 / m0); mass independent."""
    return 2.0 * math.sqrt(hbar * lambda0 / m0)


@dataclass(frozen=True)
class QmuplRunConfig:
    mass: float
    lam: float
    t_final: float
    dt: float
    hamiltonian: str = "free"
    omega_trap: float | None = None
    hbar: float = CONST.hbar

    def __post_init__(self):
        if not self.mass > 0:
            raise InvalidArgumentError("mass must be positive")
        if not self.lam >= 0:
            raise InvalidArgumentError("lambda must be non-negative")
        if not (self.t_final > 0 and self.dt > 0):
            raise InvalidArgumentError("t_final and dt must be positive")
        if self.dt > self.t_final / 100 * (1 + 1e-12):
            raise InvalidArgumentError("dt must be at most t_final / 100")
        if self.hamiltonian not in ("free", "harmonic"):
            raise InvalidArgumentError(f"unknown hamiltonian {self.hamiltonian!r}")
        if self.hamiltonian == "harmonic" and not (self.omega_trap and self.omega_trap > 0):
            raise InvalidArgumentError("harmonic hamiltonian needs a positive omega_trap")

    @classmethod
    def from_params(cls, params: CollapseModelParams, mass: float, t_final: float, dt: float,
                    **kw) -> "QmuplRunConfig":
        if params.model_kind is not ModelKind.QMUPL:
            raise InvalidArgumentError("QMUPL run needs QMUPL parameters")
        return cls(mass, qmupl_lambda(mass, params.lambda0, params.m0), t_final, dt, **kw)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    @property
    def omega_effective(self) -> float:
        """2 sqrt(hbar lam / m), the relaxation rate of the Gaussian width."""
        return 2.0 * math.sqrt(self.hbar * self.lam / self.mass)

    def scales(self, sigma0: float) -> dict:
        """Characteristic length/time of a run, for run metadata.

        Integration itself is carried out directly in SI units.
        """
        om = self.omega_effective
        return {
            "length_unit_m": sigma0,
            "time_unit_s": 1.0 / om if om > 0 else self.mass * sigma0**2 / self.hbar,
            "integration_units": "SI",
        }


def _check_noise(config: QmuplRunConfig, noise: NoisePath) -> None:
    if not math.isclose(noise.dt, config.dt, rel_tol=1e-12):
        raise InvalidArgumentError(f"noise dt {noise.dt} does not match config dt {config.dt}")
    if len(noise) < config.n_steps:
        raise InvalidArgumentError(f"noise path has {len(noise)} steps, run needs {config.n_steps}")


# --- Gaussian sector --------------------------------------------------------

def riccati_width(a0: complex, lam: float, mass: float, t, hbar: float = CONST.hbar):
    """Closed-form solution of da/dt = lam - (2 i hbar / m) a^2."""
    t = np.asarray(t, dtype=float)
    beta = 2j * hbar / mass
    if lam == 0:
        return a0 / (1.0 + beta * a0 * t)
    kappa = np.sqrt(lam * beta)  # principal root, Re > 0
    c = kappa / beta
    e = np.exp(-2.0 * kappa * t)
    th = (1.0 - e) / (1.0 + e)
    return c * (a0 + c * th) / (c + a0 * th)


@dataclass
class GaussianTrajectory:
    times: np.ndarray
    a: np.ndarray
    x_mean: np.ndarray
    k_mean: np.ndarray

    def __len__(self):
        return self.times.size

    @property
    def sigma_q(self) -> np.ndarray:
        return 0.5 / np.sqrt(self.a.real)

    def sigma_p(self, hbar: float = CONST.hbar) -> np.ndarray:
        return hbar * np.sqrt(np.abs(self.a) ** 2 / self.a.real)

    def state(self, i: int) -> GaussianState:
        a = self.a[i]
        return GaussianState(a.real, a.imag, float(self.x_mean[i]), float(self.k_mean[i]),
                             normalizing_log_weight(a.real))


def propagate_gaussian(config: QmuplRunConfig, init: GaussianState, noise: NoisePath) -> GaussianTrajectory:
    """Gaussian-sector solution of the free-particle QMUPL equation.

    ``a_t`` is noise independent and is advanced by the exact one-step flow. The centres are stepped with
    the noise coefficients averaged over each step (they depend on a_t only):

        dx = (hbar/m) k dt + sqrt(lam) / (2 a_re) dW
        dk = -sqrt(lam) a_im / a_re dW
    """
    if config.hamiltonian != "free":
        raise InvalidArgumentError("closed-form Gaussian sector only covers the free particle")
    _check_noise(config, noise)
    n = config.n_steps
    times = config.dt * np.arange(n + 1)
    a = np.empty(n + 1, dtype=complex)
    a[0] = init.a
    for j in range(n):
        # one-step exact flow of the Riccati equation
        a[j + 1] = riccati_width(a[j], config.lam, config.mass, config.dt, config.hbar)
        if not np.isfinite(a[j + 1]) or a[j + 1].real <= 0:
            raise NumericFailure(f"Gaussian width parameter lost positivity at step {j + 1}")
    dW = noise.increments[:n]
    sl = math.sqrt(config.lam)
    x_mean = np.empty(n + 1)
    k_mean = np.empty(n + 1)
    x_mean[0], k_mean[0] = init.x_mean, init.k_mean
    hm = config.hbar / config.mass
    # a_t is deterministic, so the step-averaged coefficient is the best use of dW
    kick_x = 0.5 * (sl / (2.0 * a.real[:-1]) + sl / (2.0 * a.real[1:]))
    kick_k = -0.5 * (sl * a.imag[:-1] / a.real[:-1] + sl * a.imag[1:] / a.real[1:])
    for j in range(n):
        x_mean[j + 1] = x_mean[j] + hm * k_mean[j] * config.dt + kick_x[j] * dW[j]
        k_mean[j + 1] = k_mean[j] + kick_k[j] * dW[j]
    return GaussianTrajectory(times, a, x_mean, k_mean)


def spread_evolution(mass: float, phi1: float, phi2: float, t, *, lambda0: float = LAMBDA0_QMUPL,
                     m0: float = CONST.m_nucleon, hbar: float = CONST.hbar):
    """Position and momentum spreads from the cosh/cos ratio formulas.

    ``phi1`` and ``phi2`` encode the initial condition. Returns
    ``(sigma_q [m], sigma_p [kg m/s])``; arrays if ``t`` is an array.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("t must be non-negative")
    om = collapse_frequency(lambda0, m0, hbar)
    u = om * t + phi1
    v = om * t + phi2
    with np.errstate(over="ignore", invalid="ignore"):
        big = u > 30.0
        # Multiply through by 2 exp(-u) where cosh/sinh would overflow.
        eu = np.exp(-np.where(big, u, 0.0))
        num_q = np.where(big, 1.0 + 2.0 * eu * np.cos(v) + eu**2, np.cosh(u) + np.cos(v))
        num_p = np.where(big, 1.0 - 2.0 * eu * np.cos(v) + eu**2, np.cosh(u) - np.cos(v))
        den = np.where(big, 1.0 - eu**2 + 2.0 * eu * np.sin(v), np.sinh(u) + np.sin(v))
    if np.any(den <= 0):
        raise DomainError("sinh(wt + phi1) + sin(wt + phi2) must be positive")
    sq = np.sqrt(hbar / (mass * om) * num_q / den)
    sp = np.sqrt(hbar * mass * om / 2.0 * num_p / den)
    if sq.ndim == 0:
        return float(sq), float(sp)
    return sq, sp


def asymptotic_spreads(mass: float, lambda0: float = LAMBDA0_QMUPL, m0: float = CONST.m_nucleon,
                       hbar: float = CONST.hbar) -> tuple[float, float]:
    """Limiting spreads sqrt(hbar/m omega) and sqrt(hbar m omega / 2)."""
    if not (mass > 0 and lambda0 > 0 and m0 > 0):
        raise InvalidArgumentError("mass, lambda0 and m0 must be positive")
    om = collapse_frequency(lambda0, m0, hbar)
    return math.sqrt(hbar / (mass * om)), math.sqrt(hbar * mass * om / 2.0)


def master_equation_decay(rho0_offdiag, x, y, lam: float, n_particles: int, t):
    """rho_t(x, y) = rho_0(x, y) exp(-lam N (x - y)^2 t / 2), free evolution neglected."""
    if n_particles < 1:
        raise InvalidArgumentError("n_particles must be >= 1")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise InvalidArgumentError("t must be non-negative")
    return rho0_offdiag * np.exp(-lam * n_particles * (np.asarray(x) - np.asarray(y)) ** 2 * t / 2.0)


# --- grid SDE ---------------------------------------------------------------

@dataclass
class GridTrajectory:
    """Per-step observables of one grid trajectory, plus sampled states."""

    times: np.ndarray
    q_mean: np.ndarray
    q_var: np.ndarray
    norm_corrections: np.ndarray
    states: list = field(default_factory=list)
    state_times: list = field(default_factory=list)
    final: GridWavefunction | None = None

    @property
    def sigma_q(self) -> np.ndarray:
        return np.sqrt(self.q_var)


class _GridStepper:
    """Vectorised (batch, n) split-step integrator shared by single runs and ensembles."""

    def __init__(self, config: QmuplRunConfig, grid: Grid, max_norm_drift: float, scheme: str):
        if scheme not in SCHEMES:
            raise InvalidArgumentError(f"scheme must be one of {SCHEMES}")
        self.scheme = scheme
        self.config = config
        self.grid = grid
        self.x = grid.x
        self.dx = grid.dx
        self.max_norm_drift = max_norm_drift
        dt, m, hbar = config.dt, config.mass, config.hbar
        self.kinetic = np.exp(-0.5j * hbar * grid.k**2 * dt / m)
        if config.hamiltonian == "harmonic":
            v = 0.5 * m * config.omega_trap**2 * self.x**2
            self.half_potential = np.exp(-0.5j * v * dt / hbar)
        else:
            self.half_potential = None
        self.sqrt_lam = math.sqrt(config.lam)
        self.diffusion_drift = DRIFT_PER_DIFFUSION_SQ * config.lam

    def moments(self, psi: np.ndarray):
        rho = np.abs(psi) ** 2
        w = rho.sum(axis=-1) * self.dx
        mean = (rho * self.x).sum(axis=-1) * self.dx / w
        var = (rho * (self.x - mean[..., None]) ** 2).sum(axis=-1) * self.dx / w
        return mean, var

    def step(self, psi: np.ndarray, dW: np.ndarray, q_mean: np.ndarray, q_var: np.ndarray):
        """One Lie-split step: collapse (Euler-Maruyama, explicit <q>), renormalize, then unitary."""
        dt = self.config.dt
        if self.sqrt_lam > 0:
            scale = self.config.lam * float(np.max(q_var)) * dt
            if scale > self.max_norm_drift:
                raise StepSizeError(
                    f"collapse drift scale lam * var_q * dt = {scale:.3g} exceeds "
                    f"{self.max_norm_drift:.3g}; reduce dt"
                )
            Q = self.x - q_mean[..., None]
            lin = self.sqrt_lam * Q * dW[..., None]
            if self.scheme == "euler":
                psi = psi * (1.0 + lin + self.diffusion_drift * Q**2 * dt)
            else:
                # exp(X) with dX = diffusion dW + (drift - lam/2) dt reproduces the Ito increment
                psi = psi * np.exp(lin + (self.diffusion_drift - 0.5 * self.config.lam) * Q**2 * dt)
        n2 = (np.abs(psi) ** 2).sum(axis=-1) * self.dx
        if not np.all(np.isfinite(n2)) or np.any(n2 <= 0):
            raise StepSizeError("norm became non-finite during the collapse step; reduce dt")
        psi = psi / np.sqrt(n2)[..., None]
        if self.half_potential is not None:
            psi = psi * self.half_potential
        psi = np.fft.ifft(np.fft.fft(psi, axis=-1) * self.kinetic, axis=-1)
        if self.half_potential is not None:
            psi = psi * self.half_potential
        return psi, n2 - 1.0

    def check_boundary(self, psi: np.ndarray, t: float) -> None:
        leak = boundary_leakage(np.abs(psi) ** 2, self.dx)
        if np.any(leak > BOUNDARY_TOL):
            raise GeometryError(
                f"at t={t:.4g} s, {float(np.max(leak)):.3g} of the probability reached the outer "
                f"{BOUNDARY_FRACTION:.0%} of the grid; enlarge the grid"
            )


def integrate_grid_sde(config: QmuplRunConfig, psi0: GridWavefunction, noise: NoisePath, *,
                       save_every: int | None = None,
                       max_norm_drift: float = DEFAULT_MAX_NORM_DRIFT,
                       scheme: str = "exponential") -> GridTrajectory:
    """Integrate the QMUPL equation for one trajectory on a grid.

    The collapse factor uses <q> taken at step start. ``scheme="euler"`` applies
    the Euler-Maruyama multiplier 1 + sqrt(lam) Q dW - (lam/2) Q^2 dt;
    ``"exponential"`` applies exp(sqrt(lam) Q dW - lam Q^2 dt), which has the same
    Ito increment but solves the collapse part exactly for frozen <q> (Gaussians
    stay Gaussian, so the width carries no dW^2 noise). Then exact
    spectral propagation for the kinetic term (Strang half-steps for a harmonic
    trap), renormalization after every step. The applied correction
    ``norm^2 - 1`` is recorded per step.
    """
    psi0.require_normalized(1e-8)
    _check_noise(config, noise)
    stepper = _GridStepper(config, psi0.grid, max_norm_drift, scheme)
    n = config.n_steps
    times = config.dt * np.arange(n + 1)
    qm = np.empty(n + 1)
    qv = np.empty(n + 1)
    corr = np.empty(n)
    psi = psi0.amplitudes[None, :].copy()
    traj = GridTrajectory(times, qm, qv, corr)
    stepper.check_boundary(psi, 0.0)
    mean, var = stepper.moments(psi)
    qm[0], qv[0] = mean[0], var[0]
    if save_every:
        traj.states.append(GridWavefunction(psi0.grid, psi[0].copy()))
        traj.state_times.append(0.0)
    dW = noise.increments
    for j in range(n):
        psi, c = stepper.step(psi, dW[j:j + 1], mean, var)
        corr[j] = c[0]
        stepper.check_boundary(psi, times[j + 1])
        mean, var = stepper.moments(psi)
        qm[j + 1], qv[j + 1] = mean[0], var[0]
        if save_every and (j + 1) % save_every == 0:
            traj.states.append(GridWavefunction(psi0.grid, psi[0].copy()))
            traj.state_times.append(times[j + 1])
    traj.final = GridWavefunction(psi0.grid, psi[0].copy())
    return traj


def integrate_grid_sde_batch(config: QmuplRunConfig, psi0: GridWavefunction, noises: list[NoisePath], *,
                             max_norm_drift: float = DEFAULT_MAX_NORM_DRIFT,
                             scheme: str = "exponential"):
    """Run one trajectory per noise path from a common initial state.

    Returns ``(final_amplitudes[batch, n], q_mean[batch, steps+1], q_var[batch, steps+1])``.
    """
    psi0.require_normalized(1e-8)
    for nz in noises:
        _check_noise(config, nz)
    stepper = _GridStepper(config, psi0.grid, max_norm_drift, scheme)
    n = config.n_steps
    b = len(noises)
    dW = np.stack([nz.increments[:n] for nz in noises])
    psi = np.repeat(psi0.amplitudes[None, :], b, axis=0)
    qm = np.empty((b, n + 1))
    qv = np.empty((b, n + 1))
    mean, var = stepper.moments(psi)
    qm[:, 0], qv[:, 0] = mean, var
    for j in range(n):
        psi, _ = stepper.step(psi, dW[:, j], mean, var)
        stepper.check_boundary(psi, config.dt * (j + 1))
        mean, var = stepper.moments(psi)
        qm[:, j + 1], qv[:, j + 1] = mean, var
    return psi, qm, qv
