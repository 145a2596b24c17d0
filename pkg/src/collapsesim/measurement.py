"""Pointer measurement model, the tanh hitting diffusion and the generic A-collapse process."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .core.constants import CONST, LAMBDA0_QMUPL
from .core.ensemble import DEFAULT_BATCH, map_batches
from .core.errors import (InvalidArgumentError, OutOfValidityError, RunawayError, StepSizeError)
from .core.noise import GaussianStream, NoisePath, make_noise_path
from .qmupl import collapse_frequency, qmupl_lambda

DEFAULT_B = 35.0
MIN_B = 5.0
# stream offset for the second (imaginary) Wiener process of trajectory i
IMAG_STREAM_OFFSET = 1 << 32


class Outcome(enum.Enum):
    PLUS = "plus"
    MINUS = "minus"


@dataclass(frozen=True)
class MeasurementSetup:
    pointer_mass: float = 1e-3
    kappa_hbar: float = 1e-2
    t_interaction: float = 1.0
    c_plus: complex = math.sqrt(0.5)
    c_minus: complex = math.sqrt(0.5)
    b_threshold: float = DEFAULT_B

    def __post_init__(self):
        if not (self.pointer_mass > 0 and self.kappa_hbar > 0 and self.t_interaction > 0):
            raise InvalidArgumentError("pointer_mass, kappa_hbar and t_interaction must be positive")
        n = abs(self.c_plus) ** 2 + abs(self.c_minus) ** 2
        if abs(n - 1.0) > 1e-12:
            raise InvalidArgumentError(f"|c+|^2 + |c-|^2 = {n!r}, expected 1")
        if self.b_threshold < MIN_B:
            raise InvalidArgumentError(f"b_threshold must be >= {MIN_B}")

    @classmethod
    def from_plus_weight(cls, p_plus: float, **kw) -> "MeasurementSetup":
        if not 0 <= p_plus <= 1:
            raise InvalidArgumentError("p_plus must lie in [0, 1]")
        return cls(c_plus=math.sqrt(p_plus), c_minus=math.sqrt(1.0 - p_plus), **kw)

    @property
    def gamma0(self) -> float:
        """Initial log-ratio ln|c+/c-|; needs both amplitudes nonzero."""
        if self.c_plus == 0 or self.c_minus == 0:
            raise InvalidArgumentError("gamma0 needs c_plus and c_minus both nonzero")
        return math.log(abs(self.c_plus) / abs(self.c_minus))

    def clock(self, lambda0: float = LAMBDA0_QMUPL, m0: float = CONST.m_nucleon) -> "PointerClock":
        return PointerClock(qmupl_lambda(self.pointer_mass, lambda0, m0), self.kappa_hbar, self.t_interaction)


def pointer_separation(t, setup: MeasurementSetup, omega: float | None = None):
    """Distance X_t between the two pointer Gaussians (m). Deterministic, no noise involved."""
    om = collapse_frequency() if omega is None else omega
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise InvalidArgumentError("t must be non-negative")
    T = setup.t_interaction
    pref = 2.0 * setup.kappa_hbar / om
    h = 0.5 * om
    inside = pref * np.exp(-h * t) * np.sin(h * t)
    # exp(-h t) exp(h T) combined to avoid overflow at large t
    after = pref * (np.exp(-h * t) * np.sin(h * t) - np.exp(-h * (t - T)) * np.sin(h * (t - T)))
    x = np.where(t <= T, inside, after)
    return float(x) if x.ndim == 0 else x


@dataclass(frozen=True)
class PointerClock:
    """Cubic time change s = lam (hbar kappa)^2 t^3 / 3 between physical and collapse time."""

    lam: float
    kappa_hbar: float
    t_interaction: float = 1.0

    @property
    def rate(self) -> float:
        return self.lam * self.kappa_hbar**2 / 3.0

    def to_s(self, t):
        return time_change(t, self.lam, self.kappa_hbar, self.t_interaction)

    def to_t(self, s):
        return inverse_time_change(s, self.lam, self.kappa_hbar, self.t_interaction)


def time_change(t, lam: float, kappa_hbar: float, t_interaction: float = 1.0):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise InvalidArgumentError("t must be non-negative")
    if np.any(t > t_interaction):
        raise OutOfValidityError(f"cubic time change holds only for t <= T = {t_interaction} s")
    s = lam * kappa_hbar**2 * t**3 / 3.0
    return float(s) if s.ndim == 0 else s


def inverse_time_change(s, lam: float, kappa_hbar: float, t_interaction: float = 1.0):
    s = np.asarray(s, dtype=float)
    s_max = lam * kappa_hbar**2 * t_interaction**3 / 3.0
    if np.any(s < 0):
        raise InvalidArgumentError("s must be non-negative")
    if np.any(s > s_max):
        raise OutOfValidityError(f"s exceeds s(T) = {s_max:.3g}; cubic time change no longer valid")
    t = np.cbrt(3.0 * s / (lam * kappa_hbar**2))
    return float(t) if t.ndim == 0 else t


def collapse_probability(gamma0: float, b: float) -> tuple[float, float]:
    """Probability that the hitting diffusion reaches +b (resp. -b) first."""
    if not abs(gamma0) < b:
        raise InvalidArgumentError("need |gamma0| < b")
    tb = math.tanh(b)
    tg = math.tanh(gamma0)
    p_plus = (tb + tg) / (2.0 * tb)
    return p_plus, 1.0 - p_plus


def mean_hitting_time(gamma0: float, b: float) -> float:
    """E[S_COL] = b tanh b - gamma0 tanh gamma0 for dG = tanh G ds + dW on (-b, b)."""
    if not abs(gamma0) < b:
        raise InvalidArgumentError("need |gamma0| < b")
    return b * math.tanh(b) - gamma0 * math.tanh(gamma0)


@dataclass(frozen=True)
class HittingResult:
    outcome: Outcome
    s_col: float
    t_col: float


def _check_hitting_args(gamma0: float, b: float, ds: float) -> None:
    if not abs(gamma0) < b:
        raise InvalidArgumentError("need |gamma0| < b")
    if not 0 < ds <= 1e-2:
        raise InvalidArgumentError("ds must lie in (0, 1e-2]")


def _advance(g: np.ndarray, z: np.ndarray, b: float, ds: float):
    """Euler-Maruyama steps of a batch over a block of normals ``z[batch, k]``.

    Returns the state after the block, the fractional step index of the first
    crossing (linear interpolation, NaN if none) and the crossing side.
    """
    sq = math.sqrt(ds)
    n, k = z.shape
    hit_at = np.full(n, np.nan)
    side = np.zeros(n)
    alive = np.ones(n, dtype=bool)
    g = g.copy()
    for j in range(k):
        if not alive.any():
            break
        idx = np.flatnonzero(alive)
        prev = g[idx]
        new = prev + np.tanh(prev) * ds + sq * z[idx, j]
        g[idx] = new
        up = new >= b
        down = new <= -b
        crossed = up | down
        if crossed.any():
            ci = idx[crossed]
            edge = np.where(up[crossed], b, -b)
            frac = (edge - prev[crossed]) / (new[crossed] - prev[crossed])
            hit_at[ci] = j + frac
            side[ci] = np.sign(edge)
            alive[ci] = False
    return g, hit_at, side


def simulate_hitting(gamma0: float, b: float, ds: float, noise: NoisePath,
                     clock: PointerClock | None = None) -> HittingResult:
    """First passage of dG = tanh(G) ds + dW through +-b, Euler-Maruyama on the s-clock.

    ``noise`` supplies the increments (its dt must equal ``ds``) and bounds the
    step budget. The crossing point is linearly interpolated inside the step.
    ``t_col`` comes from the inverse cubic time change when ``clock`` is given
    and is NaN otherwise.
    """
    _check_hitting_args(gamma0, b, ds)
    if not math.isclose(noise.dt, ds, rel_tol=1e-12):
        raise InvalidArgumentError("noise dt must equal ds")
    z = (noise.increments / math.sqrt(ds))[None, :]
    _, hit_at, side = _advance(np.array([float(gamma0)]), z, b, ds)
    if np.isnan(hit_at[0]):
        raise RunawayError(f"no hit of +-{b} within {len(noise)} steps (s = {len(noise) * ds:.4g})")
    s_col = float(hit_at[0] * ds)
    t_col = float(clock.to_t(s_col)) if clock is not None else math.nan
    return HittingResult(Outcome.PLUS if side[0] > 0 else Outcome.MINUS, s_col, t_col)


@dataclass
class HittingEnsemble:
    outcomes: np.ndarray  # +1 / -1
    s_col: np.ndarray
    t_col: np.ndarray

    def __len__(self):
        return self.s_col.size

    @property
    def p_plus(self) -> float:
        return float(np.mean(self.outcomes > 0))


def simulate_hitting_ensemble(gamma0: float, b: float, ds: float, n_runs: int, seed: int, *,
                              max_steps: int | None = None, clock: PointerClock | None = None,
                              block: int = 2048, batch: int = DEFAULT_BATCH,
                              workers: int | None = None) -> HittingEnsemble:
    """Vectorized ensemble; run i uses noise stream i, so results match ``simulate_hitting``
    on ``make_noise_path(seed, ds, max_steps, stream=i)``."""
    _check_hitting_args(gamma0, b, ds)
    if n_runs < 1:
        raise InvalidArgumentError("n_runs must be >= 1")
    if max_steps is None:
        max_steps = int(math.ceil(50.0 * b * b / ds))

    def run(r: range):
        streams = [GaussianStream(seed, i) for i in r]
        g = np.full(len(r), float(gamma0))
        hit = np.full(len(r), np.nan)
        side = np.zeros(len(r))
        done = 0
        while done < max_steps:
            k = min(block, max_steps - done)
            todo = np.flatnonzero(np.isnan(hit))
            if todo.size == 0:
                break
            z = np.zeros((len(r), k))
            for i in range(len(r)):
                # every stream advances by the block so its draws stay aligned with step index
                zi = streams[i].normals(k)
                z[i] = zi
            g_new, h, sd = _advance(g[todo], z[todo], b, ds)
            g[todo] = g_new
            got = ~np.isnan(h)
            hit[todo[got]] = done + h[got]
            side[todo[got]] = sd[got]
            done += k
        if np.isnan(hit).any():
            raise RunawayError(f"{int(np.isnan(hit).sum())} runs did not hit +-{b} within {max_steps} steps")
        return side, hit * ds

    parts = map_batches(run, n_runs, batch=batch, workers=workers)
    side = np.concatenate([p[0] for p in parts])
    s_col = np.concatenate([p[1] for p in parts])
    t_col = clock.to_t(s_col) if clock is not None else np.full(s_col.shape, np.nan)
    return HittingEnsemble(side, s_col, np.asarray(t_col, dtype=float))


@dataclass(frozen=True)
class CollapseTimeEstimate:
    s_col: float
    t_col: float
    x_at_t_col: float
    t_col_quoted: float = 1.5e-4

    @property
    def discrepancy_factor(self) -> float:
        return self.t_col_quoted / self.t_col


def collapse_time_chain(setup: MeasurementSetup, lambda0: float = LAMBDA0_QMUPL,
                        m0: float = CONST.m_nucleon) -> CollapseTimeEstimate:
    """Compose E[S_COL] ~ b with the inverse time change.

    The literature value 1.5e-4 s for the 1 g pointer with b = 35 is carried
    along for comparison; the direct composition gives about 5.6e-6 s.
    """
    clock = setup.clock(lambda0, m0)
    s = setup.b_threshold
    t = clock.to_t(s)
    return CollapseTimeEstimate(s, t, pointer_separation(t, setup))


# --- generic single-operator collapse --------------------------------------

@dataclass
class GenericTrajectory:
    times: np.ndarray
    variance: np.ndarray
    mean_a: np.ndarray
    states: np.ndarray  # (steps + 1, dim)


def _validate_generic(H, A, psi0, hbar):
    H = np.asarray(H, dtype=complex)
    A = np.asarray(A, dtype=complex)
    psi0 = np.asarray(psi0, dtype=complex)
    d = psi0.shape[-1]
    if d > 64:
        raise InvalidArgumentError("dimension must be <= 64")
    if H.shape != (d, d) or A.shape != (d, d):
        raise InvalidArgumentError("H and A must be square matrices matching psi0")
    if not np.allclose(A, A.conj().T):
        raise InvalidArgumentError("A must be self-adjoint")
    if not np.allclose(H, H.conj().T):
        raise InvalidArgumentError("H must be self-adjoint")
    if abs(np.vdot(psi0, psi0).real - 1.0) > 1e-9:
        raise InvalidArgumentError("psi0 must be normalized")
    if not hbar > 0:
        raise InvalidArgumentError("hbar must be positive")
    return H, A, psi0


class _GenericStepper:
    def __init__(self, H, A, beta_r, beta_i, dt, hbar, max_norm_drift):
        self.U = expm(-1j * H * dt / hbar).T  # row-vector convention: psi @ U
        self.A = A
        self.AT = A.T
        self.A2T = (A @ A).T
        self.br, self.bi, self.dt = float(beta_r), float(beta_i), float(dt)
        self.max_norm_drift = max_norm_drift

    def moments(self, psi):
        Apsi = psi @ self.AT
        mean = np.einsum("bi,bi->b", psi.conj(), Apsi).real
        m2 = np.einsum("bi,bi->b", Apsi.conj(), Apsi).real
        return Apsi, mean, np.maximum(m2 - mean**2, 0.0)

    def step(self, psi, dwr, dwi):
        Apsi, mean, var = self.moments(psi)
        if self.br**2 * float(np.max(var)) * self.dt > self.max_norm_drift:
            raise StepSizeError("beta_r^2 V dt exceeds the norm-drift bound; reduce dt")
        A2psi = psi @ self.A2T
        m = mean[:, None]
        # (A - m)^2 psi = A^2 psi - 2 m A psi + m^2 psi
        cen2 = A2psi - 2.0 * m * Apsi + m**2 * psi
        cen = Apsi - m * psi
        d = (-0.5 * (self.br**2 * cen2 + self.bi**2 * A2psi) * self.dt
             + self.br * cen * dwr[:, None] + 1j * self.bi * Apsi * dwi[:, None])
        psi = psi + d
        n2 = np.einsum("bi,bi->b", psi.conj(), psi).real
        if not np.all(np.isfinite(n2)) or np.any(n2 <= 0):
            raise StepSizeError("norm became non-finite; reduce dt")
        psi = psi / np.sqrt(n2)[:, None]
        return psi @ self.U


def generic_collapse_trajectory(hamiltonian, A, beta_r: float, beta_i: float, psi0, noise: NoisePath,
                                noise_i: NoisePath | None = None, *, hbar: float = CONST.hbar,
                                max_norm_drift: float = 0.05) -> GenericTrajectory:
    """dpsi = (-iH/hbar - [b_r^2 (A-<A>)^2 + b_i^2 A^2]/2) psi dt + b_r (A-<A>) psi dW_r + i b_i A psi dW_i.

    Euler-Maruyama for the stochastic part with renormalization, then exact
    unitary propagation. ``noise_i`` drives the imaginary coupling; if omitted
    it is drawn from the same seed on stream ``noise.stream + IMAG_STREAM_OFFSET``.
    """
    H, A, psi0 = _validate_generic(hamiltonian, A, psi0, hbar)
    n = len(noise)
    if noise_i is None:
        noise_i = make_noise_path(noise.seed, noise.dt, n, stream=noise.stream + IMAG_STREAM_OFFSET)
    if len(noise_i) != n or not math.isclose(noise_i.dt, noise.dt, rel_tol=1e-12):
        raise InvalidArgumentError("noise paths must share dt and length")
    st = _GenericStepper(H, A, beta_r, beta_i, noise.dt, hbar, max_norm_drift)
    psi = psi0[None, :].copy()
    states = np.empty((n + 1, psi0.size), dtype=complex)
    var = np.empty(n + 1)
    mean = np.empty(n + 1)
    states[0] = psi[0]
    _, mean[0], var[0] = (x[0] for x in st.moments(psi))
    for j in range(n):
        psi = st.step(psi, noise.increments[j:j + 1], noise_i.increments[j:j + 1])
        states[j + 1] = psi[0]
        _, m, v = st.moments(psi)
        mean[j + 1], var[j + 1] = m[0], v[0]
    return GenericTrajectory(noise.times(), var, mean, states)


@dataclass
class GenericEnsemble:
    times: np.ndarray
    variance: np.ndarray  # (runs, records)
    projector_means: np.ndarray  # (runs, records, dim): <Pi_a> for each eigenvalue index of A
    final_states: np.ndarray


def generic_collapse_ensemble(hamiltonian, A, beta_r: float, beta_i: float, psi0, dt: float,
                              n_steps: int, n_runs: int, seed: int, *, record_every: int = 1,
                              hbar: float = CONST.hbar, max_norm_drift: float = 0.05,
                              batch: int = DEFAULT_BATCH, workers: int | None = None) -> GenericEnsemble:
    """Run i uses noise streams i and i + IMAG_STREAM_OFFSET (same as the single-run API).

    Projector expectations are taken in the eigenbasis of A (columns sorted by
    eigenvalue; degenerate eigenvalues are grouped into one projector).
    """
    H, A, psi0 = _validate_generic(hamiltonian, A, psi0, hbar)
    if n_runs < 1 or n_steps < 1 or record_every < 1:
        raise InvalidArgumentError("n_runs, n_steps and record_every must be >= 1")
    evals, evecs = np.linalg.eigh(A)
    groups = _eigen_groups(evals)
    st = _GenericStepper(H, A, beta_r, beta_i, dt, hbar, max_norm_drift)
    rec = list(range(0, n_steps + 1, record_every))
    if rec[-1] != n_steps:
        rec.append(n_steps)
    rec_set = {r: k for k, r in enumerate(rec)}
    sq = math.sqrt(dt)

    def projectors(psi):
        amp = np.abs(psi @ evecs.conj()) ** 2
        return np.stack([amp[:, g].sum(axis=1) for g in groups], axis=1)

    def run(r: range):
        b = len(r)
        zr = np.stack([GaussianStream(seed, i).normals(n_steps) for i in r]) * sq
        zi = np.stack([GaussianStream(seed, i + IMAG_STREAM_OFFSET).normals(n_steps) for i in r]) * sq
        psi = np.repeat(psi0[None, :], b, axis=0)
        var = np.empty((b, len(rec)))
        proj = np.empty((b, len(rec), len(groups)))
        var[:, 0] = st.moments(psi)[2]
        proj[:, 0] = projectors(psi)
        for j in range(n_steps):
            psi = st.step(psi, zr[:, j], zi[:, j])
            k = rec_set.get(j + 1)
            if k is not None:
                var[:, k] = st.moments(psi)[2]
                proj[:, k] = projectors(psi)
        return var, proj, psi

    parts = map_batches(run, n_runs, batch=batch, workers=workers)
    return GenericEnsemble(dt * np.asarray(rec, dtype=float),
                           np.concatenate([p[0] for p in parts]),
                           np.concatenate([p[1] for p in parts]),
                           np.concatenate([p[2] for p in parts]))


def _eigen_groups(evals: np.ndarray, tol: float = 1e-9) -> list[np.ndarray]:
    groups = []
    start = 0
    scale = max(1.0, float(np.max(np.abs(evals))))
    for i in range(1, evals.size + 1):
        if i == evals.size or evals[i] - evals[start] > tol * scale:
            groups.append(np.arange(start, i))
            start = i
    return groups


def variance_bound(v0: float, beta_r: float, t):
    """V(0) / (1 + 4 beta_r^2 V(0) t), the upper bound on E[V(t)]."""
    return v0 / (1.0 + 4.0 * beta_r**2 * v0 * np.asarray(t, dtype=float))
