"""Gravity-related collapse scales: Karolyhazy, Diosi and Schrodinger-Newton."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .core.constants import CONST
from .core.errors import InvalidArgumentError

# Regime boundaries on q = M^3 R / (hbar^2 / G): micro below, macro above.
REGIME_LOW = 0.1
REGIME_HIGH = 10.0
WATER_DENSITY = 1000.0


def _hbar2_over_g() -> float:
    return CONST.hbar**2 / CONST.G


@dataclass(frozen=True)
class BodySpec:
    """Uniform sphere; mass, radius and density must satisfy M = (4 pi / 3) rho R^3."""

    mass: float
    radius: float
    density: float

    def __post_init__(self):
        if not (self.mass > 0 and self.radius > 0 and self.density > 0):
            raise InvalidArgumentError("mass, radius and density must be positive")
        expect = 4.0 / 3.0 * math.pi * self.density * self.radius**3
        if abs(expect / self.mass - 1.0) > 1e-6:
            raise InvalidArgumentError("mass, radius and density are inconsistent for a uniform sphere")

    @classmethod
    def from_mass_radius(cls, mass: float, radius: float) -> "BodySpec":
        if not (mass > 0 and radius > 0):
            raise InvalidArgumentError("mass and radius must be positive")
        return cls(mass, radius, mass / (4.0 / 3.0 * math.pi * radius**3))

    @classmethod
    def from_radius_density(cls, radius: float, density: float) -> "BodySpec":
        if not (density > 0 and radius > 0):
            raise InvalidArgumentError("radius and density must be positive")
        return cls(4.0 / 3.0 * math.pi * density * radius**3, radius, density)

    @property
    def regime_parameter(self) -> float:
        """M^3 R / (hbar^2 / G): small for elementary particles, large for macroscopic bodies."""
        return self.mass**3 * self.radius / _hbar2_over_g()


def _regime(q: float) -> str:
    if q < REGIME_LOW:
        return "micro"
    if q > REGIME_HIGH:
        return "macro"
    return "transition"


@dataclass(frozen=True)
class RegimeValue:
    value: float
    regime: str
    formula: str


def karolyhazy_uncertainty(s):
    """Minimal length uncertainty: (ds)^2 = (G hbar / 2 c^3)^(2/3) s^(2/3)."""
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise InvalidArgumentError("s must be positive")
    out = (CONST.G * CONST.hbar / (2.0 * CONST.c**3)) ** (1.0 / 3.0) * np.cbrt(s)
    return float(out) if out.ndim == 0 else out


def coherence_cell_micro(mass: float) -> float:
    return _hbar2_over_g() / mass**3


def coherence_cell_macro(mass: float, radius: float) -> float:
    return _hbar2_over_g() ** (1.0 / 3.0) * radius ** (2.0 / 3.0) / mass


def coherence_cell(body: BodySpec) -> RegimeValue:
    """Karolyhazy coherence width a_c with its regime tag.

    The two formulas coincide at M^3 R = hbar^2 / G; inside the transition band
    the formula of the nearer side (q < 1 micro, else macro) is reported.
    """
    q = body.regime_parameter
    reg = _regime(q)
    if q < 1.0:
        return RegimeValue(coherence_cell_micro(body.mass), reg, "micro")
    return RegimeValue(coherence_cell_macro(body.mass, body.radius), reg, "macro")


def reduction_time(mass: float, a_c: float) -> float:
    """tau_c = m a_c^2 / hbar."""
    if not (mass > 0 and a_c > 0):
        raise InvalidArgumentError("mass and a_c must be positive")
    return mass * a_c**2 / CONST.hbar


@dataclass(frozen=True)
class Transition:
    a_tr: float
    tau_tr: float
    m_tr: float


def karolyhazy_transition(density: float = WATER_DENSITY) -> Transition:
    """Size where the macro a_c equals the radius of a sphere of the given density."""
    if not density > 0:
        raise InvalidArgumentError("density must be positive")
    R = (_hbar2_over_g() ** (1.0 / 3.0) / (4.0 / 3.0 * math.pi * density)) ** 0.3
    M = 4.0 / 3.0 * math.pi * density * R**3
    return Transition(R, reduction_time(M, R), M)


def sphere_interaction_energy(d, mass: float, radius: float):
    """Mutual gravitational energy of two uniform spheres with centres ``d`` apart.

    For d >= 2R it is -G m^2 / d; inside, the overlap polynomial
    -(G m^2 / R) [6/5 - x^2/2 + 3 x^3/16 - x^5/160] with x = d / R.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise InvalidArgumentError("separation must be non-negative")
    gm2 = CONST.G * mass**2
    x = d / radius
    inner = -gm2 / radius * (1.2 - 0.5 * x**2 + 3.0 / 16.0 * x**3 - x**5 / 160.0)
    with np.errstate(divide="ignore"):
        outer = -gm2 / np.where(d > 0, d, 1.0)
    u = np.where(x < 2.0, inner, outer)
    return float(u) if u.ndim == 0 else u


def interaction_energy_rise(d, mass: float, radius: float):
    """U(d) - U(0), evaluated without cancellation at small separations."""
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise InvalidArgumentError("separation must be non-negative")
    gm2 = CONST.G * mass**2
    x = d / radius
    inner = gm2 / radius * (0.5 * x**2 - 3.0 / 16.0 * x**3 + x**5 / 160.0)
    with np.errstate(divide="ignore"):
        outer = gm2 * (1.2 / radius - 1.0 / np.where(d > 0, d, 1.0))
    du = np.where(x < 2.0, inner, outer)
    return float(du) if du.ndim == 0 else du


def diosi_damping_time(body: BodySpec, separation):
    """tau_d = hbar / [U(d) - U(0)]; infinite at zero separation."""
    d = np.asarray(separation, dtype=float)
    du = np.asarray(interaction_energy_rise(d, body.mass, body.radius))
    with np.errstate(divide="ignore"):
        tau = np.where(d > 0, CONST.hbar / np.where(d > 0, du, 1.0), np.inf)
    return float(tau) if tau.ndim == 0 else tau


def diosi_critical_length(body: BodySpec) -> RegimeValue:
    """Order-of-magnitude l_crit: (hbar^2/Gm^3)^(1/4) R^(3/4) (macro) or (hbar^2/Gm^3)^(1/2) R^(1/2) (micro)."""
    a = coherence_cell_micro(body.mass)
    q = body.regime_parameter
    if q < 1.0:
        return RegimeValue(math.sqrt(a * body.radius), _regime(q), "micro")
    return RegimeValue(a**0.25 * body.radius**0.75, _regime(q), "macro")


def diosi_critical_length_exact(body: BodySpec) -> float:
    """Root of m l^2 / hbar = tau_d(l): the width where free spreading and damping balance."""
    m = body.mass

    def f(log_l):
        l = math.exp(log_l)
        return math.log(m * l * l / CONST.hbar) - math.log(diosi_damping_time(body, l))

    guess = math.log(diosi_critical_length(body).value)
    lo, hi = guess - 5.0, guess + 5.0
    while f(lo) > 0:
        lo -= 5.0
    while f(hi) < 0:
        hi += 5.0
    return math.exp(brentq(f, lo, hi, xtol=1e-14, rtol=1e-13))


def sn_coupling(mass: float, length: float) -> float:
    """K = 2 G m^3 l / hbar^2."""
    if not (mass > 0 and length > 0):
        raise InvalidArgumentError("mass and length must be positive")
    return 2.0 * CONST.G * mass**3 * length / CONST.hbar**2


def sn_ground_width(mass: float) -> float:
    """a0 = 2 hbar^2 / (G m^3)."""
    if not mass > 0:
        raise InvalidArgumentError("mass must be positive")
    return 2.0 * _hbar2_over_g() / mass**3


def sn_mass_for_width(a0: float) -> float:
    if not a0 > 0:
        raise InvalidArgumentError("a0 must be positive")
    return (2.0 * _hbar2_over_g() / a0) ** (1.0 / 3.0)


def sn_inhibits_dispersion(mass: float, length: float) -> bool:
    """True when K reaches order unity."""
    return sn_coupling(mass, length) >= 1.0


def threshold_widths(mass: float) -> dict:
    """The critical width hbar^2/(G m^3) as it appears in each gravity model."""
    base = coherence_cell_micro(mass)
    return {
        "karolyhazy_micro_a_c": base,
        # radius at which m^3 R = hbar^2 / G, where both l_crit branches equal R
        "diosi_crossover_radius": base,
        "sn_ground_width": sn_ground_width(mass),
    }
