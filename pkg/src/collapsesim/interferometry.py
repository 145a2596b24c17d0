"""Matter-wave interferometry: Talbot lengths, gravity limits and collapse visibility."""
from __future__ import annotations

import math
from dataclasses import dataclass

from ._toml import load_data
from .core.constants import CONST
from .core.errors import InvalidArgumentError

# A Talbot-Lau run needs the beam speed to stay roughly fixed between gratings;
# the ceiling is where the speed picked up over L_T equals the beam speed itself.
DEFAULT_SPEED_GAIN = 1.0


def _positive(**kw):
    for k, v in kw.items():
        if not v > 0:
            raise InvalidArgumentError(f"{k} must be positive, got {v!r}")


@dataclass(frozen=True)
class InterferometerSpec:
    grating_period: float
    particle_mass: float
    velocity: float
    flight_time: float
    nucleon_count: int

    def __post_init__(self):
        _positive(grating_period=self.grating_period, particle_mass=self.particle_mass,
                  velocity=self.velocity, flight_time=self.flight_time, nucleon_count=self.nucleon_count)
        if abs(self.nucleon_count * CONST.m_nucleon / self.particle_mass - 1.0) > 0.01:
            raise InvalidArgumentError("nucleon_count inconsistent with particle_mass (1% tolerance)")

    @classmethod
    def from_amu(cls, grating_period: float, mass_amu: float, velocity: float,
                 flight_time: float) -> "InterferometerSpec":
        m = mass_amu * CONST.amu
        return cls(grating_period, m, velocity, flight_time, int(round(m / CONST.m_nucleon)))

    @property
    def de_broglie_wavelength(self) -> float:
        return de_broglie_wavelength(self.particle_mass, self.velocity)

    @property
    def talbot_length(self) -> float:
        return talbot_length(self.grating_period, self.de_broglie_wavelength)


def de_broglie_wavelength(mass: float, velocity: float) -> float:
    _positive(mass=mass, velocity=velocity)
    return CONST.h / (mass * velocity)


def talbot_length(grating_period: float, lambda_db: float) -> float:
    _positive(grating_period=grating_period, lambda_db=lambda_db)
    return grating_period**2 / lambda_db


def free_fall_speed(distance: float, g: float = CONST.g_earth) -> float:
    """Speed gained falling ``distance`` from rest."""
    if distance < 0 or g < 0:
        raise InvalidArgumentError("distance and g must be non-negative")
    return math.sqrt(2.0 * g * distance)


@dataclass(frozen=True)
class GravityLimit:
    max_mass: float
    talbot_length: float
    fall_speed_at_lt: float

    @property
    def max_mass_amu(self) -> float:
        return self.max_mass / CONST.amu


def tli_gravity_limit(grating_period: float, initial_velocity: float, g: float = CONST.g_earth,
                      speed_gain: float = DEFAULT_SPEED_GAIN) -> GravityLimit:
    """Heaviest particle for which gravity spoils the beam speed by less than ``speed_gain * v``.

    A particle entering at v and falling through L_T leaves at sqrt(v^2 + 2 g L_T).
    Requiring the gain to stay below speed_gain * v gives
    L_T <= ((1 + speed_gain)^2 - 1) v^2 / (2 g), and with L_T = d^2 m v / h this
    bounds the mass. The worst orientation (beam along g) is assumed.
    """
    _positive(grating_period=grating_period, initial_velocity=initial_velocity, speed_gain=speed_gain)
    if g < 0:
        raise InvalidArgumentError("g must be non-negative")
    if g == 0:
        return GravityLimit(math.inf, math.inf, 0.0)
    v = initial_velocity
    lt = ((1.0 + speed_gain) ** 2 - 1.0) * v * v / (2.0 * g)
    m = lt * CONST.h / (grating_period**2 * v)
    return GravityLimit(m, lt, free_fall_speed(lt, g))


def visibility_damping(gamma: float, t: float, extra_rates=()) -> float:
    """exp(-(gamma + sum(extra_rates)) t); extra rates model environmental decoherence."""
    if t < 0:
        raise InvalidArgumentError("t must be non-negative")
    total = gamma + sum(extra_rates)
    if total < 0:
        raise InvalidArgumentError("rates must be non-negative")
    return math.exp(-total * t)


def interferometric_bound(nucleon_count: float, superposition_time: float) -> float:
    """Largest lambda leaving at least e^-1 visibility: 1 / (n^2 t)."""
    _positive(nucleon_count=nucleon_count, superposition_time=superposition_time)
    return 1.0 / (float(nucleon_count) ** 2 * superposition_time)


def visibility_bound(nucleon_count: float, superposition_time: float, visibility: float) -> float:
    """Bound from a measured visibility V: ln(1/V) / (n^2 t)."""
    if not 0 < visibility < 1:
        raise InvalidArgumentError("visibility must lie in (0, 1)")
    return math.log(1.0 / visibility) * interferometric_bound(nucleon_count, superposition_time)


def effective_time(nucleon_count: float, lambda_bound: float) -> float:
    """Superposition time implied by a quoted bound, t = 1 / (n^2 lambda)."""
    _positive(nucleon_count=nucleon_count, lambda_bound=lambda_bound)
    return 1.0 / (float(nucleon_count) ** 2 * lambda_bound)


@dataclass(frozen=True)
class Experiment:
    name: str
    n: int
    t: float
    r_c_regime: str
    quoted_bound: float
    inferred_t: bool
    source: str

    @property
    def lambda_max(self) -> float:
        return interferometric_bound(self.n, self.t)


def load_experiments() -> list[Experiment]:
    data = load_data("experiments.toml")
    return [Experiment(**row) for row in data["experiment"]]
